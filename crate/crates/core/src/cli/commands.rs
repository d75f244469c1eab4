use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::read_config;
use super::*;
use crate::corpus::{
    build_corpus as embed_corpus, load_manifest, manifest_feature_files, queries_from_records, ActionLabel,
    BuiltCorpus, ClipRecord, ManifestLine, DATA_DIR_ENV,
};
use crate::embedding::container::CONTAINER_MAGIC;
use crate::embedding::{fit_embedding as fit, EmbeddingConfig, EmbeddingModel};
use crate::io::{sha256_file, write_atomic};
use crate::matrix::{Dtype, FeatureMatrix};
use crate::predictor::{tessellate_supervised, train_predictor as train, PredictorModel};
use crate::synth::{generate, SynthSpec};
use crate::tessellate::{tessellate_local, tessellate_viterbi};
use crate::transfer::{
    centroid_with, importance_from_clips, intervals_from_labels, loudness, mean_ap, regression_metrics,
    select_budget, fmeasure, ClassResults, Interval, SoundFeatureClip, SummarySelection,
};

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn data_root() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

fn base_config(arg: &ConfigArg) -> CliResult<RunConfig> {
    match &arg.config {
        Some(p) => Ok(read_config(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn require_task(cfg: &RunConfig) -> CliResult<Task> {
    cfg.task
        .ok_or_else(|| usage("a task is required (--task or the config's `task`)"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    Ok(write_atomic(path, text.as_bytes())?)
}

/// Reproducibility record written beside every output.
struct RunRecord {
    command: &'static str,
    started: Instant,
    started_unix_ms: u128,
    inputs: Vec<(&'static str, PathBuf)>,
}

impl RunRecord {
    fn start(command: &'static str) -> Self {
        Self {
            command,
            started: Instant::now(),
            started_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            inputs: Vec::new(),
        }
    }

    fn input(&mut self, role: &'static str, path: &Path) {
        self.inputs.push((role, path.to_path_buf()));
    }

    fn manifest_inputs(&mut self, role: &'static str, manifest: &Path) -> CliResult {
        self.input(role, manifest);
        for f in manifest_feature_files(manifest, data_root().as_deref())? {
            self.inputs.push(("feature-file", f));
        }
        Ok(())
    }

    fn finish(self, at: &Path, config: &RunConfig, arguments: Value, outputs: &[&Path]) -> CliResult {
        let inputs = self
            .inputs
            .iter()
            .map(|(role, p)| {
                Ok(json!({
                    "role": role,
                    "path": p.display().to_string(),
                    "sha256": sha256_file(p)?,
                }))
            })
            .collect::<Result<Vec<_>, Error>>()?;
        let manifest = json!({
            "command": self.command,
            "version": version_info(),
            "config": config,
            "arguments": arguments,
            "inputs": inputs,
            "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "started_unix_ms": self.started_unix_ms as u64,
            "wall_time_seconds": self.started.elapsed().as_secs_f64(),
        });
        write_json(at, &manifest)
    }
}

fn run_manifest_path(out: &Path) -> PathBuf {
    let mut s: OsString = out.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn nonempty(records: Vec<ClipRecord>, what: &Path) -> CliResult<Vec<ClipRecord>> {
    if records.is_empty() {
        return Err(Error::Ingestion(format!("{} lists no clips", what.display())).into());
    }
    Ok(records)
}

pub(super) fn fit_embedding(a: FitEmbeddingArgs) -> CliResult {
    let mut cfg = base_config(&a.config)?;
    cfg.task = a.task.or(cfg.task);
    if a.pca_dim.is_some() {
        cfg.pca_dim = a.pca_dim;
    }
    set(&mut cfg.svs_dim, a.svs_dim);
    set(&mut cfg.lambda_scale, a.lambda_scale);
    cfg.validate()?;
    let task = require_task(&cfg)?;

    let mut record = RunRecord::start("fit-embedding");
    record.manifest_inputs("manifest", &a.manifest)?;
    let records = nonempty(load_manifest(&a.manifest, data_root().as_deref())?, &a.manifest)?;
    let appearance = FeatureMatrix::from_rows(&records.iter().map(|r| r.appearance.clone()).collect::<Vec<_>>())?;
    let semantics = if task.semantics_same_as_appearance() {
        None
    } else {
        let rows = records
            .iter()
            .map(|r| {
                r.semantics_vector.clone().ok_or_else(|| {
                    Error::Ingestion(format!(
                        "video `{}` clip {} has no semantics vector",
                        r.video_id, r.clip_index
                    ))
                })
            })
            .collect::<Result<Vec<_>, Error>>()?;
        Some(FeatureMatrix::from_rows(&rows)?)
    };
    let config = EmbeddingConfig {
        pca_dim: cfg.pca_dim,
        svs_dim: cfg.svs_dim,
        regularization: cfg.regularization(),
    };
    let model = fit(&appearance, semantics.as_ref(), &config)?;
    log::info!("fitted embedding: {} clips, svs dim {}", records.len(), model.svs_dim());
    model.save(&a.out)?;
    record.finish(
        &run_manifest_path(&a.out),
        &cfg,
        json!({ "manifest": path_str(&a.manifest), "out": path_str(&a.out) }),
        &[&a.out],
    )
}

pub(super) fn build_corpus(a: BuildCorpusArgs) -> CliResult {
    let mut cfg = base_config(&a.config)?;
    cfg.task = a.task.or(cfg.task);
    cfg.validate()?;
    let task = require_task(&cfg)?;

    let mut record = RunRecord::start("build-corpus");
    record.manifest_inputs("manifest", &a.manifest)?;
    record.input("embedding", &a.embedding);
    let embedding = EmbeddingModel::load(&a.embedding)?;
    let records = nonempty(load_manifest(&a.manifest, data_root().as_deref())?, &a.manifest)?;
    let corpus = embed_corpus(records, &embedding, task)?;
    log::info!("built corpus: {} clips in {} videos", corpus.len(), corpus.video_boundaries.len());
    BuiltCorpus { corpus, embedding }.save(&a.out)?;
    record.finish(
        &run_manifest_path(&a.out),
        &cfg,
        json!({
            "manifest": path_str(&a.manifest),
            "embedding": path_str(&a.embedding),
            "out": path_str(&a.out),
        }),
        &[&a.out],
    )
}

fn is_container(path: &Path) -> CliResult<bool> {
    use std::io::Read;
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 4];
    match f.read_exact(&mut magic) {
        Ok(()) => Ok(&magic == CONTAINER_MAGIC),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Ok(false),
        Err(e) => Err(Error::io(path, e).into()),
    }
}

/// Accepts a built corpus, or a manifest plus embedding and task.
fn check_corpus_args(args: &CorpusArgs, cfg: &RunConfig) -> CliResult {
    if args.embedding.is_some() && cfg.task.is_none() {
        return Err(usage("--embedding needs a task (--task or the config's `task`)"));
    }
    Ok(())
}

fn load_corpus(args: &CorpusArgs, cfg: &RunConfig, record: &mut RunRecord) -> CliResult<BuiltCorpus> {
    if is_container(&args.corpus)? {
        record.input("corpus", &args.corpus);
        let built = BuiltCorpus::load(&args.corpus)?;
        if let Some(t) = cfg.task {
            if t != built.corpus.task {
                return Err(usage(format!(
                    "task `{t}` does not match the corpus task `{}`",
                    built.corpus.task
                )));
            }
        }
        return Ok(built);
    }
    let Some(emb_path) = &args.embedding else {
        return Err(usage("a manifest --corpus needs --embedding and --task"));
    };
    let task = require_task(cfg)?;
    record.manifest_inputs("corpus-manifest", &args.corpus)?;
    record.input("embedding", emb_path);
    let embedding = EmbeddingModel::load(emb_path)?;
    let records = nonempty(load_manifest(&args.corpus, data_root().as_deref())?, &args.corpus)?;
    let corpus = embed_corpus(records, &embedding, task)?;
    Ok(BuiltCorpus { corpus, embedding })
}

fn corpus_arguments(args: &CorpusArgs) -> Value {
    json!({
        "corpus": path_str(&args.corpus),
        "embedding": args.embedding.as_deref().map(path_str),
    })
}

fn thread_pool(workers: Option<usize>) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::ResourceLimit(format!("cannot start worker threads: {e}")).into())
}

pub(super) fn tessellate(a: TessellateArgs) -> CliResult {
    let mut cfg = base_config(&a.config)?;
    cfg.task = a.corpus.task.or(cfg.task);
    set(&mut cfg.mode, a.mode);
    set(&mut cfg.top_k, a.topk);
    set(&mut cfg.rel_threshold, a.rel_threshold);
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    cfg.validate()?;
    check_corpus_args(&a.corpus, &cfg)?;
    match (cfg.mode, &a.predictor) {
        (Mode::Supervised, None) => return Err(usage("--mode supervised needs --predictor")),
        (Mode::Local | Mode::Viterbi, Some(_)) => {
            return Err(usage("--predictor is only used with --mode supervised"))
        }
        _ => {}
    }
    let pool = thread_pool(cfg.workers)?;

    let mut record = RunRecord::start("tessellate");
    let built = load_corpus(&a.corpus, &cfg, &mut record)?;
    let corpus = &built.corpus;
    record.manifest_inputs("query-manifest", &a.query)?;
    let queries = queries_from_records(
        nonempty(load_manifest(&a.query, data_root().as_deref())?, &a.query)?,
        &built.embedding,
    )?;
    let predictor = match &a.predictor {
        Some(p) => {
            record.input("predictor", p);
            Some(PredictorModel::load(p)?.0)
        }
        None => None,
    };
    let params = cfg.candidate_params();
    let videos = pool.install(|| {
        queries
            .par_iter()
            .map(|(q, clips)| {
                let path = match cfg.mode {
                    Mode::Local => tessellate_local(q, corpus)?,
                    Mode::Viterbi => tessellate_viterbi(q, corpus, params)?,
                    Mode::Supervised => tessellate_supervised(q, corpus, predictor.as_ref().expect("checked"), params)?,
                };
                Ok(VideoOutput::new(&q.video_id, &path, corpus, clips))
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    log::info!("tessellated {} query videos against {} clips", videos.len(), corpus.len());
    let output = TessellationOutput {
        format_version: OUTPUT_FORMAT_VERSION,
        mode: cfg.mode,
        task: corpus.task,
        corpus_size: corpus.len(),
        videos,
    };
    write_json(&a.out, &output)?;
    let mut args = corpus_arguments(&a.corpus);
    args["query"] = json!(path_str(&a.query));
    args["predictor"] = json!(a.predictor.as_deref().map(path_str));
    args["out"] = json!(path_str(&a.out));
    record.finish(&run_manifest_path(&a.out), &cfg, args, &[&a.out])
}

pub(super) fn train_predictor(a: TrainPredictorArgs) -> CliResult {
    let mut cfg = base_config(&a.config)?;
    cfg.task = a.corpus.task.or(cfg.task);
    set(&mut cfg.hidden, a.hidden);
    set(&mut cfg.epochs, a.epochs);
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.learning_rate, a.learning_rate);
    set(&mut cfg.clip_norm, a.clip_norm);
    set(&mut cfg.batch, a.batch);
    cfg.validate()?;
    check_corpus_args(&a.corpus, &cfg)?;

    let mut record = RunRecord::start("train-predictor");
    let built = load_corpus(&a.corpus, &cfg, &mut record)?;
    let trained = train(&built.corpus, &cfg.training_config())?;
    if let (Some(first), Some(last)) = (trained.loss_history.first(), trained.loss_history.last()) {
        log::info!("trained predictor: loss {first:.6} -> {last:.6}");
    }
    trained.model.save(&a.out, &trained.loss_history)?;
    let mut args = corpus_arguments(&a.corpus);
    args["out"] = json!(path_str(&a.out));
    record.finish(&run_manifest_path(&a.out), &cfg, args, &[&a.out])
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })
}

fn find_video<'a>(pred: &'a TessellationOutput, id: &str) -> Result<&'a VideoOutput, Error> {
    pred.videos
        .iter()
        .find(|v| v.video_id == id)
        .ok_or_else(|| Error::Ingestion(format!("prediction has no video `{id}`")))
}

fn evaluate_summary(pred: &TessellationOutput, gt: &SummaryGroundTruth, budget: f64) -> Result<SummaryReport, Error> {
    if gt.videos.is_empty() {
        return Err(Error::Ingestion("summary ground truth lists no videos".into()));
    }
    let mut videos = Vec::with_capacity(gt.videos.len());
    for g in &gt.videos {
        let v = find_video(pred, &g.video_id)?;
        let counts = match &g.clip_frame_counts {
            Some(c) => c.clone(),
            None => v
                .clips
                .iter()
                .map(|c| c.frame_count)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| {
                    Error::Ingestion(format!("video `{}` has no clip frame counts", g.video_id))
                })?,
        };
        let clip_scores = v
            .clips
            .iter()
            .map(|c| {
                c.importance.as_deref().ok_or_else(|| {
                    Error::Ingestion(format!(
                        "video `{}` clip {} carries no transferred importance",
                        g.video_id, c.clip_index
                    ))
                })
            })
            .collect::<Result<Vec<_>, Error>>()?;
        let scores = importance_from_clips(&clip_scores, &counts)?;
        let selection = SummarySelection {
            keep: select_budget(&scores, budget),
            budget_fraction: budget,
        };
        videos.push(SummaryVideoScore {
            video_id: g.video_id.clone(),
            fmeasure: fmeasure(&selection, &g.annotations)?,
            kept_frames: selection.kept(),
            total_frames: scores.len(),
        });
    }
    let mean_fmeasure = videos.iter().map(|v| v.fmeasure).sum::<f64>() / videos.len() as f64;
    Ok(SummaryReport {
        budget,
        videos,
        mean_fmeasure,
    })
}

fn evaluate_detect(pred: &TessellationOutput, gt: &DetectGroundTruth, cfg: &RunConfig) -> Result<DetectReport, Error> {
    let mut detections: Vec<(String, Interval)> = Vec::new();
    for v in &pred.videos {
        let labels = v
            .clips
            .iter()
            .map(|c| {
                c.label.ok_or_else(|| {
                    Error::Ingestion(format!(
                        "video `{}` clip {} carries no transferred label",
                        v.video_id, c.clip_index
                    ))
                })
            })
            .collect::<Result<Vec<ActionLabel>, Error>>()?;
        let energies: Vec<f64> = v.clips.iter().map(|c| c.data_energy).collect();
        for iv in intervals_from_labels(&labels, &energies, gt.clip_stride, cfg.min_len)? {
            detections.push((v.video_id.clone(), iv));
        }
    }
    let truth = gt
        .intervals
        .iter()
        .map(|g| Ok((g.video_id.clone(), Interval::new(g.start, g.end, g.label, 0.0)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    let classes: BTreeSet<u32> = truth.iter().map(|(_, i)| i.label).collect();
    if classes.is_empty() {
        return Err(Error::Ingestion("detection ground truth lists no intervals".into()));
    }
    let per_class: Vec<ClassResults> = classes
        .iter()
        .map(|&c| ClassResults {
            class: c,
            detections: detections.iter().filter(|(_, i)| i.label == c).cloned().collect(),
            ground_truth: truth.iter().filter(|(_, i)| i.label == c).cloned().collect(),
        })
        .collect();
    let table = mean_ap(&per_class, &cfg.iou_thresholds, cfg.ap_interpolation)?;
    Ok(DetectReport {
        columns: table
            .thresholds
            .iter()
            .zip(&table.mean_ap)
            .map(|(&iou, &m)| ThresholdColumn { iou, mean_ap: m })
            .collect(),
        per_class: table,
        detections: detections.len(),
        ground_truth: truth.len(),
    })
}

fn evaluate_sound(pred: &TessellationOutput, gt: &SoundGroundTruth, cfg: &RunConfig) -> Result<SoundReport, Error> {
    let mut loud = (Vec::new(), Vec::new());
    let mut cent = (Vec::new(), Vec::new());
    let mut skipped = 0;
    for g in &gt.clips {
        let v = find_video(pred, &g.video_id)?;
        let clip = v
            .clips
            .iter()
            .find(|c| c.clip_index == g.clip_index)
            .ok_or_else(|| Error::Ingestion(format!("prediction has no clip {} in `{}`", g.clip_index, g.video_id)))?;
        let p = SoundFeatureClip::new(clip.sound.clone().ok_or_else(|| {
            Error::Ingestion(format!("video `{}` clip {} carries no sound", g.video_id, g.clip_index))
        })?)?;
        let t = SoundFeatureClip::new(g.sound.clone())?;
        loud.0.push(loudness(&p));
        loud.1.push(loudness(&t));
        match (centroid_with(&p, cfg.centroid_window), centroid_with(&t, cfg.centroid_window)) {
            (Ok(a), Ok(b)) => {
                cent.0.push(a);
                cent.1.push(b);
            }
            (Err(Error::UndefinedResult(_)), _) | (_, Err(Error::UndefinedResult(_))) => skipped += 1,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok(SoundReport {
        clips: gt.clips.len(),
        loudness: regression_metrics(&loud.0, &loud.1)?,
        centroid: regression_metrics(&cent.0, &cent.1)?,
        centroid_skipped: skipped,
    })
}

pub(super) fn evaluate(a: EvaluateArgs) -> CliResult {
    let mut cfg = base_config(&a.config)?;
    cfg.task = a.task.or(cfg.task);
    set(&mut cfg.budget, a.budget);
    set(&mut cfg.iou_thresholds, a.iou_thresholds);
    set(&mut cfg.ap_interpolation, a.ap_interpolation);
    set(&mut cfg.min_len, a.min_len);
    set(&mut cfg.centroid_window, a.centroid_window);
    cfg.validate()?;
    let task = require_task(&cfg)?;
    if task == Task::Text {
        return Err(usage("evaluate supports the summary, detect and sound tasks"));
    }

    let mut record = RunRecord::start("evaluate");
    record.input("prediction", &a.pred);
    record.input("ground-truth", &a.gt);
    let pred: TessellationOutput = read_json(&a.pred)?;
    if pred.task != task {
        return Err(Error::invalid(format!("prediction was made for task `{}`, not `{task}`", pred.task)).into());
    }
    let report = match task {
        Task::Summary => Report::Summary(evaluate_summary(&pred, &read_json(&a.gt)?, cfg.budget)?),
        Task::Detect => Report::Detect(evaluate_detect(&pred, &read_json(&a.gt)?, &cfg)?),
        Task::Sound => Report::Sound(evaluate_sound(&pred, &read_json(&a.gt)?, &cfg)?),
        Task::Text => unreachable!("rejected above"),
    };
    write_json(&a.out, &report)?;
    record.finish(
        &run_manifest_path(&a.out),
        &cfg,
        json!({ "pred": path_str(&a.pred), "gt": path_str(&a.gt), "out": path_str(&a.out) }),
        &[&a.out],
    )
}

fn rows_matrix(rows: impl Iterator<Item = Vec<f64>>) -> Result<FeatureMatrix, Error> {
    FeatureMatrix::from_rows(&rows.collect::<Vec<_>>())
}

fn manifest_text(clips: &[&ClipRecord], app_file: &str, sem_file: &str) -> String {
    clips
        .iter()
        .enumerate()
        .map(|(row, c)| {
            let mut line = ManifestLine::new(c.video_id.clone(), c.clip_index, app_file, row);
            line.semantics_file = Some(sem_file.into());
            line.semantics_row = Some(row);
            line.importance = c.importance.clone();
            line.label = c.label;
            line.frame_count = c.frame_count;
            line.clip_stride_frames = c.clip_stride_frames;
            serde_json::to_string(&line).expect("manifest line serializes") + "\n"
        })
        .collect()
}

pub(super) fn synth(a: SynthArgs) -> CliResult {
    let mut record = RunRecord::start("synth");
    record.input("spec", &a.spec);
    let spec: SynthSpec = read_json(&a.spec)?;
    let sc = generate(a.kind, &spec)?;

    let reference: Vec<&ClipRecord> = sc.reference.iter().collect();
    let queries: Vec<&ClipRecord> = sc.queries.iter().flatten().collect();
    let semantics = |c: &&ClipRecord| c.semantics_vector.clone().expect("generated clips carry semantics");
    let mut files: Vec<(&str, Vec<u8>)> = vec![
        ("reference_appearance.fmat", rows_matrix(reference.iter().map(|c| c.appearance.clone()))?.to_fmat_bytes(Dtype::F64)),
        ("reference_semantics.fmat", rows_matrix(reference.iter().map(semantics))?.to_fmat_bytes(Dtype::F64)),
        ("query_appearance.fmat", rows_matrix(queries.iter().map(|c| c.appearance.clone()))?.to_fmat_bytes(Dtype::F64)),
        ("query_semantics.fmat", rows_matrix(queries.iter().map(semantics))?.to_fmat_bytes(Dtype::F64)),
        (
            "reference.jsonl",
            manifest_text(&reference, "reference_appearance.fmat", "reference_semantics.fmat").into_bytes(),
        ),
        (
            "query.jsonl",
            manifest_text(&queries, "query_appearance.fmat", "query_semantics.fmat").into_bytes(),
        ),
    ];

    let states = SynthGroundTruth {
        kind: sc.kind,
        reference_states: sc.reference_states.clone(),
        queries: sc
            .queries
            .iter()
            .zip(&sc.query_states)
            .map(|(clips, s)| SynthQueryStates {
                video_id: clips[0].video_id.clone(),
                states: s.clone(),
            })
            .collect(),
    };
    let summary = SummaryGroundTruth {
        videos: sc
            .queries
            .iter()
            .map(|clips| SummaryVideo {
                video_id: clips[0].video_id.clone(),
                clip_frame_counts: Some(vec![spec.frames_per_clip; clips.len()]),
                annotations: vec![clips.iter().flat_map(|c| c.importance.clone().unwrap_or_default()).collect()],
            })
            .collect(),
    };
    let stride = spec.frames_per_clip as f64;
    let mut intervals = Vec::new();
    for clips in &sc.queries {
        let labels: Vec<ActionLabel> = clips.iter().map(|c| c.label.expect("generated clips carry labels")).collect();
        for iv in intervals_from_labels(&labels, &vec![0.0; labels.len()], stride, 0.0)? {
            intervals.push(GroundTruthInterval {
                video_id: clips[0].video_id.clone(),
                start: iv.start,
                end: iv.end,
                label: iv.label,
            });
        }
    }
    let detect = DetectGroundTruth {
        clip_stride: stride,
        intervals,
    };
    let json_bytes = |v: Value| (serde_json::to_string_pretty(&v).expect("serializes") + "\n").into_bytes();
    files.push(("ground_truth.json", json_bytes(json!(states))));
    files.push(("summary_gt.json", json_bytes(json!(summary))));
    files.push(("detect_gt.json", json_bytes(json!(detect))));

    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut outputs = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        let p = a.out.join(name);
        write_atomic(&p, bytes)?;
        outputs.push(p);
    }
    let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    record.finish(
        &a.out.join("run.json"),
        &RunConfig::default(),
        json!({ "kind": a.kind, "spec": spec, "out": path_str(&a.out) }),
        &refs,
    )
}
