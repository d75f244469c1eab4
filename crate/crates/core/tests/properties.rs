use proptest::prelude::*;

use svs_tessellate::corpus::{load_manifest, ClipRecord, ManifestLine, QuerySequence, ReferenceCorpus, Task};
use svs_tessellate::embedding::{fit_cca_with, Regularization};
use svs_tessellate::predictor::{train_predictor, TrainingConfig};
use svs_tessellate::rng::SeededRng;
use svs_tessellate::tessellate::{
    knn_candidates, path_energy, tessellate_local, tessellate_viterbi, transition_energy, CandidateParams,
};
use svs_tessellate::{save_feature_matrix, Dtype, FeatureMatrix};

fn gaussian(rng: &mut SeededRng, rows: usize, cols: usize) -> FeatureMatrix {
    FeatureMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

fn corpus(rng: &mut SeededRng, n: usize, d: usize, per_video: usize) -> ReferenceCorpus {
    let sem = gaussian(rng, n, d);
    let clips = (0..n)
        .map(|j| ClipRecord::new(format!("v{:03}", j / per_video), j % per_video, sem.row(j).to_vec()))
        .collect();
    ReferenceCorpus::from_parts(Task::Summary, clips, sem, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cca_correlations_survive_affine_maps(seed in 0u64..10_000, p in 1usize..4, q in 1usize..4) {
        let mut rng = SeededRng::new(seed);
        let n = 30;
        let x = gaussian(&mut rng, n, p);
        let noise = gaussian(&mut rng, n, q);
        let mix = gaussian(&mut rng, p, q);
        let y = FeatureMatrix::from_dmatrix(&(x.to_dmatrix() * mix.to_dmatrix() + noise.to_dmatrix()));
        let k = p.min(q);
        let base = fit_cca_with(&x, &y, k, Regularization::Fixed(0.0)).unwrap();

        // well-conditioned invertible map plus a shift on each view
        let a = nalgebra::DMatrix::<f64>::identity(p, p) * 2.0 + gaussian(&mut rng, p, p).to_dmatrix() * 0.2;
        let mut xt = x.to_dmatrix() * a;
        for mut row in xt.row_iter_mut() {
            row.add_scalar_mut(3.5);
        }
        let yt = y.to_dmatrix() * -0.5;
        let moved = fit_cca_with(
            &FeatureMatrix::from_dmatrix(&xt),
            &FeatureMatrix::from_dmatrix(&yt),
            k,
            Regularization::Fixed(0.0),
        )
        .unwrap();
        for (r0, r1) in base.correlations.iter().zip(&moved.correlations) {
            prop_assert!((r0 - r1).abs() < 1e-8, "{:?} vs {:?}", base.correlations, moved.correlations);
        }
    }

    #[test]
    fn wider_candidate_sets_never_raise_the_optimum(seed in 0u64..10_000, m in 1usize..12) {
        let mut rng = SeededRng::new(seed);
        let c = corpus(&mut rng, 40, 3, 8);
        let q = QuerySequence::new("q", gaussian(&mut rng, m, 3));
        let mut last = f64::INFINITY;
        for r_prime in 1..=8 {
            let params = CandidateParams { r_prime, rel_threshold: 1e-12 };
            let path = tessellate_viterbi(&q, &c, params).unwrap();
            prop_assert!(path.path_energy <= last + 1e-12);
            last = path.path_energy;
        }
    }

    #[test]
    fn viterbi_never_worse_than_local(seed in 0u64..10_000, m in 1usize..15) {
        let mut rng = SeededRng::new(seed);
        let c = corpus(&mut rng, 30, 2, 5);
        let q = QuerySequence::new("q", gaussian(&mut rng, m, 2));
        let local = tessellate_local(&q, &c).unwrap();
        let viterbi = tessellate_viterbi(&q, &c, CandidateParams::default()).unwrap();
        prop_assert!(viterbi.path_energy <= local.path_energy + 1e-12);
        let recomputed = path_energy(&viterbi.assignments, &viterbi.data_energies, |a, b| {
            transition_energy(c.semantics(a), c.semantics(b)).unwrap()
        });
        prop_assert!((recomputed - viterbi.path_energy).abs() < 1e-9);
    }

    #[test]
    fn candidates_sorted_and_nested(seed in 0u64..10_000, r in 1usize..6) {
        let mut rng = SeededRng::new(seed);
        let c = corpus(&mut rng, 25, 4, 5);
        let q = QuerySequence::new("q", gaussian(&mut rng, 4, 4));
        let narrow = knn_candidates(&q, &c, CandidateParams { r_prime: r, rel_threshold: 0.05 }).unwrap();
        let wide = knn_candidates(&q, &c, CandidateParams { r_prime: r + 1, rel_threshold: 0.05 }).unwrap();
        for (a, b) in narrow.iter().zip(&wide) {
            prop_assert!(a.entries.windows(2).all(|w| w[0].data_energy <= w[1].data_energy));
            prop_assert!(a.entries.iter().all(|e| b.contains(e.ref_id)));
            let gap = a.entries.last().unwrap().data_energy - a.entries[0].data_energy;
            prop_assert!(gap <= -(0.05f64).ln());
        }
    }

    #[test]
    fn corpus_order_independent_of_input_order(seed in 0u64..10_000) {
        let mut rng = SeededRng::new(seed);
        let sem = gaussian(&mut rng, 12, 2);
        let clips: Vec<ClipRecord> = (0..12)
            .map(|j| ClipRecord::new(format!("v{}", j % 3), j / 3, sem.row(j).to_vec()))
            .collect();
        let a = ReferenceCorpus::from_parts(Task::Summary, clips.clone(), sem.clone(), None).unwrap();
        let mut order: Vec<usize> = (0..12).collect();
        rng.shuffle(&mut order);
        let shuffled: Vec<ClipRecord> = order.iter().map(|&i| clips[i].clone()).collect();
        let b = ReferenceCorpus::from_parts(Task::Summary, shuffled, sem.select_rows(&order), None).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn manifest_line_order_does_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SeededRng::new(4);
    save_feature_matrix(dir.path().join("app.fmat"), &gaussian(&mut rng, 9, 3), Dtype::F64).unwrap();
    let lines: Vec<String> = (0..9)
        .map(|r| {
            let mut l = ManifestLine::new(format!("video{}", r % 3), r / 3, "app.fmat", r);
            l.importance = Some(vec![r as f64; 4]);
            serde_json::to_string(&l).unwrap()
        })
        .collect();
    let write = |name: &str, order: &[usize]| {
        let text: String = order.iter().map(|&i| format!("{}\n", lines[i])).collect();
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let forward = write("a.jsonl", &[0, 1, 2, 3, 4, 5, 6, 7, 8]);
    let scrambled = write("b.jsonl", &[8, 3, 5, 0, 7, 1, 6, 2, 4]);
    let a = load_manifest(&forward, None).unwrap();
    let b = load_manifest(&scrambled, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[0].video_id, "video0");
    assert_eq!(a[1].clip_index, 1);
}

#[test]
fn predictor_training_is_deterministic() {
    let mut rng = SeededRng::new(12);
    let mut c = corpus(&mut rng, 24, 3, 6);
    c.svs_appearance = Some(gaussian(&mut rng, 24, 3));
    let config = TrainingConfig {
        hidden: 6,
        epochs: 5,
        learning_rate: 1e-2,
        seed: 99,
        ..TrainingConfig::default()
    };
    let a = train_predictor(&c, &config).unwrap();
    let b = train_predictor(&c, &config).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.loss_history, b.loss_history);
    let other = train_predictor(&c, &TrainingConfig { seed: 100, ..config }).unwrap();
    assert_ne!(a.model, other.model);
}
