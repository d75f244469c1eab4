use super::candidates::{check_inputs, scan};
use super::energy::{path_energy, semantic_transition};
use super::{knn_candidates, CandidateParams, CandidateSet, Mode, TessellationPath};
use crate::corpus::{QuerySequence, ReferenceCorpus};
use crate::error::{Error, Result};

/// Optimal assignment over a candidate lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePath {
    pub assignments: Vec<usize>,
    pub data_energies: Vec<f64>,
    pub energy: f64,
}

/// Minimizes `Σ data + Σ transition` over one candidate per clip.
///
/// Runs the recursion backwards (cost-to-go per candidate) and then walks
/// forwards picking, among the optimal continuations, the smallest `ref_id`;
/// this yields the lexicographically smallest optimal assignment sequence.
/// Cost is `O(M · r²)` transition evaluations.
pub fn solve_lattice<F>(candidates: &[CandidateSet], transition: F) -> Result<LatticePath>
where
    F: Fn(usize, usize) -> f64,
{
    if let Some(i) = candidates.iter().position(CandidateSet::is_empty) {
        return Err(Error::invalid(format!("clip {i} has no candidates")));
    }
    let m = candidates.len();
    if m == 0 {
        return Ok(LatticePath {
            assignments: vec![],
            data_energies: vec![],
            energy: 0.0,
        });
    }

    // cost_to_go[i][k]: best energy of clips i.. given candidate k at clip i
    let mut cost_to_go: Vec<Vec<f64>> = vec![Vec::new(); m];
    cost_to_go[m - 1] = candidates[m - 1].entries.iter().map(|c| c.data_energy).collect();
    for i in (0..m - 1).rev() {
        let next = &candidates[i + 1].entries;
        let next_cost = &cost_to_go[i + 1];
        cost_to_go[i] = candidates[i]
            .entries
            .iter()
            .map(|c| {
                let best = next
                    .iter()
                    .zip(next_cost)
                    .map(|(n, nc)| transition(c.ref_id, n.ref_id) + nc)
                    .fold(f64::INFINITY, f64::min);
                c.data_energy + best
            })
            .collect();
    }

    let mut assignments = Vec::with_capacity(m);
    let mut data_energies = Vec::with_capacity(m);
    let mut prev: Option<usize> = None;
    for i in 0..m {
        let entries = &candidates[i].entries;
        let score = |k: usize| match prev {
            None => cost_to_go[i][k],
            Some(p) => transition(p, entries[k].ref_id) + cost_to_go[i][k],
        };
        let mut pick = 0;
        let mut pick_score = score(0);
        for k in 1..entries.len() {
            let s = score(k);
            if s < pick_score || (s == pick_score && entries[k].ref_id < entries[pick].ref_id) {
                pick = k;
                pick_score = s;
            }
        }
        assignments.push(entries[pick].ref_id);
        data_energies.push(entries[pick].data_energy);
        prev = Some(entries[pick].ref_id);
    }
    let energy = path_energy(&assignments, &data_energies, &transition);
    if !energy.is_finite() {
        return Err(Error::numeric("lattice path energy is not finite"));
    }
    Ok(LatticePath {
        assignments,
        data_energies,
        energy,
    })
}

/// Per-clip nearest corpus semantics over all `N` clips; ties go to the
/// lowest `ref_id`. The reported energy includes the smoothness terms of the
/// chosen path so it is comparable across modes.
pub fn tessellate_local(query: &QuerySequence, corpus: &ReferenceCorpus) -> Result<TessellationPath> {
    check_inputs(query, corpus)?;
    if query.is_empty() {
        return Err(Error::invalid("query has no clips"));
    }
    let (assignments, data_energies): (Vec<usize>, Vec<f64>) = query
        .svs_appearance
        .iter_rows()
        .map(|u| {
            let c = scan(u, corpus, 1)[0];
            (c.ref_id, c.data_energy)
        })
        .unzip();
    let path_energy = path_energy(
        &assignments,
        &data_energies,
        semantic_transition(&corpus.svs_semantics),
    );
    Ok(TessellationPath {
        mode: Mode::Local,
        assignments,
        data_energies,
        path_energy,
    })
}

/// Restricted Viterbi: exact minimum-energy path over the thresholded
/// nearest-neighbour candidates of every clip.
pub fn tessellate_viterbi(
    query: &QuerySequence,
    corpus: &ReferenceCorpus,
    params: CandidateParams,
) -> Result<TessellationPath> {
    if query.is_empty() {
        return Err(Error::invalid("query has no clips"));
    }
    let candidates = knn_candidates(query, corpus, params)?;
    tessellate_viterbi_on(&candidates, corpus)
}

/// Viterbi over precomputed candidate sets.
pub fn tessellate_viterbi_on(candidates: &[CandidateSet], corpus: &ReferenceCorpus) -> Result<TessellationPath> {
    if let Some(bad) = candidates
        .iter()
        .flat_map(|s| &s.entries)
        .find(|c| c.ref_id >= corpus.len())
    {
        return Err(Error::invalid(format!("candidate ref_id {} outside corpus", bad.ref_id)));
    }
    let p = solve_lattice(candidates, semantic_transition(&corpus.svs_semantics))?;
    Ok(TessellationPath {
        mode: Mode::Viterbi,
        assignments: p.assignments,
        data_energies: p.data_energies,
        path_energy: p.energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ClipRecord, Task};
    use crate::matrix::FeatureMatrix;
    use crate::tessellate::Candidate;

    fn set(entries: &[(usize, f64)]) -> CandidateSet {
        CandidateSet::new(
            entries
                .iter()
                .map(|&(ref_id, data_energy)| Candidate { ref_id, data_energy })
                .collect(),
        )
    }

    fn corpus_from(points: &[Vec<f64>]) -> ReferenceCorpus {
        let clips = (0..points.len())
            .map(|i| ClipRecord::new("v", i, points[i].clone()))
            .collect();
        ReferenceCorpus::from_parts(Task::Summary, clips, FeatureMatrix::from_rows(points).unwrap(), None).unwrap()
    }

    #[test]
    fn two_clip_enumerated_case() {
        // clip 1: ids 0,1 with energies 1,2 ; clip 2: ids 2,3 with energies 2,1
        // transitions: t(0,2)=5 t(0,3)=0 t(1,2)=0 t(1,3)=5
        // enumerated totals: (0,2)=8 (0,3)=2 (1,2)=4 (1,3)=8
        let cands = [set(&[(0, 1.0), (1, 2.0)]), set(&[(2, 2.0), (3, 1.0)])];
        let t = |a: usize, b: usize| match (a, b) {
            (0, 2) | (1, 3) => 5.0,
            _ => 0.0,
        };
        let p = solve_lattice(&cands, t).unwrap();
        assert_eq!(p.assignments, vec![0, 3]);
        assert_eq!(p.energy, 2.0);
    }

    #[test]
    fn zero_transitions_reduce_to_per_clip_argmin() {
        let cands = [
            set(&[(4, 0.5), (2, 0.5), (1, 0.9)]),
            set(&[(7, 0.1), (3, 2.0)]),
            set(&[(0, 3.0)]),
        ];
        let p = solve_lattice(&cands, |_, _| 0.0).unwrap();
        assert_eq!(p.assignments, vec![2, 7, 0]);
    }

    #[test]
    fn lexicographic_tie_break() {
        // all paths cost the same
        let cands = [set(&[(5, 1.0), (3, 1.0)]), set(&[(9, 1.0), (1, 1.0)])];
        let p = solve_lattice(&cands, |_, _| 1.0).unwrap();
        assert_eq!(p.assignments, vec![3, 1]);
    }

    #[test]
    fn empty_candidate_set_is_error() {
        assert!(solve_lattice(&[set(&[])], |_, _| 0.0).is_err());
    }

    #[test]
    fn local_picks_exact_match_and_lowest_tied_id() {
        let corpus = corpus_from(&[vec![2.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]);
        let q = QuerySequence::new(
            "q",
            FeatureMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap(),
        );
        let p = tessellate_local(&q, &corpus).unwrap();
        assert_eq!(p.assignments, vec![0, 1]);
        assert_eq!(p.data_energies, vec![0.0, 1.0]);
        // smoothness term of the chosen path is included
        assert_eq!(p.path_energy, 1.0 + 5.0);
    }

    #[test]
    fn viterbi_prefers_coherent_path() {
        // query hovers between two states; a third clip sits firmly on state A
        let corpus = corpus_from(&[vec![0.0], vec![1.0]]);
        let q = QuerySequence::new(
            "q",
            FeatureMatrix::from_rows(&[vec![0.0], vec![0.55], vec![0.0]]).unwrap(),
        );
        let local = tessellate_local(&q, &corpus).unwrap();
        assert_eq!(local.assignments, vec![0, 1, 0]);
        let v = tessellate_viterbi(&q, &corpus, CandidateParams::default()).unwrap();
        assert_eq!(v.assignments, vec![0, 0, 0]);
        assert!(v.path_energy <= local.path_energy);
    }
}
