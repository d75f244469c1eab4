use serde::{Deserialize, Serialize};

use super::energy::squared_distance;
use crate::corpus::{QuerySequence, ReferenceCorpus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub ref_id: usize,
    pub data_energy: f64,
}

/// Surviving reference clips for one query clip, ascending by
/// `(data_energy, ref_id)`. The first entry is always the global nearest
/// neighbour.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CandidateSet {
    pub entries: Vec<Candidate>,
}

impl CandidateSet {
    pub fn new(mut entries: Vec<Candidate>) -> Self {
        entries.sort_by(|a, b| {
            a.data_energy
                .total_cmp(&b.data_energy)
                .then(a.ref_id.cmp(&b.ref_id))
        });
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nearest(&self) -> Option<Candidate> {
        self.entries.first().copied()
    }

    pub fn contains(&self, ref_id: usize) -> bool {
        self.entries.iter().any(|c| c.ref_id == ref_id)
    }

    pub fn energy_of(&self, ref_id: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|c| c.ref_id == ref_id)
            .map(|c| c.data_energy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateParams {
    /// Maximum candidates per clip.
    pub r_prime: usize,
    /// Minimum probability ratio to the nearest neighbour for a candidate to
    /// survive, in (0, 1].
    pub rel_threshold: f64,
}

impl Default for CandidateParams {
    fn default() -> Self {
        Self {
            r_prime: 5,
            rel_threshold: 0.05,
        }
    }
}

impl CandidateParams {
    pub fn validate(&self) -> Result<()> {
        if self.r_prime == 0 {
            return Err(Error::invalid("r_prime must be at least 1"));
        }
        if !(self.rel_threshold > 0.0 && self.rel_threshold <= 1.0) {
            return Err(Error::invalid(format!(
                "rel_threshold must lie in (0, 1], got {}",
                self.rel_threshold
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_inputs(query: &QuerySequence, corpus: &ReferenceCorpus) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::invalid("reference corpus is empty"));
    }
    if query.svs_appearance.cols() != corpus.svs_dim() && !query.is_empty() {
        return Err(Error::invalid(format!(
            "query dimension {} does not match corpus dimension {}",
            query.svs_appearance.cols(),
            corpus.svs_dim()
        )));
    }
    Ok(())
}

/// Exhaustive top-`r_prime` scan of the corpus semantics for one point.
pub(crate) fn scan(u: &[f64], corpus: &ReferenceCorpus, r_prime: usize) -> Vec<Candidate> {
    let mut best: Vec<Candidate> = Vec::with_capacity(r_prime + 1);
    for (j, v) in corpus.svs_semantics.iter_rows().enumerate() {
        let d = squared_distance(u, v);
        if best.len() == r_prime && d >= best[r_prime - 1].data_energy {
            continue;
        }
        // later ids lose ties, so insert after every entry with energy <= d
        let at = best.partition_point(|c| c.data_energy <= d);
        best.insert(
            at,
            Candidate {
                ref_id: j,
                data_energy: d,
            },
        );
        best.truncate(r_prime);
    }
    best
}

/// Nearest corpus semantics for each query clip, restricted to `r_prime`
/// entries and thresholded on the data-term probability ratio to the nearest
/// neighbour. The comparison runs in log domain: an entry is dropped when
/// `d² − d₁² > −ln(rel_threshold)`.
pub fn knn_candidates(
    query: &QuerySequence,
    corpus: &ReferenceCorpus,
    params: CandidateParams,
) -> Result<Vec<CandidateSet>> {
    params.validate()?;
    check_inputs(query, corpus)?;
    let cutoff = -params.rel_threshold.ln();
    Ok(query
        .svs_appearance
        .iter_rows()
        .map(|u| {
            let mut entries = scan(u, corpus, params.r_prime);
            let d1 = entries[0].data_energy;
            let keep = 1 + entries[1..]
                .iter()
                .take_while(|c| c.data_energy - d1 <= cutoff)
                .count();
            entries.truncate(keep);
            CandidateSet { entries }
        })
        .collect())
}
