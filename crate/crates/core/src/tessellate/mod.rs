//! Candidate retrieval, the path energy model and the local and restricted
//! Viterbi tessellations.
//!
//! Energies are negative log-probabilities with constants dropped: the data
//! term is `‖Uᴬᵢ − Vˢⱼ‖²`, the smoothness term `‖Vˢⱼᵢ − Vˢⱼᵢ₋₁‖²`, and the
//! uniform prior on the first assignment contributes nothing.

mod candidates;
mod energy;
mod viterbi;

use serde::{Deserialize, Serialize};

pub use candidates::{knn_candidates, Candidate, CandidateParams, CandidateSet};
pub use energy::{data_energy, path_energy, squared_distance, transition_energy};
pub use viterbi::{solve_lattice, tessellate_local, tessellate_viterbi, tessellate_viterbi_on, LatticePath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Local,
    Viterbi,
    Supervised,
}

impl std::str::FromStr for Mode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "local" => Ok(Mode::Local),
            "viterbi" => Ok(Mode::Viterbi),
            "supervised" => Ok(Mode::Supervised),
            _ => Err(crate::Error::InvalidArgument(format!("unknown mode `{s}`"))),
        }
    }
}

/// Reference clip chosen for every query clip, with the energies involved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TessellationPath {
    pub mode: Mode,
    pub assignments: Vec<usize>,
    /// Data energy of each chosen assignment.
    pub data_energies: Vec<f64>,
    /// Full path energy: data terms plus smoothness terms.
    pub path_energy: f64,
}
