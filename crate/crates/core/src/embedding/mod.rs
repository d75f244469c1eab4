//! PCA and regularized CCA mapping appearance and semantics features into
//! the shared semantics-video space (SVS).

mod cca;
pub mod container;
mod pca;

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use cca::{fit_cca, fit_cca_with, CcaModel, Regularization};
pub use container::NamedMatrices;
pub use pca::{fit_pca, PcaModel};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

pub const EMBEDDING_FORMAT_VERSION: u32 = 1;
pub const SIGN_CONVENTION: &str = "largest-magnitude-positive";
pub const DEFAULT_SVS_DIM: usize = 2000;

/// How reference semantics land in the joint space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemanticsRule {
    /// Semantics vectors are projected by the semantics side of the CCA.
    Joint,
    /// Low-information labels: the semantic space is the appearance space.
    SameAsAppearance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingConfig {
    /// Optional PCA reduction of raw appearance before the joint map.
    pub pca_dim: Option<usize>,
    /// Upper bound on the joint-space dimension.
    pub svs_dim: usize,
    pub regularization: Regularization,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            pca_dim: None,
            svs_dim: DEFAULT_SVS_DIM,
            regularization: Regularization::default(),
        }
    }
}

/// Fitted transforms from raw features to the SVS.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub appearance_pca: Option<PcaModel>,
    pub cca: CcaModel,
    pub rule: SemanticsRule,
}

/// Fits the embedding on training rows. Without semantics the joint map is
/// the identity on (optionally PCA-reduced) appearance.
pub fn fit_embedding(
    appearance: &FeatureMatrix,
    semantics: Option<&FeatureMatrix>,
    config: &EmbeddingConfig,
) -> Result<EmbeddingModel> {
    let appearance_pca = config
        .pca_dim
        .map(|k| fit_pca(appearance, k))
        .transpose()?;
    let reduced = match &appearance_pca {
        Some(p) => p.transform(appearance)?,
        None => appearance.clone(),
    };
    match semantics {
        None => Ok(EmbeddingModel {
            appearance_pca,
            cca: CcaModel::identity(reduced.cols()),
            rule: SemanticsRule::SameAsAppearance,
        }),
        Some(sem) => {
            let out_dim = config.svs_dim.min(reduced.cols()).min(sem.cols());
            let cca = fit_cca_with(&reduced, sem, out_dim, config.regularization)?;
            Ok(EmbeddingModel {
                appearance_pca,
                cca,
                rule: SemanticsRule::Joint,
            })
        }
    }
}

impl EmbeddingModel {
    /// Identity map on `dim`-dimensional appearance, semantics shared.
    pub fn identity(dim: usize) -> Self {
        Self {
            appearance_pca: None,
            cca: CcaModel::identity(dim),
            rule: SemanticsRule::SameAsAppearance,
        }
    }

    pub fn svs_dim(&self) -> usize {
        self.cca.svs_dim()
    }

    pub fn appearance_input_dim(&self) -> usize {
        match &self.appearance_pca {
            Some(p) => p.input_dim(),
            None => self.cca.appearance_dim(),
        }
    }

    /// Raw appearance `A` to its SVS point (`Vᴬ` for references, `Uᴬ` for queries).
    pub fn project_appearance(&self, a: &[f64]) -> Result<Vec<f64>> {
        match &self.appearance_pca {
            Some(p) => self.cca.project_appearance(&p.apply(a)?),
            None => self.cca.project_appearance(a),
        }
    }

    /// Raw semantics `S` to `Vˢ`. Under [`SemanticsRule::SameAsAppearance`]
    /// the input is an appearance vector.
    pub fn project_semantics(&self, s: &[f64]) -> Result<Vec<f64>> {
        match self.rule {
            SemanticsRule::Joint => self.cca.project_semantics(s),
            SemanticsRule::SameAsAppearance => self.project_appearance(s),
        }
    }

    pub fn project_appearance_rows(&self, rows: &FeatureMatrix) -> Result<FeatureMatrix> {
        let out = rows
            .iter_rows()
            .map(|r| self.project_appearance(r))
            .collect::<Result<Vec<_>>>()?;
        if out.is_empty() {
            return Ok(FeatureMatrix::zeros(0, self.svs_dim()));
        }
        FeatureMatrix::from_rows(&out)
    }

    pub fn metadata(&self) -> Value {
        json!({
            "kind": "embedding",
            "format_version": EMBEDDING_FORMAT_VERSION,
            "sign_convention": SIGN_CONVENTION,
            "lambda": self.cca.lambda,
            "semantics_rule": self.rule,
            "has_pca": self.appearance_pca.is_some(),
            "dims": {
                "appearance_input": self.appearance_input_dim(),
                "appearance_reduced": self.cca.appearance_dim(),
                "semantics": self.cca.semantics_dim(),
                "svs": self.svs_dim(),
            },
        })
    }

    /// Appends this model's matrices under `prefix`.
    pub fn write_entries(&self, out: &mut NamedMatrices, prefix: &str) {
        if let Some(p) = &self.appearance_pca {
            out.push_vector(format!("{prefix}pca.mean"), &p.mean);
            out.push(format!("{prefix}pca.components"), p.components.clone());
            out.push_vector(format!("{prefix}pca.explained_variance"), &p.explained_variance);
        }
        let c = &self.cca;
        out.push(format!("{prefix}cca.proj_appearance"), c.proj_appearance.clone());
        out.push(format!("{prefix}cca.proj_semantics"), c.proj_semantics.clone());
        out.push_vector(format!("{prefix}cca.correlations"), &c.correlations);
        out.push_vector(format!("{prefix}cca.mean_appearance"), &c.mean_appearance);
        out.push_vector(format!("{prefix}cca.mean_semantics"), &c.mean_semantics);
    }

    pub fn read_entries(src: &NamedMatrices, prefix: &str, meta: &Value) -> Result<Self> {
        let bad = |what: &str| Error::invalid(format!("embedding metadata: {what}"));
        if meta.get("format_version").and_then(Value::as_u64) != Some(EMBEDDING_FORMAT_VERSION as u64) {
            return Err(bad("unsupported format_version"));
        }
        if meta.get("sign_convention").and_then(Value::as_str) != Some(SIGN_CONVENTION) {
            return Err(bad("unknown sign_convention"));
        }
        let rule: SemanticsRule = serde_json::from_value(
            meta.get("semantics_rule").cloned().ok_or_else(|| bad("missing semantics_rule"))?,
        )
        .map_err(|_| bad("bad semantics_rule"))?;
        let lambda = meta
            .get("lambda")
            .and_then(Value::as_f64)
            .ok_or_else(|| bad("missing lambda"))?;
        let has_pca = meta.get("has_pca").and_then(Value::as_bool).unwrap_or(false);
        let appearance_pca = if has_pca {
            Some(PcaModel {
                mean: src.get_vector(&format!("{prefix}pca.mean"))?,
                components: src.get(&format!("{prefix}pca.components"))?.clone(),
                explained_variance: src.get_vector(&format!("{prefix}pca.explained_variance"))?,
            })
        } else {
            None
        };
        let cca = CcaModel {
            proj_appearance: src.get(&format!("{prefix}cca.proj_appearance"))?.clone(),
            proj_semantics: src.get(&format!("{prefix}cca.proj_semantics"))?.clone(),
            correlations: src.get_vector(&format!("{prefix}cca.correlations"))?,
            lambda,
            mean_appearance: src.get_vector(&format!("{prefix}cca.mean_appearance"))?,
            mean_semantics: src.get_vector(&format!("{prefix}cca.mean_semantics"))?,
        };
        if cca.proj_appearance.cols() != cca.mean_appearance.len()
            || cca.proj_semantics.cols() != cca.mean_semantics.len()
            || cca.proj_semantics.rows() != cca.proj_appearance.rows()
        {
            return Err(bad("inconsistent CCA shapes"));
        }
        if let Some(p) = &appearance_pca {
            if p.components.rows() != cca.appearance_dim() || p.components.cols() != p.mean.len() {
                return Err(bad("inconsistent PCA shapes"));
            }
        }
        Ok(Self {
            appearance_pca,
            cca,
            rule,
        })
    }

    pub fn to_container(&self) -> NamedMatrices {
        let mut out = NamedMatrices::new(self.metadata());
        self.write_entries(&mut out, "");
        out
    }

    pub fn from_container(c: &NamedMatrices) -> Result<Self> {
        if c.metadata.get("kind").and_then(Value::as_str) != Some("embedding") {
            return Err(Error::invalid("container does not hold an embedding model"));
        }
        Self::read_entries(c, "", &c.metadata)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&NamedMatrices::load(path)?)
    }
}
