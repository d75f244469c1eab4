use nalgebra::DMatrix;

use super::pca::{centered, column_means, covariance, fix_sign};
use crate::error::{check_dim, Error, Result};
use crate::matrix::FeatureMatrix;

/// Largest acceptable condition number of a regularized within-view covariance.
const MAX_CONDITION: f64 = 1e12;

/// How the ridge term added to both within-view covariances is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    /// `scale` times the largest singular value of the cross-covariance.
    CrossCovarianceScale(f64),
    Fixed(f64),
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::CrossCovarianceScale(0.1)
    }
}

/// Regularized CCA mapping from the appearance and semantics views into the
/// joint space.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaModel {
    /// `svs_dim x appearance_dim`
    pub proj_appearance: FeatureMatrix,
    /// `svs_dim x semantics_dim`
    pub proj_semantics: FeatureMatrix,
    pub correlations: Vec<f64>,
    pub lambda: f64,
    pub mean_appearance: Vec<f64>,
    pub mean_semantics: Vec<f64>,
}

/// `(C + λI)^(-1/2)` through a symmetric eigendecomposition.
fn inverse_sqrt(c: &DMatrix<f64>, lambda: f64, view: &str) -> Result<DMatrix<f64>> {
    let d = c.nrows();
    let reg = c + DMatrix::identity(d, d) * lambda;
    let eig = reg.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || max / min > MAX_CONDITION {
        let cond = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(Error::NumericFailure {
            message: format!("regularized {view} covariance is numerically singular"),
            condition_number: Some(cond),
        });
    }
    let scale = eig.eigenvalues.map(|e| 1.0 / e.sqrt());
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&scale) * q.transpose())
}

/// Fits CCA with the default ridge (a tenth of the top cross-covariance
/// singular value).
pub fn fit_cca(app: &FeatureMatrix, sem: &FeatureMatrix, out_dim: usize) -> Result<CcaModel> {
    fit_cca_with(app, sem, out_dim, Regularization::default())
}

pub fn fit_cca_with(
    app: &FeatureMatrix,
    sem: &FeatureMatrix,
    out_dim: usize,
    regularization: Regularization,
) -> Result<CcaModel> {
    let n = app.rows();
    if sem.rows() != n {
        return Err(Error::invalid(format!(
            "CCA views have {n} and {} rows",
            sem.rows()
        )));
    }
    if n < 2 {
        return Err(Error::invalid(format!("CCA needs at least 2 rows, got {n}")));
    }
    let (da, ds) = (app.cols(), sem.cols());
    if out_dim == 0 || out_dim > da.min(ds) {
        return Err(Error::invalid(format!(
            "CCA out_dim {out_dim} must be in 1..={}",
            da.min(ds)
        )));
    }

    let mean_appearance = column_means(app);
    let mean_semantics = column_means(sem);
    let xa = centered(app, &mean_appearance);
    let xs = centered(sem, &mean_semantics);
    let c_aa = covariance(&xa, &xa);
    let c_ss = covariance(&xs, &xs);
    let c_as = covariance(&xa, &xs);

    let lambda = match regularization {
        Regularization::Fixed(l) => l,
        Regularization::CrossCovarianceScale(s) => s * c_as.singular_values().max(),
    };
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("regularizer must be finite and >= 0, got {lambda}")));
    }

    let wa = inverse_sqrt(&c_aa, lambda, "appearance")?;
    let ws = inverse_sqrt(&c_ss, lambda, "semantics")?;
    let whitened = &wa * &c_as * &ws;
    let svd = whitened.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::numeric("SVD of whitened cross-covariance failed")),
    };
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let mut proj_appearance = FeatureMatrix::zeros(out_dim, da);
    let mut proj_semantics = FeatureMatrix::zeros(out_dim, ds);
    let mut correlations = Vec::with_capacity(out_dim);
    for (row, &k) in order.iter().take(out_dim).enumerate() {
        let mut pa: Vec<f64> = (&wa * u.column(k)).iter().copied().collect();
        let mut ps: Vec<f64> = (&ws * v_t.row(k).transpose()).iter().copied().collect();
        if fix_sign(&mut pa) {
            ps.iter_mut().for_each(|x| *x = -*x);
        }
        proj_appearance.row_mut(row).copy_from_slice(&pa);
        proj_semantics.row_mut(row).copy_from_slice(&ps);
        correlations.push(sv[k]);
    }
    Ok(CcaModel {
        proj_appearance,
        proj_semantics,
        correlations,
        lambda,
        mean_appearance,
        mean_semantics,
    })
}

fn project(proj: &FeatureMatrix, mean: &[f64], x: &[f64], view: &str) -> Result<Vec<f64>> {
    check_dim(view, mean.len(), x.len())?;
    Ok(proj
        .iter_rows()
        .map(|p| p.iter().zip(x).zip(mean).map(|((p, x), m)| p * (x - m)).sum())
        .collect())
}

impl CcaModel {
    /// Identity map of dimension `dim` on both views.
    pub fn identity(dim: usize) -> Self {
        let mut eye = FeatureMatrix::zeros(dim, dim);
        for i in 0..dim {
            eye.row_mut(i)[i] = 1.0;
        }
        Self {
            proj_appearance: eye.clone(),
            proj_semantics: eye,
            correlations: vec![1.0; dim],
            lambda: 0.0,
            mean_appearance: vec![0.0; dim],
            mean_semantics: vec![0.0; dim],
        }
    }

    pub fn svs_dim(&self) -> usize {
        self.proj_appearance.rows()
    }

    pub fn appearance_dim(&self) -> usize {
        self.mean_appearance.len()
    }

    pub fn semantics_dim(&self) -> usize {
        self.mean_semantics.len()
    }

    pub fn project_appearance(&self, a: &[f64]) -> Result<Vec<f64>> {
        project(&self.proj_appearance, &self.mean_appearance, a, "appearance")
    }

    pub fn project_semantics(&self, s: &[f64]) -> Result<Vec<f64>> {
        project(&self.proj_semantics, &self.mean_semantics, s, "semantics")
    }
}
