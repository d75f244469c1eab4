use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::matrix::FeatureMatrix;

/// Principal-component projection fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `out_dim x input_dim`, orthonormal rows.
    pub components: FeatureMatrix,
    /// Per-component sample variance, non-increasing. Zero marks a null direction.
    pub explained_variance: Vec<f64>,
}

/// Flips `v` so its largest-magnitude entry (first one on ties) is positive.
/// Returns true when a flip happened.
pub(crate) fn fix_sign(v: &mut [f64]) -> bool {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
        true
    } else {
        false
    }
}

pub(crate) fn column_means(data: &FeatureMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; data.cols()];
    for row in data.iter_rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    let n = data.rows() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

pub(crate) fn centered(data: &FeatureMatrix, mean: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(data.rows(), data.cols(), |i, j| data.row(i)[j] - mean[j])
}

/// Fits the top `out_dim` principal directions of `data` through an SVD of
/// the centered rows.
pub fn fit_pca(data: &FeatureMatrix, out_dim: usize) -> Result<PcaModel> {
    let (n, d) = (data.rows(), data.cols());
    if n < 2 {
        return Err(Error::invalid(format!("PCA needs at least 2 rows, got {n}")));
    }
    if out_dim == 0 || out_dim > d.min(n - 1) {
        return Err(Error::invalid(format!(
            "PCA out_dim {out_dim} must be in 1..={} for {n} rows of dimension {d}",
            d.min(n - 1)
        )));
    }
    let mean = column_means(data);
    let x = centered(data, &mean);
    let svd = x.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::numeric("SVD did not return right singular vectors"))?;
    let sv = &svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let s_max = order.first().map_or(0.0, |&k| sv[k]);
    let tol = s_max * (n.max(d) as f64) * f64::EPSILON;
    let mut components = FeatureMatrix::zeros(out_dim, d);
    let mut explained_variance = Vec::with_capacity(out_dim);
    for (row, &k) in order.iter().take(out_dim).enumerate() {
        let dst = components.row_mut(row);
        dst.copy_from_slice(v_t.row(k).transpose().as_slice());
        fix_sign(dst);
        let s = sv[k];
        explained_variance.push(if s <= tol { 0.0 } else { s * s / (n - 1) as f64 });
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.rows()
    }

    /// `components · (x − mean)`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("PCA input", self.input_dim(), x.len())?;
        Ok(self
            .components
            .iter_rows()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect())
    }

    pub fn transform(&self, data: &FeatureMatrix) -> Result<FeatureMatrix> {
        let rows = data
            .iter_rows()
            .map(|r| self.apply(r))
            .collect::<Result<Vec<_>>>()?;
        let mut out = FeatureMatrix::from_rows(&rows)?;
        if rows.is_empty() {
            out = FeatureMatrix::zeros(0, self.output_dim());
        }
        Ok(out)
    }

    /// Maps a reduced vector back into input space.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim("PCA reduced input", self.output_dim(), z.len())?;
        let mut out = self.mean.clone();
        for (c, w) in self.components.iter_rows().zip(z) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += w * ci;
            }
        }
        Ok(out)
    }
}

/// Sample covariance with the `n − 1` divisor, used by tests and CCA.
pub(crate) fn covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    (a.transpose() * b) / (a.nrows() as f64 - 1.0)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random(rows: usize, cols: usize, seed: u64) -> FeatureMatrix {
        let mut rng = SeededRng::new(seed);
        let data = (0..rows * cols).map(|_| rng.normal()).collect();
        FeatureMatrix::new(rows, cols, data).unwrap()
    }

    fn reconstruction_error(model: &PcaModel, data: &FeatureMatrix) -> f64 {
        data.iter_rows()
            .map(|r| {
                let back = model.reconstruct(&model.apply(r).unwrap()).unwrap();
                back.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn collinear_points() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 * 0.1, i as f64 * 0.2]).collect();
        let data = FeatureMatrix::from_rows(&rows).unwrap();
        let m = fit_pca(&data, 2).unwrap();
        let s5 = 5f64.sqrt();
        let c = m.components.row(0);
        assert!((c[0] - 1.0 / s5).abs() < 1e-10 && (c[1] - 2.0 / s5).abs() < 1e-10, "{c:?}");
        assert_eq!(m.explained_variance[1], 0.0);
    }

    #[test]
    fn full_rank_reconstruction_is_exact() {
        let data = random(30, 5, 11);
        let m = fit_pca(&data, 5).unwrap();
        assert!(reconstruction_error(&m, &data) < 1e-8);
    }

    #[test]
    fn explained_variance_matches_covariance_eigenvalues() {
        let data = random(50, 10, 5);
        let m = fit_pca(&data, 3).unwrap();
        // oracle: direct symmetric eigen-solve of the sample covariance
        let mean = column_means(&data);
        let x = centered(&data, &mean);
        let cov = covariance(&x, &x);
        let mut eig: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        for k in 0..3 {
            assert!((m.explained_variance[k] - eig[k]).abs() < 1e-10 * eig[0]);
        }
    }

    #[test]
    fn components_orthonormal_and_sign_fixed() {
        let data = random(20, 6, 2);
        let m = fit_pca(&data, 4).unwrap();
        let c = m.components.to_dmatrix();
        let gram = &c * c.transpose();
        assert!((gram - DMatrix::identity(4, 4)).abs().max() < 1e-8);
        for row in m.components.iter_rows() {
            let big = row.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(big > 0.0);
        }
        assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn wide_rank_deficient_data() {
        // 4 rows in 8 dimensions: centered rank 3
        let data = random(4, 8, 9);
        let m = fit_pca(&data, 3).unwrap();
        let c = m.components.to_dmatrix();
        assert!((&c * c.transpose() - DMatrix::identity(3, 3)).abs().max() < 1e-8);
        assert!(fit_pca(&data, 4).is_err());
    }

    #[test]
    fn reconstruction_error_non_increasing() {
        let data = random(40, 7, 3);
        let errs: Vec<f64> = (1..=7)
            .map(|k| reconstruction_error(&fit_pca(&data, k).unwrap(), &data))
            .collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{errs:?}");
    }

    #[test]
    fn apply_cases() {
        let data = random(10, 4, 1);
        let m = fit_pca(&data, 2).unwrap();
        assert!(m.apply(&m.mean).unwrap().iter().all(|v| v.abs() < 1e-15));
        let x = [0.3, -1.0, 2.0, 0.5];
        let out = m.apply(&x).unwrap();
        for (k, row) in m.components.iter_rows().enumerate() {
            let mut manual = 0.0;
            for j in 0..4 {
                manual += row[j] * (x[j] - m.mean[j]);
            }
            assert!((out[k] - manual).abs() < 1e-14);
        }
        assert!(m.apply(&[1.0]).is_err());
    }

    #[test]
    fn rejects_bad_dims() {
        let data = random(5, 3, 1);
        assert!(fit_pca(&data, 0).is_err());
        assert!(fit_pca(&data, 4).is_err());
        assert!(fit_pca(&random(1, 3, 1), 1).is_err());
    }

    #[test]
    fn deterministic() {
        let data = random(25, 6, 8);
        assert_eq!(fit_pca(&data, 3).unwrap(), fit_pca(&data, 3).unwrap());
    }
}
