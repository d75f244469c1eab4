use crate::error::{check_dim, Result};
use crate::matrix::FeatureMatrix;

#[inline]
pub fn squared_distance(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Appearance-to-semantics energy `‖u − v‖²`.
pub fn data_energy(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dim("data energy", u.len(), v.len())?;
    Ok(squared_distance(u, v))
}

/// Smoothness energy between consecutive assigned semantics.
pub fn transition_energy(v_prev: &[f64], v_cur: &[f64]) -> Result<f64> {
    check_dim("transition energy", v_prev.len(), v_cur.len())?;
    Ok(squared_distance(v_prev, v_cur))
}

/// Data terms summed in order plus transition terms summed in order.
///
/// Every tessellation mode and the brute-force oracle report energies through
/// this function so identical paths compare bitwise equal.
pub fn path_energy<F>(assignments: &[usize], data_energies: &[f64], transition: F) -> f64
where
    F: Fn(usize, usize) -> f64,
{
    let data: f64 = data_energies.iter().sum();
    let smooth: f64 = assignments
        .windows(2)
        .map(|w| transition(w[0], w[1]))
        .sum();
    data + smooth
}

pub(crate) fn semantic_transition(semantics: &FeatureMatrix) -> impl Fn(usize, usize) -> f64 + '_ {
    move |a, b| squared_distance(semantics.row(a), semantics.row(b))
}
