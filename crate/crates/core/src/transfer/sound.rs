use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sound features of one clip: 15 timesteps of 126 subband envelopes,
/// stored flattened row by row (1,890 values).
#[derive(Debug, Clone, PartialEq)]
pub struct SoundFeatureClip {
    data: Vec<f64>,
}

impl SoundFeatureClip {
    pub const ROWS: usize = 15;
    pub const CHANNELS: usize = 126;
    pub const LEN: usize = Self::ROWS * Self::CHANNELS;
    pub const CENTER_ROW: usize = 7;

    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.len() != Self::LEN {
            return Err(Error::invalid(format!(
                "sound clip needs {} values (15 x 126), got {}",
                Self::LEN,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sound clip has non-finite values"));
        }
        Ok(Self { data })
    }

    pub fn zeros() -> Self {
        Self {
            data: vec![0.0; Self::LEN],
        }
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * Self::CHANNELS..(t + 1) * Self::CHANNELS]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Maximum per-timestep L2 norm of the subband envelopes.
pub fn loudness(clip: &SoundFeatureClip) -> f64 {
    (0..SoundFeatureClip::ROWS)
        .map(|t| clip.row(t).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Rows around the impact used for the spectral centroid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CentroidWindow {
    /// The single center row (index 7).
    #[default]
    CenterRow,
    /// Mean of rows 6, 7 and 8.
    ThreeRows,
}

/// Energy-weighted mean channel index of the center row.
pub fn centroid(clip: &SoundFeatureClip) -> Result<f64> {
    centroid_with(clip, CentroidWindow::CenterRow)
}

pub fn centroid_with(clip: &SoundFeatureClip, window: CentroidWindow) -> Result<f64> {
    let c = SoundFeatureClip::CENTER_ROW;
    let rows = match window {
        CentroidWindow::CenterRow => c..c + 1,
        CentroidWindow::ThreeRows => c - 1..c + 2,
    };
    let mut energy = vec![0.0; SoundFeatureClip::CHANNELS];
    for t in rows {
        for (e, v) in energy.iter_mut().zip(clip.row(t)) {
            *e += v;
        }
    }
    let total: f64 = energy.iter().sum();
    if total == 0.0 {
        return Err(Error::UndefinedResult(
            "centroid of a zero-energy center window".into(),
        ));
    }
    let weighted: f64 = energy.iter().enumerate().map(|(k, e)| k as f64 * e).sum();
    Ok(weighted / total)
}
