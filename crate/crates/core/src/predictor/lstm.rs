//! Two-layer LSTM mapping `[Vˢᵢ₋₁ ; Uᴬᵢ]` to a prediction of `Vˢᵢ`.
//!
//! Gate rows are stacked in the order input, forget, candidate, output.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    /// `4H x input_dim`
    pub w_input: DMatrix<f64>,
    /// `4H x H`
    pub w_hidden: DMatrix<f64>,
    /// `4H`
    pub bias: DVector<f64>,
}

impl LstmLayer {
    pub fn hidden(&self) -> usize {
        self.w_hidden.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.ncols()
    }

    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_input: DMatrix::zeros(4 * hidden, input),
            w_hidden: DMatrix::zeros(4 * hidden, hidden),
            bias: DVector::zeros(4 * hidden),
        }
    }

    fn random(input: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / ((input + hidden) as f64).sqrt();
        let mut layer = Self::zeros(input, hidden);
        // row-major draw order so the stream does not depend on storage layout
        for r in 0..4 * hidden {
            for c in 0..input {
                layer.w_input[(r, c)] = rng.uniform_in(-bound, bound);
            }
            for c in 0..hidden {
                layer.w_hidden[(r, c)] = rng.uniform_in(-bound, bound);
            }
        }
        layer.bias.rows_mut(hidden, hidden).fill(1.0);
        layer
    }
}

/// Predictor `g`: two stacked LSTM layers and an affine read-out.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    pub layers: Vec<LstmLayer>,
    /// `svs_dim x H₂`
    pub output_weight: DMatrix<f64>,
    pub output_bias: DVector<f64>,
}

/// Hidden and cell vectors of every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<DVector<f64>>,
    pub cell: Vec<DVector<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gate activations and states of one layer at one timestep.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub input: DVector<f64>,
    pub h_prev: DVector<f64>,
    pub c_prev: DVector<f64>,
    pub i: DVector<f64>,
    pub f: DVector<f64>,
    pub g: DVector<f64>,
    pub o: DVector<f64>,
    pub c: DVector<f64>,
    pub h: DVector<f64>,
}

fn layer_step(layer: &LstmLayer, input: &DVector<f64>, h_prev: &DVector<f64>, c_prev: &DVector<f64>) -> StepCache {
    let hd = layer.hidden();
    let z = &layer.w_input * input + &layer.w_hidden * h_prev + &layer.bias;
    let i = z.rows(0, hd).map(sigmoid);
    let f = z.rows(hd, hd).map(sigmoid);
    let g = z.rows(2 * hd, hd).map(f64::tanh);
    let o = z.rows(3 * hd, hd).map(sigmoid);
    let c = f.component_mul(c_prev) + i.component_mul(&g);
    let h = o.component_mul(&c.map(f64::tanh));
    StepCache {
        input: input.clone(),
        h_prev: h_prev.clone(),
        c_prev: c_prev.clone(),
        i,
        f,
        g,
        o,
        c,
        h,
    }
}

impl PredictorModel {
    /// Randomly initialized model: weights uniform in `±1/√fan_in`, forget
    /// bias `+1`, other biases zero.
    pub fn new(svs_dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        if svs_dim == 0 || hidden == 0 {
            return Err(Error::invalid("predictor dimensions must be positive"));
        }
        let mut rng = SeededRng::new(seed);
        let l1 = LstmLayer::random(2 * svs_dim, hidden, &mut rng);
        let l2 = LstmLayer::random(hidden, hidden, &mut rng);
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut output_weight = DMatrix::zeros(svs_dim, hidden);
        for r in 0..svs_dim {
            for c in 0..hidden {
                output_weight[(r, c)] = rng.uniform_in(-bound, bound);
            }
        }
        Ok(Self {
            layers: vec![l1, l2],
            output_weight,
            output_bias: DVector::zeros(svs_dim),
        })
    }

    /// All-zero parameters.
    pub fn zeros(svs_dim: usize, hidden: usize) -> Self {
        Self {
            layers: vec![
                LstmLayer::zeros(2 * svs_dim, hidden),
                LstmLayer::zeros(hidden, hidden),
            ],
            output_weight: DMatrix::zeros(svs_dim, hidden),
            output_bias: DVector::zeros(svs_dim),
        }
    }

    pub fn svs_dim(&self) -> usize {
        self.output_bias.len()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(LstmLayer::hidden).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("predictor model: {m}")));
        if self.layers.len() != 2 {
            return bad("expected two LSTM layers");
        }
        let d = self.svs_dim();
        if self.layers[0].input_dim() != 2 * d {
            return bad("layer 1 input must be twice the SVS dimension");
        }
        if self.layers[1].input_dim() != self.layers[0].hidden() {
            return bad("layer 2 input must equal layer 1 hidden size");
        }
        for l in &self.layers {
            let h = l.hidden();
            if l.w_input.nrows() != 4 * h || l.w_hidden.nrows() != 4 * h || l.bias.len() != 4 * h {
                return bad("gate block sizes inconsistent");
            }
        }
        if self.output_weight.nrows() != d || self.output_weight.ncols() != self.layers[1].hidden() {
            return bad("output projection shape inconsistent");
        }
        if self.parameters().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return bad("non-finite parameter");
        }
        Ok(())
    }

    pub fn zero_state(&self) -> LstmState {
        LstmState {
            hidden: self.layers.iter().map(|l| DVector::zeros(l.hidden())).collect(),
            cell: self.layers.iter().map(|l| DVector::zeros(l.hidden())).collect(),
        }
    }

    /// Parameter tensors in a fixed order (column-major storage).
    pub fn parameters(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(8);
        for l in &self.layers {
            out.push(l.w_input.as_slice());
            out.push(l.w_hidden.as_slice());
            out.push(l.bias.as_slice());
        }
        out.push(self.output_weight.as_slice());
        out.push(self.output_bias.as_slice());
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(8);
        for l in &mut self.layers {
            out.push(l.w_input.as_mut_slice());
            out.push(l.w_hidden.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out.push(self.output_weight.as_mut_slice());
        out.push(self.output_bias.as_mut_slice());
        out
    }

    pub(crate) fn forward_cached(
        &self,
        input: &DVector<f64>,
        state: &LstmState,
    ) -> (DVector<f64>, Vec<StepCache>) {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let cache = layer_step(layer, &x, &state.hidden[l], &state.cell[l]);
            x = cache.h.clone();
            caches.push(cache);
        }
        let y = &self.output_weight * x + &self.output_bias;
        (y, caches)
    }

    /// One recurrent step: predicts the current clip's semantics from the
    /// previous assigned semantics and the current appearance.
    pub fn step(
        &self,
        prev_semantics: &[f64],
        cur_appearance: &[f64],
        state: &LstmState,
    ) -> Result<(Vec<f64>, LstmState)> {
        let d = self.svs_dim();
        check_dim("previous semantics", d, prev_semantics.len())?;
        check_dim("current appearance", d, cur_appearance.len())?;
        if state.hidden.len() != self.layers.len()
            || state.cell.len() != self.layers.len()
            || self
                .layers
                .iter()
                .enumerate()
                .any(|(l, layer)| state.hidden[l].len() != layer.hidden() || state.cell[l].len() != layer.hidden())
        {
            return Err(Error::invalid("LSTM state does not match model hidden sizes"));
        }
        let input = DVector::from_iterator(
            2 * d,
            prev_semantics.iter().chain(cur_appearance).copied(),
        );
        let (y, caches) = self.forward_cached(&input, state);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite LSTM activation"));
        }
        let next = LstmState {
            hidden: caches.iter().map(|c| c.h.clone()).collect(),
            cell: caches.into_iter().map(|c| c.c).collect(),
        };
        Ok((y.iter().copied().collect(), next))
    }
}

/// Free function form of [`PredictorModel::step`].
pub fn lstm_step(
    model: &PredictorModel,
    prev_semantics: &[f64],
    cur_appearance: &[f64],
    state: &LstmState,
) -> Result<(Vec<f64>, LstmState)> {
    model.step(prev_semantics, cur_appearance, state)
}

/// Teacher-forced training sequence for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSequence {
    /// `Uᴬᵢ` per clip.
    pub appearance: Vec<Vec<f64>>,
    /// Ground-truth `Vˢᵢ` per clip; also the previous-semantics input of the
    /// next step.
    pub semantics: Vec<Vec<f64>>,
}

impl TrainingSequence {
    pub fn len(&self) -> usize {
        self.semantics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.semantics.is_empty()
    }

    fn inputs(&self, d: usize) -> Vec<DVector<f64>> {
        let zero = vec![0.0; d];
        (0..self.len())
            .map(|t| {
                let prev = if t == 0 { &zero } else { &self.semantics[t - 1] };
                DVector::from_iterator(2 * d, prev.iter().chain(&self.appearance[t]).copied())
            })
            .collect()
    }

    fn check(&self, d: usize) -> Result<()> {
        if self.appearance.len() != self.semantics.len() {
            return Err(Error::invalid("sequence appearance and semantics lengths differ"));
        }
        for (a, s) in self.appearance.iter().zip(&self.semantics) {
            check_dim("sequence appearance", d, a.len())?;
            check_dim("sequence semantics", d, s.len())?;
        }
        Ok(())
    }
}

/// Mean squared prediction error over all steps and output dimensions.
pub fn sequence_loss(model: &PredictorModel, seq: &TrainingSequence) -> Result<f64> {
    let d = model.svs_dim();
    seq.check(d)?;
    if seq.is_empty() {
        return Ok(0.0);
    }
    let mut state = model.zero_state();
    let mut total = 0.0;
    for (x, target) in seq.inputs(d).iter().zip(&seq.semantics) {
        let (y, caches) = model.forward_cached(x, &state);
        total += y.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        state = LstmState {
            hidden: caches.iter().map(|c| c.h.clone()).collect(),
            cell: caches.into_iter().map(|c| c.c).collect(),
        };
    }
    Ok(total / (seq.len() * d) as f64)
}

/// Loss and its gradient with respect to every parameter, by
/// backpropagation through time. The gradient has the model's shape.
pub fn loss_and_gradient(model: &PredictorModel, seq: &TrainingSequence) -> Result<(f64, PredictorModel)> {
    let d = model.svs_dim();
    seq.check(d)?;
    let hs = model.hidden_sizes();
    let mut grad = PredictorModel {
        layers: model
            .layers
            .iter()
            .map(|l| LstmLayer::zeros(l.input_dim(), l.hidden()))
            .collect(),
        output_weight: DMatrix::zeros(d, hs[1]),
        output_bias: DVector::zeros(d),
    };
    let t_len = seq.len();
    if t_len == 0 {
        return Ok((0.0, grad));
    }
    let norm = (t_len * d) as f64;

    let mut state = model.zero_state();
    let mut caches: Vec<Vec<StepCache>> = Vec::with_capacity(t_len);
    let mut loss = 0.0;
    // gradient flowing into the top layer's hidden output at each step
    let mut dh_top: Vec<DVector<f64>> = Vec::with_capacity(t_len);
    for (x, target) in seq.inputs(d).iter().zip(&seq.semantics) {
        let (y, step) = model.forward_cached(x, &state);
        let diff = DVector::from_iterator(d, y.iter().zip(target).map(|(a, b)| a - b));
        loss += diff.norm_squared();
        let dy = diff * (2.0 / norm);
        let h_top = &step[1].h;
        grad.output_weight += &dy * h_top.transpose();
        grad.output_bias += &dy;
        dh_top.push(model.output_weight.tr_mul(&dy));
        state = LstmState {
            hidden: step.iter().map(|c| c.h.clone()).collect(),
            cell: step.iter().map(|c| c.c.clone()).collect(),
        };
        caches.push(step);
    }
    loss /= norm;
    if !loss.is_finite() {
        return Err(Error::numeric("non-finite training loss"));
    }

    let mut dh_from_above = dh_top;
    for l in (0..model.layers.len()).rev() {
        let layer = &model.layers[l];
        let hd = layer.hidden();
        let g = &mut grad.layers[l];
        let mut dh_next = DVector::zeros(hd);
        let mut dc_next = DVector::zeros(hd);
        let mut d_input: Vec<DVector<f64>> = vec![DVector::zeros(layer.input_dim()); t_len];
        for t in (0..t_len).rev() {
            let c = &caches[t][l];
            let dh = &dh_from_above[t] + &dh_next;
            let tanh_c = c.c.map(f64::tanh);
            let d_o = dh.component_mul(&tanh_c);
            let dc = dh.component_mul(&c.o).component_mul(&tanh_c.map(|v| 1.0 - v * v)) + &dc_next;
            let d_i = dc.component_mul(&c.g);
            let d_g = dc.component_mul(&c.i);
            let d_f = dc.component_mul(&c.c_prev);
            dc_next = dc.component_mul(&c.f);

            let mut dz = DVector::zeros(4 * hd);
            dz.rows_mut(0, hd).copy_from(&d_i.component_mul(&c.i.map(|v| v * (1.0 - v))));
            dz.rows_mut(hd, hd).copy_from(&d_f.component_mul(&c.f.map(|v| v * (1.0 - v))));
            dz.rows_mut(2 * hd, hd).copy_from(&d_g.component_mul(&c.g.map(|v| 1.0 - v * v)));
            dz.rows_mut(3 * hd, hd).copy_from(&d_o.component_mul(&c.o.map(|v| v * (1.0 - v))));

            g.w_input += &dz * c.input.transpose();
            g.w_hidden += &dz * c.h_prev.transpose();
            g.bias += &dz;
            d_input[t] = layer.w_input.tr_mul(&dz);
            dh_next = layer.w_hidden.tr_mul(&dz);
        }
        dh_from_above = d_input;
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_predicts_zero() {
        let m = PredictorModel::zeros(3, 4);
        let (y, s) = m.step(&[1.0, 2.0, 3.0], &[-1.0, 0.5, 0.0], &m.zero_state()).unwrap();
        assert_eq!(y, vec![0.0; 3]);
        assert!(s.cell.iter().all(|c| c.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn step_is_pure() {
        let m = PredictorModel::new(3, 5, 1).unwrap();
        let s0 = m.zero_state();
        let a = m.step(&[0.1, 0.2, 0.3], &[0.3, 0.2, 0.1], &s0).unwrap();
        let b = m.step(&[0.1, 0.2, 0.3], &[0.3, 0.2, 0.1], &s0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_errors() {
        let m = PredictorModel::new(3, 5, 1).unwrap();
        assert!(m.step(&[0.1], &[0.3, 0.2, 0.1], &m.zero_state()).is_err());
        let other = PredictorModel::new(3, 6, 1).unwrap();
        assert!(m.step(&[0.0; 3], &[0.0; 3], &other.zero_state()).is_err());
    }

    #[test]
    fn init_shapes_and_forget_bias() {
        let m = PredictorModel::new(6, 8, 3).unwrap();
        m.validate().unwrap();
        assert_eq!(m.hidden_sizes(), vec![8, 8]);
        assert!(m.layers[0].bias.rows(8, 8).iter().all(|v| *v == 1.0));
        let bound = 1.0 / 20f64.sqrt();
        assert!(m.layers[0].w_input.iter().all(|v| v.abs() <= bound));
    }
}
