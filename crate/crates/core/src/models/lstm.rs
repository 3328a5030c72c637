//! Single-layer LSTM reading an edit script one step at a time.
//!
//! Gate pre-activations are `W [x; h] + b` with the rows of `W` stacked as
//! input, forget, output and cell-candidate blocks of `hidden_dim` rows each.
//! The score is the sigmoid of an affine readout of the last hidden state.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::{bce_from_logit, label_warnings, sigmoid, LabeledPair, TrainConfig, Trained};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::tree_edit::{find_edit_sequence, step_dim, vectorize_sequence, SearchConfig};

const INIT_RANGE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LSTMModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `4 * hidden_dim` rows of `input_dim + hidden_dim`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

/// Gradients with the same layout as [`LSTMModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct LstmGradients {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

struct Step {
    xh: Vec<f64>,
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LSTMModel {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let h = hidden_dim;
        LSTMModel {
            input_dim,
            hidden_dim,
            w: vec![0.0; 4 * h * (input_dim + h)],
            b: vec![0.0; 4 * h],
            w_out: vec![0.0; h],
            b_out: 0.0,
        }
    }

    /// Parameters drawn uniformly from `[-0.05, 0.05]`.
    pub fn random(input_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(input_dim, hidden_dim);
        for p in m.w.iter_mut().chain(&mut m.b).chain(&mut m.w_out) {
            *p = rng.random_range(-INIT_RANGE..=INIT_RANGE);
        }
        m.b_out = rng.random_range(-INIT_RANGE..=INIT_RANGE);
        m
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.b.len() + self.w_out.len() + 1
    }

    pub(crate) fn check(&self) -> Result<()> {
        let h = self.hidden_dim;
        if h == 0 {
            return Err(Error::InvalidRecord("hidden size must be positive".into()));
        }
        let shapes = [
            (self.w.len(), 4 * h * (self.input_dim + h)),
            (self.b.len(), 4 * h),
            (self.w_out.len(), h),
        ];
        for (found, expected) in shapes {
            if found != expected {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        if !self.b_out.is_finite() || self.w.iter().chain(&self.b).chain(&self.w_out).any(|p| !p.is_finite()) {
            return Err(Error::InvalidRecord("non-finite model parameter".into()));
        }
        Ok(())
    }

    fn check_steps(&self, steps: &[Vec<f64>]) -> Result<()> {
        match steps.iter().find(|s| s.len() != self.input_dim) {
            Some(s) => Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: s.len(),
            }),
            None => Ok(()),
        }
    }

    fn forward(&self, steps: &[Vec<f64>], mut trace: Option<&mut Vec<Step>>) -> (f64, Vec<f64>) {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let zero = [vec![0.0; d]];
        let steps = if steps.is_empty() { &zero[..] } else { steps };
        let mut hs = vec![0.0; h];
        let mut cs = vec![0.0; h];
        let mut xh = vec![0.0; d + h];
        for x in steps {
            xh[..d].copy_from_slice(x);
            xh[d..].copy_from_slice(&hs);
            let mut gates: Vec<f64> = self
                .w
                .chunks_exact(d + h)
                .zip(&self.b)
                .map(|(row, b)| b + row.iter().zip(&xh).map(|(w, v)| w * v).sum::<f64>())
                .collect();
            for (k, z) in gates.iter_mut().enumerate() {
                *z = if k < 3 * h { sigmoid(*z) } else { z.tanh() };
            }
            let c_prev = cs.clone();
            for j in 0..h {
                cs[j] = gates[h + j] * cs[j] + gates[j] * gates[3 * h + j];
            }
            let tanh_c: Vec<f64> = cs.iter().map(|c| c.tanh()).collect();
            for j in 0..h {
                hs[j] = gates[2 * h + j] * tanh_c[j];
            }
            if let Some(trace) = trace.as_deref_mut() {
                trace.push(Step {
                    xh: xh.clone(),
                    gates,
                    c_prev,
                    tanh_c,
                });
            }
        }
        let logit = self.b_out + self.w_out.iter().zip(&hs).map(|(w, v)| w * v).sum::<f64>();
        (logit, hs)
    }

    /// Pre-sigmoid score.
    pub fn logit(&self, steps: &[Vec<f64>]) -> Result<f64> {
        self.check_steps(steps)?;
        Ok(self.forward(steps, None).0)
    }

    /// Cross-entropy loss of one sequence and its gradient by
    /// backpropagation through time.
    pub fn loss_and_gradients(&self, steps: &[Vec<f64>], label: bool) -> Result<(f64, LstmGradients)> {
        self.check_steps(steps)?;
        let mut trace = Vec::with_capacity(steps.len().max(1));
        let (logit, h_last) = self.forward(steps, Some(&mut trace));
        let loss = bce_from_logit(logit, label);
        let dlogit = sigmoid(logit) - f64::from(u8::from(label));

        let (d, h) = (self.input_dim, self.hidden_dim);
        let mut g = LstmGradients {
            w: vec![0.0; self.w.len()],
            b: vec![0.0; self.b.len()],
            w_out: h_last.iter().map(|v| dlogit * v).collect(),
            b_out: dlogit,
        };
        let mut dh: Vec<f64> = self.w_out.iter().map(|w| dlogit * w).collect();
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for step in trace.iter().rev() {
            let gt = &step.gates;
            for j in 0..h {
                let (i, f, o, c) = (gt[j], gt[h + j], gt[2 * h + j], gt[3 * h + j]);
                let tc = step.tanh_c[j];
                dc[j] += dh[j] * o * (1.0 - tc * tc);
                dz[j] = dc[j] * c * i * (1.0 - i);
                dz[h + j] = dc[j] * step.c_prev[j] * f * (1.0 - f);
                dz[2 * h + j] = dh[j] * tc * o * (1.0 - o);
                dz[3 * h + j] = dc[j] * i * (1.0 - c * c);
                dc[j] *= f;
            }
            let mut dxh = vec![0.0; d + h];
            for (k, &dzk) in dz.iter().enumerate() {
                if dzk == 0.0 {
                    continue;
                }
                g.b[k] += dzk;
                let row = k * (d + h);
                for (c, &v) in step.xh.iter().enumerate() {
                    g.w[row + c] += dzk * v;
                    dxh[c] += dzk * self.w[row + c];
                }
            }
            dh.copy_from_slice(&dxh[d..]);
        }
        Ok((loss, g))
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.w);
        v.extend_from_slice(&self.b);
        v.extend_from_slice(&self.w_out);
        v.push(self.b_out);
        v
    }

    fn load_flat(&mut self, flat: &[f64]) {
        let (w, rest) = flat.split_at(self.w.len());
        let (b, rest) = rest.split_at(self.b.len());
        let (w_out, rest) = rest.split_at(self.w_out.len());
        self.w.copy_from_slice(w);
        self.b.copy_from_slice(b);
        self.w_out.copy_from_slice(w_out);
        self.b_out = rest[0];
    }
}

impl LstmGradients {
    fn add_scaled_into(&self, flat: &mut [f64], scale: f64) {
        let parts = self
            .w
            .iter()
            .chain(&self.b)
            .chain(&self.w_out)
            .chain(std::iter::once(&self.b_out));
        for (f, g) in flat.iter_mut().zip(parts) {
            *f += scale * g;
        }
    }
}

/// Probability that the candidate entails the query, from the script's step
/// vectors. An empty input is read as one all-zero step.
pub fn lstm_score(steps: &[Vec<f64>], model: &LSTMModel) -> Result<f64> {
    model.logit(steps).map(sigmoid)
}

/// Fits an LSTM to precomputed step sequences with Adam, one update per
/// batch of `batch_size` sequences.
pub fn train_lstm_on_sequences(data: &[(Vec<Vec<f64>>, bool)], config: &TrainConfig) -> Result<Trained<LSTMModel>> {
    config.validate()?;
    let warnings = label_warnings(data.iter().map(|&(_, y)| y))?;
    let input_dim = data
        .iter()
        .flat_map(|(s, _)| s.first())
        .map(Vec::len)
        .next()
        .ok_or_else(|| Error::InsufficientData("every sequence is empty".into()))?;

    let mut model = LSTMModel::random(input_dim, config.hidden_dim, config.seed);
    for (steps, _) in data {
        model.check_steps(steps)?;
    }
    let mut params = model.to_flat();
    let mut grads = vec![0.0; params.len()];
    let mut adam = Adam::new(params.len(), config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (steps, y) = &data[i];
                let (_, g) = model.loss_and_gradients(steps, *y)?;
                g.add_scaled_into(&mut grads, scale * config.weight(*y));
            }
            adam.step(&mut params, &grads);
            model.load_flat(&params);
        }
        let loss = data
            .iter()
            .map(|(steps, y)| Ok(config.weight(*y) * bce_from_logit(model.logit(steps)?, *y)))
            .sum::<Result<f64>>()?
            / data.len() as f64;
        epoch_losses.push(loss);
    }
    Ok(Trained {
        model,
        warnings,
        epoch_losses,
    })
}

/// Step vectors of the edit script from candidate to query, for each pair.
pub fn pair_sequences(
    pairs: &[LabeledPair],
    table: &EmbeddingTable,
    search: &SearchConfig,
) -> Vec<(Vec<Vec<f64>>, bool)> {
    pairs
        .par_iter()
        .map(|p| {
            let (s, t) = (
                p.candidate.tree.as_ref().expect("checked"),
                p.query.tree.as_ref().expect("checked"),
            );
            (vectorize_sequence(&find_edit_sequence(s, t, search), table), p.label)
        })
        .collect()
}

/// Trains on candidate/query pairs via their vectorized edit scripts.
pub fn train_lstm(
    pairs: &[LabeledPair],
    table: &EmbeddingTable,
    search: &SearchConfig,
    config: &TrainConfig,
) -> Result<Trained<LSTMModel>> {
    let data = pair_sequences(pairs, table, search);
    debug_assert!(data
        .iter()
        .all(|(s, _)| s.iter().all(|x| x.len() == step_dim(table.dim()))));
    train_lstm_on_sequences(&data, config)
}
