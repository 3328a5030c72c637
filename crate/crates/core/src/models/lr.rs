//! Logistic regression over the 33 edit features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::{bce_from_logit, label_warnings, sigmoid, LabeledPair, TrainConfig, Trained};
use crate::error::{Error, Result};
use crate::tree_edit::{extract_features, find_edit_sequence, SearchConfig, TreeEditFeatures, FEATURE_COUNT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LRModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LRModel {
    pub fn zeros() -> Self {
        LRModel {
            weights: vec![0.0; FEATURE_COUNT],
            bias: 0.0,
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.weights.len() != FEATURE_COUNT {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_COUNT,
                found: self.weights.len(),
            });
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidRecord("non-finite model parameter".into()));
        }
        Ok(())
    }

    /// Pre-sigmoid score.
    pub fn logit(&self, features: &TreeEditFeatures) -> Result<f64> {
        if self.weights.len() != FEATURE_COUNT {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_COUNT,
                found: self.weights.len(),
            });
        }
        Ok(logit(&self.weights, self.bias, &features.as_f64()))
    }
}

fn logit(weights: &[f64], bias: f64, x: &[f64]) -> f64 {
    bias + weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
}

/// Probability that the candidate entails the query.
pub fn lr_score(features: &TreeEditFeatures, model: &LRModel) -> Result<f64> {
    model.logit(features).map(sigmoid)
}

/// Fits the model to precomputed features.
///
/// With a single label class a `DegenerateLabels` warning is raised and only
/// the bias is fitted, giving a constant-probability model.
pub fn train_lr_on_features(data: &[(TreeEditFeatures, bool)], config: &TrainConfig) -> Result<Trained<LRModel>> {
    config.validate()?;
    let warnings = label_warnings(data.iter().map(|&(_, y)| y))?;
    let bias_only = !warnings.is_empty();
    let xs: Vec<[f64; FEATURE_COUNT]> = data.iter().map(|(f, _)| f.as_f64()).collect();

    // parameters: weights then bias
    let mut params = vec![0.0; FEATURE_COUNT + 1];
    let mut grads = vec![0.0; FEATURE_COUNT + 1];
    let mut adam = Adam::new(params.len(), config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (w, b) = params.split_at(FEATURE_COUNT);
                let y = data[i].1;
                let err = (sigmoid(logit(w, b[0], &xs[i])) - f64::from(u8::from(y))) * config.weight(y) * scale;
                for (g, x) in grads.iter_mut().zip(&xs[i]) {
                    *g += err * x;
                }
                grads[FEATURE_COUNT] += err;
            }
            for (g, w) in grads.iter_mut().zip(&params).take(FEATURE_COUNT) {
                *g = if bias_only { 0.0 } else { *g + config.l2 * w };
            }
            adam.step(&mut params, &grads);
        }
        let (w, b) = params.split_at(FEATURE_COUNT);
        let loss = xs
            .iter()
            .zip(data)
            .map(|(x, &(_, y))| config.weight(y) * bce_from_logit(logit(w, b[0], x), y))
            .sum::<f64>()
            / data.len() as f64;
        epoch_losses.push(loss);
    }
    let bias = params[FEATURE_COUNT];
    params.truncate(FEATURE_COUNT);
    Ok(Trained {
        model: LRModel { weights: params, bias },
        warnings,
        epoch_losses,
    })
}

/// Features of the edit script from candidate to query, for each pair.
pub fn pair_features(pairs: &[LabeledPair], search: &SearchConfig) -> Vec<(TreeEditFeatures, bool)> {
    pairs
        .par_iter()
        .map(|p| {
            let (s, t) = (
                p.candidate.tree.as_ref().expect("checked"),
                p.query.tree.as_ref().expect("checked"),
            );
            let seq = find_edit_sequence(s, t, search);
            (extract_features(&seq, s, t), p.label)
        })
        .collect()
}

/// Trains on candidate/query pairs via their edit-script features.
pub fn train_lr(pairs: &[LabeledPair], search: &SearchConfig, config: &TrainConfig) -> Result<Trained<LRModel>> {
    train_lr_on_features(&pair_features(pairs, search), config)
}
