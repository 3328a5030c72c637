//! Entailment rerankers: logistic regression over edit features and an LSTM
//! over per-edit vectors, plus their training data and configuration.

mod adam;
mod lr;
mod lstm;
mod snli;

use serde::{Deserialize, Serialize};

pub use lr::pair_features;
pub use lr::{lr_score, train_lr, train_lr_on_features, LRModel};
pub use lstm::{lstm_score, pair_sequences, train_lstm, train_lstm_on_sequences, LSTMModel, LstmGradients};
pub use snli::{read_snli_jsonl, recast_snli, GoldLabel, SnliRecord};

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::filter::PropositionQuery;
use crate::tree_edit::SearchConfig;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A training example: does the candidate entail the query?
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledPair {
    pub candidate: Sentence,
    pub query: PropositionQuery,
    pub label: bool,
}

impl LabeledPair {
    /// Both sides must carry a dependency tree.
    pub fn new(candidate: Sentence, query: PropositionQuery, label: bool) -> Result<Self> {
        if candidate.tree.is_none() {
            return Err(Error::BadInstance(format!("candidate `{}` has no parse", candidate.id)));
        }
        if query.tree.is_none() {
            return Err(Error::BadInstance(format!("query `{}` has no parse", query.id)));
        }
        Ok(LabeledPair {
            candidate,
            query,
            label,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 penalty on the logistic regression weights (not the bias).
    pub l2: f64,
    pub hidden_dim: usize,
    /// Loss weight of positive examples; `None` leaves classes unweighted.
    pub positive_weight: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 10,
            batch_size: 32,
            l2: 1e-4,
            hidden_dim: 128,
            positive_weight: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.learning_rate, self.epsilon];
        if positive.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidConfig(
                "learning rate and epsilon must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig("Adam betas must lie in [0, 1)".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidConfig(
                "epochs, batch size and hidden size must be positive".into(),
            ));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidConfig("L2 strength must be non-negative".into()));
        }
        if self.positive_weight.is_some_and(|w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidConfig("positive weight must be positive".into()));
        }
        Ok(())
    }

    fn weight(&self, label: bool) -> f64 {
        if label {
            self.positive_weight.unwrap_or(1.0)
        } else {
            1.0
        }
    }
}

/// Non-fatal conditions met during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainWarning {
    /// Every example carried this label.
    DegenerateLabels { label: bool },
}

#[derive(Clone, Debug)]
pub struct Trained<M> {
    pub model: M,
    pub warnings: Vec<TrainWarning>,
    /// Mean training loss after each epoch.
    pub epoch_losses: Vec<f64>,
}

impl<M> Trained<M> {
    /// The model, or `DegenerateLabels` if that warning was raised.
    pub fn strict(self) -> Result<M> {
        if self
            .warnings
            .iter()
            .any(|w| matches!(w, TrainWarning::DegenerateLabels { .. }))
        {
            return Err(Error::DegenerateLabels);
        }
        Ok(self.model)
    }
}

fn label_warnings(labels: impl Iterator<Item = bool>) -> Result<Vec<TrainWarning>> {
    let (mut pos, mut neg) = (0usize, 0usize);
    for l in labels {
        if l {
            pos += 1;
        } else {
            neg += 1;
        }
    }
    match (pos, neg) {
        (0, 0) => Err(Error::InsufficientData("no training examples".into())),
        (_, 0) => Ok(vec![TrainWarning::DegenerateLabels { label: true }]),
        (0, _) => Ok(vec![TrainWarning::DegenerateLabels { label: false }]),
        _ => Ok(Vec::new()),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a logit, computed stably.
pub(crate) fn bce_from_logit(z: f64, label: bool) -> f64 {
    // log(1 + e^z) - y z
    let softplus = if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    };
    softplus - if label { z } else { 0.0 }
}

/// A trained reranker as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RerankerModel {
    Lr(LRModel),
    Lstm(LSTMModel),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub search: SearchConfig,
    #[serde(flatten)]
    pub model: RerankerModel,
}

impl ModelFile {
    pub fn new(model: RerankerModel, search: SearchConfig) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            search,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(s)?;
        if f.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidRecord(format!(
                "unsupported model format version {}",
                f.format_version
            )));
        }
        match &f.model {
            RerankerModel::Lr(m) => m.check()?,
            RerankerModel::Lstm(m) => m.check()?,
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_loss() {
        assert!((bce_from_logit(0.0, true) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_from_logit(800.0, false) - 800.0).abs() < 1e-9);
        assert!(bce_from_logit(800.0, true).abs() < 1e-12);
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert_eq!(sigmoid(-1000.0), 0.0);
    }

    #[test]
    fn config_checks() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        let bad = TrainConfig {
            learning_rate: -1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let f = ModelFile::new(RerankerModel::Lr(LRModel::zeros()), SearchConfig::default());
        let json = f.to_json().unwrap();
        assert!(json.contains("\"format_version\":1"));
        assert!(json.contains("\"kind\":\"lr\""));
        assert_eq!(ModelFile::from_json(&json).unwrap(), f);
        let wrong = json.replace("\"format_version\":1", "\"format_version\":9");
        assert!(ModelFile::from_json(&wrong).is_err());
    }
}
