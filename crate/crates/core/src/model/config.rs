use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;
use crate::parallel::Exec;

use super::decode::Decoder;

/// Shared BiLSTM encoder dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub word_dim: usize,
    /// Width of the per-token character summary.
    pub char_dim: usize,
    /// Character embedding width fed to the character LSTM.
    pub char_lstm_input: usize,
    /// Hidden size per direction of the character LSTM.
    pub char_lstm_size: usize,
    /// Tag embedding width; `None` disables tag inputs.
    pub tag_dim: Option<usize>,
    pub lstm_layers: usize,
    /// Hidden size per direction.
    pub lstm_size: usize,
    pub dropout: f64,
    /// Longer sentences are truncated.
    pub max_sentence_len: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            word_dim: 100,
            char_dim: 100,
            char_lstm_input: 100,
            char_lstm_size: 100,
            tag_dim: None,
            lstm_layers: 3,
            lstm_size: 200,
            dropout: 0.33,
            max_sentence_len: 512,
        }
    }
}

impl EncoderConfig {
    /// Per-token width entering the first BiLSTM layer.
    pub fn input_dim(&self) -> usize {
        self.word_dim + self.char_dim + self.tag_dim.unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        2 * self.lstm_size
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("word_dim", self.word_dim),
            ("char_dim", self.char_dim),
            ("char_lstm_input", self.char_lstm_input),
            ("char_lstm_size", self.char_lstm_size),
            ("lstm_layers", self.lstm_layers),
            ("lstm_size", self.lstm_size),
            ("max_sentence_len", self.max_sentence_len),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.tag_dim == Some(0) {
            return Err(Error::Config("tag_dim must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Tagger,
    Parser,
}

impl std::fmt::Display for HeadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HeadKind::Tagger => "tagger",
            HeadKind::Parser => "parser",
        })
    }
}

impl std::str::FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tagger" => Ok(HeadKind::Tagger),
            "parser" => Ok(HeadKind::Parser),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Classification head dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadConfig {
    /// Hidden layer of the tagging MLP.
    pub tagger_hidden: usize,
    pub arc_dim: usize,
    pub rel_dim: usize,
    pub leaky_slope: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            tagger_hidden: 100,
            arc_dim: 100,
            rel_dim: 50,
            leaky_slope: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub head: HeadConfig,
    pub kind: HeadKind,
    /// Prepend a learned ROOT position before the BiLSTM. Set for parsers
    /// and kept when a parser's head is swapped for a tagging head.
    pub root: bool,
}

impl ModelConfig {
    pub fn tagger(encoder: EncoderConfig, head: HeadConfig) -> Self {
        ModelConfig {
            encoder: EncoderConfig {
                tag_dim: None,
                ..encoder
            },
            head,
            kind: HeadKind::Tagger,
            root: false,
        }
    }

    pub fn parser(encoder: EncoderConfig, head: HeadConfig) -> Self {
        ModelConfig {
            encoder,
            head,
            kind: HeadKind::Parser,
            root: true,
        }
    }
}

/// Optimisation and model-selection settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Sentences per batch.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Global gradient norm clip.
    pub clip_norm: Option<f64>,
    pub decoder: Decoder,
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2e-3,
            beta1: 0.9,
            beta2: 0.9,
            epsilon: 1e-8,
            batch_size: 30,
            max_epochs: 200,
            patience: 20,
            seed: 1,
            clip_norm: Some(5.0),
            decoder: Decoder::Mst,
            exec: Exec::default(),
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be positive".into()));
        }
        if self.patience == 0 || self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience ({}) must be positive and at most max_epochs ({})",
                self.patience, self.max_epochs
            )));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let e = EncoderConfig::default();
        assert_eq!(e.output_dim(), 400);
        assert_eq!(e.input_dim(), 200);
        let e = EncoderConfig {
            tag_dim: Some(100),
            ..e
        };
        assert_eq!(e.input_dim(), 300);
        assert_eq!(e.lstm_layers, 3);
        assert_eq!(e.dropout, 0.33);
        let h = HeadConfig::default();
        assert_eq!((h.arc_dim, h.rel_dim), (100, 50));
        let t = TrainConfig::default();
        assert_eq!((t.batch_size, t.max_epochs, t.patience), (30, 200, 20));
        assert_eq!((t.beta1, t.beta2, t.learning_rate), (0.9, 0.9, 2e-3));
        t.validate().unwrap();
    }

    #[test]
    fn patience_bounded_by_epochs() {
        let t = TrainConfig {
            max_epochs: 10,
            patience: 11,
            ..TrainConfig::default()
        };
        assert!(t.validate().is_err());
        assert!(TrainConfig { patience: 10, ..t.clone() }.validate().is_ok());
        assert!(TrainConfig { patience: 0, ..t }.validate().is_err());
    }
}
