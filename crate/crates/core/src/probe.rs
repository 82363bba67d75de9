//! Retrain only a fresh tagging head over a frozen encoder for one epoch,
//! measuring what the encoder already represents about tags.

use serde::{Deserialize, Serialize};

use crate::analysis::ErrorSet;
use crate::error::{Error, Result};
use crate::model::{build_examples, predict_tags, seed_mix, HeadKind, ModelState, TrainConfig, Trainer};
use crate::treebank::Treebank;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// Head kind of the model whose encoder was probed.
    pub source: HeadKind,
    pub treebank: String,
    pub eval_split: String,
    pub accuracy: f64,
    pub train_sentences: usize,
    pub optimizer_steps: u64,
    pub frozen_checksum_before: String,
    pub frozen_checksum_after: String,
    pub errors: ErrorSet,
}

impl ProbeReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// A probe model: the source encoder (frozen) plus the trained probe head.
pub struct Probe {
    pub state: ModelState,
    pub source: HeadKind,
    pub optimizer_steps: u64,
    pub train_sentences: usize,
    pub frozen_checksum_before: String,
}

impl Probe {
    /// Swap in a fresh tagging head, freeze everything else and train the
    /// head for exactly one epoch over `train`.
    pub fn train(source: &ModelState, train: &Treebank, config: &TrainConfig) -> Result<Probe> {
        config.validate()?;
        if source.trained_steps == 0 {
            return Err(Error::Probe("source model has not been trained".into()));
        }
        if source.uses_tags() {
            return Err(Error::Probe(
                "encoder was trained with tag inputs; probe a model trained without tags".into(),
            ));
        }
        if train.sentences.is_empty() {
            return Err(Error::EmptyTreebank);
        }
        let mut state = source.clone();
        state.replace_head(HeadKind::Tagger, seed_mix(&[config.seed, 0x9b0be]))?;
        state.freeze_encoder();
        let before = state.frozen_checksum();

        let examples = build_examples(&state, train, None)?;
        let mut trainer = Trainer::new(&state, config);
        trainer.epoch(&mut state, &examples, 1);

        let after = state.frozen_checksum();
        if after != before {
            return Err(Error::Probe("frozen parameters changed during probing".into()));
        }
        Ok(Probe {
            state,
            source: source.kind(),
            optimizer_steps: trainer.steps(),
            train_sentences: train.sentences.len(),
            frozen_checksum_before: before,
        })
    }

    /// Tag `eval` with the probe and report its accuracy and errors.
    pub fn report(&self, eval: &Treebank, config: &TrainConfig) -> Result<ProbeReport> {
        let pred = predict_tags(&self.state, eval, config.exec)?;
        Ok(ProbeReport {
            source: self.source,
            treebank: eval.name.clone(),
            eval_split: eval.split.to_string(),
            accuracy: pred.accuracy,
            train_sentences: self.train_sentences,
            optimizer_steps: self.optimizer_steps,
            frozen_checksum_before: self.frozen_checksum_before.clone(),
            frozen_checksum_after: self.state.frozen_checksum(),
            errors: pred.errors,
        })
    }
}

/// Probe a trained model's encoder as a tagger and evaluate on `eval`.
pub fn probe_as_tagger(state: &ModelState, train: &Treebank, eval: &Treebank, config: &TrainConfig) -> Result<ProbeReport> {
    Probe::train(state, train, config)?.report(eval, config)
}

/// The same procedure applied to a tagger, replacing its own head; checks
/// that one epoch of head training recovers the original accuracy.
pub fn validate_probe(tagger: &ModelState, train: &Treebank, eval: &Treebank, config: &TrainConfig) -> Result<ProbeReport> {
    if tagger.kind() != HeadKind::Tagger {
        return Err(Error::Probe("validation expects a tagger".into()));
    }
    probe_as_tagger(tagger, train, eval, config)
}
