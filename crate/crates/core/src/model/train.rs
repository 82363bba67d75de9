//! Mini-batch training with dev-set model selection and early stopping.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{attachment_scores, tagging_accuracy};
use crate::nn::{Adam, Gradients, NodeId, Tape};
use crate::parallel::{chunked_sum, map_collect, Exec};
use crate::tags::TagSymbol;
use crate::treebank::{check_alignment, Treebank};

use super::config::{HeadKind, TrainConfig};
use super::inference::{parse_input, tag_input};
use super::network::SentenceInput;
use super::seed_mix;
use super::state::ModelState;

/// Per-batch gradient work is split into this many contiguous groups.
/// Fixed so that results do not depend on the thread count.
pub const GRADIENT_CHUNKS: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Tags(Vec<Option<usize>>),
    Tree {
        heads: Vec<Option<usize>>,
        relations: Vec<Option<usize>>,
    },
}

/// A model input paired with its supervision.
#[derive(Clone, Debug)]
pub struct Example {
    pub input: SentenceInput,
    pub target: Target,
}

impl Example {
    fn target_count(&self) -> usize {
        match &self.target {
            Target::Tags(t) => t.iter().flatten().count(),
            Target::Tree { heads, .. } => heads.iter().flatten().count(),
        }
    }
}

/// Tag inputs for a tag-conditioned parser, per split.
#[derive(Clone, Copy, Debug)]
pub struct TagInputs<'a> {
    pub train: &'a [Vec<TagSymbol>],
    pub dev: &'a [Vec<TagSymbol>],
}

/// Build training examples for the state's head kind.
pub fn build_examples(state: &ModelState, treebank: &Treebank, tags: Option<&[Vec<TagSymbol>]>) -> Result<Vec<Example>> {
    if let Some(t) = tags {
        check_alignment(treebank, t)?;
    }
    treebank
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let input = state.prepare(s, tags.map(|t| t[i].as_slice()))?;
            let n = input.len();
            let toks = &s.tokens[..n];
            let target = match state.kind() {
                HeadKind::Tagger => Target::Tags(toks.iter().map(|t| Some(t.upos.index())).collect()),
                HeadKind::Parser => {
                    let heads: Vec<Option<usize>> = toks
                        .iter()
                        .map(|t| (t.head <= n && t.head != t.index).then_some(t.head))
                        .collect();
                    let relations = toks
                        .iter()
                        .zip(&heads)
                        .map(|(t, h)| h.and(state.vocab.relation_id(&t.deprel)))
                        .collect();
                    Target::Tree { heads, relations }
                }
            };
            Ok(Example { input, target })
        })
        .collect()
}

fn example_loss(tape: &mut Tape, state: &ModelState, ex: &Example, rng: Option<&mut ChaCha8Rng>) -> NodeId {
    let net = state.net();
    let cfg = &state.config;
    let mut rng = rng;
    let enc = net.encode(tape, cfg, &ex.input, rng.as_deref_mut());
    match &ex.target {
        Target::Tags(t) => {
            let logits = net.tagger_logits(tape, cfg, enc, rng);
            tape.softmax_xent(logits, t.clone())
        }
        Target::Tree { heads, relations } => {
            let nodes = net.parser_nodes(tape, cfg, enc, rng);
            let arc = tape.softmax_xent(nodes.arcs, heads.clone());
            let deps = tape.slice_rows_from(nodes.rel_dep, 1);
            let head_rows = tape.gather_rows(nodes.rel_head, heads.iter().map(|h| h.unwrap_or(0)).collect());
            let rel = tape.bilinear(deps, head_rows, nodes.rel_weight);
            let rel = tape.softmax_xent(rel, relations.clone());
            tape.sum(&[arc, rel])
        }
    }
}

/// Gradients of the mean per-token loss over `batch`, and that loss.
/// `dropout_seed` of `None` disables dropout.
pub fn batch_gradients(state: &ModelState, batch: &[&Example], dropout_seed: Option<u64>, exec: Exec) -> (Gradients, f64) {
    let norm = batch.iter().map(|e| e.target_count()).sum::<usize>().max(1) as f64;
    let items: Vec<(usize, &Example)> = batch.iter().copied().enumerate().collect();
    chunked_sum(
        exec,
        &items,
        GRADIENT_CHUNKS,
        |group| {
            let mut grads = Gradients::new(&state.params);
            let mut loss = 0.0;
            for &(i, ex) in group {
                let mut rng = dropout_seed.map(|s| ChaCha8Rng::seed_from_u64(seed_mix(&[s, i as u64])));
                let mut tape = Tape::new(&state.params);
                let l = example_loss(&mut tape, state, ex, rng.as_mut());
                loss += tape.value(l)[[0, 0]];
                tape.backward(l, 1.0 / norm, &mut grads);
            }
            (grads, loss)
        },
        |(ga, la), (gb, lb)| (ga.merge(gb), la + lb),
    )
    .map(|(g, l)| (g, l / norm))
    .unwrap_or_else(|| (Gradients::new(&state.params), 0.0))
}

/// Optimizer state bound to one model.
pub struct Trainer {
    config: TrainConfig,
    adam: Adam,
}

impl Trainer {
    pub fn new(state: &ModelState, config: &TrainConfig) -> Self {
        Trainer {
            adam: Adam::new(config.adam(), &state.params),
            config: config.clone(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.adam.steps()
    }

    /// One optimizer update on `batch`; returns the batch loss before the
    /// update.
    pub fn step(&mut self, state: &mut ModelState, batch: &[&Example], dropout: bool) -> f64 {
        let seed = dropout.then(|| seed_mix(&[self.config.seed, 0xd209, self.adam.steps()]));
        let (mut grads, loss) = batch_gradients(state, batch, seed, self.config.exec);
        if let Some(max) = self.config.clip_norm {
            let norm = grads.norm();
            if norm > max {
                grads.scale(max / norm);
            }
        }
        self.adam.step(&mut state.params, &grads);
        state.trained_steps += 1;
        loss
    }

    /// One pass over `examples` in a seeded shuffled order; returns the
    /// mean batch loss.
    pub fn epoch(&mut self, state: &mut ModelState, examples: &[Example], epoch: usize) -> f64 {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed_mix(&[self.config.seed, 0x5eed, epoch as u64]));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
            total += self.step(state, &batch, true);
            batches += 1;
        }
        total / batches.max(1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_metric: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev: f64,
    pub steps: u64,
}

impl TrainHistory {
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "epoch,train_loss,dev_metric")?;
        for e in &self.epochs {
            writeln!(w, "{},{},{}", e.epoch, e.train_loss, e.dev_metric)?;
        }
        Ok(())
    }
}

/// Dev metric: tagging accuracy for taggers, LAS for parsers.
pub fn dev_metric(state: &ModelState, dev: &Treebank, examples: &[Example], config: &TrainConfig) -> Result<f64> {
    match state.kind() {
        HeadKind::Tagger => {
            let tags = map_collect(config.exec, examples, |i, ex| {
                let mut t = tag_input(state, &ex.input);
                t.resize(dev.sentences[i].len(), crate::tags::Upos::Noun);
                t
            });
            tagging_accuracy(&tags, dev)
        }
        HeadKind::Parser => {
            let trees = map_collect(config.exec, examples, |i, ex| {
                let n = dev.sentences[i].len();
                parse_input(state, &ex.input, config.decoder).map(|mut t| {
                    t.heads.resize(n, 0);
                    t.relations.resize(n, "_".into());
                    t
                })
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            Ok(attachment_scores(&trees, dev)?.las)
        }
    }
}

/// Train until `max_epochs` or until `patience` epochs pass without a dev
/// improvement, returning the best-dev snapshot.
pub fn train(
    mut state: ModelState,
    train: &Treebank,
    dev: &Treebank,
    config: &TrainConfig,
    tags: Option<TagInputs<'_>>,
) -> Result<(ModelState, TrainHistory)> {
    config.validate()?;
    if train.sentences.is_empty() || dev.sentences.is_empty() {
        return Err(Error::EmptyTreebank);
    }
    let train_ex = build_examples(&state, train, tags.map(|t| t.train))?;
    let dev_ex = build_examples(&state, dev, tags.map(|t| t.dev))?;

    let mut trainer = Trainer::new(&state, config);
    let mut history = TrainHistory {
        best_dev: f64::NEG_INFINITY,
        ..TrainHistory::default()
    };
    let mut best_params = state.params.clone();
    let mut best_steps = state.trained_steps;

    for epoch in 1..=config.max_epochs {
        let train_loss = trainer.epoch(&mut state, &train_ex, epoch);
        let metric = dev_metric(&state, dev, &dev_ex, config)?;
        log::info!("epoch {epoch}: loss {train_loss:.4} dev {metric:.4}");
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            dev_metric: metric,
        });
        if metric > history.best_dev {
            history.best_dev = metric;
            history.best_epoch = epoch;
            best_params = state.params.clone();
            best_steps = state.trained_steps;
        } else if epoch - history.best_epoch >= config.patience {
            break;
        }
    }
    history.steps = trainer.steps();
    state.params = best_params;
    state.trained_steps = best_steps;
    Ok((state, history))
}
