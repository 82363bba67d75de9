//! Tag surprisal in context, estimated from gold training tags.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tags::Upos;
use crate::treebank::{Sentence, Treebank};

use super::errors::ErrorSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextKind {
    /// The two preceding tags.
    Bigram,
    /// The gold head's tag and the relation to it.
    HeadRelation,
}

impl fmt::Display for ContextKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContextKind::Bigram => "bigram",
            ContextKind::HeadRelation => "head-relation",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    /// Add one to every count over the 17-tag inventory.
    #[default]
    AddOne,
    /// Relative frequencies; unseen events have infinite surprisal.
    Unsmoothed,
}

/// A context symbol; `Boundary` is BOS for bigrams and ROOT for heads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContextTag {
    Boundary,
    Tag(Upos),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Context {
    Bigram(ContextTag, ContextTag),
    HeadRelation(ContextTag, String),
}

/// Context of every token in a sentence.
pub fn sentence_contexts(kind: ContextKind, sentence: &Sentence) -> Vec<Context> {
    let tags = sentence.tags();
    match kind {
        ContextKind::Bigram => (0..tags.len())
            .map(|i| {
                let prev = |k: usize| if i >= k { ContextTag::Tag(tags[i - k]) } else { ContextTag::Boundary };
                Context::Bigram(prev(2), prev(1))
            })
            .collect(),
        ContextKind::HeadRelation => sentence
            .tokens
            .iter()
            .map(|t| {
                let head = if t.head == 0 || t.head > tags.len() {
                    ContextTag::Boundary
                } else {
                    ContextTag::Tag(tags[t.head - 1])
                };
                Context::HeadRelation(head, t.deprel.clone())
            })
            .collect(),
    }
}

/// Conditional tag distribution estimated from counts.
#[derive(Clone, Debug)]
pub struct SurprisalModel {
    kind: ContextKind,
    smoothing: Smoothing,
    counts: BTreeMap<Context, [u64; Upos::COUNT]>,
}

impl SurprisalModel {
    pub fn fit(kind: ContextKind, smoothing: Smoothing, train: &Treebank) -> Self {
        let mut counts: BTreeMap<Context, [u64; Upos::COUNT]> = BTreeMap::new();
        for s in &train.sentences {
            for (ctx, tok) in sentence_contexts(kind, s).into_iter().zip(&s.tokens) {
                counts.entry(ctx).or_insert([0; Upos::COUNT])[tok.upos.index()] += 1;
            }
        }
        SurprisalModel { kind, smoothing, counts }
    }

    pub fn kind(&self) -> ContextKind {
        self.kind
    }

    pub fn probability(&self, context: &Context, tag: Upos) -> f64 {
        let row = self.counts.get(context);
        let count = row.map_or(0, |r| r[tag.index()]) as f64;
        let total = row.map_or(0, |r| r.iter().sum::<u64>()) as f64;
        match self.smoothing {
            Smoothing::AddOne => (count + 1.0) / (total + Upos::COUNT as f64),
            Smoothing::Unsmoothed if total == 0.0 => 0.0,
            Smoothing::Unsmoothed => count / total,
        }
    }

    /// `-log2 p(tag | context)`.
    pub fn surprisal(&self, context: &Context, tag: Upos) -> f64 {
        let bits = -self.probability(context, tag).log2();
        // -log2(1) is -0.0
        bits + 0.0
    }

    /// Surprisal of every token's gold tag.
    pub fn token_surprisals(&self, target: &Treebank) -> Vec<Vec<f64>> {
        target
            .sentences
            .iter()
            .map(|s| {
                sentence_contexts(self.kind, s)
                    .iter()
                    .zip(&s.tokens)
                    .map(|(c, t)| self.surprisal(c, t.upos))
                    .collect()
            })
            .collect()
    }

    /// Mean surprisal over all tokens of `target` and over the error tokens.
    pub fn stats(&self, target: &Treebank, errors: &ErrorSet) -> Result<SurprisalStats> {
        errors.check_positions(target)?;
        let mut all: BTreeMap<(Context, Upos), usize> = BTreeMap::new();
        let mut errs: BTreeMap<(Context, Upos), usize> = BTreeMap::new();
        for (si, s) in target.sentences.iter().enumerate() {
            for (ctx, tok) in sentence_contexts(self.kind, s).into_iter().zip(&s.tokens) {
                if errors.contains(si, tok.index) {
                    *errs.entry((ctx.clone(), tok.upos)).or_insert(0) += 1;
                }
                *all.entry((ctx, tok.upos)).or_insert(0) += 1;
            }
        }
        // Summing per distinct event in a fixed order keeps the means
        // independent of sentence order.
        let mean = |events: &BTreeMap<(Context, Upos), usize>| -> Option<f64> {
            let n: usize = events.values().sum();
            (n > 0).then(|| {
                events
                    .iter()
                    .map(|((c, t), &k)| k as f64 * self.surprisal(c, *t))
                    .sum::<f64>()
                    / n as f64
            })
        };
        let mean_all = mean(&all).ok_or(Error::EmptyTreebank)?;
        Ok(SurprisalStats {
            context_kind: self.kind,
            mean_all,
            mean_errors: mean(&errs),
            token_count: all.values().sum(),
            error_count: errors.len(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurprisalStats {
    pub context_kind: ContextKind,
    /// Mean bits over all target tokens.
    pub mean_all: f64,
    /// Mean bits over error tokens; absent with no errors.
    pub mean_errors: Option<f64>,
    pub token_count: usize,
    pub error_count: usize,
}

pub fn bigram_surprisal(train: &Treebank, target: &Treebank, errors: &ErrorSet, smoothing: Smoothing) -> Result<SurprisalStats> {
    SurprisalModel::fit(ContextKind::Bigram, smoothing, train).stats(target, errors)
}

pub fn head_rel_surprisal(train: &Treebank, target: &Treebank, errors: &ErrorSet, smoothing: Smoothing) -> Result<SurprisalStats> {
    SurprisalModel::fit(ContextKind::HeadRelation, smoothing, train).stats(target, errors)
}
