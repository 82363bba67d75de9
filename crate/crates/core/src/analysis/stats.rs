//! Error crossover, per-class counts, per-tag F1, confusion rankings and
//! OOV proportions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tags::{Upos, WordClass};
use crate::treebank::{check_alignment, Treebank};

use super::errors::ErrorSet;

/// Overlap between the error positions of two systems.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crossover {
    pub only_a: usize,
    pub only_b: usize,
    pub both: usize,
    pub union: usize,
}

impl Crossover {
    fn share(&self, count: usize) -> Option<f64> {
        (self.union > 0).then(|| count as f64 / self.union as f64)
    }

    /// Fractions of the union as `(only_a, both, only_b)`; `None` when
    /// neither system made an error.
    pub fn shares(&self) -> Option<(f64, f64, f64)> {
        Some((self.share(self.only_a)?, self.share(self.both)?, self.share(self.only_b)?))
    }

    pub fn add(&mut self, other: &Crossover) {
        self.only_a += other.only_a;
        self.only_b += other.only_b;
        self.both += other.both;
        self.union += other.union;
    }
}

pub fn crossover(a: &ErrorSet, b: &ErrorSet) -> Crossover {
    let both = a.positions().filter(|&(s, t)| b.contains(s, t)).count();
    Crossover {
        only_a: a.len() - both,
        only_b: b.len() - both,
        both,
        union: a.len() + b.len() - both,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub errors: usize,
    pub tokens: usize,
}

impl ClassCounts {
    fn add(&mut self, other: ClassCounts) {
        self.errors += other.errors;
        self.tokens += other.tokens;
    }
}

/// Error and token counts per word class of the gold tag.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassBreakdown {
    pub open: ClassCounts,
    pub closed: ClassCounts,
    pub other: ClassCounts,
    pub total: ClassCounts,
}

impl ClassBreakdown {
    pub fn get(&self, class: WordClass) -> ClassCounts {
        match class {
            WordClass::Open => self.open,
            WordClass::Closed => self.closed,
            WordClass::Other => self.other,
        }
    }

    fn get_mut(&mut self, class: WordClass) -> &mut ClassCounts {
        match class {
            WordClass::Open => &mut self.open,
            WordClass::Closed => &mut self.closed,
            WordClass::Other => &mut self.other,
        }
    }

    pub fn add(&mut self, other: &ClassBreakdown) {
        for c in WordClass::ALL {
            self.get_mut(c).add(other.get(c));
        }
        self.total.add(other.total);
    }
}

pub fn class_breakdown(errors: &ErrorSet, gold: &Treebank) -> Result<ClassBreakdown> {
    errors.check_positions(gold)?;
    let mut out = ClassBreakdown::default();
    for tok in gold.tokens() {
        out.get_mut(tok.upos.class()).tokens += 1;
        out.total.tokens += 1;
    }
    for r in errors.iter() {
        let gold_tag = gold.sentences[r.sentence_index].tokens[r.token_index - 1].upos;
        out.get_mut(gold_tag.class()).errors += 1;
        out.total.errors += 1;
    }
    Ok(out)
}

/// `numerator / denominator`, absent when the denominator is zero.
pub fn error_ratio(numerator: usize, denominator: usize) -> Option<f64> {
    (denominator > 0).then(|| numerator as f64 / denominator as f64)
}

/// Per-class error ratios of system `a` over system `b`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassRatios {
    pub open: Option<f64>,
    pub closed: Option<f64>,
    pub other: Option<f64>,
    pub total: Option<f64>,
}

pub fn class_ratios(a: &ClassBreakdown, b: &ClassBreakdown) -> ClassRatios {
    ClassRatios {
        open: error_ratio(a.open.errors, b.open.errors),
        closed: error_ratio(a.closed.errors, b.closed.errors),
        other: error_ratio(a.other.errors, b.other.errors),
        total: error_ratio(a.total.errors, b.total.errors),
    }
}

/// Per-tag gold, predicted and correct counts; can be pooled across
/// treebanks before scoring.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagCounts {
    gold: [usize; Upos::COUNT],
    predicted: [usize; Upos::COUNT],
    correct: [usize; Upos::COUNT],
}

impl TagCounts {
    pub fn from_predictions(predicted: &[Vec<Upos>], gold: &Treebank) -> Result<Self> {
        let mut c = TagCounts::default();
        c.add(predicted, gold)?;
        Ok(c)
    }

    pub fn add(&mut self, predicted: &[Vec<Upos>], gold: &Treebank) -> Result<()> {
        check_alignment(gold, predicted)?;
        for (s, p) in gold.sentences.iter().zip(predicted) {
            for (tok, &t) in s.tokens.iter().zip(p) {
                self.gold[tok.upos.index()] += 1;
                self.predicted[t.index()] += 1;
                if tok.upos == t {
                    self.correct[t.index()] += 1;
                }
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &TagCounts) {
        for i in 0..Upos::COUNT {
            self.gold[i] += other.gold[i];
            self.predicted[i] += other.predicted[i];
            self.correct[i] += other.correct[i];
        }
    }

    /// Scores for every tag that occurs in gold or predictions.
    pub fn scores(&self) -> BTreeMap<Upos, TagScore> {
        Upos::ALL
            .iter()
            .filter_map(|&t| {
                let i = t.index();
                let (g, p, c) = (self.gold[i], self.predicted[i], self.correct[i]);
                if g == 0 && p == 0 {
                    return None;
                }
                let precision = (p > 0).then(|| c as f64 / p as f64);
                let recall = (g > 0).then(|| c as f64 / g as f64);
                let f1 = if c == 0 {
                    0.0
                } else {
                    2.0 * c as f64 / (g + p) as f64
                };
                Some((
                    t,
                    TagScore {
                        gold: g,
                        predicted: p,
                        correct: c,
                        precision,
                        recall,
                        f1,
                    },
                ))
            })
            .collect()
    }

    /// F1 over all tags pooled (equals accuracy when each token has one
    /// prediction).
    pub fn micro_f1(&self) -> Option<f64> {
        let g: usize = self.gold.iter().sum();
        let p: usize = self.predicted.iter().sum();
        let c: usize = self.correct.iter().sum();
        (g + p > 0).then(|| 2.0 * c as f64 / (g + p) as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagScore {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
    /// Absent when the tag is never predicted.
    pub precision: Option<f64>,
    /// Absent when the tag never occurs in gold.
    pub recall: Option<f64>,
    pub f1: f64,
}

pub fn per_tag_f1(predicted: &[Vec<Upos>], gold: &Treebank) -> Result<BTreeMap<Upos, TagScore>> {
    Ok(TagCounts::from_predictions(predicted, gold)?.scores())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub gold: Upos,
    pub predicted: Upos,
    pub count: usize,
}

/// Tally of (gold, predicted) error pairs.
pub fn confusion_counts(errors: &ErrorSet) -> BTreeMap<(Upos, Upos), usize> {
    let mut counts = BTreeMap::new();
    for r in errors.iter() {
        *counts.entry((r.gold, r.predicted)).or_insert(0) += 1;
    }
    counts
}

/// The `k` most frequent confusions from pooled counts, descending by count
/// with ties ordered by tag names.
pub fn rank_confusions(counts: &BTreeMap<(Upos, Upos), usize>, k: usize) -> Vec<Confusion> {
    let mut all: Vec<Confusion> = counts
        .iter()
        .map(|(&(gold, predicted), &count)| Confusion { gold, predicted, count })
        .collect();
    all.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.gold.as_str().cmp(b.gold.as_str()))
            .then_with(|| a.predicted.as_str().cmp(b.predicted.as_str()))
    });
    all.truncate(k);
    all
}

pub fn top_confusions(errors: &ErrorSet, k: usize) -> Vec<Confusion> {
    rank_confusions(&confusion_counts(errors), k)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OovStats {
    pub tokens: usize,
    pub oov_tokens: usize,
    pub errors: usize,
    pub oov_errors: usize,
    /// OOV proportion over all tokens.
    pub all: Option<f64>,
    /// OOV proportion over error tokens; absent with no errors.
    pub among_errors: Option<f64>,
}

pub fn oov_error_stats(flags: &[Vec<bool>], errors: &ErrorSet) -> Result<OovStats> {
    let tokens: usize = flags.iter().map(Vec::len).sum();
    let oov_tokens = flags.iter().flatten().filter(|&&f| f).count();
    let mut oov_errors = 0;
    for (s, t) in errors.positions() {
        let flag = flags
            .get(s)
            .and_then(|row| row.get(t.wrapping_sub(1)))
            .ok_or(Error::PositionOutOfRange { sentence: s, token: t })?;
        oov_errors += usize::from(*flag);
    }
    Ok(OovStats {
        tokens,
        oov_tokens,
        errors: errors.len(),
        oov_errors,
        all: error_ratio(oov_tokens, tokens),
        among_errors: error_ratio(oov_errors, errors.len()),
    })
}
