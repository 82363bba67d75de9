//! Tagging accuracy and attachment scores. Every token counts, including
//! punctuation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tags::Upos;
use crate::treebank::{check_alignment, Treebank};

/// Predicted head and relation label per token of one sentence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedTree {
    pub heads: Vec<usize>,
    pub relations: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseScore {
    pub uas: f64,
    pub las: f64,
    pub token_count: usize,
    pub correct_heads: usize,
    pub correct_labeled: usize,
}

pub fn attachment_scores(predicted: &[PredictedTree], gold: &Treebank) -> Result<ParseScore> {
    if predicted.len() != gold.sentences.len() {
        return Err(Error::LengthMismatch {
            expected: gold.sentences.len(),
            actual: predicted.len(),
        });
    }
    let mut total = 0;
    let mut heads = 0;
    let mut labeled = 0;
    for (p, s) in predicted.iter().zip(&gold.sentences) {
        if p.heads.len() != s.len() || p.relations.len() != s.len() {
            return Err(Error::LengthMismatch {
                expected: s.len(),
                actual: p.heads.len().min(p.relations.len()),
            });
        }
        for ((tok, &h), rel) in s.tokens.iter().zip(&p.heads).zip(&p.relations) {
            total += 1;
            if tok.head == h {
                heads += 1;
                if &tok.deprel == rel {
                    labeled += 1;
                }
            }
        }
    }
    let frac = |c: usize| if total == 0 { 0.0 } else { c as f64 / total as f64 };
    Ok(ParseScore {
        uas: frac(heads),
        las: frac(labeled),
        token_count: total,
        correct_heads: heads,
        correct_labeled: labeled,
    })
}

/// Fraction of tokens whose predicted tag equals the gold tag.
pub fn tagging_accuracy(predicted: &[Vec<Upos>], gold: &Treebank) -> Result<f64> {
    check_alignment(gold, predicted)?;
    let mut total = 0usize;
    let mut correct = 0usize;
    for (s, p) in gold.sentences.iter().zip(predicted) {
        for (tok, &t) in s.tokens.iter().zip(p) {
            total += 1;
            correct += usize::from(tok.upos == t);
        }
    }
    Ok(if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    })
}
