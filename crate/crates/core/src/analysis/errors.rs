use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tags::Upos;
use crate::treebank::{check_alignment, Treebank};

/// One tagging mistake, identified by position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ErrorRecord {
    /// 0-based sentence index.
    pub sentence_index: usize,
    /// 1-based token index.
    pub token_index: usize,
    pub gold: Upos,
    pub predicted: Upos,
}

impl ErrorRecord {
    pub fn position(&self) -> (usize, usize) {
        (self.sentence_index, self.token_index)
    }
}

/// Tagging errors of one system on one treebank, keyed by position.
/// Serialized as a list of records in position order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<ErrorRecord>", from = "Vec<ErrorRecord>")]
pub struct ErrorSet {
    records: BTreeMap<(usize, usize), ErrorRecord>,
}

impl ErrorSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Compare predictions with the gold tags of `gold`.
    pub fn from_predictions(gold: &Treebank, predicted: &[Vec<Upos>]) -> Result<Self> {
        check_alignment(gold, predicted)?;
        let mut set = ErrorSet::new();
        for (s, (sent, pred)) in gold.sentences.iter().zip(predicted).enumerate() {
            for (tok, &p) in sent.tokens.iter().zip(pred) {
                if tok.upos != p {
                    set.insert(ErrorRecord {
                        sentence_index: s,
                        token_index: tok.index,
                        gold: tok.upos,
                        predicted: p,
                    });
                }
            }
        }
        Ok(set)
    }

    /// Insert a record; records with `gold == predicted` are ignored.
    pub fn insert(&mut self, record: ErrorRecord) {
        if record.gold != record.predicted {
            self.records.insert(record.position(), record);
        }
    }

    pub fn contains(&self, sentence_index: usize, token_index: usize) -> bool {
        self.records.contains_key(&(sentence_index, token_index))
    }

    pub fn get(&self, sentence_index: usize, token_index: usize) -> Option<&ErrorRecord> {
        self.records.get(&(sentence_index, token_index))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in position order.
    pub fn iter(&self) -> impl Iterator<Item = &ErrorRecord> {
        self.records.values()
    }

    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.records.keys().copied()
    }

    /// Fail if any record points outside `treebank`.
    pub fn check_positions(&self, treebank: &Treebank) -> Result<()> {
        for &(s, t) in self.records.keys() {
            let ok = treebank.sentences.get(s).is_some_and(|sent| t >= 1 && t <= sent.len());
            if !ok {
                return Err(Error::PositionOutOfRange { sentence: s, token: t });
            }
        }
        Ok(())
    }

    /// Largest sentence index referenced, if any.
    pub fn max_sentence(&self) -> Option<usize> {
        self.records.keys().next_back().map(|k| k.0)
    }
}

impl FromIterator<ErrorRecord> for ErrorSet {
    fn from_iter<I: IntoIterator<Item = ErrorRecord>>(iter: I) -> Self {
        let mut set = ErrorSet::new();
        for r in iter {
            set.insert(r);
        }
        set
    }
}

impl From<Vec<ErrorRecord>> for ErrorSet {
    fn from(records: Vec<ErrorRecord>) -> Self {
        records.into_iter().collect()
    }
}

impl From<ErrorSet> for Vec<ErrorRecord> {
    fn from(set: ErrorSet) -> Self {
        set.records.into_values().collect()
    }
}
