//! Vocabularies built from the training split.

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tags::TagInventory;
use crate::treebank::Treebank;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
const RESERVED: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    forms: IndexMap<String, usize>,
    chars: IndexMap<char, usize>,
    relations: IndexMap<String, usize>,
    pub tags: TagInventory,
}

impl Vocabulary {
    /// Build from a training treebank; ids follow first occurrence.
    pub fn build(train: &Treebank) -> Result<Self> {
        if train.sentences.is_empty() {
            return Err(Error::EmptyTreebank);
        }
        let mut forms = IndexMap::new();
        let mut chars = IndexMap::new();
        let mut relations = IndexMap::new();
        for tok in train.tokens() {
            let next = forms.len() + RESERVED;
            forms.entry(tok.form.clone()).or_insert(next);
            for c in tok.form.chars() {
                let next = chars.len() + RESERVED;
                chars.entry(c).or_insert(next);
            }
            let next = relations.len();
            relations.entry(tok.deprel.clone()).or_insert(next);
        }
        Ok(Vocabulary {
            forms,
            chars,
            relations,
            tags: TagInventory,
        })
    }

    pub fn form_id(&self, form: &str) -> usize {
        self.forms.get(form).copied().unwrap_or(UNK_ID)
    }

    pub fn char_id(&self, c: char) -> usize {
        self.chars.get(&c).copied().unwrap_or(UNK_ID)
    }

    pub fn relation_id(&self, rel: &str) -> Option<usize> {
        self.relations.get(rel).copied()
    }

    pub fn relation_label(&self, id: usize) -> Option<&str> {
        self.relations.get_index(id).map(|(k, _)| k.as_str())
    }

    /// Size of the form table including the reserved rows.
    pub fn form_count(&self) -> usize {
        self.forms.len() + RESERVED
    }

    pub fn char_count(&self) -> usize {
        self.chars.len() + RESERVED
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn forms(&self) -> impl Iterator<Item = (&str, usize)> {
        self.forms.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// Anything that can answer whether a surface form is known.
pub trait KnownForms {
    fn contains_form(&self, form: &str) -> bool;
}

impl KnownForms for Vocabulary {
    fn contains_form(&self, form: &str) -> bool {
        self.forms.contains_key(form)
    }
}

impl KnownForms for HashSet<String> {
    fn contains_form(&self, form: &str) -> bool {
        self.contains(form)
    }
}

/// Per-token out-of-vocabulary flags (exact, case-sensitive match).
pub fn oov_flags(known: &impl KnownForms, treebank: &Treebank) -> Vec<Vec<bool>> {
    treebank
        .sentences
        .iter()
        .map(|s| s.tokens.iter().map(|t| !known.contains_form(&t.form)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tags::Upos;
    use crate::treebank::{Sentence, Split, Token};

    fn tb(forms: &[&str], rels: &[&str]) -> Treebank {
        let tokens = forms
            .iter()
            .zip(rels)
            .enumerate()
            .map(|(i, (f, r))| Token::new(i + 1, f, Upos::Noun, if i == 0 { 0 } else { 1 }, r))
            .collect();
        Treebank::new("t", Split::Train, vec![Sentence::from_tokens("1", tokens)]).unwrap()
    }

    #[test]
    fn first_occurrence_ids() {
        let v = Vocabulary::build(&tb(&["a", "b", "a"], &["root", "dep", "dep"])).unwrap();
        assert_eq!(v.form_id("a"), 2);
        assert_eq!(v.form_id("b"), 3);
        assert_eq!(v.form_id("zzz"), UNK_ID);
        assert_eq!(v.form_count(), 4);
        assert_eq!(v.char_id('a'), 2);
    }

    #[test]
    fn relation_inventory() {
        let v = Vocabulary::build(&tb(&["a", "b", "c", "d"], &["root", "obj", "nsubj", "obj"]))
            .unwrap();
        assert_eq!(v.relation_count(), 3);
        assert_eq!(v.relation_id("nsubj"), Some(2));
        assert_eq!(v.relation_label(1), Some("obj"));
    }

    #[test]
    fn deterministic_builds() {
        let t = tb(&["x", "y", "z", "x"], &["root", "a", "b", "a"]);
        assert_eq!(Vocabulary::build(&t).unwrap(), Vocabulary::build(&t).unwrap());
    }

    #[test]
    fn oov_proportion() {
        let train = tb(&["a", "b", "c", "d"], &["root", "x", "x", "x"]);
        let v = Vocabulary::build(&train).unwrap();
        let forms = ["a", "b", "c", "d", "a", "b", "Q", "c", "d", "a"];
        let target = tb(&forms, &["root"; 10]);
        let flags = oov_flags(&v, &target);
        assert!(flags[0][6]);
        assert!(!flags[0][0]);
        let mut target2 = target.clone();
        target2.sentences[0].tokens[9].form = "A".into();
        let flags = oov_flags(&v, &target2);
        let n = flags[0].iter().filter(|&&f| f).count();
        assert_eq!(n as f64 / 10.0, 0.2);

        let alt: HashSet<String> = ["Q".to_string()].into_iter().collect();
        assert_eq!(oov_flags(&alt, &target)[0].iter().filter(|&&f| f).count(), 9);
    }
}
