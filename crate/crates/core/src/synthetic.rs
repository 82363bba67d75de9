//! Seeded toy treebanks from a small fixed grammar. Some word forms are
//! ambiguous between ADJ and ADV by a hidden coin flip that also decides
//! their attachment, so gold tags carry information the surface lacks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tags::Upos;
use crate::treebank::{Sentence, Split, Token, Treebank};

const DET: &[&str] = &["the", "a", "this", "every"];
const NOUN: &[&str] = &[
    "dog", "cat", "bird", "house", "tree", "car", "book", "river", "city", "child", "song", "road", "letter", "garden",
    "boat", "horse",
];
const PROPN: &[&str] = &["Anna", "Boris", "Carla", "Dmitri", "Eva"];
const PRON: &[&str] = &["she", "he", "they", "it"];
const VERB_T: &[&str] = &["sees", "likes", "finds", "builds", "reads", "watches", "takes", "paints"];
const VERB_I: &[&str] = &["sleeps", "runs", "waits", "sings", "falls"];
const AUX: &[&str] = &["will", "can", "must"];
const ADJ: &[&str] = &["red", "small", "old", "green", "happy"];
const ADV: &[&str] = &["often", "quickly", "never", "slowly"];
const ADP: &[&str] = &["in", "near", "under", "with"];
const NUM: &[&str] = &["two", "three", "five"];
const CCONJ: &[&str] = &["and", "or"];
/// Forms whose tag (ADJ or ADV) is a coin flip.
pub const AMBIGUOUS: &[&str] = &["fast", "hard", "late", "early", "straight", "right"];

/// The tags the grammar produces.
pub const TOY_TAGS: [Upos; 12] = [
    Upos::Adj,
    Upos::Adp,
    Upos::Adv,
    Upos::Aux,
    Upos::Cconj,
    Upos::Det,
    Upos::Noun,
    Upos::Num,
    Upos::Pron,
    Upos::Propn,
    Upos::Punct,
    Upos::Verb,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub name: String,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    /// Chance that an ambiguous slot is filled.
    pub ambiguous_rate: f64,
    /// Chance that an ambiguous form is an adjective.
    pub adjective_rate: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            name: "toy".into(),
            train: 500,
            dev: 100,
            test: 100,
            ambiguous_rate: 0.7,
            adjective_rate: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticTreebank {
    pub train: Treebank,
    pub dev: Treebank,
    pub test: Treebank,
}

struct Builder {
    forms: Vec<(String, Upos, usize, &'static str)>,
}

impl Builder {
    /// Push a token with a provisional head (fixed up later); returns its
    /// 1-based index.
    fn push(&mut self, form: &str, tag: Upos, head: usize, rel: &'static str) -> usize {
        self.forms.push((form.to_string(), tag, head, rel));
        self.forms.len()
    }

    fn set_head(&mut self, index: usize, head: usize, rel: &'static str) {
        let t = &mut self.forms[index - 1];
        t.2 = head;
        t.3 = rel;
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words.choose(rng).expect("non-empty word list")
}

/// Common-noun phrase; returns the noun index and the dependents that still
/// need the noun as head.
fn noun_phrase(b: &mut Builder, rng: &mut ChaCha8Rng) -> usize {
    let mut deps = vec![(b.push(pick(rng, DET), Upos::Det, 0, "det"), "det")];
    if rng.random_bool(0.2) {
        deps.push((b.push(pick(rng, NUM), Upos::Num, 0, "nummod"), "nummod"));
    }
    if rng.random_bool(0.4) {
        deps.push((b.push(pick(rng, ADJ), Upos::Adj, 0, "amod"), "amod"));
    }
    let noun = b.push(pick(rng, NOUN), Upos::Noun, 0, "_");
    for (d, rel) in deps {
        b.set_head(d, noun, rel);
    }
    noun
}

/// An ambiguous modifier attached either to `noun` (ADJ) or `verb` (ADV).
struct Pending {
    index: usize,
    adjective: bool,
}

fn ambiguous(b: &mut Builder, rng: &mut ChaCha8Rng, cfg: &SyntheticConfig) -> Option<Pending> {
    if !rng.random_bool(cfg.ambiguous_rate) {
        return None;
    }
    let adjective = rng.random_bool(cfg.adjective_rate);
    let tag = if adjective { Upos::Adj } else { Upos::Adv };
    Some(Pending {
        index: b.push(pick(rng, AMBIGUOUS), tag, 0, "_"),
        adjective,
    })
}

fn resolve(b: &mut Builder, p: Option<Pending>, noun: usize, verb: usize) {
    if let Some(p) = p {
        if p.adjective {
            b.set_head(p.index, noun, "amod");
        } else {
            b.set_head(p.index, verb, "advmod");
        }
    }
}

fn sentence(rng: &mut ChaCha8Rng, cfg: &SyntheticConfig, id: String) -> Sentence {
    let mut b = Builder { forms: Vec::new() };

    let amb_subject = ambiguous(&mut b, rng, cfg);
    let subject_kind = rng.random_range(0..4);
    let subject = match subject_kind {
        0 => b.push(pick(rng, PRON), Upos::Pron, 0, "nsubj"),
        1 => b.push(pick(rng, PROPN), Upos::Propn, 0, "nsubj"),
        _ => noun_phrase(&mut b, rng),
    };
    let aux = rng.random_bool(0.3).then(|| b.push(pick(rng, AUX), Upos::Aux, 0, "aux"));
    let transitive = rng.random_bool(0.7);
    let verb = b.push(pick(rng, if transitive { VERB_T } else { VERB_I }), Upos::Verb, 0, "root");
    b.set_head(subject, verb, "nsubj");
    if let Some(a) = aux {
        b.set_head(a, verb, "aux");
    }
    resolve(&mut b, amb_subject, subject, verb);

    if transitive {
        let amb_object = ambiguous(&mut b, rng, cfg);
        let object = noun_phrase(&mut b, rng);
        b.set_head(object, verb, "obj");
        resolve(&mut b, amb_object, object, verb);
    } else if rng.random_bool(0.5) {
        let adv = b.push(pick(rng, ADV), Upos::Adv, 0, "advmod");
        b.set_head(adv, verb, "advmod");
    }
    if rng.random_bool(0.4) {
        let case = b.push(pick(rng, ADP), Upos::Adp, 0, "case");
        let noun = noun_phrase(&mut b, rng);
        b.set_head(case, noun, "case");
        b.set_head(noun, verb, "obl");
    }
    if rng.random_bool(0.2) {
        let cc = b.push(pick(rng, CCONJ), Upos::Cconj, 0, "cc");
        let conj = b.push(pick(rng, VERB_I), Upos::Verb, 0, "conj");
        b.set_head(cc, conj, "cc");
        b.set_head(conj, verb, "conj");
    }
    let punct = b.push(".", Upos::Punct, 0, "punct");
    b.set_head(punct, verb, "punct");
    b.set_head(verb, 0, "root");

    let tokens = b
        .forms
        .iter()
        .enumerate()
        .map(|(i, (form, tag, head, rel))| Token::new(i + 1, form, *tag, *head, rel))
        .collect();
    Sentence::from_tokens(id, tokens)
}

/// Generate train/dev/test splits from one seed.
pub fn generate(cfg: &SyntheticConfig, seed: u64) -> Result<SyntheticTreebank> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = |split: Split, n: usize| {
        let sents = (0..n)
            .map(|i| sentence(&mut rng, cfg, format!("{}-{split}-{}", cfg.name, i + 1)))
            .collect();
        Treebank::new(cfg.name.clone(), split, sents)
    };
    Ok(SyntheticTreebank {
        train: split(Split::Train, cfg.train)?,
        dev: split(Split::Dev, cfg.dev)?,
        test: split(Split::Test, cfg.test)?,
    })
}
