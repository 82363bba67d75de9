//! Evaluation-mode forward passes and prediction over treebanks.

use ndarray::{s, Array3, Axis};

use crate::analysis::ErrorSet;
use crate::error::{Error, Result};
use crate::evaluation::{tagging_accuracy, PredictedTree};
use crate::nn::{softmax, Matrix, Tape};
use crate::parallel::{map_collect, Exec};
use crate::tags::{TagSymbol, Upos};
use crate::treebank::{check_alignment, Sentence, Treebank};

use super::config::HeadKind;
use super::decode::{decode_heads, Decoder};
use super::network::SentenceInput;
use super::state::ModelState;

/// Arc and relation scores for one sentence of length `n`.
#[derive(Clone, Debug)]
pub struct ScoredParse {
    /// `n × (n + 1)`: row `i` scores every candidate head (column 0 is
    /// ROOT) for dependent `i + 1`.
    pub arc_scores: Matrix,
    /// `n × (n + 1) × labels` relation distributions per (dependent, head).
    pub rel_probs: Array3<f64>,
}

impl ScoredParse {
    pub fn len(&self) -> usize {
        self.arc_scores.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.arc_scores.nrows() == 0
    }
}

/// Contextual vectors for a sentence (dropout off). Parser encoders return
/// `n + 1` rows with ROOT first.
pub fn encode(state: &ModelState, sentence: &Sentence, tags: Option<&[TagSymbol]>) -> Result<Matrix> {
    let input = state.prepare(sentence, tags)?;
    Ok(encode_input(state, &input))
}

pub(crate) fn encode_input(state: &ModelState, input: &SentenceInput) -> Matrix {
    let mut tape = Tape::new(&state.params);
    let enc = state.net().encode(&mut tape, &state.config, input, None);
    tape.value(enc).clone()
}

fn check_width(state: &ModelState, vectors: &Matrix) -> Result<()> {
    let width = state.config.encoder.output_dim();
    if vectors.ncols() != width {
        return Err(Error::Model(format!(
            "expected {width}-wide vectors, got {}",
            vectors.ncols()
        )));
    }
    Ok(())
}

/// Per-token distributions over the 17 tags.
pub fn tagger_forward(state: &ModelState, vectors: &Matrix) -> Result<Matrix> {
    if state.kind() != HeadKind::Tagger {
        return Err(Error::Model("model has no tagging head".into()));
    }
    check_width(state, vectors)?;
    let mut tape = Tape::new(&state.params);
    let x = tape.input(vectors.clone());
    let logits = state.net().tagger_logits(&mut tape, &state.config, x, None);
    Ok(softmax(tape.value(logits)))
}

/// Biaffine arc scores and relation distributions. `vectors` must include
/// the ROOT row.
pub fn parser_forward(state: &ModelState, vectors: &Matrix) -> Result<ScoredParse> {
    if state.kind() != HeadKind::Parser {
        return Err(Error::Model("model has no parsing head".into()));
    }
    check_width(state, vectors)?;
    if vectors.nrows() < 2 {
        return Err(Error::Model("parser input needs a ROOT row and at least one token".into()));
    }
    let mut tape = Tape::new(&state.params);
    let x = tape.input(vectors.clone());
    let nodes = state.net().parser_nodes(&mut tape, &state.config, x, None);
    let arcs = tape.value(nodes.arcs).clone();
    let rel_dep = tape.value(nodes.rel_dep);
    let rel_head = tape.value(nodes.rel_head);
    let weight = tape.value(nodes.rel_weight);

    let n = arcs.nrows();
    let q = rel_dep.ncols();
    let labels = weight.nrows() / q;
    let deps = rel_dep.slice(s![1.., ..]);
    let mut scores = Array3::zeros((n, n + 1, labels));
    for r in 0..labels {
        let u = weight.slice(s![r * q..(r + 1) * q, ..]);
        let pair = deps.dot(&u).dot(&rel_head.t());
        scores.index_axis_mut(Axis(2), r).assign(&pair);
    }
    for mut lane in scores.lanes_mut(Axis(2)) {
        let max = lane.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        lane.mapv_inplace(|v| (v - max).exp());
        let sum = lane.sum();
        lane.mapv_inplace(|v| v / sum);
    }
    Ok(ScoredParse {
        arc_scores: arcs,
        rel_probs: scores,
    })
}

/// Best tree plus the most probable relation on each chosen arc.
pub fn decode_tree(parse: &ScoredParse, decoder: Decoder) -> Vec<(usize, usize)> {
    let heads = decode_heads(&parse.arc_scores, decoder);
    heads
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let lane = parse.rel_probs.slice(s![i, h, ..]);
            let mut best = 0;
            for (r, &p) in lane.iter().enumerate() {
                if p > lane[best] {
                    best = r;
                }
            }
            (h, best)
        })
        .collect()
}

/// Tags for every sentence of a treebank, from a tagging head.
pub fn tag_treebank(state: &ModelState, treebank: &Treebank, exec: Exec) -> Result<Vec<Vec<Upos>>> {
    if state.kind() != HeadKind::Tagger {
        return Err(Error::Model("model has no tagging head".into()));
    }
    if state.uses_tags() {
        return Err(Error::Model("taggers take no tag inputs".into()));
    }
    let inputs = treebank
        .sentences
        .iter()
        .map(|s| state.prepare(s, None))
        .collect::<Result<Vec<_>>>()?;
    Ok(map_collect(exec, &inputs, |i, input| {
        let n = treebank.sentences[i].len();
        let mut tags = tag_input(state, input);
        // Truncated tail gets the most frequent open-class guess.
        tags.resize(n, Upos::Noun);
        tags
    }))
}

pub(crate) fn tag_input(state: &ModelState, input: &SentenceInput) -> Vec<Upos> {
    let mut tape = Tape::new(&state.params);
    let enc = state.net().encode(&mut tape, &state.config, input, None);
    let logits = state.net().tagger_logits(&mut tape, &state.config, enc, None);
    tape.value(logits)
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            Upos::from_index(best).expect("17 outputs")
        })
        .collect()
}

/// Predicted tags with their error set and accuracy against gold.
#[derive(Clone, Debug)]
pub struct TagPrediction {
    pub tags: Vec<Vec<Upos>>,
    pub errors: ErrorSet,
    pub accuracy: f64,
}

pub fn predict_tags(state: &ModelState, treebank: &Treebank, exec: Exec) -> Result<TagPrediction> {
    let tags = tag_treebank(state, treebank, exec)?;
    let errors = ErrorSet::from_predictions(treebank, &tags)?;
    let accuracy = tagging_accuracy(&tags, treebank)?;
    Ok(TagPrediction {
        tags,
        errors,
        accuracy,
    })
}

/// Parse every sentence. `tags` supplies the tag inputs of a
/// tag-conditioned parser.
pub fn parse_treebank(
    state: &ModelState,
    treebank: &Treebank,
    tags: Option<&[Vec<TagSymbol>]>,
    decoder: Decoder,
    exec: Exec,
) -> Result<Vec<PredictedTree>> {
    if state.kind() != HeadKind::Parser {
        return Err(Error::Model("model has no parsing head".into()));
    }
    if let Some(t) = tags {
        check_alignment(treebank, t)?;
    }
    let inputs = treebank
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| state.prepare(s, tags.map(|t| t[i].as_slice())))
        .collect::<Result<Vec<_>>>()?;
    let trees = map_collect(exec, &inputs, |i, input| {
        let n = treebank.sentences[i].len();
        parse_input(state, input, decoder).map(|mut tree| {
            tree.heads.resize(n, 0);
            tree.relations.resize(n, "_".into());
            tree
        })
    });
    trees.into_iter().collect()
}

pub(crate) fn parse_input(state: &ModelState, input: &SentenceInput, decoder: Decoder) -> Result<PredictedTree> {
    let vectors = encode_input(state, input);
    let parse = parser_forward(state, &vectors)?;
    let arcs = decode_tree(&parse, decoder);
    Ok(PredictedTree {
        heads: arcs.iter().map(|&(h, _)| h).collect(),
        relations: arcs
            .iter()
            .map(|&(_, r)| state.vocab.relation_label(r).unwrap_or("_").to_string())
            .collect(),
    })
}
