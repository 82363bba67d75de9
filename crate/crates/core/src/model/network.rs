//! Parameter layout and forward computation of the encoder and heads.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::{forget_bias_mut, Matrix, NodeId, ParamGroup, ParamId, ParamStore, Tape};
use crate::tags::TagInventory;

use super::config::{HeadKind, ModelConfig};

/// Integer-coded model input for one sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentenceInput {
    pub words: Vec<usize>,
    pub chars: Vec<Vec<usize>>,
    pub tags: Option<Vec<usize>>,
}

impl SentenceInput {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct LstmIds {
    w_ih: ParamId,
    w_hh: ParamId,
    bias: ParamId,
}

impl LstmIds {
    fn init(store: &mut ParamStore, prefix: &str, group: ParamGroup, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let w_ih = store.add_glorot(&format!("{prefix}.w_ih"), group, (input, 4 * hidden), rng);
        let w_hh = store.add_glorot(&format!("{prefix}.w_hh"), group, (hidden, 4 * hidden), rng);
        let bias = store.add_zeros(&format!("{prefix}.bias"), group, (1, 4 * hidden));
        forget_bias_mut(&mut store.get_mut(bias).value).fill(1.0);
        LstmIds { w_ih, w_hh, bias }
    }

    fn bind(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(LstmIds {
            w_ih: store.id(&format!("{prefix}.w_ih"))?,
            w_hh: store.id(&format!("{prefix}.w_hh"))?,
            bias: store.id(&format!("{prefix}.bias"))?,
        })
    }

    fn run(&self, tape: &mut Tape, x: NodeId, reverse: bool) -> NodeId {
        tape.lstm(x, self.w_ih, self.w_hh, self.bias, reverse)
    }
}

#[derive(Clone, Copy, Debug)]
struct Affine {
    weight: ParamId,
    bias: ParamId,
}

impl Affine {
    fn init(store: &mut ParamStore, prefix: &str, group: ParamGroup, input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Affine {
            weight: store.add_glorot(&format!("{prefix}.weight"), group, (input, output), rng),
            bias: store.add_zeros(&format!("{prefix}.bias"), group, (1, output)),
        }
    }

    fn bind(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(Affine {
            weight: store.id(&format!("{prefix}.weight"))?,
            bias: store.id(&format!("{prefix}.bias"))?,
        })
    }

    fn apply(&self, tape: &mut Tape, x: NodeId) -> NodeId {
        tape.linear(x, self.weight, self.bias)
    }
}

#[derive(Clone, Debug)]
struct Encoder {
    word: ParamId,
    tag: Option<ParamId>,
    root: Option<ParamId>,
    char_embed: ParamId,
    char_fw: LstmIds,
    char_bw: LstmIds,
    char_proj: Affine,
    layers: Vec<(LstmIds, LstmIds)>,
}

#[derive(Clone, Debug)]
enum Head {
    Tagger {
        hidden: Affine,
        output: Affine,
    },
    Parser {
        arc_dep: Affine,
        arc_head: Affine,
        rel_dep: Affine,
        rel_head: Affine,
        arc_weight: ParamId,
        rel_weight: ParamId,
    },
}

/// Parameter ids of a bound model.
#[derive(Clone, Debug)]
pub(crate) struct Network {
    encoder: Encoder,
    head: Head,
}

/// Tape nodes of a parser head evaluation.
pub(crate) struct ParserNodes {
    /// `n × (n + 1)` arc scores (row `i` is dependent `i + 1`).
    pub arcs: NodeId,
    /// Relation dependent features with a trailing ones column, `(n + 1) × (r + 1)`.
    pub rel_dep: NodeId,
    pub rel_head: NodeId,
    pub rel_weight: NodeId,
}

pub(crate) fn init_encoder(store: &mut ParamStore, cfg: &ModelConfig, word_table: Matrix, word_trainable: bool, n_chars: usize, rng: &mut impl Rng) {
    let e = &cfg.encoder;
    store.add("embeddings.word", ParamGroup::Embeddings, word_trainable, word_table);
    if let Some(dim) = e.tag_dim {
        let rows = TagInventory.input_size();
        store.add_glorot("embeddings.tag", ParamGroup::Embeddings, (rows, dim), rng);
    }
    if cfg.root {
        store.add_glorot("embeddings.root", ParamGroup::Embeddings, (1, e.input_dim()), rng);
    }
    store.add_glorot("char.embed", ParamGroup::CharEncoder, (n_chars, e.char_lstm_input), rng);
    LstmIds::init(store, "char.fw", ParamGroup::CharEncoder, e.char_lstm_input, e.char_lstm_size, rng);
    LstmIds::init(store, "char.bw", ParamGroup::CharEncoder, e.char_lstm_input, e.char_lstm_size, rng);
    Affine::init(store, "char.proj", ParamGroup::CharEncoder, 2 * e.char_lstm_size, e.char_dim, rng);
    let mut input = e.input_dim();
    for l in 0..e.lstm_layers {
        LstmIds::init(store, &format!("bilstm.{l}.fw"), ParamGroup::Bilstm, input, e.lstm_size, rng);
        LstmIds::init(store, &format!("bilstm.{l}.bw"), ParamGroup::Bilstm, input, e.lstm_size, rng);
        input = e.output_dim();
    }
}

/// Register a freshly initialised head of `cfg.kind`.
pub(crate) fn init_head(store: &mut ParamStore, cfg: &ModelConfig, n_relations: usize, rng: &mut impl Rng) {
    let input = cfg.encoder.output_dim();
    let h = &cfg.head;
    let g = ParamGroup::Head;
    match cfg.kind {
        HeadKind::Tagger => {
            Affine::init(store, "head.tag_hidden", g, input, h.tagger_hidden, rng);
            Affine::init(store, "head.tag_output", g, h.tagger_hidden, TagInventory.output_size(), rng);
        }
        HeadKind::Parser => {
            Affine::init(store, "head.arc_dep", g, input, h.arc_dim, rng);
            Affine::init(store, "head.arc_head", g, input, h.arc_dim, rng);
            Affine::init(store, "head.rel_dep", g, input, h.rel_dim, rng);
            Affine::init(store, "head.rel_head", g, input, h.rel_dim, rng);
            store.add_zeros("head.arc_weight", g, (h.arc_dim + 1, h.arc_dim));
            store.add_zeros(
                "head.rel_weight",
                g,
                (n_relations.max(1) * (h.rel_dim + 1), h.rel_dim + 1),
            );
        }
    }
}

impl Network {
    pub fn bind(store: &ParamStore, cfg: &ModelConfig) -> Result<Network> {
        let e = &cfg.encoder;
        let encoder = Encoder {
            word: store.id("embeddings.word")?,
            tag: e.tag_dim.map(|_| store.id("embeddings.tag")).transpose()?,
            root: cfg.root.then(|| store.id("embeddings.root")).transpose()?,
            char_embed: store.id("char.embed")?,
            char_fw: LstmIds::bind(store, "char.fw")?,
            char_bw: LstmIds::bind(store, "char.bw")?,
            char_proj: Affine::bind(store, "char.proj")?,
            layers: (0..e.lstm_layers)
                .map(|l| {
                    Ok((
                        LstmIds::bind(store, &format!("bilstm.{l}.fw"))?,
                        LstmIds::bind(store, &format!("bilstm.{l}.bw"))?,
                    ))
                })
                .collect::<Result<_>>()?,
        };
        let head = match cfg.kind {
            HeadKind::Tagger => Head::Tagger {
                hidden: Affine::bind(store, "head.tag_hidden")?,
                output: Affine::bind(store, "head.tag_output")?,
            },
            HeadKind::Parser => Head::Parser {
                arc_dep: Affine::bind(store, "head.arc_dep")?,
                arc_head: Affine::bind(store, "head.arc_head")?,
                rel_dep: Affine::bind(store, "head.rel_dep")?,
                rel_head: Affine::bind(store, "head.rel_head")?,
                arc_weight: store.id("head.arc_weight")?,
                rel_weight: store.id("head.rel_weight")?,
            },
        };
        Ok(Network { encoder, head })
    }

    /// Contextual vectors: `n` rows, or `n + 1` with ROOT first.
    pub fn encode(&self, tape: &mut Tape, cfg: &ModelConfig, input: &SentenceInput, mut rng: Option<&mut ChaCha8Rng>) -> NodeId {
        let e = &self.encoder;
        let p = if rng.is_some() { cfg.encoder.dropout } else { 0.0 };
        let mut drop = |tape: &mut Tape, x: NodeId| match rng.as_deref_mut() {
            Some(r) => tape.dropout(x, p, r),
            None => x,
        };

        let words = tape.gather_param(e.word, input.words.clone());
        let words = drop(tape, words);

        let mut summaries = Vec::with_capacity(input.len());
        for chars in &input.chars {
            let emb = tape.gather_param(e.char_embed, chars.clone());
            let fw = e.char_fw.run(tape, emb, false);
            let bw = e.char_bw.run(tape, emb, true);
            let last = tape.gather_rows(fw, vec![chars.len() - 1]);
            let first = tape.gather_rows(bw, vec![0]);
            summaries.push(tape.concat_cols(&[last, first]));
        }
        let chars = tape.concat_rows(&summaries);
        let chars = e.char_proj.apply(tape, chars);
        let chars = drop(tape, chars);

        let mut parts = vec![words, chars];
        if let (Some(tag), Some(ids)) = (e.tag, &input.tags) {
            let tags = tape.gather_param(tag, ids.clone());
            parts.push(drop(tape, tags));
        }
        let mut x = tape.concat_cols(&parts);
        if let Some(root) = e.root {
            let r = tape.param(root);
            x = tape.concat_rows(&[r, x]);
        }

        for (fw, bw) in &e.layers {
            let f = fw.run(tape, x, false);
            let b = bw.run(tape, x, true);
            x = tape.concat_cols(&[f, b]);
            x = drop(tape, x);
        }
        x
    }

    /// `n × 17` tag logits. `skip_root` drops the ROOT row of a parser
    /// encoder.
    pub fn tagger_logits(&self, tape: &mut Tape, cfg: &ModelConfig, encoded: NodeId, rng: Option<&mut ChaCha8Rng>) -> NodeId {
        let Head::Tagger { hidden, output } = &self.head else {
            panic!("tagger_logits on a parser head");
        };
        let x = if cfg.root {
            tape.slice_rows_from(encoded, 1)
        } else {
            encoded
        };
        let h = hidden.apply(tape, x);
        let h = tape.leaky_relu(h, cfg.head.leaky_slope);
        let h = match rng {
            Some(r) => tape.dropout(h, cfg.encoder.dropout, r),
            None => h,
        };
        output.apply(tape, h)
    }

    pub fn parser_nodes(&self, tape: &mut Tape, cfg: &ModelConfig, encoded: NodeId, mut rng: Option<&mut ChaCha8Rng>) -> ParserNodes {
        let Head::Parser {
            arc_dep,
            arc_head,
            rel_dep,
            rel_head,
            arc_weight,
            rel_weight,
        } = &self.head
        else {
            panic!("parser_nodes on a tagger head");
        };
        let slope = cfg.head.leaky_slope;
        let p = cfg.encoder.dropout;
        let mut mlp = |tape: &mut Tape, layer: &Affine| {
            let h = layer.apply(tape, encoded);
            let h = tape.leaky_relu(h, slope);
            match rng.as_deref_mut() {
                Some(r) => tape.dropout(h, p, r),
                None => h,
            }
        };
        let ad = mlp(tape, arc_dep);
        let ah = mlp(tape, arc_head);
        let rd = mlp(tape, rel_dep);
        let rh = mlp(tape, rel_head);

        let ad1 = tape.append_ones(ad);
        let u = tape.param(*arc_weight);
        let du = tape.matmul(ad1, u);
        let scores = tape.matmul_bt(du, ah);
        let arcs = tape.slice_rows_from(scores, 1);

        ParserNodes {
            arcs,
            rel_dep: tape.append_ones(rd),
            rel_head: tape.append_ones(rh),
            rel_weight: tape.param(*rel_weight),
        }
    }
}
