use std::io::{Read, Write};

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::nn::{Matrix, ParamGroup, ParamStore};
use crate::tags::TagSymbol;
use crate::treebank::Sentence;
use crate::vocab::{Vocabulary, PAD_ID, UNK_ID};

use super::config::{HeadKind, ModelConfig};
use super::network::{init_encoder, init_head, Network, SentenceInput};
use super::seed_mix;

const MAGIC: &[u8; 8] = b"PPROBE\0\x01";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Encoder and head parameters together with everything needed to turn a
/// sentence into model input.
#[derive(Clone, Debug)]
pub struct ModelState {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    /// Row of each form in the word embedding table; rows 0 and 1 are
    /// padding and unknown.
    word_rows: IndexMap<String, usize>,
    pretrained: bool,
    pub params: ParamStore,
    net: Network,
    /// Optimizer steps applied so far.
    pub trained_steps: u64,
}

impl ModelState {
    /// Fresh model. With `embeddings`, the word table is the (frozen)
    /// pre-trained vectors; otherwise it is indexed by the training
    /// vocabulary and trainable.
    pub fn new(config: ModelConfig, vocab: Vocabulary, embeddings: Option<&EmbeddingTable>, seed: u64) -> Result<Self> {
        config.encoder.validate()?;
        let dim = config.encoder.word_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed_mix(&[seed, 0x1417]));

        let (word_rows, table, pretrained) = match embeddings {
            Some(t) => {
                if t.dim() != dim {
                    return Err(Error::Config(format!(
                        "embedding width {} does not match word_dim {dim}",
                        t.dim()
                    )));
                }
                let mut rows = IndexMap::new();
                let mut m = Matrix::zeros((t.len() + 2, dim));
                m.row_mut(UNK_ID).assign(&t.unknown_vector());
                for (i, form) in t.forms().enumerate() {
                    rows.insert(form.to_string(), i + 2);
                    m.row_mut(i + 2).assign(&t.lookup(form));
                }
                (rows, m, true)
            }
            None => {
                let rows: IndexMap<String, usize> =
                    vocab.forms().map(|(f, id)| (f.to_string(), id)).collect();
                let scale = (3.0 / dim as f64).sqrt();
                let mut m = Matrix::from_shape_fn((vocab.form_count(), dim), |_| {
                    rand::Rng::random_range(&mut rng, -scale..scale)
                });
                m.row_mut(PAD_ID).fill(0.0);
                (rows, m, false)
            }
        };

        let mut params = ParamStore::new();
        init_encoder(&mut params, &config, table, !pretrained, vocab.char_count(), &mut rng);
        init_head(&mut params, &config, vocab.relation_count(), &mut rng);
        let net = Network::bind(&params, &config)?;
        Ok(ModelState {
            config,
            vocab,
            word_rows,
            pretrained,
            params,
            net,
            trained_steps: 0,
        })
    }

    pub(crate) fn net(&self) -> &Network {
        &self.net
    }

    pub fn kind(&self) -> HeadKind {
        self.config.kind
    }

    pub fn uses_tags(&self) -> bool {
        self.config.encoder.tag_dim.is_some()
    }

    pub fn has_pretrained_embeddings(&self) -> bool {
        self.pretrained
    }

    /// Discard the current head and attach a freshly initialised one of
    /// `kind`, seeded independently of the discarded head.
    pub fn replace_head(&mut self, kind: HeadKind, seed: u64) -> Result<()> {
        self.params.remove_group(ParamGroup::Head);
        self.config.kind = kind;
        let mut rng = ChaCha8Rng::seed_from_u64(seed_mix(&[seed, 0x4ead]));
        init_head(&mut self.params, &self.config, self.vocab.relation_count(), &mut rng);
        self.net = Network::bind(&self.params, &self.config)?;
        Ok(())
    }

    /// Freeze every group except the head.
    pub fn freeze_encoder(&mut self) {
        for g in [ParamGroup::Embeddings, ParamGroup::CharEncoder, ParamGroup::Bilstm] {
            self.params.set_group_trainable(g, false);
        }
    }

    /// Checksum of all frozen parameters.
    pub fn frozen_checksum(&self) -> String {
        self.params.checksum(|p| !p.trainable)
    }

    pub fn group_checksum(&self, group: ParamGroup) -> String {
        self.params.checksum(|p| p.group == group)
    }

    /// Integer-code a sentence. Tag symbols must be supplied exactly when
    /// the encoder has tag inputs.
    pub fn prepare(&self, sentence: &Sentence, tags: Option<&[TagSymbol]>) -> Result<SentenceInput> {
        match (self.uses_tags(), tags) {
            (true, None) => {
                return Err(Error::Model("encoder expects tag inputs but none were given".into()))
            }
            (false, Some(_)) => {
                return Err(Error::Model("encoder has no tag inputs but tags were given".into()))
            }
            (_, Some(t)) if t.len() != sentence.len() => {
                return Err(Error::LengthMismatch {
                    expected: sentence.len(),
                    actual: t.len(),
                })
            }
            _ => {}
        }
        let limit = self.config.encoder.max_sentence_len;
        if sentence.len() > limit {
            log::warn!(
                "sentence {} has {} tokens, truncating to {limit}",
                sentence.sent_id,
                sentence.len()
            );
        }
        let tokens = &sentence.tokens[..sentence.len().min(limit)];
        let words = tokens
            .iter()
            .map(|t| self.word_rows.get(&t.form).copied().unwrap_or(UNK_ID))
            .collect();
        let chars = tokens
            .iter()
            .map(|t| {
                let ids: Vec<usize> = t.form.chars().map(|c| self.vocab.char_id(c)).collect();
                if ids.is_empty() {
                    vec![UNK_ID]
                } else {
                    ids
                }
            })
            .collect();
        let tags = tags.map(|t| {
            t[..tokens.len()]
                .iter()
                .map(|&s| self.vocab.tags.input_id(s))
                .collect()
        });
        Ok(SentenceInput { words, chars, tags })
    }

    pub fn save(&self, mut w: impl Write) -> Result<()> {
        let tensors: Vec<TensorMeta> = self
            .params
            .iter()
            .map(|(_, p)| TensorMeta {
                name: p.name.clone(),
                group: p.group,
                trainable: p.trainable,
                rows: p.value.nrows(),
                cols: p.value.ncols(),
            })
            .collect();
        let header = Header {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            word_rows: self.word_rows.keys().cloned().collect(),
            pretrained: self.pretrained,
            trained_steps: self.trained_steps,
            tensors,
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for (_, p) in self.params.iter() {
            let mut buf = Vec::with_capacity(p.value.len() * 8);
            for v in p.value.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn load(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a model checkpoint".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        if header.version != version {
            return Err(Error::Checkpoint("header version mismatch".into()));
        }

        let mut params = ParamStore::new();
        for t in &header.tensors {
            let mut buf = vec![0u8; t.rows * t.cols * 8];
            r.read_exact(&mut buf)?;
            let data: Vec<f64> = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let value = Matrix::from_shape_vec((t.rows, t.cols), data)
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
            params.add(&t.name, t.group, t.trainable, value);
        }
        let net = Network::bind(&params, &header.config)?;
        Ok(ModelState {
            config: header.config,
            vocab: header.vocab,
            word_rows: header
                .word_rows
                .into_iter()
                .enumerate()
                .map(|(i, f)| (f, i + 2))
                .collect(),
            pretrained: header.pretrained,
            params,
            net,
            trained_steps: header.trained_steps,
        })
    }

    pub fn save_file(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.save(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::load(std::io::BufReader::new(f))
    }
}

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    group: ParamGroup,
    trainable: bool,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ModelConfig,
    vocab: Vocabulary,
    /// Forms of word table rows 2.. in order.
    word_rows: Vec<String>,
    pretrained: bool,
    trained_steps: u64,
    tensors: Vec<TensorMeta>,
}
