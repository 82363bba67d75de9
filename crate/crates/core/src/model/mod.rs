//! BiLSTM encoder with tagging and biaffine parsing heads.

pub mod config;
pub mod decode;
pub mod inference;
pub mod network;
pub mod state;
pub mod train;

pub use crate::nn::Matrix;
pub use config::{EncoderConfig, HeadConfig, HeadKind, ModelConfig, TrainConfig};
pub use decode::{decode_heads, is_tree, tree_score, Decoder};
pub use inference::{
    decode_tree, encode, parse_treebank, parser_forward, predict_tags, tag_treebank, tagger_forward,
    ScoredParse, TagPrediction,
};
pub use network::SentenceInput;
pub use state::ModelState;
pub use train::{batch_gradients, build_examples, train, EpochRecord, Example, TagInputs, Trainer, TrainHistory};

/// Derive one seed from several inputs (splitmix64 finalizer applied after
/// each word).
pub fn seed_mix(parts: &[u64]) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}
