use std::fmt;

use indexmap::IndexMap;
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

/// Parameter groups that can be frozen independently.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Embeddings,
    CharEncoder,
    Bilstm,
    Head,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 4] = [
        ParamGroup::Embeddings,
        ParamGroup::CharEncoder,
        ParamGroup::Bilstm,
        ParamGroup::Head,
    ];
}

impl fmt::Display for ParamGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParamGroup::Embeddings => "embeddings",
            ParamGroup::CharEncoder => "char_encoder",
            ParamGroup::Bilstm => "bilstm",
            ParamGroup::Head => "head",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub group: ParamGroup,
    pub trainable: bool,
    pub value: Matrix,
}

/// Named parameter tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: IndexMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, group: ParamGroup, trainable: bool, value: Matrix) -> ParamId {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        let id = self.params.len();
        self.index.insert(name.to_string(), id);
        self.params.push(Param {
            name: name.to_string(),
            group,
            trainable,
            value,
        });
        ParamId(id)
    }

    /// Register a Glorot-uniform initialised matrix.
    pub fn add_glorot(&mut self, name: &str, group: ParamGroup, shape: (usize, usize), rng: &mut impl Rng) -> ParamId {
        let limit = (6.0 / (shape.0 + shape.1) as f64).sqrt();
        let value = Matrix::from_shape_fn(shape, |_| rng.random_range(-limit..limit));
        self.add(name, group, true, value)
    }

    pub fn add_zeros(&mut self, name: &str, group: ParamGroup, shape: (usize, usize)) -> ParamId {
        self.add(name, group, true, Matrix::zeros(shape))
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.index
            .get(name)
            .map(|&i| ParamId(i))
            .ok_or_else(|| Error::Model(format!("missing parameter `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Remove every parameter of `group`. Ids of later parameters shift, so
    /// any bound network must be rebound afterwards.
    pub fn remove_group(&mut self, group: ParamGroup) {
        self.params.retain(|p| p.group != group);
        self.index = self
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.clone(), i))
            .collect();
    }

    pub fn set_group_trainable(&mut self, group: ParamGroup, trainable: bool) {
        for p in self.params.iter_mut().filter(|p| p.group == group) {
            p.trainable = trainable;
        }
    }

    pub fn set_trainable(&mut self, name: &str, trainable: bool) -> Result<()> {
        let id = self.id(name)?;
        self.params[id.0].trainable = trainable;
        Ok(())
    }

    pub fn trainable_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.len())
            .sum()
    }

    /// SHA-256 over names, shapes and exact bit patterns of the selected
    /// parameters, in registration order.
    pub fn checksum(&self, filter: impl Fn(&Param) -> bool) -> String {
        let mut hasher = Sha256::new();
        for p in self.params.iter().filter(|p| filter(p)) {
            hasher.update(p.name.as_bytes());
            hasher.update((p.value.nrows() as u64).to_le_bytes());
            hasher.update((p.value.ncols() as u64).to_le_bytes());
            for v in p.value.iter() {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Gradients aligned with a [`ParamStore`]; `None` for untouched or
/// frozen parameters.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn new(store: &ParamStore) -> Self {
        Gradients {
            grads: vec![None; store.len()],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.grads[id.0].as_ref()
    }

    pub(crate) fn slot(&mut self, id: ParamId, shape: (usize, usize)) -> &mut Matrix {
        self.grads[id.0].get_or_insert_with(|| Matrix::zeros(shape))
    }

    pub fn accumulate(&mut self, id: ParamId, g: &Matrix) {
        match &mut self.grads[id.0] {
            Some(acc) => *acc += g,
            slot @ None => *slot = Some(g.clone()),
        }
    }

    /// Add `other` into `self`.
    pub fn merge(mut self, other: Gradients) -> Gradients {
        for (a, b) in self.grads.iter_mut().zip(other.grads) {
            match (a.as_mut(), b) {
                (Some(acc), Some(g)) => *acc += &g,
                (None, Some(g)) => *a = Some(g),
                _ => {}
            }
        }
        self
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.mapv_inplace(|x| x * factor);
        }
    }

    pub fn norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .map(|g| g.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Matrix)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_tracks_bits() {
        let mut s = ParamStore::new();
        s.add("a", ParamGroup::Head, true, Matrix::zeros((2, 2)));
        let c0 = s.checksum(|_| true);
        s.get_mut(ParamId(0)).value[[0, 0]] = -0.0;
        assert_ne!(c0, s.checksum(|_| true));
        assert_eq!(c0.len(), 64);
    }

    #[test]
    fn remove_group_reindexes() {
        let mut s = ParamStore::new();
        s.add("h", ParamGroup::Head, true, Matrix::zeros((1, 1)));
        s.add("e", ParamGroup::Embeddings, true, Matrix::zeros((1, 1)));
        s.remove_group(ParamGroup::Head);
        assert_eq!(s.id("e").unwrap(), ParamId(0));
        assert!(s.id("h").is_err());
    }
}
