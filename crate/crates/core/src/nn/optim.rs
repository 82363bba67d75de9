use serde::{Deserialize, Serialize};

use super::params::{Gradients, Matrix, ParamStore};

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 2e-3,
            beta1: 0.9,
            beta2: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction. Frozen parameters are skipped entirely.
pub struct Adam {
    config: AdamConfig,
    first: Vec<Option<Matrix>>,
    second: Vec<Option<Matrix>>,
    steps: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        Adam {
            config,
            first: vec![None; store.len()],
            second: vec![None; store.len()],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        self.steps += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.steps as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (id, g) in grads.iter() {
            let param = store.get_mut(id);
            if !param.trainable {
                continue;
            }
            let m = self.first[id.0].get_or_insert_with(|| Matrix::zeros(g.dim()));
            let v = self.second[id.0].get_or_insert_with(|| Matrix::zeros(g.dim()));
            ndarray::Zip::from(&mut param.value)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|w, m, v, &g| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *w -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::ParamGroup;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = ParamStore::new();
        let id = store.add("w", ParamGroup::Head, true, Matrix::zeros((1, 2)));
        let frozen = store.add("f", ParamGroup::Bilstm, false, Matrix::zeros((1, 1)));
        let mut grads = Gradients::new(&store);
        grads.accumulate(id, &ndarray::array![[3.0, -0.5]]);
        grads.accumulate(frozen, &ndarray::array![[1.0]]);
        let mut adam = Adam::new(AdamConfig::default(), &store);
        adam.step(&mut store, &grads);
        let w = store.value(id);
        assert!((w[[0, 0]] + 2e-3).abs() < 1e-9);
        assert!((w[[0, 1]] - 2e-3).abs() < 1e-9);
        assert_eq!(store.value(frozen)[[0, 0]], 0.0);
    }
}
