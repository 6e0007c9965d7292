//! Independence Metropolis–Hastings updates of instance weights.

use rand_distr::{Distribution, Gamma};

use super::Sampler;
use crate::model::WeightKind;

impl Sampler {
    /// Proposes `b*_nk` from the weight prior and accepts with the likelihood
    /// ratio over the rows the instance covers. Returns whether the weight
    /// changed. Entries without an instance are redrawn from the prior.
    pub fn mh_update_b(&mut self, n: usize, k: usize) -> bool {
        let WeightKind::Gamma { shape, scale } = self.state.weights.kind() else {
            return false;
        };
        let proposal = Gamma::new(shape, scale)
            .expect("valid weight prior")
            .sample(&mut self.rng)
            .max(f64::MIN_POSITIVE);
        let lambda = self.state.alloc.get(n, k);
        if lambda == 0 {
            self.state.weights.set(n, k, proposal);
            return true;
        }
        let diff = proposal - self.state.weights.get(n, k);
        let end = (n + lambda as usize).min(self.n_rows);
        let log_ratio: f64 = (n..end).map(|r| self.row_delta_feature(r, k, diff)).sum();
        if self.uniform().ln() < log_ratio {
            for r in n..end {
                self.add_feature_to_row(r, k, diff);
            }
            self.state.weights.set(n, k, proposal);
            true
        } else {
            false
        }
    }

    /// One weight update for every `(n, k)`.
    pub fn sweep_weights(&mut self) {
        if self.state.weights.kind() == WeightKind::ConstantOne {
            return;
        }
        for k in 0..self.state.n_features() {
            for n in 0..self.n_rows {
                self.mh_update_b(n, k);
            }
        }
    }
}
