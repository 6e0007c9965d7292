//! Birth/death moves for features owned by a single row.

use rand_distr::{Distribution, Gamma, Normal};

use super::conjugate::sample_beta;
use super::Sampler;
use crate::generative::{poisson, sample_geometric};
use crate::model::WeightKind;

/// A candidate feature that is active only through the instance started at
/// the row being updated.
#[derive(Clone, Debug, PartialEq)]
pub struct SingletonProposal {
    pub lifetime: u32,
    pub weight: f64,
    pub a_row: Vec<f64>,
    pub rho: f64,
}

impl Sampler {
    /// Columns whose only instance starts at row `n`.
    pub fn singleton_columns(&self, n: usize) -> Vec<usize> {
        let alloc = &self.state.alloc;
        (0..alloc.n_cols())
            .filter(|&k| alloc.get(n, k) > 0 && alloc.column_count_excluding(k, n) == 0)
            .collect()
    }

    /// The current singletons of row `n` written as proposals.
    pub fn current_singletons(&self, n: usize) -> Vec<SingletonProposal> {
        self.singleton_columns(n)
            .into_iter()
            .map(|k| SingletonProposal {
                lifetime: self.state.alloc.get(n, k),
                weight: self.state.weights.get(n, k),
                a_row: self.state.dict.a.row(k).iter().copied().collect(),
                rho: self.state.hypers.rho[k],
            })
            .collect()
    }

    /// Log-likelihood ratio of replacing row `n`'s singletons by `proposals`.
    pub fn singleton_log_acceptance(&self, n: usize, proposals: &[SingletonProposal]) -> f64 {
        let old = self.singleton_columns(n);
        let horizon = self.n_rows - n;
        let span = old
            .iter()
            .map(|&k| self.state.alloc.get(n, k) as usize)
            .chain(proposals.iter().map(|p| p.lifetime as usize))
            .max()
            .unwrap_or(0)
            .min(horizon);
        if span == 0 {
            return 0.0;
        }
        let d = self.n_dims;
        let mut v = vec![0.0; span * d];
        for &k in &old {
            let l = (self.state.alloc.get(n, k) as usize).min(span);
            let b = self.state.weights.get(n, k);
            for r in 0..l {
                for j in 0..d {
                    v[r * d + j] -= b * self.state.dict.a[(k, j)];
                }
            }
        }
        for p in proposals {
            let l = (p.lifetime as usize).min(span);
            for r in 0..l {
                for j in 0..d {
                    v[r * d + j] += p.weight * p.a_row[j];
                }
            }
        }
        (0..span)
            .map(|r| self.row_delta(n + r, &v[r * d..(r + 1) * d]))
            .sum()
    }

    fn draw_singletons(&mut self, n: usize) -> Vec<SingletonProposal> {
        let h = &self.state.hypers;
        let (alpha, sigma_a, priors) = (h.alpha, h.sigma2_a.sqrt(), h.priors);
        let dynamic = self.state.kind.is_dynamic();
        let fixed_rho = self.fixed_rho();
        let cap = self.state.max_lifetime(n);
        let weight_kind = self.state.weights.kind();
        let count = poisson(alpha / self.n_rows as f64, &mut self.rng);
        let normal = Normal::new(0.0, sigma_a).expect("finite feature scale");
        (0..count)
            .map(|_| {
                let rho = match (dynamic, fixed_rho) {
                    (false, _) => 1.0,
                    (true, Some(r)) => r,
                    (true, None) => sample_beta(priors.a_rho, priors.b_rho, &mut self.rng),
                };
                let lifetime = sample_geometric(rho, &mut self.rng)
                    .expect("valid stopping probability")
                    .min(cap);
                let weight = match weight_kind {
                    WeightKind::ConstantOne => 1.0,
                    WeightKind::Gamma { shape, scale } => Gamma::new(shape, scale)
                        .expect("valid weight prior")
                        .sample(&mut self.rng)
                        .max(f64::MIN_POSITIVE),
                };
                let a_row = (0..self.n_dims).map(|_| normal.sample(&mut self.rng)).collect();
                SingletonProposal { lifetime, weight, a_row, rho }
            })
            .collect()
    }

    /// Metropolis–Hastings replacement of row `n`'s singleton features by a
    /// fresh prior draw. Returns whether the proposal was accepted.
    pub fn mh_singletons(&mut self, n: usize) -> bool {
        let proposals = self.draw_singletons(n);
        let old = self.singleton_columns(n);
        if proposals.is_empty() && old.is_empty() {
            return false;
        }
        let log_ratio = self.singleton_log_acceptance(n, &proposals);
        if !(self.uniform().ln() < log_ratio) {
            return false;
        }
        for &k in old.iter().rev() {
            self.set_lambda(n, k, 0);
            self.state.remove_feature(k);
        }
        for p in proposals {
            self.push_singleton(n, p);
        }
        true
    }

    fn push_singleton(&mut self, n: usize, p: SingletonProposal) {
        let mut weights = match self.state.weights.kind() {
            WeightKind::ConstantOne => vec![1.0; self.n_rows],
            WeightKind::Gamma { shape, scale } => {
                let g = Gamma::new(shape, scale).expect("valid weight prior");
                (0..self.n_rows)
                    .map(|_| g.sample(&mut self.rng).max(f64::MIN_POSITIVE))
                    .collect()
            }
        };
        weights[n] = p.weight;
        self.state
            .push_feature(vec![0; self.n_rows], weights, &p.a_row, p.rho);
        let k = self.state.n_features() - 1;
        self.set_lambda(n, k, p.lifetime);
    }
}
