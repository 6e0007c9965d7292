//! MCMC posterior inference.
//!
//! One sweep of [`run_chain`] performs, in order: imputation of masked cells,
//! integer slice sampling of every `λ_nk` (plus singleton birth/death moves in
//! the fully nonparametric regime), a block Gibbs draw of the feature matrix,
//! Metropolis–Hastings updates of instance weights, and conjugate draws of
//! both variances, the lifetime parameters and the IBP mass.
//!
//! The allocation, singleton and weight moves and the noise-variance draw
//! condition on the observed cells only (missing cells integrated out); only
//! the feature-matrix draw uses the completed data, so missing cells are
//! re-imputed immediately before it.

mod conjugate;
mod lambda;
mod sampler;
mod singletons;
mod weights;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ibp_log_prob, lifetime_log_pmf, normal_log_density, weak_limit_log_prob, Dataset,
    FeatureAllocation, FeatureDictionary, HyperPriors, Hyperparameters, InstanceWeights, ModelKind,
    WeightKind,
};

pub use conjugate::{
    a_posterior, alpha_posterior, rho_posterior, sigma2_a_posterior, sigma2_x_posterior,
    APosterior, GammaParams, InvGammaParams,
};
pub use lambda::{lambda_log_prior, lambda_prior_term, PriorRegime};
pub use sampler::Sampler;
pub use singletons::SingletonProposal;

/// How the feature allocation is sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Unbounded number of features; new features are born through singleton
    /// moves and empty features are pruned.
    FullNonparametric,
    /// Fixed `k_max` columns with the finite beta–Bernoulli prior.
    WeakLimit,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-nonparametric" | "full" => Ok(Regime::FullNonparametric),
            "weak-limit" => Ok(Regime::WeakLimit),
            other => Err(Error::Config(format!("unknown regime `{other}`"))),
        }
    }
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::FullNonparametric => "full-nonparametric",
            Regime::WeakLimit => "weak-limit",
        }
    }
}

/// Hyperparameters held at a fixed value instead of being sampled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedHypers {
    pub alpha: Option<f64>,
    pub sigma2_x: Option<f64>,
    pub sigma2_a: Option<f64>,
    /// Shared lifetime parameter for every feature.
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub regime: Regime,
    /// Number of columns in the weak-limit regime.
    pub k_max: usize,
    pub n_iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Width of the integer bracket used by the lifetime slice sampler.
    pub initial_bracket_width: u32,
    pub seed: u64,
    pub fixed_hypers: FixedHypers,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            regime: Regime::WeakLimit,
            k_max: 20,
            n_iters: 2000,
            burn_in: 1000,
            thin: 1,
            initial_bracket_width: 10,
            seed: 0,
            fixed_hypers: FixedHypers::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in > self.n_iters {
            return Err(Error::Config(format!(
                "burn-in {} exceeds the number of iterations {}",
                self.burn_in, self.n_iters
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.regime == Regime::WeakLimit && self.k_max == 0 {
            return Err(Error::Config("weak-limit regime needs k_max >= 1".into()));
        }
        if self.initial_bracket_width == 0 {
            return Err(Error::Config("bracket width must be at least 1".into()));
        }
        let f = &self.fixed_hypers;
        for v in [f.alpha, f.sigma2_x, f.sigma2_a].into_iter().flatten() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("fixed hyperparameter {v} must be positive")));
            }
        }
        if let Some(r) = f.rho {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Config(format!("fixed rho {r} must lie in (0, 1]")));
            }
        }
        Ok(())
    }

    /// Number of iterations a run records.
    pub fn n_kept(&self) -> usize {
        (self.n_iters - self.burn_in) / self.thin
    }
}

/// One point of the Markov chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub kind: ModelKind,
    pub alloc: FeatureAllocation,
    pub dict: FeatureDictionary,
    pub weights: InstanceWeights,
    pub hypers: Hyperparameters,
}

impl ModelState {
    /// A state with no features.
    pub fn empty(kind: ModelKind, n_rows: usize, n_dims: usize, priors: HyperPriors) -> Self {
        let weights = match kind.weight_kind(&priors) {
            WeightKind::ConstantOne => InstanceWeights::constant(n_rows, 0),
            kind => InstanceWeights::from_columns(kind, Vec::new()).expect("no columns"),
        };
        ModelState {
            kind,
            alloc: FeatureAllocation::empty(n_rows),
            dict: FeatureDictionary::zeros(0, n_dims),
            weights,
            hypers: Hyperparameters {
                alpha: 1.0,
                sigma2_x: 1.0,
                sigma2_a: 1.0,
                rho: Vec::new(),
                priors,
            },
        }
    }

    pub fn n_features(&self) -> usize {
        self.alloc.n_cols()
    }

    /// Largest lifetime representable at row `n` under this model.
    #[inline]
    pub fn max_lifetime(&self, n: usize) -> u32 {
        if self.kind.is_dynamic() {
            self.alloc.cap(n)
        } else {
            1
        }
    }

    /// Checks the cross-component invariants.
    pub fn validate(&self) -> Result<()> {
        let k = self.alloc.n_cols();
        if self.dict.n_features() != k || self.weights.n_cols() != k || self.hypers.rho.len() != k {
            return Err(Error::Shape(format!(
                "{k} allocation columns, {} features, {} weight columns, {} lifetime parameters",
                self.dict.n_features(),
                self.weights.n_cols(),
                self.hypers.rho.len()
            )));
        }
        for (n, kk, l) in self.alloc.instances() {
            if l > self.max_lifetime(n) {
                return Err(Error::Domain(format!(
                    "lifetime {l} at ({n}, {kk}) exceeds its cap {}",
                    self.max_lifetime(n)
                )));
            }
        }
        if self.dict.a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite feature entries".into()));
        }
        self.hypers.validate()
    }

    pub(crate) fn remove_feature(&mut self, k: usize) {
        self.alloc.remove_column(k);
        self.weights.remove_column(k);
        let a = std::mem::replace(&mut self.dict.a, nalgebra::DMatrix::zeros(0, 0));
        self.dict.a = a.remove_row(k);
        self.hypers.rho.remove(k);
    }

    pub(crate) fn push_feature(&mut self, col: Vec<u32>, weights: Vec<f64>, a_row: &[f64], rho: f64) {
        self.alloc.push_column(col).expect("column length checked by caller");
        self.weights.push_column(weights);
        let k = self.dict.a.nrows();
        let a = std::mem::replace(&mut self.dict.a, nalgebra::DMatrix::zeros(0, 0));
        let mut a = a.insert_row(k, 0.0);
        for (d, &v) in a_row.iter().enumerate() {
            a[(k, d)] = v;
        }
        self.dict.a = a;
        self.hypers.rho.push(rho);
    }

    /// Removes all-zero features (fully nonparametric regime only).
    pub(crate) fn prune_empty(&mut self) {
        let keep = self.alloc.prune_empty();
        if keep.len() == self.weights.n_cols() {
            return;
        }
        self.weights.retain_columns(&keep);
        self.dict.a = self.dict.a.select_rows(keep.iter());
        self.hypers.rho = keep.iter().map(|&k| self.hypers.rho[k]).collect();
    }

    /// Mean lifetime over all instances, `None` without instances.
    pub fn avg_persistence(&self) -> Option<f64> {
        let n = self.alloc.n_instances();
        (n > 0).then(|| self.alloc.total_contributions() as f64 / n as f64)
    }

    /// Log of the joint density of the observed cells and all latent
    /// quantities, recomputed from scratch.
    pub fn log_joint(&self, data: &Dataset, regime: Regime, k_max: usize) -> Result<f64> {
        let ll = crate::model::log_likelihood(
            data,
            &self.alloc,
            &self.weights,
            &self.dict,
            self.hypers.sigma2_x,
        )?;
        Ok(ll + self.log_prior(regime, k_max)?)
    }

    /// Log prior of every latent quantity (allocation, lifetimes, features,
    /// weights, lifetime parameters and scalar hyperparameters).
    pub fn log_prior(&self, regime: Regime, k_max: usize) -> Result<f64> {
        let h = &self.hypers;
        let p = &h.priors;
        let mut lp = match regime {
            Regime::FullNonparametric => ibp_log_prob(&self.alloc, h.alpha)?,
            Regime::WeakLimit => weak_limit_log_prob(&self.alloc, h.alpha, k_max)?,
        };
        if self.kind.is_dynamic() {
            for (n, k, l) in self.alloc.instances() {
                lp += lifetime_log_pmf(l, h.rho[k], self.alloc.cap(n));
            }
            for &r in &h.rho {
                lp += conjugate::beta_ln_pdf(r, p.a_rho, p.b_rho);
            }
        }
        if let WeightKind::Gamma { shape, scale } = self.weights.kind() {
            for (n, k, _) in self.alloc.instances() {
                lp += conjugate::gamma_ln_pdf(self.weights.get(n, k), shape, scale);
            }
        }
        lp += self
            .dict
            .a
            .iter()
            .map(|&a| normal_log_density(a, 0.0, h.sigma2_a))
            .sum::<f64>();
        lp += conjugate::gamma_ln_pdf(h.alpha, p.a_alpha, p.b_alpha);
        lp += conjugate::inv_gamma_ln_pdf(h.sigma2_x, p.a_sigma, p.b_sigma);
        lp += conjugate::inv_gamma_ln_pdf(h.sigma2_a, p.a_sigma, p.b_sigma);
        Ok(lp)
    }
}

/// Scalar summary of one kept iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub log_joint: f64,
    /// Features with at least one instance.
    pub n_features: usize,
    pub alpha: f64,
    pub sigma2_x: f64,
    pub sigma2_a: f64,
    pub n_instances: usize,
    /// Sum of all lifetimes (each clipped to the horizon).
    pub total_lifetime: u64,
}

impl IterationSummary {
    pub fn avg_persistence(&self) -> Option<f64> {
        (self.n_instances > 0).then(|| self.total_lifetime as f64 / self.n_instances as f64)
    }
}

/// Output of one chain.
#[derive(Clone, Debug)]
pub struct ChainTrace {
    pub model: ModelKind,
    pub regime: Regime,
    pub seed: u64,
    pub iterations: Vec<IterationSummary>,
    /// Cells that were missing in the data, row-major.
    pub imputed_cells: Vec<(usize, usize)>,
    /// Imputed values of `imputed_cells`, one vector per kept iteration.
    pub imputations: Vec<Vec<f64>>,
    /// State after the last iteration.
    pub final_state: ModelState,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    /// Posterior mean of every imputed cell, in `imputed_cells` order.
    pub fn imputation_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.imputed_cells.len()];
        for draw in &self.imputations {
            for (m, v) in mean.iter_mut().zip(draw) {
                *m += v;
            }
        }
        let n = self.imputations.len().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

/// The model family member and its priors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub priors: HyperPriors,
}

/// Runs one chain from a prior-based initial state and records every kept
/// iteration. Deterministic given `config.seed` and `stream`.
pub fn run_chain(data: &Dataset, model: &ModelSpec, config: &SamplerConfig) -> Result<ChainTrace> {
    run_chain_on_stream(data, model, config, 0)
}

/// As [`run_chain`], drawing randomness from stream `stream` of the seed so
/// several chains can share one seed.
pub fn run_chain_on_stream(
    data: &Dataset,
    model: &ModelSpec,
    config: &SamplerConfig,
    stream: u64,
) -> Result<ChainTrace> {
    Sampler::from_prior(data, model, config, stream)?.run(config)
}
