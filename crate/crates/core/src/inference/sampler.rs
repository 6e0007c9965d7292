//! Chain state with a cached mean matrix and the sweep driver.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::conjugate::{
    a_posterior, alpha_posterior, rho_posterior, sample_beta, sigma2_a_posterior,
    sigma2_x_posterior,
};
use super::{
    ChainTrace, FixedHypers, IterationSummary, ModelSpec, ModelState, Regime, SamplerConfig,
};
use crate::error::{Error, Result};
use crate::generative::sample_ibp;
use crate::model::{
    normal_log_density, totals_matrix, Dataset, FeatureAllocation, FeatureDictionary,
    InstanceWeights, WeightKind,
};
use crate::rng::ChainRng;

/// A running Markov chain over [`ModelState`] for one dataset.
///
/// Keeps the completed data (observed cells plus current imputations) and the
/// model mean `Y A` in row-major buffers so single-entry moves cost time
/// proportional to the rows they touch.
pub struct Sampler {
    pub(crate) state: ModelState,
    pub(crate) regime: Regime,
    pub(crate) k_max: usize,
    pub(crate) bracket_width: u32,
    fixed: FixedHypers,
    pub(crate) n_rows: usize,
    pub(crate) n_dims: usize,
    observed: Vec<bool>,
    completed: Vec<f64>,
    mean: Vec<f64>,
    missing: Vec<(usize, usize)>,
    pub(crate) rng: ChainRng,
}

/// Draws the starting point: a buffet draw with unit lifetimes (padded or
/// truncated to `k_max` columns in the weak limit), weights from their prior,
/// and features at their conditional mean given the data with missing cells
/// set to column means.
pub(crate) fn initial_state(
    data: &Dataset,
    model: &ModelSpec,
    config: &SamplerConfig,
    rng: &mut ChainRng,
) -> Result<ModelState> {
    let (n, d) = (data.n_rows(), data.n_dims());
    if n == 0 || d == 0 {
        return Err(Error::Shape("dataset has no rows or no columns".into()));
    }
    let fixed = &config.fixed_hypers;
    let alpha = fixed.alpha.unwrap_or(1.0);
    let mut cols = sample_ibp(n, alpha, rng)?.columns().to_vec();
    if config.regime == Regime::WeakLimit {
        cols.resize(config.k_max, vec![0; n]);
    }
    let k = cols.len();
    let alloc = FeatureAllocation::from_columns(n, cols)?;

    let weight_kind = model.kind.weight_kind(&model.priors);
    let weights = match weight_kind {
        WeightKind::ConstantOne => InstanceWeights::constant(n, k),
        WeightKind::Gamma { shape, scale } => {
            let g = Gamma::new(shape, scale).map_err(|e| Error::Domain(e.to_string()))?;
            let cols = (0..k)
                .map(|_| (0..n).map(|_| g.sample(rng).max(f64::MIN_POSITIVE)).collect())
                .collect();
            InstanceWeights::from_columns(weight_kind, cols)?
        }
    };
    let rho = if model.kind.is_dynamic() {
        fixed.rho.unwrap_or(0.5)
    } else {
        1.0
    };
    let sigma2_x = fixed.sigma2_x.unwrap_or(1.0);
    let sigma2_a = fixed.sigma2_a.unwrap_or(1.0);

    let mut x = data.x().clone();
    for j in 0..d {
        let (sum, cnt) = (0..n)
            .filter_map(|i| data.value(i, j))
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        let fill = if cnt > 0 { sum / cnt as f64 } else { 0.0 };
        for i in 0..n {
            if !data.is_observed(i, j) {
                x[(i, j)] = fill;
            }
        }
    }
    let y = totals_matrix(&alloc, &weights)?;
    let a = a_posterior(&y, &x, sigma2_x, sigma2_a)?.mean;

    let mut state = ModelState::empty(model.kind, n, d, model.priors);
    state.alloc = alloc;
    state.weights = weights;
    state.dict = FeatureDictionary::new(a)?;
    state.hypers.alpha = alpha;
    state.hypers.sigma2_x = sigma2_x;
    state.hypers.sigma2_a = sigma2_a;
    state.hypers.rho = vec![rho; k];
    Ok(state)
}

impl Sampler {
    pub fn new(
        data: &Dataset,
        state: ModelState,
        config: &SamplerConfig,
        rng: ChainRng,
    ) -> Result<Self> {
        config.validate()?;
        state.validate()?;
        let (n, d) = (data.n_rows(), data.n_dims());
        if state.alloc.n_rows() != n || state.dict.n_dims() != d {
            return Err(Error::Shape(format!(
                "state is {}x{} but data is {n}x{d}",
                state.alloc.n_rows(),
                state.dict.n_dims()
            )));
        }
        if config.regime == Regime::WeakLimit && state.n_features() != config.k_max {
            return Err(Error::Shape(format!(
                "weak-limit state has {} columns, expected {}",
                state.n_features(),
                config.k_max
            )));
        }
        let mut observed = Vec::with_capacity(n * d);
        let mut completed = Vec::with_capacity(n * d);
        for i in 0..n {
            for j in 0..d {
                observed.push(data.is_observed(i, j));
                completed.push(data.value(i, j).unwrap_or(0.0));
            }
        }
        let mut s = Sampler {
            state,
            regime: config.regime,
            k_max: config.k_max,
            bracket_width: config.initial_bracket_width,
            fixed: config.fixed_hypers,
            n_rows: n,
            n_dims: d,
            observed,
            completed,
            mean: vec![0.0; n * d],
            missing: data.masked_cells(),
            rng,
        };
        s.apply_fixed();
        s.refresh_mean();
        s.impute_missing();
        Ok(s)
    }

    /// A chain started from a prior draw, using stream `stream` of
    /// `config.seed`.
    pub fn from_prior(
        data: &Dataset,
        model: &ModelSpec,
        config: &SamplerConfig,
        stream: u64,
    ) -> Result<Self> {
        config.validate()?;
        model.priors.validate()?;
        let mut rng = crate::rng::stream(config.seed, stream);
        let init = initial_state(data, model, config, &mut rng)?;
        Sampler::new(data, init, config, rng)
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn into_state(self) -> ModelState {
        self.state
    }

    fn apply_fixed(&mut self) {
        let f = self.fixed;
        let h = &mut self.state.hypers;
        if let Some(v) = f.alpha {
            h.alpha = v;
        }
        if let Some(v) = f.sigma2_x {
            h.sigma2_x = v;
        }
        if let Some(v) = f.sigma2_a {
            h.sigma2_a = v;
        }
        if let (Some(v), true) = (f.rho, self.state.kind.is_dynamic()) {
            h.rho.iter_mut().for_each(|r| *r = v);
        }
    }

    /// Recomputes the cached mean `Y A` from scratch.
    pub(crate) fn refresh_mean(&mut self) {
        let y = totals_matrix(&self.state.alloc, &self.state.weights).expect("consistent state");
        let mu = y * &self.state.dict.a;
        for i in 0..self.n_rows {
            for j in 0..self.n_dims {
                self.mean[i * self.n_dims + j] = mu[(i, j)];
            }
        }
    }

    /// Log-likelihood change of adding `scale · A_k` to the mean of row `r`.
    #[inline]
    pub(crate) fn row_delta_feature(&self, r: usize, k: usize, scale: f64) -> f64 {
        let d = self.n_dims;
        let base = r * d;
        let mut acc = 0.0;
        for j in 0..d {
            if self.observed[base + j] {
                let v = scale * self.state.dict.a[(k, j)];
                let e = self.completed[base + j] - self.mean[base + j];
                acc += v * (2.0 * e - v);
            }
        }
        acc / (2.0 * self.state.hypers.sigma2_x)
    }

    /// Log-likelihood change of adding the vector `v` to the mean of row `r`.
    #[inline]
    pub(crate) fn row_delta(&self, r: usize, v: &[f64]) -> f64 {
        let base = r * self.n_dims;
        let mut acc = 0.0;
        for (j, &vj) in v.iter().enumerate() {
            if self.observed[base + j] {
                let e = self.completed[base + j] - self.mean[base + j];
                acc += vj * (2.0 * e - vj);
            }
        }
        acc / (2.0 * self.state.hypers.sigma2_x)
    }

    #[inline]
    pub(crate) fn add_feature_to_row(&mut self, r: usize, k: usize, scale: f64) {
        let base = r * self.n_dims;
        for j in 0..self.n_dims {
            self.mean[base + j] += scale * self.state.dict.a[(k, j)];
        }
    }

    /// Redraws every missing cell from `N(mean, σ²_X)`.
    pub fn impute_missing(&mut self) {
        let sd = self.state.hypers.sigma2_x.sqrt();
        for &(i, j) in &self.missing {
            let idx = i * self.n_dims + j;
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.completed[idx] = self.mean[idx] + sd * z;
        }
    }

    /// Current imputed values, in row-major missing-cell order.
    pub fn imputed_values(&self) -> Vec<f64> {
        self.missing
            .iter()
            .map(|&(i, j)| self.completed[i * self.n_dims + j])
            .collect()
    }

    /// Completed data as a matrix.
    pub fn completed_data(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_rows, self.n_dims, &self.completed)
    }

    /// Observed-cell log-likelihood from the cache.
    pub fn log_likelihood(&self) -> f64 {
        let s2 = self.state.hypers.sigma2_x;
        (0..self.completed.len())
            .filter(|&i| self.observed[i])
            .map(|i| normal_log_density(self.completed[i], self.mean[i], s2))
            .sum()
    }

    pub fn log_joint(&self) -> Result<f64> {
        Ok(self.log_likelihood() + self.state.log_prior(self.regime, self.k_max)?)
    }

    fn sse_observed(&self) -> (usize, f64) {
        let mut cnt = 0;
        let mut sse = 0.0;
        for i in 0..self.completed.len() {
            if self.observed[i] {
                let e = self.completed[i] - self.mean[i];
                sse += e * e;
                cnt += 1;
            }
        }
        (cnt, sse)
    }

    /// Block Gibbs draw of the feature matrix given the completed data.
    pub fn gibbs_update_a(&mut self) -> Result<()> {
        let y = totals_matrix(&self.state.alloc, &self.state.weights)?;
        let x = self.completed_data();
        let h = &self.state.hypers;
        let post = a_posterior(&y, &x, h.sigma2_x, h.sigma2_a)?;
        self.state.dict.a = post.sample(&mut self.rng);
        self.refresh_mean();
        Ok(())
    }

    /// Conjugate draws of the noise variance (observed cells only) and the
    /// feature variance.
    pub fn sample_variances(&mut self) {
        let priors = self.state.hypers.priors;
        if self.fixed.sigma2_x.is_none() {
            let (cnt, sse) = self.sse_observed();
            self.state.hypers.sigma2_x = sigma2_x_posterior(&priors, cnt, sse)
                .sample(&mut self.rng)
                .max(f64::MIN_POSITIVE);
        }
        if self.fixed.sigma2_a.is_none() {
            let a = &self.state.dict.a;
            let ss = a.iter().map(|v| v * v).sum::<f64>();
            self.state.hypers.sigma2_a = sigma2_a_posterior(&priors, a.len(), ss)
                .sample(&mut self.rng)
                .max(f64::MIN_POSITIVE);
        }
    }

    /// Beta draws of every feature's stopping probability (dynamic models).
    pub fn sample_rho(&mut self) {
        if !self.state.kind.is_dynamic() || self.fixed.rho.is_some() {
            return;
        }
        let priors = self.state.hypers.priors;
        for k in 0..self.state.n_features() {
            let (a, b) = rho_posterior(&self.state.alloc, k, &priors);
            self.state.hypers.rho[k] = sample_beta(a, b, &mut self.rng);
        }
    }

    /// Gamma draw of the IBP mass given the number of non-empty features.
    pub fn sample_alpha(&mut self) {
        if self.fixed.alpha.is_some() {
            return;
        }
        let g = alpha_posterior(
            self.state.alloc.n_nonempty(),
            self.n_rows,
            &self.state.hypers.priors,
        );
        self.state.hypers.alpha = g.sample(&mut self.rng).max(f64::MIN_POSITIVE);
    }

    /// Updates every entry of the allocation once, row by row.
    pub fn sweep_allocation(&mut self) {
        for n in 0..self.n_rows {
            for k in 0..self.state.n_features() {
                if self.regime == Regime::FullNonparametric
                    && self.state.alloc.column_count_excluding(k, n) == 0
                {
                    continue;
                }
                self.slice_sample_lambda(n, k);
            }
            if self.regime == Regime::FullNonparametric {
                self.mh_singletons(n);
            }
        }
        if self.regime == Regime::FullNonparametric {
            self.state.prune_empty();
        }
    }

    /// One full iteration. Returns the imputations drawn at its start.
    pub fn step(&mut self) -> Result<Vec<f64>> {
        self.impute_missing();
        let imputed = self.imputed_values();
        self.sweep_allocation();
        self.impute_missing();
        self.gibbs_update_a()?;
        self.sweep_weights();
        self.sample_variances();
        self.sample_rho();
        self.sample_alpha();
        Ok(imputed)
    }

    fn summary(&self, iteration: usize) -> Result<IterationSummary> {
        let log_joint = self.log_joint()?;
        if !log_joint.is_finite() {
            let h = &self.state.hypers;
            return Err(Error::NonFinite {
                iteration,
                dump: format!(
                    "K={} instances={} alpha={} sigma2_x={} sigma2_a={} rho={:?} log_lik={}",
                    self.state.n_features(),
                    self.state.alloc.n_instances(),
                    h.alpha,
                    h.sigma2_x,
                    h.sigma2_a,
                    h.rho,
                    self.log_likelihood()
                ),
            });
        }
        Ok(IterationSummary {
            iteration,
            log_joint,
            n_features: self.state.alloc.n_nonempty(),
            alpha: self.state.hypers.alpha,
            sigma2_x: self.state.hypers.sigma2_x,
            sigma2_a: self.state.hypers.sigma2_a,
            n_instances: self.state.alloc.n_instances(),
            total_lifetime: self.state.alloc.total_contributions(),
        })
    }

    /// Runs `config.n_iters` iterations, keeping every `thin`-th one after
    /// burn-in.
    pub fn run(mut self, config: &SamplerConfig) -> Result<ChainTrace> {
        let mut iterations = Vec::with_capacity(config.n_kept());
        let mut imputations = Vec::new();
        for it in 0..config.n_iters {
            let imputed = self.step()?;
            let keep = it >= config.burn_in && (it - config.burn_in + 1) % config.thin == 0;
            if keep {
                iterations.push(self.summary(it)?);
                if !self.missing.is_empty() {
                    imputations.push(imputed);
                }
            } else if !self.log_likelihood().is_finite() {
                self.summary(it)?;
            }
        }
        Ok(ChainTrace {
            model: self.state.kind,
            regime: self.regime,
            seed: config.seed,
            iterations,
            imputed_cells: self.missing.clone(),
            imputations,
            final_state: self.state,
        })
    }

    pub(crate) fn fixed_rho(&self) -> Option<f64> {
        self.fixed.rho
    }

    pub(crate) fn uniform(&mut self) -> f64 {
        self.rng.random()
    }
}
