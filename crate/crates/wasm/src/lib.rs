//! WebAssembly bindings for the browser demo: prior draws of persistent
//! feature instances, the persistent-bars benchmark, and an interactive
//! sampler that learns the bars.

use dynlfm::evaluation::{state_feature_usage, state_persistence};
use dynlfm::generative::{generate_cambridge_bars, sample_dynamic_process, LifetimePrior, SyntheticSpec};
use dynlfm::inference::{ModelSpec, Regime, Sampler, SamplerConfig};
use dynlfm::model::{HyperPriors, InstanceSet, ModelKind};
use wasm_bindgen::prelude::*;

const WARM_UP: usize = 50;

fn js_err(e: dynlfm::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// A draw of lifetimes from the persistent-instance prior.
#[wasm_bindgen]
pub struct PriorDraw {
    n_rows: usize,
    n_features: usize,
    lifetimes: Vec<u32>,
    active: Vec<u32>,
}

#[wasm_bindgen]
impl PriorDraw {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Row-major `n_rows × n_features` lifetimes clipped to the horizon.
    pub fn lifetimes(&self) -> Vec<u32> {
        self.lifetimes.clone()
    }

    /// Row-major `n_rows × n_features` counts of active instances.
    pub fn active(&self) -> Vec<u32> {
        self.active.clone()
    }
}

/// Samples `n_rows` observations' worth of feature instances with
/// concentration `alpha` and stopping probability `rho`.
#[wasm_bindgen]
pub fn sample_prior(n_rows: usize, alpha: f64, rho: f64, seed: u64) -> Result<PriorDraw, JsError> {
    let mut rng = dynlfm::rng::stream(seed, 0);
    let draw = sample_dynamic_process(n_rows, alpha, LifetimePrior::Fixed(rho), &mut rng).map_err(js_err)?;
    let alloc = draw.alloc.capped();
    let k = alloc.n_cols();
    let counts = InstanceSet::from_allocation(&alloc).counts(k);
    let mut lifetimes = Vec::with_capacity(n_rows * k);
    let mut active = Vec::with_capacity(n_rows * k);
    for n in 0..n_rows {
        for kk in 0..k {
            lifetimes.push(alloc.get(n, kk));
            active.push(counts[n][kk]);
        }
    }
    Ok(PriorDraw { n_rows, n_features: k, lifetimes, active })
}

/// The persistent-bars benchmark together with a sampler fitting it.
#[wasm_bindgen]
pub struct BarsDemo {
    truth: Vec<f64>,
    observed: Vec<bool>,
    n_dims: usize,
    n_rows: usize,
    heldout: Vec<(usize, usize)>,
    sampler: Sampler,
    iteration: usize,
    imputation_sum: Vec<f64>,
    n_averaged: usize,
}

#[wasm_bindgen]
impl BarsDemo {
    /// Generates `n_obs` noisy bar images and starts a weak-limit chain with
    /// `k_max` features on them, dynamic or static.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, n_obs: usize, noise_sd: f64, dynamic: bool, k_max: usize) -> Result<BarsDemo, JsError> {
        let spec = SyntheticSpec { seed, n_obs, noise_sd, ..Default::default() };
        let bench = generate_cambridge_bars(&spec).map_err(js_err)?;
        let kind = if dynamic { ModelKind::DynamicConstant } else { ModelKind::Static };
        let config = SamplerConfig { regime: Regime::WeakLimit, k_max, seed, ..Default::default() };
        let model = ModelSpec { kind, priors: HyperPriors::default() };
        let sampler = Sampler::from_prior(&bench.data, &model, &config, 0).map_err(js_err)?;
        let (n_rows, n_dims) = (bench.data.n_rows(), bench.data.n_dims());
        let mut truth = Vec::with_capacity(n_rows * n_dims);
        let mut observed = Vec::with_capacity(n_rows * n_dims);
        for n in 0..n_rows {
            for d in 0..n_dims {
                truth.push(bench.truth.value(n, d).unwrap_or(f64::NAN));
                observed.push(bench.data.is_observed(n, d));
            }
        }
        let heldout = bench.data.masked_cells();
        Ok(BarsDemo {
            truth,
            observed,
            n_dims,
            n_rows,
            imputation_sum: vec![0.0; heldout.len()],
            heldout,
            sampler,
            iteration: 0,
            n_averaged: 0,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    /// Observation `n` with hidden cells as NaN.
    pub fn observation(&self, n: usize) -> Vec<f64> {
        let r = n.min(self.n_rows - 1) * self.n_dims;
        (r..r + self.n_dims)
            .map(|i| if self.observed[i] { self.truth[i] } else { f64::NAN })
            .collect()
    }

    /// Runs `iters` sampler iterations, averaging imputations after the
    /// first `WARM_UP`.
    pub fn step(&mut self, iters: usize) -> Result<(), JsError> {
        for _ in 0..iters {
            let imputed = self.sampler.step().map_err(js_err)?;
            self.iteration += 1;
            if self.iteration > WARM_UP {
                for (s, v) in self.imputation_sum.iter_mut().zip(imputed) {
                    *s += v;
                }
                self.n_averaged += 1;
            }
        }
        Ok(())
    }

    /// Forgets the imputations averaged so far.
    pub fn reset_average(&mut self) {
        self.imputation_sum.iter_mut().for_each(|s| *s = 0.0);
        self.n_averaged = 0;
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn n_features(&self) -> usize {
        self.sampler.state().alloc.n_nonempty()
    }

    pub fn avg_persistence(&self) -> f64 {
        state_persistence(self.sampler.state()).unwrap_or(f64::NAN)
    }

    pub fn sigma2_x(&self) -> f64 {
        self.sampler.state().hypers.sigma2_x
    }

    /// Held-out MSE of the averaged imputations, NaN before any are averaged.
    pub fn heldout_mse(&self) -> f64 {
        if self.n_averaged == 0 || self.heldout.is_empty() {
            return f64::NAN;
        }
        let m = self.n_averaged as f64;
        self.heldout
            .iter()
            .zip(&self.imputation_sum)
            .map(|(&(n, d), s)| (s / m - self.truth[n * self.n_dims + d]).powi(2))
            .sum::<f64>()
            / self.heldout.len() as f64
    }

    /// Learned features in use, row-major `n_features × n_dims`, most
    /// popular first.
    pub fn features(&self) -> Vec<f64> {
        let st = self.sampler.state();
        state_feature_usage(st)
            .iter()
            .filter(|u| u.contributions > 0)
            .flat_map(|u| (0..self.n_dims).map(move |d| st.dict.a[(u.feature, d)]))
            .collect()
    }
}
