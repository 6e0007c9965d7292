//! Held-out error and posterior summaries of chain traces.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{ChainTrace, ModelState};
use crate::model::Dataset;

/// Mean squared error between the posterior-mean imputation of every cell in
/// `mask` and its true value.
pub fn heldout_mse(trace: &ChainTrace, truth: &Dataset, mask: &[(usize, usize)]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::Undefined("MSE over an empty mask".into()));
    }
    if trace.imputations.is_empty() {
        return Err(Error::Undefined("trace holds no imputations".into()));
    }
    let means = trace.imputation_means();
    let index: HashMap<(usize, usize), usize> = trace
        .imputed_cells
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();
    for &(n, d) in mask {
        if !index.contains_key(&(n, d)) {
            return Err(Error::Domain(format!("cell ({n}, {d}) was not imputed by the chain")));
        }
    }
    mse_of_predictions(mask, |n, d| means[index[&(n, d)]], truth)
}

/// Mean squared difference between `predict(n, d)` and the true value over
/// the cells of `mask`.
pub fn mse_of_predictions(
    mask: &[(usize, usize)],
    predict: impl Fn(usize, usize) -> f64,
    truth: &Dataset,
) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::Undefined("MSE over an empty mask".into()));
    }
    let mut sse = 0.0;
    for &(n, d) in mask {
        if n >= truth.n_rows() {
            return Err(Error::Index { index: n, bound: truth.n_rows() });
        }
        if d >= truth.n_dims() {
            return Err(Error::Index { index: d, bound: truth.n_dims() });
        }
        let t = truth
            .value(n, d)
            .ok_or_else(|| Error::Domain(format!("true value of ({n}, {d}) is missing")))?;
        sse += (predict(n, d) - t).powi(2);
    }
    Ok(sse / mask.len() as f64)
}

/// Average lifetime over all instances of a state.
pub fn state_persistence(state: &ModelState) -> Result<f64> {
    state
        .avg_persistence()
        .ok_or_else(|| Error::Undefined("no active instances".into()))
}

/// Average lifetime over all instances of all kept iterations.
pub fn persistence_stats(trace: &ChainTrace) -> Result<f64> {
    let (total, count) = trace.iterations.iter().fold((0u64, 0usize), |(t, c), it| {
        (t + it.total_lifetime, c + it.n_instances)
    });
    if count == 0 {
        return Err(Error::Undefined("no active instances in the trace".into()));
    }
    Ok(total as f64 / count as f64)
}

/// Contributions of one feature to the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureUsage {
    /// Column index in the final state.
    pub feature: usize,
    /// Sum of the feature's lifetimes, clipped to the horizon.
    pub contributions: u64,
}

/// Per-feature contribution counts of a state, most used first.
pub fn state_feature_usage(state: &ModelState) -> Vec<FeatureUsage> {
    let alloc = &state.alloc;
    let mut usage: Vec<FeatureUsage> = (0..alloc.n_cols())
        .map(|k| FeatureUsage {
            feature: k,
            contributions: alloc
                .column(k)
                .iter()
                .enumerate()
                .map(|(n, &l)| u64::from(l.min(alloc.cap(n))))
                .sum(),
        })
        .collect();
    usage.sort_by(|a, b| b.contributions.cmp(&a.contributions).then(a.feature.cmp(&b.feature)));
    usage
}

/// Feature usage of the final state of a trace.
pub fn feature_usage(trace: &ChainTrace) -> Vec<FeatureUsage> {
    state_feature_usage(&trace.final_state)
}

/// Mean and sample standard deviation of a series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub mean: f64,
    pub sd: f64,
    pub series: Vec<f64>,
}

impl SeriesSummary {
    pub fn new(series: Vec<f64>) -> Self {
        let (mean, sd) = mean_sd(&series);
        SeriesSummary { mean, sd, series }
    }
}

/// `(mean, sample sd)`; the sd of fewer than two values is zero.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Posterior summaries of the scalar series of a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub n_kept: usize,
    pub log_joint: SeriesSummary,
    pub n_features: SeriesSummary,
    pub alpha: SeriesSummary,
    pub sigma2_x: SeriesSummary,
    /// Iterations without instances are skipped.
    pub avg_persistence: SeriesSummary,
}

pub fn trace_summary(trace: &ChainTrace) -> Result<TraceSummary> {
    if trace.is_empty() {
        return Err(Error::Undefined("trace has no kept iterations".into()));
    }
    let it = &trace.iterations;
    let series = |f: &dyn Fn(&crate::inference::IterationSummary) -> f64| {
        SeriesSummary::new(it.iter().map(f).collect())
    };
    Ok(TraceSummary {
        n_kept: it.len(),
        log_joint: series(&|s| s.log_joint),
        n_features: series(&|s| s.n_features as f64),
        alpha: series(&|s| s.alpha),
        sigma2_x: series(&|s| s.sigma2_x),
        avg_persistence: SeriesSummary::new(it.iter().filter_map(|s| s.avg_persistence()).collect()),
    })
}

/// Results of one independent trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub mse: f64,
    /// Posterior mean number of non-empty features.
    pub n_features: f64,
    pub avg_persistence: f64,
}

impl TrialResult {
    pub fn from_trace(trace: &ChainTrace, truth: &Dataset, mask: &[(usize, usize)]) -> Result<Self> {
        Self::with_mse(trace, heldout_mse(trace, truth, mask)?)
    }

    /// Summaries of `trace` paired with an externally computed MSE.
    pub fn with_mse(trace: &ChainTrace, mse: f64) -> Result<Self> {
        let summary = trace_summary(trace)?;
        Ok(TrialResult {
            seed: trace.seed,
            mse,
            n_features: summary.n_features.mean,
            avg_persistence: persistence_stats(trace)?,
        })
    }
}

/// Trial-level aggregate: means with the sample standard deviation across
/// trials as the bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse_mean: f64,
    pub mse_bound: f64,
    pub n_features_mean: f64,
    pub n_features_bound: f64,
    pub avg_persistence_mean: f64,
    pub avg_persistence_bound: f64,
    pub n_trials: usize,
    pub trials: Vec<TrialResult>,
}

impl EvalReport {
    pub fn aggregate(trials: Vec<TrialResult>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::Undefined("no trials to aggregate".into()));
        }
        let col = |f: fn(&TrialResult) -> f64| mean_sd(&trials.iter().map(f).collect::<Vec<_>>());
        let (mse_mean, mse_bound) = col(|t| t.mse);
        let (n_features_mean, n_features_bound) = col(|t| t.n_features);
        let (avg_persistence_mean, avg_persistence_bound) = col(|t| t.avg_persistence);
        Ok(EvalReport {
            mse_mean,
            mse_bound,
            n_features_mean,
            n_features_bound,
            avg_persistence_mean,
            avg_persistence_bound,
            n_trials: trials.len(),
            trials,
        })
    }

    /// `value ± bound` rows for MSE, feature count and persistence.
    pub fn table_rows(&self) -> [String; 3] {
        [
            format!("MSE          {:.3} ± {:.3}", self.mse_mean, self.mse_bound),
            format!("features     {:.1} ± {:.1}", self.n_features_mean, self.n_features_bound),
            format!(
                "persistence  {:.3} ± {:.3}",
                self.avg_persistence_mean, self.avg_persistence_bound
            ),
        ]
    }
}
