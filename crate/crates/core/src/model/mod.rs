//! Domain types, the IBP prior and the linear-Gaussian likelihood.

mod alloc;
mod likelihood;
mod prior;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use alloc::{active_instances, FeatureAllocation, Instance, InstanceSet};
pub use likelihood::{
    compute_mean, log_likelihood, mean_matrix, normal_log_density, totals_matrix, weighted_totals,
};
pub use prior::{
    harmonic_number, ibp_log_prob, lifetime_log_pmf, ln_factorial, lof_histogram,
    weak_limit_log_prob,
};

/// Which member of the model family is being fitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Linear-Gaussian IBP model: every instance lasts exactly one row.
    Static,
    /// Persistent instances, every instance contributes its feature once.
    DynamicConstant,
    /// Persistent instances with gamma-distributed per-instance weights.
    DynamicWeighted,
}

impl ModelKind {
    pub fn is_dynamic(self) -> bool {
        !matches!(self, ModelKind::Static)
    }

    pub fn weight_kind(self, priors: &HyperPriors) -> WeightKind {
        match self {
            ModelKind::DynamicWeighted => WeightKind::Gamma {
                shape: priors.weight_shape,
                scale: priors.weight_scale,
            },
            _ => WeightKind::ConstantOne,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Static => "static",
            ModelKind::DynamicConstant => "dynamic-constant",
            ModelKind::DynamicWeighted => "dynamic-weighted",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(ModelKind::Static),
            "dynamic-constant" | "dynamic" => Ok(ModelKind::DynamicConstant),
            "dynamic-weighted" => Ok(ModelKind::DynamicWeighted),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

/// Distribution of per-instance weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WeightKind {
    ConstantOne,
    /// Shape–scale gamma.
    Gamma { shape: f64, scale: f64 },
}

/// Parameters of the hyperpriors.
///
/// Gamma distributions use the shape–scale convention throughout; the
/// inverse-gamma priors on both variances are shape–scale as well.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperPriors {
    pub a_rho: f64,
    pub b_rho: f64,
    pub a_alpha: f64,
    pub b_alpha: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
    pub weight_shape: f64,
    pub weight_scale: f64,
}

impl Default for HyperPriors {
    fn default() -> Self {
        HyperPriors {
            a_rho: 1.0,
            b_rho: 1.0,
            a_alpha: 1.0,
            b_alpha: 1.0,
            a_sigma: 1.0,
            b_sigma: 1.0,
            weight_shape: 1.0,
            weight_scale: 1.0,
        }
    }
}

impl HyperPriors {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("a_rho", self.a_rho),
            ("b_rho", self.b_rho),
            ("a_alpha", self.a_alpha),
            ("b_alpha", self.b_alpha),
            ("a_sigma", self.a_sigma),
            ("b_sigma", self.b_sigma),
            ("weight_shape", self.weight_shape),
            ("weight_scale", self.weight_scale),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Current values of the scalar parameters plus their priors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub alpha: f64,
    pub sigma2_x: f64,
    pub sigma2_a: f64,
    /// Per-feature lifetime stopping probabilities, one per column.
    pub rho: Vec<f64>,
    pub priors: HyperPriors,
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        self.priors.validate()?;
        for (name, v) in [
            ("alpha", self.alpha),
            ("sigma2_x", self.sigma2_x),
            ("sigma2_a", self.sigma2_a),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(r) = self.rho.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(Error::Domain(format!("rho must lie in (0, 1], got {r}")));
        }
        Ok(())
    }
}

/// `K × D` matrix of latent features, one row per feature.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDictionary {
    pub a: DMatrix<f64>,
}

impl FeatureDictionary {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("feature matrix has non-finite entries".into()));
        }
        Ok(FeatureDictionary { a })
    }

    pub fn zeros(k: usize, d: usize) -> Self {
        FeatureDictionary {
            a: DMatrix::zeros(k, d),
        }
    }

    pub fn n_features(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_dims(&self) -> usize {
        self.a.ncols()
    }
}

/// Per-instance weights `b_nk`, stored column-major like the allocation.
///
/// Entries where no instance starts are carried as auxiliary values drawn from
/// the weight prior; they never affect the likelihood.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceWeights {
    kind: WeightKind,
    cols: Vec<Vec<f64>>,
}

impl InstanceWeights {
    /// All weights equal to one.
    pub fn constant(n_rows: usize, n_cols: usize) -> Self {
        InstanceWeights {
            kind: WeightKind::ConstantOne,
            cols: vec![vec![1.0; n_rows]; n_cols],
        }
    }

    pub fn from_columns(kind: WeightKind, cols: Vec<Vec<f64>>) -> Result<Self> {
        match kind {
            WeightKind::ConstantOne if cols.iter().flatten().any(|&b| b != 1.0) => Err(
                Error::Domain("constant-one weights must all equal 1".into()),
            ),
            _ if cols.iter().flatten().any(|&b| !(b > 0.0 && b.is_finite())) => {
                Err(Error::Domain("weights must be positive and finite".into()))
            }
            _ => Ok(InstanceWeights { kind, cols }),
        }
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, n: usize, k: usize) -> f64 {
        self.cols[k][n]
    }

    #[inline]
    pub fn set(&mut self, n: usize, k: usize, b: f64) {
        debug_assert!(b > 0.0);
        self.cols[k][n] = b;
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.cols[k]
    }

    pub fn push_column(&mut self, col: Vec<f64>) {
        self.cols.push(col);
    }

    pub fn remove_column(&mut self, k: usize) {
        self.cols.remove(k);
    }

    /// Keeps only the listed columns, in order.
    pub fn retain_columns(&mut self, keep: &[usize]) {
        self.cols = keep.iter().map(|&k| std::mem::take(&mut self.cols[k])).collect();
    }
}

/// `N × D` observations with an observation mask. Unobserved entries hold
/// `NaN`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    observed: DMatrix<bool>,
    column_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(mut x: DMatrix<f64>, observed: DMatrix<bool>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::Shape("dataset needs at least one row and column".into()));
        }
        if x.shape() != observed.shape() {
            return Err(Error::Shape(format!(
                "values are {:?} but mask is {:?}",
                x.shape(),
                observed.shape()
            )));
        }
        for (v, &o) in x.iter_mut().zip(observed.iter()) {
            if o && !v.is_finite() {
                return Err(Error::Domain("observed entries must be finite".into()));
            }
            if !o {
                *v = f64::NAN;
            }
        }
        Ok(Dataset {
            x,
            observed,
            column_names: None,
        })
    }

    pub fn fully_observed(x: DMatrix<f64>) -> Result<Self> {
        let observed = DMatrix::from_element(x.nrows(), x.ncols(), true);
        Dataset::new(x, observed)
    }

    pub fn with_column_names(mut self, names: Option<Vec<String>>) -> Result<Self> {
        if let Some(n) = &names {
            if n.len() != self.n_dims() {
                return Err(Error::Shape(format!(
                    "{} column names for {} columns",
                    n.len(),
                    self.n_dims()
                )));
            }
        }
        self.column_names = names;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_dims(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn observed(&self) -> &DMatrix<bool> {
        &self.observed
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    #[inline]
    pub fn is_observed(&self, n: usize, d: usize) -> bool {
        self.observed[(n, d)]
    }

    pub fn value(&self, n: usize, d: usize) -> Option<f64> {
        self.observed[(n, d)].then(|| self.x[(n, d)])
    }

    pub fn n_observed(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    /// Unobserved cells in row-major order.
    pub fn masked_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for n in 0..self.n_rows() {
            for d in 0..self.n_dims() {
                if !self.observed[(n, d)] {
                    out.push((n, d));
                }
            }
        }
        out
    }

    /// Copy with the given cells hidden.
    pub fn masked(&self, cells: &[(usize, usize)]) -> Result<Self> {
        let mut observed = self.observed.clone();
        for &(n, d) in cells {
            if n >= self.n_rows() || d >= self.n_dims() {
                return Err(Error::Index {
                    index: n.max(d),
                    bound: self.n_rows().max(self.n_dims()),
                });
            }
            observed[(n, d)] = false;
        }
        Dataset::new(self.x.clone(), observed)?.with_column_names(self.column_names.clone())
    }
}
