//! Closed-form conditional distributions.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{harmonic_number, FeatureAllocation, HyperPriors};

/// Shape–scale gamma parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl GammaParams {
    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Gamma::new(self.shape, self.scale)
            .expect("positive gamma parameters")
            .sample(rng)
    }
}

/// Shape–scale inverse-gamma parameters: density `∝ x^{-shape-1} e^{-scale/x}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvGammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl InvGammaParams {
    /// Defined for `shape > 1`.
    pub fn mean(&self) -> f64 {
        self.scale / (self.shape - 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = Gamma::new(self.shape, 1.0 / self.scale)
            .expect("positive inverse-gamma parameters")
            .sample(rng);
        1.0 / g
    }
}

pub(crate) fn gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
}

pub(crate) fn inv_gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

pub(crate) fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    let log1m = if x >= 1.0 { f64::NEG_INFINITY } else { (1.0 - x).ln() };
    let body = |e: f64, l: f64| if e == 0.0 { 0.0 } else { e * l };
    body(a - 1.0, x.ln()) + body(b - 1.0, log1m) + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
}

pub(crate) fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    Beta::new(a, b)
        .expect("positive beta parameters")
        .sample(rng)
        .clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Matrix-normal conditional of the feature matrix: `A = mean + L W` with
/// `L Lᵀ = cov` shared by every column of `A`.
#[derive(Clone, Debug)]
pub struct APosterior {
    pub mean: DMatrix<f64>,
    pub cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl APosterior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let (k, d) = self.mean.shape();
        let w = DMatrix::<f64>::from_fn(k, d, |_, _| StandardNormal.sample(rng));
        &self.mean + &self.chol * w
    }
}

/// Conditional of `A` given the weighted totals `Y` (`N × K`) and complete
/// data `X` (`N × D`):
/// mean `(YᵀY + σ²_X/σ²_A I)⁻¹ YᵀX`, column covariance
/// `σ²_X (YᵀY + σ²_X/σ²_A I)⁻¹`.
pub fn a_posterior(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    sigma2_x: f64,
    sigma2_a: f64,
) -> Result<APosterior> {
    if y.nrows() != x.nrows() {
        return Err(Error::Shape(format!(
            "Y has {} rows but X has {}",
            y.nrows(),
            x.nrows()
        )));
    }
    let k = y.ncols();
    let ridge = sigma2_x / sigma2_a;
    let precision = y.tr_mul(y) + DMatrix::<f64>::identity(k, k) * ridge;
    let chol = precision
        .cholesky()
        .ok_or_else(|| Error::Decomposition("feature precision not positive definite".into()))?;
    let mean = chol.solve(&y.tr_mul(x));
    let cov = chol.inverse() * sigma2_x;
    let cov = (&cov + cov.transpose()) * 0.5;
    let cov_chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Decomposition("feature covariance not positive definite".into()))?
        .l();
    Ok(APosterior {
        mean,
        cov,
        chol: cov_chol,
    })
}

/// Conditional of the noise variance given `n_cells` observed cells with
/// residual sum of squares `sse`.
pub fn sigma2_x_posterior(priors: &HyperPriors, n_cells: usize, sse: f64) -> InvGammaParams {
    InvGammaParams {
        shape: priors.a_sigma + n_cells as f64 / 2.0,
        scale: priors.b_sigma + sse / 2.0,
    }
}

/// Conditional of the feature variance given `n_entries` feature entries with
/// sum of squares `sum_sq`.
pub fn sigma2_a_posterior(priors: &HyperPriors, n_entries: usize, sum_sq: f64) -> InvGammaParams {
    InvGammaParams {
        shape: priors.a_sigma + n_entries as f64 / 2.0,
        scale: priors.b_sigma + sum_sq / 2.0,
    }
}

/// Beta conditional of feature `k`'s stopping probability.
///
/// Every instance adds `ℓ - 1` survivals; instances clipped at the data
/// horizon are right-censored and add no stopping event.
pub fn rho_posterior(alloc: &FeatureAllocation, k: usize, priors: &HyperPriors) -> (f64, f64) {
    let (mut stops, mut survivals) = (0u64, 0u64);
    for (n, &l) in alloc.column(k).iter().enumerate() {
        if l > 0 {
            survivals += u64::from(l - 1);
            if l < alloc.cap(n) {
                stops += 1;
            }
        }
    }
    (priors.a_rho + stops as f64, priors.b_rho + survivals as f64)
}

/// Conditional of the IBP mass: `Gamma(K + a_α, b_α / (1 + b_α H_N))`.
pub fn alpha_posterior(n_features: usize, n_rows: usize, priors: &HyperPriors) -> GammaParams {
    GammaParams {
        shape: n_features as f64 + priors.a_alpha,
        scale: priors.b_alpha / (1.0 + priors.b_alpha * harmonic_number(n_rows)),
    }
}
