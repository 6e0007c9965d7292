//! Forward simulation: buffet draws, persistent-instance processes and the
//! Cambridge-bars synthetic benchmark.

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Beta, Distribution, Geometric, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, FeatureAllocation, FeatureDictionary};

/// Draws a lifetime from the geometric distribution on `{1, 2, …}` with
/// stopping probability `rho` (mean `1/rho`).
pub fn sample_geometric<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> Result<u32> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Domain(format!("geometric parameter must lie in (0, 1], got {rho}")));
    }
    if rho == 1.0 {
        return Ok(1);
    }
    let failures = Geometric::new(rho)
        .map_err(|e| Error::Domain(e.to_string()))?
        .sample(rng);
    Ok(failures.saturating_add(1).min(u64::from(u32::MAX)) as u32)
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as usize
}

/// Simulates the buffet: customer `j` (1-based) takes each existing dish with
/// probability `m_k / j` and then `Poisson(α / j)` new dishes. All lifetimes
/// are set to 1.
pub fn sample_ibp<R: Rng + ?Sized>(n: usize, alpha: f64, rng: &mut R) -> Result<FeatureAllocation> {
    if n == 0 {
        return Err(Error::Domain("need at least one customer".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("IBP mass must be positive, got {alpha}")));
    }
    let mut cols: Vec<Vec<u32>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for row in 0..n {
        let j = (row + 1) as f64;
        for (col, m) in cols.iter_mut().zip(counts.iter_mut()) {
            if rng.random::<f64>() < *m as f64 / j {
                col[row] = 1;
                *m += 1;
            }
        }
        for _ in 0..poisson(alpha / j, rng) {
            let mut col = vec![0; n];
            col[row] = 1;
            cols.push(col);
            counts.push(1);
        }
    }
    FeatureAllocation::from_columns(n, cols)
}

/// How per-feature lifetime parameters are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LifetimePrior {
    /// `ρ_k ~ Beta(a, b)` independently per feature.
    Beta { a: f64, b: f64 },
    /// Every feature shares the same `ρ`.
    Fixed(f64),
}

impl LifetimePrior {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match *self {
            LifetimePrior::Fixed(rho) => Ok(rho),
            LifetimePrior::Beta { a, b } => {
                let beta = Beta::new(a, b).map_err(|e| Error::Domain(e.to_string()))?;
                // Guard against a draw that underflows to exactly zero.
                Ok(beta.sample(rng).max(f64::MIN_POSITIVE))
            }
        }
    }
}

/// A draw from the persistent-instance prior.
#[derive(Clone, Debug)]
pub struct DynamicSample {
    /// `Λ`, lifetimes not clipped to the horizon.
    pub alloc: FeatureAllocation,
    pub rho: Vec<f64>,
}

/// Draws `Z ~ IBP(α)`, a stopping probability per feature and a geometric
/// lifetime for every non-zero entry of `Z`.
pub fn sample_dynamic_process<R: Rng + ?Sized>(
    n: usize,
    alpha: f64,
    lifetimes: LifetimePrior,
    rng: &mut R,
) -> Result<DynamicSample> {
    let mut alloc = sample_ibp(n, alpha, rng)?;
    let mut rho = Vec::with_capacity(alloc.n_cols());
    for k in 0..alloc.n_cols() {
        let r = lifetimes.draw(rng)?;
        for i in 0..n {
            if alloc.get(i, k) > 0 {
                alloc.set(i, k, sample_geometric(r, rng)?);
            }
        }
        rho.push(r);
    }
    Ok(DynamicSample { alloc, rho })
}

/// The four 6×6 unit-intensity bar images: horizontal bars on rows 1 and 4
/// and vertical bars on columns 1 and 4, flattened row-major.
pub fn cambridge_bars_features() -> Vec<Vec<f64>> {
    let bar = |horizontal: bool, line: usize| {
        (0..36)
            .map(|p| {
                let (r, c) = (p / 6, p % 6);
                let on = if horizontal { r == line } else { c == line };
                if on {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    };
    vec![bar(true, 1), bar(true, 4), bar(false, 1), bar(false, 4)]
}

/// Noise standard deviation of the default synthetic benchmark.
pub const DEFAULT_NOISE_SD: f64 = 0.5;

/// Parameters of the synthetic persistent-bars benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_obs: usize,
    pub feature_images: Vec<Vec<f64>>,
    /// Probability of starting a new instance of each feature at each step.
    pub new_instance_prob: f64,
    /// Geometric stopping probability of instance lifetimes.
    pub lifetime_param: f64,
    pub noise_sd: f64,
    /// Fraction of observations used as test rows.
    pub heldout_fraction: f64,
    /// Number of dimensions hidden in every test row.
    pub heldout_dims_per_obs: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_obs: 500,
            feature_images: cambridge_bars_features(),
            new_instance_prob: 0.2,
            lifetime_param: 0.5,
            noise_sd: DEFAULT_NOISE_SD,
            heldout_fraction: 0.1,
            heldout_dims_per_obs: 30,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let d = self.feature_images.first().map_or(0, Vec::len);
        if self.n_obs == 0 || self.feature_images.is_empty() || d == 0 {
            return Err(Error::Config("need observations and non-empty feature images".into()));
        }
        if self.feature_images.iter().any(|f| f.len() != d) {
            return Err(Error::Config("feature images differ in size".into()));
        }
        if !(self.new_instance_prob > 0.0 && self.new_instance_prob <= 1.0) {
            return Err(Error::Config("new_instance_prob must lie in (0, 1]".into()));
        }
        if !(self.lifetime_param > 0.0 && self.lifetime_param <= 1.0) {
            return Err(Error::Config("lifetime_param must lie in (0, 1]".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config("noise_sd must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.heldout_fraction) {
            return Err(Error::Config("heldout_fraction must lie in [0, 1)".into()));
        }
        if self.heldout_dims_per_obs >= d {
            return Err(Error::Config(format!(
                "cannot hide {} of {d} dimensions",
                self.heldout_dims_per_obs
            )));
        }
        Ok(())
    }

    pub fn n_dims(&self) -> usize {
        self.feature_images.first().map_or(0, Vec::len)
    }

    pub fn n_test_rows(&self) -> usize {
        (self.heldout_fraction * self.n_obs as f64 - 1e-9).ceil().max(0.0) as usize
    }
}

/// Generated benchmark data.
#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    /// Observations with the test cells hidden.
    pub data: Dataset,
    /// Complete noisy observations.
    pub truth: Dataset,
    /// Generating `Λ` (lifetimes not clipped).
    pub true_alloc: FeatureAllocation,
    pub true_dict: FeatureDictionary,
    /// Test rows in increasing order.
    pub test_rows: Vec<usize>,
}

/// Simulates the benchmark with a generator seeded from `spec.seed`.
pub fn generate_cambridge_bars(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    generate_cambridge_bars_with(spec, &mut crate::rng::stream(spec.seed, 0))
}

/// Simulates the benchmark: at each step every feature starts a new instance
/// with probability `new_instance_prob`, instances last a geometric number of
/// steps, and each observation superposes the active instances plus Gaussian
/// noise. A `heldout_fraction` of rows become test rows with
/// `heldout_dims_per_obs` random dimensions hidden in each.
pub fn generate_cambridge_bars_with<R: Rng + ?Sized>(
    spec: &SyntheticSpec,
    rng: &mut R,
) -> Result<SyntheticDataset> {
    spec.validate()?;
    let n = spec.n_obs;
    let d = spec.n_dims();
    let k = spec.feature_images.len();

    let mut cols = vec![vec![0u32; n]; k];
    for t in 0..n {
        for col in cols.iter_mut() {
            if rng.random::<f64>() < spec.new_instance_prob {
                col[t] = sample_geometric(spec.lifetime_param, rng)?;
            }
        }
    }
    let true_alloc = FeatureAllocation::from_columns(n, cols)?;
    let true_dict = FeatureDictionary::new(DMatrix::from_fn(k, d, |f, p| spec.feature_images[f][p]))?;

    let mut counts = DMatrix::<f64>::zeros(n, k);
    for (start, f, l) in true_alloc.instances() {
        for r in start..(start + l as usize).min(n) {
            counts[(r, f)] += 1.0;
        }
    }
    let mut x = counts * &true_dict.a;
    if spec.noise_sd > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::Domain(e.to_string()))?;
        for v in x.iter_mut() {
            *v += noise.sample(rng);
        }
    }
    let truth = Dataset::fully_observed(x)?;

    let mut test_rows = sample_indices(rng, n, spec.n_test_rows()).into_vec();
    test_rows.sort_unstable();
    let mut hidden = Vec::with_capacity(test_rows.len() * spec.heldout_dims_per_obs);
    for &row in &test_rows {
        let mut dims = sample_indices(rng, d, spec.heldout_dims_per_obs).into_vec();
        dims.sort_unstable();
        hidden.extend(dims.into_iter().map(|dim| (row, dim)));
    }
    let data = truth.masked(&hidden)?;
    Ok(SyntheticDataset {
        data,
        truth,
        true_alloc,
        true_dict,
        test_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InstanceSet;
    use crate::rng::stream;

    #[test]
    fn geometric_rejects_bad_parameter() {
        let mut rng = stream(1, 0);
        assert!(sample_geometric(0.0, &mut rng).is_err());
        assert!(sample_geometric(1.2, &mut rng).is_err());
        assert!(sample_geometric(f64::NAN, &mut rng).is_err());
        assert!((0..100).all(|_| sample_geometric(1.0, &mut rng).unwrap() == 1));
    }

    #[test]
    fn geometric_moments_and_pmf() {
        let mut rng = stream(2, 0);
        let n = 100_000;
        let draws: Vec<u32> = (0..n).map(|_| sample_geometric(0.5, &mut rng).unwrap()).collect();
        let mean = draws.iter().map(|&d| d as f64).sum::<f64>() / n as f64;
        // Var = (1-ρ)/ρ² = 2.
        let se = (2.0 / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "mean {mean}");

        let draws: Vec<u32> = (0..n).map(|_| sample_geometric(0.25, &mut rng).unwrap()).collect();
        let p3 = draws.iter().filter(|&&d| d == 3).count() as f64 / n as f64;
        let exact = 0.25 * 0.75 * 0.75;
        assert!((exact - 0.140625f64).abs() < 1e-15);
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((p3 - exact).abs() < 3.0 * se, "P(3) = {p3}");
        assert!(draws.iter().all(|&d| d >= 1));
    }

    #[test]
    fn tiny_mass_gives_empty_matrix() {
        let mut rng = stream(3, 0);
        let empty = (0..1000)
            .filter(|_| sample_ibp(10, 1e-9, &mut rng).unwrap().n_cols() == 0)
            .count();
        assert!(empty >= 999);
    }

    #[test]
    fn single_customer_dish_count_is_poisson() {
        let mut rng = stream(4, 0);
        let n = 10_000;
        let mean = (0..n).map(|_| sample_ibp(1, 2.0, &mut rng).unwrap().n_cols() as f64).sum::<f64>() / n as f64;
        let se = (2.0 / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn ibp_rejects_bad_arguments() {
        let mut rng = stream(5, 0);
        assert!(sample_ibp(0, 1.0, &mut rng).is_err());
        assert!(sample_ibp(3, 0.0, &mut rng).is_err());
    }

    #[test]
    fn dynamic_pattern_matches_underlying_ibp() {
        // Same stream: the IBP part of the draw consumes the same randomness.
        let z = sample_ibp(30, 2.0, &mut stream(6, 0)).unwrap();
        let dynamic = sample_dynamic_process(30, 2.0, LifetimePrior::Beta { a: 1.0, b: 1.0 }, &mut stream(6, 0)).unwrap();
        assert_eq!(z.n_cols(), dynamic.alloc.n_cols());
        for k in 0..z.n_cols() {
            assert_eq!(z.pattern(k), dynamic.alloc.pattern(k));
        }
        assert_eq!(dynamic.rho.len(), z.n_cols());
    }

    #[test]
    fn certain_stopping_reduces_to_static() {
        let d = sample_dynamic_process(40, 3.0, LifetimePrior::Fixed(1.0), &mut stream(7, 0)).unwrap();
        assert!(d.alloc.instances().all(|(_, _, l)| l == 1));
    }

    #[test]
    fn noiseless_always_on_feature_reproduces_image() {
        let image: Vec<f64> = (0..9).map(|i| i as f64 * 0.5).collect();
        let spec = SyntheticSpec {
            n_obs: 20,
            feature_images: vec![image.clone()],
            new_instance_prob: 1.0,
            lifetime_param: 1.0,
            noise_sd: 0.0,
            heldout_fraction: 0.0,
            heldout_dims_per_obs: 0,
            seed: 3,
        };
        let s = generate_cambridge_bars(&spec).unwrap();
        for n in 0..20 {
            let row: Vec<f64> = s.truth.x().row(n).iter().copied().collect();
            assert_eq!(row, image);
        }
        assert_eq!(s.data.n_observed(), 20 * 9);
    }

    #[test]
    fn benchmark_mask_layout() {
        let s = generate_cambridge_bars(&SyntheticSpec { seed: 11, ..Default::default() }).unwrap();
        assert_eq!(s.test_rows.len(), 50);
        for n in 0..500 {
            let hidden = (0..36).filter(|&d| !s.data.is_observed(n, d)).count();
            if s.test_rows.binary_search(&n).is_ok() {
                assert_eq!(hidden, 30);
            } else {
                assert_eq!(hidden, 0);
            }
        }
        for n in 0..500 {
            for d in 0..36 {
                if let Some(v) = s.data.value(n, d) {
                    assert_eq!(v, s.truth.x()[(n, d)]);
                }
            }
        }
    }

    #[test]
    fn benchmark_is_deterministic_per_seed() {
        let a = generate_cambridge_bars(&SyntheticSpec { seed: 5, ..Default::default() }).unwrap();
        let b = generate_cambridge_bars(&SyntheticSpec { seed: 5, ..Default::default() }).unwrap();
        let c = generate_cambridge_bars(&SyntheticSpec { seed: 6, ..Default::default() }).unwrap();
        let bits = |d: &Dataset| d.x().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.truth), bits(&b.truth));
        assert_eq!(a.data.observed(), b.data.observed());
        assert_ne!(bits(&a.truth), bits(&c.truth));
    }

    #[test]
    fn benchmark_steady_state_instance_count() {
        // Per feature: p Σ_i (1-ρ)^i = p/ρ active instances, so 4·0.2/0.5 = 1.6.
        let mut total = 0.0;
        let mut rows = 0.0;
        for seed in 0..20 {
            let s = generate_cambridge_bars(&SyntheticSpec { seed, ..Default::default() }).unwrap();
            let sizes = InstanceSet::from_allocation(&s.true_alloc).sizes();
            total += sizes[50..].iter().sum::<usize>() as f64;
            rows += (sizes.len() - 50) as f64;
        }
        let mean = total / rows;
        assert!((mean - 1.6).abs() < 0.05, "mean active instances {mean}");
    }

    #[test]
    fn invalid_spec_rejected() {
        let spec = SyntheticSpec { heldout_dims_per_obs: 36, ..Default::default() };
        assert!(generate_cambridge_bars(&spec).is_err());
    }
}
