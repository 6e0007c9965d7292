use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{active_instances, Dataset, FeatureAllocation, FeatureDictionary, InstanceWeights};
use crate::error::{Error, Result};

/// `ln N(x; mean, var)`
#[inline]
pub fn normal_log_density(x: f64, mean: f64, var: f64) -> f64 {
    let r = x - mean;
    -0.5 * ((2.0 * PI * var).ln() + r * r / var)
}

fn check_shapes(alloc: &FeatureAllocation, weights: &InstanceWeights) -> Result<()> {
    if alloc.n_cols() != weights.n_cols() {
        return Err(Error::Shape(format!(
            "{} allocation columns but {} weight columns",
            alloc.n_cols(),
            weights.n_cols()
        )));
    }
    if (0..weights.n_cols()).any(|k| weights.column(k).len() != alloc.n_rows()) {
        return Err(Error::Shape("weight columns do not match the row count".into()));
    }
    Ok(())
}

/// Total weight `y_nk` of each feature at row `n`, summing the weights of the
/// active instances (each weight indexed by the instance's start row).
pub fn weighted_totals(
    alloc: &FeatureAllocation,
    weights: &InstanceWeights,
    n: usize,
) -> Result<Vec<f64>> {
    check_shapes(alloc, weights)?;
    let mut y = vec![0.0; alloc.n_cols()];
    for inst in active_instances(alloc, n)? {
        y[inst.feature] += weights.get(inst.start, inst.feature);
    }
    Ok(y)
}

/// The `N × K` matrix `Y` of weighted totals for every row.
pub fn totals_matrix(alloc: &FeatureAllocation, weights: &InstanceWeights) -> Result<DMatrix<f64>> {
    check_shapes(alloc, weights)?;
    let n_rows = alloc.n_rows();
    let mut y = DMatrix::zeros(n_rows, alloc.n_cols());
    for (start, k, l) in alloc.instances() {
        let b = weights.get(start, k);
        let end = (start + l as usize).min(n_rows);
        for r in start..end {
            y[(r, k)] += b;
        }
    }
    Ok(y)
}

/// Mean of observation `n`: `Σ_k y_nk A_k`.
pub fn compute_mean(
    alloc: &FeatureAllocation,
    weights: &InstanceWeights,
    dict: &FeatureDictionary,
    n: usize,
) -> Result<Vec<f64>> {
    if dict.n_features() != alloc.n_cols() {
        return Err(Error::Shape(format!(
            "{} features but {} allocation columns",
            dict.n_features(),
            alloc.n_cols()
        )));
    }
    let y = weighted_totals(alloc, weights, n)?;
    let mut mu = vec![0.0; dict.n_dims()];
    for (k, &yk) in y.iter().enumerate() {
        if yk != 0.0 {
            for (m, a) in mu.iter_mut().zip(dict.a.row(k).iter()) {
                *m += yk * a;
            }
        }
    }
    Ok(mu)
}

/// All means at once, `Y A` (`N × D`).
pub fn mean_matrix(
    alloc: &FeatureAllocation,
    weights: &InstanceWeights,
    dict: &FeatureDictionary,
) -> Result<DMatrix<f64>> {
    if dict.n_features() != alloc.n_cols() {
        return Err(Error::Shape(format!(
            "{} features but {} allocation columns",
            dict.n_features(),
            alloc.n_cols()
        )));
    }
    Ok(totals_matrix(alloc, weights)? * &dict.a)
}

/// Gaussian log-likelihood of the observed cells; masked cells contribute
/// nothing.
pub fn log_likelihood(
    data: &Dataset,
    alloc: &FeatureAllocation,
    weights: &InstanceWeights,
    dict: &FeatureDictionary,
    sigma2_x: f64,
) -> Result<f64> {
    if !(sigma2_x > 0.0) {
        return Err(Error::Domain(format!("noise variance must be positive, got {sigma2_x}")));
    }
    if alloc.n_rows() != data.n_rows() || dict.n_dims() != data.n_dims() {
        return Err(Error::Shape("data and model dimensions disagree".into()));
    }
    let mu = mean_matrix(alloc, weights, dict)?;
    let mut ll = 0.0;
    for n in 0..data.n_rows() {
        for d in 0..data.n_dims() {
            if let Some(x) = data.value(n, d) {
                ll += normal_log_density(x, mu[(n, d)], sigma2_x);
            }
        }
    }
    Ok(ll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WeightKind;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_copies() -> (FeatureAllocation, InstanceWeights, FeatureDictionary) {
        // Feature 0 starts at row 0 (lifetime 2) and again at row 1.
        let alloc = FeatureAllocation::from_rows(&[vec![2, 0], vec![1, 0]]).unwrap();
        let weights = InstanceWeights::constant(2, 2);
        let dict = FeatureDictionary::new(DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 7.0, 7.0, 7.0])).unwrap();
        (alloc, weights, dict)
    }

    #[test]
    fn totals_count_active_copies() {
        let (alloc, weights, _) = two_copies();
        assert_eq!(weighted_totals(&alloc, &weights, 1).unwrap(), vec![2.0, 0.0]);
        assert_eq!(weighted_totals(&alloc, &weights, 0).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn totals_sum_instance_weights() {
        let alloc = FeatureAllocation::from_rows(&[vec![2], vec![1]]).unwrap();
        let w = InstanceWeights::from_columns(
            WeightKind::Gamma { shape: 1.0, scale: 1.0 },
            vec![vec![0.5, 2.0]],
        )
        .unwrap();
        assert_abs_diff_eq!(weighted_totals(&alloc, &w, 1).unwrap()[0], 2.5);
    }

    #[test]
    fn no_active_instances_gives_zero_totals() {
        let alloc = FeatureAllocation::from_rows(&[vec![0, 0], vec![0, 0]]).unwrap();
        let w = InstanceWeights::constant(2, 2);
        assert_eq!(weighted_totals(&alloc, &w, 1).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mean_superposes_copies() {
        let (alloc, weights, dict) = two_copies();
        assert_eq!(compute_mean(&alloc, &weights, &dict, 0).unwrap(), vec![1.0, -2.0, 0.5]);
        assert_eq!(compute_mean(&alloc, &weights, &dict, 1).unwrap(), vec![2.0, -4.0, 1.0]);
        let m = mean_matrix(&alloc, &weights, &dict).unwrap();
        assert_eq!(m.row(1).iter().copied().collect::<Vec<_>>(), vec![2.0, -4.0, 1.0]);
    }

    #[test]
    fn mean_scales_with_dictionary() {
        let (alloc, weights, mut dict) = two_copies();
        let before = compute_mean(&alloc, &weights, &dict, 1).unwrap();
        dict.a *= -3.0;
        let after = compute_mean(&alloc, &weights, &dict, 1).unwrap();
        for (b, a) in before.iter().zip(&after) {
            assert_abs_diff_eq!(*a, -3.0 * b, epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_fit_single_cell() {
        let alloc = FeatureAllocation::from_rows(&[vec![1]]).unwrap();
        let w = InstanceWeights::constant(1, 1);
        let dict = FeatureDictionary::new(DMatrix::from_element(1, 1, 0.3)).unwrap();
        let data = Dataset::fully_observed(DMatrix::from_element(1, 1, 0.3)).unwrap();
        let ll = log_likelihood(&data, &alloc, &w, &dict, 1.0).unwrap();
        assert_abs_diff_eq!(ll, -0.5 * (2.0 * PI).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(ll, -0.918939, epsilon = 1e-6);
    }

    #[test]
    fn fully_masked_likelihood_is_zero() {
        let (alloc, weights, dict) = two_copies();
        let data = Dataset::new(DMatrix::zeros(2, 3), DMatrix::from_element(2, 3, false)).unwrap();
        assert_eq!(log_likelihood(&data, &alloc, &weights, &dict, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn toy_likelihood_matches_scalar_sum() {
        // N = 2, D = 2; independent oracle written out cell by cell.
        let alloc = FeatureAllocation::from_rows(&[vec![2, 0], vec![0, 1]]).unwrap();
        let w = InstanceWeights::constant(2, 2);
        let dict = FeatureDictionary::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5])).unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[0.7, 2.4, -0.3, 2.9]);
        let data = Dataset::fully_observed(x).unwrap();
        let s2: f64 = 0.8;
        let dens = |x: f64, m: f64| (-(x - m).powi(2) / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt();
        // Row 0 mean = A_0 = (1, 2); row 1 mean = A_0 + A_1 = (0, 2.5).
        let oracle = dens(0.7, 1.0).ln() + dens(2.4, 2.0).ln() + dens(-0.3, 0.0).ln() + dens(2.9, 2.5).ln();
        let ll = log_likelihood(&data, &alloc, &w, &dict, s2).unwrap();
        assert_abs_diff_eq!(ll, oracle, epsilon = 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let (alloc, _, dict) = two_copies();
        let w = InstanceWeights::constant(2, 1);
        assert!(matches!(compute_mean(&alloc, &w, &dict, 0), Err(Error::Shape(_))));
    }

    proptest! {
        #[test]
        fn masking_removes_exactly_one_density_term(
            vals in proptest::collection::vec(-3.0f64..3.0, 6),
            cell in 0usize..6,
            s2 in 0.1f64..3.0,
        ) {
            let alloc = FeatureAllocation::from_rows(&[vec![3], vec![0], vec![1]]).unwrap();
            let w = InstanceWeights::constant(3, 1);
            let dict = FeatureDictionary::new(DMatrix::from_row_slice(1, 2, &[0.4, -1.1])).unwrap();
            let data = Dataset::fully_observed(DMatrix::from_row_slice(3, 2, &vals)).unwrap();
            let (n, d) = (cell / 2, cell % 2);
            let full = log_likelihood(&data, &alloc, &w, &dict, s2).unwrap();
            let masked = log_likelihood(&data.masked(&[(n, d)]).unwrap(), &alloc, &w, &dict, s2).unwrap();
            let mu = compute_mean(&alloc, &w, &dict, n).unwrap()[d];
            prop_assert!((full - masked - normal_log_density(vals[cell], mu, s2)).abs() < 1e-9);
        }

        #[test]
        fn mean_is_linear_in_weights(
            b1 in 0.01f64..5.0, b2 in 0.01f64..5.0, c in 0.0f64..4.0,
        ) {
            let alloc = FeatureAllocation::from_rows(&[vec![2], vec![1]]).unwrap();
            let dict = FeatureDictionary::new(DMatrix::from_row_slice(1, 2, &[1.5, -0.5])).unwrap();
            let kind = WeightKind::Gamma { shape: 1.0, scale: 1.0 };
            let w = InstanceWeights::from_columns(kind, vec![vec![b1, b2]]).unwrap();
            let mu = compute_mean(&alloc, &w, &dict, 1).unwrap();
            let ws = InstanceWeights::from_columns(kind, vec![vec![c * b1 + 1e-300, c * b2 + 1e-300]]).unwrap();
            let mus = compute_mean(&alloc, &ws, &dict, 1).unwrap();
            for (a, b) in mu.iter().zip(&mus) {
                prop_assert!((c * a - b).abs() < 1e-9);
            }
        }
    }
}
