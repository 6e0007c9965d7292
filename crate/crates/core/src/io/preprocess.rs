//! Invertible preprocessing of datasets.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;

/// A preprocessing step applied to a numeric table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    /// Zero mean and unit population variance per column.
    Standardize,
    /// Unit population variance per column, mean left in place.
    Scale,
    /// Subtract each column's minimum.
    SubtractMin,
    /// Cholesky whitening with the sample covariance of complete rows.
    Whiten,
}

impl std::str::FromStr for Step {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "standardize" => Ok(Step::Standardize),
            "scale" => Ok(Step::Scale),
            "subtract-min" => Ok(Step::SubtractMin),
            "whiten" => Ok(Step::Whiten),
            other => Err(Error::Config(format!("unknown preprocessing step `{other}`"))),
        }
    }
}

impl Step {
    pub fn name(self) -> &'static str {
        match self {
            Step::Standardize => "standardize",
            Step::Scale => "scale",
            Step::SubtractMin => "subtract-min",
            Step::Whiten => "whiten",
        }
    }

    /// Estimates the transform from `data`.
    pub fn fit(self, data: &Dataset) -> Result<Transform> {
        match self {
            Step::Standardize | Step::Scale => {
                let mut offset = Vec::with_capacity(data.n_dims());
                let mut scale = Vec::with_capacity(data.n_dims());
                for d in 0..data.n_dims() {
                    let (mean, sd) = column_moments(data, d)?;
                    offset.push(if self == Step::Standardize { mean } else { 0.0 });
                    scale.push(sd);
                }
                Ok(Transform::Affine { offset, scale })
            }
            Step::SubtractMin => {
                let offset = (0..data.n_dims())
                    .map(|d| {
                        column_values(data, d).reduce(f64::min).ok_or_else(|| Error::DegenerateColumn {
                            column: d,
                            reason: "no observed values".into(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let scale = vec![1.0; data.n_dims()];
                Ok(Transform::Affine { offset, scale })
            }
            Step::Whiten => whitening_transform(data),
        }
    }
}

fn column_values(data: &Dataset, d: usize) -> impl Iterator<Item = f64> + '_ {
    (0..data.n_rows()).filter_map(move |n| data.value(n, d))
}

/// Observed mean and population standard deviation of column `d`.
fn column_moments(data: &Dataset, d: usize) -> Result<(f64, f64)> {
    let vals: Vec<f64> = column_values(data, d).collect();
    let distinct = vals.iter().any(|&v| v != vals[0]);
    if vals.len() < 2 || !distinct {
        return Err(Error::DegenerateColumn {
            column: d,
            reason: "fewer than two distinct observed values".into(),
        });
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

fn whitening_transform(data: &Dataset) -> Result<Transform> {
    let d = data.n_dims();
    let rows: Vec<usize> = (0..data.n_rows())
        .filter(|&n| (0..d).all(|j| data.is_observed(n, j)))
        .collect();
    if rows.len() <= d {
        return Err(Error::Decomposition(format!(
            "{} complete rows cannot give a non-singular {d}-dimensional covariance",
            rows.len()
        )));
    }
    let x = data.x().select_rows(rows.iter());
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).mean()).collect();
    let mut centred = x;
    for j in 0..d {
        centred.column_mut(j).add_scalar_mut(-mean[j]);
    }
    let cov = centred.tr_mul(&centred) / (rows.len() - 1) as f64;
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Decomposition("sample covariance is not positive definite".into()))?
        .l();
    Ok(Transform::Whiten { mean, chol })
}

/// A fitted invertible map applied row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Transform {
    /// `y_d = (x_d - offset_d) / scale_d`.
    Affine { offset: Vec<f64>, scale: Vec<f64> },
    /// `y = L⁻¹ (x - mean)`. Output coordinate `d` is observed only when
    /// input coordinates `0..=d` all are.
    Whiten { mean: Vec<f64>, chol: DMatrix<f64> },
}

impl Transform {
    fn n_dims(&self) -> usize {
        match self {
            Transform::Affine { offset, .. } => offset.len(),
            Transform::Whiten { mean, .. } => mean.len(),
        }
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let (n, d) = (data.n_rows(), data.n_dims());
        if d != self.n_dims() {
            return Err(Error::Shape(format!("transform has {} dims, data {d}", self.n_dims())));
        }
        let mut x = DMatrix::from_element(n, d, f64::NAN);
        let mut observed = DMatrix::from_element(n, d, false);
        match self {
            Transform::Affine { offset, scale } => {
                for i in 0..n {
                    for j in 0..d {
                        if let Some(v) = data.value(i, j) {
                            x[(i, j)] = (v - offset[j]) / scale[j];
                            observed[(i, j)] = true;
                        }
                    }
                }
            }
            Transform::Whiten { mean, chol } => {
                for i in 0..n {
                    for j in 0..d {
                        let Some(v) = data.value(i, j) else { break };
                        let mut acc = v - mean[j];
                        for m in 0..j {
                            acc -= chol[(j, m)] * x[(i, m)];
                        }
                        x[(i, j)] = acc / chol[(j, j)];
                        observed[(i, j)] = true;
                    }
                }
            }
        }
        Dataset::new(x, observed)?.with_column_names(data.column_names().map(<[String]>::to_vec))
    }

    /// Maps a complete matrix in transformed coordinates back to the input
    /// coordinates.
    pub fn invert(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Transform::Affine { offset, scale } => {
                DMatrix::from_fn(y.nrows(), y.ncols(), |i, j| y[(i, j)] * scale[j] + offset[j])
            }
            Transform::Whiten { mean, chol } => {
                let mut x = y * chol.transpose();
                for j in 0..x.ncols() {
                    x.column_mut(j).add_scalar_mut(mean[j]);
                }
                x
            }
        }
    }
}

/// Fits and applies each step in order, returning the fitted transforms.
pub fn preprocess(data: &Dataset, steps: &[Step]) -> Result<(Dataset, Vec<Transform>)> {
    let mut current = data.clone();
    let mut fitted = Vec::with_capacity(steps.len());
    for step in steps {
        let t = step.fit(&current)?;
        current = t.apply(&current)?;
        fitted.push(t);
    }
    Ok((current, fitted))
}

/// Undoes a sequence of fitted transforms on a complete matrix.
pub fn invert_all(transforms: &[Transform], y: &DMatrix<f64>) -> DMatrix<f64> {
    transforms.iter().rev().fold(y.clone(), |acc, t| t.invert(&acc))
}

pub fn standardize(data: &Dataset) -> Result<Dataset> {
    Step::Standardize.fit(data)?.apply(data)
}

/// Scales each column to unit population variance without centring.
pub fn scale_unit_variance(data: &Dataset) -> Result<Dataset> {
    Step::Scale.fit(data)?.apply(data)
}

pub fn subtract_min(data: &Dataset) -> Result<Dataset> {
    Step::SubtractMin.fit(data)?.apply(data)
}

/// Standardises every column and then shifts it so its minimum is zero.
pub fn standardize_and_shift(data: &Dataset) -> Result<Dataset> {
    Ok(preprocess(data, &[Step::Standardize, Step::SubtractMin])?.0)
}

pub fn cholesky_whiten(data: &Dataset) -> Result<Dataset> {
    Step::Whiten.fit(data)?.apply(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn col(v: &[f64]) -> Dataset {
        Dataset::fully_observed(DMatrix::from_column_slice(v.len(), 1, v)).unwrap()
    }

    #[test]
    fn standardize_and_shift_example() {
        let out = standardize_and_shift(&col(&[1.0, 2.0, 3.0])).unwrap();
        let s = 1.5f64.sqrt();
        for (i, e) in [0.0, s, 2.0 * s].iter().enumerate() {
            assert_abs_diff_eq!(out.value(i, 0).unwrap(), *e, epsilon = 1e-12);
        }
        let z = standardize(&col(&[1.0, 2.0, 3.0])).unwrap();
        assert_abs_diff_eq!(z.value(0, 0).unwrap(), -1.2247448713915890, epsilon = 1e-12);
    }

    #[test]
    fn normalised_column_is_a_fixed_point() {
        // Zero mean, unit population variance, minimum 0 cannot all hold for
        // a nonnegative column, so check each operation's own fixed point.
        let z = col(&[-1.0, 1.0, -1.0, 1.0]);
        assert_eq!(standardize(&z).unwrap(), z);
        let m = col(&[0.0, 2.0, 5.0]);
        assert_eq!(subtract_min(&m).unwrap(), m);
    }

    #[test]
    fn statistics_ignore_masked_cells() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 100.0, 2.0, 3.0]);
        let obs = DMatrix::from_column_slice(4, 1, &[true, false, true, true]);
        let out = standardize_and_shift(&Dataset::new(x, obs).unwrap()).unwrap();
        assert!(!out.is_observed(1, 0));
        assert_abs_diff_eq!(out.value(3, 0).unwrap(), 2.0 * 1.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn constant_column_is_degenerate() {
        assert!(matches!(
            standardize(&col(&[2.0, 2.0, 2.0])),
            Err(Error::DegenerateColumn { column: 0, .. })
        ));
        assert!(matches!(scale_unit_variance(&col(&[2.0])), Err(Error::DegenerateColumn { .. })));
    }

    #[test]
    fn scale_keeps_mean_direction() {
        let out = scale_unit_variance(&col(&[1.0, 3.0])).unwrap();
        assert_abs_diff_eq!(out.value(0, 0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.value(1, 0).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn whitening_needs_more_rows_than_dims() {
        let d = Dataset::fully_observed(DMatrix::from_row_slice(2, 3, &[1., 2., 3., 4., 5., 7.])).unwrap();
        assert!(matches!(cholesky_whiten(&d), Err(Error::Decomposition(_))));
    }

    #[test]
    fn transforms_invert() {
        let x = DMatrix::from_fn(9, 3, |i, j| ((i * 5 + j * 3) % 7) as f64 + 0.1 * (i * j) as f64);
        let data = Dataset::fully_observed(x.clone()).unwrap();
        let (out, ts) = preprocess(&data, &[Step::Standardize, Step::SubtractMin, Step::Whiten]).unwrap();
        let back = invert_all(&ts, out.x());
        assert_abs_diff_eq!(back, x, epsilon = 1e-9);
    }

    #[test]
    fn whitening_prefix_mask() {
        let x = DMatrix::from_fn(6, 2, |i, j| (i * i + j * i) as f64);
        let mut obs = DMatrix::from_element(6, 2, true);
        obs[(0, 0)] = false;
        obs[(1, 1)] = false;
        let out = cholesky_whiten(&Dataset::new(x, obs).unwrap()).unwrap();
        assert!(!out.is_observed(0, 0) && !out.is_observed(0, 1));
        assert!(out.is_observed(1, 0) && !out.is_observed(1, 1));
    }
}
