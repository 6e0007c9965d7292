//! Integer slice sampling of lifetimes.

use rand::Rng;

use super::Sampler;
use crate::model::lifetime_log_pmf;

/// Which conditional prior of `z_nk` the slice sampler targets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PriorRegime {
    /// Buffet conditional `m_{-n} / N`.
    FullNonparametric,
    /// Finite beta–Bernoulli conditional with `k` columns.
    WeakLimit { alpha: f64, k: usize },
}

/// Log of the conditional prior of `λ_nk` given the rest of column `k`, with
/// `m_minus` instances elsewhere in the column. Lifetimes equal to `cap` are
/// censored at the data horizon (pass `u32::MAX` for no censoring).
pub fn lambda_log_prior(
    lambda: u32,
    rho: f64,
    m_minus: usize,
    n_rows: usize,
    regime: PriorRegime,
    cap: u32,
) -> f64 {
    let n = n_rows as f64;
    let m = m_minus as f64;
    let (p_on, p_off) = match regime {
        PriorRegime::FullNonparametric => (m / n, (n - m) / n),
        PriorRegime::WeakLimit { alpha, k } => {
            let ak = alpha / k as f64;
            ((m + ak) / (n + ak), (n - m) / (n + ak))
        }
    };
    if lambda == 0 {
        p_off.ln()
    } else {
        p_on.ln() + lifetime_log_pmf(lambda, rho, cap)
    }
}

/// Conditional prior probability of `λ_nk` without horizon censoring.
pub fn lambda_prior_term(
    lambda: u32,
    rho: f64,
    m_minus: usize,
    n_rows: usize,
    regime: PriorRegime,
) -> f64 {
    lambda_log_prior(lambda, rho, m_minus, n_rows, regime, u32::MAX).exp()
}

impl Sampler {
    pub(crate) fn prior_regime(&self) -> PriorRegime {
        match self.regime {
            super::Regime::FullNonparametric => PriorRegime::FullNonparametric,
            super::Regime::WeakLimit => PriorRegime::WeakLimit {
                alpha: self.state.hypers.alpha,
                k: self.k_max,
            },
        }
    }

    /// Log-likelihood change of moving `λ_nk` from its current value to
    /// `lambda`.
    fn lambda_delta(&mut self, n: usize, k: usize, lambda: u32) -> f64 {
        let cur = self.state.alloc.get(n, k);
        if lambda == cur {
            return 0.0;
        }
        let b = self.state.weights.get(n, k);
        let (lo, hi, sign) = if lambda > cur {
            (cur, lambda, 1.0)
        } else {
            (lambda, cur, -1.0)
        };
        let end = (n + hi as usize).min(self.n_rows);
        let mut delta = 0.0;
        for r in n + lo as usize..end {
            delta += self.row_delta_feature(r, k, sign * b);
        }
        delta
    }

    /// One slice-sampling update of `λ_nk`. Returns the new value.
    ///
    /// The integer bracket of `initial_bracket_width` values is placed
    /// uniformly at random around the current value and clipped to
    /// `[0, cap]`; rejected proposals shrink it towards the current value.
    pub fn slice_sample_lambda(&mut self, n: usize, k: usize) -> u32 {
        let cap = self.state.max_lifetime(n);
        let cur = self.state.alloc.get(n, k);
        let m_minus = self.state.alloc.column_count_excluding(k, n);
        let regime = self.prior_regime();
        let rho = self.state.hypers.rho[k];
        let n_rows = self.n_rows;
        let log_prior = |l: u32| lambda_log_prior(l, rho, m_minus, n_rows, regime, cap);

        let log_q_cur = log_prior(cur);
        let threshold = log_q_cur + self.rng.random::<f64>().ln();

        let w = i64::from(self.bracket_width);
        let offset = self.rng.random_range(0..w);
        let mut lo = (i64::from(cur) - offset).max(0);
        let mut hi = (i64::from(cur) - offset + w - 1).min(i64::from(cap));
        loop {
            let prop = self.rng.random_range(lo..=hi) as u32;
            if prop == cur {
                return cur;
            }
            let lp = log_prior(prop);
            if lp > f64::NEG_INFINITY {
                let log_q = lp + self.lambda_delta(n, k, prop);
                if log_q > threshold {
                    self.set_lambda(n, k, prop);
                    return prop;
                }
            }
            if prop < cur {
                lo = i64::from(prop) + 1;
            } else {
                hi = i64::from(prop) - 1;
            }
        }
    }

    /// Sets `λ_nk`, keeping the mean cache in sync.
    pub(crate) fn set_lambda(&mut self, n: usize, k: usize, lambda: u32) {
        let cur = self.state.alloc.get(n, k);
        if lambda == cur {
            return;
        }
        let b = self.state.weights.get(n, k);
        let (lo, hi, sign) = if lambda > cur {
            (cur, lambda, 1.0)
        } else {
            (lambda, cur, -1.0)
        };
        let end = (n + hi as usize).min(self.n_rows);
        for r in n + lo as usize..end {
            self.add_feature_to_row(r, k, sign * b);
        }
        self.state.alloc.set(n, k, lambda);
    }
}
