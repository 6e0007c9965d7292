use dynlfm::inference::{
    lambda_log_prior, run_chain, FixedHypers, ModelSpec, ModelState, PriorRegime, Regime, Sampler,
    SamplerConfig, SingletonProposal,
};
use dynlfm::model::{
    Dataset, FeatureAllocation, FeatureDictionary, HyperPriors, InstanceWeights, ModelKind,
    WeightKind,
};
use dynlfm::rng::stream;
use nalgebra::DMatrix;

fn masked(n: usize, d: usize) -> Dataset {
    Dataset::new(DMatrix::from_element(n, d, f64::NAN), DMatrix::from_element(n, d, false)).unwrap()
}

fn state(
    kind: ModelKind,
    cols: Vec<Vec<u32>>,
    a: DMatrix<f64>,
    rho: f64,
    weights: Option<Vec<Vec<f64>>>,
) -> ModelState {
    let n = cols[0].len();
    let k = cols.len();
    let priors = HyperPriors::default();
    let mut s = ModelState::empty(kind, n, a.ncols(), priors);
    s.alloc = FeatureAllocation::from_columns(n, cols).unwrap();
    s.dict = FeatureDictionary::new(a).unwrap();
    s.weights = match weights {
        None => InstanceWeights::constant(n, k),
        Some(w) => InstanceWeights::from_columns(kind.weight_kind(&priors), w).unwrap(),
    };
    s.hypers.rho = vec![rho; k];
    s
}

fn config(regime: Regime, k_max: usize) -> SamplerConfig {
    SamplerConfig {
        regime,
        k_max,
        ..Default::default()
    }
}

fn assert_pmf_matches(counts: &[usize], pmf: &[f64]) {
    let total: usize = counts.iter().sum();
    for (v, (&c, &p)) in counts.iter().zip(pmf).enumerate() {
        let freq = c as f64 / total as f64;
        let se = (p * (1.0 - p) / total as f64).sqrt();
        assert!(
            (freq - p).abs() <= 4.0 * se + 1e-9,
            "value {v}: frequency {freq} vs probability {p} (se {se})"
        );
    }
}

#[test]
fn slice_sampler_targets_prior_under_flat_likelihood() {
    let n_rows = 6;
    let data = masked(n_rows, 2);
    let a = DMatrix::from_element(1, 2, 0.3);
    for (regime, prior_regime, col) in [
        (
            Regime::WeakLimit,
            PriorRegime::WeakLimit { alpha: 1.5, k: 1 },
            vec![0, 2, 0, 1, 0, 0],
        ),
        (Regime::FullNonparametric, PriorRegime::FullNonparametric, vec![0, 2, 0, 1, 0, 0]),
    ] {
        let mut cfg = config(regime, 1);
        cfg.fixed_hypers.alpha = Some(1.5);
        cfg.fixed_hypers.rho = Some(0.35);
        let s = state(ModelKind::DynamicConstant, vec![col], a.clone(), 0.35, None);
        let mut chain = Sampler::new(&data, s, &cfg, stream(11, 0)).unwrap();
        let row = 1;
        let cap = (n_rows - row) as u32;
        let m_minus = 1;
        let pmf: Vec<f64> = (0..=cap)
            .map(|l| lambda_log_prior(l, 0.35, m_minus, n_rows, prior_regime, cap).exp())
            .collect();
        let mut counts = vec![0usize; cap as usize + 1];
        for _ in 0..100_000 {
            let l = chain.slice_sample_lambda(row, 0);
            assert!(l <= cap);
            counts[l as usize] += 1;
        }
        assert_pmf_matches(&counts, &pmf);
    }
}

#[test]
fn slice_sampler_respects_horizon() {
    let n_rows = 4;
    let x = DMatrix::from_fn(n_rows, 1, |i, _| i as f64);
    let data = Dataset::fully_observed(x).unwrap();
    let s = state(ModelKind::DynamicConstant, vec![vec![1, 0, 1, 1]], DMatrix::from_element(1, 1, 1.0), 0.05, None);
    let mut chain = Sampler::new(&data, s, &config(Regime::WeakLimit, 1), stream(3, 0)).unwrap();
    for _ in 0..2000 {
        for n in 0..n_rows {
            let l = chain.slice_sample_lambda(n, 0);
            assert!(l as usize <= n_rows - n);
        }
    }
    chain.state().validate().unwrap();
}

#[test]
fn static_model_lifetimes_stay_binary() {
    let data = Dataset::fully_observed(DMatrix::from_fn(8, 3, |i, j| ((i * j) % 3) as f64)).unwrap();
    let s = state(ModelKind::Static, vec![vec![1, 0, 1, 0, 1, 1, 0, 0]], DMatrix::from_element(1, 3, 1.0), 1.0, None);
    let mut chain = Sampler::new(&data, s, &config(Regime::WeakLimit, 1), stream(5, 0)).unwrap();
    for _ in 0..200 {
        for n in 0..8 {
            assert!(chain.slice_sample_lambda(n, 0) <= 1);
        }
    }
}

#[test]
fn identity_singleton_proposal_has_zero_log_ratio() {
    let x = DMatrix::from_fn(5, 2, |i, j| (i + 2 * j) as f64 * 0.3);
    let data = Dataset::fully_observed(x).unwrap();
    let cols = vec![vec![0, 2, 0, 0, 0], vec![1, 1, 0, 0, 0]];
    let a = DMatrix::from_row_slice(2, 2, &[0.4, -0.2, 1.0, 0.5]);
    let s = state(ModelKind::DynamicConstant, cols, a, 0.5, None);
    let chain = Sampler::new(&data, s, &config(Regime::FullNonparametric, 1), stream(1, 0)).unwrap();
    let current = chain.current_singletons(1);
    assert_eq!(current.len(), 1);
    assert_eq!(current[0].lifetime, 2);
    assert_eq!(chain.singleton_log_acceptance(1, &current), 0.0);
    assert!(chain.current_singletons(0).is_empty());
}

#[test]
fn poor_singleton_proposal_is_rejected_at_low_noise() {
    let x = DMatrix::from_fn(5, 2, |i, j| (i + 2 * j) as f64 * 0.3);
    let data = Dataset::fully_observed(x).unwrap();
    let s = state(
        ModelKind::DynamicConstant,
        vec![vec![1, 1, 1, 1, 1]],
        DMatrix::from_row_slice(1, 2, &[0.3, 0.9]),
        0.5,
        None,
    );
    let mut cfg = config(Regime::FullNonparametric, 1);
    cfg.fixed_hypers.sigma2_x = Some(1e-8);
    let chain = Sampler::new(&data, s, &cfg, stream(1, 0)).unwrap();
    let bad = SingletonProposal { lifetime: 3, weight: 1.0, a_row: vec![5.0, -5.0], rho: 0.5 };
    let r = chain.singleton_log_acceptance(2, &[bad]);
    assert!(r < -1e8, "log ratio {r}");
}

#[test]
fn weight_updates_recover_prior_without_data() {
    let data = masked(3, 1);
    let priors = HyperPriors { weight_shape: 3.0, weight_scale: 0.5, ..Default::default() };
    let mut s = ModelState::empty(ModelKind::DynamicWeighted, 3, 1, priors);
    s.alloc = FeatureAllocation::from_columns(3, vec![vec![2, 0, 1]]).unwrap();
    s.dict = FeatureDictionary::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
    s.weights =
        InstanceWeights::from_columns(WeightKind::Gamma { shape: 3.0, scale: 0.5 }, vec![vec![1.0; 3]]).unwrap();
    s.hypers.rho = vec![0.5];
    let mut chain = Sampler::new(&data, s, &config(Regime::WeakLimit, 1), stream(9, 0)).unwrap();
    let draws: Vec<f64> = (0..50_000)
        .map(|_| {
            chain.mh_update_b(0, 0);
            chain.state().weights.get(0, 0)
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / draws.len() as f64;
    assert!((mean - 1.5).abs() < 0.03, "mean {mean}");
    assert!((var - 0.75).abs() < 0.05, "variance {var}");
}

#[test]
fn constant_weights_are_untouched() {
    let data = Dataset::fully_observed(DMatrix::from_element(3, 1, 1.0)).unwrap();
    let s = state(ModelKind::DynamicConstant, vec![vec![1, 1, 0]], DMatrix::from_element(1, 1, 1.0), 0.5, None);
    let mut chain = Sampler::new(&data, s, &config(Regime::WeakLimit, 1), stream(2, 0)).unwrap();
    assert!(!chain.mh_update_b(0, 0));
    chain.sweep_weights();
    assert!(chain.state().weights.column(0).iter().all(|&b| b == 1.0));
}

#[test]
fn imputation_draws_from_the_predictive() {
    let mut x = DMatrix::from_element(2, 1, 0.0);
    x[(0, 0)] = 4.0;
    let observed = DMatrix::from_row_slice(2, 1, &[true, false]);
    let data = Dataset::new(x, observed).unwrap();
    // One feature active on both rows with A = 2: the missing mean is 2.
    let s = state(ModelKind::DynamicConstant, vec![vec![2, 0]], DMatrix::from_element(1, 1, 2.0), 0.5, None);
    let mut cfg = config(Regime::WeakLimit, 1);
    cfg.fixed_hypers.sigma2_x = Some(0.25);
    let mut chain = Sampler::new(&data, s, &cfg, stream(4, 0)).unwrap();
    let draws: Vec<f64> = (0..40_000)
        .map(|_| {
            chain.impute_missing();
            chain.imputed_values()[0]
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64;
    assert!((mean - 2.0).abs() < 0.01, "mean {mean}");
    assert!((var - 0.25).abs() < 0.01, "variance {var}");
}

#[test]
fn full_burn_in_gives_empty_trace() {
    let data = Dataset::fully_observed(DMatrix::from_fn(6, 2, |i, j| (i + j) as f64)).unwrap();
    let model = ModelSpec { kind: ModelKind::DynamicConstant, priors: HyperPriors::default() };
    let cfg = SamplerConfig { n_iters: 5, burn_in: 5, k_max: 3, ..Default::default() };
    let trace = run_chain(&data, &model, &cfg).unwrap();
    assert!(trace.is_empty());
    trace.final_state.validate().unwrap();
}

#[test]
fn thinning_keeps_expected_count() {
    let data = Dataset::fully_observed(DMatrix::from_fn(6, 2, |i, j| (i + j) as f64)).unwrap();
    let model = ModelSpec { kind: ModelKind::Static, priors: HyperPriors::default() };
    let cfg = SamplerConfig { n_iters: 23, burn_in: 3, thin: 4, k_max: 3, ..Default::default() };
    assert_eq!(run_chain(&data, &model, &cfg).unwrap().len(), cfg.n_kept());
}

#[test]
fn chains_are_deterministic_and_valid() {
    let x = DMatrix::from_fn(12, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
    let mut observed = DMatrix::from_element(12, 3, true);
    observed[(4, 1)] = false;
    observed[(9, 0)] = false;
    let data = Dataset::new(x, observed).unwrap();
    for kind in [ModelKind::Static, ModelKind::DynamicConstant, ModelKind::DynamicWeighted] {
        for regime in [Regime::WeakLimit, Regime::FullNonparametric] {
            let model = ModelSpec { kind, priors: HyperPriors::default() };
            let cfg = SamplerConfig {
                regime,
                n_iters: 60,
                burn_in: 20,
                k_max: 6,
                seed: 42,
                ..Default::default()
            };
            let a = run_chain(&data, &model, &cfg).unwrap();
            let b = run_chain(&data, &model, &cfg).unwrap();
            assert_eq!(a.iterations, b.iterations);
            assert_eq!(a.imputations, b.imputations);
            assert_eq!(a.imputations.len(), 40);
            a.final_state.validate().unwrap();
            if regime == Regime::WeakLimit {
                assert_eq!(a.final_state.n_features(), 6);
            } else {
                assert_eq!(a.final_state.alloc.n_nonempty(), a.final_state.n_features());
            }
            let last = a.iterations.last().unwrap();
            let lj = a.final_state.log_joint(&data, regime, 6).unwrap();
            assert!(last.log_joint.is_finite() && lj.is_finite());
        }
    }
}

#[test]
fn cached_log_joint_matches_recomputation() {
    let x = DMatrix::from_fn(10, 2, |i, j| ((i + 3 * j) % 4) as f64);
    let data = Dataset::fully_observed(x).unwrap();
    let model = ModelSpec { kind: ModelKind::DynamicWeighted, priors: HyperPriors::default() };
    let cfg = SamplerConfig { regime: Regime::FullNonparametric, n_iters: 1, burn_in: 0, seed: 8, ..Default::default() };
    let trace = run_chain(&data, &model, &cfg).unwrap();
    let lj = trace.final_state.log_joint(&data, cfg.regime, cfg.k_max).unwrap();
    assert!((trace.iterations[0].log_joint - lj).abs() < 1e-8 * lj.abs().max(1.0));
}

#[test]
fn fixed_hyperparameters_are_held() {
    let data = Dataset::fully_observed(DMatrix::from_fn(8, 2, |i, j| (i * j) as f64)).unwrap();
    let model = ModelSpec { kind: ModelKind::DynamicConstant, priors: HyperPriors::default() };
    let cfg = SamplerConfig {
        n_iters: 10,
        burn_in: 0,
        k_max: 4,
        fixed_hypers: FixedHypers { alpha: Some(2.0), sigma2_x: Some(0.5), sigma2_a: None, rho: Some(0.3) },
        ..Default::default()
    };
    let trace = run_chain(&data, &model, &cfg).unwrap();
    assert!(trace.iterations.iter().all(|s| s.alpha == 2.0 && s.sigma2_x == 0.5));
    assert!(trace.final_state.hypers.rho.iter().all(|&r| r == 0.3));
}
