//! Fits the static and the constant-weight dynamic model to the synthetic
//! persistent-bars benchmark over several seeds and prints a results table.
//!
//! ```text
//! cargo run --release -p dynlfm --example cambridge_bars -- [trials] [iters] [noise_sd] [regime]
//! ```

use dynlfm::evaluation::{EvalReport, TrialResult};
use dynlfm::generative::{generate_cambridge_bars, SyntheticSpec};
use dynlfm::inference::{run_chain, ModelSpec, Regime, SamplerConfig};
use dynlfm::model::{HyperPriors, ModelKind};

fn main() -> dynlfm::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let trials: u64 = args.first().map_or(5, |s| s.parse().expect("trial count"));
    let iters: usize = args.get(1).map_or(2000, |s| s.parse().expect("iteration count"));
    let mut spec = SyntheticSpec::default();
    if let Some(sd) = args.get(2) {
        spec.noise_sd = sd.parse().expect("noise sd");
    }
    let regime: Regime = match args.get(3) {
        Some(r) => r.parse()?,
        None => Regime::WeakLimit,
    };

    for kind in [ModelKind::Static, ModelKind::DynamicConstant] {
        let mut results = Vec::new();
        for seed in 0..trials {
            spec.seed = seed;
            let bench = generate_cambridge_bars(&spec)?;
            let model = ModelSpec { kind, priors: HyperPriors::default() };
            let config = SamplerConfig {
                regime,
                k_max: 20,
                n_iters: iters,
                burn_in: iters / 2,
                seed,
                ..Default::default()
            };
            let start = std::time::Instant::now();
            let trace = run_chain(&bench.data, &model, &config)?;
            let mask = bench.data.masked_cells();
            let trial = TrialResult::from_trace(&trace, &bench.truth, &mask)?;
            eprintln!(
                "{:<17} seed {seed}: mse {:.3}  K {:.1}  persistence {:.3}  ({:.1?})",
                kind.name(),
                trial.mse,
                trial.n_features,
                trial.avg_persistence,
                start.elapsed()
            );
            results.push(trial);
        }
        let report = EvalReport::aggregate(results)?;
        println!("{}", kind.name());
        for row in report.table_rows() {
            println!("  {row}");
        }
    }
    Ok(())
}
