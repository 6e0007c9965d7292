use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use dynlfm::evaluation::{trace_summary, EvalReport, TrialResult};
use dynlfm::generative::{generate_cambridge_bars, SyntheticSpec};
use dynlfm::inference::{run_chain_on_stream, ModelSpec, Regime};
use dynlfm::io::csv::{format_value, matrix_to_csv};
use dynlfm::io::{
    config::parse_steps, invert_all, load_csv, load_waveform, plots, preprocess, read_trace,
    save_csv, stft_spectrogram, to_csv, write_trace, InputFormat, RunConfig, Transform,
};
use dynlfm::model::{Dataset, ModelKind};

/// Persistent-instance latent feature models.
#[derive(Parser)]
#[command(name = "dynlfm", version, about)]
struct Cli {
    /// Root directory for relative output paths.
    #[arg(long, env = "DYNLFM_OUTPUT_ROOT", global = true)]
    output_root: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic benchmark dataset.
    Generate(GenerateArgs),
    /// Run the MCMC sampler on a dataset and write the trace.
    Fit(FitArgs),
    /// Write the data with masked cells replaced by posterior-mean imputations.
    Impute(ImputeArgs),
    /// Score imputations against the truth and write summaries and plot tables.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    CambridgeBars,
}

#[derive(Args)]
struct GenerateArgs {
    /// Benchmark to simulate.
    #[arg(long, value_enum, default_value = "cambridge-bars")]
    preset: Preset,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of observations (default 500).
    #[arg(long)]
    n_obs: Option<usize>,
    /// Standard deviation of the observation noise (default 0.5).
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Output directory.
    #[arg(short, long, default_value = "data")]
    output: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV (or waveform with `--format waveform`).
    input: Option<PathBuf>,
    /// Configuration file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// static, dynamic-constant or dynamic-weighted.
    #[arg(long)]
    model: Option<ModelKind>,
    /// weak-limit or full-nonparametric.
    #[arg(long)]
    regime: Option<Regime>,
    /// Feature columns in the weak-limit regime.
    #[arg(long)]
    k_max: Option<usize>,
    /// Total sampler iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Iterations discarded before recording.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Keep every n-th iteration after burn-in.
    #[arg(long)]
    thin: Option<usize>,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent chains, run concurrently.
    #[arg(long)]
    chains: Option<usize>,
    /// Comma-separated steps: standardize, scale, subtract-min, whiten.
    #[arg(long)]
    preprocess: Option<String>,
    /// csv or waveform.
    #[arg(long)]
    format: Option<InputFormat>,
    /// STFT frame length for waveform input.
    #[arg(long)]
    n_fft: Option<usize>,
    /// STFT hop size for waveform input.
    #[arg(long)]
    hop: Option<usize>,
    /// Trace directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ImputeArgs {
    /// Trace directory of one chain.
    #[arg(long)]
    trace: PathBuf,
    /// Output CSV; printed to stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Trace directory of one chain, or a multi-chain run directory.
    #[arg(long)]
    trace: PathBuf,
    /// Complete data in the units of the fitted input.
    #[arg(long)]
    truth: PathBuf,
    /// Directory for the report; defaults to <TRACE>/evaluation.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

const INPUT_FILE: &str = "input.csv";
const TRANSFORMS_FILE: &str = "preprocess.json";
const CONFIG_FILE: &str = "run_config.json";

fn resolve(root: &Option<PathBuf>, path: &Path) -> PathBuf {
    match root {
        Some(r) if path.is_relative() => r.join(path),
        _ => path.to_path_buf(),
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn generate(args: GenerateArgs, root: &Option<PathBuf>) -> anyhow::Result<()> {
    let Preset::CambridgeBars = args.preset;
    let mut spec = SyntheticSpec { seed: args.seed, ..Default::default() };
    if let Some(n) = args.n_obs {
        spec.n_obs = n;
    }
    if let Some(sd) = args.noise_sd {
        spec.noise_sd = sd;
    }
    let bench = generate_cambridge_bars(&spec)?;
    let out = resolve(root, &args.output);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    save_csv(out.join("data.csv"), &bench.data)?;
    save_csv(out.join("truth.csv"), &bench.truth)?;
    let a = &bench.true_dict.a;
    write_file(&out.join("features.csv"), &matrix_to_csv(a.nrows(), a.ncols(), |i, j| format_value(a[(i, j)])))?;
    let l = &bench.true_alloc;
    write_file(&out.join("lifetimes.csv"), &matrix_to_csv(l.n_rows(), l.n_cols(), |i, j| l.get(i, j)))?;
    let rows: String = bench.test_rows.iter().map(|r| format!("{r}\n")).collect();
    write_file(&out.join("test_rows.csv"), &format!("row\n{rows}"))?;
    let manifest = serde_json::json!({
        "format": "dynlfm-synthetic/1",
        "preset": "cambridge-bars",
        "spec": spec,
        "files": ["data.csv", "features.csv", "lifetimes.csv", "test_rows.csv", "truth.csv"],
    });
    write_file(&out.join("manifest.json"), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn load_input(cfg: &RunConfig) -> anyhow::Result<Dataset> {
    let path = cfg.input.as_ref().context("no input file given")?;
    if !path.exists() {
        bail!("input {} does not exist", path.display());
    }
    Ok(match cfg.input_format {
        InputFormat::Csv => load_csv(path)?,
        InputFormat::Waveform => {
            let samples = load_waveform(path)?;
            stft_spectrogram(&samples, cfg.stft.n_fft, cfg.stft.window, cfg.stft.hop)?
        }
    })
}

fn fit(args: FitArgs, root: &Option<PathBuf>) -> anyhow::Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.input {
        cfg.input = Some(v);
    }
    if let Some(v) = args.model {
        cfg.model = v;
    }
    if let Some(v) = args.regime {
        cfg.sampler.regime = v;
    }
    if let Some(v) = args.k_max {
        cfg.sampler.k_max = v;
    }
    if let Some(v) = args.iters {
        cfg.sampler.n_iters = v;
    }
    if let Some(v) = args.burn_in {
        cfg.sampler.burn_in = v;
    }
    if let Some(v) = args.thin {
        cfg.sampler.thin = v;
    }
    if let Some(v) = args.seed {
        cfg.sampler.seed = v;
    }
    if let Some(v) = args.chains {
        cfg.chains = v;
    }
    if let Some(v) = args.preprocess {
        cfg.preprocess = parse_steps(&v)?;
    }
    if let Some(v) = args.format {
        cfg.input_format = v;
    }
    if let Some(v) = args.n_fft {
        cfg.stft.n_fft = v;
    }
    if let Some(v) = args.hop {
        cfg.stft.hop = v;
    }
    if let Some(v) = args.output {
        cfg.output = v;
    }
    cfg.validate()?;

    let input = load_input(&cfg)?;
    let (data, transforms) = preprocess(&input, &cfg.preprocess)?;
    let out = resolve(root, &cfg.output);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_file(&out.join(CONFIG_FILE), &(serde_json::to_string_pretty(&cfg)? + "\n"))?;

    let model = ModelSpec { kind: cfg.model, priors: cfg.priors };
    let hash = cfg.hash();
    let dirs: Vec<PathBuf> = if cfg.chains == 1 {
        vec![out.clone()]
    } else {
        (0..cfg.chains).map(|i| out.join(format!("chain-{i}"))).collect()
    };
    let traces = std::thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.chains)
            .map(|i| {
                let (data, model, sampler) = (&data, &model, &cfg.sampler);
                s.spawn(move || run_chain_on_stream(data, model, sampler, i as u64))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect::<Vec<_>>()
    });
    for (i, (trace, dir)) in traces.into_iter().zip(&dirs).enumerate() {
        let trace = trace?;
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        save_csv(dir.join(INPUT_FILE), &input)?;
        write_file(&dir.join(TRANSFORMS_FILE), &(serde_json::to_string_pretty(&transforms)? + "\n"))?;
        let mut extra = vec![INPUT_FILE.to_string(), TRANSFORMS_FILE.to_string()];
        if cfg.chains == 1 {
            extra.push(CONFIG_FILE.to_string());
        }
        write_trace(dir, &trace, &hash, i as u64, &extra)?;
        eprintln!("chain {i}: {} kept iterations -> {}", trace.len(), dir.display());
    }
    Ok(())
}

/// Input data with its masked cells replaced by posterior-mean imputations,
/// in input units.
fn completed_input(trace_dir: &Path) -> anyhow::Result<(Dataset, DMatrix<f64>, Vec<(usize, usize)>)> {
    let stored = read_trace(trace_dir)?;
    let input = load_csv(trace_dir.join(INPUT_FILE))?;
    let text = std::fs::read_to_string(trace_dir.join(TRANSFORMS_FILE))
        .with_context(|| format!("reading {}", trace_dir.join(TRANSFORMS_FILE).display()))?;
    let transforms: Vec<Transform> = serde_json::from_str(&text)?;
    let mut data = input.clone();
    for t in &transforms {
        data = t.apply(&data)?;
    }
    let mut y = data.x().clone();
    for (&(r, c), &m) in stored.imputed_cells.iter().zip(&stored.imputation_means) {
        y[(r, c)] = m;
    }
    if y.iter().any(|v| v.is_nan()) {
        bail!("trace does not cover every masked cell");
    }
    let back = invert_all(&transforms, &y);
    let missing = input.masked_cells();
    Ok((input, back, missing))
}

fn impute(args: ImputeArgs, root: &Option<PathBuf>) -> anyhow::Result<()> {
    let (input, back, missing) = completed_input(&args.trace)?;
    let mut x = input.x().clone();
    for &(r, c) in &missing {
        x[(r, c)] = back[(r, c)];
    }
    let completed = Dataset::fully_observed(x)?
        .with_column_names(input.column_names().map(<[String]>::to_vec))?;
    match args.output {
        Some(p) => {
            let p = resolve(root, &p);
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            save_csv(&p, &completed)?;
        }
        None => print!("{}", to_csv(&completed)),
    }
    Ok(())
}

fn chain_dirs(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if dir.join(dynlfm::io::trace::MANIFEST).exists() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(dynlfm::io::trace::MANIFEST).exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("{} holds no trace", dir.display());
    }
    Ok(dirs)
}

fn evaluate(args: EvaluateArgs, root: &Option<PathBuf>) -> anyhow::Result<()> {
    let truth = load_csv(&args.truth)?;
    let out = resolve(root, &args.output.unwrap_or_else(|| args.trace.join("evaluation")));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut trials = Vec::new();
    for (i, dir) in chain_dirs(&args.trace)?.iter().enumerate() {
        let (_, back, missing) = completed_input(dir)?;
        let stored = read_trace(dir)?;
        let trace = stored.into_chain_trace();
        if truth.n_rows() != back.nrows() || truth.n_dims() != back.ncols() {
            bail!("truth is {}x{}, data {}x{}", truth.n_rows(), truth.n_dims(), back.nrows(), back.ncols());
        }
        let mse = dynlfm::evaluation::mse_of_predictions(&missing, |r, c| back[(r, c)], &truth)?;
        trials.push(TrialResult::with_mse(&trace, mse)?);

        let prefix = if i == 0 { String::new() } else { format!("chain-{i}-") };
        let summary = trace_summary(&trace)?;
        write_file(&out.join(format!("{prefix}summary.json")), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
        let s = &trace.final_state;
        write_file(&out.join(format!("{prefix}feature_images.csv")), &plots::feature_images_csv(s))?;
        write_file(&out.join(format!("{prefix}feature_usage.csv")), &plots::feature_usage_csv(s))?;
        write_file(&out.join(format!("{prefix}instance_heatmap.csv")), &plots::instance_heatmap_csv(s))?;
    }
    let report = EvalReport::aggregate(trials)?;
    write_file(&out.join("report.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    for row in report.table_rows() {
        println!("{row}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let root = cli.output_root;
    let result = match cli.command {
        Command::Generate(a) => generate(a, &root),
        Command::Fit(a) => fit(a, &root),
        Command::Impute(a) => impute(a, &root),
        Command::Evaluate(a) => evaluate(a, &root),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
