//! On-disk chain traces: one CSV per scalar series, one CSV per matrix of
//! the final state and a JSON manifest.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::csv::{format_value, matrix_to_csv, parse_matrix_csv};
use crate::error::{Error, Result};
use crate::inference::{ChainTrace, IterationSummary, ModelState, Regime};
use crate::model::{
    FeatureAllocation, FeatureDictionary, HyperPriors, InstanceWeights, ModelKind, WeightKind,
};

pub const MANIFEST: &str = "manifest.json";

const SERIES: [&str; 7] = [
    "log_joint",
    "n_features",
    "alpha",
    "sigma2_x",
    "sigma2_a",
    "n_instances",
    "total_lifetime",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalHypers {
    pub alpha: f64,
    pub sigma2_x: f64,
    pub sigma2_a: f64,
}

/// Index of a trace directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub model: ModelKind,
    pub regime: Regime,
    pub priors: HyperPriors,
    pub seed: u64,
    pub stream: u64,
    pub config_hash: String,
    pub n_rows: usize,
    pub n_dims: usize,
    pub n_kept: usize,
    pub final_hypers: FinalHypers,
    /// Every file of the directory other than the manifest, sorted.
    pub files: Vec<String>,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    std::fs::read_to_string(&path).map_err(|e| Error::io(path, e))
}

fn series_csv(iterations: &[IterationSummary], get: impl Fn(&IterationSummary) -> String) -> String {
    let mut out = String::from("iteration,value\n");
    for it in iterations {
        out.push_str(&format!("{},{}\n", it.iteration, get(it)));
    }
    out
}

/// Writes `trace` into `dir` (created if needed). `extra_files` names files
/// the caller has already put in `dir`; they are listed in the manifest.
pub fn write_trace(
    dir: &Path,
    trace: &ChainTrace,
    config_hash: &str,
    stream: u64,
    extra_files: &[String],
) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let it = &trace.iterations;
    let mut files: Vec<String> = extra_files.to_vec();
    let series: [(&str, String); 7] = [
        (SERIES[0], series_csv(it, |s| format_value(s.log_joint))),
        (SERIES[1], series_csv(it, |s| s.n_features.to_string())),
        (SERIES[2], series_csv(it, |s| format_value(s.alpha))),
        (SERIES[3], series_csv(it, |s| format_value(s.sigma2_x))),
        (SERIES[4], series_csv(it, |s| format_value(s.sigma2_a))),
        (SERIES[5], series_csv(it, |s| s.n_instances.to_string())),
        (SERIES[6], series_csv(it, |s| s.total_lifetime.to_string())),
    ];
    for (name, body) in series {
        let file = format!("{name}.csv");
        write(dir, &file, &body)?;
        files.push(file);
    }

    let s = &trace.final_state;
    let (n, k, d) = (s.alloc.n_rows(), s.n_features(), s.dict.n_dims());
    let a = &s.dict.a;
    let matrices = [
        ("features.csv", matrix_to_csv(k, d, |i, j| format_value(a[(i, j)]))),
        ("lifetimes.csv", matrix_to_csv(n, k, |i, j| s.alloc.get(i, j))),
        ("weights.csv", matrix_to_csv(n, k, |i, j| format_value(s.weights.get(i, j)))),
        ("rho.csv", matrix_to_csv(k, 1, |i, _| format_value(s.hypers.rho[i]))),
    ];
    for (name, body) in matrices {
        write(dir, name, &body)?;
        files.push(name.to_string());
    }

    let mut imp = String::from("row,col,mean\n");
    for (&(r, c), m) in trace.imputed_cells.iter().zip(trace.imputation_means()) {
        imp.push_str(&format!("{r},{c},{}\n", format_value(m)));
    }
    write(dir, "imputations.csv", &imp)?;
    files.push("imputations.csv".into());
    files.sort();
    files.dedup();

    let manifest = Manifest {
        format: "dynlfm-trace/1".into(),
        model: trace.model,
        regime: trace.regime,
        priors: s.hypers.priors,
        seed: trace.seed,
        stream,
        config_hash: config_hash.to_string(),
        n_rows: n,
        n_dims: d,
        n_kept: trace.len(),
        final_hypers: FinalHypers {
            alpha: s.hypers.alpha,
            sigma2_x: s.hypers.sigma2_x,
            sigma2_a: s.hypers.sigma2_a,
        },
        files,
    };
    write(dir, MANIFEST, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(manifest)
}

fn parse_series(text: &str, name: &str) -> Result<Vec<(usize, f64)>> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = |column| Error::Parse {
                line: i + 1,
                column,
                message: format!("malformed line in {name}.csv"),
            };
            let (a, b) = l.split_once(',').ok_or_else(|| bad(1))?;
            Ok((a.parse().map_err(|_| bad(1))?, b.parse().map_err(|_| bad(2))?))
        })
        .collect()
}

/// A trace read back from disk. Only posterior means of the imputations are
/// stored.
#[derive(Clone, Debug)]
pub struct StoredTrace {
    pub manifest: Manifest,
    pub iterations: Vec<IterationSummary>,
    pub imputed_cells: Vec<(usize, usize)>,
    pub imputation_means: Vec<f64>,
    pub final_state: ModelState,
}

impl StoredTrace {
    /// A [`ChainTrace`] whose single imputation vector holds the stored
    /// posterior means, so mean-based evaluation gives the original result.
    pub fn into_chain_trace(self) -> ChainTrace {
        let imputations = if self.imputed_cells.is_empty() || self.iterations.is_empty() {
            Vec::new()
        } else {
            vec![self.imputation_means]
        };
        ChainTrace {
            model: self.manifest.model,
            regime: self.manifest.regime,
            seed: self.manifest.seed,
            iterations: self.iterations,
            imputed_cells: self.imputed_cells,
            imputations,
            final_state: self.final_state,
        }
    }
}

pub fn read_trace(dir: &Path) -> Result<StoredTrace> {
    let manifest: Manifest = serde_json::from_str(&read(dir, MANIFEST)?)?;
    let mut columns = Vec::with_capacity(SERIES.len());
    for name in SERIES {
        columns.push(parse_series(&read(dir, &format!("{name}.csv"))?, name)?);
    }
    let len = columns[0].len();
    if columns.iter().any(|c| c.len() != len) {
        return Err(Error::Shape("scalar series differ in length".into()));
    }
    let iterations = (0..len)
        .map(|i| IterationSummary {
            iteration: columns[0][i].0,
            log_joint: columns[0][i].1,
            n_features: columns[1][i].1 as usize,
            alpha: columns[2][i].1,
            sigma2_x: columns[3][i].1,
            sigma2_a: columns[4][i].1,
            n_instances: columns[5][i].1 as usize,
            total_lifetime: columns[6][i].1 as u64,
        })
        .collect();

    let a = parse_matrix_csv(&read(dir, "features.csv")?)?;
    let lifetimes = parse_matrix_csv(&read(dir, "lifetimes.csv")?)?;
    let weights = parse_matrix_csv(&read(dir, "weights.csv")?)?;
    let rho = parse_matrix_csv(&read(dir, "rho.csv")?)?;
    let (n, k) = lifetimes.shape();
    let cols = (0..k)
        .map(|j| lifetimes.column(j).iter().map(|&v| v as u32).collect())
        .collect();
    let weight_cols: Vec<Vec<f64>> = (0..k).map(|j| weights.column(j).iter().copied().collect()).collect();
    let priors = manifest.priors;
    let weights = match manifest.model.weight_kind(&priors) {
        WeightKind::ConstantOne => InstanceWeights::constant(n, k),
        kind => InstanceWeights::from_columns(kind, weight_cols)?,
    };
    let mut state = ModelState::empty(manifest.model, n, manifest.n_dims, priors);
    state.alloc = FeatureAllocation::from_columns(n, cols)?;
    state.dict = FeatureDictionary::new(if k == 0 {
        DMatrix::zeros(0, manifest.n_dims)
    } else {
        a
    })?;
    state.weights = weights;
    state.hypers.rho = rho.iter().copied().collect();
    state.hypers.alpha = manifest.final_hypers.alpha;
    state.hypers.sigma2_x = manifest.final_hypers.sigma2_x;
    state.hypers.sigma2_a = manifest.final_hypers.sigma2_a;
    state.validate()?;

    let mut imputed_cells = Vec::new();
    let mut imputation_means = Vec::new();
    for (i, line) in read(dir, "imputations.csv")?.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse {
            line: i + 1,
            column: 1,
            message: "expected row,col,mean".into(),
        };
        if f.len() != 3 {
            return Err(bad());
        }
        imputed_cells.push((f[0].parse().map_err(|_| bad())?, f[1].parse().map_err(|_| bad())?));
        imputation_means.push(f[2].parse().map_err(|_| bad())?);
    }
    Ok(StoredTrace {
        manifest,
        iterations,
        imputed_cells,
        imputation_means,
        final_state: state,
    })
}
