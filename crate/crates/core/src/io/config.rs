//! Run configuration and its flat sectioned key–value text format.
//!
//! ```text
//! # comment
//! [model]
//! kind = dynamic-constant
//!
//! [sampler]
//! regime = weak-limit
//! k_max = 20
//! iters = 2000
//! burn_in = 1000
//!
//! [data]
//! input = data.csv
//! preprocess = standardize, subtract-min
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::preprocess::Step;
use super::spectrogram::Window;
use crate::error::{Error, Result};
use crate::inference::{Regime, SamplerConfig};
use crate::model::{HyperPriors, ModelKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Csv,
    /// A mono waveform converted to a spectrogram before preprocessing.
    Waveform,
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(InputFormat::Csv),
            "waveform" => Ok(InputFormat::Waveform),
            other => Err(Error::Config(format!("unknown input format `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            n_fft: 128,
            hop: 128,
            window: Window::Hanning,
        }
    }
}

/// Everything a `fit` run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub priors: HyperPriors,
    pub sampler: SamplerConfig,
    pub chains: usize,
    pub input: Option<PathBuf>,
    pub input_format: InputFormat,
    pub output: PathBuf,
    pub preprocess: Vec<Step>,
    pub stft: StftConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::DynamicConstant,
            priors: HyperPriors::default(),
            sampler: SamplerConfig::default(),
            chains: 1,
            input: None,
            input_format: InputFormat::Csv,
            output: PathBuf::from("out"),
            preprocess: Vec::new(),
            stft: StftConfig::default(),
        }
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses the text format on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`")))?;
            cfg.set(line_no, &section, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, section: &str, key: &str, value: &str) -> Result<()> {
        let p = &mut self.priors;
        let s = &mut self.sampler;
        let f = &mut s.fixed_hypers;
        match (section, key) {
            ("model", "kind") => self.model = parse_value(line, key, value)?,
            ("sampler", "regime") => s.regime = parse_value::<Regime>(line, key, value)?,
            ("sampler", "k_max") => s.k_max = parse_value(line, key, value)?,
            ("sampler", "iters") => s.n_iters = parse_value(line, key, value)?,
            ("sampler", "burn_in") => s.burn_in = parse_value(line, key, value)?,
            ("sampler", "thin") => s.thin = parse_value(line, key, value)?,
            ("sampler", "bracket_width") => s.initial_bracket_width = parse_value(line, key, value)?,
            ("sampler", "seed") => s.seed = parse_value(line, key, value)?,
            ("sampler", "chains") => self.chains = parse_value(line, key, value)?,
            ("priors", "a_rho") => p.a_rho = parse_value(line, key, value)?,
            ("priors", "b_rho") => p.b_rho = parse_value(line, key, value)?,
            ("priors", "a_alpha") => p.a_alpha = parse_value(line, key, value)?,
            ("priors", "b_alpha") => p.b_alpha = parse_value(line, key, value)?,
            ("priors", "a_sigma") => p.a_sigma = parse_value(line, key, value)?,
            ("priors", "b_sigma") => p.b_sigma = parse_value(line, key, value)?,
            ("priors", "weight_shape") => p.weight_shape = parse_value(line, key, value)?,
            ("priors", "weight_scale") => p.weight_scale = parse_value(line, key, value)?,
            ("fixed", "alpha") => f.alpha = Some(parse_value(line, key, value)?),
            ("fixed", "sigma2_x") => f.sigma2_x = Some(parse_value(line, key, value)?),
            ("fixed", "sigma2_a") => f.sigma2_a = Some(parse_value(line, key, value)?),
            ("fixed", "rho") => f.rho = Some(parse_value(line, key, value)?),
            ("data", "input") => self.input = Some(PathBuf::from(value)),
            ("data", "format") => self.input_format = parse_value(line, key, value)?,
            ("data", "output") => self.output = PathBuf::from(value),
            ("data", "preprocess") => self.preprocess = parse_steps(value)?,
            ("stft", "n_fft") => self.stft.n_fft = parse_value(line, key, value)?,
            ("stft", "hop") => self.stft.hop = parse_value(line, key, value)?,
            ("stft", "window") => self.stft.window = parse_value(line, key, value)?,
            _ => {
                return Err(Error::Config(format!(
                    "line {line}: unknown key `{key}` in section [{section}]"
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.priors.validate()?;
        if self.chains == 0 {
            return Err(Error::Config("need at least one chain".into()));
        }
        Ok(())
    }

    /// Digest of every setting that affects results; the output location is
    /// excluded.
    pub fn hash(&self) -> String {
        let mut cfg = self.clone();
        cfg.output = PathBuf::new();
        let json = serde_json::to_vec(&cfg).expect("config serialises");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses a comma-separated list of preprocessing steps.
pub fn parse_steps(list: &str) -> Result<Vec<Step>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let cfg = RunConfig::parse(
            "# run\n[model]\nkind = static\n[sampler]\nregime = full\nk_max=5\niters = 30\nburn_in = 10 # trailing\n\
             [fixed]\nsigma2_x = 0.5\n[data]\npreprocess = standardize, subtract-min\n",
        )
        .unwrap();
        assert_eq!(cfg.model, ModelKind::Static);
        assert_eq!(cfg.sampler.regime, Regime::FullNonparametric);
        assert_eq!((cfg.sampler.k_max, cfg.sampler.n_iters, cfg.sampler.burn_in), (5, 30, 10));
        assert_eq!(cfg.sampler.fixed_hypers.sigma2_x, Some(0.5));
        assert_eq!(cfg.preprocess, vec![Step::Standardize, Step::SubtractMin]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("[sampler]\nfoo = 1\n").is_err());
        assert!(RunConfig::parse("[sampler]\niters = many\n").is_err());
        assert!(RunConfig::parse("iters 3\n").is_err());
        assert!(RunConfig::parse("[sampler]\niters = 5\nburn_in = 10\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.sampler.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
