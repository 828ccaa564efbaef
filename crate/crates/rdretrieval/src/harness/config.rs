//! Flat key-value experiment configuration.
//!
//! Grammar: one `key = value` per line; `#` starts a comment; blank lines
//! ignored; list values are comma-separated. No nesting. Unknown keys are
//! errors (they are always typos), reported with their line number.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::IngestPaths;
use crate::synth::MixtureConfig;
use crate::{rng, RdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Synth,
    Ingest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    NaiveGlobalTau,
    FixedTauCv,
    AdaptiveTau,
    ScheduleTau,
    BaRefined,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::NaiveGlobalTau => "naive_global_tau",
            Method::FixedTauCv => "fixed_tau_cv",
            Method::AdaptiveTau => "adaptive_tau",
            Method::ScheduleTau => "schedule_tau",
            Method::BaRefined => "ba_refined",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "naive_global_tau" => Ok(Method::NaiveGlobalTau),
            "fixed_tau_cv" => Ok(Method::FixedTauCv),
            "adaptive_tau" => Ok(Method::AdaptiveTau),
            "schedule_tau" => Ok(Method::ScheduleTau),
            "ba_refined" => Ok(Method::BaRefined),
            other => Err(RdError::Config(format!(
                "unknown method '{other}' (expected naive_global_tau, fixed_tau_cv, adaptive_tau, schedule_tau, ba_refined)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub rates: Vec<usize>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub mixture: MixtureConfig,
    pub ingest: Option<IngestPaths>,
    pub out_dir: PathBuf,
    pub delta: f64,
    pub bits_per_component: usize,
    pub naive_tau: f64,
    pub cv_grid: Vec<f64>,
    pub cv_folds: usize,
    pub cv_subsample: usize,
    pub gen_bound_subsample: usize,
    pub schedule_epsilon: f64,
    pub ba_lambda: f64,
    pub ba_iterations: usize,
    pub ba_step_cap: f64,
    pub ba_batch: usize,
}

impl ExperimentConfig {
    /// The benchmark defaults: Gaussian mixture with latent 32, observed 64,
    /// two modalities, redundancy 0.4, corpus 1000, 100k pairs, 15% test,
    /// five trials, rate grid 64..512, three methods.
    pub fn default_synth(seed: u64) -> Self {
        let mixture = MixtureConfig::benchmark_default(seed);
        let mut cfg = Self {
            mode: Mode::Synth,
            rates: vec![64, 128, 256, 512],
            methods: vec![Method::NaiveGlobalTau, Method::FixedTauCv, Method::AdaptiveTau],
            trials: 5,
            seeds: Vec::new(),
            mixture,
            ingest: None,
            out_dir: PathBuf::from("out"),
            delta: 0.05,
            bits_per_component: 32,
            naive_tau: 0.07,
            cv_grid: vec![0.05, 0.07, 0.1, 0.5, 1.0],
            cv_folds: 5,
            cv_subsample: 500,
            gen_bound_subsample: 30_000,
            schedule_epsilon: 0.01,
            ba_lambda: 1.0,
            ba_iterations: 10,
            ba_step_cap: 0.2,
            ba_batch: 256,
        };
        cfg.derive_seeds(seed);
        cfg
    }

    pub fn derive_seeds(&mut self, base: u64) {
        self.seeds = (0..self.trials).map(|t| rng::subseed(base, "trial", t as u64)).collect();
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() || self.rates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RdError::Config("rates must be non-empty and strictly increasing".into()));
        }
        if self.trials < 1 {
            return Err(RdError::Config("trials must be >= 1".into()));
        }
        if self.seeds.len() != self.trials {
            return Err(RdError::Config(format!(
                "{} seeds for {} trials",
                self.seeds.len(),
                self.trials
            )));
        }
        if self.methods.is_empty() {
            return Err(RdError::Config("at least one method required".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(RdError::Config("delta must be in (0, 1)".into()));
        }
        if self.bits_per_component == 0 || self.naive_tau <= 0.0 || self.cv_grid.is_empty() {
            return Err(RdError::Config("bad baseline parameters".into()));
        }
        if self.mode == Mode::Ingest && self.ingest.is_none() {
            return Err(RdError::Config(
                "ingest mode needs query_files, doc_files, and relevance_file".into(),
            ));
        }
        self.mixture.validate()?;
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RdError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let kv = parse_kv(text)?;
        let mut cfg = Self::default_synth(17);
        let mut base_seed = 17u64;
        let mut explicit_seeds = false;
        let mut query_files: Vec<PathBuf> = Vec::new();
        let mut doc_files: Vec<PathBuf> = Vec::new();
        let mut relevance_file: Option<PathBuf> = None;

        let bad = |line: usize, key: &str, what: &str| -> RdError {
            RdError::Config(format!("line {line}: key '{key}': {what}"))
        };

        for (key, value, line) in &kv {
            let line = *line;
            macro_rules! num {
                ($t:ty) => {
                    value.parse::<$t>().map_err(|_| bad(line, key, "expected a number"))?
                };
            }
            match key.as_str() {
                "mode" => {
                    cfg.mode = match value.as_str() {
                        "synth" => Mode::Synth,
                        "ingest" => Mode::Ingest,
                        _ => return Err(bad(line, key, "expected 'synth' or 'ingest'")),
                    }
                }
                "rates" => {
                    cfg.rates = split_list(value)
                        .map(|v| v.parse().map_err(|_| bad(line, key, "expected integers")))
                        .collect::<Result<_>>()?
                }
                "methods" => {
                    cfg.methods = split_list(value)
                        .map(|v| Method::parse(v).map_err(|e| bad(line, key, &e.to_string())))
                        .collect::<Result<_>>()?
                }
                "trials" => cfg.trials = num!(usize),
                "seed" => base_seed = num!(u64),
                "seeds" => {
                    cfg.seeds = split_list(value)
                        .map(|v| v.parse().map_err(|_| bad(line, key, "expected integers")))
                        .collect::<Result<_>>()?;
                    explicit_seeds = true;
                }
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "delta" => cfg.delta = num!(f64),
                "latent_dim" => cfg.mixture.latent_dim = num!(usize),
                "obs_dim" => cfg.mixture.obs_dim = num!(usize),
                "modalities" => cfg.mixture.modalities = num!(usize),
                "rho" => {
                    let rho = num!(f64);
                    if rho <= 0.0 {
                        return Err(bad(line, key, "must be positive"));
                    }
                    cfg.mixture.rho = rho;
                    cfg.mixture.sigma = rho.powf(-0.5);
                }
                "sigma" => {
                    let sigma = num!(f64);
                    if sigma <= 0.0 {
                        return Err(bad(line, key, "must be positive"));
                    }
                    cfg.mixture.sigma = sigma;
                    cfg.mixture.rho = sigma.powi(-2);
                }
                "n_pairs" => cfg.mixture.n_pairs = num!(usize),
                "corpus_n" => cfg.mixture.corpus_n = num!(usize),
                "test_fraction" => cfg.mixture.test_fraction = num!(f64),
                "bits_per_component" => cfg.bits_per_component = num!(usize),
                "naive_tau" => cfg.naive_tau = num!(f64),
                "cv_grid" => {
                    cfg.cv_grid = split_list(value)
                        .map(|v| v.parse().map_err(|_| bad(line, key, "expected numbers")))
                        .collect::<Result<_>>()?
                }
                "cv_folds" => cfg.cv_folds = num!(usize),
                "cv_subsample" => cfg.cv_subsample = num!(usize),
                "gen_bound_subsample" => cfg.gen_bound_subsample = num!(usize),
                "schedule_epsilon" => cfg.schedule_epsilon = num!(f64),
                "ba_lambda" => cfg.ba_lambda = num!(f64),
                "ba_iterations" => cfg.ba_iterations = num!(usize),
                "ba_step_cap" => cfg.ba_step_cap = num!(f64),
                "ba_batch" => cfg.ba_batch = num!(usize),
                "query_files" => query_files = split_list(value).map(PathBuf::from).collect(),
                "doc_files" => doc_files = split_list(value).map(PathBuf::from).collect(),
                "relevance_file" => relevance_file = Some(PathBuf::from(value)),
                other => return Err(bad(line, other, "unknown key")),
            }
        }

        cfg.mixture.seed = base_seed;
        if explicit_seeds {
            cfg.trials = cfg.seeds.len();
        } else {
            cfg.derive_seeds(base_seed);
        }
        if !query_files.is_empty() || !doc_files.is_empty() || relevance_file.is_some() {
            let relevance_file = relevance_file
                .ok_or_else(|| RdError::Config("relevance_file missing for ingest".into()))?;
            cfg.ingest = Some(IngestPaths { query_files, doc_files, relevance_file });
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Parse `key = value` lines, rejecting duplicates and malformed lines with
/// line-numbered diagnostics.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| RdError::Config(format!("line {line}: expected 'key = value'")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(RdError::Config(format!("line {line}: empty key")));
        }
        if let Some(prev) = seen.insert(key.clone(), line) {
            return Err(RdError::Config(format!(
                "line {line}: key '{key}' already set on line {prev}"
            )));
        }
        out.push((key, value, line));
    }
    Ok(out)
}
