//! Experiment configuration: a flat `key = value` file overridden by flags.
//!
//! ```text
//! # comments start with '#'
//! methods = MP, AP, OP
//! seeds = 1, 2, 3, 4
//! lr = 1e-4
//! out = results
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use poolbench_core::adam::AdamConfig;
use poolbench_core::data::SyntheticConfig;
use poolbench_core::train::OptimConfig;
use poolbench_core::Method;

use crate::error::{CliError, Result};

pub const KEYS: [&str; 15] = [
    "methods",
    "seeds",
    "epochs",
    "lr",
    "batch_size",
    "beta1",
    "beta2",
    "classes",
    "samples",
    "noise",
    "data_seed",
    "lse_r",
    "out",
    "trials",
    "tolerance",
];

/// Settings shared by all subcommands. `None` means "use the subcommand's
/// default", since e.g. `lr-sweep` runs 1 epoch and `sweep` runs 10.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub methods: Option<Vec<Method>>,
    pub seeds: Vec<u64>,
    pub epochs: Option<usize>,
    pub lr: Option<Vec<f64>>,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub dataset: SyntheticConfig,
    pub lse_r: f64,
    pub out: PathBuf,
    pub trials: usize,
    pub tolerance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            methods: None,
            seeds: vec![1, 2, 3, 4],
            epochs: None,
            lr: None,
            batch_size: 16,
            beta1: adam.beta1,
            beta2: adam.beta2,
            dataset: SyntheticConfig::default(),
            lse_r: 1.0,
            out: PathBuf::from("poolbench-out"),
            trials: 1000,
            tolerance: 1e-5,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn list<T>(key: &str, value: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(parse).collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(usage(format!("{key}: empty list")));
    }
    Ok(items)
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| usage(format!("{key}: cannot parse {value:?}")))
}

pub fn parse_methods(value: &str) -> Result<Vec<Method>> {
    list("methods", value, |s| s.parse::<Method>().map_err(|e| usage(e.to_string())))
}

pub fn parse_lrs(value: &str) -> Result<Vec<f64>> {
    list("lr", value, |s| {
        let lr: f64 = number("lr", s)?;
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(usage(format!("lr: {s} is not a positive learning rate")));
        }
        Ok(lr)
    })
}

impl ExperimentConfig {
    /// Applies one setting. Unknown keys and malformed values are usage errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "methods" => self.methods = Some(parse_methods(value)?),
            "seeds" => self.seeds = list(key, value, |s| number(key, s))?,
            "epochs" => self.epochs = Some(number(key, value)?),
            "lr" => self.lr = Some(parse_lrs(value)?),
            "batch_size" => self.batch_size = number(key, value)?,
            "beta1" => self.beta1 = number(key, value)?,
            "beta2" => self.beta2 = number(key, value)?,
            "classes" => self.dataset.classes = number(key, value)?,
            "samples" => self.dataset.samples = number(key, value)?,
            "noise" => self.dataset.noise = number(key, value)?,
            "data_seed" => self.dataset.seed = number(key, value)?,
            "lse_r" => self.lse_r = number(key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "trials" => self.trials = number(key, value)?,
            "tolerance" => self.tolerance = number(key, value)?,
            _ => return Err(usage(format!("unknown config key {key:?}; valid keys: {}", KEYS.join(", ")))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| usage(format!("config line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn methods_or(&self, default: &[Method]) -> Vec<Method> {
        self.methods.clone().unwrap_or_else(|| default.to_vec())
    }

    /// Optimizer settings for one run, with a single learning rate.
    pub fn optim(&self, lr: f64, default_epochs: usize, seed: u64) -> Result<OptimConfig> {
        let optim = OptimConfig {
            adam: AdamConfig { lr, beta1: self.beta1, beta2: self.beta2, ..AdamConfig::default() },
            epochs: self.epochs.unwrap_or(default_epochs),
            batch_size: self.batch_size,
            seed,
        };
        optim.validate().map_err(|e| usage(e.to_string()))?;
        Ok(optim)
    }

    /// The learning rate for single-rate commands.
    pub fn single_lr(&self) -> Result<f64> {
        match self.lr.as_deref() {
            None => Ok(AdamConfig::default().lr),
            Some([lr]) => Ok(*lr),
            Some(_) => Err(usage("this command takes a single learning rate")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(usage("seed list is empty"));
        }
        if matches!(&self.methods, Some(m) if m.is_empty()) {
            return Err(usage("method list is empty"));
        }
        if !(self.tolerance > 0.0) {
            return Err(usage("tolerance must be positive"));
        }
        if self.trials == 0 {
            return Err(usage("trials must be positive"));
        }
        if !(self.lse_r > 0.0) || !self.lse_r.is_finite() {
            return Err(usage("lse_r must be positive"));
        }
        Ok(())
    }
}
