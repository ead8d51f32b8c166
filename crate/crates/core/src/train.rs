//! Seeded mini-batch training of a [`ToyNet`] with Adam.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adam::{adam_step, AdamConfig, AdamState};
use crate::data::SyntheticDataset;
use crate::error::{Error, Result};
use crate::net::ToyNet;
use crate::params::ParamStore;
use crate::pool::Method;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds parameter initialisation and batch shuffling.
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self { adam: AdamConfig::default(), epochs: 10, batch_size: 16, seed: 1 }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Param("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
}

/// Final (and initial) values of one pooling parameter entry.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamSnapshot {
    pub block: usize,
    pub name: String,
    pub values: Vec<f64>,
    pub initial: Vec<f64>,
}

/// Why a run stopped early.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Abort {
    pub epoch: usize,
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunReport {
    pub method: Method,
    pub seed: u64,
    pub epochs: Vec<EpochMetrics>,
    pub snapshots: Vec<ParamSnapshot>,
    pub aborted: Option<Abort>,
}

impl RunReport {
    pub fn final_metrics(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }

    pub fn diverged(&self) -> bool {
        self.aborted.is_some()
    }
}

fn snapshots(initial: &ParamStore, params: &ParamStore) -> Vec<ParamSnapshot> {
    initial
        .entries()
        .iter()
        .zip(params.entries())
        .filter_map(|(a, b)| {
            a.block.map(|block| ParamSnapshot {
                block,
                name: b.name.clone(),
                values: b.values.clone(),
                initial: a.values.clone(),
            })
        })
        .collect()
}

pub fn train(net: &ToyNet, data: &SyntheticDataset, optim: &OptimConfig) -> Result<RunReport> {
    train_with_observer(net, data, optim, |_, _| {})
}

/// Like [`train`], calling `observer(step, params)` after every optimizer step.
///
/// A non-finite loss or a failed ordinal projection ends the run; the report
/// then carries the epochs completed so far and an [`Abort`] record.
pub fn train_with_observer<F>(
    net: &ToyNet,
    data: &SyntheticDataset,
    optim: &OptimConfig,
    mut observer: F,
) -> Result<RunReport>
where
    F: FnMut(usize, &ParamStore),
{
    optim.validate()?;
    if data.config.classes != net.config().classes {
        return Err(Error::Config("dataset and network disagree on the number of classes".into()));
    }
    let initial = net.init_weights(optim.seed)?;
    let mut params = initial.clone();
    let mut state = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(optim.seed);
    rng.set_stream(1);
    let mut order = data.train.clone();
    let mut epochs = Vec::with_capacity(optim.epochs);
    let mut step = 0usize;
    let mut aborted = None;

    'epochs: for epoch in 1..=optim.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(optim.batch_size) {
            step += 1;
            let samples = batch.iter().map(|&i| (&data.images[i], data.labels[i]));
            let outcome = net
                .forward_backward(&params, samples)
                .and_then(|r| {
                    if r.loss.is_finite() && r.grads.all_finite() {
                        Ok(r)
                    } else {
                        Err(Error::NonFinite("loss or gradient".into()))
                    }
                })
                .and_then(|r| adam_step(&mut params, &r.grads, &mut state, &optim.adam));
            match outcome {
                Ok(()) => observer(step, &params),
                Err(Error::NonFinite(_)) => {
                    aborted = Some(Abort { epoch, step, reason: Error::Diverged { epoch, step }.to_string() });
                    break 'epochs;
                }
                Err(e @ Error::DegenerateProjection) => {
                    aborted = Some(Abort { epoch, step, reason: e.to_string() });
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let (train_loss, train_acc) = net.evaluate(&params, data.train_samples())?;
        let (test_loss, test_acc) = net.evaluate(&params, data.test_samples())?;
        if !train_loss.is_finite() || !test_loss.is_finite() {
            aborted = Some(Abort { epoch, step, reason: Error::Diverged { epoch, step }.to_string() });
            break;
        }
        epochs.push(EpochMetrics { epoch, train_loss, train_acc, test_loss, test_acc });
    }
    Ok(RunReport { method: net.method(), seed: optim.seed, epochs, snapshots: snapshots(&initial, &params), aborted })
}
