use super::adam::{AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use crate::scalar::Scalar;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Anything trainable by the shared loop: exposes its parameters as a
/// flat list of tensors and computes loss / gradients per sample.
///
/// Tensor order is part of a network's contract (optimizer state and
/// serialized bundles index into it).
pub trait Network<S: Scalar>: Clone {
    type Sample;

    fn tensors(&self) -> Vec<&[S]>;
    fn tensors_mut(&mut self) -> Vec<&mut [S]>;

    fn loss(&self, sample: &Self::Sample) -> Result<S>;

    /// Adds this sample's gradient into `grads` and returns the loss.
    fn accumulate_grads(&self, sample: &Self::Sample, grads: &mut Grads<S>) -> Result<S>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Gradient buffers shaped like a network's tensors.
#[derive(Clone, Debug)]
pub struct Grads<S> {
    tensors: Vec<Vec<S>>,
}

impl<S: Scalar> Grads<S> {
    pub fn new_like<N: Network<S>>(net: &N) -> Self {
        Grads {
            tensors: net.tensors().iter().map(|t| vec![S::zero(); t.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for t in &mut self.tensors {
            for v in t.iter_mut() {
                *v = S::zero();
            }
        }
    }

    pub fn scale(&mut self, k: S) {
        for t in &mut self.tensors {
            for v in t.iter_mut() {
                *v *= k;
            }
        }
    }

    pub fn tensors(&self) -> &[Vec<S>] {
        &self.tensors
    }

    /// Mutable window of `count` consecutive tensors starting at `start`;
    /// backprop code addresses one layer's tensors through it.
    pub fn layer_mut(&mut self, start: usize, count: usize) -> &mut [Vec<S>] {
        &mut self.tensors[start..start + count]
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Epochs without val improvement tolerated before stopping.
    pub patience: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 300,
            batch_size: 64,
            patience: 50,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

/// Mini-batch Adam with early stopping. Returns the snapshot with the
/// best validation loss, not the final-epoch weights. With an empty
/// `val_set`, the epoch's training loss stands in as the metric.
///
/// Deterministic for a fixed (network, data, config, seed).
pub fn train<S: Scalar, N: Network<S>>(
    net: N,
    train_set: &[N::Sample],
    val_set: &[N::Sample],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(N, TrainingHistory)> {
    if train_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(Error::InvalidInput(
            "batch_size and max_epochs must be positive".into(),
        ));
    }

    let mut net = net;
    let mut adam = AdamState::new(&net, cfg.adam);
    let mut grads = Grads::new_like(&net);
    let mut rng = seeded_rng(seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut history = TrainingHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopped_early: false,
    };
    let mut best_net = net.clone();
    let mut since_best = 0usize;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut train_loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.zero();
            for &i in batch {
                train_loss_sum += net.accumulate_grads(&train_set[i], &mut grads)?.to_f64_c();
            }
            grads.scale(S::one() / S::from_f64_c(batch.len() as f64));
            adam.step(&mut net, &grads)?;
        }
        let train_loss = train_loss_sum / train_set.len() as f64;

        let val_loss = if val_set.is_empty() {
            train_loss
        } else {
            mean_loss(&net, val_set)?
        };
        history.epochs.push(EpochStats { epoch, train_loss, val_loss });

        if val_loss < history.best_val_loss {
            history.best_val_loss = val_loss;
            history.best_epoch = epoch;
            best_net = net.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }

    Ok((best_net, history))
}

pub fn mean_loss<S: Scalar, N: Network<S>>(net: &N, set: &[N::Sample]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidInput("mean_loss over empty set".into()));
    }
    let mut sum = 0.0;
    for s in set {
        sum += net.loss(s)?.to_f64_c();
    }
    Ok(sum / set.len() as f64)
}
