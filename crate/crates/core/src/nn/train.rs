use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, Gradients, Network};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Minibatch SGD settings shared by pre-training, subset retraining and fine-tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgdConfig {
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            batch_size: 32,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        Ok(())
    }
}

/// Runs `epochs` shuffled passes of minibatch SGD over `data`. Masks are preserved.
pub fn retrain<R: Rng + ?Sized>(
    net: &mut Network,
    data: &Dataset,
    epochs: usize,
    cfg: &SgdConfig,
    rng: &mut R,
) -> Result<()> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::config(format!("{:?} split is empty", data.split())));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = data.batch(chunk);
            let (_, grads) = net.loss_and_grads(&x, &y)?;
            net.sgd_step(&grads, cfg.lr);
        }
    }
    Ok(())
}

/// Fraction of examples whose argmax logit (lowest class id on ties) equals the label.
pub fn evaluate_accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::config(format!("{:?} split is empty", data.split())));
    }
    const CHUNK: usize = 512;
    let mut correct = 0usize;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(CHUNK) {
        let (x, y) = data.batch(chunk);
        let logits = net.forward(&x)?;
        correct += y
            .iter()
            .enumerate()
            .filter(|&(b, &label)| argmax(logits.row(b)) == label)
            .count();
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Adam optimizer state for one network. Used for the Q-network.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Network, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) {
        self.t = self.t.saturating_add(1);
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (li, layer) in net.layers_mut().iter_mut().enumerate() {
            let g = &grads.layers[li];
            let m = &mut self.m.layers[li];
            let v = &mut self.v.layers[li];
            for flat in 0..g.weights.len() {
                if !layer.mask()[flat] {
                    continue;
                }
                let mut w = layer.weights().as_slice()[flat];
                update(
                    &mut w,
                    g.weights.as_slice()[flat],
                    &mut m.weights.as_mut_slice()[flat],
                    &mut v.weights.as_mut_slice()[flat],
                );
                layer.set_weight(flat, w);
            }
            for (o, b) in layer.bias_mut().iter_mut().enumerate() {
                update(b, g.bias[o], &mut m.bias[o], &mut v.bias[o]);
            }
        }
    }
}
