use serde::{Deserialize, Serialize};

use super::mlp::{Grads, Mlp};
use crate::error::{domain, Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Learning rate reached at the last epoch under cosine decay; equal to
    /// `learning_rate` for a constant schedule.
    pub final_learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_stability: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            final_learning_rate: 1e-5,
            epochs: 300,
            batch_size: 4096,
            seed: 7,
            beta1: 0.9,
            beta2: 0.999,
            eps_stability: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.final_learning_rate > 0.0) {
            return domain("learning rates must be positive");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) || !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return domain(format!(
                "moment decays must lie in (0, 1), got {} and {}",
                self.beta1, self.beta2
            ));
        }
        if !(self.eps_stability > 0.0) {
            return domain("eps_stability must be positive");
        }
        if self.batch_size == 0 {
            return domain("batch_size must be positive");
        }
        Ok(())
    }

    /// Cosine interpolation from `learning_rate` to `final_learning_rate`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.learning_rate;
        }
        let frac = epoch.min(self.epochs - 1) as f64 / (self.epochs - 1) as f64;
        let w = 0.5 * (1.0 + (std::f64::consts::PI * frac).cos());
        self.final_learning_rate + (self.learning_rate - self.final_learning_rate) * w
    }
}

/// First and second moment estimates plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Grads<T>,
    pub v: Grads<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(net: &Mlp<T>) -> Self {
        Self {
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update at the given learning rate.
pub fn adam_step<T: Scalar>(
    net: &mut Mlp<T>,
    grads: &Grads<T>,
    state: &mut AdamState<T>,
    config: &TrainConfig,
    learning_rate: f64,
) -> Result<()> {
    if grads.weights.len() != net.depth() || state.m.weights.len() != net.depth() {
        return Err(Error::Shape("gradient/state layer count differs from the network".into()));
    }
    state.step += 1;
    let b1 = T::lit(config.beta1);
    let b2 = T::lit(config.beta2);
    let one = T::one();
    let corr1 = one - T::lit(config.beta1.powi(state.step as i32));
    let corr2 = one - T::lit(config.beta2.powi(state.step as i32));
    let lr = T::lit(learning_rate);
    let eps = T::lit(config.eps_stability);

    let update = |p: &mut T, g: T, m: &mut T, v: &mut T| {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / corr1;
        let v_hat = *v / corr2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };

    let (weights, biases) = net.params_mut();
    for l in 0..weights.len() {
        if weights[l].dim() != grads.weights[l].dim() || biases[l].dim() != grads.biases[l].dim() {
            return Err(Error::Shape(format!("layer {l} gradient shape mismatch")));
        }
        ndarray::Zip::from(&mut weights[l])
            .and(&grads.weights[l])
            .and(&mut state.m.weights[l])
            .and(&mut state.v.weights[l])
            .for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut biases[l])
            .and(&grads.biases[l])
            .and(&mut state.m.biases[l])
            .and(&mut state.v.biases[l])
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    Ok(())
}
