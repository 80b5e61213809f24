//! Adaptive gradient balancing: moving averages of the adversarial and
//! pixel-wise gradient spreads, and the divisor β that keeps the former
//! within `ratio` of the latter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgbParams {
    pub learning_rate: f64,
    pub beta_init: f64,
    pub clip: f64,
    pub ma_decay: f64,
    pub ratio: f64,
    pub rate: f64,
    pub n_discriminator: usize,
}

impl Default for AgbParams {
    fn default() -> Self {
        Self {
            learning_rate: 5e-5,
            beta_init: 10.0,
            clip: 0.01,
            ma_decay: 0.99,
            ratio: 10.0,
            rate: 0.1,
            n_discriminator: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgbState {
    pub beta: f64,
    pub g_ma: f64,
    pub p_ma: f64,
    pub params: AgbParams,
}

impl AgbState {
    pub fn new(params: AgbParams) -> Self {
        Self {
            beta: params.beta_init,
            g_ma: 0.0,
            p_ma: 0.0,
            params,
        }
    }

    /// State for the fixed-weight modes: β pinned to 1.
    pub fn fixed(params: AgbParams) -> Self {
        Self {
            beta: 1.0,
            ..Self::new(params)
        }
    }

    /// Folds one pair of gradient spreads into the moving averages, then
    /// grows β (and shrinks `g_ma`) if the adversarial average exceeds
    /// `ratio` times the pixel-wise one. Returns whether β grew.
    pub fn observe(&mut self, std_gan: f64, std_mse: f64) -> bool {
        let AgbParams {
            ma_decay, ratio, rate, ..
        } = self.params;
        self.g_ma = self.g_ma * ma_decay + (1.0 - ma_decay) * std_gan;
        self.p_ma = self.p_ma * ma_decay + (1.0 - ma_decay) * std_mse;
        if self.g_ma > self.p_ma * ratio {
            self.beta *= 1.0 + rate;
            self.g_ma *= 1.0 - rate;
            true
        } else {
            false
        }
    }

    /// Moving-average update only; β untouched.
    pub fn track(&mut self, std_gan: f64, std_mse: f64) {
        let d = self.params.ma_decay;
        self.g_ma = self.g_ma * d + (1.0 - d) * std_gan;
        self.p_ma = self.p_ma * d + (1.0 - d) * std_mse;
    }
}

/// Applies one balancing update from the batch-averaged gradient fields.
pub fn agb_update<T: Real>(state: &AgbState, g_gan: &[T], g_mse: &[T]) -> Result<(AgbState, bool)> {
    let mut next = *state;
    let fired = next.observe(grad_std(g_gan)?, grad_std(g_mse)?);
    Ok((next, fired))
}

/// Population standard deviation over all elements (Welford's recurrence).
pub fn grad_std<T: Real>(g: &[T]) -> Result<f64> {
    if g.is_empty() {
        return Err(Error::Empty("grad_std"));
    }
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for (i, &v) in g.iter().enumerate() {
        let v = v.to_f64_lossy();
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    Ok((m2 / g.len() as f64).sqrt())
}
