use serde::{Deserialize, Serialize};

use super::{GradientMap, ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta_m: f64,
    pub beta_v: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta_m: 0.9,
            beta_v: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for one [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
    pub step: u64,
    pub config: AdamConfig,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &ParamSet<T>) -> Self {
        Self::with_config(params, AdamConfig::default())
    }

    pub fn with_config(params: &ParamSet<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<T>> = params.iter().map(|p| vec![T::zero(); p.data.len()]).collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
            config,
        }
    }

    /// One bias-corrected Adam update; `grads[i]` belongs to the i-th parameter.
    pub fn update(&mut self, params: &mut ParamSet<T>, grads: &[&[T]], lr: f64, direction: Direction) -> Result<()> {
        if grads.len() != params.len() || self.first.len() != params.len() {
            return Err(Error::shape(
                "adam_step",
                format!(
                    "{} gradients / {} moment slots for {} parameters",
                    grads.len(),
                    self.first.len(),
                    params.len()
                ),
            ));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.data.len() != g.len() {
                return Err(Error::shape(
                    "adam_step",
                    format!("gradient for `{}` has {} values", p.name, g.len()),
                ));
            }
        }
        self.step += 1;
        let AdamConfig { beta_m, beta_v, eps } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta_m.powi(t);
        let bc2 = 1.0 - beta_v.powi(t);
        let sign = match direction {
            Direction::Minimize => -1.0,
            Direction::Maximize => 1.0,
        };
        let (bm, bv) = (T::from_f64_lossy(beta_m), T::from_f64_lossy(beta_v));
        let step_size = T::from_f64_lossy(sign * lr / bc1);
        let inv_bc2 = T::from_f64_lossy(1.0 / bc2);
        let eps = T::from_f64_lossy(eps);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            for (((x, &gi), mi), vi) in p.data.iter_mut().zip(*g).zip(m).zip(v) {
                *mi = bm * *mi + (T::one() - bm) * gi;
                *vi = bv * *vi + (T::one() - bv) * gi * gi;
                *x += step_size * *mi / ((*vi * inv_bc2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Adam step driven by a [`GradientMap`]; `handles[i]` is the graph leaf
/// bound to the i-th parameter.
pub fn adam_step<T: Real>(
    params: &mut ParamSet<T>,
    handles: &[Tensor],
    grads: &GradientMap<T>,
    state: &mut AdamState<T>,
    lr: f64,
    direction: Direction,
) -> Result<()> {
    if handles.len() != params.len() {
        return Err(Error::shape(
            "adam_step",
            format!("{} handles for {} parameters", handles.len(), params.len()),
        ));
    }
    let mut slices = Vec::with_capacity(handles.len());
    for (p, &h) in params.iter().zip(handles) {
        slices.push(grads.get(h).ok_or_else(|| Error::MissingGradient(p.name.clone()))?);
    }
    state.update(params, &slices, lr, direction)
}
