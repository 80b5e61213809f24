//! Critic/generator alternation with weight clipping, the MSE-coupled
//! generator loss, adaptive gradient balancing, and the ablation modes.

mod agb;
mod eval;
mod steps;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Embedder;
use crate::networks::{CriticInput, NetworkConfig};

pub use agb::{agb_update, grad_std, AgbParams, AgbState};
pub use eval::{evaluate, evaluate_zero_filled, Evaluation};
pub use steps::{
    critic_gradients, critic_step, generator_gradients, generator_step, CriticGradients, GeneratorGradients,
    GeneratorPass,
};
pub use trainer::{epoch_seed, resume, train, TrainObserver, TrainState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Pixel-wise loss only; no critic.
    Baseline,
    /// Unconditional critic, fixed MSE weight.
    Wgan,
    /// Conditional critic, fixed MSE weight.
    Cwgan,
    /// Conditional critic with adaptive gradient balancing.
    CwganAgb,
}

impl Mode {
    pub fn uses_critic(self) -> bool {
        self != Mode::Baseline
    }

    pub fn adaptive(self) -> bool {
        self == Mode::CwganAgb
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Wgan => "wgan",
            Mode::Cwgan => "cwgan",
            Mode::CwganAgb => "cwgan_agb",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "wgan" => Ok(Mode::Wgan),
            "cwgan" => Ok(Mode::Cwgan),
            "cwgan_agb" => Ok(Mode::CwganAgb),
            _ => Err(Error::Config(format!(
                "unknown mode `{s}` (expected baseline, wgan, cwgan or cwgan_agb)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: Mode,
    pub epochs: usize,
    pub batch_size: usize,
    /// MSE weight of the fixed-weight adversarial modes.
    pub lambda_mse: f64,
    pub seed: u64,
    pub agb: AgbParams,
    pub augment: bool,
    /// Whether weight clipping also applies to the critic's batch-norm
    /// affine parameters.
    pub clip_batch_norm: bool,
    pub embedder: Embedder,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::CwganAgb,
            epochs: 200,
            batch_size: 4,
            lambda_mse: 100.0,
            seed: 0,
            agb: AgbParams::default(),
            augment: true,
            clip_batch_norm: true,
            embedder: Embedder::projection(16, 0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, net: &NetworkConfig) -> Result<()> {
        net.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let a = &self.agb;
        let positive = [
            ("learning rate", a.learning_rate),
            ("beta_init", a.beta_init),
            ("clip", a.clip),
            ("ratio", a.ratio),
        ];
        for (what, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{what} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&a.ma_decay) || !(0.0..1.0).contains(&a.rate) {
            return Err(Error::Config("ma_decay and rate must lie in [0, 1)".into()));
        }
        if a.n_discriminator == 0 {
            return Err(Error::Config("n_discriminator must be at least 1".into()));
        }
        if !(self.lambda_mse >= 0.0 && self.lambda_mse.is_finite()) {
            return Err(Error::Config("lambda_mse must be non-negative".into()));
        }
        let unconditional = net.critic.input == CriticInput::Unconditional;
        if self.mode.uses_critic() && unconditional != (self.mode == Mode::Wgan) {
            return Err(Error::Config(format!(
                "mode {} needs a {} critic",
                self.mode.name(),
                if self.mode == Mode::Wgan {
                    "unconditional"
                } else {
                    "conditional"
                }
            )));
        }
        Ok(())
    }

    /// Balancing state at the start of training for this mode.
    pub fn initial_agb(&self) -> AgbState {
        if self.mode.adaptive() {
            AgbState::new(self.agb)
        } else {
            AgbState::fixed(self.agb)
        }
    }
}

/// Metrics of one completed epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub nmse: f64,
    pub fid: f64,
    pub beta: f64,
    pub g_ma: f64,
    pub p_ma: f64,
    pub critic_loss: f64,
    pub gen_loss: f64,
}

/// Per-epoch validation metrics and balancing state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub records: Vec<EpochRecord>,
}

impl MetricSeries {
    pub fn push(&mut self, r: EpochRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if r.epoch <= last.epoch {
                return Err(Error::InvalidArgument(format!(
                    "epoch {} does not follow {}",
                    r.epoch, last.epoch
                )));
            }
        }
        self.records.push(r);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn nmse(&self) -> Vec<(usize, f64)> {
        self.records.iter().map(|r| (r.epoch, r.nmse)).collect()
    }

    pub fn fid(&self) -> Vec<(usize, f64)> {
        self.records.iter().map(|r| (r.epoch, r.fid)).collect()
    }
}

/// State after one generator step, for tracing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepEvent {
    pub epoch: usize,
    pub step: u64,
    pub critic_loss: f64,
    pub gen_loss: f64,
    /// Largest critic parameter magnitude after each critic step of this
    /// iteration.
    pub critic_max_abs: f64,
    pub beta: f64,
    pub g_ma: f64,
    pub p_ma: f64,
    pub fired: bool,
}
