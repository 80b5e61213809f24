use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acquisition::DatasetSpec;
use crate::error::{Error, Result};
use crate::metrics::{Embedder, EmbedderKind};
use crate::networks::{CriticConfig, CriticInput, GeneratorConfig, NetworkConfig};
use crate::training::{AgbParams, Mode, TrainConfig};

pub const CONFIG_VERSION: u32 = 1;

/// Every experiment knob as one flat table. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,

    pub height: usize,
    pub width: usize,
    pub n_coils: usize,
    pub acceleration: f64,
    pub center_lines: usize,
    pub count: usize,
    pub val_count: usize,
    pub data_seed: u64,
    pub n_ellipses: usize,

    pub n_iterations: usize,
    pub growth: usize,
    pub kernels_per_conv: usize,
    pub kernel_size: usize,
    pub critic_widths: [usize; 4],
    pub critic_kernel_size: usize,
    /// Whether the conditional critic sees magnitudes instead of real and
    /// imaginary parts.
    pub critic_magnitude: bool,

    pub mode: Mode,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda_mse: f64,
    pub seed: u64,
    pub learning_rate: f64,
    pub beta_init: f64,
    pub clip: f64,
    pub ma_decay: f64,
    pub ratio: f64,
    pub rate: f64,
    pub n_discriminator: usize,
    pub augment: bool,
    pub clip_batch_norm: bool,

    pub embedder: EmbedderKind,
    pub embed_dim: usize,
    pub embed_seed: u64,
    pub selection_start: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let data = DatasetSpec::desk(256, 1);
        let gen = GeneratorConfig::desk(data.n_coils, data.height, data.width);
        let critic = CriticConfig::desk();
        let train = TrainConfig::default();
        let agb = AgbParams::default();
        Self {
            version: CONFIG_VERSION,
            height: data.height,
            width: data.width,
            n_coils: data.n_coils,
            acceleration: data.acceleration,
            center_lines: data.center_lines,
            count: data.count,
            val_count: 32,
            data_seed: data.seed,
            n_ellipses: data.n_ellipses,
            n_iterations: gen.n_iterations,
            growth: gen.growth,
            kernels_per_conv: gen.kernels_per_conv,
            kernel_size: gen.kernel_size,
            critic_widths: critic.widths,
            critic_kernel_size: critic.kernel_size,
            critic_magnitude: false,
            mode: train.mode,
            epochs: train.epochs,
            batch_size: train.batch_size,
            lambda_mse: train.lambda_mse,
            seed: train.seed,
            learning_rate: agb.learning_rate,
            beta_init: agb.beta_init,
            clip: agb.clip,
            ma_decay: agb.ma_decay,
            ratio: agb.ratio,
            rate: agb.rate,
            n_discriminator: agb.n_discriminator,
            augment: train.augment,
            clip_batch_norm: train.clip_batch_norm,
            embedder: train.embedder.kind,
            embed_dim: train.embedder.dim,
            embed_seed: train.embedder.seed,
            selection_start: 50,
        }
    }
}

/// Parses `key=value` pairs. Values are read as TOML literals, falling back
/// to bare strings (`mode=cwgan` works without quotes).
pub fn parse_overrides(pairs: &[String]) -> Result<toml::Table> {
    let mut table = toml::Table::new();
    for pair in pairs {
        let (key, raw) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{pair}` is not key=value")))?;
        let key = key.trim();
        let value = match format!("v = {raw}").parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => toml::Value::String(raw.trim().to_string()),
        };
        table.insert(key.to_string(), value);
    }
    Ok(table)
}

impl ExperimentConfig {
    /// File values (if any) overlaid with `overrides`, then validated.
    pub fn load(path: Option<&Path>, overrides: &toml::Table) -> Result<Self> {
        let mut table = match path {
            Some(p) => std::fs::read_to_string(p)?
                .parse::<toml::Table>()
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            table.insert(k.clone(), v.clone());
        }
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dataset_spec(&self, count: usize, seed: u64) -> DatasetSpec {
        DatasetSpec {
            height: self.height,
            width: self.width,
            n_coils: self.n_coils,
            acceleration: self.acceleration,
            center_lines: self.center_lines,
            count,
            seed,
            n_ellipses: self.n_ellipses,
        }
    }

    pub fn network(&self) -> NetworkConfig {
        let input = match (self.mode, self.critic_magnitude) {
            (Mode::Wgan, _) => CriticInput::Unconditional,
            (_, true) => CriticInput::ConditionalMagnitude,
            (_, false) => CriticInput::Conditional,
        };
        NetworkConfig {
            generator: GeneratorConfig {
                n_iterations: self.n_iterations,
                growth: self.growth,
                kernels_per_conv: self.kernels_per_conv,
                kernel_size: self.kernel_size,
                n_coils: self.n_coils,
                height: self.height,
                width: self.width,
            },
            critic: CriticConfig {
                widths: self.critic_widths,
                kernel_size: self.critic_kernel_size,
                input,
            },
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            mode: self.mode,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lambda_mse: self.lambda_mse,
            seed: self.seed,
            agb: AgbParams {
                learning_rate: self.learning_rate,
                beta_init: self.beta_init,
                clip: self.clip,
                ma_decay: self.ma_decay,
                ratio: self.ratio,
                rate: self.rate,
                n_discriminator: self.n_discriminator,
            },
            augment: self.augment,
            clip_batch_norm: self.clip_batch_norm,
            embedder: Embedder {
                kind: self.embedder,
                seed: self.embed_seed,
                dim: self.embed_dim,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.height < 8 || self.width < 8 {
            return Err(Error::Config("images must be at least 8x8".into()));
        }
        if self.n_coils == 0 || self.count == 0 || self.n_ellipses == 0 {
            return Err(Error::Config("n_coils, count and n_ellipses must be positive".into()));
        }
        if !(self.acceleration > 1.0 && self.acceleration.is_finite()) {
            return Err(Error::Config(format!(
                "acceleration must be finite and > 1, got {}",
                self.acceleration
            )));
        }
        let budget = (self.width as f64 / self.acceleration).round() as usize;
        if self.center_lines == 0 || self.center_lines > budget {
            return Err(Error::Config(format!(
                "center_lines {} must lie in 1..={budget}",
                self.center_lines
            )));
        }
        if self.embed_dim == 0 {
            return Err(Error::Config("embed_dim must be positive".into()));
        }
        self.train().validate(&self.network())
    }
}
