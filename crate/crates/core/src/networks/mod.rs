//! The densely connected unrolled generator and the conditional patch critic.

mod batch;
mod critic;
mod generator;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamSet, RunningStats};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::{seeded, streams};

pub use batch::Batch;
pub use critic::{bind_critic, patchgan_forward, CriticHandles};
pub use generator::{bind_generator, conv_unit, dc_unit, dci_forward, dense_sources, GeneratorHandles, GeneratorTrace};

/// Negative slope of every leaky ReLU in both networks.
pub const LRELU_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_iterations: usize,
    pub growth: usize,
    pub kernels_per_conv: usize,
    pub kernel_size: usize,
    pub n_coils: usize,
    pub height: usize,
    pub width: usize,
}

impl GeneratorConfig {
    /// 4 iterations, growth 2, 8 kernels of 5×5.
    pub fn desk(n_coils: usize, height: usize, width: usize) -> Self {
        Self {
            n_iterations: 4,
            growth: 2,
            kernels_per_conv: 8,
            kernel_size: 5,
            n_coils,
            height,
            width,
        }
    }

    /// 20 iterations, growth 5, 40 kernels of 5×5.
    pub fn full(n_coils: usize, height: usize, width: usize) -> Self {
        Self {
            n_iterations: 20,
            growth: 5,
            kernels_per_conv: 40,
            ..Self::desk(n_coils, height, width)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 || self.growth == 0 || self.kernels_per_conv == 0 {
            return Err(Error::Config(
                "generator needs at least one iteration, growth and kernel".into(),
            ));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "generator kernel size must be odd, got {}",
                self.kernel_size
            )));
        }
        if self.n_coils == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::Config("generator needs coils and a nonempty image".into()));
        }
        Ok(())
    }

    /// Channels entering each convolutional unit: the direct predecessor
    /// plus `G` earlier outputs, two real channels each.
    pub fn unit_input_channels(&self) -> usize {
        2 * (self.growth + 1)
    }

    /// `(in, out)` channel counts of the three convolutions of a unit.
    pub fn conv_channels(&self) -> [(usize, usize); 3] {
        let k = self.kernels_per_conv;
        [(self.unit_input_channels(), k), (k, k), (k, 2)]
    }

    pub fn param_count(&self) -> usize {
        let k2 = self.kernel_size * self.kernel_size;
        let per_iter: usize = self.conv_channels().iter().map(|&(i, o)| o * i * k2 + o).sum::<usize>() + 1;
        per_iter * self.n_iterations
    }
}

/// What the critic sees of a (condition, candidate) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticInput {
    /// Real and imaginary parts of both images: 4 channels.
    Conditional,
    /// Magnitudes of both images: 2 channels.
    ConditionalMagnitude,
    /// The candidate alone: 2 channels.
    Unconditional,
}

impl CriticInput {
    pub fn channels(self) -> usize {
        match self {
            CriticInput::Conditional => 4,
            CriticInput::ConditionalMagnitude | CriticInput::Unconditional => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticConfig {
    pub widths: [usize; 4],
    pub kernel_size: usize,
    pub input: CriticInput,
}

impl CriticConfig {
    pub fn desk() -> Self {
        Self {
            widths: [16, 32, 64, 128],
            kernel_size: 4,
            input: CriticInput::Conditional,
        }
    }

    pub fn full() -> Self {
        Self {
            widths: [64, 128, 256, 512],
            ..Self::desk()
        }
    }

    /// Spatial size after the four stride-2 stages.
    pub fn final_dims(height: usize, width: usize) -> (usize, usize) {
        (height.div_ceil(16), width.div_ceil(16))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub generator: GeneratorConfig,
    pub critic: CriticConfig,
}

impl NetworkConfig {
    pub fn desk(n_coils: usize, height: usize, width: usize) -> Self {
        Self {
            generator: GeneratorConfig::desk(n_coils, height, width),
            critic: CriticConfig::desk(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        let (h, w) = (self.generator.height, self.generator.width);
        if h < 16 || w < 16 {
            return Err(Error::Config(format!(
                "critic needs images of at least 16x16 for four stride-2 stages, got {h}x{w}"
            )));
        }
        if self.critic.widths.contains(&0) || self.critic.kernel_size == 0 {
            return Err(Error::Config("critic widths and kernel size must be positive".into()));
        }
        Ok(())
    }
}

/// Generator and critic parameters plus the critic's batch-norm running
/// statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub generator: ParamSet<T>,
    pub critic: ParamSet<T>,
    pub bn_stats: Vec<RunningStats<T>>,
}

impl<T: Real> ModelParams<T> {
    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            generator: self.generator.cast(),
            critic: self.critic.cast(),
            bn_stats: self
                .bn_stats
                .iter()
                .map(|s| RunningStats {
                    mean: s.mean.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
                    var: s.var.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
                    momentum: U::from_f64_lossy(s.momentum.to_f64_lossy()),
                })
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.generator.all_finite() && self.critic.all_finite()
    }
}

pub fn gen_conv_name(iter: usize, conv: usize, what: &str) -> String {
    format!("gen.iter{iter}.conv{conv}.{what}")
}

pub fn gen_dc_name(iter: usize) -> String {
    format!("gen.iter{iter}.dc_weight")
}

fn he_uniform<T: Real>(rng: &mut impl Rng, fan_in: usize, n: usize) -> Vec<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..n)
        .map(|_| T::from_f64_lossy(rng.random_range(-bound..bound)))
        .collect()
}

/// He-uniform weights, zero biases, unit data-consistency weights and
/// identity batch-norm affine parameters.
pub fn init_params<T: Real>(config: &NetworkConfig, seed: u64) -> Result<ModelParams<T>> {
    config.validate()?;
    let mut rng = seeded(seed, streams::INIT);
    let g = &config.generator;
    let k = g.kernel_size;
    let mut generator = ParamSet::new();
    for i in 0..g.n_iterations {
        for (j, &(cin, cout)) in g.conv_channels().iter().enumerate() {
            let fan_in = cin * k * k;
            generator.insert(
                gen_conv_name(i, j, "weight"),
                &[cout, cin, k, k],
                he_uniform(&mut rng, fan_in, cout * fan_in),
            )?;
            generator.insert(gen_conv_name(i, j, "bias"), &[cout], vec![T::zero(); cout])?;
        }
        generator.insert(gen_dc_name(i), &[1], vec![T::one()])?;
    }

    let c = &config.critic;
    let kc = c.kernel_size;
    let mut critic = ParamSet::new();
    let mut bn_stats = Vec::new();
    let mut cin = c.input.channels();
    for (j, &cout) in c.widths.iter().enumerate() {
        let fan_in = cin * kc * kc;
        critic.insert(
            format!("critic.conv{j}.weight"),
            &[cout, cin, kc, kc],
            he_uniform(&mut rng, fan_in, cout * fan_in),
        )?;
        critic.insert(format!("critic.conv{j}.bias"), &[cout], vec![T::zero(); cout])?;
        critic.insert(format!("critic.bn{j}.gamma"), &[cout], vec![T::one(); cout])?;
        critic.insert(format!("critic.bn{j}.beta"), &[cout], vec![T::zero(); cout])?;
        bn_stats.push(RunningStats::new(cout));
        cin = cout;
    }
    let (fh, fw) = CriticConfig::final_dims(g.height, g.width);
    let features = cin * fh * fw;
    critic.insert(
        "critic.linear.weight",
        &[1, features],
        he_uniform(&mut rng, features, features),
    )?;
    critic.insert("critic.linear.bias", &[1], vec![T::zero()])?;
    Ok(ModelParams {
        generator,
        critic,
        bn_stats,
    })
}
