use super::{Mode, TrainConfig};
use crate::autodiff::{AdamState, BatchNormMode, Direction, Graph, RunningStats, Tensor};
use crate::error::Result;
use crate::networks::{
    bind_critic, bind_generator, dci_forward, patchgan_forward, Batch, GeneratorHandles, ModelParams, NetworkConfig,
};
use crate::real::Real;
use crate::training::AgbState;

/// A generator forward pass kept alive so its tape can be reused for the
/// parameter update.
pub struct GeneratorPass<T> {
    pub graph: Graph<T>,
    pub handles: GeneratorHandles,
    pub output: Tensor,
}

impl<T: Real> GeneratorPass<T> {
    pub fn run(params: &ModelParams<T>, net: &NetworkConfig, batch: &Batch<T>, requires_grad: bool) -> Result<Self> {
        let mut graph = Graph::new();
        let handles = bind_generator(&mut graph, &params.generator, &net.generator, requires_grad)?;
        let output = dci_forward(&mut graph, batch, &handles, &net.generator)?.output;
        Ok(Self { graph, handles, output })
    }

    pub fn images(&self) -> &[T] {
        self.graph.value(self.output)
    }
}

/// Critic objective `(1/β)(mean D(m_z, m_f) − mean D(m_z, fake))` and its
/// gradient with respect to every critic parameter, plus the batch-norm
/// statistics after the two forward passes.
pub struct CriticGradients<T> {
    pub objective: f64,
    pub grads: Vec<Vec<T>>,
    pub stats: Vec<RunningStats<T>>,
}

pub fn critic_gradients<T: Real>(
    batch: &Batch<T>,
    fake: &[T],
    params: &ModelParams<T>,
    beta: f64,
    net: &NetworkConfig,
) -> Result<CriticGradients<T>> {
    let shape = batch.image_shape();
    let mut g = Graph::new();
    let h = bind_critic(&mut g, &params.critic, true)?;
    let z = g.constant(batch.m_z.clone(), &shape);
    let real = g.constant(batch.m_f.clone(), &shape);
    let fake = g.constant(fake.to_vec(), &shape);
    let mut stats = params.bn_stats.clone();
    let d_real = patchgan_forward(&mut g, z, real, &h, &mut stats, BatchNormMode::Train, &net.critic)?;
    let d_fake = patchgan_forward(&mut g, z, fake, &h, &mut stats, BatchNormMode::Train, &net.critic)?;
    let (d_real, d_fake) = (g.mean(d_real), g.mean(d_fake));
    let gap = g.sub(d_real, d_fake)?;
    let objective = g.mul_const(gap, T::from_f64_lossy(1.0 / beta));
    let map = g.backward(objective)?;
    let grads = h
        .all
        .iter()
        .zip(params.critic.iter())
        .map(|(&t, p)| map.get(t).map_or_else(|| vec![T::zero(); p.data.len()], <[T]>::to_vec))
        .collect();
    Ok(CriticGradients {
        objective: g.scalar(objective).to_f64_lossy(),
        grads,
        stats,
    })
}

/// Ascends the critic objective with Adam, then clips the critic weights
/// into `[-c, c]`. Generator parameters are not touched.
pub fn critic_step<T: Real>(
    batch: &Batch<T>,
    fake: &[T],
    params: &mut ModelParams<T>,
    agb: &AgbState,
    opt: &mut AdamState<T>,
    net: &NetworkConfig,
    cfg: &TrainConfig,
) -> Result<f64> {
    let out = critic_gradients(batch, fake, params, agb.beta, net)?;
    let slices: Vec<&[T]> = out.grads.iter().map(Vec::as_slice).collect();
    opt.update(
        &mut params.critic,
        &slices,
        agb.params.learning_rate,
        Direction::Maximize,
    )?;
    params.bn_stats = out.stats;
    let c = T::from_f64_lossy(agb.params.clip);
    let clip_bn = cfg.clip_batch_norm;
    params.critic.clip_where(c, |name| clip_bn || !name.contains(".bn"));
    Ok(out.objective)
}

/// Loss value, parameter gradients and the two batch-averaged image-space
/// gradient fields of one generator step.
pub struct GeneratorGradients<T> {
    pub loss: f64,
    pub grads: Vec<Vec<T>>,
    /// `(1/β)·∇ D` averaged over the batch; zero in baseline mode.
    pub g_gan: Vec<T>,
    /// `∇ MSE` averaged over the batch.
    pub g_mse: Vec<T>,
}

/// Image-space gradient of `mean D(m_z, x)` at `x = images`, with
/// batch-norm on batch statistics and running statistics untouched.
fn critic_image_gradient<T: Real>(
    batch: &Batch<T>,
    images: &[T],
    params: &ModelParams<T>,
    net: &NetworkConfig,
) -> Result<(f64, Vec<T>)> {
    let shape = batch.image_shape();
    let mut g = Graph::new();
    let x = g.param(images.to_vec(), &shape);
    let h = bind_critic(&mut g, &params.critic, false)?;
    let z = g.constant(batch.m_z.clone(), &shape);
    let mut stats = params.bn_stats.clone();
    let d = patchgan_forward(&mut g, z, x, &h, &mut stats, BatchNormMode::TrainFrozen, &net.critic)?;
    let d = g.mean(d);
    let map = g.backward(d)?;
    let grad = map.get(x).map_or_else(|| vec![T::zero(); images.len()], <[T]>::to_vec);
    Ok((g.scalar(d).to_f64_lossy(), grad))
}

fn mse_image_gradient<T: Real>(batch: &Batch<T>, images: &[T]) -> Result<(f64, Vec<T>)> {
    let shape = batch.image_shape();
    let mut g = Graph::new();
    let x = g.param(images.to_vec(), &shape);
    let f = g.constant(batch.m_f.clone(), &shape);
    let mse = g.mse(x, f)?;
    let map = g.backward(mse)?;
    Ok((
        g.scalar(mse).to_f64_lossy(),
        map.get(x).expect("x is a parameter").to_vec(),
    ))
}

fn batch_sum<T: Real>(v: &[T], items: usize) -> Vec<T> {
    let n = v.len() / items;
    let mut out = vec![T::zero(); n];
    for item in v.chunks(n) {
        for (o, &x) in out.iter_mut().zip(item) {
            *o += x;
        }
    }
    out
}

/// Generator objective per mode, backpropagated through the recorded pass:
/// AGB descends `−(1/β)·mean D + MSE`, the fixed-weight modes
/// `−mean D + λ_mse·MSE`, the baseline `MSE`.
pub fn generator_gradients<T: Real>(
    pass: &GeneratorPass<T>,
    batch: &Batch<T>,
    params: &ModelParams<T>,
    agb: &AgbState,
    net: &NetworkConfig,
    cfg: &TrainConfig,
) -> Result<GeneratorGradients<T>> {
    let images = pass.images();
    let (adv_coef, mse_coef) = match cfg.mode {
        Mode::Baseline => (0.0, 1.0),
        Mode::Wgan | Mode::Cwgan => (1.0, cfg.lambda_mse),
        Mode::CwganAgb => (1.0 / agb.beta, 1.0),
    };
    let (mse, mse_grad) = mse_image_gradient(batch, images)?;
    let (mean_d, d_grad) = if cfg.mode.uses_critic() {
        critic_image_gradient(batch, images, params, net)?
    } else {
        (0.0, vec![T::zero(); images.len()])
    };
    let (a, m) = (T::from_f64_lossy(adv_coef), T::from_f64_lossy(mse_coef));
    let seed: Vec<T> = d_grad.iter().zip(&mse_grad).map(|(&d, &e)| m * e - a * d).collect();
    let map = pass.graph.backward_from(pass.output, seed)?;
    let grads = pass
        .handles
        .all
        .iter()
        .zip(params.generator.iter())
        .map(|(&t, p)| map.get(t).map_or_else(|| vec![T::zero(); p.data.len()], <[T]>::to_vec))
        .collect();
    let g_gan = batch_sum(&d_grad, batch.size).into_iter().map(|v| a * v).collect();
    Ok(GeneratorGradients {
        loss: mse_coef * mse - adv_coef * mean_d,
        grads,
        g_gan,
        g_mse: batch_sum(&mse_grad, batch.size),
    })
}

/// Descends the generator objective with Adam; critic parameters are not
/// touched. Returns the gradients so the caller can run the balancing
/// update.
pub fn generator_step<T: Real>(
    pass: &GeneratorPass<T>,
    batch: &Batch<T>,
    params: &mut ModelParams<T>,
    agb: &AgbState,
    opt: &mut AdamState<T>,
    net: &NetworkConfig,
    cfg: &TrainConfig,
) -> Result<GeneratorGradients<T>> {
    let out = generator_gradients(pass, batch, params, agb, net, cfg)?;
    let slices: Vec<&[T]> = out.grads.iter().map(Vec::as_slice).collect();
    opt.update(
        &mut params.generator,
        &slices,
        agb.params.learning_rate,
        Direction::Minimize,
    )?;
    Ok(out)
}
