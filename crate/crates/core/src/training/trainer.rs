use rand::seq::SliceRandom;
use rand::Rng;

use super::{critic_step, evaluate, generator_step, EpochRecord, GeneratorPass, MetricSeries, StepEvent, TrainConfig};
use crate::acquisition::{augment, make_sample, TrainingSample};
use crate::autodiff::AdamState;
use crate::error::{Error, Result};
use crate::networks::{init_params, Batch, ModelParams, NetworkConfig};
use crate::real::Real;
use crate::rng::{seeded, streams};
use crate::training::{agb_update, grad_std, AgbState};

/// Receives training progress. Both hooks default to doing nothing.
pub trait TrainObserver<T> {
    fn on_step(&mut self, _event: &StepEvent) {}
    fn on_epoch(&mut self, _record: &EpochRecord, _params: &ModelParams<T>) {}
}

impl<T> TrainObserver<T> for () {}

/// Everything needed to continue training exactly where it stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState<T> {
    /// Completed epochs.
    pub epoch: usize,
    /// Completed generator steps.
    pub step: u64,
    pub params: ModelParams<T>,
    pub gen_opt: AdamState<T>,
    pub critic_opt: AdamState<T>,
    pub agb: AgbState,
    pub series: MetricSeries,
}

impl<T: Real> TrainState<T> {
    pub fn new(net: &NetworkConfig, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate(net)?;
        let params = init_params(net, cfg.seed)?;
        Ok(Self {
            epoch: 0,
            step: 0,
            gen_opt: AdamState::new(&params.generator),
            critic_opt: AdamState::new(&params.critic),
            params,
            agb: cfg.initial_agb(),
            series: MetricSeries::default(),
        })
    }
}

/// Seed of the shuffling and augmentation stream of epoch `epoch`.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn prepare<T: Real>(s: &TrainingSample<T>, augment_seed: Option<u64>) -> Result<TrainingSample<T>> {
    match augment_seed {
        Some(seed) => make_sample(&augment(&s.m_f, seed), &s.maps, &s.mask),
        None => Ok(s.clone()),
    }
}

fn check_finite(v: f64, state: &TrainState<impl Real>, epoch: usize) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            epoch,
            step: state.step,
            state: state.agb,
        })
    }
}

/// Trains from freshly initialized parameters for `cfg.epochs` epochs.
pub fn train<T: Real>(
    net: &NetworkConfig,
    cfg: &TrainConfig,
    data: &[TrainingSample<T>],
    val: &[TrainingSample<T>],
    observer: &mut impl TrainObserver<T>,
) -> Result<TrainState<T>> {
    resume(TrainState::new(net, cfg)?, net, cfg, data, val, observer)
}

/// Continues training from `state` until `cfg.epochs` epochs are complete.
pub fn resume<T: Real>(
    mut state: TrainState<T>,
    net: &NetworkConfig,
    cfg: &TrainConfig,
    data: &[TrainingSample<T>],
    val: &[TrainingSample<T>],
    observer: &mut impl TrainObserver<T>,
) -> Result<TrainState<T>> {
    cfg.validate(net)?;
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    if data.len() < cfg.batch_size {
        return Err(Error::Config(format!(
            "batch size {} exceeds the {} training samples",
            cfg.batch_size,
            data.len()
        )));
    }
    let n_disc = cfg.agb.n_discriminator;
    while state.epoch < cfg.epochs {
        let epoch = state.epoch + 1;
        let mut rng = seeded(epoch_seed(cfg.seed, epoch), streams::SHUFFLE);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let (mut critic_sum, mut gen_sum, mut steps) = (0.0, 0.0, 0usize);
        for chunk in order.chunks_exact(cfg.batch_size) {
            let draw = |idx: &[usize], rng: &mut rand_chacha::ChaCha8Rng| -> Result<Batch<T>> {
                let prepared = idx
                    .iter()
                    .map(|&i| prepare(&data[i], cfg.augment.then(|| rng.random())))
                    .collect::<Result<Vec<_>>>()?;
                Batch::from_samples(&prepared.iter().collect::<Vec<_>>())
            };
            let batch = draw(chunk, &mut rng)?;
            let mut critic_loss = 0.0;
            let mut critic_max_abs = 0.0f64;
            let pass = if cfg.mode.uses_critic() {
                for _ in 1..n_disc {
                    let idx: Vec<usize> = (0..cfg.batch_size).map(|_| rng.random_range(0..data.len())).collect();
                    let extra = draw(&idx, &mut rng)?;
                    let fake = GeneratorPass::run(&state.params, net, &extra, false)?;
                    let loss = critic_step(
                        &extra,
                        fake.images(),
                        &mut state.params,
                        &state.agb,
                        &mut state.critic_opt,
                        net,
                        cfg,
                    )?;
                    check_finite(loss, &state, epoch)?;
                    critic_max_abs = critic_max_abs.max(state.params.critic.max_abs().to_f64_lossy());
                }
                // The generator is unchanged by critic steps, so the pass
                // producing the critic's fakes is reused for its own update.
                let pass = GeneratorPass::run(&state.params, net, &batch, true)?;
                critic_loss = critic_step(
                    &batch,
                    pass.images(),
                    &mut state.params,
                    &state.agb,
                    &mut state.critic_opt,
                    net,
                    cfg,
                )?;
                check_finite(critic_loss, &state, epoch)?;
                critic_max_abs = critic_max_abs.max(state.params.critic.max_abs().to_f64_lossy());
                pass
            } else {
                GeneratorPass::run(&state.params, net, &batch, true)?
            };
            let out = generator_step(
                &pass,
                &batch,
                &mut state.params,
                &state.agb,
                &mut state.gen_opt,
                net,
                cfg,
            )?;
            check_finite(out.loss, &state, epoch)?;
            let mut fired = false;
            if cfg.mode.adaptive() {
                let (next, f) = agb_update(&state.agb, &out.g_gan, &out.g_mse)?;
                state.agb = next;
                fired = f;
            } else if cfg.mode.uses_critic() {
                state.agb.track(grad_std(&out.g_gan)?, grad_std(&out.g_mse)?);
            }
            state.step += 1;
            steps += 1;
            critic_sum += critic_loss;
            gen_sum += out.loss;
            observer.on_step(&StepEvent {
                epoch,
                step: state.step,
                critic_loss,
                gen_loss: out.loss,
                critic_max_abs,
                beta: state.agb.beta,
                g_ma: state.agb.g_ma,
                p_ma: state.agb.p_ma,
                fired,
            });
        }
        if !state.params.all_finite() {
            return Err(Error::NonFinite {
                epoch,
                step: state.step,
                state: state.agb,
            });
        }
        let eval = match evaluate(&state.params, net, val, &cfg.embedder, cfg.batch_size) {
            Err(Error::NonFiniteOutput) => {
                return Err(Error::NonFinite {
                    epoch,
                    step: state.step,
                    state: state.agb,
                })
            }
            r => r?,
        };
        let record = EpochRecord {
            epoch,
            nmse: eval.nmse_mean,
            fid: eval.fid,
            beta: state.agb.beta,
            g_ma: state.agb.g_ma,
            p_ma: state.agb.p_ma,
            critic_loss: critic_sum / steps.max(1) as f64,
            gen_loss: gen_sum / steps.max(1) as f64,
        };
        check_finite(record.nmse, &state, epoch)?;
        state.series.push(record)?;
        state.epoch = epoch;
        observer.on_epoch(&record, &state.params);
    }
    Ok(state)
}
