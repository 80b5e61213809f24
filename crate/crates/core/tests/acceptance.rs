//! One line per acceptance criterion: `criterion N [PASS|FAIL] ...`.
//! Criteria 6 and 7 train for tens of minutes and are `#[ignore]`d; run
//! them with `cargo test --test acceptance -- --include-ignored --nocapture`.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use agbrecon::acquisition::{
    acquire, gen_dataset, gen_phantom, gen_sensitivity_maps, make_sample, make_vds_mask, reconstruct, DatasetSpec,
    TrainingSample,
};
use agbrecon::autodiff::{grad_check, relative_error, BatchNormMode, Graph, ParamSet, RunningStats, Tensor};
use agbrecon::commands::{self, Split};
use agbrecon::fourier::{dft2_reference, fft2, ifft2, ComplexImage};
use agbrecon::io::{parse_overrides, write_metrics, ExperimentConfig};
use agbrecon::metrics::{frechet_distance, select_model, Embedder, FeatureMatrix};
use agbrecon::networks::{
    dc_unit, init_params, Batch, CriticConfig, CriticInput, GeneratorConfig, ModelParams, NetworkConfig,
};
use agbrecon::training::{
    critic_gradients, evaluate, evaluate_zero_filled, generator_gradients, train, AgbParams, AgbState, EpochRecord,
    GeneratorPass, MetricSeries, Mode, StepEvent, TrainConfig, TrainObserver,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: usize, title: &str, pass: bool, detail: String, elapsed: Duration, budget: Duration) {
    let within = elapsed <= budget;
    let verdict = if pass && within { "PASS" } else { "FAIL" };
    println!(
        "criterion {n} [{verdict}] {title}: {detail} ({:.1} s, budget {} s)",
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    assert!(pass, "criterion {n} failed: {detail}");
    assert!(within, "criterion {n} exceeded its {} s budget", budget.as_secs());
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ComplexImage<f64> {
    ComplexImage::new(h, w, rand_vec(rng, h * w), rand_vec(rng, h * w)).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn samples_f64(spec: &DatasetSpec) -> Vec<TrainingSample<f64>> {
    gen_dataset(spec).unwrap().iter().map(TrainingSample::cast).collect()
}

fn toy_net(size: usize, widths: [usize; 4]) -> NetworkConfig {
    NetworkConfig {
        generator: GeneratorConfig {
            n_iterations: 2,
            growth: 1,
            kernels_per_conv: 4,
            kernel_size: 3,
            n_coils: 2,
            height: size,
            width: size,
        },
        critic: CriticConfig {
            widths,
            kernel_size: 4,
            input: CriticInput::Conditional,
        },
    }
}

fn toy_spec(size: usize, count: usize, seed: u64) -> DatasetSpec {
    DatasetSpec {
        height: size,
        width: size,
        n_coils: 2,
        acceleration: 4.0,
        center_lines: size / 8,
        count,
        seed,
        n_ellipses: 3,
    }
}

/// Worst relative error of each primitive against central differences,
/// differentiating data inputs and parameters alike.
fn primitive_errors() -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pool = rand_vec(&mut rng, 1024);
    let x_shape = [2, 2, 6, 6];
    let data = rand_vec(&mut rng, 144);
    let weights = rand_vec(&mut rng, 1024);
    let k3 = rand_vec(&mut rng, 3 * 2 * 9);
    let k4 = rand_vec(&mut rng, 3 * 2 * 16);
    let bias = vec![0.3, -0.2, 0.1];
    let field = rand_vec(&mut rng, 72);
    let factors = rand_vec(&mut rng, 144);
    let lin_w = rand_vec(&mut rng, 3 * 72);
    let target = rand_vec(&mut rng, 144);
    let other = rand_vec(&mut rng, 144);

    // Pairs the output with fixed random weights so every element matters.
    let project = |g: &mut Graph<f64>, y: Tensor| -> agbrecon::Result<Tensor> {
        let n = g.value(y).len();
        let w = g.mul_elem(y, weights[..n].to_vec())?;
        Ok(g.sum(w))
    };
    let bn = |g: &mut Graph<f64>, x: Tensor, gamma: Tensor, beta: Tensor, mode| -> agbrecon::Result<Tensor> {
        let mut stats = RunningStats::new(2);
        let y = g.batch_norm2d(x, gamma, beta, mode, &mut stats)?;
        project(g, y)
    };
    type Build<'a> = Box<dyn Fn(&mut Graph<f64>, Tensor) -> agbrecon::Result<Tensor> + 'a>;
    let cases: Vec<(&'static str, Vec<usize>, Build)> = vec![
        (
            "conv2d stride 1 input",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let k = g.constant(k3.clone(), &[3, 2, 3, 3]);
                let b = g.constant(bias.clone(), &[3]);
                let y = g.conv2d(x, k, b, 1)?;
                project(g, y)
            }),
        ),
        (
            "conv2d stride 1 kernel",
            vec![3, 2, 3, 3],
            Box::new(|g, k| {
                let x = g.constant(data.clone(), &x_shape);
                let b = g.constant(bias.clone(), &[3]);
                let y = g.conv2d(x, k, b, 1)?;
                project(g, y)
            }),
        ),
        (
            "conv2d stride 2 input",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let k = g.constant(k4.clone(), &[3, 2, 4, 4]);
                let b = g.constant(bias.clone(), &[3]);
                let y = g.conv2d(x, k, b, 2)?;
                project(g, y)
            }),
        ),
        (
            "conv2d stride 2 kernel",
            vec![3, 2, 4, 4],
            Box::new(|g, k| {
                let x = g.constant(data.clone(), &x_shape);
                let b = g.constant(bias.clone(), &[3]);
                let y = g.conv2d(x, k, b, 2)?;
                project(g, y)
            }),
        ),
        (
            "conv2d bias",
            vec![3],
            Box::new(|g, b| {
                let x = g.constant(data.clone(), &x_shape);
                let k = g.constant(k4.clone(), &[3, 2, 4, 4]);
                let y = g.conv2d(x, k, b, 2)?;
                project(g, y)
            }),
        ),
        (
            "leaky_relu",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let y = g.leaky_relu(x, 0.2);
                project(g, y)
            }),
        ),
        (
            "batch_norm2d train input",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let gamma = g.constant(vec![1.3, 0.7], &[2]);
                let beta = g.constant(vec![0.1, -0.2], &[2]);
                bn(g, x, gamma, beta, BatchNormMode::Train)
            }),
        ),
        (
            "batch_norm2d frozen input",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let gamma = g.constant(vec![1.3, 0.7], &[2]);
                let beta = g.constant(vec![0.1, -0.2], &[2]);
                bn(g, x, gamma, beta, BatchNormMode::TrainFrozen)
            }),
        ),
        (
            "batch_norm2d eval input",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let gamma = g.constant(vec![1.3, 0.7], &[2]);
                let beta = g.constant(vec![0.1, -0.2], &[2]);
                bn(g, x, gamma, beta, BatchNormMode::Eval)
            }),
        ),
        (
            "batch_norm2d gamma",
            vec![2],
            Box::new(|g, gamma| {
                let x = g.constant(data.clone(), &x_shape);
                let beta = g.constant(vec![0.1, -0.2], &[2]);
                bn(g, x, gamma, beta, BatchNormMode::Train)
            }),
        ),
        (
            "batch_norm2d beta",
            vec![2],
            Box::new(|g, beta| {
                let x = g.constant(data.clone(), &x_shape);
                let gamma = g.constant(vec![1.3, 0.7], &[2]);
                bn(g, x, gamma, beta, BatchNormMode::Train)
            }),
        ),
        (
            "linear input",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let flat = g.reshape(x, &[2, 72])?;
                let w = g.constant(lin_w.clone(), &[3, 72]);
                let b = g.constant(bias.clone(), &[3]);
                let y = g.linear(flat, w, b)?;
                project(g, y)
            }),
        ),
        (
            "linear weight",
            vec![3, 72],
            Box::new(|g, w| {
                let x = g.constant(data.clone(), &[2, 72]);
                let b = g.constant(bias.clone(), &[3]);
                let y = g.linear(x, w, b)?;
                project(g, y)
            }),
        ),
        (
            "linear bias",
            vec![3],
            Box::new(|g, b| {
                let x = g.constant(data.clone(), &[2, 72]);
                let w = g.constant(lin_w.clone(), &[3, 72]);
                let y = g.linear(x, w, b)?;
                project(g, y)
            }),
        ),
        (
            "concat_channels",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let c = g.constant(other.clone(), &x_shape);
                let y = g.concat_channels(&[x, c, x])?;
                project(g, y)
            }),
        ),
        (
            "mse",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let t = g.constant(target.clone(), &x_shape);
                g.mse(x, t)
            }),
        ),
        (
            "add, sub and add_const",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let c = g.constant(other.clone(), &x_shape);
                let x = g.add_const(x, &target)?;
                let s = g.add(x, c)?;
                let d = g.sub(s, x)?;
                let y = g.sub(s, d)?;
                let y = g.add(y, x)?;
                project(g, y)
            }),
        ),
        (
            "scale_by",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let m = g.mean(x);
                let s = g.reshape(m, &[1])?;
                let y = g.scale_by(x, s)?;
                project(g, y)
            }),
        ),
        (
            "mul_const",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let y = g.mul_const(x, -1.7);
                project(g, y)
            }),
        ),
        (
            "mul_elem",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let y = g.mul_elem(x, factors.clone())?;
                project(g, y)
            }),
        ),
        (
            "complex_mul",
            vec![1, 2, 6, 6],
            Box::new(|g, x| {
                let y = g.complex_mul(x, field.clone(), false)?;
                project(g, y)
            }),
        ),
        (
            "complex_mul conjugate",
            vec![1, 2, 6, 6],
            Box::new(|g, x| {
                let y = g.complex_mul(x, field.clone(), true)?;
                project(g, y)
            }),
        ),
        (
            "fft2",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let y = g.fft2(x)?;
                project(g, y)
            }),
        ),
        (
            "ifft2",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let y = g.ifft2(x)?;
                project(g, y)
            }),
        ),
        (
            "magnitude",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let y = g.magnitude(x)?;
                project(g, y)
            }),
        ),
        (
            "sum and mean",
            x_shape.to_vec(),
            Box::new(|g, x| {
                let w = g.mul_elem(x, factors.clone())?;
                let sq = g.mse(w, x)?;
                let m = g.mean(w);
                let s = g.sum(x);
                let a = g.add(m, s)?;
                g.add(a, sq)
            }),
        ),
    ];
    cases
        .into_iter()
        .map(|(name, shape, f)| {
            let n: usize = shape.iter().product();
            (name, grad_check(f, &pool[..n], &shape, 1e-6).unwrap())
        })
        .collect()
}

/// Central differences of `loss` at `values[i]` for a few coordinates of
/// every parameter, compared with `analytic`.
fn sampled_param_error(
    params: &ParamSet<f64>,
    analytic: &[Vec<f64>],
    rng: &mut ChaCha8Rng,
    eps: f64,
    loss: impl Fn(&ParamSet<f64>) -> f64,
) -> ProbeSummary {
    let mut out = ProbeSummary::default();
    for (pi, p) in params.iter().enumerate() {
        for _ in 0..3 {
            let i = rng.random_range(0..p.data.len());
            let mut probe = params.clone();
            let q = probe.get_mut(&p.name).unwrap();
            q.data[i] += eps;
            let plus = loss(&probe);
            probe.get_mut(&p.name).unwrap().data[i] -= 2.0 * eps;
            let minus = loss(&probe);
            let (a, n) = (analytic[pi][i], (plus - minus) / (2.0 * eps));
            if a.abs().max(n.abs()) < ProbeSummary::ZERO_LIMIT {
                out.zeros += 1;
                out.zero_residual = out.zero_residual.max((a - n).abs());
                continue;
            }
            out.probes += 1;
            let err = relative_error(a, n);
            if err > out.worst {
                out.worst = err;
                out.at = format!("{}[{i}]", p.name);
            }
        }
    }
    out
}

/// Outcome of [`sampled_param_error`]. Entries where both gradients are
/// below the roundoff bound (biases in front of batch norm, the critic's
/// output bias) are scored by their absolute difference instead.
#[derive(Default)]
struct ProbeSummary {
    probes: usize,
    worst: f64,
    at: String,
    zeros: usize,
    zero_residual: f64,
}

impl ProbeSummary {
    /// Central-difference roundoff bound for an O(1) loss at step 1e-6.
    const ZERO_LIMIT: f64 = 1e-9;

    fn pass(&self) -> bool {
        self.worst < 1e-4 && self.zero_residual < Self::ZERO_LIMIT && self.probes > 0
    }

    fn describe(&self) -> String {
        format!(
            "{} probes worst {:.2e} at {}, {} zero entries within {:.1e}",
            self.probes, self.worst, self.at, self.zeros, self.zero_residual
        )
    }
}

#[test]
fn criterion_1_differentiation() {
    let start = Instant::now();
    let prims = primitive_errors();
    let (worst_prim, worst_prim_err) = prims
        .iter()
        .fold(("", 0.0f64), |acc, &(n, e)| if e > acc.1 { (n, e) } else { acc });

    let net = toy_net(16, [4, 4, 8, 8]);
    let mut params: ModelParams<f64> = init_params(&net, 7).unwrap();
    // Random shifts keep the flat background off the leaky-ReLU kinks.
    let mut shift_rng = ChaCha8Rng::seed_from_u64(9);
    for p in params.generator.iter_mut().chain(params.critic.iter_mut()) {
        if p.name.ends_with("bias") || p.name.ends_with("beta") {
            p.data.iter_mut().for_each(|v| *v = shift_rng.random_range(-0.1..0.1));
        }
    }
    let samples = samples_f64(&toy_spec(16, 2, 5));
    let batch = Batch::from_samples(&samples.iter().collect::<Vec<_>>()).unwrap();
    let cfg = TrainConfig::default();
    let agb = AgbState::new(AgbParams::default());
    let gen_loss = |p: &ParamSet<f64>| {
        let m = ModelParams {
            generator: p.clone(),
            ..params.clone()
        };
        let pass = GeneratorPass::run(&m, &net, &batch, true).unwrap();
        generator_gradients(&pass, &batch, &m, &agb, &net, &cfg).unwrap().loss
    };
    let pass = GeneratorPass::run(&params, &net, &batch, true).unwrap();
    let analytic = generator_gradients(&pass, &batch, &params, &agb, &net, &cfg)
        .unwrap()
        .grads;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let generator = sampled_param_error(&params.generator, &analytic, &mut rng, 1e-6, gen_loss);

    let fake = pass.images().to_vec();
    let critic_obj = |p: &ParamSet<f64>| {
        let m = ModelParams {
            critic: p.clone(),
            ..params.clone()
        };
        critic_gradients(&batch, &fake, &m, agb.beta, &net).unwrap().objective
    };
    let analytic = critic_gradients(&batch, &fake, &params, agb.beta, &net).unwrap().grads;
    let critic = sampled_param_error(&params.critic, &analytic, &mut rng, 1e-6, critic_obj);

    report(
        1,
        "differentiation",
        worst_prim_err < 1e-4 && generator.pass() && critic.pass(),
        format!(
            "{} primitive checks worst {worst_prim_err:.2e} ({worst_prim}); generator loss: {}; \
             critic objective: {}; limit 1e-4",
            prims.len(),
            generator.describe(),
            critic.describe()
        ),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_2_operator_algebra() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut unitary = 0.0f64;
    let mut inversion = 0.0f64;
    let mut adjoint = 0.0f64;
    let mut vs_reference = 0.0f64;
    for h in 1..=32 {
        for w in 1..=32 {
            let x = random_image(&mut rng, h, w);
            let y = random_image(&mut rng, h, w);
            let fx = fft2(&x);
            let n = x.norm_sqr();
            unitary = unitary.max((fx.norm_sqr() - n).abs() / n);
            inversion = inversion.max(max_abs_diff(&ifft2(&fx).to_planar(), &x.to_planar()));
            // <Fx, y> against <x, F*y>, complex inner products.
            let fty = ifft2(&y);
            let dot = |a: &ComplexImage<f64>, b: &ComplexImage<f64>| {
                let mut re = 0.0;
                let mut im = 0.0;
                for i in 0..a.re.len() {
                    re += a.re[i] * b.re[i] + a.im[i] * b.im[i];
                    im += a.im[i] * b.re[i] - a.re[i] * b.im[i];
                }
                (re, im)
            };
            let (l, r) = (dot(&fx, &y), dot(&x, &fty));
            adjoint = adjoint.max((l.0 - r.0).abs().max((l.1 - r.1).abs()));
            let reference = dft2_reference(&x, false).unwrap();
            vs_reference = vs_reference.max(max_abs_diff(&fx.to_planar(), &reference.to_planar()));
        }
    }
    let mut round_trip = 0.0f64;
    for seed in 0..20 {
        let m = gen_phantom(seed, 32, 32, 5).unwrap();
        let maps = gen_sensitivity_maps(seed, 4, 32, 32).unwrap();
        let back = reconstruct(&acquire(&m, &maps).unwrap(), &maps).unwrap();
        round_trip = round_trip.max(max_abs_diff(&back.to_planar(), &m.to_planar()));
    }
    report(
        2,
        "operator algebra",
        unitary < 1e-12 && inversion < 1e-12 && adjoint < 1e-10 && vs_reference < 1e-10 && round_trip < 1e-10,
        format!(
            "unitarity {unitary:.1e}, inversion {inversion:.1e}, adjoint {adjoint:.1e}, fft vs dft (1..=32)^2 \
             {vs_reference:.1e}, reconstruct after acquire {round_trip:.1e}"
        ),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_3_dc_fixed_point() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let coils = 1 + (i % 4) as usize;
        let m = gen_phantom(i, 32, 32, 4).unwrap();
        let maps = gen_sensitivity_maps(i, coils, 32, 32).unwrap();
        let mask = make_vds_mask(32, 32, 4, 4.0, i).unwrap();
        let sample = make_sample(&m, &maps, &mask).unwrap();
        let batch = Batch::from_samples(&[&sample]).unwrap();
        for lambda in [0.0, 0.5, 1.0] {
            let mut g = Graph::new();
            let x = g.constant(batch.m_f.clone(), &batch.image_shape());
            let l = g.constant(vec![lambda], &[1]);
            let out = dc_unit(&mut g, x, l, &batch).unwrap();
            worst = worst.max(max_abs_diff(g.value(out), &batch.m_f));
        }
    }
    report(
        3,
        "data-consistency fixed point",
        worst < 1e-8,
        format!("100 samples x lambda in {{0, 0.5, 1}}, max deviation {worst:.1e}"),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

#[derive(Default)]
struct Steps(Vec<StepEvent>);

impl TrainObserver<f32> for Steps {
    fn on_step(&mut self, e: &StepEvent) {
        self.0.push(*e);
    }
}

#[test]
fn criterion_4_training_mechanics() {
    let start = Instant::now();
    // The published critic widths on 32x32 images; narrower critics never
    // reach the balance threshold within 200 steps.
    let net = toy_net(32, [64, 128, 256, 512]);
    let cfg = TrainConfig {
        mode: Mode::CwganAgb,
        epochs: 50,
        batch_size: 2,
        seed: 3,
        agb: AgbParams {
            learning_rate: 5e-4,
            ..AgbParams::default()
        },
        embedder: Embedder::projection(2, 1),
        ..TrainConfig::default()
    };
    let data = gen_dataset(&toy_spec(32, 8, 11)).unwrap();
    let val = gen_dataset(&toy_spec(32, 3, 12)).unwrap();
    let mut steps = Steps::default();
    train(&net, &cfg, &data, &val, &mut steps).unwrap();
    let events = steps.0;
    let clip = AgbParams::default().clip;

    let worst_param = events.iter().map(|e| e.critic_max_abs).fold(0.0, f64::max);
    let clipped = worst_param <= clip;
    let mut prev = AgbParams::default().beta_init;
    let mut monotone = prev == 10.0;
    let mut exact = true;
    let mut balanced = true;
    let mut fired = 0;
    for e in &events {
        monotone &= e.beta >= prev;
        if e.beta != prev {
            exact &= (e.beta / prev - 1.1).abs() < 1e-12 && e.fired;
        }
        if e.fired {
            fired += 1;
            balanced &= e.g_ma <= 10.0 * e.p_ma;
        }
        prev = e.beta;
    }
    report(
        4,
        "training mechanics",
        events.len() == 200 && clipped && monotone && exact && balanced && fired > 0,
        format!(
            "{} steps; (a) max |critic param| {worst_param:.8} <= {clip}: {clipped}; (b) beta 10 -> {prev:.3} \
             non-decreasing: {monotone}, every increase x1.1: {exact}; (c) fired {fired} times, \
             g_ma <= 10 p_ma after each: {balanced}",
            events.len()
        ),
        start.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_5_frechet() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = FeatureMatrix::new(40, 6, rand_vec(&mut rng, 240)).unwrap();
    let b = FeatureMatrix::new(40, 6, rand_vec(&mut rng, 240).iter().map(|v| 2.0 * v + 0.5).collect()).unwrap();
    let same = frechet_distance(&a, &a).unwrap();
    let symmetry = (frechet_distance(&a, &b).unwrap() - frechet_distance(&b, &a).unwrap()).abs();

    // Two rows at mean ± 1/sqrt(2) have unbiased variance 1.
    let c = 0.5f64.sqrt();
    let p = FeatureMatrix::new(2, 1, vec![-c, c]).unwrap();
    let q = FeatureMatrix::new(2, 1, vec![1.0 - c, 1.0 + c]).unwrap();
    let one_d = frechet_distance(&p, &q).unwrap();

    // Rows ±s·e_i (2d rows) have zero mean and unbiased covariance
    // 2s²/(2d-1)·I.
    let d = 5usize;
    let axes = |scale: f64| {
        let s = scale * ((2 * d - 1) as f64 / 2.0).sqrt();
        let mut data = vec![0.0; 2 * d * d];
        for i in 0..d {
            data[(2 * i) * d + i] = s;
            data[(2 * i + 1) * d + i] = -s;
        }
        FeatureMatrix::new(2 * d, d, data).unwrap()
    };
    let multi = frechet_distance(&axes(1.0), &axes(2.0)).unwrap();

    let pass =
        same.abs() <= 1e-8 && symmetry <= 1e-8 && (one_d - 1.0).abs() <= 1e-8 && (multi - d as f64).abs() <= 1e-8;
    report(
        5,
        "Frechet distance",
        pass,
        format!(
            "identical {same:.1e}; 1-D means 0 vs 1 -> {one_d:.12}; {d}-D I vs 4I -> {multi:.12}; \
             symmetry gap {symmetry:.1e}"
        ),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

/// Generator parameters of every epoch, for picking the selected model
/// afterwards.
#[derive(Default)]
struct Snapshots {
    generators: Vec<(usize, ParamSet<f32>)>,
}

impl TrainObserver<f32> for Snapshots {
    fn on_epoch(&mut self, record: &EpochRecord, params: &ModelParams<f32>) {
        self.generators.push((record.epoch, params.generator.clone()));
    }
}

fn evidence_dir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
#[ignore = "long-running: three 200-epoch desk trainings"]
fn criterion_6_desk_reconstruction_quality() {
    let start = Instant::now();
    let train_set = gen_dataset(&DatasetSpec::desk(256, 1)).unwrap();
    let val = gen_dataset(&DatasetSpec::desk(32, 2)).unwrap();
    let test = gen_dataset(&DatasetSpec::desk(32, 3)).unwrap();
    let net = NetworkConfig::desk(4, 32, 32);
    let embedder = TrainConfig::default().embedder;
    let zero_filled = evaluate_zero_filled(&test, &embedder).unwrap().nmse_mean;
    let dir = evidence_dir("criterion6");
    let mut lines = Vec::new();
    let mut wins = 0;
    for seed in 0..3u64 {
        let cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let mut snaps = Snapshots::default();
        let state = train(&net, &cfg, &train_set, &val, &mut snaps).unwrap();
        write_metrics(&dir.join(format!("seed{seed}.csv")), &state.series).unwrap();
        let best = select_model(&state.series.nmse(), &state.series.fid(), 50).unwrap();
        let generator = snaps.generators.iter().find(|(e, _)| *e == best).unwrap().1.clone();
        let model = ModelParams {
            generator,
            ..state.params.clone()
        };
        let nmse = evaluate(&model, &net, &test, &embedder, cfg.batch_size)
            .unwrap()
            .nmse_mean;
        let ratio = zero_filled / nmse;
        if ratio >= 3.0 {
            wins += 1;
        }
        lines.push(format!(
            "seed {seed}: epoch {best} NMSE {nmse:.3} ratio {ratio:.2}, final beta {:.2}",
            state.agb.beta
        ));
    }
    report(
        6,
        "desk cwgan_agb vs zero-filled",
        wins >= 2,
        format!(
            "zero-filled NMSE {zero_filled:.3}; {}; {wins}/3 seeds reach ratio 3",
            lines.join("; ")
        ),
        start.elapsed(),
        Duration::from_secs(2 * 3600),
    );
}

fn first_epoch_at_or_below(series: &MetricSeries, target: f64) -> Option<usize> {
    series.records.iter().find(|r| r.nmse <= target).map(|r| r.epoch)
}

#[test]
#[ignore = "long-running: nine 100-epoch trainings"]
fn criterion_7_convergence_ordering() {
    let start = Instant::now();
    let train_set = gen_dataset(&DatasetSpec::desk(64, 21)).unwrap();
    let val = gen_dataset(&DatasetSpec::desk(32, 22)).unwrap();
    let net = NetworkConfig::desk(4, 32, 32);
    let dir = evidence_dir("criterion7");
    let mut lines = Vec::new();
    let mut wins = 0;
    let mut ties = 0;
    for seed in 0..3u64 {
        let run = |mode: Mode| {
            let cfg = TrainConfig {
                mode,
                epochs: 100,
                seed,
                ..TrainConfig::default()
            };
            let state = train(&net, &cfg, &train_set, &val, &mut ()).unwrap();
            write_metrics(&dir.join(format!("seed{seed}_{}.csv", mode.name())), &state.series).unwrap();
            state.series
        };
        let baseline = run(Mode::Baseline);
        let target = baseline.records[49].nmse;
        let agb = first_epoch_at_or_below(&run(Mode::CwganAgb), target);
        let plain = first_epoch_at_or_below(&run(Mode::Cwgan), target);
        let ok = match (agb, plain) {
            (Some(a), Some(p)) => a <= p,
            (Some(_), None) => true,
            (None, _) => false,
        };
        wins += usize::from(ok);
        ties += usize::from(ok && agb == plain);
        lines.push(format!(
            "seed {seed}: target {target:.3}, cwgan_agb {agb:?}, cwgan {plain:?}"
        ));
    }
    report(
        7,
        "convergence ordering",
        wins >= 2,
        format!(
            "{}; cwgan_agb no later than cwgan on {wins}/3 seeds ({ties} of them ties); CSVs in {}",
            lines.join("; "),
            dir.display()
        ),
        start.elapsed(),
        Duration::from_secs(4 * 3600),
    );
}

#[test]
fn criterion_8_model_selection() {
    let start = Instant::now();
    let fixture = select_model(
        &[(10, 3.0), (11, 2.0), (12, 1.0)],
        &[(10, 1.0), (11, 2.0), (12, 3.0)],
        10,
    )
    .unwrap();
    let fallback = select_model(&[(1, 5.0), (2, 5.0), (3, 5.0)], &[(1, 0.3), (2, 0.1), (3, 0.2)], 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut invariant = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..30);
        let nmse: Vec<(usize, f64)> = (0..n).map(|i| (i + 1, rng.random_range(0.0..10.0))).collect();
        let fid: Vec<(usize, f64)> = (0..n).map(|i| (i + 1, rng.random_range(0.0..50.0))).collect();
        let base = select_model(&nmse, &fid, 1).unwrap();
        let (dn, df) = (rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
        let moved_n: Vec<_> = nmse.iter().map(|&(e, v)| (e, v + dn)).collect();
        let moved_f: Vec<_> = fid.iter().map(|&(e, v)| (e, v + df)).collect();
        if select_model(&moved_n, &moved_f, 1).unwrap() == base {
            invariant += 1;
        }
    }
    report(
        8,
        "model selection",
        fixture == 10 && fallback == 2 && invariant == 100,
        format!("fixture -> epoch {fixture}; zero-std fallback -> epoch {fallback}; shift invariance {invariant}/100"),
        start.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_9_reproducibility() {
    let start = Instant::now();
    let pairs: Vec<String> = [
        "height=16",
        "width=16",
        "n_coils=2",
        "count=8",
        "val_count=3",
        "n_ellipses=3",
        "center_lines=2",
        "n_iterations=2",
        "growth=1",
        "kernels_per_conv=4",
        "kernel_size=3",
        "critic_widths=[4, 4, 8, 8]",
        "epochs=3",
        "batch_size=2",
        "embed_dim=2",
    ]
    .map(String::from)
    .to_vec();
    let cfg = ExperimentConfig::from_table(parse_overrides(&pairs).unwrap()).unwrap();
    let root = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let dir = root.path().join(name);
        std::fs::create_dir_all(&dir).unwrap();
        let data = dir.join("train.ds");
        commands::gen_data(&cfg, Split::Train, &data).unwrap();
        let out = dir.join("run");
        commands::train(&cfg, &data, None, &out, None).unwrap();
        let report = commands::eval(&out.join("best.json"), &data, false).unwrap();
        std::fs::write(dir.join("eval.json"), serde_json::to_string_pretty(&report).unwrap()).unwrap();
        commands::export_panel(&[out.join("best.json")], &data, 2, &dir.join("panel.pgm")).unwrap();
        dir
    };
    let (a, b) = (run("a"), run("b"));
    let files = [
        "train.ds",
        "run/config.toml",
        "run/metrics.csv",
        "run/final.json",
        "run/final.bin",
        "run/best.json",
        "run/best.bin",
        "run/snapshots/epoch_0002.bin",
        "eval.json",
        "panel.pgm",
        "panel.json",
    ];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap())
        .collect();
    report(
        9,
        "reproducibility",
        differing.is_empty(),
        format!(
            "{} artifacts compared byte for byte, differing: {differing:?}",
            files.len()
        ),
        start.elapsed(),
        Duration::from_secs(60),
    );
}
