//! The command-line operations, as library functions.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{gen_dataset, TrainingSample};
use crate::autodiff::ParamSet;
use crate::error::{Error, Result};
use crate::io::{
    read_dataset, write_dataset, write_metrics, write_panel, Checkpoint, CheckpointKind, ExperimentConfig, PanelEntry,
    PanelSidecar,
};
use crate::metrics::{nmse, select_model};
use crate::networks::{ModelParams, NetworkConfig};
use crate::training::{evaluate, evaluate_zero_filled, resume, EpochRecord, TrainConfig, TrainObserver, TrainState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenDataReport {
    pub count: usize,
    pub mean_acceleration: f64,
}

/// Writes the training split (`count` samples from `data_seed`) or the
/// validation split (`val_count` samples from `data_seed + 1`).
pub fn gen_data(cfg: &ExperimentConfig, split: Split, out: &Path) -> Result<GenDataReport> {
    let spec = match split {
        Split::Train => cfg.dataset_spec(cfg.count, cfg.data_seed),
        Split::Val => cfg.dataset_spec(cfg.val_count, cfg.data_seed.wrapping_add(1)),
    };
    let samples = gen_dataset(&spec)?;
    write_dataset(out, &spec, &samples)?;
    let mean_acceleration = samples.iter().map(|s| s.mask.achieved_acceleration()).sum::<f64>() / samples.len() as f64;
    Ok(GenDataReport {
        count: samples.len(),
        mean_acceleration,
    })
}

fn check_dims(samples: &[TrainingSample<f32>], net: &NetworkConfig) -> Result<()> {
    let g = &net.generator;
    match samples.first() {
        None => Err(Error::Data("dataset is empty".into())),
        Some(s) if s.dims() != (g.height, g.width) || s.n_coils() != g.n_coils => Err(Error::Data(format!(
            "dataset is {}x{} with {} coils, model expects {}x{} with {}",
            s.dims().0,
            s.dims().1,
            s.n_coils(),
            g.height,
            g.width,
            g.n_coils
        ))),
        Some(_) => Ok(()),
    }
}

fn snapshot_path(out_dir: &Path, epoch: usize) -> PathBuf {
    out_dir.join("snapshots").join(format!("epoch_{epoch:04}.json"))
}

struct Recorder<'a> {
    out_dir: &'a Path,
    net: &'a NetworkConfig,
    train: &'a TrainConfig,
    error: Option<Error>,
}

impl TrainObserver<f32> for Recorder<'_> {
    fn on_epoch(&mut self, record: &EpochRecord, params: &ModelParams<f32>) {
        if self.error.is_some() {
            return;
        }
        let state = TrainState {
            epoch: record.epoch,
            step: 0,
            params: params.clone(),
            gen_opt: crate::autodiff::AdamState::new(&params.generator),
            critic_opt: crate::autodiff::AdamState::new(&params.critic),
            agb: self.train.initial_agb(),
            series: Default::default(),
        };
        let ckpt = Checkpoint::from_state(&state, self.net, self.train, CheckpointKind::Model);
        if let Err(e) = ckpt.write(&snapshot_path(self.out_dir, record.epoch)) {
            self.error = Some(e);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub best_epoch: usize,
    pub final_nmse: f64,
    pub final_fid: f64,
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    error: String,
    epoch: usize,
    step: u64,
    beta: f64,
    g_ma: f64,
    p_ma: f64,
    config: &'a ExperimentConfig,
}

type Samples = Vec<TrainingSample<f32>>;

/// Validation samples: the given file, or the last `val_count` training
/// samples held out.
fn split_data(
    cfg: &ExperimentConfig,
    data: Vec<TrainingSample<f32>>,
    val: Option<&Path>,
) -> Result<(Samples, Samples)> {
    match val {
        Some(p) => Ok((data, read_dataset(p)?.1)),
        None => {
            if data.len() <= cfg.val_count {
                return Err(Error::Data(format!(
                    "cannot hold out {} validation samples from {}",
                    cfg.val_count,
                    data.len()
                )));
            }
            let mut data = data;
            let val = data.split_off(data.len() - cfg.val_count);
            Ok((data, val))
        }
    }
}

/// Trains (or resumes), writing into `out_dir`: the resolved
/// `config.toml`, `metrics.csv`, per-epoch generator snapshots, the full
/// `final` checkpoint and the `best` checkpoint chosen by model selection.
pub fn train(
    cfg: &ExperimentConfig,
    data: &Path,
    val: Option<&Path>,
    out_dir: &Path,
    resume_from: Option<&Path>,
) -> Result<TrainReport> {
    let net = cfg.network();
    let train_cfg = cfg.train();
    let (_, samples) = read_dataset(data)?;
    check_dims(&samples, &net)?;
    let (samples, val_samples) = split_data(cfg, samples, val)?;
    check_dims(&val_samples, &net)?;

    fs::create_dir_all(out_dir.join("snapshots"))?;
    fs::write(out_dir.join("config.toml"), cfg.to_toml())?;

    let state = match resume_from {
        Some(p) => {
            let ckpt = Checkpoint::read(p)?;
            if ckpt.manifest.network != net {
                return Err(Error::Config(
                    "resume checkpoint was trained with a different network".into(),
                ));
            }
            ckpt.train_state()?
        }
        None => TrainState::new(&net, &train_cfg)?,
    };
    let mut recorder = Recorder {
        out_dir,
        net: &net,
        train: &train_cfg,
        error: None,
    };
    let state = match resume(state, &net, &train_cfg, &samples, &val_samples, &mut recorder) {
        Ok(s) => s,
        Err(e) => {
            if let Error::NonFinite { epoch, step, state } = &e {
                let diag = Diagnostic {
                    error: e.to_string(),
                    epoch: *epoch,
                    step: *step,
                    beta: state.beta,
                    g_ma: state.g_ma,
                    p_ma: state.p_ma,
                    config: cfg,
                };
                let json = serde_json::to_string_pretty(&diag).expect("diagnostic serializes");
                fs::write(out_dir.join("diagnostic.json"), json + "\n")?;
            }
            return Err(e);
        }
    };
    if let Some(e) = recorder.error {
        return Err(e);
    }
    write_metrics(&out_dir.join("metrics.csv"), &state.series)?;
    Checkpoint::from_state(&state, &net, &train_cfg, CheckpointKind::Training).write(&out_dir.join("final.json"))?;

    let best_epoch = best_epoch(&state.series.records, cfg.selection_start)?;
    let best = Checkpoint::read(&snapshot_path(out_dir, best_epoch))?;
    best.write(&out_dir.join("best.json"))?;
    let last = state.series.records.last().ok_or(Error::Empty("metric series"))?;
    Ok(TrainReport {
        epochs: state.epoch,
        best_epoch,
        final_nmse: last.nmse,
        final_fid: last.fid,
    })
}

/// Model selection from `start`, falling back to every epoch when fewer
/// than two epochs are past it.
pub fn best_epoch(records: &[EpochRecord], start: usize) -> Result<usize> {
    let nmse: Vec<_> = records.iter().map(|r| (r.epoch, r.nmse)).collect();
    let fid: Vec<_> = records.iter().map(|r| (r.epoch, r.fid)).collect();
    match records.len() {
        0 => Err(Error::Empty("metric series")),
        1 => Ok(records[0].epoch),
        _ if records.iter().filter(|r| r.epoch >= start).count() >= 2 => select_model(&nmse, &fid, start),
        _ => select_model(&nmse, &fid, 0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub nmse_mean: f64,
    pub fid: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    pub zero_filled: Summary,
    pub model: Summary,
    pub model_nmse: Vec<f64>,
}

/// Last two path components, so labels do not depend on where a run lives.
fn panel_label(path: &Path) -> String {
    let parts: Vec<_> = path.components().rev().take(2).collect();
    parts
        .iter()
        .rev()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn model_from(ckpt: &Checkpoint) -> Result<ModelParams<f32>> {
    Ok(ModelParams {
        generator: ckpt.generator()?,
        critic: ParamSet::new(),
        bn_stats: Vec::new(),
    })
}

/// NMSE and Fréchet distance of the zero-filled images and of the model
/// over a dataset. With `identity`, the model row scores the ground truth
/// against itself.
pub fn eval(checkpoint: &Path, data: &Path, identity: bool) -> Result<EvalReport> {
    let ckpt = Checkpoint::read(checkpoint)?;
    let net = &ckpt.manifest.network;
    let train = &ckpt.manifest.train;
    let (_, samples) = read_dataset(data)?;
    check_dims(&samples, net)?;
    let zf = evaluate_zero_filled(&samples, &train.embedder)?;
    let model = if identity {
        let truth: Vec<TrainingSample<f32>> = samples
            .iter()
            .map(|s| TrainingSample {
                m_z: s.m_f.clone(),
                ..s.clone()
            })
            .collect();
        evaluate_zero_filled(&truth, &train.embedder)?
    } else {
        evaluate(&model_from(&ckpt)?, net, &samples, &train.embedder, train.batch_size)?
    };
    Ok(EvalReport {
        count: samples.len(),
        zero_filled: Summary {
            nmse_mean: zf.nmse_mean,
            fid: zf.fid,
        },
        model: Summary {
            nmse_mean: model.nmse_mean,
            fid: model.fid,
        },
        model_nmse: model.nmse,
    })
}

/// Ground truth, zero-filled image and one reconstruction per checkpoint,
/// side by side, all scaled by the ground-truth peak magnitude.
pub fn export_panel(checkpoints: &[PathBuf], data: &Path, index: usize, out: &Path) -> Result<PanelSidecar> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidArgument("at least one checkpoint is required".into()));
    }
    let (_, samples) = read_dataset(data)?;
    let sample = samples.get(index).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "sample index {index} out of range for {} samples",
            samples.len()
        ))
    })?;
    let mut images = vec![sample.m_f.clone(), sample.m_z.clone()];
    let mut panels = vec![
        PanelEntry {
            label: "ground_truth".into(),
            nmse: 0.0,
        },
        PanelEntry {
            label: "zero_filled".into(),
            nmse: nmse(&sample.m_z, &sample.m_f)?,
        },
    ];
    for path in checkpoints {
        let ckpt = Checkpoint::read(path)?;
        check_dims(std::slice::from_ref(sample), &ckpt.manifest.network)?;
        let batch = crate::networks::Batch::from_samples(&[sample])?;
        let pass = crate::training::GeneratorPass::run(&model_from(&ckpt)?, &ckpt.manifest.network, &batch, false)?;
        let (h, w) = sample.dims();
        let img = crate::fourier::ComplexImage::from_planar(h, w, pass.images())?;
        panels.push(PanelEntry {
            label: panel_label(path),
            nmse: nmse(&img, &sample.m_f)?,
        });
        images.push(img);
    }
    let scale = sample.m_f.magnitude().into_iter().fold(0.0f32, f32::max) as f64;
    let sidecar = PanelSidecar {
        sample_index: index,
        scale,
        panels,
    };
    write_panel(out, &images, &sidecar)?;
    Ok(sidecar)
}
