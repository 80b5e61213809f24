use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{push_f32s, take_f32s};
use crate::autodiff::{AdamConfig, AdamState, ParamSet, RunningStats};
use crate::error::{Error, Result};
use crate::networks::{ModelParams, NetworkConfig};
use crate::training::{AgbState, MetricSeries, TrainConfig, TrainState};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointKind {
    /// Generator parameters only.
    Model,
    /// Complete training state, resumable.
    Training,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the blob, in floats.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub kind: CheckpointKind,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub epoch: usize,
    pub step: u64,
    pub agb: AgbState,
    pub adam: AdamConfig,
    pub gen_adam_step: u64,
    pub critic_adam_step: u64,
    pub bn_momentum: f32,
    pub series: MetricSeries,
    pub tensors: Vec<TensorEntry>,
}

/// A JSON manifest plus one flat blob of little-endian `f32`, stored side
/// by side as `<name>.json` and `<name>.bin`.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub blob: Vec<f32>,
}

fn blob_path(path: &Path) -> PathBuf {
    path.with_extension("bin")
}

struct Builder {
    entries: Vec<TensorEntry>,
    blob: Vec<f32>,
}

impl Builder {
    fn add(&mut self, name: String, shape: &[usize], data: &[f32]) {
        self.entries.push(TensorEntry {
            name,
            shape: shape.to_vec(),
            offset: self.blob.len(),
        });
        self.blob.extend_from_slice(data);
    }

    fn params(&mut self, prefix: &str, p: &ParamSet<f32>) {
        for q in p.iter() {
            self.add(format!("{prefix}{}", q.name), &q.shape, &q.data);
        }
    }

    fn moments(&mut self, prefix: &str, p: &ParamSet<f32>, adam: &AdamState<f32>) {
        for ((q, m), v) in p.iter().zip(&adam.first).zip(&adam.second) {
            self.add(format!("{prefix}.m.{}", q.name), &q.shape, m);
            self.add(format!("{prefix}.v.{}", q.name), &q.shape, v);
        }
    }
}

impl Checkpoint {
    pub fn from_state(state: &TrainState<f32>, net: &NetworkConfig, train: &TrainConfig, kind: CheckpointKind) -> Self {
        let mut b = Builder {
            entries: Vec::new(),
            blob: Vec::new(),
        };
        b.params("", &state.params.generator);
        if kind == CheckpointKind::Training {
            b.params("", &state.params.critic);
            for (j, s) in state.params.bn_stats.iter().enumerate() {
                b.add(format!("critic.bn{j}.running_mean"), &[s.mean.len()], &s.mean);
                b.add(format!("critic.bn{j}.running_var"), &[s.var.len()], &s.var);
            }
            b.moments("adam.gen", &state.params.generator, &state.gen_opt);
            b.moments("adam.critic", &state.params.critic, &state.critic_opt);
        }
        let momentum = state.params.bn_stats.first().map_or(0.9, |s| s.momentum);
        Self {
            manifest: Manifest {
                version: CHECKPOINT_VERSION,
                kind,
                network: net.clone(),
                train: train.clone(),
                epoch: state.epoch,
                step: state.step,
                agb: state.agb,
                adam: state.gen_opt.config,
                gen_adam_step: state.gen_opt.step,
                critic_adam_step: state.critic_opt.step,
                bn_momentum: momentum,
                series: state.series.clone(),
                tensors: b.entries,
            },
            blob: b.blob,
        }
    }

    pub fn tensor(&self, name: &str) -> Result<&[f32]> {
        let e = self
            .manifest
            .tensors
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Data(format!("checkpoint has no tensor {name}")))?;
        let n: usize = e.shape.iter().product();
        self.blob
            .get(e.offset..e.offset + n)
            .ok_or_else(|| Error::Data(format!("tensor {name} overruns the blob")))
    }

    fn param_set(&self, template: &ParamSet<f32>, prefix: &str) -> Result<ParamSet<f32>> {
        let mut out = ParamSet::new();
        for q in template.iter() {
            out.insert(
                q.name.clone(),
                &q.shape,
                self.tensor(&format!("{prefix}{}", q.name))?.to_vec(),
            )
            .map_err(|e| Error::Data(e.to_string()))?;
        }
        Ok(out)
    }

    fn templates(&self) -> Result<ModelParams<f32>> {
        crate::networks::init_params(&self.manifest.network, 0).map_err(|e| Error::Data(e.to_string()))
    }

    /// Generator parameters, shaped by the stored network configuration.
    pub fn generator(&self) -> Result<ParamSet<f32>> {
        self.param_set(&self.templates()?.generator, "")
    }

    /// Full training state; fails on model-only checkpoints.
    pub fn train_state(&self) -> Result<TrainState<f32>> {
        if self.manifest.kind != CheckpointKind::Training {
            return Err(Error::Data("model-only checkpoint cannot resume training".into()));
        }
        let t = self.templates()?;
        let generator = self.param_set(&t.generator, "")?;
        let critic = self.param_set(&t.critic, "")?;
        let bn_stats = (0..t.bn_stats.len())
            .map(|j| {
                Ok(RunningStats {
                    mean: self.tensor(&format!("critic.bn{j}.running_mean"))?.to_vec(),
                    var: self.tensor(&format!("critic.bn{j}.running_var"))?.to_vec(),
                    momentum: self.manifest.bn_momentum,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let adam = |prefix: &str, p: &ParamSet<f32>, step: u64| -> Result<AdamState<f32>> {
            let mut s = AdamState::with_config(p, self.manifest.adam);
            for (i, q) in p.iter().enumerate() {
                s.first[i] = self.tensor(&format!("{prefix}.m.{}", q.name))?.to_vec();
                s.second[i] = self.tensor(&format!("{prefix}.v.{}", q.name))?.to_vec();
            }
            s.step = step;
            Ok(s)
        };
        Ok(TrainState {
            epoch: self.manifest.epoch,
            step: self.manifest.step,
            gen_opt: adam("adam.gen", &generator, self.manifest.gen_adam_step)?,
            critic_opt: adam("adam.critic", &critic, self.manifest.critic_adam_step)?,
            params: ModelParams {
                generator,
                critic,
                bn_stats,
            },
            agb: self.manifest.agb,
            series: self.manifest.series.clone(),
        })
    }

    /// Writes `path` (manifest) and its `.bin` sibling (blob).
    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(path, json + "\n")?;
        let mut bytes = Vec::with_capacity(4 * self.blob.len());
        push_f32s(&mut bytes, self.blob.iter().copied());
        let mut f = File::create(blob_path(path))?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Data(format!("bad checkpoint manifest: {e}")))?;
        if manifest.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!(
                "unsupported checkpoint version {}",
                manifest.version
            )));
        }
        let bin = blob_path(path);
        let len = fs::metadata(&bin)?.len() as usize;
        if !len.is_multiple_of(4) {
            return Err(Error::Data("checkpoint blob is not a whole number of floats".into()));
        }
        let blob = take_f32s(&mut BufReader::new(File::open(&bin)?), len / 4)?;
        let ckpt = Self { manifest, blob };
        for e in &ckpt.manifest.tensors {
            ckpt.tensor(&e.name)?;
        }
        Ok(ckpt)
    }
}
