//! File formats: datasets, checkpoints, experiment configuration, metric
//! CSVs and image panels.

mod checkpoint;
mod config;
mod dataset;
mod metrics_csv;
mod panel;

use std::io::Read;

pub use checkpoint::{Checkpoint, CheckpointKind, Manifest, TensorEntry};
pub use config::{parse_overrides, ExperimentConfig, CONFIG_VERSION};
pub use dataset::{read_dataset, write_dataset, DatasetHeader, DATASET_VERSION};
pub use metrics_csv::{read_metrics, write_metrics, METRICS_HEADER};
pub use panel::{write_panel, PanelEntry, PanelSidecar};

use crate::error::{Error, Result};

pub(crate) fn push_f32s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f32>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn take_f32s(src: &mut impl Read, n: usize) -> Result<Vec<f32>> {
    let mut buf = vec![0u8; 4 * n];
    src.read_exact(&mut buf)
        .map_err(|e| Error::Data(format!("truncated float payload: {e}")))?;
    Ok(buf
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}
