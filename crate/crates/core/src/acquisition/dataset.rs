use serde::{Deserialize, Serialize};

use super::{acquire, gen_phantom, gen_sensitivity_maps, make_vds_mask, undersample, TrainingSample};
use crate::error::{Error, Result};

/// Parameters of a synthetic dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub height: usize,
    pub width: usize,
    pub n_coils: usize,
    pub acceleration: f64,
    pub center_lines: usize,
    pub count: usize,
    pub seed: u64,
    pub n_ellipses: usize,
}

impl DatasetSpec {
    /// 32×32 images, 4 coils, R = 4 with 4 central lines.
    pub fn desk(count: usize, seed: u64) -> Self {
        Self {
            height: 32,
            width: 32,
            n_coils: 4,
            acceleration: 4.0,
            center_lines: 4,
            count,
            seed,
            n_ellipses: 5,
        }
    }

    /// Seed of sample `index`; phantom, coils and mask draw from separate
    /// streams of it.
    pub fn sample_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_mul(0x100_0000_01B3).wrapping_add(index as u64)
    }
}

/// Generates `spec.count` samples, each with its own phantom, coil maps and
/// sampling mask. Images are simulated in 64-bit and stored in 32-bit;
/// the zero-filled image is computed from the stored values.
pub fn gen_dataset(spec: &DatasetSpec) -> Result<Vec<TrainingSample<f32>>> {
    if spec.count == 0 {
        return Err(Error::Config("dataset count must be positive".into()));
    }
    (0..spec.count)
        .map(|i| {
            let s = spec.sample_seed(i);
            let m_f = gen_phantom(s, spec.height, spec.width, spec.n_ellipses)?;
            let maps = gen_sensitivity_maps(s, spec.n_coils, spec.height, spec.width)?;
            let mask = make_vds_mask(spec.height, spec.width, spec.center_lines, spec.acceleration, s)?;
            let k_u = undersample(&acquire(&m_f, &maps)?, &mask)?;
            TrainingSample::from_parts(m_f.cast(), maps.cast(), mask, k_u.cast())
        })
        .collect()
}
