//! Simulated multi-coil Cartesian acquisition.
//!
//! Coil `i` measures `kᵢ = F(sᵢ ⊙ m)`; undersampling keeps whole
//! phase-encode lines (`K_u = M ⊙ K`); coil combination is
//! `R(K, S) = Σ conj(sᵢ) ⊙ F⁻¹(kᵢ)`, which inverts acquisition exactly when
//! the maps have unit sum of squares.

mod augment;
mod coils;
mod dataset;
mod mask;
mod phantom;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{fft2, ifft2, ComplexImage};
use crate::real::Real;

pub use augment::{augment, flip_horizontal, flip_rotate, rotate, MAX_ROTATION_DEG};
pub use coils::gen_sensitivity_maps;
pub use dataset::{gen_dataset, DatasetSpec};
pub use mask::{make_vds_mask, SamplingMask};
pub use phantom::gen_phantom;
pub(crate) use phantom::normalized;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityMaps<T> {
    pub maps: Vec<ComplexImage<T>>,
}

impl<T: Real> SensitivityMaps<T> {
    pub fn new(maps: Vec<ComplexImage<T>>) -> Result<Self> {
        let first = maps.first().ok_or(Error::Empty("SensitivityMaps"))?;
        if maps.iter().any(|m| !m.same_dims(first)) {
            return Err(Error::shape("SensitivityMaps", "coil maps differ in size"));
        }
        Ok(Self { maps })
    }

    /// Uniform single-coil map (`s ≡ 1`).
    pub fn uniform(height: usize, width: usize) -> Self {
        let n = height * width;
        Self {
            maps: vec![ComplexImage {
                height,
                width,
                re: vec![T::one(); n],
                im: vec![T::zero(); n],
            }],
        }
    }

    pub fn n_coils(&self) -> usize {
        self.maps.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.maps[0].height, self.maps[0].width)
    }

    /// Largest deviation of `Σ|sᵢ|²` from 1 over all pixels.
    pub fn sos_deviation(&self) -> f64 {
        let n = self.maps[0].len();
        (0..n)
            .map(|p| {
                let s: f64 = self
                    .maps
                    .iter()
                    .map(|m| (m.re[p] * m.re[p] + m.im[p] * m.im[p]).to_f64_lossy())
                    .sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn cast<U: Real>(&self) -> SensitivityMaps<U> {
        SensitivityMaps {
            maps: self.maps.iter().map(ComplexImage::cast).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSpaceData<T> {
    pub coils: Vec<ComplexImage<T>>,
}

impl<T: Real> KSpaceData<T> {
    pub fn n_coils(&self) -> usize {
        self.coils.len()
    }

    pub fn scale(&self, a: T) -> Self {
        Self {
            coils: self.coils.iter().map(|c| c.scale(a)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> KSpaceData<U> {
        KSpaceData {
            coils: self.coils.iter().map(ComplexImage::cast).collect(),
        }
    }
}

/// Fully sampled image paired with its undersampled multi-coil
/// measurement and zero-filled reconstruction.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample<T> {
    pub m_f: ComplexImage<T>,
    pub k_u: KSpaceData<T>,
    pub mask: SamplingMask,
    pub maps: SensitivityMaps<T>,
    pub m_z: ComplexImage<T>,
}

impl<T: Real> TrainingSample<T> {
    /// Rebuilds a sample from stored parts; `m_z` is recomputed.
    pub fn from_parts(
        m_f: ComplexImage<T>,
        maps: SensitivityMaps<T>,
        mask: SamplingMask,
        k_u: KSpaceData<T>,
    ) -> Result<Self> {
        let m_z = reconstruct(&k_u, &maps)?;
        Ok(Self {
            m_f,
            k_u,
            mask,
            maps,
            m_z,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m_f.height, self.m_f.width)
    }

    pub fn n_coils(&self) -> usize {
        self.maps.n_coils()
    }

    pub fn cast<U: Real>(&self) -> TrainingSample<U> {
        TrainingSample {
            m_f: self.m_f.cast(),
            k_u: self.k_u.cast(),
            mask: self.mask.clone(),
            maps: self.maps.cast(),
            m_z: self.m_z.cast(),
        }
    }
}

fn complex_mul<T: Real>(a: &ComplexImage<T>, b: &ComplexImage<T>, conj_b: bool) -> ComplexImage<T> {
    let mut out = ComplexImage::zeros(a.height, a.width);
    for p in 0..a.len() {
        let (ar, ai) = (a.re[p], a.im[p]);
        let br = b.re[p];
        let bi = if conj_b { -b.im[p] } else { b.im[p] };
        out.re[p] = ar * br - ai * bi;
        out.im[p] = ar * bi + ai * br;
    }
    out
}

/// Per-coil k-space `kᵢ = F(sᵢ ⊙ m)`.
pub fn acquire<T: Real>(m: &ComplexImage<T>, maps: &SensitivityMaps<T>) -> Result<KSpaceData<T>> {
    if !m.same_dims(&maps.maps[0]) {
        return Err(Error::shape(
            "acquire",
            format!("image {}x{} vs maps {:?}", m.height, m.width, maps.dims()),
        ));
    }
    Ok(KSpaceData {
        coils: maps.maps.iter().map(|s| fft2(&complex_mul(m, s, false))).collect(),
    })
}

/// `K_u = M ⊙ K` on every coil.
pub fn undersample<T: Real>(k: &KSpaceData<T>, mask: &SamplingMask) -> Result<KSpaceData<T>> {
    let coils = k
        .coils
        .iter()
        .map(|c| {
            if (c.height, c.width) != (mask.height, mask.width) {
                return Err(Error::shape(
                    "undersample",
                    format!(
                        "k-space {}x{} vs mask {}x{}",
                        c.height, c.width, mask.height, mask.width
                    ),
                ));
            }
            let mut out = c.clone();
            for y in 0..c.height {
                for x in 0..c.width {
                    if !mask.is_sampled(y, x) {
                        out.re[y * c.width + x] = T::zero();
                        out.im[y * c.width + x] = T::zero();
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KSpaceData { coils })
}

/// Coil combination `Σ conj(sᵢ) ⊙ F⁻¹(kᵢ)`.
pub fn reconstruct<T: Real>(k: &KSpaceData<T>, maps: &SensitivityMaps<T>) -> Result<ComplexImage<T>> {
    if k.n_coils() != maps.n_coils() {
        return Err(Error::shape(
            "reconstruct",
            format!("{} k-space coils vs {} maps", k.n_coils(), maps.n_coils()),
        ));
    }
    let (h, w) = maps.dims();
    let mut out = ComplexImage::zeros(h, w);
    for (kc, s) in k.coils.iter().zip(&maps.maps) {
        if !kc.same_dims(s) {
            return Err(Error::shape("reconstruct", "coil k-space and map sizes differ"));
        }
        let term = complex_mul(&ifft2(kc), s, true);
        for p in 0..out.len() {
            out.re[p] += term.re[p];
            out.im[p] += term.im[p];
        }
    }
    Ok(out)
}

/// Acquire, undersample and zero-fill one ground-truth image.
pub fn make_sample<T: Real>(
    m_f: &ComplexImage<T>,
    maps: &SensitivityMaps<T>,
    mask: &SamplingMask,
) -> Result<TrainingSample<T>> {
    let k = acquire(m_f, maps)?;
    let k_u = undersample(&k, mask)?;
    TrainingSample::from_parts(m_f.clone(), maps.clone(), mask.clone(), k_u)
}
