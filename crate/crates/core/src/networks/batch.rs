use crate::acquisition::TrainingSample;
use crate::error::{Error, Result};
use crate::real::Real;

/// A minibatch of training samples laid out as `[B,2,H,W]` planes, with the
/// per-coil constants the data-consistency unit needs.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T> {
    pub size: usize,
    pub height: usize,
    pub width: usize,
    pub m_z: Vec<T>,
    pub m_f: Vec<T>,
    /// Per coil: sensitivity maps of every item.
    pub maps: Vec<Vec<T>>,
    /// Per coil: negated acquired k-space of every item.
    pub neg_k_u: Vec<Vec<T>>,
    /// Sampling mask of every item, repeated on both channels.
    pub mask: Vec<T>,
}

impl<T: Real> Batch<T> {
    pub fn from_samples(samples: &[&TrainingSample<T>]) -> Result<Self> {
        let first = samples.first().ok_or(Error::Empty("batch"))?;
        let (height, width) = first.dims();
        let n_coils = first.n_coils();
        if samples
            .iter()
            .any(|s| s.dims() != (height, width) || s.n_coils() != n_coils)
        {
            return Err(Error::shape("batch", "samples differ in size or coil count"));
        }
        let mut batch = Self {
            size: samples.len(),
            height,
            width,
            m_z: Vec::new(),
            m_f: Vec::new(),
            maps: vec![Vec::new(); n_coils],
            neg_k_u: vec![Vec::new(); n_coils],
            mask: Vec::new(),
        };
        for s in samples {
            batch.m_z.extend(s.m_z.to_planar());
            batch.m_f.extend(s.m_f.to_planar());
            for c in 0..n_coils {
                batch.maps[c].extend(s.maps.maps[c].to_planar());
                batch.neg_k_u[c].extend(s.k_u.coils[c].to_planar().into_iter().map(|v| -v));
            }
            let m = s.mask.dense::<T>();
            batch.mask.extend_from_slice(&m);
            batch.mask.extend_from_slice(&m);
        }
        Ok(batch)
    }

    pub fn n_coils(&self) -> usize {
        self.maps.len()
    }

    pub fn image_shape(&self) -> [usize; 4] {
        [self.size, 2, self.height, self.width]
    }
}
