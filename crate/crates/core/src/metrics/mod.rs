//! Reconstruction error, Fréchet distance between feature populations, and
//! the normalized-sum model selection rule.

mod embed;
mod frechet;
mod select;

use crate::error::{Error, Result};
use crate::fourier::ComplexImage;
use crate::real::Real;

pub use embed::{embed, Embedder, EmbedderKind, FeatureMatrix};
pub use frechet::{frechet_distance, sqrtm_psd};
pub use select::select_model;

/// `100 · ‖m_g − m_f‖² / ‖m_f‖²` over real and imaginary parts.
pub fn nmse<T: Real>(m_g: &ComplexImage<T>, m_f: &ComplexImage<T>) -> Result<f64> {
    if !m_g.same_dims(m_f) {
        return Err(Error::shape(
            "nmse",
            format!("{}x{} vs {}x{}", m_g.height, m_g.width, m_f.height, m_f.width),
        ));
    }
    let reference = m_f.norm_sqr().to_f64_lossy();
    if reference == 0.0 {
        return Err(Error::InvalidArgument("nmse reference image has zero norm".into()));
    }
    let err: f64 = m_g
        .re
        .iter()
        .chain(&m_g.im)
        .zip(m_f.re.iter().chain(&m_f.im))
        .map(|(&a, &b)| (a.to_f64_lossy() - b.to_f64_lossy()).powi(2))
        .sum();
    Ok(100.0 * err / reference)
}
