use super::GeneratorPass;
use crate::acquisition::TrainingSample;
use crate::error::{Error, Result};
use crate::fourier::ComplexImage;
use crate::metrics::{embed, frechet_distance, nmse, Embedder};
use crate::networks::{Batch, ModelParams, NetworkConfig};
use crate::real::Real;

/// NMSE per image, its mean, and the Fréchet distance between embeddings
/// of the reconstructions and of the ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation<T> {
    pub nmse: Vec<f64>,
    pub nmse_mean: f64,
    pub fid: f64,
    pub images: Vec<ComplexImage<T>>,
}

fn score<T: Real>(samples: &[TrainingSample<T>], images: Vec<ComplexImage<T>>, e: &Embedder) -> Result<Evaluation<T>> {
    let nmse = samples
        .iter()
        .zip(&images)
        .map(|(s, m)| nmse(m, &s.m_f))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<ComplexImage<T>> = samples.iter().map(|s| s.m_f.clone()).collect();
    let fid = frechet_distance(&embed(&images, e)?, &embed(&truth, e)?)?;
    Ok(Evaluation {
        nmse_mean: nmse.iter().sum::<f64>() / nmse.len() as f64,
        nmse,
        fid,
        images,
    })
}

pub fn evaluate<T: Real>(
    params: &ModelParams<T>,
    net: &NetworkConfig,
    samples: &[TrainingSample<T>],
    embedder: &Embedder,
    batch_size: usize,
) -> Result<Evaluation<T>> {
    if samples.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let (h, w) = samples[0].dims();
    let mut images = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size.max(1)) {
        let batch = Batch::from_samples(&chunk.iter().collect::<Vec<_>>())?;
        let pass = GeneratorPass::run(params, net, &batch, false)?;
        if pass.images().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOutput);
        }
        for item in pass.images().chunks(2 * h * w) {
            images.push(ComplexImage::from_planar(h, w, item)?);
        }
    }
    score(samples, images, embedder)
}

/// The same report for the zero-filled reconstructions.
pub fn evaluate_zero_filled<T: Real>(samples: &[TrainingSample<T>], embedder: &Embedder) -> Result<Evaluation<T>> {
    if samples.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    score(samples, samples.iter().map(|s| s.m_z.clone()).collect(), embedder)
}
