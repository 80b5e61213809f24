use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::ComplexImage;
use crate::real::Real;
use crate::rng::{seeded, streams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderKind {
    /// Seeded Gaussian random projection of the magnitude image.
    Projection,
    /// Block-average pooling of the magnitude image onto a square grid.
    Downsample,
}

/// Fixed feature map from images to vectors, standing in for a pretrained
/// network when computing Fréchet distances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedder {
    pub kind: EmbedderKind,
    pub seed: u64,
    pub dim: usize,
}

impl Embedder {
    pub fn projection(dim: usize, seed: u64) -> Self {
        Self {
            kind: EmbedderKind::Projection,
            seed,
            dim,
        }
    }

    pub fn downsample(dim: usize) -> Self {
        Self {
            kind: EmbedderKind::Downsample,
            seed: 0,
            dim,
        }
    }
}

/// One feature vector per row.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::shape(
                "FeatureMatrix",
                format!("{} values for {rows}x{dim}", data.len()),
            ));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn embed<T: Real>(images: &[ComplexImage<T>], e: &Embedder) -> Result<FeatureMatrix> {
    let first = images.first().ok_or(Error::Empty("embed"))?;
    let (h, w) = (first.height, first.width);
    if images.iter().any(|m| !m.same_dims(first)) {
        return Err(Error::shape("embed", "images differ in size"));
    }
    if e.dim == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
    }
    let mut data = Vec::with_capacity(images.len() * e.dim);
    match e.kind {
        EmbedderKind::Projection => {
            let n = h * w;
            let mut rng = seeded(e.seed, streams::EMBED);
            let scale = 1.0 / (n as f64).sqrt();
            let proj: Vec<f64> = (0..e.dim * n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    scale * z
                })
                .collect();
            for img in images {
                let mag: Vec<f64> = img.magnitude().iter().map(|v| v.to_f64_lossy()).collect();
                for row in proj.chunks(n) {
                    data.push(row.iter().zip(&mag).map(|(a, b)| a * b).sum());
                }
            }
        }
        EmbedderKind::Downsample => {
            let grid = (e.dim as f64).sqrt().round() as usize;
            if grid * grid != e.dim || h % grid != 0 || w % grid != 0 {
                return Err(Error::InvalidArgument(format!(
                    "downsample embedding needs a square dim whose side divides {h}x{w}, got {}",
                    e.dim
                )));
            }
            let (bh, bw) = (h / grid, w / grid);
            let area = (bh * bw) as f64;
            for img in images {
                let mag = img.magnitude();
                for gy in 0..grid {
                    for gx in 0..grid {
                        let mut acc = 0.0;
                        for y in gy * bh..(gy + 1) * bh {
                            for x in gx * bw..(gx + 1) * bw {
                                acc += mag[y * w + x].to_f64_lossy();
                            }
                        }
                        data.push(acc / area);
                    }
                }
            }
        }
    }
    FeatureMatrix::new(images.len(), e.dim, data)
}
