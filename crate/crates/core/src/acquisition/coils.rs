use std::f64::consts::PI;

use rand::Rng;

use super::{normalized, SensitivityMaps};
use crate::error::{Error, Result};
use crate::fourier::ComplexImage;
use crate::rng::{seeded, streams};

/// Smooth complex Gaussian-bump coil profiles centered just outside the
/// field of view at evenly spread (jittered) angles, jointly normalized to
/// unit sum of squares at every pixel.
pub fn gen_sensitivity_maps(seed: u64, n_coils: usize, height: usize, width: usize) -> Result<SensitivityMaps<f64>> {
    if n_coils == 0 {
        return Err(Error::InvalidArgument("at least one coil is required".into()));
    }
    let mut rng = seeded(seed, streams::COILS);
    let mut raw: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(n_coils);
    for i in 0..n_coils {
        let angle = 2.0 * PI * i as f64 / n_coils as f64 + rng.random_range(-0.2..0.2);
        let (cx, cy) = (1.2 * angle.cos(), 1.2 * angle.sin());
        let sigma: f64 = rng.random_range(0.8..1.2);
        let phase0 = rng.random_range(-PI..PI);
        let (px, py) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let mut re = Vec::with_capacity(height * width);
        let mut im = Vec::with_capacity(height * width);
        for yi in 0..height {
            for xi in 0..width {
                let (x, y) = normalized(xi, width, yi, height);
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                let mag = (-d2 / (2.0 * sigma * sigma)).exp();
                let phase = phase0 + px * x + py * y;
                re.push(mag * phase.cos());
                im.push(mag * phase.sin());
            }
        }
        raw.push((re, im));
    }
    let n = height * width;
    let mut sos = vec![0.0f64; n];
    for (re, im) in &raw {
        for p in 0..n {
            sos[p] += re[p] * re[p] + im[p] * im[p];
        }
    }
    let maps = raw
        .into_iter()
        .map(|(mut re, mut im)| {
            for p in 0..n {
                let s = sos[p].sqrt();
                re[p] /= s;
                im[p] /= s;
            }
            ComplexImage::new(height, width, re, im)
        })
        .collect::<Result<Vec<_>>>()?;
    SensitivityMaps::new(maps)
}
