use rand::Rng;

use crate::fourier::ComplexImage;
use crate::real::Real;
use crate::rng::{seeded, streams};

/// Largest rotation applied by [`augment`], in degrees.
pub const MAX_ROTATION_DEG: f64 = 20.0;

/// Random horizontal flip (probability ½) followed by a rotation drawn
/// uniformly from ±20°.
pub fn augment<T: Real>(image: &ComplexImage<T>, seed: u64) -> ComplexImage<T> {
    let mut rng = seeded(seed, streams::AUGMENT);
    let flip = rng.random_bool(0.5);
    let angle = rng.random_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG);
    flip_rotate(image, flip, angle)
}

pub fn flip_rotate<T: Real>(image: &ComplexImage<T>, flip: bool, angle_deg: f64) -> ComplexImage<T> {
    let flipped;
    let src = if flip {
        flipped = flip_horizontal(image);
        &flipped
    } else {
        image
    };
    if angle_deg == 0.0 {
        return src.clone();
    }
    rotate(src, angle_deg)
}

pub fn flip_horizontal<T: Real>(image: &ComplexImage<T>) -> ComplexImage<T> {
    let (h, w) = (image.height, image.width);
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            out.re[y * w + x] = image.re[y * w + (w - 1 - x)];
            out.im[y * w + x] = image.im[y * w + (w - 1 - x)];
        }
    }
    out
}

/// Rotation about the image center with bilinear interpolation of the real
/// and imaginary planes; samples falling outside the grid read as zero.
pub fn rotate<T: Real>(image: &ComplexImage<T>, angle_deg: f64) -> ComplexImage<T> {
    let (h, w) = (image.height, image.width);
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let mut out = ComplexImage::zeros(h, w);
    let fetch = |plane: &[T], y: isize, x: isize| -> f64 {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0.0
        } else {
            plane[y as usize * w + x as usize].to_f64_lossy()
        }
    };
    for y in 0..h {
        for x in 0..w {
            let (dy, dx) = (y as f64 - cy, x as f64 - cx);
            // inverse map: source = R(-θ) · destination
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            for (plane, dst) in [(&image.re, &mut out.re), (&image.im, &mut out.im)] {
                let v = (1.0 - fy) * ((1.0 - fx) * fetch(plane, y0, x0) + fx * fetch(plane, y0, x0 + 1))
                    + fy * ((1.0 - fx) * fetch(plane, y0 + 1, x0) + fx * fetch(plane, y0 + 1, x0 + 1));
                dst[y * w + x] = T::from_f64_lossy(v);
            }
        }
    }
    out
}
