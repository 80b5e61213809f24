use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fourier::ComplexImage;
use crate::rng::{seeded, streams};

/// Width of the smooth roll-off at each ellipse boundary, in units of the
/// ellipse radius.
const EDGE: f64 = 0.15;
/// Minimum roll-off width in pixels, so small ellipses stay band-limited.
const EDGE_PIXELS: f64 = 5.0;
/// Minimum semi-axis in pixels.
const AXIS_PIXELS: f64 = 7.0;

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
    edge: f64,
    intensity: f64,
}

impl Ellipse {
    /// Smoothstep profile: 1 inside radius `1 - edge`, 0 at radius ≥ 1.
    fn profile(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (dx * self.cos + dy * self.sin) / self.a;
        let v = (-dx * self.sin + dy * self.cos) / self.b;
        let r = (u * u + v * v).sqrt();
        let t = ((1.0 - r) / self.edge).clamp(0.0, 1.0);
        self.intensity * t * t * (3.0 - 2.0 * t)
    }
}

/// Sum of randomly placed soft-edged ellipses with a smooth random phase,
/// normalized to unit peak magnitude.
///
/// The first ellipse is large and near the center (the "head"); the rest
/// are smaller structures. All ellipses stay strictly inside the field of
/// view.
pub fn gen_phantom(seed: u64, height: usize, width: usize, n_ellipses: usize) -> Result<ComplexImage<f64>> {
    if height < 8 || width < 8 {
        return Err(Error::InvalidArgument(format!(
            "phantom needs at least 8x8 pixels, got {height}x{width}"
        )));
    }
    if n_ellipses == 0 {
        return Err(Error::InvalidArgument("phantom needs at least one ellipse".into()));
    }
    let mut rng = seeded(seed, streams::PHANTOM);
    let lo = (2.0 * AXIS_PIXELS / height.min(width) as f64).clamp(0.08, 0.5);
    let hi = (lo + 0.1).max(0.35);
    let mut ellipses = Vec::with_capacity(n_ellipses);
    for k in 0..n_ellipses {
        let (a, b, reach): (f64, f64, f64) = if k == 0 {
            (rng.random_range(0.6..0.8), rng.random_range(0.6..0.8), 0.9)
        } else {
            (rng.random_range(lo..hi), rng.random_range(lo..hi), 0.85)
        };
        let slack = reach - a.max(b);
        let (cx, cy) = if k == 0 {
            (rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1))
        } else {
            let r = rng.random_range(0.0..slack.max(0.0) + 1e-9);
            let t = rng.random_range(0.0..2.0 * PI);
            (r * t.cos() / 2f64.sqrt(), r * t.sin() / 2f64.sqrt())
        };
        let theta = rng.random_range(0.0..PI);
        ellipses.push(Ellipse {
            cx,
            cy,
            a,
            b,
            cos: theta.cos(),
            sin: theta.sin(),
            edge: EDGE
                .max(EDGE_PIXELS / (a.min(b) * height.min(width) as f64 / 2.0))
                .min(1.0),
            intensity: rng.random_range(0.2..1.0),
        });
    }
    let p: [f64; 4] = std::array::from_fn(|_| rng.random_range(-0.5..0.5));

    let mut re = Vec::with_capacity(height * width);
    let mut im = Vec::with_capacity(height * width);
    for yi in 0..height {
        for xi in 0..width {
            let (x, y) = normalized(xi, width, yi, height);
            let mag: f64 = ellipses.iter().map(|e| e.profile(x, y)).sum();
            let phase = PI * (p[0] * x + p[1] * y + p[2] * x * y + p[3] * (x * x - y * y));
            re.push(mag * phase.cos());
            im.push(mag * phase.sin());
        }
    }
    let peak = re
        .iter()
        .zip(&im)
        .map(|(r, i): (&f64, &f64)| r.hypot(*i))
        .fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::InvalidArgument("phantom has no support on this grid".into()));
    }
    re.iter_mut().chain(im.iter_mut()).for_each(|v| *v /= peak);
    ComplexImage::new(height, width, re, im)
}

/// Pixel center in `[-1, 1]²` coordinates.
pub(crate) fn normalized(xi: usize, width: usize, yi: usize, height: usize) -> (f64, f64) {
    (
        2.0 * (xi as f64 + 0.5) / width as f64 - 1.0,
        2.0 * (yi as f64 + 0.5) / height as f64 - 1.0,
    )
}
