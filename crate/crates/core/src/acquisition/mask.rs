use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::{seeded, streams};

/// Lowest relative sampling density of an outer phase-encode line.
const DENSITY_FLOOR: f64 = 0.05;

/// Cartesian 1-D phase-encode mask. Lines are image columns; `lines` is in
/// FFT storage order (DC at index 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingMask {
    pub height: usize,
    pub width: usize,
    pub lines: Vec<bool>,
    pub acceleration: f64,
    pub center_lines: usize,
    pub seed: u64,
}

impl SamplingMask {
    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            lines: vec![true; width],
            acceleration: 1.0,
            center_lines: width,
            seed: 0,
        }
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            lines: vec![false; width],
            center_lines: 0,
            ..Self::full(height, width)
        }
    }

    pub fn sampled_lines(&self) -> usize {
        self.lines.iter().filter(|&&l| l).count()
    }

    /// Ratio of all lines to acquired lines.
    pub fn achieved_acceleration(&self) -> f64 {
        self.width as f64 / self.sampled_lines().max(1) as f64
    }

    pub fn is_sampled(&self, _y: usize, x: usize) -> bool {
        self.lines[x]
    }

    /// Dense `H × W` 0/1 array.
    pub fn dense<T: Real>(&self) -> Vec<T> {
        let row: Vec<T> = self
            .lines
            .iter()
            .map(|&l| if l { T::one() } else { T::zero() })
            .collect();
        row.repeat(self.height)
    }

    /// Lines in display order (DC in the middle).
    pub fn centered_lines(&self) -> Vec<bool> {
        let w = self.width;
        (0..w).map(|c| self.lines[storage_index(c, w)]).collect()
    }
}

/// Storage index of centered line `c` (frequency `c - W/2`).
fn storage_index(c: usize, width: usize) -> usize {
    (c + width - width / 2) % width
}

/// Variable-density mask: the `center_lines` lines around DC are always
/// acquired; the rest of the `round(W/R)` budget is drawn without
/// replacement with probability proportional to
/// `max(1 - d/d_max, 0.05)`, `d` being the distance from DC.
pub fn make_vds_mask(
    height: usize,
    width: usize,
    center_lines: usize,
    acceleration: f64,
    seed: u64,
) -> Result<SamplingMask> {
    if !acceleration.is_finite() || acceleration <= 1.0 {
        return Err(Error::Config(format!(
            "acceleration must be finite and > 1, got {acceleration}"
        )));
    }
    let budget = (width as f64 / acceleration).round() as usize;
    if center_lines == 0 || center_lines > budget {
        return Err(Error::Config(format!(
            "{center_lines} central lines infeasible with a budget of {budget} lines (W={width}, R={acceleration})"
        )));
    }
    let half = width / 2;
    let first = half - center_lines / 2;
    let mut centered = vec![false; width];
    centered[first..first + center_lines].iter_mut().for_each(|l| *l = true);

    let d_max = half.max(1) as f64;
    let mut candidates: Vec<(usize, f64)> = (0..width)
        .filter(|&c| !centered[c])
        .map(|c| {
            let d = (c as f64 - half as f64).abs();
            (c, (1.0 - d / d_max).max(DENSITY_FLOOR))
        })
        .collect();
    let mut rng = seeded(seed, streams::MASK);
    for _ in center_lines..budget {
        let total: f64 = candidates.iter().map(|(_, w)| w).sum();
        let mut u = rng.random_range(0.0..total);
        let mut pick = candidates.len() - 1;
        for (i, (_, w)) in candidates.iter().enumerate() {
            if u < *w {
                pick = i;
                break;
            }
            u -= w;
        }
        let (c, _) = candidates.remove(pick);
        centered[c] = true;
    }
    let mut lines = vec![false; width];
    for (c, &on) in centered.iter().enumerate() {
        lines[storage_index(c, width)] = on;
    }
    Ok(SamplingMask {
        height,
        width,
        lines,
        acceleration,
        center_lines,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_block(mask: &SamplingMask) -> bool {
        let c = mask.centered_lines();
        let first = mask.width / 2 - mask.center_lines / 2;
        c[first..first + mask.center_lines].iter().all(|&l| l)
    }

    #[test]
    fn full_scale_budget() {
        let m = make_vds_mask(256, 256, 12, 4.0, 3).unwrap();
        assert_eq!(m.sampled_lines(), 64);
        assert!(central_block(&m));
    }

    #[test]
    fn desk_scale_budget() {
        let m = make_vds_mask(32, 32, 4, 4.0, 1).unwrap();
        assert_eq!(m.sampled_lines(), 8);
        assert!(central_block(&m));
        // DC and its neighbours sit at the ends of storage order
        assert!(m.lines[0] && m.lines[1] && m.lines[31] && m.lines[30]);
    }

    #[test]
    fn rejects_unit_acceleration_and_infeasible_center() {
        assert!(matches!(make_vds_mask(32, 32, 4, 1.0, 0), Err(Error::Config(_))));
        assert!(make_vds_mask(32, 32, 12, 4.0, 0).is_err());
    }

    #[test]
    fn mask_is_constant_along_readout() {
        let m = make_vds_mask(16, 32, 4, 4.0, 9).unwrap();
        let d: Vec<f64> = m.dense();
        for y in 1..16 {
            assert_eq!(&d[y * 32..(y + 1) * 32], &d[..32]);
        }
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let a = make_vds_mask(64, 64, 6, 3.0, 5).unwrap();
        assert_eq!(a, make_vds_mask(64, 64, 6, 3.0, 5).unwrap());
        let differs = (0..20).any(|s| make_vds_mask(64, 64, 6, 3.0, s).unwrap().lines != a.lines);
        assert!(differs);
    }

    #[test]
    fn density_decays_away_from_center() {
        let w = 128;
        let mut counts = vec![0usize; w];
        for seed in 0..400 {
            let m = make_vds_mask(8, w, 8, 4.0, seed).unwrap();
            for (c, on) in m.centered_lines().into_iter().enumerate() {
                counts[c] += on as usize;
            }
        }
        let inner: usize = counts[40..56].iter().sum();
        let outer: usize = counts[0..16].iter().sum();
        assert!(inner > 3 * outer, "inner {inner} outer {outer}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn line_budget_and_center(w in 16usize..200, r in 1.5f64..8.0, seed in 0u64..1000) {
                let budget = (w as f64 / r).round() as usize;
                prop_assume!(budget >= 2);
                let cl = (budget / 2).max(1);
                let m = make_vds_mask(8, w, cl, r, seed).unwrap();
                prop_assert!((m.sampled_lines() as f64 - w as f64 / r).abs() <= 1.0);
                prop_assert!(central_block(&m));
            }
        }
    }
}
