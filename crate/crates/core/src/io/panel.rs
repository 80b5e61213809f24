use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::ComplexImage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelEntry {
    pub label: String,
    pub nmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelSidecar {
    pub sample_index: usize,
    /// Magnitude that maps to white; shared by every panel.
    pub scale: f64,
    pub panels: Vec<PanelEntry>,
}

const MAX_LINE: usize = 70;

/// Writes the magnitudes of `images` side by side as a plain (ASCII) PGM,
/// each scaled so that `scale` maps to 255, and `sidecar` as JSON next to
/// it.
pub fn write_panel(path: &Path, images: &[ComplexImage<f32>], sidecar: &PanelSidecar) -> Result<()> {
    let first = images.first().ok_or(Error::Empty("panel"))?;
    if images.iter().any(|m| !m.same_dims(first)) {
        return Err(Error::shape("panel", "images differ in size"));
    }
    if sidecar.panels.len() != images.len() {
        return Err(Error::InvalidArgument("one sidecar entry per panel required".into()));
    }
    if !(sidecar.scale > 0.0 && sidecar.scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "panel scale must be positive, got {}",
            sidecar.scale
        )));
    }
    let (h, w) = (first.height, first.width);
    let mags: Vec<Vec<f32>> = images.iter().map(ComplexImage::magnitude).collect();
    let mut out = format!("P2\n{} {h}\n255\n", w * images.len());
    for y in 0..h {
        let mut line = String::new();
        for m in &mags {
            for x in 0..w {
                let v = (f64::from(m[y * w + x]) / sidecar.scale * 255.0)
                    .round()
                    .clamp(0.0, 255.0) as u8;
                let token = v.to_string();
                if !line.is_empty() && line.len() + 1 + token.len() > MAX_LINE {
                    out.push_str(&line);
                    out.push('\n');
                    line.clear();
                }
                if !line.is_empty() {
                    line.push(' ');
                }
                let _ = write!(line, "{token}");
            }
        }
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    let json = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    std::fs::write(path.with_extension("json"), json + "\n")?;
    Ok(())
}
