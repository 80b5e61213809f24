use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{push_f32s, take_f32s};
use crate::acquisition::{DatasetSpec, KSpaceData, SamplingMask, SensitivityMaps, TrainingSample};
use crate::error::{Error, Result};
use crate::fourier::ComplexImage;

pub const DATASET_VERSION: u32 = 1;

/// First line of a dataset file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub version: u32,
    #[serde(rename = "H")]
    pub height: usize,
    #[serde(rename = "W")]
    pub width: usize,
    pub n_coils: usize,
    #[serde(rename = "R")]
    pub acceleration: f64,
    pub center_lines: usize,
    pub count: usize,
    pub seed: u64,
    pub n_ellipses: usize,
}

impl DatasetHeader {
    pub fn from_spec(spec: &DatasetSpec) -> Self {
        Self {
            version: DATASET_VERSION,
            height: spec.height,
            width: spec.width,
            n_coils: spec.n_coils,
            acceleration: spec.acceleration,
            center_lines: spec.center_lines,
            count: spec.count,
            seed: spec.seed,
            n_ellipses: spec.n_ellipses,
        }
    }

    pub fn spec(&self) -> DatasetSpec {
        DatasetSpec {
            height: self.height,
            width: self.width,
            n_coils: self.n_coils,
            acceleration: self.acceleration,
            center_lines: self.center_lines,
            count: self.count,
            seed: self.seed,
            n_ellipses: self.n_ellipses,
        }
    }
}

fn interleaved(img: &ComplexImage<f32>) -> impl Iterator<Item = f32> + '_ {
    img.re.iter().zip(&img.im).flat_map(|(&r, &i)| [r, i])
}

fn read_image(src: &mut impl Read, h: usize, w: usize) -> Result<ComplexImage<f32>> {
    let v = take_f32s(src, 2 * h * w)?;
    let (re, im) = v.chunks_exact(2).map(|p| (p[0], p[1])).unzip();
    ComplexImage::new(h, w, re, im).map_err(|e| Error::Data(e.to_string()))
}

/// One JSON header line, then per sample: `m_f`, the coil maps, one byte
/// per mask line and the acquired k-space, as little-endian `f32` with
/// real and imaginary parts interleaved.
pub fn write_dataset(path: &Path, spec: &DatasetSpec, samples: &[TrainingSample<f32>]) -> Result<()> {
    if samples.len() != spec.count {
        return Err(Error::InvalidArgument(format!(
            "{} samples for a header count of {}",
            samples.len(),
            spec.count
        )));
    }
    let mut out = BufWriter::new(File::create(path)?);
    let header = serde_json::to_string(&DatasetHeader::from_spec(spec)).expect("header serializes");
    writeln!(out, "{header}")?;
    let mut buf = Vec::new();
    for s in samples {
        if s.dims() != (spec.height, spec.width) || s.n_coils() != spec.n_coils {
            return Err(Error::InvalidArgument("sample does not match dataset header".into()));
        }
        buf.clear();
        push_f32s(&mut buf, interleaved(&s.m_f));
        for m in &s.maps.maps {
            push_f32s(&mut buf, interleaved(m));
        }
        buf.extend(s.mask.lines.iter().map(|&l| u8::from(l)));
        for k in &s.k_u.coils {
            push_f32s(&mut buf, interleaved(k));
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<(DatasetSpec, Vec<TrainingSample<f32>>)> {
    let mut src = BufReader::new(File::open(path)?);
    let mut line = String::new();
    src.read_line(&mut line)?;
    let header: DatasetHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Data(format!("bad dataset header: {e}")))?;
    if header.version != DATASET_VERSION {
        return Err(Error::Data(format!("unsupported dataset version {}", header.version)));
    }
    let spec = header.spec();
    let (h, w) = (spec.height, spec.width);
    let mut samples = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let m_f = read_image(&mut src, h, w)?;
        let maps = (0..spec.n_coils)
            .map(|_| read_image(&mut src, h, w))
            .collect::<Result<Vec<_>>>()?;
        let mut bytes = vec![0u8; w];
        src.read_exact(&mut bytes)
            .map_err(|e| Error::Data(format!("truncated mask: {e}")))?;
        let mask = SamplingMask {
            height: h,
            width: w,
            lines: bytes.iter().map(|&b| b != 0).collect(),
            acceleration: spec.acceleration,
            center_lines: spec.center_lines,
            seed: spec.sample_seed(i),
        };
        let coils = (0..spec.n_coils)
            .map(|_| read_image(&mut src, h, w))
            .collect::<Result<Vec<_>>>()?;
        let maps = SensitivityMaps::new(maps).map_err(|e| Error::Data(e.to_string()))?;
        samples.push(TrainingSample::from_parts(m_f, maps, mask, KSpaceData { coils })?);
    }
    if src.read(&mut [0u8])? != 0 {
        return Err(Error::Data("trailing bytes after the last sample".into()));
    }
    Ok((spec, samples))
}
