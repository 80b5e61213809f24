//! Unitary 2-D discrete Fourier transforms.
//!
//! Both directions carry a `1/sqrt(H·W)` factor, so the forward transform is
//! an isometry and its inverse is its adjoint. Spectra keep the DC term at
//! index `(0, 0)`; nothing here shifts frequencies.

use std::any::{Any, TypeId};
use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{lit, Real};

/// Complex `height × width` image stored as paired row-major planes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexImage<T> {
    pub height: usize,
    pub width: usize,
    pub re: Vec<T>,
    pub im: Vec<T>,
}

impl<T: Real> ComplexImage<T> {
    pub fn new(height: usize, width: usize, re: Vec<T>, im: Vec<T>) -> Result<Self> {
        let n = height * width;
        if re.len() != n || im.len() != n {
            return Err(Error::shape(
                "ComplexImage",
                format!("{}/{} values for {height}x{width}", re.len(), im.len()),
            ));
        }
        if re.iter().chain(&im).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite pixel in ComplexImage".into()));
        }
        Ok(Self { height, width, re, im })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            re: vec![T::zero(); height * width],
            im: vec![T::zero(); height * width],
        }
    }

    /// Planar `[re..., im...]` layout matching a `[2, H, W]` tensor.
    pub fn from_planar(height: usize, width: usize, data: &[T]) -> Result<Self> {
        let n = height * width;
        if data.len() != 2 * n {
            return Err(Error::shape(
                "ComplexImage::from_planar",
                format!("{} values for 2x{height}x{width}", data.len()),
            ));
        }
        Self::new(height, width, data[..n].to_vec(), data[n..].to_vec())
    }

    pub fn to_planar(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(2 * self.re.len());
        out.extend_from_slice(&self.re);
        out.extend_from_slice(&self.im);
        out
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn same_dims(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn get(&self, y: usize, x: usize) -> Complex<T> {
        let i = y * self.width + x;
        Complex::new(self.re[i], self.im[i])
    }

    pub fn set(&mut self, y: usize, x: usize, v: Complex<T>) {
        let i = y * self.width + x;
        self.re[i] = v.re;
        self.im[i] = v.im;
    }

    pub fn magnitude(&self) -> Vec<T> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| (r * r + i * i).sqrt())
            .collect()
    }

    /// Squared ℓ2 norm over real and imaginary parts.
    pub fn norm_sqr(&self) -> T {
        self.re.iter().chain(&self.im).map(|&v| v * v).sum()
    }

    pub fn scale(&self, a: T) -> Self {
        self.map(|v| v * a)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            height: self.height,
            width: self.width,
            re: self.re.iter().map(|&v| f(v)).collect(),
            im: self.im.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> ComplexImage<U> {
        let c = |v: &T| U::from_f64_lossy(v.to_f64_lossy());
        ComplexImage {
            height: self.height,
            width: self.width,
            re: self.re.iter().map(c).collect(),
            im: self.im.iter().map(c).collect(),
        }
    }
}

/// Unitary forward 2-D DFT.
pub fn fft2<T: Real>(img: &ComplexImage<T>) -> ComplexImage<T> {
    transformed(img, false)
}

/// Unitary inverse 2-D DFT.
pub fn ifft2<T: Real>(k: &ComplexImage<T>) -> ComplexImage<T> {
    transformed(k, true)
}

fn transformed<T: Real>(img: &ComplexImage<T>, inverse: bool) -> ComplexImage<T> {
    let mut data = img.to_planar();
    transform_planar(&mut data, img.height, img.width, inverse);
    let n = img.len();
    let im = data.split_off(n);
    ComplexImage {
        height: img.height,
        width: img.width,
        re: data,
        im,
    }
}

const REFERENCE_MAX_PIXELS: usize = 4096;

/// Direct `O((HW)²)` double-sum DFT with the same normalization as [`fft2`].
pub fn dft2_reference<T: Real>(img: &ComplexImage<T>, inverse: bool) -> Result<ComplexImage<T>> {
    let (h, w) = (img.height, img.width);
    if h * w > REFERENCE_MAX_PIXELS {
        return Err(Error::InvalidArgument(format!(
            "reference DFT limited to {REFERENCE_MAX_PIXELS} pixels, got {h}x{w}"
        )));
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let norm = 1.0 / ((h * w) as f64).sqrt();
    let mut out = ComplexImage::zeros(h, w);
    for u in 0..h {
        for v in 0..w {
            let mut acc = Complex::new(0.0f64, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let phase =
                        sign * 2.0 * std::f64::consts::PI * ((u * y) as f64 / h as f64 + (v * x) as f64 / w as f64);
                    let p = img.get(y, x);
                    let p = Complex::new(p.re.to_f64_lossy(), p.im.to_f64_lossy());
                    acc += p * Complex::from_polar(1.0, phase);
                }
            }
            acc *= norm;
            out.set(u, v, Complex::new(lit(acc.re), lit(acc.im)));
        }
    }
    Ok(out)
}

struct Plan2<T: Real> {
    rows: Arc<dyn Fft<T>>,
    cols: Arc<dyn Fft<T>>,
}

type PlanKey = (TypeId, usize, usize, bool);

thread_local! {
    static PLANS: RefCell<HashMap<PlanKey, Rc<dyn Any>>> =
        RefCell::new(HashMap::new());
}

fn plan<T: Real>(h: usize, w: usize, inverse: bool) -> Rc<Plan2<T>> {
    PLANS.with(|cache| {
        let key = (TypeId::of::<T>(), h, w, inverse);
        let entry = cache
            .borrow_mut()
            .entry(key)
            .or_insert_with(|| {
                let mut planner = FftPlanner::<T>::new();
                let (rows, cols) = if inverse {
                    (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
                } else {
                    (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
                };
                Rc::new(Plan2 { rows, cols }) as Rc<dyn Any>
            })
            .clone();
        entry
            .downcast::<Plan2<T>>()
            .unwrap_or_else(|_| unreachable!("plan cache keyed by element type"))
    })
}

/// In-place unitary 2-D DFT of planar `[re (H·W), im (H·W)]` data.
pub fn transform_planar<T: Real>(data: &mut [T], h: usize, w: usize, inverse: bool) {
    let n = h * w;
    assert_eq!(data.len(), 2 * n, "planar buffer must hold 2·H·W values");
    let p = plan::<T>(h, w, inverse);
    let (re, im) = data.split_at_mut(n);
    let mut buf: Vec<Complex<T>> = re.iter().zip(im.iter()).map(|(&r, &i)| Complex::new(r, i)).collect();
    p.rows.process(&mut buf);
    let mut col = vec![Complex::new(T::zero(), T::zero()); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        p.cols.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
    let norm = T::one() / T::from_usize(n).unwrap().sqrt();
    for ((r, i), c) in re.iter_mut().zip(im.iter_mut()).zip(&buf) {
        *r = c.re * norm;
        *i = c.im * norm;
    }
}
