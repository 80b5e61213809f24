//! im2col-based 2D cross-correlation kernels.

use crate::real::Real;

/// Zero padding that yields `ceil(input / stride)` outputs per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamePadding {
    pub top: usize,
    pub left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl SamePadding {
    pub fn new(h: usize, w: usize, kh: usize, kw: usize, stride: usize) -> Self {
        let out_h = h.div_ceil(stride);
        let out_w = w.div_ceil(stride);
        let total_h = ((out_h - 1) * stride + kh).saturating_sub(h);
        let total_w = ((out_w - 1) * stride + kw).saturating_sub(w);
        Self {
            top: total_h / 2,
            left: total_w / 2,
            out_h,
            out_w,
        }
    }
}

pub(crate) struct ConvGeom {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: SamePadding,
}

impl ConvGeom {
    pub fn patch_len(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    pub fn out_len(&self) -> usize {
        self.pad.out_h * self.pad.out_w
    }

    /// Iterates `(col_row, out_index, in_index)` over in-bounds taps.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let (oh, ow) = (self.pad.out_h, self.pad.out_w);
        let n = oh * ow;
        for c in 0..self.c_in {
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = (c * self.kh + i) * self.kw + j;
                    for oy in 0..oh {
                        let y = (oy * self.stride + i) as isize - self.pad.top as isize;
                        if y < 0 || y >= self.h as isize {
                            continue;
                        }
                        let in_row = (c * self.h + y as usize) * self.w;
                        for ox in 0..ow {
                            let x = (ox * self.stride + j) as isize - self.pad.left as isize;
                            if x < 0 || x >= self.w as isize {
                                continue;
                            }
                            f(row * n, oy * ow + ox, in_row + x as usize);
                        }
                    }
                }
            }
        }
    }

    /// `cols` is `patch_len × out_len`, row-major; must be zeroed by the caller.
    pub fn im2col<T: Real>(&self, input: &[T], cols: &mut [T]) {
        self.for_each_tap(|base, o, i| cols[base + o] = input[i]);
    }

    pub fn col2im<T: Real>(&self, cols: &[T], input_grad: &mut [T]) {
        self.for_each_tap(|base, o, i| input_grad[i] += cols[base + o]);
    }
}

/// Forward pass for one batch item. `out` is `c_out × out_len`.
pub(crate) fn forward_item<T: Real>(
    geom: &ConvGeom,
    c_out: usize,
    input: &[T],
    kernel: &[T],
    bias: &[T],
    cols: &mut Vec<T>,
    out: &mut [T],
) {
    let (k, n) = (geom.patch_len(), geom.out_len());
    cols.clear();
    cols.resize(k * n, T::zero());
    geom.im2col(input, cols);
    for (o, row) in out.chunks_mut(n).enumerate() {
        row.fill(bias[o]);
    }
    T::gemm(
        c_out,
        k,
        n,
        T::one(),
        kernel,
        k as isize,
        1,
        cols,
        n as isize,
        1,
        T::one(),
        out,
        n as isize,
        1,
    );
}

/// Accumulates kernel, bias and (optionally) input gradients for one batch item.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward_item<T: Real>(
    geom: &ConvGeom,
    c_out: usize,
    input: &[T],
    kernel: &[T],
    out_grad: &[T],
    cols: &mut Vec<T>,
    kernel_grad: Option<&mut [T]>,
    bias_grad: Option<&mut [T]>,
    input_grad: Option<&mut [T]>,
) {
    let (k, n) = (geom.patch_len(), geom.out_len());
    if let Some(bg) = bias_grad {
        for (o, row) in out_grad.chunks(n).enumerate() {
            bg[o] += row.iter().copied().sum::<T>();
        }
    }
    if let Some(kg) = kernel_grad {
        cols.clear();
        cols.resize(k * n, T::zero());
        geom.im2col(input, cols);
        // dK[o, k] += dY[o, n] · cols[k, n]ᵀ
        T::gemm(
            c_out,
            n,
            k,
            T::one(),
            out_grad,
            n as isize,
            1,
            cols,
            1,
            n as isize,
            T::one(),
            kg,
            k as isize,
            1,
        );
    }
    if let Some(ig) = input_grad {
        cols.clear();
        cols.resize(k * n, T::zero());
        // dcols[k, n] = Kᵀ[k, o] · dY[o, n]
        T::gemm(
            k,
            c_out,
            n,
            T::one(),
            kernel,
            1,
            k as isize,
            out_grad,
            n as isize,
            1,
            T::zero(),
            cols,
            n as isize,
            1,
        );
        geom.col2im(cols, ig);
    }
}
