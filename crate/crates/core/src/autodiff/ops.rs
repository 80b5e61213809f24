use super::conv::{self, ConvGeom};
use super::{Graph, Op, Tensor};
use crate::error::{Error, Result};
use crate::fourier;
use crate::real::{lit, Real};

pub use super::conv::SamePadding;

const BN_EPS: f64 = 1e-5;

/// How `batch_norm2d` normalizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchNormMode {
    /// Batch statistics; running statistics updated.
    Train,
    /// Batch statistics; running statistics left untouched.
    TrainFrozen,
    /// Running statistics.
    Eval,
}

/// Per-channel running mean and variance of a batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub momentum: T,
}

impl<T: Real> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
            momentum: lit(0.9),
        }
    }
}

fn same_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::shape(op, format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

fn image_dims(op: &'static str, shape: &[usize]) -> Result<[usize; 4]> {
    match *shape {
        [b, c, h, w] => Ok([b, c, h, w]),
        _ => Err(Error::shape(op, format!("expected 4-d tensor, got {shape:?}"))),
    }
}

fn complex_dims(op: &'static str, shape: &[usize]) -> Result<[usize; 3]> {
    let [b, c, h, w] = image_dims(op, shape)?;
    if c != 2 {
        return Err(Error::shape(op, format!("expected 2 channels (real, imag), got {c}")));
    }
    Ok([b, h, w])
}

impl<T: Real> Graph<T> {
    fn needs_grad(&self, ts: &[Tensor]) -> bool {
        ts.iter().any(|t| self.requires_grad(*t))
    }

    /// Cross-correlation of `input` `[B,Cin,H,W]` with `kernel` `[Cout,Cin,kh,kw]`
    /// under zero "same" padding; output is `[B,Cout,ceil(H/s),ceil(W/s)]`.
    /// At stride 1 the kernel must have odd spatial size.
    pub fn conv2d(&mut self, input: Tensor, kernel: Tensor, bias: Tensor, stride: usize) -> Result<Tensor> {
        let [b, c_in, h, w] = image_dims("conv2d", self.shape(input))?;
        let [c_out, kc, kh, kw] = image_dims("conv2d", self.shape(kernel))?;
        if kc != c_in {
            return Err(Error::shape(
                "conv2d",
                format!("input has {c_in} channels, kernel expects {kc}"),
            ));
        }
        if self.shape(bias) != [c_out] {
            return Err(Error::shape(
                "conv2d",
                format!("bias shape {:?}, expected [{c_out}]", self.shape(bias)),
            ));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("conv2d stride must be positive".into()));
        }
        if stride == 1 && (kh % 2 == 0 || kw % 2 == 0) {
            return Err(Error::InvalidArgument(format!(
                "stride-1 same convolution needs odd kernel dims, got {kh}x{kw}"
            )));
        }
        let pad = SamePadding::new(h, w, kh, kw, stride);
        let geom = ConvGeom {
            c_in,
            h,
            w,
            kh,
            kw,
            stride,
            pad,
        };
        let in_len = c_in * h * w;
        let out_len = c_out * geom.out_len();
        let mut out = vec![T::zero(); b * out_len];
        let mut cols = Vec::new();
        {
            let x = self.value(input);
            let k = self.value(kernel);
            let bv = self.value(bias);
            for (item, o) in out.chunks_mut(out_len).enumerate() {
                conv::forward_item(
                    &geom,
                    c_out,
                    &x[item * in_len..(item + 1) * in_len],
                    k,
                    bv,
                    &mut cols,
                    o,
                );
            }
        }
        let rg = self.needs_grad(&[input, kernel, bias]);
        Ok(self.push(
            out,
            vec![b, c_out, pad.out_h, pad.out_w],
            rg,
            Op::Conv2d {
                input,
                kernel,
                bias,
                stride,
                pad,
            },
        ))
    }

    /// Elementwise `max(x, slope·x)` for `slope` in (0, 1).
    pub fn leaky_relu(&mut self, input: Tensor, slope: T) -> Tensor {
        let out = self
            .value(input)
            .iter()
            .map(|&x| if x > T::zero() { x } else { slope * x })
            .collect();
        let shape = self.shape(input).to_vec();
        let rg = self.requires_grad(input);
        self.push(out, shape, rg, Op::LeakyRelu { input, slope })
    }

    pub fn batch_norm2d(
        &mut self,
        input: Tensor,
        gamma: Tensor,
        beta: Tensor,
        mode: BatchNormMode,
        stats: &mut RunningStats<T>,
    ) -> Result<Tensor> {
        let [b, c, h, w] = image_dims("batch_norm2d", self.shape(input))?;
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return Err(Error::shape(
                "batch_norm2d",
                format!("affine params must have shape [{c}]"),
            ));
        }
        if stats.mean.len() != c || stats.var.len() != c {
            return Err(Error::shape(
                "batch_norm2d",
                format!("running stats have {} channels, input {c}", stats.mean.len()),
            ));
        }
        let hw = h * w;
        let count = b * hw;
        let batch_stats = mode != BatchNormMode::Eval;
        if batch_stats && count < 2 {
            return Err(Error::DegenerateBatch(count));
        }
        let eps: T = lit(BN_EPS);
        let x = self.value(input);
        let mut normalized = vec![T::zero(); x.len()];
        let mut inv_std = vec![T::zero(); c];
        let mut out = vec![T::zero(); x.len()];
        let g = self.value(gamma);
        let be = self.value(beta);
        let n = T::from_usize(count).unwrap();
        for ch in 0..c {
            let channel = |item: usize| {
                let start = (item * c + ch) * hw;
                start..start + hw
            };
            let (mean, var) = if batch_stats {
                let mut sum = T::zero();
                for item in 0..b {
                    sum += x[channel(item)].iter().copied().sum::<T>();
                }
                let mean = sum / n;
                let mut sq = T::zero();
                for item in 0..b {
                    for &v in &x[channel(item)] {
                        sq += (v - mean) * (v - mean);
                    }
                }
                let var = sq / n;
                if mode == BatchNormMode::Train {
                    let m = stats.momentum;
                    let unbiased = sq / (n - T::one());
                    stats.mean[ch] = m * stats.mean[ch] + (T::one() - m) * mean;
                    stats.var[ch] = m * stats.var[ch] + (T::one() - m) * unbiased;
                }
                (mean, var)
            } else {
                (stats.mean[ch], stats.var[ch])
            };
            let is = T::one() / (var + eps).sqrt();
            inv_std[ch] = is;
            for item in 0..b {
                for i in channel(item) {
                    let xh = (x[i] - mean) * is;
                    normalized[i] = xh;
                    out[i] = g[ch] * xh + be[ch];
                }
            }
        }
        let shape = self.shape(input).to_vec();
        let rg = self.needs_grad(&[input, gamma, beta]);
        Ok(self.push(
            out,
            shape,
            rg,
            Op::BatchNorm {
                input,
                gamma,
                beta,
                normalized,
                inv_std,
                batch_stats,
            },
        ))
    }

    /// `input [B,F] · weightᵀ [F,O] + bias [O]`.
    pub fn linear(&mut self, input: Tensor, weight: Tensor, bias: Tensor) -> Result<Tensor> {
        let (b, f) = match *self.shape(input) {
            [b, f] => (b, f),
            ref s => return Err(Error::shape("linear", format!("input must be 2-d, got {s:?}"))),
        };
        let o = match *self.shape(weight) {
            [o, wf] if wf == f => o,
            ref s => {
                return Err(Error::shape(
                    "linear",
                    format!("weight shape {s:?} incompatible with {f} input features"),
                ))
            }
        };
        if self.shape(bias) != [o] {
            return Err(Error::shape("linear", format!("bias must have shape [{o}]")));
        }
        let mut out = Vec::with_capacity(b * o);
        for _ in 0..b {
            out.extend_from_slice(self.value(bias));
        }
        T::gemm(
            b,
            f,
            o,
            T::one(),
            self.value(input),
            f as isize,
            1,
            self.value(weight),
            1,
            f as isize,
            T::one(),
            &mut out,
            o as isize,
            1,
        );
        let rg = self.needs_grad(&[input, weight, bias]);
        Ok(self.push(out, vec![b, o], rg, Op::Linear { input, weight, bias }))
    }

    /// Channel-axis concatenation of `[B,Ci,H,W]` tensors in list order.
    pub fn concat_channels(&mut self, inputs: &[Tensor]) -> Result<Tensor> {
        let first = *inputs.first().ok_or(Error::Empty("concat_channels"))?;
        let [b, _, h, w] = image_dims("concat_channels", self.shape(first))?;
        let mut total = 0;
        for &t in inputs {
            let [tb, tc, th, tw] = image_dims("concat_channels", self.shape(t))?;
            if (tb, th, tw) != (b, h, w) {
                return Err(Error::shape(
                    "concat_channels",
                    format!("{:?} vs {:?}", self.shape(t), self.shape(first)),
                ));
            }
            total += tc;
        }
        let hw = h * w;
        let mut out = Vec::with_capacity(b * total * hw);
        for item in 0..b {
            for &t in inputs {
                let c = self.shape(t)[1];
                out.extend_from_slice(&self.value(t)[item * c * hw..(item + 1) * c * hw]);
            }
        }
        let rg = self.needs_grad(inputs);
        Ok(self.push(
            out,
            vec![b, total, h, w],
            rg,
            Op::Concat {
                inputs: inputs.to_vec(),
            },
        ))
    }

    /// Mean squared difference over all elements.
    pub fn mse(&mut self, pred: Tensor, target: Tensor) -> Result<Tensor> {
        same_shape("mse", self.shape(pred), self.shape(target))?;
        let p = self.value(pred);
        let t = self.value(target);
        let n = T::from_usize(p.len().max(1)).unwrap();
        let s = p.iter().zip(t).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n;
        let rg = self.needs_grad(&[pred, target]);
        Ok(self.push(vec![s], vec![1], rg, Op::Mse { pred, target }))
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        same_shape("add", self.shape(a), self.shape(b))?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x + y).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.needs_grad(&[a, b]);
        Ok(self.push(out, shape, rg, Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        same_shape("sub", self.shape(a), self.shape(b))?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x - y).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.needs_grad(&[a, b]);
        Ok(self.push(out, shape, rg, Op::Sub { a, b }))
    }

    /// `scalar · input` where `scalar` is a one-element tensor.
    pub fn scale_by(&mut self, input: Tensor, scalar: Tensor) -> Result<Tensor> {
        if self.value(scalar).len() != 1 {
            return Err(Error::shape(
                "scale_by",
                format!("scale must be a scalar, got {:?}", self.shape(scalar)),
            ));
        }
        let s = self.value(scalar)[0];
        let out = self.value(input).iter().map(|&x| s * x).collect();
        let shape = self.shape(input).to_vec();
        let rg = self.needs_grad(&[input, scalar]);
        Ok(self.push(out, shape, rg, Op::ScaleBy { input, scalar }))
    }

    pub fn mul_const(&mut self, input: Tensor, factor: T) -> Tensor {
        let out = self.value(input).iter().map(|&x| factor * x).collect();
        let shape = self.shape(input).to_vec();
        let rg = self.requires_grad(input);
        self.push(out, shape, rg, Op::MulConst { input, factor })
    }

    /// Elementwise product with a constant array of the same shape.
    pub fn mul_elem(&mut self, input: Tensor, factors: Vec<T>) -> Result<Tensor> {
        if factors.len() != self.value(input).len() {
            return Err(Error::shape(
                "mul_elem",
                format!("{} factors for {:?}", factors.len(), self.shape(input)),
            ));
        }
        let out = self.value(input).iter().zip(&factors).map(|(&x, &f)| x * f).collect();
        let shape = self.shape(input).to_vec();
        let rg = self.requires_grad(input);
        Ok(self.push(out, shape, rg, Op::MulElem { input, factors }))
    }

    /// Adds a constant array of the same shape.
    pub fn add_const(&mut self, input: Tensor, offset: &[T]) -> Result<Tensor> {
        if offset.len() != self.value(input).len() {
            return Err(Error::shape(
                "add_const",
                format!("{} offsets for {:?}", offset.len(), self.shape(input)),
            ));
        }
        let out = self.value(input).iter().zip(offset).map(|(&x, &o)| x + o).collect();
        let shape = self.shape(input).to_vec();
        let rg = self.requires_grad(input);
        Ok(self.push(out, shape, rg, Op::AddConst { input }))
    }

    /// Pointwise complex product of a `[B,2,H,W]` tensor with a constant
    /// complex field of the same layout, optionally conjugating the field.
    pub fn complex_mul(&mut self, input: Tensor, field: Vec<T>, conjugate: bool) -> Result<Tensor> {
        let [b, h, w] = complex_dims("complex_mul", self.shape(input))?;
        if field.len() != b * 2 * h * w {
            return Err(Error::shape(
                "complex_mul",
                format!("field has {} values, expected {}", field.len(), b * 2 * h * w),
            ));
        }
        let out = complex_product(self.value(input), &field, b, h * w, conjugate);
        let shape = self.shape(input).to_vec();
        let rg = self.requires_grad(input);
        Ok(self.push(
            out,
            shape,
            rg,
            Op::ComplexMul {
                input,
                field,
                conjugate,
            },
        ))
    }

    /// Unitary 2-D DFT of each `[2,H,W]` batch item.
    pub fn fft2(&mut self, input: Tensor) -> Result<Tensor> {
        self.fourier(input, false)
    }

    /// Unitary inverse 2-D DFT of each `[2,H,W]` batch item.
    pub fn ifft2(&mut self, input: Tensor) -> Result<Tensor> {
        self.fourier(input, true)
    }

    fn fourier(&mut self, input: Tensor, inverse: bool) -> Result<Tensor> {
        let [b, h, w] = complex_dims(if inverse { "ifft2" } else { "fft2" }, self.shape(input))?;
        let mut out = self.value(input).to_vec();
        for item in out.chunks_mut(2 * h * w).take(b) {
            fourier::transform_planar(item, h, w, inverse);
        }
        let shape = self.shape(input).to_vec();
        let rg = self.requires_grad(input);
        Ok(self.push(out, shape, rg, Op::Fourier { input, inverse }))
    }

    /// `[B,2,H,W]` → `[B,1,H,W]` complex magnitude, smoothed at zero.
    pub fn magnitude(&mut self, input: Tensor) -> Result<Tensor> {
        let [b, h, w] = complex_dims("magnitude", self.shape(input))?;
        let hw = h * w;
        let x = self.value(input);
        let floor: T = lit(1e-12);
        let mut out = Vec::with_capacity(b * hw);
        for item in x.chunks(2 * hw) {
            let (re, im) = item.split_at(hw);
            out.extend(re.iter().zip(im).map(|(&r, &i)| (r * r + i * i + floor).sqrt()));
        }
        let rg = self.requires_grad(input);
        Ok(self.push(out, vec![b, 1, h, w], rg, Op::Magnitude { input }))
    }

    pub fn sum(&mut self, input: Tensor) -> Tensor {
        let s = self.value(input).iter().copied().sum::<T>();
        let rg = self.requires_grad(input);
        self.push(vec![s], vec![1], rg, Op::Sum { input })
    }

    pub fn mean(&mut self, input: Tensor) -> Tensor {
        let v = self.value(input);
        let s = v.iter().copied().sum::<T>() / T::from_usize(v.len().max(1)).unwrap();
        let rg = self.requires_grad(input);
        self.push(vec![s], vec![1], rg, Op::Mean { input })
    }

    pub fn reshape(&mut self, input: Tensor, shape: &[usize]) -> Result<Tensor> {
        if shape.iter().product::<usize>() != self.value(input).len() {
            return Err(Error::shape("reshape", format!("{:?} -> {shape:?}", self.shape(input))));
        }
        let out = self.value(input).to_vec();
        let rg = self.requires_grad(input);
        Ok(self.push(out, shape.to_vec(), rg, Op::Reshape { input }))
    }

    pub(crate) fn propagate(&self, op: &Op<T>, out: Tensor, g: &[T], grads: &mut [Option<Vec<T>>]) {
        match op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                kernel,
                bias,
                stride,
                pad,
            } => {
                let [b, c_in, h, w] = image_dims("conv2d", self.shape(*input)).unwrap();
                let [c_out, _, kh, kw] = image_dims("conv2d", self.shape(*kernel)).unwrap();
                let geom = ConvGeom {
                    c_in,
                    h,
                    w,
                    kh,
                    kw,
                    stride: *stride,
                    pad: *pad,
                };
                let in_len = c_in * h * w;
                let out_len = c_out * geom.out_len();
                let x = self.value(*input);
                let k = self.value(*kernel);
                let mut kg = self.slot(grads, *kernel).map(std::mem::take);
                let mut bg = self.slot(grads, *bias).map(std::mem::take);
                let mut ig = self.slot(grads, *input).map(std::mem::take);
                let mut cols = Vec::new();
                for item in 0..b {
                    conv::backward_item(
                        &geom,
                        c_out,
                        &x[item * in_len..(item + 1) * in_len],
                        k,
                        &g[item * out_len..(item + 1) * out_len],
                        &mut cols,
                        kg.as_deref_mut(),
                        bg.as_deref_mut(),
                        ig.as_mut().map(|v| &mut v[item * in_len..(item + 1) * in_len]),
                    );
                }
                for (t, v) in [(*kernel, kg), (*bias, bg), (*input, ig)] {
                    if let Some(v) = v {
                        grads[t.id] = Some(v);
                    }
                }
            }
            Op::LeakyRelu { input, slope } => {
                let x = self.value(*input);
                if let Some(dx) = self.slot(grads, *input) {
                    for ((d, &xi), &gi) in dx.iter_mut().zip(x).zip(g) {
                        *d += if xi > T::zero() { gi } else { *slope * gi };
                    }
                }
            }
            Op::BatchNorm {
                input,
                gamma,
                beta,
                normalized,
                inv_std,
                batch_stats,
            } => {
                let [b, c, h, w] = image_dims("batch_norm2d", self.shape(*input)).unwrap();
                let hw = h * w;
                let n = T::from_usize(b * hw).unwrap();
                let gam = self.value(*gamma);
                let mut sum_g = vec![T::zero(); c];
                let mut sum_gx = vec![T::zero(); c];
                for item in 0..b {
                    for ch in 0..c {
                        let start = (item * c + ch) * hw;
                        for i in start..start + hw {
                            sum_g[ch] += g[i];
                            sum_gx[ch] += g[i] * normalized[i];
                        }
                    }
                }
                if let Some(dg) = self.slot(grads, *gamma) {
                    for ch in 0..c {
                        dg[ch] += sum_gx[ch];
                    }
                }
                if let Some(db) = self.slot(grads, *beta) {
                    for ch in 0..c {
                        db[ch] += sum_g[ch];
                    }
                }
                if let Some(dx) = self.slot(grads, *input) {
                    for item in 0..b {
                        for ch in 0..c {
                            let scale = gam[ch] * inv_std[ch];
                            let start = (item * c + ch) * hw;
                            for i in start..start + hw {
                                dx[i] += if *batch_stats {
                                    scale * (g[i] - sum_g[ch] / n - normalized[i] * sum_gx[ch] / n)
                                } else {
                                    scale * g[i]
                                };
                            }
                        }
                    }
                }
            }
            Op::Linear { input, weight, bias } => {
                let [b, f] = [self.shape(*input)[0], self.shape(*input)[1]];
                let o = self.shape(*weight)[0];
                if let Some(dx) = self.slot(grads, *input) {
                    // dX[b,f] += dY[b,o] · W[o,f]
                    T::gemm(
                        b,
                        o,
                        f,
                        T::one(),
                        g,
                        o as isize,
                        1,
                        self.value(*weight),
                        f as isize,
                        1,
                        T::one(),
                        dx,
                        f as isize,
                        1,
                    );
                }
                if let Some(dw) = self.slot(grads, *weight) {
                    // dW[o,f] += dYᵀ[o,b] · X[b,f]
                    T::gemm(
                        o,
                        b,
                        f,
                        T::one(),
                        g,
                        1,
                        o as isize,
                        self.value(*input),
                        f as isize,
                        1,
                        T::one(),
                        dw,
                        f as isize,
                        1,
                    );
                }
                if let Some(db) = self.slot(grads, *bias) {
                    for row in g.chunks(o) {
                        for (d, &v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                }
            }
            Op::Concat { inputs } => {
                let shape = self.shape(out);
                let (b, total, hw) = (shape[0], shape[1], shape[2] * shape[3]);
                let mut offset = 0;
                for &t in inputs {
                    let c = self.shape(t)[1];
                    if let Some(dx) = self.slot(grads, t) {
                        for item in 0..b {
                            let src = (item * total + offset) * hw;
                            let dst = item * c * hw;
                            for (d, &v) in dx[dst..dst + c * hw].iter_mut().zip(&g[src..src + c * hw]) {
                                *d += v;
                            }
                        }
                    }
                    offset += c;
                }
            }
            Op::Mse { pred, target } => {
                let p = self.value(*pred);
                let t = self.value(*target);
                let scale = lit::<T>(2.0) * g[0] / T::from_usize(p.len().max(1)).unwrap();
                if let Some(dp) = self.slot(grads, *pred) {
                    for ((d, &a), &b) in dp.iter_mut().zip(p).zip(t) {
                        *d += scale * (a - b);
                    }
                }
                if let Some(dt) = self.slot(grads, *target) {
                    for ((d, &a), &b) in dt.iter_mut().zip(p).zip(t) {
                        *d -= scale * (a - b);
                    }
                }
            }
            Op::Add { a, b } => {
                accumulate(self.slot(grads, *a), g, T::one());
                accumulate(self.slot(grads, *b), g, T::one());
            }
            Op::Sub { a, b } => {
                accumulate(self.slot(grads, *a), g, T::one());
                accumulate(self.slot(grads, *b), g, -T::one());
            }
            Op::ScaleBy { input, scalar } => {
                let s = self.value(*scalar)[0];
                accumulate(self.slot(grads, *input), g, s);
                let x = self.value(*input);
                if let Some(ds) = self.slot(grads, *scalar) {
                    ds[0] += x.iter().zip(g).map(|(&a, &b)| a * b).sum::<T>();
                }
            }
            Op::MulConst { input, factor } => {
                accumulate(self.slot(grads, *input), g, *factor);
            }
            Op::MulElem { input, factors } => {
                if let Some(dx) = self.slot(grads, *input) {
                    for ((d, &gi), &f) in dx.iter_mut().zip(g).zip(factors) {
                        *d += gi * f;
                    }
                }
            }
            Op::AddConst { input } | Op::Reshape { input } => {
                accumulate(self.slot(grads, *input), g, T::one());
            }
            Op::ComplexMul {
                input,
                field,
                conjugate,
            } => {
                let [b, h, w] = complex_dims("complex_mul", self.shape(*input)).unwrap();
                // Multiplication by c is a rotation-scaling of each (re, im)
                // pair; its transpose is multiplication by conj(c).
                let back = complex_product(g, field, b, h * w, !*conjugate);
                accumulate(self.slot(grads, *input), &back, T::one());
            }
            Op::Fourier { input, inverse } => {
                let [_, h, w] = complex_dims("fft2", self.shape(*input)).unwrap();
                let mut back = g.to_vec();
                for item in back.chunks_mut(2 * h * w) {
                    fourier::transform_planar(item, h, w, !*inverse);
                }
                accumulate(self.slot(grads, *input), &back, T::one());
            }
            Op::Magnitude { input } => {
                let [_, h, w] = complex_dims("magnitude", self.shape(*input)).unwrap();
                let hw = h * w;
                let x = self.value(*input);
                let m = self.value(out);
                if let Some(dx) = self.slot(grads, *input) {
                    for (item, (xi, di)) in x.chunks(2 * hw).zip(dx.chunks_mut(2 * hw)).enumerate() {
                        for p in 0..hw {
                            let k = g[item * hw + p] / m[item * hw + p];
                            di[p] += k * xi[p];
                            di[hw + p] += k * xi[hw + p];
                        }
                    }
                }
            }
            Op::Sum { input } => {
                if let Some(dx) = self.slot(grads, *input) {
                    dx.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Mean { input } => {
                let n = T::from_usize(self.value(*input).len().max(1)).unwrap();
                if let Some(dx) = self.slot(grads, *input) {
                    let v = g[0] / n;
                    dx.iter_mut().for_each(|d| *d += v);
                }
            }
        }
    }
}

fn accumulate<T: Real>(slot: Option<&mut Vec<T>>, g: &[T], scale: T) {
    if let Some(d) = slot {
        for (a, &b) in d.iter_mut().zip(g) {
            *a += scale * b;
        }
    }
}

fn complex_product<T: Real>(x: &[T], field: &[T], b: usize, hw: usize, conjugate: bool) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for item in 0..b {
        let base = item * 2 * hw;
        for p in 0..hw {
            let (xr, xi) = (x[base + p], x[base + hw + p]);
            let cr = field[base + p];
            let ci = if conjugate {
                -field[base + hw + p]
            } else {
                field[base + hw + p]
            };
            out[base + p] = xr * cr - xi * ci;
            out[base + hw + p] = xr * ci + xi * cr;
        }
    }
    out
}
