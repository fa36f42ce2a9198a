//! Dense tensors and the forward/backward kernels used by the network.
//!
//! Every differentiable primitive comes as an explicit pair; there is no
//! autodiff graph. Batch reductions always sum in index order.

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

static CHECKED: AtomicBool = AtomicBool::new(true);

/// Enable or disable finiteness validation in [`Tensor::new`].
pub fn set_checked(on: bool) {
    CHECKED.store(on, Ordering::Relaxed);
}

pub fn is_checked() -> bool {
    CHECKED.load(Ordering::Relaxed)
}

/// Dense row-major `f64` tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor, validating `product(shape) == data.len()` and, in
    /// checked mode, that every entry is finite.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        ensure!(
            shape.iter().all(|&d| d > 0),
            Dimension,
            "shape {shape:?} has a zero extent"
        );
        let n: usize = shape.iter().product();
        ensure!(
            n == data.len(),
            Dimension,
            "shape {shape:?} needs {n} elements, got {}",
            data.len()
        );
        if is_checked() {
            if let Some(i) = data.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("element {i} is {}", data[i])));
            }
        }
        Ok(Self { shape, data })
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::from_parts(shape.to_vec(), vec![0.0; n])
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self::from_parts(shape.to_vec(), vec![value; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Size of the leading (batch) axis.
    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Number of elements per leading-axis entry.
    pub fn row_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn row(&self, b: usize) -> &[f64] {
        let n = self.row_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn row_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.row_len();
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        ensure!(
            n == self.data.len(),
            Dimension,
            "cannot reshape {:?} into {shape:?}",
            self.shape
        );
        self.shape = shape;
        Ok(self)
    }

    /// Rows `range` of the leading axis as a new tensor.
    pub fn slice_batch(&self, range: std::ops::Range<usize>) -> Tensor {
        let n = self.row_len();
        let mut shape = self.shape.clone();
        shape[0] = range.len();
        Tensor::from_parts(shape, self.data[range.start * n..range.end * n].to_vec())
    }

    /// Gather the given leading-axis rows.
    pub fn select_rows(&self, rows: &[usize]) -> Tensor {
        let n = self.row_len();
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        let mut shape = self.shape.clone();
        shape[0] = rows.len();
        Tensor::from_parts(shape, data)
    }

    /// Stack equally-shaped tensors along a new leading axis.
    pub fn stack(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Dimension("cannot stack zero tensors".into()))?;
        let mut data = Vec::with_capacity(parts.len() * first.len());
        for p in parts {
            ensure!(
                p.shape == first.shape,
                Dimension,
                "stack shape mismatch {:?} vs {:?}",
                p.shape,
                first.shape
            );
            data.extend_from_slice(&p.data);
        }
        let mut shape = vec![parts.len()];
        shape.extend_from_slice(&first.shape);
        Ok(Tensor::from_parts(shape, data))
    }

    /// Concatenate batches whose per-sample shapes agree.
    pub fn concat_batch(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Dimension("cannot concatenate zero tensors".into()))?;
        ensure!(!first.shape.is_empty(), Dimension, "cannot concatenate scalars");
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        let mut rows = 0;
        for p in parts {
            ensure!(
                p.shape.len() == first.shape.len() && p.shape[1..] == first.shape[1..],
                Dimension,
                "sample shape mismatch {:?} vs {:?}",
                p.shape,
                first.shape
            );
            rows += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        let mut shape = first.shape.clone();
        shape[0] = rows;
        Ok(Tensor::from_parts(shape, data))
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_parts(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        ensure!(
            self.shape == other.shape,
            Dimension,
            "shape mismatch {:?} vs {:?}",
            self.shape,
            other.shape
        );
        Ok(Tensor::from_parts(
            self.shape.clone(),
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Tensor, scale: f64) -> Result<()> {
        ensure!(
            self.shape == other.shape,
            Dimension,
            "shape mismatch {:?} vs {:?}",
            self.shape,
            other.shape
        );
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

// ---------------------------------------------------------------------------
// Affine
// ---------------------------------------------------------------------------

/// Gradients of an affine or convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

fn check_affine(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize)> {
    ensure!(
        weight.shape.len() == 2,
        Dimension,
        "affine weight must be 2-D, got {:?}",
        weight.shape
    );
    let (out, inp) = (weight.shape[0], weight.shape[1]);
    ensure!(
        bias.shape == [out],
        Dimension,
        "bias shape {:?} does not match {out} outputs",
        bias.shape
    );
    ensure!(
        input.shape.len() >= 2 && input.row_len() == inp,
        Dimension,
        "affine input {:?} incompatible with weight {:?}",
        input.shape,
        weight.shape
    );
    Ok((input.batch(), inp, out))
}

/// `out[b, o] = bias[o] + Σ_i weight[o, i] · input[b, i]`.
///
/// Inputs with more than two axes are flattened per batch entry.
pub fn affine_forward(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (batch, inp, out) = check_affine(input, weight, bias)?;
    let mut res = vec![0.0; batch * out];
    for b in 0..batch {
        let x = &input.data[b * inp..(b + 1) * inp];
        let y = &mut res[b * out..(b + 1) * out];
        for (o, yo) in y.iter_mut().enumerate() {
            let w = &weight.data[o * inp..(o + 1) * inp];
            *yo = bias.data[o] + dot(w, x);
        }
    }
    Ok(Tensor::from_parts(vec![batch, out], res))
}

/// Analytic gradients of [`affine_forward`] given the upstream gradient.
/// Weight and bias gradients are summed over the batch.
pub fn affine_backward(upstream: &Tensor, input: &Tensor, weight: &Tensor) -> Result<LayerGrads> {
    ensure!(
        weight.shape.len() == 2,
        Dimension,
        "affine weight must be 2-D, got {:?}",
        weight.shape
    );
    let (out, inp) = (weight.shape[0], weight.shape[1]);
    ensure!(
        input.shape.len() >= 2 && input.row_len() == inp,
        Dimension,
        "cached input {:?} incompatible with weight {:?}",
        input.shape,
        weight.shape
    );
    let batch = input.batch();
    ensure!(
        upstream.shape == [batch, out],
        Dimension,
        "upstream {:?} does not match [{batch}, {out}]",
        upstream.shape
    );
    let mut gw = vec![0.0; out * inp];
    let mut gb = vec![0.0; out];
    let mut gx = vec![0.0; batch * inp];
    for b in 0..batch {
        let x = &input.data[b * inp..(b + 1) * inp];
        let g = &upstream.data[b * out..(b + 1) * out];
        let gxb = &mut gx[b * inp..(b + 1) * inp];
        for (o, &go) in g.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            gb[o] += go;
            let w = &weight.data[o * inp..(o + 1) * inp];
            let gwo = &mut gw[o * inp..(o + 1) * inp];
            for i in 0..inp {
                gwo[i] += go * x[i];
                gxb[i] += go * w[i];
            }
        }
    }
    Ok(LayerGrads {
        input: Tensor::from_parts(input.shape.clone(), gx),
        weight: Tensor::from_parts(weight.shape.clone(), gw),
        bias: Tensor::from_parts(vec![out], gb),
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

/// Stride and zero padding of a square-kernel cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv2dGeometry {
    pub stride: usize,
    pub padding: usize,
}

impl Default for Conv2dGeometry {
    fn default() -> Self {
        Self { stride: 1, padding: 0 }
    }
}

impl Conv2dGeometry {
    pub fn output_size(&self, size: usize, kernel: usize) -> Option<usize> {
        let padded = size + 2 * self.padding;
        if padded < kernel || self.stride == 0 {
            return None;
        }
        Some((padded - kernel) / self.stride + 1)
    }
}

struct ConvDims {
    batch: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    k: usize,
    oh: usize,
    ow: usize,
}

fn check_conv(input: &Tensor, kernel: &Tensor, geom: Conv2dGeometry) -> Result<ConvDims> {
    ensure!(geom.stride >= 1, Dimension, "stride must be at least 1");
    ensure!(
        input.shape.len() == 4,
        Dimension,
        "conv input must be [batch, c, h, w], got {:?}",
        input.shape
    );
    ensure!(
        kernel.shape.len() == 4 && kernel.shape[2] == kernel.shape[3],
        Dimension,
        "kernel must be [cout, cin, k, k], got {:?}",
        kernel.shape
    );
    let k = kernel.shape[2];
    ensure!(k % 2 == 1, Dimension, "kernel size {k} must be odd");
    let (batch, cin, h, w) = (input.shape[0], input.shape[1], input.shape[2], input.shape[3]);
    ensure!(
        kernel.shape[1] == cin,
        Dimension,
        "kernel expects {} input channels, input has {cin}",
        kernel.shape[1]
    );
    let oh = geom
        .output_size(h, k)
        .ok_or_else(|| Error::Dimension(format!("kernel {k} larger than padded height {h}")))?;
    let ow = geom
        .output_size(w, k)
        .ok_or_else(|| Error::Dimension(format!("kernel {k} larger than padded width {w}")))?;
    Ok(ConvDims { batch, cin, h, w, cout: kernel.shape[0], k, oh, ow })
}

/// Zero-padded cross-correlation (no kernel flip).
pub fn conv2d_forward(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    geom: Conv2dGeometry,
) -> Result<Tensor> {
    let d = check_conv(input, kernel, geom)?;
    ensure!(
        bias.shape == [d.cout],
        Dimension,
        "bias shape {:?} does not match {} channels",
        bias.shape,
        d.cout
    );
    let pad = geom.padding as isize;
    let mut out = vec![0.0; d.batch * d.cout * d.oh * d.ow];
    for b in 0..d.batch {
        for co in 0..d.cout {
            for oy in 0..d.oh {
                for ox in 0..d.ow {
                    let mut acc = bias.data[co];
                    for ci in 0..d.cin {
                        for ky in 0..d.k {
                            let iy = (oy * geom.stride + ky) as isize - pad;
                            if iy < 0 || iy >= d.h as isize {
                                continue;
                            }
                            for kx in 0..d.k {
                                let ix = (ox * geom.stride + kx) as isize - pad;
                                if ix < 0 || ix >= d.w as isize {
                                    continue;
                                }
                                let xi = ((b * d.cin + ci) * d.h + iy as usize) * d.w + ix as usize;
                                let ki = ((co * d.cin + ci) * d.k + ky) * d.k + kx;
                                acc += kernel.data[ki] * input.data[xi];
                            }
                        }
                    }
                    out[((b * d.cout + co) * d.oh + oy) * d.ow + ox] = acc;
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![d.batch, d.cout, d.oh, d.ow], out))
}

/// Analytic gradients of [`conv2d_forward`].
#[allow(clippy::needless_range_loop)]
pub fn conv2d_backward(
    upstream: &Tensor,
    input: &Tensor,
    kernel: &Tensor,
    geom: Conv2dGeometry,
) -> Result<LayerGrads> {
    let d = check_conv(input, kernel, geom)?;
    ensure!(
        upstream.shape == [d.batch, d.cout, d.oh, d.ow],
        Dimension,
        "upstream {:?} does not match conv output [{}, {}, {}, {}]",
        upstream.shape,
        d.batch,
        d.cout,
        d.oh,
        d.ow
    );
    let pad = geom.padding as isize;
    let mut gx = vec![0.0; input.len()];
    let mut gk = vec![0.0; kernel.len()];
    let mut gb = vec![0.0; d.cout];
    for b in 0..d.batch {
        for co in 0..d.cout {
            for oy in 0..d.oh {
                for ox in 0..d.ow {
                    let g = upstream.data[((b * d.cout + co) * d.oh + oy) * d.ow + ox];
                    if g == 0.0 {
                        continue;
                    }
                    gb[co] += g;
                    for ci in 0..d.cin {
                        for ky in 0..d.k {
                            let iy = (oy * geom.stride + ky) as isize - pad;
                            if iy < 0 || iy >= d.h as isize {
                                continue;
                            }
                            for kx in 0..d.k {
                                let ix = (ox * geom.stride + kx) as isize - pad;
                                if ix < 0 || ix >= d.w as isize {
                                    continue;
                                }
                                let xi = ((b * d.cin + ci) * d.h + iy as usize) * d.w + ix as usize;
                                let ki = ((co * d.cin + ci) * d.k + ky) * d.k + kx;
                                gk[ki] += g * input.data[xi];
                                gx[xi] += g * kernel.data[ki];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(LayerGrads {
        input: Tensor::from_parts(input.shape.clone(), gx),
        weight: Tensor::from_parts(kernel.shape.clone(), gk),
        bias: Tensor::from_parts(vec![d.cout], gb),
    })
}

// ---------------------------------------------------------------------------
// Softmax / cross-entropy
// ---------------------------------------------------------------------------

/// Row-wise softmax with max subtraction.
pub fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// Row-wise log-softmax.
pub fn log_softmax_row(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

pub fn softmax(logits: &Tensor) -> Tensor {
    let mut out = Vec::with_capacity(logits.len());
    for b in 0..logits.batch() {
        out.extend(softmax_row(logits.row(b)));
    }
    Tensor::from_parts(logits.shape.clone(), out)
}

/// Mean cross-entropy of `softmax(logits)` against class indices, with its
/// gradient `(softmax − onehot) / batch`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    ensure!(
        logits.shape.len() == 2,
        Dimension,
        "logits must be [batch, classes], got {:?}",
        logits.shape
    );
    let (batch, classes) = (logits.shape[0], logits.shape[1]);
    ensure!(
        labels.len() == batch,
        Dimension,
        "{} labels for a batch of {batch}",
        labels.len()
    );
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Domain(format!("label {bad} outside [0, {classes})")));
    }
    let inv = 1.0 / batch as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(batch * classes);
    for (b, &y) in labels.iter().enumerate() {
        let row = logits.row(b);
        let logp = log_softmax_row(row);
        loss -= logp[y];
        for (c, lp) in logp.iter().enumerate() {
            let p = lp.exp();
            grad.push((p - if c == y { 1.0 } else { 0.0 }) * inv);
        }
    }
    Ok((loss * inv, Tensor::from_parts(vec![batch, classes], grad)))
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    Weight,
    Bias,
}

/// One trainable tensor tagged with the layer it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub layer: usize,
    pub kind: ParamKind,
    pub tensor: Tensor,
}

/// All trainable parameters (or their gradients) in a fixed segment order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub segments: Vec<Segment>,
}

impl ParameterVector {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    /// Same segmentation, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    layer: s.layer,
                    kind: s.kind,
                    tensor: Tensor::zeros(s.tensor.shape()),
                })
                .collect(),
        }
    }

    pub fn total_len(&self) -> usize {
        self.segments.iter().map(|s| s.tensor.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_len());
        for s in &self.segments {
            out.extend_from_slice(s.tensor.data());
        }
        out
    }

    /// Refill a copy of this segmentation from a flat vector.
    pub fn unflatten(&self, flat: &[f64]) -> Result<Self> {
        ensure!(
            flat.len() == self.total_len(),
            State,
            "flat length {} does not match parameter length {}",
            flat.len(),
            self.total_len()
        );
        let mut off = 0;
        let mut out = self.clone();
        for s in &mut out.segments {
            let n = s.tensor.len();
            s.tensor.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(out)
    }

    pub fn sq_norm(&self) -> f64 {
        self.segments.iter().map(|s| s.tensor.sq_norm()).sum()
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.segments.len() == other.segments.len()
            && self
                .segments
                .iter()
                .zip(&other.segments)
                .all(|(a, b)| a.layer == b.layer && a.kind == b.kind && a.tensor.shape() == b.tensor.shape())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) -> Result<()> {
        ensure!(self.same_layout(other), State, "parameter segmentation mismatch");
        for (a, b) in self.segments.iter_mut().zip(&other.segments) {
            a.tensor.add_scaled(&b.tensor, scale)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        self.segments.iter_mut().for_each(|seg| seg.tensor.scale(s));
    }

    pub fn all_finite(&self) -> bool {
        self.segments.iter().all(|s| s.tensor.all_finite())
    }
}

/// One plain SGD update: `w ← w − lr·(g + weight_decay·w)`, biases exempt
/// from decay.
pub fn sgd_step(
    params: &ParameterVector,
    grads: &ParameterVector,
    lr: f64,
    weight_decay: f64,
) -> Result<ParameterVector> {
    let mut out = params.clone();
    sgd_step_in_place(&mut out, grads, lr, weight_decay)?;
    Ok(out)
}

pub(crate) fn sgd_step_in_place(
    params: &mut ParameterVector,
    grads: &ParameterVector,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    ensure!(
        params.same_layout(grads),
        State,
        "parameter and gradient segmentation differ"
    );
    for (p, g) in params.segments.iter_mut().zip(&grads.segments) {
        let wd = match p.kind {
            ParamKind::Weight => weight_decay,
            ParamKind::Bias => 0.0,
        };
        for (w, &gi) in p.tensor.data_mut().iter_mut().zip(g.tensor.data()) {
            *w -= lr * (gi + wd * *w);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn concat_batch_joins_uneven_batches() {
        let a = t(&[2, 1, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = t(&[1, 1, 2], &[5.0, 6.0]);
        let c = Tensor::concat_batch(&[a, b.clone()]).unwrap();
        assert_eq!(c.shape(), [3, 1, 2]);
        assert_eq!(c.row(2), [5.0, 6.0]);
        assert!(Tensor::concat_batch(&[b, t(&[1, 2], &[0.0, 0.0])]).is_err());
        assert!(Tensor::concat_batch(&[]).is_err());
    }

    #[test]
    fn construction_validates() {
        assert!(matches!(Tensor::new(vec![2, 2], vec![1.0; 3]), Err(Error::Dimension(_))));
        assert!(matches!(
            Tensor::new(vec![1], vec![f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(Tensor::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn affine_examples() {
        let id = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let out = affine_forward(&t(&[1, 2], &[1.0, 2.0]), &id, &t(&[2], &[0.0, 0.0])).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0]);

        let w = t(&[2, 2], &[0.3, -1.0, 2.0, 5.0]);
        let out = affine_forward(&t(&[1, 2], &[0.0, 0.0]), &w, &t(&[2], &[3.0, 4.0])).unwrap();
        assert_eq!(out.data(), &[3.0, 4.0]);

        let out =
            affine_forward(&t(&[1, 2], &[1.0, 1.0]), &t(&[1, 2], &[2.0, 3.0]), &t(&[1], &[1.0]))
                .unwrap();
        assert_eq!(out.data(), &[6.0]);
    }

    #[test]
    fn affine_backward_product_rule() {
        let g = affine_backward(&t(&[1, 1], &[1.0]), &t(&[1, 2], &[1.0, 1.0]), &t(&[1, 2], &[2.0, 3.0]))
            .unwrap();
        assert_eq!(g.weight.data(), &[1.0, 1.0]);
        assert_eq!(g.input.data(), &[2.0, 3.0]);
        assert_eq!(g.bias.data(), &[1.0]);

        let g = affine_backward(
            &Tensor::zeros(&[2, 3]),
            &t(&[2, 2], &[1.0, -2.0, 0.5, 4.0]),
            &t(&[3, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        )
        .unwrap();
        assert!(g.weight.data().iter().chain(g.input.data()).chain(g.bias.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn affine_shape_errors() {
        let r = affine_forward(&Tensor::zeros(&[1, 3]), &Tensor::zeros(&[2, 2]), &Tensor::zeros(&[2]));
        assert!(matches!(r, Err(Error::Dimension(_))));
        let r = affine_forward(&Tensor::zeros(&[1, 2]), &Tensor::zeros(&[2, 2]), &Tensor::zeros(&[3]));
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn conv_identity_and_bias() {
        let x = Tensor::new(vec![1, 1, 3, 3], (0..9).map(f64::from).collect()).unwrap();
        let k = Tensor::filled(&[1, 1, 1, 1], 1.0);
        let out = conv2d_forward(&x, &k, &Tensor::zeros(&[1]), Conv2dGeometry::default()).unwrap();
        assert_eq!(out, x);

        let k = Tensor::filled(&[2, 1, 3, 3], 0.7);
        let geom = Conv2dGeometry { stride: 1, padding: 1 };
        let out = conv2d_forward(&Tensor::zeros(&[1, 1, 4, 4]), &k, &t(&[2], &[1.5, -2.0]), geom).unwrap();
        assert_eq!(out.shape(), &[1, 2, 4, 4]);
        assert!(out.data()[..16].iter().all(|&v| v == 1.5));
        assert!(out.data()[16..].iter().all(|&v| v == -2.0));

        let g = conv2d_backward(&x, &x, &Tensor::filled(&[1, 1, 1, 1], 1.0), Conv2dGeometry::default())
            .unwrap();
        assert_eq!(g.input, x);
    }

    #[test]
    fn conv_rejects_even_kernel() {
        let r = conv2d_forward(
            &Tensor::zeros(&[1, 1, 4, 4]),
            &Tensor::zeros(&[1, 1, 2, 2]),
            &Tensor::zeros(&[1]),
            Conv2dGeometry::default(),
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn cross_entropy_examples() {
        let (l, _) = softmax_cross_entropy(&t(&[1, 2], &[0.0, 0.0]), &[0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let (l, g) = softmax_cross_entropy(&t(&[1, 2], &[1000.0, 0.0]), &[0]).unwrap();
        assert!(l.abs() < 1e-300 && l.is_finite());
        assert!(g.all_finite());
        assert!(matches!(
            softmax_cross_entropy(&t(&[1, 2], &[0.0, 0.0]), &[2]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn sgd_examples() {
        let seg = |v: f64| ParameterVector::new(vec![Segment {
            layer: 0,
            kind: ParamKind::Weight,
            tensor: t(&[1], &[v]),
        }]);
        let w = |p: ParameterVector| p.segments[0].tensor.data()[0];
        assert_eq!(w(sgd_step(&seg(1.0), &seg(0.0), 0.1, 0.0).unwrap()), 1.0);
        assert!((w(sgd_step(&seg(1.0), &seg(1.0), 0.1, 0.0).unwrap()) - 0.9).abs() < 1e-15);
        assert!((w(sgd_step(&seg(1.0), &seg(0.0), 0.1, 0.5).unwrap()) - 0.95).abs() < 1e-15);

        let bias = ParameterVector::new(vec![Segment {
            layer: 0,
            kind: ParamKind::Bias,
            tensor: t(&[1], &[1.0]),
        }]);
        let g = bias.zeros_like();
        assert_eq!(sgd_step(&bias, &g, 0.1, 0.5).unwrap(), bias);

        let two = ParameterVector::new(vec![seg(1.0).segments[0].clone(), seg(1.0).segments[0].clone()]);
        assert!(matches!(sgd_step(&two, &seg(0.0), 0.1, 0.0), Err(Error::State(_))));
    }
}
