//! Layer kinds needed by the transceiver networks, each with a forward rule
//! and an exact reverse-mode rule. Activations are batched: the leading
//! dimension of every tensor is the batch.

use std::fmt;
use std::hash::{Hash, Hasher};

use super::tensor::{matmul, TensorOf};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Name of a layer kind, as used in reports and gradient-check output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerKind {
    Embedding,
    Dense,
    Conv1d,
    MaxPool1d,
    Relu,
    Softmax,
    Reshape,
    Flatten,
    Concatenate,
    NormalizeComplex,
    RealComplexMarshal,
}

impl LayerKind {
    pub const ALL: [LayerKind; 11] = [
        LayerKind::Embedding,
        LayerKind::Dense,
        LayerKind::Conv1d,
        LayerKind::MaxPool1d,
        LayerKind::Relu,
        LayerKind::Softmax,
        LayerKind::Reshape,
        LayerKind::Flatten,
        LayerKind::Concatenate,
        LayerKind::NormalizeComplex,
        LayerKind::RealComplexMarshal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Embedding => "embedding",
            LayerKind::Dense => "dense",
            LayerKind::Conv1d => "conv1d",
            LayerKind::MaxPool1d => "maxpool1d",
            LayerKind::Relu => "relu",
            LayerKind::Softmax => "softmax",
            LayerKind::Reshape => "reshape",
            LayerKind::Flatten => "flatten",
            LayerKind::Concatenate => "concatenate",
            LayerKind::NormalizeComplex => "normalize-complex",
            LayerKind::RealComplexMarshal => "real-complex-marshal",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Static description of a layer: its kind and the hyperparameters that
/// determine its parameter count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Embedding { vocab: usize, dim: usize },
    Dense { fan_in: usize, fan_out: usize },
    Conv1d { in_channels: usize, out_channels: usize, kernel: usize },
    MaxPool1d { pool: usize },
    Relu,
    Softmax,
    Reshape,
    Flatten,
    Concatenate,
    NormalizeComplex,
    RealComplexMarshal,
}

impl LayerSpec {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::Embedding { .. } => LayerKind::Embedding,
            LayerSpec::Dense { .. } => LayerKind::Dense,
            LayerSpec::Conv1d { .. } => LayerKind::Conv1d,
            LayerSpec::MaxPool1d { .. } => LayerKind::MaxPool1d,
            LayerSpec::Relu => LayerKind::Relu,
            LayerSpec::Softmax => LayerKind::Softmax,
            LayerSpec::Reshape => LayerKind::Reshape,
            LayerSpec::Flatten => LayerKind::Flatten,
            LayerSpec::Concatenate => LayerKind::Concatenate,
            LayerSpec::NormalizeComplex => LayerKind::NormalizeComplex,
            LayerSpec::RealComplexMarshal => LayerKind::RealComplexMarshal,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Embedding { vocab, dim } => vocab * dim,
            LayerSpec::Dense { fan_in, fan_out } => fan_in * fan_out + fan_out,
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
            } => kernel * in_channels * out_channels + out_channels,
            _ => 0,
        }
    }
}

/// Fully connected layer, `y = W x + b` with `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: TensorOf<T>,
    pub bias: TensorOf<T>,
}

impl<T: Real> Dense<T> {
    pub fn new(weight: TensorOf<T>, bias: TensorOf<T>) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::Shape(format!(
                "dense weight {:?} / bias {:?}",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn fan_in(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &TensorOf<T>) -> Result<TensorOf<T>> {
        let (fin, fout) = (self.fan_in(), self.fan_out());
        if x.shape().len() != 2 || x.row_len() != fin {
            return Err(Error::Shape(format!(
                "dense expects [batch, {fin}], got {:?}",
                x.shape()
            )));
        }
        let batch = x.rows();
        let mut y = TensorOf::zeros(&[batch, fout]);
        for r in 0..batch {
            y.row_mut(r).copy_from_slice(self.bias.data());
        }
        matmul(batch, fin, fout, x.data(), false, self.weight.data(), true, T::one(), y.data_mut());
        Ok(y)
    }

    pub fn backward(&self, x: &TensorOf<T>, gy: &TensorOf<T>) -> (TensorOf<T>, Vec<TensorOf<T>>) {
        let (fin, fout, batch) = (self.fan_in(), self.fan_out(), x.rows());
        let mut gw = TensorOf::zeros(self.weight.shape());
        matmul(fout, batch, fin, gy.data(), true, x.data(), false, T::zero(), gw.data_mut());
        let mut gb = TensorOf::zeros(self.bias.shape());
        for r in 0..batch {
            for (b, g) in gb.data_mut().iter_mut().zip(gy.row(r)) {
                *b += *g;
            }
        }
        let mut gx = TensorOf::zeros(x.shape());
        matmul(batch, fout, fin, gy.data(), false, self.weight.data(), false, T::zero(), gx.data_mut());
        (gx, vec![gw, gb])
    }
}

/// Valid (unpadded) stride-1 1-D convolution over inputs `[batch, len, in_channels]`.
/// Kernels are stored `out_channels x kernel x in_channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<T> {
    pub kernel: TensorOf<T>,
    pub bias: TensorOf<T>,
}

impl<T: Real> Conv1d<T> {
    pub fn new(kernel: TensorOf<T>, bias: TensorOf<T>) -> Result<Self> {
        if kernel.shape().len() != 3 || bias.shape() != [kernel.shape()[0]] {
            return Err(Error::Shape(format!(
                "conv kernel {:?} / bias {:?}",
                kernel.shape(),
                bias.shape()
            )));
        }
        Ok(Self { kernel, bias })
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn kernel_len(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[2]
    }

    fn geometry(&self, x: &TensorOf<T>) -> Result<(usize, usize, usize)> {
        let s = x.shape();
        if s.len() != 3 || s[2] != self.in_channels() {
            return Err(Error::Shape(format!(
                "conv1d expects [batch, len, {}], got {s:?}",
                self.in_channels()
            )));
        }
        if s[1] < self.kernel_len() {
            return Err(Error::Shape(format!(
                "conv1d input length {} shorter than kernel {}",
                s[1],
                self.kernel_len()
            )));
        }
        Ok((s[0], s[1], s[1] - self.kernel_len() + 1))
    }

    /// Gathers every receptive field into one row: `[batch * out_len, kernel * in_channels]`.
    fn im2col(&self, x: &TensorOf<T>, batch: usize, len: usize, out_len: usize) -> Vec<T> {
        let cin = self.in_channels();
        let span = self.kernel_len() * cin;
        let mut cols = Vec::with_capacity(batch * out_len * span);
        for b in 0..batch {
            let sample = &x.data()[b * len * cin..(b + 1) * len * cin];
            for t in 0..out_len {
                cols.extend_from_slice(&sample[t * cin..t * cin + span]);
            }
        }
        cols
    }

    pub fn forward(&self, x: &TensorOf<T>) -> Result<TensorOf<T>> {
        let (batch, len, out_len) = self.geometry(x)?;
        let cout = self.out_channels();
        let span = self.kernel_len() * self.in_channels();
        let cols = self.im2col(x, batch, len, out_len);
        let mut y = TensorOf::zeros(&[batch, out_len, cout]);
        for row in y.data_mut().chunks_exact_mut(cout) {
            row.copy_from_slice(self.bias.data());
        }
        matmul(batch * out_len, span, cout, &cols, false, self.kernel.data(), true, T::one(), y.data_mut());
        Ok(y)
    }

    pub fn backward(&self, x: &TensorOf<T>, gy: &TensorOf<T>) -> Result<(TensorOf<T>, Vec<TensorOf<T>>)> {
        let (batch, len, out_len) = self.geometry(x)?;
        let (cin, cout) = (self.in_channels(), self.out_channels());
        let span = self.kernel_len() * cin;
        let rows = batch * out_len;
        let cols = self.im2col(x, batch, len, out_len);

        let mut gk = TensorOf::zeros(self.kernel.shape());
        matmul(cout, rows, span, gy.data(), true, &cols, false, T::zero(), gk.data_mut());
        let mut gb = TensorOf::zeros(self.bias.shape());
        for row in gy.data().chunks_exact(cout) {
            for (b, g) in gb.data_mut().iter_mut().zip(row) {
                *b += *g;
            }
        }
        let mut gcols = vec![T::zero(); rows * span];
        matmul(rows, cout, span, gy.data(), false, self.kernel.data(), false, T::zero(), &mut gcols);
        let mut gx = TensorOf::zeros(x.shape());
        for b in 0..batch {
            let sample = &mut gx.data_mut()[b * len * cin..(b + 1) * len * cin];
            for t in 0..out_len {
                let src = &gcols[(b * out_len + t) * span..(b * out_len + t + 1) * span];
                for (d, s) in sample[t * cin..t * cin + span].iter_mut().zip(src) {
                    *d += *s;
                }
            }
        }
        Ok((gx, vec![gk, gb]))
    }
}

/// Non-overlapping max pooling over `[batch, len, channels]`; a trailing
/// partial window is dropped. Ties route to the first maximal element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool1d {
    pub pool: usize,
}

impl MaxPool1d {
    fn geometry<T: Real>(&self, x: &TensorOf<T>) -> Result<(usize, usize, usize, usize)> {
        let s = x.shape();
        if self.pool == 0 || s.len() != 3 || s[1] < self.pool {
            return Err(Error::Shape(format!(
                "maxpool({}) on input {s:?}",
                self.pool
            )));
        }
        Ok((s[0], s[1], s[2], s[1] / self.pool))
    }

    /// Index (into the sample) of the winning element for each output cell.
    fn argmax<T: Real>(&self, x: &TensorOf<T>) -> Result<Vec<usize>> {
        let (batch, len, ch, out_len) = self.geometry(x)?;
        let mut idx = Vec::with_capacity(batch * out_len * ch);
        for b in 0..batch {
            let sample = &x.data()[b * len * ch..(b + 1) * len * ch];
            for t in 0..out_len {
                for c in 0..ch {
                    let mut best = t * self.pool * ch + c;
                    for j in 1..self.pool {
                        let cand = (t * self.pool + j) * ch + c;
                        if sample[cand] > sample[best] {
                            best = cand;
                        }
                    }
                    idx.push(best);
                }
            }
        }
        Ok(idx)
    }

    pub fn forward<T: Real>(&self, x: &TensorOf<T>) -> Result<TensorOf<T>> {
        let (batch, len, ch, out_len) = self.geometry(x)?;
        if self.pool == 1 {
            return Ok(x.clone());
        }
        let idx = self.argmax(x)?;
        let per = out_len * ch;
        let data = idx
            .iter()
            .enumerate()
            .map(|(i, &j)| x.data()[(i / per) * len * ch + j])
            .collect();
        TensorOf::new(vec![batch, out_len, ch], data)
    }

    pub fn backward<T: Real>(&self, x: &TensorOf<T>, gy: &TensorOf<T>) -> Result<TensorOf<T>> {
        let (_, len, ch, out_len) = self.geometry(x)?;
        if self.pool == 1 {
            return Ok(gy.clone());
        }
        let idx = self.argmax(x)?;
        let per = out_len * ch;
        let mut gx = TensorOf::zeros(x.shape());
        for (i, &j) in idx.iter().enumerate() {
            gx.data_mut()[(i / per) * len * ch + j] += gy.data()[i];
        }
        Ok(gx)
    }
}

pub fn relu<T: Real>(x: &TensorOf<T>) -> TensorOf<T> {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = v.max(T::zero()));
    y
}

/// Derivative is taken as 0 at exactly 0.
pub fn relu_backward<T: Real>(x: &TensorOf<T>, gy: &TensorOf<T>) -> TensorOf<T> {
    let mut gx = gy.clone();
    for (g, v) in gx.data_mut().iter_mut().zip(x.data()) {
        if *v <= T::zero() {
            *g = T::zero();
        }
    }
    gx
}

/// Scales each interleaved complex pair `(re, im)` by `1 / max(1, |z|)`.
pub fn normalize_to_unit_disk<T: Real>(x: &TensorOf<T>) -> Result<TensorOf<T>> {
    if !x.row_len().is_multiple_of(2) {
        return Err(Error::Shape(format!(
            "complex normalization needs an even row length, got {:?}",
            x.shape()
        )));
    }
    let mut y = x.clone();
    for pair in y.data_mut().chunks_exact_mut(2) {
        let r = pair[0].hypot(pair[1]);
        if r >= T::one() {
            pair[0] /= r;
            pair[1] /= r;
        }
    }
    Ok(y)
}

/// On the unit circle the scaling branch is used.
pub fn normalize_to_unit_disk_backward<T: Real>(x: &TensorOf<T>, gy: &TensorOf<T>) -> TensorOf<T> {
    let mut gx = gy.clone();
    for (g, z) in gx.data_mut().chunks_exact_mut(2).zip(x.data().chunks_exact(2)) {
        let r = z[0].hypot(z[1]);
        if r >= T::one() {
            let (u0, u1) = (z[0] / r, z[1] / r);
            let dot = g[0] * u0 + g[1] * u1;
            g[0] = (g[0] - dot * u0) / r;
            g[1] = (g[1] - dot * u1) / r;
        }
    }
    gx
}

/// Row-wise softmax, stabilised by subtracting the row maximum.
pub fn softmax<T: Real>(logits: &TensorOf<T>) -> TensorOf<T> {
    let mut p = logits.clone();
    let w = p.row_len();
    for row in p.data_mut().chunks_exact_mut(w) {
        let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            total += *v;
        }
        let tiny = T::min_positive_value();
        for v in row.iter_mut() {
            *v /= total;
            // Probabilities below the normal range are flushed to exact zero.
            if *v < tiny {
                *v = T::zero();
            }
        }
    }
    p
}

/// Probability floor applied inside the logarithm of the cross entropy.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-ln(probs[label])`, with the probability clamped below by [`PROB_FLOOR`].
pub fn cross_entropy<T: Real>(probs: &[T], label: usize) -> Result<T> {
    let p = probs.get(label).ok_or_else(|| {
        Error::Domain(format!("label {label} outside 0..{}", probs.len()))
    })?;
    Ok(-p.max(T::of(PROB_FLOOR)).ln())
}

/// Softmax followed by mean cross entropy over the batch. Returns
/// `(mean loss, probabilities, gradient w.r.t. logits)`.
pub fn softmax_cross_entropy<T: Real>(
    logits: &TensorOf<T>,
    labels: &[usize],
) -> Result<(T, TensorOf<T>, TensorOf<T>)> {
    if logits.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} logit rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    let probs = softmax(logits);
    let inv = T::one() / T::of(labels.len() as f64);
    let mut loss = T::zero();
    let mut grad = probs.clone();
    for (r, &label) in labels.iter().enumerate() {
        loss += cross_entropy(probs.row(r), label)?;
        let row = grad.row_mut(r);
        row[label] -= T::one();
        let tiny = T::min_positive_value();
        for g in row.iter_mut() {
            *g *= inv;
            if g.abs() < tiny {
                *g = T::zero();
            }
        }
    }
    Ok((loss * inv, probs, grad))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Joins two `[batch, *]` tensors along the feature axis.
pub fn concatenate<T: Real>(a: &TensorOf<T>, b: &TensorOf<T>) -> Result<TensorOf<T>> {
    if a.rows() != b.rows() {
        return Err(Error::Shape(format!(
            "concatenate batch {} vs {}",
            a.rows(),
            b.rows()
        )));
    }
    let (wa, wb) = (a.row_len(), b.row_len());
    let mut data = Vec::with_capacity(a.len() + b.len());
    for r in 0..a.rows() {
        data.extend_from_slice(a.row(r));
        data.extend_from_slice(b.row(r));
    }
    TensorOf::new(vec![a.rows(), wa + wb], data)
}

/// Adjoint of [`concatenate`]: splits a gradient after `left` features.
pub fn split_features<T: Real>(g: &TensorOf<T>, left: usize) -> (TensorOf<T>, TensorOf<T>) {
    let (rows, w) = (g.rows(), g.row_len());
    let mut a = Vec::with_capacity(rows * left);
    let mut b = Vec::with_capacity(rows * (w - left));
    for r in 0..rows {
        a.extend_from_slice(&g.row(r)[..left]);
        b.extend_from_slice(&g.row(r)[left..]);
    }
    (
        TensorOf::new(vec![rows, left], a).expect("split shape"),
        TensorOf::new(vec![rows, w - left], b).expect("split shape"),
    )
}

/// Lookup table mapping symbol indices to learned vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    pub table: TensorOf<T>,
}

impl<T: Real> Embedding<T> {
    pub fn vocab(&self) -> usize {
        self.table.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.table.shape()[1]
    }

    pub fn forward(&self, indices: &[usize]) -> Result<TensorOf<T>> {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= self.vocab() {
                return Err(Error::Domain(format!(
                    "symbol {i} outside 0..{}",
                    self.vocab()
                )));
            }
            data.extend_from_slice(self.table.row(i));
        }
        TensorOf::new(vec![indices.len(), d], data)
    }

    pub fn backward(&self, indices: &[usize], gy: &TensorOf<T>) -> TensorOf<T> {
        let mut gt = TensorOf::zeros(self.table.shape());
        for (r, &i) in indices.iter().enumerate() {
            for (d, g) in gt.row_mut(i).iter_mut().zip(gy.row(r)) {
                *d += *g;
            }
        }
        gt
    }
}

/// A real-to-real layer inside a [`Sequential`](super::Sequential) stack.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Dense(Dense<T>),
    Conv1d(Conv1d<T>),
    MaxPool1d(MaxPool1d),
    Relu,
    /// Reinterprets each sample with the given per-sample shape.
    Reshape(Vec<usize>),
    Flatten,
    NormalizeComplex,
    /// Interleaved `[2n]` reals to `[n, 2]` complex pairs.
    RealToComplex,
    /// `[n, 2]` complex pairs back to `[2n]` reals.
    ComplexToReal,
}

impl<T: Real> Layer<T> {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(d) => LayerSpec::Dense {
                fan_in: d.fan_in(),
                fan_out: d.fan_out(),
            },
            Layer::Conv1d(c) => LayerSpec::Conv1d {
                in_channels: c.in_channels(),
                out_channels: c.out_channels(),
                kernel: c.kernel_len(),
            },
            Layer::MaxPool1d(p) => LayerSpec::MaxPool1d { pool: p.pool },
            Layer::Relu => LayerSpec::Relu,
            Layer::Reshape(_) => LayerSpec::Reshape,
            Layer::Flatten => LayerSpec::Flatten,
            Layer::NormalizeComplex => LayerSpec::NormalizeComplex,
            Layer::RealToComplex | Layer::ComplexToReal => LayerSpec::RealComplexMarshal,
        }
    }

    pub fn kind(&self) -> LayerKind {
        self.spec().kind()
    }

    pub fn params(&self) -> Vec<&TensorOf<T>> {
        match self {
            Layer::Dense(d) => vec![&d.weight, &d.bias],
            Layer::Conv1d(c) => vec![&c.kernel, &c.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut TensorOf<T>> {
        match self {
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            Layer::Conv1d(c) => vec![&mut c.kernel, &mut c.bias],
            _ => Vec::new(),
        }
    }

    fn reshape_rows(x: &TensorOf<T>, per_sample: &[usize]) -> Result<TensorOf<T>> {
        let mut shape = vec![x.rows()];
        shape.extend_from_slice(per_sample);
        x.clone().reshaped(shape)
    }

    pub fn forward(&self, x: &TensorOf<T>) -> Result<TensorOf<T>> {
        match self {
            Layer::Dense(d) => d.forward(x),
            Layer::Conv1d(c) => c.forward(x),
            Layer::MaxPool1d(p) => p.forward(x),
            Layer::Relu => Ok(relu(x)),
            Layer::Reshape(shape) => Self::reshape_rows(x, shape),
            Layer::Flatten | Layer::ComplexToReal => Self::reshape_rows(x, &[x.row_len()]),
            Layer::NormalizeComplex => normalize_to_unit_disk(x),
            Layer::RealToComplex => {
                if !x.row_len().is_multiple_of(2) {
                    return Err(Error::Shape("odd real width for complex packing".into()));
                }
                Self::reshape_rows(x, &[x.row_len() / 2, 2])
            }
        }
    }

    /// Returns the input gradient and the parameter gradients (same order as [`Layer::params`]).
    pub fn backward(
        &self,
        x: &TensorOf<T>,
        gy: &TensorOf<T>,
    ) -> Result<(TensorOf<T>, Vec<TensorOf<T>>)> {
        match self {
            Layer::Dense(d) => Ok(d.backward(x, gy)),
            Layer::Conv1d(c) => c.backward(x, gy),
            Layer::MaxPool1d(p) => Ok((p.backward(x, gy)?, Vec::new())),
            Layer::Relu => Ok((relu_backward(x, gy), Vec::new())),
            Layer::NormalizeComplex => Ok((normalize_to_unit_disk_backward(x, gy), Vec::new())),
            Layer::Reshape(_) | Layer::Flatten | Layer::RealToComplex | Layer::ComplexToReal => {
                Ok((gy.clone().reshaped(x.shape().to_vec())?, Vec::new()))
            }
        }
    }

    /// Feeds the layer's discrete branch choices (relu signs, pool winners,
    /// normalization branch) for input `x` into `state`.
    pub fn hash_branches<H: Hasher>(&self, x: &TensorOf<T>, state: &mut H) {
        match self {
            Layer::Relu => {
                for v in x.data() {
                    (*v > T::zero()).hash(state);
                }
            }
            Layer::MaxPool1d(p) => {
                if let Ok(idx) = p.argmax(x) {
                    idx.hash(state);
                }
            }
            Layer::NormalizeComplex => {
                for z in x.data().chunks_exact(2) {
                    (z[0].hypot(z[1]) >= T::one()).hash(state);
                }
            }
            _ => {}
        }
    }
}
