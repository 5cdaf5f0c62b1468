//! Finite-difference verification of every backward rule.
//!
//! Each layer kind is checked on randomized small instances with a random
//! linear read-out as the loss, in `f32` with step `1e-3`. The channel adjoint
//! is checked the same way. The full encoder, channel and decoder composite
//! is checked in `f64`: its parameter gradients sit around `1e-4`, below what
//! `f32` central differences can resolve on a loss of order `ln M`.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::Hasher;

use serde::{Deserialize, Serialize};

use crate::channel::{channel_apply, channel_backward, ChannelParams, RngStream};
use crate::diffnet::{
    compare_gradient, concatenate, init, softmax_cross_entropy, split_features, GradComparison,
    Layer, LayerKind, MaxPool1d, TensorOf,
};
use crate::error::{Error, Result};
use crate::model::{Autoencoder, ModelConfig};
use crate::scalar::Real;
use crate::trainer::{composite_loss, forward_backward, sample_training_batch};

/// Something with a backward rule under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckTarget {
    Layer(LayerKind),
    Channel,
    Composite,
}

impl CheckTarget {
    pub fn all() -> Vec<CheckTarget> {
        let mut v: Vec<_> = LayerKind::ALL.iter().map(|&k| CheckTarget::Layer(k)).collect();
        v.push(CheckTarget::Channel);
        v.push(CheckTarget::Composite);
        v
    }

    pub fn name(&self) -> &'static str {
        match self {
            CheckTarget::Layer(k) => k.name(),
            CheckTarget::Channel => "channel",
            CheckTarget::Composite => "composite",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::all()
            .into_iter()
            .find(|t| t.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown gradient-check target `{name}`")))
    }
}

impl fmt::Display for CheckTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub instances: usize,
    /// Finite-difference step for the per-layer and channel checks (`f32`).
    pub eps: f64,
    /// Finite-difference step for the composite check (`f64`).
    pub composite_eps: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Model used for the composite check.
    pub model: String,
    /// Sampled coordinates per parameter tensor in the composite check.
    pub composite_coords: usize,
    /// Scales the analytic gradient of the named target. Harness self-test only.
    pub corrupt: Option<String>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            instances: 20,
            eps: 1e-3,
            composite_eps: 1e-6,
            tolerance: 1e-2,
            seed: 1,
            model: ModelConfig::ae_8_8().name(),
            composite_coords: 6,
            corrupt: None,
        }
    }
}

impl GradcheckConfig {
    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::Config("instances must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.composite_eps > 0.0) {
            return Err(Error::Config("eps and composite_eps must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if self.composite_coords == 0 {
            return Err(Error::Config("composite_coords must be at least 1".into()));
        }
        ModelConfig::from_name(&self.model)?;
        if let Some(c) = &self.corrupt {
            CheckTarget::from_name(c)?;
        }
        Ok(())
    }
}

/// Worst case over all instances of one target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub target: String,
    pub instances: usize,
    pub checked: usize,
    pub excluded: usize,
    pub max_relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub checks: Vec<CheckReport>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.target.as_str()).collect()
    }
}

/// Factor applied to a corrupted target's analytic gradient.
const CORRUPTION: f64 = 1.5;

fn random_tensor<T: Real>(shape: &[usize], scale: f64, rng: &mut RngStream) -> TensorOf<T> {
    let len = shape.iter().product();
    let data = (0..len).map(|_| T::of(rng.uniform_range(-scale, scale))).collect();
    TensorOf::new(shape.to_vec(), data).expect("shape is nonempty")
}

fn between(rng: &mut RngStream, lo: usize, hi: usize) -> usize {
    lo + rng.below((hi - lo + 1) as u64) as usize
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

fn signature<T: Real>(layer: &Layer<T>, x: &TensorOf<T>) -> u64 {
    let mut h = DefaultHasher::new();
    layer.hash_branches(x, &mut h);
    h.finish()
}

fn scaled<T: Real>(mut g: Vec<T>, factor: f64) -> Vec<T> {
    let f = T::of(factor);
    g.iter_mut().for_each(|v| *v *= f);
    g
}

/// Checks input and parameter gradients of `layer` at `x` under the loss
/// `sum(r * layer(x))` for a random read-out `r`.
pub fn check_layer<T: Real>(
    layer: &Layer<T>,
    x: &TensorOf<T>,
    rng: &mut RngStream,
    eps: f64,
    factor: f64,
) -> Result<GradComparison> {
    let y = layer.forward(x)?;
    let r: TensorOf<T> = random_tensor(y.shape(), 1.0, rng);
    let (gx, gp) = layer.backward(x, &r)?;
    let eps = T::of(eps);
    let shape = x.shape().to_vec();
    let mut cmp = compare_gradient(
        |p: &[T]| {
            let t = TensorOf::new(shape.clone(), p.to_vec()).expect("same shape");
            let y = layer.forward(&t).expect("forward on checked shape");
            (dot(r.data(), y.data()), signature(layer, &t))
        },
        x.data(),
        &scaled(gx.into_data(), factor),
        None,
        eps,
    );
    for (j, g) in gp.into_iter().enumerate() {
        let base = layer.params()[j].data().to_vec();
        let c = compare_gradient(
            |p: &[T]| {
                let mut l = layer.clone();
                l.params_mut()[j].data_mut().copy_from_slice(p);
                let y = l.forward(x).expect("forward on checked shape");
                (dot(r.data(), y.data()), signature(&l, x))
            },
            &base,
            &scaled(g.into_data(), factor),
            None,
            eps,
        );
        cmp = cmp.merge(c);
    }
    Ok(cmp)
}

/// One randomized instance of a layer kind.
pub fn check_layer_kind<T: Real>(
    kind: LayerKind,
    rng: &mut RngStream,
    eps: f64,
    factor: f64,
) -> Result<GradComparison> {
    let batch = between(rng, 1, 4);
    match kind {
        LayerKind::Dense => {
            let (fin, fout) = (between(rng, 1, 8), between(rng, 1, 8));
            let mut d = init::dense::<T>(fin, fout, rng);
            d.bias = random_tensor(&[fout], 0.5, rng);
            let x = random_tensor::<T>(&[batch, fin], 1.0, rng);
            check_layer(&Layer::Dense(d), &x, rng, eps, factor)
        }
        LayerKind::Conv1d => {
            let (cin, cout, k) = (between(rng, 1, 3), between(rng, 1, 4), between(rng, 1, 4));
            let len = between(rng, k, k + 6);
            let mut c = init::conv1d::<T>(cin, cout, k, rng);
            c.bias = random_tensor(&[cout], 0.5, rng);
            let x = random_tensor::<T>(&[batch, len, cin], 1.0, rng);
            check_layer(&Layer::Conv1d(c), &x, rng, eps, factor)
        }
        LayerKind::MaxPool1d => {
            let pool = between(rng, 1, 3);
            let (len, ch) = (between(rng, pool, 3 * pool + 1), between(rng, 1, 3));
            let x = random_tensor::<T>(&[batch, len, ch], 1.0, rng);
            check_layer(&Layer::MaxPool1d(MaxPool1d { pool }), &x, rng, eps, factor)
        }
        LayerKind::Relu => {
            let x = random_tensor::<T>(&[batch, between(rng, 1, 12)], 1.0, rng);
            check_layer(&Layer::Relu, &x, rng, eps, factor)
        }
        LayerKind::Reshape => {
            let half = between(rng, 1, 8);
            let x = random_tensor::<T>(&[batch, 2 * half], 1.0, rng);
            check_layer(&Layer::Reshape(vec![half, 2]), &x, rng, eps, factor)
        }
        LayerKind::Flatten => {
            let x = random_tensor::<T>(&[batch, between(rng, 1, 5), between(rng, 1, 4)], 1.0, rng);
            check_layer(&Layer::Flatten, &x, rng, eps, factor)
        }
        LayerKind::NormalizeComplex => {
            // Magnitudes up to ~2 exercise both the identity and the scaling branch.
            let x = random_tensor::<T>(&[batch, 2 * between(rng, 1, 8)], 1.5, rng);
            check_layer(&Layer::NormalizeComplex, &x, rng, eps, factor)
        }
        LayerKind::RealComplexMarshal => {
            let half = between(rng, 1, 8);
            let x = random_tensor::<T>(&[batch, 2 * half], 1.0, rng);
            let a = check_layer(&Layer::RealToComplex, &x, rng, eps, factor)?;
            let z = random_tensor::<T>(&[batch, half, 2], 1.0, rng);
            Ok(a.merge(check_layer(&Layer::ComplexToReal, &z, rng, eps, factor)?))
        }
        LayerKind::Embedding => {
            let (vocab, dim) = (between(rng, 2, 16), between(rng, 1, 8));
            let emb = init::embedding::<T>(vocab, dim, rng);
            let idx: Vec<usize> = (0..batch + 2).map(|_| rng.below(vocab as u64) as usize).collect();
            let r: TensorOf<T> = random_tensor(&[idx.len(), dim], 1.0, rng);
            let g = emb.backward(&idx, &r);
            Ok(compare_gradient(
                |p: &[T]| {
                    let mut e = emb.clone();
                    e.table.data_mut().copy_from_slice(p);
                    (dot(r.data(), e.forward(&idx).expect("indices in range").data()), 0)
                },
                emb.table.data(),
                &scaled(g.into_data(), factor),
                None,
                T::of(eps),
            ))
        }
        LayerKind::Softmax => {
            let m = between(rng, 2, 10);
            let x: TensorOf<T> = random_tensor(&[batch, m], 2.0, rng);
            let labels: Vec<usize> = (0..batch).map(|_| rng.below(m as u64) as usize).collect();
            let (_, _, g) = softmax_cross_entropy(&x, &labels)?;
            Ok(compare_gradient(
                |p: &[T]| {
                    let t = TensorOf::new(vec![batch, m], p.to_vec()).expect("same shape");
                    (softmax_cross_entropy(&t, &labels).expect("labels in range").0, 0)
                },
                x.data(),
                &scaled(g.into_data(), factor),
                None,
                T::of(eps),
            ))
        }
        LayerKind::Concatenate => {
            let (wa, wb) = (between(rng, 1, 6), between(rng, 1, 6));
            let a: TensorOf<T> = random_tensor(&[batch, wa], 1.0, rng);
            let b: TensorOf<T> = random_tensor(&[batch, wb], 1.0, rng);
            let r: TensorOf<T> = random_tensor(&[batch, wa + wb], 1.0, rng);
            let (ga, gb) = split_features(&r, wa);
            let ca = compare_gradient(
                |p: &[T]| {
                    let t = TensorOf::new(vec![batch, wa], p.to_vec()).expect("same shape");
                    (dot(r.data(), concatenate(&t, &b).expect("rows match").data()), 0)
                },
                a.data(),
                &scaled(ga.into_data(), factor),
                None,
                T::of(eps),
            );
            let cb = compare_gradient(
                |p: &[T]| {
                    let t = TensorOf::new(vec![batch, wb], p.to_vec()).expect("same shape");
                    (dot(r.data(), concatenate(&a, &t).expect("rows match").data()), 0)
                },
                b.data(),
                &scaled(gb.into_data(), factor),
                None,
                T::of(eps),
            );
            Ok(ca.merge(cb))
        }
    }
}

/// One randomized instance of the channel adjoint (draws and noise fixed).
pub fn check_channel<T: Real>(rng: &mut RngStream, eps: f64, factor: f64) -> Result<GradComparison> {
    let n = between(rng, 2, 8);
    let params = ChannelParams::default();
    let draws = params.draw(n, rng);
    let noise_seed = rng.next_u64();
    let frame: TensorOf<T> = random_tensor(&[10 * n], 0.7, rng);
    let r: TensorOf<T> = random_tensor(&[2 * (3 * n - 1)], 1.0, rng);
    let g = channel_backward(r.data(), n, &draws)?;
    Ok(compare_gradient(
        |p: &[T]| {
            let y = channel_apply(p, n, &params, &draws, &mut RngStream::new(noise_seed))
                .expect("frame has 5n samples");
            (dot(r.data(), &y), 0)
        },
        frame.data(),
        &scaled(g, factor),
        None,
        T::of(eps),
    ))
}

/// One randomized instance of the full composite: a fresh model, a two-frame
/// batch and a fixed channel realization.
pub fn check_composite<T: Real>(
    config: ModelConfig,
    rng: &mut RngStream,
    eps: f64,
    coords_per_tensor: usize,
    factor: f64,
) -> Result<GradComparison> {
    let model = Autoencoder::<T>::new(config, rng.next_u64())?;
    let batch = sample_training_batch(rng, config.m(), 2);
    let channel = ChannelParams::default();
    let channel_seed = rng.next_u64();
    let out = forward_backward(&model, &batch, &channel, &mut RngStream::new(channel_seed))?;
    let mut total: Option<GradComparison> = None;
    for (pi, g) in out.grads.iter().enumerate() {
        let base = model.params()[pi].data().to_vec();
        let coords: Vec<usize> = (0..coords_per_tensor.min(base.len()))
            .map(|_| rng.below(base.len() as u64) as usize)
            .collect();
        let c = compare_gradient(
            |p: &[T]| {
                let mut m = model.clone();
                m.params_mut()[pi].data_mut().copy_from_slice(p);
                composite_loss(&m, &batch, &channel, channel_seed).expect("composite forward")
            },
            &base,
            &scaled(g.data().to_vec(), factor),
            Some(&coords),
            T::of(eps),
        );
        total = Some(match total {
            Some(t) => t.merge(c),
            None => c,
        });
    }
    Ok(total.expect("model has parameters"))
}

/// Runs every target. Instance `i` of target `t` draws from its own stream,
/// so results per target do not depend on which other targets ran.
pub fn run_gradcheck(config: &GradcheckConfig) -> Result<GradcheckReport> {
    config.validate()?;
    let model = ModelConfig::from_name(&config.model)?;
    let corrupt = config.corrupt.as_deref().map(CheckTarget::from_name).transpose()?;
    let mut checks = Vec::new();
    for (ti, target) in CheckTarget::all().into_iter().enumerate() {
        let factor = if corrupt == Some(target) { CORRUPTION } else { 1.0 };
        let mut worst = 0.0f64;
        let (mut checked, mut excluded) = (0, 0);
        for i in 0..config.instances {
            let mut rng = RngStream::keyed(config.seed, ((ti as u64) << 32) | i as u64);
            let c = match target {
                CheckTarget::Layer(kind) => check_layer_kind::<f32>(kind, &mut rng, config.eps, factor)?,
                CheckTarget::Channel => check_channel::<f32>(&mut rng, config.eps, factor)?,
                CheckTarget::Composite => check_composite::<f64>(
                    model,
                    &mut rng,
                    config.composite_eps,
                    config.composite_coords,
                    factor,
                )?,
            };
            worst = worst.max(c.relative_error);
            checked += c.checked;
            excluded += c.excluded;
        }
        checks.push(CheckReport {
            target: target.name().to_string(),
            instances: config.instances,
            checked,
            excluded,
            max_relative_error: worst,
            passed: checked > 0 && worst < config.tolerance,
        });
    }
    Ok(GradcheckReport {
        tolerance: config.tolerance,
        checks,
    })
}
