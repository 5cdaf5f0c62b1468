//! Receiver network: a `3n - 1` sample window to a distribution over symbols,
//! optionally aided by the convolutional synchronization feature estimator (SFE).

use super::config::*;
use crate::channel::RngStream;
use crate::diffnet::{
    argmax, concatenate, init, softmax, split_features, Dense, Layer, LayerSpec, MaxPool1d,
    Sequential, TensorOf, Trace,
};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderNet<T> {
    config: ModelConfig,
    pub sfe: Option<Sequential<T>>,
    pub trunk: Sequential<T>,
}

#[derive(Debug, Clone)]
pub struct DecoderTrace<T> {
    pub sfe: Option<Trace<T>>,
    pub trunk: Trace<T>,
}

impl<T: Real> DecoderNet<T> {
    pub fn build(config: ModelConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let w = config.window();
        let sfe = if config.sfe_enabled {
            let (_, _, _, flat) = config.sfe_dims();
            let mut s = Sequential::new();
            s.push("sfe.reshape", Layer::Reshape(vec![w, 2]))
                .push("sfe.conv1", Layer::Conv1d(init::conv1d(2, SFE_CHANNELS_1, SFE_KERNEL_1, rng)))
                .push("sfe.relu1", Layer::Relu)
                .push("sfe.pool1", Layer::MaxPool1d(MaxPool1d { pool: SFE_POOL_1 }))
                .push(
                    "sfe.conv2",
                    Layer::Conv1d(init::conv1d(SFE_CHANNELS_1, SFE_CHANNELS_2, SFE_KERNEL_2, rng)),
                )
                .push("sfe.relu2", Layer::Relu)
                .push("sfe.pool2", Layer::MaxPool1d(MaxPool1d { pool: SFE_POOL_2 }))
                .push("sfe.flatten", Layer::Flatten)
                .push("sfe.dense1", Layer::Dense(init::dense(flat, SFE_HIDDEN, rng)))
                .push("sfe.relu3", Layer::Relu)
                .push("sfe.dense2", Layer::Dense(init::dense(SFE_HIDDEN, SFE_FEATURES, rng)))
                .push("sfe.relu4", Layer::Relu);
            Some(s)
        } else {
            None
        };
        let mut trunk = Sequential::new();
        let mut width = config.concat_width();
        for (i, &next) in TRUNK_WIDTHS.iter().enumerate() {
            trunk
                .push(format!("dense{}", i + 1), Layer::Dense(init::dense(width, next, rng)))
                .push(format!("relu{}", i + 1), Layer::Relu);
            width = next;
        }
        trunk.push("output", Layer::Dense(init::dense(width, config.m(), rng)));
        Ok(Self { config, sfe, trunk })
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    /// Layer specs in order: complex unpacking, SFE, concatenation, trunk, softmax.
    pub fn layer_specs(&self) -> Vec<(String, LayerSpec)> {
        let mut out = vec![("complex2real".to_string(), LayerSpec::RealComplexMarshal)];
        if let Some(sfe) = &self.sfe {
            out.extend(sfe.layers().iter().map(|(n, l)| (n.clone(), l.spec())));
        }
        out.push(("concatenate".into(), LayerSpec::Concatenate));
        out.extend(self.trunk.layers().iter().map(|(n, l)| (n.clone(), l.spec())));
        out.push(("softmax".into(), LayerSpec::Softmax));
        out
    }

    pub fn param_count(&self) -> usize {
        self.layer_specs().iter().map(|(_, s)| s.param_count()).sum()
    }

    pub fn params(&self) -> Vec<&TensorOf<T>> {
        let mut p: Vec<&TensorOf<T>> = self.sfe.iter().flat_map(|s| s.params()).collect();
        p.extend(self.trunk.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut TensorOf<T>> {
        let mut p: Vec<&mut TensorOf<T>> = self.sfe.iter_mut().flat_map(|s| s.params_mut()).collect();
        p.extend(self.trunk.params_mut());
        p
    }

    pub fn named_params(&self) -> Vec<(String, &TensorOf<T>)> {
        let mut p: Vec<_> = self.sfe.iter().flat_map(|s| s.named_params()).collect();
        p.extend(self.trunk.named_params());
        p
    }

    /// The final `M`-way dense layer.
    pub fn output_layer_mut(&mut self) -> &mut Dense<T> {
        match self.trunk.layers_mut().last_mut() {
            Some((_, Layer::Dense(d))) => d,
            _ => unreachable!("trunk ends in a dense layer"),
        }
    }

    fn check_input(&self, x: &TensorOf<T>) -> Result<TensorOf<T>> {
        let w2 = 2 * self.config.window();
        if x.row_len() != w2 {
            return Err(Error::Shape(format!(
                "decoder expects windows of {} samples, got {}",
                w2 / 2,
                x.row_len() as f64 / 2.0
            )));
        }
        x.clone().reshaped(vec![x.rows(), w2])
    }

    /// Logits `[batch, M]` for windows `[batch, W, 2]` or `[batch, 2W]`.
    pub fn logits(&self, windows: &TensorOf<T>) -> Result<TensorOf<T>> {
        let x = self.check_input(windows)?;
        let h = match &self.sfe {
            Some(sfe) => concatenate(&x, &sfe.forward(&x)?)?,
            None => x,
        };
        self.trunk.forward(&h)
    }

    pub fn probabilities(&self, windows: &TensorOf<T>) -> Result<TensorOf<T>> {
        Ok(softmax(&self.logits(windows)?))
    }

    /// Most likely symbol per window (ties to the lowest index).
    pub fn decide_batch(&self, windows: &TensorOf<T>) -> Result<Vec<usize>> {
        let logits = self.logits(windows)?;
        Ok((0..logits.rows()).map(|r| argmax(logits.row(r))).collect())
    }

    /// Probability vector and decision for one interleaved window of `W` samples.
    pub fn decode(&self, window: &[T]) -> Result<(Vec<T>, usize)> {
        if window.len() != 2 * self.config.window() {
            return Err(Error::Shape(format!(
                "window has {} samples, expected {}",
                window.len() as f64 / 2.0,
                self.config.window()
            )));
        }
        let x = TensorOf::new(vec![1, window.len()], window.to_vec())?;
        let p = self.probabilities(&x)?.into_data();
        let s = argmax(&p);
        Ok((p, s))
    }

    pub fn forward_trace(&self, windows: &TensorOf<T>) -> Result<DecoderTrace<T>> {
        let x = self.check_input(windows)?;
        let (sfe, h) = match &self.sfe {
            Some(net) => {
                let t = net.forward_trace(&x)?;
                let h = concatenate(&x, t.output())?;
                (Some(t), h)
            }
            None => (None, x),
        };
        Ok(DecoderTrace {
            sfe,
            trunk: self.trunk.forward_trace(&h)?,
        })
    }

    /// Returns the gradient w.r.t. the `[batch, 2W]` input and the parameter
    /// gradients in [`DecoderNet::params`] order.
    pub fn backward(
        &self,
        trace: &DecoderTrace<T>,
        grad_logits: &TensorOf<T>,
    ) -> Result<(TensorOf<T>, Vec<TensorOf<T>>)> {
        let (g_h, trunk_grads) = self.trunk.backward(&trace.trunk, grad_logits)?;
        match (&self.sfe, &trace.sfe) {
            (Some(net), Some(t)) => {
                let (mut g_x, g_feat) = split_features(&g_h, 2 * self.config.window());
                let (g_x2, mut grads) = net.backward(t, &g_feat)?;
                g_x.add_assign(&g_x2.reshaped(g_x.shape().to_vec())?);
                grads.extend(trunk_grads);
                Ok((g_x, grads))
            }
            _ => Ok((g_h, trunk_grads)),
        }
    }

    /// Hash of the discrete branches (relu signs, pool winners) of a traced pass.
    pub fn branch_signature(&self, trace: &DecoderTrace<T>) -> u64 {
        let s = match (&self.sfe, &trace.sfe) {
            (Some(net), Some(t)) => net.branch_signature(t),
            _ => 0,
        };
        s.rotate_left(1) ^ self.trunk.branch_signature(&trace.trunk)
    }
}
