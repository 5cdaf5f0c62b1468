use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;

use super::layers::Layer;
use super::tensor::TensorOf;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Ordered stack of named layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequential<T> {
    layers: Vec<(String, Layer<T>)>,
}

/// Activations recorded by [`Sequential::forward_trace`]: entry `i` is the
/// input of layer `i`, the last entry is the network output.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub activations: Vec<TensorOf<T>>,
}

impl<T: Real> Trace<T> {
    pub fn output(&self) -> &TensorOf<T> {
        self.activations.last().expect("trace holds the input")
    }
}

impl<T: Real> Default for Sequential<T> {
    fn default() -> Self {
        Self { layers: Vec::new() }
    }
}

impl<T: Real> Sequential<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, layer: Layer<T>) -> &mut Self {
        self.layers.push((name.into(), layer));
        self
    }

    pub fn layers(&self) -> &[(String, Layer<T>)] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [(String, Layer<T>)] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|(_, l)| l.spec().param_count()).sum()
    }

    pub fn params(&self) -> Vec<&TensorOf<T>> {
        self.layers.iter().flat_map(|(_, l)| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut TensorOf<T>> {
        self.layers.iter_mut().flat_map(|(_, l)| l.params_mut()).collect()
    }

    /// `(layer name, parameter)` pairs in parameter order.
    pub fn named_params(&self) -> Vec<(String, &TensorOf<T>)> {
        let mut out = Vec::new();
        for (name, layer) in &self.layers {
            for (j, p) in layer.params().into_iter().enumerate() {
                let suffix = if j == 0 { "weight" } else { "bias" };
                out.push((format!("{name}.{suffix}"), p));
            }
        }
        out
    }

    fn check_finite(&self, index: usize, t: &TensorOf<T>) -> Result<()> {
        if t.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                index,
                name: self.layers[index].0.clone(),
            })
        }
    }

    pub fn forward(&self, x: &TensorOf<T>) -> Result<TensorOf<T>> {
        let mut h = x.clone();
        for (i, (_, layer)) in self.layers.iter().enumerate() {
            h = layer.forward(&h)?;
            self.check_finite(i, &h)?;
        }
        Ok(h)
    }

    pub fn forward_trace(&self, x: &TensorOf<T>) -> Result<Trace<T>> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for (i, (_, layer)) in self.layers.iter().enumerate() {
            let h = layer.forward(activations.last().expect("nonempty"))?;
            self.check_finite(i, &h)?;
            activations.push(h);
        }
        Ok(Trace { activations })
    }

    /// Reverse pass. Returns the gradient w.r.t. the network input and the
    /// parameter gradients in [`Sequential::params`] order.
    pub fn backward(
        &self,
        trace: &Trace<T>,
        grad_out: &TensorOf<T>,
    ) -> Result<(TensorOf<T>, Vec<TensorOf<T>>)> {
        let mut g = grad_out.clone();
        let mut per_layer: Vec<Vec<TensorOf<T>>> = Vec::with_capacity(self.layers.len());
        for (i, (_, layer)) in self.layers.iter().enumerate().rev() {
            let (gx, gp) = layer.backward(&trace.activations[i], &g)?;
            self.check_finite(i, &gx)?;
            per_layer.push(gp);
            g = gx;
        }
        per_layer.reverse();
        Ok((g, per_layer.into_iter().flatten().collect()))
    }

    /// Hash of every discrete branch taken during the traced pass.
    pub fn branch_signature(&self, trace: &Trace<T>) -> u64 {
        let mut h = DefaultHasher::new();
        for (i, (_, layer)) in self.layers.iter().enumerate() {
            layer.hash_branches(&trace.activations[i], &mut h);
        }
        h.finish()
    }
}
