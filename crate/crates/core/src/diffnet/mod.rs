//! Minimal differentiable-network core: tensors, the layer kinds of the
//! transceiver, softmax cross entropy, Adam, and a finite-difference oracle.

pub mod gradcheck;
pub mod init;
pub mod layers;
pub mod optim;
pub mod sequential;
pub mod tensor;

pub use gradcheck::{compare_gradient, finite_diff_gradient, GradComparison};
pub use layers::{
    argmax, concatenate, cross_entropy, normalize_to_unit_disk, relu, softmax,
    softmax_cross_entropy, split_features, Conv1d, Dense, Embedding, Layer, LayerKind, LayerSpec,
    MaxPool1d,
};
pub use optim::{AdamConfig, OptimizerState};
pub use sequential::{Sequential, Trace};
pub use tensor::{matmul, TensorOf};
