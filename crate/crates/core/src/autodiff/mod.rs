//! Minimal reverse-mode automatic differentiation over dense matrices,
//! small fully connected networks, and the Adam optimizer.

mod adam;
mod graph;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamError, AdamState};
pub use graph::{Gradients, Graph, GraphError, GramKernel, NodeId, Op, Shape};
pub use mlp::{Activation, Layer, MlpError, MlpGrads, MlpNodes, MlpParams, LEAKY_SLOPE};
