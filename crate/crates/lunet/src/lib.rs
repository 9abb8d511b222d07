//! Invertible neural networks built from LU-structured linear layers.
//!
//! Every weight matrix is kept as a product of a unit lower triangular
//! factor and an upper triangular factor whose diagonal is fixed at
//! construction, so the determinant is a training-invariant constant and
//! the network can be inverted exactly with forward and back substitution.
//! On top of that core sit leaky-ReLU blocks, manual reverse-mode
//! gradients, SGD/Adam training, deterministic dataset generators, and
//! bit-exact checkpoint and dataset formats.

pub mod checkpoint;
pub mod dataio;
pub mod error;
pub mod layers;
pub mod linalg;
pub mod network;
pub mod optim;
pub mod rng;
pub mod tasks;
pub mod train;

pub use error::{Error, Result};
pub use layers::{Activation, InvertibleLinear, LinearGrads};
pub use linalg::{Matrix, TriangularParams, Vector};
pub use network::{Block, ForwardTrace, InvertibleNet, NetConfig, NetGrads};
pub use optim::{Optimizer, OptimizerSpec};
pub use train::{fit, mse_loss, noise_perturbed_inversion, MetricsRecord, TrainConfig};
