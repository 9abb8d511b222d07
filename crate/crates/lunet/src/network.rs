//! Whole-network composition: stacked invertible blocks, exact inversion,
//! and the reverse-mode sweep.
//!
//! A network is an ordered list of blocks, each an affine layer followed by
//! an activation, all sharing one dimension. The forward pass runs the
//! blocks in order; the inverse undoes the activation and then the affine
//! map of each block in reverse order. Because every block inverts exactly,
//! the round trip lands back on the input up to rounding regardless of what
//! values the trainable parameters hold.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{Activation, InvertibleLinear, LinearGrads};
use crate::linalg::{strict_len, TriangularParams, Vector};

/// One affine-plus-activation stage.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub linear: InvertibleLinear,
    pub activation: Activation,
}

impl Block {
    pub fn forward(&self, x: &Vector) -> Result<Vector> {
        Ok(self.activation.forward(&self.linear.forward(x)?))
    }

    pub fn inverse(&self, y: &Vector) -> Result<Vector> {
        self.linear.inverse(&self.activation.inverse(y))
    }
}

/// Construction-time description of a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub dim: usize,
    /// Number of blocks.
    pub depth: usize,
    /// Leaky ReLU slope for the hidden activations.
    pub alpha: f64,
    /// When true the final block also gets a leaky ReLU; by default it is
    /// Identity so outputs are unconstrained.
    pub final_leaky_relu: bool,
    /// Fixed diagonal constants for every block's U factor; `None` means all
    /// ones. Shared across blocks.
    pub diag: Option<Vec<f64>>,
}

impl NetConfig {
    pub fn new(dim: usize) -> Self {
        NetConfig {
            dim,
            depth: 3,
            alpha: 0.1,
            final_leaky_relu: false,
            diag: None,
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be positive".into()));
        }
        if self.depth == 0 {
            return Err(Error::InvalidParameter(
                "depth must be at least one block".into(),
            ));
        }
        if let Some(diag) = &self.diag {
            if diag.len() != self.dim {
                return Err(Error::InvalidParameter(format!(
                    "diag length {} does not match dim {}",
                    diag.len(),
                    self.dim
                )));
            }
        }
        Ok(())
    }

    fn diag_for_block(&self) -> Vec<f64> {
        self.diag.clone().unwrap_or_else(|| vec![1.0; self.dim])
    }
}

/// Per-block cached values from a forward pass, consumed by `backward`.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// Input to each block.
    inputs: Vec<Vector>,
    /// Pre-activation output of each block's affine stage.
    pre_acts: Vec<Vector>,
    /// Final network output.
    output: Vector,
}

impl ForwardTrace {
    pub fn output(&self) -> &Vector {
        &self.output
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Gradients for every block plus the pullback to the network input.
#[derive(Clone, Debug)]
pub struct NetGrads {
    pub blocks: Vec<LinearGrads>,
    pub d_input: Vector,
}

/// Stack of invertible blocks sharing one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct InvertibleNet {
    blocks: Vec<Block>,
    dim: usize,
}

impl InvertibleNet {
    pub fn from_blocks(blocks: Vec<Block>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidParameter("network needs at least one block".into()))?;
        let dim = first.linear.dim();
        for (i, b) in blocks.iter().enumerate() {
            if b.linear.dim() != dim {
                return Err(Error::in_block(
                    i,
                    Error::DimensionMismatch {
                        expected: dim,
                        got: b.linear.dim(),
                    },
                ));
            }
        }
        Ok(InvertibleNet { blocks, dim })
    }

    /// Fresh network with small random strict triangles, zero biases, and
    /// the configured fixed diagonal. Off-diagonal entries are drawn uniform
    /// in [-0.1/sqrt(n), 0.1/sqrt(n)] so the initial weight is close to
    /// diag(k) and well conditioned.
    pub fn init<R: Rng>(cfg: &NetConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.dim;
        let scale = 0.1 / (n as f64).sqrt();
        let hidden = Activation::leaky_relu(cfg.alpha)?;
        let m = strict_len(n);
        let mut blocks = Vec::with_capacity(cfg.depth);
        for b in 0..cfg.depth {
            let l: Vec<f64> = (0..m).map(|_| rng.random_range(-scale..scale)).collect();
            let u: Vec<f64> = (0..m).map(|_| rng.random_range(-scale..scale)).collect();
            let params = TriangularParams::new(n, l, u, cfg.diag_for_block())
                .map_err(|e| Error::in_block(b, e))?;
            let linear = InvertibleLinear::new(params, vec![0.0; n])?;
            let activation = if b + 1 == cfg.depth && !cfg.final_leaky_relu {
                Activation::Identity
            } else {
                hidden
            };
            blocks.push(Block { linear, activation });
        }
        Ok(InvertibleNet { blocks, dim: n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// Run the blocks in order.
    pub fn forward(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x.dim())?;
        let mut h = x.clone();
        for (i, block) in self.blocks.iter().enumerate() {
            h = block.forward(&h).map_err(|e| Error::in_block(i, e))?;
        }
        Ok(h)
    }

    /// Forward pass that caches per-block inputs and pre-activations.
    pub fn forward_traced(&self, x: &Vector) -> Result<ForwardTrace> {
        self.check_dim(x.dim())?;
        let depth = self.blocks.len();
        let mut inputs = Vec::with_capacity(depth);
        let mut pre_acts = Vec::with_capacity(depth);
        let mut h = x.clone();
        for (i, block) in self.blocks.iter().enumerate() {
            let pre = block.linear.forward(&h).map_err(|e| Error::in_block(i, e))?;
            let out = block.activation.forward(&pre);
            inputs.push(h);
            pre_acts.push(pre);
            h = out;
        }
        Ok(ForwardTrace {
            inputs,
            pre_acts,
            output: h,
        })
    }

    /// Undo the blocks in exact reverse order: activation inverse first,
    /// then the affine inverse, per block. Errors carry the block index.
    pub fn inverse(&self, y: &Vector) -> Result<Vector> {
        self.check_dim(y.dim())?;
        let mut h = y.clone();
        for (i, block) in self.blocks.iter().enumerate().rev() {
            h = block.inverse(&h).map_err(|e| Error::in_block(i, e))?;
        }
        Ok(h)
    }

    /// Reverse-mode sweep. `g` is the gradient of the loss w.r.t. the
    /// network output; the result holds per-block parameter gradients in
    /// block order. The fixed diagonals receive no gradient anywhere.
    pub fn backward(&self, trace: &ForwardTrace, g: &Vector) -> Result<NetGrads> {
        if trace.len() != self.blocks.len() {
            return Err(Error::TraceMismatch(format!(
                "trace covers {} blocks, network has {}",
                trace.len(),
                self.blocks.len()
            )));
        }
        self.check_dim(g.dim())?;
        let mut grad = g.clone();
        let mut per_block: Vec<Option<LinearGrads>> = vec![None; self.blocks.len()];
        for (i, block) in self.blocks.iter().enumerate().rev() {
            let g_pre = block.activation.backward(&trace.pre_acts[i], &grad);
            let grads = block
                .linear
                .backward(&trace.inputs[i], &g_pre)
                .map_err(|e| Error::in_block(i, e))?;
            grad = grads.d_input.clone();
            per_block[i] = Some(grads);
        }
        Ok(NetGrads {
            blocks: per_block.into_iter().map(|g| g.unwrap()).collect(),
            d_input: grad,
        })
    }

    /// Max over the batch of the infinity-norm round-trip residual
    /// `inverse(forward(x)) - x`.
    pub fn round_trip_error(&self, xs: &[Vector]) -> Result<f64> {
        if xs.is_empty() {
            return Err(Error::EmptyDataset("round-trip batch".into()));
        }
        let mut worst: f64 = 0.0;
        for x in xs {
            let back = self.inverse(&self.forward(x)?)?;
            worst = worst.max(back.inf_dist(x));
        }
        Ok(worst)
    }

    /// Determinant of each block's weight matrix, in block order.
    pub fn weight_determinants(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| b.linear.params().determinant())
            .collect()
    }

    /// Product of all block determinants: the determinant of the full
    /// linear composition, pinned at construction time.
    pub fn determinant_product(&self) -> f64 {
        self.weight_determinants().iter().product()
    }

    /// Per-block exact 1-norm condition estimates of the weight matrices.
    pub fn condition_estimates(&self) -> Result<Vec<f64>> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                b.linear
                    .params()
                    .condition_1norm()
                    .map_err(|e| Error::in_block(i, e))
            })
            .collect()
    }
}
