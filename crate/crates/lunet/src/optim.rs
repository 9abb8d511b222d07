//! First-order optimizers: plain SGD and bias-corrected Adam.
//!
//! Both operate on flat parameter slices so the training loop can walk a
//! network's trainable arrays (strict triangles and biases) in a fixed
//! order. Adam keeps its moment estimates in flat arrays indexed the same
//! way. One `begin_step` per mini-batch advances the shared timestep used
//! for bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serializable optimizer choice for configs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerSpec {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerSpec {
    pub fn validate(&self) -> Result<()> {
        if let OptimizerSpec::Adam { beta1, beta2, epsilon } = self {
            for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
                if !(0.0 < *b && *b < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "{name} must lie strictly between 0 and 1, got {b}"
                    )));
                }
            }
            if !(*epsilon > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "epsilon must be positive, got {epsilon}"
                )));
            }
        }
        Ok(())
    }
}

/// Stateful optimizer over a flat parameter space of known size.
#[derive(Clone, Debug)]
pub enum Optimizer {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        m: Vec<f64>,
        v: Vec<f64>,
        t: u64,
    },
}

impl Optimizer {
    pub fn from_spec(spec: &OptimizerSpec, param_count: usize) -> Result<Self> {
        spec.validate()?;
        Ok(match *spec {
            OptimizerSpec::Sgd => Optimizer::Sgd,
            OptimizerSpec::Adam { beta1, beta2, epsilon } => Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
                m: vec![0.0; param_count],
                v: vec![0.0; param_count],
                t: 0,
            },
        })
    }

    /// Advance the timestep. Call exactly once per mini-batch, before the
    /// `apply` calls for that batch.
    pub fn begin_step(&mut self) {
        if let Optimizer::Adam { t, .. } = self {
            *t += 1;
        }
    }

    /// Update `params` in place from `grads`. `offset` locates this slice
    /// inside the flat parameter space so Adam reads the right moments.
    pub fn apply(&mut self, lr: f64, offset: usize, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        match self {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
                m,
                v,
                t,
            } => {
                debug_assert!(*t >= 1, "begin_step must run before apply");
                let bc1 = 1.0 - beta1.powi(*t as i32);
                let bc2 = 1.0 - beta2.powi(*t as i32);
                for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let s = offset + i;
                    m[s] = *beta1 * m[s] + (1.0 - *beta1) * g;
                    v[s] = *beta2 * v[s] + (1.0 - *beta2) * g * g;
                    let m_hat = m[s] / bc1;
                    let v_hat = v[s] / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + *epsilon);
                }
            }
        }
    }
}
