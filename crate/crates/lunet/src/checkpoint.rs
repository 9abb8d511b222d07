//! Checkpoint serialization: JSON topology with bit-exact float payloads.
//!
//! Parameter arrays are stored as the hex encoding of each f64's
//! little-endian byte pattern, so saving and reloading never rounds and a
//! save/load/save cycle is byte identical. The scalar slope of a leaky ReLU
//! travels the same way. Topology and provenance stay human-readable JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::layers::{Activation, InvertibleLinear};
use crate::linalg::{strict_len, TriangularParams};
use crate::network::{Block, InvertibleNet};

/// Version stamp shared by checkpoints and metrics records.
pub const FORMAT_VERSION: u32 = 1;

fn floats_to_hex(vals: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(vals.len() * 8);
    for v in vals {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    hex::encode(bytes)
}

fn hex_to_floats(s: &str, field: &str) -> Result<Vec<f64>> {
    let bytes = hex::decode(s)
        .map_err(|e| Error::CorruptCheckpoint(format!("field '{field}': bad hex: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::CorruptCheckpoint(format!(
            "field '{field}': {} bytes is not a whole number of f64 values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// SHA-256 hex digest, used to fingerprint the run configuration.
pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Where the checkpoint came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub epoch: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ActivationRecord {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<String>,
}

impl ActivationRecord {
    fn from_activation(act: &Activation) -> Self {
        match act {
            Activation::Identity => ActivationRecord {
                kind: "identity".into(),
                alpha: None,
            },
            Activation::LeakyRelu { alpha } => ActivationRecord {
                kind: "leaky_relu".into(),
                alpha: Some(floats_to_hex(&[*alpha])),
            },
        }
    }

    fn to_activation(&self, block: usize) -> Result<Activation> {
        match self.kind.as_str() {
            "identity" => Ok(Activation::Identity),
            "leaky_relu" => {
                let hexval = self.alpha.as_ref().ok_or_else(|| {
                    Error::CorruptCheckpoint(format!(
                        "block {block}: leaky_relu activation missing alpha"
                    ))
                })?;
                let vals = hex_to_floats(hexval, "alpha")?;
                if vals.len() != 1 {
                    return Err(Error::CorruptCheckpoint(format!(
                        "block {block}: alpha must be a single value, got {}",
                        vals.len()
                    )));
                }
                Activation::leaky_relu(vals[0]).map_err(|e| {
                    Error::CorruptCheckpoint(format!("block {block}: {e}"))
                })
            }
            other => Err(Error::CorruptCheckpoint(format!(
                "block {block}: unknown activation kind '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BlockRecord {
    l: String,
    u: String,
    k: String,
    bias: String,
    activation: ActivationRecord,
}

/// Serializable snapshot of a network plus provenance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    format_version: u32,
    dim: usize,
    depth: usize,
    blocks: Vec<BlockRecord>,
    provenance: Provenance,
}

impl Checkpoint {
    pub fn from_net(net: &InvertibleNet, provenance: Provenance) -> Self {
        let blocks = net
            .blocks()
            .iter()
            .map(|b| BlockRecord {
                l: floats_to_hex(b.linear.params().l()),
                u: floats_to_hex(b.linear.params().u()),
                k: floats_to_hex(b.linear.params().k()),
                bias: floats_to_hex(b.linear.bias()),
                activation: ActivationRecord::from_activation(&b.activation),
            })
            .collect();
        Checkpoint {
            format_version: FORMAT_VERSION,
            dim: net.dim(),
            depth: net.depth(),
            blocks,
            provenance,
        }
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Reconstruct the network, validating every structural invariant.
    pub fn to_net(&self) -> Result<InvertibleNet> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::CorruptCheckpoint(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.depth == 0 || self.blocks.len() != self.depth {
            return Err(Error::CorruptCheckpoint(format!(
                "depth {} does not match {} stored blocks",
                self.depth,
                self.blocks.len()
            )));
        }
        let n = self.dim;
        let m = strict_len(n);
        let mut blocks = Vec::with_capacity(self.depth);
        for (i, rec) in self.blocks.iter().enumerate() {
            let l = hex_to_floats(&rec.l, "l")?;
            let u = hex_to_floats(&rec.u, "u")?;
            let k = hex_to_floats(&rec.k, "k")?;
            let bias = hex_to_floats(&rec.bias, "bias")?;
            if l.len() != m || u.len() != m {
                return Err(Error::CorruptCheckpoint(format!(
                    "block {i}: triangle lengths l={} u={} do not match n(n-1)/2={m} for dim {n}",
                    l.len(),
                    u.len()
                )));
            }
            if k.len() != n || bias.len() != n {
                return Err(Error::CorruptCheckpoint(format!(
                    "block {i}: k length {} or bias length {} does not match dim {n}",
                    k.len(),
                    bias.len()
                )));
            }
            // A zero or subnormal diagonal in a stored artifact is file
            // corruption, not a runtime singularity.
            let params = TriangularParams::new(n, l, u, k)
                .map_err(|e| Error::CorruptCheckpoint(format!("block {i}: {e}")))?;
            let linear = InvertibleLinear::new(params, bias)
                .map_err(|e| Error::CorruptCheckpoint(format!("block {i}: {e}")))?;
            blocks.push(Block {
                linear,
                activation: rec.activation.to_activation(i)?,
            });
        }
        InvertibleNet::from_blocks(blocks)
            .map_err(|e| Error::CorruptCheckpoint(e.to_string()))
    }

    /// Serialize to a single JSON line. Field order is fixed, so equal
    /// checkpoints produce equal bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialization cannot fail") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::CorruptCheckpoint(format!("invalid JSON: {e}")))?;
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::CorruptCheckpoint(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                ckpt.format_version
            )));
        }
        Ok(ckpt)
    }
}
