//! Dataset generators: elementwise function-regression tasks and a
//! synthetic embedding-pair task.
//!
//! The function tasks apply a strictly monotone scalar map coordinate by
//! coordinate over a fixed sampling interval, so the target is injective
//! and inversion is well posed. The embedding task stands in for a pair of
//! pretrained encoders: a hidden random invertible net (the oracle) maps
//! input vectors to target vectors, and the oracle is kept alongside the
//! pairs so evaluation can recover true inverse images.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{Activation, InvertibleLinear};
use crate::linalg::{strict_len, TriangularParams, Vector};
use crate::network::{Block, InvertibleNet};
use crate::rng;

/// Scalar target family for the regression tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    Sine,
    Polynomial,
    Exponential,
}

impl FunctionKind {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            FunctionKind::Sine => x.sin(),
            FunctionKind::Polynomial => x * x * x + x,
            FunctionKind::Exponential => x.exp(),
        }
    }

    /// Largest natural interval on which the map is injective (sine), or a
    /// unit working interval (polynomial, exponential are injective on all
    /// of R).
    pub fn default_domain(&self) -> (f64, f64) {
        match self {
            FunctionKind::Sine => (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
            FunctionKind::Polynomial | FunctionKind::Exponential => (-1.0, 1.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FunctionKind::Sine => "sine",
            FunctionKind::Polynomial => "polynomial",
            FunctionKind::Exponential => "exponential",
        }
    }
}

impl std::str::FromStr for FunctionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(FunctionKind::Sine),
            "polynomial" => Ok(FunctionKind::Polynomial),
            "exponential" => Ok(FunctionKind::Exponential),
            other => Err(Error::InvalidParameter(format!(
                "unknown function kind '{other}' (expected sine, polynomial, or exponential)"
            ))),
        }
    }
}

/// Full description of a function-regression dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionTaskSpec {
    pub kind: FunctionKind,
    pub dim: usize,
    /// Per-coordinate sampling interval [lo, hi].
    pub domain: (f64, f64),
    pub train_count: usize,
    pub eval_count: usize,
    pub seed: u64,
}

impl FunctionTaskSpec {
    pub fn new(kind: FunctionKind, seed: u64) -> Self {
        FunctionTaskSpec {
            kind,
            dim: 4,
            domain: kind.default_domain(),
            train_count: 8192,
            eval_count: 1024,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be positive".into()));
        }
        if self.train_count == 0 || self.eval_count == 0 {
            return Err(Error::InvalidParameter(
                "train_count and eval_count must be positive".into(),
            ));
        }
        let (lo, hi) = self.domain;
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidDomain {
                field: "domain".into(),
                reason: format!("need finite lo < hi, got [{lo}, {hi}]"),
            });
        }
        if self.kind == FunctionKind::Sine {
            let half_pi = std::f64::consts::FRAC_PI_2;
            if lo < -half_pi || hi > half_pi {
                return Err(Error::InvalidDomain {
                    field: "domain".into(),
                    reason: format!(
                        "sine is injective only on [-pi/2, pi/2]; got [{lo}, {hi}]"
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Matched input/target vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSplit {
    inputs: Vec<Vector>,
    targets: Vec<Vector>,
}

impl DataSplit {
    pub fn new(inputs: Vec<Vector>, targets: Vec<Vector>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        if let Some(first) = inputs.first() {
            let dim = first.dim();
            for v in inputs.iter().chain(&targets) {
                if v.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: v.dim(),
                    });
                }
            }
        }
        Ok(DataSplit { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, |v| v.dim())
    }

    pub fn inputs(&self) -> &[Vector] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vector] {
        &self.targets
    }
}

/// How a dataset was produced; stored in the dataset file header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum DatasetDescriptor {
    Function(FunctionTaskSpec),
    Embedding {
        dim: usize,
        depth: usize,
        train_count: usize,
        eval_count: usize,
        seed: u64,
    },
}

impl DatasetDescriptor {
    pub fn dim(&self) -> usize {
        match self {
            DatasetDescriptor::Function(spec) => spec.dim,
            DatasetDescriptor::Embedding { dim, .. } => *dim,
        }
    }
}

/// Train/eval pair with its generation record.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub descriptor: DatasetDescriptor,
    pub train: DataSplit,
    pub eval: DataSplit,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.descriptor.dim()
    }
}

/// Sample `count` vectors with i.i.d. coordinates in [lo, hi), retrying the
/// astronomically rare exact duplicate so train and eval stay disjoint.
fn sample_distinct<R: Rng>(rng: &mut R, count: usize, dim: usize, lo: f64, hi: f64) -> Vec<Vector> {
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(lo..hi)).collect();
        let key: Vec<u64> = v.iter().map(|f| f.to_bits()).collect();
        if seen.insert(key) {
            out.push(Vector::new(v));
        }
    }
    out
}

/// Deterministically generate a function-regression dataset from its spec.
pub fn generate_function_dataset(spec: &FunctionTaskSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, rng::STREAM_DATA);
    let (lo, hi) = spec.domain;
    let total = spec.train_count + spec.eval_count;
    let inputs = sample_distinct(&mut rng, total, spec.dim, lo, hi);
    let targets: Vec<Vector> = inputs
        .iter()
        .map(|x| Vector::new(x.iter().map(|&v| spec.kind.apply(v)).collect()))
        .collect();

    let mut in_train = inputs;
    let in_eval = in_train.split_off(spec.train_count);
    let mut tg_train = targets;
    let tg_eval = tg_train.split_off(spec.train_count);

    Ok(Dataset {
        descriptor: DatasetDescriptor::Function(spec.clone()),
        train: DataSplit::new(in_train, tg_train)?,
        eval: DataSplit::new(in_eval, tg_eval)?,
    })
}

/// Input/target pairs generated by a hidden invertible map.
#[derive(Clone, Debug)]
pub struct EmbeddingPairSet {
    pub inputs: Vec<Vector>,
    pub targets: Vec<Vector>,
    /// The ground-truth map that produced the targets.
    pub oracle: InvertibleNet,
    /// Human-readable record of how the pairs were generated.
    pub generator_spec: String,
}

impl EmbeddingPairSet {
    /// Pair `count` fresh uniform inputs in [-1, 1]^dim with the oracle's
    /// outputs. The targets are exactly the oracle's forward images, so
    /// re-applying the oracle reproduces them bit for bit.
    pub fn from_oracle(
        oracle: InvertibleNet,
        count: usize,
        seed: u64,
        generator_spec: String,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter("pair count must be positive".into()));
        }
        let mut rng = rng::stream(seed, rng::STREAM_DATA);
        let inputs = sample_distinct(&mut rng, count, oracle.dim(), -1.0, 1.0);
        let targets = inputs
            .iter()
            .map(|x| oracle.forward(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(EmbeddingPairSet {
            inputs,
            targets,
            oracle,
            generator_spec,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Split into a dataset: the first `train_count` pairs train, the rest
    /// evaluate.
    pub fn split(&self, train_count: usize, descriptor: DatasetDescriptor) -> Result<Dataset> {
        if train_count == 0 || train_count >= self.len() {
            return Err(Error::InvalidParameter(format!(
                "train_count {} must be positive and leave at least one eval pair of {}",
                train_count,
                self.len()
            )));
        }
        Ok(Dataset {
            descriptor,
            train: DataSplit::new(
                self.inputs[..train_count].to_vec(),
                self.targets[..train_count].to_vec(),
            )?,
            eval: DataSplit::new(
                self.inputs[train_count..].to_vec(),
                self.targets[train_count..].to_vec(),
            )?,
        })
    }
}

/// Build the hidden ground-truth net for the embedding task.
///
/// Off-diagonal entries are drawn wider than the training initialization
/// (0.5/sqrt(n) vs 0.1/sqrt(n)) and biases get a small jitter, so the
/// oracle is a nontrivial map while staying mildly conditioned. The student
/// architecture (same depth, same activation family) can represent it
/// exactly.
fn build_oracle<R: Rng>(dim: usize, depth: usize, rng: &mut R) -> Result<InvertibleNet> {
    let scale = 0.5 / (dim as f64).sqrt();
    let m = strict_len(dim);
    let mut blocks = Vec::with_capacity(depth);
    for b in 0..depth {
        let l: Vec<f64> = (0..m).map(|_| rng.random_range(-scale..scale)).collect();
        let u: Vec<f64> = (0..m).map(|_| rng.random_range(-scale..scale)).collect();
        let bias: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.1..0.1)).collect();
        let params = TriangularParams::new(dim, l, u, vec![1.0; dim])?;
        let activation = if b + 1 == depth {
            Activation::Identity
        } else {
            Activation::leaky_relu(0.1)?
        };
        blocks.push(Block {
            linear: InvertibleLinear::new(params, bias)?,
            activation,
        });
    }
    InvertibleNet::from_blocks(blocks)
}

/// Generate synthetic embedding pairs from a freshly built hidden oracle.
pub fn generate_embedding_pairs(
    dim: usize,
    count: usize,
    depth: usize,
    seed: u64,
) -> Result<EmbeddingPairSet> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "embedding dim must be at least 2, got {dim}"
        )));
    }
    if depth == 0 {
        return Err(Error::InvalidParameter(
            "oracle depth must be at least 1".into(),
        ));
    }
    let mut oracle_rng = rng::stream(seed, rng::STREAM_ORACLE);
    let oracle = build_oracle(dim, depth, &mut oracle_rng)?;
    let generator_spec = format!(
        "hidden invertible net: dim {dim}, depth {depth}, leaky slope 0.1, unit diagonal, seed {seed}, noiseless targets"
    );
    EmbeddingPairSet::from_oracle(oracle, count, seed, generator_spec)
}

/// The unique real root of x^3 + x = y, by bisection to 1e-12.
///
/// The cubic is strictly increasing, so the root is unique; it is used as
/// an implementation-independent ground truth when checking inversion
/// errors on the polynomial task.
pub fn polynomial_invert_reference(y: f64) -> f64 {
    let f = |x: f64| x * x * x + x - y;
    let bound = y.abs().max(1.0);
    let (mut lo, mut hi) = (-bound, bound);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
