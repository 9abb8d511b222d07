//! Invertible building blocks: LU-structured affine layers and activations.
//!
//! Both pieces expose an exact inverse. The affine layer inverts by
//! triangular substitution against its own factors, and the leaky ReLU
//! inverts by dividing the negative half-line by its slope. Composing the
//! two therefore yields blocks whose inverse is exact up to floating-point
//! rounding, with no iterative refinement anywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lower_row_offset, strict_len, upper_row_offset, TriangularParams, Vector};

/// Elementwise activation with an exact inverse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    /// `x` for `x >= 0`, `alpha * x` otherwise. `alpha` must be positive so
    /// the map stays a bijection.
    LeakyRelu { alpha: f64 },
    /// Pass-through, used by default on the final block so outputs cover
    /// all of R^n rather than a slope-distorted half-space.
    Identity,
}

impl Activation {
    pub fn leaky_relu(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "leaky ReLU slope must be positive and finite, got {alpha}"
            )));
        }
        Ok(Activation::LeakyRelu { alpha })
    }

    /// True when the activation is the identity map, including a leaky ReLU
    /// whose slope is exactly 1.
    pub fn effectively_identity(&self) -> bool {
        match self {
            Activation::Identity => true,
            Activation::LeakyRelu { alpha } => *alpha == 1.0,
        }
    }

    pub fn forward_scalar(&self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::LeakyRelu { alpha } => {
                if x >= 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
        }
    }

    pub fn inverse_scalar(&self, y: f64) -> f64 {
        match self {
            Activation::Identity => y,
            Activation::LeakyRelu { alpha } => {
                if y >= 0.0 {
                    y
                } else {
                    y / alpha
                }
            }
        }
    }

    /// Slope at `x`, defined from the forward branch (right-continuous at 0).
    pub fn derivative_scalar(&self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::LeakyRelu { alpha } => {
                if x >= 0.0 {
                    1.0
                } else {
                    *alpha
                }
            }
        }
    }

    pub fn forward(&self, x: &Vector) -> Vector {
        Vector::new(x.iter().map(|&v| self.forward_scalar(v)).collect())
    }

    pub fn inverse(&self, y: &Vector) -> Vector {
        Vector::new(y.iter().map(|&v| self.inverse_scalar(v)).collect())
    }

    /// Chain-rule pullback: `d_x = act'(x) * d_y`, elementwise, where `x`
    /// is the pre-activation input.
    pub fn backward(&self, x: &Vector, d_y: &Vector) -> Vector {
        Vector::new(
            x.iter()
                .zip(d_y.iter())
                .map(|(&xi, &gi)| self.derivative_scalar(xi) * gi)
                .collect(),
        )
    }
}

/// Gradients of one affine layer for a single input/output-gradient pair.
#[derive(Clone, Debug)]
pub struct LinearGrads {
    /// Gradient w.r.t. the strict-lower entries, same layout as the parameters.
    pub d_l: Vec<f64>,
    /// Gradient w.r.t. the strict-upper entries, same layout as the parameters.
    pub d_u: Vec<f64>,
    /// Gradient w.r.t. the bias.
    pub d_bias: Vec<f64>,
    /// Gradient w.r.t. the layer input, for chaining into earlier layers.
    pub d_input: Vector,
}

/// Affine map `y = L U x + b` with guaranteed-invertible weight.
///
/// The diagonal constants of `U` are fixed at construction; only the strict
/// triangles and the bias train. There is no mutable accessor for the
/// diagonal and `backward` produces no gradient for it, so the determinant
/// of the weight is pinned for the life of the layer.
#[derive(Clone, Debug, PartialEq)]
pub struct InvertibleLinear {
    params: TriangularParams,
    bias: Vec<f64>,
}

impl InvertibleLinear {
    pub fn new(params: TriangularParams, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != params.n() {
            return Err(Error::DimensionMismatch {
                expected: params.n(),
                got: bias.len(),
            });
        }
        Ok(InvertibleLinear { params, bias })
    }

    /// Identity map of dimension `n`: identity weight, zero bias.
    pub fn identity(n: usize) -> Self {
        InvertibleLinear {
            params: TriangularParams::identity(n),
            bias: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.params.n()
    }

    pub fn params(&self) -> &TriangularParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut TriangularParams {
        &mut self.params
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// `y = W x + b`.
    pub fn forward(&self, x: &Vector) -> Result<Vector> {
        let mut y = self.params.apply_weight(x)?;
        for (yi, bi) in y.iter_mut().zip(&self.bias) {
            *yi += bi;
        }
        Ok(y)
    }

    /// `x = W^-1 (y - b)`, by forward then back substitution.
    pub fn inverse(&self, y: &Vector) -> Result<Vector> {
        if y.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: y.dim(),
            });
        }
        let shifted = Vector::new(y.iter().zip(&self.bias).map(|(a, b)| a - b).collect());
        self.params.solve_weight(&shifted)
    }

    /// Analytic gradients for input `x` and output gradient `g`.
    ///
    /// With `z = U x` and `t = L^T g`:
    ///   d_l[(i,j)] = g_i * z_j   (strict lower),
    ///   d_u[(i,j)] = t_i * x_j   (strict upper),
    ///   d_bias = g,  d_input = U^T t.
    /// Everything is O(n^2) and the diagonal of `U` gets no entry at all.
    pub fn backward(&self, x: &Vector, g: &Vector) -> Result<LinearGrads> {
        let n = self.dim();
        if x.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.dim() });
        }
        if g.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.dim() });
        }

        let z = self.params.apply_upper(x);
        let t = self.params.apply_lower_transpose(g);

        let m = strict_len(n);
        let mut d_l = vec![0.0; m];
        for i in 1..n {
            let off = lower_row_offset(i);
            let gi = g[i];
            for j in 0..i {
                d_l[off + j] = gi * z[j];
            }
        }

        let mut d_u = vec![0.0; m];
        for i in 0..n {
            let off = upper_row_offset(n, i);
            let ti = t[i];
            for (m_idx, xj) in x[i + 1..].iter().enumerate() {
                d_u[off + m_idx] = ti * xj;
            }
        }

        let d_input = Vector::new(self.params.apply_upper_transpose(&t));

        Ok(LinearGrads {
            d_l,
            d_u,
            d_bias: g.as_slice().to_vec(),
            d_input,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{lower_index, upper_index, Matrix};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn leaky_relu_forward_branches() {
        let act = Activation::leaky_relu(0.1).unwrap();
        assert_eq!(act.forward_scalar(2.0), 2.0);
        assert_eq!(act.forward_scalar(-2.0), -0.2);
        assert_eq!(act.forward_scalar(0.0), 0.0);
    }

    #[test]
    fn leaky_relu_inverse_branches() {
        let act = Activation::leaky_relu(0.1).unwrap();
        assert_eq!(act.inverse_scalar(2.0), 2.0);
        assert!((act.inverse_scalar(-0.2) - (-2.0)).abs() < 1e-15);
    }

    #[test]
    fn leaky_relu_round_trip_exact_at_representable_points() {
        let act = Activation::leaky_relu(0.25).unwrap();
        for &x in &[-8.0, -0.5, 0.0, 0.5, 8.0] {
            assert_eq!(act.inverse_scalar(act.forward_scalar(x)), x);
        }
    }

    #[test]
    fn leaky_relu_rejects_nonpositive_slope() {
        assert!(Activation::leaky_relu(0.0).is_err());
        assert!(Activation::leaky_relu(-0.1).is_err());
        assert!(Activation::leaky_relu(f64::NAN).is_err());
    }

    #[test]
    fn unit_slope_is_effectively_identity() {
        assert!(Activation::leaky_relu(1.0).unwrap().effectively_identity());
        assert!(Activation::Identity.effectively_identity());
        assert!(!Activation::leaky_relu(0.1).unwrap().effectively_identity());
    }

    #[test]
    fn activation_backward_scales_by_branch_slope() {
        let act = Activation::leaky_relu(0.1).unwrap();
        let x = Vector::new(vec![2.0, -3.0, 0.0]);
        let g = Vector::new(vec![1.0, 1.0, 1.0]);
        let d = act.backward(&x, &g);
        assert_eq!(d.as_slice(), &[1.0, 0.1, 1.0]);
    }

    #[test]
    fn linear_forward_adds_bias() {
        let layer = InvertibleLinear::new(
            TriangularParams::identity(2),
            vec![0.1, -0.2],
        )
        .unwrap();
        let y = layer.forward(&Vector::new(vec![1.0, 1.0])).unwrap();
        assert_eq!(y.as_slice(), &[1.1, 0.8]);
    }

    #[test]
    fn linear_inverse_round_trip() {
        let params = TriangularParams::new(
            3,
            vec![0.3, -0.2, 0.5],
            vec![0.1, 0.4, -0.6],
            vec![1.5, -0.7, 2.0],
        )
        .unwrap();
        let layer = InvertibleLinear::new(params, vec![0.2, -0.1, 0.05]).unwrap();
        let x = Vector::new(vec![0.7, -1.3, 2.2]);
        let y = layer.forward(&x).unwrap();
        let back = layer.inverse(&y).unwrap();
        assert!(back.inf_dist(&x) < 1e-12);
    }

    #[test]
    fn backward_hand_example_identity_params() {
        // Identity weight, x = [1, 0], g = [0, 1]:
        // z = x, t = g, so d_l = [g_1 * z_0] = [1], d_u = [t_0 * x_1] = [0].
        let layer = InvertibleLinear::identity(2);
        let grads = layer
            .backward(&Vector::new(vec![1.0, 0.0]), &Vector::new(vec![0.0, 1.0]))
            .unwrap();
        assert_eq!(grads.d_l, vec![1.0]);
        assert_eq!(grads.d_u, vec![0.0]);
        assert_eq!(grads.d_bias, vec![0.0, 1.0]);
        assert_eq!(grads.d_input.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn backward_matches_dense_formulas() {
        // Dense oracle: with G = g x^T, d_L = (G U^T) masked strict-lower,
        // d_U = (L^T G) masked strict-upper, d_input = W^T g.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 6;
        let m = strict_len(n);
        let l: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let params = TriangularParams::new(n, l, u, k).unwrap();
        let layer = InvertibleLinear::new(params, vec![0.0; n]).unwrap();

        let x = Vector::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect());
        let g = Vector::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect());
        let grads = layer.backward(&x, &g).unwrap();

        let lmat = layer.params().materialize_lower();
        let umat = layer.params().materialize_upper();
        let w = layer.params().compose_weight();

        let mut outer = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                outer.set(i, j, g[i] * x[j]);
            }
        }
        // G U^T
        let mut gut = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for t in 0..n {
                    s += outer.get(i, t) * umat.get(j, t);
                }
                gut.set(i, j, s);
            }
        }
        // L^T G
        let mut ltg = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for t in 0..n {
                    s += lmat.get(t, i) * outer.get(t, j);
                }
                ltg.set(i, j, s);
            }
        }
        for i in 1..n {
            for j in 0..i {
                let want = gut.get(i, j);
                let got = grads.d_l[lower_index(i, j)];
                assert!((want - got).abs() < 1e-12, "d_l ({i},{j}): {want} vs {got}");
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let want = ltg.get(i, j);
                let got = grads.d_u[upper_index(n, i, j)];
                assert!((want - got).abs() < 1e-12, "d_u ({i},{j}): {want} vs {got}");
            }
        }
        let mut wtg = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                wtg[i] += w.get(j, i) * g[j];
            }
        }
        for i in 0..n {
            assert!((grads.d_input[i] - wtg[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_agrees_with_finite_differences() {
        // Scalar loss s(theta) = sum(forward(x)) probed parameter by
        // parameter with central differences.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 4;
        let m = strict_len(n);
        let l: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..0.5)).collect();
        let u: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..0.5)).collect();
        let k: Vec<f64> = (0..n).map(|_| rng.random_range(0.8..1.2)).collect();
        let bias: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..0.3)).collect();
        let layer =
            InvertibleLinear::new(TriangularParams::new(n, l, u, k).unwrap(), bias).unwrap();
        let x = Vector::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
        let g = Vector::new(vec![1.0; n]);

        let grads = layer.backward(&x, &g).unwrap();
        let h = 1e-6;
        let loss = |layer: &InvertibleLinear| -> f64 {
            layer.forward(&x).unwrap().iter().sum()
        };

        for idx in 0..m {
            let mut plus = layer.clone();
            plus.params_mut().l_mut()[idx] += h;
            let mut minus = layer.clone();
            minus.params_mut().l_mut()[idx] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!(
                (fd - grads.d_l[idx]).abs() <= 1e-4 * fd.abs().max(1.0),
                "l[{idx}]: fd {fd} vs analytic {}",
                grads.d_l[idx]
            );
        }
        for idx in 0..m {
            let mut plus = layer.clone();
            plus.params_mut().u_mut()[idx] += h;
            let mut minus = layer.clone();
            minus.params_mut().u_mut()[idx] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!(
                (fd - grads.d_u[idx]).abs() <= 1e-4 * fd.abs().max(1.0),
                "u[{idx}]: fd {fd} vs analytic {}",
                grads.d_u[idx]
            );
        }
        for idx in 0..n {
            let mut plus = layer.clone();
            plus.bias_mut()[idx] += h;
            let mut minus = layer.clone();
            minus.bias_mut()[idx] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!((fd - grads.d_bias[idx]).abs() <= 1e-4 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn bias_length_must_match_dimension() {
        let err = InvertibleLinear::new(TriangularParams::identity(3), vec![0.0; 2]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, got: 2 }));
    }

    #[test]
    fn activation_serde_round_trip() {
        for act in [Activation::leaky_relu(0.1).unwrap(), Activation::Identity] {
            let json = serde_json::to_string(&act).unwrap();
            let back: Activation = serde_json::from_str(&json).unwrap();
            assert_eq!(act, back);
        }
    }
}
