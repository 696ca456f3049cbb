//! Closed-form spectral algebra for 2x2 symmetric matrices.
//!
//! The flow only ever needs eigenvalues and eigenvectors of discrete
//! Hessians in the plane, so everything here is branch-free closed form:
//! no iteration, no convergence tolerance, and a deterministic output
//! convention that makes runs reproducible bit for bit.
//!
//! Conventions: eigenvalues are returned in ascending order, eigenvectors
//! are unit length with the largest-magnitude component positive (ties
//! resolved toward the first component), and the eigenvector columns follow
//! the eigenvalue order.

use crate::operators::{OperatorError, Tau};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    /// The matrix has an eigenvalue `<= 0`, so a cone-restricted operator
    /// cannot be applied to it.
    #[error("matrix is not positive definite (eigenvalues {l1}, {l2})")]
    NotPositiveDefinite { l1: f64, l2: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// A symmetric 2x2 matrix stored by its three distinct entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

/// Result of an eigendecomposition: `a = v * diag(l1, l2) * v^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    /// Smaller eigenvalue.
    pub l1: f64,
    /// Larger eigenvalue.
    pub l2: f64,
    /// Unit eigenvector for `l1`.
    pub v1: [f64; 2],
    /// Unit eigenvector for `l2`.
    pub v2: [f64; 2],
}

impl SymMatrix2 {
    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        SymMatrix2 { a11, a12, a22 }
    }

    pub fn identity() -> Self {
        SymMatrix2::new(1.0, 0.0, 1.0)
    }

    pub fn diag(d1: f64, d2: f64) -> Self {
        SymMatrix2::new(d1, 0.0, d2)
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a11 * v[0] + self.a12 * v[1], self.a12 * v[0] + self.a22 * v[1]]
    }

    /// Quadratic form `v^T A v`.
    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.a11 * v[0] * v[0] + 2.0 * self.a12 * v[0] * v[1] + self.a22 * v[1] * v[1]
    }

    /// Inverse; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<SymMatrix2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(SymMatrix2::new(self.a22 / det, -self.a12 / det, self.a11 / det))
    }

    /// Eigenvalues only, in ascending order.  Cheaper than the full
    /// decomposition; this is what the flow kernel calls per node.
    #[inline]
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let d = (0.5 * (self.a11 - self.a22)).hypot(self.a12);
        (mean - d, mean + d)
    }

    /// Full eigendecomposition with the deterministic conventions described
    /// in the module docs.
    pub fn eigen(&self) -> EigenPair {
        let mean = 0.5 * (self.a11 + self.a22);
        let half_gap = 0.5 * (self.a11 - self.a22);
        let d = half_gap.hypot(self.a12);
        let (l1, l2) = (mean - d, mean + d);

        let scale = self.a11.abs().max(self.a22.abs()).max(self.a12.abs());
        if d <= 1e-15 * scale.max(1.0) {
            // Numerically a multiple of the identity: any orthonormal frame
            // works; pick the canonical one.
            return EigenPair { l1, l2, v1: [1.0, 0.0], v2: [0.0, 1.0] };
        }

        // Two candidate (unnormalised) eigenvectors for the larger
        // eigenvalue; take the better-conditioned one.
        let c1 = [self.a12, l2 - self.a11];
        let c2 = [l2 - self.a22, self.a12];
        let n1 = c1[0] * c1[0] + c1[1] * c1[1];
        let n2 = c2[0] * c2[0] + c2[1] * c2[1];
        let raw2 = if n1 >= n2 { c1 } else { c2 };
        let inv = (raw2[0].hypot(raw2[1])).recip();
        let v2 = fix_sign([raw2[0] * inv, raw2[1] * inv]);
        let v1 = fix_sign([-v2[1], v2[0]]);
        EigenPair { l1, l2, v1, v2 }
    }
}

/// Flips a unit vector so its largest-magnitude component is positive,
/// with ties resolved toward the first component.
fn fix_sign(v: [f64; 2]) -> [f64; 2] {
    let lead = if v[0].abs() >= v[1].abs() { v[0] } else { v[1] };
    if lead < 0.0 {
        [-v[0], -v[1]]
    } else {
        v
    }
}

/// Applies a spectral operator to a positive definite matrix:
/// `F[A] = F(lambda(A))`.
pub fn apply_operator(op: &Tau, a: &SymMatrix2) -> Result<f64, SpectralError> {
    let (l1, l2) = a.eigenvalues();
    if !(l1 > 0.0) {
        return Err(SpectralError::NotPositiveDefinite { l1, l2 });
    }
    Ok(op.phi(l1) + op.phi(l2))
}

/// Derivative of `A -> F(lambda(A))` as a symmetric matrix:
/// `V diag(phi'(l1), phi'(l2)) V^T`.
///
/// Because `F` is a sum of a single scalar function over eigenvalues, this
/// is the exact matrix derivative with respect to symmetric perturbations:
/// entry `(i,j)` equals `dF[A]/dA_ij` where off-diagonal perturbations move
/// `A_ij` and `A_ji` together and the finite difference is halved.
pub fn operator_derivative(op: &Tau, a: &SymMatrix2) -> Result<SymMatrix2, SpectralError> {
    let e = a.eigen();
    if !(e.l1 > 0.0) {
        return Err(SpectralError::NotPositiveDefinite { l1: e.l1, l2: e.l2 });
    }
    let g1 = op.dphi(e.l1);
    let g2 = op.dphi(e.l2);
    Ok(SymMatrix2::new(
        g1 * e.v1[0] * e.v1[0] + g2 * e.v2[0] * e.v2[0],
        g1 * e.v1[0] * e.v1[1] + g2 * e.v2[0] * e.v2[1],
        g1 * e.v1[1] * e.v1[1] + g2 * e.v2[1] * e.v2[1],
    ))
}
