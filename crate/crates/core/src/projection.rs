//! Orthogonal projections onto growing complex subspaces.
//!
//! A [`SpanAccumulator`] represents the column space of a matrix that is
//! extended one vector at a time. Internally it keeps an orthonormal basis,
//! so appending a vector `y` reduces to the sequential projection update
//!
//! ```text
//! P_[A, y] x = P_A x + <x - P_A x, y - P_A y> / ||y - P_A y||^2 (y - P_A y)
//! ```
//!
//! which with an orthonormalized residual `q = (y - P_A y)/||y - P_A y||`
//! is just `P x += q q^H x`. The orthonormal representation is preferred
//! over normal equations `A (A^H A)^{-1} A^H` for conditioning.

use std::fmt;

use crate::{CMatrix, CVector, Cpx};

/// Residual norm below which an appended vector counts as already in the span.
pub const SPAN_MEMBERSHIP_TOL: f64 = 1e-10;

/// Errors raised by span operations.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionError {
    /// Appended vector is numerically inside the current span. In the SOPC
    /// solver this indicates an ill-posed active set and must surface.
    DegenerateAppend { residual: f64 },
}

impl fmt::Display for ProjectionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjectionError::DegenerateAppend { residual } => write!(
                f,
                "appended vector lies in the accumulated span (residual norm {residual:.3e})"
            ),
        }
    }
}

impl std::error::Error for ProjectionError {}

/// Orthonormal basis of the span of the vectors appended so far.
#[derive(Debug, Clone)]
pub struct SpanAccumulator {
    dim: usize,
    basis: Vec<CVector>,
}

impl SpanAccumulator {
    /// Empty accumulator over `C^dim`.
    pub fn new(dim: usize) -> Self {
        Self { dim, basis: Vec::new() }
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis vectors accumulated (the subspace dimension).
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Orthonormal basis columns.
    pub fn basis(&self) -> &[CVector] {
        &self.basis
    }

    /// Orthogonal projection of `x` onto the accumulated span.
    ///
    /// Panics if `x` does not have the ambient dimension.
    pub fn project(&self, x: &CVector) -> CVector {
        assert_eq!(x.len(), self.dim, "projection dimension mismatch");
        let mut out = CVector::zeros(self.dim);
        for q in &self.basis {
            let coef = q.dotc(x); // q^H x
            out.axpy(coef, q, Cpx::new(1.0, 0.0));
        }
        out
    }

    /// Projection onto the orthogonal complement: `x - P x`.
    pub fn project_complement(&self, x: &CVector) -> CVector {
        x - self.project(x)
    }

    /// Extend the span by `y`.
    ///
    /// Fails with [`ProjectionError::DegenerateAppend`] when the residual of
    /// `y` against the current span has norm below [`SPAN_MEMBERSHIP_TOL`].
    pub fn append(&mut self, y: &CVector) -> Result<(), ProjectionError> {
        assert_eq!(y.len(), self.dim, "append dimension mismatch");
        let r = self.project_complement(y);
        let norm = r.norm();
        if norm < SPAN_MEMBERSHIP_TOL {
            return Err(ProjectionError::DegenerateAppend { residual: norm });
        }
        // Re-orthogonalize once to keep the basis orthonormal to ~1e-15
        // even for nearly dependent appends.
        let q = self.project_complement(&(r / Cpx::new(norm, 0.0)));
        let qn = q.norm();
        if qn < SPAN_MEMBERSHIP_TOL {
            return Err(ProjectionError::DegenerateAppend { residual: qn });
        }
        self.basis.push(q / Cpx::new(qn, 0.0));
        Ok(())
    }

    /// Like [`append`](Self::append), but silently skips vectors already in
    /// the span. Returns whether the span grew.
    pub fn append_or_skip(&mut self, y: &CVector) -> bool {
        match self.append(y) {
            Ok(()) => true,
            Err(ProjectionError::DegenerateAppend { .. }) => false,
        }
    }

    /// Dense projector matrix `Q Q^H`. Mostly useful for diagnostics.
    pub fn projector_matrix(&self) -> CMatrix {
        let mut p = CMatrix::zeros(self.dim, self.dim);
        for q in &self.basis {
            p += q * q.adjoint();
        }
        p
    }
}
