//! Fixed-metric geometry.
//!
//! A [`Metric`] wraps a self-adjoint positive-definite operator `B`. Points and
//! directions live in the primal space with norm `‖x‖ = ⟨Bx, x⟩^{1/2}`;
//! gradients and subgradients live in the dual space with the induced norm
//! `‖s‖_* = ⟨s, B⁻¹s⟩^{1/2}`. The two spaces are kept apart by the [`Primal`]
//! and [`Dual`] wrappers so a gradient can never be measured with the primal
//! norm by accident.

use std::ops::{Deref, DerefMut};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_dim, Error, Result};

macro_rules! space_vector {
    ($name:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name(pub DVector<f64>);

        impl $name {
            pub fn zeros(n: usize) -> Self {
                Self(DVector::zeros(n))
            }

            pub fn from_slice(values: &[f64]) -> Self {
                Self(DVector::from_column_slice(values))
            }

            pub fn into_inner(self) -> DVector<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = DVector<f64>;
            fn deref(&self) -> &DVector<f64> {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut DVector<f64> {
                &mut self.0
            }
        }

        impl From<DVector<f64>> for $name {
            fn from(v: DVector<f64>) -> Self {
                Self(v)
            }
        }
    };
}

space_vector!(Primal, "A point or direction in the primal space `E`.");
space_vector!(Dual, "A gradient or subgradient in the dual space `E*`.");

impl Dual {
    /// The pairing `⟨s, v⟩`.
    pub fn pair(&self, v: &Primal) -> f64 {
        self.0.dot(&v.0)
    }
}

#[derive(Clone, Debug)]
enum Operator {
    Identity,
    Dense {
        matrix: DMatrix<f64>,
        factor: Cholesky<f64, Dyn>,
    },
}

/// The operator `B` defining primal and dual norms.
///
/// Immutable after construction; the Cholesky factor of a dense `B` is
/// computed once and reused by every dual-norm evaluation.
#[derive(Clone, Debug)]
pub struct Metric {
    n: usize,
    op: Operator,
}

impl Metric {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            op: Operator::Identity,
        }
    }

    /// Builds a metric from a dense matrix. The matrix must be exactly
    /// symmetric as stored and positive definite.
    pub fn dense(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        check_dim(n, matrix.ncols())?;
        for i in 0..n {
            for j in 0..i {
                if matrix[(i, j)] != matrix[(j, i)] {
                    return Err(Error::MetricNotPositiveDefinite);
                }
            }
        }
        let factor = Cholesky::new(matrix.clone()).ok_or(Error::MetricNotPositiveDefinite)?;
        Ok(Self {
            n,
            op: Operator::Dense { matrix, factor },
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.op, Operator::Identity)
    }

    /// Dense copy of `B`.
    pub fn matrix(&self) -> DMatrix<f64> {
        match &self.op {
            Operator::Identity => DMatrix::identity(self.n, self.n),
            Operator::Dense { matrix, .. } => matrix.clone(),
        }
    }

    /// `Bv`, mapping a primal vector to the dual space.
    pub fn apply(&self, v: &Primal) -> Result<Dual> {
        check_dim(self.n, v.len())?;
        Ok(match &self.op {
            Operator::Identity => Dual(v.0.clone()),
            Operator::Dense { matrix, .. } => Dual(matrix * &v.0),
        })
    }

    /// `B⁻¹s`, mapping a dual vector to the primal space.
    pub fn to_primal(&self, s: &Dual) -> Result<Primal> {
        check_dim(self.n, s.len())?;
        Ok(match &self.op {
            Operator::Identity => Primal(s.0.clone()),
            Operator::Dense { factor, .. } => Primal(factor.solve(&s.0)),
        })
    }

    pub fn primal_norm(&self, v: &Primal) -> Result<f64> {
        let bv = self.apply(v)?;
        Ok(bv.pair(v).max(0.0).sqrt())
    }

    pub fn dual_norm(&self, s: &Dual) -> Result<f64> {
        let v = self.to_primal(s)?;
        Ok(s.pair(&v).max(0.0).sqrt())
    }

    /// Dense `H + λB`.
    pub fn shifted(&self, hess: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
        check_dim(self.n, hess.nrows())?;
        check_dim(self.n, hess.ncols())?;
        let mut a = hess.clone();
        match &self.op {
            Operator::Identity => {
                for i in 0..self.n {
                    a[(i, i)] += lambda;
                }
            }
            Operator::Dense { matrix, .. } => a += matrix * lambda,
        }
        Ok(a)
    }

    /// Solves `(H + λB) h = rhs` by a fresh Cholesky factorization.
    ///
    /// A failed factorization with `λ > 0` means `H` was not positive
    /// semidefinite, which points at a broken oracle.
    pub fn solve_shifted(&self, hess: &DMatrix<f64>, lambda: f64, rhs: &Dual) -> Result<Primal> {
        check_dim(self.n, rhs.len())?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::NumericalBreakdown(format!(
                "shift must be positive and finite, got {lambda}"
            )));
        }
        let a = self.shifted(hess, lambda)?;
        let factor = Cholesky::new(a).ok_or_else(|| {
            Error::NumericalBreakdown(format!(
                "H + λB is not positive definite at λ = {lambda:.3e}"
            ))
        })?;
        Ok(Primal(factor.solve(&rhs.0)))
    }
}
