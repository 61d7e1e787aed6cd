//! Nonsmooth composite terms `ψ` with a closed-form proximal map.
//!
//! The proximal maps here are Euclidean (coordinate-wise), so composite
//! problems are only supported with the identity metric.

use std::fmt::Debug;

use nalgebra::{Cholesky, DMatrix, DVector};

/// A proper closed convex function with a cheap proximal map.
pub trait CompositePart: Debug + Send + Sync {
    fn name(&self) -> &str;

    /// `ψ(x)`, or `+∞` outside the domain.
    fn value(&self, x: &DVector<f64>) -> f64;

    /// `argmin_y { ψ(y) + ‖y − z‖² / (2·step) }`.
    fn prox(&self, z: &DVector<f64>, step: f64) -> DVector<f64>;

    /// Whether `s ∈ ∂ψ(x)` up to `tol` per coordinate.
    fn is_subgradient(&self, s: &DVector<f64>, x: &DVector<f64>, tol: f64) -> bool;

    /// Euclidean distance from `s` to `∂ψ(x)`; `+∞` when `x ∉ dom ψ`.
    fn subgradient_distance(&self, s: &DVector<f64>, x: &DVector<f64>) -> f64;

    /// Some element of `∂ψ(x)`, or `None` when `x ∉ dom ψ`.
    fn subgradient(&self, x: &DVector<f64>) -> Option<DVector<f64>>;

    /// Exact minimizer of `½yᵀAy + cᵀy + ψ(y)` on the face of `ψ` containing
    /// the approximate solution `y`, if that face point satisfies the
    /// optimality conditions. `A` must be positive definite.
    fn polish(&self, _a: &DMatrix<f64>, _c: &DVector<f64>, _y: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }
}

/// `ψ ≡ 0`.
#[derive(Clone, Debug, Default)]
pub struct Zero;

impl CompositePart for Zero {
    fn name(&self) -> &str {
        "zero"
    }

    fn value(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    fn prox(&self, z: &DVector<f64>, _step: f64) -> DVector<f64> {
        z.clone()
    }

    fn is_subgradient(&self, s: &DVector<f64>, _x: &DVector<f64>, tol: f64) -> bool {
        s.iter().all(|v| v.abs() <= tol)
    }

    fn subgradient_distance(&self, s: &DVector<f64>, _x: &DVector<f64>) -> f64 {
        s.norm()
    }

    fn subgradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(DVector::zeros(x.len()))
    }

    fn polish(&self, a: &DMatrix<f64>, c: &DVector<f64>, _y: &DVector<f64>) -> Option<DVector<f64>> {
        Cholesky::new(a.clone()).map(|f| -f.solve(c))
    }
}

/// `ψ(x) = w‖x‖₁`.
#[derive(Clone, Debug)]
pub struct L1Norm {
    pub weight: f64,
}

impl L1Norm {
    pub fn new(weight: f64) -> Self {
        assert!(weight >= 0.0, "l1 weight must be nonnegative");
        Self { weight }
    }
}

impl CompositePart for L1Norm {
    fn name(&self) -> &str {
        "l1"
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.weight * x.lp_norm(1)
    }

    fn prox(&self, z: &DVector<f64>, step: f64) -> DVector<f64> {
        let t = self.weight * step;
        z.map(|v| {
            if v > t {
                v - t
            } else if v < -t {
                v + t
            } else {
                0.0
            }
        })
    }

    fn is_subgradient(&self, s: &DVector<f64>, x: &DVector<f64>, tol: f64) -> bool {
        let w = self.weight;
        s.len() == x.len()
            && s.iter().zip(x.iter()).all(|(&si, &xi)| {
                if xi > 0.0 {
                    (si - w).abs() <= tol
                } else if xi < 0.0 {
                    (si + w).abs() <= tol
                } else {
                    si.abs() <= w + tol
                }
            })
    }

    fn subgradient_distance(&self, s: &DVector<f64>, x: &DVector<f64>) -> f64 {
        let w = self.weight;
        s.iter()
            .zip(x.iter())
            .map(|(&si, &xi)| {
                let d = if xi > 0.0 {
                    si - w
                } else if xi < 0.0 {
                    si + w
                } else {
                    (si.abs() - w).max(0.0)
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    fn subgradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(x.map(|v| {
            if v > 0.0 {
                self.weight
            } else if v < 0.0 {
                -self.weight
            } else {
                0.0
            }
        }))
    }

    fn polish(&self, a: &DMatrix<f64>, c: &DVector<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
        let n = y.len();
        let support: Vec<usize> = (0..n).filter(|&i| y[i] != 0.0).collect();
        let mut out = DVector::zeros(n);
        if !support.is_empty() {
            let signs = DVector::from_iterator(support.len(), support.iter().map(|&i| y[i].signum()));
            let a_ss = a.select_rows(support.iter()).select_columns(support.iter());
            let rhs = -(c.select_rows(support.iter()) + &signs * self.weight);
            let sol = Cholesky::new(a_ss)?.solve(&rhs);
            for (k, &i) in support.iter().enumerate() {
                if sol[k].signum() != signs[k] || sol[k] == 0.0 {
                    return None;
                }
                out[i] = sol[k];
            }
        }
        let grad = a * &out + c;
        let inactive_ok = (0..n)
            .filter(|&i| out[i] == 0.0)
            .all(|i| grad[i].abs() <= self.weight);
        inactive_ok.then_some(out)
    }
}

/// Indicator of the box `{lower ≤ x ≤ upper}`; bounds may be infinite.
#[derive(Clone, Debug)]
pub struct BoxIndicator {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl BoxIndicator {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(lower.iter().zip(upper.iter()).all(|(l, u)| l <= u), "empty box");
        Self { lower, upper }
    }

    /// `{x ≥ 0}`.
    pub fn nonnegative(n: usize) -> Self {
        Self::new(DVector::zeros(n), DVector::from_element(n, f64::INFINITY))
    }

    fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.lower.len()
            && (0..x.len()).all(|i| self.lower[i] <= x[i] && x[i] <= self.upper[i])
    }
}

impl CompositePart for BoxIndicator {
    fn name(&self) -> &str {
        "box"
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        if self.contains(x) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox(&self, z: &DVector<f64>, _step: f64) -> DVector<f64> {
        DVector::from_iterator(
            z.len(),
            (0..z.len()).map(|i| z[i].clamp(self.lower[i], self.upper[i])),
        )
    }

    fn is_subgradient(&self, s: &DVector<f64>, x: &DVector<f64>, tol: f64) -> bool {
        if s.len() != x.len() || !self.contains(x) {
            return false;
        }
        (0..x.len()).all(|i| {
            let at_lower = x[i] == self.lower[i];
            let at_upper = x[i] == self.upper[i];
            match (at_lower, at_upper) {
                (true, true) => true,
                (true, false) => s[i] <= tol,
                (false, true) => s[i] >= -tol,
                (false, false) => s[i].abs() <= tol,
            }
        })
    }

    fn subgradient_distance(&self, s: &DVector<f64>, x: &DVector<f64>) -> f64 {
        if !self.contains(x) {
            return f64::INFINITY;
        }
        (0..x.len())
            .map(|i| {
                let d = match (x[i] == self.lower[i], x[i] == self.upper[i]) {
                    (true, true) => 0.0,
                    (true, false) => s[i].max(0.0),
                    (false, true) => (-s[i]).max(0.0),
                    (false, false) => s[i].abs(),
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    fn subgradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.contains(x).then(|| DVector::zeros(x.len()))
    }

    fn polish(&self, a: &DMatrix<f64>, c: &DVector<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
        let n = y.len();
        let free: Vec<usize> = (0..n)
            .filter(|&i| self.lower[i] < y[i] && y[i] < self.upper[i])
            .collect();
        let mut out = y.clone();
        if !free.is_empty() {
            // Fixed coordinates enter the reduced system through A_{F,fixed}.
            let mut fixed_only = y.clone();
            for &i in &free {
                fixed_only[i] = 0.0;
            }
            let coupling = a * &fixed_only;
            let a_ff = a.select_rows(free.iter()).select_columns(free.iter());
            let rhs = -(c.select_rows(free.iter()) + coupling.select_rows(free.iter()));
            let sol = Cholesky::new(a_ff)?.solve(&rhs);
            for (k, &i) in free.iter().enumerate() {
                if !(self.lower[i] <= sol[k] && sol[k] <= self.upper[i]) {
                    return None;
                }
                out[i] = sol[k];
            }
        }
        // Free coordinates have a roundoff-level gradient by construction;
        // only the sign conditions on the active bounds are checked.
        let s = -(a * &out + c);
        let ok = (0..n).all(|i| {
            let at_lower = out[i] == self.lower[i];
            let at_upper = out[i] == self.upper[i];
            match (at_lower, at_upper) {
                (true, false) => s[i] <= 0.0,
                (false, true) => s[i] >= 0.0,
                _ => true,
            }
        });
        ok.then_some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(values: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(values)
    }

    #[test]
    fn l1_prox_is_soft_threshold() {
        let l1 = L1Norm::new(0.5);
        assert_eq!(l1.prox(&v(&[2.0, -0.3, -1.0]), 1.0), v(&[1.5, 0.0, -0.5]));
        assert_eq!(l1.value(&v(&[1.0, -2.0])), 1.5);
    }

    #[test]
    fn l1_membership() {
        let l1 = L1Norm::new(1.0);
        assert!(l1.is_subgradient(&v(&[1.0, -1.0, 0.3]), &v(&[2.0, -1.0, 0.0]), 1e-12));
        assert!(!l1.is_subgradient(&v(&[0.9, -1.0, 0.3]), &v(&[2.0, -1.0, 0.0]), 1e-12));
        assert!(!l1.is_subgradient(&v(&[1.0, -1.0, 1.2]), &v(&[2.0, -1.0, 0.0]), 1e-12));
    }

    #[test]
    fn box_membership_uses_normal_cone() {
        let b = BoxIndicator::nonnegative(2);
        assert!(b.is_subgradient(&v(&[-2.0, 0.0]), &v(&[0.0, 1.0]), 1e-12));
        assert!(!b.is_subgradient(&v(&[2.0, 0.0]), &v(&[0.0, 1.0]), 1e-12));
        assert!(!b.is_subgradient(&v(&[0.0, 0.0]), &v(&[-1.0, 1.0]), 1e-12));
        assert_eq!(b.value(&v(&[-1.0, 0.0])), f64::INFINITY);
        assert!(b.subgradient(&v(&[-1.0, 0.0])).is_none());
    }

    #[test]
    fn l1_polish_recovers_exact_solution() {
        // min y² − 3y + |y| → y = 1 (A = 2, c = −3).
        let l1 = L1Norm::new(1.0);
        let a = DMatrix::from_element(1, 1, 2.0);
        let sol = l1.polish(&a, &v(&[-3.0]), &v(&[0.99])).unwrap();
        assert!((sol[0] - 1.0).abs() < 1e-15);
        // Wrong sign pattern is rejected.
        assert!(l1.polish(&a, &v(&[-3.0]), &v(&[-0.5])).is_none());
    }

    #[test]
    fn box_polish_active_bound() {
        // min y² + 2y over y ≥ 0 → y = 0.
        let b = BoxIndicator::nonnegative(1);
        let a = DMatrix::from_element(1, 1, 2.0);
        assert_eq!(b.polish(&a, &v(&[2.0]), &v(&[0.0])).unwrap(), v(&[0.0]));
        assert!(b.polish(&a, &v(&[-2.0]), &v(&[0.0])).is_none());
    }

    proptest! {
        #[test]
        fn prox_certificate_is_accepted(
            z in prop::collection::vec(-5.0f64..5.0, 1..6),
            step in 0.01f64..10.0,
            w in 0.0f64..2.0,
        ) {
            let z = DVector::from_vec(z);
            let n = z.len();
            let parts: Vec<Box<dyn CompositePart>> = vec![
                Box::new(L1Norm::new(w)),
                Box::new(BoxIndicator::new(DVector::from_element(n, -1.0), DVector::from_element(n, 2.0))),
                Box::new(Zero),
            ];
            for psi in parts {
                let p = psi.prox(&z, step);
                prop_assert!(psi.value(&p).is_finite());
                let cert = (&z - &p) / step;
                prop_assert!(psi.is_subgradient(&cert, &p, 1e-9), "{}: {:?}", psi.name(), cert);
            }
        }
    }
}
