//! Complex least squares on a handful of columns.

use nalgebra::{DMatrix, DVector};

use crate::C64;

const RIDGE: f64 = 1e-12;
const RANK_TOL: f64 = 1e-12;

enum Factor {
    Qr {
        q: DMatrix<C64>,
        r: DMatrix<C64>,
    },
    /// Cholesky factor of `A^H A + ridge·I`, used when `R` is numerically singular.
    Ridge {
        l: DMatrix<C64>,
        a: DMatrix<C64>,
    },
}

/// A factored tall matrix, reusable for many right-hand sides.
pub struct LeastSquares {
    factor: Factor,
}

impl LeastSquares {
    /// `a` must have at least as many rows as columns.
    pub fn new(a: DMatrix<C64>) -> Self {
        debug_assert!(a.nrows() >= a.ncols());
        let qr = a.clone().qr();
        let r = qr.r();
        let max_diag = r.diagonal().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let singular = r.ncols() > 0
            && r.diagonal()
                .iter()
                .any(|v| v.norm() <= RANK_TOL * max_diag.max(f64::MIN_POSITIVE));
        if !singular {
            return LeastSquares {
                factor: Factor::Qr { q: qr.q(), r },
            };
        }
        log::debug!(
            "singular Gram matrix on {} columns, regularizing with ridge {RIDGE:e}",
            a.ncols()
        );
        let mut gram = a.adjoint() * &a;
        for k in 0..gram.nrows() {
            gram[(k, k)] += C64::new(RIDGE, 0.0);
        }
        let l = gram
            .cholesky()
            .map(|c| c.l())
            .unwrap_or_else(|| DMatrix::identity(a.ncols(), a.ncols()));
        LeastSquares {
            factor: Factor::Ridge { l, a },
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let b = DVector::from_column_slice(b);
        let x = match &self.factor {
            Factor::Qr { q, r } => {
                let qtb = q.adjoint() * b;
                r.solve_upper_triangular(&qtb)
                    .unwrap_or_else(|| DVector::zeros(r.ncols()))
            }
            Factor::Ridge { l, a } => {
                let rhs = a.adjoint() * b;
                let z = l
                    .solve_lower_triangular(&rhs)
                    .unwrap_or_else(|| DVector::zeros(l.ncols()));
                l.adjoint()
                    .solve_upper_triangular(&z)
                    .unwrap_or_else(|| DVector::zeros(l.ncols()))
            }
        };
        x.iter().copied().collect()
    }
}
