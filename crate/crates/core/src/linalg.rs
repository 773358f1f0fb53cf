//! Small dense complex linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Gram matrices with a larger condition number are treated as singular.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Ratio of largest to smallest singular value (infinite for rank-deficient input).
pub fn condition_number(m: &CMat) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Scales every column to unit Euclidean norm. Zero columns are left untouched.
pub fn normalize_columns(m: &mut CMat) {
    for mut col in m.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= Complex64::new(n, 0.0);
        }
    }
}

/// Solves `a x = b` for Hermitian positive-definite `a` by Cholesky.
pub fn hpd_solve(a: CMat, b: &CMat, context: &'static str) -> Result<CMat> {
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => Err(Error::Singular {
            context,
            condition: condition_number(&a),
        }),
    }
}

/// Left pseudo-inverse `(G^H G)^-1 G^H` of a full-column-rank matrix.
pub fn left_pinv(g: &CMat, context: &'static str) -> Result<CMat> {
    let cond = condition_number(g);
    if !(cond * cond <= MAX_GRAM_CONDITION) {
        return Err(Error::Singular {
            context,
            condition: cond * cond,
        });
    }
    let gh = g.adjoint();
    hpd_solve(&gh * g, &gh, context)
}

/// Relative Frobenius distance `‖a − b‖ / ‖b‖`.
pub fn rel_frobenius(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm()
}
