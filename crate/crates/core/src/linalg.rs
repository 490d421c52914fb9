//! Small dense helpers shared by the analysis modules.

use std::cmp::Ordering;

use nalgebra::Cholesky;

use crate::{Error, Matrix, Result, Vector};

/// Per-coordinate finite-difference step: `step · (1 + |xᵢ|)`.
#[inline]
pub fn fd_step(xi: f64, step: f64) -> f64 {
    step * (1.0 + xi.abs())
}

/// Central-difference Jacobian of `field` at `x`, column by column.
pub fn central_jacobian<F>(field: F, x: &Vector, step: f64) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    let n = x.len();
    let mut columns = Vec::with_capacity(n);
    let mut probe = x.clone();
    for i in 0..n {
        let h = fd_step(x[i], step);
        probe[i] = x[i] + h;
        let plus = field(&probe);
        probe[i] = x[i] - h;
        let minus = field(&probe);
        probe[i] = x[i];
        columns.push((plus - minus) / (2.0 * h));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    Matrix::from_fn(rows, n, |r, c| columns[c][r])
}

/// Central-difference gradient of a scalar function.
pub fn central_gradient<F>(func: F, x: &Vector, step: f64) -> Vector
where
    F: Fn(&Vector) -> f64,
{
    let mut probe = x.clone();
    Vector::from_fn(x.len(), |i, _| {
        let h = fd_step(x[i], step);
        probe[i] = x[i] + h;
        let plus = func(&probe);
        probe[i] = x[i] - h;
        let minus = func(&probe);
        probe[i] = x[i];
        (plus - minus) / (2.0 * h)
    })
}

/// Central-difference derivative of a scalar function of one variable.
pub fn central_derivative<F>(func: F, s: f64, step: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let h = fd_step(s, step);
    (func(s + h) - func(s - h)) / (2.0 * h)
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest absolute entry of a vector.
pub fn max_abs_vec(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Inverse of a symmetric positive-definite matrix.
///
/// Symmetry is checked to 1e-12 absolute; definiteness by Cholesky.
pub fn spd_inverse(m: &Matrix, what: &str) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::dim(what, "square matrix", format!("{}x{}", m.nrows(), m.ncols())));
    }
    if max_abs(&(m - m.transpose())) > 1e-12 {
        return Err(Error::NotPositiveDefinite { what: what.to_string() });
    }
    Cholesky::new(m.clone())
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NotPositiveDefinite { what: what.to_string() })
}

/// Lexicographic order on coordinates, used to canonicalize result lists.
pub fn lexicographic(a: &Vector, b: &Vector) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Symmetric Hausdorff distance between two finite point sets.
///
/// Two empty sets are at distance zero; an empty and a non-empty set are
/// infinitely far apart.
pub fn hausdorff(a: &[Vector], b: &[Vector]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let directed = |from: &[Vector], to: &[Vector]| {
        from.iter()
            .map(|p| to.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0_f64, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_of_linear_map_is_exact() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, -2.0, 3.0, 0.5]);
        let a2 = a.clone();
        let x = Vector::from_vec(vec![0.3, -1.2]);
        let j = central_jacobian(move |x| &a2 * x, &x, 1e-5);
        assert!(max_abs(&(j - a)) < 1e-10);
    }

    #[test]
    fn spd_inverse_rejects_indefinite() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(spd_inverse(&m, "G"), Err(Error::NotPositiveDefinite { .. })));
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(spd_inverse(&asym, "G").is_err());
    }

    #[test]
    fn hausdorff_of_shifted_sets() {
        let a = vec![Vector::from_vec(vec![0.0, 0.0]), Vector::from_vec(vec![1.0, 0.0])];
        let b = vec![Vector::from_vec(vec![0.0, 0.1]), Vector::from_vec(vec![1.0, 0.0])];
        assert!((hausdorff(&a, &b) - 0.1).abs() < 1e-15);
        assert_eq!(hausdorff(&[], &[]), 0.0);
        assert!(hausdorff(&a, &[]).is_infinite());
    }
}
