//! The standard symplectic structure and the matrix predicates the rest of
//! the crate is built on.
//!
//! Phase space is `R^{2n}` with coordinates `z = (p, q)` and
//! `J = [[0, -I], [I, 0]]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value threshold used for nullities.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-8;

/// Half-dimension `n` of the phase space `R^{2n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct PhaseSpace {
    n: usize,
}

impl PhaseSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidDimension("half-dimension must be at least 1".into()));
        }
        Ok(Self { n })
    }

    pub fn half_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }
}

/// The `2n x 2n` block matrix `[[0, -I], [I, 0]]`.
pub fn standard_j(n: usize) -> Result<Matrix> {
    let space = PhaseSpace::new(n)?;
    let d = space.dim();
    let mut j = Matrix::zeros(d, d);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    Ok(j)
}

/// `J v` without forming `J`: `(p, q) -> (-q, p)`.
pub fn apply_j(v: &[f64], out: &mut [f64]) {
    let n = v.len() / 2;
    for i in 0..n {
        out[i] = -v[n + i];
        out[n + i] = v[i];
    }
}

/// `J M` without forming `J`.
pub fn j_times(m: &Matrix) -> Matrix {
    let n = m.nrows() / 2;
    let mut out = Matrix::zeros(m.nrows(), m.ncols());
    for c in 0..m.ncols() {
        for i in 0..n {
            out[(i, c)] = -m[(n + i, c)];
            out[(n + i, c)] = m[(i, c)];
        }
    }
    out
}

/// `exp(theta J) = cos(theta) I + sin(theta) J`.
pub fn rotation(theta: f64, n: usize) -> Result<Matrix> {
    let j = standard_j(n)?;
    let (s, c) = theta.sin_cos();
    Ok(Matrix::identity(2 * n, 2 * n) * c + j * s)
}

fn even_order(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidDimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 || m.nrows() % 2 != 0 {
        return Err(Error::InvalidDimension(format!(
            "phase-space operators need even order, got {}",
            m.nrows()
        )));
    }
    Ok(m.nrows() / 2)
}

/// `max |(M^T J M - J)_{ij}|`.
pub fn symplectic_defect(m: &Matrix) -> Result<f64> {
    let n = even_order(m)?;
    let j = standard_j(n)?;
    let d = m.transpose() * j_times(m) - j;
    Ok(d.amax())
}

/// True iff `M^T J M` equals `J` entrywise to within `tol`.
pub fn is_symplectic(m: &Matrix, tol: f64) -> Result<bool> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    Ok(symplectic_defect(m)? <= tol)
}

/// Number of singular values of `m` at or below `tol` times the larger of
/// the top singular value and 1. The floor keeps roundoff-sized matrices
/// such as `exp(2 pi J) - I` from being measured against their own noise.
pub fn kernel_dimension(m: &Matrix, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    count_small(sv.iter().copied(), m.nrows().min(m.ncols()), m.nrows(), tol)
}

fn count_small(sv: impl Iterator<Item = f64> + Clone, rank_bound: usize, order: usize, tol: f64) -> usize {
    let smax = sv.clone().fold(0.0_f64, f64::max);
    let scale = smax.max(1.0);
    // Missing singular values of a non-square matrix count as zero.
    order.saturating_sub(rank_bound) + sv.filter(|&s| s <= tol * scale).count()
}

/// `dim ker(M^k - I)` computed without forming the power.
///
/// `M^k - I` factors over the `k`-th roots of unity, so its kernel is the
/// direct sum of the complex kernels of `M - w I`. Each factor has the
/// conditioning of `M` rather than of `M^k`, which matters for hyperbolic
/// monodromies.
pub fn iterated_nullity(m: &Matrix, k: usize, tol: f64) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidArgument("iteration count must be at least 1".into()));
    }
    let d = m.nrows();
    if d != m.ncols() {
        return Err(Error::InvalidDimension("expected a square matrix".into()));
    }
    if k == 1 {
        return Ok(kernel_dimension(&(m - Matrix::identity(d, d)), tol));
    }
    let mut total = 0;
    for r in 0..k {
        let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * r as f64 / k as f64);
        let shifted = DMatrix::<Complex64>::from_fn(d, d, |i, j| {
            let v = Complex64::new(m[(i, j)], 0.0);
            if i == j {
                v - w
            } else {
                v
            }
        });
        let sv = shifted.svd(false, false).singular_values;
        total += count_small(sv.iter().copied(), d, d, tol);
    }
    Ok(total)
}

/// Symmetric part `(M + M^T) / 2` and the asymmetry it removed.
pub fn symmetrize(m: &Matrix) -> (Matrix, f64) {
    let t = m.transpose();
    let asym = (m - &t).amax() * 0.5;
    ((m + t) * 0.5, asym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn j_for_n1() {
        let j = standard_j(1).unwrap();
        assert_eq!(j, Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
    }

    #[test]
    fn j_squares_to_minus_identity_exactly() {
        for n in 1..=6 {
            let j = standard_j(n).unwrap();
            let id = Matrix::identity(2 * n, 2 * n);
            assert_eq!(&j * &j, -&id);
            assert_eq!(j.transpose() * &j, id);
            assert_eq!(j.transpose(), -&j);
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(standard_j(0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn rotations_are_symplectic() {
        for n in 1..=3 {
            for k in 0..12 {
                let r = rotation(0.37 * k as f64, n).unwrap();
                assert!(is_symplectic(&r, 1e-10).unwrap());
            }
        }
        assert!(is_symplectic(&Matrix::identity(4, 4), 1e-12).unwrap());
    }

    #[test]
    fn stretched_diagonal_is_not_symplectic() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 1.0]));
        // M^T J M = [[0,-2],[2,0]], defect 1.
        assert!((symplectic_defect(&m).unwrap() - 1.0).abs() < 1e-15);
        assert!(!is_symplectic(&m, 1e-10).unwrap());
        let m4 = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 1.0, 1.0, 1.0]));
        assert!(!is_symplectic(&m4, 1e-10).unwrap());
    }

    #[test]
    fn odd_order_rejected() {
        let m = Matrix::identity(3, 3);
        assert!(matches!(is_symplectic(&m, 1e-9), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_dimension(&Matrix::zeros(4, 4), 1e-8), 4);
        let id = Matrix::identity(2, 2);
        let full = rotation(2.0 * PI, 1).unwrap() - &id;
        assert_eq!(kernel_dimension(&full, 1e-8), 2);
        let half = rotation(PI, 1).unwrap() - &id;
        assert_eq!(kernel_dimension(&half, 1e-8), 0);
    }

    #[test]
    fn iterated_nullity_matches_direct_power() {
        // Rotation by 2pi/3: cube is the identity.
        let r = rotation(2.0 * PI / 3.0, 1).unwrap();
        assert_eq!(iterated_nullity(&r, 1, 1e-8).unwrap(), 0);
        assert_eq!(iterated_nullity(&r, 2, 1e-8).unwrap(), 0);
        assert_eq!(iterated_nullity(&r, 3, 1e-8).unwrap(), 2);
        assert_eq!(iterated_nullity(&r, 6, 1e-8).unwrap(), 2);
        let minus = -Matrix::identity(4, 4);
        assert_eq!(iterated_nullity(&minus, 2, 1e-8).unwrap(), 4);
        assert_eq!(iterated_nullity(&minus, 3, 1e-8).unwrap(), 0);
    }
}
