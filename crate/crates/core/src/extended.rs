//! Small dense matrices in double-double arithmetic.
//!
//! Products of many step matrices lose symplecticity to rounding at the
//! rate `eps |gamma|^2`; carrying a second word keeps the accumulated path
//! symplectic far below any f64 tolerance.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::symplectic::Matrix;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct TwoFloat {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> TwoFloat {
    let s = a + b;
    TwoFloat { hi: s, lo: b - (s - a) }
}

impl TwoFloat {
    pub fn from_f64(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }
}

impl Add for TwoFloat {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let r = quick_two_sum(s, e + t);
        quick_two_sum(r.hi, r.lo + f)
    }
}

impl Add<f64> for TwoFloat {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        self + Self::from_f64(o)
    }
}

impl Neg for TwoFloat {
    type Output = Self;
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for TwoFloat {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + -o
    }
}

impl Sub<f64> for TwoFloat {
    type Output = Self;
    fn sub(self, o: f64) -> Self {
        self + -o
    }
}

impl Mul for TwoFloat {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl Div for TwoFloat {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self - o * Self::from_f64(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Self::from_f64(q2);
        let q3 = r.hi / o.hi;
        quick_two_sum(q1, q2) + q3
    }
}

impl AddAssign for TwoFloat {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for TwoFloat {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DdMatrix {
    d: usize,
    // Row-major.
    data: Vec<TwoFloat>,
}

impl DdMatrix {
    pub fn identity(d: usize) -> Self {
        let mut data = vec![TwoFloat::from_f64(0.0); d * d];
        for i in 0..d {
            data[i * d + i] = TwoFloat::from_f64(1.0);
        }
        Self { d, data }
    }

    /// Exact sum `hi + lo` of two f64 matrices.
    pub fn from_parts(hi: &Matrix, lo: &Matrix) -> Self {
        let d = hi.nrows();
        let data = (0..d * d)
            .map(|k| TwoFloat::from_f64(hi[(k / d, k % d)]) + lo[(k / d, k % d)])
            .collect();
        Self { d, data }
    }

    fn at(&self, i: usize, j: usize) -> TwoFloat {
        self.data[i * self.d + j]
    }

    pub fn mul(&self, other: &Self) -> Self {
        let d = self.d;
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = TwoFloat::from_f64(0.0);
                for k in 0..d {
                    acc += self.at(i, k) * other.at(k, j);
                }
                data.push(acc);
            }
        }
        Self { d, data }
    }

    /// `(I - K)^{-1} (I + K)` for an f64 matrix `K`, by Gaussian elimination
    /// with partial pivoting. `None` when `I - K` is singular.
    pub fn cayley(k: &Matrix) -> Option<Self> {
        let d = k.nrows();
        let one = TwoFloat::from_f64(1.0);
        let entry = |i: usize, j: usize, s: f64| {
            let v = TwoFloat::from_f64(s * k[(i, j)]);
            if i == j {
                one + v
            } else {
                v
            }
        };
        let mut a: Vec<Vec<TwoFloat>> = (0..d).map(|i| (0..d).map(|j| entry(i, j, -1.0)).collect()).collect();
        let mut b: Vec<Vec<TwoFloat>> = (0..d).map(|i| (0..d).map(|j| entry(i, j, 1.0)).collect()).collect();
        for c in 0..d {
            let p = (c..d).max_by(|&x, &y| a[x][c].hi().abs().total_cmp(&a[y][c].hi().abs()))?;
            if a[p][c].hi() == 0.0 {
                return None;
            }
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..d {
                let f = a[r][c] / a[c][c];
                for j in c..d {
                    let v = f * a[c][j];
                    a[r][j] -= v;
                }
                for j in 0..d {
                    let v = f * b[c][j];
                    b[r][j] -= v;
                }
            }
        }
        for c in (0..d).rev() {
            for j in 0..d {
                let mut v = b[c][j];
                for k in c + 1..d {
                    v -= a[c][k] * b[k][j];
                }
                b[c][j] = v / a[c][c];
            }
        }
        Some(Self { d, data: b.into_iter().flatten().collect() })
    }

    /// Nearest f64 matrix and the remainder.
    pub fn split(&self) -> (Matrix, Matrix) {
        let d = self.d;
        (
            Matrix::from_fn(d, d, |i, j| self.at(i, j).hi()),
            Matrix::from_fn(d, d, |i, j| self.at(i, j).lo()),
        )
    }

    /// `max |(M^T J M - J)_{ij}|` evaluated in double-double.
    pub fn symplectic_defect(&self) -> f64 {
        let d = self.d;
        let n = d / 2;
        // (J M)_{ij} = M_{i+n, j} for i < n, -M_{i-n, j} otherwise.
        let jm = |i: usize, j: usize| if i < n { self.at(i + n, j) } else { -self.at(i - n, j) };
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                let mut acc = TwoFloat::from_f64(0.0);
                for k in 0..d {
                    acc += self.at(k, i) * jm(k, j);
                }
                let target = if i < n && j == i + n {
                    1.0
                } else if i >= n && j + n == i {
                    -1.0
                } else {
                    0.0
                };
                worst = worst.max((acc - target).hi().abs());
            }
        }
        worst
    }
}
