//! Periodic symmetric-matrix-valued coefficients `B(t)` of `y' = J B(t) y`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symplectic::{symmetrize, Matrix};

/// Asymmetry above which a user evaluator is reported through `log`.
pub const ASYMMETRY_WARN: f64 = 1e-10;

/// A `tau`-periodic, symmetric `2n x 2n` coefficient.
///
/// Implementors only provide [`eval_raw`](CoefficientPath::eval_raw); callers
/// go through [`eval`](CoefficientPath::eval), which symmetrizes the value and
/// rejects non-finite entries.
pub trait CoefficientPath: Send + Sync {
    fn half_dim(&self) -> usize;

    fn period(&self) -> f64;

    fn eval_raw(&self, t: f64) -> Matrix;

    fn eval(&self, t: f64) -> Result<Matrix> {
        let raw = self.eval_raw(t);
        let d = 2 * self.half_dim();
        if raw.nrows() != d || raw.ncols() != d {
            return Err(Error::Evaluation {
                t,
                what: format!("expected {d}x{d}, got {}x{}", raw.nrows(), raw.ncols()),
            });
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation { t, what: "non-finite coefficient".into() });
        }
        let (sym, asym) = symmetrize(&raw);
        if asym > ASYMMETRY_WARN {
            log::warn!("coefficient asymmetric by {asym:.3e} at t = {t}; symmetrized");
        }
        Ok(sym)
    }
}

impl<T: CoefficientPath + ?Sized> CoefficientPath for &T {
    fn half_dim(&self) -> usize {
        (**self).half_dim()
    }
    fn period(&self) -> f64 {
        (**self).period()
    }
    fn eval_raw(&self, t: f64) -> Matrix {
        (**self).eval_raw(t)
    }
}

impl<T: CoefficientPath + ?Sized> CoefficientPath for Arc<T> {
    fn half_dim(&self) -> usize {
        (**self).half_dim()
    }
    fn period(&self) -> f64 {
        (**self).period()
    }
    fn eval_raw(&self, t: f64) -> Matrix {
        (**self).eval_raw(t)
    }
}

impl<T: CoefficientPath + ?Sized> CoefficientPath for Box<T> {
    fn half_dim(&self) -> usize {
        (**self).half_dim()
    }
    fn period(&self) -> f64 {
        (**self).period()
    }
    fn eval_raw(&self, t: f64) -> Matrix {
        (**self).eval_raw(t)
    }
}

fn check_square_even(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 || m.nrows() % 2 != 0 {
        return Err(Error::InvalidDimension(format!(
            "coefficient must be square of even order, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows() / 2)
}

fn check_period(period: f64) -> Result<()> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
    }
    Ok(())
}

/// Constant coefficient, periodic with any period.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantCoefficient {
    matrix: Matrix,
    period: f64,
}

impl ConstantCoefficient {
    pub fn new(matrix: Matrix, period: f64) -> Result<Self> {
        check_square_even(&matrix)?;
        check_period(period)?;
        Ok(Self { matrix, period })
    }

    /// `b I` on `R^{2n}` with period `2 pi`.
    pub fn scalar(n: usize, b: f64) -> Result<Self> {
        Self::new(Matrix::identity(2 * n, 2 * n) * b, 2.0 * PI)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

impl CoefficientPath for ConstantCoefficient {
    fn half_dim(&self) -> usize {
        self.matrix.nrows() / 2
    }
    fn period(&self) -> f64 {
        self.period
    }
    fn eval_raw(&self, _t: f64) -> Matrix {
        self.matrix.clone()
    }
}

/// One harmonic `cos(2 pi k t / T) C + sin(2 pi k t / T) S`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub k: u32,
    pub cos: Matrix,
    pub sin: Matrix,
}

/// Trigonometric polynomial `B(t) = B_0 + sum_k (C_k cos + S_k sin)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigCoefficient {
    period: f64,
    constant: Matrix,
    terms: Vec<TrigTerm>,
}

impl TrigCoefficient {
    pub fn new(period: f64, constant: Matrix, terms: Vec<TrigTerm>) -> Result<Self> {
        check_period(period)?;
        let n = check_square_even(&constant)?;
        for term in &terms {
            for m in [&term.cos, &term.sin] {
                if check_square_even(m)? != n {
                    return Err(Error::InvalidDimension("harmonic of mismatched order".into()));
                }
            }
        }
        Ok(Self { period, constant, terms })
    }

    pub fn constant(&self) -> &Matrix {
        &self.constant
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.k).max().unwrap_or(0)
    }
}

impl CoefficientPath for TrigCoefficient {
    fn half_dim(&self) -> usize {
        self.constant.nrows() / 2
    }
    fn period(&self) -> f64 {
        self.period
    }
    fn eval_raw(&self, t: f64) -> Matrix {
        let mut b = self.constant.clone();
        for term in &self.terms {
            let (s, c) = (2.0 * PI * term.k as f64 * t / self.period).sin_cos();
            b += &term.cos * c + &term.sin * s;
        }
        b
    }
}

/// Coefficient backed by an arbitrary closure.
pub struct FnCoefficient<F> {
    n: usize,
    period: f64,
    f: F,
}

impl<F: Fn(f64) -> Matrix + Send + Sync> FnCoefficient<F> {
    pub fn new(n: usize, period: f64, f: F) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidDimension("half-dimension must be at least 1".into()));
        }
        check_period(period)?;
        Ok(Self { n, period, f })
    }
}

impl<F: Fn(f64) -> Matrix + Send + Sync> CoefficientPath for FnCoefficient<F> {
    fn half_dim(&self) -> usize {
        self.n
    }
    fn period(&self) -> f64 {
        self.period
    }
    fn eval_raw(&self, t: f64) -> Matrix {
        (self.f)(t)
    }
}

/// `B` over a horizon `L`, reparametrised onto `[0, 2 pi]`:
/// `B~(s) = (L / 2 pi) B(L s / 2 pi)`.
///
/// The linear flows of `B` on `[0, L]` and of `B~` on `[0, 2 pi]` agree at
/// corresponding times, so every index computation can assume period `2 pi`.
pub struct Rescaled<C> {
    inner: C,
    horizon: f64,
}

impl<C: CoefficientPath> Rescaled<C> {
    pub fn new(inner: C, horizon: f64) -> Result<Self> {
        check_period(horizon)?;
        Ok(Self { inner, horizon })
    }
}

impl<C: CoefficientPath> CoefficientPath for Rescaled<C> {
    fn half_dim(&self) -> usize {
        self.inner.half_dim()
    }
    fn period(&self) -> f64 {
        2.0 * PI
    }
    fn eval_raw(&self, s: f64) -> Matrix {
        let scale = self.horizon / (2.0 * PI);
        self.inner.eval_raw(scale * s) * scale
    }
}

/// Time translate `t -> B(t + shift)`.
pub struct Shifted<C> {
    inner: C,
    shift: f64,
}

impl<C: CoefficientPath> Shifted<C> {
    pub fn new(inner: C, shift: f64) -> Self {
        Self { inner, shift }
    }
}

impl<C: CoefficientPath> CoefficientPath for Shifted<C> {
    fn half_dim(&self) -> usize {
        self.inner.half_dim()
    }
    fn period(&self) -> f64 {
        self.inner.period()
    }
    fn eval_raw(&self, t: f64) -> Matrix {
        self.inner.eval_raw(t + self.shift)
    }
}

/// How many whole periods of `b` fit in `horizon`, if it is a multiple.
pub fn period_multiple(b: &dyn CoefficientPath, horizon: f64) -> Result<usize> {
    check_period(horizon)?;
    let ratio = horizon / b.period();
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} is not a multiple of the coefficient period {}",
            b.period()
        )));
    }
    Ok(k as usize)
}

/// Largest spectral norm of `b` over `samples` equally spaced times of one
/// period.
pub fn sampled_sup_norm(b: &dyn CoefficientPath, samples: usize) -> Result<f64> {
    let mut w = 0.0_f64;
    for i in 0..samples {
        let m = b.eval(b.period() * i as f64 / samples as f64)?;
        w = m.symmetric_eigenvalues().iter().fold(w, |a, v| a.max(v.abs()));
    }
    Ok(w)
}

/// Serializable description of a trigonometric coefficient, shared by the
/// coefficient config files and the `bhat` table of model configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub n: usize,
    #[serde(default)]
    pub period: Option<f64>,
    #[serde(default)]
    pub constant: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub k: u32,
    #[serde(default)]
    pub cos: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub sin: Option<Vec<Vec<f64>>>,
}

fn matrix_from_rows(rows: &[Vec<f64>], d: usize, what: &str) -> Result<Matrix> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Config(format!("{what} must be a {d}x{d} matrix")));
    }
    Ok(Matrix::from_fn(d, d, |i, j| rows[i][j]))
}

impl CoefficientSpec {
    pub fn build(&self) -> Result<TrigCoefficient> {
        if self.n < 1 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        let d = 2 * self.n;
        let period = self.period.unwrap_or(2.0 * PI);
        let constant = match &self.constant {
            Some(rows) => matrix_from_rows(rows, d, "constant")?,
            None => Matrix::zeros(d, d),
        };
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            if t.k == 0 {
                return Err(Error::Config("harmonic index k must be positive; use `constant`".into()));
            }
            let cos = match &t.cos {
                Some(rows) => matrix_from_rows(rows, d, "cos")?,
                None => Matrix::zeros(d, d),
            };
            let sin = match &t.sin {
                Some(rows) => matrix_from_rows(rows, d, "sin")?,
                None => Matrix::zeros(d, d),
            };
            terms.push(TrigTerm { k: t.k, cos, sin });
        }
        TrigCoefficient::new(period, constant, terms)
    }
}
