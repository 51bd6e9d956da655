//! Hamiltonians `H(t, z)` on `R^{2n}` with `z = (p, q)`, and the constants
//! their authors declare for the growth hypotheses.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficient::{sampled_sup_norm, CoefficientPath};
use crate::error::{Error, Result};
use crate::symplectic::{Matrix, Vector};

pub mod config;
pub mod expr;
pub mod hypotheses;

pub use config::{build_model, ModelConfig};
pub use expr::{Expr, ExpressionModel};
pub use hypotheses::{check_h7, k_range_bound, verify_hypotheses, Grid, HypothesisReport, HypothesisStatus};

/// The golden ratio; `beta` above it keeps `lambda = 1` admissible.
pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

/// Constants declared for the growth hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub sigma: f64,
    pub omega: f64,
    pub mu: f64,
    pub upsilon: f64,
    pub beta: f64,
    pub lambda: f64,
    pub b0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl ModelParams {
    /// Upper end of the admissible `lambda` window, `beta^2 / (beta + 1)`.
    pub fn lambda_ceiling(&self) -> f64 {
        self.beta * self.beta / (self.beta + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        for (name, v) in [
            ("sigma", self.sigma),
            ("omega", self.omega),
            ("mu", self.mu),
            ("upsilon", self.upsilon),
            ("b0", self.b0),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if (1.0 / self.mu + 1.0 / self.upsilon - 1.0).abs() > 1e-12 {
            return bad(format!("1/mu + 1/upsilon must equal 1 (mu = {}, upsilon = {})", self.mu, self.upsilon));
        }
        if !(self.beta > 1.0 && self.beta < 2.0) {
            return bad(format!("beta must lie in (1, 2), got {}", self.beta));
        }
        if !(self.lambda >= 1.0 && self.lambda < self.lambda_ceiling()) {
            return bad(format!(
                "lambda must lie in [1, {:.6}), got {}",
                self.lambda_ceiling(),
                self.lambda
            ));
        }
        Ok(())
    }
}

/// A Hamiltonian with first and second derivatives in `z`.
pub trait Hamiltonian: Send + Sync {
    fn half_dim(&self) -> usize;
    /// `None` for autonomous models.
    fn period(&self) -> Option<f64>;
    fn value(&self, t: f64, z: &[f64]) -> Result<f64>;
    fn gradient(&self, t: f64, z: &[f64]) -> Result<Vector>;
    fn hessian(&self, t: f64, z: &[f64]) -> Result<Matrix>;
    fn params(&self) -> ModelParams;
    fn name(&self) -> String;
    /// Models outside the hypotheses on purpose, kept for testing.
    fn is_test_model(&self) -> bool {
        false
    }
    /// `(Bhat, H_base)` for models of the form `(Bhat z, z)/2 + H_base`.
    fn quadratic_split(&self) -> Option<(&dyn CoefficientPath, &dyn Hamiltonian)> {
        None
    }
}

macro_rules! forward_hamiltonian {
    ($($ty:ty),*) => {$(
        impl<T: Hamiltonian + ?Sized> Hamiltonian for $ty {
            fn half_dim(&self) -> usize { (**self).half_dim() }
            fn period(&self) -> Option<f64> { (**self).period() }
            fn value(&self, t: f64, z: &[f64]) -> Result<f64> { (**self).value(t, z) }
            fn gradient(&self, t: f64, z: &[f64]) -> Result<Vector> { (**self).gradient(t, z) }
            fn hessian(&self, t: f64, z: &[f64]) -> Result<Matrix> { (**self).hessian(t, z) }
            fn params(&self) -> ModelParams { (**self).params() }
            fn name(&self) -> String { (**self).name() }
            fn is_test_model(&self) -> bool { (**self).is_test_model() }
            fn quadratic_split(&self) -> Option<(&dyn CoefficientPath, &dyn Hamiltonian)> {
                (**self).quadratic_split()
            }
        }
    )*};
}

forward_hamiltonian!(&T, Box<T>, Arc<T>);

pub(crate) fn check_point(n: usize, z: &[f64]) -> Result<()> {
    if z.len() != 2 * n {
        return Err(Error::InvalidDimension(format!("expected a point of length {}, got {}", 2 * n, z.len())));
    }
    Ok(())
}

fn norm2(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

/// Gradient and Hessian of `f(|w|^2)` given `f'` and `f''`.
fn radial_derivatives(w: &[f64], f1: f64, f2: f64) -> (Vector, Matrix) {
    let v = Vector::from_column_slice(w);
    let g = &v * (2.0 * f1);
    let h = Matrix::identity(w.len(), w.len()) * (2.0 * f1) + &v * v.transpose() * (4.0 * f2);
    (g, h)
}

/// `H(z) = (1 + |z|^2)^{beta/2} - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftPower {
    n: usize,
    beta: f64,
}

/// Autonomous soft-power model; `beta` must lie in `(golden ratio, 2)`.
pub fn soft_power_model(n: usize, beta: f64) -> Result<SoftPower> {
    if n == 0 {
        return Err(Error::InvalidDimension("half-dimension must be at least 1".into()));
    }
    if !(beta > GOLDEN_RATIO && beta < 2.0) {
        return Err(Error::InvalidArgument(format!("beta must lie in (golden ratio, 2), got {beta}")));
    }
    let m = SoftPower { n, beta };
    m.params().validate()?;
    Ok(m)
}

impl SoftPower {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `phi(s) = (1 + s)^{beta/2} - 1` and its first two derivatives.
    pub fn phi(&self, s: f64) -> (f64, f64, f64) {
        let h = 0.5 * self.beta;
        let u = 1.0 + s;
        (u.powf(h) - 1.0, h * u.powf(h - 1.0), h * (h - 1.0) * u.powf(h - 2.0))
    }

    /// Period of the circular orbit of radius `r`, `pi / phi'(r^2)`.
    pub fn circular_period(&self, r: f64) -> f64 {
        std::f64::consts::PI / self.phi(r * r).1
    }

    /// Radius of the circular orbit with the given period, by bisection on
    /// the increasing map `r -> pi / phi'(r^2)`.
    pub fn circular_radius(&self, period: f64) -> Result<f64> {
        let floor = self.circular_period(0.0);
        if !(period > floor) {
            return Err(Error::InvalidArgument(format!(
                "circular orbits have period above {floor}, got {period}"
            )));
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while self.circular_period(hi) < period {
            hi *= 2.0;
            if hi > 1e150 {
                return Err(Error::Numeric("circular radius search diverged".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.circular_period(mid) < period {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

impl Hamiltonian for SoftPower {
    fn half_dim(&self) -> usize {
        self.n
    }

    fn period(&self) -> Option<f64> {
        None
    }

    fn value(&self, _t: f64, z: &[f64]) -> Result<f64> {
        check_point(self.n, z)?;
        Ok(self.phi(norm2(z)).0)
    }

    fn gradient(&self, _t: f64, z: &[f64]) -> Result<Vector> {
        check_point(self.n, z)?;
        let (_, f1, _) = self.phi(norm2(z));
        Ok(Vector::from_column_slice(z) * (2.0 * f1))
    }

    fn hessian(&self, _t: f64, z: &[f64]) -> Result<Matrix> {
        check_point(self.n, z)?;
        let (_, f1, f2) = self.phi(norm2(z));
        Ok(radial_derivatives(z, f1, f2).1)
    }

    fn params(&self) -> ModelParams {
        ModelParams {
            sigma: 1.0,
            omega: 1.0,
            mu: 2.0,
            upsilon: 2.0,
            beta: self.beta,
            lambda: 1.0,
            b0: self.beta,
            c1: 1.0,
            c2: 0.5 * (1.0 - 0.5 * self.beta),
            c3: 1.0,
        }
    }

    fn name(&self) -> String {
        format!("soft_power(n={}, beta={})", self.n, self.beta)
    }
}

/// `H = ((1 + |p|^2)^{kp} + (1 + |q|^2)^{kq} - 1)^{beta/2} - 1` with
/// `kp = (1 + sigma/omega)/2` and `kq = (1 + omega/sigma)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Anisotropic {
    n: usize,
    sigma: f64,
    omega: f64,
    beta: f64,
}

pub fn anisotropic_model(n: usize, sigma: f64, omega: f64, beta: f64) -> Result<Anisotropic> {
    if n == 0 {
        return Err(Error::InvalidDimension("half-dimension must be at least 1".into()));
    }
    if !(sigma > 0.0 && omega > 0.0 && sigma.is_finite() && omega.is_finite()) {
        return Err(Error::InvalidArgument("sigma and omega must be positive".into()));
    }
    if !(beta > GOLDEN_RATIO && beta < 2.0) {
        return Err(Error::InvalidArgument(format!("beta must lie in (golden ratio, 2), got {beta}")));
    }
    let m = Anisotropic { n, sigma, omega, beta };
    m.params().validate()?;
    Ok(m)
}

impl Anisotropic {
    fn exponents(&self) -> (f64, f64) {
        (0.5 * (1.0 + self.sigma / self.omega), 0.5 * (1.0 + self.omega / self.sigma))
    }

    // (value, f', f'') of s -> (1 + s)^k.
    fn part(s: f64, k: f64) -> (f64, f64, f64) {
        let u = 1.0 + s;
        (u.powf(k), k * u.powf(k - 1.0), k * (k - 1.0) * u.powf(k - 2.0))
    }

    fn inner(&self, z: &[f64]) -> (f64, Vector, Matrix) {
        let n = self.n;
        let (kp, kq) = self.exponents();
        let (p, q) = z.split_at(n);
        let (pv, p1, p2) = Self::part(norm2(p), kp);
        let (qv, q1, q2) = Self::part(norm2(q), kq);
        let (gp, hp) = radial_derivatives(p, p1, p2);
        let (gq, hq) = radial_derivatives(q, q1, q2);
        let mut g = Vector::zeros(2 * n);
        g.rows_mut(0, n).copy_from(&gp);
        g.rows_mut(n, n).copy_from(&gq);
        let mut h = Matrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&hp);
        h.view_mut((n, n), (n, n)).copy_from(&hq);
        (pv + qv - 1.0, g, h)
    }
}

impl Hamiltonian for Anisotropic {
    fn half_dim(&self) -> usize {
        self.n
    }

    fn period(&self) -> Option<f64> {
        None
    }

    fn value(&self, _t: f64, z: &[f64]) -> Result<f64> {
        check_point(self.n, z)?;
        Ok(self.inner(z).0.powf(0.5 * self.beta) - 1.0)
    }

    fn gradient(&self, _t: f64, z: &[f64]) -> Result<Vector> {
        check_point(self.n, z)?;
        let (x, g, _) = self.inner(z);
        let e = 0.5 * self.beta;
        Ok(g * (e * x.powf(e - 1.0)))
    }

    fn hessian(&self, _t: f64, z: &[f64]) -> Result<Matrix> {
        check_point(self.n, z)?;
        let (x, g, h) = self.inner(z);
        let e = 0.5 * self.beta;
        Ok(h * (e * x.powf(e - 1.0)) + &g * g.transpose() * (e * (e - 1.0) * x.powf(e - 2.0)))
    }

    fn params(&self) -> ModelParams {
        let (kp, kq) = self.exponents();
        ModelParams {
            sigma: self.sigma,
            omega: self.omega,
            mu: 2.0 * kp,
            upsilon: 2.0 * kq,
            beta: self.beta,
            lambda: 1.0,
            b0: self.beta * kp.max(kq).powi(2) * 2.0,
            c1: 1.0,
            c2: 0.5 * (1.0 - 0.5 * self.beta),
            c3: 1.0 + 0.5 * self.beta,
        }
    }

    fn name(&self) -> String {
        format!("anisotropic(n={}, sigma={}, omega={}, beta={})", self.n, self.sigma, self.omega, self.beta)
    }
}

/// A positive time profile `a(t)` with a period.
#[derive(Clone)]
pub struct TimeProfile {
    period: f64,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    label: String,
}

impl std::fmt::Debug for TimeProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimeProfile").field("period", &self.period).field("label", &self.label).finish()
    }
}

impl TimeProfile {
    pub fn new(period: f64, label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
        }
        Ok(Self { period, f: Arc::new(f), label: label.into() })
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Min and max over 256 samples per period.
    pub fn range(&self) -> (f64, f64) {
        (0..256).map(|i| self.eval(self.period * i as f64 / 256.0)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
    }
}

/// `H(t, z) = a(t) H_base(t, z)`.
pub struct NonAutonomous {
    base: Arc<dyn Hamiltonian>,
    a: TimeProfile,
}

pub fn nonautonomous_model(base: Arc<dyn Hamiltonian>, a: TimeProfile) -> Result<NonAutonomous> {
    let (lo, hi) = a.range();
    if !(lo > 0.0 && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("time profile must be positive, sampled minimum {lo}")));
    }
    if let Some(tb) = base.period() {
        let ratio = a.period() / tb;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidArgument("profile period must be a multiple of the base period".into()));
        }
    }
    Ok(NonAutonomous { base, a })
}

impl Hamiltonian for NonAutonomous {
    fn half_dim(&self) -> usize {
        self.base.half_dim()
    }

    fn period(&self) -> Option<f64> {
        Some(self.a.period())
    }

    fn value(&self, t: f64, z: &[f64]) -> Result<f64> {
        Ok(self.a.eval(t) * self.base.value(t, z)?)
    }

    fn gradient(&self, t: f64, z: &[f64]) -> Result<Vector> {
        Ok(self.base.gradient(t, z)? * self.a.eval(t))
    }

    fn hessian(&self, t: f64, z: &[f64]) -> Result<Matrix> {
        Ok(self.base.hessian(t, z)? * self.a.eval(t))
    }

    fn params(&self) -> ModelParams {
        let (lo, hi) = self.a.range();
        let p = self.base.params();
        ModelParams { c1: p.c1 * hi, c2: p.c2 * lo, c3: p.c3 * hi, b0: p.b0 * hi, ..p }
    }

    fn name(&self) -> String {
        format!("nonautonomous({}, a={})", self.base.name(), self.a.label)
    }

    fn is_test_model(&self) -> bool {
        self.base.is_test_model()
    }
}

/// `H(t, z) = (Bhat(t) z, z) / 2 + H_base(t, z)`.
pub struct QuadraticPlus {
    bhat: Arc<dyn CoefficientPath>,
    base: Arc<dyn Hamiltonian>,
    w: f64,
}

/// Spectral norm of `Bhat`, maximized over 256 samples per period.
pub fn sampled_operator_norm(b: &dyn CoefficientPath) -> Result<f64> {
    sampled_sup_norm(b, 256)
}

pub fn quadratic_plus_model(bhat: Arc<dyn CoefficientPath>, base: Arc<dyn Hamiltonian>) -> Result<QuadraticPlus> {
    if bhat.half_dim() != base.half_dim() {
        return Err(Error::InvalidDimension("Bhat and base model dimensions differ".into()));
    }
    if let Some(tb) = base.period() {
        let ratio = bhat.period() / tb;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidArgument("Bhat period must be a multiple of the base period".into()));
        }
    }
    let w = sampled_operator_norm(bhat.as_ref())?;
    Ok(QuadraticPlus { bhat, base, w })
}

impl QuadraticPlus {
    /// `w = max_t |Bhat(t)|`, sampled.
    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn bhat(&self) -> &dyn CoefficientPath {
        self.bhat.as_ref()
    }
}

impl Hamiltonian for QuadraticPlus {
    fn half_dim(&self) -> usize {
        self.base.half_dim()
    }

    fn period(&self) -> Option<f64> {
        Some(self.bhat.period())
    }

    fn value(&self, t: f64, z: &[f64]) -> Result<f64> {
        let b = self.bhat.eval(t)?;
        let v = Vector::from_column_slice(z);
        Ok(0.5 * v.dot(&(&b * &v)) + self.base.value(t, z)?)
    }

    fn gradient(&self, t: f64, z: &[f64]) -> Result<Vector> {
        let b = self.bhat.eval(t)?;
        Ok(&b * Vector::from_column_slice(z) + self.base.gradient(t, z)?)
    }

    fn hessian(&self, t: f64, z: &[f64]) -> Result<Matrix> {
        Ok(self.bhat.eval(t)? + self.base.hessian(t, z)?)
    }

    fn params(&self) -> ModelParams {
        self.base.params()
    }

    fn name(&self) -> String {
        format!("quadratic_plus({}, w={:.6})", self.base.name(), self.w)
    }

    fn is_test_model(&self) -> bool {
        self.base.is_test_model()
    }

    fn quadratic_split(&self) -> Option<(&dyn CoefficientPath, &dyn Hamiltonian)> {
        Some((self.bhat.as_ref(), self.base.as_ref()))
    }
}

/// `H = b |z|^2 / 2`. Violates the subquadratic hypothesis; test use only.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    n: usize,
    b: f64,
}

pub fn quadratic_model(n: usize, b: f64) -> Result<Quadratic> {
    if n == 0 {
        return Err(Error::InvalidDimension("half-dimension must be at least 1".into()));
    }
    if !b.is_finite() {
        return Err(Error::InvalidArgument("coefficient must be finite".into()));
    }
    Ok(Quadratic { n, b })
}

impl Quadratic {
    pub fn b(&self) -> f64 {
        self.b
    }
}

impl Hamiltonian for Quadratic {
    fn half_dim(&self) -> usize {
        self.n
    }

    fn period(&self) -> Option<f64> {
        None
    }

    fn value(&self, _t: f64, z: &[f64]) -> Result<f64> {
        check_point(self.n, z)?;
        Ok(0.5 * self.b * norm2(z))
    }

    fn gradient(&self, _t: f64, z: &[f64]) -> Result<Vector> {
        check_point(self.n, z)?;
        Ok(Vector::from_column_slice(z) * self.b)
    }

    fn hessian(&self, _t: f64, z: &[f64]) -> Result<Matrix> {
        check_point(self.n, z)?;
        Ok(Matrix::identity(2 * self.n, 2 * self.n) * self.b)
    }

    fn params(&self) -> ModelParams {
        ModelParams {
            sigma: 1.0,
            omega: 1.0,
            mu: 2.0,
            upsilon: 2.0,
            beta: 1.75,
            lambda: 1.0,
            b0: self.b.abs().max(1e-300),
            c1: 1.0,
            c2: 1e-3,
            c3: 1.0,
        }
    }

    fn name(&self) -> String {
        format!("quadratic(n={}, b={})", self.n, self.b)
    }

    fn is_test_model(&self) -> bool {
        true
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Central-difference gradient and Hessian checks at one point; returns
    /// the worst relative errors.
    pub fn fd_errors(h: &dyn Hamiltonian, t: f64, z: &[f64]) -> (f64, f64) {
        let d = z.len();
        let g = h.gradient(t, z).unwrap();
        let hs = h.hessian(t, z).unwrap();
        let mut eg = 0.0_f64;
        let mut eh = 0.0_f64;
        for k in 0..d {
            let step = 1e-5 * (1.0 + z[k].abs());
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[k] += step;
            zm[k] -= step;
            let fd = (h.value(t, &zp).unwrap() - h.value(t, &zm).unwrap()) / (2.0 * step);
            eg = eg.max((fd - g[k]).abs() / (1.0 + g.amax()));
            let col = (h.gradient(t, &zp).unwrap() - h.gradient(t, &zm).unwrap()) / (2.0 * step);
            eh = eh.max((col - hs.column(k)).amax() / (1.0 + hs.amax()));
        }
        (eg, eh)
    }
}

#[cfg(test)]
mod tests {
    use super::testing::fd_errors;
    use super::*;
    use crate::coefficient::{ConstantCoefficient, TrigCoefficient, TrigTerm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
        (0..d).map(|_| rng.gen_range(-scale..scale)).collect()
    }

    #[test]
    fn soft_power_basics() {
        let m = soft_power_model(1, 1.75).unwrap();
        assert_eq!(m.value(0.0, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(m.gradient(0.0, &[0.0, 0.0]).unwrap().amax(), 0.0);
        assert!(soft_power_model(1, 1.5).is_err());
        assert!(soft_power_model(1, 2.0).is_err());
        assert!(m.params().validate().is_ok());
    }

    #[test]
    fn circular_radius_roots() {
        let m = soft_power_model(1, 1.75).unwrap();
        let r6 = m.circular_radius(6.0).unwrap();
        assert!((std::f64::consts::PI / 0.875 * (1.0 + r6 * r6).powf(0.125) - 6.0).abs() < 1e-12);
        assert!((r6 - 7.73).abs() < 0.01);
        let r10 = m.circular_radius(10.0).unwrap();
        assert!(r10 > 55.0 && r10 < 65.0);
        assert!(m.circular_radius(3.0).is_err());
    }

    #[test]
    fn circular_orbit_solves_the_flow() {
        // z(t) = exp(2 phi'(r^2) t J) z0 gives dz/dt = J H'(z).
        let m = soft_power_model(1, 1.75).unwrap();
        let r = 3.0;
        let w = 2.0 * m.phi(r * r).1;
        let t = 0.7;
        let z = [r * (w * t).cos(), r * (w * t).sin()];
        let dz = [-r * w * (w * t).sin(), r * w * (w * t).cos()];
        let g = m.gradient(t, &z).unwrap();
        assert!((dz[0] + g[1]).abs() < 1e-12 && (dz[1] - g[0]).abs() < 1e-12);
    }

    #[test]
    fn hessian_min_eigenvalue_closed_form() {
        let m = soft_power_model(2, 1.75).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let z = random_point(&mut rng, 4, 5.0);
            let s: f64 = z.iter().map(|v| v * v).sum();
            let b = 1.75;
            let radial = b * (1.0 + s).powf(b / 2.0 - 2.0) * (1.0 + (b - 1.0) * s);
            let ev = m.hessian(0.0, &z).unwrap().symmetric_eigenvalues();
            let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
            assert!((min - radial).abs() < 1e-10 * radial.max(1.0) && min > 0.0);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bhat = TrigCoefficient::new(
            5.0,
            Matrix::identity(2, 2) * 0.1,
            vec![TrigTerm { k: 1, cos: Matrix::from_row_slice(2, 2, &[0.0, 0.05, 0.05, 0.0]), sin: Matrix::zeros(2, 2) }],
        )
        .unwrap();
        let base: Arc<dyn Hamiltonian> = Arc::new(soft_power_model(1, 1.8).unwrap());
        let models: Vec<Box<dyn Hamiltonian>> = vec![
            Box::new(soft_power_model(1, 1.75).unwrap()),
            Box::new(anisotropic_model(1, 1.0, 1.5, 1.7).unwrap()),
            Box::new(anisotropic_model(2, 2.0, 1.0, 1.9).unwrap()),
            Box::new(
                nonautonomous_model(base.clone(), TimeProfile::new(5.0, "1+0.3cos", |t| 1.0 + 0.3 * (t * 1.2566).cos()).unwrap())
                    .unwrap(),
            ),
            Box::new(quadratic_plus_model(Arc::new(bhat), base).unwrap()),
        ];
        for m in &models {
            for _ in 0..100 {
                let z = random_point(&mut rng, 2 * m.half_dim(), 4.0);
                let t = rng.gen_range(0.0..5.0);
                let (eg, eh) = fd_errors(m.as_ref(), t, &z);
                assert!(eg < 1e-6 && eh < 1e-5, "{}: {eg} {eh}", m.name());
            }
        }
    }

    #[test]
    fn anisotropic_reduces_to_soft_power() {
        let a = anisotropic_model(2, 1.3, 1.3, 1.75).unwrap();
        let s = soft_power_model(2, 1.75).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let z = random_point(&mut rng, 4, 10.0);
            assert!((a.value(0.0, &z).unwrap() - s.value(0.0, &z).unwrap()).abs() < 1e-10);
            assert!((a.hessian(0.0, &z).unwrap() - s.hessian(0.0, &z).unwrap()).amax() < 1e-10);
        }
    }

    #[test]
    fn trivial_compositions_match_base() {
        let base: Arc<dyn Hamiltonian> = Arc::new(soft_power_model(1, 1.75).unwrap());
        let one = nonautonomous_model(base.clone(), TimeProfile::new(2.0, "1", |_| 1.0).unwrap()).unwrap();
        let zero = ConstantCoefficient::new(Matrix::zeros(2, 2), 2.0).unwrap();
        let plus = quadratic_plus_model(Arc::new(zero), base.clone()).unwrap();
        assert_eq!(plus.w(), 0.0);
        for z in [[0.3, -1.0], [4.0, 2.0]] {
            let v = base.value(0.0, &z).unwrap();
            assert_eq!(one.value(0.4, &z).unwrap(), v);
            assert_eq!(plus.value(0.4, &z).unwrap(), v);
        }
    }

    #[test]
    fn params_window() {
        let mut p = soft_power_model(1, 1.75).unwrap().params();
        assert!(p.lambda < p.lambda_ceiling());
        p.mu = 3.0;
        assert!(p.validate().is_err());
        p.mu = 3.0;
        p.upsilon = 1.5;
        assert!(p.validate().is_ok());
        p.lambda = 1.2;
        assert!(p.validate().is_err());
    }
}
