//! The truncated loop space `E_m`.
//!
//! A loop of period `tau` is `z(t) = sum_{|j| <= m} exp(2 pi j t / tau J) a_j`
//! with real coefficients `a_j in R^{2n}`. Coordinates are stored mode by
//! mode, `j = -m..=m`, in the same order as [`GalerkinForm`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coefficient::{period_multiple, CoefficientPath};
use crate::error::{Error, Result};
use crate::index::{default_nodes, form_from_samples, GalerkinForm};
use crate::models::Hamiltonian;
use crate::symplectic::{apply_j, Matrix, Vector};

/// A real Fourier loop in `E_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LoopRepr", into = "LoopRepr")]
pub struct FourierLoop {
    tau: f64,
    n: usize,
    m: usize,
    coeffs: Vector,
}

/// Wire format: `{tau, n, m, coeffs: [[2n reals] for j = -m..=m]}`.
#[derive(Serialize, Deserialize)]
struct LoopRepr {
    tau: f64,
    n: usize,
    m: usize,
    coeffs: Vec<Vec<f64>>,
}

impl TryFrom<LoopRepr> for FourierLoop {
    type Error = Error;

    fn try_from(r: LoopRepr) -> Result<Self> {
        FourierLoop::from_modes(r.tau, r.n, r.m, &r.coeffs)
    }
}

impl From<FourierLoop> for LoopRepr {
    fn from(z: FourierLoop) -> Self {
        let coeffs = (-(z.m as i64)..=z.m as i64).map(|j| z.coeff(j).to_vec()).collect();
        LoopRepr { tau: z.tau, n: z.n, m: z.m, coeffs }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("period must be positive, got {tau}")));
    }
    Ok(())
}

impl FourierLoop {
    pub fn zeros(tau: f64, n: usize, m: usize) -> Result<Self> {
        check_tau(tau)?;
        if n == 0 {
            return Err(Error::InvalidDimension("half-dimension must be at least 1".into()));
        }
        Ok(Self { tau, n, m, coeffs: Vector::zeros((2 * m + 1) * 2 * n) })
    }

    /// From a flat coordinate vector ordered `j = -m..=m`.
    pub fn from_vector(tau: f64, n: usize, m: usize, coeffs: Vector) -> Result<Self> {
        let mut z = Self::zeros(tau, n, m)?;
        if coeffs.len() != z.coeffs.len() {
            return Err(Error::InvalidDimension(format!(
                "expected {} coordinates, got {}",
                z.coeffs.len(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("loop coefficients must be finite".into()));
        }
        z.coeffs = coeffs;
        Ok(z)
    }

    /// From one `2n`-vector per mode, `j = -m..=m`.
    pub fn from_modes(tau: f64, n: usize, m: usize, modes: &[Vec<f64>]) -> Result<Self> {
        if modes.len() != 2 * m + 1 || modes.iter().any(|a| a.len() != 2 * n) {
            return Err(Error::InvalidDimension(format!("expected {} modes of length {}", 2 * m + 1, 2 * n)));
        }
        Self::from_vector(tau, n, m, Vector::from_iterator(modes.len() * 2 * n, modes.iter().flatten().copied()))
    }

    /// The single-mode loop `exp(2 pi j t / tau J) a`.
    pub fn single_mode(tau: f64, m: usize, j: i64, a: &[f64]) -> Result<Self> {
        let n = a.len() / 2;
        if a.len() % 2 != 0 {
            return Err(Error::InvalidDimension("mode vector must have even length".into()));
        }
        if j.unsigned_abs() as usize > m {
            return Err(Error::InvalidArgument(format!("mode {j} exceeds level {m}")));
        }
        let mut z = Self::zeros(tau, n, m)?;
        z.coeff_mut(j).copy_from_slice(a);
        Ok(z)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn half_dim(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> usize {
        self.m
    }

    pub fn as_vector(&self) -> &Vector {
        &self.coeffs
    }

    pub fn into_vector(self) -> Vector {
        self.coeffs
    }

    fn offset(&self, j: i64) -> usize {
        ((j + self.m as i64) as usize) * 2 * self.n
    }

    /// `a_j`; modes beyond the level read as zero.
    pub fn coeff(&self, j: i64) -> &[f64] {
        if j.unsigned_abs() as usize > self.m {
            return &[];
        }
        let o = self.offset(j);
        &self.coeffs.as_slice()[o..o + 2 * self.n]
    }

    pub fn coeff_mut(&mut self, j: i64) -> &mut [f64] {
        assert!(j.unsigned_abs() as usize <= self.m, "mode {j} beyond level {}", self.m);
        let o = self.offset(j);
        let d = 2 * self.n;
        &mut self.coeffs.as_mut_slice()[o..o + d]
    }

    /// The same loop at another truncation level (padding or cutting).
    pub fn with_level(&self, m: usize) -> Self {
        let mut z = Self::zeros(self.tau, self.n, m).expect("valid shape");
        for j in -(m.min(self.m) as i64)..=(m.min(self.m) as i64) {
            z.coeff_mut(j).copy_from_slice(self.coeff(j));
        }
        z
    }

    /// `z(t)`.
    pub fn evaluate(&self, t: f64) -> Vector {
        let d = 2 * self.n;
        let mut out = vec![0.0; d];
        let mut ja = vec![0.0; d];
        for j in -(self.m as i64)..=(self.m as i64) {
            let a = self.coeff(j);
            let (s, c) = (2.0 * PI * j as f64 * t / self.tau).sin_cos();
            apply_j(a, &mut ja);
            for r in 0..d {
                out[r] += c * a[r] + s * ja[r];
            }
        }
        Vector::from_vec(out)
    }

    /// `dz/dt` by exact differentiation of the modes.
    pub fn derivative(&self, t: f64) -> Vector {
        let d = 2 * self.n;
        let mut out = vec![0.0; d];
        let mut ja = vec![0.0; d];
        for j in -(self.m as i64)..=(self.m as i64) {
            let a = self.coeff(j);
            let w = 2.0 * PI * j as f64 / self.tau;
            let (s, c) = (w * t).sin_cos();
            apply_j(a, &mut ja);
            // d/dt (cos a + sin Ja) = w (-sin a + cos Ja)
            for r in 0..d {
                out[r] += w * (-s * a[r] + c * ja[r]);
            }
        }
        Vector::from_vec(out)
    }

    /// Values at the uniform nodes `t_i = i tau / N`.
    pub fn sample(&self, nodes: usize) -> Vec<Vector> {
        let d = 2 * self.n;
        let jmodes: Vec<Vec<f64>> = (-(self.m as i64)..=(self.m as i64))
            .map(|j| {
                let mut ja = vec![0.0; d];
                apply_j(self.coeff(j), &mut ja);
                ja
            })
            .collect();
        (0..nodes)
            .map(|i| {
                let mut out = Vector::zeros(d);
                for (idx, j) in (-(self.m as i64)..=(self.m as i64)).enumerate() {
                    let a = self.coeff(j);
                    let phase = 2.0 * PI * ((j.rem_euclid(nodes as i64) as usize * i) % nodes) as f64 / nodes as f64;
                    let (s, c) = phase.sin_cos();
                    for r in 0..d {
                        out[r] += c * a[r] + s * jmodes[idx][r];
                    }
                }
                out
            })
            .collect()
    }

    /// `t -> z(t + shift)`: mode `j` is rotated by `exp(2 pi j shift / tau J)`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut z = self.clone();
        let d = 2 * self.n;
        let mut ja = vec![0.0; d];
        for j in -(self.m as i64)..=(self.m as i64) {
            let a = self.coeff(j).to_vec();
            let (s, c) = (2.0 * PI * j as f64 * shift / self.tau).sin_cos();
            apply_j(&a, &mut ja);
            for (r, v) in z.coeff_mut(j).iter_mut().enumerate() {
                *v = c * a[r] + s * ja[r];
            }
        }
        z
    }

    /// The same curve viewed with period `ratio * tau`: mode `j` moves to
    /// `ratio * j`.
    pub fn extended(&self, ratio: usize) -> Result<Self> {
        if ratio == 0 {
            return Err(Error::InvalidArgument("extension ratio must be at least 1".into()));
        }
        let mut z = Self::zeros(self.tau * ratio as f64, self.n, self.m * ratio)?;
        for j in -(self.m as i64)..=(self.m as i64) {
            z.coeff_mut(j * ratio as i64).copy_from_slice(self.coeff(j));
        }
        Ok(z)
    }

    /// Projections onto `E^+`, `E^0` and `E^-`.
    pub fn split(&self) -> SplitLoop {
        let part = |keep: &dyn Fn(i64) -> bool| {
            let mut z = self.clone();
            for j in -(self.m as i64)..=(self.m as i64) {
                if !keep(j) {
                    z.coeff_mut(j).fill(0.0);
                }
            }
            z
        };
        SplitLoop { plus: part(&|j| j > 0), zero: part(&|j| j == 0), minus: part(&|j| j < 0) }
    }

    /// Largest coefficient norm and the modes whose norm exceeds `tol` times it.
    pub fn active_modes(&self, tol: f64) -> Vec<i64> {
        let norms: Vec<(i64, f64)> = (-(self.m as i64)..=(self.m as i64))
            .map(|j| (j, self.coeff(j).iter().map(|v| v * v).sum::<f64>().sqrt()))
            .collect();
        let max = norms.iter().fold(0.0_f64, |a, &(_, v)| a.max(v));
        if max == 0.0 {
            return Vec::new();
        }
        norms.into_iter().filter(|&(_, v)| v > tol * max).map(|(j, _)| j).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { coeffs: &self.coeffs * s, ..self.clone() }
    }
}

impl std::ops::Add<&FourierLoop> for &FourierLoop {
    type Output = FourierLoop;

    fn add(self, rhs: &FourierLoop) -> FourierLoop {
        combine(self, rhs, 1.0)
    }
}

impl std::ops::Sub<&FourierLoop> for &FourierLoop {
    type Output = FourierLoop;

    fn sub(self, rhs: &FourierLoop) -> FourierLoop {
        combine(self, rhs, -1.0)
    }
}

// Panics on mismatched periods or dimensions; callers check compatibility.
fn combine(a: &FourierLoop, b: &FourierLoop, s: f64) -> FourierLoop {
    assert!(a.tau == b.tau && a.n == b.n, "incompatible loops");
    let m = a.m.max(b.m);
    let (a, b) = (a.with_level(m), b.with_level(m));
    FourierLoop { coeffs: &a.coeffs + &b.coeffs * s, ..a }
}

/// `z = z^+ + z^0 + z^-`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitLoop {
    pub plus: FourierLoop,
    pub zero: FourierLoop,
    pub minus: FourierLoop,
}

impl SplitLoop {
    pub fn reconstruct(&self) -> FourierLoop {
        &(&self.plus + &self.zero) + &self.minus
    }
}

fn compatible(z1: &FourierLoop, z2: &FourierLoop) -> Result<()> {
    if z1.n != z2.n {
        return Err(Error::IncompatibleLoops(format!("half-dimensions {} and {}", z1.n, z2.n)));
    }
    if (z1.tau - z2.tau).abs() > 1e-12 * z1.tau.max(z2.tau) {
        return Err(Error::IncompatibleLoops(format!("periods {} and {}", z1.tau, z2.tau)));
    }
    Ok(())
}

// sum_j w(j) a1_j . a2_j over the common modes.
fn mode_sum(z1: &FourierLoop, z2: &FourierLoop, w: impl Fn(i64) -> f64) -> Result<f64> {
    compatible(z1, z2)?;
    let m = z1.m.min(z2.m) as i64;
    let mut s = 0.0;
    for j in -m..=m {
        let dot: f64 = z1.coeff(j).iter().zip(z2.coeff(j)).map(|(a, b)| a * b).sum();
        s += w(j) * dot;
    }
    Ok(s)
}

/// `<z1, z2>_E = tau a1_0 . a2_0 + tau sum_{j != 0} |j| a1_j . a2_j`.
pub fn e_inner(z1: &FourierLoop, z2: &FourierLoop) -> Result<f64> {
    let tau = z1.tau;
    mode_sum(z1, z2, |j| if j == 0 { tau } else { tau * j.unsigned_abs() as f64 })
}

pub fn e_norm(z: &FourierLoop) -> f64 {
    e_inner(z, z).expect("self-compatible").max(0.0).sqrt()
}

/// `<A z1, z2> = int -J z1' . z2 dt = 2 pi sum_j j a1_j . a2_j`.
pub fn a_form(z1: &FourierLoop, z2: &FourierLoop) -> Result<f64> {
    mode_sum(z1, z2, |j| 2.0 * PI * j as f64)
}

/// `int z1 . z2 dt = tau sum_j a1_j . a2_j`.
pub fn l2_inner(z1: &FourierLoop, z2: &FourierLoop) -> Result<f64> {
    let tau = z1.tau;
    mode_sum(z1, z2, |_| tau)
}

pub fn l2_norm(z: &FourierLoop) -> f64 {
    l2_inner(z, z).expect("self-compatible").max(0.0).sqrt()
}

/// `int_0^tau B(t) z1(t) . z2(t) dt` by the periodic trapezoid rule, with
/// nodes doubled from `8 (2m + 1)` until the value settles to `1e-10`.
pub fn b_form(b: &dyn CoefficientPath, z1: &FourierLoop, z2: &FourierLoop) -> Result<f64> {
    compatible(z1, z2)?;
    period_multiple(b, z1.tau)?;
    let m = z1.m.max(z2.m);
    let eval = |nodes: usize| -> Result<f64> {
        let s1 = z1.sample(nodes);
        let s2 = z2.sample(nodes);
        let mut acc = 0.0;
        for i in 0..nodes {
            let bt = b.eval(z1.tau * i as f64 / nodes as f64)?;
            acc += (&bt * &s1[i]).dot(&s2[i]);
        }
        Ok(acc * z1.tau / nodes as f64)
    };
    let mut nodes = default_nodes(m);
    let mut prev = eval(nodes)?;
    for _ in 0..6 {
        nodes *= 2;
        let next = eval(nodes)?;
        if (next - prev).abs() <= 1e-10 * (1.0 + next.abs()) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!("B-form still changing at {nodes} nodes")))
}

/// The action `G_alpha(z) = alpha int_0^tau H(alpha t, z(t)) dt - a(z, z) / 2`
/// with its E-gradient and Hessian form, at a fixed quadrature grid.
#[derive(Clone, Copy)]
pub struct Functional<'a> {
    model: &'a dyn Hamiltonian,
    alpha: f64,
    nodes: Option<usize>,
}

impl<'a> Functional<'a> {
    pub fn new(model: &'a dyn Hamiltonian, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { model, alpha, nodes: None })
    }

    /// Fix the quadrature node count; default is `8 (2m + 1)`.
    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = Some(nodes);
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn model(&self) -> &'a dyn Hamiltonian {
        self.model
    }

    pub fn nodes_for(&self, z: &FourierLoop) -> usize {
        self.nodes.unwrap_or_else(|| default_nodes(z.m)).max(2 * z.m + 1)
    }

    fn check(&self, z: &FourierLoop) -> Result<()> {
        if z.n != self.model.half_dim() {
            return Err(Error::InvalidDimension(format!(
                "loop has n = {}, model has n = {}",
                z.n,
                self.model.half_dim()
            )));
        }
        Ok(())
    }

    fn node_time(&self, z: &FourierLoop, i: usize, nodes: usize) -> f64 {
        self.alpha * z.tau * i as f64 / nodes as f64
    }

    pub fn action(&self, z: &FourierLoop) -> Result<f64> {
        self.check(z)?;
        let nodes = self.nodes_for(z);
        let samples = z.sample(nodes);
        let mut acc = 0.0;
        for (i, zi) in samples.iter().enumerate() {
            acc += self.model.value(self.node_time(z, i, nodes), zi.as_slice())?;
        }
        Ok(self.alpha * acc * z.tau / nodes as f64 - 0.5 * a_form(z, z)?)
    }

    /// Coordinate gradient: `dG[w] = g . w_coords`.
    pub fn coordinate_gradient(&self, z: &FourierLoop) -> Result<Vector> {
        self.check(z)?;
        let d = 2 * z.n;
        let m = z.m as i64;
        let nodes = self.nodes_for(z);
        let samples = z.sample(nodes);
        let w = self.alpha * z.tau / nodes as f64;
        let mut g = Vector::zeros(z.coeffs.len());
        let mut jh = vec![0.0; d];
        for (i, zi) in samples.iter().enumerate() {
            let h = self.model.gradient(self.node_time(z, i, nodes), zi.as_slice())?;
            apply_j(h.as_slice(), &mut jh);
            for j in -m..=m {
                // exp(-j th J) h = cos h - sin J h
                let phase = 2.0 * PI * ((j.rem_euclid(nodes as i64) as usize * i) % nodes) as f64 / nodes as f64;
                let (s, c) = phase.sin_cos();
                let o = z.offset(j);
                for r in 0..d {
                    g[o + r] += w * (c * h[r] - s * jh[r]);
                }
            }
        }
        for j in -m..=m {
            let o = z.offset(j);
            for r in 0..d {
                g[o + r] -= 2.0 * PI * j as f64 * z.coeffs[o + r];
            }
        }
        Ok(g)
    }

    /// Riesz representative of `dG` in the E inner product.
    pub fn gradient(&self, z: &FourierLoop) -> Result<FourierLoop> {
        let mut g = self.coordinate_gradient(z)?;
        let d = 2 * z.n;
        for (idx, v) in g.iter_mut().enumerate() {
            let j = (idx / d) as i64 - z.m as i64;
            *v /= if j == 0 { z.tau } else { z.tau * j.unsigned_abs() as f64 };
        }
        FourierLoop::from_vector(z.tau, z.n, z.m, g)
    }

    /// Samples of `alpha H''(alpha t, z(t))` at the quadrature nodes.
    pub fn hessian_samples(&self, z: &FourierLoop) -> Result<Vec<Matrix>> {
        self.check(z)?;
        let nodes = self.nodes_for(z);
        z.sample(nodes)
            .iter()
            .enumerate()
            .map(|(i, zi)| Ok(self.model.hessian(self.node_time(z, i, nodes), zi.as_slice())? * self.alpha))
            .collect()
    }

    /// The second variation `alpha b(H'') - a` on `E_m`, i.e. `-(A - B)`.
    pub fn hessian(&self, z: &FourierLoop) -> Result<GalerkinForm> {
        let samples = self.hessian_samples(z)?;
        Ok(form_from_samples(&samples, z.tau, z.m).negated())
    }
}

/// `G_alpha(z)`, with the quadrature grid doubled until the value settles.
pub fn action(model: &dyn Hamiltonian, z: &FourierLoop, alpha: f64) -> Result<f64> {
    let f = Functional::new(model, alpha)?;
    let mut nodes = default_nodes(z.m);
    let mut prev = f.with_nodes(nodes).action(z)?;
    for _ in 0..6 {
        nodes *= 2;
        let next = f.with_nodes(nodes).action(z)?;
        if (next - prev).abs() <= 1e-10 * (1.0 + next.abs()) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!("action still changing at {nodes} nodes")))
}

pub fn gradient(model: &dyn Hamiltonian, z: &FourierLoop, alpha: f64) -> Result<FourierLoop> {
    Functional::new(model, alpha)?.gradient(z)
}

pub fn hessian(model: &dyn Hamiltonian, z: &FourierLoop, alpha: f64) -> Result<GalerkinForm> {
    Functional::new(model, alpha)?.hessian(z)
}

/// Exponents `(omega~, sigma~) = (varrho omega, varrho sigma) / (sigma + omega)`.
pub fn rho_exponents(varrho: f64, sigma: f64, omega: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0 && omega > 0.0) {
        return Err(Error::InvalidArgument("sigma and omega must be positive".into()));
    }
    let wt = varrho * omega / (sigma + omega);
    let st = varrho * sigma / (sigma + omega);
    if !(wt >= 1.0 && st >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "scaling exponents must be at least 1, got omega~ = {wt}, sigma~ = {st}"
        )));
    }
    Ok((wt, st))
}

/// `B_rho z = (rho^{omega~ - 1} p, rho^{sigma~ - 1} q)` applied pointwise
/// in time.
///
/// With `K = diag(I, -I)`, which anticommutes with `J`, the map sends
/// `a_j` to `s a_j + d K a_{-j}` where `s` and `d` are the mean and half
/// difference of the two factors.
pub fn b_rho_scale(z: &FourierLoop, rho: f64, varrho: f64, sigma: f64, omega: f64) -> Result<FourierLoop> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    let (wt, st) = rho_exponents(varrho, sigma, omega)?;
    let fp = rho.powf(wt - 1.0);
    let fq = rho.powf(st - 1.0);
    let (s, d) = (0.5 * (fp + fq), 0.5 * (fp - fq));
    let n = z.n;
    let mut out = z.clone();
    for j in -(z.m as i64)..=(z.m as i64) {
        let mirror = z.coeff(-j);
        for (r, v) in out.coeff_mut(j).iter_mut().enumerate() {
            let k = if r < n { 1.0 } else { -1.0 };
            *v = s * z.coeff(j)[r] + d * k * mirror[r];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::{ConstantCoefficient, TrigCoefficient, TrigTerm};
    use crate::index::assemble_galerkin_form;
    use crate::models::{quadratic_model, soft_power_model};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_loop(rng: &mut ChaCha8Rng, tau: f64, n: usize, m: usize, scale: f64) -> FourierLoop {
        let d = (2 * m + 1) * 2 * n;
        FourierLoop::from_vector(tau, n, m, Vector::from_fn(d, |_, _| rng.gen_range(-scale..scale))).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        let z = FourierLoop::zeros(2.0 * PI, 1, 3).unwrap();
        assert_eq!(z.evaluate(1.3).amax(), 0.0);
        let c = FourierLoop::single_mode(2.0 * PI, 2, 0, &[1.0, 0.0]).unwrap();
        assert_eq!(c.evaluate(0.9), Vector::from_vec(vec![1.0, 0.0]));
        let q = FourierLoop::single_mode(4.0, 2, 1, &[1.0, 0.0]).unwrap();
        let v = q.evaluate(1.0);
        assert!((v[0]).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sample_matches_evaluate_and_derivative_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = random_loop(&mut rng, 3.0, 2, 4, 1.0);
        let s = z.sample(37);
        for (i, v) in s.iter().enumerate() {
            assert!((v - z.evaluate(3.0 * i as f64 / 37.0)).amax() < 1e-12);
        }
        let t = 0.77;
        let h = 1e-6;
        let fd = (z.evaluate(t + h) - z.evaluate(t - h)) / (2.0 * h);
        assert!((fd - z.derivative(t)).amax() < 1e-7);
    }

    #[test]
    fn norm_examples() {
        let z = FourierLoop::single_mode(2.0 * PI, 3, 2, &[0.6, 0.8]).unwrap();
        assert!((e_inner(&z, &z).unwrap() - 4.0 * PI).abs() < 1e-12);
        let w = FourierLoop::single_mode(2.0 * PI, 3, 1, &[0.6, 0.8]).unwrap();
        assert_eq!(e_inner(&z, &w).unwrap(), 0.0);
        let other = FourierLoop::zeros(3.0, 1, 3).unwrap();
        assert!(matches!(e_inner(&z, &other), Err(Error::IncompatibleLoops(_))));
    }

    #[test]
    fn a_form_examples_and_quadrature() {
        let c = FourierLoop::single_mode(2.0 * PI, 2, 0, &[1.0, 2.0]).unwrap();
        assert_eq!(a_form(&c, &c).unwrap(), 0.0);
        let p = FourierLoop::single_mode(2.0 * PI, 2, 1, &[1.0, 0.0]).unwrap();
        assert!((a_form(&p, &p).unwrap() - 2.0 * PI).abs() < 1e-14);
        let m = FourierLoop::single_mode(2.0 * PI, 2, -1, &[0.0, 1.0]).unwrap();
        assert!((a_form(&m, &m).unwrap() + 2.0 * PI).abs() < 1e-14);
        // int -J z' . z by quadrature
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = random_loop(&mut rng, 5.0, 1, 3, 1.0);
        let nodes = 200;
        let mut acc = 0.0;
        for i in 0..nodes {
            let t = 5.0 * i as f64 / nodes as f64;
            let dz = z.derivative(t);
            let v = z.evaluate(t);
            // -J dz = (dz_q, -dz_p)
            acc += dz[1] * v[0] - dz[0] * v[1];
        }
        acc *= 5.0 / nodes as f64;
        assert!((acc - a_form(&z, &z).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn b_form_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = random_loop(&mut rng, 2.0 * PI, 1, 3, 1.0);
        let id = ConstantCoefficient::scalar(1, 1.0).unwrap();
        assert!((b_form(&id, &z, &z).unwrap() - l2_inner(&z, &z).unwrap()).abs() < 1e-10);
        let zero = ConstantCoefficient::scalar(1, 0.0).unwrap();
        assert_eq!(b_form(&zero, &z, &z).unwrap(), 0.0);
        let s = FourierLoop::single_mode(2.0 * PI, 3, 2, &[0.3, -0.4]).unwrap();
        let b = ConstantCoefficient::scalar(1, 0.7).unwrap();
        assert!((b_form(&b, &s, &s).unwrap() - 0.7 * 2.0 * PI * 0.25).abs() < 1e-12);
    }

    #[test]
    fn split_reconstructs_and_decomposes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let z = random_loop(&mut rng, 2.0 * PI, 2, 5, 2.0);
            let sp = z.split();
            assert_eq!(sp.reconstruct(), z);
            let e = |a: &FourierLoop| e_inner(a, a).unwrap();
            assert!((e(&z) - e(&sp.plus) - e(&sp.zero) - e(&sp.minus)).abs() < 1e-10 * e(&z));
            let a = |a: &FourierLoop| a_form(a, a).unwrap();
            assert!((a(&z) - a(&sp.plus) - a(&sp.minus)).abs() < 1e-10 * e(&z));
            let c = z.coeff(0);
            let zero = 2.0 * PI * c.iter().map(|v| v * v).sum::<f64>();
            assert!((e(&z) - zero - (a(&sp.plus) - a(&sp.minus))).abs() < 1e-10 * e(&z));
        }
    }

    #[test]
    fn shifts_and_extensions_evaluate_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = random_loop(&mut rng, 2.0, 1, 4, 1.0);
        let zs = z.shifted(0.37);
        let ze = z.extended(3).unwrap();
        for i in 0..10 {
            let t = 0.41 * i as f64;
            assert!((zs.evaluate(t) - z.evaluate(t + 0.37)).amax() < 1e-12);
            assert!((ze.evaluate(t) - z.evaluate(t)).amax() < 1e-12);
        }
        assert_eq!(ze.tau(), 6.0);
    }

    #[test]
    fn json_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z = random_loop(&mut rng, 2.0 * PI, 1, 2, 1.0);
        let s = serde_json::to_string(&z).unwrap();
        assert!(s.contains("\"coeffs\":[["));
        let back: FourierLoop = serde_json::from_str(&s).unwrap();
        assert_eq!(back, z);
        assert!(serde_json::from_str::<FourierLoop>(r#"{"tau":1.0,"n":1,"m":1,"coeffs":[[1,2]]}"#).is_err());
    }

    #[test]
    fn action_examples() {
        let sp = soft_power_model(1, 1.75).unwrap();
        let z0 = FourierLoop::zeros(2.0 * PI, 1, 4).unwrap();
        assert_eq!(action(&sp, &z0, 1.3).unwrap(), 0.0);
        let q = quadratic_model(1, 0.0).unwrap();
        let z1 = FourierLoop::single_mode(2.0 * PI, 4, 1, &[0.6, 0.8]).unwrap();
        assert!((action(&q, &z1, 1.0).unwrap() + PI).abs() < 1e-12);
        let c = FourierLoop::single_mode(2.0 * PI, 4, 0, &[1.0, 2.0]).unwrap();
        let want = 2.0 * PI * 0.8 * sp.value(0.0, &[1.0, 2.0]).unwrap();
        assert!((action(&sp, &c, 0.8).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn quadratic_gradient_is_explicit() {
        let (b, alpha, j) = (0.7, 1.9, 3i64);
        let q = quadratic_model(1, b).unwrap();
        let z = FourierLoop::single_mode(2.0 * PI, 4, j, &[0.5, -0.2]).unwrap();
        let g = gradient(&q, &z, alpha).unwrap();
        let f = (alpha * b - j as f64) / j as f64;
        for (r, a) in [0.5, -0.2].iter().enumerate() {
            assert!((g.coeff(j)[r] - f * a).abs() < 1e-12);
        }
        assert!(g.as_vector().iter().enumerate().all(|(i, v)| (i / 2) as i64 - 4 == j || v.abs() < 1e-12));
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sp = soft_power_model(1, 1.75).unwrap();
        for _ in 0..10 {
            let alpha = rng.gen_range(0.5..2.0);
            let z = random_loop(&mut rng, 2.0 * PI, 1, 4, 1.5);
            let f = Functional::new(&sp, alpha).unwrap();
            let g = f.gradient(&z).unwrap();
            let hess = f.hessian(&z).unwrap();
            let w = random_loop(&mut rng, 2.0 * PI, 1, 4, 1.0);
            let h = 1e-6;
            let fd = (f.action(&(&z + &w.scaled(h))).unwrap() - f.action(&(&z - &w.scaled(h))).unwrap()) / (2.0 * h);
            let dg = e_inner(&g, &w).unwrap();
            assert!((fd - dg).abs() <= 1e-6 * dg.abs().max(1.0), "{fd} {dg}");
            let gp = f.coordinate_gradient(&(&z + &w.scaled(h))).unwrap();
            let gm = f.coordinate_gradient(&(&z - &w.scaled(h))).unwrap();
            let fd_h = (gp - gm) / (2.0 * h);
            let hw = &hess.matrix * w.as_vector();
            assert!((fd_h - &hw).amax() <= 1e-5 * hw.amax().max(1.0));
        }
    }

    #[test]
    fn hessian_at_origin_matches_assembled_form() {
        let (c, alpha) = (0.6, 1.7);
        let q = quadratic_model(1, c).unwrap();
        let z = FourierLoop::zeros(2.0 * PI, 1, 5).unwrap();
        let h = hessian(&q, &z, alpha).unwrap();
        let f = assemble_galerkin_form(&ConstantCoefficient::scalar(1, alpha * c).unwrap(), 2.0 * PI, 5).unwrap();
        assert!((&h.matrix + &f.matrix).amax() < 1e-9);
        assert!(h.asymmetry() == 0.0);
    }

    #[test]
    fn hessian_uses_time_dependence() {
        // A T-periodic quadratic H = (B(t) z, z)/2 gives B(alpha t) alpha.
        let b = TrigCoefficient::new(
            2.0 * PI,
            Matrix::identity(2, 2) * 0.3,
            vec![TrigTerm { k: 1, cos: Matrix::from_row_slice(2, 2, &[0.2, 0.1, 0.1, 0.0]), sin: Matrix::zeros(2, 2) }],
        )
        .unwrap();
        let base = std::sync::Arc::new(quadratic_model(1, 0.0).unwrap());
        let m = crate::models::quadratic_plus_model(std::sync::Arc::new(b.clone()), base).unwrap();
        let z = FourierLoop::zeros(2.0 * PI, 1, 4).unwrap();
        let h = hessian(&m, &z, 1.0).unwrap();
        let f = assemble_galerkin_form(&b, 2.0 * PI, 4).unwrap();
        assert!((&h.matrix + &f.matrix).amax() < 1e-9);
    }

    #[test]
    fn b_rho_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = random_loop(&mut rng, 2.0 * PI, 2, 4, 1.0);
        assert_eq!(b_rho_scale(&z, 1.0, 2.5, 1.0, 1.0).unwrap(), z);
        for rho in [0.1, 0.5, 2.0, 10.0] {
            let s = b_rho_scale(&z, rho, 2.5, 1.0, 1.0).unwrap();
            let lhs = a_form(&s, &s).unwrap();
            let rhs = rho.powf(0.5) * a_form(&z, &z).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
        }
        assert!(b_rho_scale(&z, 2.0, 1.5, 1.0, 1.0).is_err());
        assert!(b_rho_scale(&z, 0.0, 2.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn b_rho_is_pointwise_for_unequal_exponents() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = random_loop(&mut rng, 2.0, 2, 3, 1.0);
        let (rho, varrho, sigma, omega) = (0.4, 5.0, 1.0, 2.0);
        let s = b_rho_scale(&z, rho, varrho, sigma, omega).unwrap();
        let (wt, st) = rho_exponents(varrho, sigma, omega).unwrap();
        for i in 0..7 {
            let t = 0.29 * i as f64;
            let v = z.evaluate(t);
            let want = Vector::from_fn(4, |r, _| v[r] * if r < 2 { rho.powf(wt - 1.0) } else { rho.powf(st - 1.0) });
            assert!((s.evaluate(t) - want).amax() < 1e-12);
        }
        assert!(e_norm(&s) <= e_norm(&z));
    }
}
