//! Fundamental solutions of `y' = J B(t) y`.
//!
//! Every one-step method here is built from the implicit midpoint rule with
//! `B` sampled at the step midpoint. For a linear Hamiltonian field that step
//! is the Cayley transform `(I - h/2 JB)^{-1} (I + h/2 JB)`, which is exactly
//! symplectic. [`Scheme::TripleJump`] composes three such steps with the
//! Yoshida weights, giving a fourth-order method that is still a product of
//! Cayley transforms.
//!
//! Sampled paths are accumulated in double-double arithmetic, so their
//! symplecticity is limited by the integrator rather than by the rounding
//! of large products. Bare monodromy computations stay in f64.

use nalgebra::DMatrix;

use crate::coefficient::CoefficientPath;
use crate::error::{Error, Result};
use crate::extended::DdMatrix;
use crate::symplectic::{j_times, symplectic_defect, Matrix};

pub const DEFAULT_STEPS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Implicit midpoint, second order.
    Midpoint,
    /// Symmetric triple-jump composition of midpoint steps, fourth order.
    #[default]
    TripleJump,
}

impl Scheme {
    pub fn order(self) -> u32 {
        match self {
            Scheme::Midpoint => 2,
            Scheme::TripleJump => 4,
        }
    }

    fn substeps(self) -> &'static [f64] {
        const CBRT2: f64 = 1.259_921_049_894_873_2;
        const W1: f64 = 1.0 / (2.0 - CBRT2);
        const W0: f64 = -CBRT2 / (2.0 - CBRT2);
        match self {
            Scheme::Midpoint => &[1.0],
            Scheme::TripleJump => &[W1, W0, W1],
        }
    }
}

/// Time-sampled fundamental solution with `gamma(0) = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticPath {
    n: usize,
    period: f64,
    times: Vec<f64>,
    states: Vec<Matrix>,
    // Second words of the double-double states.
    lows: Vec<Matrix>,
}

impl SymplecticPath {
    pub fn half_dim(&self) -> usize {
        self.n
    }

    /// Period of the coefficient that generated the path.
    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("paths are never empty")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Matrix] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest symplecticity defect over all samples, at working precision.
    pub fn max_defect(&self) -> f64 {
        self.states
            .iter()
            .zip(&self.lows)
            .map(|(g, l)| DdMatrix::from_parts(g, l).symplectic_defect())
            .fold(0.0, f64::max)
    }

    /// Largest defect of the f64-rounded samples returned by
    /// [`states`](Self::states). Rounding alone contributes about
    /// `eps |gamma|^2`.
    pub fn rounded_defect(&self) -> f64 {
        self.states.iter().map(|g| symplectic_defect(g).unwrap_or(f64::INFINITY)).fold(0.0, f64::max)
    }

    fn extended(&self, i: usize) -> DdMatrix {
        DdMatrix::from_parts(&self.states[i], &self.lows[i])
    }
}

fn cayley_step(b: &dyn CoefficientPath, t_mid: f64, h: f64, d: usize) -> Result<Matrix> {
    let k = hamiltonian_step(b, t_mid, h)?;
    let id = DMatrix::identity(d, d);
    let lhs = &id - &k;
    let rhs = &id + &k;
    lhs.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric(format!("singular Cayley step at t = {t_mid}")))
}

fn hamiltonian_step(b: &dyn CoefficientPath, t_mid: f64, h: f64) -> Result<Matrix> {
    Ok(j_times(&b.eval(t_mid)?) * (0.5 * h))
}

fn step_extended(b: &dyn CoefficientPath, t0: f64, h: f64, scheme: Scheme) -> Result<DdMatrix> {
    let mut t = t0;
    let mut acc: Option<DdMatrix> = None;
    for &w in scheme.substeps() {
        let hs = w * h;
        let c = DdMatrix::cayley(&hamiltonian_step(b, t + 0.5 * hs, hs)?)
            .ok_or_else(|| Error::Numeric(format!("singular Cayley step at t = {}", t + 0.5 * hs)))?;
        acc = Some(match acc {
            None => c,
            Some(prev) => c.mul(&prev),
        });
        t += hs;
    }
    Ok(acc.expect("at least one substep"))
}

fn step_matrix(b: &dyn CoefficientPath, t0: f64, h: f64, scheme: Scheme, d: usize) -> Result<Matrix> {
    let mut t = t0;
    let mut acc: Option<Matrix> = None;
    for &w in scheme.substeps() {
        let hs = w * h;
        let c = cayley_step(b, t + 0.5 * hs, hs, d)?;
        acc = Some(match acc {
            None => c,
            Some(prev) => c * prev,
        });
        t += hs;
    }
    Ok(acc.expect("at least one substep"))
}

fn check_grid(horizon: f64, steps: usize, min_steps: usize) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if steps < min_steps {
        return Err(Error::InvalidArgument(format!("need at least {min_steps} steps, got {steps}")));
    }
    Ok(())
}

/// Samples of the fundamental solution on a uniform grid of `steps` steps,
/// using the default [`Scheme`].
pub fn fundamental_solution(b: &dyn CoefficientPath, horizon: f64, steps: usize) -> Result<SymplecticPath> {
    fundamental_solution_with(b, horizon, steps, Scheme::default())
}

pub fn fundamental_solution_with(
    b: &dyn CoefficientPath,
    horizon: f64,
    steps: usize,
    scheme: Scheme,
) -> Result<SymplecticPath> {
    check_grid(horizon, steps, 16)?;
    let n = b.half_dim();
    let d = 2 * n;
    let h = horizon / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut lows = Vec::with_capacity(steps + 1);
    let mut y = DdMatrix::identity(d);
    times.push(0.0);
    states.push(DMatrix::identity(d, d));
    lows.push(DMatrix::zeros(d, d));
    for i in 0..steps {
        let t0 = i as f64 * h;
        y = step_extended(b, t0, h, scheme)?.mul(&y);
        times.push(if i + 1 == steps { horizon } else { t0 + h });
        let (hi, lo) = y.split();
        states.push(hi);
        lows.push(lo);
    }
    Ok(SymplecticPath { n, period: b.period(), times, states, lows })
}

/// Endpoint `gamma(horizon)` without storing intermediate samples.
pub fn propagate(b: &dyn CoefficientPath, horizon: f64, steps: usize, scheme: Scheme) -> Result<Matrix> {
    check_grid(horizon, steps, 1)?;
    let d = 2 * b.half_dim();
    let h = horizon / steps as f64;
    let mut y = DMatrix::identity(d, d);
    for i in 0..steps {
        y = step_matrix(b, i as f64 * h, h, scheme, d)? * y;
    }
    Ok(y)
}

/// Grid-doubling policy for monodromy matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyOptions {
    pub initial_steps: usize,
    /// Stop once `max|gamma_2N - gamma_N| <= tol * max(1, max|gamma_2N|)`.
    pub tol: f64,
    pub max_doublings: usize,
    pub scheme: Scheme,
}

impl Default for MonodromyOptions {
    fn default() -> Self {
        Self { initial_steps: DEFAULT_STEPS, tol: 1e-10, max_doublings: 14, scheme: Scheme::default() }
    }
}

/// Monodromy over `horizon` with automatic step doubling. Returns the matrix
/// and the number of steps of the accepted grid.
pub fn converged_monodromy(
    b: &dyn CoefficientPath,
    horizon: f64,
    opts: &MonodromyOptions,
) -> Result<(Matrix, usize)> {
    let mut steps = opts.initial_steps.max(1);
    let mut prev = propagate(b, horizon, steps, opts.scheme)?;
    for _ in 0..opts.max_doublings {
        steps *= 2;
        let next = propagate(b, horizon, steps, opts.scheme)?;
        let change = (&next - &prev).amax();
        if change <= opts.tol * next.amax().max(1.0) {
            return Ok((next, steps));
        }
        prev = next;
    }
    Err(Error::Numeric(format!(
        "monodromy still changing after {} steps",
        steps
    )))
}

/// The `m`-th iteration path `gamma^m(t) = gamma(t - j tau) gamma(tau)^j` on
/// `[0, m tau]`, where `gamma` covers exactly one period.
pub fn iterate_path(path: &SymplecticPath, m: usize) -> Result<SymplecticPath> {
    if m < 1 {
        return Err(Error::InvalidArgument("iteration count must be at least 1".into()));
    }
    let tau = path.horizon();
    if (tau - path.period).abs() > 1e-9 * tau.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "path covers {tau}, not exactly one period {}",
            path.period
        )));
    }
    let last = path.len() - 1;
    let end = path.extended(last);
    let mut times = Vec::with_capacity(last * m + 1);
    let mut states = Vec::with_capacity(times.capacity());
    let mut lows = Vec::with_capacity(times.capacity());
    times.push(0.0);
    states.push(path.states[0].clone());
    lows.push(path.lows[0].clone());
    let mut power = DdMatrix::identity(2 * path.n);
    for j in 0..m {
        for (i, t) in path.times.iter().enumerate().skip(1) {
            times.push(j as f64 * tau + t);
            let (hi, lo) = path.extended(i).mul(&power).split();
            states.push(hi);
            lows.push(lo);
        }
        power = end.mul(&power);
    }
    Ok(SymplecticPath { n: path.n, period: path.period, times, states, lows })
}

/// The final sample of the path.
pub fn monodromy(path: &SymplecticPath) -> Matrix {
    path.states.last().expect("paths are never empty").clone()
}
