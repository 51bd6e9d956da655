//! Nontrivial critical points of the action on `E_m`.
//!
//! Loops live in rescaled time `s = t / (k alpha)` with period `2 pi`, so a
//! critical point of `G_{k alpha}` is a `k T` periodic orbit with
//! `T = 2 pi alpha`. The search is a damped Newton iteration on the
//! gradient, deflated away from the origin and from earlier finds, started
//! from points of the linking sets.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coefficient::CoefficientPath;
use crate::error::{Error, Result};
use crate::index::{counts_from_spectrum, maslov_index_with, GalerkinForm, Gap, IndexOptions, IndexPair, InertiaCounts};
use crate::iteration::{distinctness, distinctness_bound, Distinctness};
use crate::loops::{b_rho_scale, e_norm, FourierLoop, Functional};
use crate::models::{k_range_bound, Hamiltonian};
use crate::symplectic::{apply_j, Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Truncation level.
    pub m: usize,
    /// Target E-norm of the gradient.
    pub residual_tol: f64,
    pub max_newton: usize,
    /// Radii of the boundary spheres seeds are drawn from.
    pub thetas: Vec<f64>,
    pub random_directions: usize,
    /// Seeds along constant loops with a small positive-mode tilt.
    pub constant_seeds: usize,
    pub seed: u64,
    pub distinct_tol: f64,
    /// Quadrature nodes; `8 (2m + 1)` when absent.
    pub nodes: Option<usize>,
    /// Exponent of the seed scaling `B_theta`; defaults to the smallest
    /// admissible value, at least 2.
    pub varrho: Option<f64>,
    pub max_solutions: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            m: 32,
            residual_tol: 1e-8,
            max_newton: 60,
            thetas: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
            random_directions: 2,
            constant_seeds: 3,
            seed: 0,
            distinct_tol: 1e-4,
            nodes: None,
            varrho: None,
            max_solutions: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    /// Loop is away from the origin and has positive action.
    pub nontrivial: bool,
    /// `i <= n <= i + nu`; `None` when the index did not converge.
    pub index_interval: Option<bool>,
    /// `m^- <= dim E_m / 2 - n <= m^- + m^0` for the truncated Hessian.
    pub morse_bracketing: bool,
    /// Morse counts agree with the index through the Galerkin count rule.
    pub morse_index_consistent: Option<bool>,
    /// `k <= 2 pi / (w T)` for quadratic-plus models; `None` otherwise.
    pub within_existence_range: Option<bool>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub k: usize,
    /// `T / 2 pi`.
    pub alpha: f64,
    /// `k T` in original time.
    pub period: f64,
    /// The orbit in rescaled time (period `2 pi`).
    #[serde(rename = "loop")]
    pub orbit: FourierLoop,
    /// E-norm of the gradient.
    pub residual: f64,
    /// Max of `|z' - k alpha J H'(k alpha s, z)|` on a fine grid.
    pub ode_defect: Option<f64>,
    pub action: f64,
    pub index: Option<IndexPair>,
    /// Inertia of the truncated Hessian of the action.
    pub morse: InertiaCounts,
    pub certificates: Certificates,
}

impl SolutionRecord {
    pub fn model_period(&self) -> f64 {
        2.0 * PI * self.alpha
    }

    /// The orbit as a function of original time, period `k T`.
    pub fn original_time_loop(&self) -> FourierLoop {
        let v = self.orbit.as_vector().clone();
        FourierLoop::from_vector(self.period, self.orbit.half_dim(), self.orbit.level(), v).expect("valid loop")
    }

    /// The same orbit regarded as a `(ratio k) T` periodic solution.
    pub fn reinterpreted(&self, ratio: usize) -> Result<SolutionRecord> {
        let ext = self.orbit.extended(ratio)?;
        let orbit = FourierLoop::from_vector(2.0 * PI, ext.half_dim(), ext.level(), ext.into_vector())?;
        Ok(SolutionRecord { k: self.k * ratio, period: self.period * ratio as f64, orbit, ..self.clone() })
    }
}

/// `k alpha H''(k alpha s, z(s))` along a loop in rescaled time.
pub struct OrbitHessian<'a> {
    model: &'a dyn Hamiltonian,
    orbit: &'a FourierLoop,
    alpha: f64,
}

impl<'a> OrbitHessian<'a> {
    pub fn new(model: &'a dyn Hamiltonian, orbit: &'a FourierLoop, alpha: f64) -> Self {
        Self { model, orbit, alpha }
    }
}

impl CoefficientPath for OrbitHessian<'_> {
    fn half_dim(&self) -> usize {
        self.orbit.half_dim()
    }

    fn period(&self) -> f64 {
        self.orbit.tau()
    }

    fn eval_raw(&self, s: f64) -> Matrix {
        let d = 2 * self.orbit.half_dim();
        match self.model.hessian(self.alpha * s, self.orbit.evaluate(s).as_slice()) {
            Ok(h) => h * self.alpha,
            Err(_) => Matrix::from_element(d, d, f64::NAN),
        }
    }
}

fn check_problem(model: &dyn Hamiltonian, alpha: f64, k: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if k < 1 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if let Some(tm) = model.period() {
        let ratio = 2.0 * PI * alpha / tm;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "T = {} is not a multiple of the model period {tm}",
                2.0 * PI * alpha
            )));
        }
    }
    Ok(())
}

/// Inertia of a Hessian form (negative, null and positive directions of
/// the form itself). For the action's Hessian `-(A - B)` the negative count
/// equals `dim M^+(A - B)`.
pub fn morse_counts(form: &GalerkinForm, gap: Gap) -> Result<InertiaCounts> {
    counts_from_spectrum(&form.spectrum()?, gap)
}

fn weighted_norm(gc: &Vector, weights: &Vector) -> f64 {
    gc.iter().zip(weights.iter()).map(|(g, w)| g * g / w).sum::<f64>().sqrt()
}

// Regularised Newton direction for H delta = -g in E-normalised coordinates.
fn newton_direction(hess: &GalerkinForm, gc: &Vector) -> Vector {
    let d = gc.len();
    let w: Vec<f64> = hess.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let scaled = Matrix::from_fn(d, d, |i, j| hess.matrix[(i, j)] * w[i] * w[j]);
    let eig = scaled.symmetric_eigen();
    let eps = 1e-10 * eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let rhs = Vector::from_fn(d, |i, _| -gc[i] * w[i]);
    let mut proj = eig.eigenvectors.transpose() * rhs;
    for (p, l) in proj.iter_mut().zip(eig.eigenvalues.iter()) {
        *p *= l / (l * l + eps * eps);
    }
    let y = eig.eigenvectors * proj;
    Vector::from_fn(d, |i, _| y[i] * w[i])
}

struct Deflation {
    points: Vec<FourierLoop>,
}

impl Deflation {
    // (M, d ln M / dz in coordinates). M = prod (1 / |z - z_i|_E^2 + 1).
    fn eval(&self, z: &FourierLoop, weights: &Vector) -> (f64, Vector) {
        let mut m = 1.0;
        let mut grad = Vector::zeros(weights.len());
        for p in &self.points {
            let diff = z.as_vector() - p.as_vector();
            let d2: f64 = diff.iter().zip(weights.iter()).map(|(v, w)| w * v * v).sum();
            m *= 1.0 / d2 + 1.0;
            let c = -2.0 / (d2 * (1.0 + d2));
            grad += diff.component_mul(weights) * c;
        }
        (m, grad)
    }
}

struct NewtonOutcome {
    orbit: FourierLoop,
    residual: f64,
}

fn newton(f: &Functional, z0: FourierLoop, defl: &Deflation, opts: &SolverOptions) -> Result<Option<NewtonOutcome>> {
    let mut z = z0;
    let mut gc = f.coordinate_gradient(&z)?;
    let mut hess = f.hessian(&z)?;
    let weights = hess.weights.clone();
    let merit = |z: &FourierLoop, gc: &Vector| -> f64 {
        let (m, _) = defl.eval(z, &weights);
        m * m * weighted_norm(gc, &weights).powi(2)
    };
    let mut current = merit(&z, &gc);
    for _ in 0..opts.max_newton {
        let res = weighted_norm(&gc, &weights);
        if !res.is_finite() || e_norm(&z) > 1e9 {
            return Ok(None);
        }
        if res <= opts.residual_tol {
            // Two undamped polishing steps, kept only when they help.
            let mut best = (z.clone(), res);
            for _ in 0..2 {
                let step = newton_direction(&hess, &gc);
                let trial = FourierLoop::from_vector(z.tau(), z.half_dim(), z.level(), z.as_vector() + step)?;
                let tg = f.coordinate_gradient(&trial)?;
                let tr = weighted_norm(&tg, &weights);
                if tr < best.1 {
                    best = (trial.clone(), tr);
                    z = trial;
                    gc = tg;
                    hess = f.hessian(&z)?;
                } else {
                    break;
                }
            }
            return Ok(Some(NewtonOutcome { orbit: best.0, residual: best.1 }));
        }
        let delta = newton_direction(&hess, &gc);
        let (_, dlnm) = defl.eval(&z, &weights);
        let denom = 1.0 - dlnm.dot(&delta);
        let tau = if denom > 1e-3 { 1.0 / denom } else { 1.0 };
        let step = delta * tau;
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-6 {
            let cand = z.as_vector() + &step * lambda;
            if cand.iter().all(|v| v.is_finite()) {
                let trial = FourierLoop::from_vector(z.tau(), z.half_dim(), z.level(), cand)?;
                if let Ok(tg) = f.coordinate_gradient(&trial) {
                    let tm = merit(&trial, &tg);
                    if tm < (1.0 - 1e-4 * lambda) * current {
                        z = trial;
                        gc = tg;
                        current = tm;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Ok(None);
        }
        hess = f.hessian(&z)?;
    }
    Ok(None)
}

/// A unit E-norm loop in `E_m^+` from random low modes.
fn random_plus_direction(rng: &mut ChaCha8Rng, n: usize, m: usize) -> FourierLoop {
    let mut z = FourierLoop::zeros(2.0 * PI, n, m).expect("valid shape");
    for j in 1..=(m.min(4) as i64) {
        for v in z.coeff_mut(j) {
            let g: f64 = rng.sample(StandardNormal);
            *v = g / (j * j) as f64;
        }
    }
    let nz = e_norm(&z);
    z.scaled(1.0 / nz)
}

/// Maximize `t -> G(t u)` over `t > 0`; `None` when the maximum sits at the
/// end of the search range.
fn ray_maximum(f: &Functional, u: &FourierLoop) -> Result<Option<FourierLoop>> {
    let per_decade = 8;
    let (lo, hi) = (-2.0_f64, 5.0_f64);
    let count = ((hi - lo) * per_decade as f64) as usize;
    let g = |lt: f64| -> f64 { f.action(&u.scaled(10f64.powf(lt))).unwrap_or(f64::NEG_INFINITY) };
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..=count {
        let v = g(lo + i as f64 / per_decade as f64);
        if v > best.1 {
            best = (i, v);
        }
    }
    if best.0 == 0 || best.0 == count {
        return Ok(None);
    }
    let h = 1.0 / per_decade as f64;
    let (mut a, mut b) = (lo + (best.0 as f64 - 1.0) * h, lo + (best.0 as f64 + 1.0) * h);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if g(c) > g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(Some(u.scaled(10f64.powf(0.5 * (a + b)))))
}

fn seed_varrho(model: &dyn Hamiltonian, opts: &SolverOptions) -> f64 {
    let p = model.params();
    opts.varrho.unwrap_or_else(|| ((p.sigma + p.omega) / p.sigma.min(p.omega)).max(2.0))
}

fn seeds(model: &dyn Hamiltonian, f: &Functional, opts: &SolverOptions) -> Result<Vec<FourierLoop>> {
    let n = model.half_dim();
    let m = opts.m;
    let p = model.params();
    let varrho = seed_varrho(model, opts);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut axis = FourierLoop::zeros(2.0 * PI, n, m)?;
    axis.coeff_mut(1)[0] = 1.0 / (2.0 * PI).sqrt();
    let mut dirs = vec![axis.clone()];
    for _ in 0..opts.random_directions {
        dirs.push(random_plus_direction(&mut rng, n, m));
    }
    let mut out = Vec::new();
    for u in &dirs {
        if let Some(z) = ray_maximum(f, u)? {
            out.push(z);
        }
    }
    for c in 0..opts.constant_seeds {
        let scale = 10f64.powi(c as i32);
        let mut z = axis.scaled(0.1 * scale);
        let dir: Vec<f64> = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
        let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (v, d) in z.coeff_mut(0).iter_mut().zip(&dir) {
            *v = scale * d / len;
        }
        out.push(z);
    }
    for &theta in &opts.thetas {
        for u in &dirs {
            out.push(b_rho_scale(&u.scaled(theta), theta, varrho, p.sigma, p.omega)?);
        }
    }
    Ok(out)
}

struct Candidate {
    orbit: FourierLoop,
    residual: f64,
    action: f64,
    morse: InertiaCounts,
    bracketing: bool,
}

fn same_orbit(a: &FourierLoop, b: &FourierLoop, autonomous: bool, tol: f64) -> Result<bool> {
    let d = distinctness(a, b, a.tau(), tol)?;
    Ok(!d.distinct || (autonomous && d.continuous_distance <= tol))
}

fn search(model: &dyn Hamiltonian, alpha: f64, k: usize, opts: &SolverOptions) -> Result<(Vec<Candidate>, usize)> {
    check_problem(model, alpha, k)?;
    if opts.m < 8 {
        return Err(Error::InvalidArgument(format!("truncation level must be at least 8, got {}", opts.m)));
    }
    let mut f = Functional::new(model, k as f64 * alpha)?;
    if let Some(nodes) = opts.nodes {
        f = f.with_nodes(nodes);
    }
    let n = model.half_dim();
    let autonomous = model.period().is_none();
    let mut defl = Deflation { points: vec![FourierLoop::zeros(2.0 * PI, n, opts.m)?] };
    let mut found: Vec<Candidate> = Vec::new();
    let all = seeds(model, &f, opts)?;
    let mut attempts = 0;
    for z0 in all {
        if found.len() >= opts.max_solutions {
            break;
        }
        attempts += 1;
        let Some(out) = newton(&f, z0, &defl, opts)? else { continue };
        if e_norm(&out.orbit) <= 1e-6 {
            continue;
        }
        let mut duplicate = false;
        for c in &found {
            if same_orbit(&c.orbit, &out.orbit, autonomous, opts.distinct_tol)? {
                duplicate = true;
                break;
            }
        }
        defl.points.push(out.orbit.clone());
        if duplicate {
            continue;
        }
        let hess = f.hessian(&out.orbit)?;
        let morse = morse_counts(&hess, Gap::default())?;
        let half = hess.half_dim();
        let bracketing = morse.minus <= half - n && half - n <= morse.minus + morse.zero;
        let action = f.action(&out.orbit)?;
        log::debug!("k = {k}: found orbit with action {action:.6e}, residual {:.3e}", out.residual);
        found.push(Candidate { orbit: out.orbit, residual: out.residual, action, morse, bracketing });
    }
    found.sort_by(|a, b| {
        b.bracketing
            .cmp(&a.bracketing)
            .then((b.action > 0.0).cmp(&(a.action > 0.0)))
            .then(e_norm(&a.orbit).total_cmp(&e_norm(&b.orbit)))
    });
    Ok((found, attempts))
}

fn record_from(model: &dyn Hamiltonian, alpha: f64, k: usize, c: Candidate) -> Result<SolutionRecord> {
    let rec = SolutionRecord {
        k,
        alpha,
        period: k as f64 * 2.0 * PI * alpha,
        orbit: c.orbit,
        residual: c.residual,
        ode_defect: None,
        action: c.action,
        index: None,
        morse: c.morse,
        certificates: Certificates {
            nontrivial: false,
            index_interval: None,
            morse_bracketing: c.bracketing,
            morse_index_consistent: None,
            within_existence_range: None,
            notes: Vec::new(),
        },
    };
    verify_solution(model, &rec)
}

/// Every distinct nontrivial critical point the seeds lead to, verified
/// and ordered by preference: Morse bracketing first, then positive
/// action, then smallest norm.
pub fn find_critical_points(
    model: &dyn Hamiltonian,
    alpha: f64,
    k: usize,
    opts: &SolverOptions,
) -> Result<Vec<SolutionRecord>> {
    let (found, _) = search(model, alpha, k, opts)?;
    found.into_iter().map(|c| record_from(model, alpha, k, c)).collect()
}

/// The preferred nontrivial `k T` periodic orbit, `T = 2 pi alpha`.
pub fn find_critical_point(model: &dyn Hamiltonian, alpha: f64, k: usize, opts: &SolverOptions) -> Result<SolutionRecord> {
    let (found, attempts) = search(model, alpha, k, opts)?;
    match found.into_iter().next() {
        Some(c) => record_from(model, alpha, k, c),
        None => Err(Error::NotFound { attempts }),
    }
}

/// Max of `|z'(s) - k alpha J H'(k alpha s, z(s))|` over `16 (2m + 1)`
/// points, with `z'` from exact differentiation of the modes.
pub fn ode_defect(model: &dyn Hamiltonian, orbit: &FourierLoop, alpha_k: f64) -> Result<f64> {
    let points = 16 * (2 * orbit.level() + 1);
    let d = 2 * orbit.half_dim();
    let mut worst = 0.0_f64;
    let mut jg = vec![0.0; d];
    for i in 0..points {
        let s = orbit.tau() * i as f64 / points as f64;
        let z = orbit.evaluate(s);
        let g = model.gradient(alpha_k * s, z.as_slice())?;
        apply_j(g.as_slice(), &mut jg);
        let dz = orbit.derivative(s);
        let defect = (0..d).map(|r| (dz[r] - alpha_k * jg[r]).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(defect);
    }
    Ok(worst)
}

/// Recompute the residual, ODE defect, index pair and certificates.
pub fn verify_solution(model: &dyn Hamiltonian, rec: &SolutionRecord) -> Result<SolutionRecord> {
    verify_solution_with(model, rec, &IndexOptions::default())
}

pub fn verify_solution_with(model: &dyn Hamiltonian, rec: &SolutionRecord, opts: &IndexOptions) -> Result<SolutionRecord> {
    check_problem(model, rec.alpha, rec.k)?;
    let n = model.half_dim();
    let alpha_k = rec.k as f64 * rec.alpha;
    let f = Functional::new(model, alpha_k)?;
    let z = &rec.orbit;
    let gc = f.coordinate_gradient(z)?;
    let hess = f.hessian(z)?;
    let residual = weighted_norm(&gc, &hess.weights);
    let morse = morse_counts(&hess, Gap::default())?;
    let half = hess.half_dim();
    let mut notes = Vec::new();
    let path = OrbitHessian::new(model, z, alpha_k);
    let index = match maslov_index_with(&path, 2.0 * PI, opts) {
        Ok(r) => Some(r.pair),
        Err(e) => {
            notes.push(format!("index indeterminate: {e}"));
            None
        }
    };
    let action = f.action(z)?;
    let within = match model.quadratic_split() {
        Some((bhat, _)) => {
            let bound = k_range_bound(bhat, rec.model_period())?;
            let inside = bound.is_none_or(|b| rec.k as u64 <= b);
            if !inside {
                notes.push("outside existence range".into());
            }
            Some(inside)
        }
        None => None,
    };
    if model.is_test_model() {
        notes.push("test model outside the growth hypotheses".into());
    }
    let certificates = Certificates {
        nontrivial: e_norm(z) > 1e-6 && action > 0.0,
        index_interval: index.map(|p| p.i <= n as i64 && n as i64 <= p.i + p.nu as i64),
        morse_bracketing: morse.minus <= half - n && half - n <= morse.minus + morse.zero,
        morse_index_consistent: index
            .map(|p| morse.minus as i64 == half as i64 - p.i - p.nu as i64 && morse.zero == p.nu),
        within_existence_range: within,
        notes,
    };
    Ok(SolutionRecord {
        residual,
        ode_defect: Some(ode_defect(model, z, alpha_k)?),
        action,
        index,
        morse,
        certificates,
        ..rec.clone()
    })
}

/// `k T / g` where `g` is the gcd of the nonzero active modes.
pub fn minimal_period(rec: &SolutionRecord, tol: f64) -> Result<f64> {
    let g = rec
        .orbit
        .active_modes(tol)
        .into_iter()
        .filter(|&j| j != 0)
        .fold(0u64, |g, j| gcd(g, j.unsigned_abs()));
    if g == 0 {
        return Err(Error::DegenerateLoop);
    }
    Ok(rec.period / g as f64)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub k: usize,
    pub record: Option<SolutionRecord>,
    pub error: Option<String>,
    /// Least iteration ratio forcing distinctness, from this record's pair.
    pub threshold: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub k: usize,
    pub lk: usize,
    pub threshold: u64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub members: Vec<FamilyMember>,
    /// `matrix[a][b]` compares the orbits for `k = a + 1` and `k = b + 1`
    /// in original time; empty for a single member.
    pub matrix: Vec<Vec<Option<Distinctness>>>,
    /// Pairs `(k, l k)` with `l` above the threshold that failed to be
    /// distinct.
    pub findings: Vec<Finding>,
}

/// Orbits for `k = 1..=k_max` with pairwise distinctness.
pub fn subharmonic_family(model: &dyn Hamiltonian, alpha: f64, k_max: usize, opts: &SolverOptions) -> Result<FamilyReport> {
    if k_max < 1 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let t = 2.0 * PI * alpha;
    let mut members = Vec::new();
    for k in 1..=k_max {
        match find_critical_point(model, alpha, k, opts) {
            Ok(rec) => {
                let threshold = rec.index.and_then(|p| distinctness_bound(p, model.half_dim()));
                members.push(FamilyMember { k, record: Some(rec), error: None, threshold });
            }
            Err(e @ (Error::NotFound { .. } | Error::NonConvergence { .. })) => {
                members.push(FamilyMember { k, record: None, error: Some(e.to_string()), threshold: None })
            }
            Err(e) => return Err(e),
        }
    }
    let mut matrix = Vec::new();
    let mut findings = Vec::new();
    if k_max > 1 {
        for a in &members {
            let mut row = Vec::new();
            for b in &members {
                let entry = match (&a.record, &b.record) {
                    (Some(ra), Some(rb)) if a.k != b.k => Some(distinctness(
                        &ra.original_time_loop(),
                        &rb.original_time_loop(),
                        t,
                        opts.distinct_tol,
                    )?),
                    _ => None,
                };
                if let (Some(d), Some(th)) = (&entry, a.threshold) {
                    if b.k % a.k == 0 && (b.k / a.k) as u64 >= th && !d.distinct {
                        findings.push(Finding { k: a.k, lk: b.k, threshold: th, distance: d.distance });
                    }
                }
                row.push(entry);
            }
            matrix.push(row);
        }
    }
    Ok(FamilyReport { members, matrix, findings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alpha0Estimate {
    /// Smallest tested alpha at which the solver succeeded with action >= 1.
    pub alpha0: Option<f64>,
    pub bracket: (f64, f64),
    pub evaluations: Vec<(f64, bool)>,
    pub label: String,
}

/// Bisection for the threshold where the solver first returns an orbit with
/// action at least 1. Assumes success is monotone in alpha; empirical.
pub fn estimate_alpha0(
    model: &dyn Hamiltonian,
    lo: f64,
    hi: f64,
    steps: usize,
    opts: &SolverOptions,
) -> Result<Alpha0Estimate> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument("need 0 < lo < hi".into()));
    }
    let mut evaluations = Vec::new();
    let mut ok = |a: f64| -> Result<bool> {
        let good = match find_critical_point(model, a, 1, opts) {
            Ok(r) => r.action >= 1.0,
            Err(Error::NotFound { .. }) | Err(Error::InvalidArgument(_)) => false,
            Err(e) => return Err(e),
        };
        evaluations.push((a, good));
        Ok(good)
    };
    if !ok(hi)? {
        return Ok(Alpha0Estimate {
            alpha0: None,
            bracket: (lo, hi),
            evaluations,
            label: "empirical bisection".into(),
        });
    }
    let (mut a, mut b) = (lo, hi);
    if ok(lo)? {
        b = lo;
    } else {
        for _ in 0..steps {
            let mid = 0.5 * (a + b);
            if ok(mid)? {
                b = mid;
            } else {
                a = mid;
            }
        }
    }
    Ok(Alpha0Estimate { alpha0: Some(b), bracket: (a, b), evaluations, label: "empirical bisection".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{quadratic_model, soft_power_model};

    fn fast() -> SolverOptions {
        SolverOptions { m: 8, ..SolverOptions::default() }
    }

    #[test]
    fn soft_power_circle_is_found() {
        let sp = soft_power_model(1, 1.75).unwrap();
        let t = 6.0;
        let rec = find_critical_point(&sp, t / (2.0 * PI), 1, &fast()).unwrap();
        let r = sp.circular_radius(t).unwrap();
        let a = rec.orbit.coeff(1);
        assert!(((a[0] * a[0] + a[1] * a[1]).sqrt() - r).abs() < 1e-8);
        assert!(rec.residual <= 1e-8);
        assert!(rec.certificates.nontrivial);
        assert_eq!(rec.certificates.index_interval, Some(true));
        assert!(rec.certificates.morse_bracketing);
        assert_eq!(rec.certificates.morse_index_consistent, Some(true));
        assert!(rec.ode_defect.unwrap() < 1e-6);
        assert_eq!(minimal_period(&rec, 1e-6).unwrap(), t);
    }

    #[test]
    fn quadratic_model_has_only_the_origin() {
        let q = quadratic_model(1, 1.0).unwrap();
        let err = find_critical_point(&q, 0.7 / 1.0, 1, &fast()).unwrap_err();
        assert!(matches!(err, Error::NotFound { .. }));
    }

    #[test]
    fn quadratic_hessian_counts_follow_mode_signs() {
        let (b, alpha, m) = (1.0, 1.3, 4);
        let q = quadratic_model(1, b).unwrap();
        let z = FourierLoop::zeros(2.0 * PI, 1, m).unwrap();
        let h = crate::loops::hessian(&q, &z, alpha).unwrap();
        let c = morse_counts(&h, Gap::default()).unwrap();
        // Mode j contributes 2 directions with sign of alpha b - j.
        let minus = (-(m as i64)..=m as i64).filter(|&j| alpha * b - (j as f64) < 0.0).count() * 2;
        assert_eq!(c.minus, minus);
        assert_eq!(c.total(), (2 * m + 1) * 2);
    }

    #[test]
    fn minimal_period_examples() {
        let sp = soft_power_model(1, 1.75).unwrap();
        let mut orbit = FourierLoop::zeros(2.0 * PI, 1, 6).unwrap();
        orbit.coeff_mut(2)[0] = 1.0;
        orbit.coeff_mut(4)[1] = 0.5;
        let rec = SolutionRecord {
            k: 1,
            alpha: 1.0,
            period: 2.0 * PI,
            orbit,
            residual: 0.0,
            ode_defect: None,
            action: 1.0,
            index: None,
            morse: InertiaCounts { plus: 0, minus: 0, zero: 0 },
            certificates: Certificates {
                nontrivial: true,
                index_interval: None,
                morse_bracketing: true,
                morse_index_consistent: None,
                within_existence_range: None,
                notes: vec![],
            },
        };
        assert!((minimal_period(&rec, 1e-6).unwrap() - PI).abs() < 1e-15);
        let mut c = rec.clone();
        c.orbit = FourierLoop::single_mode(2.0 * PI, 6, 0, &[1.0, 1.0]).unwrap();
        assert_eq!(minimal_period(&c, 1e-6), Err(Error::DegenerateLoop));
        let _ = sp;
    }
}
