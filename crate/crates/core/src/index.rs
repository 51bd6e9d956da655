//! Maslov-type index pairs through Galerkin inertia counting.
//!
//! For a `tau`-periodic coefficient the quadratic form
//! `<(A - B) z, w> = int -J z' . w - B z . w` is restricted to the truncated
//! Fourier space `E_m`, whose basis vectors are `exp(2 pi j t / tau J) e_r`
//! for `|j| <= m`. The truncated form's spectrum relative to the `E` inner
//! product gives the pair through
//!
//! ```text
//! dim M^-_d = (2m + 1) n + i,    dim M^0_d = nu
//! ```
//!
//! once `m` is large enough. Stabilisation across levels is certified by
//! comparing two consecutive levels and by comparing `nu` with the kernel of
//! the monodromy minus the identity.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::coefficient::{period_multiple, sampled_sup_norm, CoefficientPath, Rescaled};
use crate::error::{Error, Result};
use crate::flow::{converged_monodromy, MonodromyOptions};
use crate::symplectic::{iterated_nullity, j_times, Matrix, DEFAULT_KERNEL_TOL};

/// Generalized eigenvalues at or below this magnitude count as null.
pub const DEFAULT_ZERO_TOL: f64 = 1e-7;

/// The Maslov-type index pair `(i, nu)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexPair {
    pub i: i64,
    pub nu: usize,
}

impl IndexPair {
    pub fn new(i: i64, nu: usize) -> Self {
        Self { i, nu }
    }
}

impl std::fmt::Display for IndexPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.i, self.nu)
    }
}

/// A symmetric form on `E_m` in Fourier coordinates together with the
/// diagonal Gram matrix of the `E` inner product.
///
/// Coordinates are ordered by mode, `j = -m, ..., m`, each mode occupying a
/// block of `2n` consecutive entries.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinForm {
    pub level: usize,
    pub n: usize,
    pub tau: f64,
    pub matrix: Matrix,
    pub weights: DVector<f64>,
}

/// Gram weights of the `E` inner product: `tau` on the constant block and
/// `tau |j|` on mode `j`.
pub fn gram_weights(tau: f64, n: usize, m: usize) -> DVector<f64> {
    let d = 2 * n;
    DVector::from_fn((2 * m + 1) * d, |idx, _| {
        let j = (idx / d) as i64 - m as i64;
        if j == 0 {
            tau
        } else {
            tau * j.unsigned_abs() as f64
        }
    })
}

impl GalerkinForm {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `(2m + 1) n`, half the dimension of `E_m`.
    pub fn half_dim(&self) -> usize {
        self.dim() / 2
    }

    pub fn negated(&self) -> Self {
        Self { matrix: -&self.matrix, ..self.clone() }
    }

    /// Largest entrywise asymmetry.
    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// Eigenvalues `lambda` of `F v = lambda W v`, ascending.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let inv_sqrt: Vec<f64> = self.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        let d = self.dim();
        let scaled = Matrix::from_fn(d, d, |i, j| {
            0.5 * (self.matrix[(i, j)] + self.matrix[(j, i)]) * inv_sqrt[i] * inv_sqrt[j]
        });
        let mut ev: Vec<f64> = scaled.symmetric_eigenvalues().iter().copied().collect();
        if ev.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("eigen-solver produced non-finite values".into()));
        }
        ev.sort_by(|a, b| a.total_cmp(b));
        Ok(ev)
    }
}

fn times_j(m: &Matrix) -> Matrix {
    // X J: column c of the result is X (J e_c).
    let n = m.ncols() / 2;
    let mut out = Matrix::zeros(m.nrows(), m.ncols());
    for c in 0..n {
        out.set_column(c, &m.column(n + c));
        out.set_column(n + c, &(-m.column(c)));
    }
    out
}

/// Cosine and sine moments `int_0^tau B(t) cos(2 pi k t / tau) dt` (and
/// `sin`) for `k = 0..=kmax` from samples at the uniform nodes
/// `t_i = i tau / N` (periodic trapezoid rule).
pub(crate) fn moments_from_samples(samples: &[Matrix], tau: f64, kmax: usize) -> (Vec<Matrix>, Vec<Matrix>) {
    let nodes = samples.len();
    let d = samples[0].nrows();
    let w = tau / nodes as f64;
    let mut cos_m = vec![Matrix::zeros(d, d); kmax + 1];
    let mut sin_m = vec![Matrix::zeros(d, d); kmax + 1];
    for (i, b) in samples.iter().enumerate() {
        for k in 0..=kmax {
            // Reduce the phase before the trig call to keep it exact-ish.
            let phase = 2.0 * PI * ((k * i) % nodes) as f64 / nodes as f64;
            let (s, c) = phase.sin_cos();
            cos_m[k] += b * (w * c);
            if k > 0 {
                sin_m[k] += b * (w * s);
            }
        }
    }
    (cos_m, sin_m)
}

/// Form of `A - B` on `E_m` from coefficient samples at uniform nodes.
pub(crate) fn form_from_samples(samples: &[Matrix], tau: f64, m: usize) -> GalerkinForm {
    let d = samples[0].nrows();
    let n = d / 2;
    let (cm, sm) = moments_from_samples(samples, tau, 2 * m);
    let c = |k: i64| &cm[k.unsigned_abs() as usize];
    let s = |k: i64| -> Matrix {
        let v = &sm[k.unsigned_abs() as usize];
        if k < 0 {
            -v
        } else {
            v.clone()
        }
    };
    let dim = (2 * m + 1) * d;
    let mut f = Matrix::zeros(dim, dim);
    let mi = m as i64;
    for j in -mi..=mi {
        for l in -mi..=mi {
            // int exp(-j th J) B exp(l th J) dt expanded with product-to-sum.
            let cc = (c(j - l) + c(j + l)) * 0.5;
            let cs = (s(j + l) + s(l - j)) * 0.5;
            let sc = (s(j + l) + s(j - l)) * 0.5;
            let ss = (c(j - l) - c(j + l)) * 0.5;
            let mut block = cc + times_j(&cs) - j_times(&sc) - j_times(&times_j(&ss));
            block = -block;
            if j == l {
                for r in 0..d {
                    block[(r, r)] += 2.0 * PI * j as f64;
                }
            }
            let r0 = ((j + mi) as usize) * d;
            let c0 = ((l + mi) as usize) * d;
            f.view_mut((r0, c0), (d, d)).copy_from(&block);
        }
    }
    let f = (&f + f.transpose()) * 0.5;
    GalerkinForm { level: m, n, tau, matrix: f, weights: gram_weights(tau, n, m) }
}

pub(crate) fn sample_uniform(b: &dyn CoefficientPath, tau: f64, nodes: usize) -> Result<Vec<Matrix>> {
    (0..nodes).map(|i| b.eval(tau * i as f64 / nodes as f64)).collect()
}

/// Default quadrature node count for level `m`.
pub fn default_nodes(m: usize) -> usize {
    8 * (2 * m + 1)
}

/// Form of `A - B` on `E_m` with `N` uniform quadrature nodes and no
/// convergence check.
pub fn assemble_galerkin_form_with_nodes(
    b: &dyn CoefficientPath,
    tau: f64,
    m: usize,
    nodes: usize,
) -> Result<GalerkinForm> {
    if m < 1 {
        return Err(Error::InvalidArgument("Galerkin level must be at least 1".into()));
    }
    if nodes < 2 * m + 1 {
        return Err(Error::InvalidArgument(format!("{nodes} nodes cannot resolve level {m}")));
    }
    Ok(form_from_samples(&sample_uniform(b, tau, nodes)?, tau, m))
}

/// Form of `A - B` on `E_m`. The `A` part is exact; the `B` part uses the
/// periodic trapezoid rule with at least `8 (2m + 1)` nodes, doubled until
/// the form changes by no more than `1e-9` relative to its size.
pub fn assemble_galerkin_form(b: &dyn CoefficientPath, tau: f64, m: usize) -> Result<GalerkinForm> {
    let mut nodes = default_nodes(m);
    let mut prev = assemble_galerkin_form_with_nodes(b, tau, m, nodes)?;
    for _ in 0..4 {
        nodes *= 2;
        let next = assemble_galerkin_form_with_nodes(b, tau, m, nodes)?;
        let change = (&next.matrix - &prev.matrix).amax();
        if change <= 1e-9 * (1.0 + next.matrix.amax()) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!("form still changing at {nodes} nodes")))
}

/// Width of the spectral window treated as null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gap {
    /// Null means `|lambda| <= zero_tol`; `d` is half the smallest remaining
    /// `|lambda|`.
    Auto { zero_tol: f64 },
    Fixed(f64),
}

impl Default for Gap {
    fn default() -> Self {
        Gap::Auto { zero_tol: DEFAULT_ZERO_TOL }
    }
}

/// Dimensions of `M^+_d`, `M^-_d`, `M^0_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InertiaCounts {
    pub plus: usize,
    pub minus: usize,
    pub zero: usize,
}

impl InertiaCounts {
    pub fn total(&self) -> usize {
        self.plus + self.minus + self.zero
    }
}

/// The gap `d` actually used for a spectrum.
pub fn resolve_gap(spectrum: &[f64], gap: Gap) -> Result<f64> {
    match gap {
        Gap::Fixed(d) if d > 0.0 => Ok(d),
        Gap::Fixed(d) => Err(Error::InvalidArgument(format!("gap must be positive, got {d}"))),
        Gap::Auto { zero_tol } => {
            let smallest = spectrum
                .iter()
                .map(|v| v.abs())
                .filter(|&a| a > zero_tol)
                .fold(f64::INFINITY, f64::min);
            Ok(if smallest.is_finite() { 0.5 * smallest } else { 2.0 * zero_tol }.max(zero_tol * (1.0 + 1e-12)))
        }
    }
}

pub fn counts_from_spectrum(spectrum: &[f64], gap: Gap) -> Result<InertiaCounts> {
    let d = resolve_gap(spectrum, gap)?;
    let mut c = InertiaCounts { plus: 0, minus: 0, zero: 0 };
    for &v in spectrum {
        if v >= d {
            c.plus += 1;
        } else if v <= -d {
            c.minus += 1;
        } else {
            c.zero += 1;
        }
    }
    Ok(c)
}

/// Counts of generalized eigenvalues of `F v = lambda W v` in `[d, inf)`,
/// `(-inf, -d]` and `(-d, d)`.
pub fn index_counts(form: &GalerkinForm, gap: Gap) -> Result<InertiaCounts> {
    counts_from_spectrum(&form.spectrum()?, gap)
}

fn pair_from_counts(c: InertiaCounts, half_dim: usize) -> IndexPair {
    IndexPair { i: c.minus as i64 - half_dim as i64, nu: c.zero }
}

/// Index pair read off the level-`m` Galerkin form.
pub fn maslov_index_galerkin(b: &dyn CoefficientPath, tau: f64, m: usize, gap: Gap) -> Result<IndexPair> {
    let form = assemble_galerkin_form(b, tau, m)?;
    Ok(pair_from_counts(index_counts(&form, gap)?, form.half_dim()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexOptions {
    pub levels: Vec<usize>,
    pub zero_tol: f64,
    pub kernel_tol: f64,
    pub monodromy: MonodromyOptions,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self {
            levels: vec![8, 16, 32, 64, 128, 256],
            zero_tol: DEFAULT_ZERO_TOL,
            kernel_tol: DEFAULT_KERNEL_TOL,
            monodromy: MonodromyOptions::default(),
        }
    }
}

/// Everything [`maslov_index_with`] learned on the way to the pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexReport {
    pub pair: IndexPair,
    /// Level at which the pair was accepted.
    pub level: usize,
    pub history: Vec<(usize, IndexPair)>,
    /// `dim ker(gamma(tau) - I)` from the integrated monodromy.
    pub monodromy_nullity: usize,
    pub monodromy_steps: usize,
    /// Sup norm of the rescaled coefficient; levels at or below it are
    /// skipped.
    pub level_floor: f64,
    /// Generalized spectrum (`tau = 2 pi` units) at the accepted level.
    pub spectrum: Vec<f64>,
}

fn near_zero(spectrum: &[f64], count: usize) -> Vec<f64> {
    let mut v = spectrum.to_vec();
    v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    v.truncate(count);
    v
}

/// Largest level the escalation will add on its own.
pub const MAX_AUTO_LEVEL: usize = 1024;

// Counts at a level not above the coefficient norm can agree across two
// levels and still be wrong: low modes are not yet dominated by `A`.
fn effective_levels(requested: &[usize], floor: f64) -> Result<Vec<usize>> {
    let mut levels: Vec<usize> = requested.iter().copied().filter(|&l| l as f64 > floor).collect();
    while levels.len() < 2 {
        let next = match levels.last() {
            Some(&l) => 2 * l,
            None => (floor as usize + 1).next_power_of_two(),
        };
        if next > MAX_AUTO_LEVEL {
            return Err(Error::InvalidArgument(format!(
                "coefficient norm {floor:.3} needs truncation levels above {MAX_AUTO_LEVEL}"
            )));
        }
        levels.push(next);
    }
    Ok(levels)
}

/// Index pair of `b` over the horizon `tau` (a whole number of its periods).
pub fn maslov_index(b: &dyn CoefficientPath, tau: f64) -> Result<IndexPair> {
    Ok(maslov_index_with(b, tau, &IndexOptions::default())?.pair)
}

pub fn maslov_index_with(b: &dyn CoefficientPath, tau: f64, opts: &IndexOptions) -> Result<IndexReport> {
    let reps = period_multiple(b, tau)?;
    let scaled = Rescaled::new(b, tau)?;
    let floor = sampled_sup_norm(&scaled, 256)?;
    let levels = effective_levels(&opts.levels, floor)?;
    let mut history: Vec<(usize, IndexPair)> = Vec::new();
    let mut nullity: Option<(usize, usize)> = None;
    let mut last_spectrum = Vec::new();
    let gap = Gap::Auto { zero_tol: opts.zero_tol };
    for &level in &levels {
        let form = assemble_galerkin_form(&scaled, 2.0 * PI, level)?;
        let spectrum = form.spectrum()?;
        let pair = pair_from_counts(counts_from_spectrum(&spectrum, gap)?, form.half_dim());
        let stable = history.last().is_some_and(|&(_, p)| p == pair);
        history.push((level, pair));
        if stable {
            let (nu_mono, steps) = match nullity {
                Some(v) => v,
                None => {
                    let (g, steps) = converged_monodromy(b, b.period(), &opts.monodromy)?;
                    let v = (iterated_nullity(&g, reps, opts.kernel_tol)?, steps);
                    nullity = Some(v);
                    v
                }
            };
            if nu_mono == pair.nu {
                return Ok(IndexReport {
                    pair,
                    level,
                    history,
                    monodromy_nullity: nu_mono,
                    monodromy_steps: steps,
                    level_floor: floor,
                    spectrum,
                });
            }
        }
        last_spectrum = spectrum;
    }
    Err(Error::NonConvergence {
        max_level: levels.last().copied().unwrap_or(0),
        spectrum: near_zero(&last_spectrum, 8),
    })
}

/// Exact pair for a constant coefficient, counted block by block.
///
/// With `B` constant the form decouples over frequencies. The constant
/// block is `-tau B`; for `j >= 1` the real span of
/// `cos(2 pi j t / tau) u + sin(2 pi j t / tau) v` carries the form
/// `j pi (Ju.v' - Jv.u') - (tau / 2)(Bu.u' + Bv.v')` with Gram `(tau j / 2) I`.
/// Each small block is diagonalised directly.
pub fn constant_block_oracle(b: &Matrix, tau: f64, m: usize) -> Result<IndexPair> {
    if b.nrows() != b.ncols() || b.nrows() % 2 != 0 || b.nrows() == 0 {
        return Err(Error::InvalidDimension("constant coefficient must be square of even order".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument("period must be positive".into()));
    }
    let d = b.nrows();
    let n = d / 2;
    let sym = (b + b.transpose()) * 0.5;
    let mut minus = 0usize;
    let mut zero = 0usize;
    let mut tally = |vals: &[f64]| {
        for &v in vals {
            if v.abs() <= DEFAULT_ZERO_TOL {
                zero += 1;
            } else if v < 0.0 {
                minus += 1;
            }
        }
    };
    // Constant block, Gram tau.
    let c0: Vec<f64> = (-&sym).symmetric_eigenvalues().iter().copied().collect();
    tally(&c0);
    let jm = crate::symplectic::standard_j(n)?;
    for j in 1..=m {
        let jf = j as f64;
        let mut blk = Matrix::zeros(2 * d, 2 * d);
        // (u, v)^T M (u', v'): Ju.v' = -u^T J v', -Jv.u' = v^T J u'.
        blk.view_mut((0, d), (d, d)).copy_from(&(&jm * (-jf * PI)));
        blk.view_mut((d, 0), (d, d)).copy_from(&(&jm * (jf * PI)));
        let bpart = &sym * (0.5 * tau);
        let mut top = blk.view_mut((0, 0), (d, d));
        top -= &bpart;
        let mut bot = blk.view_mut((d, d), (d, d));
        bot -= &bpart;
        let gram = 0.5 * tau * jf;
        let vals: Vec<f64> = (blk / gram).symmetric_eigenvalues().iter().copied().collect();
        tally(&vals);
    }
    Ok(IndexPair { i: minus as i64 - ((2 * m + 1) * n) as i64, nu: zero })
}
