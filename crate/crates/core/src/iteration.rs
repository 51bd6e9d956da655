//! Iterated indices, phase shifts and geometric distinctness.

use serde::{Deserialize, Serialize};

use crate::coefficient::CoefficientPath;
use crate::error::{Error, Result};
use crate::index::{maslov_index_with, IndexOptions, IndexPair};
use crate::loops::{l2_inner, l2_norm, FourierLoop};

/// `period / tau` when it is a positive integer.
pub fn period_ratio(period: f64, tau: f64) -> Result<usize> {
    let r = period / tau;
    let k = r.round();
    if !(k >= 1.0) || (r - k).abs() > 1e-9 * k {
        return Err(Error::IncompatibleLoops(format!("period {period} is not a multiple of {tau}")));
    }
    Ok(k as usize)
}

/// `j * z`, the loop `t -> z(t + j tau)` for `z` of period `k tau`.
pub fn phase_shift(z: &FourierLoop, j: i64, tau: f64) -> Result<FourierLoop> {
    period_ratio(z.tau(), tau)?;
    Ok(z.shifted(j as f64 * tau))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub m: usize,
    pub i: i64,
    pub nu: usize,
    pub coarse_lower: i64,
    pub coarse_upper: i64,
    pub sharp_lower: i64,
    pub sharp_upper: i64,
    pub holds: bool,
    /// Sharp bounds at least as tight as the coarse ones.
    pub sharper: bool,
    /// `i_{m tau} <= n + 1`, `i_tau >= n`, `nu_tau >= 1` and `m > 1` at once,
    /// which the iteration theory rules out.
    pub low_iterate_violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub n: usize,
    pub base: IndexPair,
    pub rows: Vec<IterationRow>,
}

impl IterationReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds && r.sharper && !r.low_iterate_violation)
    }
}

/// Bounds of both iteration inequality chains for given pairs.
pub fn iteration_row(n: usize, base: IndexPair, m: usize, pair: IndexPair) -> IterationRow {
    let (n, i, nu) = (n as i64, base.i, base.nu as i64);
    let (mm, num) = (m as i64, pair.nu as i64);
    let coarse_lower = mm * (i + nu - n) - n;
    let coarse_upper = mm * (i + n) + n - num;
    let sharp_lower = mm * (i + nu - n) + n - nu;
    let sharp_upper = mm * (i + n) - n - (num - nu);
    let im = pair.i;
    IterationRow {
        m,
        i: im,
        nu: pair.nu,
        coarse_lower,
        coarse_upper,
        sharp_lower,
        sharp_upper,
        holds: coarse_lower <= im && im <= coarse_upper && sharp_lower <= im && im <= sharp_upper,
        sharper: sharp_lower >= coarse_lower && sharp_upper <= coarse_upper,
        low_iterate_violation: m > 1 && im <= n + 1 && i >= n && nu >= 1,
    }
}

/// Pairs `(i_{m tau}, nu_{m tau})` for `m = 1..=m_max` with both
/// inequality chains evaluated.
pub fn check_iteration_inequalities(b: &dyn CoefficientPath, tau: f64, m_max: usize) -> Result<IterationReport> {
    check_iteration_inequalities_with(b, tau, m_max, &IndexOptions::default())
}

pub fn check_iteration_inequalities_with(
    b: &dyn CoefficientPath,
    tau: f64,
    m_max: usize,
    opts: &IndexOptions,
) -> Result<IterationReport> {
    if m_max < 1 {
        return Err(Error::InvalidArgument("m_max must be at least 1".into()));
    }
    let n = b.half_dim();
    let base = maslov_index_with(b, tau, opts)?.pair;
    let mut rows = vec![iteration_row(n, base, 1, base)];
    for m in 2..=m_max {
        let pair = maslov_index_with(b, m as f64 * tau, opts)?.pair;
        rows.push(iteration_row(n, base, m, pair));
    }
    Ok(IterationReport { n, base, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distinctness {
    pub distinct: bool,
    /// Integer shift `j` minimizing the distance of `j * z1` to `z2`.
    pub shift: usize,
    /// Normalized L2 distance at that shift.
    pub distance: f64,
    /// Common period `lcm(k1, k2) tau`.
    pub common_period: f64,
    /// Minimum over all real time shifts; informational only.
    pub continuous_distance: f64,
    pub continuous_shift: f64,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Compare two loops of periods `k1 tau` and `k2 tau` up to integer phase
/// shifts on their common period.
pub fn distinctness(z1: &FourierLoop, z2: &FourierLoop, tau: f64, tol: f64) -> Result<Distinctness> {
    if z1.half_dim() != z2.half_dim() {
        return Err(Error::IncompatibleLoops("loops live in different dimensions".into()));
    }
    let k1 = period_ratio(z1.tau(), tau)?;
    let k2 = period_ratio(z2.tau(), tau)?;
    let l = k1 / gcd(k1, k2) * k2;
    let e1 = z1.extended(l / k1)?;
    let e2 = z2.extended(l / k2)?;
    let scale = l2_norm(&e1).max(l2_norm(&e2)).max(1.0);
    let (n1, n2) = (l2_inner(&e1, &e1)?, l2_inner(&e2, &e2)?);
    let dist = |s: f64| -> Result<f64> {
        let cross = l2_inner(&e1.shifted(s), &e2)?;
        Ok((n1 + n2 - 2.0 * cross).max(0.0).sqrt() / scale)
    };
    let mut best = (0usize, f64::INFINITY);
    for j in 0..l {
        let d = l2_norm(&(&e1.shifted(j as f64 * tau) - &e2)) / scale;
        if d < best.1 {
            best = (j, d);
        }
    }
    // Continuous shift: dense scan, then golden-section refinement.
    let period = l as f64 * tau;
    let scan = 32 * (e1.level().max(e2.level()) + 1);
    let h = period / scan as f64;
    let mut cbest = (0.0, f64::INFINITY);
    for i in 0..scan {
        let s = i as f64 * h;
        let d = dist(s)?;
        if d < cbest.1 {
            cbest = (s, d);
        }
    }
    let (mut a, mut b) = (cbest.0 - h, cbest.0 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if dist(c)? < dist(d)? {
            b = d;
        } else {
            a = c;
        }
    }
    let s = 0.5 * (a + b);
    let ds = dist(s)?;
    if ds < cbest.1 {
        cbest = (s.rem_euclid(period), ds);
    }
    Ok(Distinctness {
        distinct: best.1 > tol,
        shift: best.0,
        distance: best.1,
        common_period: period,
        continuous_distance: cbest.1.min(best.1),
        continuous_shift: cbest.0,
    })
}

/// Least integer `l > 2n / (i + nu - n)`, the iteration ratio above which
/// a `k T` and an `l k T` solution must be geometrically distinct; `None`
/// when `i + nu <= n`.
pub fn distinctness_bound(pair: IndexPair, n: usize) -> Option<u64> {
    let den = pair.i + pair.nu as i64 - n as i64;
    if den <= 0 {
        return None;
    }
    Some((2 * n as i64 / den + 1) as u64)
}
