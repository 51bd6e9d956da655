//! Grid certification of the growth hypotheses.
//!
//! Every inequality is evaluated at each grid point with the constants the
//! model declares. Limit statements can only be probed as trends on a
//! finite grid, and are labeled that way.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coefficient::CoefficientPath;
use crate::error::Result;
use crate::models::{sampled_operator_norm, Hamiltonian};
use crate::symplectic::Vector;

/// Sampling grid: log-spaced radii, directions (coordinate axes plus random
/// unit vectors) and times across one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub radius_min: f64,
    pub radius_max: f64,
    pub radii_per_decade: usize,
    pub random_directions: usize,
    pub times: usize,
    pub seed: u64,
}

impl Default for Grid {
    fn default() -> Self {
        Self { radius_min: 1e-2, radius_max: 1e3, radii_per_decade: 8, random_directions: 24, times: 8, seed: 7 }
    }
}

impl Grid {
    pub fn radii(&self) -> Vec<f64> {
        let decades = (self.radius_max / self.radius_min).log10();
        let count = ((decades * self.radii_per_decade as f64).round() as usize).max(1);
        (0..=count)
            .map(|i| self.radius_min * 10f64.powf(decades * i as f64 / count as f64))
            .collect()
    }

    pub fn directions(&self, d: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for k in 0..d {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; d];
                e[k] = s;
                out.push(e);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        while out.len() < 2 * d + self.random_directions {
            let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-3 {
                out.push(v.iter().map(|x| x / norm).collect());
            }
        }
        out
    }

    pub fn time_samples(&self, period: Option<f64>) -> Vec<f64> {
        match period {
            None => vec![0.0],
            Some(p) => (0..self.times.max(1)).map(|i| p * i as f64 / self.times.max(1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum HypothesisStatus {
    CertifiedOnGrid,
    /// A limit statement whose finite-grid trend is consistent; not a proof.
    CertifiedTrend,
    Violated { t: f64, z: Vec<f64>, value: f64 },
    NotApplicable { reason: String },
}

impl HypothesisStatus {
    pub fn is_violated(&self) -> bool {
        matches!(self, HypothesisStatus::Violated { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisEntry {
    pub name: String,
    pub status: HypothesisStatus,
    /// Smallest slack of the inequality over the grid (negative on failure).
    pub margin: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub model: String,
    pub grid: Grid,
    pub entries: Vec<HypothesisEntry>,
}

impl HypothesisReport {
    pub fn entry(&self, name: &str) -> Option<&HypothesisEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// No entry is violated.
    pub fn all_certified(&self) -> bool {
        self.entries.iter().all(|e| !e.status.is_violated())
    }
}

struct Worst {
    margin: f64,
    witness: Option<(f64, Vec<f64>, f64)>,
}

impl Worst {
    fn new() -> Self {
        Self { margin: f64::INFINITY, witness: None }
    }

    // Records `slack` (>= 0 when the inequality holds) and the raw value.
    fn see(&mut self, slack: f64, t: f64, z: &[f64], value: f64) {
        if slack < self.margin || slack.is_nan() {
            self.margin = slack;
            self.witness = Some((t, z.to_vec(), value));
        }
    }

    fn entry(self, name: &str, note: &str) -> HypothesisEntry {
        let status = match self.witness {
            Some((t, z, value)) if !(self.margin >= 0.0) => HypothesisStatus::Violated { t, z, value },
            _ => HypothesisStatus::CertifiedOnGrid,
        };
        HypothesisEntry { name: name.into(), status, margin: self.margin, note: note.into() }
    }
}

fn points(grid: &Grid, d: usize) -> Vec<Vec<f64>> {
    let dirs = grid.directions(d);
    let mut out = Vec::new();
    for r in grid.radii() {
        for u in &dirs {
            out.push(u.iter().map(|x| x * r).collect());
        }
    }
    out
}

/// Evaluate every applicable hypothesis on the grid.
///
/// For a model `(Bhat z, z)/2 + H_base` the growth hypotheses are checked on
/// `H_base` and the quadratic part gets the compatibility identity check.
pub fn verify_hypotheses(model: &dyn Hamiltonian, grid: &Grid) -> Result<HypothesisReport> {
    let (target, bhat): (&dyn Hamiltonian, Option<&dyn CoefficientPath>) = match model.quadratic_split() {
        Some((b, base)) => (base, Some(b)),
        None => (model, None),
    };
    let p = target.params();
    let n = target.half_dim();
    let d = 2 * n;
    let times = grid.time_samples(model.period());
    let pts = points(grid, d);

    let mut h1 = Worst::new();
    let mut h3 = Worst::new();
    let mut h4 = Worst::new();
    let mut h5 = Worst::new();
    let mut h6 = Worst::new();
    let mut h8 = Worst::new();
    let mut periodic = Worst::new();
    for &t in &times {
        let zero = vec![0.0; d];
        let h0 = target.value(t, &zero)?;
        h6.see(1e-12 - h0.abs(), t, &zero, h0);
        for z in &pts {
            let h = target.value(t, z)?;
            let g = target.gradient(t, z)?;
            let hess = target.hessian(t, z)?;
            let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            h1.see(h, t, z, h);
            if let Some(tp) = target.period() {
                let shifted = target.value(t + tp, z)?;
                periodic.see(1e-9 * (1.0 + h.abs()) - (shifted - h).abs(), t, z, shifted - h);
            }
            let gp: f64 = (0..n).map(|k| g[k] * z[k]).sum();
            let gq: f64 = (n..d).map(|k| g[k] * z[k]).sum();
            let weighted = gp / p.mu + gq / p.upsilon;
            h3.see(weighted + p.c1, t, z, weighted);
            let lhs4 = h - weighted;
            h4.see(lhs4 - (p.c2 * r.powf(p.beta) - p.c3), t, z, lhs4);
            let ev = hess.symmetric_eigenvalues();
            let norm = ev.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            h5.see(p.b0 * (r.powf(p.lambda - 1.0) + 1.0) - norm, t, z, norm);
            h6.see(g.norm(), t, z, g.norm());
            let min_ev = ev.iter().copied().fold(f64::INFINITY, f64::min);
            if r > 1e-8 {
                h8.see(min_ev, t, z, min_ev);
            }
        }
    }

    let mut entries = Vec::new();
    let mut e1 = h1.entry("H1", "H >= 0 on the grid");
    if !e1.status.is_violated() && periodic.margin < 0.0 {
        e1 = periodic.entry("H1", "H(t + T, z) = H(t, z) on the grid");
    }
    entries.push(e1);
    entries.push(h2_trend(target, grid, &times)?);
    entries.push(h3.entry("H3", "weighted Euler term bounded below by -c1"));
    entries.push(h4.entry("H4", "H minus weighted Euler term >= c2 |z|^beta - c3"));
    entries.push(h5.entry("H5", "spectral norm of the Hessian <= b0 (|z|^(lambda-1) + 1)"));
    entries.push(h6.entry("H6", "H(t, 0) = 0 and the gradient is nonzero off the origin"));
    match bhat {
        Some(b) => entries.push(check_h7(b, p.mu, p.upsilon, grid)?),
        None => entries.push(HypothesisEntry {
            name: "H7".into(),
            status: HypothesisStatus::NotApplicable { reason: "model has no quadratic part".into() },
            margin: f64::INFINITY,
            note: String::new(),
        }),
    }
    if model.period().is_none() {
        entries.push(h8.entry("H8", "Hessian positive definite off the origin"));
    } else {
        entries.push(HypothesisEntry {
            name: "H8".into(),
            status: HypothesisStatus::NotApplicable { reason: "model is not autonomous".into() },
            margin: f64::INFINITY,
            note: String::new(),
        });
    }
    Ok(HypothesisReport { model: model.name(), grid: grid.clone(), entries })
}

// The limit H / (|p|^(1+s/w) + |q|^(1+w/s)) -> 0 is probed by requiring the
// per-decade maximum ratio to decrease strictly over the top three decades.
fn h2_trend(model: &dyn Hamiltonian, grid: &Grid, times: &[f64]) -> Result<HypothesisEntry> {
    let p = model.params();
    let n = model.half_dim();
    let d = 2 * n;
    let ep = 1.0 + p.sigma / p.omega;
    let eq = 1.0 + p.omega / p.sigma;
    let dirs = grid.directions(d);
    let top = grid.radius_max;
    let mut maxima = Vec::new();
    for k in (0..3).rev() {
        let lo = top / 10f64.powi(k + 1);
        let hi = top / 10f64.powi(k);
        let mut best = (f64::NEG_INFINITY, 0.0, vec![0.0; d]);
        for i in 0..=grid.radii_per_decade.max(1) {
            let r = lo * (hi / lo).powf(i as f64 / grid.radii_per_decade.max(1) as f64);
            for u in &dirs {
                let z: Vec<f64> = u.iter().map(|x| x * r).collect();
                let pn = z[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
                let qn = z[n..].iter().map(|v| v * v).sum::<f64>().sqrt();
                let denom = pn.powf(ep) + qn.powf(eq);
                for &t in times {
                    let ratio = model.value(t, &z)? / denom;
                    if ratio > best.0 {
                        best = (ratio, t, z.clone());
                    }
                }
            }
        }
        maxima.push(best);
    }
    let decreasing = maxima.windows(2).all(|w| w[1].0 < w[0].0 * (1.0 - 1e-6));
    let last = maxima.last().cloned().expect("three decades");
    let margin = maxima.windows(2).map(|w| w[0].0 - w[1].0).fold(f64::INFINITY, f64::min);
    let note = format!(
        "trend, not proof: decade maxima {:.6e}, {:.6e}, {:.6e}",
        maxima[0].0, maxima[1].0, maxima[2].0
    );
    let status = if decreasing {
        HypothesisStatus::CertifiedTrend
    } else {
        HypothesisStatus::Violated { t: last.1, z: last.2, value: last.0 }
    };
    Ok(HypothesisEntry { name: "H2".into(), status, margin, note })
}

/// Residual of `(Bhat z, z) = 2 (Bhat z, V(1/mu, 1/upsilon) z)` on the grid;
/// certified when it stays within `1e-9 (1 + |z|^2)`.
pub fn check_h7(bhat: &dyn CoefficientPath, mu: f64, upsilon: f64, grid: &Grid) -> Result<HypothesisEntry> {
    let n = bhat.half_dim();
    let d = 2 * n;
    let mut worst = Worst::new();
    for t in grid.time_samples(Some(bhat.period())) {
        let b = bhat.eval(t)?;
        for z in points(grid, d) {
            let v = Vector::from_column_slice(&z);
            let bz = &b * &v;
            let vz = Vector::from_fn(d, |k, _| if k < n { z[k] / mu } else { z[k] / upsilon });
            let residual = (bz.dot(&v) - 2.0 * bz.dot(&vz)).abs();
            worst.see(1e-9 * (1.0 + v.norm_squared()) - residual, t, &z, residual);
        }
    }
    Ok(worst.entry("H7", "quadratic part compatible with V(1/mu, 1/upsilon)"))
}

/// `floor(2 pi / (w T))`, the largest subharmonic order the
/// quadratic-plus existence result covers; `None` when `Bhat` vanishes.
pub fn k_range_bound(bhat: &dyn CoefficientPath, period: f64) -> Result<Option<u64>> {
    let w = sampled_operator_norm(bhat)?;
    Ok(k_range_from_norm(w, period))
}

pub fn k_range_from_norm(w: f64, period: f64) -> Option<u64> {
    if w == 0.0 {
        return None;
    }
    let x = 2.0 * std::f64::consts::PI / (w * period);
    Some((x * (1.0 + 1e-12)).floor() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::ConstantCoefficient;
    use crate::models::{quadratic_model, quadratic_plus_model, soft_power_model};
    use crate::symplectic::Matrix;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn soft_power_is_certified() {
        let m = soft_power_model(1, 1.75).unwrap();
        let r = verify_hypotheses(&m, &Grid::default()).unwrap();
        assert!(r.all_certified(), "{r:#?}");
        assert_eq!(r.entry("H2").unwrap().status, HypothesisStatus::CertifiedTrend);
        assert_eq!(r.entry("H8").unwrap().status, HypothesisStatus::CertifiedOnGrid);
    }

    #[test]
    fn quadratic_violates_subquadratic_growth() {
        let m = quadratic_model(1, 2.0).unwrap();
        let r = verify_hypotheses(&m, &Grid::default()).unwrap();
        let h2 = r.entry("H2").unwrap();
        match &h2.status {
            HypothesisStatus::Violated { z, value, .. } => {
                assert!(!z.is_empty());
                assert!((value - 1.0).abs() < 1e-9);
            }
            s => panic!("expected a violation, got {s:?}"),
        }
    }

    #[test]
    fn h7_examples() {
        let g = Grid { random_directions: 6, radii_per_decade: 2, ..Grid::default() };
        let sym = Matrix::from_row_slice(2, 2, &[0.3, -0.2, -0.2, 1.1]);
        let b = ConstantCoefficient::new(sym, 1.0).unwrap();
        assert_eq!(check_h7(&b, 2.0, 2.0, &g).unwrap().status, HypothesisStatus::CertifiedOnGrid);
        let zero = ConstantCoefficient::new(Matrix::zeros(2, 2), 1.0).unwrap();
        assert_eq!(check_h7(&zero, 3.0, 1.5, &g).unwrap().status, HypothesisStatus::CertifiedOnGrid);
        let diag = ConstantCoefficient::new(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]), 1.0).unwrap();
        let e = check_h7(&diag, 3.0, 1.5, &g).unwrap();
        assert!(e.status.is_violated());
    }

    #[test]
    fn quadratic_plus_checks_base_and_identity() {
        let base = Arc::new(soft_power_model(1, 1.75).unwrap());
        let b = ConstantCoefficient::new(Matrix::identity(2, 2) * 0.1, 2.0 * PI).unwrap();
        let m = quadratic_plus_model(Arc::new(b), base).unwrap();
        let r = verify_hypotheses(&m, &Grid::default()).unwrap();
        assert!(r.all_certified(), "{r:#?}");
        assert_eq!(r.entry("H7").unwrap().status, HypothesisStatus::CertifiedOnGrid);
    }

    #[test]
    fn k_range_examples() {
        assert_eq!(k_range_from_norm(0.0, 2.0 * PI), None);
        assert_eq!(k_range_from_norm(0.1, 2.0 * PI), Some(10));
        assert_eq!(k_range_from_norm(2.0, 2.0 * PI), Some(0));
        let b = ConstantCoefficient::new(Matrix::identity(2, 2) * 0.1, 2.0 * PI).unwrap();
        assert_eq!(k_range_bound(&b, 2.0 * PI).unwrap(), Some(10));
        let zero = ConstantCoefficient::new(Matrix::zeros(2, 2), 2.0 * PI).unwrap();
        assert_eq!(k_range_bound(&zero, 2.0 * PI).unwrap(), None);
    }
}
