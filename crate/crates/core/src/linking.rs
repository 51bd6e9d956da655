//! Sampled linking geometry: the action on the scaled sphere `B_theta(dQ)`
//! against the action on the affine set `S = E^- + E^0 + u_0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::index::gram_weights;
use crate::loops::{b_rho_scale, e_norm, FourierLoop, Functional};
use crate::models::Hamiltonian;
use crate::symplectic::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkingOptions {
    pub nsamples: usize,
    /// Exponent of `B_theta`.
    pub varrho: f64,
    pub seed: u64,
    /// Samples per side polished by projected gradient steps.
    pub refine: usize,
    pub refine_steps: usize,
}

impl LinkingOptions {
    /// 500 samples, seed 0, four polished samples per side. The exponent has
    /// no default: it is a property of the model the caller asserts.
    pub fn new(varrho: f64) -> Self {
        Self { nsamples: 500, varrho, seed: 0, refine: 4, refine_steps: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkingReport {
    pub theta: f64,
    pub m: usize,
    pub alpha: f64,
    pub varrho: f64,
    pub nsamples: usize,
    pub seed: u64,
    pub sup_on_boundary: f64,
    pub inf_on_s: f64,
    pub gap_holds: bool,
}

impl LinkingReport {
    pub fn gap(&self) -> f64 {
        self.inf_on_s - self.sup_on_boundary
    }
}

// Gaussian direction over the modes selected by `keep`, unit E-norm.
fn sphere_point(rng: &mut ChaCha8Rng, w: &Vector, n: usize, m: usize, keep: impl Fn(i64) -> bool) -> FourierLoop {
    let d = 2 * n;
    let v = Vector::from_fn(w.len(), |i, _| {
        let j = (i / d) as i64 - m as i64;
        if keep(j) {
            rng.sample::<f64, _>(StandardNormal) / w[i].sqrt()
        } else {
            0.0
        }
    });
    let z = FourierLoop::from_vector(2.0 * PI, n, m, v).expect("valid shape");
    let nz = e_norm(&z);
    z.scaled(1.0 / nz)
}

fn mask(z: &Vector, n: usize, m: usize, keep: impl Fn(i64) -> bool) -> Vector {
    let d = 2 * n;
    Vector::from_fn(z.len(), |i, _| if keep((i / d) as i64 - m as i64) { z[i] } else { 0.0 })
}

fn e_dot(a: &Vector, b: &Vector, w: &Vector) -> f64 {
    a.iter().zip(b.iter()).zip(w.iter()).map(|((x, y), w)| w * x * y).sum()
}

/// Sample `sup G` on `B_theta(dQ_m)` and `inf G` on `S_m` (radius `10
/// theta` around `u_0`), then polish the best samples by projected gradient
/// steps. Sampling only; no bound is certified.
pub fn linking_gap(
    model: &dyn Hamiltonian,
    alpha: f64,
    m: usize,
    theta: f64,
    opts: &LinkingOptions,
) -> Result<LinkingReport> {
    if !(theta > 1.0) {
        return Err(Error::InvalidArgument(format!("theta must exceed 1, got {theta}")));
    }
    if opts.nsamples < 100 {
        return Err(Error::InvalidArgument("at least 100 samples are required".into()));
    }
    if m < 1 {
        return Err(Error::InvalidArgument("truncation level must be at least 1".into()));
    }
    let n = model.half_dim();
    let p = model.params();
    let f = Functional::new(model, alpha)?;
    let w = gram_weights(2.0 * PI, n, m);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scale = |u: &FourierLoop| b_rho_scale(u, theta, opts.varrho, p.sigma, p.omega);
    let plus = |j: i64| j > 0;
    let lower = |j: i64| j <= 0;

    // Boundary: per-mode axes first, then Gaussian directions.
    let mut boundary: Vec<(f64, FourierLoop)> = Vec::new();
    let axes = 2 * n * m;
    for s in 0..opts.nsamples {
        let u = if s < axes {
            let mut v = Vector::zeros(w.len());
            let i = (m + 1) * 2 * n + s;
            v[i] = theta / w[i].sqrt();
            FourierLoop::from_vector(2.0 * PI, n, m, v)?
        } else {
            sphere_point(&mut rng, &w, n, m, plus).scaled(theta)
        };
        boundary.push((f.action(&scale(&u)?)?, u));
    }
    boundary.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut sup = boundary[0].0;
    for (g0, u0) in boundary.iter().take(opts.refine) {
        let (mut g, mut u) = (*g0, u0.clone());
        for _ in 0..opts.refine_steps {
            let bu = scale(&u)?;
            // B is symmetric in coordinates, so the pullback gradient is B grad.
            let gc = f.coordinate_gradient(&bu)?;
            let gl = FourierLoop::from_vector(2.0 * PI, n, m, gc)?;
            let pull = scale(&gl)?.into_vector().component_div(&w);
            let mut e = mask(&pull, n, m, plus);
            let uv = u.as_vector();
            e -= uv * (e_dot(&e, uv, &w) / (theta * theta));
            let en = e_dot(&e, &e, &w).sqrt();
            if en == 0.0 {
                break;
            }
            let mut h = 0.1 * theta / en;
            let mut moved = false;
            while h * en > 1e-12 * theta {
                let cand = FourierLoop::from_vector(2.0 * PI, n, m, uv + &e * h)?;
                let cand = cand.scaled(theta / e_norm(&cand));
                let gn = f.action(&scale(&cand)?)?;
                if gn > g {
                    g = gn;
                    u = cand;
                    moved = true;
                    break;
                }
                h *= 0.5;
            }
            if !moved {
                break;
            }
        }
        sup = sup.max(g);
    }

    // S: u_0 plus E^- + E^0 points in the ball of radius 10 theta.
    let mut u0 = FourierLoop::zeros(2.0 * PI, n, m)?;
    u0.coeff_mut(1)[0] = 1.0 / (2.0 * PI).sqrt();
    let radius = 10.0 * theta;
    let mut inside: Vec<(f64, FourierLoop)> = vec![(f.action(&u0)?, FourierLoop::zeros(2.0 * PI, n, m)?)];
    for _ in 1..opts.nsamples {
        let r = radius * rng.gen::<f64>();
        let v = sphere_point(&mut rng, &w, n, m, lower).scaled(r);
        inside.push((f.action(&(&u0 + &v))?, v));
    }
    inside.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut inf = inside[0].0;
    for (g0, v0) in inside.iter().take(opts.refine) {
        let (mut g, mut v) = (*g0, v0.clone());
        for _ in 0..opts.refine_steps {
            let gc = f.coordinate_gradient(&(&u0 + &v))?;
            let e = mask(&gc.component_div(&w), n, m, lower);
            let en = e_dot(&e, &e, &w).sqrt();
            if en == 0.0 {
                break;
            }
            let mut h = 0.1 * radius / en;
            let mut moved = false;
            while h * en > 1e-12 * radius {
                let mut cand = FourierLoop::from_vector(2.0 * PI, n, m, v.as_vector() - &e * h)?;
                let cn = e_norm(&cand);
                if cn > radius {
                    cand = cand.scaled(radius / cn);
                }
                let gn = f.action(&(&u0 + &cand))?;
                if gn < g {
                    g = gn;
                    v = cand;
                    moved = true;
                    break;
                }
                h *= 0.5;
            }
            if !moved {
                break;
            }
        }
        inf = inf.min(g);
    }

    Ok(LinkingReport {
        theta,
        m,
        alpha,
        varrho: opts.varrho,
        nsamples: opts.nsamples,
        seed: opts.seed,
        sup_on_boundary: sup,
        inf_on_s: inf,
        gap_holds: sup < inf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::expr::{Expr, ExpressionModel};
    use crate::models::{soft_power_model, Hamiltonian};

    #[test]
    fn soft_power_gap_at_t10() {
        let sp = soft_power_model(1, 1.75).unwrap();
        let r = linking_gap(&sp, 10.0 / (2.0 * PI), 16, 4.0, &LinkingOptions::new(10.0)).unwrap();
        assert!(r.gap_holds, "{r:?}");
        assert!(r.gap() > 0.0);
        assert_eq!(r.gap_holds, r.sup_on_boundary < r.inf_on_s);
    }

    #[test]
    fn zero_hamiltonian_inf_is_minus_norm() {
        // G = -a(z, z)/2 and a(u_0 + v, u_0 + v) = 1 + a(v, v) <= 1 on S.
        let params = soft_power_model(1, 1.75).unwrap().params();
        let zero = ExpressionModel::new(Expr::parse("0", 1).unwrap(), None, params).unwrap();
        let r = linking_gap(&zero, 1.0, 4, 2.0, &LinkingOptions { nsamples: 100, ..LinkingOptions::new(2.0) }).unwrap();
        assert!((r.inf_on_s + 0.5).abs() < 1e-12, "{}", r.inf_on_s);
    }

    #[test]
    fn rejects_small_theta() {
        let sp = soft_power_model(1, 1.75).unwrap();
        assert!(linking_gap(&sp, 1.0, 4, 1.0, &LinkingOptions::new(10.0)).is_err());
    }
}
