//! Seeded random coefficients used by the test suites and the CLI.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coefficient::{CoefficientPath, ConstantCoefficient, TrigCoefficient, TrigTerm};
use crate::symplectic::Matrix;

fn uniform_matrix(rng: &mut impl Rng, d: usize, amp: f64) -> Matrix {
    Matrix::from_fn(d, d, |_, _| rng.gen_range(-amp..=amp))
}

fn symmetric_matrix(rng: &mut impl Rng, d: usize, amp: f64) -> Matrix {
    let a = uniform_matrix(rng, d, amp);
    (&a + a.transpose()) * 0.5
}

fn trig_with(rng: &mut impl Rng, n: usize, max_degree: u32, amp: f64, sym: bool) -> TrigCoefficient {
    let d = 2 * n;
    let draw = |rng: &mut _| if sym { symmetric_matrix(rng, d, amp) } else { uniform_matrix(rng, d, amp) };
    let degree = rng.gen_range(0..=max_degree);
    let constant = draw(rng);
    let terms = (1..=degree).map(|k| TrigTerm { k, cos: draw(rng), sin: draw(rng) }).collect();
    TrigCoefficient::new(2.0 * PI, constant, terms).expect("valid shapes")
}

/// Symmetrized trigonometric polynomial of degree at most `max_degree` with
/// entries drawn from `[-amp, amp]`, period `2 pi`.
pub fn random_trig(rng: &mut impl Rng, n: usize, max_degree: u32, amp: f64) -> TrigCoefficient {
    trig_with(rng, n, max_degree, amp, true)
}

/// The standard corpus: degree at most 2, entries in `[-1.5, 1.5]`, half
/// dimensions alternating over `ns`.
pub fn trig_corpus(seed: u64, count: usize, ns: &[usize]) -> Vec<TrigCoefficient> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| random_trig(&mut rng, ns[i % ns.len()], 2, 1.5)).collect()
}

/// `P(t)^T P(t) + shift I` for a trigonometric `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramCoefficient {
    p: TrigCoefficient,
    shift: f64,
}

impl GramCoefficient {
    pub fn new(p: TrigCoefficient, shift: f64) -> Self {
        Self { p, shift }
    }
}

impl CoefficientPath for GramCoefficient {
    fn half_dim(&self) -> usize {
        self.p.half_dim()
    }
    fn period(&self) -> f64 {
        self.p.period()
    }
    fn eval_raw(&self, t: f64) -> Matrix {
        let p = self.p.eval_raw(t);
        let d = p.nrows();
        p.transpose() * p + Matrix::identity(d, d) * self.shift
    }
}

/// Positive definite coefficients `P^T P + 0.1 I` with `P` of degree at
/// most 2 and entries in `[-1, 1]`.
pub fn positive_definite_corpus(seed: u64, count: usize, ns: &[usize]) -> Vec<GramCoefficient> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| GramCoefficient::new(trig_with(&mut rng, ns[i % ns.len()], 2, 1.0, false), 0.1))
        .collect()
}

/// Constant symmetric coefficients with entries in `[-amp, amp]`.
pub fn constant_corpus(seed: u64, count: usize, ns: &[usize], amp: f64) -> Vec<ConstantCoefficient> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let d = 2 * ns[i % ns.len()];
            ConstantCoefficient::new(symmetric_matrix(&mut rng, d, amp), 2.0 * PI).expect("valid shape")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_reproducible_and_symmetric() {
        let a = trig_corpus(7, 10, &[1, 2]);
        assert_eq!(a, trig_corpus(7, 10, &[1, 2]));
        for (i, b) in a.iter().enumerate() {
            assert_eq!(b.half_dim(), [1, 2][i % 2]);
            assert!(b.degree() <= 2);
            let m = b.eval_raw(0.3);
            assert!((&m - m.transpose()).amax() == 0.0);
            assert!(b.constant().amax() <= 1.5);
        }
    }

    #[test]
    fn gram_coefficients_are_positive_definite() {
        for b in positive_definite_corpus(3, 10, &[1, 2]) {
            for i in 0..20 {
                let e = b.eval(i as f64 * 0.31).unwrap().symmetric_eigen();
                assert!(e.eigenvalues.min() >= 0.1 - 1e-12);
            }
        }
    }
}
