use std::f64::consts::PI;

use proptest::prelude::*;

use hamloop::coefficient::{CoefficientPath, ConstantCoefficient};
use hamloop::corpus::{constant_corpus, positive_definite_corpus};
use hamloop::index::{constant_block_oracle, maslov_index, maslov_index_galerkin, Gap};
use hamloop::iteration::{distinctness, phase_shift};
use hamloop::loops::{a_form, e_norm, l2_norm, FourierLoop};
use hamloop::symplectic::{iterated_nullity, is_symplectic, kernel_dimension, rotation, Matrix};

fn loop_strategy(n: usize, m: usize) -> impl Strategy<Value = FourierLoop> {
    prop::collection::vec(-1.0f64..1.0, 2 * n * (2 * m + 1)).prop_map(move |c| {
        FourierLoop::from_vector(2.0 * PI, n, m, c.into()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rotations_are_symplectic(theta in -10.0f64..10.0, n in 1usize..4) {
        prop_assert!(is_symplectic(&rotation(theta, n).unwrap(), 1e-12).unwrap());
    }

    #[test]
    fn time_shift_preserves_norms(z in loop_strategy(2, 4), s in -7.0f64..7.0) {
        let w = z.shifted(s);
        prop_assert!((e_norm(&w) - e_norm(&z)).abs() < 1e-10 * (1.0 + e_norm(&z)));
        prop_assert!((l2_norm(&w) - l2_norm(&z)).abs() < 1e-10 * (1.0 + l2_norm(&z)));
        prop_assert!((a_form(&w, &w).unwrap() - a_form(&z, &z).unwrap()).abs() < 1e-9 * (1.0 + e_norm(&z).powi(2)));
    }

    #[test]
    fn phase_shifts_close_up(z in loop_strategy(1, 3), j in 0i64..3) {
        let tau = 2.0 * PI / 3.0;
        let there = phase_shift(&z, j, tau).unwrap();
        let back = phase_shift(&there, 3 - j, tau).unwrap();
        let diff = FourierLoop::from_vector(z.tau(), 1, 3, back.as_vector() - z.as_vector()).unwrap();
        prop_assert!(e_norm(&diff) < 1e-10 * (1.0 + e_norm(&z)));
    }

    #[test]
    fn shifted_copies_are_not_distinct(z in loop_strategy(1, 3), j in 0i64..4) {
        prop_assume!(l2_norm(&z) > 0.1);
        let tau = 2.0 * PI / 4.0;
        let w = phase_shift(&z, j, tau).unwrap();
        let d = distinctness(&z, &w, tau, 1e-6).unwrap();
        prop_assert!(!d.distinct);
    }

    #[test]
    fn nullity_of_rotation_iterates(p in 1u32..6, q in 1u32..6, k in 1usize..7) {
        let m = rotation(2.0 * PI * p as f64 / q as f64, 1).unwrap();
        let direct = {
            let mut power = Matrix::identity(2, 2);
            for _ in 0..k {
                power = &power * &m;
            }
            kernel_dimension(&(power - Matrix::identity(2, 2)), 1e-8)
        };
        prop_assert_eq!(iterated_nullity(&m, k, 1e-8).unwrap(), direct);
    }
}

#[test]
fn galerkin_matches_block_oracle_on_constant_corpus() {
    for b in constant_corpus(7, 10, &[1, 2], 3.0) {
        let got = maslov_index_galerkin(&b, 2.0 * PI, 16, Gap::default()).unwrap();
        let want = constant_block_oracle(b.matrix(), 2.0 * PI, 16).unwrap();
        assert_eq!(got, want, "B = {}", b.matrix());
    }
}

#[test]
fn positive_definite_coefficients_dominate_small_multiples_of_identity() {
    // B >= 0.1 I, so monotonicity gives i(B) >= i(0.1 I) = n.
    for b in positive_definite_corpus(11, 10, &[1, 2]) {
        let pair = maslov_index(&b, 2.0 * PI).unwrap();
        assert!(pair.i >= b.half_dim() as i64, "{pair}");
    }
}

#[test]
fn scalar_index_grows_with_the_horizon() {
    let b = ConstantCoefficient::scalar(1, 0.3).unwrap();
    let mut last = i64::MIN;
    for k in 1..=4 {
        let pair = maslov_index(&b, 2.0 * PI * k as f64).unwrap();
        assert!(pair.i >= last);
        last = pair.i;
    }
}
