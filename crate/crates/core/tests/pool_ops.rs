use poolbench_core::pool::ops::{
    f_ap, f_gp, f_lnp, f_lnp_exponent, f_lse, f_mp, f_op, f_smp, lnp_exponent, lnp_p_tilde, project_ordinal_weights,
};
use poolbench_core::Error;
use proptest::prelude::*;

fn win() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 4)
}

fn simplex() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 4).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    })
}

fn bounds(x: &[f64]) -> (f64, f64) {
    (x.iter().copied().fold(f64::INFINITY, f64::min), x.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn means_stay_between_min_and_max(x in win(), tau in -50.0f64..50.0, w in simplex(),
                                      g in prop::collection::vec(-3.0f64..3.0, 4), r in 0.01f64..50.0) {
        let (lo, hi) = bounds(&x);
        let ap = f_ap(&x).unwrap();
        for y in [ap, f_smp(&x, tau).unwrap(), f_op(&x, &w).unwrap(), f_gp(&x, &g).unwrap().0] {
            prop_assert!(lo <= y && y <= hi, "{y} outside [{lo}, {hi}]");
        }
        let lse = f_lse(&x, r).unwrap();
        prop_assert!(ap - 1e-12 <= lse && lse <= hi + 1e-12);
    }

    #[test]
    fn learned_norm_lies_between_mean_and_max_magnitude(x in win(), p_tilde in -3.0f64..4.0) {
        let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let (_, hi) = bounds(&abs);
        let y = f_lnp(&x, p_tilde).unwrap();
        prop_assert!(f_ap(&abs).unwrap() - 1e-12 <= y && y <= hi + 1e-12);
    }

    #[test]
    fn shift_equivariance(x in win(), c in -100.0f64..100.0, tau in -20.0f64..20.0, w in simplex(), r in 0.1f64..10.0) {
        let s: Vec<f64> = x.iter().map(|v| v + c).collect();
        prop_assert!(close(f_mp(&s).unwrap(), f_mp(&x).unwrap() + c, 1e-14));
        prop_assert!(close(f_ap(&s).unwrap(), f_ap(&x).unwrap() + c, 1e-13));
        prop_assert!(close(f_smp(&s, tau).unwrap(), f_smp(&x, tau).unwrap() + c, 1e-12));
        prop_assert!(close(f_op(&s, &w).unwrap(), f_op(&x, &w).unwrap() + c, 1e-12));
        prop_assert!(close(f_lse(&s, r).unwrap(), f_lse(&x, r).unwrap() + c, 1e-12));
    }

    #[test]
    fn positive_homogeneity(x in win(), a in 0.01f64..100.0, tau in -5.0f64..5.0, p_tilde in -2.0f64..3.0) {
        let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
        prop_assert!(close(f_lnp(&ax, p_tilde).unwrap(), a * f_lnp(&x, p_tilde).unwrap(), 1e-12));
        prop_assert!(close(f_smp(&ax, tau / a).unwrap(), a * f_smp(&x, tau).unwrap(), 1e-10));
    }

    #[test]
    fn symmetric_methods_ignore_window_order(x in win(), perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
                                             tau in -5.0f64..5.0, w in simplex()) {
        let y: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
        prop_assert_eq!(f_mp(&y).unwrap(), f_mp(&x).unwrap());
        prop_assert_eq!(f_op(&y, &w).unwrap(), f_op(&x, &w).unwrap());
        prop_assert!(close(f_ap(&y).unwrap(), f_ap(&x).unwrap(), 1e-14));
        prop_assert!(close(f_smp(&y, tau).unwrap(), f_smp(&x, tau).unwrap(), 1e-13));
        prop_assert!(close(f_lse(&y, 1.0).unwrap(), f_lse(&x, 1.0).unwrap(), 1e-13));
        prop_assert!(close(f_lnp(&y, 0.5).unwrap(), f_lnp(&x, 0.5).unwrap(), 1e-13));
    }

    #[test]
    fn smooth_max_is_nondecreasing_in_temperature(x in win(), t in -20.0f64..20.0, dt in 0.0f64..5.0) {
        prop_assert!(f_smp(&x, t).unwrap() <= f_smp(&x, t + dt).unwrap() + 1e-12);
    }

    #[test]
    fn projection_lands_on_simplex_and_is_idempotent(w in prop::collection::vec(-1.0f64..1.0, 4)) {
        match project_ordinal_weights(&w) {
            Ok(p) => {
                prop_assert!(p.iter().all(|&v| v >= 0.0));
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let again = project_ordinal_weights(&p).unwrap();
                for (a, b) in again.iter().zip(&p) {
                    prop_assert!((a - b).abs() < 1e-15);
                }
            }
            Err(e) => {
                prop_assert!(matches!(e, Error::DegenerateProjection));
                prop_assert!(w.iter().all(|&v| v <= 0.0));
            }
        }
    }

    #[test]
    fn lnp_parametrisation_inverts(p in 1.001f64..50.0) {
        prop_assert!(close(lnp_exponent(lnp_p_tilde(p).unwrap()), p, 1e-12));
    }
}

#[test]
fn closed_gate_averages_max_and_mean() {
    let x = [1.0, 3.0, 2.0, 0.0];
    let (y, g) = f_gp(&x, &[0.0; 4]).unwrap();
    assert_eq!(g.value(), 0.5);
    assert!((y - (1.5 + 3.0) / 2.0).abs() < 1e-15);
}

#[test]
fn flat_limits() {
    let x = [1.0, 3.0, 2.0, 0.0];
    assert!((f_lse(&x, 1e-7).unwrap() - 1.5).abs() < 1e-6);
    assert!((f_lnp_exponent(&x, 200.0).unwrap() - 3.0).abs() < 1e-2 * 3.0);
    assert_eq!(f_smp(&[2.0; 4], 7.0).unwrap(), 2.0);
    assert_eq!(f_lse(&[-4.0; 4], 3.0).unwrap(), -4.0);
}

#[test]
fn invalid_parameters_are_rejected() {
    let x = [1.0, 2.0, 3.0, 4.0];
    assert!(f_op(&x, &[0.5, 0.5, 0.5, -0.5]).is_err());
    assert!(f_op(&x, &[0.5, 0.5]).is_err());
    assert!(f_lse(&x, 0.0).is_err());
    assert!(f_lse(&x, f64::INFINITY).is_err());
    assert!(f_lnp_exponent(&x, 0.5).is_err());
    assert!(f_smp(&x, f64::NAN).is_err());
    assert!(f_smp(&[1.0, f64::NAN], 1.0).is_err());
    assert!(f_ap(&[]).is_err());
}
