use nanolev::analytic::{self, OverdampedForm};
use nanolev::dist::{symmetric_grid, DistAxis};
use nanolev::model::{derive_coefficients, parse_config, to_config_string};
use nanolev::moments::{rhs, Closure, MomentState};
use nanolev::{fp1d, Distribution1D, SystemParams};
use proptest::prelude::*;

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

/// Physically admissible parameters with `J > 0`.
fn params() -> impl Strategy<Value = SystemParams> {
    (
        log_uniform(10.0, 100.0),
        log_uniform(1e-5, 1e-2),
        log_uniform(1e-3, 1e3),
        log_uniform(1e-3, 1e3),
        log_uniform(1.0, 1e8),
        log_uniform(1e-6, 1e-1),
        0.0..0.9f64,
    )
        .prop_map(|(omega_z, gamma_g, a_t, a_p, n0, gamma_f, frac)| SystemParams {
            omega_z,
            gamma_g,
            a_t,
            a_p,
            n0,
            gamma_f,
            big_gamma_f: frac * gamma_f / 9.0,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_text_round_trips(p in params()) {
        let q: SystemParams = parse_config(&to_config_string(&p)).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn steady_x2_is_the_closure_fixed_point(p in params()) {
        let c = derive_coefficients(&p).unwrap();
        let ad = c.momentum_diffusion();
        let x = analytic::steady_x2(&p).unwrap().exact;
        let residual = c.j * x * x + p.gamma_g * x - ad / 2.0;
        prop_assert!(residual.abs() <= 1e-12 * ad, "residual {residual:e}");
        prop_assert!(x > 0.0);
    }

    #[test]
    fn gaussian_fixed_point_without_feedback(p in params()) {
        let p = p.without_feedback();
        let s = analytic::no_feedback_steady(&p).unwrap();
        let state = MomentState::gaussian(s.x2, s.p2, s.xp);
        let d = rhs(&state, &p, Closure::Gaussian);
        let scale = p.gamma_g * s.x2;
        for v in [d.x2, d.p2, d.xp] {
            prop_assert!(v.abs() <= 1e-9 * scale, "{v:e} vs {scale:e}");
        }
        prop_assert!((MomentState::thermal(s.n_ss).phonon_number() - s.n_ss).abs() <= 1e-12 * (1.0 + s.n_ss));
    }

    #[test]
    fn l1_is_a_bounded_symmetric_distance(a in 0.2..5.0f64, b in 0.2..5.0f64, shift in -3.0..3.0f64) {
        let grid = symmetric_grid(20.0, 801);
        let gauss = |w: f64, m: f64| -> Distribution1D {
            let v = grid.iter().map(|&x| (-(x - m) * (x - m) / (2.0 * w * w)).exp()).collect();
            Distribution1D::from_values(DistAxis::X, grid.clone(), v).unwrap()
        };
        let (f, g) = (gauss(a, 0.0), gauss(b, shift));
        let (fg, gf) = (f.l1_distance(&g), g.l1_distance(&f));
        prop_assert!((fg - gf).abs() < 1e-12);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&fg));
        prop_assert!(f.l1_distance(&f) < 1e-15);
        prop_assert!((f.integral() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn closed_form_solves_the_position_equation(p in params()) {
        let half = 6.0 * analytic::x2_scale(&p).unwrap().sqrt();
        let exact = analytic::position_dist_overdamped(&p, &symmetric_grid(half, 2001), OverdampedForm::Full).unwrap();
        let numeric = fp1d::drift_diffusion_overdamped(&p, half, 2001).unwrap().steady_state().unwrap();
        let l1 = exact.l1_distance(&numeric);
        prop_assert!(l1 < 1e-4, "L1 {l1:e}");
    }
}
