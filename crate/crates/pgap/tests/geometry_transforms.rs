use approx::assert_relative_eq;
use pgap::geometry::{make_ball_geometry, make_disk_geometry, make_quadratic_geometry, GapGeometry, Profile, Side};
use pgap::transforms::{NeckChart, PhiChart};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn disks(eps: f64) -> GapGeometry<f64> {
    make_disk_geometry(eps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, rng_seed: RngSeed::Fixed(0), failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn normals_are_unit(x in -0.95f64..0.95, eps in 1e-6f64..0.5, upper in any::<bool>()) {
        let side = if upper { Side::Upper } else { Side::Lower };
        let nu = disks(eps).inner_normal(side, &[x]).unwrap();
        let len = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((len - 1.0).abs() <= 1e-12);
        // points away from the gap
        let away = if upper { nu[1] > 0.0 } else { nu[1] < 0.0 };
        prop_assert!(away);
    }

    #[test]
    fn disk_gap_is_even_and_increasing(x in 0.0f64..0.99, dx in 1e-4f64..0.1, eps in 1e-6f64..0.5) {
        let g = disks(eps);
        prop_assert_eq!(g.gap_width(&[x]), g.gap_width(&[-x]));
        let y = (x + dx).min(0.998);
        prop_assume!(y > x);
        prop_assert!(g.gap_width(&[y]) > g.gap_width(&[x]));
        prop_assert!(g.gap_width(&[x]) >= eps + g.c1 * x * x);
    }

    #[test]
    fn neck_chart_round_trip(x in -0.5f64..0.5, t in 0.0f64..=1.0, eps in 1e-5f64..0.1) {
        let g = disks(eps);
        let chart = NeckChart::centered(g.clone(), 0.5).unwrap();
        let xn = g.lower_surface(&[x]) + t * g.gap_width(&[x]);
        let z = chart.neck_forward(&[x, xn]).unwrap();
        prop_assert!(z[1].abs() <= 0.5 * chart.slab_width() * (1.0 + 1e-12));
        let back = chart.neck_inverse(&z).unwrap();
        prop_assert!((back[0] - x).abs() <= 1e-15);
        prop_assert!((back[1] - xn).abs() <= 1e-12 * (1.0 + xn.abs()));
    }

    #[test]
    fn phi_round_trip(rho in 0.026f64..0.199, neg in any::<bool>(), s in -1.0f64..=1.0) {
        // annulus r/4 <= |y'| <= 2r
        let y1 = if neg { -rho } else { rho };
        let chart = PhiChart::new(disks(1e-4), 0.1, 0.25, 12).unwrap();
        let r2 = 0.01;
        let y = [y1, s * r2];
        let x = chart.phi_forward(&y).unwrap().x;
        let back = chart.phi_inverse(&x).unwrap();
        prop_assert!((back[0] - y[0]).abs() <= 1e-9);
        // the Newton residual is 1e-12 in x; dy_n/dx_n = 2r^2/gap amplifies it ~20x here
        prop_assert!((back[1] - y[1]).abs() <= 1e-8 * r2, "{:e}", (back[1] - y[1]).abs());
    }
}

#[test]
fn phi_maps_the_flat_faces_onto_the_boundaries() {
    let g = disks(1e-4);
    let chart = PhiChart::new(g.clone(), 0.1, 0.25, 12).unwrap();
    for &y1 in &[-0.19, -0.1, 0.03, 0.05, 0.15] {
        let up = chart.phi_forward(&[y1, 0.01]).unwrap().x;
        let lo = chart.phi_forward(&[y1, -0.01]).unwrap().x;
        assert_relative_eq!(up[0], y1, epsilon = 1e-15);
        assert_relative_eq!(up[1], g.upper_surface(&[y1]), epsilon = 1e-14);
        assert_relative_eq!(lo[1], g.lower_surface(&[y1]), epsilon = 1e-14);
    }
}

#[test]
fn phi_bounds_on_balls_in_three_dimensions() {
    let g = make_ball_geometry(3, 1e-5).unwrap();
    let chart = PhiChart::new(g, 0.1, 0.25, 8).unwrap();
    let rep = chart.verify_phi_bounds(1000, 3.0, 0).unwrap();
    assert!(rep.c_jacobian.is_finite() && rep.c_jacobian >= 1.0);
    assert!(rep.parallelism_residual_max < 1e-8);
    assert_eq!(rep.c_btilde_components.len(), 3);
}

#[test]
fn phi_chart_rejects_bad_scales() {
    let g = disks(1e-4);
    assert!(PhiChart::new(g.clone(), 0.005, 0.25, 8).is_err());
    assert!(PhiChart::new(g.clone(), 0.3, 0.25, 8).is_err());
    assert!(PhiChart::new(g, 0.1, 0.6, 8).is_err());
}

#[test]
fn hypothesis_estimates() {
    let g = make_quadratic_geometry(2, 1e-3, 1.0).unwrap();
    let rep = g.validate_hypotheses(1000, 0.5, 0).unwrap();
    assert_relative_eq!(rep.kappa1_est, 1.0, epsilon = 1e-12);
    assert_relative_eq!(rep.kappa2_est, 1.0, epsilon = 1e-12);
    assert!(rep.violations.is_empty());

    let d = disks(1e-3).validate_hypotheses(1000, 0.9, 0).unwrap();
    assert!(d.c1_est >= 1.0 - 1e-12);

    let same = GapGeometry::new(2, 1e-3, Profile::isotropic_quadratic(1, 2.0), Profile::isotropic_quadratic(1, 2.0), 1.0, 8.0).unwrap();
    assert!(!same.validate_hypotheses(200, 0.5, 0).unwrap().violations.is_empty());
}

#[test]
fn single_precision_geometry_agrees() {
    let g32 = make_disk_geometry(1e-3f32).unwrap();
    let g64 = disks(1e-3);
    for &x in &[0.0, 0.1, 0.3, 0.7] {
        let a = g32.gap_width(&[x as f32]) as f64;
        let b = g64.gap_width(&[x]);
        assert_relative_eq!(a, b, max_relative = 1e-5);
    }
}

#[test]
fn phi_inverse_near_the_inner_edge() {
    let chart = PhiChart::new(disks(1e-4), 0.1, 0.25, 12).unwrap();
    let y = [0.03173061665481515, -0.9611330688231364 * 0.01];
    let back = chart.phi_inverse(&chart.phi_forward(&y).unwrap().x).unwrap();
    assert!((back[0] - y[0]).abs() < 1e-13);
    assert!((back[1] - y[1]).abs() < 1e-10);
}
