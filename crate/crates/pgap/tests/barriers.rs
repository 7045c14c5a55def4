use pgap::barriers::{
    barrier_flux, bernstein_eval, certify_sign, certify_sign_with, comparison_fit, eval_barrier, measure_kappa,
    BarrierSpec, BernsteinOptions, CertifyOptions,
};
use pgap::geometry::{make_disk_geometry, make_quadratic_geometry, Region};
use pgap::solver::{solve, DiscreteField, SolverConfig};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_spec(rng: &mut ChaCha8Rng) -> BarrierSpec<f64> {
    if rng.random_bool(0.5) {
        let n = rng.random_range(2..=4usize);
        let p = rng.random_range(n as f64 + 1.5..12.0);
        let delta = rng.random_range(0.05..(p - n as f64 - 1.0) * 0.9);
        let gamma = rng.random_range(0.05..0.95) * pgap::barriers::v_gamma_bound(n, p, delta);
        BarrierSpec::supersolution(n, p, delta, gamma, 1.0, 1.0, 1e-4).unwrap()
    } else {
        let p = rng.random_range(1.5..8.0);
        let delta = rng.random_range(0.05..0.45);
        let lo = pgap::barriers::w_gamma_bound(p, delta);
        let gamma = rng.random_range(lo + 0.02..lo + 0.6);
        BarrierSpec::subsolution(p, delta, gamma, rng.random_range(1e-6..delta * 1e-2)).unwrap()
    }
}

fn random_point(rng: &mut ChaCha8Rng, spec: &BarrierSpec<f64>) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..spec.n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let Ok(e) = eval_barrier(spec, &x) else { continue };
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r > 0.05 && e.value > 1e-3 * spec.truncation().max(1e-3) {
            return x;
        }
    }
}

#[test]
fn divergence_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let spec = random_spec(&mut rng);
        let x = random_point(&mut rng, &spec);
        let e = eval_barrier(&spec, &x).unwrap();
        let h = 1e-4;
        let mut div = 0.0;
        for i in 0..spec.n {
            let at = |s: f64| {
                let mut y = x.clone();
                y[i] += s;
                barrier_flux(&spec, &y).unwrap()[i]
            };
            div += (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
        }
        worst = worst.max((div - e.divergence).abs() / e.divergence.abs().max(1e-300));
    }
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let spec = random_spec(&mut rng);
        let x = random_point(&mut rng, &spec);
        let e = eval_barrier(&spec, &x).unwrap();
        let gn = e.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
        for i in 0..spec.n {
            let at = |s: f64| {
                let mut y = x.clone();
                y[i] += s;
                eval_barrier(&spec, &y).unwrap().value
            };
            let h = 1e-5;
            let fd = (at(h) - at(-h)) / (2.0 * h);
            assert!((fd - e.gradient[i]).abs() <= 1e-6 * gn, "{fd} vs {}", e.gradient[i]);
        }
    }
}

#[test]
fn supersolution_homogeneity() {
    let spec = BarrierSpec::supersolution(2, 5.0, 0.5, 0.3, 1.0, 1.0, 1e-4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (g, p) = (spec.gamma, spec.p);
    for _ in 0..200 {
        let x = random_point(&mut rng, &spec);
        let x2: Vec<f64> = x.iter().map(|c| 2.0 * c).collect();
        let (a, b) = (eval_barrier(&spec, &x).unwrap(), eval_barrier(&spec, &x2).unwrap());
        assert!((b.value / a.value - 2f64.powf(g)).abs() < 1e-12);
        let k = 2f64.powf((g - 1.0) * (p - 1.0) - 1.0);
        assert!((b.divergence / a.divergence - k).abs() < 1e-10 * k);
    }
}

#[test]
fn certificates_for_admissible_and_inadmissible_exponents() {
    let g = make_quadratic_geometry(2, 1e-4f64, 1.0).unwrap();
    let ok = BarrierSpec::supersolution(2, 5.0, 0.5, 0.3, 1.0, 1.0, 1e-4).unwrap();
    let rep = certify_sign(&ok, &g, &Region::Full, 100_000).unwrap();
    assert!(rep.is_clean() && rep.interior_samples >= 100_000, "{:?}", rep.violations.first());
    let bad = BarrierSpec::supersolution_unchecked(2, 5.0, 0.5, 0.45, 1.0, 1.0, 1e-4);
    let rep = certify_sign(&bad, &g, &Region::Full, 10_000).unwrap();
    assert!(!rep.admissible && rep.violation_count > 0);
    // violations sit near the tangential axis
    assert!(rep.violations.iter().any(|v| v.location == "interior" && v.point[1].abs() < 0.1 * v.point[0].abs()));

    let d = make_disk_geometry(1e-3f64).unwrap();
    let w = BarrierSpec::subsolution(5.0, 0.2, 0.6, 1e-3).unwrap();
    assert!(certify_sign(&w, &d, &Region::Full, 100_000).unwrap().is_clean());
}

#[test]
fn certificate_is_monotone_in_gamma() {
    let g = make_quadratic_geometry(2, 1e-4f64, 1.0).unwrap();
    let hi = BarrierSpec::supersolution(2, 8.0, 2.0, 0.4, 1.0, 1.0, 1e-4).unwrap();
    let first = certify_sign(&hi, &g, &Region::Full, 20_000).unwrap();
    assert!(first.is_clean());
    let opts = CertifyOptions { samples: 20_000, seed: 0, mu0: first.mu0 };
    for gamma in [0.1, 0.2, 0.3] {
        let lo = BarrierSpec { gamma, ..hi.clone() };
        let rep = certify_sign_with(&lo, &g, &Region::Full, &opts).unwrap();
        assert!(rep.is_clean() && rep.mu == first.mu, "gamma = {gamma}");
    }
}

#[test]
fn subsolution_normal_derivative_on_the_upper_disk() {
    // ∂v/∂ν < 0 on Γ₊ wherever x₂ > ε/δ
    let (eps, delta) = (1e-3, 0.2);
    let d = make_disk_geometry(eps).unwrap();
    let w = BarrierSpec::subsolution(5.0, delta, 0.6, eps).unwrap();
    for k in 1..100 {
        let x1 = 0.9 * k as f64 / 100.0;
        let x2 = d.upper_surface(&[x1]);
        if x2 <= eps / delta {
            continue;
        }
        let r2: f64 = x1 * x1 + (2.0 - delta) * x2 * x2;
        let dv: Vec<f64> = [x1, (2.0 - delta) * x2].iter().map(|c| 0.6 * r2.powf(-0.7) * c).collect();
        let nu = d.inner_normal(pgap::geometry::Side::Upper, &[x1]).unwrap();
        assert!(dv[0] * nu[0] + dv[1] * nu[1] < 0.0, "x1 = {x1}");
        let e = eval_barrier(&w, &[x1, x2]).unwrap();
        assert!(e.gradient[0] * nu[0] + e.gradient[1] * nu[1] <= 0.0);
    }
}

fn disk_solve(p: f64, eps: f64) -> DiscreteField<f64> {
    let g = make_disk_geometry(eps).unwrap();
    let mut cfg = SolverConfig::new(p);
    cfg.grid_ns = 64;
    cfg.grid_nt = 16;
    solve(&g, &cfg).unwrap().require_converged().unwrap()
}

#[test]
fn comparison_constant() {
    let eps = 1e-3;
    let f = disk_solve(5.0, eps);
    let (k1, k2) = measure_kappa(&f.chart.geom, 0.5, 500, 0).unwrap();
    let spec = BarrierSpec::supersolution(2, 5.0, 0.5, 0.3, k1, k2, eps).unwrap();
    let region = Region::annulus(vec![0.0], 0.05, 0.3).unwrap();
    let fit = comparison_fit(&f, &spec, &region).unwrap();
    assert!(fit.c_boundary > 0.0 && fit.interior_nodes > 0);
    assert_eq!(fit.interior_violation_fraction, 0.0);

    let mut doubled = f.clone();
    doubled.values.iter_mut().for_each(|v| *v *= 2.0);
    let fit2 = comparison_fit(&doubled, &spec, &region).unwrap();
    assert!((fit2.c_boundary - 2.0 * fit.c_boundary).abs() < 1e-12 * fit.c_boundary);
    assert_eq!(fit2.interior_violation_fraction, fit.interior_violation_fraction);

    let mut zero = f.clone();
    zero.values.iter_mut().for_each(|v| *v = 0.0);
    let fit0 = comparison_fit(&zero, &spec, &region).unwrap();
    assert_eq!((fit0.c_boundary, fit0.interior_violation_fraction), (0.0, 0.0));
}

#[test]
fn bernstein_quantity_of_a_solve() {
    let f = disk_solve(3.0, 1e-2);
    let spec = BarrierSpec::bernstein(2, 3.0, 0.1, 1.0, 1.0, 1e-2);
    let rep = bernstein_eval(&spec, &f, &BernsteinOptions::default()).unwrap();
    assert!(rep.max_f > 0.0 && rep.f_values.iter().all(|v| v.is_finite()));
    assert!(rep.pass_fraction(3.0).unwrap() >= 0.9);

    let mut zero = f.clone();
    zero.values.iter_mut().for_each(|v| *v = 0.0);
    let rep = bernstein_eval(&spec, &zero, &BernsteinOptions::default()).unwrap();
    assert!(rep.f_values.iter().all(|&v| v == 0.0));
    assert!(rep.boundary.iter().all(|b| b.checks.is_empty()));
    assert_eq!(rep.pass_fraction(3.0), None);

    let appendix = BarrierSpec::appendix(2, 3.0, 1.0, 2.0, 1.0, 1.0, 1e-2);
    assert!(bernstein_eval(&appendix, &f, &BernsteinOptions::default()).is_ok());
    let v = BarrierSpec::supersolution(2, 5.0, 0.5, 0.3, 1.0, 1.0, 1e-4).unwrap();
    assert!(bernstein_eval(&v, &f, &BernsteinOptions::default()).is_err());
}
