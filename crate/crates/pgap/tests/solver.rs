use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use pgap::geometry::{make_ball_geometry, make_disk_geometry};
use pgap::solver::{
    assemble_energy, energy_value, gradient_field, neumann_residual, solve, DiscreteField, Mesh, SolverConfig,
};
use pgap::transforms::NeckChart;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_cfg(p: f64) -> SolverConfig<f64> {
    let mut cfg = SolverConfig::new(p);
    cfg.grid_ns = 16;
    cfg.grid_nt = 8;
    cfg
}

#[test]
fn maximum_principle_and_monotone_energy() {
    for p in [2.0, 2.5, 4.0] {
        for eps in [1e-2, 1e-3] {
            let g = make_disk_geometry(eps).unwrap();
            let f = solve(&g, &small_cfg(p)).unwrap();
            assert!(f.report.converged, "p={p} eps={eps}: {:?}", f.report.message);
            let (lo, hi) = f.min_max();
            let (dlo, dhi) = f.dirichlet_range();
            assert!(lo >= dlo - 1e-10 && hi <= dhi + 1e-10, "p={p} eps={eps}: [{lo}, {hi}]");
            for st in &f.report.stages {
                for w in st.energies.windows(2) {
                    assert!(w[1] <= w[0], "energy increased at p={} eta={}", st.p, st.eta);
                }
            }
        }
    }
}

#[test]
fn odd_and_even_symmetry() {
    for p in [2.0, 3.0] {
        let g = make_disk_geometry(1e-3).unwrap();
        let cfg = small_cfg(p);
        let f = solve(&g, &cfg).unwrap();
        let mesh = &f.mesh;
        let (ns, nt) = (cfg.grid_ns, cfg.grid_nt);
        for i in 0..=ns {
            for j in 0..=nt {
                let u = f.values[mesh.node_id(&[i], j)];
                let mirror_x = f.values[mesh.node_id(&[ns - i], j)];
                let mirror_t = f.values[mesh.node_id(&[i], nt - j)];
                assert!((u + mirror_x).abs() <= 1e-8, "odd symmetry at ({i}, {j})");
                assert!((u - mirror_t).abs() <= 1e-8, "even symmetry at ({i}, {j})");
                if i == ns / 2 {
                    assert!(u.abs() <= 1e-8);
                }
            }
        }
    }
}

/// Dense P1 stiffness matrix built from the mesh data alone and solved with
/// nalgebra's LU.
fn dense_linear_oracle(mesh: &Mesh<f64>, phi: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let n = mesh.n_nodes();
    let d = mesh.dim;
    let mut k = DMatrix::<f64>::zeros(n, n);
    for s in &mesh.simplices {
        for a in 0..=d {
            for b in 0..=d {
                let gg: f64 = (0..d).map(|i| s.grad[i][a] * s.grad[i][b]).sum();
                k[(s.verts[a], s.verts[b])] += s.vol * gg;
            }
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| !mesh.dirichlet[i]).collect();
    let fixed: Vec<usize> = (0..n).filter(|&i| mesh.dirichlet[i]).collect();
    let ud: Vec<f64> = fixed.iter().map(|&i| phi(mesh.point(i))).collect();
    let kff = DMatrix::from_fn(free.len(), free.len(), |a, b| k[(free[a], free[b])]);
    let rhs = DVector::from_fn(free.len(), |a, _| -fixed.iter().zip(&ud).map(|(&j, &v)| k[(free[a], j)] * v).sum::<f64>());
    let uf = kff.lu().solve(&rhs).expect("nonsingular stiffness matrix");
    let mut u = vec![0.0; n];
    for (a, &i) in free.iter().enumerate() {
        u[i] = uf[a];
    }
    for (&i, &v) in fixed.iter().zip(&ud) {
        u[i] = v;
    }
    u
}

#[test]
fn quadratic_energy_matches_linear_solve() {
    for eps in [1e-2, 1e-3] {
        let g = make_disk_geometry(eps).unwrap();
        let mut cfg = small_cfg(2.0);
        cfg.eta = 0.0;
        let f = solve(&g, &cfg).unwrap();
        let u = dense_linear_oracle(&f.mesh, |x| x[0]);
        let err = f.values.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-10, "eps={eps}: {err:e}");
    }
}

#[test]
fn energy_gradient_matches_finite_differences() {
    let g = make_disk_geometry(1e-2).unwrap();
    let cfg = {
        let mut c = small_cfg(3.5);
        c.eta = 1e-6;
        c
    };
    let chart = NeckChart::centered(g, 0.5).unwrap();
    let mesh = Arc::new(Mesh::build(&chart, 16, 8, 1.05).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (a, b, c, w) = (
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-20.0..20.0),
            rng.random_range(1.0..6.0),
        );
        let f = DiscreteField::from_fn(chart.clone(), mesh.clone(), &cfg, |x| {
            x[0] + a * (w * x[0]).sin() + b * x[0] * x[0] + c * x[1]
        })
        .unwrap();
        let ev = assemble_energy(&f, &cfg).unwrap();
        let (da, db, dc, k) = (
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(1.0..10.0),
        );
        let dir: Vec<f64> = (0..mesh.n_nodes())
            .map(|i| {
                let x = mesh.point(i);
                let d = (0.25 - x[0] * x[0]) * (da + db * (k * x[0]).sin() + dc * x[1] / 0.01);
                if mesh.dirichlet[i] { 0.0 } else { d }
            })
            .collect();
        let analytic: f64 = ev.grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let h = 1e-3;
        let shifted = |s: f64| {
            let mut g = f.clone();
            g.values.iter_mut().zip(&dir).for_each(|(v, d)| *v += s * d);
            energy_value(&g, &cfg).unwrap()
        };
        // fourth-order central difference
        let fd = (8.0 * (shifted(h) - shifted(-h)) - (shifted(2.0 * h) - shifted(-2.0 * h))) / (12.0 * h);
        let rel = (fd - analytic).abs() / analytic.abs().max(1e-300);
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-6, "worst relative error {worst:e}");
}

#[test]
fn neumann_residual_halves_under_refinement() {
    for p in [2.0, 3.0] {
        let g = make_disk_geometry(1e-2).unwrap();
        let mut res = Vec::new();
        for lvl in 0..2 {
            let mut cfg = small_cfg(p);
            cfg.grid_ns = 16 << lvl;
            cfg.grid_nt = 8 << lvl;
            cfg.grading = 1.1f64.powf(0.5f64.powi(lvl));
            let f = solve(&g, &cfg).unwrap();
            let r = neumann_residual(&f);
            res.push(r.flux_l2_upper.max(r.flux_l2_lower));
        }
        let ratio = res[0] / res[1];
        assert!((1.5..=3.0).contains(&ratio), "p={p}: ratio {ratio}");
    }
}

#[test]
fn transverse_field_keeps_its_flux() {
    let g = make_disk_geometry(1e-2).unwrap();
    let cfg = small_cfg(2.0);
    let mut prev: Option<f64> = None;
    for lvl in 0..3 {
        let chart = NeckChart::centered(g.clone(), 0.5).unwrap();
        let mesh = Arc::new(Mesh::build(&chart, 16 << lvl, 8 << lvl, 1.05).unwrap());
        let f = DiscreteField::from_fn(chart, mesh, &cfg, |x| x[1]).unwrap();
        let r = neumann_residual(&f).flux_l2_upper;
        if let Some(q) = prev {
            assert!((r - q).abs() < 0.05 * q);
        }
        assert!(r > 0.5);
        prev = Some(r);
    }
}

#[test]
fn eta_continuation_is_cauchy() {
    let g = make_disk_geometry(1e-3).unwrap();
    let mut cfg = small_cfg(3.0);
    cfg.continuation = vec![(3.0, 1e-2), (3.0, 1e-4), (3.0, 1e-6), (3.0, 1e-8), (3.0, 1e-10)];
    cfg.stage_tol = cfg.newton_tol;
    let f = solve(&g, &cfg).unwrap();
    assert!(f.report.converged);
    let m: Vec<f64> = f.report.stages.iter().map(|s| s.max_grad).collect();
    let d: Vec<f64> = m.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    for w in d.windows(2) {
        assert!(w[1] <= w[0], "{m:?}");
    }
}

#[test]
fn neck_concentration() {
    let eps = 1e-3f64;
    let g = make_disk_geometry(eps).unwrap();
    let mut cfg = SolverConfig::new(2.0);
    cfg.grid_ns = 60;
    let f = solve(&g, &cfg).unwrap();
    let cg = gradient_field(&f);
    assert!(cg.argmax_xp()[0].abs() <= 2.0 * eps.sqrt());
}

#[test]
fn three_dimensional_solve_is_symmetric() {
    let g = make_ball_geometry(3, 1e-2f64).unwrap();
    let mut cfg = SolverConfig::new(2.0);
    cfg.grid_ns = 8;
    cfg.grid_nt = 8;
    cfg.grading = 1.1;
    let f = solve(&g, &cfg).unwrap();
    assert!(f.report.converged);
    let mesh = &f.mesh;
    for i in 0..=8 {
        for k in 0..=8 {
            let u = f.values[mesh.node_id(&[i, k], 4)];
            assert!((u + f.values[mesh.node_id(&[8 - i, k], 4)]).abs() < 1e-8);
            assert!((u - f.values[mesh.node_id(&[i, 8 - k], 4)]).abs() < 1e-8);
        }
    }
}

#[test]
fn single_precision_solve() {
    let g = make_disk_geometry(1e-2f32).unwrap();
    let mut cfg = SolverConfig::<f32>::new(2.0);
    cfg.grid_ns = 16;
    cfg.grid_nt = 8;
    cfg.newton_tol = 1e-5;
    let f = solve(&g, &cfg).unwrap();
    assert!(f.report.converged);
    let g64 = make_disk_geometry(1e-2f64).unwrap();
    let f64_ = solve(&g64, &small_cfg(2.0)).unwrap();
    let a = gradient_field(&f).max as f64;
    let b = gradient_field(&f64_).max;
    assert!((a - b).abs() < 1e-3 * b, "{a} vs {b}");
}
