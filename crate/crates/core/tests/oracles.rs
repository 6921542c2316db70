//! Worked examples checked against independent oracles: Monte Carlo with an
//! unrelated generator, dense eigensolvers, interior-point solvers and exact
//! per-draw evaluation on the estimators' own Gaussian draws.

mod common;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use common::{conic_tlasso_objective, l1_ball_local_sup, monte_carlo_moments, Leaf};
use tlasso::geometry::{
    descent_cone_width_mc, expected_gaussian_norm, gaussian_complexity_mc, gaussian_width_mc,
    local_gaussian_width_mc, rsv_check, ConeSample,
};
use tlasso::links::{estimate_psi, mean_variance, DEFAULT_ORDER};
use tlasso::rng::{gaussian_vec, stream_rng};
use tlasso::solver::error_breakdown;
use tlasso::{
    generate_instance, lipschitz_estimate, solve_tlasso, ConstraintSet, InstanceSpec, LinkFunction,
    ProblemInstance, SolveOptions,
};

fn spec(n: usize, m: usize, s: usize, k: usize, amplitude: f64, link: LinkFunction, seed: u64) -> InstanceSpec {
    InstanceSpec {
        n,
        m,
        signal_sparsity: s,
        corruption_sparsity: k,
        corruption_amplitude: amplitude,
        link,
        seed,
    }
}

/// The draws the estimators use for `seed`.
fn draws(dim: usize, trials: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..trials)
        .map(|i| gaussian_vec(&mut stream_rng(seed, i as u64), dim))
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[test]
fn identity_psi_is_root_of_closed_form() {
    // E exp(g²/t²) = (1 − 2/t²)^(−1/2) = 2 at t² = 8/3.
    let psi = estimate_psi(&LinkFunction::Identity, DEFAULT_ORDER).unwrap();
    assert!((psi - (8.0f64 / 3.0).sqrt()).abs() < 1e-6, "{psi}");
}

#[test]
fn link_moments_match_monte_carlo() {
    let links = [
        LinkFunction::Sign,
        LinkFunction::clip(1.0).unwrap(),
        LinkFunction::tanh(0.5).unwrap(),
        LinkFunction::tanh(3.0).unwrap(),
        LinkFunction::tanh(8.0).unwrap(),
    ];
    for (i, link) in links.iter().enumerate() {
        let (mu, sigma) = mean_variance(link, DEFAULT_ORDER).unwrap();
        let mc = monte_carlo_moments(link, 1_000_000, 900 + i as u64);
        assert!((mu - mc.mu).abs() <= 4.0 * mc.mu_se, "{link}: mu {mu} vs {}", mc.mu);
        assert!(
            (sigma * sigma - mc.sigma2).abs() <= 4.0 * mc.sigma2_se,
            "{link}: sigma² {} vs {}",
            sigma * sigma,
            mc.sigma2
        );
    }
    let (mu, sigma) = mean_variance(&LinkFunction::Sign, DEFAULT_ORDER).unwrap();
    assert!((mu - (2.0 / PI).sqrt()).abs() < 1e-12);
    assert!((sigma * sigma - (1.0 - 2.0 / PI)).abs() < 1e-12);
}

#[test]
fn lipschitz_estimate_matches_eigendecomposition() {
    let inst = generate_instance(&spec(32, 64, 3, 0, 0.0, LinkFunction::Identity, 21)).unwrap();
    let phi = DMatrix::from_fn(64, 32, |i, j| inst.phi[(i, j)]);
    let gram = &phi * phi.transpose() + DMatrix::identity(64, 64) * 64.0;
    let top = gram.symmetric_eigen().eigenvalues.max();
    let estimate = lipschitz_estimate(&inst, 200).unwrap();
    let ratio = estimate / top;
    assert!((1.0..=1.02).contains(&ratio), "ratio {ratio}");
}

#[test]
fn unconstrained_identity_recovers_truth() {
    let inst = generate_instance(&spec(15, 45, 3, 0, 0.0, LinkFunction::Identity, 4)).unwrap();
    let result = solve_tlasso(
        &inst,
        &ConstraintSet::full(15),
        &ConstraintSet::origin(45),
        &SolveOptions::for_measurements(45),
    )
    .unwrap();
    assert!(result.converged);
    assert!(result.final_residual_norm < 1e-6);
    let ls = common::least_squares(&inst);
    assert!(common::dist(result.x_hat.as_slice().unwrap(), &ls) < 1e-7);
    assert!(common::dist(result.x_hat.as_slice().unwrap(), inst.x_star.as_slice().unwrap()) < 1e-7);
}

#[test]
fn anchored_corrupted_linear_agrees_with_conic_oracle() {
    for seed in [1, 2, 3] {
        let (n, m) = (20, 100);
        let inst = generate_instance(&spec(n, m, 2, 2, 3.0, LinkFunction::Identity, seed)).unwrap();
        let rx = inst.x_star.iter().map(|v| v.abs()).sum::<f64>();
        let rv = inst.v_star.iter().map(|v| v.abs()).sum::<f64>();
        let sx = ConstraintSet::l1_ball(n, rx).unwrap();
        let sv = ConstraintSet::l1_ball(m, rv).unwrap();
        let result = solve_tlasso(&inst, &sx, &sv, &SolveOptions::for_measurements(m)).unwrap();
        let ours = *result.objective_trace.last().unwrap();
        let oracle = conic_tlasso_objective(&inst, Leaf::L1(rx), Leaf::L1(rv));
        assert!((ours - oracle).abs() < 1e-4, "seed {seed}: {ours} vs {oracle}");
        let err = error_breakdown(&result.x_hat, &result.v_hat, &inst, 1.0).unwrap();
        assert!(err.joint <= 1e-3, "seed {seed}: joint error {}", err.joint);
    }
}

#[test]
fn width_examples() {
    let w = gaussian_width_mc(&ConstraintSet::l2_ball(1, 1.0).unwrap(), 20_000, 1).unwrap();
    assert!((w.mean - (2.0 / PI).sqrt()).abs() <= 4.0 * w.std_error);
    let w = gaussian_width_mc(&ConstraintSet::l2_ball(100, 1.0).unwrap(), 4000, 2).unwrap();
    assert!((w.mean - expected_gaussian_norm(100)).abs() <= 4.0 * w.std_error);

    let mut y = vec![0.0; 5];
    y[2] = 0.6;
    y[4] = -0.8;
    let c = gaussian_complexity_mc(&ConstraintSet::singleton(y).unwrap(), 20_000, 3).unwrap();
    assert!((c.mean - (2.0 / PI).sqrt()).abs() <= 4.0 * c.std_error);

    for set in [
        ConstraintSet::l1_ball(2, 1.0).unwrap(),
        ConstraintSet::l2_ball(7, 2.0).unwrap(),
        ConstraintSet::product(ConstraintSet::l1_ball(3, 1.0).unwrap(), ConstraintSet::origin(4)),
    ] {
        let w = gaussian_width_mc(&set, 3000, 4).unwrap();
        let c = gaussian_complexity_mc(&set, 3000, 4).unwrap();
        assert!((c.mean - w.mean).abs() <= 4.0 * (w.std_error + c.std_error), "{set}");
        let ratio = c.mean / w.mean;
        assert!((1.0 - 1e-12..=2.0).contains(&ratio), "{set}: ratio {ratio}");
    }
}

#[test]
fn local_width_of_l2_ball_matches_closed_form() {
    let ball = ConstraintSet::l2_ball(10, 1.5).unwrap();
    let full = gaussian_width_mc(&ball, 500, 6).unwrap().mean;
    let saturated = local_gaussian_width_mc(&ball, 2.0, 500, 6).unwrap().mean;
    assert!((saturated - full).abs() <= 1e-12 * full);
    let small = local_gaussian_width_mc(&ball, 0.4, 500, 6).unwrap().mean;
    let norms: Vec<f64> = draws(10, 500, 6).iter().map(|g| 0.4 * common::norm(g)).collect();
    assert!((small - mean(&norms)).abs() <= 1e-9 * small);
}

#[test]
fn local_width_of_l1_ball_matches_conic_oracle() {
    let set = ConstraintSet::l1_ball(4, 1.0).unwrap();
    for t in [0.1, 0.6, 0.9] {
        let ours = local_gaussian_width_mc(&set, t, 300, 12).unwrap().mean;
        let sups: Vec<f64> = draws(4, 300, 12).iter().map(|g| l1_ball_local_sup(g, 1.0, t)).collect();
        let oracle = mean(&sups);
        assert!((ours - oracle).abs() <= 1e-6 * oracle.max(1.0), "t = {t}: {ours} vs {oracle}");
    }
}

#[test]
fn cone_at_sphere_point_is_a_half_space() {
    let (n, m) = (6, 3);
    let mut x0 = Array1::zeros(n);
    x0[0] = 0.6;
    x0[3] = 0.8;
    let v0 = Array1::from(vec![0.5, -1.0, 0.0]);
    let sx = ConstraintSet::l2_ball(n, 1.0).unwrap();
    let sv = ConstraintSet::singleton(v0.to_vec()).unwrap();
    let ours = descent_cone_width_mc(&sx, &sv, (&x0, &v0), 2000, 13).unwrap().mean;
    // Tangent cone {d : ⟨x0, d⟩ ≤ 0} × {0}; the sup over its unit ball is
    // the norm of the projection of g onto the half-space.
    let sups: Vec<f64> = draws(n + m, 2000, 13)
        .iter()
        .map(|g| {
            let inner: f64 = g[..n].iter().zip(x0.iter()).map(|(a, b)| a * b).sum();
            let proj: Vec<f64> = g[..n].iter().zip(x0.iter()).map(|(a, b)| a - inner.max(0.0) * b).collect();
            common::norm(&proj)
        })
        .collect();
    let oracle = mean(&sups);
    assert!((ours - oracle).abs() <= 1e-4 * oracle, "{ours} vs {oracle}");
}

/// `max(0, sup ⟨g, u⟩)` over unit `u` on a fine angular mesh of a 2-d cone.
fn mesh_sup(g: &[f64], in_cone: impl Fn(f64, f64) -> bool) -> f64 {
    let steps = 200_000;
    (0..steps)
        .map(|i| 2.0 * PI * i as f64 / steps as f64)
        .filter_map(|a| {
            let (u0, u1) = (a.cos(), a.sin());
            in_cone(u0, u1).then(|| g[0] * u0 + g[1] * u1)
        })
        .fold(0.0, f64::max)
}

#[test]
fn cone_of_tiny_l1_balls_matches_mesh() {
    // x anchor on an edge of the radius-0.05 ball, v anchor at a vertex of
    // the radius-0.02 ball.
    let x0 = Array1::from(vec![0.03, -0.02]);
    let v0 = Array1::from(vec![0.02, 0.0]);
    let sx = ConstraintSet::l1_ball(2, 0.05).unwrap();
    let sv = ConstraintSet::l1_ball(2, 0.02).unwrap();
    let est = descent_cone_width_mc(&sx, &sv, (&x0, &v0), 400, 14).unwrap();
    let sups: Vec<f64> = draws(4, 400, 14)
        .iter()
        .map(|g| {
            let hx = mesh_sup(&g[..2], |a, b| a - b <= 1e-15);
            let hv = mesh_sup(&g[2..], |a, b| a + b.abs() <= 1e-15);
            (hx * hx + hv * hv).sqrt()
        })
        .collect();
    let oracle = mean(&sups);
    assert!((est.mean - oracle).abs() <= 1e-6, "{} vs {oracle}", est.mean);
    assert!((est.mean - oracle).abs() <= 3.0 * est.std_error);
}

fn unit(dim: usize, index: usize) -> Array1<f64> {
    let mut e = Array1::zeros(dim);
    e[index] = 1.0;
    e
}

#[test]
fn rsv_examples() {
    let inst = generate_instance(&spec(10, 64, 2, 0, 0.0, LinkFunction::Identity, 15)).unwrap();
    let cone = |directions| ConeSample { base_point: Array1::zeros(74), directions };
    let report = rsv_check(&inst, &cone(vec![unit(74, 10)]), 200).unwrap();
    assert!((report.empirical_min - 8.0).abs() < 1e-12);

    // ‖Φe₁‖ is χ with 64 degrees of freedom.
    let report = rsv_check(&inst, &cone(vec![unit(74, 0)]), 200).unwrap();
    assert!((report.empirical_min - 8.0).abs() < 3.0, "{}", report.empirical_min);
    let column: Vec<f64> = inst.phi.column(0).to_vec();
    assert!((report.empirical_min - common::norm(&column)).abs() < 1e-12);

    // The whole sphere of a 4 + 4 problem, checked densely.
    let small = generate_instance(&spec(4, 4, 1, 0, 0.0, LinkFunction::Identity, 16)).unwrap();
    let directions: Vec<Array1<f64>> = draws(8, 3000, 17)
        .into_iter()
        .map(|g| {
            let norm = common::norm(&g);
            Array1::from(g) / norm
        })
        .collect();
    let report = rsv_check(&small, &cone(directions.clone()), 500).unwrap();
    let dense = directions
        .iter()
        .map(|d| image_norm(&small, d))
        .fold(f64::INFINITY, f64::min);
    assert!((report.empirical_min - dense).abs() < 1e-12);
    assert!(report.empirical_min > 0.0);
    assert!(report.empirical_min <= 2.0 + 3.0 * report.gamma.mean);
}

fn image_norm(inst: &ProblemInstance, d: &Array1<f64>) -> f64 {
    let n = inst.n();
    let image = inst.phi.dot(&d.slice(ndarray::s![..n])) + &d.slice(ndarray::s![n..]) * inst.sqrt_m();
    image.dot(&image).sqrt()
}

#[test]
fn degenerate_sensing_matrix_has_lipschitz_m() {
    let phi = Array2::zeros((4, 3));
    let inst = ProblemInstance::assemble(phi, Array1::zeros(3), Array1::zeros(4), LinkFunction::Identity, 0).unwrap();
    let l = lipschitz_estimate(&inst, 20).unwrap();
    assert!((l - 4.0 * 1.01).abs() < 1e-12);
}
