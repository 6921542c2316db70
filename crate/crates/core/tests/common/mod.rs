//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT, SolverStatus,
    SupportedConeT, ZeroConeT,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use tlasso::{ConstraintSet, LinkFunction, ProblemInstance};

/// Leaf sets the convex-programming oracle understands.
#[derive(Debug, Clone, Copy)]
pub enum Leaf {
    L1(f64),
    L2(f64),
    Full,
    Origin,
}

impl Leaf {
    pub fn to_set(self, dim: usize) -> ConstraintSet {
        match self {
            Leaf::L1(r) => ConstraintSet::l1_ball(dim, r).unwrap(),
            Leaf::L2(r) => ConstraintSet::l2_ball(dim, r).unwrap(),
            Leaf::Full => ConstraintSet::full(dim),
            Leaf::Origin => ConstraintSet::origin(dim),
        }
    }
}

/// Minimum of `½‖y − Φx − √m·v‖²` over `leaf_x × leaf_v`, solved as a conic
/// program by an interior-point method.
pub fn conic_tlasso_objective(inst: &ProblemInstance, leaf_x: Leaf, leaf_v: Leaf) -> f64 {
    let (m, n) = inst.phi.dim();
    let sqrt_m = (m as f64).sqrt();
    let dim = n + m;
    // A = [Φ, √m·I]
    let mut a = DMatrix::<f64>::zeros(m, dim);
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] = inst.phi[(i, j)];
        }
        a[(i, n + i)] = sqrt_m;
    }
    let y = DVector::from_iterator(m, inst.y.iter().copied());
    let gram = a.transpose() * &a;
    let lin = -(a.transpose() * &y);

    // Variables: z (dim), then one auxiliary block u ≥ |z_block| per ℓ1 leaf.
    let mut aux = 0;
    let blocks = [(leaf_x, 0usize, n), (leaf_v, n, m)];
    let aux_offsets: Vec<Option<usize>> = blocks
        .iter()
        .map(|(leaf, _, len)| {
            if let Leaf::L1(_) = leaf {
                let off = dim + aux;
                aux += len;
                Some(off)
            } else {
                None
            }
        })
        .collect();
    let total = dim + aux;

    let mut p = vec![vec![0.0; total]; total];
    for i in 0..dim {
        for j in 0..dim {
            p[i][j] = gram[(i, j)];
        }
    }
    let mut q = vec![0.0; total];
    q[..dim].copy_from_slice(lin.as_slice());

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut b = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    for ((leaf, start, len), aux_off) in blocks.iter().zip(&aux_offsets) {
        match *leaf {
            Leaf::Full => {}
            Leaf::Origin => {
                for i in 0..*len {
                    let mut row = vec![0.0; total];
                    row[start + i] = 1.0;
                    rows.push(row);
                    b.push(0.0);
                }
                cones.push(ZeroConeT(*len));
            }
            Leaf::L1(r) => {
                let off = aux_off.unwrap();
                // z − u ≤ 0, −z − u ≤ 0, Σu ≤ r
                for i in 0..*len {
                    let mut row = vec![0.0; total];
                    row[start + i] = 1.0;
                    row[off + i] = -1.0;
                    rows.push(row);
                    b.push(0.0);
                    let mut row = vec![0.0; total];
                    row[start + i] = -1.0;
                    row[off + i] = -1.0;
                    rows.push(row);
                    b.push(0.0);
                }
                let mut row = vec![0.0; total];
                for i in 0..*len {
                    row[off + i] = 1.0;
                }
                rows.push(row);
                b.push(r);
                cones.push(NonnegativeConeT(2 * len + 1));
            }
            Leaf::L2(r) => {
                // (r, z) ∈ SOC, written as s = b − Az with A = [0; −I].
                rows.push(vec![0.0; total]);
                b.push(r);
                for i in 0..*len {
                    let mut row = vec![0.0; total];
                    row[start + i] = -1.0;
                    rows.push(row);
                    b.push(0.0);
                }
                cones.push(SecondOrderConeT(len + 1));
            }
        }
    }
    if rows.is_empty() {
        rows.push(vec![0.0; total]);
        b.push(1.0);
        cones.push(NonnegativeConeT(1));
    }

    let p = CscMatrix::from(&p).to_triu();
    let a_mat = CscMatrix::from(&rows);
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-12,
        tol_gap_rel: 1e-12,
        tol_feas: 1e-12,
        max_iter: 500,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &q, &a_mat, &b, &cones, settings).unwrap();
    solver.solve();
    assert!(
        matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved),
        "conic oracle status {:?}",
        solver.solution.status
    );
    solver.solution.obj_val + 0.5 * y.dot(&y)
}

/// Least-squares solution of `Φx ≈ y` by SVD.
pub fn least_squares(inst: &ProblemInstance) -> Vec<f64> {
    let (m, n) = inst.phi.dim();
    let a = DMatrix::from_fn(m, n, |i, j| inst.phi[(i, j)]);
    let y = DVector::from_iterator(m, inst.y.iter().copied());
    let svd = a.svd(true, true);
    svd.solve(&y, 1e-12).unwrap().iter().copied().collect()
}

pub struct Moments {
    pub mu: f64,
    pub mu_se: f64,
    pub sigma2: f64,
    pub sigma2_se: f64,
}

/// Sample estimates of `μ = E f(g)g` and `σ² = E(f(g) − μg)²` from
/// `samples` standard normals drawn by an unrelated generator.
pub fn monte_carlo_moments(link: &LinkFunction, samples: usize, seed: u64) -> Moments {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..samples).map(|_| rng.sample(StandardNormal)).collect();
    let count = samples as f64;
    let prods: Vec<f64> = draws.iter().map(|&g| link.eval(g) * g).collect();
    let (mu, mu_se) = mean_se(&prods, count);
    let resid: Vec<f64> = draws.iter().map(|&g| (link.eval(g) - mu * g).powi(2)).collect();
    let (sigma2, sigma2_se) = mean_se(&resid, count);
    Moments { mu, mu_se, sigma2, sigma2_se }
}

fn mean_se(values: &[f64], count: f64) -> (f64, f64) {
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    (mean, (var / count).sqrt())
}

/// Exact ℓ1-ball projection by enumerating the KKT cases: `p` itself if
/// feasible, otherwise the best feasible projection onto a face
/// `{q : Σ_{i∈S} s_i q_i = r, q_i = 0 off S}` over all supports and signs.
pub fn l1_projection_kkt(p: &[f64], r: f64) -> Vec<f64> {
    if p.iter().map(|v| v.abs()).sum::<f64>() <= r {
        return p.to_vec();
    }
    let d = p.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for support in 1u32..(1 << d) {
        let idx: Vec<usize> = (0..d).filter(|i| support & (1 << i) != 0).collect();
        for signs in 0u32..(1 << idx.len()) {
            let s: Vec<f64> = (0..idx.len())
                .map(|j| if signs & (1 << j) != 0 { -1.0 } else { 1.0 })
                .collect();
            // Projection onto the hyperplane s·q_S = r within the support.
            let dotp: f64 = idx.iter().zip(&s).map(|(&i, si)| si * p[i]).sum();
            let shift = (dotp - r) / idx.len() as f64;
            let mut q = vec![0.0; d];
            let mut ok = true;
            for (&i, si) in idx.iter().zip(&s) {
                q[i] = p[i] - shift * si;
                if q[i] * si < -1e-15 {
                    ok = false;
                }
            }
            if !ok {
                continue;
            }
            let dist: f64 = q.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
                best = Some((dist, q));
            }
        }
    }
    best.expect("some face is feasible").1
}

/// Best k-sparse approximation by trying every support; ties go to the
/// lexicographically smallest support.
pub fn top_k_bruteforce(p: &[f64], k: usize) -> Vec<f64> {
    let d = p.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for support in 0u32..(1 << d) {
        if support.count_ones() as usize != k {
            continue;
        }
        let q: Vec<f64> = (0..d).map(|i| if support & (1 << i) != 0 { p[i] } else { 0.0 }).collect();
        let dist: f64 = q.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
            best = Some((dist, q));
        }
    }
    best.unwrap().1
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn gaussian(rng: &mut ChaCha20Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// `max ⟨g, x⟩` subject to `‖x‖₁ ≤ r` and `‖x‖₂ ≤ t`, by interior point.
pub fn l1_ball_local_sup(g: &[f64], r: f64, t: f64) -> f64 {
    let d = g.len();
    let total = 2 * d;
    // Variables (x, u) with |x| ≤ u, Σu ≤ r, (t, x) ∈ SOC.
    let mut rows = Vec::new();
    let mut b = Vec::new();
    for i in 0..d {
        let mut row = vec![0.0; total];
        row[i] = 1.0;
        row[d + i] = -1.0;
        rows.push(row);
        b.push(0.0);
        let mut row = vec![0.0; total];
        row[i] = -1.0;
        row[d + i] = -1.0;
        rows.push(row);
        b.push(0.0);
    }
    let mut row = vec![0.0; total];
    row[d..].iter_mut().for_each(|v| *v = 1.0);
    rows.push(row);
    b.push(r);
    rows.push(vec![0.0; total]);
    b.push(t);
    for i in 0..d {
        let mut row = vec![0.0; total];
        row[i] = -1.0;
        rows.push(row);
        b.push(0.0);
    }
    let cones = [NonnegativeConeT(2 * d + 1), SecondOrderConeT(d + 1)];
    let p = CscMatrix::zeros((total, total));
    let mut q = vec![0.0; total];
    for i in 0..d {
        q[i] = -g[i];
    }
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-12,
        tol_gap_rel: 1e-12,
        tol_feas: 1e-12,
        ..DefaultSettings::default()
    };
    let a = CscMatrix::from(&rows);
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).unwrap();
    solver.solve();
    assert!(matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved));
    -solver.solution.obj_val
}
