//! Quadrature rules for expectations over a standard normal variable.
//!
//! Two families are provided. Smooth integrands use Gauss-Hermite rules for
//! the weight `exp(-x²/2)/√(2π)`. Integrands with kinks or jumps converge only
//! algebraically under Gauss-Hermite (the rule for `E|g|` is off by ~1e-3 at
//! order 256), so those are integrated panel-by-panel with Gauss-Legendre
//! rules whose panel edges include every breakpoint. Nodes come from the
//! Golub-Welsch eigenvalue method and rules are cached per order.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

/// Points per Gauss-Legendre panel.
const PANEL_POINTS: usize = 16;

/// Half-width of the truncated real line for panel rules. The normal tail
/// beyond 13 carries mass below 1e-38.
const PANEL_HALF_RANGE: f64 = 13.0;

/// Nodes and weights with `E h(g) ≈ Σ wᵢ h(xᵢ)`.
#[derive(Debug, Clone)]
pub struct GaussianRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussianRule {
    /// Gauss-Hermite rule with `order` nodes for the standard normal weight.
    pub fn hermite(order: usize) -> Self {
        let (nodes, weights) = hermite_cached(order);
        GaussianRule {
            nodes: nodes.to_vec(),
            weights: weights.to_vec(),
        }
    }

    /// Composite Gauss-Legendre rule over `[-13, 13]` (extended to cover the
    /// breakpoints) with about `order` nodes, split at every breakpoint.
    pub fn panels(order: usize, breakpoints: &[f64]) -> Self {
        let (gl_nodes, gl_weights) = legendre_cached(PANEL_POINTS);
        let mut lo = -PANEL_HALF_RANGE;
        let mut hi = PANEL_HALF_RANGE;
        for &b in breakpoints {
            lo = lo.min(b - 1.0);
            hi = hi.max(b + 1.0);
        }
        let count = (order / PANEL_POINTS).max(1);
        let width = (hi - lo) / count as f64;
        let mut edges: Vec<f64> = (0..=count).map(|i| lo + width * i as f64).collect();
        edges[count] = hi;
        edges.extend(breakpoints.iter().copied().filter(|b| *b > lo && *b < hi));
        edges.sort_by(f64::total_cmp);
        edges.dedup();

        let norm = 1.0 / (2.0 * PI).sqrt();
        let mut nodes = Vec::with_capacity(edges.len() * PANEL_POINTS);
        let mut weights = Vec::with_capacity(edges.len() * PANEL_POINTS);
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (u, w) in gl_nodes.iter().zip(gl_weights.iter()) {
                let x = mid + half * u;
                nodes.push(x);
                weights.push(w * half * norm * (-0.5 * x * x).exp());
            }
        }
        GaussianRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

type Cache = Mutex<HashMap<usize, (Arc<[f64]>, Arc<[f64]>)>>;

fn hermite_cached(order: usize) -> (Arc<[f64]>, Arc<[f64]>) {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    cached(&CACHE, order, || {
        // Monic probabilists' Hermite: He_{k+1} = x He_k - k He_{k-1}.
        let off: Vec<f64> = (1..order).map(|k| (k as f64).sqrt()).collect();
        let (nodes, _) = golub_welsch(order, &off, 1.0);
        refine_hermite(order, nodes)
    })
}

fn legendre_cached(order: usize) -> (Arc<[f64]>, Arc<[f64]>) {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    cached(&CACHE, order, || {
        let off: Vec<f64> = (1..order)
            .map(|k| {
                let k = k as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            })
            .collect();
        golub_welsch(order, &off, 2.0)
    })
}

fn cached(
    cache: &'static OnceLock<Cache>,
    order: usize,
    build: impl FnOnce() -> (Vec<f64>, Vec<f64>),
) -> (Arc<[f64]>, Arc<[f64]>) {
    let cache = cache.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().expect("quadrature cache poisoned").get(&order) {
        return hit.clone();
    }
    let (nodes, weights) = build();
    let entry: (Arc<[f64]>, Arc<[f64]>) = (nodes.into(), weights.into());
    cache
        .lock()
        .expect("quadrature cache poisoned")
        .entry(order)
        .or_insert(entry)
        .clone()
}

/// Nodes are the eigenvalues of the symmetric Jacobi matrix with zero
/// diagonal and the given off-diagonal; weights are `mass · v₀²`.
fn golub_welsch(order: usize, off_diagonal: &[f64], mass: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for (i, &b) in off_diagonal.iter().enumerate() {
        jacobi[(i, i + 1)] = b;
        jacobi[(i + 1, i)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], mass * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize: the exact rule is symmetric about zero.
    let n = pairs.len();
    for i in 0..n / 2 {
        let x = 0.5 * (pairs[n - 1 - i].0 - pairs[i].0);
        let w = 0.5 * (pairs[n - 1 - i].1 + pairs[i].1);
        pairs[i] = (-x, w);
        pairs[n - 1 - i] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

/// Polishes Golub-Welsch nodes with Newton steps and recomputes every weight
/// from the Christoffel function `1/Σ_k p_k(x)²` of the orthonormal
/// probabilists' Hermite polynomials. Eigenvector weights are only
/// accurate in absolute terms, which is useless for the far nodes where
/// integrands like `exp(c·x²)` amplify relative error.
fn refine_hermite(order: usize, mut nodes: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut weights = Vec::with_capacity(order);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let eval = hermite_orthonormal(order, *x);
            if eval.derivative != 0.0 {
                *x -= eval.value / eval.derivative;
            }
        }
        let eval = hermite_orthonormal(order, *x);
        weights.push((-eval.log_sum_sq).exp());
    }
    (nodes, weights)
}

struct HermiteEval {
    /// `p_n(x)` and `p_n'(x)` up to a common positive factor.
    value: f64,
    derivative: f64,
    /// `ln Σ_{k<n} p_k(x)²`.
    log_sum_sq: f64,
}

fn hermite_orthonormal(order: usize, x: f64) -> HermiteEval {
    // p_0 = 1, p_{k+1} = (x p_k − √k p_{k−1}) / √(k+1); p_n' = √n p_{n−1}.
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut log_scale = 0.0;
    let mut sum_sq = 0.0;
    for k in 0..order {
        sum_sq += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > 1e100 {
            prev *= 1e-100;
            cur *= 1e-100;
            sum_sq *= 1e-200;
            log_scale += 100.0 * std::f64::consts::LN_10;
        }
    }
    HermiteEval {
        value: cur,
        derivative: (order as f64).sqrt() * prev,
        log_sum_sq: sum_sq.ln() + 2.0 * log_scale,
    }
}
