//! Monte Carlo estimators of Gaussian width, Gaussian complexity and local
//! Gaussian width for constraint sets, their translates and their descent
//! cones, plus the empirical restricted-singular-value check for the
//! extended operator `[Φ, √m·I]`.
//!
//! Every estimator draws `g ~ N(0, I)` once per trial from its own random
//! stream (stream id = trial index), so estimates are reproducible, can be
//! computed in parallel, and two estimators called with the same seed and
//! dimension see the same Gaussian vectors.

use std::fmt;

use ndarray::Array1;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::rng::{derive_seed, gaussian_vec, stream, stream_rng};
use crate::sets::ConstraintSet;
use crate::solver::{dot, matvec};

pub const DEFAULT_TRIALS: usize = 2000;

/// Geometric bisection steps on the ℓ2 multiplier.
const MULTIPLIER_STEPS: usize = 64;
/// Halvings allowed while bracketing the multiplier from below.
const MAX_BRACKET_HALVINGS: usize = 400;
/// Directions are taken from `(T − anchor)/ε` with `ε` this fraction of the
/// smallest nonzero anchor magnitude, which reproduces the descent cone
/// exactly inside the unit ball for polyhedral sets.
const CONE_SCALE: f64 = 1e-6;
/// Step and membership tolerance for checking cone directions.
pub const CONE_CHECK_STEP: f64 = 1e-6;
pub const CONE_CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Width,
    Complexity,
    LocalWidth,
    ConeWidth,
    ConeComplexity,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Quantity::Width => "width",
            Quantity::Complexity => "complexity",
            Quantity::LocalWidth => "local_width",
            Quantity::ConeWidth => "cone_width",
            Quantity::ConeComplexity => "cone_complexity",
        };
        f.write_str(name)
    }
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√trials`.
    pub std_error: f64,
    pub trials: usize,
    pub t: Option<f64>,
    pub quantity: Quantity,
}

impl WidthEstimate {
    pub fn from_samples(samples: &[f64], quantity: Quantity, t: Option<f64>) -> Self {
        let trials = samples.len();
        let mean = samples.iter().sum::<f64>() / trials as f64;
        let std_error = if trials > 1 {
            let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
            (var / trials as f64).sqrt()
        } else {
            0.0
        };
        WidthEstimate {
            mean,
            std_error,
            trials,
            t,
            quantity,
        }
    }
}

/// Unit directions of the descent cone `D(T, base_point)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSample {
    pub base_point: Array1<f64>,
    pub directions: Vec<Array1<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsvReport {
    /// Smallest `‖Φa + √m·b‖₂` over the sampled unit directions `(a, b)`.
    pub empirical_min: f64,
    pub sqrt_m: f64,
    /// Gaussian complexity of the sampled directions, a lower estimate of
    /// `γ(D ∩ S^{n+m−1})`.
    pub gamma: WidthEstimate,
    /// `(√m − empirical_min)/γ̂`.
    pub implied_constant: f64,
}

/// `E‖g‖₂ = √2·Γ((d+1)/2)/Γ(d/2)` for `g ~ N(0, I_d)`.
pub fn expected_gaussian_norm(dim: usize) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let d = dim as f64;
    2f64.sqrt() * (ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp()
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    Ok(())
}

fn sample_draws<F>(dim: usize, trials: usize, seed: u64, per_draw: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let g = gaussian_vec(&mut stream_rng(seed, i as u64), dim);
            per_draw(&g)
        })
        .collect()
}

/// `E sup_{x∈S} ⟨g, x⟩` with the supremum in closed form per set kind.
pub fn gaussian_width_mc(set: &ConstraintSet, trials: usize, seed: u64) -> Result<WidthEstimate> {
    check_trials(trials)?;
    if !set.is_bounded() {
        return Err(Error::UnboundedWidth(set.to_string()));
    }
    let samples = sample_draws(set.dim(), trials, seed, |g| {
        set.support_value(g).expect("bounded set")
    });
    Ok(WidthEstimate::from_samples(&samples, Quantity::Width, None))
}

/// `E sup_{x∈S} |⟨g, x⟩| = E max(h_S(g), h_S(−g))`.
pub fn gaussian_complexity_mc(set: &ConstraintSet, trials: usize, seed: u64) -> Result<WidthEstimate> {
    check_trials(trials)?;
    if !set.is_bounded() {
        return Err(Error::UnboundedWidth(set.to_string()));
    }
    let samples = sample_draws(set.dim(), trials, seed, |g| {
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let up = set.support_value(g).expect("bounded set");
        let down = set.support_value(&neg).expect("bounded set");
        up.max(down)
    });
    Ok(WidthEstimate::from_samples(&samples, Quantity::Complexity, None))
}

/// `E sup_{x ∈ S ∩ tB₂} ⟨g, x⟩` for a set star-shaped about the origin.
pub fn local_gaussian_width_mc(
    set: &ConstraintSet,
    t: f64,
    trials: usize,
    seed: u64,
) -> Result<WidthEstimate> {
    check_trials(trials)?;
    check_t(t)?;
    if !set.is_star_shaped() {
        return Err(Error::InvalidParameter(format!(
            "{set} is not star-shaped about the origin"
        )));
    }
    let anchor = vec![0.0; set.dim()];
    let view = Translated::new(set, &anchor, 1.0);
    let samples = sample_draws(set.dim(), trials, seed, |g| ball_restricted_sup(g, t, &view).0);
    Ok(WidthEstimate::from_samples(&samples, Quantity::LocalWidth, Some(t)))
}

/// Local width of the translate `K = T − anchor` with `T = S_x × S_v`.
pub fn shifted_local_width_mc(
    set_x: &ConstraintSet,
    set_v: &ConstraintSet,
    anchor: (&Array1<f64>, &Array1<f64>),
    t: f64,
    trials: usize,
    seed: u64,
) -> Result<WidthEstimate> {
    check_trials(trials)?;
    check_t(t)?;
    let (set, base) = anchored_product(set_x, set_v, anchor)?;
    let view = Translated::new(&set, &base, 1.0);
    let samples = sample_draws(set.dim(), trials, seed, |g| ball_restricted_sup(g, t, &view).0);
    Ok(WidthEstimate::from_samples(&samples, Quantity::LocalWidth, Some(t)))
}

/// `ω(D ∩ B₂)` for the descent cone `D = D(S_x × S_v, anchor)`.
///
/// Per draw the supremum of `⟨g, d⟩` over unit-ball cone directions is found
/// from the ℓ2-penalized problem `max ⟨g, d⟩ − (ν/2)‖d‖²`, whose maximizer
/// is a projection onto the set, with `ν` bisected until the ball
/// constraint is tight.
pub fn descent_cone_width_mc(
    set_x: &ConstraintSet,
    set_v: &ConstraintSet,
    anchor: (&Array1<f64>, &Array1<f64>),
    trials: usize,
    seed: u64,
) -> Result<WidthEstimate> {
    check_trials(trials)?;
    let (set, base) = anchored_product(set_x, set_v, anchor)?;
    let view = Translated::new(&set, &base, cone_scale(&base));
    let samples = sample_draws(set.dim(), trials, seed, |g| ball_restricted_sup(g, 1.0, &view).0);
    Ok(WidthEstimate::from_samples(&samples, Quantity::ConeWidth, None))
}

/// `γ(D ∩ B₂)` for the descent cone, `E max(sup⟨g,d⟩, sup⟨−g,d⟩)`.
pub fn descent_cone_complexity_mc(
    set_x: &ConstraintSet,
    set_v: &ConstraintSet,
    anchor: (&Array1<f64>, &Array1<f64>),
    trials: usize,
    seed: u64,
) -> Result<WidthEstimate> {
    check_trials(trials)?;
    let (set, base) = anchored_product(set_x, set_v, anchor)?;
    let view = Translated::new(&set, &base, cone_scale(&base));
    let samples = sample_draws(set.dim(), trials, seed, |g| {
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        ball_restricted_sup(g, 1.0, &view)
            .0
            .max(ball_restricted_sup(&neg, 1.0, &view).0)
    });
    Ok(WidthEstimate::from_samples(&samples, Quantity::ConeComplexity, None))
}

/// Draws `count` Gaussian vectors and keeps, for each, the unit cone
/// direction best aligned with it. Draws lying in the polar cone yield no
/// direction and are skipped.
pub fn sample_descent_cone(
    set_x: &ConstraintSet,
    set_v: &ConstraintSet,
    anchor: (&Array1<f64>, &Array1<f64>),
    count: usize,
    seed: u64,
) -> Result<ConeSample> {
    let (set, base) = anchored_product(set_x, set_v, anchor)?;
    let view = Translated::new(&set, &base, cone_scale(&base));
    let directions: Vec<Array1<f64>> = (0..count)
        .into_par_iter()
        .filter_map(|i| {
            let g = gaussian_vec(&mut stream_rng(seed, i as u64), set.dim());
            let (_, mut d) = ball_restricted_sup(&g, 1.0, &view);
            let norm = dot(&d, &d).sqrt();
            if norm < 1e-9 {
                return None;
            }
            d.iter_mut().for_each(|v| *v /= norm);
            Some(Array1::from(d))
        })
        .collect();
    Ok(ConeSample {
        base_point: Array1::from(base),
        directions,
    })
}

/// Evaluates `‖Φa + √m·b‖₂` over the cone directions and estimates the
/// Gaussian complexity of the sampled directions.
pub fn rsv_check(inst: &ProblemInstance, cone: &ConeSample, trials: usize) -> Result<RsvReport> {
    check_trials(trials)?;
    if cone.directions.is_empty() {
        return Err(Error::InvalidInput("cone sample has no directions".into()));
    }
    let (m, n) = inst.phi.dim();
    let sqrt_m = inst.sqrt_m();
    for d in &cone.directions {
        if d.len() != n + m {
            return Err(Error::shape(n + m, d.len()));
        }
        let norm = d.dot(d).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("direction has norm {norm}, expected 1")));
        }
    }
    let phi = inst.phi.view();
    let empirical_min = cone
        .directions
        .par_iter()
        .map(|d| {
            let d = d.as_slice().expect("contiguous direction");
            let mut image = vec![0.0; m];
            matvec(phi, &d[..n], &mut image);
            image
                .iter()
                .zip(&d[n..])
                .map(|(a, b)| (a + sqrt_m * b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .reduce(|| f64::INFINITY, f64::min);

    let seed = derive_seed(inst.seed, &[stream::RSV]);
    let dirs: Vec<&[f64]> = cone
        .directions
        .iter()
        .map(|d| d.as_slice().expect("contiguous direction"))
        .collect();
    let samples = sample_draws(n + m, trials, seed, |g| {
        dirs.iter().fold(0.0f64, |best, d| best.max(dot(g, d).abs()))
    });
    let gamma = WidthEstimate::from_samples(&samples, Quantity::ConeComplexity, None);
    Ok(RsvReport {
        empirical_min,
        sqrt_m,
        gamma,
        implied_constant: (sqrt_m - empirical_min) / gamma.mean,
    })
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    Ok(())
}

fn anchored_product(
    set_x: &ConstraintSet,
    set_v: &ConstraintSet,
    anchor: (&Array1<f64>, &Array1<f64>),
) -> Result<(ConstraintSet, Vec<f64>)> {
    set_x.check_dim(anchor.0.len())?;
    set_v.check_dim(anchor.1.len())?;
    let set = ConstraintSet::product(set_x.clone(), set_v.clone());
    let base: Vec<f64> = anchor.0.iter().chain(anchor.1.iter()).copied().collect();
    if !set.contains(&Array1::from(base.clone()), CONE_CHECK_TOL)? {
        return Err(Error::InvalidAnchor(format!("anchor lies outside {set}")));
    }
    Ok((set, base))
}

fn cone_scale(base: &[f64]) -> f64 {
    let smallest = base
        .iter()
        .map(|v| v.abs())
        .filter(|v| *v > 0.0)
        .fold(1.0f64, f64::min);
    CONE_SCALE * smallest
}

/// The set `(S − anchor)/scale`, accessed through projections onto `S`.
struct Translated<'a> {
    set: &'a ConstraintSet,
    anchor: &'a [f64],
    scale: f64,
}

impl<'a> Translated<'a> {
    fn new(set: &'a ConstraintSet, anchor: &'a [f64], scale: f64) -> Self {
        Translated { set, anchor, scale }
    }

    fn project(&self, q: &[f64], out: &mut [f64]) {
        let lifted: Vec<f64> = self
            .anchor
            .iter()
            .zip(q)
            .map(|(a, v)| a + self.scale * v)
            .collect();
        self.set.project_into(&lifted, out);
        for (o, a) in out.iter_mut().zip(self.anchor) {
            *o = (*o - a) / self.scale;
        }
    }

    fn support_point(&self, g: &[f64]) -> Option<(f64, Vec<f64>)> {
        let value = self.set.support_value(g)?;
        let mut point = self.set.support_point(g)?;
        for (p, a) in point.iter_mut().zip(self.anchor) {
            *p = (*p - a) / self.scale;
        }
        let shift: f64 = dot(g, self.anchor);
        Some(((value - shift) / self.scale, point))
    }
}

/// `sup ⟨g, x⟩` over `K ∩ tB₂` and a maximizer, for `K` star-shaped about
/// the origin.
fn ball_restricted_sup(g: &[f64], t: f64, set: &Translated<'_>) -> (f64, Vec<f64>) {
    let dim = g.len();
    let g_norm = dot(g, g).sqrt();
    if g_norm == 0.0 {
        return (0.0, vec![0.0; dim]);
    }
    let support = set.support_point(g);
    if let Some((value, point)) = &support {
        if dot(point, point).sqrt() <= t {
            return (*value, point.clone());
        }
    }

    let mut x = vec![0.0; dim];
    let mut scaled = vec![0.0; dim];
    let mut response = |nu: f64, x: &mut [f64]| -> f64 {
        for (s, v) in scaled.iter_mut().zip(g) {
            *s = v / nu;
        }
        set.project(&scaled, x);
        dot(x, x).sqrt()
    };

    // At ν = ‖g‖/t the scaled draw already has norm t.
    let mut hi = g_norm / t;
    response(hi, &mut x);
    let gap: f64 = x
        .iter()
        .zip(g)
        .map(|(a, b)| (a - b / hi).powi(2))
        .sum::<f64>()
        .sqrt();
    if gap <= 1e-9 * t {
        let point: Vec<f64> = g.iter().map(|v| v * t / g_norm).collect();
        return (t * g_norm, point);
    }

    let mut lo = hi;
    let mut bracketed = false;
    for _ in 0..MAX_BRACKET_HALVINGS {
        lo *= 0.5;
        if response(lo, &mut x) > t {
            bracketed = true;
            break;
        }
    }
    if bracketed {
        for _ in 0..MULTIPLIER_STEPS {
            let mid = (lo * hi).sqrt();
            if response(mid, &mut x) <= t {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    response(hi, &mut x);
    let mut value = dot(g, &x);
    if let Some((cap, _)) = support {
        value = value.min(cap);
    }
    (value, x)
}
