//! Link functions `f` of the single-index model and their nonlinearity
//! parameters: the mean term `μ = E f(g)g`, the variance term
//! `σ² = E (f(g) − μg)²` and an estimate of the sub-Gaussian (ψ₂) norm of
//! `f(g)`, all for a standard normal `g`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::quadrature::GaussianRule;

/// Quadrature order used when callers have no reason to pick another.
pub const DEFAULT_ORDER: usize = 256;

/// Smallest order accepted by [`link_params`].
pub const MIN_ORDER: usize = 32;

const PSI_BISECTION_STEPS: usize = 60;
const PSI_LOWER: f64 = 1e-6;
const PSI_UPPER: f64 = 1e6;

/// Piecewise-linear link through a list of breakpoints, held constant
/// beyond the first and last breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    inputs: Vec<f64>,
    outputs: Vec<f64>,
    source: Option<PathBuf>,
}

impl LinkTable {
    pub fn new(inputs: Vec<f64>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::InvalidLink(format!(
                "table has {} inputs but {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        if inputs.len() < 2 {
            return Err(Error::InvalidLink(
                "table needs at least two breakpoints".into(),
            ));
        }
        if inputs.iter().chain(outputs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidLink("table contains non-finite values".into()));
        }
        if inputs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidLink(
                "table inputs must be strictly increasing".into(),
            ));
        }
        Ok(LinkTable {
            inputs,
            outputs,
            source: None,
        })
    }

    /// Reads a two-column whitespace-separated file. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::InvalidLink(format!(
                    "{}:{}: expected two columns",
                    path.display(),
                    lineno + 1
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::InvalidLink(format!("{}:{}: bad number {s:?}", path.display(), lineno + 1))
                })
            };
            inputs.push(parse(cols[0])?);
            outputs.push(parse(cols[1])?);
        }
        let mut table = LinkTable::new(inputs, outputs)?;
        table.source = Some(path.to_path_buf());
        Ok(table)
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    fn eval(&self, x: f64) -> f64 {
        let last = self.inputs.len() - 1;
        if x <= self.inputs[0] {
            return self.outputs[0];
        }
        if x >= self.inputs[last] {
            return self.outputs[last];
        }
        // First breakpoint strictly greater than x.
        let hi = self.inputs.partition_point(|&b| b <= x);
        let lo = hi - 1;
        let (x0, x1) = (self.inputs[lo], self.inputs[hi]);
        let (y0, y1) = (self.outputs[lo], self.outputs[hi]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// The non-linear map applied to each linear measurement.
#[derive(Debug, Clone, PartialEq)]
pub enum LinkFunction {
    Identity,
    /// `sign(0) = 0`.
    Sign,
    /// Saturation at `±tau`.
    Clip { tau: f64 },
    /// `tanh(beta·x)`.
    Tanh { beta: f64 },
    /// `x³`. Grows faster than linearly, so it has no finite ψ₂ norm.
    Cubic,
    Table(LinkTable),
}

impl LinkFunction {
    pub fn clip(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidLink(format!("clip level must be positive, got {tau}")));
        }
        Ok(LinkFunction::Clip { tau })
    }

    pub fn tanh(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidLink(format!("tanh slope must be positive, got {beta}")));
        }
        Ok(LinkFunction::Tanh { beta })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            LinkFunction::Identity => x,
            LinkFunction::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LinkFunction::Clip { tau } => x.clamp(-tau, *tau),
            LinkFunction::Tanh { beta } => (beta * x).tanh(),
            LinkFunction::Cubic => x * x * x,
            LinkFunction::Table(table) => table.eval(x),
        }
    }

    /// Points where the link is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            LinkFunction::Sign => vec![0.0],
            LinkFunction::Clip { tau } => vec![-tau, *tau],
            LinkFunction::Table(table) => table.inputs.clone(),
            _ => Vec::new(),
        }
    }

    /// True for links with `f(−x) = −f(x)`.
    pub fn is_odd(&self) -> bool {
        !matches!(self, LinkFunction::Table(_))
    }

    /// Quadrature rule suited to this link at the given order.
    ///
    /// `tanh(βx)` has poles at `±iπ/(2β)`, close to the real line for large
    /// `β`, which stalls Gauss-Hermite. It gets a panel rule graded towards
    /// the origin instead, with breakpoints `0, ±d, ±2d, ±4d, …` for the pole
    /// distance `d`, so every panel stays well inside its region of
    /// analyticity.
    pub fn rule(&self, order: usize) -> GaussianRule {
        if let LinkFunction::Tanh { beta } = self {
            let d = std::f64::consts::FRAC_PI_2 / beta;
            let mut breaks = vec![0.0];
            let mut edge = d;
            while edge < 13.0 {
                breaks.extend([-edge, edge]);
                edge *= 2.0;
            }
            return GaussianRule::panels(order, &breaks);
        }
        let kinks = self.kinks();
        if kinks.is_empty() {
            GaussianRule::hermite(order)
        } else {
            GaussianRule::panels(order, &kinks)
        }
    }
}

impl fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkFunction::Identity => write!(f, "identity"),
            LinkFunction::Sign => write!(f, "sign"),
            LinkFunction::Clip { tau } => write!(f, "clip:{tau}"),
            LinkFunction::Tanh { beta } => write!(f, "tanh:{beta}"),
            LinkFunction::Cubic => write!(f, "cubic"),
            LinkFunction::Table(table) => match &table.source {
                Some(path) => write!(f, "table:{}", path.display()),
                None => write!(f, "table:<inline>"),
            },
        }
    }
}

impl FromStr for LinkFunction {
    type Err = Error;

    /// `identity`, `sign`, `clip:<tau>`, `tanh:<beta>`, `cubic`, `table:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::InvalidLink(format!("{s:?} needs a parameter")))?;
            a.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidLink(format!("bad parameter in {s:?}")))
        };
        match (head, arg) {
            ("identity", None) => Ok(LinkFunction::Identity),
            ("sign", None) => Ok(LinkFunction::Sign),
            ("cubic", None) => Ok(LinkFunction::Cubic),
            ("clip", a) => LinkFunction::clip(number(a)?),
            ("tanh", a) => LinkFunction::tanh(number(a)?),
            ("table", Some(path)) => Ok(LinkFunction::Table(LinkTable::from_file(Path::new(path))?)),
            _ => Err(Error::InvalidLink(format!("unknown link {s:?}"))),
        }
    }
}

/// Mean term, variance term and ψ₂-norm estimate of a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearityParams {
    pub mu: f64,
    pub sigma: f64,
    pub psi_hat: f64,
    pub quadrature_order: usize,
}

/// Elementwise `f(uᵢ)`.
pub fn apply_link(link: &LinkFunction, u: &Array1<f64>) -> Array1<f64> {
    u.mapv(|x| link.eval(x))
}

/// `(μ, σ)` by quadrature; no ψ estimate. Works for every link, including
/// ones without a finite ψ₂ norm.
pub fn mean_variance(link: &LinkFunction, order: usize) -> Result<(f64, f64)> {
    check_order(order)?;
    let rule = link.rule(order);
    let mu = rule.expect(|x| link.eval(x) * x);
    let var = rule.expect(|x| {
        let d = link.eval(x) - mu * x;
        d * d
    });
    if !mu.is_finite() || !var.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "quadrature for {link} produced mu={mu}, sigma²={var}"
        )));
    }
    Ok((mu, var.max(0.0).sqrt()))
}

pub fn link_params(link: &LinkFunction, order: usize) -> Result<NonlinearityParams> {
    let (mu, sigma) = mean_variance(link, order)?;
    let psi_hat = estimate_psi(link, order)?;
    Ok(NonlinearityParams {
        mu,
        sigma,
        psi_hat,
        quadrature_order: order,
    })
}

/// Smallest `t` in `[1e-6, 1e6]` with `E exp((f(g) − E f(g))²/t²) ≤ 2`,
/// located by geometric bisection.
///
/// The Orlicz expectation is treated as infinite at `t` whenever the
/// integrand `exp((f(x) − c)²/t² − x²/2)` fails to decay along
/// `|x| = 2³, …, 2²⁰`; a quadrature rule alone would report a finite value
/// for any link.
pub fn estimate_psi(link: &LinkFunction, order: usize) -> Result<f64> {
    check_order(order)?;
    let rule = link.rule(order);
    let center = if link.is_odd() {
        0.0
    } else {
        rule.expect(|x| link.eval(x))
    };
    if !center.is_finite() {
        return Err(Error::NumericalFailure(format!("mean of {link} is not finite")));
    }
    let orlicz = |t: f64| -> f64 {
        if !tail_decays(link, center, t) {
            return f64::INFINITY;
        }
        let v = rule.expect(|x| {
            let z = (link.eval(x) - center) / t;
            (z * z).exp()
        });
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if orlicz(PSI_UPPER) > 2.0 {
        return Err(Error::NotSubGaussian(format!(
            "E exp(f(g)²/t²) exceeds 2 for every t ≤ {PSI_UPPER:e} with f = {link}"
        )));
    }
    if orlicz(PSI_LOWER) <= 2.0 {
        return Ok(PSI_LOWER);
    }
    let (mut lo, mut hi) = (PSI_LOWER, PSI_UPPER);
    for _ in 0..PSI_BISECTION_STEPS {
        let mid = (lo * hi).sqrt();
        if orlicz(mid) <= 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn tail_decays(link: &LinkFunction, center: f64, t: f64) -> bool {
    let exponent = |x: f64| {
        let z = (link.eval(x) - center) / t;
        z * z - 0.5 * x * x
    };
    [1.0, -1.0].iter().all(|&side| {
        let far = side * 2f64.powi(20);
        let near = side * 2f64.powi(19);
        let (e_far, e_near) = (exponent(far), exponent(near));
        e_far.is_finite() && e_far < 0.0 && e_far < e_near
    })
}

fn check_order(order: usize) -> Result<()> {
    if order < MIN_ORDER {
        return Err(Error::InvalidParameter(format!(
            "quadrature order must be at least {MIN_ORDER}, got {order}"
        )));
    }
    Ok(())
}
