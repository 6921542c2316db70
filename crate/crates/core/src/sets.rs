//! Structure sets and exact Euclidean projections onto them.
//!
//! Every set knows its ambient dimension. Balls are centered at the origin;
//! shifted sets are handled by callers translating points.

use std::fmt;
use std::path::Path;

use ndarray::Array1;

use crate::error::{Error, Result};

/// Relative slack under which a point is treated as already inside a ball.
/// Keeps projection idempotent under rounding of the ball norm.
const BALL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSet {
    L1Ball { dim: usize, radius: f64 },
    L2Ball { dim: usize, radius: f64 },
    /// Vectors with at most `k` nonzero entries.
    TopK { dim: usize, k: usize },
    FullSpace { dim: usize },
    Singleton { point: Vec<f64> },
    /// Cartesian product; the first factor owns the leading coordinates.
    Product(Box<ConstraintSet>, Box<ConstraintSet>),
}

impl ConstraintSet {
    pub fn l1_ball(dim: usize, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(ConstraintSet::L1Ball { dim, radius })
    }

    pub fn l2_ball(dim: usize, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(ConstraintSet::L2Ball { dim, radius })
    }

    pub fn top_k(dim: usize, k: usize) -> Result<Self> {
        if k == 0 || k > dim {
            return Err(Error::InvalidSet(format!(
                "top_k needs 1 <= k <= {dim}, got k = {k}"
            )));
        }
        Ok(ConstraintSet::TopK { dim, k })
    }

    pub fn full(dim: usize) -> Self {
        ConstraintSet::FullSpace { dim }
    }

    pub fn singleton(point: Vec<f64>) -> Result<Self> {
        if point.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSet("singleton point is not finite".into()));
        }
        Ok(ConstraintSet::Singleton { point })
    }

    pub fn origin(dim: usize) -> Self {
        ConstraintSet::Singleton {
            point: vec![0.0; dim],
        }
    }

    pub fn product(first: ConstraintSet, second: ConstraintSet) -> Self {
        ConstraintSet::Product(Box::new(first), Box::new(second))
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstraintSet::L1Ball { dim, .. }
            | ConstraintSet::L2Ball { dim, .. }
            | ConstraintSet::TopK { dim, .. }
            | ConstraintSet::FullSpace { dim } => *dim,
            ConstraintSet::Singleton { point } => point.len(),
            ConstraintSet::Product(a, b) => a.dim() + b.dim(),
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            ConstraintSet::TopK { dim, k } => k == dim,
            ConstraintSet::Product(a, b) => a.is_convex() && b.is_convex(),
            _ => true,
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            ConstraintSet::TopK { .. } | ConstraintSet::FullSpace { .. } => false,
            ConstraintSet::Product(a, b) => a.is_bounded() && b.is_bounded(),
            _ => true,
        }
    }

    /// Star-shaped about the origin: every kind except a singleton away
    /// from the origin.
    pub fn is_star_shaped(&self) -> bool {
        match self {
            ConstraintSet::Singleton { point } => point.iter().all(|v| *v == 0.0),
            ConstraintSet::Product(a, b) => a.is_star_shaped() && b.is_star_shaped(),
            _ => true,
        }
    }

    /// Parses the set grammar: `l1:<r>`, `l2:<r>`, `topk:<k>`, `full`,
    /// `point:<path>` (or `point:0` for the origin) and `prod(<set>,<set>)`.
    ///
    /// `dims` lists the ambient dimension of each leaf in reading order, so a
    /// product of two leaves takes two entries.
    pub fn parse(spec: &str, dims: &[usize]) -> Result<Self> {
        let mut dims = dims.iter().copied();
        let set = parse_inner(spec.trim(), &mut dims)?;
        if dims.next().is_some() {
            return Err(Error::InvalidSet(format!(
                "more dimensions supplied than leaves in {spec:?}"
            )));
        }
        Ok(set)
    }

    /// Number of leaf sets (dimensions `parse` expects).
    pub fn leaf_count(spec: &str) -> usize {
        match split_product(spec.trim()) {
            Some((a, b)) => Self::leaf_count(a) + Self::leaf_count(b),
            None => 1,
        }
    }

    pub fn project(&self, p: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_dim(p.len())?;
        let src = p.as_slice().map(|s| s.to_vec()).unwrap_or_else(|| p.to_vec());
        let mut out = vec![0.0; src.len()];
        self.project_into(&src, &mut out);
        Ok(Array1::from(out))
    }

    /// `true` iff the Euclidean distance from `p` to the set is at most `tol`.
    pub fn contains(&self, p: &Array1<f64>, tol: f64) -> Result<bool> {
        if !(tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be >= 0, got {tol}")));
        }
        let q = self.project(p)?;
        let dist = p
            .iter()
            .zip(q.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        Ok(dist <= tol)
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::shape(self.dim(), len));
        }
        Ok(())
    }

    /// Projection on raw slices. `p` and `out` must have the set's dimension.
    pub fn project_into(&self, p: &[f64], out: &mut [f64]) {
        debug_assert_eq!(p.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        match self {
            ConstraintSet::L1Ball { radius, .. } => project_l1(p, *radius, out),
            ConstraintSet::L2Ball { radius, .. } => {
                let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm <= radius * (1.0 + BALL_SLACK) {
                    out.copy_from_slice(p);
                } else {
                    let scale = radius / norm;
                    for (o, v) in out.iter_mut().zip(p) {
                        *o = v * scale;
                    }
                }
            }
            ConstraintSet::TopK { k, .. } => project_top_k(p, *k, out),
            ConstraintSet::FullSpace { .. } => out.copy_from_slice(p),
            ConstraintSet::Singleton { point } => out.copy_from_slice(point),
            ConstraintSet::Product(a, b) => {
                let split = a.dim();
                let (pa, pb) = p.split_at(split);
                let (oa, ob) = out.split_at_mut(split);
                a.project_into(pa, oa);
                b.project_into(pb, ob);
            }
        }
    }

    /// `sup_{x∈S} ⟨g, x⟩`, or `None` for unbounded sets.
    pub fn support_value(&self, g: &[f64]) -> Option<f64> {
        match self {
            ConstraintSet::L1Ball { radius, .. } => {
                Some(radius * g.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            }
            ConstraintSet::L2Ball { radius, .. } => {
                Some(radius * g.iter().map(|v| v * v).sum::<f64>().sqrt())
            }
            ConstraintSet::Singleton { point } => {
                Some(point.iter().zip(g).map(|(a, b)| a * b).sum())
            }
            ConstraintSet::Product(a, b) => {
                let (ga, gb) = g.split_at(a.dim());
                Some(a.support_value(ga)? + b.support_value(gb)?)
            }
            ConstraintSet::TopK { .. } | ConstraintSet::FullSpace { .. } => None,
        }
    }

    /// A maximizer of `⟨g, x⟩` over the set (lowest index wins on ties), or
    /// `None` for unbounded sets.
    pub fn support_point(&self, g: &[f64]) -> Option<Vec<f64>> {
        match self {
            ConstraintSet::L1Ball { radius, dim } => {
                let mut x = vec![0.0; *dim];
                let mut best = 0usize;
                for (i, v) in g.iter().enumerate() {
                    if v.abs() > g[best].abs() {
                        best = i;
                    }
                }
                if !g.is_empty() && g[best] != 0.0 {
                    x[best] = radius * g[best].signum();
                }
                Some(x)
            }
            ConstraintSet::L2Ball { radius, .. } => {
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    Some(vec![0.0; g.len()])
                } else {
                    Some(g.iter().map(|v| radius * v / norm).collect())
                }
            }
            ConstraintSet::Singleton { point } => Some(point.clone()),
            ConstraintSet::Product(a, b) => {
                let (ga, gb) = g.split_at(a.dim());
                let mut x = a.support_point(ga)?;
                x.extend(b.support_point(gb)?);
                Some(x)
            }
            ConstraintSet::TopK { .. } | ConstraintSet::FullSpace { .. } => None,
        }
    }
}

impl fmt::Display for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintSet::L1Ball { radius, .. } => write!(f, "l1:{radius}"),
            ConstraintSet::L2Ball { radius, .. } => write!(f, "l2:{radius}"),
            ConstraintSet::TopK { k, .. } => write!(f, "topk:{k}"),
            ConstraintSet::FullSpace { .. } => write!(f, "full"),
            ConstraintSet::Singleton { point } => {
                if point.iter().all(|v| *v == 0.0) {
                    write!(f, "point:0")
                } else {
                    write!(f, "point:<{}-vector>", point.len())
                }
            }
            ConstraintSet::Product(a, b) => write!(f, "prod({a},{b})"),
        }
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidSet(format!("ball radius must be positive, got {radius}")));
    }
    Ok(())
}

/// Splits `prod(A,B)` at its top-level comma.
fn split_product(spec: &str) -> Option<(&str, &str)> {
    let inner = spec.strip_prefix("prod(")?.strip_suffix(')')?;
    let mut depth = 0i32;
    for (i, c) in inner.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => return Some((inner[..i].trim(), inner[i + 1..].trim())),
            _ => {}
        }
    }
    None
}

fn parse_inner(spec: &str, dims: &mut impl Iterator<Item = usize>) -> Result<ConstraintSet> {
    if spec.starts_with("prod(") {
        let (a, b) = split_product(spec)
            .ok_or_else(|| Error::InvalidSet(format!("malformed product {spec:?}")))?;
        let first = parse_inner(a, dims)?;
        let second = parse_inner(b, dims)?;
        return Ok(ConstraintSet::product(first, second));
    }
    let dim = dims
        .next()
        .ok_or_else(|| Error::InvalidSet(format!("no dimension supplied for {spec:?}")))?;
    let (head, arg) = match spec.split_once(':') {
        Some((h, a)) => (h.trim(), Some(a.trim())),
        None => (spec, None),
    };
    let number = |a: Option<&str>| -> Result<f64> {
        a.and_then(|a| a.parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidSet(format!("bad parameter in {spec:?}")))
    };
    match (head, arg) {
        ("l1", a) => ConstraintSet::l1_ball(dim, number(a)?),
        ("l2", a) => ConstraintSet::l2_ball(dim, number(a)?),
        ("topk", a) => {
            let k = a
                .and_then(|a| a.parse::<usize>().ok())
                .ok_or_else(|| Error::InvalidSet(format!("bad k in {spec:?}")))?;
            ConstraintSet::top_k(dim, k)
        }
        ("full", None) => Ok(ConstraintSet::full(dim)),
        ("point", Some("0")) => Ok(ConstraintSet::origin(dim)),
        ("point", Some(path)) => {
            let point = read_vector(Path::new(path))?;
            if point.len() != dim {
                return Err(Error::shape(dim, point.len()));
            }
            ConstraintSet::singleton(point)
        }
        _ => Err(Error::InvalidSet(format!("unknown set {spec:?}"))),
    }
}

/// Reads whitespace-separated numbers from a file.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::Parse(format!("{}: bad number {tok:?}", path.display())))
        })
        .collect()
}

/// Exact projection onto the ℓ1 ball by sorting magnitudes and
/// soft-thresholding at the unique level that lands on the sphere.
fn project_l1(p: &[f64], radius: f64, out: &mut [f64]) {
    let l1: f64 = p.iter().map(|v| v.abs()).sum();
    if l1 <= radius * (1.0 + BALL_SLACK) {
        out.copy_from_slice(p);
        return;
    }
    let mut mags: Vec<f64> = p.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, u) in mags.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - radius) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    for (o, v) in out.iter_mut().zip(p) {
        *o = v.signum() * (v.abs() - theta).max(0.0);
    }
}

/// Keeps the `k` largest magnitudes; among equal magnitudes the lower index
/// is kept.
fn project_top_k(p: &[f64], k: usize, out: &mut [f64]) {
    out.fill(0.0);
    if k >= p.len() {
        out.copy_from_slice(p);
        return;
    }
    let mut idx: Vec<usize> = (0..p.len()).collect();
    let order = |a: &usize, b: &usize| p[*b].abs().total_cmp(&p[*a].abs()).then(a.cmp(b));
    idx.select_nth_unstable_by(k - 1, order);
    for &i in &idx[..k] {
        out[i] = p[i];
    }
}
