//! Plain-text `key = value` sweep configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::links::{LinkFunction, DEFAULT_ORDER};
use crate::sets::ConstraintSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    ErrorVsM,
    PhaseDiagram,
    TSweep,
    CorruptionSweep,
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepKind::ErrorVsM => "error_vs_m",
            SweepKind::PhaseDiagram => "phase_diagram",
            SweepKind::TSweep => "t_sweep",
            SweepKind::CorruptionSweep => "corruption_sweep",
        })
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "error_vs_m" => Ok(SweepKind::ErrorVsM),
            "phase_diagram" => Ok(SweepKind::PhaseDiagram),
            "t_sweep" => Ok(SweepKind::TSweep),
            "corruption_sweep" => Ok(SweepKind::CorruptionSweep),
            other => Err(Error::Config(format!("unknown sweep kind {other:?}"))),
        }
    }
}

/// A structure-set template for one factor of `T`.
///
/// Besides the fixed set grammar of [`ConstraintSet::parse`], the radius of
/// an `l1` or `l2` ball may be tied to the truth of each trial:
/// `l1:anchor` uses the ℓ1 norm of the anchor (boundary regime) and
/// `l1:anchor*1.5` inflates it (interior regime).
#[derive(Debug, Clone, PartialEq)]
pub enum SetTemplate {
    Anchored { ball: BallKind, factor: f64 },
    Fixed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallKind {
    L1,
    L2,
}

impl SetTemplate {
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let Some((head, arg)) = spec.split_once(':') else {
            return Ok(SetTemplate::Fixed(spec.to_string()));
        };
        let ball = match head.trim() {
            "l1" => BallKind::L1,
            "l2" => BallKind::L2,
            _ => return Ok(SetTemplate::Fixed(spec.to_string())),
        };
        let arg = arg.trim();
        let Some(rest) = arg.strip_prefix("anchor") else {
            return Ok(SetTemplate::Fixed(spec.to_string()));
        };
        let factor = match rest.trim().strip_prefix('*') {
            None if rest.trim().is_empty() => 1.0,
            None => return Err(Error::Config(format!("bad anchored set {spec:?}"))),
            Some(f) => f
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad radius factor in {spec:?}")))?,
        };
        if !(factor >= 1.0 && factor.is_finite()) {
            return Err(Error::Config(format!(
                "radius factor must be finite and >= 1 so the anchor stays in the set, got {factor}"
            )));
        }
        Ok(SetTemplate::Anchored { ball, factor })
    }

    /// Builds the set for one trial and checks that `anchor` lies in it.
    pub fn resolve(&self, anchor: &Array1<f64>) -> Result<ConstraintSet> {
        let dim = anchor.len();
        let set = match self {
            SetTemplate::Anchored { ball, factor } => {
                let norm = match ball {
                    BallKind::L1 => anchor.iter().map(|a| a.abs()).sum::<f64>(),
                    BallKind::L2 => anchor.dot(anchor).sqrt(),
                };
                if norm == 0.0 {
                    return Ok(ConstraintSet::origin(dim));
                }
                match ball {
                    BallKind::L1 => ConstraintSet::l1_ball(dim, norm * factor)?,
                    BallKind::L2 => ConstraintSet::l2_ball(dim, norm * factor)?,
                }
            }
            SetTemplate::Fixed(spec) => {
                if ConstraintSet::leaf_count(spec) != 1 {
                    return Err(Error::Config(format!(
                        "set {spec:?} must be a single leaf, T is already the product of two factors"
                    )));
                }
                ConstraintSet::parse(spec, &[dim]).map_err(|e| Error::Config(e.to_string()))?
            }
        };
        let scale = anchor.iter().fold(1.0f64, |acc, a| acc.max(a.abs()));
        if !set.contains(anchor, 1e-9 * scale)? {
            return Err(Error::Config(format!(
                "anchor lies outside {set}; enlarge the radius"
            )));
        }
        Ok(set)
    }
}

impl fmt::Display for SetTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetTemplate::Anchored { ball, factor } => {
                let head = match ball {
                    BallKind::L1 => "l1",
                    BallKind::L2 => "l2",
                };
                if *factor == 1.0 {
                    write!(f, "{head}:anchor")
                } else {
                    write!(f, "{head}:anchor*{factor}")
                }
            }
            SetTemplate::Fixed(spec) => f.write_str(spec),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub n: usize,
    /// Signal sparsity; overridden per cell by `s_grid` when non-empty.
    pub s: usize,
    /// Corruption sparsity; overridden per cell by `k_grid` when non-empty.
    pub k: usize,
    pub amplitude: f64,
    pub link: LinkFunction,
    pub set_x: SetTemplate,
    pub set_v: SetTemplate,
    pub m_grid: Vec<usize>,
    pub s_grid: Vec<usize>,
    pub k_grid: Vec<usize>,
    pub t_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub max_iters: usize,
    /// Gradient-mapping tolerance is `tol_scale·√m`.
    pub tol_scale: f64,
    pub order: usize,
    /// Success when the joint error is at most this fraction of the error
    /// of the trivial estimate `(0, 0)`.
    pub success_rel: f64,
    pub width_trials: usize,
    /// Record per-trial wall time. Off by default because timings make the
    /// CSV differ between identical runs.
    pub timing: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            kind: SweepKind::ErrorVsM,
            n: 128,
            s: 4,
            k: 0,
            amplitude: 5.0,
            link: LinkFunction::Identity,
            set_x: SetTemplate::Anchored { ball: BallKind::L1, factor: 1.0 },
            set_v: SetTemplate::Anchored { ball: BallKind::L1, factor: 1.0 },
            m_grid: Vec::new(),
            s_grid: Vec::new(),
            k_grid: Vec::new(),
            t_grid: Vec::new(),
            trials: 10,
            seed: 0,
            output: None,
            max_iters: 100_000,
            tol_scale: 1e-8,
            order: DEFAULT_ORDER,
            success_rel: 0.1,
            width_trials: 200,
            timing: false,
        }
    }
}

const KEYS: &[&str] = &[
    "kind", "n", "s", "k", "amplitude", "link", "set_x", "set_v", "m_grid", "s_grid", "k_grid",
    "t_grid", "trials", "seed", "output", "max_iters", "tol_scale", "order", "success_rel",
    "width_trials", "timing",
];

impl SweepConfig {
    /// Parses `key = value` lines. Blank lines and `#` comments are skipped;
    /// lists are comma-separated. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = SweepConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Sets one key from its text form, as a config line or CLI override would.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "kind" => self.kind = value.parse()?,
            "n" => self.n = number(key, value)?,
            "s" => self.s = number(key, value)?,
            "k" => self.k = number(key, value)?,
            "amplitude" => self.amplitude = number(key, value)?,
            "link" => {
                self.link = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?
            }
            "set_x" => self.set_x = SetTemplate::parse(value)?,
            "set_v" => self.set_v = SetTemplate::parse(value)?,
            "m_grid" => self.m_grid = list(key, value)?,
            "s_grid" => self.s_grid = list(key, value)?,
            "k_grid" => self.k_grid = list(key, value)?,
            "t_grid" => self.t_grid = list(key, value)?,
            "trials" => self.trials = number(key, value)?,
            "seed" => self.seed = number(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "max_iters" => self.max_iters = number(key, value)?,
            "tol_scale" => self.tol_scale = number(key, value)?,
            "order" => self.order = number(key, value)?,
            "success_rel" => self.success_rel = number(key, value)?,
            "width_trials" => self.width_trials = number(key, value)?,
            "timing" => {
                self.timing = match value {
                    "on" | "true" | "1" => true,
                    "off" | "false" | "0" => false,
                    _ => return Err(Error::Config(format!("timing must be on or off, got {value:?}"))),
                }
            }
            _ => {
                return Err(Error::Config(format!(
                    "unknown key {key:?}; expected one of {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_grid.is_empty() {
            return Err(Error::Config("m_grid is empty".into()));
        }
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("m_grid must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n == 0 || self.m_grid[0] == 0 {
            return Err(Error::Config("n and every m must be positive".into()));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Config("amplitude must be finite and >= 0".into()));
        }
        if !(self.tol_scale > 0.0 && self.tol_scale.is_finite()) || self.max_iters == 0 {
            return Err(Error::Config("tol_scale must be positive and max_iters >= 1".into()));
        }
        if !(self.success_rel > 0.0 && self.success_rel.is_finite()) {
            return Err(Error::Config("success_rel must be positive".into()));
        }
        for &s in self.s_values() {
            if s == 0 || s > self.n {
                return Err(Error::Config(format!("signal sparsity {s} is outside [1, n]")));
            }
        }
        for &k in self.k_values() {
            if k > self.m_grid[0] {
                return Err(Error::Config(format!(
                    "corruption sparsity {k} exceeds the smallest m = {}",
                    self.m_grid[0]
                )));
            }
        }
        if self.kind == SweepKind::TSweep {
            if self.t_grid.is_empty() {
                return Err(Error::Config("t_sweep needs a non-empty t_grid".into()));
            }
            if self.t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                return Err(Error::Config("every t must be positive and finite".into()));
            }
            if self.width_trials == 0 {
                return Err(Error::Config("width_trials must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn s_values(&self) -> &[usize] {
        if self.s_grid.is_empty() {
            std::slice::from_ref(&self.s)
        } else {
            &self.s_grid
        }
    }

    pub fn k_values(&self) -> &[usize] {
        if self.k_grid.is_empty() {
            std::slice::from_ref(&self.k)
        } else {
            &self.k_grid
        }
    }

    /// The configuration in the same text format [`SweepConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        fn join<T: ToString>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        let mut lines = vec![
            format!("kind = {}", self.kind),
            format!("n = {}", self.n),
            format!("s = {}", self.s),
            format!("k = {}", self.k),
            format!("amplitude = {}", self.amplitude),
            format!("link = {}", self.link),
            format!("set_x = {}", self.set_x),
            format!("set_v = {}", self.set_v),
            format!("m_grid = {}", join(&self.m_grid)),
        ];
        for (key, grid) in [("s_grid", &self.s_grid), ("k_grid", &self.k_grid)] {
            if !grid.is_empty() {
                lines.push(format!("{key} = {}", join(grid)));
            }
        }
        if !self.t_grid.is_empty() {
            lines.push(format!("t_grid = {}", join(&self.t_grid)));
        }
        lines.extend([
            format!("trials = {}", self.trials),
            format!("seed = {}", self.seed),
            format!("max_iters = {}", self.max_iters),
            format!("tol_scale = {}", self.tol_scale),
            format!("order = {}", self.order),
            format!("success_rel = {}", self.success_rel),
            format!("width_trials = {}", self.width_trials),
            format!("timing = {}", if self.timing { "on" } else { "off" }),
        ]);
        if let Some(out) = &self.output {
            lines.push(format!("output = {}", out.display()));
        }
        lines.join("\n") + "\n"
    }
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| number(key, v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "kind = phase_diagram\n# comment\nn = 64\nm_grid = 32, 64,128\nlink = clip:1.5\nset_x = l1:anchor*1.5\nk_grid = 0,2\n";
        let config = SweepConfig::parse(text).unwrap();
        assert_eq!(config.kind, SweepKind::PhaseDiagram);
        assert_eq!(config.m_grid, vec![32, 64, 128]);
        assert_eq!(config.k_values(), &[0, 2]);
        assert_eq!(config.set_x, SetTemplate::Anchored { ball: BallKind::L1, factor: 1.5 });
        let again = SweepConfig::parse(&config.to_text()).unwrap();
        assert_eq!(again.to_text(), config.to_text());
    }

    #[test]
    fn rejects_bad_grids_and_keys() {
        assert!(matches!(SweepConfig::parse("bogus = 1"), Err(Error::Config(_))));
        let config = SweepConfig::parse("m_grid = 64, 32").unwrap();
        assert!(matches!(config.validate(), Err(Error::Config(_))));
        let config = SweepConfig::parse("m_grid = 64\ntrials = 0").unwrap();
        assert!(matches!(config.validate(), Err(Error::Config(_))));
        assert!(SetTemplate::parse("l1:anchor*0.5").is_err());
    }

    #[test]
    fn templates_resolve_against_anchor() {
        let anchor = Array1::from(vec![0.5, -0.5, 0.0]);
        let set = SetTemplate::parse("l1:anchor").unwrap().resolve(&anchor).unwrap();
        assert_eq!(set, ConstraintSet::l1_ball(3, 1.0).unwrap());
        let zero = Array1::zeros(3);
        let set = SetTemplate::parse("l1:anchor*2").unwrap().resolve(&zero).unwrap();
        assert_eq!(set, ConstraintSet::origin(3));
        let small = SetTemplate::parse("l1:0.5").unwrap();
        assert!(matches!(small.resolve(&anchor), Err(Error::Config(_))));
        assert!(SetTemplate::parse("full").unwrap().resolve(&anchor).is_ok());
    }
}
