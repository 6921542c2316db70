//! Synthetic corrupted non-linear sensing problems
//! `y = f(Φx⋆) + √m·v⋆` with Gaussian `Φ`, a unit-norm sparse signal and a
//! sparse spiky corruption.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::links::{apply_link, LinkFunction};
use crate::rng::{gaussian_vec, stream, stream_rng};

const FILE_MAGIC: &str = "tlasso-instance";

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub n: usize,
    pub m: usize,
    /// Nonzeros in the signal, in `[1, n]`.
    pub signal_sparsity: usize,
    /// Nonzeros in the corruption, in `[0, m]`.
    pub corruption_sparsity: usize,
    pub corruption_amplitude: f64,
    pub link: LinkFunction,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidSpec(format!(
                "dimensions must be positive, got n = {}, m = {}",
                self.n, self.m
            )));
        }
        if self.signal_sparsity == 0 {
            return Err(Error::InvalidSpec(
                "signal sparsity must be at least 1 so the signal can be normalized".into(),
            ));
        }
        if self.signal_sparsity > self.n {
            return Err(Error::InvalidSpec(format!(
                "signal sparsity {} exceeds n = {}",
                self.signal_sparsity, self.n
            )));
        }
        if self.corruption_sparsity > self.m {
            return Err(Error::InvalidSpec(format!(
                "corruption sparsity {} exceeds m = {}",
                self.corruption_sparsity, self.m
            )));
        }
        if !(self.corruption_amplitude >= 0.0 && self.corruption_amplitude.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "corruption amplitude must be finite and >= 0, got {}",
                self.corruption_amplitude
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub phi: Array2<f64>,
    pub x_star: Array1<f64>,
    pub v_star: Array1<f64>,
    pub y: Array1<f64>,
    pub link: LinkFunction,
    pub seed: u64,
}

impl ProblemInstance {
    /// Builds an instance from explicit parts, computing the observations.
    pub fn assemble(
        phi: Array2<f64>,
        x_star: Array1<f64>,
        v_star: Array1<f64>,
        link: LinkFunction,
        seed: u64,
    ) -> Result<Self> {
        let (m, n) = phi.dim();
        if x_star.len() != n {
            return Err(Error::shape(n, x_star.len()));
        }
        if v_star.len() != m {
            return Err(Error::shape(m, v_star.len()));
        }
        let sqrt_m = (m as f64).sqrt();
        let y = apply_link(&link, &phi.dot(&x_star)) + &(&v_star * sqrt_m);
        Ok(ProblemInstance {
            phi,
            x_star,
            v_star,
            y,
            link,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.phi.ncols()
    }

    pub fn m(&self) -> usize {
        self.phi.nrows()
    }

    pub fn sqrt_m(&self) -> f64 {
        (self.m() as f64).sqrt()
    }

    /// Writes the portable text format: a header line followed by `Φ` (one
    /// row per line), `x⋆`, `v⋆` and `y`, each number with 17 significant
    /// digits.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(
            w,
            "{FILE_MAGIC} n={} m={} seed={} link={}",
            self.n(),
            self.m(),
            self.seed,
            self.link
        )?;
        let mut line = String::new();
        for row in self.phi.rows() {
            write_numbers(&mut line, row.iter());
            writeln!(w, "{line}")?;
        }
        for block in [&self.x_star, &self.v_star, &self.y] {
            write_numbers(&mut line, block.iter());
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from(r: impl std::io::Read) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let header = header.trim_end();
        let rest = header
            .strip_prefix(FILE_MAGIC)
            .ok_or_else(|| Error::Parse(format!("missing {FILE_MAGIC:?} header")))?;
        let (fields, link) = rest
            .split_once("link=")
            .ok_or_else(|| Error::Parse("header has no link field".into()))?;
        let mut n = None;
        let mut m = None;
        let mut seed = None;
        for tok in fields.split_whitespace() {
            let (key, value) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field {tok:?}")))?;
            let bad = || Error::Parse(format!("bad header value {tok:?}"));
            match key {
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad())?),
                "m" => m = Some(value.parse::<usize>().map_err(|_| bad())?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad())?),
                _ => return Err(Error::Parse(format!("unknown header field {key:?}"))),
            }
        }
        let (n, m, seed) = match (n, m, seed) {
            (Some(n), Some(m), Some(s)) => (n, m, s),
            _ => return Err(Error::Parse("header must carry n, m and seed".into())),
        };
        let link: LinkFunction = link.trim().parse()?;

        let mut body = String::new();
        std::io::Read::read_to_string(&mut reader, &mut body)?;
        let values = body
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {t:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        let expected = m * n + n + 2 * m;
        if values.len() != expected {
            return Err(Error::Parse(format!(
                "expected {expected} numbers for n = {n}, m = {m}, found {}",
                values.len()
            )));
        }
        let (phi, rest) = values.split_at(m * n);
        let (x_star, rest) = rest.split_at(n);
        let (v_star, y) = rest.split_at(m);
        Ok(ProblemInstance {
            phi: Array2::from_shape_vec((m, n), phi.to_vec()).expect("length checked"),
            x_star: Array1::from(x_star.to_vec()),
            v_star: Array1::from(v_star.to_vec()),
            y: Array1::from(y.to_vec()),
            link,
            seed,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

fn write_numbers<'a>(line: &mut String, values: impl Iterator<Item = &'a f64>) {
    line.clear();
    for (i, v) in values.enumerate() {
        if i > 0 {
            line.push(' ');
        }
        write!(line, "{v:.16e}").expect("writing to a String");
    }
}

/// The unit-norm signal and the corruption only. Uses the same streams as
/// [`generate_instance`], so it matches the truth of the full instance
/// without drawing the sensing matrix.
pub fn generate_truth(spec: &InstanceSpec) -> Result<(Array1<f64>, Array1<f64>)> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, stream::SIGNAL);
    let support = index::sample(&mut rng, spec.n, spec.signal_sparsity);
    let values = gaussian_vec(&mut rng, spec.signal_sparsity);
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::NumericalFailure("signal draw has zero norm".into()));
    }
    let mut x_star = Array1::zeros(spec.n);
    for (i, v) in support.iter().zip(values) {
        x_star[i] = v / norm;
    }

    let mut rng = stream_rng(spec.seed, stream::CORRUPTION);
    let mut v_star = Array1::zeros(spec.m);
    let support = index::sample(&mut rng, spec.m, spec.corruption_sparsity);
    for i in support.iter() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        v_star[i] = sign * spec.corruption_amplitude;
    }
    Ok((x_star, v_star))
}

/// Draws `Φ` with i.i.d. N(0,1) entries, an `s`-sparse unit-norm `x⋆` with
/// uniform support and Gaussian nonzeros, and a `k`-sparse `v⋆` with entries
/// `±amplitude`.
pub fn generate_instance(spec: &InstanceSpec) -> Result<ProblemInstance> {
    let (x_star, v_star) = generate_truth(spec)?;
    let mut rng = stream_rng(spec.seed, stream::SENSING);
    let phi = Array2::from_shape_vec((spec.m, spec.n), gaussian_vec(&mut rng, spec.m * spec.n))
        .expect("length matches shape");
    ProblemInstance::assemble(phi, x_star, v_star, spec.link.clone(), spec.seed)
}

/// `y − Φx − √m·v`.
pub fn residual(inst: &ProblemInstance, x: &Array1<f64>, v: &Array1<f64>) -> Result<Array1<f64>> {
    if x.len() != inst.n() {
        return Err(Error::shape(inst.n(), x.len()));
    }
    if v.len() != inst.m() {
        return Err(Error::shape(inst.m(), v.len()));
    }
    // Same grouping as the observations, so the truth of an identity-link
    // instance leaves an exactly zero residual.
    Ok(&inst.y - &(inst.phi.dot(x) + &(v * inst.sqrt_m())))
}
