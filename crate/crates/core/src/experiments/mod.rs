//! Seeded trial sweeps: error decay in `m`, success-rate phase diagrams,
//! corruption sensitivity and the local-width `t` sweep.
//!
//! Every trial owns a seed derived from the base seed and its grid keys, so
//! rows do not depend on how rayon schedules them and a re-run of the same
//! config writes the same bytes.

mod config;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{BallKind, SetTemplate, SweepConfig, SweepKind};
pub use output::{read_rows, write_csv, write_manifest};

use crate::error::{Error, Result};
use crate::geometry::{shifted_local_width_mc, WidthEstimate};
use crate::links::{link_params, NonlinearityParams};
use crate::model::{generate_instance, generate_truth, InstanceSpec};
use crate::rng::derive_seed;
use crate::solver::{error_breakdown, solve_tlasso, SolveOptions};

/// Extra key mixed into the seed of the width estimate of a `t` sweep cell.
const WIDTH_SEED_KEY: u64 = 0x5744_5448;

/// One solved trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep: SweepKind,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub k: usize,
    pub trial: usize,
    pub seed: u64,
    pub mu: f64,
    pub sigma: f64,
    pub psi_hat: f64,
    pub joint_error: f64,
    pub signal_error: f64,
    pub corruption_error: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Empty unless the config enables timing.
    pub wall_time_s: Option<f64>,
}

/// Success counts of one `(m, s, k)` cell of a phase diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub sweep: SweepKind,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub k: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
}

/// Local width, bound proxy and achieved error at one `(m, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TSweepRow {
    pub t: f64,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub k: usize,
    pub trials: usize,
    pub local_width: f64,
    pub local_width_se: f64,
    pub width_over_t: f64,
    /// `t + (ω_t(K)(σ+ψ+μ)/t + σ)/√m`, the error bound with its constant
    /// set to one and the deviation parameter set to one.
    pub bound_proxy: f64,
    pub median_error: f64,
    /// Median error over the smallest bound proxy of the cell.
    pub c_hat: f64,
    /// Whether this `t` minimizes the proxy within its cell.
    pub t_star: bool,
}

/// One width estimate as written by the geometry commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthRow {
    pub quantity: String,
    pub set: String,
    pub t: Option<f64>,
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    pub seed: u64,
}

impl WidthRow {
    pub fn from_estimate(estimate: &WidthEstimate, set: &str, seed: u64) -> Self {
        WidthRow {
            quantity: estimate.quantity.to_string(),
            set: set.to_string(),
            t: estimate.t,
            mean: estimate.mean,
            std_error: estimate.std_error,
            trials: estimate.trials,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy)]
struct TrialKey {
    m: usize,
    s: usize,
    k: usize,
    trial: usize,
    seed: u64,
}

fn plan(config: &SweepConfig) -> Vec<TrialKey> {
    let mut keys = Vec::new();
    for &m in &config.m_grid {
        for &s in config.s_values() {
            for &k in config.k_values() {
                for trial in 0..config.trials {
                    let seed = derive_seed(config.seed, &[m as u64, s as u64, k as u64, trial as u64]);
                    keys.push(TrialKey { m, s, k, trial, seed });
                }
            }
        }
    }
    keys
}

fn instance_spec(config: &SweepConfig, key: &TrialKey) -> InstanceSpec {
    InstanceSpec {
        n: config.n,
        m: key.m,
        signal_sparsity: key.s,
        corruption_sparsity: key.k,
        corruption_amplitude: config.amplitude,
        link: config.link.clone(),
        seed: key.seed,
    }
}

/// Resolves both set templates against the truth `(μx⋆, v⋆)`.
fn resolve_sets(
    config: &SweepConfig,
    x_star: &Array1<f64>,
    v_star: &Array1<f64>,
    mu: f64,
) -> Result<(crate::ConstraintSet, crate::ConstraintSet, Array1<f64>)> {
    let anchor_x = x_star * mu;
    let set_x = config.set_x.resolve(&anchor_x)?;
    let set_v = config.set_v.resolve(v_star)?;
    Ok((set_x, set_v, anchor_x))
}

/// Draws only the truths of every trial and checks the anchor lies in `T`,
/// so a bad radius fails before any solve starts.
fn precheck(config: &SweepConfig, params: &NonlinearityParams, keys: &[TrialKey]) -> Result<()> {
    keys.par_iter().try_for_each(|key| {
        let spec = instance_spec(config, key);
        let (x_star, v_star) = generate_truth(&spec).map_err(|e| Error::Config(e.to_string()))?;
        resolve_sets(config, &x_star, &v_star, params.mu).map(|_| ())
    })
}

fn run_trial(config: &SweepConfig, params: &NonlinearityParams, key: &TrialKey) -> Result<SweepRow> {
    let start = Instant::now();
    let inst = generate_instance(&instance_spec(config, key))?;
    let (set_x, set_v, _) = resolve_sets(config, &inst.x_star, &inst.v_star, params.mu)?;
    let opts = SolveOptions {
        max_iters: config.max_iters,
        grad_map_tol: config.tol_scale * inst.sqrt_m(),
        ..SolveOptions::for_measurements(key.m)
    };
    let result = solve_tlasso(&inst, &set_x, &set_v, &opts)?;
    let err = error_breakdown(&result.x_hat, &result.v_hat, &inst, params.mu)?;
    Ok(SweepRow {
        sweep: config.kind,
        m: key.m,
        n: config.n,
        s: key.s,
        k: key.k,
        trial: key.trial,
        seed: key.seed,
        mu: params.mu,
        sigma: params.sigma,
        psi_hat: params.psi_hat,
        joint_error: err.joint,
        signal_error: err.signal,
        corruption_error: err.corruption,
        iterations: result.iterations,
        converged: result.converged,
        wall_time_s: config.timing.then(|| start.elapsed().as_secs_f64()),
    })
}

/// Generates, solves and scores every `(m, s, k, trial)` of the grid.
///
/// Rows come back in grid order. Set radii are checked against every
/// trial's truth first; an anchor outside `T` is a config error.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let params = link_params(&config.link, config.order)?;
    let keys = plan(config);
    precheck(config, &params, &keys)?;
    keys.par_iter().map(|key| run_trial(config, &params, key)).collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.is_empty() {
        f64::NAN
    } else if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

/// Median joint error per `m`, in increasing `m`.
pub fn medians_by_m(rows: &[SweepRow]) -> Vec<(usize, f64)> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for row in rows {
        groups.entry(row.m).or_default().push(row.joint_error);
    }
    groups.into_iter().map(|(m, e)| (m, median(&e))).collect()
}

/// Least-squares line through `(log m, log median joint error)`.
pub fn scaling_fit(rows: &[SweepRow]) -> Result<ScalingFit> {
    let medians = medians_by_m(rows);
    if medians.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "scaling fit needs at least 3 distinct m values, got {}",
            medians.len()
        )));
    }
    if let Some((m, e)) = medians.iter().find(|(_, e)| !(*e > 0.0)) {
        return Err(Error::FitUndefined(format!(
            "median error at m = {m} is {e}; exact recovery has no power law"
        )));
    }
    let xs: Vec<f64> = medians.iter().map(|(m, _)| (*m as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|(_, e)| e.ln()).collect();
    let count = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / count;
    let mean_y = ys.iter().sum::<f64>() / count;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let syy: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = mean_y - exponent * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(ScalingFit { exponent, intercept, r2 })
}

/// The joint error of the trivial estimate `(0, 0)`, `√(μ² + ‖v⋆‖²)`.
/// Corruption entries are `±amplitude`, so `‖v⋆‖² = k·amplitude²`.
fn trivial_error(row: &SweepRow, amplitude: f64) -> f64 {
    (row.mu * row.mu + row.k as f64 * amplitude * amplitude).sqrt()
}

/// Groups rows into `(m, s, k)` cells and counts successes, a joint error
/// at most `success_rel` times the error of the trivial estimate.
pub fn phase_cells(config: &SweepConfig, rows: &[SweepRow]) -> Vec<PhaseCell> {
    let mut cells: BTreeMap<(usize, usize, usize), (usize, usize)> = BTreeMap::new();
    for row in rows {
        let cell = cells.entry((row.m, row.s, row.k)).or_default();
        cell.0 += 1;
        if row.joint_error <= config.success_rel * trivial_error(row, config.amplitude) {
            cell.1 += 1;
        }
    }
    cells
        .into_iter()
        .map(|((m, s, k), (trials, successes))| PhaseCell {
            sweep: config.kind,
            m,
            n: config.n,
            s,
            k,
            trials,
            successes,
            success_rate: successes as f64 / trials as f64,
        })
        .collect()
}

/// Runs the grid and reports success rates per `(m, s, k)` cell.
pub fn phase_diagram(config: &SweepConfig) -> Result<(Vec<PhaseCell>, Vec<SweepRow>)> {
    let rows = run_sweep(config)?;
    Ok((phase_cells(config, &rows), rows))
}

/// For every cell and every `t`, estimates `ω_t(K)` for `K = T − (μx⋆, v⋆)`
/// at the truth of trial 0 and compares the bound proxy with the median
/// achieved error.
///
/// All `t` of a cell share one Gaussian stream, so the widths are monotone
/// in `t` exactly.
pub fn t_sweep(config: &SweepConfig) -> Result<(Vec<TSweepRow>, Vec<SweepRow>)> {
    config.validate()?;
    for template in [&config.set_x, &config.set_v] {
        if let SetTemplate::Anchored { factor, .. } = template {
            if *factor <= 1.0 {
                return Err(Error::Config(format!(
                    "t_sweep needs interior anchors, got {template}; use a factor above 1"
                )));
            }
        }
    }
    let rows = run_sweep(config)?;
    let params = link_params(&config.link, config.order)?;

    let mut groups: BTreeMap<(usize, usize, usize), Vec<&SweepRow>> = BTreeMap::new();
    for row in &rows {
        groups.entry((row.m, row.s, row.k)).or_default().push(row);
    }
    let mut out = Vec::new();
    for ((m, s, k), cell) in groups {
        let first = cell.iter().find(|r| r.trial == 0).expect("every cell has trial 0");
        let key = TrialKey { m, s, k, trial: 0, seed: first.seed };
        let (x_star, v_star) = generate_truth(&instance_spec(config, &key))?;
        let (set_x, set_v, anchor_x) = resolve_sets(config, &x_star, &v_star, params.mu)?;
        let width_seed = derive_seed(config.seed, &[m as u64, s as u64, k as u64, WIDTH_SEED_KEY]);
        let errors: Vec<f64> = cell.iter().map(|r| r.joint_error).collect();
        let median_error = median(&errors);
        let sqrt_m = (m as f64).sqrt();
        let level = params.sigma + params.psi_hat + params.mu;

        let mut cell_rows = Vec::with_capacity(config.t_grid.len());
        for &t in &config.t_grid {
            let width = shifted_local_width_mc(
                &set_x,
                &set_v,
                (&anchor_x, &v_star),
                t,
                config.width_trials,
                width_seed,
            )?;
            let bound_proxy = t + (width.mean * level / t + params.sigma) / sqrt_m;
            cell_rows.push(TSweepRow {
                t,
                m,
                n: config.n,
                s,
                k,
                trials: cell.len(),
                local_width: width.mean,
                local_width_se: width.std_error,
                width_over_t: width.mean / t,
                bound_proxy,
                median_error,
                c_hat: 0.0,
                t_star: false,
            });
        }
        let best = cell_rows
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.bound_proxy.total_cmp(&b.1.bound_proxy))
            .map(|(i, _)| i)
            .expect("t grid is non-empty");
        let c_hat = median_error / cell_rows[best].bound_proxy;
        for (i, row) in cell_rows.iter_mut().enumerate() {
            row.c_hat = c_hat;
            row.t_star = i == best;
        }
        out.extend(cell_rows);
    }
    Ok((out, rows))
}

/// Files written by [`run_to_files`] and headline numbers for the manifest.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub csv: PathBuf,
    pub extra_csv: Option<PathBuf>,
    pub manifest: PathBuf,
    pub summary: Vec<(String, String)>,
}

/// Runs the sweep named by `config.kind`, writes the CSV next to a manifest
/// and returns what was written.
///
/// The main CSV holds trial rows for `error_vs_m` and `corruption_sweep`,
/// cells for `phase_diagram` (trial rows go to `<stem>.rows.csv`) and
/// `t` rows for `t_sweep` (likewise).
pub fn run_to_files(config: &SweepConfig) -> Result<RunOutputs> {
    let csv = config
        .output
        .clone()
        .ok_or_else(|| Error::Config("no output path given".into()))?;
    let start = Instant::now();
    let rows_path = csv.with_extension("rows.csv");
    let mut summary = Vec::new();
    let extra_csv = match config.kind {
        SweepKind::ErrorVsM | SweepKind::CorruptionSweep => {
            let rows = run_sweep(config)?;
            write_csv(&csv, &rows)?;
            summarize_rows(config, &rows, &mut summary);
            None
        }
        SweepKind::PhaseDiagram => {
            let (cells, rows) = phase_diagram(config)?;
            write_csv(&csv, &cells)?;
            write_csv(&rows_path, &rows)?;
            summary.push(("cells".into(), cells.len().to_string()));
            Some(rows_path)
        }
        SweepKind::TSweep => {
            let (trows, rows) = t_sweep(config)?;
            write_csv(&csv, &trows)?;
            write_csv(&rows_path, &rows)?;
            for row in trows.iter().filter(|r| r.t_star) {
                summary.push((format!("c_hat[m={}]", row.m), row.c_hat.to_string()));
                summary.push((format!("t_star[m={}]", row.m), row.t.to_string()));
            }
            Some(rows_path)
        }
    };
    let manifest = csv.with_extension("manifest");
    write_manifest(&manifest, config, &summary, start.elapsed().as_secs_f64())?;
    Ok(RunOutputs { csv, extra_csv, manifest, summary })
}

fn summarize_rows(config: &SweepConfig, rows: &[SweepRow], summary: &mut Vec<(String, String)>) {
    summary.push(("rows".into(), rows.len().to_string()));
    let unconverged = rows.iter().filter(|r| !r.converged).count();
    summary.push(("unconverged".into(), unconverged.to_string()));
    if config.kind == SweepKind::CorruptionSweep {
        let mut by_k: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for row in rows {
            by_k.entry(row.k).or_default().push(row.joint_error);
        }
        for (k, errors) in by_k {
            summary.push((format!("median_error[k={k}]"), median(&errors).to_string()));
        }
        return;
    }
    for (m, e) in medians_by_m(rows) {
        summary.push((format!("median_error[m={m}]"), e.to_string()));
    }
    match scaling_fit(rows) {
        Ok(fit) => {
            summary.push(("fit_exponent".into(), fit.exponent.to_string()));
            summary.push(("fit_intercept".into(), fit.intercept.to_string()));
            summary.push(("fit_r2".into(), fit.r2.to_string()));
        }
        Err(e) => summary.push(("fit".into(), format!("undefined ({e})"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(m: usize, error: f64) -> SweepRow {
        SweepRow {
            sweep: SweepKind::ErrorVsM,
            m,
            n: 10,
            s: 1,
            k: 0,
            trial: 0,
            seed: 0,
            mu: 1.0,
            sigma: 0.0,
            psi_hat: 1.0,
            joint_error: error,
            signal_error: error,
            corruption_error: 0.0,
            iterations: 1,
            converged: true,
            wall_time_s: None,
        }
    }

    #[test]
    fn exact_power_law_fit() {
        let rows: Vec<_> = [100, 200, 400, 800]
            .iter()
            .map(|&m| row(m, 10.0 * (m as f64).powf(-0.5)))
            .collect();
        let fit = scaling_fit(&rows).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn constant_error_has_zero_exponent() {
        let rows: Vec<_> = [10, 20, 40].iter().map(|&m| row(m, 0.3)).collect();
        assert!(scaling_fit(&rows).unwrap().exponent.abs() < 1e-12);
    }

    #[test]
    fn zero_median_is_fit_undefined() {
        let rows: Vec<_> = [10, 20, 40].iter().map(|&m| row(m, 0.0)).collect();
        assert!(matches!(scaling_fit(&rows), Err(Error::FitUndefined(_))));
        assert!(matches!(scaling_fit(&rows[..2]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn median_of_even_count() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[5.0]), 5.0);
    }

    #[test]
    fn single_trial_single_m() {
        let config = SweepConfig {
            n: 16,
            s: 2,
            m_grid: vec![40],
            trials: 1,
            ..SweepConfig::default()
        };
        let rows = run_sweep(&config).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].converged);
    }

    #[test]
    fn outside_anchor_fails_before_solving() {
        let config = SweepConfig {
            n: 16,
            s: 2,
            m_grid: vec![40],
            trials: 2,
            set_x: SetTemplate::parse("l1:0.01").unwrap(),
            ..SweepConfig::default()
        };
        assert!(matches!(run_sweep(&config), Err(Error::Config(_))));
    }
}
