use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tlasso::experiments::{run_to_files, write_csv, SetTemplate, SweepConfig, SweepKind, WidthRow};
use tlasso::geometry::{
    descent_cone_complexity_mc, descent_cone_width_mc, gaussian_complexity_mc, gaussian_width_mc,
    local_gaussian_width_mc, rsv_check, sample_descent_cone, DEFAULT_TRIALS,
};
use tlasso::links::{link_params, mean_variance, DEFAULT_ORDER};
use tlasso::solver::error_breakdown;
use tlasso::{
    generate_instance, solve_tlasso, ConstraintSet, Error, InstanceSpec, LinkFunction, ProblemInstance,
    Result, SolveOptions,
};

#[derive(Parser)]
#[command(name = "tlasso", version, about = "T-Lasso recovery from corrupted non-linear measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random instance and save it.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Signal sparsity.
        #[arg(long, default_value_t = 1)]
        s: usize,
        /// Corruption sparsity.
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value = "identity")]
        link: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print μ, σ and ψ̂ for a link.
    Params {
        link: String,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
    },
    /// Solve a saved instance.
    Solve {
        instance: PathBuf,
        /// Set for x, e.g. `l1:anchor`, `l1:2.5`, `full`.
        #[arg(long, default_value = "l1:anchor")]
        set_x: String,
        #[arg(long, default_value = "l1:anchor")]
        set_v: String,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Gradient-mapping tolerance; defaults to 1e-8·√m.
        #[arg(long)]
        tol: Option<f64>,
        /// Write `iteration,objective` per iteration.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Gaussian width (or complexity) of a set.
    Width {
        set: String,
        #[command(flatten)]
        common: WidthArgs,
        #[arg(long)]
        complexity: bool,
    },
    /// Local Gaussian width `ω_t` of a star-shaped set.
    LocalWidth {
        set: String,
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        common: WidthArgs,
    },
    /// Width of the descent cone of `T` at the truth of an instance.
    ConeWidth {
        instance: PathBuf,
        #[arg(long, default_value = "l1:anchor")]
        set_x: String,
        #[arg(long, default_value = "l1:anchor")]
        set_v: String,
        #[command(flatten)]
        common: WidthArgs,
        #[arg(long)]
        complexity: bool,
    },
    /// Smallest `‖Φa + √m·b‖` over sampled descent-cone directions.
    RsvCheck {
        instance: PathBuf,
        #[arg(long, default_value = "l1:anchor")]
        set_x: String,
        #[arg(long, default_value = "l1:anchor")]
        set_v: String,
        #[arg(long, default_value_t = 500)]
        directions: usize,
        #[command(flatten)]
        common: WidthArgs,
    },
    /// Error-vs-m or corruption sweep from a config file.
    Sweep(SweepArgs),
    /// Success-rate phase diagram from a config file.
    Phase(SweepArgs),
    /// Local-width t sweep from a config file.
    Tsweep(SweepArgs),
}

#[derive(Args)]
struct WidthArgs {
    /// Dimension of each leaf of the set, comma-separated.
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    /// Override a config key, `key=value`. May repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { n, m, s, k, amplitude, link, seed, output } => {
            let spec = InstanceSpec {
                n,
                m,
                signal_sparsity: s,
                corruption_sparsity: k,
                corruption_amplitude: amplitude,
                link: link.parse()?,
                seed,
            };
            generate_instance(&spec)?.save(&output)?;
            println!("wrote {}", output.display());
            Ok(())
        }
        Command::Params { link, order } => {
            let link: LinkFunction = link.parse()?;
            let params = link_params(&link, order)?;
            println!("link,mu,sigma,psi_hat,order");
            println!("{link},{},{},{},{}", params.mu, params.sigma, params.psi_hat, params.quadrature_order);
            Ok(())
        }
        Command::Solve { instance, set_x, set_v, max_iters, tol, trace } => {
            let inst = ProblemInstance::load(&instance)?;
            let mu = mean_variance(&inst.link, DEFAULT_ORDER)?.0;
            let (sx, sv) = resolve_pair(&inst, &set_x, &set_v, mu)?;
            let mut opts = SolveOptions::for_measurements(inst.m());
            if let Some(iters) = max_iters {
                opts.max_iters = iters;
            }
            if let Some(tol) = tol {
                opts.grad_map_tol = tol;
            }
            let result = solve_tlasso(&inst, &sx, &sv, &opts)?;
            let err = error_breakdown(&result.x_hat, &result.v_hat, &inst, mu)?;
            if let Some(path) = trace {
                let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
                writeln!(out, "iteration,objective")?;
                for (i, value) in result.objective_trace.iter().enumerate() {
                    writeln!(out, "{i},{value}")?;
                }
                out.flush()?;
            }
            println!(
                "seed={} iterations={} converged={} residual={:.6e} joint_error={:.6e}",
                inst.seed, result.iterations, result.converged, result.final_residual_norm, err.joint
            );
            Ok(())
        }
        Command::Width { set, common, complexity } => {
            let parsed = ConstraintSet::parse(&set, &common.dims)?;
            let estimate = if complexity {
                gaussian_complexity_mc(&parsed, common.trials, common.seed)?
            } else {
                gaussian_width_mc(&parsed, common.trials, common.seed)?
            };
            emit_width(&[WidthRow::from_estimate(&estimate, &set, common.seed)], common.output.as_deref())
        }
        Command::LocalWidth { set, t, common } => {
            let parsed = ConstraintSet::parse(&set, &common.dims)?;
            let estimate = local_gaussian_width_mc(&parsed, t, common.trials, common.seed)?;
            emit_width(&[WidthRow::from_estimate(&estimate, &set, common.seed)], common.output.as_deref())
        }
        Command::ConeWidth { instance, set_x, set_v, common, complexity } => {
            let inst = ProblemInstance::load(&instance)?;
            let mu = mean_variance(&inst.link, DEFAULT_ORDER)?.0;
            let (sx, sv) = resolve_pair(&inst, &set_x, &set_v, mu)?;
            let anchor_x = &inst.x_star * mu;
            let anchor = (&anchor_x, &inst.v_star);
            let estimate = if complexity {
                descent_cone_complexity_mc(&sx, &sv, anchor, common.trials, common.seed)?
            } else {
                descent_cone_width_mc(&sx, &sv, anchor, common.trials, common.seed)?
            };
            let label = format!("prod({set_x},{set_v})");
            emit_width(&[WidthRow::from_estimate(&estimate, &label, common.seed)], common.output.as_deref())
        }
        Command::RsvCheck { instance, set_x, set_v, directions, common } => {
            let inst = ProblemInstance::load(&instance)?;
            let mu = mean_variance(&inst.link, DEFAULT_ORDER)?.0;
            let (sx, sv) = resolve_pair(&inst, &set_x, &set_v, mu)?;
            let anchor_x = &inst.x_star * mu;
            let cone = sample_descent_cone(&sx, &sv, (&anchor_x, &inst.v_star), directions, common.seed)?;
            let report = rsv_check(&inst, &cone, common.trials)?;
            let label = format!("prod({set_x},{set_v})");
            let directions_used = cone.directions.len();
            let scalar = |quantity: &str, value: f64, trials: usize| WidthRow {
                quantity: quantity.into(),
                set: label.clone(),
                t: None,
                mean: value,
                std_error: 0.0,
                trials,
                seed: common.seed,
            };
            let rows = [
                scalar("rsv_min", report.empirical_min, directions_used),
                scalar("sqrt_m", report.sqrt_m, directions_used),
                WidthRow::from_estimate(&report.gamma, &label, common.seed),
                scalar("implied_constant", report.implied_constant, directions_used),
            ];
            emit_width(&rows, common.output.as_deref())
        }
        Command::Sweep(args) => run_sweep_command(args, None),
        Command::Phase(args) => run_sweep_command(args, Some(SweepKind::PhaseDiagram)),
        Command::Tsweep(args) => run_sweep_command(args, Some(SweepKind::TSweep)),
    }
}

/// Resolves the two set strings against the truth `(μx⋆, v⋆)` of `inst`.
fn resolve_pair(
    inst: &ProblemInstance,
    set_x: &str,
    set_v: &str,
    mu: f64,
) -> Result<(ConstraintSet, ConstraintSet)> {
    let anchor_x = &inst.x_star * mu;
    let sx = SetTemplate::parse(set_x)?.resolve(&anchor_x)?;
    let sv = SetTemplate::parse(set_v)?.resolve(&inst.v_star)?;
    Ok((sx, sv))
}

fn emit_width(rows: &[WidthRow], output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => write_csv(path, rows),
        None => {
            let mut writer = csv::Writer::from_writer(std::io::stdout().lock());
            for row in rows {
                writer.serialize(row)?;
            }
            writer.flush()?;
            Ok(())
        }
    }
}

fn run_sweep_command(args: SweepArgs, forced: Option<SweepKind>) -> Result<()> {
    let mut config = SweepConfig::from_file(&args.config)?;
    for item in &args.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
        config.set(key.trim(), value.trim())?;
    }
    if let Some(path) = args.output {
        config.output = Some(path);
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    match forced {
        Some(kind) => config.kind = kind,
        None if matches!(config.kind, SweepKind::PhaseDiagram | SweepKind::TSweep) => {
            return Err(Error::Config(format!(
                "kind {} has its own subcommand; use `phase` or `tsweep`",
                config.kind
            )));
        }
        None => {}
    }
    let outputs = run_to_files(&config)?;
    println!("wrote {}", outputs.csv.display());
    if let Some(extra) = &outputs.extra_csv {
        println!("wrote {}", extra.display());
    }
    println!("wrote {}", outputs.manifest.display());
    for (key, value) in &outputs.summary {
        println!("{key} = {value}");
    }
    Ok(())
}
