//! Command-line front end.

use std::f64::consts::PI;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::check::{run_checks, CheckOptions};
use crate::emulator::{build_extended, kcc_emulated, EmulationSettings};
use crate::error::{Error, ErrorClass, Result};
use crate::jumptime::{jump_count_histogram, mc_unravel, UnravelConfig, DEFAULT_MC_DT};
use crate::lindblad::{amplitude_damping, Channel, LindbladModel};
use crate::ssh::{kcc_closed_form, winding_number, BlochParams, MomentumPair};
use crate::svg::{line_plot, Series};
use crate::sweep::{convergence, linspace, Axis, Method, PhaseResult, SweepConfig};

#[derive(Debug, Parser)]
#[command(name = "ssh-jumptime", version, about = "Jump-time topology of a dissipative SSH chain")]
pub struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Order parameter T(w) over a grid of intercell hoppings.
    Sweep {
        #[command(flatten)]
        sweep: SweepArgs,
        /// CSV output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write an SVG plot of Re T against w.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// One sweep per value of a discretization parameter.
    Convergence {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values of the varied parameter.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        sweep: SweepArgs,
        /// Output directory; one `<axis>_<value>.csv` per value.
        #[arg(long)]
        out: PathBuf,
        /// Also write an SVG with one curve per value.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Jump-time propagator K(p, p') for one momentum pair.
    Kcc {
        #[arg(long, default_value_t = 1.0)]
        v: f64,
        #[arg(long)]
        w: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long)]
        p: f64,
        #[arg(long = "pprime")]
        p_prime: f64,
        #[arg(long, default_value_t = 300.0)]
        tfinal: f64,
        #[arg(long, default_value_t = 300)]
        nfinal: usize,
        #[arg(long, default_value_t = 3)]
        ancilla: usize,
    },
    /// Winding number of the Bloch vector.
    Winding {
        #[arg(long, default_value_t = 1.0)]
        v: f64,
        #[arg(long)]
        w: f64,
        #[arg(long, default_value_t = 1000)]
        n_grid: usize,
    },
    /// Dump Monte-Carlo trajectories as JSON lines.
    Trajectories {
        #[arg(long, value_enum, default_value_t = ModelKind::AmplitudeDamping)]
        model: ModelKind,
        #[arg(long, default_value_t = 1000)]
        ntraj: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3.0)]
        tfinal: f64,
        #[arg(long, default_value_t = DEFAULT_MC_DT)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        v: f64,
        #[arg(long, default_value_t = 2.0)]
        w: f64,
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        #[arg(long = "pprime", default_value_t = PI / 2.0)]
        p_prime: f64,
        #[arg(long, default_value_t = 3)]
        ancilla: usize,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fast cross-oracle self-check; exit 0 iff every item passes.
    Check {
        /// RK4 substeps per unit time for master-equation items.
        #[arg(long)]
        substeps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Trajectories per Monte-Carlo item.
        #[arg(long)]
        ntraj: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    /// Two-level decay, starting excited.
    AmplitudeDamping,
    /// Ancilla-extended two-momentum SSH model.
    SshExtended,
}

/// Sweep settings; flags override values from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// TOML file whose keys mirror the sweep configuration fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub w_min: Option<f64>,
    #[arg(long)]
    pub w_max: Option<f64>,
    #[arg(long)]
    pub w_steps: Option<usize>,
    /// Explicit comma-separated w values.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["w_min", "w_max", "w_steps"])]
    pub w_list: Option<Vec<f64>>,
    #[arg(long)]
    pub ncir: Option<usize>,
    #[arg(long)]
    pub dp: Option<f64>,
    #[arg(long)]
    pub dq: Option<f64>,
    #[arg(long)]
    pub tfinal: Option<f64>,
    #[arg(long)]
    pub nfinal: Option<usize>,
    #[arg(long)]
    pub ancilla: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Drop the repeated endpoint of the momentum sum.
    #[arg(long)]
    pub corrected_sum: bool,
    /// Evaluate grid points on the gap-closing locus instead of skipping them.
    #[arg(long)]
    pub include_singular: bool,
}

impl SweepArgs {
    pub fn resolve(&self) -> Result<SweepConfig> {
        let mut cfg = match &self.config {
            Some(path) => SweepConfig::from_file(path)?,
            None => SweepConfig::default(),
        };
        macro_rules! set {
            ($flag:expr, $field:ident) => {
                if let Some(v) = $flag {
                    cfg.$field = v;
                }
            };
        }
        set!(self.v, v);
        set!(self.gamma, gamma);
        set!(self.ncir, n_cir);
        set!(self.dp, delta_p);
        set!(self.dq, delta_q);
        set!(self.tfinal, t_final);
        set!(self.nfinal, n_final);
        set!(self.ancilla, ancilla_dim);
        set!(self.seed, seed);
        set!(self.method, method);
        set!(self.w_list.clone(), w_grid);
        if self.w_min.is_some() || self.w_max.is_some() || self.w_steps.is_some() {
            let lo = self.w_min.unwrap_or(0.1);
            let hi = self.w_max.unwrap_or(2.0);
            let n = self.w_steps.unwrap_or(39);
            if !(hi >= lo) {
                return Err(Error::InvalidArgument(format!("w-max {hi} is below w-min {lo}")));
            }
            cfg.w_grid = linspace(lo, hi, n);
        }
        cfg.corrected_sum |= self.corrected_sum;
        cfg.include_singular |= self.include_singular;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

/// Parse arguments, run, and map errors to exit codes.
pub fn run_from_env() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let class = e.class();
            let report = ErrorReport {
                error: class.as_str(),
                message: e.to_string(),
            };
            eprintln!("{}", serde_json::to_string(&report).expect("serializable"));
            ExitCode::from(class.exit_code() as u8)
        }
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::InvalidArgument("--workers must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("cannot size worker pool: {e}")))?;
    }
    match cli.command {
        Command::Sweep { sweep, out, plot } => {
            let cfg = sweep.resolve()?;
            let result = cfg.run()?;
            log::info!(
                "{} rows, {} skipped, {:.2}s (version {})",
                result.rows.len(),
                result.skipped.len(),
                result.duration_secs,
                result.version
            );
            emit_csv(&result, out.as_deref())?;
            if let Some(path) = plot {
                let series = [Series {
                    label: cfg.method.as_str().into(),
                    points: result.re_curve(),
                }];
                fs::write(path, line_plot(&series, "w", "Re T"))?;
            }
        }
        Command::Convergence { axis, values, sweep, out, plot } => {
            let base = sweep.resolve()?;
            fs::create_dir_all(&out)?;
            let results = convergence(axis, &values, &base)?;
            let mut series = Vec::new();
            for (value, result) in &results {
                let path = out.join(format!("{}_{}.csv", axis.as_str(), value));
                emit_csv(result, Some(&path))?;
                series.push(Series {
                    label: format!("{} = {value}", axis.as_str()),
                    points: result.re_curve(),
                });
            }
            if let Some(path) = plot {
                fs::write(path, line_plot(&series, "w", "Re T"))?;
            }
        }
        Command::Kcc { v, w, gamma, p, p_prime, tfinal, nfinal, ancilla } => {
            let params = BlochParams::new(v, w, gamma)?;
            let pair = MomentumPair::new(p, p_prime)?;
            let exact = kcc_closed_form(&params, pair)?;
            let ext = build_extended(&params, pair, ancilla)?;
            let emulated = kcc_emulated(&ext, &EmulationSettings::new(tfinal, nfinal)?)?;
            let out = serde_json::json!({
                "v": v, "w": w, "gamma": gamma, "p": pair.p, "p_prime": pair.p_prime,
                "t_final": tfinal, "n_final": nfinal, "ancilla_dim": ancilla,
                "closed_form": [exact.re, exact.im],
                "emulated": [emulated.re, emulated.im],
            });
            println!("{out}");
        }
        Command::Winding { v, w, n_grid } => {
            let wind = winding_number(&BlochParams::new(v, w, 1.0)?, n_grid)?;
            println!("{}", serde_json::to_string(&wind).expect("serializable"));
        }
        Command::Trajectories {
            model,
            ntraj,
            seed,
            tfinal,
            dt,
            gamma,
            v,
            w,
            p,
            p_prime,
            ancilla,
            out,
        } => {
            let (lindblad, psi0) = match model {
                ModelKind::AmplitudeDamping => {
                    let z = num_complex::Complex64::new(0.0, 0.0);
                    (amplitude_damping(gamma)?, vec![z, num_complex::Complex64::new(1.0, 0.0)])
                }
                ModelKind::SshExtended => {
                    // the Hamiltonian does not depend on the rate; gamma = 0 keeps the operators
                    let rate = if gamma == 0.0 { 1.0 } else { gamma };
                    let ext = build_extended(&BlochParams::new(v, w, rate)?, MomentumPair::new(p, p_prime)?, ancilla)?;
                    let model = if gamma == 0.0 {
                        let ops = ext.model.channels().iter().map(|c| Channel::new(0.0, c.op.clone())).collect();
                        LindbladModel::new(ext.model.hamiltonian().clone(), ops)?
                    } else {
                        ext.model
                    };
                    (model, ext.initial_state)
                }
            };
            let cfg = UnravelConfig::new(tfinal, ntraj, seed).with_dt(dt);
            let records = mc_unravel(&lindblad, &psi0, &cfg)?;
            let mut buf = Vec::new();
            for rec in &records {
                let jumps: Vec<(f64, usize)> = rec.jump_events.iter().map(|e| (e.time, e.channel)).collect();
                let line = serde_json::json!({
                    "index": rec.index,
                    "seed": rec.seed,
                    "jumps": jumps,
                    "jump_count": rec.jumps_by(tfinal),
                });
                writeln!(buf, "{line}")?;
            }
            let summary = serde_json::json!({
                "summary": {
                    "t_final": tfinal,
                    "n_traj": ntraj,
                    "histogram": jump_count_histogram(&records, tfinal),
                }
            });
            writeln!(buf, "{summary}")?;
            write_output(&buf, out.as_deref())?;
        }
        Command::Check { substeps, seed, ntraj } => {
            let mut opts = CheckOptions::default();
            if let Some(s) = substeps {
                if s == 0 {
                    return Err(Error::InvalidArgument("--substeps must be ≥ 1".into()));
                }
                opts.substeps_per_unit = s;
            }
            if let Some(s) = seed {
                opts.seed = s;
            }
            if let Some(n) = ntraj {
                opts.n_traj = n;
            }
            let report = run_checks(&opts);
            let mut stdout = io::stdout().lock();
            for item in &report.items {
                writeln!(
                    stdout,
                    "{} {:<42} {:>7.2}s  {}",
                    if item.passed { "PASS" } else { "FAIL" },
                    item.name,
                    item.seconds,
                    item.detail
                )?;
            }
            if !report.all_passed() {
                return Ok(ExitCode::from(ErrorClass::Numerical.exit_code() as u8));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn emit_csv(result: &PhaseResult, path: Option<&Path>) -> Result<()> {
    write_output(result.to_csv_string().as_bytes(), path)
}

fn write_output(bytes: &[u8], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ssh-jumptime").chain(args.iter().copied())).unwrap()
    }

    fn sweep_args(args: &[&str]) -> SweepArgs {
        match parse(&[&["sweep"], args].concat()).command {
            Command::Sweep { sweep, .. } => sweep,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_fill_the_config() {
        let cfg = sweep_args(&["--w-list", "0.5,2", "--ncir", "40", "--dp", "0.02", "--method", "analytic"])
            .resolve()
            .unwrap();
        assert_eq!(cfg.w_grid, vec![0.5, 2.0]);
        assert_eq!((cfg.n_cir, cfg.delta_p, cfg.method), (40, 0.02, Method::Analytic));
    }

    #[test]
    fn range_flags_build_a_linspace() {
        let cfg = sweep_args(&["--w-min", "0.5", "--w-max", "1.5", "--w-steps", "3"]).resolve().unwrap();
        assert_eq!(cfg.w_grid, vec![0.5, 1.0, 1.5]);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        fs::write(&path, "n_cir = 20\ndelta_p = 0.05\nw_grid = [0.3]\n").unwrap();
        let cfg = sweep_args(&["--config", path.to_str().unwrap(), "--ncir", "30"]).resolve().unwrap();
        assert_eq!((cfg.n_cir, cfg.delta_p), (30, 0.05));
        assert_eq!(cfg.w_grid, vec![0.3]);
    }

    #[test]
    fn empty_and_inverted_grids_are_usage_errors() {
        let err = sweep_args(&["--w-steps", "0"]).resolve().unwrap_err();
        assert_eq!(err.class(), ErrorClass::Usage);
        let err = sweep_args(&["--w-min", "2", "--w-max", "1"]).resolve().unwrap_err();
        assert_eq!(err.class(), ErrorClass::Usage);
    }

    #[test]
    fn conflicting_grid_flags_are_rejected() {
        let res = Cli::try_parse_from(["ssh-jumptime", "sweep", "--w-list", "0.5", "--w-min", "0.2"]);
        assert!(res.is_err());
    }
}
