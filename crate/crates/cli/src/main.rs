use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mpks_core::diagnostics::{decay_fits, write_decay_csv, DecayRequest};
use mpks_core::evolution::{RunStatus, Trajectory};
use mpks_core::exponent::{display_exponent, parse_exponent};
use mpks_core::harness::{
    preset, preset_list, resolve_window, run_scenario, sweep, RunConfig, RunReport, SweepAxis,
    SweepOptions, DEFAULT_MAX_POINTS,
};
use mpks_core::heat::{verify_kernel_bounds, HeatKernelNorms, KernelQuadrature};
use mpks_core::{Error, MultiIndex, Result};

#[derive(Parser)]
#[command(name = "mpks", version, about = "Pseudo-spectral aggregation-diffusion simulator and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a TOML file or a preset name.
    Simulate {
        config: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the Cartesian product of one or more axes over a base config.
    Sweep {
        config: String,
        /// `key=v1,v2,...`; repeat for more axes.
        #[arg(long = "axis")]
        axes: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_POINTS)]
        max_points: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check the heat-kernel derivative bounds and print the bound table.
    VerifyKernel {
        #[arg(long)]
        beta_max: usize,
        #[arg(long)]
        k_max: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Comma-separated exponents, e.g. `1,4/3,2,4,inf`.
        #[arg(long, default_value = "1,4/3,2,4,inf")]
        q: String,
        #[arg(long, default_value = "0.1,1,10")]
        t: String,
        /// Starting resolution of the reference quadrature.
        #[arg(long, default_value_t = 64)]
        base_n: usize,
        /// Write the table here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Fit decay slopes on a stored trajectory (`.bin`, `.json` or run directory).
    FitDecay {
        trajectory: PathBuf,
        /// `beta:k:q`, e.g. `1,0:0:inf`; repeat for more. Defaults to
        /// `||rho||_q` for q = 2, 4, inf.
        #[arg(long = "request")]
        requests: Vec<String>,
        /// `lo,hi`; defaults to `[t_hi/16, t_hi]` with `t_hi` the earlier of the
        /// final time and the validity horizon.
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    Presets {
        /// Print the full TOML of one preset.
        #[arg(long)]
        show: Option<String>,
    },
}

/// Flags that mirror config keys; applied after the file, `--set` last.
#[derive(Args, Default)]
struct Overrides {
    /// `key=value` for any dotted config key; repeatable.
    #[arg(long = "set")]
    set: Vec<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n_per_axis: Option<usize>,
    #[arg(long)]
    box_length: Option<f64>,
    /// `etd`, `picard` or `heat_only`.
    #[arg(long)]
    engine: Option<String>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl Overrides {
    fn assignments(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push(format!("{key}={v}"));
            }
        };
        push("grid.dim", self.dim.map(|v| v.to_string()));
        push("grid.n_per_axis", self.n_per_axis.map(|v| v.to_string()));
        push("grid.box_length", self.box_length.map(float_literal));
        push("engine.kind", self.engine.as_ref().map(|v| format!("{v:?}")));
        push("time.t_final", self.t_final.map(float_literal));
        push("datum.mass", self.mass.map(float_literal));
        push("datum.sigma", self.sigma.map(float_literal));
        push("seed", self.seed.map(|v| v.to_string()));
        push("output.dir", self.output_dir.as_ref().map(|p| format!("{:?}", p.display().to_string())));
        out.extend(self.set.iter().cloned());
        out
    }
}

fn float_literal(v: f64) -> String {
    format!("{v:?}")
}

fn load_config(source: &str, overrides: &Overrides) -> Result<RunConfig> {
    let path = Path::new(source);
    let mut config = if path.exists() { RunConfig::load(path)? } else { preset(source)? };
    config.apply_overrides(&overrides.assignments())?;
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Simulate { config, overrides } => {
            let config = load_config(&config, &overrides)?;
            let report = run_scenario(&config)?;
            print_report(&report);
            Ok(report.exit_code())
        }
        Command::Sweep { config, axes, max_points, overrides } => {
            let base = load_config(&config, &overrides)?;
            let axes: Vec<SweepAxis> = axes.iter().map(|a| a.parse()).collect::<Result<_>>()?;
            let report = sweep(&base, &axes, &SweepOptions { max_points })?;
            let mut worst = 0;
            for p in &report.points {
                let values: Vec<String> = p.assignments.iter().map(|(k, v)| format!("{k}={v}")).collect();
                match &p.outcome {
                    Ok(r) => println!(
                        "[{}] {} -> {} exit {} class {}",
                        p.index,
                        values.join(" "),
                        r.run_dir.display(),
                        r.exit_code(),
                        r.classification.map(|c| format!("{c:?}")).unwrap_or_else(|| "-".into())
                    ),
                    Err(e) => println!("[{}] {} -> failed: {e}", p.index, values.join(" ")),
                }
                worst = worst.max(p.exit_code());
            }
            println!("summary: {}", report.summary_csv.display());
            Ok(worst)
        }
        Command::VerifyKernel { beta_max, k_max, dim, q, t, base_n, csv } => {
            let q_list = split_list(&q, parse_exponent)?;
            let t_list = split_list(&t, |s| {
                s.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad time {s:?}")))
            })?;
            let quadrature = KernelQuadrature { base_n, ..KernelQuadrature::default() };
            let norms = HeatKernelNorms::with_quadrature(dim, quadrature);
            let report = verify_kernel_bounds(&norms, beta_max, k_max, &q_list, &t_list)?;
            match csv {
                Some(path) => report.write_csv(std::fs::File::create(path)?)?,
                None => report.write_csv(std::io::stdout().lock())?,
            }
            eprintln!(
                "d={} entries={} max_ratio={:.6} max_exponent_error={:.3e} C0={:.6e} M0={:.6e} max_n={}",
                report.dim,
                report.entries.len(),
                report.max_ratio(),
                report.max_exponent_error,
                report.implied_c0.max(report.minimal_c0),
                report.implied_m0,
                report.max_resolution
            );
            // the binding entries sit at ratio 1 up to round-off
            let ok = report.max_ratio() <= 1.0 + 1e-12 && report.max_exponent_error <= 1e-12;
            Ok(if ok { 0 } else { 4 })
        }
        Command::FitDecay { trajectory, requests, window, csv } => {
            let (bin, json) = trajectory_paths(&trajectory);
            let traj = Trajectory::load(&bin, &json)?;
            let dim = traj.grid.dim();
            let requests: Vec<DecayRequest> = if requests.is_empty() {
                [2.0, 4.0, f64::INFINITY]
                    .iter()
                    .map(|&q| DecayRequest { beta: MultiIndex::zero(dim), k: 0, q })
                    .collect()
            } else {
                requests.iter().map(|r| parse_request(r, dim)).collect::<Result<_>>()?
            };
            let requested = match window {
                Some(w) => {
                    let v = split_list(&w, |s| {
                        s.parse::<f64>().map_err(|_| Error::Config(format!("bad window bound {s:?}")))
                    })?;
                    if v.len() != 2 {
                        return Err(Error::Config("window needs lo,hi".into()));
                    }
                    Some([v[0], v[1]])
                }
                None => None,
            };
            let window = resolve_window(requested, &traj.grid, traj.final_time()).map_err(Error::InvalidArgument)?;
            let results = decay_fits(&traj, &requests, window)?;
            let mut fits = Vec::new();
            let mut failed = false;
            for (r, fit) in requests.iter().zip(results) {
                match fit {
                    Ok(f) => fits.push(f),
                    Err(e) => {
                        failed = true;
                        eprintln!("beta={} k={} q={}: {e}", r.beta, r.k, display_exponent(r.q));
                    }
                }
            }
            match csv {
                Some(path) => write_decay_csv(&fits, std::fs::File::create(path)?)?,
                None => write_decay_csv(&fits, std::io::stdout().lock())?,
            }
            Ok(if failed { 4 } else { 0 })
        }
        Command::Presets { show } => {
            match show {
                Some(name) => print!("{}", preset(&name)?.to_toml()?),
                None => {
                    for p in preset_list() {
                        println!("{:<18} {}", p.name, p.description);
                    }
                }
            }
            Ok(0)
        }
    }
}

fn print_report(r: &RunReport) {
    println!("run {} ({})", &r.config_hash[..16], r.label);
    println!("  dir        {}", r.run_dir.display());
    match &r.status {
        RunStatus::Completed => println!("  status     completed"),
        RunStatus::Aborted { reason, time, detail } => {
            println!("  status     aborted at t = {time:.6}: {reason:?} ({detail})")
        }
    }
    let s = &r.summary;
    println!(
        "  steps      {} to t = {:.6}, mass drift {:.3e}, peak growth {:.3}",
        s.steps, s.final_time, s.mass_drift, s.peak_growth
    );
    if let Some(c) = r.classification {
        println!("  class      {c:?}");
    }
    for f in &r.decay {
        println!(
            "  decay      beta={} k={} q={}: slope {:.4} (predicted {:.4})",
            f.beta,
            f.k,
            display_exponent(f.q),
            f.slope,
            f.predicted_slope
        );
    }
    for f in &r.failures {
        println!("  FAILED     {} {}: {}", f.diagnostic, f.target, f.error);
    }
    for w in &r.warnings {
        println!("  warning    {w}");
    }
}

fn split_list<T>(text: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    text.split(',').map(|s| parse(s.trim())).collect()
}

/// `beta:k:q` with `beta` comma-separated.
fn parse_request(text: &str, dim: usize) -> Result<DecayRequest> {
    let bad = || Error::Config(format!("request {text:?} is not beta:k:q"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let beta = MultiIndex(split_list(parts[0], |s| s.parse::<usize>().map_err(|_| bad()))?);
    if beta.dim() != dim {
        return Err(Error::Config(format!("multi-index {beta} does not match dimension {dim}")));
    }
    let k = parts[1].trim().parse().map_err(|_| bad())?;
    let q = parse_exponent(parts[2]).map_err(|e| Error::Config(e.to_string()))?;
    Ok(DecayRequest { beta, k, q })
}

fn trajectory_paths(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        return (path.join("trajectory.bin"), path.join("trajectory.json"));
    }
    (path.with_extension("bin"), path.with_extension("json"))
}
