//! `multiplab`: run, verify and list experiments, and call the brute-force
//! oracles directly.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for
//! usage, config and I/O errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use multiplab::chebyshev::verify_double_minimum;
use multiplab::experiments::{
    bundled, bundled_names, field_derivative_1d, run, verify_report_file, ExperimentConfig, RunOptions,
};
use multiplab::hilbert::{default_eps_s, Perturbation, Point, SetSpec};
use multiplab::kirchhoff::{residual_check, DiscreteState, Forcing, KirchhoffProblem, Omega, Reaction};
use multiplab::three_solutions::{scalar_three_roots, FieldSpec};

#[derive(Parser)]
#[command(name = "multiplab", version, about = "Multiplicity experiments: run, verify, list, oracle")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a bundled config by name.
    Run(RunArgs),
    /// Re-check the witnesses stored in a report.
    Verify { report: PathBuf },
    /// List the bundled configs.
    List {
        /// Print the JSON of one bundled config.
        #[arg(long)]
        show: Option<String>,
    },
    /// Direct brute-force tools.
    #[command(subcommand)]
    Oracle(Oracle),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a JSON config, or the name of a bundled config.
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's `output_dir`, else `reports`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Multiplies sample counts, lattice sizes and start counts.
    #[arg(long, default_value_t = 1.0)]
    budget_scale: f64,
}

#[derive(Subcommand)]
enum Oracle {
    /// Bisection roots of `x + a J'(x) = b` on `[lo, hi]`.
    Roots {
        /// `sin`, `cos`, or a formula in `x`
        #[arg(long, default_value = "sin")]
        j: String,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = 2000)]
        brackets: usize,
    },
    /// Minimizer clusters of `|x − y0|^2 + phi(x)` over a sampled set.
    Nearest {
        /// Set CSV with header `dim,c0,c1,...`
        #[arg(long)]
        set: PathBuf,
        /// Comma-separated coordinates of `y0`.
        #[arg(long, allow_hyphen_values = true)]
        y0: String,
        /// Comma-separated perturbation values, one per sample.
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<String>,
        #[arg(long)]
        eps_s: Option<f64>,
    },
    /// Discrete residual of a Kirchhoff state CSV (header `t,u`).
    Residual {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value = "linear")]
        f: String,
        #[arg(long, default_value = "inv-gap")]
        omega: String,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        /// Comma-separated trig coefficients of alpha.
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        alpha: String,
        /// Comma-separated trig coefficients of beta.
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        beta: String,
    },
}

/// `println!` that reports a closed stdout as an error instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout().lock(), $($arg)*)?
    };
}

/// A failed check, as opposed to a usage or I/O error.
struct ChecksFailed;

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("`{t}` is not a number")))
        .collect()
}

fn load_config(arg: &str) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let path = Path::new(arg);
    if path.is_file() {
        let cfg = ExperimentConfig::from_file(path).with_context(|| format!("reading config {}", path.display()))?;
        return Ok((cfg, path.parent().map(Path::to_path_buf)));
    }
    if bundled_names().contains(&arg) {
        return Ok((bundled(arg)?, None));
    }
    bail!("`{arg}` is neither a config file nor a bundled config (see `multiplab list`)")
}

fn cmd_run(args: &RunArgs) -> Result<std::result::Result<(), ChecksFailed>> {
    let (cfg, base_dir) = load_config(&args.config)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("reports"));
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let opts = RunOptions {
        budget_scale: args.budget_scale,
        seed: args.seed,
        out_dir: Some(out_dir.clone()),
        base_dir,
    };
    info!("running {} ({})", cfg.name, cfg.kind());
    let out = run(&cfg, &opts)?;
    let report_path = out_dir.join(format!("{}.report.json", out.report.name));
    out.report.write(&report_path).with_context(|| format!("writing {}", report_path.display()))?;
    let timings_path = out_dir.join(format!("{}.timings.json", out.report.name));
    std::fs::write(&timings_path, out.timings.to_json()?)
        .with_context(|| format!("writing {}", timings_path.display()))?;

    for c in &out.report.checks {
        out!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for w in &out.report.warnings {
        out!("WARN {w}");
    }
    out!(
        "{}: {} witness(es), report {} ({:.2}s)",
        out.report.name,
        out.report.witnesses.len(),
        report_path.display(),
        out.timings.total_seconds
    );
    Ok(if out.report.passed() { Ok(()) } else { Err(ChecksFailed) })
}

fn cmd_verify(path: &Path) -> Result<std::result::Result<(), ChecksFailed>> {
    let v = verify_report_file(path).with_context(|| format!("verifying {}", path.display()))?;
    for c in &v.checks {
        out!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for w in &v.warnings {
        out!("WARN {w}");
    }
    out!("{}", if v.passed { "verified" } else { "verification failed" });
    Ok(if v.passed { Ok(()) } else { Err(ChecksFailed) })
}

fn cmd_list(show: Option<&str>) -> Result<()> {
    if let Some(name) = show {
        let text = multiplab::experiments::BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .with_context(|| format!("no bundled config named `{name}`"))?;
        write!(std::io::stdout().lock(), "{text}")?;
        return Ok(());
    }
    for name in bundled_names() {
        let cfg = bundled(name)?;
        out!("{name:<24} {}", cfg.kind());
    }
    Ok(())
}

fn field_from_arg(s: &str) -> FieldSpec {
    match s {
        "sin" => FieldSpec::Sin { amplitude: 1.0 },
        "cos" => FieldSpec::Cos { amplitude: 1.0 },
        other => FieldSpec::Expression { expr: other.to_string() },
    }
}

fn cmd_oracle(o: &Oracle) -> Result<std::result::Result<(), ChecksFailed>> {
    match o {
        Oracle::Roots { j, a, b, lo, hi, brackets } => {
            if !(lo < hi) || *brackets == 0 {
                bail!("need lo < hi and at least one bracket");
            }
            let dj = field_derivative_1d(&field_from_arg(j))?;
            let r = scalar_three_roots(&*dj, *a, *b, *lo, *hi, *brackets);
            out!("{} root(s)", r.count);
            for x in r.roots {
                out!("{x:.15}");
            }
        }
        Oracle::Nearest { set, y0, phi, eps_s } => {
            let set = SetSpec::read_csv(set).with_context(|| format!("reading {}", set.display()))?;
            let y0 = Point(parse_list(y0)?);
            let phi = match phi {
                Some(s) => Perturbation::from_values(parse_list(s)?)?,
                None => Perturbation::zero(set.len()),
            };
            let eps_s = eps_s.unwrap_or_else(|| default_eps_s(&set));
            let v = verify_double_minimum(&y0, set.samples(), &phi, None, eps_s)?;
            out!("min {:.15e}, {} cluster(s)", v.objective_min, v.cluster_count);
            for c in &v.clusters {
                out!("{} ({} sample(s))", c.representative, c.members.len());
            }
        }
        Oracle::Residual { state, f, omega, rho, alpha, beta } => {
            let st = DiscreteState::read_csv(state).with_context(|| format!("reading {}", state.display()))?;
            let problem = KirchhoffProblem::new(Reaction::parse(f)?, Omega::parse(omega)?, *rho, st.u.len())?;
            let forcing = Forcing::new(parse_list(alpha)?, parse_list(beta)?, &problem)?;
            let r = residual_check(&st, &problem, &forcing)?;
            out!("n {} q {:.15} residual {:.6e} q margin {:.6e}", st.u.len(), st.q, r.residual, r.q_margin);
        }
    }
    Ok(Ok(()))
}

fn dispatch(cli: &Cli) -> Result<std::result::Result<(), ChecksFailed>> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify { report } => cmd_verify(report),
        Command::List { show } => cmd_list(show.as_deref()).map(Ok),
        Command::Oracle(o) => cmd_oracle(o),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(ChecksFailed)) => ExitCode::from(1),
        // a downstream pipe closed early, e.g. `multiplab list | head`
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
