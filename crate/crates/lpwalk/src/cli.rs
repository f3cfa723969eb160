//! Command-line front end.
//!
//! Exit status: 0 on success, 2 on invalid configuration, 3 when a run is
//! refused for exceeding the memory cap (`LPWALK_MEM_CAP`, counted in
//! stored reals), 1 on IO failure.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lpwalk_core::walk_engine::DEFAULT_MEM_CAP;
use lpwalk_core::{
    gh_exact_small, gh_lower_bound_diameter, lp_norm, mp_closed_form, simulate_decomposition, simulate_grid,
    FiniteMetricSpace, IncrementLaw, SeedSpec, WalkConfig,
};

use crate::experiments::{
    run_bivariate_moment_convergence, run_convergence_sweep, run_martingale_check, run_moment_convergence,
    Execution, PlanPoint, Statistic, SweepPlan,
};
use crate::formats::{read_metric_space, snapshot_table};
use crate::report::{fmt_real, to_json, Cell, ConfigEcho, ErasedSection, Table};
use crate::{Error, Result};

pub const MEM_CAP_ENV: &str = "LPWALK_MEM_CAP";

#[derive(Debug, Parser)]
#[command(name = "lpwalk", version, about = "Random walks in high-dimensional l_p spaces and their limit metric")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print M_p, the p-th absolute moment of a standard normal.
    Mp(MpArgs),
    /// Dump one walk's grid snapshot as `i,t_i,coord_index,value`.
    Simulate(WalkArgs),
    /// Print the T/Q decomposition of ‖S_j‖_p^p at the grid steps.
    Decompose(WalkArgs),
    /// Run a replicated convergence sweep.
    Converge(ConvergeArgs),
    /// Tabulate E|S_n/(σ√n)|^p against M_p.
    Moments(MomentArgs),
    /// Tabulate the bivariate moment of a correlated pair against its Gaussian limit.
    Bimoments(BimomentArgs),
    /// Check T monotonicity, the decomposition identity and Doob's bound for Q.
    Martingale(MartingaleArgs),
    /// Gromov–Hausdorff distance between two small metric spaces.
    Gh(GhArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct MpArgs {
    #[arg(long)]
    pub p: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct WalkArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub p: f64,
    /// rademacher, uniform, normal, cexp or rademacher:c=<real>.
    #[arg(long, default_value = "rademacher", value_parser = parse_law)]
    pub law: IncrementLaw,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid subintervals; defaults to min(n, 512).
    #[arg(long)]
    pub m: Option<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    /// Sweep points as NxD, comma separated, d nondecreasing.
    #[arg(long, value_delimiter = ',', required_unless_present = "plan")]
    pub points: Vec<PlanPoint>,
    /// One or more exponents, comma separated.
    #[arg(long, value_delimiter = ',', required_unless_present = "plan")]
    pub p: Vec<f64>,
    #[arg(long, default_value = "rademacher", value_parser = parse_law)]
    pub law: IncrementLaw,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    /// Statistics to compute, comma separated; all by default.
    #[arg(long, value_delimiter = ',')]
    pub stats: Vec<Statistic>,
    /// JSON sweep plan; replaces the plan flags.
    #[arg(long, conflicts_with_all = ["points", "p", "law", "seed", "m", "replicates", "stats"])]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct MomentArgs {
    #[arg(long, default_value = "rademacher", value_parser = parse_law)]
    pub law: IncrementLaw,
    #[arg(long)]
    pub p: f64,
    /// Walk lengths, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct BimomentArgs {
    #[command(flatten)]
    pub moments: MomentArgs,
    /// Correlation of the pair, in [-1, 1].
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,
}

#[derive(Debug, Clone, Args)]
pub struct MartingaleArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value = "rademacher", value_parser = parse_law)]
    pub law: IncrementLaw,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub replicates: usize,
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct GhArgs {
    /// Compare {0, e_1} with {0, (a^{1/p}, (1-a)^{1/p}, 0)} under the l_p norm.
    #[arg(long, requires_all = ["p", "a"], conflicts_with_all = ["space_a", "space_b"])]
    pub two_point_example: bool,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    /// Metric-space file for the first space.
    #[arg(long, requires = "space_b", required_unless_present = "two_point_example")]
    pub space_a: Option<PathBuf>,
    /// Metric-space file for the second space.
    #[arg(long, requires = "space_a")]
    pub space_b: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

fn parse_law(s: &str) -> std::result::Result<IncrementLaw, String> {
    s.parse().map_err(|e: lpwalk_core::Error| e.to_string())
}

/// Parses and runs; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lpwalk: {e}");
            e.exit_code()
        }
    }
}

fn mem_cap() -> Result<u128> {
    match std::env::var(MEM_CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{MEM_CAP_ENV} must be a nonnegative integer, got {v:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_MEM_CAP),
        Err(e) => Err(Error::Config(format!("{MEM_CAP_ENV}: {e}"))),
    }
}

fn execution(threads: Option<usize>) -> Result<Execution> {
    let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(Error::Config("threads must be >= 1".into()));
    }
    Ok(Execution { threads, mem_cap: mem_cap()? })
}

fn output_echo(cfg: &mut ConfigEcho, command: &str, output: &Output) {
    cfg.set("command", command);
    cfg.set("format", if output.format == Format::Csv { "csv" } else { "json" });
    cfg.set("out", output.out.as_ref().map_or_else(|| "-".to_string(), |p| p.display().to_string()));
}

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Mp(a) => {
            let mut cfg = ConfigEcho::default();
            output_echo(&mut cfg, "mp", &a.output);
            cfg.set("p", a.p);
            let m = mp_closed_form(a.p)?;
            emit_scalar(&a.output, &cfg, &[("m_p", m)])
        }
        Command::Simulate(a) => {
            let (cfg, echo) = walk_config(a, "simulate")?;
            cfg.validate()?;
            let snap = simulate_grid(&cfg)?;
            emit(&a.output, &echo, &[("snapshot", &snapshot_table(&snap))], None)
        }
        Command::Decompose(a) => {
            let (cfg, mut echo) = walk_config(a, "decompose")?;
            let trace = simulate_decomposition(&cfg)?;
            let mut t = Table::new(&["step", "time", "T", "Q", "norm_pp"]);
            for (j, tj, qj) in trace.thinned(cfg.m) {
                t.push(vec![j.into(), (j as f64 / cfg.n as f64).into(), tj.into(), qj.into(), trace.norm_pp[j].into()]);
            }
            echo.set("identity_residual", trace.identity_residual());
            echo.set("t_violations", trace.monotonicity_violations(crate::experiments::T_MONOTONE_TOL));
            emit(&a.output, &echo, &[("trace", &t)], None)
        }
        Command::Converge(a) => converge(a),
        Command::Moments(a) => {
            let exec = execution(a.threads)?;
            let mut echo = ConfigEcho::default();
            moment_echo(&mut echo, "moments", a, &exec);
            let table = run_moment_convergence(a.law, a.p, &a.n, a.replicates, a.seed, &exec)?;
            emit(&a.output, &echo, &[("moments", &table.table())], None)
        }
        Command::Bimoments(b) => {
            let a = &b.moments;
            let exec = execution(a.threads)?;
            let mut echo = ConfigEcho::default();
            moment_echo(&mut echo, "bimoments", a, &exec);
            echo.set("rho", b.rho);
            let table = run_bivariate_moment_convergence(a.law, b.rho, a.p, &a.n, a.replicates, a.seed, &exec)?;
            emit(&a.output, &echo, &[("moments", &table.table())], None)
        }
        Command::Martingale(a) => {
            let exec = execution(a.threads)?;
            let cfg = WalkConfig::new(a.n, a.d, a.p, a.law, SeedSpec::new(a.seed, 0))
                .with_m(a.n.clamp(1, lpwalk_core::walk_engine::DEFAULT_MAX_GRID))
                .with_mem_cap(exec.mem_cap);
            let mut echo = ConfigEcho::default();
            output_echo(&mut echo, "martingale", &a.output);
            for (k, v) in [("n", a.n), ("d", a.d)] {
                echo.set(k, v);
            }
            echo.set("p", a.p);
            echo.set("law", a.law.to_string());
            echo.set("master_seed", a.seed);
            echo.set("replicates", a.replicates);
            echo.set("threads", exec.threads);
            echo.set("mem_cap", exec.mem_cap.to_string());
            let diag = run_martingale_check(&cfg, a.replicates, &exec)?;
            emit(&a.output, &echo, &[("diagnostics", &diag.table())], None)
        }
        Command::Gh(a) => gh(a),
    }
}

fn walk_config(a: &WalkArgs, command: &str) -> Result<(WalkConfig, ConfigEcho)> {
    let mut cfg = WalkConfig::new(a.n, a.d, a.p, a.law, SeedSpec::new(a.seed, 0)).with_mem_cap(mem_cap()?);
    if let Some(m) = a.m {
        cfg = cfg.with_m(m);
    }
    let mut echo = ConfigEcho::default();
    output_echo(&mut echo, command, &a.output);
    echo.set("n", a.n);
    echo.set("d", a.d);
    echo.set("p", a.p);
    echo.set("law", a.law.to_string());
    echo.set("master_seed", a.seed);
    echo.set("replicate_index", 0u64);
    echo.set("m", cfg.m);
    echo.set("mem_cap", cfg.mem_cap.to_string());
    Ok((cfg, echo))
}

fn moment_echo(echo: &mut ConfigEcho, command: &str, a: &MomentArgs, exec: &Execution) {
    output_echo(echo, command, &a.output);
    echo.set("law", a.law.to_string());
    echo.set("p", a.p);
    echo.set("n", a.n.iter().map(usize::to_string).collect::<Vec<_>>().join(";"));
    echo.set("replicates", a.replicates);
    echo.set("master_seed", a.seed);
    echo.set("threads", exec.threads);
}

fn converge(a: &ConvergeArgs) -> Result<()> {
    let plan = match &a.plan {
        Some(path) => serde_json::from_reader::<_, SweepPlan>(BufReader::new(File::open(path)?))?,
        None => SweepPlan {
            points: a.points.clone(),
            p: a.p.clone(),
            law: a.law,
            replicates: a.replicates,
            master_seed: a.seed,
            m: a.m,
            statistics: if a.stats.is_empty() { Statistic::ALL.to_vec() } else { a.stats.clone() },
        },
    };
    plan.validate()?;
    let exec = execution(a.threads)?;
    let mut echo = ConfigEcho::default();
    output_echo(&mut echo, "converge", &a.output);
    plan.echo(&mut echo);
    echo.set("threads", exec.threads);
    echo.set("mem_cap", exec.mem_cap.to_string());
    if let Some(path) = &a.plan {
        echo.set("plan", path.display().to_string());
    }
    let report = run_convergence_sweep(&plan, &exec)?;
    let aggregates = report.aggregates_table();
    emit(&a.output, &echo, &[("rows", &report.values_table()), ("aggregates", &aggregates)], Some(&aggregates))
}

fn gh(a: &GhArgs) -> Result<()> {
    let mut echo = ConfigEcho::default();
    output_echo(&mut echo, "gh", &a.output);
    let (x, y) = if a.two_point_example {
        let (p, t) = (a.p.unwrap(), a.a.unwrap());
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::Config(format!("p must be finite and >= 1, got {p}")));
        }
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Config(format!("a must lie in (0, 1), got {t}")));
        }
        echo.set("example", "two-point");
        echo.set("p", p);
        echo.set("a", t);
        let h = [t.powf(1.0 / p), (1.0 - t).powf(1.0 / p), 0.0];
        let two = |dist: f64| FiniteMetricSpace::from_fn(2, |_, _| dist);
        (two(lp_norm(&[1.0, 0.0, 0.0], p))?, two(lp_norm(&h, p))?)
    } else {
        let (pa, pb) = (a.space_a.as_ref().unwrap(), a.space_b.as_ref().unwrap());
        echo.set("space_a", pa.display().to_string());
        echo.set("space_b", pb.display().to_string());
        (load_space(pa)?, load_space(pb)?)
    };
    let exact = gh_exact_small(&x, &y)?;
    let lower = gh_lower_bound_diameter(&x, &y);
    emit_scalar(&a.output, &echo, &[("gh_exact", exact), ("diameter_lower_bound", lower)])
}

fn load_space(path: &Path) -> Result<FiniteMetricSpace> {
    let file = File::open(path).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    read_metric_space(BufReader::new(file)).map_err(|e| match e {
        Error::Format { line, msg } => Error::Format { line, msg: format!("{}: {msg}", path.display()) },
        other => other,
    })
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Path of the aggregates file next to a report: `x.csv` → `x.aggregates.csv`.
pub fn aggregates_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.aggregates.csv"))
}

/// Writes the tables. In CSV the first table goes to `--out` (or stdout); a
/// `separate` table goes to the aggregates file when `--out` is set and
/// follows a blank line on stdout otherwise. JSON holds every table.
fn emit(output: &Output, echo: &ConfigEcho, tables: &[(&str, &Table)], separate: Option<&Table>) -> Result<()> {
    let mut w = open_out(output.out.as_deref())?;
    match output.format {
        Format::Json => {
            let sections: Vec<(&str, &dyn ErasedSection)> =
                tables.iter().map(|&(name, t)| (name, t as &dyn ErasedSection)).collect();
            w.write_all(to_json(echo, &sections).as_bytes())?;
        }
        Format::Csv => {
            echo.write_comments(&mut w)?;
            tables[0].1.write_csv(&mut w)?;
            if let Some(extra) = separate {
                match &output.out {
                    Some(path) => {
                        let mut f = BufWriter::new(File::create(aggregates_path(path))?);
                        echo.write_comments(&mut f)?;
                        extra.write_csv(&mut f)?;
                        f.flush()?;
                    }
                    None => {
                        writeln!(w)?;
                        extra.write_csv(&mut w)?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// CSV prints only the first value, bare; JSON holds all of them.
fn emit_scalar(output: &Output, echo: &ConfigEcho, values: &[(&str, f64)]) -> Result<()> {
    let mut w = open_out(output.out.as_deref())?;
    match output.format {
        Format::Csv => {
            echo.write_comments(&mut w)?;
            writeln!(w, "{}", fmt_real(values[0].1))?;
        }
        Format::Json => {
            let result = ConfigEcho(values.iter().map(|&(k, v)| (k.to_string(), Cell::Real(v))).collect());
            w.write_all(to_json(echo, &[("result", &result)]).as_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}
