use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use regret_fp::coarsening::{coarsen_sample, coarsened_assignment_exact, RealSample};
use regret_fp::harness::{reproduce, write_summary_csv, RowSelection, Scale, TableId};
use regret_fp::io::{load_rule, save_rule, write_report_json, write_trace_csv};
use regret_fp::{
    es_rule, es_rule_innovations, so_rule, solve, solve_innovations, solve_symmetric, Constraint, EsVariant,
    ParameterGrid, ProblemSpec, SolveConfig, SolveReport, TreatmentRule, WeightSchedule,
};

mod config;

/// Minimax regret treatment rules by fictitious play.
#[derive(Parser)]
#[command(name = "regret-fp", version, args_override_self = true)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "REGRET_THREADS")]
    threads: Option<usize>,
    /// key=value file supplying defaults for any flag; flags on the command
    /// line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two treatments with fixed sample sizes.
    #[command(args_override_self = true)]
    TwoArm(TwoArmArgs),
    /// Two treatments, restricted to mirror-symmetric rules.
    #[command(args_override_self = true)]
    TwoArmSymmetric(TwoArmArgs),
    /// Unknown innovations against a status quo with known mean.
    #[command(args_override_self = true)]
    Innovations(InnovationArgs),
    /// Apply a rule for binary outcomes to a sample of outcomes in [0, 1].
    #[command(args_override_self = true)]
    Coarsen(CoarsenArgs),
    /// Recompute a published table and compare cell by cell.
    #[command(args_override_self = true)]
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleKind {
    /// (c + n)^-eta
    Lc,
    /// 1/n
    Robinson,
    /// 1/ln(c + n)
    Log,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitChoice {
    Es,
    So,
    File,
}

#[derive(Args)]
struct SolveArgs {
    /// Grid resolution: nature picks means in {0, 1/p, ..., 1}.
    #[arg(long, default_value_t = 1000)]
    p: usize,
    #[arg(long, value_enum, default_value_t = ScheduleKind::Lc)]
    schedule: ScheduleKind,
    #[arg(long, default_value_t = 5.0)]
    c: f64,
    #[arg(long, default_value_t = 0.7)]
    eta: f64,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    /// Stop once upper minus the previous lower bound falls below this.
    #[arg(long, default_value_t = 0.0)]
    xi: f64,
    /// Stop once that gap, relative to the lower bound, falls below this.
    #[arg(long)]
    xi_rel: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = InitChoice::Es)]
    init: InitChoice,
    /// Initial rule for `--init file` (CSV or JSON).
    #[arg(long, value_name = "FILE")]
    init_file: Option<PathBuf>,
    /// Per-iteration trace CSV.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Summary JSON; printed to stdout when omitted.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Best rule found, as CSV or JSON by extension.
    #[arg(long, value_name = "FILE")]
    rule: Option<PathBuf>,
}

impl SolveArgs {
    fn schedule(&self) -> WeightSchedule {
        match self.schedule {
            ScheduleKind::Lc => WeightSchedule::LeslieCollins { c: self.c, eta: self.eta },
            ScheduleKind::Robinson => WeightSchedule::Robinson,
            ScheduleKind::Log => WeightSchedule::LogDamped { c: self.c },
        }
    }

    fn init_from_file(&self) -> Result<TreatmentRule> {
        let path = self.init_file.as_ref().ok_or_else(|| invalid("--init file needs --init-file"))?;
        load_rule(path).with_context(|| format!("reading initial rule {}", path.display()))
    }

    fn config(&self, spec: ProblemSpec, grid: ParameterGrid, init: TreatmentRule) -> SolveConfig {
        let mut config = SolveConfig::new(spec, grid, init)
            .with_weights(self.schedule())
            .with_max_iters(self.iters)
            .with_xi(self.xi)
            .with_xi_relative(self.xi_rel);
        config.rng_seed = self.seed;
        config
    }

    fn emit(&self, report: &SolveReport) -> Result<()> {
        if let Some(path) = &self.trace {
            write_trace_csv(&report.trace, create(path)?)?;
        }
        if let Some(path) = &self.rule {
            save_rule(&report.best_rule, path)?;
        }
        match &self.report {
            Some(path) => write_report_json(report, create(path)?)?,
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                write_report_json(report, &mut lock)?;
                writeln!(lock)?;
            }
        }
        Ok(())
    }
}

#[derive(Args)]
struct TwoArmArgs {
    #[arg(long)]
    n1: usize,
    #[arg(long)]
    n2: usize,
    /// Restrict nature to lo*mu_1 <= mu_2 <= hi*mu_1, given as `lo,hi`.
    #[arg(long, value_parser = parse_pair, value_name = "LO,HI")]
    restrict: Option<(f64, f64)>,
    /// Exploit mirror symmetry (same as the two-arm-symmetric command).
    #[arg(long)]
    symmetric: bool,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct InnovationArgs {
    /// Number of treatments including the status quo.
    #[arg(long, default_value_t = 3)]
    arms: usize,
    /// Sample size of every innovation.
    #[arg(long)]
    nbar: usize,
    /// Known mean of the status quo.
    #[arg(long)]
    mu_t: f64,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct CoarsenArgs {
    /// Rule for binary outcomes (CSV or JSON).
    #[arg(long, value_name = "FILE")]
    rule: PathBuf,
    /// Outcomes as `arm,outcome` lines, arms numbered from 1.
    #[arg(long, value_name = "FILE")]
    sample: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum RowsChoice {
    /// First-iterate and minimax cells only.
    N1,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleChoice {
    Smoke,
    Full,
}

#[derive(Args)]
struct ReproduceArgs {
    /// I, II, III or IV.
    #[arg(long)]
    table: String,
    #[arg(long, value_enum, default_value_t = RowsChoice::N1)]
    rows: RowsChoice,
    #[arg(long, value_enum, default_value_t = ScaleChoice::Smoke)]
    scale: ScaleChoice,
    /// Summary CSV; printed to stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Configuration problems, reported with exit status 2.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got {s:?}"))?;
    let lo = lo.trim().parse::<f64>().map_err(|e| format!("{lo:?}: {e}"))?;
    let hi = hi.trim().parse::<f64>().map_err(|e| format!("{hi:?}: {e}"))?;
    Ok((lo, hi))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn two_arm(args: &TwoArmArgs, symmetric: bool) -> Result<()> {
    let s = &args.solve;
    let spec = ProblemSpec::two_arm(args.n1, args.n2)?;
    let constraint = match args.restrict {
        Some((lo, hi)) => Constraint::RatioBand { lo, hi },
        None => Constraint::Unrestricted,
    };
    let grid = ParameterGrid::for_spec(&spec, s.p, constraint)?;
    let init = match s.init {
        InitChoice::Es if symmetric => es_rule(args.n1, args.n2, EsVariant::Symmetric)?,
        // Ties to treatment 2 keep the restricted first iterates comparable
        // with the published ones.
        InitChoice::Es if args.restrict.is_some() => es_rule(args.n1, args.n2, EsVariant::TiesToTwo)?,
        InitChoice::Es => es_rule(args.n1, args.n2, EsVariant::Symmetric)?,
        InitChoice::So => so_rule(args.n1, args.n2)?,
        InitChoice::File => s.init_from_file()?,
    };
    let config = s.config(spec, grid, init);
    let report = if symmetric { solve_symmetric(&config)? } else { solve(&config)? };
    s.emit(&report)
}

fn innovations(args: &InnovationArgs) -> Result<()> {
    let s = &args.solve;
    let spec = ProblemSpec::testing_innovations(args.arms, args.nbar, args.mu_t)?;
    let grid = ParameterGrid::for_spec(&spec, s.p, Constraint::Unrestricted)?;
    let init = match s.init {
        InitChoice::Es => es_rule_innovations(args.nbar, args.arms, args.mu_t)?,
        InitChoice::So => return Err(invalid("the SO start is defined for two arms only")),
        InitChoice::File => s.init_from_file()?,
    };
    let report = solve_innovations(&s.config(spec, grid, init))?;
    s.emit(&report)
}

fn read_sample(path: &Path, num_arms: usize) -> Result<RealSample> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut arms = vec![Vec::new(); num_arms];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.eq_ignore_ascii_case("arm,outcome") {
            continue;
        }
        let bad = |what: &str| invalid(format!("sample line {}: {what} in {line:?}", i + 1));
        let (arm, y) = line.split_once(',').ok_or_else(|| bad("expected `arm,outcome`"))?;
        let arm: usize = arm.trim().parse().map_err(|_| bad("bad arm"))?;
        let y: f64 = y.trim().parse().map_err(|_| bad("bad outcome"))?;
        if arm == 0 || arm > num_arms {
            return Err(bad("arm outside the rule's arms"));
        }
        arms[arm - 1].push(y);
    }
    Ok(RealSample::new(arms)?)
}

fn coarsen(args: &CoarsenArgs) -> Result<()> {
    let rule = load_rule(&args.rule).with_context(|| format!("reading rule {}", args.rule.display()))?;
    let sample = read_sample(&args.sample, rule.arm_sizes().len())?;
    if sample.arm_sizes() != rule.arm_sizes() {
        return Err(invalid(format!(
            "sample has arm sizes {:?}, the rule expects {:?}",
            sample.arm_sizes(),
            rule.arm_sizes()
        )));
    }
    let counts = coarsen_sample(&sample, args.seed).counts;
    let out = serde_json::json!({
        "counts": counts,
        "assignment": rule.at(&counts),
        "exact_assignment": coarsened_assignment_exact(&rule, &sample)?,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn run_reproduce(args: &ReproduceArgs) -> Result<bool> {
    let table: TableId = args.table.parse().map_err(|e: regret_fp::Error| invalid(e.to_string()))?;
    let rows = match args.rows {
        RowsChoice::N1 => RowSelection::FirstIterate,
        RowsChoice::All => RowSelection::All,
    };
    let scale = match args.scale {
        ScaleChoice::Smoke => Scale::Smoke,
        ScaleChoice::Full => Scale::Full,
    };
    let cells = reproduce(table, rows, scale)?;
    match &args.out {
        Some(path) => write_summary_csv(&cells, create(path)?)?,
        None => write_summary_csv(&cells, std::io::stdout().lock())?,
    }
    let failed = cells.iter().filter(|c| !c.pass).count();
    eprintln!("table {table}: {} cells, {failed} failed", cells.len());
    Ok(failed == 0)
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(Invalid("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    match &cli.command {
        Command::TwoArm(a) => two_arm(a, a.symmetric)?,
        Command::TwoArmSymmetric(a) => two_arm(a, true)?,
        Command::Innovations(a) => innovations(a)?,
        Command::Coarsen(a) => coarsen(a)?,
        Command::Reproduce(a) => return run_reproduce(a),
    }
    Ok(true)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Invalid>().is_some() {
        return 2;
    }
    match err.downcast_ref::<regret_fp::Error>() {
        Some(regret_fp::Error::Numerical(_) | regret_fp::Error::EmptyMixture) => 3,
        Some(regret_fp::Error::Io(_) | regret_fp::Error::Csv(_) | regret_fp::Error::Json(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
