//! `mdir`: one-sided multi-direction logrank tests from the command line.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mdir_logrank::bootstrap::{run_test, CovEstimatorKind, MultiplierKind, TestConfig};
use mdir_logrank::estimators::TieMethod;
use mdir_logrank::ingest::{load, DataSource, Filter, IngestError, InputSpec};
use mdir_logrank::report::{OutputReport, RunContext};
use mdir_logrank::sim::study::{
    empirical_size_study, format_summary, linspace, power_curve_study, uniformity_ks, write_csv, Direction,
    PerturbedGroups, ScenarioConfig, ThetaScaling,
};
use mdir_logrank::weights::{select_independent_subset, PolynomialWeight, Weight, WeightSet};
use mdir_logrank::Error;

const EXIT_INPUT: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "mdir", version, about = "One-sided multi-direction weighted logrank tests with wild bootstrap")]
struct Cli {
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether group 2 survives longer than group 1.
    Test(TestArgs),
    /// Monte-Carlo size and power studies.
    Simulate {
        #[command(subcommand)]
        study: Study,
    },
}

#[derive(Subcommand)]
enum Study {
    /// Empirical size under equal exponential survival.
    Size(SimArgs),
    /// Power along a theta grid for one hazard direction.
    Power(PowerArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ties {
    Sequential,
    Aggregate,
}

impl From<Ties> for TieMethod {
    fn from(t: Ties) -> Self {
        match t {
            Ties::Sequential => TieMethod::Sequential,
            Ties::Aggregate => TieMethod::Aggregate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Scaling {
    Local,
    Fixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Perturb {
    Both,
    First,
}

#[derive(Args)]
struct TestArgs {
    /// CSV file, or `veteran` for the bundled dataset.
    #[arg(long)]
    data: String,
    #[arg(long)]
    time_col: Option<String>,
    #[arg(long)]
    event_col: Option<String>,
    #[arg(long)]
    group_col: Option<String>,
    /// Label of group 1 (default: first label in the file).
    #[arg(long)]
    group1: Option<String>,
    /// Keep only rows with column=value; repeatable.
    #[arg(long = "filter")]
    filters: Vec<String>,
    #[arg(long, default_value = ",")]
    sep: char,
    #[arg(long, default_value = ".")]
    decimal: char,
    /// Comma-separated `r:g` weights x^r (1-x)^g.
    #[arg(long, default_value = "0:0,0:4,4:0")]
    weights: String,
    /// Accept signed linear combinations such as `1*0:0-2*1:0` as weights.
    #[arg(long)]
    allow_general_weights: bool,
    #[arg(long, default_value = "rademacher")]
    multiplier: MultiplierKind,
    #[arg(long, default_value = "squared")]
    cov: CovEstimatorKind,
    #[arg(long, default_value_t = 10_000)]
    iterations: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "sequential")]
    ties: Ties,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Also print the unstudentized logrank vector.
    #[arg(long)]
    debug: bool,
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value_t = 50)]
    n1: usize,
    #[arg(long, default_value_t = 50)]
    n2: usize,
    /// Censoring rates of the two groups.
    #[arg(long, default_value = "0.15,0.15")]
    cens: String,
    #[arg(long, default_value = "rademacher")]
    multiplier: MultiplierKind,
    #[arg(long, default_value = "squared")]
    cov: CovEstimatorKind,
    #[arg(long, default_value = "0:0,0:4,4:0")]
    weights: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 2000)]
    nsim: usize,
    #[arg(long, default_value_t = 500)]
    nboot: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV destination (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PowerArgs {
    #[command(flatten)]
    common: SimArgs,
    /// proportional, early, late or central.
    #[arg(long)]
    direction: Direction,
    /// `lo:hi:count`, or a comma-separated list (default: the direction's grid).
    #[arg(long)]
    thetas: Option<String>,
    #[arg(long, value_enum, default_value = "local")]
    scaling: Scaling,
    #[arg(long, value_enum, default_value = "both")]
    perturb: Perturb,
}

enum Failure {
    Input(String),
    Config(String),
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::GroupEmpty(_) | Error::AllCensored | Error::InvalidTime { .. } => Failure::Input(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcome = pool.install(|| match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate { study } => cmd_simulate(study),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("input error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

/// Parses the weight list and drops linearly dependent entries.
fn weight_set(spec: &str, allow_general: bool, warnings: &mut Vec<String>) -> Result<WeightSet, Failure> {
    let mut weights = Vec::new();
    for token in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match token.parse::<PolynomialWeight>() {
            Ok(p) => weights.push(Weight::Polynomial(p)),
            Err(_) if allow_general => weights.push(combination_weight(token)?),
            Err(_) => {
                return Err(Failure::Config(format!(
                    "cannot parse weight `{token}` (general weights need --allow-general-weights)"
                )))
            }
        }
    }
    if weights.is_empty() {
        return Err(Failure::Config("empty weight list".into()));
    }
    let selection = select_independent_subset(weights.clone(), allow_general)?;
    if !selection.dropped.is_empty() {
        let dropped: Vec<String> = selection.dropped.iter().map(|&i| weights[i].label()).collect();
        warnings.push(format!(
            "linearly independent subclass selected; dropped {}",
            dropped.join(",")
        ));
    }
    if allow_general && selection.set.weights().iter().any(|w| w.as_polynomial().is_none()) {
        warnings.push("general weights in use; the alternative is no longer restricted to ordered survival".into());
    }
    Ok(selection.set)
}

/// `a*r:g+b*r:g-…`: a linear combination of polynomial weights.
fn combination_weight(token: &str) -> Result<Weight, Failure> {
    let bad = || Failure::Config(format!("cannot parse weight `{token}`"));
    let mut terms = Vec::new();
    let mut start = 0;
    for (i, c) in token.char_indices() {
        if (c == '+' || c == '-') && i > 0 {
            terms.push(&token[start..i]);
            start = i;
        }
    }
    terms.push(&token[start..]);
    let mut parts: Vec<(f64, PolynomialWeight)> = Vec::new();
    for term in terms {
        let (sign, body) = match term.strip_prefix('-') {
            Some(rest) => (-1.0, rest),
            None => (1.0, term.strip_prefix('+').unwrap_or(term)),
        };
        let (coef, poly) = match body.split_once('*') {
            Some((c, p)) => (c.trim().parse::<f64>().map_err(|_| bad())?, p),
            None => (1.0, body),
        };
        let poly: PolynomialWeight = poly.trim().parse().map_err(|_| bad())?;
        parts.push((sign * coef, poly));
    }
    if parts.iter().any(|(c, _)| !c.is_finite()) {
        return Err(bad());
    }
    let label = token.to_string();
    Ok(Weight::general(label, move |x: f64| {
        parts
            .iter()
            .map(|(c, p)| c * x.powi(p.r as i32) * (1.0 - x).powi(p.g as i32))
            .sum()
    }))
}

fn cmd_test(args: TestArgs) -> Result<(), Failure> {
    let filters = args
        .filters
        .iter()
        .map(|f| f.parse::<Filter>())
        .collect::<Result<Vec<_>, _>>()?;
    let separator = u8::try_from(args.sep)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Failure::Config(format!("separator `{}` must be a single ASCII character", args.sep)))?;
    let spec = InputSpec {
        source: DataSource::parse(&args.data),
        time_col: args.time_col,
        event_col: args.event_col,
        group_col: args.group_col,
        separator,
        decimal: args.decimal,
        group1: args.group1,
        filters,
    };
    let mut warnings = Vec::new();
    let weights = weight_set(&args.weights, args.allow_general_weights, &mut warnings)?;
    let data = load(&spec)?;
    let config = TestConfig {
        weights,
        multiplier: args.multiplier,
        covariance: args.cov,
        iterations: args.iterations,
        seed: args.seed,
        ties: args.ties.into(),
    };
    let result = run_test(&data.sample, &config)?;
    for single in &result.singly {
        if single.result.is_none() {
            warnings.push(format!("weight {} has zero variance estimate", single.weight));
        }
    }
    let ctx = RunContext {
        group_labels: data.group_labels.clone(),
        warnings,
        debug: args.debug,
    };
    let report = OutputReport::new(&data.sample, &result, &ctx);
    for w in &ctx.warnings {
        eprintln!("warning: {w}");
    }
    let text = match args.format {
        Format::Text => report.to_text(),
        Format::Json => report.to_json_string() + "\n",
    };
    print!("{text}");
    Ok(())
}

fn parse_pair(s: &str) -> Result<[f64; 2], Failure> {
    let values: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Config(format!("cannot parse censoring rates `{s}`")))?;
    match values.as_slice() {
        [a] => Ok([*a, *a]),
        [a, b] => Ok([*a, *b]),
        _ => Err(Failure::Config("--cens takes one or two rates".into())),
    }
}

/// `lo:hi:count` or a comma-separated list.
fn parse_thetas(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Config(format!("invalid theta grid `{s}`"));
    let thetas = if let [lo, hi, count] = s.split(':').collect::<Vec<_>>().as_slice() {
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let count: usize = count.trim().parse().map_err(|_| bad())?;
        if count == 0 || hi < lo {
            return Err(bad());
        }
        linspace(lo, hi, count)
    } else {
        s.split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad())?
    };
    if thetas.is_empty() || thetas.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(bad());
    }
    Ok(thetas)
}

fn scenario(args: &SimArgs) -> Result<ScenarioConfig, Failure> {
    let mut warnings = Vec::new();
    let config = ScenarioConfig {
        n1: args.n1,
        n2: args.n2,
        censoring: parse_pair(&args.cens)?,
        weights: weight_set(&args.weights, false, &mut warnings)?,
        multiplier: args.multiplier,
        covariance: args.cov,
        alpha: args.alpha,
        n_sim: args.nsim,
        n_boot: args.nboot,
        master_seed: args.seed,
        ..ScenarioConfig::default()
    };
    for w in warnings {
        eprintln!("warning: {w}");
    }
    config.validate()?;
    Ok(config)
}

fn emit_csv(rows: &[mdir_logrank::sim::RejectionSummary], out: &Option<PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            write_csv(rows, file)?;
        }
        None => write_csv(rows, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_simulate(study: Study) -> Result<(), Failure> {
    match study {
        Study::Size(args) => {
            let config = scenario(&args)?;
            let outcome = empirical_size_study(&config)?;
            emit_csv(&outcome.rows, &args.out)?;
            let ks = uniformity_ks(&outcome.randomized_p_values());
            let mut err = io::stderr().lock();
            let _ = write!(err, "{}", format_summary(&outcome.rows));
            let _ = writeln!(
                err,
                "uniformity of tie-randomized joint p-values: KS D = {:.6}, p = {:.6}",
                ks.statistic, ks.p_value
            );
        }
        Study::Power(args) => {
            let mut config = scenario(&args.common)?;
            config.scaling = match args.scaling {
                Scaling::Local => ThetaScaling::Local,
                Scaling::Fixed => ThetaScaling::Fixed,
            };
            config.perturbed = match args.perturb {
                Perturb::Both => PerturbedGroups::Both,
                Perturb::First => PerturbedGroups::FirstOnly,
            };
            let thetas = match &args.thetas {
                Some(s) => parse_thetas(s)?,
                None => args.direction.default_thetas(),
            };
            let direction = Weight::Polynomial(args.direction.weight());
            let outcomes = power_curve_study(&config, &direction, &thetas)?;
            let rows: Vec<_> = outcomes.into_iter().flat_map(|o| o.rows).collect();
            emit_csv(&rows, &args.common.out)?;
            eprint!("{}", format_summary(&rows));
        }
    }
    Ok(())
}
