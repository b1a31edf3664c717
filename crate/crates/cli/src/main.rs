//! `ordsel`: rate estimates, selection policies and sample-complexity bounds
//! from the command line.

mod config;
mod error;
mod output;
mod reproduce;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use ordinal_core::adversarial::{
    lower_bound_from_kl, monte_carlo_outcomes, quantile_gadget, tilt, McReport, Policy, PolicySpec,
};
use ordinal_core::empirical_rate::estimate_rate_at;
use ordinal_core::meta_rate::{
    inf_meta_rate, meta_rate, sequential_failure_certificate, sup_meta_rate_on_theta_a, two_phase_exponent,
};
use ordinal_core::populations::{kl_divergence, ModelSampler, PopulationModel};
use ordinal_core::rng::stream_id;
use ordinal_core::truncation::{worst_capping_error, worst_truncation_error, FSpec, Support};
use ordinal_core::ExtReal;

use config::{Experiment, ExperimentConfig};
use error::{core_at, CliError};
use output::{emit, Cell, Table};

#[derive(Debug, Parser)]
#[command(name = "ordsel", version, about = "Ordinal optimization: rates, selection policies and sample bounds")]
struct Cli {
    /// Run-level seed; replication r draws arm i from stream (r, i).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo runs: a count or `auto`.
    #[arg(long, global = true, default_value = "auto")]
    threads: String,
    /// Write the result table here (atomically) instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Emit JSON records instead of CSV.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Empirical rate Î_m(x) of a batch.
    RateEstimate(RateEstimateArgs),
    /// Meta-rate and the failure exponents built on it.
    MetaRate(MetaRateArgs),
    /// One run of a policy.
    Select(SelectArgs),
    /// Worst-case truncation and capping bias under a moment budget.
    TruncError(TruncArgs),
    /// Small-KL, large-mean tilt of a model.
    Tilt(TiltArgs),
    /// KL sample-size floor log(1/δ)/(3·KL).
    LowerBound(LowerBoundArgs),
    /// Two-point quantile lower-bound gadget.
    QuantileGadget(GadgetArgs),
    /// Monte Carlo false-selection rate of a policy.
    McFs(McArgs),
    /// Run an experiment config (TOML, or JSON by extension).
    Run {
        config: PathBuf,
    },
    /// Recompute the published constants and check them.
    Reproduce {
        /// Run one group only.
        #[arg(long)]
        only: Option<String>,
    },
}

#[derive(Debug, Args)]
struct RateEstimateArgs {
    /// Comma-separated sample values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with_all = ["input", "model"])]
    values: Option<Vec<f64>>,
    /// File with one sample per line.
    #[arg(long, conflicts_with = "model")]
    input: Option<PathBuf>,
    /// Model (JSON) to sample the batch from.
    #[arg(long, requires = "m")]
    model: Option<String>,
    /// Batch size when sampling from a model.
    #[arg(long)]
    m: Option<usize>,
    /// Level x.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    at: f64,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["nu", "inf", "sup", "two_phase", "certificate"])))]
#[group(skip)]
struct MetaRateArgs {
    /// Model (JSON).
    #[arg(long)]
    model: String,
    /// Tilt θ for a pointwise evaluation with --nu.
    #[arg(long, requires = "nu", allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Level ν of the mean of e^{θX}.
    #[arg(long, requires = "theta")]
    nu: Option<f64>,
    /// inf over θ of the meta-rate at the level e^{-a}.
    #[arg(long)]
    inf: Option<f64>,
    /// sup over Θ_a of the meta-rate at the level e^{-a}.
    #[arg(long)]
    sup: Option<f64>,
    /// Two-phase failure exponent for c1,c2.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    two_phase: Option<Vec<f64>>,
    /// Sequential failure certificate for c1.
    #[arg(long)]
    certificate: Option<f64>,
}

#[derive(Debug, Args)]
struct PolicyArgs {
    /// Policy (JSON), e.g. {"policy":"hoeffding","epsilon":0.2,"b":1}.
    #[arg(long)]
    policy: String,
    /// Models (JSON array), one per population.
    #[arg(long)]
    truth: String,
    #[arg(long)]
    delta: f64,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    /// Replication index, selecting the random streams.
    #[arg(long, default_value_t = 0)]
    replication: u64,
}

#[derive(Debug, Args)]
struct McArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long)]
    replications: u64,
}

#[derive(Debug, Args)]
struct TruncArgs {
    /// Moment function: `power:<alpha>` or `exp:<theta>`.
    #[arg(long)]
    f: String,
    /// Moment budget E f(X) ≤ c.
    #[arg(long)]
    c: f64,
    /// Threshold u.
    #[arg(long)]
    u: f64,
}

#[derive(Debug, Args)]
struct TiltArgs {
    /// Base model (JSON).
    #[arg(long)]
    model: String,
    /// KL target.
    #[arg(long)]
    alpha: f64,
    /// Mean the tilt must reach.
    #[arg(long, allow_hyphen_values = true)]
    k: f64,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["kl", "g"])))]
#[group(skip)]
struct LowerBoundArgs {
    /// KL divergence, given directly.
    #[arg(long, conflicts_with_all = ["g", "g_tilde"])]
    kl: Option<f64>,
    /// Model (JSON).
    #[arg(long, requires = "g_tilde")]
    g: Option<String>,
    /// Alternative model (JSON).
    #[arg(long, requires = "g")]
    g_tilde: Option<String>,
    #[arg(long)]
    delta: f64,
}

#[derive(Debug, Args)]
struct GadgetArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    mu: f64,
}

/// Parses a JSON argument, reporting errors under `flag`.
fn parse_json<T: DeserializeOwned>(flag: &str, text: &str) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| CliError::from_path_error(flag, e))
}

fn parse_model(flag: &str, text: &str) -> Result<PopulationModel, CliError> {
    let m: PopulationModel = parse_json(flag, text)?;
    m.validate().map_err(|e| core_at(flag, e))?;
    Ok(m)
}

fn parse_f(text: &str) -> Result<FSpec, CliError> {
    let bad = || CliError::validation(Some("f".into()), format!("expected power:<alpha> or exp:<theta>, got `{text}`"));
    let (kind, value) = text.split_once(':').ok_or_else(bad)?;
    let value: f64 = value.trim().parse().map_err(|_| bad())?;
    let spec = match kind.trim() {
        "power" => FSpec::Power { alpha: value },
        "exp" | "exponential" => FSpec::Exponential { theta: value },
        _ => return Err(bad()),
    };
    spec.validate().map_err(|e| core_at("f", e))?;
    Ok(spec)
}

fn ext(x: ExtReal) -> Cell {
    x.into()
}

fn rate_estimate(a: RateEstimateArgs, seed: u64) -> Result<Table, CliError> {
    let batch = if let Some(v) = a.values {
        v
    } else if let Some(path) = a.input {
        let text = std::fs::read_to_string(&path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, l)| l.parse::<f64>().map_err(|e| CliError::validation(Some(format!("input.{i}")), e.to_string())))
            .collect::<Result<Vec<_>, _>>()?
    } else if let Some(model) = a.model {
        let model = parse_model("model", &model)?;
        model.sample(seed, 0, a.m.unwrap_or(0)).map_err(|e| core_at("m", e))?.values
    } else {
        return Err(CliError::validation(None, "give one of --values, --input or --model".into()));
    };
    if batch.is_empty() {
        return Err(CliError::validation(Some("values".into()), "batch is empty".into()));
    }
    if batch.iter().any(|x| !x.is_finite()) {
        return Err(CliError::validation(Some("values".into()), "samples must be finite".into()));
    }
    let r = estimate_rate_at(&batch, a.at);
    let status = serde_json::to_value(r.status).map_err(anyhow::Error::from)?;
    let mut t = Table::new(&["m", "x", "rate", "theta_star", "status"]);
    t.push(vec![batch.len().into(), a.at.into(), ext(r.value), r.theta_star.into(), status.as_str().unwrap_or("").into()]);
    Ok(t)
}

fn meta_rate_cmd(a: MetaRateArgs) -> Result<Table, CliError> {
    let model = parse_model("model", &a.model)?;
    if let (Some(theta), Some(nu)) = (a.theta, a.nu) {
        let r = meta_rate(&model, theta, nu)?;
        let mut t = Table::new(&["theta", "nu", "meta_rate", "alpha_star", "alpha_at_boundary"]);
        t.push(vec![theta.into(), nu.into(), ext(r.value), r.alpha_star.into(), r.alpha_at_boundary.into()]);
        return Ok(t);
    }
    if let Some(level) = a.inf {
        let r = inf_meta_rate(&model, level)?;
        let mut t = Table::new(&["a", "inf_meta_rate", "theta_star", "alpha_star"]);
        t.push(vec![level.into(), ext(r.value), r.theta_star.into(), r.alpha_star.into()]);
        return Ok(t);
    }
    if let Some(level) = a.sup {
        let r = sup_meta_rate_on_theta_a(&model, level)?;
        let mut t = Table::new(&["a", "sup_meta_rate", "theta_star", "alpha_star", "theta_a_lo", "theta_a_hi", "foc_residual"]);
        t.push(vec![
            level.into(),
            ext(r.value),
            r.theta_star.into(),
            r.alpha_star.into(),
            r.theta_a.0.into(),
            r.theta_a.1.into(),
            r.foc_residual.into(),
        ]);
        return Ok(t);
    }
    if let Some(c) = a.two_phase {
        if c.len() != 2 {
            return Err(CliError::validation(Some("two_phase".into()), format!("expected c1,c2, got {} values", c.len())));
        }
        let r = two_phase_exponent(&model, c[0], c[1])?;
        let mut t = Table::new(&["c1", "c2", "exponent", "delta_exponent", "gamma_star", "theta_star", "alpha_star", "newton_polished"]);
        t.push(vec![
            c[0].into(),
            c[1].into(),
            r.exponent.into(),
            r.delta_exponent.into(),
            r.gamma_star.into(),
            r.theta_star.into(),
            r.alpha_star.into(),
            r.newton_polished.into(),
        ]);
        return Ok(t);
    }
    let c1 = a.certificate.expect("clap requires one mode");
    let r = sequential_failure_certificate(&model, c1)?;
    let mut t = Table::new(&["c1", "theta", "alpha_star", "meta_rate", "certified"]);
    t.push(vec![c1.into(), r.theta.into(), r.alpha_star.into(), r.meta_rate_value.into(), r.certified.into()]);
    Ok(t)
}

fn experiment(a: PolicyArgs, replications: u64) -> Result<Experiment, CliError> {
    let policy: PolicySpec = parse_json("policy", &a.policy)?;
    let truth: Vec<PopulationModel> = parse_json("truth", &a.truth)?;
    for (i, m) in truth.iter().enumerate() {
        m.validate().map_err(|e| core_at(&format!("truth.{i}"), e))?;
    }
    let exp = Experiment { policy, truth, delta: a.delta, replications, seed: None, out: None };
    exp.validate("")?;
    Ok(exp)
}

fn outcome_table(d: usize) -> Table {
    let mut cols: Vec<String> = ["row", "chosen", "decided_sign", "false_selection", "termination", "rounds", "samples", "fs_rate", "ci_halfwidth"]
        .iter()
        .map(|c| c.to_string())
        .collect();
    cols.extend((0..d).map(|i| format!("samples_{i}")));
    Table::with_columns(cols)
}

fn enum_text<T: serde::Serialize>(x: &T) -> Cell {
    match serde_json::to_value(x) {
        Ok(serde_json::Value::String(s)) => s.into(),
        _ => Cell::Empty,
    }
}

fn outcome_row(row: Cell, o: &ordinal_core::selectors::SelectionOutcome) -> Vec<Cell> {
    let mut r = vec![
        row,
        o.chosen.into(),
        o.decided_sign.as_ref().map_or(Cell::Empty, enum_text),
        o.false_selection.into(),
        enum_text(&o.termination),
        o.rounds.into(),
        o.total_samples().into(),
        Cell::Empty,
        Cell::Empty,
    ];
    r.extend(o.per_arm_samples.iter().map(|&n| Cell::from(n)));
    r
}

fn select(a: SelectArgs, seed: u64) -> Result<Table, CliError> {
    let exp = experiment(a.policy, 1)?;
    let mut samplers = exp
        .truth
        .iter()
        .enumerate()
        .map(|(i, m)| ModelSampler::new(m.clone(), seed, stream_id(a.replication, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let means: Vec<f64> = exp.truth.iter().map(|m| m.mean()).collect();
    let o = exp.policy.run(&mut samplers, exp.delta)?.judge(&means, exp.policy.objective());
    let mut t = outcome_table(exp.truth.len());
    t.push(outcome_row(a.replication.into(), &o));
    Ok(t)
}

/// Runs the replications, writes one row each plus a summary row, and prints
/// a summary line to stderr.
fn run_experiment(exp: &Experiment, seed: u64, json: bool, out: Option<&Path>) -> Result<(), CliError> {
    let outcomes = monte_carlo_outcomes(&exp.policy, &exp.truth, exp.delta, exp.replications, seed)?;
    let report = McReport::from_outcomes(&outcomes);
    let d = exp.truth.len();
    let mut t = outcome_table(d);
    for (r, o) in outcomes.iter().enumerate() {
        t.push(outcome_row(r.into(), o));
    }
    let mut summary = vec![
        "summary".into(),
        Cell::Empty,
        Cell::Empty,
        report.fs_count.into(),
        Cell::Empty,
        Cell::Empty,
        report.mean_samples.into(),
        report.fs_rate.into(),
        report.ci_halfwidth.into(),
    ];
    summary.extend((0..d).map(|_| Cell::Empty));
    t.push(summary);
    emit(&t, json, out)?;
    eprintln!(
        "{}: {} replications, false selections {} (rate {:.6} ± {:.6}), mean samples {:.3}, seed {seed}{}",
        exp.policy.name(),
        report.replications,
        report.fs_count,
        report.fs_rate,
        report.ci_halfwidth,
        report.mean_samples,
        out.map(|p| format!(", written to {}", p.display())).unwrap_or_default()
    );
    Ok(())
}

fn trunc_error(a: TruncArgs) -> Result<Table, CliError> {
    let f = parse_f(&a.f)?;
    let mut t = Table::new(&["estimator", "c", "u", "worst_error", "support"]);
    for (name, sol) in [("truncation", worst_truncation_error(f, a.c, a.u)?), ("capping", worst_capping_error(f, a.c, a.u)?)] {
        let support = match sol.support {
            Support::Degenerate { point } => format!("point {point:.16e}"),
            Support::TwoPoint { low, high, p_high } => format!("{{{low:.16e}, {high:.16e}}} p_high {p_high:.16e}"),
        };
        t.push(vec![name.into(), a.c.into(), a.u.into(), sol.error.into(), support.into()]);
    }
    Ok(t)
}

fn tilt_cmd(a: TiltArgs) -> Result<Table, CliError> {
    let base = parse_model("model", &a.model)?;
    let r = tilt(&base, a.alpha, a.k)?;
    let model = serde_json::to_string(&r.model).map_err(anyhow::Error::from)?;
    let mut t = Table::new(&["b", "gamma", "kl", "mean", "log_beta_factor", "model"]);
    t.push(vec![r.b.into(), r.gamma.into(), r.kl.into(), r.mean.into(), r.log_beta_factor.into(), model.into()]);
    Ok(t)
}

fn lower_bound(a: LowerBoundArgs) -> Result<Table, CliError> {
    let kl = match (a.kl, a.g, a.g_tilde) {
        (Some(kl), _, _) => ExtReal::from_f64(kl),
        (None, Some(g), Some(gt)) => kl_divergence(&parse_model("g", &g)?, &parse_model("g_tilde", &gt)?)?,
        _ => return Err(CliError::validation(None, "give --kl or both --g and --g-tilde".into())),
    };
    let n = lower_bound_from_kl(kl, a.delta)?;
    let mut t = Table::new(&["kl", "delta", "min_samples"]);
    t.push(vec![ext(kl), a.delta.into(), n.into()]);
    Ok(t)
}

fn gadget(a: GadgetArgs) -> Result<Table, CliError> {
    let r = quantile_gadget(a.p, a.epsilon, a.mu)?;
    let mut t = Table::new(&["p", "epsilon", "mu", "kl", "kl_bound", "quantile_g", "quantile_g_eps", "quantile_gap"]);
    t.push(vec![
        a.p.into(),
        a.epsilon.into(),
        a.mu.into(),
        r.kl.into(),
        r.kl_bound.into(),
        r.quantile_g.into(),
        r.quantile_g_eps.into(),
        r.quantile_gap.into(),
    ]);
    Ok(t)
}

fn configure_threads(threads: &str) -> Result<(), CliError> {
    if threads == "auto" {
        return Ok(());
    }
    let n: usize = threads
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::validation(Some("threads".into()), format!("expected a positive count or `auto`, got `{threads}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(anyhow::Error::from)?;
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    configure_threads(&cli.threads)?;
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    let table = match cli.command {
        Command::RateEstimate(a) => rate_estimate(a, seed)?,
        Command::MetaRate(a) => meta_rate_cmd(a)?,
        Command::Select(a) => select(a, seed)?,
        Command::TruncError(a) => trunc_error(a)?,
        Command::Tilt(a) => tilt_cmd(a)?,
        Command::LowerBound(a) => lower_bound(a)?,
        Command::QuantileGadget(a) => gadget(a)?,
        Command::McFs(a) => {
            let replications = a.replications;
            let exp = experiment(a.policy, replications)?;
            return run_experiment(&exp, seed, cli.json, out);
        }
        Command::Run { config } => {
            let exp = ExperimentConfig::load(&config)?.resolve()?;
            let seed = cli.seed.or(exp.seed).unwrap_or(0);
            let out = out.map(Path::to_path_buf).or_else(|| exp.out.clone());
            return run_experiment(&exp, seed, cli.json, out.as_deref());
        }
        Command::Reproduce { only } => {
            let items = reproduce::run(only.as_deref())?;
            if cli.json || out.is_some() {
                emit(&reproduce::table(&items), cli.json, out)?;
            }
            if !cli.json {
                for i in &items {
                    println!("{}", i.line());
                }
            }
            let failed = items.iter().filter(|i| !i.pass()).count();
            if !cli.json {
                println!("{} of {} passed", items.len() - failed, items.len());
            }
            return if failed == 0 { Ok(()) } else { Err(CliError::Failed(failed)) };
        }
    };
    emit(&table, cli.json, out)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}
