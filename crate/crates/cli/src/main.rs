use std::fmt::Write as _;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nsmc_core::model::{self, load_query, validate, ModelError, Network, Severity};
use nsmc_core::output::{self, build_cdf, Buckets, Histogram};
use nsmc_core::parser::print_expr;
use nsmc_core::query::{Extremum, Query};
use nsmc_core::runner::remote::{model_hash, serve, Distributed, Endpoint};
use nsmc_core::runner::{self, drive, Answer, Config, Local, StatResult};
use nsmc_core::stat::{Comparison, Hypothesis};

#[derive(Parser)]
#[command(
    name = "nsmc",
    version,
    about = "Statistical model checker for networks of priced timed automata"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a model and report diagnostics.
    Validate { model: PathBuf },
    /// Answer a Pr[..] or E[..] query.
    Query(QueryArgs),
    /// Run a simulate query and write trajectories.
    Simulate(SimArgs),
    /// Serve runs to a remote coordinator.
    Worker(WorkerArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Common {
    model: PathBuf,
    /// Query text; use --query-file to read it from a file instead.
    query: Option<String>,
    #[arg(long)]
    query_file: Option<PathBuf>,
    /// Master seed; run i uses seed + i.
    #[arg(long, env = "NSMC_SEED")]
    seed: Option<u64>,
    /// Resample every delay at every step.
    #[arg(long)]
    no_reuse: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Directory for exported artifacts.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Plot resolution in cells per axis.
    #[arg(long, default_value_t = 1000)]
    resolution: usize,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    beta: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    delta0: f64,
    #[arg(long, default_value_t = 0.01)]
    delta1: f64,
    #[arg(long, default_value_t = 1)]
    cores: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    /// Give up on sequential tests after this many runs.
    #[arg(long, default_value_t = 100_000)]
    max_runs: u64,
    /// Remote worker address (host:port); repeatable.
    #[arg(long)]
    remote: Vec<String>,
    /// Histogram buckets for exported distributions.
    #[arg(long, default_value_t = 50)]
    buckets: usize,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct WorkerArgs {
    model: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7411")]
    listen: String,
    #[arg(long, default_value_t = 1)]
    cores: usize,
    #[arg(long)]
    no_reuse: bool,
}

/// `println!` that tolerates a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

/// Error carrying its exit code: 1 for user errors, 2 for the environment.
struct Failure(u8, String);

fn user(msg: impl ToString) -> Failure {
    Failure(1, msg.to_string())
}

fn env(msg: impl ToString) -> Failure {
    Failure(2, msg.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| env(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<(String, Network), Failure> {
    let text = read(path)?;
    let net = model::load_model(&text).map_err(|e| user(format!("{}: {e}", path.display())))?;
    Ok((text, net))
}

fn query_text(c: &Common) -> Result<String, Failure> {
    match (&c.query, &c.query_file) {
        (Some(q), None) => Ok(q.clone()),
        (None, Some(f)) => Ok(read(f)?.trim().to_string()),
        (Some(_), Some(_)) => Err(user("give the query either inline or with --query-file, not both")),
        (None, None) => Err(user("no query given")),
    }
}

fn seed(c: &Common) -> u64 {
    c.seed.unwrap_or_else(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0)
    })
}

fn query_error(e: ModelError) -> Failure {
    match e {
        ModelError::Parse(p) => user(format!("query: {p}")),
        e => user(format!("query: {e}")),
    }
}

fn out_dir(c: &Common) -> Result<Option<&Path>, Failure> {
    if let Some(d) = &c.output {
        std::fs::create_dir_all(d).map_err(|e| env(format!("{}: {e}", d.display())))?;
    }
    Ok(c.output.as_deref())
}

fn io(e: output::OutputError) -> Failure {
    env(e)
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let text = read(path)?;
    let ast = nsmc_core::parser::parse_model(&text).map_err(|e| user(format!("{}:{e}", path.display())))?;
    let diags = match model::build_network(&ast) {
        Ok(net) => validate(&net),
        Err(d) => d,
    };
    for d in &diags {
        eprintln!("{}: {d}", path.display());
    }
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(Failure(1, String::new()));
    }
    say!("{}: ok", path.display());
    Ok(())
}

fn describe(r: &StatResult) -> String {
    let mut s = String::new();
    match &r.answer {
        Answer::Estimate { estimate: e, .. } => {
            let _ = writeln!(
                s,
                "Pr in [{:.6}, {:.6}] (p = {:.6} +/- {}), Clopper-Pearson [{:.6}, {:.6}]",
                (e.p_hat - e.epsilon).max(0.0),
                (e.p_hat + e.epsilon).min(1.0),
                e.p_hat,
                e.epsilon,
                e.ci.lo,
                e.ci.hi
            );
        }
        Answer::HypTest {
            threshold,
            decision,
            successes,
            ..
        } => {
            let d = match decision {
                Some(Hypothesis::H0) => format!("H0 accepted: Pr >= {threshold}"),
                Some(Hypothesis::H1) => format!("H1 accepted: Pr < {threshold} (hypothesis rejected)"),
                None => "inconclusive: run cap reached".to_string(),
            };
            let _ = writeln!(s, "{d} ({successes} of {} runs satisfied)", r.runs);
        }
        Answer::Compare {
            decision,
            discordant,
            first_only,
        } => {
            let d = match decision {
                Comparison::Greater => "Pr1 > Pr2",
                Comparison::Less => "Pr1 < Pr2",
                Comparison::Indistinguishable => "indistinguishable within the run budget",
            };
            let _ = writeln!(s, "{d} ({discordant} discordant pairs, {first_only} favour the first)");
        }
        Answer::Expect { mode, stats, .. } => {
            let m = match mode {
                Extremum::Min => "min",
                Extremum::Max => "max",
            };
            let _ = writeln!(s, "E[{m}] = {} (sample std {})", stats.mean, stats.std);
        }
    }
    let _ = write!(s, "runs: {}", r.runs);
    if r.deadlocks > 0 {
        let _ = write!(s, ", deadlocked: {}", r.deadlocks);
    }
    s
}

fn export_values(dir: &Path, name: &str, values: &[f64], buckets: usize, alpha: f64) -> Result<(), Failure> {
    if values.is_empty() {
        return Ok(());
    }
    let h = Histogram::new(values, Buckets::Count(buckets.max(1))).map_err(io)?;
    output::write_histogram_csv(&dir.join(format!("{name}_histogram.csv")), &h).map_err(io)?;
    output::write_json(&dir.join(format!("{name}_histogram.json")), &h).map_err(io)?;
    let cdf = build_cdf(values, alpha).map_err(io)?;
    output::write_json(&dir.join(format!("{name}_cdf.json")), &cdf).map_err(io)
}

fn cmd_query(a: &QueryArgs) -> Result<(), Failure> {
    let c = &a.common;
    let (text, net) = load(&c.model)?;
    let qtext = query_text(c)?;
    let q = load_query(&net, &qtext).map_err(query_error)?;
    if matches!(q, Query::Simulate { .. }) {
        return Err(user("simulate queries belong to the simulate command"));
    }
    let cfg = Config {
        alpha: a.alpha,
        beta: a.beta,
        epsilon: a.epsilon,
        delta0: a.delta0,
        delta1: a.delta1,
        cores: a.cores.max(1),
        batch: a.batch.max(1),
        reuse: !c.no_reuse,
        max_runs: a.max_runs,
    };
    let master = seed(c);
    let result = if a.remote.is_empty() {
        runner::check(&net, &q, &cfg, master)
    } else {
        let local = Local {
            net: &net,
            master,
            threads: cfg.cores,
            reuse: cfg.reuse,
        };
        let endpoints = a.remote.iter().map(Endpoint::new).collect();
        let mut d = Distributed::connect(local, endpoints, model_hash(&text), qtext.clone()).map_err(env)?;
        let slots = cfg.cores + a.remote.len();
        drive(&q, &cfg, (slots * cfg.batch) as u64, &mut d)
    };
    let result = result.map_err(|e| match e {
        runner::RunError::Remote(_) => env(e),
        e => user(e),
    })?;
    match c.format {
        Format::Text => {
            say!("seed: {master}");
            say!("{}", describe(&result));
        }
        Format::Json => {
            let mut v = serde_json::to_value(&result).map_err(env)?;
            v["seed"] = master.into();
            say!("{}", serde_json::to_string_pretty(&v).map_err(env)?);
        }
    }
    if let Some(dir) = out_dir(c)? {
        output::write_json(&dir.join("result.json"), &result).map_err(io)?;
        match &result.answer {
            Answer::Estimate { times, .. } => export_values(dir, "time", times, a.buckets, a.alpha)?,
            Answer::Expect { values, .. } => export_values(dir, "value", values, a.buckets, a.alpha)?,
            _ => {}
        }
    }
    Ok(())
}

fn cmd_simulate(a: &SimArgs) -> Result<(), Failure> {
    let c = &a.common;
    let (_, net) = load(&c.model)?;
    let qtext = query_text(c)?;
    let q = load_query(&net, &qtext).map_err(query_error)?;
    let (Query::Simulate { count, bound, exprs }, Ok(Query::Simulate { exprs: surface, .. })) =
        (q, nsmc_core::parser::parse_query(&qtext))
    else {
        return Err(user("expected a query of the form simulate N [bound]{e1, e2, ...}"));
    };
    if c.resolution == 0 {
        return Err(user("resolution must be positive"));
    }
    let named: Vec<(String, _)> = surface.iter().map(print_expr).zip(exprs).collect();
    let master = seed(c);
    let dir = out_dir(c)?;
    let mut all = Vec::new();
    for i in 0..count {
        let series = runner::simulate(
            &net,
            &bound,
            &named,
            runner::run_seed(master, i),
            c.resolution,
            !c.no_reuse,
        )
        .map_err(user)?;
        if let Some(dir) = dir {
            output::write_json(&dir.join(format!("run{i}.json")), &series).map_err(io)?;
        }
        all.push(series);
    }
    match c.format {
        Format::Json => say!("{}", serde_json::to_string_pretty(&all).map_err(env)?),
        Format::Text => {
            say!("seed: {master}");
            for (i, run) in all.iter().enumerate() {
                for s in run {
                    let last = s.points.last().copied().unwrap_or((0.0, f64::NAN));
                    say!(
                        "run {i}: {} ({} points, final {} at t = {})",
                        s.expr,
                        s.points.len(),
                        last.1,
                        last.0
                    );
                }
            }
        }
    }
    Ok(())
}

fn cmd_worker(a: &WorkerArgs) -> Result<(), Failure> {
    let (text, net) = load(&a.model)?;
    let listener = TcpListener::bind(&a.listen).map_err(|e| env(format!("{}: {e}", a.listen)))?;
    eprintln!(
        "worker listening on {} (model {})",
        listener.local_addr().map_err(env)?,
        model_hash(&text)
    );
    serve(listener, &net, &model_hash(&text), a.cores.max(1), !a.no_reuse).map_err(env)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let r = match &cli.cmd {
        Cmd::Validate { model } => cmd_validate(model),
        Cmd::Query(a) => cmd_query(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Worker(a) => cmd_worker(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(code)
        }
    }
}
