//! Batch driver: scenario generation, federation runs, evaluation, p-value
//! calibration, and result reporting.
//!
//! Exit codes: 0 success, 1 input error, 2 privacy-gate violation.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fedscan::error::Error;
use fedscan::federation::{audit_message_line, run_federation, FederationResult, RunManifest};
use fedscan::graph::Subgraph;
use fedscan::stats::{empirical_pvalues, ObservationHistory, ScanStatistic};
use fedscan::synth::{anchor_count, bundle, evaluate_metrics, generate_scenario, ScenarioSpec};

#[derive(Parser)]
#[command(
    name = "fedscan",
    version,
    about = "Federated anomaly subgraph detection across attributed networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario bundle from a spec file.
    Gen(GenArgs),
    /// Run a federation described by a run manifest.
    Run(RunArgs),
    /// Score a run result against a ground-truth file.
    Eval(EvalArgs),
    /// Compute empirical p-values from an observation history CSV.
    Pvalues(PvaluesArgs),
    /// Summarize a result file into plotting-friendly tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Scenario spec file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the spec's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Profile {
    /// Significance level 0.15.
    Computer,
    /// Significance level 0.05.
    Traffic,
}

#[derive(Args)]
struct RunArgs {
    /// Run manifest (JSON) naming all input files and the configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the result file and message log.
    #[arg(long)]
    out: PathBuf,
    /// Parameter preset applied before explicit flags.
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Scan statistic: bj or hc.
    #[arg(long)]
    statistic: Option<CliStatistic>,
    #[arg(long, value_name = "N")]
    max_rounds: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliStatistic {
    Bj,
    Hc,
}

impl From<CliStatistic> for ScanStatistic {
    fn from(v: CliStatistic) -> Self {
        match v {
            CliStatistic::Bj => ScanStatistic::BerkJones,
            CliStatistic::Hc => ScanStatistic::HigherCriticism,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Run manifest the result came from (provides the networks).
    #[arg(long)]
    config: PathBuf,
    /// Result file written by `run`.
    #[arg(long)]
    result: PathBuf,
    /// Ground-truth file (anomaly rows and anchor rows).
    #[arg(long)]
    truth: PathBuf,
    /// Output directory for metrics.csv and metrics.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PvaluesArgs {
    /// History CSV with header `node,t1,...,tT`.
    #[arg(long)]
    history: PathBuf,
    /// Output p-value file.
    #[arg(long)]
    out: PathBuf,
    /// Snapshot index (1-based); defaults to the last snapshot.
    #[arg(long)]
    snapshot: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Result file written by `run`.
    #[arg(long)]
    result: PathBuf,
    /// Output directory for rounds.csv, owners.csv, anomaly_nodes.tsv.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run(args) => cmd_run(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Pvalues(args) => cmd_pvalues(args),
        Command::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fedscan: {e}");
            if e.is_privacy() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn cmd_gen(args: GenArgs) -> fedscan::Result<()> {
    let mut spec = ScenarioSpec::load(&args.config)?;
    if let Some(seed) = args.seed {
        spec.rng_seed = seed;
    }
    let scenario = generate_scenario(&spec)?;
    bundle::write_bundle(&scenario, &args.out)?;
    println!(
        "wrote bundle: {} owners x {} nodes, public {} nodes -> {}",
        spec.n_owners,
        spec.nodes_per_owner,
        spec.public_nodes,
        args.out.display()
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> fedscan::Result<()> {
    let mut manifest = RunManifest::load(&args.config)?;
    if let Some(profile) = args.profile {
        manifest.config.alpha = match profile {
            Profile::Computer => 0.15,
            Profile::Traffic => 0.05,
        };
    }
    if let Some(v) = args.seed {
        manifest.config.rng_seed = v;
    }
    if let Some(v) = args.alpha {
        manifest.config.alpha = v;
    }
    if let Some(v) = args.sigma {
        manifest.config.sigma = v;
    }
    if let Some(v) = args.lambda {
        manifest.config.lambda = v;
    }
    if let Some(v) = args.theta {
        manifest.config.theta = v;
    }
    if let Some(v) = args.statistic {
        manifest.config.statistic = v.into();
    }
    if let Some(v) = args.max_rounds {
        manifest.config.max_rounds = v;
    }
    manifest.config.validate()?;

    let base = manifest_base(&args.config);
    let (public, owners) = manifest.load_inputs(&base)?;

    if let Some(audit) = &manifest.audit_log {
        let path = base.join(audit);
        let file = std::fs::File::open(&path)
            .map_err(|e| Error::input(format!("cannot open audit log {}: {e}", path.display())))?;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            audit_message_line(&line, &public).map_err(|e| match e {
                Error::Privacy(msg) => {
                    Error::privacy(format!("{}:{}: {msg}", path.display(), lineno + 1))
                }
                other => other,
            })?;
        }
        println!("audited message log {}", path.display());
    }

    let run = run_federation(&manifest.config, owners, &public)?;

    std::fs::create_dir_all(&args.out)?;
    std::fs::write(
        args.out.join("result.json"),
        run.result.to_canonical_json()?,
    )?;
    let mut log = std::fs::File::create(args.out.join("messages.jsonl"))?;
    for line in &run.message_log {
        writeln!(log, "{line}")?;
    }
    let last = run.result.rounds.last();
    println!(
        "rounds: {}, converged: {}, objective: {}, |U|: {}",
        run.result.rounds.len(),
        run.result.converged,
        last.map(|r| r.objective).unwrap_or(0.0),
        run.result.final_u.node_count()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> fedscan::Result<()> {
    let manifest = RunManifest::load(&args.config)?;
    let base = manifest_base(&args.config);
    let (public, owners) = manifest.load_inputs(&base)?;
    let result = load_result(&args.result)?;
    let truth = bundle::read_truth(&args.truth, public.network_id())?;

    let counts: BTreeMap<String, usize> = owners
        .iter()
        .map(|o| (o.network.network_id().to_string(), o.network.node_count()))
        .collect();
    let mut metrics = evaluate_metrics(&result.final_s, &truth.owner_anomalies, &counts)?;
    metrics.anchor_count = anchor_count(&result.final_s, &result.final_u, &truth.anchors);

    std::fs::create_dir_all(&args.out)?;
    let csv = format!(
        "{}\n{}\n",
        fedscan::synth::MetricsReport::csv_header(),
        metrics.to_csv_row()
    );
    std::fs::write(args.out.join("metrics.csv"), &csv)?;
    let mut json = serde_json::to_vec_pretty(&metrics)?;
    json.push(b'\n');
    std::fs::write(args.out.join("metrics.json"), json)?;
    print!("{csv}");
    Ok(())
}

fn cmd_pvalues(args: PvaluesArgs) -> fedscan::Result<()> {
    let history = ObservationHistory::from_csv(&args.history)?;
    let t = args.snapshot.unwrap_or(history.length());
    let pvalues = empirical_pvalues(&history, t)?;
    let mut out = Vec::new();
    for (node, p) in &pvalues {
        writeln!(out, "{node}\t{p}")?;
    }
    std::fs::write(&args.out, out)?;
    println!(
        "wrote {} p-values for snapshot {t} -> {}",
        pvalues.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> fedscan::Result<()> {
    let result = load_result(&args.result)?;
    std::fs::create_dir_all(&args.out)?;

    let mut rounds = String::from("round,objective,u_size\n");
    for r in &result.rounds {
        rounds.push_str(&format!(
            "{},{},{}\n",
            r.round,
            r.objective,
            r.u_nodes.len()
        ));
    }
    std::fs::write(args.out.join("rounds.csv"), rounds)?;

    let mut owners = String::from("round,owner,f,q,s_size\n");
    for r in &result.rounds {
        for (owner, o) in &r.owners {
            owners.push_str(&format!(
                "{},{},{},{},{}\n",
                r.round,
                owner,
                o.f,
                o.q,
                o.s_nodes.len()
            ));
        }
    }
    std::fs::write(args.out.join("owners.csv"), owners)?;

    let mut nodes = String::new();
    push_subgraph_rows(&mut nodes, &result.final_u);
    for s in result.final_s.values() {
        push_subgraph_rows(&mut nodes, s);
    }
    std::fs::write(args.out.join("anomaly_nodes.tsv"), nodes)?;
    println!("wrote report tables -> {}", args.out.display());
    Ok(())
}

fn push_subgraph_rows(out: &mut String, s: &Subgraph) {
    for node in s.nodes() {
        out.push_str(&format!("{}\t{}\n", s.network_id(), node));
    }
}

fn load_result(path: &Path) -> fedscan::Result<FederationResult> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::input(format!("cannot open result {}: {e}", path.display())))?;
    FederationResult::from_json_reader(file)
}

fn manifest_base(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}
