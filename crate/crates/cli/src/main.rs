use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use qmoo_core::benchmarks::{gen_instance, CostTable, ProblemClass};
use qmoo_core::campaign::{
    read_records, run_campaign, CampaignConfig, CampaignKind, InstanceFile, OracleFile, Report,
};
use qmoo_core::circuit::ShotPolicy;
use qmoo_core::optim::Method;

#[derive(Parser)]
#[command(name = "qmoo", version, about = "Qudit multi-objective variational optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark instance file.
    Gen {
        #[arg(long)]
        class: ProblemClass,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the exact Pareto front of an instance file.
    Oracle {
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also store the objective vector of every basis state.
        #[arg(long)]
        scatter: bool,
    },
    /// Run a QMOO campaign, one record file per run.
    Run(CampaignArgs),
    /// Run an NSGA-II baseline campaign.
    Baseline(CampaignArgs),
    /// Aggregate run records into quantile tables.
    Report {
        /// Glob selecting record files, e.g. "out/*.jsonl".
        records: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CampaignArgs {
    /// JSON campaign configuration; command-line problem flags are then ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    class: Option<ProblemClass>,
    #[arg(long, required_unless_present = "config")]
    d: Option<usize>,
    #[arg(long, required_unless_present = "config")]
    n: Option<usize>,
    /// Instance seeds as a list of values and ranges, e.g. "0-10" or "0,2,5-7".
    #[arg(long, default_value = "0-10")]
    seeds: String,
    /// Runs per instance (default 50 for QMOO, 40 for the baseline).
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    /// Comma-separated shot counts; "exact" selects by exact probabilities.
    #[arg(long, default_value = "1024", value_delimiter = ',')]
    shots: Vec<ShotPolicy>,
    #[arg(long, default_value = "powell")]
    optimizer: Method,
    /// Number of most frequent states kept per evaluation.
    #[arg(long, default_value_t = 20)]
    select: usize,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    #[arg(long)]
    max_evaluations: Option<u64>,
    /// CMA-ES offspring or NSGA-II population size.
    #[arg(long)]
    population: Option<usize>,
    #[arg(long, default_value_t = 0)]
    campaign_seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
                if a > b {
                    bail!("empty seed range {part:?}");
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().with_context(|| format!("bad seed {part:?}"))?),
        }
    }
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    Ok(seeds)
}

fn campaign_config(args: &CampaignArgs, kind: CampaignKind) -> Result<CampaignConfig> {
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()));
    }
    let (Some(class), Some(d), Some(n)) = (args.class, args.d, args.n) else {
        bail!("--class, --d and --n are required without --config");
    };
    let mut cfg = CampaignConfig::new(class, d, n);
    cfg.instance_seeds = parse_seeds(&args.seeds)?;
    cfg.runs = args.runs.unwrap_or(match kind {
        CampaignKind::Qmoo => 50,
        CampaignKind::Baseline => 40,
    });
    cfg.layers = args.layers;
    cfg.shots = args.shots.clone();
    cfg.n_select = args.select;
    cfg.campaign_seed = args.campaign_seed;
    cfg.optimizer.method = args.optimizer;
    cfg.optimizer.iteration_cap = args.iterations;
    cfg.optimizer.max_evaluations = args.max_evaluations;
    cfg.moea.iterations = args.iterations;
    if let Some(p) = args.population {
        cfg.optimizer.population = p;
        cfg.moea.population = p;
    }
    Ok(cfg)
}

fn campaign(args: &CampaignArgs, kind: CampaignKind) -> Result<ExitCode> {
    let cfg = campaign_config(args, kind)?;
    let outcome = run_campaign(&cfg, kind, &args.out, args.threads)?;
    println!("wrote {} run records to {}", outcome.written.len(), args.out.display());
    if outcome.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for (key, err) in &outcome.failures {
        eprintln!(
            "failed: instance {} run {} shots {}: {err}",
            key.instance_seed,
            key.run_index,
            key.shots.map_or("-".to_string(), |s| s.to_string())
        );
    }
    Ok(ExitCode::from(2))
}

fn gen(class: ProblemClass, d: usize, n: usize, seed: u64, out: &Path) -> Result<()> {
    let instance = gen_instance(class, d, n, seed)?;
    let table = CostTable::build(&instance)?;
    InstanceFile::new(instance, &table).write(out)?;
    info!("instance written to {}", out.display());
    Ok(())
}

fn oracle(instance: &Path, out: &Path, scatter: bool) -> Result<()> {
    let file = InstanceFile::read(instance)?;
    let table = CostTable::build(&file.instance)?;
    let oracle = OracleFile::compute(&file.instance, &table, scatter)?;
    oracle.write(out)?;
    println!("front of {} states, hypervolume {}", oracle.front.len(), oracle.front_hv);
    Ok(())
}

fn report(pattern: &str, out: &Path) -> Result<()> {
    let records = read_records(pattern)?;
    let report = Report::from_records(&records)?;
    for path in report.write_tables(out)? {
        println!("{}", path.display());
    }
    for (key, s) in &report.finals {
        println!(
            "{key}: runs {} final normalized HV median {:.4} [q20 {:.4}, q80 {:.4}]",
            s.runs, s.median, s.q20, s.q80
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen { class, d, n, seed, out } => gen(*class, *d, *n, *seed, out).map(|_| ExitCode::SUCCESS),
        Command::Oracle { instance, out, scatter } => oracle(instance, out, *scatter).map(|_| ExitCode::SUCCESS),
        Command::Run(args) => campaign(args, CampaignKind::Qmoo),
        Command::Baseline(args) => campaign(args, CampaignKind::Baseline),
        Command::Report { records, out } => report(records, out).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
