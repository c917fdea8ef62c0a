//! `ltlsim`: validate relay topologies, run pricing scenarios, report KPIs.
//!
//! Exit codes are stable: 0 success, 1 domain validation failure,
//! 2 I/O or parse failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ltlsim_core::config::{RunConfig, ScenarioSelect};
use ltlsim_core::error::Error;
use ltlsim_core::harness::run_scenario;
use ltlsim_core::network::{Topology, DEFAULT_RELAY_LIMIT_HOURS};
use ltlsim_core::report::{quartile_table, read_summary, write_pricing_errors_csv, write_results};

#[derive(Parser)]
#[command(
    name = "ltlsim",
    version,
    about = "Relay freight network simulator with dynamic per-request quoting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a topology file: relay limit, references, connectivity
    Validate {
        /// Topology JSON path
        topology: PathBuf,
    },
    /// Run one scenario end to end and write result files
    Run(RunArgs),
    /// Print the KPI quartile table for a results directory and emit
    /// pricing_errors.csv
    Report {
        /// Directory containing summary.json
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration JSON; flags below override its keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario preset (1: fixed costs, 2: cost uncertainty, 3: 5x flow)
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    scenario: Option<u8>,
    /// Master seed; everything downstream derives from it
    #[arg(long)]
    seed: Option<u64>,
    /// 20 historical / 10 testing cases instead of 100 / 30
    #[arg(long)]
    desk_scale: bool,
    /// Worker threads for case-parallel execution (0 = default pool)
    #[arg(long)]
    jobs: Option<usize>,
    /// Also evaluate the flat-rate baseline on the same cases
    #[arg(long)]
    compare_baseline: bool,
    /// Output directory for kpis.csv and summary.json
    #[arg(long)]
    out: Option<PathBuf>,
    /// Topology JSON (defaults to the bundled 8-hub network)
    #[arg(long)]
    topology: Option<PathBuf>,
    /// OD flow CSV (defaults to the bundled demand file)
    #[arg(long)]
    demand: Option<PathBuf>,
    /// Synthesize gravity-model flows totalling this many annual tons
    /// instead of reading a demand file
    #[arg(long)]
    synthesize_annual_tons: Option<f64>,
    /// Override the historical case count
    #[arg(long)]
    n_historical: Option<usize>,
    /// Override the testing case count
    #[arg(long)]
    n_testing: Option<usize>,
    /// Write per-case dispatch log CSVs
    #[arg(long)]
    dispatch_logs: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { topology } => cmd_validate(&topology),
        Command::Run(args) => cmd_run(args),
        Command::Report { dir } => cmd_report(&dir),
    };
    ExitCode::from(code)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. } | Error::Json { .. } | Error::CsvRow { .. } => 2,
        _ => 1,
    }
}

fn fail(err: &Error) -> u8 {
    eprintln!("error: {err}");
    exit_code_for(err)
}

fn cmd_validate(path: &Path) -> u8 {
    let topology = match Topology::from_file(path) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let violations = topology.violations(DEFAULT_RELAY_LIMIT_HOURS);
    if violations.is_empty() {
        let max_hours = topology.arcs.iter().map(|a| a.hours).fold(0.0, f64::max);
        println!(
            "{} hubs, {} arcs, max arc {}h",
            topology.hubs.len(),
            topology.arcs.len(),
            max_hours
        );
        0
    } else {
        eprintln!(
            "{}",
            serde_json::to_string(&violations).expect("violations serialize")
        );
        1
    }
}

fn cmd_run(args: RunArgs) -> u8 {
    let mut cfg = match &args.config {
        Some(path) => match RunConfig::from_file(path) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        },
        None => RunConfig::default(),
    };
    if let Some(id) = args.scenario {
        cfg.scenario = ScenarioSelect::Preset(id);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.desk_scale |= args.desk_scale;
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs;
    }
    cfg.compare_baseline |= args.compare_baseline;
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    if args.topology.is_some() {
        cfg.topology = args.topology;
    }
    if args.demand.is_some() {
        cfg.demand = args.demand;
    }
    if args.synthesize_annual_tons.is_some() {
        cfg.synthesize_annual_tons = args.synthesize_annual_tons;
    }
    if args.n_historical.is_some() {
        cfg.n_historical = args.n_historical;
    }
    if args.n_testing.is_some() {
        cfg.n_testing = args.n_testing;
    }
    cfg.write_dispatch_logs |= args.dispatch_logs;

    let resolved = match cfg.resolve() {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let net = match cfg.load_network() {
        Ok(n) => n,
        Err(e) => return fail(&e),
    };
    let flows = match cfg.load_flows(&net) {
        Ok(f) => f,
        Err(e) => return fail(&e),
    };

    let result = match run_scenario(&net, &flows, &resolved.params, cfg.seed) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let summary = match write_results(
        &cfg.out_dir,
        &resolved.echo,
        &result,
        &net,
        cfg.write_dispatch_logs,
    ) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    print!("{}", quartile_table(&summary));
    println!("results written to {}", cfg.out_dir.display());
    0
}

fn cmd_report(dir: &PathBuf) -> u8 {
    let summary = match read_summary(dir) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    print!("{}", quartile_table(&summary));
    match write_pricing_errors_csv(dir, &summary.histogram) {
        Ok(path) => {
            println!("histogram bins written to {}", path.display());
            0
        }
        Err(e) => fail(&e),
    }
}
