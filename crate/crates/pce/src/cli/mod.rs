//! Command-line interface: `stats build`, `estimate`, `oracle`, `verify`.
//!
//! Exit codes: 0 success, 1 input error, 2 every requested estimation
//! method failed, 3 the oracle hit its intermediate-size cap, 4 a
//! verification suite reported violations.

pub mod suites;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::catalog::{build_catalog, load_catalog, load_csv, save_catalog, Database, StatsConfig};
use crate::error::Error;
use crate::estimate::{estimate, stale_relations, EstimateOptions, Method};
use crate::model::ConjunctiveQuery;
use crate::oracle::exact_join;
use crate::stats::parse_predicate;
use crate::Result;

#[derive(Parser)]
#[command(
    name = "pce",
    about = "Guaranteed upper bounds on conjunctive-query output sizes from degree-sequence statistics",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Statistics catalog maintenance
    Stats {
        #[command(subcommand)]
        command: StatsCommand,
    },
    /// Compute upper bounds for a query from a statistics catalog
    Estimate(EstimateArgs),
    /// Evaluate a query exactly against CSV data
    Oracle(OracleArgs),
    /// Run seeded verification suites
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Ingest CSVs and write the statistics catalog
    Build(StatsBuildArgs),
}

#[derive(Args)]
struct StatsBuildArgs {
    /// Directory holding the CSV files
    #[arg(long)]
    data: PathBuf,
    /// Statistics config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output catalog path (JSON)
    #[arg(long)]
    catalog: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Statistics catalog written by `stats build`
    #[arg(long)]
    catalog: PathBuf,
    /// Query file (one conjunctive query; `%` starts a comment line)
    #[arg(long)]
    query: PathBuf,
    /// Comma-separated subset of agm,cb,boundsketch,polyb,dsb
    #[arg(long, default_value = "agm,cb,boundsketch,polyb,dsb")]
    methods: String,
    /// Filter predicate, e.g. "A=5 and (B=3 or B=4)" or "C in (1,2,3)"
    #[arg(long)]
    pred: Option<String>,
    /// Output format: text or json
    #[arg(long, default_value = "text")]
    format: String,
    /// Data directory; when given, source files are checked for staleness
    #[arg(long)]
    data: Option<PathBuf>,
    /// Ordering-enumeration cap for the chain bound
    #[arg(long, default_value_t = 8)]
    max_vars: usize,
}

#[derive(Args)]
struct OracleArgs {
    /// Directory holding one `<relation>.csv` per query relation
    #[arg(long)]
    data: PathBuf,
    /// Query file
    #[arg(long)]
    query: PathBuf,
    /// Cap on intermediate join sizes
    #[arg(long, default_value_t = crate::oracle::DEFAULT_JOIN_CAP)]
    oracle_cap: usize,
    /// Treat CSV files as headerless
    #[arg(long)]
    no_header: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// One of soundness, dominance, shannon, compression, all
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Optional fixture directory with R.csv, S.csv, T.csv for the
    /// closed-form checks
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output format: text or json
    #[arg(long, default_value = "text")]
    format: String,
}

/// Parse argv, run, and map errors onto the documented exit codes.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/usage text
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::CapExceeded { .. } => 3,
                _ => 1,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Stats {
            command: StatsCommand::Build(args),
        } => cmd_stats_build(&args),
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Oracle(args) => cmd_oracle(&args),
        Command::Verify(args) => cmd_verify(&args),
    }
}

fn read_query_file(path: &Path) -> Result<ConjunctiveQuery> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    ConjunctiveQuery::parse(&text)
}

fn cmd_stats_build(args: &StatsBuildArgs) -> Result<i32> {
    let config = StatsConfig::from_path(&args.config)?;
    let started = Instant::now();
    let (catalog, _db) = build_catalog(&args.data, &config)?;
    save_catalog(&catalog, &args.catalog)?;
    let elapsed = started.elapsed();
    for meta in &catalog.meta.relations {
        let entries = catalog
            .entries()
            .iter()
            .filter(|e| e.relation == meta.name)
            .count();
        let sequences = catalog
            .sequences()
            .iter()
            .filter(|s| s.relation == meta.name)
            .count();
        println!(
            "{}: {} tuples, {} entries, {} sequences",
            meta.name, meta.cardinality, entries, sequences
        );
    }
    println!(
        "catalog written to {} in {:.1} ms",
        args.catalog.display(),
        elapsed.as_secs_f64() * 1e3
    );
    Ok(0)
}

fn cmd_estimate(args: &EstimateArgs) -> Result<i32> {
    let catalog = load_catalog(&args.catalog)?;
    let query = read_query_file(&args.query)?;
    let opts = EstimateOptions {
        methods: Method::parse_list(&args.methods)?,
        pred: match &args.pred {
            Some(text) => parse_predicate(text)?,
            None => crate::stats::PredicateExpr::None,
        },
        max_vars: args.max_vars,
    };
    let mut report = estimate(&catalog, &query, &opts)?;
    if let Some(data) = &args.data {
        report.stale = stale_relations(&catalog, data);
    }
    match args.format.as_str() {
        "text" => print!("{}", report.to_text()),
        "json" => println!("{}", report.to_json()),
        other => return Err(Error::Input(format!("unknown format `{other}`"))),
    }
    Ok(if report.any_ok() { 0 } else { 2 })
}

fn cmd_oracle(args: &OracleArgs) -> Result<i32> {
    let query = read_query_file(&args.query)?;
    let mut db = Database::new();
    let mut loaded: Vec<String> = Vec::new();
    for atom in query.atoms() {
        if loaded.contains(&atom.relation) {
            continue;
        }
        let path = args.data.join(format!("{}.csv", atom.relation));
        db.insert(load_csv(&path, &atom.relation, !args.no_header)?)?;
        loaded.push(atom.relation.clone());
    }
    let out = exact_join(&db, &query, args.oracle_cap)?;
    println!("{}", out.count());
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let mut reports = suites::run_suites(&args.suite, args.seed, args.trials)?;
    if let Some(data) = &args.data {
        let mut db = Database::new();
        let mut complete = true;
        for name in ["R", "S", "T"] {
            let path = data.join(format!("{name}.csv"));
            if path.exists() {
                db.insert(load_csv(&path, name, true)?)?;
            } else {
                complete = false;
            }
        }
        if complete {
            reports.push(suites::run_fixture_checks(&db)?);
        }
    }
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    match args.format.as_str() {
        "text" => {
            for r in &reports {
                print!("{}", r.to_text());
            }
            println!("total violations: {violations}");
        }
        "json" => println!(
            "{}",
            serde_json::to_string_pretty(&reports).expect("reports serialize")
        ),
        other => return Err(Error::Input(format!("unknown format `{other}`"))),
    }
    Ok(if violations == 0 { 0 } else { 4 })
}
