use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use byzreg::checker::check_trace;
use byzreg::quorum::{max_faults, min_quorum_intersection};
use byzreg::runner::{self, SweepReport};
use byzreg::scenario::{Scenario, ScenarioError, SeedRange, BUNDLED};
use byzreg::trace::Trace;

#[derive(Parser)]
#[command(name = "byzreg", version, about = "Byzantine-tolerant SWMR register simulator and checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Bundled scenario name or path to a scenario file.
    scenario: String,
    /// Run a single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed range `a..b` (half-open).
    #[arg(long)]
    seeds: Option<SeedRange>,
    /// Directory for traces and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print one line per seed; twice for every verdict.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Accept n <= 3t.
    #[arg(long)]
    allow_t_violation: bool,
    /// Do not count a step-budget exhaustion as a failure.
    #[arg(long)]
    expect_nonterminating: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario over its seeds and check every trace.
    Run(RunArgs),
    /// Run a scenario for several system sizes with t = floor((n-1)/3).
    Sweep {
        #[command(flatten)]
        args: RunArgs,
        /// Comma-separated system sizes.
        #[arg(long, value_delimiter = ',', default_value = "4,7,10")]
        n: Vec<usize>,
    },
    /// Check a recorded trace file.
    Check {
        trace: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// List bundled scenarios.
    List,
    /// Verify the quorum intersection bound for all 3t < n <= max.
    Quorum {
        #[arg(long, default_value_t = 50)]
        max_n: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let scn = load(&args)?;
            run_one(&scn, &args)
        }
        Command::Sweep { args, n } => {
            let base = load(&args)?;
            let mut ok = true;
            for n in n {
                let mut scn = base.clone();
                scn.n = n;
                scn.t = max_faults(n);
                scn.name = format!("{}-n{n}", base.name);
                if let Some(a) = &mut scn.adversary {
                    a.count = Some(a.nodes.take().map_or(scn.t, |v| v.len()).min(scn.t));
                }
                scn.config(scn.seeds.start).with_context(|| format!("n = {n}"))?;
                ok &= run_one(&scn, &args)?;
            }
            Ok(ok)
        }
        Command::Check { trace, json } => {
            let file = fs::File::open(&trace).with_context(|| format!("opening {}", trace.display()))?;
            let trace = Trace::read_jsonl(BufReader::new(file))?;
            let report = check_trace(&trace);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{} seed {} ({:?}, {} steps)", trace.header.scenario, trace.header.seed, trace.footer.outcome, trace.footer.steps);
                for v in &report.verdicts {
                    println!("  {v}");
                }
            }
            Ok(report.passed())
        }
        Command::List => {
            for (name, text) in BUNDLED {
                let desc = Scenario::from_toml(text).ok().and_then(|s| s.description).unwrap_or_default();
                println!("{name:<28} {desc}");
            }
            Ok(true)
        }
        Command::Quorum { max_n } => {
            let mut ok = true;
            for n in 1..=max_n {
                for t in 0..=max_faults(n) {
                    let min = min_quorum_intersection(n, t);
                    if min < t + 1 {
                        println!("n={n} t={t}: two quorums of {} may share only {min}", n - t);
                        ok = false;
                    }
                }
            }
            println!(
                "quorum intersection >= t+1 for all 3t < n <= {max_n}: {}",
                if ok { "holds" } else { "VIOLATED" }
            );
            Ok(ok)
        }
    }
}

fn load(args: &RunArgs) -> Result<Scenario> {
    let mut scn = match Scenario::resolve(&args.scenario) {
        Err(ScenarioError::UnknownBundled(name)) => {
            anyhow::bail!("`{name}` is neither a bundled scenario nor a file (see `byzreg list`)")
        }
        r => r?,
    };
    if let Some(seed) = args.seed {
        scn.seeds = SeedRange::single(seed);
    }
    if let Some(r) = &args.seeds {
        scn.seeds = r.clone();
    }
    scn.allow_t_violation |= args.allow_t_violation;
    scn.expect_nonterminating |= args.expect_nonterminating;
    scn.config(scn.seeds.start)?;
    Ok(scn)
}

fn run_one(scn: &Scenario, args: &RunArgs) -> Result<bool> {
    let dir = args.out.as_ref().map(|o| o.join(&scn.name));
    if let Some(d) = &dir {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let mut io_err = None;
    let report = runner::sweep(scn, &args.scenario, &scn.seeds, |trace, report, outcome| {
        if let Some(d) = &dir {
            let path = d.join(format!("seed-{}.jsonl", outcome.seed));
            if let Err(e) = write_trace(&path, trace) {
                io_err.get_or_insert(e);
            }
        }
        if args.verbose > 0 {
            let status = if outcome.passed { "ok" } else { "FAIL" };
            println!("seed {:>6} {:<4} {:?} steps={} hash={}", outcome.seed, status, outcome.outcome, outcome.steps, &outcome.trace_hash[..16]);
            if args.verbose > 1 || !outcome.passed {
                for v in &report.verdicts {
                    if args.verbose > 1 || !v.is_ok() {
                        println!("    {v}");
                    }
                }
            }
        }
    })?;
    if let Some(e) = io_err {
        return Err(e);
    }
    if let Some(d) = &dir {
        write_report(&d.join("report.json"), &report)?;
    }
    print!("{}", report.summary());
    Ok(report.all_passed())
}

fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    trace.write_jsonl(std::io::BufWriter::new(f))?;
    Ok(())
}

fn write_report(path: &Path, report: &SweepReport) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(report)?).with_context(|| format!("writing {}", path.display()))
}
