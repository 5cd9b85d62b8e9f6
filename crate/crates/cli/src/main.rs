//! `bbsim`: run scenarios, lint input files and compare databases against
//! the centralized best routes.
//!
//! Exit codes: 0 success, 1 invariant violation or database mismatch,
//! 2 usage, I/O or parse error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use bbsim_core::sim::oracle::{database_view, diff_against_oracle, oracle_best_routes};
use bbsim_core::sim::{run, RunOptions, RunResult};
use bbsim_core::wire::{parse_db, parse_scenario_for, parse_topology, write_db, write_routes, FormatErrors};
use bbsim_core::{NetworkTopology, SimTime};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bbsim", version, about = "Bandwidth-broker inter-domain simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a scenario and write trace, metrics, databases and filters.
    Run {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of terms to simulate.
        #[arg(long, default_value_t = 20)]
        terms: u64,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Check invariants after every event.
        #[arg(long)]
        checked: bool,
    },
    /// Parse and validate a topology and optionally a scenario against it.
    Validate {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Print the centralized best routes in database dump format.
    Oracle {
        #[arg(long)]
        topology: PathBuf,
    },
    /// Compare a database dump against the centralized best routes.
    DiffQuiescent {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        db: PathBuf,
        /// The best routes assume an idle network; with reservations in
        /// place the advertised bandwidth is lower, so skip comparing it.
        #[arg(long)]
        ignore_bandwidth: bool,
    },
}

enum Failure {
    /// Exit 1.
    Check(String),
    /// Exit 2.
    Input(String),
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn parsed<T>(path: &Path, r: Result<T, FormatErrors>) -> Result<T, Failure> {
    r.map_err(|errs| {
        let lines: Vec<String> = errs.0.iter().map(|e| format!("{}: {e}", path.display())).collect();
        Failure::Input(lines.join("\n"))
    })
}

fn load_topology(path: &Path) -> Result<NetworkTopology, Failure> {
    parsed(path, parse_topology(&read(path)?))
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    let p = dir.join(name);
    fs::write(&p, body).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))
}

fn filters_text(res: &RunResult) -> String {
    let mut out = String::new();
    for (b, st) in &res.brokers {
        for l in st.filter_table().to_lines() {
            out.push_str(&format!("{b} {l}\n"));
        }
    }
    out
}

fn cmd_run(
    topology: &Path,
    scenario: &Path,
    seed: u64,
    terms: u64,
    out: &Path,
    checked: bool,
) -> Result<(), Failure> {
    let topo = load_topology(topology)?;
    let scen = parsed(scenario, parse_scenario_for(&read(scenario)?, &topo))?;
    let horizon = SimTime(terms.saturating_mul(scen.term_length));
    let opts = RunOptions {
        checked,
        horizon,
        record_trace: true,
        ..Default::default()
    };
    let res = run(Arc::new(topo), scen, seed, opts).map_err(|e| Failure::Input(e.to_string()))?;
    fs::create_dir_all(out).map_err(|e| Failure::Input(format!("{}: {e}", out.display())))?;
    let mut trace = res.trace.join("\n");
    trace.push('\n');
    write(out, "trace.txt", &trace)?;
    write(out, "metrics.csv", &res.metrics.to_csv())?;
    write(out, "db.txt", &write_db(&database_view(res.brokers.values())))?;
    write(out, "filters.txt", &filters_text(&res))?;
    println!(
        "events={} end={} stop={:?} quiescent={} trace={}",
        res.events, res.end_time, res.stop, res.quiescent, res.trace_hash
    );
    match &res.violation {
        Some(v) => {
            let msgs: Vec<String> = v.violations.iter().map(|x| x.to_string()).collect();
            Err(Failure::Check(format!(
                "invariant violation at event {} (t={}):\n{}",
                v.event_index,
                v.time,
                msgs.join("\n")
            )))
        }
        None => Ok(()),
    }
}

fn cmd_validate(topology: &Path, scenario: Option<&Path>) -> Result<(), Failure> {
    let topo = load_topology(topology)?;
    let mut summary = format!(
        "{}: {} transit, {} edge domains, {} links",
        topology.display(),
        topo.transit_domains().count(),
        topo.domains().len() - topo.transit_domains().count(),
        topo.links().len()
    );
    if let Some(s) = scenario {
        let scen = parsed(s, parse_scenario_for(&read(s)?, &topo))?;
        summary.push_str(&format!(
            "; {}: {} streams, {} actions",
            s.display(),
            scen.demands.len(),
            scen.actions.len()
        ));
    }
    println!("{summary}");
    Ok(())
}

fn cmd_diff(topology: &Path, db: &Path, ignore_bandwidth: bool) -> Result<(), Failure> {
    let topo = load_topology(topology)?;
    let mut view = parsed(db, parse_db(&read(db)?))?;
    let routes = oracle_best_routes(&topo);
    if ignore_bandwidth {
        for (k, (ai, _)) in view.iter_mut() {
            if let Some(r) = routes.get(k) {
                ai.bandwidth = r.ai.bandwidth;
            }
        }
    }
    let diff = diff_against_oracle(&view, &routes);
    if diff.is_empty() {
        return Ok(());
    }
    for d in &diff {
        println!("{d}");
    }
    Err(Failure::Check(format!("{} entries differ from the best routes", diff.len())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let r = match &cli.cmd {
        Cmd::Run {
            topology,
            scenario,
            seed,
            terms,
            out,
            checked,
        } => cmd_run(topology, scenario, *seed, *terms, out, *checked),
        Cmd::Validate { topology, scenario } => cmd_validate(topology, scenario.as_deref()),
        Cmd::Oracle { topology } => load_topology(topology).map(|t| print!("{}", write_routes(&oracle_best_routes(&t)))),
        Cmd::DiffQuiescent {
            topology,
            db,
            ignore_bandwidth,
        } => cmd_diff(topology, db, *ignore_bandwidth),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("{m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("{m}");
            ExitCode::from(2)
        }
    }
}
