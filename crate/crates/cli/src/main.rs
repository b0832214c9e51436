//! `scov`: scenario safe coverage campaigns from the command line.
//!
//! Exit codes: 0 success, 1 engine error, 2 configuration or input error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use scov_core::config::Config;
use scov_core::coverage::{
    evolution_report, penetration_rate, run_campaign, safe_coverage, threshold_r, verify_cell, CoverageLedger,
    CoverageReport, Mode, REPORT_SCHEMA,
};
use scov_core::reachability::export::write_set;
use scov_core::reachability::reach::seed_from_box;
use scov_core::reachability::{reach, Direction, ReachError};
use scov_core::scenario_space::{cell_count, required_samples, space_volume, unit_volume, CellIndex};
use scov_core::traffic_sim::roll_out;

#[derive(Parser)]
#[command(name = "scov", version, about = "Scenario safe coverage of vehicle control policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the space volume, unit volume, required samples and cell count.
    Volume { config: PathBuf },
    /// Verify every cell (or one) and write the ledger.
    Verify {
        config: PathBuf,
        /// Overrides `engine.mode`: sample, formal or mixed.
        #[arg(long)]
        mode: Option<Mode>,
        /// Verify only this cell, given as comma-separated indices.
        #[arg(long)]
        cell: Option<CellIndex>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        /// Ledger path; defaults to `outputs.ledger`, else standard output.
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Coverage statistics of ledgers, plus their evolution when several are given.
    Report {
        #[arg(required = true)]
        ledgers: Vec<PathBuf>,
        /// Report document path; defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-cell CSV of the last ledger.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Grid reachable set of the `[reach]` block.
    Reach {
        config: PathBuf,
        /// maxfrs, minfrs, maxbrs, minbrs, maxfrt or adversarial.
        #[arg(long)]
        spec_kind: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one cell center and write its trace as CSV.
    Trace {
        config: PathBuf,
        #[arg(long)]
        cell: CellIndex,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Input(String),
    Engine(String),
}

type Outcome = Result<(), Failure>;

fn input(e: impl ToString) -> Failure {
    Failure::Input(e.to_string())
}

fn engine(e: impl ToString) -> Failure {
    Failure::Engine(e.to_string())
}

/// Write to `path`, or to standard output when absent.
fn emit(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| engine(format!("{}: {e}", dir.display())))?;
            }
            fs::write(p, text).map_err(|e| engine(format!("{}: {e}", p.display())))
        }
        None => std::io::stdout().write_all(text.as_bytes()).map_err(engine),
    }
}

fn summary(l: &CoverageLedger) -> String {
    let s = l.stats();
    let c = s.counts;
    let pr = penetration_rate(l).map_or("n/a".to_string(), |p| p.to_string());
    let r = threshold_r(l).map_or("n/a".to_string(), |r| r.to_string());
    format!(
        "mode {}  cells {}  safe_verified {}  unsafe_observed {}  safety_infeasible {}  unknown {}\n\
         safe_coverage {}  penetration_rate {pr}  threshold_r {r}\n",
        l.mode(),
        s.total_cells,
        c.safe_verified,
        c.unsafe_observed,
        c.safety_infeasible,
        c.unknown,
        safe_coverage(l),
    )
}

fn volume(config: &Path) -> Outcome {
    let cfg = Config::load(config).map_err(input)?;
    let (space, res) = cfg.space().map_err(input)?;
    let v0 = unit_volume(space, res).map_err(input)?;
    let n = required_samples(space, res).map_err(input)?;
    let cells = cell_count(space, res).map_err(input)?;
    print!("V_S {}\nV_0 {v0}\nn {n}\ncells {cells}\nconfig {}\n", space_volume(space), cfg.hash);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn verify(
    config: &Path,
    mode: Option<Mode>,
    cell: Option<CellIndex>,
    jobs: Option<usize>,
    ledger_path: Option<PathBuf>,
    report_path: Option<PathBuf>,
    csv_path: Option<PathBuf>,
) -> Outcome {
    let cfg = Config::load(config).map_err(input)?;
    let mut campaign = cfg.campaign().map_err(input)?;
    if let Some(m) = mode {
        campaign.mode = m;
    }
    campaign.jobs = jobs;
    let ledger = match cell {
        None => run_campaign(&campaign).map_err(engine)?,
        Some(index) => {
            campaign.validate().map_err(engine)?;
            let mut l = CoverageLedger::new(
                campaign.space.clone(),
                campaign.resolution.clone(),
                campaign.spec.clone(),
                campaign.policy.name.clone(),
                campaign.mode,
                campaign.cell_test,
            )
            .map_err(engine)?
            .with_config_hash(cfg.hash.clone());
            let target = l.cell(&index).cloned().ok_or_else(|| input(format!("--cell: no cell {index}")))?;
            l.insert(verify_cell(&campaign, &target).map_err(engine)?).map_err(engine)?;
            l
        }
    };
    let ledger_path = ledger_path.or_else(|| cfg.output(&cfg.outputs.ledger));
    let report_path = report_path.or_else(|| cfg.output(&cfg.outputs.report));
    let csv_path = csv_path.or_else(|| cfg.output(&cfg.outputs.csv));
    emit(ledger_path.as_deref(), &ledger.to_json().map_err(engine)?)?;
    if let Some(p) = report_path {
        let report = CoverageReport::from_ledger(&ledger).map_err(engine)?;
        emit(Some(&p), &report.to_json().map_err(engine)?)?;
    }
    if let Some(p) = csv_path {
        emit(Some(&p), &CoverageReport::cell_csv(&ledger).map_err(engine)?)?;
    }
    if ledger_path.is_some() {
        print!("{}", summary(&ledger));
    } else {
        eprint!("{}", summary(&ledger));
    }
    Ok(())
}

fn report(paths: &[PathBuf], out: Option<PathBuf>, csv: Option<PathBuf>) -> Outcome {
    let mut ledgers = Vec::new();
    for p in paths {
        let text = fs::read_to_string(p).map_err(|e| input(format!("{}: {e}", p.display())))?;
        ledgers.push(CoverageLedger::from_json(&text).map_err(|e| input(format!("{}: {e}", p.display())))?);
    }
    let reports =
        ledgers.iter().map(CoverageReport::from_ledger).collect::<Result<Vec<_>, _>>().map_err(engine)?;
    let evolution = if ledgers.len() > 1 { Some(evolution_report(&ledgers).map_err(engine)?) } else { None };
    let doc = json!({ "schema": REPORT_SCHEMA, "reports": reports, "evolution": evolution });
    let text = serde_json::to_string_pretty(&doc).map_err(engine)? + "\n";
    emit(out.as_deref(), &text)?;
    if let Some(p) = csv {
        emit(Some(&p), &CoverageReport::cell_csv(ledgers.last().expect("at least one")).map_err(engine)?)?;
    }
    if out.is_some() {
        for (p, l) in paths.iter().zip(&ledgers) {
            print!("{}\n{}", p.display(), summary(l));
        }
        if let Some(e) = &evolution {
            println!(
                "evolution: {} iterations, unsafe volumes {:?}, converged {}, monotone {}, {} target cell(s)",
                e.iterations,
                e.unsafe_volumes,
                e.converged,
                e.monotone,
                e.targets.len()
            );
        }
    }
    Ok(())
}

fn reach_cmd(config: &Path, kind: &str, out: Option<PathBuf>) -> Outcome {
    let cfg = Config::load(config).map_err(input)?;
    let setup = cfg.reach().map_err(input)?;
    let spec = setup.spec(kind).map_err(input)?;
    let seed = seed_from_box(&setup.geometry, &setup.seed_box);
    let result = reach(&setup.system, &seed, &spec, setup.step).map_err(|e| match e {
        ReachError::Spec(_) => input(e),
        _ => engine(e),
    })?;
    let role = if spec.direction == Direction::Forward { "initial" } else { "target" };
    let mut buf = format!("# config {}\n# kind {kind}\n# {role} set {}\n", cfg.hash, setup.seed_box).into_bytes();
    write_set(&mut buf, &result.set, &result.metadata).map_err(engine)?;
    let text = String::from_utf8(buf).expect("set files are ascii");
    let out = out.or_else(|| cfg.output(&cfg.outputs.reach));
    emit(out.as_deref(), &text)?;
    if out.is_some() {
        let hull = result.set.bounding_box().map_or("empty".to_string(), |b| b.to_string());
        println!("{kind}: {} cell(s), volume {}, hull {hull}", result.set.len(), result.set.volume());
    }
    Ok(())
}

fn trace(config: &Path, cell: CellIndex, out: Option<PathBuf>) -> Outcome {
    let cfg = Config::load(config).map_err(input)?;
    let campaign = cfg.campaign().map_err(input)?;
    let l = CoverageLedger::new(
        campaign.space.clone(),
        campaign.resolution.clone(),
        campaign.spec.clone(),
        campaign.policy.name.clone(),
        campaign.mode,
        campaign.cell_test,
    )
    .map_err(input)?;
    let target = l.cell(&cell).ok_or_else(|| input(format!("--cell: no cell {cell}")))?;
    let episode_cfg = campaign.binding.apply(&campaign.base, &campaign.space, &target.center).map_err(engine)?;
    let episode = roll_out(&episode_cfg, &campaign.policy).map_err(engine)?;
    let mut buf = format!("# config {}\n# cell {cell}\n", cfg.hash).into_bytes();
    episode.signal.write_csv(&mut buf).map_err(engine)?;
    let out = out.or_else(|| cfg.output(&cfg.outputs.trace));
    emit(out.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Volume { config } => volume(&config),
        Command::Verify { config, mode, cell, jobs, ledger, report, csv } => {
            verify(&config, mode, cell, jobs, ledger, report, csv)
        }
        Command::Report { ledgers, out, csv } => report(&ledgers, out, csv),
        Command::Reach { config, spec_kind, out } => reach_cmd(&config, &spec_kind, out),
        Command::Trace { config, cell, out } => trace(&config, cell, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Engine(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
