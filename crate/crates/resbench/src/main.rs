use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use resbench::report::{to_json, trace_csv};
use resbench::{
    classification_json, classification_table, match_cell, Outcome, Scenario, Strategy,
};
use resbench_core::taxonomy::{
    builtin_contracts, meta_advise, AdviceThresholds, EnvironmentPolicy, ResilienceContract,
};

#[derive(Parser)]
#[command(name = "resbench", version, about = "Resilience strategy workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV trace and JSON summary.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run several scenarios and report deltas against the first.
    Compare {
        #[arg(required = true, num_args = 2..)]
        scenarios: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Print the built-in behaviour/dynamicity contracts.
    Classify {
        /// Print JSON instead of the aligned table.
        #[arg(long)]
        json: bool,
        /// Environment policy to match every contract against.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Match only this contract document against the policy.
        #[arg(long, requires = "policy")]
        contract: Option<PathBuf>,
    },
    /// Run an organisation scenario and write its event CSV and stats JSON.
    FsoSim {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Write the fault trace of a scenario as `step,f,cr`.
    Trace {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run a scenario and print strengthen/relax advice for its strategy.
    Advise {
        scenario: PathBuf,
        #[arg(long, default_value_t = AdviceThresholds::default().undershoot_high)]
        undershoot_high: f64,
        #[arg(long, default_value_t = AdviceThresholds::default().overshoot_high)]
        overshoot_high: f64,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Run { scenario, out_dir } => {
            let (rendered, paths) = resbench::run_scenario(&scenario, &out_dir)?;
            for p in &paths {
                writeln!(out, "wrote {}", p.display())?;
            }
            if let Some(s) = &rendered.summary {
                out.write_all(&to_json(s)?)?;
            }
            if let Some(s) = &rendered.fso_stats {
                out.write_all(&to_json(s)?)?;
            }
        }
        Command::Compare { scenarios, out_dir } => {
            let (report, paths) = resbench::compare(&scenarios, &out_dir)?;
            write!(out, "{}", report.table())?;
            for p in &paths {
                writeln!(out, "wrote {}", p.display())?;
            }
        }
        Command::Classify {
            json,
            policy,
            contract,
        } => {
            let policy: Option<EnvironmentPolicy> = policy.as_deref().map(read_json).transpose()?;
            if let Some(path) = contract {
                let contract: ResilienceContract = read_json(&path)?;
                let policy = policy.expect("clap enforces --policy");
                let verdict = resbench_core::taxonomy::match_contract(&contract, &policy);
                if json {
                    out.write_all(&to_json(&verdict)?)?;
                } else {
                    writeln!(out, "{}", match_cell(&contract, &policy))?;
                }
            } else if json {
                out.write_all(&classification_json(policy.as_ref())?)?;
            } else {
                write!(out, "{}", classification_table(policy.as_ref()))?;
            }
        }
        Command::FsoSim { scenario, out_dir } => {
            let s = Scenario::load(&scenario)?;
            if s.strategy != Strategy::Fso {
                bail!("fso-sim expects strategy \"fso\", got \"{}\"", s.strategy);
            }
            let rendered = resbench::render(&s, &s.execute()?)?;
            for p in resbench::write_files(&out_dir, &rendered.files)? {
                writeln!(out, "wrote {}", p.display())?;
            }
            if let Some(stats) = &rendered.fso_stats {
                out.write_all(&to_json(stats)?)?;
            }
        }
        Command::Trace { scenario, out_dir } => {
            let s = Scenario::load(&scenario)?;
            let Some(trace) = s.trace() else {
                bail!("strategy \"{}\" has no fault trace", s.strategy);
            };
            let file = format!("{}.trace.csv", s.name);
            for p in resbench::write_files(&out_dir, &[(file, trace_csv(trace)?)])? {
                writeln!(out, "wrote {}", p.display())?;
            }
        }
        Command::Advise {
            scenario,
            undershoot_high,
            overshoot_high,
        } => {
            let s = Scenario::load(&scenario)?;
            let Outcome::Steps(records) = s.execute()? else {
                bail!("advice needs a cell strategy, not \"{}\"", s.strategy);
            };
            let contract = builtin_contracts()[s.strategy.contract_name()];
            let thresholds = AdviceThresholds {
                undershoot_high,
                overshoot_high,
            };
            let advice = meta_advise(&records, &contract, &thresholds)?;
            out.write_all(&to_json(&advice)?)?;
        }
    }
    Ok(())
}
