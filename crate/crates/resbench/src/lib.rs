//! Scenario runner for the resilience workbench.
//!
//! Reads JSON scenario documents, runs the named strategy from
//! `resbench-core`, and writes per-step CSV traces plus JSON summaries.
//! Output bytes depend only on the scenario document.

pub mod error;
pub mod report;
pub mod scenario;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use resbench_core::fso::FsoStats;
use resbench_core::taxonomy::{
    builtin_contracts, match_contract, EnvironmentPolicy, ResilienceContract, SYSTEMS,
};

pub use error::{HarnessError, Result};
pub use report::{ComparisonReport, Summary};
pub use scenario::{Outcome, Scenario, Setup, Strategy};

/// Files produced by one run, named relative to the output directory.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Option<Summary>,
    pub fso_stats: Option<FsoStats>,
}

fn stem(file: &str) -> &str {
    file.strip_suffix(".csv").unwrap_or(file)
}

/// Serialises a finished run.
pub fn render(scenario: &Scenario, outcome: &Outcome) -> Result<Rendered> {
    let trace_file = scenario.trace_file();
    let stem = stem(&trace_file);
    match outcome {
        Outcome::Steps(records) => {
            let summary = Summary::from_records(
                &scenario.name,
                scenario.strategy,
                scenario.seed,
                scenario.horizon,
                records,
            );
            Ok(Rendered {
                files: vec![
                    (
                        trace_file.clone(),
                        report::steps_csv(scenario.strategy, records)?,
                    ),
                    (format!("{stem}.summary.json"), report::to_json(&summary)?),
                ],
                summary: Some(summary),
                fso_stats: None,
            })
        }
        Outcome::Fso(fso) => Ok(Rendered {
            files: vec![
                (trace_file.clone(), report::fso_events_csv(fso)?),
                (format!("{stem}.stats.json"), report::to_json(&fso.stats)?),
            ],
            summary: None,
            fso_stats: Some(fso.stats),
        }),
    }
}

/// Writes `files` under `dir`, creating it if needed. Returns the paths.
pub fn write_files(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Write {
        path: dir.to_owned(),
        source,
    })?;
    files
        .iter()
        .map(|(name, bytes)| {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|source| HarnessError::Write {
                path: path.clone(),
                source,
            })?;
            Ok(path)
        })
        .collect()
}

/// Loads, runs and writes one scenario.
pub fn run_scenario(path: &Path, out_dir: &Path) -> Result<(Rendered, Vec<PathBuf>)> {
    let scenario = Scenario::load(path)?;
    let rendered = render(&scenario, &scenario.execute()?)?;
    let paths = write_files(out_dir, &rendered.files)?;
    Ok((rendered, paths))
}

/// Runs every scenario concurrently and reports deltas against the first.
///
/// All scenarios are validated before any run starts and nothing is written
/// unless every run succeeds.
pub fn compare(paths: &[PathBuf], out_dir: &Path) -> Result<(ComparisonReport, Vec<PathBuf>)> {
    let scenarios = paths
        .iter()
        .map(|p| Scenario::load(p))
        .collect::<Result<Vec<_>>>()?;
    compare_scenarios(&scenarios, out_dir)
}

pub fn compare_scenarios(
    scenarios: &[Scenario],
    out_dir: &Path,
) -> Result<(ComparisonReport, Vec<PathBuf>)> {
    if scenarios.len() < 2 {
        return Err(HarnessError::Config {
            scenario: scenarios
                .first()
                .map_or_else(String::new, |s| s.name.clone()),
            field: "scenarios",
            message: "compare needs at least two scenarios".into(),
        });
    }
    if let Some(s) = scenarios.iter().find(|s| s.strategy == Strategy::Fso) {
        return Err(HarnessError::Config {
            scenario: s.name.clone(),
            field: "strategy",
            message: "fso runs have no cost or identity columns; use fso-sim".into(),
        });
    }
    let outcomes: Vec<Result<Outcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|s| scope.spawn(move || s.execute()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    });

    let mut seen = BTreeSet::new();
    let clash = scenarios.iter().any(|s| !seen.insert(s.trace_file()));
    let mut files = Vec::new();
    let mut summaries = Vec::new();
    for (i, (scenario, outcome)) in scenarios.iter().zip(outcomes).enumerate() {
        let rendered = render(scenario, &outcome?)?;
        for (name, bytes) in rendered.files {
            let name = if clash { format!("{i}-{name}") } else { name };
            files.push((name, bytes));
        }
        summaries.extend(rendered.summary);
    }
    let report = ComparisonReport::new(summaries);
    files.push(("comparison.json".into(), report::to_json(&report)?));
    let written = write_files(out_dir, &files)?;
    Ok((report, written))
}

/// The built-in contracts as an aligned table in row order.
pub fn classification_table(policy: Option<&EnvironmentPolicy>) -> String {
    let table = builtin_contracts();
    let mut header = vec!["system", "perception", "awareness", "planning"];
    if policy.is_some() {
        header.push("policy");
    }
    let mut rows = vec![header.into_iter().map(String::from).collect::<Vec<_>>()];
    for name in SYSTEMS {
        let c = &table[name];
        let mut row = vec![
            name.to_string(),
            c.perception.to_string(),
            c.awareness.to_string(),
            c.planning.to_string(),
        ];
        if let Some(p) = policy {
            row.push(match_cell(c, p));
        }
        rows.push(row);
    }
    left_aligned(&rows)
}

/// `match`, or `mismatch: facet.axis,...`.
pub fn match_cell(contract: &ResilienceContract, policy: &EnvironmentPolicy) -> String {
    match match_contract(contract, policy) {
        resbench_core::taxonomy::MatchResult::Match => "match".into(),
        resbench_core::taxonomy::MatchResult::Mismatch(s) => format!(
            "mismatch: {}",
            s.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(",")
        ),
    }
}

fn left_aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, cell)| format!("{cell:<w$}", w = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[derive(serde::Serialize)]
struct ClassifiedRow<'a> {
    system: &'a str,
    #[serde(flatten)]
    contract: &'a ResilienceContract,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<resbench_core::taxonomy::MatchResult>,
}

/// The built-in contracts as a JSON array in row order.
pub fn classification_json(policy: Option<&EnvironmentPolicy>) -> Result<Vec<u8>> {
    let table = builtin_contracts();
    let rows: Vec<ClassifiedRow> = SYSTEMS
        .iter()
        .map(|name| ClassifiedRow {
            system: name,
            contract: &table[*name],
            policy: policy.map(|p| match_contract(&table[*name], p)),
        })
        .collect();
    report::to_json(&rows)
}
