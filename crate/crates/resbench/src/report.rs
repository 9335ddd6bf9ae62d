//! CSV traces, JSON summaries and comparison reports.

use std::fmt::Write as _;

use resbench_core::envmodel::FaultTrace;
use resbench_core::fso::FsoReport;
use resbench_core::rds::{StepDetail, StepRecord};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scenario::Strategy;

pub const BASE_COLUMNS: [&str; 9] = [
    "step",
    "f",
    "cr",
    "R",
    "verdict",
    "overshoot",
    "undershoot",
    "identity_loss",
    "cost",
];

/// Extra columns appended to [`BASE_COLUMNS`] for a strategy.
pub fn detail_columns(strategy: Strategy) -> &'static [&'static str] {
    match strategy {
        Strategy::Rds | Strategy::Fso => &[],
        Strategy::Ards => &["n", "dfob", "decision"],
        Strategy::Anvp => &["k", "active_ids", "excluded_this_step"],
        Strategy::MapeSingle | Strategy::MapeFusion => &[
            "planner_ids",
            "fused_action_count",
            "conflicts",
            "loop_broken",
            "config_changed",
        ],
    }
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn row(r: &StepRecord) -> Vec<String> {
    let mut out = vec![
        r.step.to_string(),
        r.f.to_string(),
        r.cr.to_string(),
        r.replicas.to_string(),
        r.verdict.as_str().to_owned(),
        r.overshoot.to_string(),
        r.undershoot.to_string(),
        flag(r.identity_loss),
        r.cost.to_string(),
    ];
    match &r.detail {
        StepDetail::Static => {}
        StepDetail::Adaptive { n, dfob, decision } => {
            out.extend([
                n.to_string(),
                dfob.to_string(),
                decision.as_str().to_owned(),
            ]);
        }
        StepDetail::Versions {
            k,
            active_ids,
            excluded,
            ..
        } => out.extend([k.to_string(), join(active_ids), join(excluded)]),
        StepDetail::Mape {
            planner_ids,
            fused_action_count,
            conflicts,
            loop_broken,
            config_changed,
        } => out.extend([
            join(planner_ids),
            fused_action_count.to_string(),
            conflicts.to_string(),
            flag(*loop_broken),
            flag(*config_changed),
        ]),
    }
    out
}

/// Per-step CSV for a cell-strategy run.
pub fn steps_csv(strategy: Strategy, records: &[StepRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = BASE_COLUMNS
        .iter()
        .chain(detail_columns(strategy))
        .copied()
        .collect();
    w.write_record(&header)?;
    for r in records {
        w.write_record(row(r))?;
    }
    Ok(w.into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?)
}

/// `step,f,cr` export of a fault trace.
pub fn trace_csv(trace: &FaultTrace) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "f", "cr"])?;
    for (step, f, cr) in trace.rows() {
        w.write_record([step.to_string(), f.to_string(), cr.to_string()])?;
    }
    Ok(w.into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?)
}

/// `step,request_id,block,outcome,hops` events of an organisation run.
pub fn fso_events_csv(report: &FsoReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "request_id", "block", "outcome", "hops"])?;
    for e in &report.events {
        w.write_record([
            e.step.to_string(),
            e.request_id.to_string(),
            e.block.clone(),
            e.outcome.as_str().to_owned(),
            e.hops.to_string(),
        ])?;
    }
    Ok(w.into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub horizon: usize,
    pub total_cost: u64,
    pub identity_losses: usize,
    pub undershoot_steps: usize,
    pub mean_overshoot: f64,
    pub adaptations: usize,
}

impl Summary {
    pub fn from_records(
        name: &str,
        strategy: Strategy,
        seed: u64,
        horizon: usize,
        records: &[StepRecord],
    ) -> Self {
        let steps = records.len().max(1) as f64;
        Summary {
            name: name.to_owned(),
            strategy,
            seed,
            horizon,
            total_cost: records.iter().map(|r| r.cost).sum(),
            identity_losses: records.iter().filter(|r| r.identity_loss).count(),
            undershoot_steps: records.iter().filter(|r| r.undershoot > 0).count(),
            mean_overshoot: records.iter().map(|r| f64::from(r.overshoot)).sum::<f64>() / steps,
            adaptations: records.iter().filter(|r| r.adapted()).count(),
        }
    }
}

/// Difference `scenario_i - scenario_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub name: String,
    pub baseline: String,
    pub total_cost: i128,
    pub identity_losses: i64,
    pub undershoot_steps: i64,
    pub mean_overshoot: f64,
    pub adaptations: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenarios: Vec<Summary>,
    pub deltas: Vec<Delta>,
}

fn diff(a: usize, b: usize) -> i64 {
    a as i64 - b as i64
}

impl ComparisonReport {
    pub fn new(scenarios: Vec<Summary>) -> Self {
        let deltas = match scenarios.split_first() {
            None => Vec::new(),
            Some((base, rest)) => rest
                .iter()
                .map(|s| Delta {
                    name: s.name.clone(),
                    baseline: base.name.clone(),
                    total_cost: i128::from(s.total_cost) - i128::from(base.total_cost),
                    identity_losses: diff(s.identity_losses, base.identity_losses),
                    undershoot_steps: diff(s.undershoot_steps, base.undershoot_steps),
                    mean_overshoot: s.mean_overshoot - base.mean_overshoot,
                    adaptations: diff(s.adaptations, base.adaptations),
                })
                .collect(),
        };
        ComparisonReport { scenarios, deltas }
    }

    /// Aligned plain-text table, one row per scenario.
    pub fn table(&self) -> String {
        let header = [
            "name",
            "strategy",
            "total_cost",
            "identity_losses",
            "undershoot_steps",
            "mean_overshoot",
            "adaptations",
            "d_cost",
            "d_losses",
        ];
        let mut rows = vec![header.map(String::from).to_vec()];
        for (i, s) in self.scenarios.iter().enumerate() {
            let (dc, dl) = match i.checked_sub(1).map(|j| &self.deltas[j]) {
                Some(d) => (
                    format!("{:+}", d.total_cost),
                    format!("{:+}", d.identity_losses),
                ),
                None => ("-".into(), "-".into()),
            };
            rows.push(vec![
                s.name.clone(),
                s.strategy.to_string(),
                s.total_cost.to_string(),
                s.identity_losses.to_string(),
                s.undershoot_steps.to_string(),
                format!("{:.4}", s.mean_overshoot),
                s.adaptations.to_string(),
                dc,
                dl,
            ]);
        }
        render(&rows)
    }
}

/// Left-aligns the first column, right-aligns the rest.
pub fn render(rows: &[Vec<String>]) -> String {
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
        let mut line = String::new();
        for (c, cell) in r.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(line, "{cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
