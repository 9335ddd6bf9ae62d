//! Redundant data structures with a fixed design parameter `n`.
//!
//! A [`ReplicatedCell`] stores `2n + 1` copies of one value and reads it back
//! by majority vote. [`regions`] compares the deployed replica count with the
//! contextual redundancy of a step; the resulting overshoot and undershoot
//! are shared by every redundancy strategy in the crate.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ards::AdjustDecision;
use crate::envmodel::{contextual_redundancy, inject_faults, Corruption, FaultTrace};
use crate::error::invalid;
use crate::voting::{adjudicate, Verdict};
use crate::{sim_rng, Result, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicatedCell {
    replicas: Vec<Value>,
    n: u32,
    reference: Value,
}

impl ReplicatedCell {
    pub fn new(n: u32, value: Value) -> Self {
        ReplicatedCell {
            replicas: alloc::vec![value; replica_count(n)],
            n,
            reference: value,
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn replicas(&self) -> &[Value] {
        &self.replicas
    }

    /// The last value written, used only to judge verdicts.
    pub fn reference(&self) -> Value {
        self.reference
    }

    pub fn write(&mut self, value: Value) {
        self.replicas.fill(value);
        self.reference = value;
    }

    /// Votes over the replicas. With `refresh`, a majority value is written
    /// back to every replica; without a majority nothing changes.
    pub fn read(&mut self, refresh: bool) -> Verdict<Value> {
        let verdict = adjudicate(&self.replicas).expect("cell has at least one replica");
        if refresh {
            if let Verdict::Majority { value, .. } = verdict {
                self.replicas.fill(value);
            }
        }
        verdict
    }

    /// Corrupts `f` replicas (saturating at the replica count).
    pub fn corrupt<R: Rng + ?Sized>(&mut self, f: u32, style: Corruption, rng: &mut R) {
        let f = (f as usize).min(self.replicas.len());
        self.replicas = inject_faults(&self.replicas, f, style, &[self.reference], rng)
            .expect("fault count clamped to replica count");
    }

    /// Changes the design parameter. New slots take `fill`; shrinking drops
    /// the highest-indexed slots.
    pub fn resize(&mut self, n: u32, fill: Value) {
        self.replicas.resize(replica_count(n), fill);
        self.n = n;
    }

    /// Resizes to `2n + 1` slots, all holding `value`. The reference is kept.
    pub fn rebuild(&mut self, n: u32, value: Value) {
        self.replicas.clear();
        self.replicas.resize(replica_count(n), value);
        self.n = n;
    }

    /// Overwrites the raw replica slots; the length must stay `2n + 1`.
    pub fn set_replicas(&mut self, replicas: Vec<Value>) -> Result<()> {
        if replicas.len() != replica_count(self.n) {
            return Err(invalid("replica count must be 2n+1"));
        }
        self.replicas = replicas;
        Ok(())
    }
}

pub fn replica_count(n: u32) -> usize {
    2 * n as usize + 1
}

/// Position of a deployed replica count relative to the contextual redundancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionReport {
    pub replicas: u32,
    pub cr: u32,
    pub overshoot: u32,
    pub undershoot: u32,
    pub resilient: bool,
}

impl RegionReport {
    /// Neither overshooting nor undershooting.
    pub fn is_optimal(&self) -> bool {
        self.overshoot == 0 && self.undershoot == 0
    }
}

pub fn regions(replicas: u32, cr: u32) -> RegionReport {
    RegionReport {
        replicas,
        cr,
        overshoot: replicas.saturating_sub(cr),
        undershoot: cr.saturating_sub(replicas),
        resilient: replicas >= cr,
    }
}

/// How the vote of a step turned out against the reference value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Majority,
    WrongMajority,
    NoMajority,
}

impl VerdictKind {
    pub fn judge(verdict: &Verdict<Value>, expected: Value) -> Self {
        match verdict {
            Verdict::Majority { value, .. } if *value == expected => VerdictKind::Majority,
            Verdict::Majority { .. } => VerdictKind::WrongMajority,
            Verdict::NoMajority => VerdictKind::NoMajority,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::Majority => "majority",
            VerdictKind::WrongMajority => "wrong_majority",
            VerdictKind::NoMajority => "no_majority",
        }
    }
}

/// Strategy-specific columns of a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepDetail {
    Static,
    Adaptive {
        n: u32,
        dfob: f64,
        decision: AdjustDecision,
    },
    Versions {
        k: u32,
        active_ids: Vec<u32>,
        excluded: Vec<u32>,
        saturated: bool,
    },
    Mape {
        planner_ids: Vec<String>,
        fused_action_count: usize,
        conflicts: usize,
        loop_broken: bool,
        config_changed: bool,
    },
}

/// One simulated step of a redundancy strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub f: u32,
    pub cr: u32,
    pub replicas: u32,
    pub verdict: VerdictKind,
    pub overshoot: u32,
    pub undershoot: u32,
    pub identity_loss: bool,
    /// Replica-steps paid this step, including any resize surcharge.
    pub cost: u64,
    pub detail: StepDetail,
}

impl StepRecord {
    pub fn new(step: usize, f: u32, replicas: u32, verdict: VerdictKind, cost: u64) -> Self {
        let cr = contextual_redundancy(f);
        let region = regions(replicas, cr);
        StepRecord {
            step,
            f,
            cr,
            replicas,
            verdict,
            overshoot: region.overshoot,
            undershoot: region.undershoot,
            identity_loss: verdict != VerdictKind::Majority,
            cost,
            detail: StepDetail::Static,
        }
    }

    /// Whether the strategy changed its structure or parameters this step.
    pub fn adapted(&self) -> bool {
        match &self.detail {
            StepDetail::Static => false,
            StepDetail::Adaptive { decision, .. } => *decision != AdjustDecision::Hold,
            StepDetail::Versions { excluded, .. } => !excluded.is_empty(),
            StepDetail::Mape { config_changed, .. } => *config_changed,
        }
    }
}

/// Parameters of a static redundant cell run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RdsConfig {
    pub n: u32,
    #[serde(default = "default_refresh")]
    pub refresh: bool,
    #[serde(default)]
    pub corruption: Corruption,
}

pub(crate) fn default_refresh() -> bool {
    true
}

/// Drives one static cell through `trace`: corrupt, vote, log.
pub fn run_rds(trace: &FaultTrace, config: &RdsConfig, seed: u64) -> Result<Vec<StepRecord>> {
    if config.n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let mut rng = sim_rng(seed);
    let mut cell = ReplicatedCell::new(config.n, rng.gen());
    let replicas = replica_count(config.n) as u32;
    let records = trace
        .steps
        .iter()
        .enumerate()
        .map(|(step, &f)| {
            cell.corrupt(f, config.corruption, &mut rng);
            let verdict = cell.read(config.refresh);
            let kind = VerdictKind::judge(&verdict, cell.reference());
            StepRecord::new(step, f, replicas, kind, u64::from(replicas))
        })
        .collect();
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn write_then_read() {
        let mut cell = ReplicatedCell::new(2, 0);
        cell.set_replicas(vec![1, 2, 3, 4, 5]).unwrap();
        cell.write(7);
        assert_eq!(cell.replicas(), [7; 5]);
        assert_eq!(
            cell.read(false),
            Verdict::Majority {
                value: 7,
                class_size: 5
            }
        );
    }

    #[test]
    fn refresh_rejuvenates() {
        let mut cell = ReplicatedCell::new(1, 7);
        cell.set_replicas(vec![7, 7, 9]).unwrap();
        assert_eq!(
            cell.read(true),
            Verdict::Majority {
                value: 7,
                class_size: 2
            }
        );
        assert_eq!(cell.replicas(), [7, 7, 7]);
    }

    #[test]
    fn refresh_needs_majority() {
        let mut cell = ReplicatedCell::new(1, 1);
        cell.set_replicas(vec![1, 2, 3]).unwrap();
        assert_eq!(cell.read(true), Verdict::NoMajority);
        assert_eq!(cell.replicas(), [1, 2, 3]);
        assert!(cell.set_replicas(vec![1, 2]).is_err());
    }

    #[test]
    fn every_two_of_five_pattern_is_masked() {
        for a in 0..5 {
            for b in (a + 1)..5 {
                let mut cell = ReplicatedCell::new(2, 7);
                let mut r = vec![7; 5];
                r[a] = 100 + a as i64;
                r[b] = 100 + b as i64;
                cell.set_replicas(r).unwrap();
                assert_eq!(
                    cell.read(true),
                    Verdict::Majority {
                        value: 7,
                        class_size: 3
                    }
                );
            }
        }
    }

    #[test]
    fn region_examples() {
        let r = regions(5, 3);
        assert_eq!((r.overshoot, r.undershoot, r.resilient), (2, 0, true));
        let r = regions(3, 7);
        assert_eq!((r.overshoot, r.undershoot, r.resilient), (0, 4, false));
        let r = regions(5, 5);
        assert!(r.is_optimal() && r.resilient);
    }

    fn config(n: u32, corruption: Corruption) -> RdsConfig {
        RdsConfig {
            n,
            refresh: true,
            corruption,
        }
    }

    #[test]
    fn quiet_trace() {
        let trace = FaultTrace::from_steps(vec![0; 20]);
        let run = run_rds(&trace, &config(3, Corruption::Dissenting), 1).unwrap();
        assert_eq!(run.len(), 20);
        assert!(run.iter().all(|s| s.verdict == VerdictKind::Majority));
        assert!(run.iter().all(|s| s.overshoot == 6 && !s.identity_loss));
    }

    #[test]
    fn faults_up_to_n_are_masked() {
        for n in 1..=4 {
            let trace = FaultTrace::from_steps(vec![n; 200]);
            let run = run_rds(&trace, &config(n, Corruption::Dissenting), 3).unwrap();
            assert!(run.iter().all(|s| !s.identity_loss));
            let total: u64 = run.iter().map(|s| s.cost).sum();
            assert_eq!(total, 200 * (2 * u64::from(n) + 1));
        }
    }

    #[test]
    fn colluders_beyond_n_win() {
        for n in 1..=3 {
            let trace = FaultTrace::from_steps(vec![n + 1; 50]);
            let run = run_rds(&trace, &config(n, Corruption::Colluding), 4).unwrap();
            assert!(run.iter().all(|s| s.identity_loss && s.undershoot > 0));
            assert_eq!(run[0].verdict, VerdictKind::WrongMajority);
        }
    }

    #[test]
    fn zero_n_rejected() {
        let trace = FaultTrace::from_steps(vec![0]);
        assert!(run_rds(&trace, &config(0, Corruption::Dissenting), 0).is_err());
    }

    #[test]
    fn stale_corruption_accumulates_without_refresh() {
        let trace = FaultTrace::from_steps(vec![1; 40]);
        let cfg = RdsConfig {
            n: 2,
            refresh: false,
            corruption: Corruption::Dissenting,
        };
        let run = run_rds(&trace, &cfg, 5).unwrap();
        assert!(run.iter().any(|s| s.identity_loss));
        assert!(run.iter().all(|s| s.undershoot == 0));
    }

    proptest! {
        #[test]
        fn region_algebra(r in 1u32..1000, cr in 1u32..1000) {
            let rep = regions(r, cr);
            prop_assert_eq!(rep.overshoot * rep.undershoot, 0);
            prop_assert_eq!(rep.resilient, rep.undershoot == 0);
            prop_assert_eq!(rep.is_optimal(), r == cr);
        }

        #[test]
        fn dissenting_no_majority_iff_no_strict_majority(n in 1u32..4, f in 0u32..8, seed in any::<u64>()) {
            let trace = FaultTrace::from_steps(vec![f]);
            let run = run_rds(&trace, &config(n, Corruption::Dissenting), seed).unwrap();
            let r = 2 * n + 1;
            let correct = r - f.min(r);
            let expect_none = 2 * correct <= r;
            prop_assert_eq!(run[0].verdict == VerdictKind::NoMajority, expect_none);
        }
    }
}
