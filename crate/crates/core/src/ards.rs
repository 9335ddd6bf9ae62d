//! Adaptively redundant cells.
//!
//! After every successful vote the controller estimates how far the cell is
//! from failing: the overshoot implied by the observed dissent divided by the
//! replica count ([`dfob`]). A low value grows the cell by two replicas; a
//! value that stays at or above the threshold for `hold` consecutive votes
//! shrinks it by two; a failed vote always grows it.
//!
//! The controller never sees the environment's fault count, only the class
//! sizes the vote produced.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envmodel::{contextual_redundancy, Corruption, FaultTrace};
use crate::error::invalid;
use crate::rds::{
    default_refresh, replica_count, ReplicatedCell, StepDetail, StepRecord, VerdictKind,
};
use crate::voting::Verdict;
use crate::{sim_rng, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjustDecision {
    /// `n += 1`, two more replicas.
    Grow,
    /// `n -= 1`, two fewer replicas.
    Shrink,
    Hold,
}

impl AdjustDecision {
    pub fn as_str(self) -> &'static str {
        match self {
            AdjustDecision::Grow => "grow",
            AdjustDecision::Shrink => "shrink",
            AdjustDecision::Hold => "hold",
        }
    }
}

/// Static settings of a controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_hold")]
    pub hold: u32,
    pub n0: u32,
    #[serde(default = "default_n_min")]
    pub n_min: u32,
    pub n_max: u32,
}

fn default_theta() -> f64 {
    0.25
}

fn default_hold() -> u32 {
    4
}

fn default_n_min() -> u32 {
    1
}

impl ControllerParams {
    pub fn new(theta: f64, hold: u32, n0: u32, n_min: u32, n_max: u32) -> Self {
        ControllerParams {
            theta,
            hold,
            n0,
            n_min,
            n_max,
        }
    }
}

/// Distance-to-failure controller for the design parameter `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfobController {
    pub theta: f64,
    pub hold: u32,
    pub n_min: u32,
    pub n_max: u32,
    n: u32,
    above_count: u32,
    last_overshoot: u32,
    last_replicas: u32,
    last_dfob: f64,
    /// Decision before clamping to `[n_min, n_max]`.
    last_request: AdjustDecision,
}

impl DfobController {
    pub fn new(params: ControllerParams) -> Result<Self> {
        let ControllerParams {
            theta,
            hold,
            n0,
            n_min,
            n_max,
        } = params;
        if !(theta > 0.0 && theta < 1.0) {
            return Err(invalid("theta must be in (0, 1)"));
        }
        if hold == 0 {
            return Err(invalid("hold must be at least 1"));
        }
        if n_min > n_max || !(n_min..=n_max).contains(&n0) {
            return Err(invalid("need n_min <= n0 <= n_max"));
        }
        Ok(DfobController {
            theta,
            hold,
            n_min,
            n_max,
            n: n0,
            above_count: 0,
            last_overshoot: 0,
            last_replicas: replica_count(n0) as u32,
            last_dfob: 0.0,
            last_request: AdjustDecision::Hold,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn replicas(&self) -> u32 {
        replica_count(self.n) as u32
    }

    pub fn above_count(&self) -> u32 {
        self.above_count
    }

    pub fn last_overshoot(&self) -> u32 {
        self.last_overshoot
    }

    pub fn last_replicas(&self) -> u32 {
        self.last_replicas
    }

    pub fn last_dfob(&self) -> f64 {
        self.last_dfob
    }

    pub fn last_request(&self) -> AdjustDecision {
        self.last_request
    }

    /// Lowers the ceiling, pulling `n` down if needed.
    pub fn cap_n_max(&mut self, ceiling: u32) {
        self.n_max = self.n_max.min(ceiling).max(self.n_min);
        self.n = self.n.min(self.n_max);
    }

    /// Feeds one vote outcome. `dissent` is the number of replicas outside
    /// the majority class, or `None` when the vote failed.
    pub fn observe(&mut self, dissent: Option<u32>) -> AdjustDecision {
        let replicas = self.replicas();
        let request = match dissent {
            None => {
                self.above_count = 0;
                self.last_dfob = 0.0;
                self.last_overshoot = 0;
                AdjustDecision::Grow
            }
            Some(dissent) => {
                let estimated_cr = contextual_redundancy(dissent);
                let overshoot = replicas.saturating_sub(estimated_cr);
                let d = dfob(overshoot, replicas);
                self.last_overshoot = overshoot;
                self.last_dfob = d;
                if d < self.theta {
                    self.above_count = 0;
                    AdjustDecision::Grow
                } else {
                    self.above_count += 1;
                    if self.above_count >= self.hold {
                        self.above_count = 0;
                        AdjustDecision::Shrink
                    } else {
                        AdjustDecision::Hold
                    }
                }
            }
        };
        self.last_replicas = replicas;
        self.last_request = request;
        match request {
            AdjustDecision::Grow if self.n < self.n_max => {
                self.n += 1;
                AdjustDecision::Grow
            }
            AdjustDecision::Shrink if self.n > self.n_min => {
                self.n -= 1;
                AdjustDecision::Shrink
            }
            _ => AdjustDecision::Hold,
        }
    }
}

/// Functional form of [`DfobController::observe`].
pub fn controller_step(
    controller: &DfobController,
    observed_dissent: u32,
    vote_failed: bool,
) -> (AdjustDecision, DfobController) {
    let mut next = controller.clone();
    let decision = next.observe((!vote_failed).then_some(observed_dissent));
    (decision, next)
}

/// Largest `f64` strictly below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Previous overshoot over previous replica count, clamped to `[0, 1)`.
pub fn dfob(overshoot_prev: u32, replicas_prev: u32) -> f64 {
    let replicas = replicas_prev.max(1);
    (f64::from(overshoot_prev) / f64::from(replicas)).clamp(0.0, BELOW_ONE)
}

/// Settings of an adaptive cell run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArdsConfig {
    #[serde(flatten)]
    pub controller: ControllerParams,
    #[serde(default = "default_refresh")]
    pub refresh: bool,
    #[serde(default)]
    pub corruption: Corruption,
    /// Surcharge per resize, in multiples of the replica count at that step.
    #[serde(default = "default_resize_cost")]
    pub resize_cost: u32,
}

fn default_resize_cost() -> u32 {
    1
}

impl ArdsConfig {
    pub fn new(controller: ControllerParams) -> Self {
        ArdsConfig {
            controller,
            refresh: true,
            corruption: Corruption::Dissenting,
            resize_cost: 1,
        }
    }
}

/// Drives one adaptive cell through `trace`.
///
/// Each step: corrupt `f(t)` replicas, vote, feed the controller, then
/// resize. Grown slots are filled with the last majority value seen.
pub fn run_ards(trace: &FaultTrace, config: &ArdsConfig, seed: u64) -> Result<Vec<StepRecord>> {
    let mut controller = DfobController::new(config.controller)?;
    let mut rng = sim_rng(seed);
    let mut cell = ReplicatedCell::new(controller.n(), rng.gen());
    let mut last_good = cell.reference();
    let mut records = Vec::with_capacity(trace.len());
    for (step, &f) in trace.steps.iter().enumerate() {
        let n = controller.n();
        let replicas = controller.replicas();
        cell.corrupt(f, config.corruption, &mut rng);
        let verdict = cell.read(config.refresh);
        let dissent = match verdict {
            Verdict::Majority { value, class_size } => {
                last_good = value;
                Some(replicas - class_size as u32)
            }
            Verdict::NoMajority => None,
        };
        let decision = controller.observe(dissent);
        let surcharge = if decision == AdjustDecision::Hold {
            0
        } else {
            u64::from(config.resize_cost) * u64::from(replicas)
        };
        let kind = VerdictKind::judge(&verdict, cell.reference());
        let mut record = StepRecord::new(step, f, replicas, kind, u64::from(replicas) + surcharge);
        record.detail = StepDetail::Adaptive {
            n,
            dfob: controller.last_dfob(),
            decision,
        };
        records.push(record);
        if decision != AdjustDecision::Hold {
            cell.rebuild(controller.n(), last_good);
        }
    }
    Ok(records)
}
