//! Fault-load generators and replica corruption.
//!
//! A [`FaultTrace`] records, for every step, how many replicas the
//! environment affects at once. The contextual redundancy of that step is
//! what a voter would need to mask it: one replica with no faults, `2f + 1`
//! with `f` of them affected.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::{sim_rng, Result, Value};

/// Fault generator. Probabilities are per step and must lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum EnvModel {
    /// The same fault count at every step.
    Constant { f: u32 },
    /// Random walk starting at 0 that moves by at most one per step and
    /// stays inside `0..=f_max`.
    SmoothWalk { p_up: f64, p_down: f64, f_max: u32 },
    /// `f_base` most of the time; a burst starts with probability `p_burst`
    /// and holds `burst_height` for `burst_len` steps.
    Burst {
        p_burst: f64,
        burst_height: u32,
        burst_len: u32,
        f_base: u32,
    },
}

impl EnvModel {
    pub fn id(&self) -> &'static str {
        match self {
            EnvModel::Constant { .. } => "constant",
            EnvModel::SmoothWalk { .. } => "smooth_walk",
            EnvModel::Burst { .. } => "burst",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be in [0, 1], got {p}")))
            }
        };
        match *self {
            EnvModel::Constant { .. } => Ok(()),
            EnvModel::SmoothWalk { p_up, p_down, .. } => {
                check("p_up", p_up)?;
                check("p_down", p_down)
            }
            EnvModel::Burst { p_burst, .. } => check("p_burst", p_burst),
        }
    }
}

/// Per-step fault counts produced by one generator run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultTrace {
    pub steps: Vec<u32>,
    pub seed: u64,
    pub model_id: String,
}

impl FaultTrace {
    /// Wraps an explicit fault sequence, e.g. a hand-written fixture.
    pub fn from_steps(steps: Vec<u32>) -> Self {
        FaultTrace {
            steps,
            seed: 0,
            model_id: String::from("explicit"),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `(step, f, cr)` rows.
    pub fn rows(&self) -> impl Iterator<Item = (usize, u32, u32)> + '_ {
        self.steps
            .iter()
            .enumerate()
            .map(|(t, &f)| (t, f, contextual_redundancy(f)))
    }
}

/// Generates `horizon` fault counts from `model`. Pure in its arguments.
pub fn gen_trace(model: &EnvModel, horizon: usize, seed: u64) -> Result<FaultTrace> {
    if horizon == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    model.validate()?;
    let mut rng = sim_rng(seed);
    let mut steps = Vec::with_capacity(horizon);
    match *model {
        EnvModel::Constant { f } => steps.resize(horizon, f),
        EnvModel::SmoothWalk {
            p_up,
            p_down,
            f_max,
        } => {
            let mut f = 0u32;
            for _ in 0..horizon {
                steps.push(f);
                let draw: f64 = rng.gen();
                if draw < p_up {
                    if f < f_max {
                        f += 1;
                    }
                } else if draw < p_up + p_down && f > 0 {
                    f -= 1;
                }
            }
        }
        EnvModel::Burst {
            p_burst,
            burst_height,
            burst_len,
            f_base,
        } => {
            let mut remaining = 0u32;
            for _ in 0..horizon {
                // Draw every step so burst timing does not depend on burst_len.
                let starts = rng.gen_bool(p_burst);
                if remaining == 0 && starts {
                    remaining = burst_len;
                }
                if remaining > 0 {
                    steps.push(burst_height);
                    remaining -= 1;
                } else {
                    steps.push(f_base);
                }
            }
        }
    }
    Ok(FaultTrace {
        steps,
        seed,
        model_id: String::from(model.id()),
    })
}

/// Minimum replica count that masks `f` simultaneously affected replicas.
pub fn contextual_redundancy(f: u32) -> u32 {
    if f == 0 {
        1
    } else {
        2 * f + 1
    }
}

/// How corrupted replicas relate to one another.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    /// Every corrupted replica holds its own fresh wrong value.
    #[default]
    Dissenting,
    /// All corrupted replicas agree on one wrong value.
    Colluding,
}

/// Returns a copy of `values` in which exactly `f` distinct positions hold
/// a value different from their input. Wrong values never coincide with any
/// value already present in `values` or with anything in `avoid`.
pub fn inject_faults<R: Rng + ?Sized>(
    values: &[Value],
    f: usize,
    style: Corruption,
    avoid: &[Value],
    rng: &mut R,
) -> Result<Vec<Value>> {
    if f > values.len() {
        return Err(invalid(format!(
            "cannot corrupt {f} of {} replicas",
            values.len()
        )));
    }
    let mut out = values.to_vec();
    if f == 0 {
        return Ok(out);
    }
    let mut taken: BTreeSet<Value> = values.iter().chain(avoid).copied().collect();
    let positions = rand::seq::index::sample(rng, values.len(), f);
    match style {
        Corruption::Dissenting => {
            for pos in positions.iter() {
                out[pos] = fresh_value(rng, &mut taken);
            }
        }
        Corruption::Colluding => {
            let wrong = fresh_value(rng, &mut taken);
            for pos in positions.iter() {
                out[pos] = wrong;
            }
        }
    }
    Ok(out)
}

/// Draws a value not in `taken` and records it there.
pub(crate) fn fresh_value<R: Rng + ?Sized>(rng: &mut R, taken: &mut BTreeSet<Value>) -> Value {
    loop {
        let v: Value = rng.gen();
        if taken.insert(v) {
            return v;
        }
    }
}
