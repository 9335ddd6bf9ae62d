//! Adaptive N-version programming.
//!
//! A pool of versions is ranked by comparing each active version's output
//! with the majority verdict: agreement earns `reward`, disagreement costs
//! `penalty`. The `k` best-ranked versions form the active set, and `k`
//! itself is driven by the same distance-to-failure controller used for
//! adaptive cells (`k = 2n + 1`).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ards::{AdjustDecision, ControllerParams, DfobController};
use crate::envmodel::{fresh_value, Corruption};
use crate::error::invalid;
use crate::rds::{StepDetail, StepRecord, VerdictKind};
use crate::voting::{adjudicate, Verdict};
use crate::{sim_rng, Result, Value};

/// Probability that a version emits a wrong value, possibly changing over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FaultProcess {
    Constant(f64),
    /// `(from_step, p_wrong)` pairs sorted by step; before the first entry
    /// the version never fails.
    Steps(Vec<(usize, f64)>),
}

impl FaultProcess {
    pub fn p_wrong(&self, step: usize) -> f64 {
        match self {
            FaultProcess::Constant(p) => *p,
            FaultProcess::Steps(changes) => changes
                .iter()
                .take_while(|(from, _)| *from <= step)
                .last()
                .map_or(0.0, |&(_, p)| p),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        let valid = match self {
            FaultProcess::Constant(p) => ok(*p),
            FaultProcess::Steps(changes) => {
                changes.iter().all(|&(_, p)| ok(p)) && changes.windows(2).all(|w| w[0].0 < w[1].0)
            }
        };
        if valid {
            Ok(())
        } else {
            Err(invalid(
                "fault process probabilities must be in [0, 1] with increasing steps",
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Version {
    pub id: u32,
    #[serde(default)]
    pub score: f64,
    pub fault: FaultProcess,
}

impl Version {
    pub fn new(id: u32, p_wrong: f64) -> Self {
        Version {
            id,
            score: 0.0,
            fault: FaultProcess::Constant(p_wrong),
        }
    }
}

/// Ranked versions plus the currently active top-`k`.
#[derive(Debug, Clone, PartialEq)]
pub struct VersionPool {
    versions: Vec<Version>,
    k: u32,
    pub reward: f64,
    pub penalty: f64,
    active: Vec<u32>,
}

impl VersionPool {
    pub fn new(versions: Vec<Version>, k: u32, reward: f64, penalty: f64) -> Result<Self> {
        let ids: BTreeSet<u32> = versions.iter().map(|v| v.id).collect();
        if ids.len() != versions.len() {
            return Err(invalid("version ids must be unique"));
        }
        if !(reward > 0.0 && penalty > 0.0) {
            return Err(invalid("reward and penalty must be positive"));
        }
        for v in &versions {
            v.fault.validate()?;
        }
        let mut pool = VersionPool {
            versions,
            k: 0,
            reward,
            penalty,
            active: Vec::new(),
        };
        pool.set_k(k)?;
        Ok(pool)
    }

    pub fn versions(&self) -> &[Version] {
        &self.versions
    }

    pub fn version(&self, id: u32) -> Option<&Version> {
        self.versions.iter().find(|v| v.id == id)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Active ids in rank order.
    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn is_active(&self, id: u32) -> bool {
        self.active.contains(&id)
    }

    /// Changes the active-set size and reselects.
    pub fn set_k(&mut self, k: u32) -> Result<()> {
        if k.is_multiple_of(2) {
            return Err(invalid(format!("active count must be odd, got {k}")));
        }
        self.active = select_top(&self.versions, k)?;
        self.k = k;
        Ok(())
    }

    /// Recomputes the active set from the current scores.
    pub fn reselect(&mut self) {
        self.active = select_top(&self.versions, self.k).expect("k checked against pool size");
    }

    /// Largest odd active count the pool can supply.
    pub fn max_k(&self) -> u32 {
        let size = self.versions.len() as u32;
        if size.is_multiple_of(2) {
            size - 1
        } else {
            size
        }
    }

    pub fn total_score(&self) -> f64 {
        self.versions.iter().map(|v| v.score).sum()
    }
}

/// Ids of the `k` best versions under (score desc, id asc).
pub fn select_top(versions: &[Version], k: u32) -> Result<Vec<u32>> {
    if (k as usize) > versions.len() {
        return Err(invalid(format!(
            "pool of {} cannot supply {k} active versions",
            versions.len()
        )));
    }
    let mut ranked: Vec<&Version> = versions.iter().collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
    Ok(ranked.iter().take(k as usize).map(|v| v.id).collect())
}

/// Scores the active versions against the majority. No majority, no change.
/// Does not reselect the active set.
pub fn rank_update(
    pool: &mut VersionPool,
    outputs: &BTreeMap<u32, Value>,
    verdict: &Verdict<Value>,
) -> Result<()> {
    if let Some(id) = outputs.keys().find(|id| !pool.is_active(**id)) {
        return Err(invalid(format!("output from inactive version {id}")));
    }
    let Verdict::Majority { value, .. } = verdict else {
        return Ok(());
    };
    let (reward, penalty) = (pool.reward, pool.penalty);
    for version in pool.versions.iter_mut() {
        if let Some(out) = outputs.get(&version.id) {
            if out == value {
                version.score += reward;
            } else {
                version.score -= penalty;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnvpConfig {
    pub versions: Vec<Version>,
    #[serde(default = "default_reward")]
    pub reward: f64,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    /// Controller for `n`, with `k = 2n + 1`.
    pub controller: ControllerParams,
    #[serde(default)]
    pub corruption: Corruption,
}

fn default_reward() -> f64 {
    1.0
}

fn default_penalty() -> f64 {
    2.0
}

/// Simulates `horizon` voting rounds over the pool.
///
/// `f` in the records is the number of active versions that erred and
/// `replicas` is `k`.
pub fn run_anvp(config: &AnvpConfig, horizon: usize, seed: u64) -> Result<Vec<StepRecord>> {
    let mut controller = DfobController::new(config.controller)?;
    let mut pool = VersionPool::new(
        config.versions.clone(),
        2 * controller.n() + 1,
        config.reward,
        config.penalty,
    )?;
    // the pool bounds k; growth past it is reported as saturation
    controller.cap_n_max((pool.max_k() - 1) / 2);
    let mut rng = sim_rng(seed);
    let mut records = Vec::with_capacity(horizon);
    for step in 0..horizon {
        let truth: Value = rng.gen();
        let mut taken = BTreeSet::from([truth]);
        let shared_wrong = fresh_value(&mut rng, &mut taken);
        let mut outputs = BTreeMap::new();
        let mut wrong = 0u32;
        for &id in pool.active() {
            let p = pool
                .version(id)
                .expect("active id in pool")
                .fault
                .p_wrong(step);
            let out = if rng.gen_bool(p) {
                wrong += 1;
                match config.corruption {
                    Corruption::Dissenting => fresh_value(&mut rng, &mut taken),
                    Corruption::Colluding => shared_wrong,
                }
            } else {
                truth
            };
            outputs.insert(id, out);
        }
        let ballot: Vec<Value> = pool.active().iter().map(|id| outputs[id]).collect();
        let verdict = adjudicate(&ballot)?;
        rank_update(&mut pool, &outputs, &verdict)?;

        let k = pool.k();
        let dissent = verdict.is_majority().then(|| match verdict {
            Verdict::Majority { class_size, .. } => k - class_size as u32,
            Verdict::NoMajority => unreachable!(),
        });
        let decision = controller.observe(dissent);
        let saturated = decision == AdjustDecision::Hold
            && controller.last_request() == AdjustDecision::Grow
            && controller.replicas() == pool.max_k();
        let before: Vec<u32> = pool.active().to_vec();
        pool.set_k(controller.replicas())?;
        let excluded: Vec<u32> = before
            .iter()
            .copied()
            .filter(|id| !pool.is_active(*id))
            .collect();

        let kind = VerdictKind::judge(&verdict, truth);
        let mut record = StepRecord::new(step, wrong, k, kind, u64::from(k));
        let mut active_ids = before;
        active_ids.sort_unstable();
        record.detail = StepDetail::Versions {
            k,
            active_ids,
            excluded,
            saturated,
        };
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn scored(scores: &[f64]) -> Vec<Version> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| Version {
                id: i as u32,
                score: s,
                fault: FaultProcess::Constant(0.0),
            })
            .collect()
    }

    #[test]
    fn top_by_score_then_id() {
        assert_eq!(
            select_top(&scored(&[9.0, 7.0, 7.0, 1.0]), 3).unwrap(),
            [0, 1, 2]
        );
        assert_eq!(
            select_top(&scored(&[1.0, 7.0, 9.0, 7.0]), 3).unwrap(),
            [2, 1, 3]
        );
        assert_eq!(select_top(&scored(&[0.0; 6]), 3).unwrap(), [0, 1, 2]);
        assert!(select_top(&scored(&[0.0; 2]), 3).is_err());
    }

    #[test]
    fn scoring_rules() {
        let mut pool = VersionPool::new(scored(&[0.0; 5]), 3, 1.0, 2.0).unwrap();
        let outputs = BTreeMap::from([(0, 4), (1, 4), (2, 9)]);
        let verdict = Verdict::Majority {
            value: 4,
            class_size: 2,
        };
        rank_update(&mut pool, &outputs, &verdict).unwrap();
        let scores: Vec<f64> = pool.versions().iter().map(|v| v.score).collect();
        assert_eq!(scores, [1.0, 1.0, -2.0, 0.0, 0.0]);

        rank_update(&mut pool, &outputs, &Verdict::NoMajority).unwrap();
        assert_eq!(pool.total_score(), 0.0);

        let stray = BTreeMap::from([(4, 4)]);
        assert!(rank_update(&mut pool, &stray, &verdict).is_err());
    }

    #[test]
    fn even_or_oversized_k_rejected() {
        assert!(VersionPool::new(scored(&[0.0; 5]), 2, 1.0, 2.0).is_err());
        assert!(VersionPool::new(scored(&[0.0; 5]), 7, 1.0, 2.0).is_err());
        assert!(VersionPool::new(scored(&[0.0; 5]), 3, 0.0, 2.0).is_err());
    }

    #[test]
    fn step_process() {
        let p = FaultProcess::Steps(vec![(10, 0.5), (20, 0.1)]);
        assert_eq!(p.p_wrong(0), 0.0);
        assert_eq!(p.p_wrong(10), 0.5);
        assert_eq!(p.p_wrong(25), 0.1);
    }

    fn config(versions: Vec<Version>, n0: u32) -> AnvpConfig {
        AnvpConfig {
            versions,
            reward: 1.0,
            penalty: 2.0,
            controller: ControllerParams::new(0.25, 4, n0, 1, 4),
            corruption: Corruption::Dissenting,
        }
    }

    #[test]
    fn perfect_versions() {
        let versions = (0..5).map(|i| Version::new(i, 0.0)).collect();
        let run = run_anvp(&config(versions, 1), 40, 3).unwrap();
        assert!(run.iter().all(|r| !r.identity_loss));
        // calm votes shrink k to the floor and it stays there
        assert_eq!(run.last().unwrap().replicas, 3);
        for r in &run {
            let StepDetail::Versions { k, active_ids, .. } = &r.detail else {
                unreachable!()
            };
            assert_eq!(*k as usize, active_ids.len());
            assert_eq!(k % 2, 1);
            assert_eq!(&active_ids[..3], &[0, 1, 2]);
        }
    }

    #[test]
    fn single_version_degenerate_vote() {
        let cfg = AnvpConfig {
            versions: vec![Version::new(0, 0.3)],
            reward: 1.0,
            penalty: 2.0,
            controller: ControllerParams::new(0.25, 4, 0, 0, 0),
            corruption: Corruption::Dissenting,
        };
        let run = run_anvp(&cfg, 2000, 1).unwrap();
        assert!(run.iter().all(|r| r.replicas == 1));
        assert!(run.iter().all(|r| r.verdict != VerdictKind::NoMajority));
        let losses = run.iter().filter(|r| r.identity_loss).count() as f64 / 2000.0;
        assert!((losses - 0.3).abs() < 0.05, "{losses}");
    }

    proptest! {
        #[test]
        fn score_delta_is_exact(outs in prop::collection::vec(0i64..3, 5), reward in 0.5f64..3.0, penalty in 0.5f64..3.0) {
            let mut pool = VersionPool::new(scored(&[0.0; 7]), 5, reward, penalty).unwrap();
            let outputs: BTreeMap<u32, Value> = pool.active().iter().copied().zip(outs.iter().copied()).collect();
            let verdict = adjudicate(&outs).unwrap();
            rank_update(&mut pool, &outputs, &verdict).unwrap();
            let expected = match verdict {
                Verdict::Majority { value, .. } => {
                    let agree = outs.iter().filter(|&&o| o == value).count() as f64;
                    agree * reward - (5.0 - agree) * penalty
                }
                Verdict::NoMajority => 0.0,
            };
            prop_assert!((pool.total_score() - expected).abs() < 1e-9);
        }

        #[test]
        fn permuting_input_keeps_selection(scores in prop::collection::vec(-5i32..5, 3..9), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let versions: Vec<Version> = scored(&scores.iter().map(|&s| f64::from(s)).collect::<Vec<_>>());
            let mut shuffled = versions.clone();
            shuffled.shuffle(&mut sim_rng(seed));
            prop_assert_eq!(select_top(&versions, 3).unwrap(), select_top(&shuffled, 3).unwrap());
        }
    }
}
