//! Behaviour and dynamicity coordinates of resilience sub-systems.
//!
//! Each of perception, awareness and planning is placed on two ordinal axes:
//! a behaviour class (1 passive … 9 complex collective) and a dynamicity
//! class (I static, II selectable at run time, III mergeable/collective).
//! A system's coordinates form a [`ResilienceContract`]; an environment
//! states minimums as an [`EnvironmentPolicy`].
//!
//! Interval entries such as `5–7` are matched on their lower bound: the
//! contract promises only what the sub-system always provides.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::rds::StepRecord;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum BehaviourClass {
    Passive = 1,
    ActiveNonPurposeful = 2,
    PurposefulNonTeleological = 3,
    TeleologicalNonPredictive = 4,
    FirstOrderPredictive = 5,
    SecondOrderPredictive = 6,
    HigherOrderPredictive = 7,
    CollectiveResilient = 8,
    ComplexCollectiveResilient = 9,
}

impl BehaviourClass {
    pub const ALL: [BehaviourClass; 9] = [
        BehaviourClass::Passive,
        BehaviourClass::ActiveNonPurposeful,
        BehaviourClass::PurposefulNonTeleological,
        BehaviourClass::TeleologicalNonPredictive,
        BehaviourClass::FirstOrderPredictive,
        BehaviourClass::SecondOrderPredictive,
        BehaviourClass::HigherOrderPredictive,
        BehaviourClass::CollectiveResilient,
        BehaviourClass::ComplexCollectiveResilient,
    ];

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn label(self) -> &'static str {
        match self {
            BehaviourClass::Passive => "passive / none",
            BehaviourClass::ActiveNonPurposeful => "active, non-purposeful",
            BehaviourClass::PurposefulNonTeleological => "purposeful, non-teleological",
            BehaviourClass::TeleologicalNonPredictive => "teleological, non-predictive",
            BehaviourClass::FirstOrderPredictive => "first-order predictive",
            BehaviourClass::SecondOrderPredictive => "second-order predictive",
            BehaviourClass::HigherOrderPredictive => "n-order predictive, n > 2",
            BehaviourClass::CollectiveResilient => "collective resilient",
            BehaviourClass::ComplexCollectiveResilient => "complex collective resilient",
        }
    }

    /// The next class up, if any.
    pub fn next(self) -> Option<Self> {
        Self::try_from(self.ordinal() + 1).ok()
    }
}

impl TryFrom<u8> for BehaviourClass {
    type Error = String;

    fn try_from(value: u8) -> core::result::Result<Self, String> {
        match value {
            1..=9 => Ok(Self::ALL[usize::from(value) - 1]),
            _ => Err(format!("behaviour class must be 1..=9, got {value}")),
        }
    }
}

impl From<BehaviourClass> for u8 {
    fn from(b: BehaviourClass) -> u8 {
        b.ordinal()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dynamicity {
    /// Selected at design time.
    I,
    /// Selected or unselected at run time.
    II,
    /// Product of a collective strategy.
    III,
}

impl Dynamicity {
    pub fn label(self) -> &'static str {
        match self {
            Dynamicity::I => "static",
            Dynamicity::II => "dynamic or selectable",
            Dynamicity::III => "mergeable or collective",
        }
    }
}

impl fmt::Display for Dynamicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dynamicity::I => "I",
            Dynamicity::II => "II",
            Dynamicity::III => "III",
        })
    }
}

/// A behaviour interval plus a dynamicity class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCoordinate", into = "RawCoordinate")]
pub struct Coordinate {
    lo: BehaviourClass,
    hi: BehaviourClass,
    pub dynamicity: Dynamicity,
}

#[derive(Serialize, Deserialize)]
struct RawCoordinate {
    behaviour: [BehaviourClass; 2],
    dynamicity: Dynamicity,
}

impl TryFrom<RawCoordinate> for Coordinate {
    type Error = String;

    fn try_from(raw: RawCoordinate) -> core::result::Result<Self, String> {
        Coordinate::range(raw.behaviour[0], raw.behaviour[1], raw.dynamicity)
            .map_err(|e| format!("{e}"))
    }
}

impl From<Coordinate> for RawCoordinate {
    fn from(c: Coordinate) -> Self {
        RawCoordinate {
            behaviour: [c.lo, c.hi],
            dynamicity: c.dynamicity,
        }
    }
}

impl Coordinate {
    pub fn point(behaviour: BehaviourClass, dynamicity: Dynamicity) -> Self {
        Coordinate {
            lo: behaviour,
            hi: behaviour,
            dynamicity,
        }
    }

    pub fn range(lo: BehaviourClass, hi: BehaviourClass, dynamicity: Dynamicity) -> Result<Self> {
        if lo > hi {
            return Err(invalid(format!(
                "behaviour interval {lo:?}..{hi:?} is reversed"
            )));
        }
        Ok(Coordinate { lo, hi, dynamicity })
    }

    pub fn lo(&self) -> BehaviourClass {
        self.lo
    }

    pub fn hi(&self) -> BehaviourClass {
        self.hi
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi {
            write!(f, "({},{})", self.lo.ordinal(), self.dynamicity)
        } else {
            write!(
                f,
                "({}–{},{})",
                self.lo.ordinal(),
                self.hi.ordinal(),
                self.dynamicity
            )
        }
    }
}

/// Planning is either one coordinate or separate local and central ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlanningFacet {
    Single(Coordinate),
    Split {
        local: Coordinate,
        central: Coordinate,
    },
}

impl PlanningFacet {
    /// The coordinate a policy aimed at `target` is compared with. For
    /// [`PlanningTarget::Any`] on a split facet, the componentwise maximum.
    pub fn effective(&self, target: PlanningTarget) -> (BehaviourClass, Dynamicity) {
        match (*self, target) {
            (PlanningFacet::Single(c), _) => (c.lo, c.dynamicity),
            (PlanningFacet::Split { local, .. }, PlanningTarget::Local) => {
                (local.lo, local.dynamicity)
            }
            (PlanningFacet::Split { central, .. }, PlanningTarget::Central) => {
                (central.lo, central.dynamicity)
            }
            (PlanningFacet::Split { local, central }, PlanningTarget::Any) => (
                local.lo.max(central.lo),
                local.dynamicity.max(central.dynamicity),
            ),
        }
    }
}

impl fmt::Display for PlanningFacet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanningFacet::Single(c) => write!(f, "{c}"),
            PlanningFacet::Split { local, central } => write!(f, "L: {local}, C: {central}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResilienceContract {
    pub perception: Coordinate,
    pub awareness: Coordinate,
    pub planning: PlanningFacet,
}

/// Minimum behaviour and dynamicity for one facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub behaviour: BehaviourClass,
    pub dynamicity: Dynamicity,
}

impl Default for Requirement {
    fn default() -> Self {
        Requirement {
            behaviour: BehaviourClass::Passive,
            dynamicity: Dynamicity::I,
        }
    }
}

impl Requirement {
    pub fn new(behaviour: BehaviourClass, dynamicity: Dynamicity) -> Self {
        Requirement {
            behaviour,
            dynamicity,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanningTarget {
    Local,
    Central,
    #[default]
    Any,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentPolicy {
    #[serde(default)]
    pub perception: Requirement,
    #[serde(default)]
    pub awareness: Requirement,
    #[serde(default)]
    pub planning: Requirement,
    #[serde(default)]
    pub planning_target: PlanningTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Facet {
    Perception,
    Awareness,
    Planning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Behaviour,
    Dynamicity,
}

/// One unmet minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Shortfall {
    pub facet: Facet,
    pub axis: Axis,
}

impl fmt::Display for Shortfall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let facet = match self.facet {
            Facet::Perception => "perception",
            Facet::Awareness => "awareness",
            Facet::Planning => "planning",
        };
        let axis = match self.axis {
            Axis::Behaviour => "behaviour",
            Axis::Dynamicity => "dynamicity",
        };
        write!(f, "{facet}.{axis}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", content = "shortfalls", rename_all = "snake_case")]
pub enum MatchResult {
    Match,
    Mismatch(Vec<Shortfall>),
}

impl MatchResult {
    pub fn is_match(&self) -> bool {
        matches!(self, MatchResult::Match)
    }

    pub fn failing_facets(&self) -> Vec<Facet> {
        let mut facets: Vec<Facet> = match self {
            MatchResult::Match => Vec::new(),
            MatchResult::Mismatch(s) => s.iter().map(|s| s.facet).collect(),
        };
        facets.dedup();
        facets
    }
}

/// Compares each facet's guaranteed (lower-bound) behaviour and its
/// dynamicity against the policy's minimums.
pub fn match_contract(contract: &ResilienceContract, policy: &EnvironmentPolicy) -> MatchResult {
    let facets = [
        (
            Facet::Perception,
            (contract.perception.lo, contract.perception.dynamicity),
            policy.perception,
        ),
        (
            Facet::Awareness,
            (contract.awareness.lo, contract.awareness.dynamicity),
            policy.awareness,
        ),
        (
            Facet::Planning,
            contract.planning.effective(policy.planning_target),
            policy.planning,
        ),
    ];
    let mut shortfalls = Vec::new();
    for (facet, (behaviour, dynamicity), need) in facets {
        if behaviour < need.behaviour {
            shortfalls.push(Shortfall {
                facet,
                axis: Axis::Behaviour,
            });
        }
        if dynamicity < need.dynamicity {
            shortfalls.push(Shortfall {
                facet,
                axis: Axis::Dynamicity,
            });
        }
    }
    if shortfalls.is_empty() {
        MatchResult::Match
    } else {
        MatchResult::Mismatch(shortfalls)
    }
}

/// Row order of the built-in contracts.
pub const SYSTEMS: [&str; 9] = [
    "RDS",
    "A-RDS",
    "A-NVP",
    "MAPE",
    "ACCADA",
    "Transformer",
    "SH+telecare",
    "MAC",
    "FSO",
];

/// Coordinates of the nine surveyed systems, keyed by name.
pub fn builtin_contracts() -> BTreeMap<String, ResilienceContract> {
    use BehaviourClass as B;
    use Dynamicity::{I, II, III};
    let p = Coordinate::point;
    let r = |lo, hi, d| Coordinate::range(lo, hi, d).expect("ordered interval");
    let single = PlanningFacet::Single;
    let rows = [
        (
            p(B::Passive, I),
            p(B::PurposefulNonTeleological, I),
            single(p(B::PurposefulNonTeleological, I)),
        ),
        (
            p(B::Passive, I),
            p(B::FirstOrderPredictive, I),
            single(p(B::PurposefulNonTeleological, I)),
        ),
        (
            p(B::Passive, I),
            p(B::SecondOrderPredictive, I),
            single(p(B::PurposefulNonTeleological, II)),
        ),
        (
            p(B::PurposefulNonTeleological, I),
            r(B::FirstOrderPredictive, B::HigherOrderPredictive, I),
            single(r(
                B::PurposefulNonTeleological,
                B::TeleologicalNonPredictive,
                I,
            )),
        ),
        (
            p(B::PurposefulNonTeleological, II),
            r(B::FirstOrderPredictive, B::HigherOrderPredictive, II),
            single(p(B::TeleologicalNonPredictive, II)),
        ),
        (
            p(B::PurposefulNonTeleological, II),
            r(B::FirstOrderPredictive, B::HigherOrderPredictive, II),
            single(p(B::TeleologicalNonPredictive, III)),
        ),
        (
            p(B::TeleologicalNonPredictive, I),
            r(B::FirstOrderPredictive, B::HigherOrderPredictive, I),
            single(p(B::PurposefulNonTeleological, I)),
        ),
        (
            p(B::TeleologicalNonPredictive, III),
            r(B::FirstOrderPredictive, B::HigherOrderPredictive, I),
            PlanningFacet::Split {
                local: r(
                    B::PurposefulNonTeleological,
                    B::ComplexCollectiveResilient,
                    III,
                ),
                central: p(B::PurposefulNonTeleological, I),
            },
        ),
        (
            r(B::CollectiveResilient, B::ComplexCollectiveResilient, III),
            r(B::CollectiveResilient, B::ComplexCollectiveResilient, III),
            single(p(B::TeleologicalNonPredictive, I)),
        ),
    ];
    SYSTEMS
        .iter()
        .zip(rows)
        .map(|(name, (perception, awareness, planning))| {
            (
                String::from(*name),
                ResilienceContract {
                    perception,
                    awareness,
                    planning,
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdviceThresholds {
    /// Undershoot frequency above which the system should be strengthened.
    pub undershoot_high: f64,
    /// Mean overshoot above which an undershoot-free system should be relaxed.
    pub overshoot_high: f64,
}

impl Default for AdviceThresholds {
    fn default() -> Self {
        AdviceThresholds {
            undershoot_high: 0.01,
            overshoot_high: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recommendation {
    Strengthen,
    Relax,
    Keep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advice {
    pub undershoot_frequency: f64,
    pub mean_overshoot: f64,
    pub recommendation: Recommendation,
    pub suggestions: Vec<String>,
}

/// Reads a run's undershoot frequency and mean overshoot and suggests which
/// way to move. Advisory only; nothing is changed.
pub fn meta_advise(
    run: &[StepRecord],
    contract: &ResilienceContract,
    thresholds: &AdviceThresholds,
) -> Result<Advice> {
    if run.is_empty() {
        return Err(invalid("cannot advise on an empty run"));
    }
    let steps = run.len() as f64;
    let undershoot_frequency = run.iter().filter(|s| s.undershoot > 0).count() as f64 / steps;
    let mean_overshoot = run.iter().map(|s| f64::from(s.overshoot)).sum::<f64>() / steps;
    let mut suggestions = Vec::new();
    let recommendation = if undershoot_frequency > thresholds.undershoot_high {
        suggestions.push(String::from("raise n_max"));
        suggestions.push(String::from("lower theta"));
        if let Some(next) = contract.awareness.lo.next() {
            suggestions.push(format!(
                "raise awareness class from {} to {}",
                contract.awareness.lo.ordinal(),
                next.ordinal()
            ));
        }
        Recommendation::Strengthen
    } else if undershoot_frequency == 0.0 && mean_overshoot > thresholds.overshoot_high {
        suggestions.push(String::from("lower n"));
        suggestions.push(String::from("raise theta"));
        Recommendation::Relax
    } else {
        Recommendation::Keep
    };
    Ok(Advice {
        undershoot_frequency,
        mean_overshoot,
        recommendation,
        suggestions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rds::{StepRecord, VerdictKind};
    use alloc::string::ToString;
    use proptest::prelude::*;

    #[test]
    fn lookups() {
        let table = builtin_contracts();
        assert_eq!(table.len(), 9);
        assert_eq!(table["RDS"].perception.to_string(), "(1,I)");
        assert_eq!(table["RDS"].awareness.to_string(), "(3,I)");
        assert_eq!(table["Transformer"].planning.to_string(), "(4,III)");
        assert_eq!(table["FSO"].perception.to_string(), "(8–9,III)");
        assert_eq!(table["MAC"].planning.to_string(), "L: (3–9,III), C: (3,I)");
    }

    #[test]
    fn contract_matching() {
        let table = builtin_contracts();
        let aware5 = EnvironmentPolicy {
            awareness: Requirement::new(BehaviourClass::FirstOrderPredictive, Dynamicity::I),
            ..Default::default()
        };
        let r = match_contract(&table["RDS"], &aware5);
        assert_eq!(r.failing_facets(), [Facet::Awareness]);
        for c in table.values() {
            assert!(match_contract(c, &EnvironmentPolicy::default()).is_match());
        }
        let aware5_dyn2 = EnvironmentPolicy {
            awareness: Requirement::new(BehaviourClass::FirstOrderPredictive, Dynamicity::II),
            ..Default::default()
        };
        assert_eq!(
            match_contract(&table["A-RDS"], &aware5_dyn2),
            MatchResult::Mismatch(alloc::vec![Shortfall {
                facet: Facet::Awareness,
                axis: Axis::Dynamicity
            }])
        );
    }

    #[test]
    fn split_planning_targets() {
        let mac = builtin_contracts()["MAC"];
        let mut policy = EnvironmentPolicy {
            planning: Requirement::new(BehaviourClass::PurposefulNonTeleological, Dynamicity::III),
            ..Default::default()
        };
        assert!(match_contract(&mac, &policy).is_match());
        policy.planning_target = PlanningTarget::Central;
        assert!(!match_contract(&mac, &policy).is_match());
        policy.planning_target = PlanningTarget::Local;
        assert!(match_contract(&mac, &policy).is_match());
    }

    #[test]
    fn interval_matches_on_lower_bound() {
        let mape = builtin_contracts()["MAPE"];
        let policy = EnvironmentPolicy {
            awareness: Requirement::new(BehaviourClass::SecondOrderPredictive, Dynamicity::I),
            ..Default::default()
        };
        assert!(!match_contract(&mape, &policy).is_match());
    }

    #[test]
    fn reversed_interval_rejected() {
        assert!(Coordinate::range(
            BehaviourClass::HigherOrderPredictive,
            BehaviourClass::Passive,
            Dynamicity::I
        )
        .is_err());
        assert!(
            serde_json::from_str::<Coordinate>(r#"{"behaviour":[7,5],"dynamicity":"I"}"#).is_err()
        );
        assert!(
            serde_json::from_str::<Coordinate>(r#"{"behaviour":[0,5],"dynamicity":"I"}"#).is_err()
        );
    }

    #[test]
    fn contracts_round_trip() {
        let table = builtin_contracts();
        let json = serde_json::to_string(&table).unwrap();
        let back: BTreeMap<String, ResilienceContract> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, table);
    }

    fn run(under: &[u32], over: &[u32]) -> Vec<StepRecord> {
        under
            .iter()
            .zip(over)
            .enumerate()
            .map(|(i, (&u, &o))| {
                let mut s = StepRecord::new(i, 0, 1, VerdictKind::Majority, 1);
                s.undershoot = u;
                s.overshoot = o;
                s
            })
            .collect()
    }

    #[test]
    fn advice_rules() {
        let rds = builtin_contracts()["RDS"];
        let th = AdviceThresholds::default();
        let relax = meta_advise(&run(&[0; 10], &[4; 10]), &rds, &th).unwrap();
        assert_eq!(relax.recommendation, Recommendation::Relax);
        assert_eq!(relax.mean_overshoot, 4.0);

        let mut under = [0u32; 100];
        under[..5].fill(2);
        let strengthen = meta_advise(&run(&under, &[0; 100]), &rds, &th).unwrap();
        assert_eq!(strengthen.recommendation, Recommendation::Strengthen);
        assert!((strengthen.undershoot_frequency - 0.05).abs() < 1e-12);
        assert!(strengthen
            .suggestions
            .iter()
            .any(|s| s.contains("from 3 to 4")));

        let keep = meta_advise(&run(&[0; 10], &[2; 10]), &rds, &th).unwrap();
        assert_eq!(keep.recommendation, Recommendation::Keep);
        assert!(meta_advise(&[], &rds, &th).is_err());
    }

    fn arb_req() -> impl Strategy<Value = Requirement> {
        (1u8..=9, 0usize..3).prop_map(|(b, d)| {
            Requirement::new(
                BehaviourClass::try_from(b).unwrap(),
                [Dynamicity::I, Dynamicity::II, Dynamicity::III][d],
            )
        })
    }

    proptest! {
        #[test]
        fn weakening_never_breaks_a_match(
            reqs in prop::array::uniform3(arb_req()),
            facet in 0usize..3,
            system in 0usize..9,
        ) {
            let contract = builtin_contracts()[SYSTEMS[system]];
            let policy = EnvironmentPolicy {
                perception: reqs[0],
                awareness: reqs[1],
                planning: reqs[2],
                planning_target: PlanningTarget::Any,
            };
            let mut weaker = policy;
            let slot = match facet {
                0 => &mut weaker.perception,
                1 => &mut weaker.awareness,
                _ => &mut weaker.planning,
            };
            *slot = Requirement::default();
            if match_contract(&contract, &policy).is_match() {
                prop_assert!(match_contract(&contract, &weaker).is_match());
            }
        }
    }
}
