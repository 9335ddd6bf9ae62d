//! Scenario documents and their execution.
//!
//! A scenario is one JSON object:
//!
//! ```json
//! {
//!   "name": "ards-calm",
//!   "strategy": "ards",
//!   "seed": 7,
//!   "horizon": 10000,
//!   "env": { "model": "smooth_walk", "p_up": 0.05, "p_down": 0.05, "f_max": 3 },
//!   "params": { "theta": 0.45, "n0": 1, "n_max": 3 }
//! }
//! ```
//!
//! `env` is a fault model or `{"trace": [...]}` for the cell strategies,
//! `{"requests": [...]}` for `fso`, and absent for `anvp`. `params` holds the
//! strategy's own settings. `output` optionally names the trace file.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use resbench_core::anvp::{run_anvp, AnvpConfig, VersionPool};
use resbench_core::ards::{run_ards, ArdsConfig, DfobController};
use resbench_core::envmodel::{gen_trace, Corruption, EnvModel, FaultTrace};
use resbench_core::fso::{
    simulate_fso, telecare_preset, BlockSpec, FsoReport, Member, Situation, Tree,
};
use resbench_core::fusion::{
    run_mape, ContextSource, LoopGuard, ManagedCell, MapeOptions, MapeRun, Planner, PlannerSpec,
    Registry, ResolutionPolicy, SelectionMode, SystemConfig,
};
use resbench_core::rds::{run_rds, RdsConfig, StepRecord};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Rds,
    Ards,
    Anvp,
    MapeSingle,
    MapeFusion,
    Fso,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Rds,
        Strategy::Ards,
        Strategy::Anvp,
        Strategy::MapeSingle,
        Strategy::MapeFusion,
        Strategy::Fso,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Rds => "rds",
            Strategy::Ards => "ards",
            Strategy::Anvp => "anvp",
            Strategy::MapeSingle => "mape_single",
            Strategy::MapeFusion => "mape_fusion",
            Strategy::Fso => "fso",
        }
    }

    /// Name of the built-in contract describing this strategy.
    pub fn contract_name(self) -> &'static str {
        match self {
            Strategy::Rds => "RDS",
            Strategy::Ards => "A-RDS",
            Strategy::Anvp => "A-NVP",
            Strategy::MapeSingle | Strategy::MapeFusion => "MAPE",
            Strategy::Fso => "FSO",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| HarnessError::UnknownStrategy(s.to_owned()))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    strategy: String,
    seed: u64,
    horizon: usize,
    #[serde(default)]
    env: Option<Json>,
    #[serde(default)]
    params: Option<Json>,
    #[serde(default)]
    output: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceEnv {
    trace: Vec<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestEnv {
    requests: Vec<Situation>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapeParams {
    components: Vec<String>,
    planners: Vec<PlannerSpec>,
    #[serde(default)]
    initial: SystemConfig,
    cell: ManagedCell,
    #[serde(default = "default_context")]
    context: ContextSource,
    #[serde(default)]
    tau: Option<f64>,
    #[serde(default)]
    policy: ResolutionPolicy,
    #[serde(default)]
    guard: Option<LoopGuard>,
    #[serde(default)]
    rollback: bool,
    #[serde(default = "default_true")]
    refresh: bool,
    #[serde(default)]
    corruption: Corruption,
    #[serde(default = "default_resize_cost")]
    resize_cost: u32,
}

fn default_context() -> ContextSource {
    ContextSource::Dissent
}

fn default_true() -> bool {
    true
}

fn default_resize_cost() -> u32 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FsoParams {
    #[serde(default)]
    tree: Option<BlockSpec>,
    #[serde(default)]
    telecare: Option<TelecareParams>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TelecareParams {
    houses: usize,
    responders: Vec<Member>,
}

/// Validated, ready-to-run strategy setup.
#[derive(Debug, Clone)]
pub enum Setup {
    Rds {
        trace: FaultTrace,
        config: RdsConfig,
    },
    Ards {
        trace: FaultTrace,
        config: ArdsConfig,
    },
    Anvp {
        config: AnvpConfig,
    },
    Mape {
        trace: FaultTrace,
        run: Box<MapeRun>,
    },
    Fso {
        tree: BlockSpec,
        requests: Vec<Situation>,
    },
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub horizon: usize,
    pub output: Option<String>,
    pub setup: Setup,
}

/// Result of executing a scenario.
#[derive(Debug, Clone)]
pub enum Outcome {
    Steps(Vec<StepRecord>),
    Fso(FsoReport),
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates a scenario document. `origin` labels errors.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let raw: RawScenario =
            serde_json::from_str(text).map_err(|source| HarnessError::Parse {
                origin: origin.to_owned(),
                source,
            })?;
        let strategy: Strategy = raw.strategy.parse()?;
        let name = raw.name;
        let config_err = |field: &'static str, message: String| HarnessError::Config {
            scenario: name.clone(),
            field,
            message,
        };
        if name.is_empty() || name.starts_with('.') || !name.chars().all(safe_file_char) {
            return Err(config_err(
                "name",
                "use only letters, digits, '.', '_' and '-'".into(),
            ));
        }
        if let Some(out) = &raw.output {
            if out.is_empty() || out.starts_with('.') || !out.chars().all(safe_file_char) {
                return Err(config_err("output", "must be a plain file name".into()));
            }
        }
        if raw.horizon == 0 {
            return Err(config_err("horizon", "must be at least 1".into()));
        }
        let params = raw
            .params
            .unwrap_or_else(|| Json::Object(Default::default()));
        let core_err = |field: &'static str| {
            let name = name.clone();
            move |e: resbench_core::Error| HarnessError::Config {
                scenario: name.clone(),
                field,
                message: e.to_string(),
            }
        };

        let setup = match strategy {
            Strategy::Rds | Strategy::Ards | Strategy::MapeSingle | Strategy::MapeFusion => {
                let env = raw.env.ok_or_else(|| {
                    config_err("env", format!("{strategy} needs a fault model or trace"))
                })?;
                let trace =
                    build_trace(env, raw.horizon, raw.seed).map_err(|m| config_err("env", m))?;
                match strategy {
                    Strategy::Rds => {
                        let config: RdsConfig =
                            decode(params).map_err(|m| config_err("params", m))?;
                        if config.n == 0 {
                            return Err(config_err("params", "n must be at least 1".into()));
                        }
                        Setup::Rds { trace, config }
                    }
                    Strategy::Ards => {
                        let config: ArdsConfig =
                            decode(params).map_err(|m| config_err("params", m))?;
                        DfobController::new(config.controller).map_err(core_err("params"))?;
                        Setup::Ards { trace, config }
                    }
                    _ => {
                        let p: MapeParams = decode(params).map_err(|m| config_err("params", m))?;
                        let run = build_mape(strategy, p).map_err(|m| config_err("params", m))?;
                        run.validate().map_err(core_err("params"))?;
                        Setup::Mape {
                            trace,
                            run: Box::new(run),
                        }
                    }
                }
            }
            Strategy::Anvp => {
                if raw.env.is_some() {
                    return Err(config_err(
                        "env",
                        "anvp draws faults from each version's own process".into(),
                    ));
                }
                let config: AnvpConfig = decode(params).map_err(|m| config_err("params", m))?;
                let controller =
                    DfobController::new(config.controller).map_err(core_err("params"))?;
                VersionPool::new(
                    config.versions.clone(),
                    controller.replicas(),
                    config.reward,
                    config.penalty,
                )
                .map_err(core_err("params"))?;
                Setup::Anvp { config }
            }
            Strategy::Fso => {
                let env = raw
                    .env
                    .ok_or_else(|| config_err("env", "fso needs a request stream".into()))?;
                let requests = decode::<RequestEnv>(env)
                    .map_err(|m| config_err("env", m))?
                    .requests;
                let p: FsoParams = decode(params).map_err(|m| config_err("params", m))?;
                let tree = match (p.tree, p.telecare) {
                    (Some(tree), None) => tree,
                    (None, Some(t)) => {
                        let responders: Vec<(&str, Vec<&str>)> = t
                            .responders
                            .iter()
                            .map(|m| {
                                (
                                    m.id.as_str(),
                                    m.capabilities.iter().map(String::as_str).collect(),
                                )
                            })
                            .collect();
                        let refs: Vec<(&str, &[&str])> = responders
                            .iter()
                            .map(|(id, caps)| (*id, caps.as_slice()))
                            .collect();
                        telecare_preset(t.houses, &refs)
                    }
                    _ => {
                        return Err(config_err(
                            "params",
                            "give exactly one of tree or telecare".into(),
                        ))
                    }
                };
                let built = Tree::build(&tree).map_err(core_err("params"))?;
                if let Some(s) = requests
                    .iter()
                    .find(|s| built.find(&s.request.origin_block).is_none())
                {
                    return Err(config_err(
                        "env",
                        format!(
                            "request {} names unknown block {}",
                            s.request.id, s.request.origin_block
                        ),
                    ));
                }
                Setup::Fso { tree, requests }
            }
        };
        Ok(Scenario {
            name,
            strategy,
            seed: raw.seed,
            horizon: raw.horizon,
            output: raw.output,
            setup,
        })
    }

    /// Fault trace driving the cell, if the strategy has one.
    pub fn trace(&self) -> Option<&FaultTrace> {
        match &self.setup {
            Setup::Rds { trace, .. } | Setup::Ards { trace, .. } | Setup::Mape { trace, .. } => {
                Some(trace)
            }
            Setup::Anvp { .. } | Setup::Fso { .. } => None,
        }
    }

    /// File name of the per-step CSV.
    pub fn trace_file(&self) -> String {
        self.output
            .clone()
            .unwrap_or_else(|| format!("{}.csv", self.name))
    }

    pub fn execute(&self) -> Result<Outcome> {
        let seed = run_seed(self.seed);
        let result = match &self.setup {
            Setup::Rds { trace, config } => run_rds(trace, config, seed).map(Outcome::Steps),
            Setup::Ards { trace, config } => run_ards(trace, config, seed).map(Outcome::Steps),
            Setup::Anvp { config } => run_anvp(config, self.horizon, seed).map(Outcome::Steps),
            Setup::Mape { trace, run } => run_mape(trace, run, seed).map(Outcome::Steps),
            Setup::Fso { tree, requests } => {
                simulate_fso(tree, requests, self.horizon).map(Outcome::Fso)
            }
        };
        result.map_err(|source| HarnessError::Run {
            scenario: self.name.clone(),
            source,
        })
    }
}

/// Seed for the strategy's own draws; kept apart from the trace stream.
pub fn run_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

fn safe_file_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-')
}

fn decode<T: DeserializeOwned>(v: Json) -> std::result::Result<T, String> {
    serde_json::from_value(v).map_err(|e| e.to_string())
}

fn build_trace(env: Json, horizon: usize, seed: u64) -> std::result::Result<FaultTrace, String> {
    if env.get("trace").is_some() {
        let steps = decode::<TraceEnv>(env)?.trace;
        if steps.len() != horizon {
            return Err(format!(
                "trace has {} steps but horizon is {horizon}",
                steps.len()
            ));
        }
        return Ok(FaultTrace::from_steps(steps));
    }
    let model: EnvModel = decode(env)?;
    gen_trace(&model, horizon, seed).map_err(|e| e.to_string())
}

fn build_mape(strategy: Strategy, p: MapeParams) -> std::result::Result<MapeRun, String> {
    let mode = match (strategy, p.tau) {
        (Strategy::MapeSingle, None) => SelectionMode::Single,
        (Strategy::MapeSingle, Some(_)) => return Err("tau only applies to mape_fusion".into()),
        (_, Some(tau)) if tau.is_finite() && (0.0..=1.0).contains(&tau) => {
            SelectionMode::Multi { tau }
        }
        (_, Some(_)) => return Err("tau must be in [0, 1]".into()),
        (_, None) => return Err("mape_fusion needs tau".into()),
    };
    let components: Vec<&str> = p.components.iter().map(String::as_str).collect();
    let planners = p.planners.iter().map(Planner::from).collect();
    let registry = Registry::new(&components, planners).map_err(|e| e.to_string())?;
    for spec in &p.planners {
        registry
            .check_actions(&spec.actions)
            .map_err(|e| e.to_string())?;
    }
    let options = MapeOptions {
        mode,
        policy: p.policy,
        guard: p.guard,
        rollback: p.rollback,
    };
    let mut run = MapeRun::new(registry, p.initial, p.cell, p.context, options);
    run.refresh = p.refresh;
    run.corruption = p.corruption;
    run.resize_cost = p.resize_cost;
    Ok(run)
}
