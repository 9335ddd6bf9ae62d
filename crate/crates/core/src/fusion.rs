//! Monitor/analyse/plan/execute loop with planner selection and plan fusion.
//!
//! Planners declare a reference context and the components they depend on.
//! Each step the loop keeps the planners whose dependencies are enabled,
//! scores them by how closely their reference context matches the current
//! one, and either hands control to the best match or fuses the plans of
//! every planner above a fitness threshold. Fusion groups actions by the
//! (component, aspect) they touch; groups with disagreeing actions are
//! resolved by winner-takes-all or by a fitness-weighted mean.
//!
//! A loop guard watches the configuration history and freezes adaptation for
//! a cool-down when the configuration starts oscillating.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envmodel::{Corruption, FaultTrace};
use crate::error::invalid;
use crate::rds::{default_refresh, ReplicatedCell, StepDetail, StepRecord, VerdictKind};
use crate::voting::Verdict;
use crate::{sim_rng, Error, Result};

pub type ComponentId = String;

/// Observed condition of the system and its environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Context(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AdaptationAction {
    Enable {
        component: ComponentId,
    },
    Disable {
        component: ComponentId,
    },
    SetParam {
        component: ComponentId,
        param: String,
        value: f64,
    },
}

impl AdaptationAction {
    pub fn enable(component: &str) -> Self {
        AdaptationAction::Enable {
            component: component.into(),
        }
    }

    pub fn disable(component: &str) -> Self {
        AdaptationAction::Disable {
            component: component.into(),
        }
    }

    pub fn set(component: &str, param: &str, value: f64) -> Self {
        AdaptationAction::SetParam {
            component: component.into(),
            param: param.into(),
            value,
        }
    }

    pub fn component(&self) -> &str {
        match self {
            AdaptationAction::Enable { component }
            | AdaptationAction::Disable { component }
            | AdaptationAction::SetParam { component, .. } => component,
        }
    }

    pub fn target(&self) -> Target {
        let aspect = match self {
            AdaptationAction::Enable { .. } | AdaptationAction::Disable { .. } => Aspect::Enabled,
            AdaptationAction::SetParam { param, .. } => Aspect::Param(param.clone()),
        };
        Target {
            component: self.component().into(),
            aspect,
        }
    }
}

/// What an action changes. Orders by component first, then the enabled flag
/// before parameters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Target {
    pub component: ComponentId,
    pub aspect: Aspect,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Aspect {
    Enabled,
    Param(String),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.aspect {
            Aspect::Enabled => write!(f, "{}.enabled", self.component),
            Aspect::Param(p) => write!(f, "{}.{}", self.component, p),
        }
    }
}

/// Actions proposed by one planner. No two actions share a target.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    actions: Vec<AdaptationAction>,
    pub source_planner: String,
    pub fitness: f64,
}

pub const FUSED: &str = "fused";

impl Plan {
    pub fn new(actions: Vec<AdaptationAction>, source_planner: &str, fitness: f64) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for a in &actions {
            let target = a.target();
            if !seen.insert(target.clone()) {
                return Err(Error::InvalidPlan(format!(
                    "{source_planner} touches {target} twice"
                )));
            }
        }
        Ok(Plan {
            actions,
            source_planner: source_planner.into(),
            fitness,
        })
    }

    pub fn actions(&self) -> &[AdaptationAction] {
        &self.actions
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Enabled components and their parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(default)]
    pub enabled: BTreeSet<ComponentId>,
    #[serde(default)]
    pub params: BTreeMap<ComponentId, BTreeMap<String, f64>>,
}

impl SystemConfig {
    pub fn param(&self, component: &str, param: &str) -> Option<f64> {
        self.params.get(component)?.get(param).copied()
    }

    pub fn is_enabled(&self, component: &str) -> bool {
        self.enabled.contains(component)
    }

    pub fn validate(&self) -> Result<()> {
        match self.params.keys().find(|c| !self.enabled.contains(*c)) {
            Some(c) => Err(invalid(format!(
                "parameters set for disabled component {c}"
            ))),
            None => Ok(()),
        }
    }
}

/// Produces a planner's actions for the current context and configuration.
/// Implementations must be deterministic.
pub trait PlanFn: Send + Sync {
    fn plan(&self, context: &Context, config: &SystemConfig) -> Vec<AdaptationAction>;
}

impl<F> PlanFn for F
where
    F: Fn(&Context, &SystemConfig) -> Vec<AdaptationAction> + Send + Sync,
{
    fn plan(&self, context: &Context, config: &SystemConfig) -> Vec<AdaptationAction> {
        self(context, config)
    }
}

/// Always proposes the same actions.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticPlan(pub Vec<AdaptationAction>);

impl PlanFn for StaticPlan {
    fn plan(&self, _: &Context, _: &SystemConfig) -> Vec<AdaptationAction> {
        self.0.clone()
    }
}

#[derive(Clone)]
pub struct Planner {
    pub id: String,
    pub reference: Context,
    pub dependencies: BTreeSet<ComponentId>,
    plan_fn: Arc<dyn PlanFn>,
}

impl fmt::Debug for Planner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Planner")
            .field("id", &self.id)
            .field("reference", &self.reference)
            .field("dependencies", &self.dependencies)
            .finish_non_exhaustive()
    }
}

impl Planner {
    pub fn new(
        id: &str,
        reference: Vec<f64>,
        dependencies: &[&str],
        plan_fn: impl PlanFn + 'static,
    ) -> Self {
        Planner {
            id: id.into(),
            reference: Context(reference),
            dependencies: dependencies.iter().map(|d| d.to_string()).collect(),
            plan_fn: Arc::new(plan_fn),
        }
    }

    pub fn propose(&self, context: &Context, config: &SystemConfig) -> Vec<AdaptationAction> {
        self.plan_fn.plan(context, config)
    }
}

/// Declarative planner with a fixed action list, as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerSpec {
    pub id: String,
    pub reference: Vec<f64>,
    #[serde(default)]
    pub dependencies: Vec<ComponentId>,
    pub actions: Vec<AdaptationAction>,
}

impl From<&PlannerSpec> for Planner {
    fn from(spec: &PlannerSpec) -> Self {
        Planner {
            id: spec.id.clone(),
            reference: Context(spec.reference.clone()),
            dependencies: spec.dependencies.iter().cloned().collect(),
            plan_fn: Arc::new(StaticPlan(spec.actions.clone())),
        }
    }
}

/// Registered components and planners. Immutable during a run.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    pub components: BTreeSet<ComponentId>,
    pub planners: Vec<Planner>,
}

impl Registry {
    pub fn new(components: &[&str], planners: Vec<Planner>) -> Result<Self> {
        let registry = Registry {
            components: components.iter().map(|c| c.to_string()).collect(),
            planners,
        };
        let mut ids = BTreeSet::new();
        for p in &registry.planners {
            if !ids.insert(p.id.as_str()) {
                return Err(invalid(format!("duplicate planner id {}", p.id)));
            }
            if let Some(d) = p
                .dependencies
                .iter()
                .find(|d| !registry.components.contains(*d))
            {
                return Err(invalid(format!(
                    "planner {} depends on unknown component {d}",
                    p.id
                )));
            }
        }
        Ok(registry)
    }

    pub fn check_actions(&self, actions: &[AdaptationAction]) -> Result<()> {
        match actions
            .iter()
            .find(|a| !self.components.contains(a.component()))
        {
            Some(a) => Err(Error::InvalidPlan(format!(
                "unknown component {}",
                a.component()
            ))),
            None => Ok(()),
        }
    }
}

/// `1 / (1 + ‖reference − current‖₂)`.
pub fn fitness(reference: &Context, current: &Context) -> Result<f64> {
    if reference.0.len() != current.0.len() {
        return Err(invalid(format!(
            "context dimensions differ: {} vs {}",
            reference.0.len(),
            current.0.len()
        )));
    }
    let squared: f64 = reference
        .0
        .iter()
        .zip(&current.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(1.0 / (1.0 + libm::sqrt(squared)))
}

/// Planners whose dependencies are all enabled.
pub fn structural_check<'r>(registry: &'r Registry, config: &SystemConfig) -> Vec<&'r Planner> {
    registry
        .planners
        .iter()
        .filter(|p| p.dependencies.is_subset(&config.enabled))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SelectionMode {
    /// Best-matching planner takes over.
    Single,
    /// Every planner with fitness at least `tau` contributes.
    Multi { tau: f64 },
}

/// Scores eligible planners against `current`. Single mode returns the
/// argmax (ties to the smallest id); multi mode returns every planner at or
/// above `tau`, ordered by id.
pub fn select_planners<'r>(
    eligible: &[&'r Planner],
    current: &Context,
    mode: SelectionMode,
) -> Result<Vec<(&'r Planner, f64)>> {
    let mut scored = eligible
        .iter()
        .map(|p| Ok((*p, fitness(&p.reference, current)?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| a.0.id.cmp(&b.0.id));
    match mode {
        SelectionMode::Single => {
            let best = scored
                .into_iter()
                .reduce(|best, next| if next.1 > best.1 { next } else { best })
                .ok_or(Error::NoPlanner)?;
            Ok(alloc::vec![best])
        }
        SelectionMode::Multi { tau } => Ok(scored.into_iter().filter(|s| s.1 >= tau).collect()),
    }
}

/// One planner's action on a contested target.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub action: AdaptationAction,
    pub planner: String,
    pub fitness: f64,
}

/// Proposals that touch one target.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictGroup {
    pub target: Target,
    pub proposals: Vec<Proposal>,
}

impl ConflictGroup {
    /// Enable against disable, or two different values for one parameter.
    pub fn is_conflict(&self) -> bool {
        self.proposals
            .iter()
            .any(|p| p.action != self.proposals[0].action)
    }
}

fn group_by_target(plans: &[Plan]) -> BTreeMap<Target, Vec<Proposal>> {
    let mut groups: BTreeMap<Target, Vec<Proposal>> = BTreeMap::new();
    for plan in plans {
        for action in plan.actions() {
            groups.entry(action.target()).or_default().push(Proposal {
                action: action.clone(),
                planner: plan.source_planner.clone(),
                fitness: plan.fitness,
            });
        }
    }
    groups
}

/// Targets on which the plans disagree, in target order.
pub fn detect_conflicts(plans: &[Plan]) -> Vec<ConflictGroup> {
    group_by_target(plans)
        .into_iter()
        .map(|(target, proposals)| ConflictGroup { target, proposals })
        .filter(ConflictGroup::is_conflict)
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionPolicy {
    WinnerTakesAll,
    WeightedAverage,
    /// Weighted average for parameters, winner-takes-all for enable/disable.
    #[default]
    Auto,
}

impl ResolutionPolicy {
    fn name(self) -> &'static str {
        match self {
            ResolutionPolicy::WinnerTakesAll => "winner_takes_all",
            ResolutionPolicy::WeightedAverage => "weighted_average",
            ResolutionPolicy::Auto => "auto",
        }
    }
}

/// Reduces a group to one action.
pub fn resolve(group: &ConflictGroup, policy: ResolutionPolicy) -> Result<AdaptationAction> {
    if group.proposals.is_empty() {
        return Err(invalid("empty conflict group"));
    }
    let averaging = match (policy, &group.target.aspect) {
        (ResolutionPolicy::WinnerTakesAll, _) | (ResolutionPolicy::Auto, Aspect::Enabled) => false,
        (ResolutionPolicy::WeightedAverage, Aspect::Enabled) => {
            return Err(Error::InvalidPolicy {
                policy: policy.name().into(),
                target: group.target.to_string(),
            })
        }
        (_, Aspect::Param(_)) => true,
    };
    if !averaging {
        let winner = group
            .proposals
            .iter()
            .reduce(|best, next| {
                let better = next.fitness > best.fitness
                    || (next.fitness == best.fitness && next.planner < best.planner);
                if better {
                    next
                } else {
                    best
                }
            })
            .expect("non-empty group");
        return Ok(winner.action.clone());
    }
    let total: f64 = group.proposals.iter().map(|p| p.fitness).sum();
    if total.is_nan() || total <= 0.0 {
        return Err(invalid("weights must sum to a positive value"));
    }
    let mean = group
        .proposals
        .iter()
        .map(|p| match p.action {
            AdaptationAction::SetParam { value, .. } => (p.fitness / total) * value,
            _ => unreachable!("parameter targets only hold SetParam"),
        })
        .sum();
    let Aspect::Param(param) = &group.target.aspect else {
        unreachable!()
    };
    Ok(AdaptationAction::SetParam {
        component: group.target.component.clone(),
        param: param.clone(),
        value: mean,
    })
}

/// Merges plans into one global plan ordered by target.
pub fn fuse(plans: &[Plan], policy: ResolutionPolicy) -> Result<Plan> {
    if plans.is_empty() {
        return Err(invalid("nothing to fuse"));
    }
    let mut actions = Vec::new();
    for (target, proposals) in group_by_target(plans) {
        let group = ConflictGroup { target, proposals };
        if group.is_conflict() {
            actions.push(resolve(&group, policy)?);
        } else {
            actions.push(group.proposals[0].action.clone());
        }
    }
    let fitness = plans.iter().map(|p| p.fitness).fold(0.0, f64::max);
    Plan::new(actions, FUSED, fitness)
}

/// Executes a plan in order. Applying the same plan twice equals applying it once.
pub fn apply_plan(config: &SystemConfig, plan: &Plan) -> Result<SystemConfig> {
    let mut next = config.clone();
    for action in plan.actions() {
        match action {
            AdaptationAction::Enable { component } => {
                next.enabled.insert(component.clone());
            }
            AdaptationAction::Disable { component } => {
                next.enabled.remove(component);
                next.params.remove(component);
            }
            AdaptationAction::SetParam {
                component,
                param,
                value,
            } => {
                if !next.enabled.contains(component) {
                    return Err(Error::InvalidPlan(format!(
                        "{component}.{param} set while {component} is disabled"
                    )));
                }
                next.params
                    .entry(component.clone())
                    .or_default()
                    .insert(param.clone(), *value);
            }
        }
    }
    Ok(next)
}

/// True iff the last `window` entries repeat with some period `p <= max_period`
/// and are not all equal. Shorter histories never count as loops.
pub fn detect_loop<T: PartialEq>(history: &[T], max_period: usize, window: usize) -> bool {
    if window < 2 || history.len() < window {
        return false;
    }
    let recent = &history[history.len() - window..];
    if recent.iter().all(|c| *c == recent[0]) {
        return false;
    }
    (1..=max_period.min(window - 1)).any(|p| recent.iter().zip(&recent[p..]).all(|(a, b)| a == b))
}

/// Oscillation detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopGuard {
    pub max_period: usize,
    pub window: usize,
    /// Steps to freeze adaptation after a loop is found. Defaults to `2 * window`.
    #[serde(default)]
    pub cooldown: Option<usize>,
}

impl LoopGuard {
    pub fn new(max_period: usize, window: usize) -> Result<Self> {
        let guard = LoopGuard {
            max_period,
            window,
            cooldown: None,
        };
        guard.validate()?;
        Ok(guard)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_period == 0 || self.window < 2 * self.max_period {
            return Err(invalid(
                "loop guard needs max_period >= 1 and window >= 2 * max_period",
            ));
        }
        Ok(())
    }

    pub fn cooldown(&self) -> usize {
        self.cooldown.unwrap_or(2 * self.window)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapeOptions {
    pub mode: SelectionMode,
    #[serde(default)]
    pub policy: ResolutionPolicy,
    #[serde(default)]
    pub guard: Option<LoopGuard>,
    /// Keep the previous configuration when a plan cannot be executed.
    #[serde(default)]
    pub rollback: bool,
}

impl MapeOptions {
    pub fn single() -> Self {
        MapeOptions {
            mode: SelectionMode::Single,
            policy: ResolutionPolicy::Auto,
            guard: None,
            rollback: false,
        }
    }

    pub fn multi(tau: f64) -> Self {
        MapeOptions {
            mode: SelectionMode::Multi { tau },
            ..Self::single()
        }
    }
}

/// Configuration plus the history the loop guard inspects.
#[derive(Debug, Clone, PartialEq)]
pub struct MapeState {
    pub config: SystemConfig,
    pub history: Vec<SystemConfig>,
    frozen_for: usize,
}

impl MapeState {
    pub fn new(config: SystemConfig) -> Self {
        MapeState {
            config,
            history: Vec::new(),
            frozen_for: 0,
        }
    }

    pub fn frozen_for(&self) -> usize {
        self.frozen_for
    }

    fn record(&mut self, keep: usize) {
        self.history.push(self.config.clone());
        if self.history.len() > keep {
            let excess = self.history.len() - keep;
            self.history.drain(..excess);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapeOutcome {
    Applied,
    NoOp,
    Frozen,
    RolledBack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub outcome: MapeOutcome,
    pub planner_ids: Vec<String>,
    pub fused_action_count: usize,
    pub conflicts: usize,
    pub loop_broken: bool,
    pub changed: bool,
}

impl Diagnostics {
    fn idle(outcome: MapeOutcome) -> Self {
        Diagnostics {
            outcome,
            planner_ids: Vec::new(),
            fused_action_count: 0,
            conflicts: 0,
            loop_broken: false,
            changed: false,
        }
    }
}

/// One monitor/analyse/plan/execute cycle against `context`.
pub fn mape_step(
    state: &mut MapeState,
    context: &Context,
    registry: &Registry,
    options: &MapeOptions,
) -> Result<Diagnostics> {
    let keep = options.guard.map_or(1, |g| g.window.max(1));
    if state.frozen_for > 0 {
        state.frozen_for -= 1;
        state.record(keep);
        return Ok(Diagnostics::idle(MapeOutcome::Frozen));
    }

    // analyse
    let eligible = structural_check(registry, &state.config);
    let selected = select_planners(&eligible, context, options.mode)?;
    if selected.is_empty() {
        state.record(keep);
        return Ok(Diagnostics::idle(MapeOutcome::NoOp));
    }

    // plan
    let plans = selected
        .iter()
        .map(|(planner, fit)| {
            let actions = planner.propose(context, &state.config);
            registry.check_actions(&actions)?;
            Plan::new(actions, &planner.id, *fit)
        })
        .collect::<Result<Vec<_>>>()?;
    let conflicts = detect_conflicts(&plans).len();
    let global = fuse(&plans, options.policy)?;
    let mut diag = Diagnostics {
        outcome: MapeOutcome::NoOp,
        planner_ids: selected.iter().map(|(p, _)| p.id.clone()).collect(),
        fused_action_count: global.actions().len(),
        conflicts,
        loop_broken: false,
        changed: false,
    };

    // execute
    if !global.is_empty() {
        match apply_plan(&state.config, &global) {
            Ok(next) => {
                diag.changed = next != state.config;
                diag.outcome = MapeOutcome::Applied;
                state.config = next;
            }
            Err(Error::InvalidPlan(_)) if options.rollback => {
                diag.outcome = MapeOutcome::RolledBack;
            }
            Err(e) => return Err(e),
        }
    }
    state.record(keep);

    if let Some(guard) = options.guard {
        if detect_loop(&state.history, guard.max_period, guard.window) {
            state.frozen_for = guard.cooldown();
            diag.loop_broken = true;
        }
    }
    Ok(diag)
}

/// Where the loop's context vector comes from each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ContextSource {
    /// `[dissent observed in this step's vote, or replica count if it failed]`.
    Dissent,
    /// One entry per listed component: 1 when enabled, 0 otherwise.
    Enabled { components: Vec<ComponentId> },
    /// Fixed vectors, cycled.
    Explicit { contexts: Vec<Vec<f64>> },
}

/// The replicated cell the loop manages through a parameter of one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManagedCell {
    pub component: ComponentId,
    #[serde(default = "default_param")]
    pub param: String,
    pub n0: u32,
    #[serde(default = "default_n_min")]
    pub n_min: u32,
    pub n_max: u32,
}

fn default_param() -> String {
    String::from("n")
}

fn default_n_min() -> u32 {
    1
}

impl ManagedCell {
    /// Design parameter the configuration asks for, clamped to the bounds.
    /// A disabled component or missing parameter falls back to `n0`.
    pub fn n_for(&self, config: &SystemConfig) -> u32 {
        let wanted = config
            .is_enabled(&self.component)
            .then(|| config.param(&self.component, &self.param))
            .flatten();
        match wanted {
            Some(v) if v.is_finite() => {
                (libm::round(v).max(0.0) as u32).clamp(self.n_min, self.n_max)
            }
            _ => self.n0,
        }
    }
}

/// Everything a managed-cell MAPE run needs besides the trace.
#[derive(Debug, Clone)]
pub struct MapeRun {
    pub registry: Registry,
    pub initial: SystemConfig,
    pub cell: ManagedCell,
    pub context: ContextSource,
    pub options: MapeOptions,
    pub refresh: bool,
    pub corruption: Corruption,
    pub resize_cost: u32,
}

impl MapeRun {
    pub fn new(
        registry: Registry,
        initial: SystemConfig,
        cell: ManagedCell,
        context: ContextSource,
        options: MapeOptions,
    ) -> Self {
        MapeRun {
            registry,
            initial,
            cell,
            context,
            options,
            refresh: default_refresh(),
            corruption: Corruption::Dissenting,
            resize_cost: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.initial.validate()?;
        if let Some(guard) = self.options.guard {
            guard.validate()?;
        }
        if self.cell.n_min > self.cell.n_max
            || !(self.cell.n_min..=self.cell.n_max).contains(&self.cell.n0)
        {
            return Err(invalid("managed cell needs n_min <= n0 <= n_max"));
        }
        if !self.registry.components.contains(&self.cell.component) {
            return Err(invalid(format!(
                "managed component {} is not registered",
                self.cell.component
            )));
        }
        if let ContextSource::Explicit { contexts } = &self.context {
            if contexts.is_empty() {
                return Err(invalid("explicit context list is empty"));
            }
        }
        Ok(())
    }
}

/// Runs a replicated cell whose size is set by the loop's configuration.
///
/// Each step: resize the cell to what the configuration asks for, corrupt
/// `f(t)` replicas, vote, then run one MAPE cycle on the resulting context.
pub fn run_mape(trace: &FaultTrace, run: &MapeRun, seed: u64) -> Result<Vec<StepRecord>> {
    run.validate()?;
    let mut rng = sim_rng(seed);
    let mut state = MapeState::new(run.initial.clone());
    let mut n = run.cell.n_for(&state.config);
    let mut cell = ReplicatedCell::new(n, rng.gen());
    let mut last_good = cell.reference();
    let mut records = Vec::with_capacity(trace.len());
    for (step, &f) in trace.steps.iter().enumerate() {
        let wanted = run.cell.n_for(&state.config);
        let surcharge = if wanted != n {
            let surcharge = u64::from(run.resize_cost) * (2 * u64::from(n) + 1);
            n = wanted;
            cell.rebuild(n, last_good);
            surcharge
        } else {
            0
        };
        let replicas = 2 * n + 1;
        cell.corrupt(f, run.corruption, &mut rng);
        let verdict = cell.read(run.refresh);
        let dissent = match verdict {
            Verdict::Majority { value, class_size } => {
                last_good = value;
                replicas - class_size as u32
            }
            Verdict::NoMajority => replicas,
        };
        let context = match &run.context {
            ContextSource::Dissent => Context(alloc::vec![f64::from(dissent)]),
            ContextSource::Enabled { components } => Context(
                components
                    .iter()
                    .map(|c| if state.config.is_enabled(c) { 1.0 } else { 0.0 })
                    .collect(),
            ),
            ContextSource::Explicit { contexts } => {
                Context(contexts[step % contexts.len()].clone())
            }
        };
        let diag = mape_step(&mut state, &context, &run.registry, &run.options)?;
        let kind = VerdictKind::judge(&verdict, cell.reference());
        let mut record = StepRecord::new(step, f, replicas, kind, u64::from(replicas) + surcharge);
        record.detail = StepDetail::Mape {
            planner_ids: diag.planner_ids,
            fused_action_count: diag.fused_action_count,
            conflicts: diag.conflicts,
            loop_broken: diag.loop_broken,
            config_changed: diag.changed,
        };
        records.push(record);
    }
    Ok(records)
}
