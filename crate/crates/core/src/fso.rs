//! Nested organisations that resolve role requests locally or by escalation.
//!
//! Blocks form a tree. A request names the roles it needs; the origin block
//! first tries to fill them with its own idle members. Whatever is missing
//! becomes an exception forwarded to the parent, which can draw on its own
//! members and on the members of its other children. The block that fills
//! the missing roles hosts the community; at the root with roles still
//! missing, the request fails and waits in its origin's queue for the next
//! state change.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::{Error, Result};

pub type Role = String;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub id: String,
    pub capabilities: BTreeSet<Role>,
    #[serde(default)]
    pub busy: bool,
}

impl Member {
    pub fn new(id: &str, capabilities: &[&str]) -> Self {
        Member {
            id: id.into(),
            capabilities: capabilities.iter().map(|c| (*c).into()).collect(),
            busy: false,
        }
    }

    pub fn can_play(&self, role: &str) -> bool {
        !self.busy && self.capabilities.contains(role)
    }
}

/// Index of a block inside its [`Tree`].
pub type BlockIdx = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: String,
    /// Kept sorted by member id.
    members: Vec<Member>,
    pub children: Vec<BlockIdx>,
    pub parent: Option<BlockIdx>,
    pub pending: VecDeque<RoleRequest>,
}

impl Block {
    pub fn members(&self) -> &[Member] {
        &self.members
    }
}

/// Declarative block as written in scenario files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub id: String,
    #[serde(default)]
    pub members: Vec<Member>,
    #[serde(default)]
    pub children: Vec<BlockSpec>,
}

impl BlockSpec {
    pub fn new(id: &str, members: Vec<Member>, children: Vec<BlockSpec>) -> Self {
        BlockSpec {
            id: id.into(),
            members,
            children,
        }
    }
}

/// A rooted tree of blocks. Block 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    blocks: Vec<Block>,
}

impl Tree {
    pub fn build(root: &BlockSpec) -> Result<Self> {
        let mut tree = Tree { blocks: Vec::new() };
        tree.add(root, None);
        let mut block_ids = BTreeSet::new();
        let mut member_ids = BTreeSet::new();
        for b in &tree.blocks {
            if !block_ids.insert(b.id.as_str()) {
                return Err(invalid(format!("duplicate block id {}", b.id)));
            }
            for m in &b.members {
                if !member_ids.insert(m.id.as_str()) {
                    return Err(invalid(format!("duplicate member id {}", m.id)));
                }
            }
        }
        Ok(tree)
    }

    fn add(&mut self, spec: &BlockSpec, parent: Option<BlockIdx>) -> BlockIdx {
        let idx = self.blocks.len();
        let mut members = spec.members.clone();
        members.sort_by(|a, b| a.id.cmp(&b.id));
        self.blocks.push(Block {
            id: spec.id.clone(),
            members,
            children: Vec::new(),
            parent,
            pending: VecDeque::new(),
        });
        for child in &spec.children {
            let c = self.add(child, Some(idx));
            self.blocks[idx].children.push(c);
        }
        idx
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, idx: BlockIdx) -> &Block {
        &self.blocks[idx]
    }

    pub fn find(&self, id: &str) -> Option<BlockIdx> {
        self.blocks.iter().position(|b| b.id == id)
    }

    pub fn depth_of(&self, mut idx: BlockIdx) -> usize {
        let mut depth = 0;
        while let Some(p) = self.blocks[idx].parent {
            depth += 1;
            idx = p;
        }
        depth
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        (0..self.blocks.len())
            .map(|i| self.depth_of(i))
            .max()
            .unwrap_or(0)
    }

    pub fn member_count(&self) -> usize {
        self.blocks.iter().map(|b| b.members.len()).sum()
    }

    pub fn busy_count(&self) -> usize {
        self.blocks
            .iter()
            .flat_map(|b| &b.members)
            .filter(|m| m.busy)
            .count()
    }

    /// Adds a member to a block, keeping id order.
    pub fn add_member(&mut self, block: BlockIdx, member: Member) -> Result<()> {
        if self
            .blocks
            .iter()
            .flat_map(|b| &b.members)
            .any(|m| m.id == member.id)
        {
            return Err(invalid(format!("duplicate member id {}", member.id)));
        }
        let members = &mut self.blocks[block].members;
        let at = members.partition_point(|m| m.id < member.id);
        members.insert(at, member);
        Ok(())
    }

    /// Removes a member by id, returning it.
    pub fn remove_member(&mut self, id: &str) -> Option<Member> {
        for b in &mut self.blocks {
            if let Some(pos) = b.members.iter().position(|m| m.id == id) {
                return Some(b.members.remove(pos));
            }
        }
        None
    }

    fn set_busy(&mut self, assignment: &Assignment, busy: bool) {
        let block = &mut self.blocks[assignment.block];
        if let Some(m) = block.members.iter_mut().find(|m| m.id == assignment.member) {
            m.busy = busy;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleRequest {
    pub id: u32,
    pub required_roles: Vec<Role>,
    pub origin_block: String,
    #[serde(default)]
    pub hops: u32,
}

impl RoleRequest {
    pub fn new(id: u32, origin: &str, roles: &[&str]) -> Self {
        RoleRequest {
            id,
            required_roles: roles.iter().map(|r| (*r).into()).collect(),
            origin_block: origin.into(),
            hops: 0,
        }
    }
}

/// A role filled by one member of one block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub role: Role,
    pub block: BlockIdx,
    pub member: String,
}

/// Greedy match of `roles` against idle members of `blocks`, taken in the
/// given block order and member-id order. Members in `reserved` are skipped.
fn match_in(
    tree: &Tree,
    blocks: &[BlockIdx],
    roles: &[Role],
    reserved: &BTreeSet<String>,
) -> (Vec<Assignment>, Vec<Role>) {
    let mut taken = reserved.clone();
    let mut assignments = Vec::new();
    let mut missing = Vec::new();
    for role in roles {
        let found = blocks.iter().find_map(|&b| {
            tree.blocks[b]
                .members
                .iter()
                .find(|m| m.can_play(role) && !taken.contains(&m.id))
                .map(|m| (b, m.id.clone()))
        });
        match found {
            Some((block, member)) => {
                taken.insert(member.clone());
                assignments.push(Assignment {
                    role: role.clone(),
                    block,
                    member,
                });
            }
            None => missing.push(role.clone()),
        }
    }
    (assignments, missing)
}

/// Fills the request's roles from the block's own idle members.
pub fn match_roles(
    tree: &Tree,
    block: BlockIdx,
    request: &RoleRequest,
) -> (Vec<Assignment>, Vec<Role>) {
    match_in(tree, &[block], &request.required_roles, &BTreeSet::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommunityState {
    Forming,
    Active,
    Released,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Community {
    pub id: u32,
    pub request_id: u32,
    pub origin: BlockIdx,
    /// Block whose level filled the last missing role.
    pub resolved_at: BlockIdx,
    pub hops: u32,
    pub assignments: Vec<Assignment>,
    pub state: CommunityState,
}

impl Community {
    /// Blocks contributing at least one member.
    pub fn participants(&self) -> BTreeSet<BlockIdx> {
        self.assignments.iter().map(|a| a.block).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EscalationOutcome {
    /// Missing roles filled at `block` after `hops` levels.
    Resolved {
        block: BlockIdx,
        hops: u32,
        assignments: Vec<Assignment>,
    },
    Failed {
        hops: u32,
    },
}

/// Forwards `missing` roles upward from `block` until some level can fill
/// all of them. Members already in `reserved` are not reused.
pub fn escalate(
    tree: &Tree,
    block: BlockIdx,
    missing: &[Role],
    reserved: &BTreeSet<String>,
) -> EscalationOutcome {
    let mut from = block;
    let mut hops = 0;
    while let Some(parent) = tree.blocks[from].parent {
        hops += 1;
        let mut pool = alloc::vec![parent];
        pool.extend(
            tree.blocks[parent]
                .children
                .iter()
                .copied()
                .filter(|&c| c != from),
        );
        let (assignments, still_missing) = match_in(tree, &pool, missing, reserved);
        if still_missing.is_empty() {
            return EscalationOutcome::Resolved {
                block: parent,
                hops,
                assignments,
            };
        }
        from = parent;
    }
    EscalationOutcome::Failed { hops }
}

/// Local match followed by escalation of whatever is missing. Nothing is
/// committed; the caller activates the returned community.
pub fn resolve_request(tree: &Tree, request: &RoleRequest) -> Result<Option<Community>> {
    let origin = tree
        .find(&request.origin_block)
        .ok_or_else(|| invalid(format!("unknown block {}", request.origin_block)))?;
    let (mut assignments, missing) = match_roles(tree, origin, request);
    let (resolved_at, hops) = if missing.is_empty() {
        (origin, 0)
    } else {
        let reserved = assignments.iter().map(|a| a.member.clone()).collect();
        match escalate(tree, origin, &missing, &reserved) {
            EscalationOutcome::Resolved {
                block,
                hops,
                assignments: upper,
            } => {
                assignments.extend(upper);
                (block, hops)
            }
            EscalationOutcome::Failed { .. } => return Ok(None),
        }
    };
    Ok(Some(Community {
        id: 0,
        request_id: request.id,
        origin,
        resolved_at,
        hops,
        assignments,
        state: CommunityState::Forming,
    }))
}

/// Marks every assigned member busy. All roles must already be assigned.
pub fn activate(tree: &mut Tree, community: &mut Community) -> Result<()> {
    if community.state != CommunityState::Forming {
        return Err(Error::InvalidState(format!(
            "community {} is not forming",
            community.id
        )));
    }
    for a in &community.assignments {
        tree.set_busy(a, true);
    }
    community.state = CommunityState::Active;
    Ok(())
}

/// Frees every assigned member.
pub fn release(tree: &mut Tree, community: &mut Community) -> Result<()> {
    if community.state != CommunityState::Active {
        return Err(Error::InvalidState(format!(
            "community {} is not active",
            community.id
        )));
    }
    for a in &community.assignments {
        tree.set_busy(a, false);
    }
    community.state = CommunityState::Released;
    Ok(())
}

/// A request arriving at `step` that keeps its community for `duration` steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Situation {
    pub step: usize,
    #[serde(flatten)]
    pub request: RoleRequest,
    #[serde(default = "default_duration")]
    pub duration: u32,
}

fn default_duration() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventOutcome {
    Resolved,
    Queued,
    Released,
    Failed,
}

impl EventOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            EventOutcome::Resolved => "resolved",
            EventOutcome::Queued => "queued",
            EventOutcome::Released => "released",
            EventOutcome::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsoEvent {
    pub step: usize,
    pub request_id: u32,
    pub block: String,
    pub outcome: EventOutcome,
    pub hops: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsoStats {
    pub requests: usize,
    pub resolved: usize,
    pub local_resolution_rate: f64,
    pub mean_escalation_hops: f64,
    pub failure_rate: f64,
    pub mean_busy_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FsoReport {
    pub stats: FsoStats,
    pub events: Vec<FsoEvent>,
    pub communities: Vec<Community>,
}

/// Steps the organisation through `situations` for `horizon` steps.
///
/// Per step: queue arrivals at their origin block, retry every pending
/// request in block order and FIFO order, record the busy fraction, then
/// count down active communities and release the expired ones. Requests
/// still pending at the end count as failed.
pub fn simulate_fso(
    root: &BlockSpec,
    situations: &[Situation],
    horizon: usize,
) -> Result<FsoReport> {
    let mut tree = Tree::build(root)?;
    let durations: BTreeMap<u32, u32> = situations
        .iter()
        .map(|s| (s.request.id, s.duration.max(1)))
        .collect();
    if durations.len() != situations.len() {
        return Err(invalid("duplicate request id"));
    }
    for s in situations {
        if tree.find(&s.request.origin_block).is_none() {
            return Err(invalid(format!("unknown block {}", s.request.origin_block)));
        }
    }
    let mut arrivals: Vec<&Situation> = situations.iter().collect();
    arrivals.sort_by_key(|s| (s.step, s.request.id));
    let mut arrivals = arrivals.into_iter().peekable();

    let total_members = tree.member_count();
    let mut events = Vec::new();
    let mut communities: Vec<Community> = Vec::new();
    let mut remaining: BTreeMap<u32, u32> = BTreeMap::new();
    let mut busy_sum = 0.0;
    let mut resolved_hops = Vec::new();
    let mut queued = BTreeSet::new();

    for step in 0..horizon {
        while let Some(s) = arrivals.next_if(|s| s.step <= step) {
            let idx = tree.find(&s.request.origin_block).expect("checked above");
            tree.blocks[idx].pending.push_back(s.request.clone());
        }
        for b in 0..tree.blocks.len() {
            let queue = core::mem::take(&mut tree.blocks[b].pending);
            let mut kept = VecDeque::new();
            for request in queue {
                match resolve_request(&tree, &request)? {
                    Some(mut community) => {
                        community.id = communities.len() as u32;
                        activate(&mut tree, &mut community)?;
                        remaining.insert(community.id, durations[&request.id]);
                        resolved_hops.push(community.hops);
                        events.push(FsoEvent {
                            step,
                            request_id: request.id,
                            block: tree.blocks[community.resolved_at].id.clone(),
                            outcome: EventOutcome::Resolved,
                            hops: community.hops,
                        });
                        communities.push(community);
                    }
                    None => {
                        if queued.insert(request.id) {
                            events.push(FsoEvent {
                                step,
                                request_id: request.id,
                                block: tree.blocks[b].id.clone(),
                                outcome: EventOutcome::Queued,
                                hops: tree.depth_of(b) as u32,
                            });
                        }
                        let mut request = request;
                        request.hops = tree.depth_of(b) as u32;
                        kept.push_back(request);
                    }
                }
            }
            tree.blocks[b].pending = kept;
        }
        if total_members > 0 {
            busy_sum += tree.busy_count() as f64 / total_members as f64;
        }
        let expired: Vec<u32> = remaining
            .iter_mut()
            .filter_map(|(id, left)| {
                *left -= 1;
                (*left == 0).then_some(*id)
            })
            .collect();
        for id in expired {
            remaining.remove(&id);
            let community = &mut communities[id as usize];
            release(&mut tree, community)?;
            events.push(FsoEvent {
                step,
                request_id: community.request_id,
                block: tree.blocks[community.resolved_at].id.clone(),
                outcome: EventOutcome::Released,
                hops: community.hops,
            });
        }
    }

    let mut failed = 0;
    for b in &tree.blocks {
        for request in &b.pending {
            failed += 1;
            events.push(FsoEvent {
                step: horizon,
                request_id: request.id,
                block: b.id.clone(),
                outcome: EventOutcome::Failed,
                hops: request.hops,
            });
        }
    }
    let requests = situations.iter().filter(|s| s.step < horizon).count();
    let resolved = resolved_hops.len();
    let rate = |x: usize| {
        if requests == 0 {
            0.0
        } else {
            x as f64 / requests as f64
        }
    };
    let stats = FsoStats {
        requests,
        resolved,
        local_resolution_rate: rate(resolved_hops.iter().filter(|&&h| h == 0).count()),
        mean_escalation_hops: if resolved == 0 {
            0.0
        } else {
            resolved_hops.iter().map(|&h| f64::from(h)).sum::<f64>() / resolved as f64
        },
        failure_rate: rate(failed),
        mean_busy_fraction: if horizon == 0 {
            0.0
        } else {
            busy_sum / horizon as f64
        },
    };
    Ok(FsoReport {
        stats,
        events,
        communities,
    })
}

/// Smart houses under one tele-care centre. Houses only sense; every
/// response role lives at the centre, so each request escalates once.
pub fn telecare_preset(houses: usize, responders: &[(&str, &[&str])]) -> BlockSpec {
    let centre = responders
        .iter()
        .map(|(id, caps)| Member::new(id, caps))
        .collect();
    let children = (0..houses)
        .map(|i| {
            let id = format!("house-{i}");
            let sensor = Member::new(&format!("{id}-sensor"), &["sensing"]);
            BlockSpec::new(&id, alloc::vec![sensor], Vec::new())
        })
        .collect();
    BlockSpec::new("telecare", centre, children)
}
