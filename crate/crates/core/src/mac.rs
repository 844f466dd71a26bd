//! Slot timing, round-robin RB scheduling, the mIAB half-duplex rule and
//! SINR-to-bits link adaptation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::scenario::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "DL")]
    Dl,
    #[serde(rename = "UL")]
    Ul,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Dl => "DL",
            Direction::Ul => "UL",
        }
    }

    fn index(self) -> usize {
        match self {
            Direction::Dl => 0,
            Direction::Ul => 1,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn duplex_direction(slot_index: u64, pattern: &[Direction]) -> Direction {
    pattern[(slot_index % pattern.len() as u64) as usize]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    #[default]
    RoundRobin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacConfig {
    pub duplex_pattern: Vec<Direction>,
    pub se_cap: f64,
    pub overhead_factor: f64,
    pub scheduler: SchedulerKind,
    pub n_rbs: u32,
    pub subcarriers_per_rb: u32,
    pub symbols_per_slot: u32,
    pub slot_duration_s: f64,
}

impl Default for MacConfig {
    fn default() -> Self {
        Self {
            duplex_pattern: vec![Direction::Dl, Direction::Ul],
            se_cap: 7.4,
            overhead_factor: 0.75,
            scheduler: SchedulerKind::RoundRobin,
            n_rbs: 22,
            subcarriers_per_rb: 12,
            symbols_per_slot: 14,
            slot_duration_s: 0.00025,
        }
    }
}

impl MacConfig {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if self.duplex_pattern.is_empty() {
            errors.push("mac.duplex_pattern must not be empty".into());
        }
        if !(self.se_cap > 0.0) {
            errors.push(format!("mac.se_cap must be > 0 (got {})", self.se_cap));
        }
        if !(self.overhead_factor > 0.0 && self.overhead_factor <= 1.0) {
            errors.push(format!(
                "mac.overhead_factor must lie in (0, 1] (got {})",
                self.overhead_factor
            ));
        }
        if self.n_rbs == 0 || self.n_rbs > 255 {
            errors.push(format!("mac.n_rbs must lie in [1, 255] (got {})", self.n_rbs));
        }
        if self.subcarriers_per_rb == 0 || self.symbols_per_slot == 0 {
            errors.push("mac.subcarriers_per_rb and mac.symbols_per_slot must be > 0".into());
        }
        if !(self.slot_duration_s > 0.0) {
            errors.push(format!(
                "mac.slot_duration_s must be > 0 (got {})",
                self.slot_duration_s
            ));
        }
    }

    pub fn subcarriers_total(&self) -> u32 {
        self.n_rbs * self.subcarriers_per_rb
    }

    pub fn slot(&self, slot_index: u64) -> SlotContext {
        SlotContext {
            slot_index,
            direction: duplex_direction(slot_index, &self.duplex_pattern),
            duration_s: self.slot_duration_s,
            n_rbs: self.n_rbs,
            symbols_per_slot: self.symbols_per_slot,
            subcarriers_per_rb: self.subcarriers_per_rb,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotContext {
    pub slot_index: u64,
    pub direction: Direction,
    pub duration_s: f64,
    pub n_rbs: u32,
    pub symbols_per_slot: u32,
    pub subcarriers_per_rb: u32,
}

impl SlotContext {
    pub fn resource_elements_per_rb(&self) -> u32 {
        self.subcarriers_per_rb * self.symbols_per_slot
    }
}

/// A directed radio link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkId {
    pub tx: NodeId,
    pub rx: NodeId,
}

impl LinkId {
    pub fn new(tx: NodeId, rx: NodeId) -> Self {
        Self { tx, rx }
    }

    pub fn involves(&self, node: NodeId) -> bool {
        self.tx == node || self.rx == node
    }
}

/// A contiguous run of RBs granted to one link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbGrant {
    pub link: LinkId,
    pub first_rb: u32,
    pub n_rbs: u32,
}

impl RbGrant {
    pub fn rbs(&self) -> std::ops::Range<u32> {
        self.first_rb..self.first_rb + self.n_rbs
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbAllocation {
    pub cell: NodeId,
    pub direction: Direction,
    pub grants: Vec<RbGrant>,
}

impl RbAllocation {
    pub fn empty(cell: NodeId, direction: Direction) -> Self {
        Self {
            cell,
            direction,
            grants: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.grants.is_empty()
    }

    pub fn rbs_of(&self, link: LinkId) -> Option<std::ops::Range<u32>> {
        self.grants.iter().find(|g| g.link == link).map(RbGrant::rbs)
    }

    pub fn used_rbs(&self) -> u32 {
        self.grants.iter().map(|g| g.n_rbs).sum()
    }

    /// RB sets are pairwise disjoint and inside `[0, n_rbs)`.
    pub fn is_valid(&self, n_rbs: u32) -> bool {
        let mut used = vec![false; n_rbs as usize];
        for g in &self.grants {
            if g.n_rbs == 0 || g.first_rb + g.n_rbs > n_rbs {
                return false;
            }
            for rb in g.rbs() {
                if std::mem::replace(&mut used[rb as usize], true) {
                    return false;
                }
            }
        }
        true
    }
}

/// Splits `n_rbs` contiguous RBs as evenly as possible over the links with
/// buffered data, starting the order at `offset` (mod the active count).
pub fn schedule_rbs(
    cell: NodeId,
    direction: Direction,
    active_links: &[(LinkId, u64)],
    offset: usize,
    n_rbs: u32,
) -> RbAllocation {
    let active: Vec<LinkId> = active_links
        .iter()
        .filter(|(_, bits)| *bits > 0)
        .map(|(l, _)| *l)
        .collect();
    let mut alloc = RbAllocation::empty(cell, direction);
    let n = active.len();
    if n == 0 {
        return alloc;
    }
    let base = n_rbs as usize / n;
    let extra = n_rbs as usize % n;
    let mut next_rb = 0u32;
    for k in 0..n {
        let size = base + usize::from(k < extra);
        if size == 0 {
            break;
        }
        let link = active[(offset + k) % n];
        alloc.grants.push(RbGrant {
            link,
            first_rb: next_rb,
            n_rbs: size as u32,
        });
        next_rb += size as u32;
    }
    alloc
}

/// Round-robin scheduler whose start offset advances by one link every
/// time a cell is scheduled in a direction.
#[derive(Clone, Debug, Default)]
pub struct RoundRobinScheduler {
    offsets: HashMap<(NodeId, Direction), usize>,
}

impl RoundRobinScheduler {
    pub fn schedule(
        &mut self,
        cell: NodeId,
        direction: Direction,
        active_links: &[(LinkId, u64)],
        n_rbs: u32,
    ) -> RbAllocation {
        let offset = self.offsets.entry((cell, direction)).or_insert(0);
        let alloc = schedule_rbs(cell, direction, active_links, *offset, n_rbs);
        if !alloc.is_empty() {
            *offset = offset.wrapping_add(1);
        }
        alloc
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MiabRole {
    /// MT talks to the parent donor; DU is silent.
    Backhaul,
    /// DU talks to the passengers; MT is silent.
    Access,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadioRole {
    Idle,
    Transmit,
    Receive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiabDuplexState {
    pub mt: RadioRole,
    pub du: RadioRole,
}

impl MiabDuplexState {
    /// MT and DU never take opposite transmit/receive roles.
    pub fn is_half_duplex(&self) -> bool {
        !matches!(
            (self.mt, self.du),
            (RadioRole::Transmit, RadioRole::Receive) | (RadioRole::Receive, RadioRole::Transmit)
        )
    }

    pub fn from_allocations(allocs: &[RbAllocation], mt: NodeId, du: NodeId) -> Self {
        let mut state = MiabDuplexState {
            mt: RadioRole::Idle,
            du: RadioRole::Idle,
        };
        for g in allocs.iter().flat_map(|a| a.grants.iter()) {
            if g.link.tx == mt {
                state.mt = RadioRole::Transmit;
            }
            if g.link.rx == mt {
                state.mt = RadioRole::Receive;
            }
            if g.link.tx == du {
                state.du = RadioRole::Transmit;
            }
            if g.link.rx == du {
                state.du = RadioRole::Receive;
            }
        }
        state
    }
}

/// Picks the mIAB role per slot: backhaul and access take turns having
/// priority in each direction, and the prioritised role yields when it has
/// nothing buffered.
#[derive(Clone, Debug, Default)]
pub struct HalfDuplexArbiter {
    turns: [u64; 2],
}

impl HalfDuplexArbiter {
    pub fn priority(&self, direction: Direction) -> MiabRole {
        if self.turns[direction.index()] % 2 == 0 {
            MiabRole::Backhaul
        } else {
            MiabRole::Access
        }
    }

    pub fn choose_role(
        &mut self,
        direction: Direction,
        backhaul_bits: u64,
        access_bits: u64,
    ) -> Option<MiabRole> {
        let preferred = self.priority(direction);
        self.turns[direction.index()] += 1;
        let has = |role| match role {
            MiabRole::Backhaul => backhaul_bits > 0,
            MiabRole::Access => access_bits > 0,
        };
        let other = match preferred {
            MiabRole::Backhaul => MiabRole::Access,
            MiabRole::Access => MiabRole::Backhaul,
        };
        if has(preferred) {
            Some(preferred)
        } else if has(other) {
            Some(other)
        } else {
            None
        }
    }
}

/// Drops the grants that contradict `role`: DU-cell grants unless the mIAB
/// is in access role, MT grants unless it is in backhaul role.
pub fn enforce_half_duplex(
    role: Option<MiabRole>,
    mt: NodeId,
    du: NodeId,
    proposed: Vec<RbAllocation>,
) -> Vec<RbAllocation> {
    proposed
        .into_iter()
        .map(|mut alloc| {
            alloc.grants.retain(|g| {
                let access = alloc.cell == du || g.link.involves(du);
                let backhaul = g.link.involves(mt);
                match role {
                    Some(MiabRole::Backhaul) => !access,
                    Some(MiabRole::Access) => !backhaul,
                    None => !access && !backhaul,
                }
            });
            alloc
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkAdaptation {
    pub se_cap: f64,
    pub overhead_factor: f64,
}

impl From<&MacConfig> for LinkAdaptation {
    fn from(cfg: &MacConfig) -> Self {
        Self {
            se_cap: cfg.se_cap,
            overhead_factor: cfg.overhead_factor,
        }
    }
}

/// Bits deliverable in one slot over `n_rbs` RBs at the given SINR.
pub fn link_capacity_bits(sinr: f64, n_rbs: u32, slot: &SlotContext, la: &LinkAdaptation) -> u64 {
    if !(sinr > 0.0) || n_rbs == 0 {
        return 0;
    }
    let res = (n_rbs * slot.resource_elements_per_rb()) as f64;
    let se = (1.0 + sinr).log2().min(la.se_cap);
    (res * se * la.overhead_factor).floor() as u64
}
