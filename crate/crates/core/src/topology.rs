//! Parent selection for the mIAB: RSRP filtering, the RSRP-only policy,
//! the load-aware policy, and atomic re-parenting.

use serde::{Deserialize, Serialize};

use crate::scenario::NodeId;
use crate::traffic::TrafficState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaPolicy {
    #[default]
    Standard,
    LoadAware,
}

impl TaPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            TaPolicy::Standard => "standard",
            TaPolicy::LoadAware => "load_aware",
        }
    }
}

/// How the load-aware loop treats `parent` while it scans candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopSemantics {
    /// `parent` is reassigned mid-loop; later candidates are compared
    /// against the most recently adopted one.
    #[default]
    Sequential,
    /// Every candidate is compared against the original parent and the
    /// least loaded passing candidate wins.
    BestCandidate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialParent {
    /// Smallest ground distance at the start of the run.
    #[default]
    Nearest,
    /// Highest RSRP at the start of the run.
    Strongest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaConfig {
    pub policy: TaPolicy,
    pub min_rsrp_dbm: f64,
    pub min_rsrp_diff_db: f64,
    pub period_slots: u64,
    pub hysteresis_db: f64,
    pub l3_filter_coefficient: f64,
    pub semantics: LoopSemantics,
    pub initial_parent: InitialParent,
}

impl Default for TaConfig {
    fn default() -> Self {
        Self {
            policy: TaPolicy::Standard,
            min_rsrp_dbm: -110.0,
            min_rsrp_diff_db: 10.0,
            period_slots: 400,
            hysteresis_db: 3.0,
            l3_filter_coefficient: 0.5,
            semantics: LoopSemantics::Sequential,
            initial_parent: InitialParent::Nearest,
        }
    }
}

impl TaConfig {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if !(self.min_rsrp_diff_db >= 0.0) {
            errors.push(format!(
                "ta.min_rsrp_diff_db must be >= 0 (got {})",
                self.min_rsrp_diff_db
            ));
        }
        if self.period_slots == 0 {
            errors.push("ta.period_slots must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.l3_filter_coefficient) {
            errors.push(format!(
                "ta.l3_filter_coefficient must lie in [0, 1] (got {})",
                self.l3_filter_coefficient
            ));
        }
        if !(self.hysteresis_db >= 0.0) {
            errors.push(format!("ta.hysteresis_db must be >= 0 (got {})", self.hysteresis_db));
        }
        if !self.min_rsrp_dbm.is_finite() {
            errors.push("ta.min_rsrp_dbm must be finite".into());
        }
    }
}

/// A donor as seen by the selection policies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DonorCandidate {
    pub donor_id: NodeId,
    /// Buffered DL bits at the donor.
    pub bits: u64,
    /// Filtered RSRP.
    pub rsrp_dbm: f64,
}

/// First-order measurement filter in the dB domain. `None` means no
/// previous sample, in which case the new sample passes through.
pub fn filter_rsrp(previous: Option<f64>, instantaneous: f64, a: f64) -> f64 {
    match previous {
        Some(prev) => (1.0 - a) * prev + a * instantaneous,
        None => instantaneous,
    }
}

/// Strongest donor that beats the parent by more than the hysteresis; the
/// parent otherwise. Ties go to the lowest id.
pub fn update_parent_standard(
    parent: &DonorCandidate,
    candidates: &[DonorCandidate],
    hysteresis_db: f64,
) -> NodeId {
    let mut best: Option<&DonorCandidate> = None;
    for c in candidates {
        if c.donor_id == parent.donor_id || c.rsrp_dbm <= parent.rsrp_dbm + hysteresis_db {
            continue;
        }
        best = match best {
            Some(b)
                if b.rsrp_dbm > c.rsrp_dbm
                    || (b.rsrp_dbm == c.rsrp_dbm && b.donor_id < c.donor_id) =>
            {
                Some(b)
            }
            _ => Some(c),
        };
    }
    best.map_or(parent.donor_id, |b| b.donor_id)
}

fn passes_gates(candidate: &DonorCandidate, parent: &DonorCandidate, cfg: &TaConfig) -> bool {
    candidate.bits < parent.bits
        && candidate.rsrp_dbm > cfg.min_rsrp_dbm
        && candidate.rsrp_dbm > parent.rsrp_dbm - cfg.min_rsrp_diff_db
}

/// Load-aware parent update. Candidates are scanned in ascending donor id;
/// a candidate is adopted when it is less loaded than the current parent,
/// above the minimum RSRP, and not more than `min_rsrp_diff_db` weaker.
pub fn update_parent_load_aware(
    parent: &DonorCandidate,
    candidates: &[DonorCandidate],
    cfg: &TaConfig,
) -> NodeId {
    let mut ordered: Vec<&DonorCandidate> = candidates.iter().collect();
    ordered.sort_by_key(|c| c.donor_id);
    match cfg.semantics {
        LoopSemantics::Sequential => {
            let mut current = *parent;
            for c in ordered {
                if c.donor_id != current.donor_id && passes_gates(c, &current, cfg) {
                    current = *c;
                }
            }
            current.donor_id
        }
        LoopSemantics::BestCandidate => ordered
            .into_iter()
            .filter(|c| c.donor_id != parent.donor_id && passes_gates(c, parent, cfg))
            .min_by(|a, b| {
                a.bits
                    .cmp(&b.bits)
                    .then(b.rsrp_dbm.total_cmp(&a.rsrp_dbm))
                    .then(a.donor_id.cmp(&b.donor_id))
            })
            .map_or(parent.donor_id, |c| c.donor_id),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachmentRecord {
    pub donor_id: NodeId,
    pub start_slot: u64,
    /// Exclusive end.
    pub end_slot: u64,
}

impl AttachmentRecord {
    pub fn slots(&self) -> u64 {
        self.end_slot - self.start_slot
    }
}

/// Contiguous attachment intervals covering the run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachmentLog {
    closed: Vec<AttachmentRecord>,
    current: NodeId,
    since: u64,
}

impl AttachmentLog {
    pub fn new(initial: NodeId, start_slot: u64) -> Self {
        Self {
            closed: Vec::new(),
            current: initial,
            since: start_slot,
        }
    }

    pub fn current(&self) -> NodeId {
        self.current
    }

    /// Switches parent effective from `slot`.
    pub fn switch(&mut self, new: NodeId, slot: u64) {
        if new == self.current {
            return;
        }
        if slot > self.since {
            self.closed.push(AttachmentRecord {
                donor_id: self.current,
                start_slot: self.since,
                end_slot: slot,
            });
        }
        self.current = new;
        self.since = slot;
    }

    /// All intervals, with the open one closed at `end_slot`.
    pub fn records(&self, end_slot: u64) -> Vec<AttachmentRecord> {
        let mut out = self.closed.clone();
        if end_slot > self.since {
            out.push(AttachmentRecord {
                donor_id: self.current,
                start_slot: self.since,
                end_slot,
            });
        }
        out
    }

    pub fn switch_count(&self) -> usize {
        self.closed.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaEvent {
    pub slot: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub moved_bits: u64,
}

/// Re-parents the mIAB within one slot: the backhaul DL backlog follows it
/// to the new donor and the attachment log rolls over. The MT's UL queues
/// need no move since they always drain towards the current parent.
pub fn execute_ta(
    traffic: &mut TrafficState,
    attachments: &mut AttachmentLog,
    old: NodeId,
    new: NodeId,
    slot: u64,
) -> Option<TaEvent> {
    if old == new {
        return None;
    }
    let moved_bits = traffic.move_backhaul(old, new);
    attachments.switch(new, slot);
    Some(TaEvent {
        slot,
        from: old,
        to: new,
        moved_bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(id: u32, bits: u64, rsrp: f64) -> DonorCandidate {
        DonorCandidate {
            donor_id: NodeId(id),
            bits,
            rsrp_dbm: rsrp,
        }
    }

    fn cfg(min_rsrp: f64, diff: f64) -> TaConfig {
        TaConfig {
            policy: TaPolicy::LoadAware,
            min_rsrp_dbm: min_rsrp,
            min_rsrp_diff_db: diff,
            ..Default::default()
        }
    }

    #[test]
    fn filter_examples() {
        assert_eq!(filter_rsrp(Some(-80.0), -90.0, 1.0), -90.0);
        assert_eq!(filter_rsrp(Some(-80.0), -90.0, 0.0), -80.0);
        assert_eq!(filter_rsrp(Some(-80.0), -90.0, 0.5), -85.0);
        assert_eq!(filter_rsrp(None, -90.0, 0.2), -90.0);
    }

    #[test]
    fn standard_examples() {
        let parent = cand(0, 0, -80.0);
        assert_eq!(update_parent_standard(&parent, &[parent, cand(1, 0, -75.0)], 3.0), NodeId(1));
        assert_eq!(update_parent_standard(&parent, &[parent, cand(1, 0, -78.0)], 3.0), NodeId(0));
        assert_eq!(
            update_parent_standard(&parent, &[cand(1, 0, -80.0), cand(2, 0, -80.0)], 0.0),
            NodeId(0)
        );
        // strongest wins, ties to the lowest id
        assert_eq!(
            update_parent_standard(
                &parent,
                &[cand(2, 0, -70.0), cand(1, 0, -70.0), cand(3, 0, -72.0)],
                3.0
            ),
            NodeId(1)
        );
    }

    #[test]
    fn load_aware_examples() {
        let c = cfg(-100.0, 10.0);
        let parent = cand(0, 10_000, -80.0);
        assert_eq!(update_parent_load_aware(&parent, &[cand(1, 5_000, -85.0)], &c), NodeId(1));
        assert_eq!(update_parent_load_aware(&parent, &[cand(1, 12_000, -70.0)], &c), NodeId(0));
        assert_eq!(update_parent_load_aware(&parent, &[cand(1, 0, -105.0)], &c), NodeId(0));
        let a = cand(1, 4_000, -88.0);
        let b = cand(2, 2_000, -89.0);
        assert_eq!(update_parent_load_aware(&parent, &[a, b], &c), NodeId(2));
        // order of the input slice does not matter
        assert_eq!(update_parent_load_aware(&parent, &[b, a], &c), NodeId(2));
    }

    #[test]
    fn sequential_and_best_candidate_differ() {
        // B passes against the original parent but not against A
        let parent = cand(0, 10_000, -80.0);
        let a = cand(1, 4_000, -75.0);
        let b = cand(2, 3_000, -88.0);
        let seq = cfg(-110.0, 10.0);
        let best = TaConfig {
            semantics: LoopSemantics::BestCandidate,
            ..seq.clone()
        };
        assert_eq!(update_parent_load_aware(&parent, &[a, b], &seq), NodeId(1));
        assert_eq!(update_parent_load_aware(&parent, &[a, b], &best), NodeId(2));
    }

    #[test]
    fn attachment_log_partitions_time() {
        let mut log = AttachmentLog::new(NodeId(0), 0);
        log.switch(NodeId(2), 400);
        log.switch(NodeId(2), 800);
        log.switch(NodeId(0), 1200);
        let recs = log.records(1500);
        assert_eq!(
            recs.iter().map(|r| (r.donor_id.0, r.start_slot, r.end_slot)).collect::<Vec<_>>(),
            vec![(0, 0, 400), (2, 400, 1200), (0, 1200, 1500)]
        );
        assert_eq!(recs.iter().map(|r| r.slots()).sum::<u64>(), 1500);
    }

    #[test]
    fn validation() {
        let mut errs = Vec::new();
        TaConfig {
            min_rsrp_diff_db: -1.0,
            period_slots: 0,
            ..Default::default()
        }
        .validate(&mut errs);
        assert_eq!(errs.len(), 2);
        assert!(errs[0].contains("ta.min_rsrp_diff_db"));
    }
}
