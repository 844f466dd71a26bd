//! CBR traffic, per-hop FIFO buffers, store-and-forward relaying through the
//! mIAB, and the donor load figure read by the load-aware policy.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::mac::{Direction, LinkId};
use crate::scenario::{NodeId, NodeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hop {
    /// Donor to one of its pedestrians.
    DonorAccessDl,
    /// Parent donor to the mIAB MT.
    DonorBackhaulDl,
    /// mIAB DU to a passenger.
    DuAccessDl,
    /// mIAB MT to the parent donor.
    MtBackhaulUl,
    /// Pedestrian to its donor.
    UeAccessUl,
    /// Passenger to the mIAB DU.
    PassengerAccessUl,
}

impl Hop {
    pub fn direction(self) -> Direction {
        match self {
            Hop::DonorAccessDl | Hop::DonorBackhaulDl | Hop::DuAccessDl => Direction::Dl,
            Hop::MtBackhaulUl | Hop::UeAccessUl | Hop::PassengerAccessUl => Direction::Ul,
        }
    }

    /// Buffers whose bits count towards a donor's load.
    pub fn is_donor_dl(self) -> bool {
        matches!(self, Hop::DonorAccessDl | Hop::DonorBackhaulDl)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UeClass {
    Passenger,
    Pedestrian,
}

impl UeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            UeClass::Passenger => "passenger",
            UeClass::Pedestrian => "pedestrian",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub id: u64,
    pub flow: FlowId,
    pub size_bits: u64,
    pub created_slot: u64,
    pub delivered_slot: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Queued {
    packet: Packet,
    remaining_bits: u64,
}

/// A piece of a packet sent over one hop in one slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fragment {
    pub packet: Packet,
    pub bits: u64,
    /// This fragment carried the last bits of the packet.
    pub completes: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowBuffer {
    pub hop: Hop,
    pub owner: NodeId,
    pub flow: FlowId,
    queue: VecDeque<Queued>,
    total_bits: u64,
}

impl FlowBuffer {
    pub fn new(hop: Hop, owner: NodeId, flow: FlowId) -> Self {
        Self {
            hop,
            owner,
            flow,
            queue: VecDeque::new(),
            total_bits: 0,
        }
    }

    pub fn total_bits(&self) -> u64 {
        self.total_bits
    }

    pub fn is_empty(&self) -> bool {
        self.total_bits == 0
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn push(&mut self, packet: Packet) {
        self.total_bits += packet.size_bits;
        self.queue.push_back(Queued {
            packet,
            remaining_bits: packet.size_bits,
        });
    }

    pub fn head(&self) -> Option<(&Packet, u64)> {
        self.queue.front().map(|q| (&q.packet, q.remaining_bits))
    }

    fn head_key(&self) -> Option<(u64, u64)> {
        self.queue
            .front()
            .map(|q| (q.packet.created_slot, q.packet.id))
    }

    /// Sends up to `capacity_bits` in FIFO order, splitting the last packet
    /// touched if it does not fit.
    pub fn drain(&mut self, capacity_bits: u64) -> Vec<Fragment> {
        let mut out = Vec::new();
        self.drain_into(capacity_bits, &mut out);
        out
    }

    fn drain_into(&mut self, mut capacity_bits: u64, out: &mut Vec<Fragment>) -> u64 {
        let mut sent = 0;
        while capacity_bits > 0 {
            let Some(head) = self.queue.front_mut() else {
                break;
            };
            let bits = head.remaining_bits.min(capacity_bits);
            head.remaining_bits -= bits;
            capacity_bits -= bits;
            self.total_bits -= bits;
            sent += bits;
            let completes = head.remaining_bits == 0;
            out.push(Fragment {
                packet: head.packet,
                bits,
                completes,
            });
            if completes {
                self.queue.pop_front();
            }
        }
        sent
    }

    /// Moves every queued packet of `other` in front of this buffer's own.
    fn prepend_from(&mut self, other: &mut FlowBuffer) -> u64 {
        let moved = other.total_bits;
        let mut queue = std::mem::take(&mut other.queue);
        queue.append(&mut self.queue);
        self.queue = queue;
        self.total_bits += moved;
        other.total_bits = 0;
        moved
    }
}

/// Free-standing form of [`FlowBuffer::drain`].
pub fn drain(buffer: &mut FlowBuffer, capacity_bits: u64) -> Vec<Fragment> {
    buffer.drain(capacity_bits)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub id: FlowId,
    pub ue: NodeId,
    pub class: UeClass,
    pub direction: Direction,
    pub route: Vec<Hop>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub packet_size_bits: u64,
    pub inter_arrival_slots: u64,
    pub pedestrians_enabled: bool,
    pub passengers_enabled: bool,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            packet_size_bits: 4096,
            inter_arrival_slots: 4,
            pedestrians_enabled: true,
            passengers_enabled: true,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if self.packet_size_bits == 0 {
            errors.push("traffic.packet_size_bits must be > 0".into());
        }
        if self.inter_arrival_slots == 0 {
            errors.push("traffic.inter_arrival_slots must be > 0".into());
        }
    }

    pub fn enabled(&self, class: UeClass) -> bool {
        match class {
            UeClass::Passenger => self.passengers_enabled,
            UeClass::Pedestrian => self.pedestrians_enabled,
        }
    }

    /// Offered rate of one flow in bit/s.
    pub fn offered_bps(&self, slot_duration_s: f64) -> f64 {
        self.packet_size_bits as f64 / (self.inter_arrival_slots as f64 * slot_duration_s)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowLedger {
    pub offered_bits: u64,
    pub delivered_bits: u64,
    pub dropped_bits: u64,
    pub delivered_packets: u64,
    pub latency_slots_sum: u64,
    pub last_delivered_packet: Option<u64>,
    pub fifo_violations: u64,
}

/// Bits that reached their destination this slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub flow: FlowId,
    pub bits: u64,
    /// `(packet id, latency in slots)` when the fragment completed a packet.
    pub completed: Option<(u64, u64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BufferId(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConservationReport {
    pub offered: u64,
    pub delivered: u64,
    pub buffered: u64,
    pub dropped: u64,
}

impl ConservationReport {
    pub fn holds(&self) -> bool {
        self.offered == self.delivered + self.buffered + self.dropped
    }
}

#[derive(Clone, Debug)]
pub struct TrafficState {
    cfg: TrafficConfig,
    flows: Vec<Flow>,
    buffers: Vec<FlowBuffer>,
    index: HashMap<(NodeId, FlowId, usize), BufferId>,
    link_index: HashMap<LinkId, Vec<BufferId>>,
    /// Bits of a partially received packet at the receiving end of each
    /// relay hop, indexed by `[flow][hop]`.
    reassembly: Vec<Vec<u64>>,
    ledgers: Vec<FlowLedger>,
    abandoned: Vec<bool>,
    next_packet_id: u64,
    donors: Vec<NodeId>,
    du: NodeId,
    mt: NodeId,
    home_donor: HashMap<NodeId, NodeId>,
}

impl TrafficState {
    /// Creates one DL and one UL flow per terminal and every buffer those
    /// flows can ever occupy.
    pub fn new(nodes: &NodeSet, cfg: &TrafficConfig) -> Self {
        let mut state = TrafficState {
            cfg: cfg.clone(),
            flows: Vec::new(),
            buffers: Vec::new(),
            index: HashMap::new(),
            link_index: HashMap::new(),
            reassembly: Vec::new(),
            ledgers: Vec::new(),
            abandoned: Vec::new(),
            next_packet_id: 0,
            donors: nodes.donors.clone(),
            du: nodes.du,
            mt: nodes.mt,
            home_donor: HashMap::new(),
        };
        for &p in &nodes.passengers {
            state.add_flow(p, UeClass::Passenger, Direction::Dl);
            state.add_flow(p, UeClass::Passenger, Direction::Ul);
        }
        for &p in &nodes.pedestrians {
            let donor = nodes.node(p).home_donor.expect("pedestrian without donor");
            state.home_donor.insert(p, donor);
            state.add_flow(p, UeClass::Pedestrian, Direction::Dl);
            state.add_flow(p, UeClass::Pedestrian, Direction::Ul);
        }
        state
    }

    fn add_flow(&mut self, ue: NodeId, class: UeClass, direction: Direction) {
        let id = FlowId(self.flows.len() as u32);
        let route = match (class, direction) {
            (UeClass::Pedestrian, Direction::Dl) => vec![Hop::DonorAccessDl],
            (UeClass::Pedestrian, Direction::Ul) => vec![Hop::UeAccessUl],
            (UeClass::Passenger, Direction::Dl) => vec![Hop::DonorBackhaulDl, Hop::DuAccessDl],
            (UeClass::Passenger, Direction::Ul) => vec![Hop::PassengerAccessUl, Hop::MtBackhaulUl],
        };
        for (h, hop) in route.iter().enumerate() {
            let owners: Vec<NodeId> = match hop {
                Hop::DonorBackhaulDl => self.donors.clone(),
                Hop::DonorAccessDl => vec![self.home_donor[&ue]],
                Hop::DuAccessDl => vec![self.du],
                Hop::MtBackhaulUl => vec![self.mt],
                Hop::UeAccessUl | Hop::PassengerAccessUl => vec![ue],
            };
            for owner in owners {
                let bid = BufferId(self.buffers.len());
                self.buffers.push(FlowBuffer::new(*hop, owner, id));
                self.index.insert((owner, id, h), bid);
                let links: Vec<LinkId> = match hop {
                    Hop::DonorAccessDl | Hop::DuAccessDl => vec![LinkId::new(owner, ue)],
                    Hop::DonorBackhaulDl => vec![LinkId::new(owner, self.mt)],
                    Hop::UeAccessUl => vec![LinkId::new(ue, self.home_donor[&ue])],
                    Hop::PassengerAccessUl => vec![LinkId::new(ue, self.du)],
                    Hop::MtBackhaulUl => self
                        .donors
                        .iter()
                        .map(|&d| LinkId::new(self.mt, d))
                        .collect(),
                };
                for link in links {
                    self.link_index.entry(link).or_default().push(bid);
                }
            }
        }
        self.flows.push(Flow {
            id,
            ue,
            class,
            direction,
            route,
        });
        self.reassembly.push(vec![0; 2]);
        self.ledgers.push(FlowLedger::default());
        self.abandoned.push(false);
    }

    pub fn config(&self) -> &TrafficConfig {
        &self.cfg
    }

    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn flow(&self, id: FlowId) -> &Flow {
        &self.flows[id.0 as usize]
    }

    pub fn ledger(&self, id: FlowId) -> &FlowLedger {
        &self.ledgers[id.0 as usize]
    }

    pub fn buffers(&self) -> &[FlowBuffer] {
        &self.buffers
    }

    fn owner_of(&self, flow: &Flow, hop: Hop, parent: NodeId) -> NodeId {
        match hop {
            Hop::DonorAccessDl => self.home_donor[&flow.ue],
            Hop::DonorBackhaulDl => parent,
            Hop::DuAccessDl => self.du,
            Hop::MtBackhaulUl => self.mt,
            Hop::UeAccessUl | Hop::PassengerAccessUl => flow.ue,
        }
    }

    /// Buffer holding `flow`'s packets at route position `hop` under the
    /// given parent donor.
    pub fn buffer_of(&self, flow: FlowId, hop: usize, parent: NodeId) -> &FlowBuffer {
        let f = self.flow(flow);
        let owner = self.owner_of(f, f.route[hop], parent);
        &self.buffers[self.index[&(owner, flow, hop)].0]
    }

    /// Every 4th slot (by default) each enabled flow enqueues one packet at
    /// the head of its route.
    pub fn generate_cbr(&mut self, slot: u64, parent: NodeId) -> Vec<Packet> {
        if slot % self.cfg.inter_arrival_slots != 0 {
            return Vec::new();
        }
        let mut created = Vec::new();
        for fi in 0..self.flows.len() {
            let flow = &self.flows[fi];
            if self.abandoned[fi] || !self.cfg.enabled(flow.class) {
                continue;
            }
            let owner = self.owner_of(flow, flow.route[0], parent);
            let packet = Packet {
                id: self.next_packet_id,
                flow: flow.id,
                size_bits: self.cfg.packet_size_bits,
                created_slot: slot,
                delivered_slot: None,
            };
            self.next_packet_id += 1;
            let bid = self.index[&(owner, flow.id, 0)];
            self.buffers[bid.0].push(packet);
            self.ledgers[fi].offered_bits += packet.size_bits;
            created.push(packet);
        }
        created
    }

    pub fn link_bits(&self, link: LinkId) -> u64 {
        self.link_index
            .get(&link)
            .map_or(0, |ids| ids.iter().map(|b| self.buffers[b.0].total_bits).sum())
    }

    /// Sends up to `capacity_bits` over `link`, serving the oldest head of
    /// line first across the flows multiplexed on it, then relays or
    /// delivers what arrived. Returns the bits that left the sender.
    pub fn transmit(
        &mut self,
        link: LinkId,
        capacity_bits: u64,
        slot: u64,
        parent: NodeId,
        deliveries: &mut Vec<Delivery>,
    ) -> u64 {
        let Some(ids) = self.link_index.get(&link) else {
            return 0;
        };
        let ids = ids.clone();
        let mut remaining = capacity_bits;
        let mut fragments: Vec<(BufferId, Fragment)> = Vec::new();
        let mut scratch = Vec::new();
        while remaining > 0 {
            let next = ids
                .iter()
                .filter_map(|&b| self.buffers[b.0].head_key().map(|k| (k, b)))
                .min_by_key(|(k, _)| *k);
            let Some((_, bid)) = next else { break };
            let buf = &mut self.buffers[bid.0];
            // serve at most the head packet, then re-pick the oldest head
            let head_bits = buf.head().map_or(0, |(_, r)| r);
            scratch.clear();
            let sent = buf.drain_into(remaining.min(head_bits), &mut scratch);
            remaining -= sent;
            fragments.extend(scratch.iter().map(|f| (bid, *f)));
        }
        let sent = capacity_bits - remaining;
        for (bid, frag) in fragments {
            let hop_index = self.hop_index(bid);
            self.forward(frag, hop_index, slot, parent, deliveries);
        }
        sent
    }

    fn hop_index(&self, bid: BufferId) -> usize {
        let b = &self.buffers[bid.0];
        self.flow(b.flow)
            .route
            .iter()
            .position(|h| *h == b.hop)
            .expect("buffer hop not on its flow route")
    }

    /// Handles a fragment that crossed route position `hop_index`: relays
    /// re-enqueue a packet at the next hop once it is fully reassembled,
    /// the last hop delivers.
    pub fn forward(
        &mut self,
        frag: Fragment,
        hop_index: usize,
        slot: u64,
        parent: NodeId,
        deliveries: &mut Vec<Delivery>,
    ) {
        let fi = frag.packet.flow.0 as usize;
        if self.abandoned[fi] {
            let partial = std::mem::take(&mut self.reassembly[fi][hop_index]);
            self.ledgers[fi].dropped_bits += frag.bits + partial;
            return;
        }
        let last_hop = hop_index + 1 == self.flows[fi].route.len();
        if last_hop {
            let ledger = &mut self.ledgers[fi];
            ledger.delivered_bits += frag.bits;
            let completed = if frag.completes {
                let latency = slot - frag.packet.created_slot;
                ledger.delivered_packets += 1;
                ledger.latency_slots_sum += latency;
                if ledger
                    .last_delivered_packet
                    .is_some_and(|last| last >= frag.packet.id)
                {
                    ledger.fifo_violations += 1;
                }
                ledger.last_delivered_packet = Some(frag.packet.id);
                Some((frag.packet.id, latency))
            } else {
                None
            };
            deliveries.push(Delivery {
                flow: frag.packet.flow,
                bits: frag.bits,
                completed,
            });
            return;
        }
        self.reassembly[fi][hop_index] += frag.bits;
        if frag.completes {
            self.reassembly[fi][hop_index] -= frag.packet.size_bits;
            let flow = &self.flows[fi];
            let next = hop_index + 1;
            let owner = self.owner_of(flow, flow.route[next], parent);
            let bid = self.index[&(owner, flow.id, next)];
            self.buffers[bid.0].push(frag.packet);
        }
    }

    /// Stops generation for `flow`; anything of it still in flight is
    /// dropped when it reaches the next hop.
    pub fn abandon_flow(&mut self, flow: FlowId) {
        self.abandoned[flow.0 as usize] = true;
    }

    /// Bits buffered at `donor` towards its pedestrians and the mIAB.
    pub fn donor_load_bits(&self, donor: NodeId) -> u64 {
        self.buffers
            .iter()
            .filter(|b| b.owner == donor && b.hop.is_donor_dl())
            .map(|b| b.total_bits)
            .sum()
    }

    pub fn donor_backhaul_bits(&self, donor: NodeId) -> u64 {
        self.hop_bits_at(donor, Hop::DonorBackhaulDl)
    }

    pub fn hop_bits_at(&self, owner: NodeId, hop: Hop) -> u64 {
        self.buffers
            .iter()
            .filter(|b| b.owner == owner && b.hop == hop)
            .map(|b| b.total_bits)
            .sum()
    }

    pub fn hop_bits(&self, hop: Hop) -> u64 {
        self.buffers
            .iter()
            .filter(|b| b.hop == hop)
            .map(|b| b.total_bits)
            .sum()
    }

    /// Moves the backhaul DL queues held for the mIAB at `old` to `new`,
    /// keeping FIFO order. Returns the bits moved.
    pub fn move_backhaul(&mut self, old: NodeId, new: NodeId) -> u64 {
        if old == new {
            return 0;
        }
        let mut moved = 0;
        for fi in 0..self.flows.len() {
            let flow = &self.flows[fi];
            if flow.route[0] != Hop::DonorBackhaulDl {
                continue;
            }
            let from = self.index[&(old, flow.id, 0)];
            let to = self.index[&(new, flow.id, 0)];
            let mut taken = std::mem::replace(
                &mut self.buffers[from.0],
                FlowBuffer::new(Hop::DonorBackhaulDl, old, flow.id),
            );
            moved += self.buffers[to.0].prepend_from(&mut taken);
        }
        moved
    }

    /// Everything queued anywhere plus partially reassembled packets.
    pub fn total_buffered_bits(&self) -> u64 {
        self.buffers.iter().map(|b| b.total_bits).sum::<u64>()
            + self.reassembly.iter().flatten().sum::<u64>()
    }

    pub fn flow_buffered_bits(&self, flow: FlowId) -> u64 {
        self.buffers
            .iter()
            .filter(|b| b.flow == flow)
            .map(|b| b.total_bits)
            .sum::<u64>()
            + self.reassembly[flow.0 as usize].iter().sum::<u64>()
    }

    pub fn conservation(&self, flow: FlowId) -> ConservationReport {
        let l = self.ledger(flow);
        ConservationReport {
            offered: l.offered_bits,
            delivered: l.delivered_bits,
            buffered: self.flow_buffered_bits(flow),
            dropped: l.dropped_bits,
        }
    }

    /// Checks bit conservation for every flow and the system as a whole.
    pub fn conservation_holds(&self) -> bool {
        let mut per_flow_buffered = vec![0u64; self.flows.len()];
        for b in &self.buffers {
            per_flow_buffered[b.flow.0 as usize] += b.total_bits;
        }
        self.ledgers.iter().enumerate().all(|(fi, l)| {
            let buffered = per_flow_buffered[fi] + self.reassembly[fi].iter().sum::<u64>();
            l.offered_bits == l.delivered_bits + buffered + l.dropped_bits
        })
    }

    pub fn totals(&self) -> ConservationReport {
        ConservationReport {
            offered: self.ledgers.iter().map(|l| l.offered_bits).sum(),
            delivered: self.ledgers.iter().map(|l| l.delivered_bits).sum(),
            buffered: self.total_buffered_bits(),
            dropped: self.ledgers.iter().map(|l| l.dropped_bits).sum(),
        }
    }

    pub fn fifo_violations(&self) -> u64 {
        self.ledgers.iter().map(|l| l.fifo_violations).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_scenario, ScenarioConfig};

    fn packet(id: u64, size: u64) -> Packet {
        Packet {
            id,
            flow: FlowId(0),
            size_bits: size,
            created_slot: 0,
            delivered_slot: None,
        }
    }

    #[test]
    fn drain_examples() {
        let mut b = FlowBuffer::new(Hop::UeAccessUl, NodeId(9), FlowId(0));
        b.push(packet(0, 4096));
        let frags = drain(&mut b, 10_000);
        assert_eq!(frags.len(), 1);
        assert_eq!(frags[0].bits, 4096);
        assert!(frags[0].completes);
        assert!(b.is_empty());

        b.push(packet(1, 4096));
        let frags = drain(&mut b, 126);
        assert_eq!(frags[0].bits, 126);
        assert!(!frags[0].completes);
        assert_eq!(b.total_bits(), 3970);
        assert_eq!(b.head().unwrap().0.id, 1);

        assert!(drain(&mut b, 0).is_empty());
        assert_eq!(b.total_bits(), 3970);
    }

    #[test]
    fn drain_spans_packets() {
        let mut b = FlowBuffer::new(Hop::UeAccessUl, NodeId(9), FlowId(0));
        b.push(packet(0, 100));
        b.push(packet(1, 100));
        let frags = b.drain(150);
        assert_eq!(
            frags.iter().map(|f| (f.packet.id, f.bits, f.completes)).collect::<Vec<_>>(),
            vec![(0, 100, true), (1, 50, false)]
        );
        assert_eq!(b.total_bits(), 50);
    }

    fn state() -> (NodeSet, TrafficState) {
        let (_, nodes) = build_scenario(&ScenarioConfig::default(), 1).unwrap();
        let t = TrafficState::new(&nodes, &TrafficConfig::default());
        (nodes, t)
    }

    #[test]
    fn cbr_every_fourth_slot() {
        let (nodes, mut t) = state();
        let parent = nodes.donors[0];
        let mut per_flow = 0;
        for slot in 0..8 {
            per_flow += t
                .generate_cbr(slot, parent)
                .iter()
                .filter(|p| p.flow == FlowId(0))
                .map(|p| p.size_bits)
                .sum::<u64>();
        }
        assert_eq!(per_flow, 8192);
        assert_eq!(t.flows().len(), 112);
        let bps = TrafficConfig::default().offered_bps(0.00025);
        assert!((bps - 4.096e6).abs() < 1e-6);
    }

    #[test]
    fn no_flows_no_packets() {
        let (nodes, _) = state();
        let cfg = TrafficConfig {
            pedestrians_enabled: false,
            passengers_enabled: false,
            ..Default::default()
        };
        let mut t = TrafficState::new(&nodes, &cfg);
        assert!(t.generate_cbr(0, nodes.donors[0]).is_empty());
    }

    fn passenger_flow(t: &TrafficState, dir: Direction) -> FlowId {
        t.flows()
            .iter()
            .find(|f| f.class == UeClass::Passenger && f.direction == dir)
            .unwrap()
            .id
    }

    #[test]
    fn relay_waits_for_whole_packet() {
        let (nodes, mut t) = state();
        let parent = nodes.donors[0];
        t.generate_cbr(0, parent);
        let ul = passenger_flow(&t, Direction::Ul);
        let ue = t.flow(ul).ue;
        let access = LinkId::new(ue, nodes.du);
        let mut out = Vec::new();
        t.transmit(access, 2048, 0, parent, &mut out);
        assert!(out.is_empty());
        assert_eq!(t.buffer_of(ul, 1, parent).total_bits(), 0);
        assert!(t.conservation(ul).holds());
        t.transmit(access, 2048, 1, parent, &mut out);
        // a full packet is now queued at the MT in the same slot
        assert_eq!(t.buffer_of(ul, 1, parent).total_bits(), 4096);
        assert!(t.conservation(ul).holds());
    }

    #[test]
    fn delivery_latency() {
        let (nodes, mut t) = state();
        let parent = nodes.donors[0];
        t.generate_cbr(80, parent);
        let dl = passenger_flow(&t, Direction::Dl);
        let ue = t.flow(dl).ue;
        let mut out = Vec::new();
        t.transmit(LinkId::new(parent, nodes.mt), 1_000_000, 90, parent, &mut out);
        assert!(out.is_empty());
        t.transmit(LinkId::new(nodes.du, ue), 1_000_000, 100, parent, &mut out);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].completed, Some((t.ledger(dl).last_delivered_packet.unwrap(), 20)));
        assert_eq!(t.ledger(dl).delivered_bits, 4096);
    }

    #[test]
    fn backhaul_link_serves_oldest_first() {
        let (nodes, mut t) = state();
        let parent = nodes.donors[0];
        t.generate_cbr(0, parent);
        t.generate_cbr(4, parent);
        let mut out = Vec::new();
        let link = LinkId::new(parent, nodes.mt);
        assert_eq!(t.link_bits(link), 12 * 4096);
        let sent = t.transmit(link, 6 * 4096 + 10, 5, parent, &mut out);
        assert_eq!(sent, 6 * 4096 + 10);
        // all slot-0 packets went first
        for f in t.flows().iter().filter(|f| f.route[0] == Hop::DonorBackhaulDl) {
            let b = t.buffer_of(f.id, 0, parent);
            assert_eq!(b.head().unwrap().0.created_slot, 4);
        }
        assert!(t.conservation_holds());
    }

    #[test]
    fn donor_load_sums_dl_buffers() {
        let (nodes, mut t) = state();
        let d = nodes.donors[1];
        assert_eq!(t.donor_load_bits(d), 0);
        t.generate_cbr(0, d);
        // 40 pedestrian DL flows plus 6 passenger backhaul flows
        assert_eq!(t.donor_load_bits(d), 46 * 4096);
        assert_eq!(t.donor_load_bits(nodes.donors[0]), 5 * 4096);
    }

    #[test]
    fn backhaul_move_conserves_bits() {
        let (nodes, mut t) = state();
        let (a, b) = (nodes.donors[0], nodes.donors[2]);
        t.generate_cbr(0, a);
        let before = t.totals();
        let moved = t.move_backhaul(a, b);
        assert_eq!(moved, 6 * 4096);
        assert_eq!(t.donor_backhaul_bits(a), 0);
        assert_eq!(t.donor_backhaul_bits(b), 6 * 4096);
        assert_eq!(before, t.totals());
        assert!(t.conservation_holds());
    }

    #[test]
    fn abandoned_flow_drops_in_flight_bits() {
        let (nodes, mut t) = state();
        let parent = nodes.donors[0];
        t.generate_cbr(0, parent);
        let ul = passenger_flow(&t, Direction::Ul);
        let ue = t.flow(ul).ue;
        let mut out = Vec::new();
        t.transmit(LinkId::new(ue, nodes.du), 1000, 1, parent, &mut out);
        t.abandon_flow(ul);
        t.transmit(LinkId::new(ue, nodes.du), 5000, 2, parent, &mut out);
        assert_eq!(t.ledger(ul).dropped_bits, 4096);
        assert!(t.conservation(ul).holds());
        assert!(t.generate_cbr(4, parent).iter().all(|p| p.flow != ul));
    }
}
