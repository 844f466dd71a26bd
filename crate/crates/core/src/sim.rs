//! Slot-level engine tying mobility, channel, MAC, traffic and topology
//! adaptation together.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, fading_power_gain, fading_stream, noise_per_rb_dbm, rsrp_dbm, GainTable};
use crate::config::RunConfig;
use crate::error::Result;
use crate::mac::{
    enforce_half_duplex, link_capacity_bits, Direction, HalfDuplexArbiter, LinkAdaptation, LinkId,
    MiabDuplexState, MiabRole, RbAllocation, RoundRobinScheduler,
};
use crate::metrics::{
    BufferSnapshot, CheckCounters, MetricsLedger, RunMeta, ThroughputRecorder, SCHEMA_VERSION,
};
use crate::scenario::{advance_mobility, build_scenario, Layout, NodeId, NodeSet};
use crate::topology::{
    execute_ta, update_parent_load_aware, update_parent_standard, AttachmentLog, DonorCandidate,
    InitialParent, TaEvent, TaPolicy,
};
use crate::traffic::{Delivery, Hop, TrafficState};

pub const GIT_DESCRIBE: &str = env!("IAB_TA_GIT_DESCRIBE");

/// What happened on one scheduled link in a slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub link: LinkId,
    pub n_rbs: u32,
    pub sinr: f64,
    pub capacity_bits: u64,
    pub sent_bits: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotReport {
    pub slot: u64,
    pub direction: Direction,
    pub role: Option<MiabRole>,
    pub parent: NodeId,
    pub allocations: Vec<RbAllocation>,
    pub duplex: MiabDuplexState,
    pub links: Vec<LinkReport>,
    pub ta_event: Option<TaEvent>,
}

/// Everything a finished run produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub seed: u64,
    pub ledger: MetricsLedger,
    pub meta: RunMeta,
    pub state_hash: u64,
}

impl RunOutput {
    pub fn write(&self, out_dir: &std::path::Path) -> Result<()> {
        crate::metrics::write_outputs(&self.ledger, &self.meta, out_dir)
    }
}

/// Slots needed for the bus to cover its route.
pub fn route_slots(layout: &Layout, speed_mps: f64, slot_duration_s: f64) -> u64 {
    let exact = layout.bus_route.length() / (speed_mps * slot_duration_s);
    // guard against 121824.00000001-style rounding
    (exact - 1e-6).ceil().max(0.0) as u64 + 1
}

pub struct Simulation {
    cfg: RunConfig,
    layout: Layout,
    nodes: NodeSet,
    gains: GainTable,
    traffic: TrafficState,
    scheduler: RoundRobinScheduler,
    arbiter: HalfDuplexArbiter,
    la: LinkAdaptation,
    noise_rb_mw: f64,
    tx_rb_mw: Vec<f64>,
    peds_of: Vec<Vec<NodeId>>,
    parent: NodeId,
    attachments: AttachmentLog,
    filtered_rsrp: Vec<f64>,
    recorder: ThroughputRecorder,
    snapshots: Vec<BufferSnapshot>,
    ta_events: Vec<TaEvent>,
    checks: CheckCounters,
    fading: Option<ChaCha8Rng>,
    deliveries: Vec<Delivery>,
    slot: u64,
    run_slots: u64,
}

impl Simulation {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.seed;
        let (layout, nodes) = build_scenario(&cfg.scenario, seed)?;
        let gains = GainTable::new(&nodes, &layout, &cfg.channel, seed);
        let traffic = TrafficState::new(&nodes, &cfg.traffic);
        let n_rbs = cfg.mac.n_rbs as f64;
        let tx_rb_mw = nodes
            .nodes
            .iter()
            .map(|n| db_to_linear(n.tx_power_dbm) / n_rbs)
            .collect();
        let peds_of = nodes
            .donors
            .iter()
            .map(|&d| nodes.pedestrians_of(d).collect())
            .collect();
        let noise_rb_mw = db_to_linear(noise_per_rb_dbm(
            cfg.channel.noise_per_subcarrier_dbm,
            cfg.mac.subcarriers_per_rb,
            cfg.channel.noise_figure_db,
        ));
        let run_slots = cfg.duration_slots.unwrap_or_else(|| {
            route_slots(&layout, nodes.bus_speed_mps, cfg.mac.slot_duration_s)
        });
        let recorder = ThroughputRecorder::new(traffic.flows(), cfg.metrics.window_slots);
        let fading = cfg
            .channel
            .fast_fading_enabled
            .then(|| fading_stream(seed, 0));

        let mut sim = Simulation {
            la: LinkAdaptation::from(&cfg.mac),
            cfg,
            layout,
            gains,
            traffic,
            scheduler: RoundRobinScheduler::default(),
            arbiter: HalfDuplexArbiter::default(),
            noise_rb_mw,
            tx_rb_mw,
            peds_of,
            parent: nodes.donors[0],
            attachments: AttachmentLog::new(nodes.donors[0], 0),
            filtered_rsrp: Vec::new(),
            nodes,
            recorder,
            snapshots: Vec::new(),
            ta_events: Vec::new(),
            checks: CheckCounters::default(),
            fading,
            deliveries: Vec::new(),
            slot: 0,
            run_slots,
        };
        sim.filtered_rsrp = sim.measure_rsrp();
        sim.parent = sim.initial_parent();
        sim.attachments = AttachmentLog::new(sim.parent, 0);
        Ok(sim)
    }

    fn initial_parent(&self) -> NodeId {
        let donors = &self.nodes.donors;
        match self.cfg.ta.initial_parent {
            InitialParent::Nearest => {
                let bus = self.nodes.bus_ground(&self.layout);
                *donors
                    .iter()
                    .min_by(|a, b| {
                        let da = self.nodes.node(**a).position.ground().distance(bus);
                        let db = self.nodes.node(**b).position.ground().distance(bus);
                        da.total_cmp(&db).then(a.cmp(b))
                    })
                    .expect("at least one donor")
            }
            InitialParent::Strongest => {
                let mut best = 0;
                for (i, r) in self.filtered_rsrp.iter().enumerate() {
                    if *r > self.filtered_rsrp[best] {
                        best = i;
                    }
                }
                donors[best]
            }
        }
    }

    /// Instantaneous donor RSRPs at the MT, in donor order.
    pub fn measure_rsrp(&self) -> Vec<f64> {
        let sc = self.cfg.mac.subcarriers_total();
        self.nodes
            .donors
            .iter()
            .map(|&d| {
                let state = self.gains.state(d, self.nodes.mt).expect("donor-MT pair");
                rsrp_dbm(self.nodes.node(d).tx_power_dbm, sc, state)
            })
            .collect()
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn traffic(&self) -> &TrafficState {
        &self.traffic
    }

    pub fn gains(&self) -> &GainTable {
        &self.gains
    }

    pub fn parent(&self) -> NodeId {
        self.parent
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn run_slots(&self) -> u64 {
        self.run_slots
    }

    pub fn is_finished(&self) -> bool {
        self.slot >= self.run_slots
    }

    pub fn checks(&self) -> &CheckCounters {
        &self.checks
    }

    pub fn ta_events(&self) -> &[TaEvent] {
        &self.ta_events
    }

    pub fn filtered_rsrp(&self) -> &[f64] {
        &self.filtered_rsrp
    }

    fn link_bits(&self, links: &[LinkId]) -> u64 {
        links.iter().map(|&l| self.traffic.link_bits(l)).sum()
    }

    fn miab_role(&mut self, direction: Direction) -> Option<MiabRole> {
        let (mt, du, parent) = (self.nodes.mt, self.nodes.du, self.parent);
        let access: Vec<LinkId> = self
            .nodes
            .passengers
            .iter()
            .map(|&p| match direction {
                Direction::Dl => LinkId::new(du, p),
                Direction::Ul => LinkId::new(p, du),
            })
            .collect();
        let backhaul = match direction {
            Direction::Dl => LinkId::new(parent, mt),
            Direction::Ul => LinkId::new(mt, parent),
        };
        let bh_bits = self.traffic.link_bits(backhaul);
        let acc_bits = self.link_bits(&access);
        self.arbiter.choose_role(direction, bh_bits, acc_bits)
    }

    /// Candidate links per cell, donors first then the DU.
    fn cell_links(&self, direction: Direction, role: Option<MiabRole>) -> Vec<(NodeId, Vec<(LinkId, u64)>)> {
        let orient = |bs: NodeId, ue: NodeId| match direction {
            Direction::Dl => LinkId::new(bs, ue),
            Direction::Ul => LinkId::new(ue, bs),
        };
        let mut cells = Vec::with_capacity(self.nodes.donors.len() + 1);
        for (i, &d) in self.nodes.donors.iter().enumerate() {
            let mut links: Vec<LinkId> = self.peds_of[i].iter().map(|&p| orient(d, p)).collect();
            if d == self.parent && role == Some(MiabRole::Backhaul) {
                links.push(orient(d, self.nodes.mt));
            }
            cells.push((d, links));
        }
        if role == Some(MiabRole::Access) {
            let du = self.nodes.du;
            cells.push((du, self.nodes.passengers.iter().map(|&p| orient(du, p)).collect()));
        }
        cells
            .into_iter()
            .map(|(c, links)| {
                let with_bits = links
                    .into_iter()
                    .map(|l| (l, self.traffic.link_bits(l)))
                    .collect();
                (c, with_bits)
            })
            .collect()
    }

    fn check_allocations(&mut self, role: Option<MiabRole>, allocs: &[RbAllocation]) -> MiabDuplexState {
        let n_rbs = self.cfg.mac.n_rbs;
        for a in allocs {
            if !a.is_valid(n_rbs) {
                self.checks.rb_overlap_violations += 1;
            }
        }
        let filtered = enforce_half_duplex(role, self.nodes.mt, self.nodes.du, allocs.to_vec());
        let before: usize = allocs.iter().map(|a| a.grants.len()).sum();
        let after: usize = filtered.iter().map(|a| a.grants.len()).sum();
        let duplex = MiabDuplexState::from_allocations(allocs, self.nodes.mt, self.nodes.du);
        if before != after || !duplex.is_half_duplex() {
            self.checks.half_duplex_violations += 1;
        }
        duplex
    }

    fn grant_sinr(&mut self, allocs: &[RbAllocation], cell: usize, grant: usize) -> f64 {
        let g = &allocs[cell].grants[grant];
        let (tx, rx) = (g.link.tx, g.link.rx);
        let mut fading = 1.0;
        if let Some(rng) = self.fading.as_mut() {
            let los = self.gains.state(tx, rx).map(|s| s.los).expect("serving pair");
            let k = self.cfg.channel.rician_k_db;
            fading = (0..g.n_rbs).map(|_| fading_power_gain(los, k, rng)).sum::<f64>() / g.n_rbs as f64;
        }
        let n = g.n_rbs as f64;
        let signal = self.tx_rb_mw[tx.index()] * n * self.gains.serving_lin(tx, rx) * fading;
        let mine = g.rbs();
        let mut interference = 0.0;
        for (ci, other) in allocs.iter().enumerate() {
            if ci == cell {
                continue;
            }
            for h in &other.grants {
                let theirs = h.rbs();
                let overlap = mine.end.min(theirs.end).saturating_sub(mine.start.max(theirs.start));
                if overlap == 0 || h.link.tx == rx {
                    continue;
                }
                interference += self.tx_rb_mw[h.link.tx.index()]
                    * overlap as f64
                    * self.gains.interference_lin(h.link.tx, rx);
            }
        }
        signal / (n * self.noise_rb_mw + interference)
    }

    /// Runs one slot; `None` once the run is over.
    pub fn step(&mut self) -> Option<SlotReport> {
        if self.is_finished() {
            return None;
        }
        let slot = self.slot;
        let dt = self.cfg.mac.slot_duration_s;
        if slot > 0 {
            advance_mobility(&mut self.nodes, &self.layout, dt);
            self.gains.refresh(&self.nodes, &self.layout, &self.cfg.channel);
        }
        let ctx = self.cfg.mac.slot(slot);
        let direction = ctx.direction;
        self.traffic.generate_cbr(slot, self.parent);

        let role = self.miab_role(direction);
        let n_rbs = self.cfg.mac.n_rbs;
        let allocations: Vec<RbAllocation> = self
            .cell_links(direction, role)
            .into_iter()
            .map(|(cell, links)| self.scheduler.schedule(cell, direction, &links, n_rbs))
            .collect();
        let duplex = self.check_allocations(role, &allocations);

        let mut links = Vec::new();
        for ci in 0..allocations.len() {
            for gi in 0..allocations[ci].grants.len() {
                let sinr = self.grant_sinr(&allocations, ci, gi);
                let g = allocations[ci].grants[gi];
                links.push(LinkReport {
                    link: g.link,
                    n_rbs: g.n_rbs,
                    sinr,
                    capacity_bits: link_capacity_bits(sinr, g.n_rbs, &ctx, &self.la),
                    sent_bits: 0,
                });
            }
        }
        self.deliveries.clear();
        for l in &mut links {
            l.sent_bits = self.traffic.transmit(
                l.link,
                l.capacity_bits,
                slot,
                self.parent,
                &mut self.deliveries,
            );
        }

        let ta_event = if (slot + 1) % self.cfg.ta.period_slots == 0 {
            self.evaluate_ta(slot)
        } else {
            None
        };

        for d in &self.deliveries {
            self.recorder.record(d);
        }
        self.recorder.end_of_slot(slot);
        if slot % self.cfg.metrics.snapshot_cadence == 0 {
            self.snapshot(slot);
        }
        self.checks.slots += 1;
        self.slot += 1;

        Some(SlotReport {
            slot,
            direction,
            role,
            parent: self.parent,
            allocations,
            duplex,
            links,
            ta_event,
        })
    }

    fn evaluate_ta(&mut self, slot: u64) -> Option<TaEvent> {
        let a = self.cfg.ta.l3_filter_coefficient;
        let inst = self.measure_rsrp();
        for (f, r) in self.filtered_rsrp.iter_mut().zip(inst) {
            *f = (1.0 - a) * *f + a * r;
        }
        let candidates: Vec<DonorCandidate> = self
            .nodes
            .donors
            .iter()
            .zip(&self.filtered_rsrp)
            .map(|(&d, &r)| DonorCandidate {
                donor_id: d,
                bits: self.traffic.donor_load_bits(d),
                rsrp_dbm: r,
            })
            .collect();
        let parent = *candidates
            .iter()
            .find(|c| c.donor_id == self.parent)
            .expect("parent is a donor");
        let next = match self.cfg.ta.policy {
            TaPolicy::Standard => update_parent_standard(&parent, &candidates, self.cfg.ta.hysteresis_db),
            TaPolicy::LoadAware => update_parent_load_aware(&parent, &candidates, &self.cfg.ta),
        };
        let before = self.traffic.totals();
        let event = execute_ta(&mut self.traffic, &mut self.attachments, self.parent, next, slot)?;
        self.parent = next;
        self.checks.conservation_checks += 1;
        if self.traffic.totals() != before || !self.traffic.conservation_holds() {
            self.checks.ta_conservation_failures += 1;
        }
        self.ta_events.push(event);
        Some(event)
    }

    fn snapshot(&mut self, slot: u64) {
        let t = &self.traffic;
        self.snapshots.push(BufferSnapshot {
            slot,
            mt_ul_bits: t.hop_bits(Hop::MtBackhaulUl),
            du_dl_bits: t.hop_bits(Hop::DuAccessDl),
            donor_backhaul_dl_bits: t.hop_bits(Hop::DonorBackhaulDl),
            donor_dl_bits: self
                .nodes
                .donors
                .iter()
                .map(|&d| (d, t.donor_load_bits(d)))
                .collect(),
        });
        self.checks.conservation_checks += 1;
        if !t.conservation_holds() {
            self.checks.conservation_failures += 1;
        }
    }

    /// Hash over the evolving state, for replay checks.
    pub fn state_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.slot.hash(&mut h);
        self.parent.hash(&mut h);
        for n in &self.nodes.nodes {
            n.position.x.to_bits().hash(&mut h);
            n.position.y.to_bits().hash(&mut h);
        }
        for b in self.traffic.buffers() {
            b.total_bits().hash(&mut h);
        }
        for f in self.traffic.flows() {
            let l = self.traffic.ledger(f.id);
            (l.offered_bits, l.delivered_bits, l.dropped_bits, l.latency_slots_sum).hash(&mut h);
        }
        for r in &self.filtered_rsrp {
            r.to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn run_to_end(mut self) -> RunOutput {
        while self.step().is_some() {}
        self.finish()
    }

    /// Closes the run at the current slot.
    pub fn finish(mut self) -> RunOutput {
        let run_slots = self.slot;
        let state_hash = self.state_hash();
        self.checks.fifo_violations = self.traffic.fifo_violations();
        self.checks.clamped_distances = self.gains.clamped_distances();
        let ledger = MetricsLedger {
            run_slots,
            slot_duration_s: self.cfg.mac.slot_duration_s,
            donors: self.nodes.donors.clone(),
            throughput: self.recorder.finish(run_slots),
            buffers: self.snapshots,
            attachments: self.attachments.records(run_slots),
            ta_events: self.ta_events,
            checks: self.checks,
        };
        let meta = RunMeta {
            schema_version: SCHEMA_VERSION.into(),
            git_describe: GIT_DESCRIBE.into(),
            policy: self.cfg.ta.policy.as_str().into(),
            seeds: vec![self.cfg.seed],
            run_slots,
            slot_duration_s: self.cfg.mac.slot_duration_s,
            window_slots: self.cfg.metrics.window_slots,
            snapshot_cadence: self.cfg.metrics.snapshot_cadence,
            config: self.cfg.to_table(),
        };
        RunOutput {
            seed: self.cfg.seed,
            ledger,
            meta,
            state_hash,
        }
    }
}

pub fn run(cfg: RunConfig) -> Result<RunOutput> {
    Ok(Simulation::new(cfg)?.run_to_end())
}

/// Independent runs of `cfg` for each seed, in parallel; results come back
/// in seed order.
pub fn sweep(cfg: &RunConfig, seeds: &[u64]) -> Result<Vec<RunOutput>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            run(c)
        })
        .collect()
}
