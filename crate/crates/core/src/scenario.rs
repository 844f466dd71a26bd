//! Madrid-grid layout, node placement and per-slot mobility.
//!
//! Three square blocks sit side by side along the x axis with one street
//! between consecutive blocks. The bus drives along the street in front of
//! the blocks (negative y) and each donor sits on the far face of its block.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point2, Point3, Polyline, Rect};
use crate::rng::{self, tags};

pub const BLOCK_COUNT: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Donor,
    MiabMt,
    MiabDu,
    PedestrianUe,
    PassengerUe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementPattern {
    /// Directional element pattern with 65 degree beamwidths.
    Tgpp3d,
    Omni,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrayKind {
    Ula64,
    Ura8x8,
    Single,
}

impl ArrayKind {
    pub fn element_count(self) -> u32 {
        match self {
            ArrayKind::Ula64 | ArrayKind::Ura8x8 => 64,
            ArrayKind::Single => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntennaConfig {
    pub pattern: ElementPattern,
    pub max_element_gain_dbi: f64,
    /// Mechanical downtilt, positive below the horizon.
    pub tilt_deg: f64,
    pub array: ArrayKind,
    /// Azimuth of the main lobe, counter-clockwise from +x.
    pub boresight_azimuth_deg: f64,
}

impl NodeKind {
    pub fn height_m(self) -> f64 {
        match self {
            NodeKind::Donor => 25.0,
            NodeKind::MiabMt => 3.5,
            NodeKind::MiabDu => 2.5,
            NodeKind::PedestrianUe => 1.5,
            NodeKind::PassengerUe => 1.8,
        }
    }

    pub fn tx_power_dbm(self) -> f64 {
        match self {
            NodeKind::Donor => 35.0,
            _ => 24.0,
        }
    }

    pub fn antenna(self, boresight_azimuth_deg: f64) -> AntennaConfig {
        let (pattern, max_element_gain_dbi, tilt_deg, array) = match self {
            NodeKind::Donor => (ElementPattern::Tgpp3d, 8.0, 12.0, ArrayKind::Ula64),
            NodeKind::MiabDu => (ElementPattern::Tgpp3d, 8.0, 4.0, ArrayKind::Ura8x8),
            NodeKind::MiabMt => (ElementPattern::Omni, 0.0, 0.0, ArrayKind::Ula64),
            NodeKind::PedestrianUe | NodeKind::PassengerUe => {
                (ElementPattern::Omni, 0.0, 0.0, ArrayKind::Single)
            }
        };
        AntennaConfig {
            pattern,
            max_element_gain_dbi,
            tilt_deg,
            array,
            boresight_azimuth_deg,
        }
    }

    pub fn is_bs_side(self) -> bool {
        matches!(self, NodeKind::Donor | NodeKind::MiabDu)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub position: Point3,
    pub tx_power_dbm: f64,
    pub antenna: AntennaConfig,
    pub speed_mps: f64,
    /// Serving donor of a pedestrian (fixed for the whole run).
    pub home_donor: Option<NodeId>,
}

impl Node {
    fn new(id: u32, kind: NodeKind, ground: Point2, azimuth_deg: f64, speed_mps: f64) -> Self {
        Node {
            id: NodeId(id),
            kind,
            position: Point3::new(ground.x, ground.y, kind.height_m()),
            tx_power_dbm: kind.tx_power_dbm(),
            antenna: kind.antenna(azimuth_deg),
            speed_mps,
            home_donor: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DonorPlacement {
    #[default]
    MidEdge,
    Corner,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub block_size_m: f64,
    pub street_width_m: f64,
    /// Pedestrians per donor, in donor order.
    pub ped_counts: Vec<usize>,
    pub passenger_count: usize,
    pub bus_speed_kmh: f64,
    pub ped_speed_kmh: f64,
    pub donor_placement: DonorPlacement,
    pub sidewalk_offset_m: f64,
    /// Distance of the bus lane from the block faces.
    pub bus_lane_offset_m: Option<f64>,
    /// How far before the first block (and after the last) the route extends.
    pub route_lead_in_m: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            block_size_m: 120.0,
            street_width_m: 21.0,
            ped_counts: vec![5, 40, 5],
            passenger_count: 6,
            bus_speed_kmh: 50.0,
            ped_speed_kmh: 3.0,
            donor_placement: DonorPlacement::MidEdge,
            sidewalk_offset_m: 3.0,
            bus_lane_offset_m: None,
            route_lead_in_m: None,
        }
    }
}

pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

impl ScenarioConfig {
    pub fn lane_offset(&self) -> f64 {
        self.bus_lane_offset_m.unwrap_or(0.5 * self.street_width_m)
    }

    pub fn lead_in(&self) -> f64 {
        self.route_lead_in_m.unwrap_or(0.5 * self.street_width_m)
    }

    pub fn bus_speed_mps(&self) -> f64 {
        kmh_to_mps(self.bus_speed_kmh)
    }

    pub fn ped_speed_mps(&self) -> f64 {
        kmh_to_mps(self.ped_speed_kmh)
    }

    pub fn pedestrian_total(&self) -> usize {
        self.ped_counts.iter().sum()
    }

    pub fn validate(&self, errors: &mut Vec<String>) {
        if !(self.block_size_m > 0.0) {
            errors.push(format!("scenario.block_size_m must be > 0 (got {})", self.block_size_m));
        }
        if !(self.street_width_m > 0.0) {
            errors.push(format!(
                "scenario.street_width_m must be > 0 (got {})",
                self.street_width_m
            ));
        }
        if self.ped_counts.len() != BLOCK_COUNT {
            errors.push(format!(
                "scenario.ped_counts must list {BLOCK_COUNT} donors (got {})",
                self.ped_counts.len()
            ));
        }
        if self.pedestrian_total() == 0 {
            errors.push("scenario.ped_counts must place at least one pedestrian".into());
        }
        if self.passenger_count == 0 {
            errors.push("scenario.passenger_count must be > 0".into());
        }
        if !(self.bus_speed_kmh > 0.0) {
            errors.push(format!("scenario.bus_speed_kmh must be > 0 (got {})", self.bus_speed_kmh));
        }
        if !(self.ped_speed_kmh >= 0.0) {
            errors.push(format!("scenario.ped_speed_kmh must be >= 0 (got {})", self.ped_speed_kmh));
        }
        if !(self.sidewalk_offset_m > 0.0 && self.sidewalk_offset_m < self.street_width_m * 0.5) {
            errors.push(format!(
                "scenario.sidewalk_offset_m must lie in (0, street_width_m / 2) (got {})",
                self.sidewalk_offset_m
            ));
        }
        let lane = self.lane_offset();
        if !(lane >= 0.0 && lane <= self.street_width_m) {
            errors.push(format!(
                "scenario.bus_lane_offset_m must lie in [0, street_width_m] (got {lane})"
            ));
        }
        if !(self.lead_in() >= 0.0 && self.lead_in() <= self.street_width_m) {
            errors.push(format!(
                "scenario.route_lead_in_m must lie in [0, street_width_m] (got {})",
                self.lead_in()
            ));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub blocks: Vec<Rect>,
    pub street_segments: Vec<Polyline>,
    /// One closed walking loop per block, stored as an open polyline.
    pub sidewalks: Vec<Polyline>,
    pub bus_route: Polyline,
    pub bounds: Rect,
}

impl Layout {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let b = cfg.block_size_m;
        let w = cfg.street_width_m;
        let pitch = b + w;
        let blocks: Vec<Rect> = (0..BLOCK_COUNT)
            .map(|i| {
                let x0 = i as f64 * pitch;
                Rect::new(x0, 0.0, x0 + b, b)
            })
            .collect();
        let grid_end = BLOCK_COUNT as f64 * pitch - w;
        let bounds = Rect::new(-w, -w, grid_end + w, b + w);

        let mut street_segments = vec![
            Polyline::new(vec![Point2::new(-w, -0.5 * w), Point2::new(grid_end + w, -0.5 * w)]),
            Polyline::new(vec![
                Point2::new(-w, b + 0.5 * w),
                Point2::new(grid_end + w, b + 0.5 * w),
            ]),
        ];
        for i in 0..=BLOCK_COUNT {
            let x = i as f64 * pitch - 0.5 * w;
            street_segments.push(Polyline::new(vec![Point2::new(x, -w), Point2::new(x, b + w)]));
        }

        let o = cfg.sidewalk_offset_m;
        let sidewalks = blocks
            .iter()
            .map(|r| {
                Polyline::new(vec![
                    Point2::new(r.x_min - o, r.y_min - o),
                    Point2::new(r.x_max + o, r.y_min - o),
                    Point2::new(r.x_max + o, r.y_max + o),
                    Point2::new(r.x_min - o, r.y_max + o),
                    Point2::new(r.x_min - o, r.y_min - o),
                ])
            })
            .collect();

        let lane_y = -cfg.lane_offset();
        let bus_route = Polyline::new(vec![
            Point2::new(-cfg.lead_in(), lane_y),
            Point2::new(grid_end + cfg.lead_in(), lane_y),
        ]);

        let layout = Layout {
            blocks,
            street_segments,
            sidewalks,
            bus_route,
            bounds,
        };
        layout.check()?;
        Ok(layout)
    }

    fn check(&self) -> Result<()> {
        for (i, a) in self.blocks.iter().enumerate() {
            for b in &self.blocks[i + 1..] {
                if a.interior_overlaps(b) {
                    return Err(Error::Scenario("blocks overlap".into()));
                }
            }
        }
        for seg in self.bus_route.points.windows(2) {
            if self
                .blocks
                .iter()
                .any(|r| r.segment_crosses_interior(seg[0], seg[1]))
            {
                return Err(Error::Scenario("bus trajectory intersects a block".into()));
            }
            if !self.bounds.contains(seg[0]) || !self.bounds.contains(seg[1]) {
                return Err(Error::Scenario("bus trajectory leaves the layout bounds".into()));
            }
        }
        Ok(())
    }

    pub fn inside_any_block(&self, p: Point2) -> bool {
        self.blocks.iter().any(|r| r.contains_strictly(p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusState {
    /// Arc length travelled along the bus route.
    pub distance_m: f64,
    pub finished: bool,
}

/// A pedestrian shuttling along the sidewalk loop of its block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Walker {
    pub node: NodeId,
    pub sidewalk: usize,
    pub arc_position_m: f64,
    /// +1 walks towards the polyline end, -1 towards its start.
    pub heading: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    pub nodes: Vec<Node>,
    pub donors: Vec<NodeId>,
    pub mt: NodeId,
    pub du: NodeId,
    pub passengers: Vec<NodeId>,
    pub pedestrians: Vec<NodeId>,
    pub bus: BusState,
    pub bus_speed_mps: f64,
    pub walkers: Vec<Walker>,
}

impl NodeSet {
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn bus_ground(&self, layout: &Layout) -> Point2 {
        layout.bus_route.point_at(self.bus.distance_m)
    }

    /// Pedestrians served by `donor`, in id order.
    pub fn pedestrians_of(&self, donor: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.pedestrians
            .iter()
            .copied()
            .filter(move |&p| self.node(p).home_donor == Some(donor))
    }
}

pub fn build_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<(Layout, NodeSet)> {
    let mut errors = Vec::new();
    cfg.validate(&mut errors);
    if !errors.is_empty() {
        return Err(Error::Scenario(errors.join("; ")));
    }
    let layout = Layout::new(cfg)?;
    let mut rng = rng::stream(seed, &[tags::PLACEMENT]);

    let mut nodes = Vec::new();
    let mut next_id = 0u32;
    let mut push = |nodes: &mut Vec<Node>, node: Node| {
        nodes.push(node);
        next_id += 1;
        NodeId(next_id - 1)
    };

    let donors: Vec<NodeId> = layout
        .blocks
        .iter()
        .map(|r| {
            let ground = match cfg.donor_placement {
                DonorPlacement::MidEdge => Point2::new(r.center().x, r.y_max),
                DonorPlacement::Corner => Point2::new(r.x_max, r.y_max),
            };
            // donors face the bus street (towards -y)
            let id = nodes.len() as u32;
            push(&mut nodes, Node::new(id, NodeKind::Donor, ground, -90.0, 0.0))
        })
        .collect();

    let bus_speed = cfg.bus_speed_mps();
    let start = layout.bus_route.point_at(0.0);
    let heading = layout.bus_route.direction_at(0.0);
    let heading_deg = heading.y.atan2(heading.x).to_degrees();
    let id = nodes.len() as u32;
    let mt = push(&mut nodes, Node::new(id, NodeKind::MiabMt, start, heading_deg, bus_speed));
    let id = nodes.len() as u32;
    let du = push(&mut nodes, Node::new(id, NodeKind::MiabDu, start, heading_deg, bus_speed));
    let passengers: Vec<NodeId> = (0..cfg.passenger_count)
        .map(|_| {
            let id = nodes.len() as u32;
            push(
                &mut nodes,
                Node::new(id, NodeKind::PassengerUe, start, heading_deg, bus_speed),
            )
        })
        .collect();

    let ped_speed = cfg.ped_speed_mps();
    let mut pedestrians = Vec::new();
    let mut walkers = Vec::new();
    for (block, (&donor, &count)) in donors.iter().zip(&cfg.ped_counts).enumerate() {
        let sidewalk = &layout.sidewalks[block];
        let len = sidewalk.length();
        for _ in 0..count {
            let arc = rng.random_range(0.0..len);
            let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let id = nodes.len() as u32;
            let mut node = Node::new(
                id,
                NodeKind::PedestrianUe,
                sidewalk.point_at(arc),
                0.0,
                ped_speed,
            );
            node.home_donor = Some(donor);
            let nid = push(&mut nodes, node);
            pedestrians.push(nid);
            walkers.push(Walker {
                node: nid,
                sidewalk: block,
                arc_position_m: arc,
                heading: dir,
            });
        }
    }

    Ok((
        layout,
        NodeSet {
            nodes,
            donors,
            mt,
            du,
            passengers,
            pedestrians,
            bus: BusState {
                distance_m: 0.0,
                finished: false,
            },
            bus_speed_mps: bus_speed,
            walkers,
        },
    ))
}

/// Reflects a walk position back into `[0, len]`, flipping the heading on
/// every bounce.
pub fn reflect(mut s: f64, mut heading: f64, len: f64) -> (f64, f64) {
    if len <= 0.0 {
        return (0.0, heading);
    }
    loop {
        if s > len {
            s = 2.0 * len - s;
            heading = -heading;
        } else if s < 0.0 {
            s = -s;
            heading = -heading;
        } else {
            return (s, heading);
        }
    }
}

/// Moves every node by `dt` seconds. Returns `true` once the bus has
/// reached the end of its route.
pub fn advance_mobility(nodes: &mut NodeSet, layout: &Layout, dt: f64) -> bool {
    if dt <= 0.0 {
        return nodes.bus.finished;
    }
    let route_len = layout.bus_route.length();
    let travelled = nodes.bus.distance_m + nodes.bus_speed_mps * dt;
    if travelled >= route_len {
        nodes.bus.distance_m = route_len;
        nodes.bus.finished = true;
    } else {
        nodes.bus.distance_m = travelled;
    }
    let bus = layout.bus_route.point_at(nodes.bus.distance_m);
    let bus_ids = std::iter::once(nodes.mt)
        .chain(std::iter::once(nodes.du))
        .chain(nodes.passengers.iter().copied())
        .collect::<Vec<_>>();
    for id in bus_ids {
        let p = &mut nodes.nodes[id.index()].position;
        p.x = bus.x;
        p.y = bus.y;
    }

    for w in &mut nodes.walkers {
        let node = &mut nodes.nodes[w.node.index()];
        let path = &layout.sidewalks[w.sidewalk];
        let (s, h) = reflect(
            w.arc_position_m + w.heading * node.speed_mps * dt,
            w.heading,
            path.length(),
        );
        w.arc_position_m = s;
        w.heading = h;
        let g = path.point_at(s);
        node.position.x = g.x;
        node.position.y = g.y;
    }
    nodes.bus.finished
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_scenario(seed: u64) -> (Layout, NodeSet) {
        build_scenario(&ScenarioConfig::default(), seed).unwrap()
    }

    #[test]
    fn default_population() {
        let (layout, nodes) = default_scenario(1);
        assert_eq!(layout.blocks.len(), 3);
        assert_eq!(nodes.count(NodeKind::Donor), 3);
        assert_eq!(nodes.count(NodeKind::MiabMt), 1);
        assert_eq!(nodes.count(NodeKind::MiabDu), 1);
        assert_eq!(nodes.count(NodeKind::PassengerUe), 6);
        assert_eq!(nodes.count(NodeKind::PedestrianUe), 50);
        assert_eq!(nodes.len(), 61);
        // 6 passengers + 50 pedestrians are the served terminals
        assert_eq!(nodes.passengers.len() + nodes.pedestrians.len(), 56);
        let per_donor: Vec<usize> = nodes
            .donors
            .iter()
            .map(|&d| nodes.pedestrians_of(d).count())
            .collect();
        assert_eq!(per_donor, vec![5, 40, 5]);
    }

    #[test]
    fn zero_outer_pedestrians() {
        let cfg = ScenarioConfig {
            ped_counts: vec![0, 40, 0],
            ..Default::default()
        };
        let (_, nodes) = build_scenario(&cfg, 1).unwrap();
        assert_eq!(nodes.pedestrians.len(), 40);
        assert_eq!(nodes.donors.len(), 3);
    }

    #[test]
    fn placement_is_deterministic() {
        let (_, a) = default_scenario(9);
        let (_, b) = default_scenario(9);
        assert_eq!(a, b);
        let (_, c) = default_scenario(10);
        assert_ne!(a, c);
    }

    #[test]
    fn table_one_entities() {
        let (_, nodes) = default_scenario(1);
        for n in &nodes.nodes {
            let (h, p) = match n.kind {
                NodeKind::Donor => (25.0, 35.0),
                NodeKind::MiabMt => (3.5, 24.0),
                NodeKind::MiabDu => (2.5, 24.0),
                NodeKind::PedestrianUe => (1.5, 24.0),
                NodeKind::PassengerUe => (1.8, 24.0),
            };
            assert_eq!(n.position.z, h);
            assert_eq!(n.tx_power_dbm, p);
        }
        let donor = nodes.node(nodes.donors[0]).antenna;
        assert_eq!(
            (donor.pattern, donor.max_element_gain_dbi, donor.tilt_deg, donor.array),
            (ElementPattern::Tgpp3d, 8.0, 12.0, ArrayKind::Ula64)
        );
        let du = nodes.node(nodes.du).antenna;
        assert_eq!(
            (du.pattern, du.max_element_gain_dbi, du.tilt_deg, du.array),
            (ElementPattern::Tgpp3d, 8.0, 4.0, ArrayKind::Ura8x8)
        );
        let mt = nodes.node(nodes.mt).antenna;
        assert_eq!((mt.pattern, mt.array), (ElementPattern::Omni, ArrayKind::Ula64));
    }

    #[test]
    fn donors_sit_on_far_face_mid_edge() {
        let (layout, nodes) = default_scenario(1);
        for (block, &d) in layout.blocks.iter().zip(&nodes.donors) {
            let p = nodes.node(d).position;
            assert_eq!(p.x, block.center().x);
            assert_eq!(p.y, block.y_max);
        }
    }

    #[test]
    fn rejects_route_through_blocks() {
        let cfg = ScenarioConfig {
            bus_lane_offset_m: Some(-5.0),
            ..Default::default()
        };
        assert!(build_scenario(&cfg, 1).is_err());
    }

    #[test]
    fn rejects_empty_populations() {
        let cfg = ScenarioConfig {
            passenger_count: 0,
            ..Default::default()
        };
        assert!(build_scenario(&cfg, 1).is_err());
        let cfg = ScenarioConfig {
            ped_counts: vec![0, 0, 0],
            ..Default::default()
        };
        assert!(build_scenario(&cfg, 1).is_err());
    }

    #[test]
    fn one_slot_bus_step() {
        let (layout, mut nodes) = default_scenario(1);
        advance_mobility(&mut nodes, &layout, 0.00025);
        let expected = 50.0 / 3.6 * 0.00025;
        assert!((nodes.bus.distance_m - expected).abs() < 1e-12);
        assert!((nodes.bus.distance_m - 0.003472).abs() < 1e-6);
    }

    #[test]
    fn zero_dt_is_identity() {
        let (layout, mut nodes) = default_scenario(3);
        let before = nodes.clone();
        advance_mobility(&mut nodes, &layout, 0.0);
        assert_eq!(before, nodes);
    }

    #[test]
    fn reflection_at_segment_end() {
        // 0.1 m before the end, step of 0.5 m: bounces back to 0.4 m before the end
        let (s, h) = reflect(9.9 + 0.5, 1.0, 10.0);
        assert!((s - 9.6).abs() < 1e-12);
        assert_eq!(h, -1.0);
        let (s, h) = reflect(-0.3, -1.0, 10.0);
        assert!((s - 0.3).abs() < 1e-12);
        assert_eq!(h, 1.0);
    }

    #[test]
    fn bus_clamps_at_route_end() {
        let (layout, mut nodes) = default_scenario(1);
        let done = advance_mobility(&mut nodes, &layout, 1.0e4);
        assert!(done);
        assert_eq!(nodes.bus.distance_m, layout.bus_route.length());
        let end = *layout.bus_route.points.last().unwrap();
        assert_eq!(nodes.node(nodes.mt).position.ground(), end);
    }
}
