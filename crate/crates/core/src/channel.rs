//! Large-scale channel: geometric LOS, UMi/UMa path loss, correlated
//! shadowing, antenna element patterns, RSRP and SINR.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geom::{Point2, Point3};
use crate::rng::{self, tags};
use crate::scenario::{AntennaConfig, ElementPattern, Layout, Node, NodeId, NodeSet};

// the path-loss tables fix c at 3e8 m/s for the breakpoint distance
const SPEED_OF_LIGHT: f64 = 3.0e8;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkState {
    Los,
    Nlos,
}

/// LOS iff the ground projection of `a`-`b` crosses no block interior.
/// Touching a block edge or corner does not block.
pub fn determine_los(a: Point2, b: Point2, layout: &Layout) -> LinkState {
    if layout
        .blocks
        .iter()
        .any(|r| r.segment_crosses_interior(a, b))
    {
        LinkState::Nlos
    } else {
        LinkState::Los
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathLossModel {
    /// Urban micro, street canyon.
    #[default]
    Umi,
    /// Urban macro.
    Uma,
}

impl PathLossModel {
    pub fn shadowing_sigma_db(self, state: LinkState) -> f64 {
        match (self, state) {
            (_, LinkState::Los) => 4.0,
            (PathLossModel::Umi, LinkState::Nlos) => 7.82,
            (PathLossModel::Uma, LinkState::Nlos) => 6.0,
        }
    }
}

/// Link geometry needed by the path-loss formulas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathLossGeometry {
    pub d2d_m: f64,
    pub d3d_m: f64,
    pub bs_height_m: f64,
    pub ut_height_m: f64,
}

impl PathLossGeometry {
    pub fn between(bs: Point3, ut: Point3) -> Self {
        Self {
            d2d_m: bs.ground().distance(ut.ground()),
            d3d_m: bs.distance(ut),
            bs_height_m: bs.z,
            ut_height_m: ut.z,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathLoss {
    pub db: f64,
    /// Set when the 3-D distance was below 1 m and got clamped.
    pub clamped: bool,
}

/// Breakpoint distance with a 1 m effective environment height.
fn breakpoint_m(g: &PathLossGeometry, fc_ghz: f64) -> f64 {
    let hb = (g.bs_height_m - 1.0).max(0.1);
    let hu = (g.ut_height_m - 1.0).max(0.1);
    4.0 * hb * hu * fc_ghz * 1e9 / SPEED_OF_LIGHT
}

pub fn path_loss_db(
    model: PathLossModel,
    geometry: &PathLossGeometry,
    fc_ghz: f64,
    state: LinkState,
) -> PathLoss {
    let clamped = geometry.d3d_m < 1.0;
    let d3d = geometry.d3d_m.max(1.0);
    let d2d = geometry.d2d_m;
    let dh = geometry.bs_height_m - geometry.ut_height_m;
    let log_fc = fc_ghz.log10();
    let bp = breakpoint_m(geometry, fc_ghz);
    let los = match model {
        PathLossModel::Umi => {
            if d2d <= bp {
                32.4 + 21.0 * d3d.log10() + 20.0 * log_fc
            } else {
                32.4 + 40.0 * d3d.log10() + 20.0 * log_fc - 9.5 * (bp * bp + dh * dh).log10()
            }
        }
        PathLossModel::Uma => {
            if d2d <= bp {
                28.0 + 22.0 * d3d.log10() + 20.0 * log_fc
            } else {
                28.0 + 40.0 * d3d.log10() + 20.0 * log_fc - 9.0 * (bp * bp + dh * dh).log10()
            }
        }
    };
    let db = match state {
        LinkState::Los => los,
        LinkState::Nlos => {
            let nlos = match model {
                PathLossModel::Umi => {
                    35.3 * d3d.log10() + 22.4 + 21.3 * log_fc - 0.3 * (geometry.ut_height_m - 1.5)
                }
                PathLossModel::Uma => {
                    13.54 + 39.08 * d3d.log10() + 20.0 * log_fc
                        - 0.6 * (geometry.ut_height_m - 1.5)
                }
            };
            los.max(nlos)
        }
    };
    PathLoss { db, clamped }
}

fn wrap_degrees(mut a: f64) -> f64 {
    while a > 180.0 {
        a -= 360.0;
    }
    while a < -180.0 {
        a += 360.0;
    }
    a
}

/// Element gain of `antenna` at `from` in the direction of `toward`.
pub fn antenna_gain_db(antenna: &AntennaConfig, from: Point3, toward: Point3) -> f64 {
    match antenna.pattern {
        ElementPattern::Omni => antenna.max_element_gain_dbi,
        ElementPattern::Tgpp3d => {
            let dx = toward.x - from.x;
            let dy = toward.y - from.y;
            let dz = toward.z - from.z;
            let horizontal = dx.hypot(dy);
            let azimuth = if horizontal > 0.0 {
                wrap_degrees(dy.atan2(dx).to_degrees() - antenna.boresight_azimuth_deg)
            } else {
                0.0
            };
            // negative below the horizon; the downtilt lowers the lobe
            let elevation = dz.atan2(horizontal).to_degrees();
            let elevation_offset = elevation + antenna.tilt_deg;
            element_pattern_db(azimuth, elevation_offset) + antenna.max_element_gain_dbi
        }
    }
}

/// Directional element attenuation (dB, <= 0) for offsets from boresight.
pub fn element_pattern_db(azimuth_offset_deg: f64, elevation_offset_deg: f64) -> f64 {
    const BEAMWIDTH: f64 = 65.0;
    const FLOOR: f64 = 30.0;
    let horizontal = (12.0 * (azimuth_offset_deg / BEAMWIDTH).powi(2)).min(FLOOR);
    let vertical = (12.0 * (elevation_offset_deg / BEAMWIDTH).powi(2)).min(FLOOR);
    -(horizontal + vertical).min(FLOOR)
}

/// Fixed array gain granted on serving links.
pub fn array_gain_db(antenna: &AntennaConfig) -> f64 {
    linear_to_db(antenna.array.element_count() as f64)
}

/// Per-resource-element reference power.
pub fn rsrp_dbm(
    tx_power_dbm: f64,
    n_subcarriers_total: u32,
    gains: &LinkGainState,
) -> f64 {
    tx_power_dbm - linear_to_db(n_subcarriers_total as f64) + gains.antenna_gain_db
        + gains.beamforming_gain_db
        - gains.path_loss_db
        - gains.shadowing_db
}

pub fn noise_per_rb_dbm(noise_per_subcarrier_dbm: f64, subcarriers_per_rb: u32, nf_db: f64) -> f64 {
    noise_per_subcarrier_dbm + linear_to_db(subcarriers_per_rb as f64) + nf_db
}

/// `signal / (noise + sum of active interferers)`, all in linear power.
pub fn sinr_linear(signal_mw: f64, interferers: &[(f64, bool)], noise_mw: f64) -> f64 {
    let interference: f64 = interferers
        .iter()
        .filter(|(_, active)| *active)
        .map(|(p, _)| p)
        .sum();
    signal_mw / (noise_mw + interference)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub fc_ghz: f64,
    pub pathloss_model: PathLossModel,
    pub shadowing_enabled: bool,
    pub fast_fading_enabled: bool,
    pub decorrelation_distance_m: f64,
    pub noise_per_subcarrier_dbm: f64,
    pub noise_figure_db: f64,
    pub rician_k_db: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            fc_ghz: 28.0,
            pathloss_model: PathLossModel::Umi,
            shadowing_enabled: true,
            fast_fading_enabled: false,
            decorrelation_distance_m: 13.0,
            noise_per_subcarrier_dbm: -174.0,
            noise_figure_db: 9.0,
            rician_k_db: 10.0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if !(self.fc_ghz > 0.0) {
            errors.push(format!("channel.fc_ghz must be > 0 (got {})", self.fc_ghz));
        }
        if !(self.decorrelation_distance_m > 0.0) {
            errors.push(format!(
                "channel.decorrelation_distance_m must be > 0 (got {})",
                self.decorrelation_distance_m
            ));
        }
        if !self.noise_figure_db.is_finite() || !self.noise_per_subcarrier_dbm.is_finite() {
            errors.push("channel noise parameters must be finite".into());
        }
    }
}

/// Spatially correlated log-normal shadowing for one node pair, kept as a
/// unit-variance Gauss-Markov state scaled by the current sigma.
#[derive(Clone, Debug)]
pub struct ShadowingProcess {
    z: f64,
    last_relative: Point3,
    rng: ChaCha8Rng,
}

impl ShadowingProcess {
    pub fn new(seed: u64, tx: NodeId, rx: NodeId, relative: Point3) -> Self {
        let mut rng = rng::stream(seed, &[tags::SHADOWING, tx.0 as u64, rx.0 as u64]);
        let z = rng.sample(StandardNormal);
        Self {
            z,
            last_relative: relative,
            rng,
        }
    }

    pub fn unit_state(&self) -> f64 {
        self.z
    }

    /// Advances the state to a new relative displacement between the ends
    /// and returns the unit-variance value. Zero displacement keeps the
    /// previous value.
    pub fn update(&mut self, relative: Point3, decorrelation_m: f64) -> f64 {
        let moved = relative.distance(self.last_relative);
        if moved > 0.0 {
            let rho = (-moved / decorrelation_m).exp();
            let innovation: f64 = self.rng.sample(StandardNormal);
            self.z = rho * self.z + (1.0 - rho * rho).sqrt() * innovation;
            self.last_relative = relative;
        }
        self.z
    }

    pub fn shadowing_db(&self, sigma_db: f64) -> f64 {
        sigma_db * self.z
    }
}

/// Per-RB multiplicative power gain: Rician in LOS, Rayleigh in NLOS.
pub fn fading_power_gain<R: Rng>(state: LinkState, k_db: f64, rng: &mut R) -> f64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let scatter = (re * re + im * im) / 2.0;
    match state {
        LinkState::Nlos => scatter,
        LinkState::Los => {
            let k = db_to_linear(k_db);
            let a = (k / (k + 1.0)).sqrt();
            let b = (1.0 / (k + 1.0)).sqrt();
            let hr = a + b * re / std::f64::consts::SQRT_2;
            let hi = b * im / std::f64::consts::SQRT_2;
            hr * hr + hi * hi
        }
    }
}

/// Large-scale state of one base-station-side / terminal-side node pair.
/// The pair is reciprocal, so the same state serves DL and UL.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkGainState {
    pub tx_id: NodeId,
    pub rx_id: NodeId,
    pub los: LinkState,
    pub path_loss_db: f64,
    pub shadowing_db: f64,
    /// Sum of both element gains.
    pub antenna_gain_db: f64,
    /// Sum of both array gains, applied to serving links only.
    pub beamforming_gain_db: f64,
}

impl LinkGainState {
    pub fn serving_coupling_db(&self) -> f64 {
        self.antenna_gain_db + self.beamforming_gain_db - self.path_loss_db - self.shadowing_db
    }

    pub fn interference_coupling_db(&self) -> f64 {
        self.antenna_gain_db - self.path_loss_db - self.shadowing_db
    }
}

#[derive(Clone, Debug)]
struct PairEntry {
    state: LinkGainState,
    serving_lin: f64,
    interference_lin: f64,
    shadowing: ShadowingProcess,
}

/// Gain states between every base-station-side node (donors, DU) and
/// every terminal-side node (MT, passengers, pedestrians), refreshed once
/// per slot.
#[derive(Clone, Debug)]
pub struct GainTable {
    bs_nodes: Vec<NodeId>,
    ue_nodes: Vec<NodeId>,
    bs_index: Vec<Option<usize>>,
    ue_index: Vec<Option<usize>>,
    entries: Vec<Option<PairEntry>>,
    clamped_distances: u64,
}

impl GainTable {
    pub fn new(nodes: &NodeSet, layout: &Layout, cfg: &ChannelConfig, seed: u64) -> Self {
        let bs_nodes: Vec<NodeId> = nodes
            .nodes
            .iter()
            .filter(|n| n.kind.is_bs_side())
            .map(|n| n.id)
            .collect();
        let ue_nodes: Vec<NodeId> = nodes
            .nodes
            .iter()
            .filter(|n| !n.kind.is_bs_side())
            .map(|n| n.id)
            .collect();
        let mut bs_index = vec![None; nodes.len()];
        let mut ue_index = vec![None; nodes.len()];
        for (i, id) in bs_nodes.iter().enumerate() {
            bs_index[id.index()] = Some(i);
        }
        for (i, id) in ue_nodes.iter().enumerate() {
            ue_index[id.index()] = Some(i);
        }
        let mut entries = Vec::with_capacity(bs_nodes.len() * ue_nodes.len());
        for &b in &bs_nodes {
            for &u in &ue_nodes {
                // the mIAB's own MT and DU never form a radio link
                if b == nodes.du && u == nodes.mt {
                    entries.push(None);
                    continue;
                }
                let bs = nodes.node(b);
                let ue = nodes.node(u);
                let rel = relative(bs.position, ue.position);
                let shadowing = ShadowingProcess::new(seed, b, u, rel);
                let mut entry = PairEntry {
                    state: LinkGainState {
                        tx_id: b,
                        rx_id: u,
                        los: LinkState::Los,
                        path_loss_db: 0.0,
                        shadowing_db: 0.0,
                        antenna_gain_db: 0.0,
                        beamforming_gain_db: 0.0,
                    },
                    serving_lin: 0.0,
                    interference_lin: 0.0,
                    shadowing,
                };
                evaluate(&mut entry, bs, ue, layout, cfg, false);
                entries.push(Some(entry));
            }
        }
        Self {
            bs_nodes,
            ue_nodes,
            bs_index,
            ue_index,
            entries,
            clamped_distances: 0,
        }
    }

    pub fn refresh(&mut self, nodes: &NodeSet, layout: &Layout, cfg: &ChannelConfig) {
        let n_ue = self.ue_nodes.len();
        for (bi, &b) in self.bs_nodes.iter().enumerate() {
            let bs = nodes.node(b);
            for (ui, &u) in self.ue_nodes.iter().enumerate() {
                if let Some(entry) = self.entries[bi * n_ue + ui].as_mut() {
                    if evaluate(entry, bs, nodes.node(u), layout, cfg, true) {
                        self.clamped_distances += 1;
                    }
                }
            }
        }
    }

    fn entry(&self, a: NodeId, b: NodeId) -> Option<&PairEntry> {
        let (bs, ue) = match (self.bs_index[a.index()], self.ue_index[b.index()]) {
            (Some(bi), Some(ui)) => (bi, ui),
            _ => match (self.bs_index[b.index()], self.ue_index[a.index()]) {
                (Some(bi), Some(ui)) => (bi, ui),
                _ => return None,
            },
        };
        self.entries[bs * self.ue_nodes.len() + ue].as_ref()
    }

    /// Gain state of the pair `{a, b}` in either order.
    pub fn state(&self, a: NodeId, b: NodeId) -> Option<&LinkGainState> {
        self.entry(a, b).map(|e| &e.state)
    }

    /// Linear coupling (gains minus losses) including array gains.
    pub fn serving_lin(&self, a: NodeId, b: NodeId) -> f64 {
        self.entry(a, b).map_or(0.0, |e| e.serving_lin)
    }

    /// Linear coupling with element gains only.
    pub fn interference_lin(&self, a: NodeId, b: NodeId) -> f64 {
        self.entry(a, b).map_or(0.0, |e| e.interference_lin)
    }

    /// Number of pair evaluations whose distance was clamped to 1 m.
    pub fn clamped_distances(&self) -> u64 {
        self.clamped_distances
    }
}

fn relative(a: Point3, b: Point3) -> Point3 {
    Point3::new(b.x - a.x, b.y - a.y, b.z - a.z)
}

fn evaluate(
    entry: &mut PairEntry,
    bs: &Node,
    ue: &Node,
    layout: &Layout,
    cfg: &ChannelConfig,
    advance_shadowing: bool,
) -> bool {
    let los = determine_los(bs.position.ground(), ue.position.ground(), layout);
    let geometry = PathLossGeometry::between(bs.position, ue.position);
    let pl = path_loss_db(cfg.pathloss_model, &geometry, cfg.fc_ghz, los);
    let shadowing_db = if cfg.shadowing_enabled {
        if advance_shadowing {
            entry
                .shadowing
                .update(relative(bs.position, ue.position), cfg.decorrelation_distance_m);
        }
        entry
            .shadowing
            .shadowing_db(cfg.pathloss_model.shadowing_sigma_db(los))
    } else {
        0.0
    };
    let antenna_gain_db = antenna_gain_db(&bs.antenna, bs.position, ue.position)
        + antenna_gain_db(&ue.antenna, ue.position, bs.position);
    let beamforming_gain_db = array_gain_db(&bs.antenna) + array_gain_db(&ue.antenna);
    let state = &mut entry.state;
    state.los = los;
    state.path_loss_db = pl.db;
    state.shadowing_db = shadowing_db;
    state.antenna_gain_db = antenna_gain_db;
    state.beamforming_gain_db = beamforming_gain_db;
    entry.serving_lin = db_to_linear(state.serving_coupling_db());
    entry.interference_lin = db_to_linear(state.interference_coupling_db());
    pl.clamped
}

pub fn fading_stream(seed: u64, link: u64) -> ChaCha8Rng {
    rng::stream(seed, &[tags::FADING, link])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ArrayKind, NodeKind};
    use approx::assert_abs_diff_eq;

    fn geom(d3d: f64) -> PathLossGeometry {
        PathLossGeometry {
            d2d_m: (d3d * d3d - 23.5 * 23.5).max(0.0).sqrt(),
            d3d_m: d3d,
            bs_height_m: 25.0,
            ut_height_m: 1.5,
        }
    }

    #[test]
    fn umi_los_reference_values() {
        let pl = path_loss_db(PathLossModel::Umi, &geom(100.0), 28.0, LinkState::Los);
        assert_abs_diff_eq!(pl.db, 32.4 + 42.0 + 20.0 * 28f64.log10(), epsilon = 1e-12);
        assert_abs_diff_eq!(pl.db, 103.344, epsilon = 1e-3);
        let pl = path_loss_db(PathLossModel::Umi, &geom(1.0), 28.0, LinkState::Los);
        assert_abs_diff_eq!(pl.db, 61.344, epsilon = 1e-3);
        assert!(!pl.clamped);
    }

    #[test]
    fn short_distances_clamp() {
        let g = PathLossGeometry {
            d2d_m: 0.0,
            d3d_m: 0.3,
            bs_height_m: 2.5,
            ut_height_m: 2.2,
        };
        let pl = path_loss_db(PathLossModel::Umi, &g, 28.0, LinkState::Los);
        assert!(pl.clamped);
        assert_abs_diff_eq!(pl.db, 32.4 + 20.0 * 28f64.log10(), epsilon = 1e-12);
    }

    #[test]
    fn nlos_never_below_los() {
        for d in [1.0, 5.0, 30.0, 100.0, 400.0, 2000.0] {
            for model in [PathLossModel::Umi, PathLossModel::Uma] {
                let los = path_loss_db(model, &geom(d), 28.0, LinkState::Los).db;
                let nlos = path_loss_db(model, &geom(d), 28.0, LinkState::Nlos).db;
                assert!(nlos >= los, "{model:?} d={d}");
            }
        }
    }

    #[test]
    fn omni_and_directional_patterns() {
        let ue = NodeKind::PedestrianUe.antenna(0.0);
        assert_eq!(
            antenna_gain_db(&ue, Point3::new(0.0, 0.0, 1.5), Point3::new(5.0, -3.0, 9.0)),
            0.0
        );
        let donor = NodeKind::Donor.antenna(-90.0);
        let origin = Point3::new(0.0, 0.0, 25.0);
        // boresight at the tilt angle below the horizon
        let down = 12f64.to_radians().tan() * 100.0;
        let g = antenna_gain_db(&donor, origin, Point3::new(0.0, -100.0, 25.0 - down));
        assert_abs_diff_eq!(g, 8.0, epsilon = 1e-9);
        assert_abs_diff_eq!(element_pattern_db(65.0, 0.0) + 8.0, -4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(element_pattern_db(180.0, 0.0), -30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(element_pattern_db(50.0, 50.0), -14.201, epsilon = 1e-3);
    }

    #[test]
    fn array_gains() {
        let donor = NodeKind::Donor.antenna(0.0);
        let du = NodeKind::MiabDu.antenna(0.0);
        let ue = NodeKind::PassengerUe.antenna(0.0);
        assert_eq!(donor.array, ArrayKind::Ula64);
        assert_abs_diff_eq!(array_gain_db(&donor), 18.0618, epsilon = 1e-4);
        assert_abs_diff_eq!(array_gain_db(&du), 18.0618, epsilon = 1e-4);
        assert_eq!(array_gain_db(&ue), 0.0);
    }

    fn gains(pl: f64, ant: f64, bf: f64) -> LinkGainState {
        LinkGainState {
            tx_id: NodeId(0),
            rx_id: NodeId(1),
            los: LinkState::Los,
            path_loss_db: pl,
            shadowing_db: 0.0,
            antenna_gain_db: ant,
            beamforming_gain_db: bf,
        }
    }

    #[test]
    fn rsrp_examples() {
        let r = rsrp_dbm(35.0, 264, &gains(103.344, 8.0, 18.06));
        assert_abs_diff_eq!(r, -66.5, epsilon = 0.01);
        let r = rsrp_dbm(35.0, 264, &gains(0.0, 0.0, 0.0));
        assert_abs_diff_eq!(r, 10.784, epsilon = 1e-3);
    }

    #[test]
    fn sinr_examples() {
        assert_eq!(sinr_linear(2.0, &[], 2.0), 1.0);
        let s = db_to_linear(-90.0);
        let n = db_to_linear(noise_per_rb_dbm(-174.0, 12, 9.0));
        assert_abs_diff_eq!(noise_per_rb_dbm(-174.0, 12, 9.0), -154.208, epsilon = 1e-3);
        let sinr = sinr_linear(s, &[(db_to_linear(-100.0), true)], n);
        // noise is ~64 dB under the interferer, so only a hair below 10 dB
        let oracle = 1e-9 / (1e-10 + 10f64.powf(-15.4208));
        assert_abs_diff_eq!(sinr, oracle, epsilon = 1e-6);
        assert_abs_diff_eq!(linear_to_db(sinr), 10.0, epsilon = 1e-4);
        let near = sinr_linear(1.0, &[(1.0, true), (5.0, false)], 1e-15);
        assert_abs_diff_eq!(near, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shadowing_holds_without_motion() {
        let p = Point3::new(10.0, 0.0, 0.0);
        let mut s = ShadowingProcess::new(4, NodeId(0), NodeId(9), p);
        let z0 = s.unit_state();
        assert_eq!(s.update(p, 13.0), z0);
        assert_eq!(s.update(p, 13.0), z0);
    }

    #[test]
    fn shadowing_sigma_monte_carlo() {
        // independent draws: a fresh process per sample, each 1000 m apart
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut s = ShadowingProcess::new(11, NodeId(1), NodeId(2), Point3::default());
        for i in 0..n {
            s.update(Point3::new(1000.0 * (i + 1) as f64, 0.0, 0.0), 13.0);
            let v = s.shadowing_db(4.0);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let sd = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((sd - 4.0).abs() < 0.1, "sd {sd}");
    }

    #[test]
    fn fading_has_unit_mean() {
        let mut rng = fading_stream(3, 0);
        for state in [LinkState::Los, LinkState::Nlos] {
            let n = 50_000;
            let mean: f64 =
                (0..n).map(|_| fading_power_gain(state, 10.0, &mut rng)).sum::<f64>() / n as f64;
            assert!((mean - 1.0).abs() < 0.03, "{state:?} {mean}");
        }
    }
}
