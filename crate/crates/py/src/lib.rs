//! Python bindings: the simulation engine plus the stand-alone channel,
//! link-rate and parent-selection formulas.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use iab_ta::channel::{self, LinkGainState, LinkState, PathLossGeometry, PathLossModel};
use iab_ta::mac::{self, Direction, LinkAdaptation, MacConfig};
use iab_ta::metrics::CdfTable;
use iab_ta::scenario::NodeId;
use iab_ta::topology::{self, DonorCandidate, LoopSemantics, TaConfig};
use iab_ta::traffic::UeClass;
use iab_ta::{Error, RunConfig, TaPolicy};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Csv { .. } | Error::MissingRun(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_policy(policy: &str) -> PyResult<TaPolicy> {
    match policy {
        "standard" => Ok(TaPolicy::Standard),
        "load_aware" => Ok(TaPolicy::LoadAware),
        other => Err(PyValueError::new_err(format!(
            "unknown policy {other:?}; expected 'standard' or 'load_aware'"
        ))),
    }
}

fn parse_model(model: &str) -> PyResult<PathLossModel> {
    match model {
        "umi" => Ok(PathLossModel::Umi),
        "uma" => Ok(PathLossModel::Uma),
        other => Err(PyValueError::new_err(format!("unknown path-loss model {other:?}"))),
    }
}

fn candidates(cands: Vec<(u32, u64, f64)>) -> Vec<DonorCandidate> {
    cands
        .into_iter()
        .map(|(id, bits, rsrp)| DonorCandidate {
            donor_id: NodeId(id),
            bits,
            rsrp_dbm: rsrp,
        })
        .collect()
}

fn parent_of(parent: u32, cands: &[DonorCandidate]) -> PyResult<DonorCandidate> {
    cands
        .iter()
        .find(|c| c.donor_id.0 == parent)
        .copied()
        .ok_or_else(|| PyValueError::new_err(format!("parent {parent} is not among the candidates")))
}

/// One simulation run, stepped from Python.
#[pyclass(name = "Simulation", module = "iab_ta_py")]
struct PySimulation {
    inner: Option<iab_ta::Simulation>,
}

impl PySimulation {
    fn sim(&self) -> PyResult<&iab_ta::Simulation> {
        self.inner
            .as_ref()
            .ok_or_else(|| PyRuntimeError::new_err("simulation already finished"))
    }

    fn sim_mut(&mut self) -> PyResult<&mut iab_ta::Simulation> {
        self.inner
            .as_mut()
            .ok_or_else(|| PyRuntimeError::new_err("simulation already finished"))
    }
}

#[pymethods]
impl PySimulation {
    /// `config_toml` overrides everything else when given.
    #[new]
    #[pyo3(signature = (policy = "standard", seed = 1, duration_slots = None, config_toml = None))]
    fn new(
        policy: &str,
        seed: u64,
        duration_slots: Option<u64>,
        config_toml: Option<&str>,
    ) -> PyResult<Self> {
        let cfg = match config_toml {
            Some(text) => RunConfig::from_toml_str(text).map_err(py_err)?,
            None => {
                let mut cfg = RunConfig::with_policy(parse_policy(policy)?);
                cfg.seed = seed;
                cfg.duration_slots = duration_slots;
                cfg
            }
        };
        let sim = iab_ta::Simulation::new(cfg).map_err(py_err)?;
        Ok(Self { inner: Some(sim) })
    }

    #[getter]
    fn slot(&self) -> PyResult<u64> {
        Ok(self.sim()?.slot())
    }

    #[getter]
    fn run_slots(&self) -> PyResult<u64> {
        Ok(self.sim()?.run_slots())
    }

    #[getter]
    fn parent(&self) -> PyResult<u32> {
        Ok(self.sim()?.parent().0)
    }

    #[getter]
    fn finished(&self) -> PyResult<bool> {
        Ok(self.sim()?.is_finished())
    }

    /// Filtered donor RSRPs at the MT (dBm), in donor order.
    fn rsrp_dbm(&self) -> PyResult<Vec<f64>> {
        Ok(self.sim()?.filtered_rsrp().to_vec())
    }

    fn buffered_bits(&self) -> PyResult<u64> {
        Ok(self.sim()?.traffic().total_buffered_bits())
    }

    fn donor_load_bits(&self) -> PyResult<Vec<u64>> {
        let sim = self.sim()?;
        Ok(sim
            .nodes()
            .donors
            .iter()
            .map(|&d| sim.traffic().donor_load_bits(d))
            .collect())
    }

    /// Runs one slot and returns a summary, or `None` at the end of the run.
    fn step<'py>(&mut self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        let Some(r) = self.sim_mut()?.step() else {
            return Ok(None);
        };
        let d = PyDict::new(py);
        d.set_item("slot", r.slot)?;
        d.set_item("direction", r.direction.as_str())?;
        d.set_item(
            "role",
            r.role.map(|role| match role {
                mac::MiabRole::Backhaul => "backhaul",
                mac::MiabRole::Access => "access",
            }),
        )?;
        d.set_item("parent", r.parent.0)?;
        d.set_item("half_duplex_ok", r.duplex.is_half_duplex())?;
        d.set_item(
            "links",
            r.links
                .iter()
                .map(|l| (l.link.tx.0, l.link.rx.0, l.n_rbs, l.sinr, l.capacity_bits, l.sent_bits))
                .collect::<Vec<_>>(),
        )?;
        d.set_item("ta_event", r.ta_event.map(|e| (e.from.0, e.to.0, e.moved_bits)))?;
        Ok(Some(d))
    }

    /// Advances up to `slots` slots (to the end when omitted); returns the
    /// number executed.
    #[pyo3(signature = (slots = None))]
    fn advance(&mut self, py: Python<'_>, slots: Option<u64>) -> PyResult<u64> {
        let sim = self.sim_mut()?;
        let limit = slots.unwrap_or(u64::MAX);
        Ok(py.detach(|| {
            let mut n = 0;
            while n < limit && sim.step().is_some() {
                n += 1;
            }
            n
        }))
    }

    /// Closes the run, optionally writes the CSV outputs, and returns the
    /// headline metrics.
    #[pyo3(signature = (out_dir = None))]
    fn finish<'py>(&mut self, py: Python<'py>, out_dir: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
        let sim = self
            .inner
            .take()
            .ok_or_else(|| PyRuntimeError::new_err("simulation already finished"))?;
        let out = sim.finish();
        if let Some(dir) = out_dir {
            out.write(&dir).map_err(py_err)?;
        }
        let l = &out.ledger;
        let d = PyDict::new(py);
        d.set_item("run_slots", l.run_slots)?;
        d.set_item(
            "connection",
            l.connection_shares()
                .iter()
                .map(|s| (s.donor_id.0, s.slots, s.fraction))
                .collect::<Vec<_>>(),
        )?;
        d.set_item("ta_events", l.ta_events.len())?;
        d.set_item("checks_passed", l.checks.all_passed())?;
        d.set_item("state_hash", out.state_hash)?;
        for (class, dir) in iab_ta::report::CLASSES {
            let cdf = l.throughput_cdf(class, dir);
            let key = format!("{}_{}_bps", class.as_str(), dir.as_str());
            let pcts = iab_ta::report::PERCENTILES
                .iter()
                .map(|p| cdf.percentile(*p).ok())
                .collect::<Vec<_>>();
            d.set_item(key, pcts)?;
        }
        Ok(d)
    }
}

/// Path loss in dB between a base station and a terminal.
#[pyfunction]
#[pyo3(signature = (d2d_m, bs_height_m, ut_height_m, fc_ghz = 28.0, los = true, model = "umi"))]
fn path_loss_db(
    d2d_m: f64,
    bs_height_m: f64,
    ut_height_m: f64,
    fc_ghz: f64,
    los: bool,
    model: &str,
) -> PyResult<f64> {
    let g = PathLossGeometry {
        d2d_m,
        d3d_m: d2d_m.hypot(bs_height_m - ut_height_m),
        bs_height_m,
        ut_height_m,
    };
    let state = if los { LinkState::Los } else { LinkState::Nlos };
    Ok(channel::path_loss_db(parse_model(model)?, &g, fc_ghz, state).db)
}

#[pyfunction]
#[pyo3(signature = (tx_power_dbm, path_loss_db, shadowing_db = 0.0, antenna_gain_db = 0.0, beamforming_gain_db = 0.0, n_subcarriers = 264))]
fn rsrp_dbm(
    tx_power_dbm: f64,
    path_loss_db: f64,
    shadowing_db: f64,
    antenna_gain_db: f64,
    beamforming_gain_db: f64,
    n_subcarriers: u32,
) -> f64 {
    let g = LinkGainState {
        tx_id: NodeId(0),
        rx_id: NodeId(1),
        los: LinkState::Los,
        path_loss_db,
        shadowing_db,
        antenna_gain_db,
        beamforming_gain_db,
    };
    channel::rsrp_dbm(tx_power_dbm, n_subcarriers, &g)
}

#[pyfunction]
#[pyo3(signature = (noise_per_subcarrier_dbm = -174.0, subcarriers_per_rb = 12, noise_figure_db = 9.0))]
fn noise_per_rb_dbm(noise_per_subcarrier_dbm: f64, subcarriers_per_rb: u32, noise_figure_db: f64) -> f64 {
    channel::noise_per_rb_dbm(noise_per_subcarrier_dbm, subcarriers_per_rb, noise_figure_db)
}

/// Linear SINR from linear signal, interferer and noise powers.
#[pyfunction]
#[pyo3(signature = (signal_mw, interferers_mw, noise_mw))]
fn sinr_linear(signal_mw: f64, interferers_mw: Vec<f64>, noise_mw: f64) -> f64 {
    let i: Vec<(f64, bool)> = interferers_mw.into_iter().map(|p| (p, true)).collect();
    channel::sinr_linear(signal_mw, &i, noise_mw)
}

#[pyfunction]
fn link_capacity_bits(sinr: f64, n_rbs: u32) -> PyResult<u64> {
    let mac_cfg = MacConfig::default();
    if n_rbs > mac_cfg.n_rbs {
        return Err(PyValueError::new_err(format!("n_rbs must be <= {}", mac_cfg.n_rbs)));
    }
    Ok(mac::link_capacity_bits(
        sinr,
        n_rbs,
        &mac_cfg.slot(0),
        &LinkAdaptation::from(&mac_cfg),
    ))
}

/// Candidates are `(donor_id, buffered_bits, rsrp_dbm)` tuples and must
/// include the parent.
#[pyfunction]
#[pyo3(signature = (parent, candidates, hysteresis_db = 3.0))]
fn update_parent_standard(parent: u32, candidates: Vec<(u32, u64, f64)>, hysteresis_db: f64) -> PyResult<u32> {
    let cands = self::candidates(candidates);
    let p = parent_of(parent, &cands)?;
    Ok(topology::update_parent_standard(&p, &cands, hysteresis_db).0)
}

#[pyfunction]
#[pyo3(signature = (parent, candidates, min_rsrp_dbm = -110.0, min_rsrp_diff_db = 10.0, sequential = true))]
fn update_parent_load_aware(
    parent: u32,
    candidates: Vec<(u32, u64, f64)>,
    min_rsrp_dbm: f64,
    min_rsrp_diff_db: f64,
    sequential: bool,
) -> PyResult<u32> {
    let cands = self::candidates(candidates);
    let p = parent_of(parent, &cands)?;
    let cfg = TaConfig {
        min_rsrp_dbm,
        min_rsrp_diff_db,
        semantics: if sequential {
            LoopSemantics::Sequential
        } else {
            LoopSemantics::BestCandidate
        },
        ..TaConfig::default()
    };
    Ok(topology::update_parent_load_aware(&p, &cands, &cfg).0)
}

#[pyfunction]
fn percentile(samples: Vec<f64>, p: f64) -> PyResult<f64> {
    CdfTable::new(samples).percentile(p).map_err(py_err)
}

/// Pooled throughput samples (bit/s) of one class and direction read back
/// from a run directory.
#[pyfunction]
fn read_throughput_bps(run_dir: PathBuf, class: &str, direction: &str) -> PyResult<Vec<f64>> {
    let class = match class {
        "passenger" => UeClass::Passenger,
        "pedestrian" => UeClass::Pedestrian,
        other => return Err(PyValueError::new_err(format!("unknown class {other:?}"))),
    };
    let direction = match direction {
        "DL" | "dl" => Direction::Dl,
        "UL" | "ul" => Direction::Ul,
        other => return Err(PyValueError::new_err(format!("unknown direction {other:?}"))),
    };
    iab_ta::metrics::read_throughput_bps(&run_dir, class, direction).map_err(py_err)
}

#[pymodule]
fn iab_ta_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(path_loss_db, m)?)?;
    m.add_function(wrap_pyfunction!(rsrp_dbm, m)?)?;
    m.add_function(wrap_pyfunction!(noise_per_rb_dbm, m)?)?;
    m.add_function(wrap_pyfunction!(sinr_linear, m)?)?;
    m.add_function(wrap_pyfunction!(link_capacity_bits, m)?)?;
    m.add_function(wrap_pyfunction!(update_parent_standard, m)?)?;
    m.add_function(wrap_pyfunction!(update_parent_load_aware, m)?)?;
    m.add_function(wrap_pyfunction!(percentile, m)?)?;
    m.add_function(wrap_pyfunction!(read_throughput_bps, m)?)?;
    Ok(())
}
