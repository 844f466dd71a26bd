//! Throughput windows, buffer snapshots, connection-time shares, CDFs, and
//! the CSV files consumed by the plotting scripts.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mac::Direction;
use crate::scenario::NodeId;
use crate::topology::{AttachmentRecord, TaEvent};
use crate::traffic::{Delivery, Flow, UeClass};

/// Bumped whenever a CSV layout changes.
pub const SCHEMA_VERSION: &str = "iab-ta-metrics/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub window_slots: u64,
    pub snapshot_cadence: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            window_slots: 400,
            snapshot_cadence: 40,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if self.window_slots == 0 {
            errors.push("metrics.window_slots must be > 0".into());
        }
        if self.snapshot_cadence == 0 {
            errors.push("metrics.snapshot_cadence must be > 0".into());
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThroughputSample {
    pub ue_id: NodeId,
    pub ue_class: UeClass,
    pub direction: Direction,
    pub window_start_slot: u64,
    pub bits_delivered: u64,
    pub window_slots: u64,
}

impl ThroughputSample {
    pub fn bps(&self, slot_duration_s: f64) -> f64 {
        self.bits_delivered as f64 / (self.window_slots as f64 * slot_duration_s)
    }
}

/// One sample per flow for a window, zeros included.
pub fn record_window(
    flows: &[Flow],
    delivered_bits: &[u64],
    window_start_slot: u64,
    window_slots: u64,
) -> Vec<ThroughputSample> {
    flows
        .iter()
        .zip(delivered_bits)
        .map(|(f, &bits)| ThroughputSample {
            ue_id: f.ue,
            ue_class: f.class,
            direction: f.direction,
            window_start_slot,
            bits_delivered: bits,
            window_slots,
        })
        .collect()
}

/// Accumulates delivered bits per flow and closes fixed windows.
#[derive(Clone, Debug)]
pub struct ThroughputRecorder {
    flows: Vec<Flow>,
    window_slots: u64,
    window_start: u64,
    accum: Vec<u64>,
    samples: Vec<ThroughputSample>,
}

impl ThroughputRecorder {
    pub fn new(flows: &[Flow], window_slots: u64) -> Self {
        Self {
            flows: flows.to_vec(),
            window_slots,
            window_start: 0,
            accum: vec![0; flows.len()],
            samples: Vec::new(),
        }
    }

    pub fn record(&mut self, d: &Delivery) {
        self.accum[d.flow.0 as usize] += d.bits;
    }

    /// Call after slot `slot` has been processed.
    pub fn end_of_slot(&mut self, slot: u64) {
        if slot + 1 - self.window_start == self.window_slots {
            self.close(slot + 1);
        }
    }

    fn close(&mut self, end: u64) {
        let len = end - self.window_start;
        self.samples
            .extend(record_window(&self.flows, &self.accum, self.window_start, len));
        self.accum.iter_mut().for_each(|b| *b = 0);
        self.window_start = end;
    }

    /// Emits the trailing partial window, if any.
    pub fn finish(mut self, run_slots: u64) -> Vec<ThroughputSample> {
        if run_slots > self.window_start {
            self.close(run_slots);
        }
        self.samples
    }
}

pub const SERIES_MT_UL: &str = "mt_ul_bits";
pub const SERIES_DU_DL: &str = "du_dl_bits";
pub const SERIES_DONOR_BACKHAUL_DL: &str = "donor_bh_dl_bits";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferSnapshot {
    pub slot: u64,
    /// Passenger UL bits waiting at the MT.
    pub mt_ul_bits: u64,
    /// Passenger DL bits waiting at the DU.
    pub du_dl_bits: u64,
    /// Passenger DL bits waiting at any donor for the backhaul.
    pub donor_backhaul_dl_bits: u64,
    /// Full DL load per donor, in donor order.
    pub donor_dl_bits: Vec<(NodeId, u64)>,
}

impl BufferSnapshot {
    pub fn series(&self) -> Vec<(String, u64)> {
        let mut out = vec![
            (SERIES_MT_UL.to_string(), self.mt_ul_bits),
            (SERIES_DU_DL.to_string(), self.du_dl_bits),
            (SERIES_DONOR_BACKHAUL_DL.to_string(), self.donor_backhaul_dl_bits),
        ];
        out.extend(
            self.donor_dl_bits
                .iter()
                .map(|(d, b)| (donor_series_name(*d), *b)),
        );
        out
    }
}

pub fn donor_series_name(donor: NodeId) -> String {
    format!("donor{}_dl_bits", donor.0)
}

/// Sorted samples with linearly interpolated percentiles.
#[derive(Clone, Debug, PartialEq)]
pub struct CdfTable {
    sorted: Vec<f64>,
}

impl CdfTable {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.retain(|v| !v.is_nan());
        samples.sort_by(f64::total_cmp);
        Self { sorted: samples }
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `p` in `[0, 100]`; interpolates between the order statistics at
    /// rank `p / 100 * (n - 1)`.
    pub fn percentile(&self, p: f64) -> Result<f64> {
        percentile(&self.sorted, p)
    }
}

/// Percentile of already sorted samples.
pub fn percentile(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptySamples);
    }
    let rank = p.clamp(0.0, 100.0) / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionShare {
    pub donor_id: NodeId,
    pub slots: u64,
    pub fraction: f64,
}

/// Share of the run spent under each donor; donors never used get 0.
pub fn connection_time_report(
    records: &[AttachmentRecord],
    donors: &[NodeId],
) -> Vec<ConnectionShare> {
    let total: u64 = records.iter().map(AttachmentRecord::slots).sum();
    donors
        .iter()
        .map(|&d| {
            let slots = records
                .iter()
                .filter(|r| r.donor_id == d)
                .map(AttachmentRecord::slots)
                .sum();
            ConnectionShare {
                donor_id: d,
                slots,
                fraction: if total > 0 {
                    slots as f64 / total as f64
                } else {
                    0.0
                },
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckCounters {
    pub slots: u64,
    pub conservation_checks: u64,
    pub conservation_failures: u64,
    pub ta_conservation_failures: u64,
    pub half_duplex_violations: u64,
    pub rb_overlap_violations: u64,
    pub fifo_violations: u64,
    pub clamped_distances: u64,
}

impl CheckCounters {
    pub fn all_passed(&self) -> bool {
        self.conservation_failures == 0
            && self.ta_conservation_failures == 0
            && self.half_duplex_violations == 0
            && self.rb_overlap_violations == 0
            && self.fifo_violations == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLedger {
    pub run_slots: u64,
    pub slot_duration_s: f64,
    pub donors: Vec<NodeId>,
    pub throughput: Vec<ThroughputSample>,
    pub buffers: Vec<BufferSnapshot>,
    pub attachments: Vec<AttachmentRecord>,
    pub ta_events: Vec<TaEvent>,
    pub checks: CheckCounters,
}

impl MetricsLedger {
    pub fn connection_shares(&self) -> Vec<ConnectionShare> {
        connection_time_report(&self.attachments, &self.donors)
    }

    pub fn throughput_cdf(&self, class: UeClass, direction: Direction) -> CdfTable {
        CdfTable::new(
            self.throughput
                .iter()
                .filter(|s| s.ue_class == class && s.direction == direction)
                .map(|s| s.bps(self.slot_duration_s))
                .collect(),
        )
    }

    pub fn series(&self, name: &str) -> Vec<(u64, u64)> {
        self.buffers
            .iter()
            .filter_map(|s| {
                s.series()
                    .into_iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, b)| (s.slot, b))
            })
            .collect()
    }
}

/// Descriptive header written next to the CSVs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub schema_version: String,
    pub git_describe: String,
    pub policy: String,
    pub seeds: Vec<u64>,
    pub run_slots: u64,
    pub slot_duration_s: f64,
    pub window_slots: u64,
    pub snapshot_cadence: u64,
    pub config: toml::Table,
}

pub const THROUGHPUT_CSV: &str = "throughput.csv";
pub const BUFFERS_CSV: &str = "buffers.csv";
pub const CONNECTION_CSV: &str = "connection_time.csv";
pub const RUN_META: &str = "run_meta.toml";

#[derive(Debug, Serialize, Deserialize)]
pub struct ThroughputRow {
    pub ue_id: u32,
    pub class: String,
    pub direction: String,
    pub window_start_slot: u64,
    pub bits: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BufferRow {
    pub slot: u64,
    pub series: String,
    pub bits: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConnectionRow {
    pub donor_id: u32,
    pub slots: u64,
    pub fraction: String,
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: impl Iterator<Item = T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_throughput(path: &Path, samples: &[ThroughputSample]) -> Result<()> {
    write_csv(
        path,
        &["ue_id", "class", "direction", "window_start_slot", "bits"],
        samples.iter().map(|s| ThroughputRow {
            ue_id: s.ue_id.0,
            class: s.ue_class.as_str().into(),
            direction: s.direction.as_str().into(),
            window_start_slot: s.window_start_slot,
            bits: s.bits_delivered,
        }),
    )
}

pub fn write_buffers(path: &Path, rows: &[BufferRow]) -> Result<()> {
    write_csv(path, &["slot", "series", "bits"], rows.iter())
}

pub fn snapshot_rows(snapshots: &[BufferSnapshot]) -> Vec<BufferRow> {
    snapshots
        .iter()
        .flat_map(|s| {
            s.series().into_iter().map(|(series, bits)| BufferRow {
                slot: s.slot,
                series,
                bits,
            })
        })
        .collect()
}

pub fn write_connection(path: &Path, shares: &[ConnectionShare]) -> Result<()> {
    write_csv(
        path,
        &["donor_id", "slots", "fraction"],
        shares.iter().map(|s| ConnectionRow {
            donor_id: s.donor_id.0,
            slots: s.slots,
            fraction: format!("{:.6}", s.fraction),
        }),
    )
}

pub fn write_meta(path: &Path, meta: &RunMeta) -> Result<()> {
    let text = toml::to_string(meta).map_err(|e| Error::ConfigParse(e.to_string()))?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn prepare_dir(out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))
}

/// Writes the four run files into `out_dir`, creating it if needed.
pub fn write_outputs(ledger: &MetricsLedger, meta: &RunMeta, out_dir: &Path) -> Result<()> {
    prepare_dir(out_dir)?;
    write_throughput(&out_dir.join(THROUGHPUT_CSV), &ledger.throughput)?;
    write_buffers(&out_dir.join(BUFFERS_CSV), &snapshot_rows(&ledger.buffers))?;
    write_connection(&out_dir.join(CONNECTION_CSV), &ledger.connection_shares())?;
    write_meta(&out_dir.join(RUN_META), meta)
}

pub fn read_meta(dir: &Path) -> Result<RunMeta> {
    let path = dir.join(RUN_META);
    let text = fs::read_to_string(&path).map_err(|_| Error::MissingRun(dir.to_path_buf()))?;
    toml::from_str(&text).map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::csv(path, e))
}

pub fn read_throughput_rows(dir: &Path) -> Result<Vec<ThroughputRow>> {
    read_rows(&dir.join(THROUGHPUT_CSV))
}

pub fn read_buffer_rows(dir: &Path) -> Result<Vec<BufferRow>> {
    read_rows(&dir.join(BUFFERS_CSV))
}

pub fn read_connection_rows(dir: &Path) -> Result<Vec<ConnectionRow>> {
    read_rows(&dir.join(CONNECTION_CSV))
}

/// Window throughputs (bit/s) read back from a run or aggregate directory.
pub fn read_throughput_bps(dir: &Path, class: UeClass, direction: Direction) -> Result<Vec<f64>> {
    let meta = read_meta(dir)?;
    let rows = read_throughput_rows(dir)?;
    Ok(rows
        .iter()
        .filter(|r| r.class == class.as_str() && r.direction == direction.as_str())
        .map(|r| {
            let len = meta
                .window_slots
                .min(meta.run_slots.saturating_sub(r.window_start_slot))
                .max(1);
            r.bits as f64 / (len as f64 * meta.slot_duration_s)
        })
        .collect())
}
