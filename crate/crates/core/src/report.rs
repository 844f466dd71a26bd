//! Multi-seed aggregation and side-by-side comparison of run directories.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mac::Direction;
use crate::metrics::{
    read_connection_rows, read_meta, read_throughput_bps, BufferSnapshot, CdfTable,
    CheckCounters, MetricsLedger, RunMeta,
};
use crate::sim::RunOutput;
use crate::traffic::UeClass;

pub const PERCENTILES: [f64; 3] = [10.0, 50.0, 90.0];

pub const CLASSES: [(UeClass, Direction); 4] = [
    (UeClass::Passenger, Direction::Ul),
    (UeClass::Passenger, Direction::Dl),
    (UeClass::Pedestrian, Direction::Ul),
    (UeClass::Pedestrian, Direction::Dl),
];

fn add_checks(acc: &mut CheckCounters, c: &CheckCounters) {
    acc.slots += c.slots;
    acc.conservation_checks += c.conservation_checks;
    acc.conservation_failures += c.conservation_failures;
    acc.ta_conservation_failures += c.ta_conservation_failures;
    acc.half_duplex_violations += c.half_duplex_violations;
    acc.rb_overlap_violations += c.rb_overlap_violations;
    acc.fifo_violations += c.fifo_violations;
    acc.clamped_distances += c.clamped_distances;
}

/// Pools the runs: throughput windows and attachment time are concatenated,
/// buffer snapshots are averaged slot by slot.
pub fn aggregate(runs: &[RunOutput]) -> Option<(MetricsLedger, RunMeta)> {
    let first = runs.first()?;
    let mut ledger = MetricsLedger {
        run_slots: first.ledger.run_slots,
        slot_duration_s: first.ledger.slot_duration_s,
        donors: first.ledger.donors.clone(),
        ..Default::default()
    };
    for r in runs {
        ledger.throughput.extend_from_slice(&r.ledger.throughput);
        ledger.attachments.extend_from_slice(&r.ledger.attachments);
        ledger.ta_events.extend_from_slice(&r.ledger.ta_events);
        add_checks(&mut ledger.checks, &r.ledger.checks);
    }
    let n_snap = runs.iter().map(|r| r.ledger.buffers.len()).min().unwrap_or(0);
    let n = runs.len() as u64;
    for i in 0..n_snap {
        let snaps: Vec<&BufferSnapshot> = runs.iter().map(|r| &r.ledger.buffers[i]).collect();
        let mean = |f: &dyn Fn(&BufferSnapshot) -> u64| snaps.iter().map(|s| f(s)).sum::<u64>() / n;
        ledger.buffers.push(BufferSnapshot {
            slot: snaps[0].slot,
            mt_ul_bits: mean(&|s| s.mt_ul_bits),
            du_dl_bits: mean(&|s| s.du_dl_bits),
            donor_backhaul_dl_bits: mean(&|s| s.donor_backhaul_dl_bits),
            donor_dl_bits: snaps[0]
                .donor_dl_bits
                .iter()
                .enumerate()
                .map(|(k, (d, _))| (*d, snaps.iter().map(|s| s.donor_dl_bits[k].1).sum::<u64>() / n))
                .collect(),
        });
    }
    let mut meta = first.meta.clone();
    meta.seeds = runs.iter().map(|r| r.seed).collect();
    Some((ledger, meta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercentileDelta {
    pub class: UeClass,
    pub direction: Direction,
    pub percentile: f64,
    pub a_bps: f64,
    pub b_bps: f64,
    /// `(b - a) / a` in percent; 0 when both are 0.
    pub delta_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionDelta {
    pub donor_id: u32,
    pub a_fraction: f64,
    pub b_fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub throughput: Vec<PercentileDelta>,
    pub connection: Vec<ConnectionDelta>,
}

pub fn relative_delta_pct(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else if a == 0.0 {
        f64::INFINITY.copysign(b)
    } else {
        (b - a) / a * 100.0
    }
}

/// Percentile deltas of B relative to A for every UE class and direction.
pub fn compare_dirs(a: &Path, b: &Path) -> Result<Comparison> {
    let (ma, mb) = (read_meta(a)?, read_meta(b)?);
    if ma.schema_version != mb.schema_version {
        return Err(Error::SchemaMismatch {
            left: ma.schema_version,
            right: mb.schema_version,
        });
    }
    let mut out = Comparison::default();
    for (class, direction) in CLASSES {
        let ca = CdfTable::new(read_throughput_bps(a, class, direction)?);
        let cb = CdfTable::new(read_throughput_bps(b, class, direction)?);
        if ca.is_empty() || cb.is_empty() {
            continue;
        }
        for p in PERCENTILES {
            let (va, vb) = (ca.percentile(p)?, cb.percentile(p)?);
            out.throughput.push(PercentileDelta {
                class,
                direction,
                percentile: p,
                a_bps: va,
                b_bps: vb,
                delta_pct: relative_delta_pct(va, vb),
            });
        }
    }
    let (conn_a, conn_b) = (read_connection_rows(a)?, read_connection_rows(b)?);
    for ra in &conn_a {
        let b_fraction = conn_b
            .iter()
            .find(|rb| rb.donor_id == ra.donor_id)
            .map_or(0.0, |rb| rb.fraction.parse().unwrap_or(0.0));
        out.connection.push(ConnectionDelta {
            donor_id: ra.donor_id,
            a_fraction: ra.fraction.parse().unwrap_or(0.0),
            b_fraction,
        });
    }
    Ok(out)
}
