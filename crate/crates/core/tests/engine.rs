use std::fs;

use iab_ta::channel::db_to_linear;
use iab_ta::mac::{link_capacity_bits, Direction, LinkAdaptation};
use iab_ta::metrics::{read_meta, BUFFERS_CSV, CONNECTION_CSV, RUN_META, THROUGHPUT_CSV};
use iab_ta::report::{aggregate, compare_dirs};
use iab_ta::{RunConfig, Simulation, TaPolicy};

fn short(policy: TaPolicy, slots: u64) -> RunConfig {
    let mut cfg = RunConfig::with_policy(policy);
    cfg.duration_slots = Some(slots);
    cfg
}

#[test]
fn replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short(TaPolicy::LoadAware, 3000);
    let a = iab_ta::run(cfg.clone()).unwrap();
    let b = iab_ta::run(cfg).unwrap();
    assert_eq!(a.state_hash, b.state_hash);
    a.write(&dir.path().join("a")).unwrap();
    b.write(&dir.path().join("b")).unwrap();
    for f in [THROUGHPUT_CSV, BUFFERS_CSV, CONNECTION_CSV, RUN_META] {
        let x = fs::read(dir.path().join("a").join(f)).unwrap();
        let y = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn different_seeds_differ() {
    let mut cfg = short(TaPolicy::Standard, 2000);
    let a = iab_ta::run(cfg.clone()).unwrap();
    cfg.seed = 2;
    let b = iab_ta::run(cfg).unwrap();
    assert_ne!(a.state_hash, b.state_hash);
}

#[test]
fn idle_network_records_zeros() {
    let mut cfg = short(TaPolicy::Standard, 1000);
    cfg.traffic.pedestrians_enabled = false;
    cfg.traffic.passengers_enabled = false;
    let mut sim = Simulation::new(cfg).unwrap();
    while let Some(r) = sim.step() {
        assert!(r.allocations.iter().all(|a| a.is_empty()));
        assert!(r.role.is_none());
    }
    assert_eq!(sim.traffic().total_buffered_bits(), 0);
    let out = sim.finish();
    assert_eq!(out.ledger.throughput.len(), 112 * 3);
    assert!(out.ledger.throughput.iter().all(|s| s.bits_delivered == 0));
}

#[test]
fn single_backlogged_link_gets_closed_form_capacity() {
    let mut cfg = short(TaPolicy::Standard, 400);
    cfg.scenario.ped_counts = vec![1, 0, 0];
    cfg.traffic.passengers_enabled = false;
    cfg.traffic.packet_size_bits = 1_000_000;
    cfg.channel.shadowing_enabled = false;
    let mut sim = Simulation::new(cfg).unwrap();
    let donor = sim.nodes().donors[0];
    let ped = sim.nodes().pedestrians[0];
    let mac = sim.config().mac.clone();
    let la = LinkAdaptation::from(&mac);
    let noise_rb = db_to_linear(-174.0 + 10.0 * 12f64.log10() + 9.0);
    let mut dl_slots = 0;
    while let Some(r) = sim.step() {
        if r.direction != Direction::Dl {
            continue;
        }
        let gains = sim.gains();
        let snr = db_to_linear(35.0) / 22.0 * 22.0 * gains.serving_lin(donor, ped) / (22.0 * noise_rb);
        assert_eq!(r.links.len(), 1);
        let l = r.links[0];
        assert_eq!(l.n_rbs, 22);
        assert!((l.sinr / snr - 1.0).abs() < 1e-9);
        let expected = link_capacity_bits(snr, 22, &mac.slot(r.slot), &la);
        assert_eq!(l.capacity_bits, expected);
        assert_eq!(l.sent_bits, expected);
        dl_slots += 1;
    }
    assert_eq!(dl_slots, 200);
}

#[test]
fn invariants_hold_over_a_run() {
    for policy in [TaPolicy::Standard, TaPolicy::LoadAware] {
        let mut sim = Simulation::new(short(policy, 8000)).unwrap();
        while let Some(r) = sim.step() {
            assert!(r.duplex.is_half_duplex());
            assert!(r.allocations.iter().all(|a| a.is_valid(22)));
            assert!(r.allocations.iter().all(|a| a.direction == r.direction));
        }
        assert!(sim.traffic().conservation_holds());
        let checks = *sim.checks();
        assert!(checks.all_passed(), "{checks:?}");
        assert_eq!(checks.slots, 8000);
    }
}

#[test]
fn load_aware_keeps_off_the_central_donor() {
    let out = iab_ta::run(short(TaPolicy::LoadAware, 60_000)).unwrap();
    let central = out.ledger.donors[1];
    assert!(out.ledger.attachments.iter().all(|r| r.donor_id != central));
    for e in &out.ledger.ta_events {
        assert_ne!(e.to, central);
    }
}

#[test]
fn outputs_round_trip_and_self_compare_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let runs = iab_ta::sweep(&short(TaPolicy::Standard, 2000), &[1, 2]).unwrap();
    let (ledger, meta) = aggregate(&runs).unwrap();
    assert_eq!(meta.seeds, vec![1, 2]);
    assert_eq!(ledger.throughput.len(), runs[0].ledger.throughput.len() * 2);
    iab_ta::metrics::write_outputs(&ledger, &meta, dir.path()).unwrap();
    let back = read_meta(dir.path()).unwrap();
    assert_eq!(back, meta);
    let cmp = compare_dirs(dir.path(), dir.path()).unwrap();
    assert!(!cmp.throughput.is_empty());
    assert!(cmp.throughput.iter().all(|d| d.delta_pct == 0.0));
    let header = fs::read_to_string(dir.path().join(THROUGHPUT_CSV)).unwrap();
    assert!(header.starts_with("ue_id,class,direction,window_start_slot,bits\n"));
    let conn = fs::read_to_string(dir.path().join(CONNECTION_CSV)).unwrap();
    assert!(conn.starts_with("donor_id,slots,fraction\n"));
}

#[test]
fn missing_run_directory_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        compare_dirs(dir.path(), dir.path()),
        Err(iab_ta::Error::MissingRun(_))
    ));
}

#[test]
fn full_route_length() {
    let sim = Simulation::new(RunConfig::default()).unwrap();
    // 423 m at 50 km/h in 0.25 ms slots, plus the arrival slot
    assert_eq!(sim.run_slots(), 121_825);
}
