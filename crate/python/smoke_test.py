"""Smoke test for the iab_ta_py extension.

Build and install first:
    pip install maturin
    pip install --no-build-isolation -e crates/py
then run:
    python python/smoke_test.py
"""

import math
import sys
import tempfile
from pathlib import Path

import iab_ta_py as ta


def check(cond, msg):
    if not cond:
        print(f"FAIL: {msg}")
        sys.exit(1)
    print(f"ok   {msg}")


def formulas():
    check(abs(ta.path_loss_db(0.0, 2.5, 1.5) - 61.344) < 1e-3, "path loss at 1 m")
    check(abs(ta.noise_per_rb_dbm() - (-154.208)) < 1e-3, "noise per RB")
    check(abs(ta.rsrp_dbm(35.0, 0.0) - 10.784) < 1e-3, "RSRP with no losses")
    snr = ta.sinr_linear(1e-9, [1e-10], 10 ** -15.4208)
    check(abs(10 * math.log10(snr) - 10.0) < 1e-3, "SINR example")
    check(ta.link_capacity_bits(1.0, 1) == 126, "capacity at 0 dB on one RB")
    check(ta.link_capacity_bits(1e6, 22) == 20512, "capacity at the SE cap")
    check(ta.percentile([1, 2, 3, 4, 5, 6, 7, 8, 9, 10], 50) == 5.5, "median")


def policies():
    cands = [(0, 10_000, -80.0), (1, 4_000, -75.0), (2, 3_000, -88.0)]
    check(ta.update_parent_load_aware(0, cands) == 1, "load-aware sequential scan")
    check(ta.update_parent_load_aware(0, cands, sequential=False) == 2, "load-aware best candidate")
    check(ta.update_parent_standard(0, cands) == 1, "standard strongest with hysteresis")


def simulation():
    sim = ta.Simulation(policy="load_aware", seed=3, duration_slots=2_000)
    first = sim.step()
    check(first["slot"] == 0 and first["direction"] == "DL", "first slot is DL")
    sim.advance()
    check(sim.finished, "run reaches its end")
    with tempfile.TemporaryDirectory() as tmp:
        summary = sim.finish(tmp)
        files = sorted(p.name for p in Path(tmp).iterdir())
        check(files == ["buffers.csv", "connection_time.csv", "run_meta.toml", "throughput.csv"], "output files")
        ul = ta.read_throughput_bps(tmp, "passenger", "UL")
        check(len(ul) == 6 * 5, "passenger UL windows")
    check(summary["checks_passed"], "conservation and half-duplex checks")
    check(abs(sum(f for _, _, f in summary["connection"]) - 1.0) < 1e-9, "connection shares sum to 1")

    again = ta.Simulation(policy="load_aware", seed=3, duration_slots=2_000)
    again.advance()
    check(again.finish()["state_hash"] == summary["state_hash"], "deterministic replay")

    try:
        ta.Simulation(policy="nope")
    except ValueError:
        check(True, "bad policy rejected")


if __name__ == "__main__":
    formulas()
    policies()
    simulation()
    print("smoke test passed")
