use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use iab_ta::mac::Direction;
use iab_ta::metrics::{write_outputs, MetricsLedger};
use iab_ta::report::{aggregate, compare_dirs};
use iab_ta::traffic::UeClass;
use iab_ta::{RunConfig, RunOutput};

const STANDARD: &str = include_str!("../../../presets/standard.toml");
const LOAD_AWARE: &str = include_str!("../../../presets/load_aware.toml");

#[derive(Parser)]
#[command(name = "iab-ta", version, about = "Mobile IAB topology adaptation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Standard,
    LoadAware,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seed or a seed sweep and write the CSV outputs.
    Run {
        /// TOML run configuration; overrides the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "standard")]
        preset: Preset,
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Inclusive seed range such as `1..10`.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Option<RangeInclusive<u64>>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        duration_slots: Option<u64>,
        #[arg(long)]
        snapshot_cadence: Option<u64>,
    },
    /// Print throughput percentile deltas of B relative to A.
    Compare { a: PathBuf, b: PathBuf },
}

fn parse_seeds(s: &str) -> Result<RangeInclusive<u64>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("bad seed {a:?}: {e}"))?;
    let b: u64 = b
        .trim_start_matches('=')
        .trim()
        .parse()
        .map_err(|e| format!("bad seed {b:?}: {e}"))?;
    if a > b {
        return Err(format!("empty seed range {s}"));
    }
    Ok(a..=b)
}

fn mbps(bps: f64) -> f64 {
    bps / 1e6
}

fn summary(label: &str, ledger: &MetricsLedger) -> String {
    let mut line = format!("{label}: slots={}", ledger.run_slots);
    for s in ledger.connection_shares() {
        line += &format!(" donor{}={:.3}", s.donor_id, s.fraction);
    }
    for (dir, name) in [(Direction::Ul, "UL"), (Direction::Dl, "DL")] {
        let cdf = ledger.throughput_cdf(UeClass::Passenger, dir);
        if let (Ok(p10), Ok(p50), Ok(p90)) =
            (cdf.percentile(10.0), cdf.percentile(50.0), cdf.percentile(90.0))
        {
            line += &format!(
                " pass_{name}_p10/50/90={:.3}/{:.3}/{:.3}Mbps",
                mbps(p10),
                mbps(p50),
                mbps(p90)
            );
        }
    }
    let c = &ledger.checks;
    line += &format!(
        " ta_events={} checks={}",
        ledger.ta_events.len(),
        if c.all_passed() { "ok" } else { "FAILED" }
    );
    line
}

fn load_config(config: Option<&Path>, preset: Preset) -> iab_ta::Result<RunConfig> {
    match config {
        Some(path) => RunConfig::from_file(path),
        None => RunConfig::from_toml_str(match preset {
            Preset::Standard => STANDARD,
            Preset::LoadAware => LOAD_AWARE,
        }),
    }
}

fn run(
    config: Option<PathBuf>,
    preset: Preset,
    seed: Option<u64>,
    seeds: Option<RangeInclusive<u64>>,
    out: PathBuf,
    duration_slots: Option<u64>,
    snapshot_cadence: Option<u64>,
) -> iab_ta::Result<bool> {
    let mut cfg = load_config(config.as_deref(), preset)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if duration_slots.is_some() {
        cfg.duration_slots = duration_slots;
    }
    if let Some(c) = snapshot_cadence {
        cfg.metrics.snapshot_cadence = c;
    }
    cfg.validate()?;

    let Some(range) = seeds else {
        let output = iab_ta::run(cfg)?;
        output.write(&out)?;
        println!("{}", summary(&format!("seed {}", output.seed), &output.ledger));
        return Ok(output.ledger.checks.all_passed());
    };

    let seeds: Vec<u64> = range.collect();
    let outputs: Vec<RunOutput> = iab_ta::sweep(&cfg, &seeds)?;
    let mut ok = true;
    for o in &outputs {
        o.write(&out.join(format!("seed_{}", o.seed)))?;
        println!("{}", summary(&format!("seed {}", o.seed), &o.ledger));
        ok &= o.ledger.checks.all_passed();
    }
    let (ledger, meta) = aggregate(&outputs).expect("non-empty sweep");
    write_outputs(&ledger, &meta, &out.join("aggregate"))?;
    println!("{}", summary("aggregate", &ledger));
    Ok(ok)
}

fn compare(a: &Path, b: &Path) -> iab_ta::Result<()> {
    let cmp = compare_dirs(a, b)?;
    println!("{:<11} {:<3} {:>4} {:>12} {:>12} {:>9}", "class", "dir", "pct", "A Mbps", "B Mbps", "delta");
    for d in &cmp.throughput {
        println!(
            "{:<11} {:<3} {:>4} {:>12.4} {:>12.4} {:>8.2}%",
            d.class.as_str(),
            d.direction.as_str(),
            format!("p{}", d.percentile),
            mbps(d.a_bps),
            mbps(d.b_bps),
            d.delta_pct
        );
    }
    for c in &cmp.connection {
        println!(
            "donor {:<3} connection A={:.3} B={:.3}",
            c.donor_id, c.a_fraction, c.b_fraction
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            preset,
            seed,
            seeds,
            out,
            duration_slots,
            snapshot_cadence,
        } => run(config, preset, seed, seeds, out, duration_slots, snapshot_cadence),
        Command::Compare { a, b } => compare(&a, &b).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: a conservation, half-duplex or RB check failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
