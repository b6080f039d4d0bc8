//! Command-line front end: run one simulation, compare the three modes
//! over identical traffic, or generate a synthetic trace file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use nocsim::config::{Mode, SimConfig, TrafficKind};
use nocsim::engine::{compare_modes, Simulation};
use nocsim::report::{Comparison, RunReport};
use nocsim::traffic;

#[derive(Parser)]
#[command(
    name = "nocsim",
    version,
    about = "Cycle-level simulator for a mesh NoC with a reconfigurable optical express link"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write run.json, windows.csv, progression.csv
    Run {
        /// TOML configuration file
        #[arg(long)]
        config: PathBuf,
        /// Override the configured mode (baseline | static | adaptive)
        #[arg(long)]
        mode: Option<String>,
        /// Override the configured seed
        #[arg(long)]
        seed: Option<u64>,
        /// Drive the run from this trace file instead of the configured traffic
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Directory for the report files
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run baseline, static and adaptive over the same traffic and compare
    Compare {
        /// TOML configuration file (its mode field is ignored)
        #[arg(long)]
        config: PathBuf,
        /// Directory for the comparison and per-mode reports
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate the configured synthetic traffic as a trace file
    GenTrace {
        /// TOML configuration file with a synthetic traffic section
        #[arg(long)]
        config: PathBuf,
        /// Trace file to write
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "baseline" => Ok(Mode::Baseline),
        "static" => Ok(Mode::Static),
        "adaptive" => Ok(Mode::Adaptive),
        other => bail!("unknown mode '{other}' (expected baseline, static or adaptive)"),
    }
}

fn write_report_files(dir: &Path, report: &RunReport) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    std::fs::write(dir.join("run.json"), report.to_json())?;
    std::fs::write(dir.join("windows.csv"), report.windows_csv())?;
    std::fs::write(dir.join("progression.csv"), report.progression_csv())?;
    Ok(())
}

fn print_summary(report: &RunReport) {
    println!("mode            {}", report.mode.tag());
    println!("seed            {}", report.seed);
    println!("end cycle       {}", report.end_cycle);
    println!("injected        {} packets", report.injected_packets);
    println!("delivered       {} packets", report.totals.delivered_packets);
    println!("mean latency    {:.3} cycles", report.totals.mean_latency_cycles);
    println!("max latency     {} cycles", report.totals.max_latency_cycles);
    println!("dynamic energy  {:.6e} J", report.totals.dynamic_energy_joules);
    println!("bus flits       {}", report.totals.bus_flit_count);
    if !report.completed {
        eprintln!(
            "warning: partial run: {} of {} packets undelivered when the cycle limit hit",
            report.injected_packets - report.totals.delivered_packets,
            report.injected_packets
        );
    }
}

fn cmd_run(
    config: PathBuf,
    mode: Option<String>,
    seed: Option<u64>,
    trace: Option<PathBuf>,
    out: PathBuf,
) -> Result<()> {
    let mut cfg = SimConfig::load(&config)
        .with_context(|| format!("loading config {}", config.display()))?;
    if let Some(m) = mode {
        cfg.mode = parse_mode(&m)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trace {
        cfg.traffic.kind = TrafficKind::Trace;
        cfg.traffic.path = Some(t);
    }
    cfg.validate()?;
    let report = Simulation::new(cfg)?.run()?;
    write_report_files(&out, &report)?;
    print_summary(&report);
    println!(
        "reports         {0}/run.json {0}/windows.csv {0}/progression.csv",
        out.display()
    );
    Ok(())
}

fn print_comparison(cmp: &Comparison) {
    println!(
        "{:<10} {:>10} {:>14} {:>14} {:>12} {:>12}",
        "mode", "delivered", "mean_latency", "energy_j", "lat_ratio", "energy_ratio"
    );
    for row in &cmp.rows {
        let fmt_ratio =
            |r: Option<f64>| r.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<10} {:>10} {:>14.3} {:>14.6e} {:>12} {:>12}",
            row.mode.tag(),
            row.delivered_packets,
            row.mean_latency_cycles,
            row.dynamic_energy_joules,
            fmt_ratio(row.latency_vs_baseline),
            fmt_ratio(row.energy_vs_baseline),
        );
    }
}

fn cmd_compare(config: PathBuf, out: PathBuf) -> Result<()> {
    let cfg = SimConfig::load(&config)
        .with_context(|| format!("loading config {}", config.display()))?;
    let (cmp, reports) = compare_modes(&cfg)?;
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("compare.csv"), cmp.csv())?;
    std::fs::write(out.join("compare.json"), cmp.to_json())?;
    for report in &reports {
        write_report_files(&out.join(report.mode.tag()), report)?;
    }
    print_comparison(&cmp);
    for report in &reports {
        if !report.completed {
            eprintln!("warning: {} run was partial", report.mode.tag());
        }
    }
    println!("reports         {0}/compare.csv {0}/compare.json", out.display());
    Ok(())
}

fn cmd_gen_trace(config: PathBuf, out: PathBuf) -> Result<()> {
    let cfg = SimConfig::load(&config)
        .with_context(|| format!("loading config {}", config.display()))?;
    if cfg.traffic.kind != TrafficKind::Synthetic {
        bail!("gen-trace needs a config with traffic.kind = \"synthetic\"");
    }
    let spec = cfg.traffic.synthetic_spec(cfg.seed);
    let records = traffic::generate(&spec, &cfg.mesh)?;
    let file = std::fs::File::create(&out)
        .with_context(|| format!("creating {}", out.display()))?;
    traffic::save_trace(std::io::BufWriter::new(file), &records)?;
    println!("wrote {} packets to {} ({})", records.len(), out.display(), traffic::PRNG_IDENTITY);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, mode, seed, trace, out } => cmd_run(config, mode, seed, trace, out),
        Command::Compare { config, out } => cmd_compare(config, out),
        Command::GenTrace { config, out } => cmd_gen_trace(config, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
