//! Run reports and their renderers: the per-window metrics CSV, the
//! window-progression CSV, the full JSON report, and the three-mode
//! comparison table.
//!
//! All floating-point values are rendered with Rust's shortest
//! round-trip `Display` formatting, so re-parsing a CSV recovers the exact
//! bit pattern and byte-identical reports mean identical runs.

use serde::Serialize;

use crate::config::{Mode, SimConfig};
use crate::metrics::{RunTotals, WindowMetrics};

/// One window-boundary decision, as logged for the progression CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReconfigEvent {
    pub boundary_cycle: u64,
    pub old_window: u64,
    pub new_window: u64,
    /// Gradient the controller stepped with (0 until two windows of
    /// history exist, and always 0 in static mode).
    pub gradient: f64,
    /// The latency cost measured over the window that just ended.
    pub window_cost: f64,
    /// Established bus endpoints, or -1 when no pair qualified.
    pub bus_src: i64,
    pub bus_dst: i64,
}

/// Everything a finished run produces.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub mode: Mode,
    pub seed: u64,
    /// Identity of the generator behind any synthetic traffic, pinned so
    /// reports state their own reproducibility contract.
    pub prng: String,
    /// Whether the electrical energy constants are calibrated or
    /// placeholder defaults.
    pub energy_constants: String,
    /// True when all offered traffic was injected and delivered.
    pub completed: bool,
    pub end_cycle: u64,
    pub injected_packets: u64,
    pub totals: RunTotals,
    pub windows: Vec<WindowMetrics>,
    pub progression: Vec<ReconfigEvent>,
    pub wall_clock_seconds: f64,
    pub config: SimConfig,
}

impl RunReport {
    pub fn windows_csv(&self) -> String {
        let mut out = String::from(
            "window_index,start_cycle,end_cycle,delivered_packets,delivered_flits,\
             total_latency_cycles,mean_latency_cycles,max_latency_cycles,\
             dynamic_energy_joules,bus_flit_count,peak_injection_queue\n",
        );
        for w in &self.windows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{:e},{},{}\n",
                w.window_index,
                w.start_cycle,
                w.end_cycle,
                w.delivered_packets,
                w.delivered_flits,
                w.total_latency_cycles,
                w.mean_latency_cycles,
                w.max_latency_cycles,
                w.dynamic_energy_joules,
                w.bus_flit_count,
                w.peak_injection_queue,
            ));
        }
        out
    }

    pub fn progression_csv(&self) -> String {
        let mut out = String::from(
            "boundary_cycle,old_window,new_window,gradient,window_cost,bus_src,bus_dst\n",
        );
        for e in &self.progression {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.boundary_cycle,
                e.old_window,
                e.new_window,
                e.gradient,
                e.window_cost,
                e.bus_src,
                e.bus_dst,
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// JSON with the wall-clock field removed: two runs of the same config
    /// must produce byte-identical output under this view.
    pub fn json_without_wall_clock(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("wall_clock_seconds");
        }
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn mean_latency(&self) -> f64 {
        self.totals.mean_latency_cycles
    }
}

/// One mode's line in the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareRow {
    pub mode: Mode,
    pub delivered_packets: u64,
    pub mean_latency_cycles: f64,
    pub dynamic_energy_joules: f64,
    /// This mode's mean latency divided by the baseline's; absent when the
    /// baseline delivered nothing.
    pub latency_vs_baseline: Option<f64>,
    /// This mode's dynamic energy divided by the baseline's; absent when
    /// the baseline consumed nothing.
    pub energy_vs_baseline: Option<f64>,
}

/// Side-by-side results of running the same traffic through several modes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
}

impl Comparison {
    pub fn from_reports(reports: &[RunReport]) -> Comparison {
        let base = reports.iter().find(|r| r.mode == Mode::Baseline);
        let base_latency = base.map(|r| r.totals.mean_latency_cycles).unwrap_or(0.0);
        let base_energy = base.map(|r| r.totals.dynamic_energy_joules).unwrap_or(0.0);
        let base_delivered = base.map(|r| r.totals.delivered_packets).unwrap_or(0);
        let rows = reports
            .iter()
            .map(|r| CompareRow {
                mode: r.mode,
                delivered_packets: r.totals.delivered_packets,
                mean_latency_cycles: r.totals.mean_latency_cycles,
                dynamic_energy_joules: r.totals.dynamic_energy_joules,
                latency_vs_baseline: if base_delivered > 0 && base_latency > 0.0 {
                    Some(r.totals.mean_latency_cycles / base_latency)
                } else {
                    None
                },
                energy_vs_baseline: if base_energy > 0.0 {
                    Some(r.totals.dynamic_energy_joules / base_energy)
                } else {
                    None
                },
            })
            .collect();
        Comparison { rows }
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(
            "mode,delivered_packets,mean_latency_cycles,dynamic_energy_joules,\
             latency_vs_baseline,energy_vs_baseline\n",
        );
        for r in &self.rows {
            let lat = r.latency_vs_baseline.map_or("n/a".to_string(), |v| v.to_string());
            let en = r.energy_vs_baseline.map_or("n/a".to_string(), |v| v.to_string());
            out.push_str(&format!(
                "{},{},{},{:e},{},{}\n",
                r.mode.tag(),
                r.delivered_packets,
                r.mean_latency_cycles,
                r.dynamic_energy_joules,
                lat,
                en,
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("comparison serializes");
        s.push('\n');
        s
    }
}
