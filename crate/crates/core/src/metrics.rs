//! Latency and dynamic-energy accounting.
//!
//! Energy is charged per flit event as the simulation runs:
//!
//! * every router traversal costs `e_router`;
//! * an electrical link hop costs `spacing * e_link_per_mm`;
//! * an optical bus traversal costs a modulation term
//!   (`e_mod_per_bit * flit_bits`) plus a laser term derived from a dB power
//!   budget: the laser must deliver the detector sensitivity after the
//!   waveguide loss over the actual span, at the configured wall-plug
//!   efficiency, for the time one flit occupies the link
//!   (`flit_bits / link_rate`). Receive energy is zero — the detector in
//!   this link design needs no amplifier stage.
//!
//! A packet's latency is wall-to-wall: the cycle the source core handed it
//! to the injection queue to the cycle its tail flit reaches the
//! destination core, queueing included.
//!
//! The electrical per-flit constants default to round placeholder values
//! (1 pJ per router traversal, 0.5 pJ/mm of wire); they are knobs, not
//! calibrated silicon numbers, and runs say so in their metadata.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All energy parameters. Electrical constants are per flit; optical
/// constants feed the dB budget above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyModel {
    /// Energy per flit per router traversal, joules. Placeholder default.
    pub e_router: f64,
    /// Energy per flit per millimeter of electrical link, joules. Placeholder default.
    pub e_link_per_mm: f64,
    /// Modulator energy, joules per bit.
    pub e_mod_per_bit: f64,
    /// Laser wall-plug efficiency (0, 1].
    pub laser_efficiency: f64,
    /// Waveguide propagation loss, dB per centimeter.
    pub waveguide_loss_db_per_cm: f64,
    /// Optical power the photodetector needs, watts.
    pub detector_sensitivity: f64,
    /// Optical link rate, bits per second.
    pub link_rate: f64,
    /// Flit width in bits.
    pub flit_bits: u32,
    /// Diagnostic ceiling on laser wall-plug power, watts. Spans that need
    /// more are rejected as infeasible.
    pub max_laser_power: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            e_router: 1.0e-12,
            e_link_per_mm: 0.5e-12,
            e_mod_per_bit: 2.59e-15,
            laser_efficiency: 0.20,
            waveguide_loss_db_per_cm: 1.0,
            detector_sensitivity: 1.0e-5,
            link_rate: 50.0e9,
            flit_bits: 64,
            max_laser_power: 1.0,
        }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<()> {
        if self.e_router < 0.0 || self.e_link_per_mm < 0.0 || self.e_mod_per_bit < 0.0 {
            return Err(Error::Config("energy constants must be non-negative".into()));
        }
        if !(self.laser_efficiency > 0.0 && self.laser_efficiency <= 1.0) {
            return Err(Error::Config(format!(
                "laser_efficiency must be in (0, 1], got {}",
                self.laser_efficiency
            )));
        }
        if self.waveguide_loss_db_per_cm.is_nan() || self.waveguide_loss_db_per_cm < 0.0 {
            return Err(Error::Config("waveguide loss must be non-negative".into()));
        }
        if self.detector_sensitivity.is_nan()
            || self.detector_sensitivity < 0.0
            || self.link_rate.is_nan()
            || self.link_rate <= 0.0
        {
            return Err(Error::Config("detector sensitivity / link rate out of range".into()));
        }
        if self.flit_bits == 0 {
            return Err(Error::Config("flit_bits must be positive".into()));
        }
        if self.max_laser_power.is_nan() || self.max_laser_power <= 0.0 {
            return Err(Error::Config("max_laser_power must be positive".into()));
        }
        Ok(())
    }

    /// Laser wall-plug power needed to close the link over `span_mm`.
    pub fn laser_power_w(&self, span_mm: f64) -> f64 {
        let loss_db = self.waveguide_loss_db_per_cm * span_mm / 10.0;
        let output = self.detector_sensitivity * 10f64.powf(loss_db / 10.0);
        output / self.laser_efficiency
    }

    /// Energy to move one flit across an optical bus of physical length
    /// `span_mm`: modulation plus the span-dependent laser term. Errors when
    /// the span would need more laser power than `max_laser_power`.
    pub fn optical_flit_energy(&self, span_mm: f64) -> Result<f64> {
        let wall = self.laser_power_w(span_mm);
        if wall > self.max_laser_power {
            return Err(Error::InfeasibleSpan {
                span_mm,
                required_w: wall,
                ceiling_w: self.max_laser_power,
            });
        }
        let bits = f64::from(self.flit_bits);
        let modulation = self.e_mod_per_bit * bits;
        let laser = wall * bits / self.link_rate;
        Ok(modulation + laser)
    }

    /// Energy to move one flit over `hops` electrical links: one router
    /// traversal per hop plus the final ejecting router, and the wire in
    /// between.
    pub fn electrical_flit_energy(&self, hops: u32, spacing_mm: f64) -> f64 {
        f64::from(hops + 1) * self.e_router + f64::from(hops) * spacing_mm * self.e_link_per_mm
    }

    /// Whether the electrical constants are still the uncalibrated defaults.
    pub fn electrical_constants_note(&self) -> &'static str {
        let d = EnergyModel::default();
        if self.e_router == d.e_router && self.e_link_per_mm == d.e_link_per_mm {
            "placeholder defaults (not calibrated)"
        } else {
            "user-supplied"
        }
    }
}

/// Wall-to-wall packet latency in cycles.
pub fn packet_latency(inject_cycle: u64, delivery_cycle: u64) -> u64 {
    debug_assert!(delivery_cycle >= inject_cycle, "delivery before injection");
    delivery_cycle - inject_cycle
}

/// One row of the per-window report. In bus-capable modes a row covers an
/// operation window plus its trailing reconfiguration period, so the rows
/// tile the whole run and their sums equal the run totals; in baseline mode
/// there is a single row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowMetrics {
    pub window_index: u64,
    pub start_cycle: u64,
    pub end_cycle: u64,
    pub delivered_packets: u64,
    pub delivered_flits: u64,
    pub total_latency_cycles: u64,
    pub mean_latency_cycles: f64,
    pub max_latency_cycles: u64,
    pub dynamic_energy_joules: f64,
    /// Flits that crossed the optical bus during the window.
    pub bus_flit_count: u64,
    /// Highest injection-queue depth any node reached during the window.
    pub peak_injection_queue: u64,
}

/// Running accumulator for the window currently being measured.
#[derive(Debug, Clone, Default)]
pub struct WindowAccum {
    pub delivered_packets: u64,
    pub delivered_flits: u64,
    pub total_latency_cycles: u64,
    pub max_latency_cycles: u64,
    pub dynamic_energy_joules: f64,
    pub bus_flit_count: u64,
    pub peak_injection_queue: u64,
}

impl WindowAccum {
    pub fn record_delivery(&mut self, latency: u64, flits: u64) {
        self.delivered_packets += 1;
        self.delivered_flits += flits;
        self.total_latency_cycles += latency;
        self.max_latency_cycles = self.max_latency_cycles.max(latency);
    }

    pub fn add_energy(&mut self, joules: f64) {
        self.dynamic_energy_joules += joules;
    }

    pub fn note_queue_depth(&mut self, depth: u64) {
        self.peak_injection_queue = self.peak_injection_queue.max(depth);
    }

    pub fn finalize(&self, window_index: u64, start_cycle: u64, end_cycle: u64) -> WindowMetrics {
        WindowMetrics {
            window_index,
            start_cycle,
            end_cycle,
            delivered_packets: self.delivered_packets,
            delivered_flits: self.delivered_flits,
            total_latency_cycles: self.total_latency_cycles,
            mean_latency_cycles: if self.delivered_packets == 0 {
                0.0
            } else {
                self.total_latency_cycles as f64 / self.delivered_packets as f64
            },
            max_latency_cycles: self.max_latency_cycles,
            dynamic_energy_joules: self.dynamic_energy_joules,
            bus_flit_count: self.bus_flit_count,
            peak_injection_queue: self.peak_injection_queue,
        }
    }
}

/// Run-level totals, exactly the sums of the per-window rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunTotals {
    pub delivered_packets: u64,
    pub delivered_flits: u64,
    pub total_latency_cycles: u64,
    pub mean_latency_cycles: f64,
    pub max_latency_cycles: u64,
    pub dynamic_energy_joules: f64,
    pub bus_flit_count: u64,
    pub peak_injection_queue: u64,
}

pub fn aggregate(windows: &[WindowMetrics]) -> RunTotals {
    let mut t = RunTotals {
        delivered_packets: 0,
        delivered_flits: 0,
        total_latency_cycles: 0,
        mean_latency_cycles: 0.0,
        max_latency_cycles: 0,
        dynamic_energy_joules: 0.0,
        bus_flit_count: 0,
        peak_injection_queue: 0,
    };
    for w in windows {
        t.delivered_packets += w.delivered_packets;
        t.delivered_flits += w.delivered_flits;
        t.total_latency_cycles += w.total_latency_cycles;
        t.max_latency_cycles = t.max_latency_cycles.max(w.max_latency_cycles);
        t.dynamic_energy_joules += w.dynamic_energy_joules;
        t.bus_flit_count += w.bus_flit_count;
        t.peak_injection_queue = t.peak_injection_queue.max(w.peak_injection_queue);
    }
    if t.delivered_packets > 0 {
        t.mean_latency_cycles = t.total_latency_cycles as f64 / t.delivered_packets as f64;
    }
    t
}
