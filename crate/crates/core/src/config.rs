//! Run configuration: the TOML-serializable description of a complete
//! simulation (mesh, router microarchitecture, controller, energy model,
//! traffic source, run mode) plus cross-field validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::EnergyModel;
use crate::reconfig::CostSignal;
use crate::router::RouterConfig;
use crate::topology::MeshSpec;
use crate::traffic::{self, FewPlacement, Pattern, SyntheticSpec, TraceRecord};

/// What the express-bus machinery does during the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Plain electrical mesh; no bus hardware, no measurement windows.
    Baseline,
    /// Bus with periodic reconfiguration at a fixed window length.
    Static,
    /// Bus with the gradient-descent window controller enabled.
    Adaptive,
}

impl Mode {
    pub fn uses_bus(self) -> bool {
        !matches!(self, Mode::Baseline)
    }

    pub fn tag(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Static => "static",
            Mode::Adaptive => "adaptive",
        }
    }
}

/// Measurement-window / reconfiguration parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Gradient-descent step size.
    pub alpha: f64,
    /// Hard floor for the window length, cycles.
    pub window_min: u64,
    /// A new window may grow to at most `growth_cap` times the current one.
    pub growth_cap: u64,
    /// Cycles the network spends reconfiguring after each window (bus down).
    pub reconfig_period: u64,
    /// First measurement window length, cycles.
    pub initial_window: u64,
    /// What the per-window latency cost measures (sum or mean).
    pub cost: CostSignal,
    /// Minimum Manhattan distance for a pair to be worth a bus.
    pub min_hops: u32,
    /// Whether an established bus also serves the reverse direction.
    pub bidirectional_bus: bool,
    /// If true, cores stop handing flits to the network during the
    /// reconfiguration period instead of continuing to inject electrically.
    pub strict_pause: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            alpha: 0.5,
            window_min: 100,
            growth_cap: 10,
            reconfig_period: 50,
            initial_window: 1000,
            cost: CostSignal::Total,
            min_hops: 0,
            bidirectional_bus: false,
            strict_pause: false,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be finite and > 0, got {}", self.alpha)));
        }
        if self.window_min == 0 {
            return Err(Error::Config("window_min must be at least 1 cycle".into()));
        }
        if self.growth_cap == 0 {
            return Err(Error::Config("growth_cap must be at least 1".into()));
        }
        if self.reconfig_period == 0 {
            return Err(Error::Config("reconfig_period must be at least 1 cycle".into()));
        }
        if self.initial_window < self.window_min {
            return Err(Error::Config(format!(
                "initial_window ({}) must be >= window_min ({})",
                self.initial_window, self.window_min
            )));
        }
        Ok(())
    }
}

/// Where packets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficKind {
    Synthetic,
    Trace,
}

/// Traffic source description. For `kind = "trace"` only `path` matters;
/// for `kind = "synthetic"` the remaining fields mirror the generator spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub kind: TrafficKind,
    pub path: Option<PathBuf>,
    pub pattern: Pattern,
    pub duration: u64,
    pub injection_rate: f64,
    pub packet_size_flits: u32,
    pub hot_pairs: Vec<(u32, u32)>,
    pub hot_share: f64,
    pub hot_rate: Option<f64>,
    pub few_count: u32,
    pub phase_len: u64,
    pub few_placement: FewPlacement,
    /// Generator seed; defaults to the run seed when omitted.
    pub seed: Option<u64>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        TrafficConfig {
            kind: TrafficKind::Synthetic,
            path: None,
            pattern: s.pattern,
            duration: s.duration,
            injection_rate: s.injection_rate,
            packet_size_flits: s.packet_size_flits,
            hot_pairs: s.hot_pairs.iter().map(|&(a, b)| (a.0, b.0)).collect(),
            hot_share: s.hot_share,
            hot_rate: s.hot_rate,
            few_count: s.few_count,
            phase_len: s.phase_len,
            few_placement: s.few_placement,
            seed: None,
        }
    }
}

impl TrafficConfig {
    /// Resolve to a generator spec (synthetic kind only).
    pub fn synthetic_spec(&self, run_seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            pattern: self.pattern,
            duration: self.duration,
            injection_rate: self.injection_rate,
            packet_size_flits: self.packet_size_flits,
            hot_pairs: self
                .hot_pairs
                .iter()
                .map(|&(a, b)| (crate::topology::NodeId(a), crate::topology::NodeId(b)))
                .collect(),
            hot_share: self.hot_share,
            hot_rate: self.hot_rate,
            few_count: self.few_count,
            phase_len: self.phase_len,
            few_placement: self.few_placement,
            seed: self.seed.unwrap_or(run_seed),
        }
    }

    pub fn validate(&self, mesh: &MeshSpec, run_seed: u64) -> Result<()> {
        match self.kind {
            TrafficKind::Trace => {
                if self.path.is_none() {
                    return Err(Error::Config("traffic.kind = \"trace\" requires traffic.path".into()));
                }
                Ok(())
            }
            TrafficKind::Synthetic => self.synthetic_spec(run_seed).validate(mesh),
        }
    }
}

/// Complete description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Hard cycle ceiling; the run stops here even if packets remain.
    pub max_cycles: u64,
    /// Keep simulating after the traffic ends until every packet delivers.
    pub drain: bool,
    pub mesh: MeshSpec,
    pub router: RouterConfig,
    pub controller: ControllerConfig,
    pub energy: EnergyModel,
    pub traffic: TrafficConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            mode: Mode::Baseline,
            seed: 1,
            max_cycles: 10_000_000,
            drain: true,
            mesh: MeshSpec::default(),
            router: RouterConfig::default(),
            controller: ControllerConfig::default(),
            energy: EnergyModel::default(),
            traffic: TrafficConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<SimConfig> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<SimConfig> {
        let text = std::fs::read_to_string(path)?;
        SimConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        self.router.validate()?;
        self.controller.validate()?;
        self.energy.validate()?;
        self.traffic.validate(&self.mesh, self.seed)?;
        if self.max_cycles == 0 {
            return Err(Error::Config("max_cycles must be at least 1".into()));
        }
        if self.mode.uses_bus() {
            // Fail up front if the laser could never close the worst-case
            // span the selector might pick, rather than mid-run.
            let worst_span =
                (self.mesh.nodes() as f64 - 1.0) * self.mesh.spacing;
            self.energy.optical_flit_energy(worst_span)?;
        }
        Ok(())
    }

    /// Load or generate this run's packet stream.
    pub fn load_records(&self) -> Result<Vec<TraceRecord>> {
        match self.traffic.kind {
            TrafficKind::Trace => {
                let path = self
                    .traffic
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config("traffic.kind = \"trace\" requires traffic.path".into()))?;
                traffic::load_trace_file(path, &self.mesh)
            }
            TrafficKind::Synthetic => {
                traffic::generate(&self.traffic.synthetic_spec(self.seed), &self.mesh)
            }
        }
    }

    /// Cycle at which the traffic source stops producing new packets.
    pub fn traffic_end(&self, records: &[TraceRecord]) -> u64 {
        match self.traffic.kind {
            TrafficKind::Synthetic => self.traffic.duration,
            TrafficKind::Trace => records.last().map(|r| r.cycle + 1).unwrap_or(0),
        }
    }
}
