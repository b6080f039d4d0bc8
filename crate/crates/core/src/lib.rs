//! Cycle-level simulator for a 2D mesh network-on-chip that can be augmented
//! at runtime with a single reconfigurable optical express link.
//!
//! The mesh is a conventional wormhole-switched, credit-flow-controlled NoC
//! with X-Y dimension-ordered routing. On top of it sits a serpentine optical
//! waveguide that can connect exactly one (source, destination) core pair at
//! a time. A feedback controller watches per-node traffic over a measurement
//! window, moves the optical link to the heaviest communication pair at each
//! window boundary, and (in adaptive mode) resizes the window itself by
//! gradient descent on the observed latency signal.
//!
//! The crate is organised so that the simulation engine ([`engine`]) is the
//! only module with mutable global state; everything else is either pure
//! functions over small value types or self-contained bookkeeping:
//!
//! * [`topology`]   — mesh geometry, node indexing, serpentine bus order
//! * [`routing`]    — X-Y and bus-aware X-Y* route functions
//! * [`router`]     — per-node router state: virtual channels, credits, arbitration
//! * [`reconfig`]   — traffic accounting, bus owner selection, window controller
//! * [`traffic`]    — trace file I/O and synthetic pattern generation
//! * [`metrics`]    — latency/energy accounting and per-window aggregation
//! * [`engine`]     — the cycle loop, run orchestration, mode comparison
//! * [`config`]     — the on-disk run configuration schema
//! * [`report`]     — CSV/JSON rendering of run results
//! * [`validation`] — independent oracles used by the test suite; these
//!   deliberately re-derive results without touching engine code paths

pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod reconfig;
pub mod report;
pub mod router;
pub mod routing;
pub mod topology;
pub mod traffic;
pub mod validation;

pub use config::{Mode, SimConfig};
pub use error::{Error, Result};
pub use topology::{MeshSpec, NodeId, PortDir};
