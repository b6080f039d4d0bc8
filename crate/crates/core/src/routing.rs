//! Route functions. Plain X-Y dimension-ordered routing for the electrical
//! mesh, and the bus-aware variant X-Y* that sends a packet over the optical
//! express link when — and only when — the packet is standing at the bus
//! source and is destined for exactly the bus destination.
//!
//! Both functions are pure and are re-evaluated per hop, per head flit, so a
//! packet that reaches the bus source mid-journey still catches the express
//! link, and a bus teardown between hops simply drops the packet back onto
//! the X-Y path. X-Y is deadlock-free on its own; the optical hop cannot
//! introduce a cycle because every flit it carries terminates (ejects) at the
//! bus endpoint it arrives at.

use serde::{Deserialize, Serialize};

use crate::topology::{MeshSpec, NodeId, PortDir};

/// The single optical express allocation. At most one exists at a time; an
/// inactive allocation routes exactly like no allocation at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusAllocation {
    pub src: NodeId,
    pub dst: NodeId,
    pub active: bool,
    /// When set, packets standing at `dst` destined exactly `src` also take
    /// the optical port (the waveguide is symmetric).
    pub bidirectional: bool,
}

impl BusAllocation {
    pub fn inactive() -> Self {
        BusAllocation { src: NodeId(0), dst: NodeId(0), active: false, bidirectional: false }
    }

    pub fn between(src: NodeId, dst: NodeId) -> Self {
        BusAllocation { src, dst, active: true, bidirectional: false }
    }
}

/// X-Y dimension-ordered routing: correct the column first, then the row.
/// `cur` must differ from `dst`; a packet at its destination ejects instead
/// of routing.
pub fn xy_route(mesh: &MeshSpec, cur: NodeId, dst: NodeId) -> PortDir {
    debug_assert_ne!(cur, dst, "routing a packet that is already at its destination");
    let (cr, cc) = mesh.coord_of(cur).expect("route from a node outside the mesh");
    let (dr, dc) = mesh.coord_of(dst).expect("route to a node outside the mesh");
    if dc > cc {
        PortDir::East
    } else if dc < cc {
        PortDir::West
    } else if dr > cr {
        PortDir::South
    } else {
        PortDir::North
    }
}

/// X-Y* routing: identical to [`xy_route`], except that a packet standing at
/// the bus source whose destination is exactly the bus destination takes the
/// optical port (and the reverse pair when the allocation is bidirectional).
pub fn xy_star_route(mesh: &MeshSpec, cur: NodeId, dst: NodeId, bus: &BusAllocation) -> PortDir {
    if bus.active {
        if cur == bus.src && dst == bus.dst {
            return PortDir::Optical;
        }
        if bus.bidirectional && cur == bus.dst && dst == bus.src {
            return PortDir::Optical;
        }
    }
    xy_route(mesh, cur, dst)
}
