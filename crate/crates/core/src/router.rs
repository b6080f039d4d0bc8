//! Per-node router state: input virtual channels with credit-style
//! backpressure, the core-side injection machinery, and the round-robin
//! arbitration helper the engine uses during the switch phase.
//!
//! The model is input-queued wormhole switching. Each input port carries
//! `num_vcs` virtual channels of `vc_depth` flits. A VC is allocated to one
//! packet at a time — from the moment an upstream head flit is sent toward
//! it until its tail flit is dequeued — so a VC's FIFO never interleaves
//! packets, and the head's routing decision can be latched on the VC for the
//! body flits behind it. Buffer space is reserved at send time
//! (`fifo occupancy + flits in flight <= vc_depth`), which is exactly credit
//! counting viewed from the receiving side.
//!
//! Timing contract (enforced by the engine, checked by the latency oracle):
//! a flit that finishes arriving at cycle `a` may leave the router no
//! earlier than `a + router_delay`; one flit per output port per cycle; the
//! local core hands the router at most one flit per cycle and receives at
//! most one flit per cycle.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{NodeId, PortDir};

/// Router microarchitecture parameters, shared by every router in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterConfig {
    pub num_vcs: u32,
    pub vc_depth: u32,
    /// Pipeline latency: cycles between a flit's arrival and its earliest
    /// departure.
    pub router_delay: u64,
    pub link_delay_electrical: u64,
    pub link_delay_optical: u64,
    /// Core-to-router (and router-to-core) hop latency.
    pub local_delay: u64,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig {
            num_vcs: 4,
            vc_depth: 8,
            router_delay: 2,
            link_delay_electrical: 1,
            link_delay_optical: 2,
            local_delay: 1,
        }
    }
}

impl RouterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_vcs == 0 || self.num_vcs > 16 {
            return Err(Error::Config(format!("num_vcs must be in [1, 16], got {}", self.num_vcs)));
        }
        if self.vc_depth == 0 || self.vc_depth > 1024 {
            return Err(Error::Config(format!(
                "vc_depth must be in [1, 1024], got {}",
                self.vc_depth
            )));
        }
        for (name, v) in [
            ("router_delay", self.router_delay),
            ("link_delay_electrical", self.link_delay_electrical),
            ("link_delay_optical", self.link_delay_optical),
            ("local_delay", self.local_delay),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1 cycle")));
            }
        }
        Ok(())
    }
}

/// Dense packet handle; the engine owns the table it indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PacketId(pub u32);

/// Injection-side description of a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub id: PacketId,
    pub src: NodeId,
    pub dst: NodeId,
    pub size_flits: u32,
    /// Cycle the source core handed the packet to its injection queue (the
    /// trace cycle, not the cycle the network accepted it).
    pub inject_cycle: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlitKind {
    Head,
    Body,
    Tail,
    /// Single-flit packet: head and tail at once.
    HeadTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flit {
    pub packet: PacketId,
    pub seq: u32,
    pub kind: FlitKind,
}

impl Flit {
    pub fn nth_of(packet: PacketId, seq: u32, size_flits: u32) -> Flit {
        debug_assert!(seq < size_flits);
        let kind = if size_flits == 1 {
            FlitKind::HeadTail
        } else if seq == 0 {
            FlitKind::Head
        } else if seq == size_flits - 1 {
            FlitKind::Tail
        } else {
            FlitKind::Body
        };
        Flit { packet, seq, kind }
    }

    pub fn is_head(&self) -> bool {
        matches!(self.kind, FlitKind::Head | FlitKind::HeadTail)
    }

    pub fn is_tail(&self) -> bool {
        matches!(self.kind, FlitKind::Tail | FlitKind::HeadTail)
    }
}

/// A buffered flit plus the earliest cycle it may leave this router.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BufferedFlit {
    pub flit: Flit,
    pub ready: u64,
}

/// The routing decision latched on a VC while a packet streams through it.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RouteHold {
    pub port: PortDir,
    pub out_vc: u32,
}

/// One input virtual channel.
#[derive(Debug, Clone, Default)]
pub(crate) struct Vc {
    pub fifo: VecDeque<BufferedFlit>,
    /// Packet this VC is allocated to, from upstream head-send until tail
    /// dequeue. While set, no other packet may enter.
    pub resident: Option<PacketId>,
    /// Flits sent toward this VC that have not arrived yet. Together with
    /// the FIFO occupancy this can never exceed `vc_depth`.
    pub inflight: u32,
    pub route: Option<RouteHold>,
}

impl Vc {
    pub fn free_slots(&self, depth: u32) -> u32 {
        depth - (self.fifo.len() as u32 + self.inflight)
    }

    pub fn is_free_for_new_packet(&self) -> bool {
        if self.resident.is_none() {
            debug_assert!(self.fifo.is_empty() && self.inflight == 0, "unallocated VC holds flits");
            true
        } else {
            false
        }
    }
}

/// An in-progress core-to-router transfer of one packet's flits.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stream {
    pub packet: PacketId,
    pub dst: NodeId,
    pub next_seq: u32,
    pub size_flits: u32,
}

/// Core-side injection state: the unbounded packet queue and the per-VC
/// flit streams feeding the router's local input port.
#[derive(Debug, Clone, Default)]
pub(crate) struct CoreIngress {
    pub queue: VecDeque<PacketId>,
    pub streams: Vec<Option<Stream>>,
    pub rr_stream: usize,
}

/// Where a packet offered to the network ended up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectOutcome {
    /// Head flit will enter this local VC `local_delay` cycles from now.
    Accepted { vc: u32 },
    /// All local VCs are allocated; the packet waits in the injection queue.
    Deferred,
}

#[derive(Debug, Clone)]
pub struct Router {
    pub node: NodeId,
    pub(crate) ports: usize,
    pub(crate) num_vcs: usize,
    pub(crate) vc_depth: u32,
    /// Input VCs, indexed `port * num_vcs + vc`.
    pub(crate) vcs: Vec<Vc>,
    /// Per output port: linear candidate index granted last, for round-robin.
    pub(crate) rr_last: Vec<usize>,
    /// Flits currently buffered anywhere in this router (fast skip).
    pub(crate) buffered: u32,
    pub(crate) core: CoreIngress,
}

impl Router {
    /// `bus_capable` routers carry the two extra ports (optical, reconfig);
    /// baseline routers are plain five-port mesh routers.
    pub fn new(node: NodeId, cfg: &RouterConfig, bus_capable: bool) -> Router {
        let ports = if bus_capable { 7 } else { 5 };
        let num_vcs = cfg.num_vcs as usize;
        Router {
            node,
            ports,
            num_vcs,
            vc_depth: cfg.vc_depth,
            vcs: vec![Vc::default(); ports * num_vcs],
            rr_last: vec![ports * num_vcs - 1; ports],
            buffered: 0,
            core: CoreIngress {
                queue: VecDeque::new(),
                streams: vec![None; num_vcs],
                rr_stream: 0,
            },
        }
    }

    pub(crate) fn vc_index(&self, port: PortDir, vc: u32) -> usize {
        port.index() * self.num_vcs + vc as usize
    }

    pub(crate) fn vc(&self, port: PortDir, vc: u32) -> &Vc {
        &self.vcs[self.vc_index(port, vc)]
    }

    pub(crate) fn vc_mut(&mut self, port: PortDir, vc: u32) -> &mut Vc {
        let i = self.vc_index(port, vc);
        &mut self.vcs[i]
    }

    /// Lowest-numbered local input VC not allocated to any packet.
    pub(crate) fn free_local_vc(&self) -> Option<u32> {
        (0..self.num_vcs as u32)
            .find(|&v| self.vc(PortDir::Local, v).is_free_for_new_packet())
    }

    /// Offer a packet to the router. On acceptance the packet owns a local
    /// VC and its flits start streaming in (one per cycle, arriving
    /// `local_delay` after each send); otherwise it stays queued and the
    /// oldest deferred packet is retried every cycle.
    pub fn try_inject(&mut self, packet: &Packet) -> InjectOutcome {
        match self.free_local_vc() {
            Some(v) => {
                let idx = self.vc_index(PortDir::Local, v);
                self.vcs[idx].resident = Some(packet.id);
                self.core.streams[v as usize] = Some(Stream {
                    packet: packet.id,
                    dst: packet.dst,
                    next_seq: 0,
                    size_flits: packet.size_flits,
                });
                InjectOutcome::Accepted { vc: v }
            }
            None => InjectOutcome::Deferred,
        }
    }

    /// Total flits buffered across all VCs (diagnostics / drain checks).
    pub fn buffered_flits(&self) -> u32 {
        self.buffered
    }

    pub fn queued_packets(&self) -> usize {
        self.core.queue.len()
    }
}
