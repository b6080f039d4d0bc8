//! Independent oracles used to cross-check the engine.
//!
//! Each oracle recomputes a property from first principles rather than
//! calling into the engine: the zero-load latency oracle applies the
//! closed-form delay sum over an independently walked route; the route
//! checker walks every pair to prove termination and in-bounds progress;
//! the progression replay re-derives every window-controller decision from
//! the logged costs with its own arithmetic. Disagreement with the engine
//! is always reported as an error, never patched over.

use crate::config::ControllerConfig;
use crate::error::{Error, Result};
use crate::report::ReconfigEvent;
use crate::router::RouterConfig;
use crate::routing::{xy_star_route, BusAllocation};
use crate::topology::{MeshSpec, NodeId, PortDir};

/// The mesh neighbor one hop through `port`.
fn step(mesh: &MeshSpec, node: NodeId, port: PortDir) -> Result<NodeId> {
    mesh.mesh_neighbors(node)?
        .into_iter()
        .find(|(p, _)| *p == port)
        .map(|(_, n)| n)
        .ok_or_else(|| {
            Error::Protocol(format!("route leaves the mesh at node {} via {}", node.0, port.tag()))
        })
}

/// Latency of a single packet crossing an otherwise idle network:
///
/// ```text
/// 2*local_delay + (hops+1)*router_delay + sum(link delays) + (flits-1)
/// ```
///
/// The route is walked hop by hop (electrical and express links both), so
/// the oracle prices exactly the path the routing function commits to.
/// A same-node packet is just the two core hops.
pub fn zero_load_packet_latency(
    mesh: &MeshSpec,
    rc: &RouterConfig,
    bus: &BusAllocation,
    src: NodeId,
    dst: NodeId,
    size_flits: u32,
) -> Result<u64> {
    if size_flits == 0 {
        return Err(Error::Protocol("packet must have at least one flit".into()));
    }
    if src == dst {
        return Ok(2 * rc.local_delay);
    }
    let mut cur = src;
    let mut hops = 0u64;
    let mut link_sum = 0u64;
    while cur != dst {
        let port = xy_star_route(mesh, cur, dst, bus);
        match port {
            PortDir::Optical => {
                link_sum += rc.link_delay_optical;
                cur = dst;
            }
            p => {
                link_sum += rc.link_delay_electrical;
                cur = step(mesh, cur, p)?;
            }
        }
        hops += 1;
        if hops > mesh.nodes() as u64 {
            return Err(Error::Protocol(format!(
                "route {} -> {} does not converge",
                src.0, dst.0
            )));
        }
    }
    Ok(2 * rc.local_delay + (hops + 1) * rc.router_delay + link_sum + (size_flits as u64 - 1))
}

/// Walk every ordered pair and prove the route terminates within
/// `width + height` steps without ever leaving the mesh.
pub fn exhaustive_route_check(mesh: &MeshSpec, bus: &BusAllocation) -> Result<()> {
    let bound = (mesh.width + mesh.height) as u64;
    for s in 0..mesh.nodes() {
        for d in 0..mesh.nodes() {
            if s == d {
                continue;
            }
            let (src, dst) = (NodeId(s), NodeId(d));
            let mut cur = src;
            let mut steps = 0u64;
            while cur != dst {
                let port = xy_star_route(mesh, cur, dst, bus);
                cur = match port {
                    PortDir::Optical => dst,
                    p => step(mesh, cur, p)?,
                };
                steps += 1;
                if steps > bound {
                    return Err(Error::Protocol(format!(
                        "route {s} -> {d} exceeded {bound} steps"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn replay_round_half_up(x: f64) -> i128 {
    (x + 0.5).floor() as i128
}

/// Re-derive every logged window decision from the logged costs alone and
/// fail on the first row that disagrees. Checks continuity too: each row
/// must operate on the window the previous row announced.
///
/// `adaptive` false asserts the static contract instead: the window never
/// changes and no gradient is ever reported.
pub fn replay_window_progression(
    rows: &[ReconfigEvent],
    cc: &ControllerConfig,
    adaptive: bool,
) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        let expected_old = if i == 0 { cc.initial_window } else { rows[i - 1].new_window };
        if row.old_window != expected_old {
            return Err(Error::Protocol(format!(
                "row {i}: window continuity broken (old_window {}, expected {expected_old})",
                row.old_window
            )));
        }
        if !adaptive {
            if row.new_window != row.old_window {
                return Err(Error::Protocol(format!(
                    "row {i}: static window changed from {} to {}",
                    row.old_window, row.new_window
                )));
            }
            if row.gradient != 0.0 {
                return Err(Error::Protocol(format!(
                    "row {i}: static run reported gradient {}",
                    row.gradient
                )));
            }
            continue;
        }
        let (expect_next, expect_grad) = if i == 0 {
            // first boundary: +10% probe, no history to difference
            let boot = replay_round_half_up(row.old_window as f64 * 1.1)
                .max(cc.window_min as i128);
            (boot as u64, 0.0)
        } else {
            let prev = &rows[i - 1];
            let dw = row.old_window as f64 - prev.old_window as f64;
            let grad = if dw == 0.0 {
                0.0
            } else {
                (row.window_cost - prev.window_cost) / dw
            };
            let raw = row.old_window as f64 - cc.alpha * grad;
            let cap = row.old_window as i128 * cc.growth_cap as i128;
            let next = replay_round_half_up(raw).min(cap).max(cc.window_min as i128);
            (next as u64, grad)
        };
        if row.new_window != expect_next {
            return Err(Error::Protocol(format!(
                "row {i}: new_window {} but replay derives {expect_next} \
                 (old {}, cost {}, gradient {expect_grad})",
                row.new_window, row.old_window, row.window_cost
            )));
        }
        if row.gradient != expect_grad {
            return Err(Error::Protocol(format!(
                "row {i}: gradient {} but replay derives {expect_grad}",
                row.gradient
            )));
        }
    }
    Ok(())
}
