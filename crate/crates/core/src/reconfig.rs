//! The feedback loop that drives the optical bus: per-node traffic
//! accounting, compact node reports, bus owner selection, and the
//! measurement-window controller.
//!
//! Every core counts, per measurement window, how many flits it injected
//! toward each destination. At a window boundary each core condenses that
//! into a small report (total flits, heaviest destination, flits to it); the
//! reconfiguration unit picks the heaviest (source, destination) pair as the
//! next bus owner and — in adaptive mode — resizes the window itself by a
//! first-order gradient step on the per-window latency signal:
//!
//! ```text
//! grad   = (latency(t) - latency(t-1)) / (window(t) - window(t-1))
//! window(t+1) = window(t) - alpha * grad
//! ```
//!
//! The next window is then clamped: it never grows beyond `growth_cap` times
//! the current one and never shrinks below `window_min` cycles. Identical
//! consecutive windows give a zero denominator; the gradient is defined as 0
//! there, so the controller holds the window unchanged.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::topology::{MeshSpec, NodeId};

/// Per-node, per-window traffic counters. Reset at every window boundary.
#[derive(Debug, Clone)]
pub struct TrafficStats {
    pub node: NodeId,
    /// Flits injected toward each destination this window. A BTreeMap keeps
    /// iteration in node order, which makes the lowest-id tie-break free.
    pub per_dest: BTreeMap<NodeId, u64>,
    pub total: u64,
}

impl TrafficStats {
    pub fn new(node: NodeId) -> Self {
        TrafficStats { node, per_dest: BTreeMap::new(), total: 0 }
    }

    pub fn record_flit(&mut self, dst: NodeId) {
        *self.per_dest.entry(dst).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn reset(&mut self) {
        self.per_dest.clear();
        self.total = 0;
    }

    /// Condense the window's counters into the report a core would put on
    /// the wire. Ties on the heaviest destination break toward the lowest
    /// node id; a node that sent nothing reports itself with a zero count.
    pub fn make_report(&self) -> NodeReport {
        let mut top_dest = self.node;
        let mut top_count = 0u64;
        for (&dst, &count) in &self.per_dest {
            if count > top_count {
                top_dest = dst;
                top_count = count;
            }
        }
        NodeReport { node: self.node, top_dest, top_count, total_count: self.total }
    }
}

/// What one core tells the reconfiguration unit at a window boundary.
/// On the wire this is a fixed-size payload: two 4-byte flit counts plus a
/// 2-byte destination address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeReport {
    pub node: NodeId,
    pub top_dest: NodeId,
    pub top_count: u64,
    pub total_count: u64,
}

impl NodeReport {
    /// Whether the counts still fit the fixed-size report payload
    /// (4-byte counts, 2-byte address).
    pub fn fits_payload(&self) -> bool {
        self.top_count <= u64::from(u32::MAX)
            && self.total_count <= u64::from(u32::MAX)
            && self.top_dest.0 <= u32::from(u16::MAX)
    }
}

/// Pick the next bus owners: the report with the highest flit count toward
/// its heaviest destination wins; ties break toward the lexicographically
/// smallest (src, dst) pair. Pairs closer than `min_hops` are ignored.
/// Returns `None` when no node reported any qualifying traffic.
pub fn select_bus_owners(
    reports: &[NodeReport],
    mesh: &MeshSpec,
    min_hops: u32,
) -> Result<Option<(NodeId, NodeId)>> {
    let mut seen = vec![false; mesh.nodes() as usize];
    let mut best: Option<(u64, NodeId, NodeId)> = None;
    for r in reports {
        if !mesh.contains(r.node) {
            return Err(Error::InvalidNode { index: r.node.0, nodes: mesh.nodes() });
        }
        if seen[r.node.index()] {
            return Err(Error::Protocol(format!("duplicate report from node {}", r.node)));
        }
        seen[r.node.index()] = true;
        if r.top_count == 0 || r.top_dest == r.node {
            continue;
        }
        if mesh.manhattan(r.node, r.top_dest)? < min_hops {
            continue;
        }
        let candidate = (r.top_count, r.node, r.top_dest);
        best = match best {
            None => Some(candidate),
            Some(b) => {
                // higher count wins; on equal counts the smaller (src, dst)
                let better = candidate.0 > b.0
                    || (candidate.0 == b.0 && (candidate.1, candidate.2) < (b.1, b.2));
                Some(if better { candidate } else { b })
            }
        };
    }
    Ok(best.map(|(_, src, dst)| (src, dst)))
}

/// How the controller condenses a window's deliveries into one cost value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostSignal {
    /// Sum of the latencies of every packet delivered in the window.
    Total,
    /// Average latency per delivered packet.
    Mean,
}

/// Gradient-descent controller for the measurement window. Holds the last
/// two completed (window length, latency cost) pairs.
#[derive(Debug, Clone)]
pub struct WindowController {
    pub alpha: f64,
    pub window_min: u64,
    pub growth_cap: u64,
    pub cur_window: u64,
    pub prev_window: u64,
    pub cur_latency: f64,
    pub prev_latency: f64,
    completed: u64,
}

impl WindowController {
    pub fn new(alpha: f64, window_min: u64, growth_cap: u64, initial_window: u64) -> Self {
        WindowController {
            alpha,
            window_min,
            growth_cap,
            cur_window: initial_window,
            prev_window: initial_window,
            cur_latency: 0.0,
            prev_latency: 0.0,
            completed: 0,
        }
    }

    pub fn windows_completed(&self) -> u64 {
        self.completed
    }

    /// First-order gradient of the latency signal with respect to the window
    /// length, taken over the last two completed windows. Defined as 0 when
    /// the two windows were the same length.
    pub fn gradient(&self) -> f64 {
        let dw = self.cur_window as f64 - self.prev_window as f64;
        if dw == 0.0 {
            return 0.0;
        }
        (self.cur_latency - self.prev_latency) / dw
    }

    /// The descent step with both clamps applied: round half up, cap growth
    /// at `growth_cap` times the current window, floor at `window_min`.
    pub fn next_window(&self) -> u64 {
        let raw = self.cur_window as f64 - self.alpha * self.gradient();
        let rounded = round_half_up(raw);
        let capped = rounded.min((self.cur_window as i64).saturating_mul(self.growth_cap as i64));
        capped.max(self.window_min as i64) as u64
    }

    /// Record a completed window and return the length the next one should
    /// have. The first boundary has no history to difference against, so it
    /// bootstraps the next window to 1.1x the initial one — that alone
    /// guarantees a nonzero denominator when adaptation starts at the second
    /// boundary.
    pub fn on_window_end(&mut self, window_len: u64, cost: f64) -> u64 {
        self.prev_window = self.cur_window;
        self.prev_latency = self.cur_latency;
        self.cur_window = window_len;
        self.cur_latency = cost;
        self.completed += 1;
        if self.completed == 1 {
            let boot = round_half_up(self.cur_window as f64 * 1.1).max(self.window_min as i64);
            return boot as u64;
        }
        self.next_window()
    }
}

fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Outcome of one window boundary: the bus to establish once the
/// reconfiguration period ends, the next window length, and the gradient
/// that produced it (0 when no descent step was taken).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconfigOutcome {
    pub bus: Option<(NodeId, NodeId)>,
    pub next_window: u64,
    pub gradient: f64,
}

/// One full reconfiguration decision: select the next bus owners from the
/// node reports and advance the window controller. `adaptive` false keeps
/// the window fixed (static scheme); the report/selection path is shared.
pub fn run_reconfiguration(
    reports: &[NodeReport],
    mesh: &MeshSpec,
    min_hops: u32,
    ctrl: &mut WindowController,
    window_len: u64,
    cost: f64,
    adaptive: bool,
) -> Result<ReconfigOutcome> {
    let bus = select_bus_owners(reports, mesh, min_hops)?;
    if adaptive {
        let had_history = ctrl.windows_completed() >= 1;
        let next_window = ctrl.on_window_end(window_len, cost);
        let gradient = if had_history { ctrl.gradient() } else { 0.0 };
        Ok(ReconfigOutcome { bus, next_window, gradient })
    } else {
        ctrl.on_window_end(window_len, cost);
        Ok(ReconfigOutcome { bus, next_window: window_len, gradient: 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctrl(cur: u64, prev: u64, cur_l: f64, prev_l: f64) -> WindowController {
        WindowController {
            alpha: 0.5,
            window_min: 100,
            growth_cap: 10,
            cur_window: cur,
            prev_window: prev,
            cur_latency: cur_l,
            prev_latency: prev_l,
            completed: 2,
        }
    }

    #[test]
    fn stats_and_report() {
        let mut s = TrafficStats::new(NodeId(3));
        for _ in 0..5 {
            s.record_flit(NodeId(7));
        }
        for _ in 0..2 {
            s.record_flit(NodeId(1));
        }
        let r = s.make_report();
        assert_eq!(r, NodeReport { node: NodeId(3), top_dest: NodeId(7), top_count: 5, total_count: 7 });
        assert!(r.fits_payload());
        s.reset();
        assert_eq!(s.make_report().total_count, 0);
    }

    #[test]
    fn report_tie_breaks_to_lowest_destination() {
        let mut s = TrafficStats::new(NodeId(0));
        for _ in 0..4 {
            s.record_flit(NodeId(9));
        }
        for _ in 0..4 {
            s.record_flit(NodeId(2));
        }
        assert_eq!(s.make_report().top_dest, NodeId(2));
    }

    #[test]
    fn empty_window_reports_own_node_sentinel() {
        let s = TrafficStats::new(NodeId(12));
        let r = s.make_report();
        assert_eq!(r.top_dest, NodeId(12));
        assert_eq!(r.top_count, 0);
    }

    fn rep(node: u32, dst: u32, top: u64) -> NodeReport {
        NodeReport { node: NodeId(node), top_dest: NodeId(dst), top_count: top, total_count: top }
    }

    #[test]
    fn selection_picks_heaviest_pair() {
        let m = MeshSpec::default();
        let reports = [rep(0, 5, 10), rep(1, 9, 42), rep(2, 0, 17)];
        assert_eq!(select_bus_owners(&reports, &m, 0).unwrap(), Some((NodeId(1), NodeId(9))));
    }

    #[test]
    fn selection_tie_breaks_lexicographically() {
        let m = MeshSpec::default();
        let reports = [rep(4, 1, 9), rep(2, 8, 9), rep(3, 0, 9)];
        // counts all equal: (2,8) < (3,0) < (4,1)
        assert_eq!(select_bus_owners(&reports, &m, 0).unwrap(), Some((NodeId(2), NodeId(8))));
        // order of the report slice must not matter
        let mut rev = reports;
        rev.reverse();
        assert_eq!(select_bus_owners(&rev, &m, 0).unwrap(), Some((NodeId(2), NodeId(8))));
    }

    #[test]
    fn selection_with_no_traffic_is_none() {
        let m = MeshSpec::default();
        let reports = [rep(0, 0, 0), rep(1, 1, 0)];
        assert_eq!(select_bus_owners(&reports, &m, 0).unwrap(), None);
    }

    #[test]
    fn duplicate_reports_are_a_protocol_error() {
        let m = MeshSpec::default();
        let reports = [rep(0, 5, 10), rep(0, 6, 3)];
        assert!(matches!(select_bus_owners(&reports, &m, 0), Err(Error::Protocol(_))));
    }

    #[test]
    fn min_hops_filters_close_pairs() {
        let m = MeshSpec::default();
        // node 0 -> 1 is one hop; node 0 -> 255 is 30 hops
        let close = [rep(0, 1, 100), rep(3, 255, 10)];
        assert_eq!(select_bus_owners(&close, &m, 2).unwrap(), Some((NodeId(3), NodeId(255))));
        let only_close = [rep(0, 1, 100)];
        assert_eq!(select_bus_owners(&only_close, &m, 2).unwrap(), None);
    }

    // The worked descent step: window 1000, gradient 1.0, alpha 0.5 gives
    // 999.5, which rounds half up to 1000.
    #[test]
    fn descent_step_rounds_half_up() {
        let c = ctrl(1000, 900, 1100.0, 1000.0);
        assert_eq!(c.gradient(), 1.0);
        assert_eq!(c.next_window(), 1000);
    }

    #[test]
    fn growth_is_capped_at_ten_times() {
        // gradient (1000010-10)/(100-200) = -10000; raw next window is
        // 100 + 5000 = 5100, but growth is capped at 10x the current window
        let c = ctrl(100, 200, 1_000_010.0, 10.0);
        assert_eq!(c.next_window(), 1000);
    }

    #[test]
    fn shrink_is_floored_at_window_min() {
        // strong positive gradient wants ~40 cycles; floor holds at 100
        let c = ctrl(200, 100, 50_000.0, 17_000.0);
        // raw = 200 - 0.5 * (33000/100) = 200 - 165 = 35 -> floor 100
        assert_eq!(c.next_window(), 100);
    }

    #[test]
    fn zero_denominator_holds_window() {
        let c = ctrl(500, 500, 9000.0, 100.0);
        assert_eq!(c.gradient(), 0.0);
        assert_eq!(c.next_window(), 500);
    }

    #[test]
    fn zero_numerator_holds_window() {
        let c = ctrl(500, 400, 777.0, 777.0);
        assert_eq!(c.gradient(), 0.0);
        assert_eq!(c.next_window(), 500);
    }

    #[test]
    fn bootstrap_then_descent() {
        let mut c = WindowController::new(0.5, 100, 10, 1000);
        // first boundary: no history, next window is 1.1x initial
        assert_eq!(c.on_window_end(1000, 50_000.0), 1100);
        // second boundary: gradient (56000-50000)/(1100-1000) = 60
        // next = 1100 - 0.5*60 = 1070
        assert_eq!(c.on_window_end(1100, 56_000.0), 1070);
        assert_eq!(c.windows_completed(), 2);
    }

    #[test]
    fn negative_raw_window_clamps_to_floor() {
        let c = ctrl(150, 100, 1.0e9, 0.0);
        assert_eq!(c.next_window(), 100);
    }

    #[test]
    fn run_reconfiguration_combines_selection_and_descent() {
        let m = MeshSpec::default();
        let mut c = WindowController::new(0.5, 100, 10, 1000);
        let reports = [rep(0, 255, 12), rep(7, 3, 2)];
        let out = run_reconfiguration(&reports, &m, 0, &mut c, 1000, 4000.0, true).unwrap();
        assert_eq!(out.bus, Some((NodeId(0), NodeId(255))));
        assert_eq!(out.next_window, 1100); // bootstrap
        assert_eq!(out.gradient, 0.0);

        // static flavor never moves the window
        let mut c = WindowController::new(0.5, 100, 10, 1000);
        let out = run_reconfiguration(&reports, &m, 0, &mut c, 1000, 4000.0, false).unwrap();
        assert_eq!(out.next_window, 1000);
    }
}
