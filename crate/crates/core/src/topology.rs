//! Mesh geometry: node indexing, neighbor lookup, and the serpentine
//! (boustrophedon) ordering that the optical waveguide follows across the die.
//!
//! Nodes are numbered row-major: `index = row * width + col`, row 0 at the
//! top. The waveguide snakes through every core once — even rows left to
//! right, odd rows right to left — so the physical length of a bus between
//! two cores is the difference of their serpentine positions times the core
//! spacing.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Row-major node index into the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Router ports. Every router has the four mesh directions plus `Local`;
/// bus-capable routers add `Optical` (the express link itself) and
/// `Reconfig` (the out-of-band control channel).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PortDir {
    North = 0,
    South = 1,
    East = 2,
    West = 3,
    Local = 4,
    Optical = 5,
    Reconfig = 6,
}

impl PortDir {
    pub const MESH: [PortDir; 4] = [PortDir::North, PortDir::South, PortDir::East, PortDir::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> PortDir {
        match self {
            PortDir::North => PortDir::South,
            PortDir::South => PortDir::North,
            PortDir::East => PortDir::West,
            PortDir::West => PortDir::East,
            other => other,
        }
    }

    /// Short name used in event logs.
    pub fn tag(self) -> &'static str {
        match self {
            PortDir::North => "N",
            PortDir::South => "S",
            PortDir::East => "E",
            PortDir::West => "W",
            PortDir::Local => "L",
            PortDir::Optical => "O",
            PortDir::Reconfig => "R",
        }
    }
}

/// Mesh dimensions and the physical constants tied to the floorplan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub width: u32,
    pub height: u32,
    /// Core-to-core spacing in millimeters.
    pub spacing: f64,
    /// Core clock in GHz. Carried through to reports; the cycle loop itself
    /// is unitless.
    pub clock: f64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec { width: 16, height: 16, spacing: 1.0, clock: 0.78125 }
    }
}

impl MeshSpec {
    pub fn new(width: u32, height: u32) -> Self {
        MeshSpec { width, height, ..MeshSpec::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::Config(format!(
                "mesh must be at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        if self.spacing.is_nan() || self.spacing <= 0.0 || self.clock.is_nan() || self.clock <= 0.0
        {
            return Err(Error::Config("spacing and clock must be positive".into()));
        }
        Ok(())
    }

    pub fn nodes(&self) -> u32 {
        self.width * self.height
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.0 < self.nodes()
    }

    pub fn node_at(&self, row: u32, col: u32) -> NodeId {
        debug_assert!(row < self.height && col < self.width);
        NodeId(row * self.width + col)
    }

    /// (row, col) of a node, or an invalid-node error.
    pub fn coord_of(&self, node: NodeId) -> Result<(u32, u32)> {
        if !self.contains(node) {
            return Err(Error::InvalidNode { index: node.0, nodes: self.nodes() });
        }
        Ok((node.0 / self.width, node.0 % self.width))
    }

    pub fn manhattan(&self, a: NodeId, b: NodeId) -> Result<u32> {
        let (ar, ac) = self.coord_of(a)?;
        let (br, bc) = self.coord_of(b)?;
        Ok(ar.abs_diff(br) + ac.abs_diff(bc))
    }

    /// Neighbors in fixed port order (N, S, E, W); corners get 2, edges 3,
    /// interior nodes 4.
    pub fn mesh_neighbors(&self, node: NodeId) -> Result<Vec<(PortDir, NodeId)>> {
        let (row, col) = self.coord_of(node)?;
        let mut out = Vec::with_capacity(4);
        if row > 0 {
            out.push((PortDir::North, self.node_at(row - 1, col)));
        }
        if row + 1 < self.height {
            out.push((PortDir::South, self.node_at(row + 1, col)));
        }
        if col + 1 < self.width {
            out.push((PortDir::East, self.node_at(row, col + 1)));
        }
        if col > 0 {
            out.push((PortDir::West, self.node_at(row, col - 1)));
        }
        Ok(out)
    }

    /// Position of a node along the serpentine waveguide. Even rows run left
    /// to right, odd rows right to left, starting at (0,0); consecutive
    /// positions are always physically adjacent cores.
    pub fn serpentine_index(&self, node: NodeId) -> Result<u32> {
        let (row, col) = self.coord_of(node)?;
        Ok(if row % 2 == 0 { row * self.width + col } else { row * self.width + (self.width - 1 - col) })
    }

    /// Physical length in millimeters of an optical bus between `a` and `b`:
    /// the serpentine distance times the core spacing. Light on the shared
    /// waveguide only travels the segment between the two endpoints, so the
    /// span depends on the pair, not on the whole die.
    pub fn bus_span_mm(&self, a: NodeId, b: NodeId) -> Result<f64> {
        if a == b {
            return Err(Error::DegenerateSpan { node: a.0 });
        }
        let sa = self.serpentine_index(a)?;
        let sb = self.serpentine_index(b)?;
        Ok(f64::from(sa.abs_diff(sb)) * self.spacing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh16() -> MeshSpec {
        MeshSpec::default()
    }

    #[test]
    fn row_major_indexing() {
        let m = mesh16();
        assert_eq!(m.coord_of(NodeId(0)).unwrap(), (0, 0));
        assert_eq!(m.coord_of(NodeId(255)).unwrap(), (15, 15));
        assert_eq!(m.coord_of(NodeId(17)).unwrap(), (1, 1));
        assert_eq!(m.node_at(1, 1), NodeId(17));
    }

    #[test]
    fn out_of_range_node_rejected() {
        let m = mesh16();
        match m.coord_of(NodeId(256)) {
            Err(Error::InvalidNode { index: 256, nodes: 256 }) => {}
            other => panic!("expected invalid-node error, got {other:?}"),
        }
    }

    #[test]
    fn neighbor_sets() {
        let m = mesh16();
        // corner (0,0): East and South only
        let n = m.mesh_neighbors(NodeId(0)).unwrap();
        assert_eq!(n, vec![(PortDir::South, NodeId(16)), (PortDir::East, NodeId(1))]);
        // interior node has all four, in N,S,E,W order
        let n = m.mesh_neighbors(m.node_at(5, 5)).unwrap();
        assert_eq!(
            n,
            vec![
                (PortDir::North, m.node_at(4, 5)),
                (PortDir::South, m.node_at(6, 5)),
                (PortDir::East, m.node_at(5, 6)),
                (PortDir::West, m.node_at(5, 4)),
            ]
        );
        // edge node (0,5): three neighbors
        assert_eq!(m.mesh_neighbors(m.node_at(0, 5)).unwrap().len(), 3);
    }

    // Hand-walked serpentine positions on 16x16: row 0 runs 0..=15 left to
    // right, row 1 runs 16..=31 right to left, so (1,15) is position 16 and
    // (1,0) is position 31.
    #[test]
    fn serpentine_hand_walk() {
        let m = mesh16();
        assert_eq!(m.serpentine_index(NodeId(0)).unwrap(), 0);
        assert_eq!(m.serpentine_index(m.node_at(0, 15)).unwrap(), 15);
        assert_eq!(m.serpentine_index(m.node_at(1, 15)).unwrap(), 16);
        assert_eq!(m.serpentine_index(m.node_at(1, 0)).unwrap(), 31);
        assert_eq!(m.serpentine_index(m.node_at(2, 0)).unwrap(), 32);
    }

    #[test]
    fn serpentine_is_a_bijection_with_adjacent_steps() {
        for (w, h) in [(2u32, 2u32), (3, 5), (8, 8), (16, 16)] {
            let m = MeshSpec::new(w, h);
            let mut seen = vec![false; m.nodes() as usize];
            let mut by_pos = vec![NodeId(0); m.nodes() as usize];
            for i in 0..m.nodes() {
                let s = m.serpentine_index(NodeId(i)).unwrap();
                assert!(!seen[s as usize], "position {s} hit twice on {w}x{h}");
                seen[s as usize] = true;
                by_pos[s as usize] = NodeId(i);
            }
            // consecutive serpentine positions are physically adjacent
            for p in 1..m.nodes() as usize {
                assert_eq!(m.manhattan(by_pos[p - 1], by_pos[p]).unwrap(), 1);
            }
        }
    }

    #[test]
    fn bus_span_values() {
        let m = mesh16();
        // adjacent on the guide
        assert_eq!(m.bus_span_mm(NodeId(0), NodeId(1)).unwrap(), 1.0);
        // full guide: positions 0 and 255 at 1 mm spacing
        let far = m.node_at(15, 0); // row 15 is odd, so (15,0) is position 255
        assert_eq!(m.serpentine_index(far).unwrap(), 255);
        assert_eq!(m.bus_span_mm(NodeId(0), far).unwrap(), 255.0);
        // (0,0) to (1,15): positions 0 and 16
        assert_eq!(m.bus_span_mm(NodeId(0), m.node_at(1, 15)).unwrap(), 16.0);
        // symmetric
        assert_eq!(
            m.bus_span_mm(NodeId(7), NodeId(200)).unwrap(),
            m.bus_span_mm(NodeId(200), NodeId(7)).unwrap()
        );
    }

    #[test]
    fn degenerate_span_rejected() {
        let m = mesh16();
        match m.bus_span_mm(NodeId(9), NodeId(9)) {
            Err(Error::DegenerateSpan { node: 9 }) => {}
            other => panic!("expected degenerate-span error, got {other:?}"),
        }
    }

    #[test]
    fn spacing_scales_span() {
        let m = MeshSpec { spacing: 2.5, ..MeshSpec::default() };
        assert_eq!(m.bus_span_mm(NodeId(0), NodeId(4)).unwrap(), 10.0);
    }

    #[test]
    fn tiny_mesh_rejected() {
        assert!(MeshSpec::new(1, 4).validate().is_err());
        assert!(MeshSpec::new(4, 1).validate().is_err());
        assert!(MeshSpec::new(2, 2).validate().is_ok());
    }
}
