//! Vessel network description, validation and its 1D element mesh.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::TissueGrid;
use super::TissueError;

/// Network shipped with the crate: 14 segments in a 500 um cube. One inlet
/// on the `x-` face feeds two bifurcation levels; four vessels then cross
/// the box through the four quadrants and merge in two confluence levels
/// into one outlet on the `x+` face. Radii (10-15 um) give a perfusion of
/// about 1e-2 1/s, so drug delivery is not flow-limited.
pub const DEFAULT_NETWORK_JSON: &str = include_str!("default_network.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Node {
    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub id: u32,
    pub n0: u32,
    pub n1: u32,
    /// Radius, m.
    pub radius: f64,
    /// Number of 1D elements.
    pub elements: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    /// Inlet at `p_0 + delta_p`, outlet at `p_0`, from the parameter set.
    Nominal,
    /// Pressure given by `value`, Pa.
    Pressure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryNode {
    pub node: u32,
    pub kind: BoundaryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

/// Tissue box the network lives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub extents: [f64; 3],
    pub cells: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselNetwork {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
    pub nodes: Vec<Node>,
    pub segments: Vec<Segment>,
    pub inlets: Vec<BoundaryNode>,
    pub outlets: Vec<BoundaryNode>,
}

impl VesselNetwork {
    pub fn from_json(text: &str) -> Result<Self, TissueError> {
        serde_json::from_str(text).map_err(|e| TissueError::Network(format!("parse error: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self, TissueError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TissueError::Network(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    /// The shipped network.
    pub fn default_network() -> Self {
        Self::from_json(DEFAULT_NETWORK_JSON).expect("shipped network parses")
    }

    /// Grid from the network's `domain`, or a 15-cell cube of 500 um.
    pub fn grid(&self) -> Result<TissueGrid, TissueError> {
        match &self.domain {
            Some(d) => TissueGrid::new(d.extents, d.cells),
            None => TissueGrid::cube(500e-6, 15),
        }
    }

    /// Structural checks plus containment in `grid`'s box.
    pub fn validate(&self, grid: &TissueGrid) -> Result<(), TissueError> {
        let bad = |msg: String| Err(TissueError::Network(msg));
        let mut ids = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if ids.insert(n.id, i).is_some() {
                return bad(format!("duplicate node id {}", n.id));
            }
            if !n.position().iter().all(|v| v.is_finite()) {
                return bad(format!("node {} has non-finite coordinates", n.id));
            }
        }
        let mut seg_ids = HashMap::new();
        let mut degree = vec![0usize; self.nodes.len()];
        for s in &self.segments {
            if seg_ids.insert(s.id, ()).is_some() {
                return bad(format!("duplicate segment id {}", s.id));
            }
            let (Some(&a), Some(&b)) = (ids.get(&s.n0), ids.get(&s.n1)) else {
                return bad(format!("segment {} references an unknown node", s.id));
            };
            if a == b {
                return bad(format!("segment {} is a loop on node {}", s.id, s.n0));
            }
            if !(s.radius > 0.0 && s.radius.is_finite()) {
                return bad(format!("segment {} has non-positive radius", s.id));
            }
            if s.elements == 0 {
                return bad(format!("segment {} has zero elements", s.id));
            }
            if distance(self.nodes[a].position(), self.nodes[b].position()) == 0.0 {
                return bad(format!("segment {} has zero length", s.id));
            }
            if !grid.contains(self.nodes[a].position()) || !grid.contains(self.nodes[b].position()) {
                return Err(TissueError::SegmentOutsideBox(s.id));
            }
            degree[a] += 1;
            degree[b] += 1;
        }
        if self.segments.is_empty() {
            return Ok(());
        }
        if self.inlets.is_empty() || self.outlets.is_empty() {
            return bad("network needs at least one inlet and one outlet".into());
        }
        let mut seen = HashMap::new();
        for b in self.inlets.iter().chain(&self.outlets) {
            let Some(&i) = ids.get(&b.node) else {
                return bad(format!("boundary references unknown node {}", b.node));
            };
            if seen.insert(b.node, ()).is_some() {
                return bad(format!("node {} carries more than one boundary condition", b.node));
            }
            if degree[i] != 1 {
                return bad(format!("boundary node {} must end exactly one segment", b.node));
            }
            if b.kind == BoundaryKind::Pressure && !b.value.is_some_and(f64::is_finite) {
                return bad(format!("pressure boundary at node {} needs a finite value", b.node));
            }
        }
        for (i, d) in degree.iter().enumerate() {
            if *d == 0 {
                return bad(format!("node {} is not attached to any segment", self.nodes[i].id));
            }
        }
        // every node must be reachable from an inlet
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for s in &self.segments {
            let (a, b) = (ids[&s.n0], ids[&s.n1]);
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut reached = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = self.inlets.iter().map(|b| ids[&b.node]).collect();
        while let Some(n) = stack.pop() {
            if std::mem::replace(&mut reached[n], true) {
                continue;
            }
            stack.extend(adj[n].iter().copied().filter(|&m| !reached[m]));
        }
        if let Some(i) = reached.iter().position(|r| !r) {
            return bad(format!("node {} is not connected to an inlet", self.nodes[i].id));
        }
        Ok(())
    }
}

/// One linear 1D element between two mesh points.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    /// Index into `VesselNetwork::segments`.
    pub segment: usize,
    pub a: usize,
    pub b: usize,
    pub length: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointBoundary {
    Interior,
    Inlet { pressure: f64 },
    Outlet { pressure: f64 },
}

/// 1D mesh: network nodes first (in file order), then interior points of
/// each segment in segment order.
#[derive(Debug, Clone, PartialEq)]
pub struct VesselMesh {
    pub points: Vec<[f64; 3]>,
    pub elements: Vec<Element>,
    pub boundary: Vec<PointBoundary>,
    /// Elements of each segment, in order from `n0` to `n1`.
    pub segment_elements: Vec<Vec<usize>>,
    pub segment_ids: Vec<u32>,
    pub node_ids: Vec<u32>,
}

impl VesselMesh {
    /// Meshes a validated network. Inlet and outlet pressures of `Nominal`
    /// boundaries are `p_in` and `p_out`.
    pub fn build(net: &VesselNetwork, p_in: f64, p_out: f64) -> Self {
        let ids: HashMap<u32, usize> = net.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut points: Vec<[f64; 3]> = net.nodes.iter().map(Node::position).collect();
        let mut boundary = vec![PointBoundary::Interior; points.len()];
        for b in &net.inlets {
            let p = match b.kind {
                BoundaryKind::Nominal => p_in,
                BoundaryKind::Pressure => b.value.unwrap_or(p_in),
            };
            boundary[ids[&b.node]] = PointBoundary::Inlet { pressure: p };
        }
        for b in &net.outlets {
            let p = match b.kind {
                BoundaryKind::Nominal => p_out,
                BoundaryKind::Pressure => b.value.unwrap_or(p_out),
            };
            boundary[ids[&b.node]] = PointBoundary::Outlet { pressure: p };
        }
        let mut elements = Vec::new();
        let mut segment_elements = Vec::with_capacity(net.segments.len());
        for (si, s) in net.segments.iter().enumerate() {
            let (a, b) = (ids[&s.n0], ids[&s.n1]);
            let (pa, pb) = (points[a], points[b]);
            let n = s.elements;
            let mut chain = vec![a];
            for e in 1..n {
                let t = e as f64 / n as f64;
                points.push([0, 1, 2].map(|d| pa[d] + t * (pb[d] - pa[d])));
                boundary.push(PointBoundary::Interior);
                chain.push(points.len() - 1);
            }
            chain.push(b);
            let mut list = Vec::with_capacity(n);
            for w in chain.windows(2) {
                list.push(elements.len());
                elements.push(Element {
                    segment: si,
                    a: w[0],
                    b: w[1],
                    length: distance(points[w[0]], points[w[1]]),
                    radius: s.radius,
                });
            }
            segment_elements.push(list);
        }
        Self {
            points,
            elements,
            boundary,
            segment_elements,
            segment_ids: net.segments.iter().map(|s| s.id).collect(),
            node_ids: net.nodes.iter().map(|n| n.id).collect(),
        }
    }

    /// Mesh with no vessels.
    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            elements: Vec::new(),
            boundary: Vec::new(),
            segment_elements: Vec::new(),
            segment_ids: Vec::new(),
            node_ids: Vec::new(),
        }
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Elements touching each point.
    pub fn point_elements(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.points.len()];
        for (e, el) in self.elements.iter().enumerate() {
            out[el.a].push(e);
            out[el.b].push(e);
        }
        out
    }

    pub fn is_dirichlet(&self, point: usize) -> bool {
        matches!(self.boundary[point], PointBoundary::Inlet { .. })
    }
}

pub fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}
