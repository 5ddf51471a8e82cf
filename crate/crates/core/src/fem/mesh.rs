use serde::{Deserialize, Serialize};

use super::element::{quad_points, QuadPoint};
use crate::error::FemError;

/// Rectangular cantilever: left edge clamped, top edge loadable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamGeometry {
    pub length: f64,
    pub height: f64,
    pub elements_x: usize,
    pub elements_y: usize,
}

impl Default for BeamGeometry {
    fn default() -> Self {
        Self {
            length: 2.0,
            height: 0.5,
            elements_x: 16,
            elements_y: 4,
        }
    }
}

/// A node on the loadable edge together with its arc distance from the fixed boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeNode {
    pub node: usize,
    pub arc: f64,
}

/// Immutable quad mesh of the reference configuration.
#[derive(Debug, Clone)]
pub struct Mesh2D {
    node_coords: Vec<[f64; 2]>,
    elements: Vec<[usize; 4]>,
    fixed_dofs: Vec<usize>,
    fixed_mask: Vec<bool>,
    loadable_edge: Vec<EdgeNode>,
    quadrature: Vec<[QuadPoint; 4]>,
}

impl Mesh2D {
    /// Validates connectivity and reference Jacobians, then freezes the mesh.
    ///
    /// `loadable_edge` must be sorted by increasing arc distance.
    pub fn new(
        node_coords: Vec<[f64; 2]>,
        elements: Vec<[usize; 4]>,
        fixed_dofs: Vec<usize>,
        loadable_edge: Vec<EdgeNode>,
    ) -> Result<Self, FemError> {
        let n = node_coords.len();
        if n == 0 || elements.is_empty() {
            return Err(FemError::InvalidMesh("mesh has no nodes or elements".into()));
        }
        if fixed_dofs.is_empty() {
            return Err(FemError::InvalidMesh("no constrained dofs".into()));
        }
        let dof_count = 2 * n;
        let mut fixed_mask = vec![false; dof_count];
        for &d in &fixed_dofs {
            if d >= dof_count {
                return Err(FemError::InvalidMesh(format!("fixed dof {d} out of range")));
            }
            fixed_mask[d] = true;
        }
        let mut fixed: Vec<usize> = (0..dof_count).filter(|&d| fixed_mask[d]).collect();
        fixed.dedup();
        for e in &loadable_edge {
            if e.node >= n {
                return Err(FemError::InvalidMesh(format!("edge node {} out of range", e.node)));
            }
        }
        if loadable_edge.windows(2).any(|w| w[1].arc <= w[0].arc) {
            return Err(FemError::InvalidMesh("loadable edge must be sorted by arc".into()));
        }
        let mut quadrature = Vec::with_capacity(elements.len());
        for (ei, conn) in elements.iter().enumerate() {
            if let Some(&bad) = conn.iter().find(|&&a| a >= n) {
                return Err(FemError::InvalidMesh(format!(
                    "element {ei} references node {bad} >= {n}"
                )));
            }
            let coords = conn.map(|a| node_coords[a]);
            let qp = quad_points(&coords).map_err(|e| match e {
                FemError::InvertedElement { jacobian, .. } => FemError::InvertedElement {
                    element: Some(ei),
                    jacobian,
                },
                other => other,
            })?;
            quadrature.push(qp);
        }
        Ok(Self {
            node_coords,
            elements,
            fixed_dofs: fixed,
            fixed_mask,
            loadable_edge,
            quadrature,
        })
    }

    /// Structured cantilever mesh with counter-clockwise quads, node index
    /// `row * (elements_x + 1) + col`.
    pub fn cantilever(geom: &BeamGeometry) -> Result<Self, FemError> {
        let (nx, ny) = (geom.elements_x, geom.elements_y);
        if nx == 0 || ny == 0 || !(geom.length > 0.0) || !(geom.height > 0.0) {
            return Err(FemError::InvalidMesh(format!("degenerate beam geometry {geom:?}")));
        }
        let cols = nx + 1;
        let mut coords = Vec::with_capacity(cols * (ny + 1));
        for r in 0..=ny {
            for c in 0..=nx {
                coords.push([
                    geom.length * c as f64 / nx as f64,
                    geom.height * r as f64 / ny as f64,
                ]);
            }
        }
        let mut elements = Vec::with_capacity(nx * ny);
        for r in 0..ny {
            for c in 0..nx {
                let n0 = r * cols + c;
                elements.push([n0, n0 + 1, n0 + cols + 1, n0 + cols]);
            }
        }
        let fixed = (0..=ny)
            .flat_map(|r| {
                let node = r * cols;
                [2 * node, 2 * node + 1]
            })
            .collect();
        let top = ny * cols;
        let edge = (1..=nx)
            .map(|c| EdgeNode {
                node: top + c,
                arc: coords[top + c][0],
            })
            .collect();
        Self::new(coords, elements, fixed, edge)
    }

    pub fn node_count(&self) -> usize {
        self.node_coords.len()
    }

    pub fn dof_count(&self) -> usize {
        2 * self.node_coords.len()
    }

    pub fn node_coords(&self) -> &[[f64; 2]] {
        &self.node_coords
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn fixed_dofs(&self) -> &[usize] {
        &self.fixed_dofs
    }

    pub fn is_fixed(&self, dof: usize) -> bool {
        self.fixed_mask[dof]
    }

    pub fn loadable_edge(&self) -> &[EdgeNode] {
        &self.loadable_edge
    }

    pub(crate) fn quadrature(&self, element: usize) -> &[QuadPoint; 4] {
        &self.quadrature[element]
    }

    /// Snaps an arc distance to the nearest loadable node (ties go to the
    /// node closer to the fixed boundary).
    pub fn snap_to_edge(&self, arc: f64) -> Result<EdgeNode, FemError> {
        let edge = &self.loadable_edge;
        if edge.is_empty() {
            return Err(FemError::InvalidLoad("mesh has no loadable edge".into()));
        }
        if !arc.is_finite() {
            return Err(FemError::InvalidLoad(format!("load position {arc} not finite")));
        }
        let spacing = if edge.len() > 1 {
            edge[1].arc - edge[0].arc
        } else {
            edge[0].arc.max(1.0)
        };
        let (lo, hi) = (edge[0].arc - spacing, edge[edge.len() - 1].arc + 0.5 * spacing);
        if arc < lo.min(0.0) || arc > hi {
            return Err(FemError::InvalidLoad(format!(
                "load position {arc} outside loadable edge [0, {hi}]"
            )));
        }
        let mut best = edge[0];
        for e in &edge[1..] {
            if (e.arc - arc).abs() < (best.arc - arc).abs() {
                best = *e;
            }
        }
        Ok(best)
    }

    /// Compact description recorded in dataset manifests.
    pub fn descriptor(&self) -> String {
        format!(
            "quad4 nodes={} elements={} fixed_dofs={} loadable_nodes={}",
            self.node_count(),
            self.elements.len(),
            self.fixed_dofs.len(),
            self.loadable_edge.len()
        )
    }
}
