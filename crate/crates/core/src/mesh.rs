//! Structured Q1 meshes on a rectangle and an annulus, with tagged boundary edges.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryTag {
    DirichletMech,
    NeumannTraction,
    RobinHeat,
    DirichletHeat,
    Free,
}

impl BoundaryTag {
    pub fn is_mechanical(self) -> bool {
        matches!(self, BoundaryTag::DirichletMech | BoundaryTag::NeumannTraction | BoundaryTag::Free)
    }

    pub fn is_thermal(self) -> bool {
        matches!(self, BoundaryTag::DirichletHeat | BoundaryTag::RobinHeat)
    }
}

/// Geometric part of the boundary an edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
    Inner,
    Outer,
}

/// A boundary edge carries one mechanical and one thermal tag.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    /// Endpoints in counter-clockwise boundary order.
    pub nodes: [usize; 2],
    pub element: usize,
    pub side: Side,
    pub mech: BoundaryTag,
    pub heat: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise node quadruples.
    pub elements: Vec<[usize; 4]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Flagged node used to visualize rotations; not used by the solvers.
    pub marker_node: Option<usize>,
}

impl Mesh {
    /// Rectangle `[0, length] × [0, height]` with `nx × ny` elements.
    ///
    /// Node `(i, j)` has index `i (ny + 1) + j`.
    pub fn gen_rectangle(length: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidDimensions(format!("need at least one element per direction, got {nx}×{ny}")));
        }
        if !(length > 0.0 && height > 0.0 && length.is_finite() && height.is_finite()) {
            return Err(Error::InvalidDimensions(format!("side lengths must be positive, got {length}×{height}")));
        }
        let idx = |i: usize, j: usize| i * (ny + 1) + j;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for i in 0..=nx {
            for j in 0..=ny {
                nodes.push([length * i as f64 / nx as f64, height * j as f64 / ny as f64]);
            }
        }
        let mut elements = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                elements.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        let elem = |i: usize, j: usize| i * ny + j;
        let mut edges = Vec::new();
        let mut push = |nodes: [usize; 2], element, side, mech, heat| {
            edges.push(BoundaryEdge { nodes, element, side, mech, heat })
        };
        for i in 0..nx {
            push([idx(i, 0), idx(i + 1, 0)], elem(i, 0), Side::Bottom, BoundaryTag::Free, BoundaryTag::RobinHeat);
        }
        for j in 0..ny {
            push([idx(nx, j), idx(nx, j + 1)], elem(nx - 1, j), Side::Right, BoundaryTag::NeumannTraction, BoundaryTag::RobinHeat);
        }
        for i in (0..nx).rev() {
            push([idx(i + 1, ny), idx(i, ny)], elem(i, ny - 1), Side::Top, BoundaryTag::Free, BoundaryTag::RobinHeat);
        }
        for j in (0..ny).rev() {
            push([idx(0, j + 1), idx(0, j)], elem(0, j), Side::Left, BoundaryTag::DirichletMech, BoundaryTag::DirichletHeat);
        }
        Ok(Mesh { nodes, elements, boundary_edges: edges, marker_node: None })
    }

    /// Annulus centred at the origin; node `(r, c)` on ring `r` has index `r n_circum + c`.
    pub fn gen_annulus(r_in: f64, r_out: f64, n_radial: usize, n_circum: usize) -> Result<Mesh> {
        if !(r_in > 0.0 && r_out > r_in && r_out.is_finite()) {
            return Err(Error::InvalidDimensions(format!("need 0 < r_in < r_out, got {r_in}, {r_out}")));
        }
        if n_radial == 0 || n_circum < 8 {
            return Err(Error::InvalidDimensions(format!(
                "need n_radial ≥ 1 and n_circum ≥ 8, got {n_radial}, {n_circum}"
            )));
        }
        let idx = |r: usize, c: usize| r * n_circum + c % n_circum;
        let mut nodes = Vec::with_capacity((n_radial + 1) * n_circum);
        for r in 0..=n_radial {
            let radius = r_in + (r_out - r_in) * r as f64 / n_radial as f64;
            for c in 0..n_circum {
                let phi = 2.0 * PI * c as f64 / n_circum as f64;
                nodes.push([radius * phi.cos(), radius * phi.sin()]);
            }
        }
        let mut elements = Vec::with_capacity(n_radial * n_circum);
        for r in 0..n_radial {
            for c in 0..n_circum {
                elements.push([idx(r, c), idx(r + 1, c), idx(r + 1, c + 1), idx(r, c + 1)]);
            }
        }
        let mut edges = Vec::new();
        for c in 0..n_circum {
            edges.push(BoundaryEdge {
                nodes: [idx(n_radial, c), idx(n_radial, c + 1)],
                element: (n_radial - 1) * n_circum + c,
                side: Side::Outer,
                mech: BoundaryTag::DirichletMech,
                heat: BoundaryTag::RobinHeat,
            });
        }
        for c in (0..n_circum).rev() {
            edges.push(BoundaryEdge {
                nodes: [idx(0, c + 1), idx(0, c)],
                element: c,
                side: Side::Inner,
                mech: BoundaryTag::DirichletMech,
                heat: BoundaryTag::DirichletHeat,
            });
        }
        Ok(Mesh { nodes, elements, boundary_edges: edges, marker_node: Some(idx(n_radial, 0)) })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Retag every edge on `side`. Returns the number of edges changed.
    pub fn set_side_tags(&mut self, side: Side, mech: BoundaryTag, heat: BoundaryTag) -> usize {
        let mut n = 0;
        for e in self.boundary_edges.iter_mut().filter(|e| e.side == side) {
            e.mech = mech;
            e.heat = heat;
            n += 1;
        }
        n
    }

    pub fn sides(&self) -> BTreeSet<Side> {
        self.boundary_edges.iter().map(|e| e.side).collect()
    }

    /// Sorted, deduplicated nodes of all edges carrying `tag`.
    pub fn boundary_nodes(&self, tag: BoundaryTag) -> Result<Vec<usize>> {
        let set: BTreeSet<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.mech == tag || e.heat == tag)
            .flat_map(|e| e.nodes)
            .collect();
        if set.is_empty() {
            return Err(Error::UnknownTag(tag));
        }
        Ok(set.into_iter().collect())
    }

    /// Sorted nodes on a geometric side (empty if the mesh has no such side).
    pub fn side_nodes(&self, side: Side) -> Vec<usize> {
        let set: BTreeSet<usize> =
            self.boundary_edges.iter().filter(|e| e.side == side).flat_map(|e| e.nodes).collect();
        set.into_iter().collect()
    }

    /// Jacobian determinants of the bilinear map at the four reference corners.
    pub fn corner_jacobians(&self, element: usize) -> [f64; 4] {
        let el = self.elements[element];
        std::array::from_fn(|a| {
            let p = self.nodes[el[a]];
            let next = self.nodes[el[(a + 1) % 4]];
            let prev = self.nodes[el[(a + 3) % 4]];
            let u = [next[0] - p[0], next[1] - p[1]];
            let v = [prev[0] - p[0], prev[1] - p[1]];
            // reference edge vectors have length 2, hence the factor 1/4
            0.25 * (u[0] * v[1] - u[1] * v[0])
        })
    }

    /// Polygonal area, which Q1 quadrature of the constant 1 reproduces exactly.
    pub fn area(&self) -> f64 {
        self.elements
            .iter()
            .map(|el| {
                let mut s = 0.0;
                for a in 0..4 {
                    let p = self.nodes[el[a]];
                    let q = self.nodes[el[(a + 1) % 4]];
                    s += p[0] * q[1] - q[0] * p[1];
                }
                0.5 * s
            })
            .sum()
    }

    /// Number of elements sharing each undirected edge.
    pub fn edge_multiplicity(&self) -> HashMap<(usize, usize), usize> {
        let mut map = HashMap::new();
        for el in &self.elements {
            for a in 0..4 {
                let (p, q) = (el[a], el[(a + 1) % 4]);
                *map.entry((p.min(q), p.max(q))).or_insert(0) += 1;
            }
        }
        map
    }

    /// Node closest to `point`, lowest index on ties.
    pub fn nearest_node(&self, point: [f64; 2]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, p) in self.nodes.iter().enumerate() {
            let d = (p[0] - point[0]).powi(2) + (p[1] - point[1]).powi(2);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }
}
