//! Bilinear shape functions and 2×2 Gauss quadrature on quadrilaterals.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::tensor::Mat2;

const REF_CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraturePoint {
    pub ref_coords: [f64; 2],
    /// Reference weight; the four weights sum to the reference area 4.
    pub weight: f64,
    /// Jacobian determinant of the element map at this point.
    pub det_j: f64,
    pub shape_values: [f64; 4],
    /// Physical gradients of the four shape functions.
    pub shape_gradients: [[f64; 2]; 4],
}

impl QuadraturePoint {
    /// Physical integration weight `w · det J`.
    pub fn jxw(&self) -> f64 {
        self.weight * self.det_j
    }
}

pub fn shape_values(xi: f64, eta: f64) -> [f64; 4] {
    std::array::from_fn(|a| 0.25 * (1.0 + REF_CORNERS[a][0] * xi) * (1.0 + REF_CORNERS[a][1] * eta))
}

pub fn shape_ref_gradients(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    std::array::from_fn(|a| {
        let [xa, ea] = REF_CORNERS[a];
        [0.25 * xa * (1.0 + ea * eta), 0.25 * ea * (1.0 + xa * xi)]
    })
}

/// The four Gauss points of `element` with physical shape gradients.
pub fn gauss_2x2(mesh: &Mesh, element: usize) -> Result<[QuadraturePoint; 4]> {
    let g = 1.0 / 3.0_f64.sqrt();
    let pts = [[-g, -g], [g, -g], [g, g], [-g, g]];
    let coords = mesh.elements[element].map(|n| mesh.nodes[n]);
    let mut out = [QuadraturePoint {
        ref_coords: [0.0; 2],
        weight: 1.0,
        det_j: 0.0,
        shape_values: [0.0; 4],
        shape_gradients: [[0.0; 2]; 4],
    }; 4];
    for (q, &[xi, eta]) in pts.iter().enumerate() {
        let dn = shape_ref_gradients(xi, eta);
        let mut jac = Mat2::zeros();
        for a in 0..4 {
            for i in 0..2 {
                for j in 0..2 {
                    jac[(i, j)] += coords[a][i] * dn[a][j];
                }
            }
        }
        let det_j = jac.determinant();
        if !(det_j > 0.0) {
            return Err(Error::DegenerateElement { element, det_j });
        }
        let jinv = jac.try_inverse().ok_or(Error::DegenerateElement { element, det_j })?;
        let grads = std::array::from_fn(|a| {
            [dn[a][0] * jinv[(0, 0)] + dn[a][1] * jinv[(1, 0)], dn[a][0] * jinv[(0, 1)] + dn[a][1] * jinv[(1, 1)]]
        });
        out[q] = QuadraturePoint {
            ref_coords: [xi, eta],
            weight: 1.0,
            det_j,
            shape_values: shape_values(xi, eta),
            shape_gradients: grads,
        };
    }
    Ok(out)
}

/// `∇y = Σ_a y_a ⊗ ∇N_a` from a global vector with two dofs per node.
pub fn deformation_gradient(y: &[f64], nodes: &[usize; 4], qp: &QuadraturePoint) -> Mat2 {
    let mut f = Mat2::zeros();
    for a in 0..4 {
        let n = nodes[a];
        let g = qp.shape_gradients[a];
        for i in 0..2 {
            f[(i, 0)] += y[2 * n + i] * g[0];
            f[(i, 1)] += y[2 * n + i] * g[1];
        }
    }
    f
}

/// Value of a nodal scalar field at a quadrature point.
pub fn interpolate(values: &[f64], nodes: &[usize; 4], qp: &QuadraturePoint) -> f64 {
    (0..4).map(|a| values[nodes[a]] * qp.shape_values[a]).sum()
}

/// Value of a two-component nodal field at a quadrature point.
pub fn interpolate_vector(y: &[f64], nodes: &[usize; 4], qp: &QuadraturePoint) -> [f64; 2] {
    let mut v = [0.0; 2];
    for a in 0..4 {
        for i in 0..2 {
            v[i] += y[2 * nodes[a] + i] * qp.shape_values[a];
        }
    }
    v
}

pub fn scalar_gradient(values: &[f64], nodes: &[usize; 4], qp: &QuadraturePoint) -> [f64; 2] {
    let mut g = [0.0; 2];
    for a in 0..4 {
        g[0] += values[nodes[a]] * qp.shape_gradients[a][0];
        g[1] += values[nodes[a]] * qp.shape_gradients[a][1];
    }
    g
}
