//! Thermal step functional with frozen coefficients, its residual and tangent.

use crate::assembly::quadrature::{deformation_gradient, interpolate, scalar_gradient};
use crate::assembly::{Discretization, DofMap, SkylineMatrix};
use crate::error::{Error, Result};
use crate::materials::MaterialModel;
use crate::mesh::BoundaryTag;
use crate::tensor::{lift_plane_strain, plane_block, Mat2, Mat3};

/// Quadrature-point data that stays fixed during one thermal solve.
#[derive(Debug, Clone, Copy)]
struct PointData {
    f_k: Mat3,
    /// `W^in(∇y_{k-1}, θ_{k-1})`.
    w_prev: f64,
    h_tau: f64,
    /// In-plane block of the pulled-back conductivity at `(∇y_{k-1}, θ_{k-1})`.
    conductivity: Mat2,
}

#[derive(Debug, Clone)]
pub struct ThermalContext<'a> {
    pub disc: &'a Discretization,
    pub model: &'a MaterialModel,
    pub tau: f64,
    /// Interval-averaged boundary temperature.
    pub theta_flat: f64,
    points: Vec<[PointData; 4]>,
    robin_edges: Vec<([usize; 2], f64)>,
}

/// Integrated quantities entering the discrete internal-energy balance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ThermalTotals {
    /// `∫ W^in(∇y_k, θ)`.
    pub internal_energy: f64,
    /// `∫ W^in(∇y_{k-1}, θ_{k-1})`.
    pub internal_energy_prev: f64,
    /// `∫ h_τ`.
    pub heat_source: f64,
    /// `κ ∮_Robin (θ - θ_♭)`.
    pub robin_flux: f64,
}

impl<'a> ThermalContext<'a> {
    pub fn new(
        disc: &'a Discretization,
        model: &'a MaterialModel,
        y_k: &[f64],
        y_prev: &[f64],
        theta_prev: &[f64],
        theta_flat: f64,
        tau: f64,
    ) -> Result<Self> {
        let points = disc.map_elements(|e| {
            let el = &disc.mesh.elements[e];
            let mut out = [PointData { f_k: Mat3::identity(), w_prev: 0.0, h_tau: 0.0, conductivity: Mat2::identity() }; 4];
            for (q, qp) in disc.quad[e].iter().enumerate() {
                let f_k = lift_plane_strain(&deformation_gradient(y_k, el, qp));
                let f_prev = lift_plane_strain(&deformation_gradient(y_prev, el, qp));
                let theta = interpolate(theta_prev, el, qp);
                let locate = |err: Error| match err {
                    Error::NonPositiveDeterminant { det, element: None } => Error::NonPositiveDeterminant { det, element: Some(e) },
                    other => other,
                };
                out[q] = PointData {
                    f_k,
                    w_prev: model.internal_energy(&f_prev, theta).map_err(locate)?,
                    h_tau: model.heat_source(&f_k, &f_prev, theta, tau).map_err(locate)?,
                    conductivity: plane_block(&model.conductivity_pullback(&f_prev, theta).map_err(locate)?),
                };
            }
            Ok(out)
        })?;
        let mesh = &disc.mesh;
        let robin_edges = if model.kappa > 0.0 {
            mesh.boundary_edges
                .iter()
                .filter(|e| e.heat == BoundaryTag::RobinHeat)
                .map(|e| {
                    let p = mesh.nodes[e.nodes[0]];
                    let q = mesh.nodes[e.nodes[1]];
                    (e.nodes, (q[0] - p[0]).hypot(q[1] - p[1]))
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(ThermalContext { disc, model, tau, theta_flat, points, robin_edges })
    }

    fn check_nonnegative(theta: &[f64]) -> Result<()> {
        match theta.iter().position(|&t| !(t >= 0.0)) {
            Some(node) => Err(Error::NegativeTemperatureInput { node, theta: theta[node] }),
            None => Ok(()),
        }
    }

    /// Two-point Gauss rule along an edge: `(shape value at node 0, weight)` pairs.
    fn edge_rule(len: f64) -> [(f64, f64); 2] {
        let g = 0.5 / 3.0_f64.sqrt();
        [(0.5 + g, 0.5 * len), (0.5 - g, 0.5 * len)]
    }

    /// Value of the thermal step functional.
    pub fn functional(&self, theta: &[f64]) -> Result<f64> {
        Self::check_nonnegative(theta)?;
        let m = self.model;
        let parts = self.disc.map_elements(|e| {
            let el = &self.disc.mesh.elements[e];
            let mut s = 0.0;
            for (qp, pd) in self.disc.quad[e].iter().zip(&self.points[e]) {
                let t = interpolate(theta, el, qp);
                let g = scalar_gradient(theta, el, qp);
                let k = pd.conductivity;
                let cond = g[0] * (k[(0, 0)] * g[0] + k[(0, 1)] * g[1]) + g[1] * (k[(1, 0)] * g[0] + k[(1, 1)] * g[1]);
                let phi = m.internal_energy_primitive(&pd.f_k, t)?;
                s += qp.jxw() * ((phi - pd.w_prev * t) / self.tau + 0.5 * cond - pd.h_tau * t);
            }
            Ok(s)
        })?;
        let mut total: f64 = parts.iter().sum();
        for (nodes, len) in &self.robin_edges {
            for (n0, w) in Self::edge_rule(*len) {
                let t = n0 * theta[nodes[0]] + (1.0 - n0) * theta[nodes[1]];
                total += 0.5 * m.kappa * w * (t - self.theta_flat).powi(2);
            }
        }
        Ok(total)
    }

    fn element_system(&self, theta: &[f64], e: usize, with_tangent: bool) -> Result<([f64; 4], [[f64; 4]; 4])> {
        let m = self.model;
        let el = &self.disc.mesh.elements[e];
        let mut r = [0.0; 4];
        let mut k = [[0.0; 4]; 4];
        for (qp, pd) in self.disc.quad[e].iter().zip(&self.points[e]) {
            let w = qp.jxw();
            let t = interpolate(theta, el, qp);
            let g = scalar_gradient(theta, el, qp);
            let kc = pd.conductivity;
            let flux = [kc[(0, 0)] * g[0] + kc[(0, 1)] * g[1], kc[(1, 0)] * g[0] + kc[(1, 1)] * g[1]];
            let source = (m.internal_energy(&pd.f_k, t)? - pd.w_prev) / self.tau - pd.h_tau;
            for a in 0..4 {
                let ga = qp.shape_gradients[a];
                r[a] += w * (source * qp.shape_values[a] + flux[0] * ga[0] + flux[1] * ga[1]);
            }
            if with_tangent {
                let cap = m.heat_capacity(&pd.f_k, t)? / self.tau;
                for a in 0..4 {
                    let ga = qp.shape_gradients[a];
                    for b in 0..4 {
                        let gb = qp.shape_gradients[b];
                        let kgb = [kc[(0, 0)] * gb[0] + kc[(0, 1)] * gb[1], kc[(1, 0)] * gb[0] + kc[(1, 1)] * gb[1]];
                        k[a][b] += w * (cap * qp.shape_values[a] * qp.shape_values[b] + ga[0] * kgb[0] + ga[1] * kgb[1]);
                    }
                }
            }
        }
        Ok((r, k))
    }

    fn add_robin(&self, theta: &[f64], r: &mut [f64], mut k: Option<(&DofMap, &mut SkylineMatrix)>) {
        let kappa = self.model.kappa;
        for (nodes, len) in &self.robin_edges {
            for (n0, w) in Self::edge_rule(*len) {
                let shape = [n0, 1.0 - n0];
                let t = shape[0] * theta[nodes[0]] + shape[1] * theta[nodes[1]];
                for a in 0..2 {
                    r[nodes[a]] += kappa * w * (t - self.theta_flat) * shape[a];
                }
                if let Some((dofs, mat)) = k.as_mut() {
                    for a in 0..2 {
                        for b in 0..=a {
                            if let (Some(i), Some(j)) = (dofs.free_index(nodes[a]), dofs.free_index(nodes[b])) {
                                mat.add(i, j, kappa * w * shape[a] * shape[b]);
                            }
                        }
                    }
                }
            }
        }
    }

    /// Weak residual tested with every nodal hat function.
    pub fn residual_full(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let parts = self.disc.map_elements(|e| self.element_system(theta, e, false))?;
        let mut r = vec![0.0; theta.len()];
        for (e, (re, _)) in parts.iter().enumerate() {
            for (a, &n) in self.disc.mesh.elements[e].iter().enumerate() {
                r[n] += re[a];
            }
        }
        self.add_robin(theta, &mut r, None);
        Ok(r)
    }

    /// Fills `matrix` with the tangent over free nodes; returns the full residual.
    pub fn assemble_tangent(&self, theta: &[f64], dofs: &DofMap, matrix: &mut SkylineMatrix) -> Result<Vec<f64>> {
        let parts = self.disc.map_elements(|e| self.element_system(theta, e, true))?;
        matrix.zero();
        let mut r = vec![0.0; theta.len()];
        for (e, (re, ke)) in parts.iter().enumerate() {
            let el = &self.disc.mesh.elements[e];
            for a in 0..4 {
                r[el[a]] += re[a];
                let Some(i) = dofs.free_index(el[a]) else { continue };
                for b in 0..=a {
                    let Some(j) = dofs.free_index(el[b]) else { continue };
                    let v = if a == b { ke[a][a] } else { 0.5 * (ke[a][b] + ke[b][a]) };
                    matrix.add(i, j, v);
                }
            }
        }
        self.add_robin(theta, &mut r, Some((dofs, matrix)));
        Ok(r)
    }

    /// Nodal magnitudes `∫ W^in(∇y_k, θ) N_a / τ` used to scale convergence tests.
    pub fn energy_scale(&self, theta: &[f64]) -> Result<f64> {
        let parts = self.disc.map_elements(|e| {
            let el = &self.disc.mesh.elements[e];
            let mut v = [0.0; 4];
            for (qp, pd) in self.disc.quad[e].iter().zip(&self.points[e]) {
                let w_in = self.model.internal_energy(&pd.f_k, interpolate(theta, el, qp))?;
                for a in 0..4 {
                    v[a] += qp.jxw() * w_in.abs() * qp.shape_values[a] / self.tau;
                }
            }
            Ok(v)
        })?;
        let mut nodal = vec![0.0; theta.len()];
        for (e, v) in parts.iter().enumerate() {
            for (a, &n) in self.disc.mesh.elements[e].iter().enumerate() {
                nodal[n] += v[a];
            }
        }
        Ok(nodal.into_iter().fold(0.0, f64::max))
    }

    pub fn totals(&self, theta: &[f64]) -> Result<ThermalTotals> {
        let parts = self.disc.map_elements(|e| {
            let el = &self.disc.mesh.elements[e];
            let mut t = ThermalTotals::default();
            for (qp, pd) in self.disc.quad[e].iter().zip(&self.points[e]) {
                let w = qp.jxw();
                t.internal_energy += w * self.model.internal_energy(&pd.f_k, interpolate(theta, el, qp))?;
                t.internal_energy_prev += w * pd.w_prev;
                t.heat_source += w * pd.h_tau;
            }
            Ok(t)
        })?;
        let mut out = ThermalTotals::default();
        for p in parts {
            out.internal_energy += p.internal_energy;
            out.internal_energy_prev += p.internal_energy_prev;
            out.heat_source += p.heat_source;
        }
        for (nodes, len) in &self.robin_edges {
            for (n0, w) in Self::edge_rule(*len) {
                let t = n0 * theta[nodes[0]] + (1.0 - n0) * theta[nodes[1]];
                out.robin_flux += self.model.kappa * w * (t - self.theta_flat);
            }
        }
        Ok(out)
    }

    /// Heat source `h_τ` at every quadrature point, element-major.
    pub fn heat_sources(&self) -> Vec<[f64; 4]> {
        self.points.iter().map(|p| p.map(|d| d.h_tau)).collect()
    }

    /// `W^in(∇y_{k-1}, θ_{k-1})` at every quadrature point, element-major.
    pub fn previous_internal_energy(&self) -> Vec<[f64; 4]> {
        self.points.iter().map(|p| p.map(|d| d.w_prev)).collect()
    }
}
