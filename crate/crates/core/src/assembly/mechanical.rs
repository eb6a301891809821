//! Incremental mechanical energy, its residual and its tangent.

use crate::assembly::quadrature::{deformation_gradient, interpolate, interpolate_vector};
use crate::assembly::{Discretization, DofMap, SkylineMatrix};
use crate::error::{Error, Result};
use crate::materials::MaterialModel;
use crate::mesh::BoundaryTag;
use crate::tensor::{lift_plane_strain, Mat2, Mat3};

/// Everything the mechanical step at time level `k` depends on.
#[derive(Debug, Clone, Copy)]
pub struct MechContext<'a> {
    pub disc: &'a Discretization,
    pub model: &'a MaterialModel,
    pub y_prev: &'a [f64],
    pub theta_prev: &'a [f64],
    pub tau: f64,
    /// Interval-averaged body force (uniform in space).
    pub body_force: [f64; 2],
    /// Interval-averaged dead traction on edges tagged `NeumannTraction`.
    pub traction: [f64; 2],
}

/// Contributions to the incremental energy.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MechEnergy {
    pub elastic: f64,
    /// `∫ a(θ)(W_A - W_M)`; zero for the neo-Hookean model.
    pub coupling: f64,
    /// `∫ C₁θ(1 - log θ)`, independent of the deformation.
    pub thermal_constant: f64,
    /// `𝒟 = ½ ∫ D²`.
    pub dissipation: f64,
    /// Work of body forces and tractions.
    pub external: f64,
}

impl MechEnergy {
    /// Deformation-dependent part, the quantity the Newton line search decreases.
    pub fn variational(&self, tau: f64) -> f64 {
        self.elastic + self.coupling + self.dissipation / tau - self.external
    }

    pub fn total(&self, tau: f64) -> f64 {
        self.variational(tau) + self.thermal_constant
    }
}

fn locate(element: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonPositiveDeterminant { det, element: None } => Error::NonPositiveDeterminant { det, element: Some(element) },
        other => other,
    }
}

fn lifted_direction(j: usize, g: [f64; 2]) -> Mat3 {
    let mut h = Mat3::zeros();
    h[(j, 0)] = g[0];
    h[(j, 1)] = g[1];
    h
}

impl<'a> MechContext<'a> {
    fn lifted_gradient(&self, y: &[f64], e: usize, q: usize) -> Result<Mat3> {
        let f2 = deformation_gradient(y, &self.disc.mesh.elements[e], &self.disc.quad[e][q]);
        let det = f2.determinant();
        if !(det > 0.0) {
            return Err(Error::NonPositiveDeterminant { det, element: Some(e) });
        }
        Ok(lift_plane_strain(&f2))
    }

    fn element_energy(&self, y: &[f64], e: usize) -> Result<MechEnergy> {
        let nodes = &self.disc.mesh.elements[e];
        let m = self.model;
        let mut out = MechEnergy::default();
        for (q, qp) in self.disc.quad[e].iter().enumerate() {
            let w = qp.jxw();
            let f = self.lifted_gradient(y, e, q)?;
            let f_prev = self.lifted_gradient(self.y_prev, e, q)?;
            let theta = interpolate(self.theta_prev, nodes, qp);
            let yq = interpolate_vector(y, nodes, qp);
            let loc = locate(e);
            out.elastic += w * m.elastic_energy(&f).map_err(&loc)?;
            out.coupling += w * m.coupling_strain_energy(&f, theta).map_err(&loc)?;
            out.thermal_constant += w * m.coupling_thermal_energy(theta);
            out.dissipation += 0.5 * w * m.dissipation_density(&f_prev, &f, theta).map_err(&loc)?;
            out.external += w * (self.body_force[0] * yq[0] + self.body_force[1] * yq[1]);
        }
        Ok(out)
    }

    /// First Piola-type stress of the step energy at one quadrature point.
    fn point_stress(&self, f: &Mat3, f_prev: &Mat3, theta: f64) -> Result<Mat3> {
        let m = self.model;
        Ok(m.elastic_stress(f)? + m.coupling_stress(f, theta)? + m.dissipation_stress(f_prev, f)? / self.tau)
    }

    fn point_tangent(&self, f: &Mat3, f_prev: &Mat3, theta: f64, h: &Mat3) -> Result<Mat3> {
        let m = self.model;
        Ok(m.elastic_hessian_apply(f, h)?
            + m.coupling_hessian_apply(f, theta, h)?
            + m.dissipation_hessian_apply(f_prev, f, h)? / self.tau)
    }

    /// Element internal-force vector, ordered `(node a, component i) → 2a + i`.
    fn element_residual(&self, y: &[f64], e: usize, with_tangent: bool) -> Result<([f64; 8], Option<[[f64; 8]; 8]>)> {
        let nodes = &self.disc.mesh.elements[e];
        let mut r = [0.0; 8];
        let mut k = [[0.0; 8]; 8];
        for (q, qp) in self.disc.quad[e].iter().enumerate() {
            let w = qp.jxw();
            let f = self.lifted_gradient(y, e, q)?;
            let f_prev = self.lifted_gradient(self.y_prev, e, q)?;
            let theta = interpolate(self.theta_prev, nodes, qp);
            let loc = locate(e);
            let p = self.point_stress(&f, &f_prev, theta).map_err(&loc)?;
            for a in 0..4 {
                let g = qp.shape_gradients[a];
                for i in 0..2 {
                    r[2 * a + i] += w * (p[(i, 0)] * g[0] + p[(i, 1)] * g[1] - self.body_force[i] * qp.shape_values[a]);
                }
            }
            if with_tangent {
                for b in 0..4 {
                    for j in 0..2 {
                        let h = lifted_direction(j, qp.shape_gradients[b]);
                        let dp = self.point_tangent(&f, &f_prev, theta, &h).map_err(&loc)?;
                        for a in 0..4 {
                            let g = qp.shape_gradients[a];
                            for i in 0..2 {
                                k[2 * a + i][2 * b + j] += w * (dp[(i, 0)] * g[0] + dp[(i, 1)] * g[1]);
                            }
                        }
                    }
                }
            }
        }
        if with_tangent {
            for i in 0..8 {
                for j in 0..i {
                    let s = 0.5 * (k[i][j] + k[j][i]);
                    k[i][j] = s;
                    k[j][i] = s;
                }
            }
            Ok((r, Some(k)))
        } else {
            Ok((r, None))
        }
    }

    fn traction_edges(&self) -> impl Iterator<Item = ([usize; 2], f64)> + '_ {
        let mesh = &self.disc.mesh;
        mesh.boundary_edges.iter().filter(|e| e.mech == BoundaryTag::NeumannTraction).map(move |e| {
            let p = mesh.nodes[e.nodes[0]];
            let q = mesh.nodes[e.nodes[1]];
            (e.nodes, (q[0] - p[0]).hypot(q[1] - p[1]))
        })
    }

    /// Incremental energy split into its parts.
    pub fn energy(&self, y: &[f64]) -> Result<MechEnergy> {
        let parts = self.disc.map_elements(|e| self.element_energy(y, e))?;
        let mut out = MechEnergy::default();
        for p in parts {
            out.elastic += p.elastic;
            out.coupling += p.coupling;
            out.thermal_constant += p.thermal_constant;
            out.dissipation += p.dissipation;
            out.external += p.external;
        }
        for (nodes, len) in self.traction_edges() {
            for n in nodes {
                out.external += 0.5 * len * (self.traction[0] * y[2 * n] + self.traction[1] * y[2 * n + 1]);
            }
        }
        Ok(out)
    }

    /// `𝒟(y_{k-1}, y, θ_{k-1})`.
    pub fn dissipation(&self, y: &[f64]) -> Result<f64> {
        Ok(self.energy(y)?.dissipation)
    }

    fn subtract_tractions(&self, r: &mut [f64]) {
        for (nodes, len) in self.traction_edges() {
            for n in nodes {
                r[2 * n] -= 0.5 * len * self.traction[0];
                r[2 * n + 1] -= 0.5 * len * self.traction[1];
            }
        }
    }

    /// Gradient of [`Self::energy`] with respect to every nodal unknown.
    pub fn residual_full(&self, y: &[f64]) -> Result<Vec<f64>> {
        let parts = self.disc.map_elements(|e| self.element_residual(y, e, false))?;
        let mut r = vec![0.0; y.len()];
        for (e, (re, _)) in parts.iter().enumerate() {
            for (a, &n) in self.disc.mesh.elements[e].iter().enumerate() {
                r[2 * n] += re[2 * a];
                r[2 * n + 1] += re[2 * a + 1];
            }
        }
        self.subtract_tractions(&mut r);
        Ok(r)
    }

    /// Residual restricted to free unknowns.
    pub fn residual(&self, y: &[f64], dofs: &DofMap) -> Result<Vec<f64>> {
        Ok(dofs.restrict(&self.residual_full(y)?))
    }

    /// External load vector (body forces and tractions) over every unknown.
    pub fn load_vector(&self) -> Vec<f64> {
        let n = self.disc.num_nodes();
        let mut l = vec![0.0; 2 * n];
        for (e, qps) in self.disc.quad.iter().enumerate() {
            for qp in qps {
                for (a, &node) in self.disc.mesh.elements[e].iter().enumerate() {
                    for i in 0..2 {
                        l[2 * node + i] += qp.jxw() * qp.shape_values[a] * self.body_force[i];
                    }
                }
            }
        }
        let mut neg = vec![0.0; 2 * n];
        self.subtract_tractions(&mut neg);
        for (li, ni) in l.iter_mut().zip(neg) {
            *li -= ni;
        }
        l
    }

    /// Fills `matrix` (pattern from [`DofMap::pattern`] with two unknowns per node)
    /// with the tangent over free unknowns and returns the full residual.
    pub fn assemble_tangent(&self, y: &[f64], dofs: &DofMap, matrix: &mut SkylineMatrix) -> Result<Vec<f64>> {
        let parts = self.disc.map_elements(|e| self.element_residual(y, e, true))?;
        matrix.zero();
        let mut r = vec![0.0; y.len()];
        for (e, (re, ke)) in parts.iter().enumerate() {
            let ke = ke.as_ref().expect("tangent requested");
            let el = &self.disc.mesh.elements[e];
            let local: [usize; 8] = std::array::from_fn(|k| 2 * el[k / 2] + k % 2);
            for i in 0..8 {
                r[local[i]] += re[i];
                let Some(fi) = dofs.free_index(local[i]) else { continue };
                for j in 0..=i {
                    let Some(fj) = dofs.free_index(local[j]) else { continue };
                    if i == j {
                        matrix.add(fi, fi, ke[i][i]);
                    } else {
                        // `add` updates the symmetric pair, so each off-diagonal block is added once
                        matrix.add(fi, fj, ke[i][j]);
                    }
                }
            }
        }
        self.subtract_tractions(&mut r);
        Ok(r)
    }

    /// Smallest `det ∇y` over all quadrature points.
    pub fn min_det(&self, y: &[f64]) -> f64 {
        let per = self.disc.map_elements(|e| {
            let el = &self.disc.mesh.elements[e];
            Ok(self.disc.quad[e].iter().map(|qp| deformation_gradient(y, el, qp).determinant()).fold(f64::INFINITY, f64::min))
        });
        per.map(|v| v.into_iter().fold(f64::INFINITY, f64::min)).unwrap_or(f64::NEG_INFINITY)
    }

    /// Deformation gradients at all quadrature points, element-major.
    pub fn gradients(&self, y: &[f64]) -> Vec<[Mat2; 4]> {
        gradients(self.disc, y)
    }
}

pub fn gradients(disc: &Discretization, y: &[f64]) -> Vec<[Mat2; 4]> {
    disc.mesh
        .elements
        .iter()
        .zip(&disc.quad)
        .map(|(el, qps)| std::array::from_fn(|q| deformation_gradient(y, el, &qps[q])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{DissipationVariant, HeatSourceVariant};
    use crate::mesh::Mesh;
    use crate::tensor::Rotation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity(mesh: &Mesh) -> Vec<f64> {
        mesh.nodes.iter().flat_map(|p| *p).collect()
    }

    fn perturbed(mesh: &Mesh, amp: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        mesh.nodes.iter().flat_map(|p| [p[0] * 1.05 + amp * rng.gen_range(-1.0..1.0), p[1] * 0.97 + 0.02 * p[0] + amp * rng.gen_range(-1.0..1.0)]).collect()
    }

    fn setup(model: MaterialModel) -> (Discretization, MaterialModel) {
        (Discretization::new(Mesh::gen_rectangle(1.0, 0.5, 2, 2).unwrap()).unwrap(), model)
    }

    #[test]
    fn energy_at_previous_state_has_no_dissipation() {
        let (disc, model) = setup(MaterialModel::neo_hookean(1.0, 1.0, 1.0, 1.0, 1.0));
        let y0 = identity(&disc.mesh);
        let theta = vec![293.0; disc.num_nodes()];
        let ctx = MechContext { disc: &disc, model: &model, y_prev: &y0, theta_prev: &theta, tau: 0.1, body_force: [0.0; 2], traction: [0.0; 2] };
        let e = ctx.energy(&y0).unwrap();
        assert_eq!(e.dissipation, 0.0);
        assert!(e.elastic.abs() < 1e-28);
        let expected = 293.0 * (1.0 - 293.0_f64.ln()) * disc.area;
        assert!((e.total(0.1) - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn rigid_rotation_keeps_elastic_energy_with_v1() {
        let (disc, model) = setup(MaterialModel::neo_hookean(1.0, 1.0, 1.0, 1.0, 1.0));
        let y_prev = perturbed(&disc.mesh, 0.01, 1);
        let q = *Rotation::<2>::planar(0.3).matrix();
        let y_rot: Vec<f64> = y_prev.chunks(2).flat_map(|p| [q[(0, 0)] * p[0] + q[(0, 1)] * p[1], q[(1, 0)] * p[0] + q[(1, 1)] * p[1]]).collect();
        let theta = vec![1.0; disc.num_nodes()];
        let ctx = MechContext { disc: &disc, model: &model, y_prev: &y_prev, theta_prev: &theta, tau: 0.1, body_force: [0.0; 2], traction: [0.0; 2] };
        let before = ctx.energy(&y_prev).unwrap();
        let after = ctx.energy(&y_rot).unwrap();
        assert!((before.elastic - after.elastic).abs() < 1e-13);
        assert!(after.dissipation < 1e-25);
    }

    #[test]
    fn residual_matches_energy_differences() {
        for (model, tau) in [
            (MaterialModel::neo_hookean(1.0, 0.7, 1.0, 0.5, 1.0), 0.1),
            (MaterialModel::neo_hookean(1.0, 0.7, 1.0, 0.5, 1.0).with_variants(DissipationVariant::V2, HeatSourceVariant::Vh2), 0.1),
            (MaterialModel::sma(1.0, 1.0, 1.0, 0.05, 0.01, 1.0), 0.5),
        ] {
            let (disc, model) = setup(model);
            let y_prev = perturbed(&disc.mesh, 0.01, 2);
            let y = perturbed(&disc.mesh, 0.02, 3);
            let theta: Vec<f64> = (0..disc.num_nodes()).map(|i| 290.0 + i as f64).collect();
            let ctx = MechContext { disc: &disc, model: &model, y_prev: &y_prev, theta_prev: &theta, tau, body_force: [0.3, -0.2], traction: [0.1, 0.4] };
            let r = ctx.residual_full(&y).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..20 {
                let dir: Vec<f64> = (0..y.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let h = 1e-6;
                let plus: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
                let minus: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a - h * d).collect();
                let fd = (ctx.energy(&plus).unwrap().variational(tau) - ctx.energy(&minus).unwrap().variational(tau)) / (2.0 * h);
                let an: f64 = r.iter().zip(&dir).map(|(a, b)| a * b).sum();
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{fd} vs {an}");
            }
        }
    }

    #[test]
    fn tangent_matches_residual_differences_and_is_symmetric() {
        for model in [
            MaterialModel::neo_hookean(1.0, 0.7, 1.0, 0.5, 1.0),
            MaterialModel::neo_hookean(1.0, 0.7, 1.0, 0.5, 1.0).with_variants(DissipationVariant::V2, HeatSourceVariant::Vh2),
            MaterialModel::sma(1.0, 1.0, 1.0, 0.05, 0.01, 1.0),
        ] {
            let (disc, model) = setup(model);
            let y_prev = perturbed(&disc.mesh, 0.01, 4);
            let y = perturbed(&disc.mesh, 0.02, 5);
            let theta = vec![300.0; disc.num_nodes()];
            let ctx = MechContext { disc: &disc, model: &model, y_prev: &y_prev, theta_prev: &theta, tau: 0.2, body_force: [0.0; 2], traction: [0.0; 2] };
            let dofs = DofMap::new(y.len(), &[0, 1]);
            let mut k = dofs.pattern(&disc.mesh, 2);
            ctx.assemble_tangent(&y, &dofs, &mut k).unwrap();
            let n = dofs.num_free();
            for i in 0..n {
                let mut dir = vec![0.0; n];
                dir[i] = 1.0;
                let col = k.matvec(&dir);
                let h = 1e-6;
                let mut plus = y.clone();
                dofs.axpy_free(&mut plus, h, &dir);
                let mut minus = y.clone();
                dofs.axpy_free(&mut minus, -h, &dir);
                let rp = ctx.residual(&plus, &dofs).unwrap();
                let rm = ctx.residual(&minus, &dofs).unwrap();
                let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                let err: f64 = fd.iter().zip(&col).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let norm: f64 = col.iter().map(|a| a * a).sum::<f64>().sqrt();
                assert!(err <= 1e-5 * norm, "{err} vs {norm}");
                for j in 0..n {
                    if k.in_profile(i, j) {
                        assert_eq!(k.get(i, j), k.get(j, i));
                    }
                }
            }
        }
    }

    #[test]
    fn tangent_sparsity_follows_element_adjacency() {
        let disc = Discretization::new(Mesh::gen_rectangle(1.0, 1.0, 3, 1).unwrap()).unwrap();
        let model = MaterialModel::neo_hookean(1.0, 1.0, 1.0, 1.0, 1.0);
        let y = perturbed(&disc.mesh, 0.01, 6);
        let theta = vec![1.0; disc.num_nodes()];
        let ctx = MechContext { disc: &disc, model: &model, y_prev: &y, theta_prev: &theta, tau: 1.0, body_force: [0.0; 2], traction: [0.0; 2] };
        let dofs = DofMap::new(y.len(), &[]);
        let mut k = dofs.pattern(&disc.mesh, 2);
        ctx.assemble_tangent(&y, &dofs, &mut k).unwrap();
        // nodes 0 and 7 share no element
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(k.get(i, 14 + j), 0.0);
            }
        }
        assert!(k.get(0, 3) != 0.0);
    }

    #[test]
    fn affine_patch_has_zero_interior_residual() {
        let disc = Discretization::new(Mesh::gen_rectangle(1.0, 1.0, 3, 3).unwrap()).unwrap();
        let model = MaterialModel::neo_hookean(1.0, 1.0, 1.0, 1.0, 1.0);
        let a = Mat2::new(1.1, 0.2, -0.1, 0.95);
        let y: Vec<f64> = disc.mesh.nodes.iter().flat_map(|p| [a[(0, 0)] * p[0] + a[(0, 1)] * p[1], a[(1, 0)] * p[0] + a[(1, 1)] * p[1]]).collect();
        let theta = vec![1.0; disc.num_nodes()];
        let ctx = MechContext { disc: &disc, model: &model, y_prev: &y, theta_prev: &theta, tau: 1.0, body_force: [0.0; 2], traction: [0.0; 2] };
        let r = ctx.residual_full(&y).unwrap();
        for (n, p) in disc.mesh.nodes.iter().enumerate() {
            let interior = p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0;
            if interior {
                assert!(r[2 * n].abs() < 1e-13 && r[2 * n + 1].abs() < 1e-13);
            }
        }
    }

    #[test]
    fn inverted_trial_reports_element() {
        let (disc, model) = setup(MaterialModel::neo_hookean(1.0, 1.0, 1.0, 1.0, 1.0));
        let y0 = identity(&disc.mesh);
        let mut y = y0.clone();
        y[2 * 4] += 0.8; // push the centre node across its neighbours
        let theta = vec![1.0; disc.num_nodes()];
        let ctx = MechContext { disc: &disc, model: &model, y_prev: &y0, theta_prev: &theta, tau: 1.0, body_force: [0.0; 2], traction: [0.0; 2] };
        assert!(matches!(ctx.energy(&y), Err(Error::NonPositiveDeterminant { element: Some(_), .. })));
        assert!(ctx.min_det(&y) <= 0.0);
    }
}
