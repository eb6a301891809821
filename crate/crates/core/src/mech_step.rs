//! Damped Newton minimization of the mechanical incremental energy.

use serde::{Deserialize, Serialize};

use crate::assembly::{max_abs, DofMap, MechContext};
use crate::error::{Error, Result};
use crate::tensor::Mat2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MechSolveConfig {
    /// Relative residual tolerance against the load and initial residual scale.
    pub tol_residual: f64,
    pub max_newton: usize,
    pub max_backtrack: usize,
    pub backtrack_factor: f64,
    /// Fixed diagonal shift; `None` selects the adaptive multiply-and-retry shift.
    pub hessian_regularization: Option<f64>,
}

impl Default for MechSolveConfig {
    fn default() -> Self {
        MechSolveConfig {
            tol_residual: 1e-8,
            max_newton: 50,
            max_backtrack: 40,
            backtrack_factor: 0.5,
            hessian_regularization: None,
        }
    }
}

impl MechSolveConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.tol_residual > 0.0) {
            out.push("solver.mech.tol_residual must be positive".into());
        }
        if self.max_newton == 0 {
            out.push("solver.mech.max_newton must be positive".into());
        }
        if self.max_backtrack == 0 {
            out.push("solver.mech.max_backtrack must be positive".into());
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            out.push("solver.mech.backtrack_factor must lie in (0, 1)".into());
        }
        if let Some(s) = self.hessian_regularization {
            if !(s >= 0.0) {
                out.push("solver.mech.hessian_regularization must be non-negative".into());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MechReport {
    pub newton_iters: usize,
    pub final_residual: f64,
    /// Incremental energy at the initial guess.
    pub energy_before: f64,
    pub energy_after: f64,
    /// `𝒟(y_{k-1}, y_k, θ_{k-1})`.
    pub dissipation: f64,
    pub energy_decrease_ok: bool,
    /// Number of factorizations that needed a diagonal shift.
    pub shifted_factorizations: usize,
}

/// Planar affine map `x ↦ A x + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub a: Mat2,
    pub b: [f64; 2],
}

impl AffineMap {
    pub fn identity() -> Self {
        AffineMap { a: Mat2::identity(), b: [0.0; 2] }
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.a[(0, 0)] * x[0] + self.a[(0, 1)] * x[1] + self.b[0],
            self.a[(1, 0)] * x[0] + self.a[(1, 1)] * x[1] + self.b[1],
        ]
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        let b = self.apply(other.b);
        AffineMap { a: self.a * other.a, b }
    }

    pub fn inverse(&self) -> Result<AffineMap> {
        let det = self.a.determinant();
        let inv = self.a.try_inverse().filter(|_| det.abs() > 1e-300).ok_or(Error::NonInvertible { det })?;
        let b = inv * nalgebra::Vector2::new(self.b[0], self.b[1]);
        Ok(AffineMap { a: inv, b: [-b[0], -b[1]] })
    }

    /// Applies the map to every node of a two-dof-per-node vector.
    pub fn apply_field(&self, y: &[f64]) -> Vec<f64> {
        y.chunks_exact(2).flat_map(|p| self.apply([p[0], p[1]])).collect()
    }
}

/// Competitor `(h_k ∘ h_{k-1}⁻¹)(y_{k-1})` with exact Dirichlet values.
///
/// `update` is `h_k ∘ h_{k-1}⁻¹`; `dirichlet` lists values for `dofs.fixed()` in order.
/// If the pushed field folds an element, the free part is blended back toward
/// `y_{k-1}` until every quadrature point has positive determinant.
pub fn feasible_init(
    ctx: &MechContext,
    y_prev: &[f64],
    update: &AffineMap,
    dofs: &DofMap,
    dirichlet: &[f64],
) -> Result<Vec<f64>> {
    let pushed = update.apply_field(y_prev);
    let with_bc = |free_part: &[f64]| {
        let mut y = free_part.to_vec();
        for (&d, &v) in dofs.fixed().iter().zip(dirichlet) {
            y[d] = v;
        }
        y
    };
    let candidate = with_bc(&pushed);
    if ctx.min_det(&candidate) > 0.0 {
        return Ok(candidate);
    }
    let mut s = 0.5;
    while s > 1e-6 {
        let blend: Vec<f64> = y_prev.iter().zip(&pushed).map(|(p, q)| p + s * (q - p)).collect();
        let candidate = with_bc(&blend);
        if ctx.min_det(&candidate) > 0.0 {
            return Ok(candidate);
        }
        s *= 0.5;
    }
    let candidate = with_bc(y_prev);
    if ctx.min_det(&candidate) > 0.0 {
        return Ok(candidate);
    }
    Err(Error::InfeasibleInit)
}

/// Newton with Armijo backtracking and a determinant guard, started at `y_init`.
///
/// The returned iterate is a local minimizer; `energy_decrease_ok` records that it
/// does not exceed the energy of the starting competitor.
pub fn solve_mech_step(ctx: &MechContext, dofs: &DofMap, y_init: Vec<f64>, cfg: &MechSolveConfig) -> Result<(Vec<f64>, MechReport)> {
    let tau = ctx.tau;
    let model = ctx.model;
    let mesh = &ctx.disc.mesh;
    let mut y = y_init;
    let energy0 = ctx.energy(&y)?;
    let mut energy = energy0.variational(tau);
    let mut matrix = dofs.pattern(mesh, 2);
    let loads = dofs.restrict(&ctx.load_vector());
    let mut r = dofs.restrict(&ctx.assemble_tangent(&y, dofs, &mut matrix)?);
    let r0 = max_abs(&r);
    let h = (ctx.disc.area / mesh.num_elements().max(1) as f64).sqrt();
    let stiffness = model.mu + model.lambda + model.nu_visc / tau;
    let floor = 1e-13 * stiffness * h;
    let target = (cfg.tol_residual * (max_abs(&loads) + r0)).max(floor);
    let mut report = MechReport { energy_before: energy0.total(tau), ..Default::default() };
    let mut iters = 0;

    while max_abs(&r) > target {
        if iters >= cfg.max_newton {
            return Err(Error::MaxIterations { iterations: iters, residual: max_abs(&r), last_iterate: Box::new(y) });
        }
        let (chol, shifted) = factor_with_shift(&mut matrix, cfg.hessian_regularization)?;
        if shifted {
            report.shifted_factorizations += 1;
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = chol.solve(&neg);
        let slope: f64 = r.iter().zip(&step).map(|(a, b)| a * b).sum();

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..cfg.max_backtrack {
            let mut trial = y.clone();
            dofs.axpy_free(&mut trial, alpha, &step);
            if ctx.min_det(&trial) > 0.0 {
                let parts = ctx.energy(&trial)?;
                let e_trial = parts.variational(tau);
                let noise = 1e-13
                    * (parts.elastic.abs() + parts.coupling.abs() + parts.dissipation.abs() / tau + parts.external.abs() + energy.abs());
                if e_trial <= energy + 1e-4 * alpha * slope {
                    accepted = Some((trial, e_trial));
                    break;
                }
                if e_trial <= energy + noise {
                    let r_trial = ctx.residual(&trial, dofs)?;
                    if max_abs(&r_trial) < max_abs(&r) {
                        accepted = Some((trial, e_trial));
                        break;
                    }
                }
            }
            alpha *= cfg.backtrack_factor;
        }
        let Some((trial, e_trial)) = accepted else {
            return Err(Error::LineSearchFailed { iterations: iters, residual: max_abs(&r), last_iterate: Box::new(y) });
        };
        y = trial;
        energy = e_trial;
        iters += 1;
        r = dofs.restrict(&ctx.assemble_tangent(&y, dofs, &mut matrix)?);
    }

    let final_parts = ctx.energy(&y)?;
    report.newton_iters = iters;
    report.final_residual = max_abs(&r);
    report.energy_after = final_parts.total(tau);
    report.dissipation = final_parts.dissipation;
    report.energy_decrease_ok = final_parts.variational(tau) <= energy0.variational(tau) + 1e-12 * (1.0 + energy0.variational(tau).abs());
    Ok((y, report))
}

/// Cholesky factorization, shifting the diagonal by growing multiples of its
/// largest entry until the matrix is positive definite.
fn factor_with_shift(
    matrix: &mut crate::assembly::SkylineMatrix,
    fixed: Option<f64>,
) -> Result<(crate::assembly::SkylineCholesky, bool)> {
    if let Some(s) = fixed.filter(|&s| s > 0.0) {
        matrix.add_to_diagonal(s);
    }
    match matrix.cholesky() {
        Ok(c) => return Ok((c, fixed.is_some_and(|s| s > 0.0))),
        Err(Error::NotPositiveDefinite { .. }) => {}
        Err(e) => return Err(e),
    }
    let scale = matrix.diagonal().iter().fold(0.0_f64, |m, d| m.max(d.abs())).max(f64::MIN_POSITIVE);
    let mut applied = 0.0;
    let mut shift = 1e-10 * scale;
    let mut last = None;
    for _ in 0..24 {
        matrix.add_to_diagonal(shift - applied);
        applied = shift;
        match matrix.cholesky() {
            Ok(c) => return Ok((c, true)),
            Err(e @ Error::NotPositiveDefinite { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
        shift *= 10.0;
    }
    Err(last.unwrap_or(Error::NotPositiveDefinite { row: 0, pivot: f64::NAN }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Discretization;
    use crate::materials::MaterialModel;
    use crate::mesh::{BoundaryTag, Mesh};
    use crate::tensor::Rotation;

    fn clamped_left(disc: &Discretization) -> DofMap {
        let fixed: Vec<usize> = disc.mesh.boundary_nodes(BoundaryTag::DirichletMech).unwrap().iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect();
        DofMap::new(2 * disc.num_nodes(), &fixed)
    }

    #[test]
    fn stationary_start_needs_no_iterations() {
        let disc = Discretization::new(Mesh::gen_rectangle(1.0, 0.5, 4, 2).unwrap()).unwrap();
        let model = MaterialModel::neo_hookean(1.0, 1.0, 1.0, 1.0, 1.0);
        let y0: Vec<f64> = disc.mesh.nodes.iter().flat_map(|p| *p).collect();
        let theta = vec![293.0; disc.num_nodes()];
        let ctx = MechContext { disc: &disc, model: &model, y_prev: &y0, theta_prev: &theta, tau: 0.1, body_force: [0.0; 2], traction: [0.0; 2] };
        let dofs = clamped_left(&disc);
        let fixed_vals: Vec<f64> = dofs.fixed().iter().map(|&d| y0[d]).collect();
        let init = feasible_init(&ctx, &y0, &AffineMap::identity(), &dofs, &fixed_vals).unwrap();
        assert_eq!(init, y0);
        let (y, rep) = solve_mech_step(&ctx, &dofs, init, &MechSolveConfig::default()).unwrap();
        assert_eq!(y, y0);
        assert!(rep.newton_iters <= 1);
        assert_eq!(rep.dissipation, 0.0);
        assert!(rep.energy_decrease_ok);
    }

    #[test]
    fn traction_step_decreases_energy_and_converges() {
        let disc = Discretization::new(Mesh::gen_rectangle(1.0, 0.25, 4, 1).unwrap()).unwrap();
        let model = MaterialModel::neo_hookean(1.0, 1.0, 1.0, 1.0, 1.0);
        let y0: Vec<f64> = disc.mesh.nodes.iter().flat_map(|p| *p).collect();
        let theta = vec![293.0; disc.num_nodes()];
        let ctx = MechContext { disc: &disc, model: &model, y_prev: &y0, theta_prev: &theta, tau: 0.5, body_force: [0.0; 2], traction: [0.05, 0.0] };
        let dofs = clamped_left(&disc);
        let fixed_vals: Vec<f64> = dofs.fixed().iter().map(|&d| y0[d]).collect();
        let init = feasible_init(&ctx, &y0, &AffineMap::identity(), &dofs, &fixed_vals).unwrap();
        let (y, rep) = solve_mech_step(&ctx, &dofs, init, &MechSolveConfig::default()).unwrap();
        assert!(rep.newton_iters > 0);
        assert!(rep.energy_after < rep.energy_before);
        assert!(rep.dissipation > 0.0);
        assert!(ctx.min_det(&y) > 0.0);
        let r = ctx.residual(&y, &dofs).unwrap();
        assert!(max_abs(&r) <= 1e-8 * (max_abs(&dofs.restrict(&ctx.load_vector())) + 0.05));
        // the right edge moved in the load direction
        let right = disc.mesh.side_nodes(crate::mesh::Side::Right);
        assert!(right.iter().all(|&n| y[2 * n] > 1.0));
    }

    #[test]
    fn rigid_update_is_pushed_forward_exactly() {
        let disc = Discretization::new(Mesh::gen_annulus(1.0, 2.0, 2, 16).unwrap()).unwrap();
        let model = MaterialModel::neo_hookean(1.0, 1.0, 1.0, 1.0, 1.0);
        let y0: Vec<f64> = disc.mesh.nodes.iter().flat_map(|p| *p).collect();
        let theta = vec![293.0; disc.num_nodes()];
        let ctx = MechContext { disc: &disc, model: &model, y_prev: &y0, theta_prev: &theta, tau: 0.1, body_force: [0.0; 2], traction: [0.0; 2] };
        let dofs = DofMap::new(y0.len(), &disc.mesh.boundary_nodes(BoundaryTag::DirichletMech).unwrap().iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect::<Vec<_>>());
        let q = AffineMap { a: *Rotation::<2>::planar(0.1).matrix(), b: [0.0; 2] };
        let target = q.apply_field(&y0);
        let fixed_vals: Vec<f64> = dofs.fixed().iter().map(|&d| target[d]).collect();
        let init = feasible_init(&ctx, &y0, &q, &dofs, &fixed_vals).unwrap();
        assert_eq!(init, target);
    }

    #[test]
    fn stretching_update_is_blended_when_needed() {
        let disc = Discretization::new(Mesh::gen_rectangle(1.0, 1.0, 4, 4).unwrap()).unwrap();
        let model = MaterialModel::neo_hookean(1.0, 1.0, 1.0, 1.0, 1.0);
        let y0: Vec<f64> = disc.mesh.nodes.iter().flat_map(|p| *p).collect();
        let theta = vec![293.0; disc.num_nodes()];
        let ctx = MechContext { disc: &disc, model: &model, y_prev: &y0, theta_prev: &theta, tau: 0.1, body_force: [0.0; 2], traction: [0.0; 2] };
        let dofs = clamped_left(&disc);
        // the update folds the body; left-edge data stay at the reference position
        let update = AffineMap { a: Mat2::new(-0.5, 0.0, 0.0, 1.0), b: [0.0; 2] };
        let fixed_vals: Vec<f64> = dofs.fixed().iter().map(|&d| y0[d]).collect();
        let init = feasible_init(&ctx, &y0, &update, &dofs, &fixed_vals).unwrap();
        assert!(ctx.min_det(&init) > 0.0);
        for (&d, &v) in dofs.fixed().iter().zip(&fixed_vals) {
            assert_eq!(init[d], v);
        }
        let stretch = AffineMap { a: Mat2::new(1.3, 0.0, 0.0, 1.0), b: [0.0; 2] };
        let init = feasible_init(&ctx, &y0, &stretch, &dofs, &fixed_vals).unwrap();
        assert!(ctx.min_det(&init) > 0.0);
    }

    #[test]
    fn affine_map_algebra() {
        let m = AffineMap { a: Mat2::new(2.0, 1.0, 0.0, 1.0), b: [1.0, -1.0] };
        let inv = m.inverse().unwrap();
        let id = m.compose(&inv);
        assert!((id.a - Mat2::identity()).norm() < 1e-15);
        assert!(id.b[0].abs() < 1e-15 && id.b[1].abs() < 1e-15);
        assert_eq!(m.apply([1.0, 1.0]), [4.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        assert!(MechSolveConfig::default().violations().is_empty());
        let bad = MechSolveConfig { backtrack_factor: 1.5, tol_residual: -1.0, ..Default::default() };
        assert_eq!(bad.violations().len(), 2);
    }
}
