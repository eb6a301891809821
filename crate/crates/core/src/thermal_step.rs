//! Newton solve of the convex thermal step with a positivity safeguard.

use serde::{Deserialize, Serialize};

use crate::assembly::{max_abs, DofMap, ThermalContext};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalSolveConfig {
    pub tol_residual: f64,
    pub max_newton: usize,
    pub theta_floor: f64,
}

impl Default for ThermalSolveConfig {
    fn default() -> Self {
        ThermalSolveConfig { tol_residual: 1e-10, max_newton: 30, theta_floor: 1e-12 }
    }
}

impl ThermalSolveConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.tol_residual > 0.0) {
            out.push("solver.thermal.tol_residual must be positive".into());
        }
        if self.max_newton == 0 {
            out.push("solver.thermal.max_newton must be positive".into());
        }
        if !(self.theta_floor > 0.0) {
            out.push("solver.thermal.theta_floor must be positive".into());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ThermalReport {
    pub newton_iters: usize,
    pub final_residual: f64,
    /// Free nodes raised to the temperature floor.
    pub clamped_nodes: usize,
    pub functional_before: f64,
    pub functional_after: f64,
    /// Normalized residual of the `φ = 1` balance.
    pub balance_residual: f64,
    /// `∫ W^in(∇y_k, θ_k)`.
    pub internal_energy: f64,
    /// `∫ h_τ`.
    pub heat_source_total: f64,
    /// Heat entering through temperature-controlled nodes per unit time.
    pub dirichlet_heat_inflow: f64,
    /// `κ ∮ (θ_k - θ_♭)`.
    pub robin_outflow: f64,
}

/// Minimizes the thermal functional; nodes in `dofs.fixed()` are held at `ctx.theta_flat`.
pub fn solve_thermal_step(
    ctx: &ThermalContext,
    dofs: &DofMap,
    theta_prev: &[f64],
    cfg: &ThermalSolveConfig,
) -> Result<(Vec<f64>, ThermalReport)> {
    if let Some(node) = theta_prev.iter().position(|&t| !(t >= 0.0)) {
        return Err(Error::NegativeTemperatureInput { node, theta: theta_prev[node] });
    }
    let mut theta = theta_prev.to_vec();
    for &d in dofs.fixed() {
        theta[d] = ctx.theta_flat;
    }
    let functional_before = ctx.functional(&theta)?;
    let mut matrix = dofs.pattern(&ctx.disc.mesh, 1);
    let mut r = dofs.restrict(&ctx.assemble_tangent(&theta, dofs, &mut matrix)?);
    let scale = max_abs(&r).max(ctx.energy_scale(&theta)?);
    let target = cfg.tol_residual * scale;
    let mut iters = 0;

    let newton = |theta: &mut Vec<f64>, r: &[f64], matrix: &mut crate::assembly::SkylineMatrix| -> Result<()> {
        let chol = matrix.cholesky()?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = chol.solve(&neg);
        dofs.axpy_free(theta, 1.0, &step);
        Ok(())
    };

    loop {
        if iters > 0 && max_abs(&r) <= target {
            break;
        }
        if iters >= cfg.max_newton {
            return Err(Error::MaxIterations { iterations: iters, residual: max_abs(&r), last_iterate: Box::new(theta) });
        }
        newton(&mut theta, &r, &mut matrix)?;
        iters += 1;
        r = dofs.restrict(&ctx.assemble_tangent(&theta, dofs, &mut matrix)?);
    }

    let mut clamped = clamp(&mut theta, dofs, cfg.theta_floor);
    if clamped > 0 {
        newton(&mut theta, &r, &mut matrix)?;
        iters += 1;
        clamped += clamp(&mut theta, dofs, cfg.theta_floor);
        r = dofs.restrict(&ctx.residual_full(&theta)?);
    }

    let (balance_residual, totals, inflow) = balance(ctx, &theta, dofs)?;
    let report = ThermalReport {
        newton_iters: iters,
        final_residual: max_abs(&r),
        clamped_nodes: clamped,
        functional_before,
        functional_after: ctx.functional(&theta)?,
        balance_residual,
        internal_energy: totals.internal_energy,
        heat_source_total: totals.heat_source,
        dirichlet_heat_inflow: inflow,
        robin_outflow: totals.robin_flux,
    };
    Ok((theta, report))
}

fn clamp(theta: &mut [f64], dofs: &DofMap, floor: f64) -> usize {
    let mut n = 0;
    for &d in dofs.free() {
        if theta[d] < floor {
            theta[d] = floor;
            n += 1;
        }
    }
    n
}

fn balance(ctx: &ThermalContext, theta: &[f64], dofs: &DofMap) -> Result<(f64, crate::assembly::ThermalTotals, f64)> {
    let totals = ctx.totals(theta)?;
    let r = ctx.residual_full(theta)?;
    let inflow: f64 = dofs.fixed().iter().map(|&d| r[d]).sum();
    let tau = ctx.tau;
    let defect = totals.internal_energy - totals.internal_energy_prev - tau * totals.heat_source + tau * totals.robin_flux
        - tau * inflow;
    Ok((defect.abs() / totals.internal_energy.abs().max(f64::MIN_POSITIVE), totals, inflow))
}

/// `|∫w_k - ∫w_{k-1} - τ∫h_τ + τκ∮(θ_k - θ_♭) - τ Q_D| / ∫w_k`, where `Q_D`
/// is the heat entering through temperature-controlled nodes.
pub fn energy_balance_check(ctx: &ThermalContext, theta_k: &[f64], dofs: &DofMap) -> Result<f64> {
    Ok(balance(ctx, theta_k, dofs)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Discretization;
    use crate::materials::MaterialModel;
    use crate::mesh::{BoundaryTag, Mesh};

    fn setup() -> (Discretization, Vec<f64>) {
        let disc = Discretization::new(Mesh::gen_rectangle(1.0, 0.5, 4, 2).unwrap()).unwrap();
        let y: Vec<f64> = disc.mesh.nodes.iter().flat_map(|p| *p).collect();
        (disc, y)
    }

    fn heat_dofs(disc: &Discretization) -> DofMap {
        DofMap::new(disc.num_nodes(), &disc.mesh.boundary_nodes(BoundaryTag::DirichletHeat).unwrap())
    }

    #[test]
    fn constant_boundary_temperature_is_stationary() {
        let (disc, y) = setup();
        let mut model = MaterialModel::neo_hookean(1.0, 1.0, 1.0, 1.0, 0.2);
        model.kappa = 0.5;
        let theta = vec![293.0; disc.num_nodes()];
        let ctx = ThermalContext::new(&disc, &model, &y, &y, &theta, 293.0, 0.1).unwrap();
        let (out, rep) = solve_thermal_step(&ctx, &heat_dofs(&disc), &theta, &ThermalSolveConfig::default()).unwrap();
        assert!(out.iter().all(|t| (t - 293.0).abs() < 1e-10));
        assert_eq!(rep.newton_iters, 1);
        assert_eq!(rep.clamped_nodes, 0);
        assert!(rep.balance_residual < 1e-12);
    }

    #[test]
    fn neo_hookean_converges_in_one_step_and_balances() {
        let (disc, y_prev) = setup();
        let model = MaterialModel::neo_hookean(1.0, 1.0, 5.0, 1.0, 1.0);
        let y_k: Vec<f64> = disc.mesh.nodes.iter().flat_map(|p| [p[0] * (1.0 + 0.05 * p[0]), p[1]]).collect();
        let theta = vec![293.0; disc.num_nodes()];
        let ctx = ThermalContext::new(&disc, &model, &y_k, &y_prev, &theta, 293.0, 0.1).unwrap();
        let (out, rep) = solve_thermal_step(&ctx, &heat_dofs(&disc), &theta, &ThermalSolveConfig::default()).unwrap();
        assert_eq!(rep.newton_iters, 1);
        assert!(rep.balance_residual <= 1e-9);
        assert!(rep.functional_after <= rep.functional_before);
        // viscous heating raises the temperature away from the held edge
        assert!(out.iter().all(|&t| t >= 293.0 - 1e-9));
        assert!(out.iter().any(|&t| t > 293.0));
    }

    #[test]
    fn neo_hookean_map_is_affine_in_previous_temperature() {
        let (disc, y_prev) = setup();
        let model = MaterialModel::neo_hookean(1.0, 1.0, 5.0, 1.0, 1.0);
        let y_k: Vec<f64> = disc.mesh.nodes.iter().flat_map(|p| [p[0] * 1.02, p[1]]).collect();
        let dofs = heat_dofs(&disc);
        let cfg = ThermalSolveConfig::default();
        let a: Vec<f64> = (0..disc.num_nodes()).map(|i| 280.0 + i as f64).collect();
        let b: Vec<f64> = (0..disc.num_nodes()).map(|i| 300.0 - 0.5 * i as f64).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let solve = |t: &[f64]| {
            let ctx = ThermalContext::new(&disc, &model, &y_k, &y_prev, t, 293.0, 0.1).unwrap();
            solve_thermal_step(&ctx, &dofs, t, &cfg).unwrap().0
        };
        let (sa, sb, sm) = (solve(&a), solve(&b), solve(&mid));
        for i in 0..sa.len() {
            assert!((0.5 * (sa[i] + sb[i]) - sm[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn robin_cooling_lowers_internal_energy() {
        let (disc, y) = setup();
        let mut model = MaterialModel::neo_hookean(1.0, 1.0, 1.0, 1.0, 0.2);
        model.kappa = 2.0;
        let theta = vec![350.0; disc.num_nodes()];
        let ctx = ThermalContext::new(&disc, &model, &y, &y, &theta, 293.0, 0.1).unwrap();
        let dofs = DofMap::new(disc.num_nodes(), &[]);
        let (_, rep) = solve_thermal_step(&ctx, &dofs, &theta, &ThermalSolveConfig::default()).unwrap();
        assert!(rep.internal_energy < 350.0 * disc.area);
        assert!(rep.robin_outflow > 0.0);
        assert!(rep.balance_residual < 1e-9);
    }

    #[test]
    fn negative_input_is_rejected() {
        let (disc, y) = setup();
        let model = MaterialModel::neo_hookean(1.0, 1.0, 1.0, 1.0, 0.2);
        let mut theta = vec![293.0; disc.num_nodes()];
        theta[3] = -1.0;
        let ctx = ThermalContext::new(&disc, &model, &y, &y, &vec![293.0; disc.num_nodes()], 293.0, 0.1).unwrap();
        assert!(matches!(
            solve_thermal_step(&ctx, &heat_dofs(&disc), &theta, &ThermalSolveConfig::default()),
            Err(Error::NegativeTemperatureInput { node: 3, .. })
        ));
    }

    #[test]
    fn clamp_activates_on_strong_cooling() {
        // pulled out of a martensite well, the sink exceeds the stored internal energy
        let disc = Discretization::new(Mesh::gen_rectangle(1.0, 1.0, 1, 1).unwrap()).unwrap();
        let model = MaterialModel::sma(1.0, 1.0, 1e-2, 0.3, 1e-6, 1e-6);
        let y_prev: Vec<f64> = disc.mesh.nodes.iter().flat_map(|p| [p[0] - 0.3 * p[1], p[1]]).collect();
        let y_k: Vec<f64> = disc.mesh.nodes.iter().flat_map(|p| *p).collect();
        let theta = vec![0.05; 4];
        let ctx = ThermalContext::new(&disc, &model, &y_k, &y_prev, &theta, 0.05, 1.0).unwrap();
        let h: f64 = ctx.heat_sources().iter().flatten().sum();
        let dofs = DofMap::new(4, &[]);
        let (out, rep) = solve_thermal_step(&ctx, &dofs, &theta, &ThermalSolveConfig::default()).unwrap();
        assert!(h < 0.0);
        assert!(out.iter().all(|&t| t >= 0.0));
        assert!(rep.clamped_nodes > 0, "{rep:?}");
    }
}
