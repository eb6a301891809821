//! Independent checks of the constitutive formulas, the matrix inequality
//! behind the compactness argument, and the discrete balance laws.
//!
//! Every suite is seeded, so reports are reproducible bit for bit.

use std::fmt;

use nalgebra::{Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::quadrature::{deformation_gradient, interpolate_vector, scalar_gradient};
use crate::assembly::Discretization;
use crate::error::Result;
use crate::experiments::{preset_creep, ExperimentConfig, MeshSpec};
use crate::materials::{z_eps_energy, DissipationVariant, MaterialKind, MaterialModel};
use crate::tensor::{ddot, sym, symmetric_eigen, Mat3, SquareMatrix};
use crate::timeloop::Trajectory;

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub samples: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, samples: usize, max_violation: f64, tolerance: f64) -> Self {
        OracleReport { name: name.into(), samples, max_violation, tolerance, pass: max_violation <= tolerance }
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<44} samples={:<6} max_violation={:.3e} tol={:.1e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.samples,
            self.max_violation,
            self.tolerance
        )
    }
}

pub fn random_rotation3(rng: &mut impl Rng) -> Mat3 {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n2: f64 = q.iter().map(|v| v * v).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            return UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3])).to_rotation_matrix().into_inner();
        }
    }
}

/// `F = Q₁ diag(s) Q₂` with singular values in `[0.5, 2]`, conditioned on `det F ∈ [lo, hi]`.
pub fn random_deformation(rng: &mut impl Rng, lo: f64, hi: f64) -> Mat3 {
    loop {
        let s = Mat3::from_diagonal(&nalgebra::Vector3::from_fn(|_, _| rng.gen_range(0.5..2.0)));
        let f = random_rotation3(rng) * s * random_rotation3(rng);
        let d = f.determinant();
        if d >= lo && d <= hi {
            return f;
        }
    }
}

fn random_spd<const D: usize>(rng: &mut impl Rng) -> SquareMatrix<D> {
    let m = SquareMatrix::<D>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    let (_, q) = symmetric_eigen(&sym(&(m + m.transpose())));
    let l = nalgebra::SVector::<f64, D>::from_fn(|_, _| 10f64.powf(rng.gen_range(-1.0..1.0)));
    sym(&(q * SquareMatrix::<D>::from_diagonal(&l) * q.transpose()))
}

fn fd_matrix(energy: impl Fn(&Mat3) -> f64, f: &Mat3) -> Mat3 {
    let h = 1e-6 * f.norm();
    Mat3::from_fn(|i, j| {
        let (mut p, mut m) = (*f, *f);
        p[(i, j)] += h;
        m[(i, j)] -= h;
        (energy(&p) - energy(&m)) / (2.0 * h)
    })
}

fn fd_scalar(g: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-6 * x.abs().max(1.0);
    (g(x + h) - g(x - h)) / (2.0 * h)
}

fn rel(err: f64, scale: f64) -> f64 {
    err / scale.max(1e-300)
}

/// Analytic derivatives against central differences at 100 admissible points.
pub fn fd_gradient_suite(model: &MaterialModel, label: &str) -> Result<Vec<OracleReport>> {
    const SAMPLES: usize = 100;
    const TOL: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(0x0f_d0);
    let mut worst = [0.0f64; 7];
    let mut taken = 0;
    while taken < SAMPLES {
        let f = random_deformation(&mut rng, 0.5, 2.0);
        if model.kind == MaterialKind::Sma {
            // keep away from the switching set of the two wells
            let zp = z_eps_energy(&f, model.eps, model.mu, model.lambda)?;
            let zm = z_eps_energy(&f, -model.eps, model.mu, model.lambda)?;
            if (zp - zm).abs() < 1e-4 * zp.abs().max(zm.abs()) {
                continue;
            }
        }
        taken += 1;
        let theta = rng.gen_range(100.0..600.0);
        let dir = Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let f_prev = f + Mat3::from_fn(|_, _| rng.gen_range(-0.05..0.05));

        let an = model.elastic_stress(&f)?;
        let fd = fd_matrix(|g| model.elastic_energy(g).unwrap_or(f64::NAN), &f);
        worst[0] = worst[0].max(rel((an - fd).norm(), an.norm()));

        let an = model.coupling_stress(&f, theta)?;
        if an.norm() > 0.0 {
            let fd = fd_matrix(|g| model.coupling_strain_energy(g, theta).unwrap_or(f64::NAN), &f);
            worst[1] = worst[1].max(rel((an - fd).norm(), an.norm()));
        }

        let an = model.coupling_dtheta(&f, theta)?;
        let fd = fd_scalar(|t| model.coupling_energy(&f, t).unwrap_or(f64::NAN), theta);
        worst[2] = worst[2].max(rel((an - fd).abs(), an.abs()));

        let an = model.coupling_df_dtheta(&f, theta)?;
        if an.norm() > 0.0 {
            let h = 1e-6 * theta;
            let fd = (model.coupling_stress(&f, theta + h)? - model.coupling_stress(&f, theta - h)?) / (2.0 * h);
            worst[3] = worst[3].max(rel((an - fd).norm(), an.norm()));
        }

        let an = model.heat_capacity(&f, theta)?;
        let fd = fd_scalar(|t| model.internal_energy(&f, t).unwrap_or(f64::NAN), theta);
        worst[4] = worst[4].max(rel((an - fd).abs(), an.abs()));

        let an = model.dissipation_stress(&f_prev, &f)?;
        let fd = fd_matrix(|g| 0.5 * model.dissipation_density(&f_prev, g, theta).unwrap_or(f64::NAN), &f);
        worst[5] = worst[5].max(rel((an - fd).norm(), an.norm()));

        let an = model.elastic_hessian_apply(&f, &dir)? + model.dissipation_hessian_apply(&f_prev, &f, &dir)?;
        let h = 1e-6 * f.norm();
        let grad = |g: &Mat3| -> Result<Mat3> { Ok(model.elastic_stress(g)? + model.dissipation_stress(&f_prev, g)?) };
        let fd = (grad(&(f + dir * h))? - grad(&(f - dir * h))?) / (2.0 * h);
        worst[6] = worst[6].max(rel((an - fd).norm(), an.norm()));
    }
    let names = ["elastic_stress", "coupling_stress", "coupling_dtheta", "coupling_df_dtheta", "heat_capacity", "dissipation_stress", "hessian_action"];
    Ok(names.iter().zip(worst).map(|(n, w)| OracleReport::new(format!("fd[{label}].{n}"), SAMPLES, w, TOL)).collect())
}

/// `|A - D| ≤ |A² - D²| / (α + α̃)` for SPD pairs, `α, α̃` the smallest eigenvalues.
pub fn matrix_lemma_gap<const D: usize>(a: &SquareMatrix<D>, d: &SquareMatrix<D>) -> f64 {
    let alpha = symmetric_eigen(d).0[0];
    let alpha_t = symmetric_eigen(a).0[0];
    (a * a - d * d).norm() / (alpha + alpha_t) - (a - d).norm()
}

fn lemma_dim<const D: usize>(rng: &mut impl Rng, samples: usize) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut strict = 0;
    for _ in 0..samples {
        let a = random_spd::<D>(rng);
        let d = random_spd::<D>(rng);
        let gap = matrix_lemma_gap(&a, &d);
        worst = worst.max(-gap);
        if gap > 1e-8 {
            strict += 1;
        }
    }
    (worst, strict)
}

pub fn matrix_lemma_suite() -> Vec<OracleReport> {
    const SAMPLES: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x3_4);
    let (w2, s2) = lemma_dim::<2>(&mut rng, SAMPLES);
    let (w3, s3) = lemma_dim::<3>(&mut rng, SAMPLES);
    let eq2 = matrix_lemma_gap(&(SquareMatrix::<2>::identity() * 2.0), &SquareMatrix::<2>::identity()).abs();
    let eq3 = matrix_lemma_gap(&(SquareMatrix::<3>::identity() * 2.0), &SquareMatrix::<3>::identity()).abs();
    let same = matrix_lemma_gap(&SquareMatrix::<3>::identity(), &SquareMatrix::<3>::identity()).abs();
    vec![
        OracleReport::new("matrix_lemma.d2", SAMPLES, w2.max(0.0), 1e-12),
        OracleReport::new("matrix_lemma.d3", SAMPLES, w3.max(0.0), 1e-12),
        OracleReport::new("matrix_lemma.equality_2id_id", 2, eq2.max(eq3).max(same), 1e-12),
        // a strict gap must show up for generic pairs
        OracleReport::new("matrix_lemma.strict_observed", 2 * SAMPLES, if s2 > 0 && s3 > 0 { 0.0 } else { 1.0 }, 0.0),
    ]
}

/// Algebraic identities of the model at 10³ seeded samples each.
pub fn identity_suite() -> Result<Vec<OracleReport>> {
    const SAMPLES: usize = 1000;
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(0x2_14);
    let nu = 0.7;
    let v1 = MaterialModel::neo_hookean(1.0, 1.0, 1.0, nu, 1.0);
    let v2 = v1.clone().with_variants(DissipationVariant::V2, v1.heat_source_variant);
    let sma = MaterialModel::sma(1.0, 1.0, 1.0, 0.05, nu, 1.0);
    let mut worst = [0.0f64; 5];
    let mut witness_min = f64::INFINITY;
    for _ in 0..SAMPLES {
        let f1 = random_deformation(&mut rng, 0.125, 8.0);
        let f2 = random_deformation(&mut rng, 0.125, 8.0);
        let d = f2 - f1;
        let lhs = d.transpose() * f1 + f1.transpose() * d - (f2.transpose() * f2 - f1.transpose() * f1);
        let rhs = -(d.transpose() * d);
        worst[0] = worst[0].max(rel((lhs - rhs).norm(), rhs.norm().max(1.0)));

        let fdot = Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let xi = ddot(&v1.viscous_stress(&f1, &fdot), &fdot);
        let two_r = v1.xi_rate(&f1, &fdot, 300.0)?;
        worst[1] = worst[1].max(rel((xi - two_r).abs(), two_r.abs()));

        let theta = rng.gen_range(1.0..600.0);
        let via_f = sma.coupling_stress(&f1, theta)?;
        let via_c = f1 * sma.coupling_stress_c(&(f1.transpose() * f1), theta)? * 2.0;
        // both routes subtract O(1) well stresses; measure against the summands
        let summand = crate::materials::phase_fraction(theta) * crate::materials::z_eps_stress(&f1, 0.0, sma.mu, sma.lambda)?.norm();
        worst[2] = worst[2].max(rel((via_f - via_c).norm(), via_f.norm().max(summand)));

        let (q1, q2) = (random_rotation3(&mut rng), random_rotation3(&mut rng));
        let base = v1.dissipation_density(&f1, &f2, theta)?;
        let rotated = v1.dissipation_density(&(q1 * f1), &(q2 * f2), theta)?;
        worst[3] = worst[3].max(rel((base - rotated).abs(), base.abs()));

        // V.2 is not separately frame indifferent: two distinct rotations dissipate
        let (s1, s2) = (random_rotation3(&mut rng), random_rotation3(&mut rng));
        let cdot = sym(&(s1.transpose() * (s2 - s1))) * 2.0;
        let bound = nu * cdot.norm_squared();
        let d2 = v2.dissipation_density(&s1, &s2, theta)?;
        worst[4] = worst[4].max(rel((bound - d2).max(0.0), bound));
        witness_min = witness_min.min(bound);
    }
    let mut out: Vec<OracleReport> = ["identity.increment_expansion", "identity.xi_equals_2r", "identity.stress_via_c", "identity.v1_separate_frame"]
        .iter()
        .zip(worst)
        .map(|(n, w)| OracleReport::new(*n, SAMPLES, w, TOL))
        .collect();
    out.push(OracleReport::new("identity.v2_witness_bound", SAMPLES, worst[4], TOL));
    out.push(OracleReport::new("identity.v2_witness_positive", SAMPLES, if witness_min > 0.0 { 0.0 } else { 1.0 }, 0.0));
    Ok(out)
}

/// Creep configuration on a 4×4 mesh used by the balance and self-convergence checks.
pub fn small_creep(tau: f64, steps: usize) -> ExperimentConfig {
    let mut cfg = preset_creep(0.5);
    cfg.mesh = MeshSpec::Rectangle { length: 1.0, height: 0.25, nx: 4, ny: 4 };
    cfg.time.tau = tau;
    cfg.time.steps = steps;
    cfg.probes.retain(|p| !matches!(p, crate::experiments::Observable::AxialStrain { .. } | crate::experiments::Observable::TempAtProbe { .. }));
    cfg
}

/// Largest normalized internal-energy balance residual over all steps.
pub fn max_balance_residual(trajectory: &Trajectory) -> f64 {
    trajectory.records.iter().map(|r| r.thermal.balance_residual).fold(0.0, f64::max)
}

fn h1_sq(disc: &Discretization, a: &[f64], b: &[f64], comps: usize) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut s = 0.0;
    for (el, qps) in disc.mesh.elements.iter().zip(&disc.quad) {
        for qp in qps {
            if comps == 2 {
                let v = interpolate_vector(&diff, el, qp);
                let g = deformation_gradient(&diff, el, qp);
                s += qp.jxw() * (v[0] * v[0] + v[1] * v[1] + g.norm_squared());
            } else {
                let v = crate::assembly::quadrature::interpolate(&diff, el, qp);
                let g = scalar_gradient(&diff, el, qp);
                s += qp.jxw() * (v * v + g[0] * g[0] + g[1] * g[1]);
            }
        }
    }
    s
}

/// Discrete `L²(I; H¹)` distance between two runs, sampled on the coarse run's time grid.
pub fn trajectory_distance(disc: &Discretization, coarse: &Trajectory, fine: &Trajectory, tau_coarse: f64) -> f64 {
    let ratio = (fine.states.len() - 1) / (coarse.states.len() - 1).max(1);
    let mut s = 0.0;
    for k in 1..coarse.states.len() {
        let (a, b) = (&coarse.states[k], &fine.states[k * ratio]);
        s += tau_coarse * (h1_sq(disc, &a.y, &b.y, 2) + h1_sq(disc, &a.theta, &b.theta, 1));
    }
    s.sqrt()
}

/// Distances `‖u_τ − u_{τ/2}‖` for `τ = T/20, T/40` (compared against `T/40, T/80`).
pub fn self_convergence_distances(horizon: f64) -> Result<[f64; 2]> {
    let runs: Vec<(Discretization, Trajectory)> = [20, 40, 80]
        .iter()
        .map(|&n| {
            let sim = small_creep(horizon / n as f64, n).build(1)?;
            let disc = sim.setup().disc.clone();
            Ok((disc, sim.run()?))
        })
        .collect::<Result<_>>()?;
    let d1 = trajectory_distance(&runs[0].0, &runs[0].1, &runs[1].1, horizon / 20.0);
    let d2 = trajectory_distance(&runs[0].0, &runs[1].1, &runs[2].1, horizon / 40.0);
    Ok([d1, d2])
}

pub const CONVERGENCE_HORIZON: f64 = 40.0;

pub fn balance_and_convergence_suite() -> Result<Vec<OracleReport>> {
    let cfg = small_creep(1.0, 40);
    let tol = 10.0 * cfg.solver.thermal.tol_residual;
    let traj = cfg.build(1)?.run()?;
    let balance = max_balance_residual(&traj);

    let mut still = small_creep(1.0, 5);
    still.loads.traction = [crate::timeloop::Curve::Constant(0.0), crate::timeloop::Curve::Constant(0.0)];
    still.material.kappa = 0.0;
    let t0 = still.build(1)?.run()?;
    let drift = t0.records.iter().map(|r| (r.thermal.internal_energy - t0.records[0].thermal.internal_energy).abs()).fold(0.0, f64::max);

    let [d1, d2] = self_convergence_distances(CONVERGENCE_HORIZON)?;
    Ok(vec![
        OracleReport::new("balance.creep_4x4_40_steps", traj.records.len(), balance, tol),
        OracleReport::new("balance.at_rest_conserved", t0.records.len(), drift / t0.records[0].thermal.internal_energy, 1e-14),
        OracleReport::new("convergence.distance_ratio", 3, d2 / d1, 1.0 - f64::EPSILON),
    ])
}

/// All suites in a fixed order.
pub fn verify() -> Result<Vec<OracleReport>> {
    let nh1 = MaterialModel::neo_hookean(1.0, 1.3, 1.0, 0.8, 1.0);
    let nh2 = nh1.clone().with_variants(DissipationVariant::V2, crate::materials::HeatSourceVariant::Vh2);
    let sma = MaterialModel::sma(1.0, 1.3, 1.0, 0.05, 0.8, 1.0);
    let mut out = fd_gradient_suite(&nh1, "nh_v1")?;
    out.extend(fd_gradient_suite(&nh2, "nh_v2")?);
    out.extend(fd_gradient_suite(&sma, "sma_v1")?);
    out.extend(matrix_lemma_suite());
    out.extend(identity_suite()?);
    out.extend(balance_and_convergence_suite()?);
    Ok(out)
}
