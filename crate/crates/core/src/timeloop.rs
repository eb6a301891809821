//! The staggered driver: interval-averaged loads, exact Dirichlet motion at `t = kτ`,
//! one mechanical step followed by one thermal step.

use serde::{Deserialize, Serialize};

use crate::assembly::{DofMap, MechContext, ThermalContext};
use crate::assembly::Discretization;
use crate::error::{Error, Result};
use crate::materials::MaterialModel;
use crate::mech_step::{feasible_init, solve_mech_step, AffineMap, MechReport, MechSolveConfig};
use crate::mesh::BoundaryTag;
use crate::tensor::{Mat2, Rotation};
use crate::thermal_step::{solve_thermal_step, ThermalReport, ThermalSolveConfig};

/// Scalar load curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Curve {
    Constant(f64),
    /// Breakpoints `[t, value]` with strictly increasing `t`.
    PiecewiseLinear(Vec<[f64; 2]>),
}

impl Curve {
    pub fn zero() -> Self {
        Curve::Constant(0.0)
    }

    fn domain(&self) -> (f64, f64) {
        match self {
            Curve::Constant(_) => (0.0, f64::INFINITY),
            Curve::PiecewiseLinear(p) => (p.first().map_or(0.0, |q| q[0]), p.last().map_or(0.0, |q| q[0])),
        }
    }

    fn check(&self, t: f64) -> Result<()> {
        let (start, end) = self.domain();
        let slack = 1e-12 * (1.0 + end.abs().min(1e300));
        if t < start - slack || t > end + slack || t.is_nan() {
            return Err(Error::CurveUndefined { t, start, end });
        }
        Ok(())
    }

    pub fn violations(&self, name: &str) -> Vec<String> {
        match self {
            Curve::Constant(v) if !v.is_finite() => vec![format!("{name} must be finite")],
            Curve::Constant(_) => vec![],
            Curve::PiecewiseLinear(p) => {
                let mut out = Vec::new();
                if p.is_empty() {
                    out.push(format!("{name} needs at least one breakpoint"));
                }
                if p.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    out.push(format!("{name} breakpoints must have strictly increasing times"));
                }
                if p.iter().flatten().any(|v| !v.is_finite()) {
                    out.push(format!("{name} breakpoints must be finite"));
                }
                out
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(match self {
            Curve::Constant(v) => *v,
            Curve::PiecewiseLinear(p) => {
                let t = t.clamp(p[0][0], p[p.len() - 1][0]);
                let i = p.partition_point(|q| q[0] <= t).clamp(1, p.len().max(2) - 1);
                if p.len() == 1 {
                    p[0][1]
                } else {
                    let (a, b) = (p[i - 1], p[i]);
                    a[1] + (b[1] - a[1]) * (t - a[0]) / (b[0] - a[0])
                }
            }
        })
    }

    /// Exact integral over `[a, b]` using the curve's own breakpoints.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(match self {
            Curve::Constant(v) => v * (b - a),
            Curve::PiecewiseLinear(p) => {
                let mut knots = vec![a];
                knots.extend(p.iter().map(|q| q[0]).filter(|&t| t > a && t < b));
                knots.push(b);
                let mut s = 0.0;
                for w in knots.windows(2) {
                    s += 0.5 * (w[1] - w[0]) * (self.eval(w[0])? + self.eval(w[1])?);
                }
                s
            }
        })
    }
}

/// `τ⁻¹ ∫_{(k-1)τ}^{kτ} curve(t) dt`.
pub fn interval_average(curve: &Curve, k: usize, tau: f64) -> Result<f64> {
    let start = (k as f64 - 1.0) * tau;
    let end = k as f64 * tau;
    if k == 0 {
        return Err(Error::CurveUndefined { t: start, start: 0.0, end: curve.domain().1 });
    }
    match curve {
        Curve::Constant(v) => Ok(*v),
        _ => Ok(curve.integral(start, end)? / tau),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineKeyframe {
    pub t: f64,
    /// Row-major linear part.
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
}

/// Boundary deformation `h(t, ·)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DirichletMotion {
    Static,
    /// Rotation about `e₃` through `center` by the angle `rate · t`.
    RigidRotation {
        rate: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// Affine maps interpolated linearly between keyframes.
    AffineTable { keyframes: Vec<AffineKeyframe> },
}

impl DirichletMotion {
    pub fn map_at(&self, t: f64) -> Result<AffineMap> {
        match self {
            DirichletMotion::Static => Ok(AffineMap::identity()),
            DirichletMotion::RigidRotation { rate, center } => {
                let q = *Rotation::<2>::planar(rate * t).matrix();
                let qc = q * nalgebra::Vector2::new(center[0], center[1]);
                Ok(AffineMap { a: q, b: [center[0] - qc[0], center[1] - qc[1]] })
            }
            DirichletMotion::AffineTable { keyframes } => {
                let pick = |f: &dyn Fn(&AffineKeyframe) -> f64| -> Result<f64> {
                    Curve::PiecewiseLinear(keyframes.iter().map(|k| [k.t, f(k)]).collect()).eval(t)
                };
                let mut a = Mat2::zeros();
                for i in 0..2 {
                    for j in 0..2 {
                        a[(i, j)] = pick(&|k| k.a[i][j])?;
                    }
                }
                Ok(AffineMap { a, b: [pick(&|k| k.b[0])?, pick(&|k| k.b[1])?] })
            }
        }
    }

    pub fn violations(&self) -> Vec<String> {
        match self {
            DirichletMotion::Static => vec![],
            DirichletMotion::RigidRotation { rate, center } => {
                if rate.is_finite() && center.iter().all(|c| c.is_finite()) {
                    vec![]
                } else {
                    vec!["loads.motion rate and center must be finite".into()]
                }
            }
            DirichletMotion::AffineTable { keyframes } => {
                let mut out = Vec::new();
                if keyframes.is_empty() {
                    out.push("loads.motion needs at least one keyframe".into());
                }
                if keyframes.windows(2).any(|w| !(w[1].t > w[0].t)) {
                    out.push("loads.motion keyframes must have strictly increasing times".into());
                }
                if keyframes.iter().any(|k| {
                    Mat2::new(k.a[0][0], k.a[0][1], k.a[1][0], k.a[1][1]).determinant() <= 0.0
                }) {
                    out.push("loads.motion keyframe maps must preserve orientation".into());
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadProgram {
    /// Uniform body force components.
    #[serde(default = "zero_pair")]
    pub body_force: [Curve; 2],
    /// Dead traction components on edges tagged `NeumannTraction`.
    #[serde(default = "zero_pair")]
    pub traction: [Curve; 2],
    pub theta_flat: Curve,
    #[serde(default = "static_motion")]
    pub motion: DirichletMotion,
}

fn zero_pair() -> [Curve; 2] {
    [Curve::zero(), Curve::zero()]
}

fn static_motion() -> DirichletMotion {
    DirichletMotion::Static
}

impl LoadProgram {
    pub fn constant(theta_flat: f64) -> Self {
        LoadProgram { body_force: zero_pair(), traction: zero_pair(), theta_flat: Curve::Constant(theta_flat), motion: DirichletMotion::Static }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, c) in self.body_force.iter().enumerate() {
            out.extend(c.violations(&format!("loads.body_force[{i}]")));
        }
        for (i, c) in self.traction.iter().enumerate() {
            out.extend(c.violations(&format!("loads.traction[{i}]")));
        }
        out.extend(self.theta_flat.violations("loads.theta_flat"));
        out.extend(self.motion.violations());
        out
    }
}

/// Nodal deformation (two entries per node) and temperature at one time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub mech: MechReport,
    pub thermal: ThermalReport,
    pub body_force: [f64; 2],
    pub traction: [f64; 2],
    pub theta_flat: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// States at `t = 0, τ, 2τ, …`.
    pub states: Vec<State>,
    /// One record per completed step; `records[k - 1]` belongs to `states[k]`.
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    /// `Σ_k 𝒟_k / (2τ)`.
    pub fn dissipation_sum(&self, tau: f64) -> f64 {
        self.records.iter().map(|r| r.mech.dissipation).sum::<f64>() / (2.0 * tau)
    }
}

/// Static ingredients of a run.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub disc: Discretization,
    pub model: MaterialModel,
    pub loads: LoadProgram,
    /// Constrained mechanical unknowns (`2 · node + component`).
    pub fixed_dofs: Vec<usize>,
    pub tau: f64,
    pub steps: usize,
    pub mech_cfg: MechSolveConfig,
    pub thermal_cfg: ThermalSolveConfig,
}

/// A run in progress; [`Simulation::step`] advances one time level.
#[derive(Debug, Clone)]
pub struct Simulation {
    setup: RunSetup,
    mech_dofs: DofMap,
    heat_dofs: DofMap,
    reference: Vec<f64>,
    trajectory: Trajectory,
}

impl Simulation {
    pub fn new(setup: RunSetup, y0: Vec<f64>, theta0: Vec<f64>) -> Result<Self> {
        let n = setup.disc.num_nodes();
        let mut problems = Vec::new();
        if y0.len() != 2 * n {
            problems.push(format!("initial deformation has {} entries, expected {}", y0.len(), 2 * n));
        }
        if theta0.len() != n {
            problems.push(format!("initial temperature has {} entries, expected {n}", theta0.len()));
        }
        if !(setup.tau > 0.0 && setup.tau.is_finite()) {
            problems.push(format!("time.tau must be positive (got {})", setup.tau));
        }
        if setup.steps == 0 {
            problems.push("time.steps must be positive".into());
        }
        if setup.fixed_dofs.is_empty() {
            problems.push("at least one mechanical unknown must be constrained".into());
        }
        if let Some(&d) = setup.fixed_dofs.iter().find(|&&d| d >= 2 * n) {
            problems.push(format!("constrained unknown {d} does not exist"));
        }
        problems.extend(setup.model.violations());
        problems.extend(setup.loads.violations());
        problems.extend(setup.mech_cfg.violations());
        problems.extend(setup.thermal_cfg.violations());
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        if let Some(node) = theta0.iter().position(|&t| !(t >= 0.0)) {
            return Err(Error::NegativeTemperatureInput { node, theta: theta0[node] });
        }
        let mech_dofs = DofMap::new(2 * n, &setup.fixed_dofs);
        let heat_fixed = setup.disc.mesh.boundary_nodes(BoundaryTag::DirichletHeat).unwrap_or_default();
        let heat_dofs = DofMap::new(n, &heat_fixed);
        let probe = MechContext {
            disc: &setup.disc,
            model: &setup.model,
            y_prev: &y0,
            theta_prev: &theta0,
            tau: setup.tau,
            body_force: [0.0; 2],
            traction: [0.0; 2],
        };
        let det = probe.min_det(&y0);
        if !(det > 0.0) {
            return Err(Error::NonPositiveDeterminant { det, element: None });
        }
        let reference = y0.clone();
        Ok(Simulation {
            setup,
            mech_dofs,
            heat_dofs,
            reference,
            trajectory: Trajectory { states: vec![State { y: y0, theta: theta0, time: 0.0 }], records: Vec::new() },
        })
    }

    pub fn setup(&self) -> &RunSetup {
        &self.setup
    }

    pub fn state(&self) -> &State {
        self.trajectory.states.last().expect("trajectory starts with the initial state")
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.trajectory
    }

    pub fn steps_done(&self) -> usize {
        self.trajectory.records.len()
    }

    pub fn is_finished(&self) -> bool {
        self.steps_done() >= self.setup.steps
    }

    pub fn mech_dofs(&self) -> &DofMap {
        &self.mech_dofs
    }

    pub fn heat_dofs(&self) -> &DofMap {
        &self.heat_dofs
    }

    fn advance(&self, k: usize) -> Result<(State, StepRecord)> {
        let s = &self.setup;
        let tau = s.tau;
        let prev = self.state();
        let avg = |c: &Curve| interval_average(c, k, tau);
        let body_force = [avg(&s.loads.body_force[0])?, avg(&s.loads.body_force[1])?];
        let traction = [avg(&s.loads.traction[0])?, avg(&s.loads.traction[1])?];
        let theta_flat = avg(&s.loads.theta_flat)?;
        let h0 = s.loads.motion.map_at(0.0)?;
        let h_prev = s.loads.motion.map_at((k - 1) as f64 * tau)?;
        let h_k = s.loads.motion.map_at(k as f64 * tau)?;
        let update = h_k.compose(&h_prev.inverse()?);
        let from_reference = h_k.compose(&h0.inverse()?);
        let target = from_reference.apply_field(&self.reference);
        let dirichlet: Vec<f64> = self.mech_dofs.fixed().iter().map(|&d| target[d]).collect();

        let ctx = MechContext {
            disc: &s.disc,
            model: &s.model,
            y_prev: &prev.y,
            theta_prev: &prev.theta,
            tau,
            body_force,
            traction,
        };
        let y_init = feasible_init(&ctx, &prev.y, &update, &self.mech_dofs, &dirichlet)?;
        let (y_k, mech) = solve_mech_step(&ctx, &self.mech_dofs, y_init, &s.mech_cfg)?;
        let tctx = ThermalContext::new(&s.disc, &s.model, &y_k, &prev.y, &prev.theta, theta_flat, tau)?;
        let (theta_k, thermal) = solve_thermal_step(&tctx, &self.heat_dofs, &prev.theta, &s.thermal_cfg)?;
        let time = k as f64 * tau;
        Ok((
            State { y: y_k, theta: theta_k, time },
            StepRecord { step: k, time, mech, thermal, body_force, traction, theta_flat },
        ))
    }

    /// Advances one step. On failure the trajectory so far travels with the error.
    pub fn step(&mut self) -> Result<&StepRecord> {
        let k = self.steps_done() + 1;
        match self.advance(k) {
            Ok((state, record)) => {
                self.trajectory.states.push(state);
                self.trajectory.records.push(record);
                Ok(self.trajectory.records.last().expect("just pushed"))
            }
            Err(e) => Err(Error::StepFailed { step: k, source: Box::new(e), partial: Box::new(self.trajectory.clone()) }),
        }
    }

    /// Runs the remaining steps, calling `progress` after each.
    pub fn run_with(mut self, mut progress: impl FnMut(&StepRecord)) -> Result<Trajectory> {
        while !self.is_finished() {
            let rec = self.step()?;
            progress(rec);
        }
        Ok(self.trajectory)
    }

    pub fn run(self) -> Result<Trajectory> {
        self.run_with(|_| {})
    }
}

/// Runs `steps` staggered steps from `(y0, θ0)`.
pub fn run_simulation(setup: RunSetup, y0: Vec<f64>, theta0: Vec<f64>) -> Result<Trajectory> {
    Simulation::new(setup, y0, theta0)?.run()
}
