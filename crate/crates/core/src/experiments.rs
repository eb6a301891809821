//! Experiment configurations, presets and derived observables.
//!
//! Load amplitudes, mesh sizes, time steps and annulus radii below are
//! defaults chosen for desk-scale runs; they are configuration, not measured data.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::assembly::quadrature::deformation_gradient;
use crate::assembly::Discretization;
use crate::error::{Error, Result};
use crate::materials::{shear_well, DissipationVariant, HeatSourceVariant, MaterialModel};
use crate::mech_step::MechSolveConfig;
use crate::mesh::{BoundaryTag, Mesh, Side};
use crate::tensor::{lift_plane_strain, Mat3};
use crate::thermal_step::ThermalSolveConfig;
use crate::timeloop::{Curve, DirichletMotion, LoadProgram, RunSetup, Simulation, State, StepRecord, Trajectory};

pub const ROOM_TEMPERATURE: f64 = 293.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    RigidRotation,
    Creep,
    SmaCycle,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Rectangle { length: f64, height: f64, nx: usize, ny: usize },
    Annulus { r_in: f64, r_out: f64, n_radial: usize, n_circum: usize },
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh> {
        match *self {
            MeshSpec::Rectangle { length, height, nx, ny } => Mesh::gen_rectangle(length, height, nx, ny),
            MeshSpec::Annulus { r_in, r_out, n_radial, n_circum } => Mesh::gen_annulus(r_in, r_out, n_radial, n_circum),
        }
    }
}

/// Mechanical condition on one side. The `dirichlet*` kinds follow the boundary motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechBc {
    Dirichlet,
    /// Only the first component is prescribed.
    DirichletX,
    /// Only the second component is prescribed.
    DirichletY,
    Traction,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatBc {
    Dirichlet,
    /// Heat transfer with coefficient `material.kappa`; insulated when it is zero.
    Robin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideBc {
    pub mech: MechBc,
    pub heat: HeatBc,
}

/// Extra prescribed components at the node nearest to `at`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pin {
    pub at: [f64; 2],
    pub components: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub sides: BTreeMap<Side, SideBc>,
    #[serde(default)]
    pub pins: Vec<Pin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub tau: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// Uniform initial temperature; the initial deformation is the identity.
    pub theta0: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub mech: MechSolveConfig,
    pub thermal: ThermalSolveConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Steps at which full-field snapshots are always written.
    pub snapshot_steps: Vec<usize>,
}

/// Quantities recorded once per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Observable {
    /// Temperature at the node nearest to `at`.
    TempAtProbe { at: [f64; 2] },
    /// `F_ij - δ_ij` averaged over the quadrature points around the node nearest to `at`.
    AxialStrain { at: [f64; 2], component: [usize; 2] },
    /// Applied traction component and the strain probe, for stress–strain curves.
    StressStrainPair { at: [f64; 2], component: [usize; 2], traction_component: usize },
    /// `𝒟(y_{k-1}, y_k, θ_{k-1})`.
    DissipationPerStep,
    /// Minimum, mean and maximum of the phase indicator over all quadrature points.
    PhaseField,
    /// `∫ W^in(∇y_k, θ_k)`.
    InternalEnergyTotal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub which: ExperimentKind,
    pub mesh: MeshSpec,
    pub material: MaterialModel,
    pub loads: LoadProgram,
    pub time: TimeSpec,
    pub initial: InitialSpec,
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub probes: Vec<Observable>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn nearest_distance(mesh: &Mesh, at: [f64; 2]) -> (usize, f64) {
    let n = mesh.nearest_node(at);
    let p = mesh.nodes[n];
    (n, (p[0] - at[0]).hypot(p[1] - at[1]))
}

fn max_element_diameter(mesh: &Mesh) -> f64 {
    mesh.elements
        .iter()
        .map(|el| {
            let mut d: f64 = 0.0;
            for a in 0..4 {
                for b in 0..a {
                    let (p, q) = (mesh.nodes[el[a]], mesh.nodes[el[b]]);
                    d = d.max((p[0] - q[0]).hypot(p[1] - q[1]));
                }
            }
            d
        })
        .fold(0.0, f64::max)
}

impl ExperimentConfig {
    /// Every violated invariant, including ones that need the generated mesh.
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.material.violations();
        out.extend(self.loads.violations());
        out.extend(self.solver.mech.violations());
        out.extend(self.solver.thermal.violations());
        if !(self.time.tau > 0.0 && self.time.tau.is_finite()) {
            out.push(format!("time.tau must be positive (got {})", self.time.tau));
        }
        if self.time.steps == 0 {
            out.push("time.steps must be positive".into());
        }
        if !(self.initial.theta0 >= 0.0 && self.initial.theta0.is_finite()) {
            out.push(format!("initial.theta0 must be non-negative (got {})", self.initial.theta0));
        }
        let mesh = match self.mesh.build() {
            Ok(m) => m,
            Err(e) => {
                out.push(format!("mesh: {e}"));
                return out;
            }
        };
        let sides = mesh.sides();
        for side in self.boundary.sides.keys() {
            if !sides.contains(side) {
                out.push(format!("boundary.sides.{side:?} does not exist on this mesh").to_lowercase());
            }
        }
        let reach = max_element_diameter(&mesh);
        for (i, pin) in self.boundary.pins.iter().enumerate() {
            if nearest_distance(&mesh, pin.at).1 > reach {
                out.push(format!("boundary.pins[{i}] is not near any node"));
            }
            if pin.components.is_empty() || pin.components.iter().any(|&c| c > 1) {
                out.push(format!("boundary.pins[{i}].components must be a non-empty subset of {{0, 1}}"));
            }
        }
        let constrained = self.boundary.sides.values().any(|s| !matches!(s.mech, MechBc::Traction | MechBc::Free))
            || !self.boundary.pins.is_empty();
        if !constrained {
            out.push("boundary needs at least one mechanically prescribed side".into());
        }
        for (i, p) in self.probes.iter().enumerate() {
            let (at, comp) = match p {
                Observable::TempAtProbe { at } => (Some(*at), None),
                Observable::AxialStrain { at, component } => (Some(*at), Some(*component)),
                Observable::StressStrainPair { at, component, traction_component } => {
                    if *traction_component > 1 {
                        out.push(format!("probes[{i}].traction_component must be 0 or 1"));
                    }
                    (Some(*at), Some(*component))
                }
                _ => (None, None),
            };
            if let Some(at) = at {
                if nearest_distance(&mesh, at).1 > reach {
                    out.push(format!("probes[{i}] does not reference a mesh node"));
                }
            }
            if let Some(c) = comp {
                if c.iter().any(|&v| v > 1) {
                    out.push(format!("probes[{i}].component entries must be 0 or 1"));
                }
            }
        }
        out
    }

    /// Generates the mesh, applies boundary tags and assembles the run setup.
    pub fn setup(&self, workers: usize) -> Result<(RunSetup, Vec<f64>, Vec<f64>)> {
        let problems = self.violations();
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let mut mesh = self.mesh.build()?;
        let mut fixed = Vec::new();
        for (&side, bc) in &self.boundary.sides {
            let mech = match bc.mech {
                MechBc::Dirichlet | MechBc::DirichletX | MechBc::DirichletY => BoundaryTag::DirichletMech,
                MechBc::Traction => BoundaryTag::NeumannTraction,
                MechBc::Free => BoundaryTag::Free,
            };
            let heat = match bc.heat {
                HeatBc::Dirichlet => BoundaryTag::DirichletHeat,
                HeatBc::Robin => BoundaryTag::RobinHeat,
            };
            mesh.set_side_tags(side, mech, heat);
            let comps: &[usize] = match bc.mech {
                MechBc::Dirichlet => &[0, 1],
                MechBc::DirichletX => &[0],
                MechBc::DirichletY => &[1],
                _ => &[],
            };
            for n in mesh.side_nodes(side) {
                fixed.extend(comps.iter().map(|c| 2 * n + c));
            }
        }
        for pin in &self.boundary.pins {
            let n = mesh.nearest_node(pin.at);
            fixed.extend(pin.components.iter().map(|c| 2 * n + c));
        }
        fixed.sort_unstable();
        fixed.dedup();
        let y0: Vec<f64> = mesh.nodes.iter().flat_map(|p| *p).collect();
        let theta0 = vec![self.initial.theta0; mesh.num_nodes()];
        let disc = Discretization::new(mesh)?.with_workers(workers)?;
        let setup = RunSetup {
            disc,
            model: self.material.clone(),
            loads: self.loads.clone(),
            fixed_dofs: fixed,
            tau: self.time.tau,
            steps: self.time.steps,
            mech_cfg: self.solver.mech.clone(),
            thermal_cfg: self.solver.thermal.clone(),
        };
        Ok((setup, y0, theta0))
    }

    pub fn build(&self, workers: usize) -> Result<Simulation> {
        let (setup, y0, theta0) = self.setup(workers)?;
        Simulation::new(setup, y0, theta0)
    }

    /// Total simulated time.
    pub fn end_time(&self) -> f64 {
        self.time.tau * self.time.steps as f64
    }
}

// ---- presets -----------------------------------------------------------

pub const PRESETS: [&str; 3] = ["rigid-rotation", "creep", "sma-cycle"];

/// Preset by CLI name with its default parameters.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    match name {
        "rigid-rotation" => Some(preset_rigid_rotation(DissipationVariant::V1)),
        "creep" => Some(preset_creep(0.5)),
        "sma-cycle" => Some(preset_sma_cycle(0.001)),
        _ => None,
    }
}

/// Annulus rotating rigidly through one revolution with zero loads.
pub fn preset_rigid_rotation(variant: DissipationVariant) -> ExperimentConfig {
    let heat = match variant {
        DissipationVariant::V1 => HeatSourceVariant::Vh1,
        DissipationVariant::V2 => HeatSourceVariant::Vh2,
    };
    let steps = 80;
    let mut sides = BTreeMap::new();
    sides.insert(Side::Inner, SideBc { mech: MechBc::Dirichlet, heat: HeatBc::Dirichlet });
    sides.insert(Side::Outer, SideBc { mech: MechBc::Dirichlet, heat: HeatBc::Robin });
    ExperimentConfig {
        which: ExperimentKind::RigidRotation,
        mesh: MeshSpec::Annulus { r_in: 1.0, r_out: 2.0, n_radial: 8, n_circum: 32 },
        material: MaterialModel::neo_hookean(1.0, 1.0, 1.0, 1.0, 0.05).with_variants(variant, heat),
        loads: LoadProgram {
            motion: DirichletMotion::RigidRotation { rate: 1.0, center: [0.0, 0.0] },
            ..LoadProgram::constant(ROOM_TEMPERATURE)
        },
        time: TimeSpec { tau: 2.0 * PI / steps as f64, steps },
        initial: InitialSpec { theta0: ROOM_TEMPERATURE },
        boundary: BoundarySpec { sides, pins: vec![] },
        probes: vec![
            Observable::TempAtProbe { at: [1.5, 0.0] },
            Observable::DissipationPerStep,
            Observable::InternalEnergyTotal,
        ],
        solver: SolverSpec::default(),
        output: OutputSpec::default(),
    }
}

/// Constant axial traction on the right edge of a bar held at its left edge.
pub const CREEP_TRACTION: f64 = 1.5e-3;
pub const CREEP_TAU: f64 = 2.0;
pub const CREEP_STEPS: usize = 200;

/// Creep test on a `1 × 0.25` bar with `λ = μ` and `C₁/k = 5`.
///
/// The left edge is a roller (horizontal component held) with the lower-left
/// corner pinned, which admits the homogeneous uniaxial state exactly.
pub fn preset_creep(nu_over_mu: f64) -> ExperimentConfig {
    let mu = 1.0;
    let c1 = 1.0;
    let mut sides = BTreeMap::new();
    sides.insert(Side::Left, SideBc { mech: MechBc::DirichletX, heat: HeatBc::Dirichlet });
    sides.insert(Side::Right, SideBc { mech: MechBc::Traction, heat: HeatBc::Robin });
    sides.insert(Side::Top, SideBc { mech: MechBc::Free, heat: HeatBc::Robin });
    sides.insert(Side::Bottom, SideBc { mech: MechBc::Free, heat: HeatBc::Robin });
    ExperimentConfig {
        which: ExperimentKind::Creep,
        mesh: MeshSpec::Rectangle { length: 1.0, height: 0.25, nx: 8, ny: 2 },
        material: MaterialModel::neo_hookean(mu, mu, c1, nu_over_mu * mu, c1 / 5.0),
        loads: LoadProgram {
            traction: [Curve::Constant(CREEP_TRACTION), Curve::Constant(0.0)],
            ..LoadProgram::constant(ROOM_TEMPERATURE)
        },
        time: TimeSpec { tau: CREEP_TAU, steps: CREEP_STEPS },
        initial: InitialSpec { theta0: ROOM_TEMPERATURE },
        boundary: BoundarySpec { sides, pins: vec![Pin { at: [0.0, 0.0], components: vec![1] }] },
        probes: vec![
            Observable::AxialStrain { at: [1.0, 0.0], component: [0, 0] },
            Observable::TempAtProbe { at: [1.0, 0.125] },
            Observable::DissipationPerStep,
            Observable::InternalEnergyTotal,
        ],
        solver: SolverSpec::default(),
        output: OutputSpec::default(),
    }
}

pub const SMA_EPS: f64 = 0.01;
pub const SMA_AMPLITUDE: f64 = 3e-2;
pub const SMA_TAU: f64 = 20.0;
/// Small capacity so the adiabatic temperature swing is well above round-off.
pub const SMA_C1: f64 = 1e-3;
pub const SMA_PERIOD_STEPS: usize = 80;
pub const SMA_LENGTH: f64 = 1.0;
pub const SMA_HEIGHT: f64 = 0.25;

/// Clamped–clamped SMA strip under one cycle of vertical traction on its top edge.
///
/// `C₁` is chosen so that the heat capacity at `(Id, 293 K)` equals ten times
/// the conductivity.
pub fn preset_sma_cycle(nu_over_mu: f64) -> ExperimentConfig {
    let mu = 1.0;
    let c1 = SMA_C1;
    let probe_model = MaterialModel::sma(mu, mu, c1, SMA_EPS, nu_over_mu * mu, 1.0);
    let capacity = probe_model.heat_capacity(&Mat3::identity(), ROOM_TEMPERATURE).expect("identity is admissible");
    let mut sides = BTreeMap::new();
    sides.insert(Side::Left, SideBc { mech: MechBc::Dirichlet, heat: HeatBc::Dirichlet });
    sides.insert(Side::Right, SideBc { mech: MechBc::Dirichlet, heat: HeatBc::Dirichlet });
    sides.insert(Side::Top, SideBc { mech: MechBc::Traction, heat: HeatBc::Robin });
    sides.insert(Side::Bottom, SideBc { mech: MechBc::Free, heat: HeatBc::Robin });
    let probe = [SMA_LENGTH / 2.0, 0.0];
    ExperimentConfig {
        which: ExperimentKind::SmaCycle,
        mesh: MeshSpec::Rectangle { length: SMA_LENGTH, height: SMA_HEIGHT, nx: 16, ny: 4 },
        material: MaterialModel::sma(mu, mu, c1, SMA_EPS, nu_over_mu * mu, capacity / 10.0),
        loads: LoadProgram {
            traction: [Curve::Constant(0.0), cyclic_traction_curve(SMA_AMPLITUDE, SMA_TAU, SMA_PERIOD_STEPS)],
            ..LoadProgram::constant(ROOM_TEMPERATURE)
        },
        time: TimeSpec { tau: SMA_TAU, steps: SMA_PERIOD_STEPS },
        initial: InitialSpec { theta0: ROOM_TEMPERATURE },
        boundary: BoundarySpec { sides, pins: vec![] },
        probes: vec![
            Observable::StressStrainPair { at: probe, component: [1, 1], traction_component: 1 },
            Observable::TempAtProbe { at: probe },
            Observable::PhaseField,
        ],
        solver: SolverSpec::default(),
        output: OutputSpec { snapshot_steps: vec![SMA_PERIOD_STEPS / 4, 3 * SMA_PERIOD_STEPS / 4] },
    }
}

/// Vertical traction of the load cycle: up to `amplitude` over the first
/// quarter, down to `-amplitude` by three quarters, back to zero at the end.
pub fn cyclic_traction(t: f64, amplitude: f64, step_length: f64, period_steps: usize) -> [f64; 2] {
    let period = step_length * period_steps as f64;
    let s = (t / period).rem_euclid(1.0);
    let v = if s <= 0.25 {
        4.0 * s
    } else if s <= 0.75 {
        1.0 - 4.0 * (s - 0.25)
    } else {
        -1.0 + 4.0 * (s - 0.75)
    };
    [0.0, amplitude * v]
}

/// One load cycle of [`cyclic_traction`] as a curve.
pub fn cyclic_traction_curve(amplitude: f64, step_length: f64, period_steps: usize) -> Curve {
    let p = step_length * period_steps as f64;
    Curve::PiecewiseLinear(vec![[0.0, 0.0], [0.25 * p, amplitude], [0.75 * p, -amplitude], [p, 0.0]])
}

// ---- observables -------------------------------------------------------

/// `|C - C₋|² / (|C - C₋|² + |C - C₊|²)` with `C± = G±εᵀ G±ε`; `½` when both vanish.
pub fn phase_indicator(f: &Mat3, eps: f64) -> f64 {
    let c = f.transpose() * f;
    let well = |e: f64| {
        let g = shear_well(e);
        g.transpose() * g
    };
    let minus = (c - well(-eps)).norm_squared();
    let plus = (c - well(eps)).norm_squared();
    if minus + plus == 0.0 {
        0.5
    } else {
        minus / (minus + plus)
    }
}

/// Phase indicator at every quadrature point, element-major.
pub fn phase_field(disc: &Discretization, y: &[f64], eps: f64) -> Vec<[f64; 4]> {
    disc.mesh
        .elements
        .iter()
        .zip(&disc.quad)
        .map(|(el, qps)| std::array::from_fn(|q| phase_indicator(&lift_plane_strain(&deformation_gradient(y, el, &qps[q])), eps)))
        .collect()
}

/// Quadrature-averaged phase indicator and `det F` per element.
pub fn element_fields(disc: &Discretization, y: &[f64], eps: f64) -> (Vec<f64>, Vec<f64>) {
    let mut phase = Vec::with_capacity(disc.mesh.num_elements());
    let mut det = Vec::with_capacity(disc.mesh.num_elements());
    for (el, qps) in disc.mesh.elements.iter().zip(&disc.quad) {
        let mut p = 0.0;
        let mut d = 0.0;
        for qp in qps {
            let f = deformation_gradient(y, el, qp);
            p += phase_indicator(&lift_plane_strain(&f), eps);
            d += f.determinant();
        }
        phase.push(p / 4.0);
        det.push(d / 4.0);
    }
    (phase, det)
}

/// `F_ij - δ_ij` averaged over quadrature points of the elements around `node`.
pub fn nodal_strain(disc: &Discretization, y: &[f64], node: usize, component: [usize; 2]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0;
    for (el, qps) in disc.mesh.elements.iter().zip(&disc.quad) {
        if el.contains(&node) {
            for qp in qps {
                let f = deformation_gradient(y, el, qp);
                let delta = if component[0] == component[1] { 1.0 } else { 0.0 };
                sum += f[(component[0], component[1])] - delta;
                count += 1;
            }
        }
    }
    sum / count.max(1) as f64
}

/// Column names for one observable.
pub fn observable_columns(obs: &Observable, mesh: &Mesh) -> Vec<String> {
    let ij = |c: [usize; 2]| format!("{}{}", c[0] + 1, c[1] + 1);
    match obs {
        Observable::TempAtProbe { at } => vec![format!("temperature_n{}", mesh.nearest_node(*at))],
        Observable::AxialStrain { at, component } => vec![format!("strain{}_n{}", ij(*component), mesh.nearest_node(*at))],
        Observable::StressStrainPair { at, component, traction_component } => vec![
            format!("traction{}", traction_component + 1),
            format!("strain{}_n{}", ij(*component), mesh.nearest_node(*at)),
        ],
        Observable::DissipationPerStep => vec!["dissipation".into()],
        Observable::PhaseField => vec!["phase_min".into(), "phase_mean".into(), "phase_max".into()],
        Observable::InternalEnergyTotal => vec!["internal_energy".into()],
    }
}

/// Values of one observable at a completed step.
pub fn evaluate_observable(obs: &Observable, disc: &Discretization, model: &MaterialModel, state: &State, record: &StepRecord) -> Vec<f64> {
    match obs {
        Observable::TempAtProbe { at } => vec![state.theta[disc.mesh.nearest_node(*at)]],
        Observable::AxialStrain { at, component } => vec![nodal_strain(disc, &state.y, disc.mesh.nearest_node(*at), *component)],
        Observable::StressStrainPair { at, component, traction_component } => vec![
            record.traction[*traction_component],
            nodal_strain(disc, &state.y, disc.mesh.nearest_node(*at), *component),
        ],
        Observable::DissipationPerStep => vec![record.mech.dissipation],
        Observable::PhaseField => {
            let values: Vec<f64> = phase_field(disc, &state.y, model.eps).into_iter().flatten().collect();
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            vec![min, mean, max]
        }
        Observable::InternalEnergyTotal => vec![record.thermal.internal_energy],
    }
}

/// Per-step pairs `(𝒟_v1, 𝒟_v2)` of two rigid-rotation runs on the same time grid.
pub fn dissipation_gap_probe(v1: &Trajectory, v2: &Trajectory) -> Result<Vec<(f64, f64)>> {
    if v1.records.len() != v2.records.len() {
        return Err(Error::MismatchedConfigs(format!("{} vs {} steps", v1.records.len(), v2.records.len())));
    }
    v1.records
        .iter()
        .zip(&v2.records)
        .map(|(a, b)| {
            if (a.time - b.time).abs() > 1e-12 * a.time.abs().max(1.0) {
                Err(Error::MismatchedConfigs(format!("time grids differ at step {} ({} vs {})", a.step, a.time, b.time)))
            } else {
                Ok((a.mech.dissipation, b.mech.dissipation))
            }
        })
        .collect()
}

/// Area enclosed by a closed polyline of `(strain, stress)` points (trapezoid rule).
pub fn hysteresis_area(points: &[(f64, f64)]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..points.len() {
        let (x0, y0) = points[i];
        let (x1, y1) = points[(i + 1) % points.len()];
        s += (x1 - x0) * (y1 + y0) / 2.0;
    }
    s.abs()
}

/// First time at which `series` reaches `fraction` of its final value.
pub fn time_to_fraction(times: &[f64], series: &[f64], fraction: f64) -> Option<f64> {
    let last = *series.last()?;
    times.iter().zip(series).find(|(_, &v)| v >= fraction * last).map(|(&t, _)| t)
}
