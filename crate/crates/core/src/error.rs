use std::path::PathBuf;

use thiserror::Error;

use crate::timeloop::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not invertible with positive orientation (det = {det:e})")]
    NonInvertible { det: f64 },
    #[error("matrix is not symmetric positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotSpd { min_eigenvalue: f64 },
    #[error("matrix is not a rotation (|QᵀQ - Id| = {orthogonality_defect:e}, det = {det})")]
    NotRotation { orthogonality_defect: f64, det: f64 },

    #[error("non-positive deformation determinant {det:e}{}", element.map(|e| format!(" in element {e}")).unwrap_or_default())]
    NonPositiveDeterminant { det: f64, element: Option<usize> },
    #[error("temperature {theta:e} K is below the floor for temperature derivatives")]
    NonPositiveTemperature { theta: f64 },
    #[error("heat capacity {capacity:e} is not positive")]
    NonPositiveCapacity { capacity: f64 },
    #[error("negative nodal temperature {theta:e} at node {node}")]
    NegativeTemperatureInput { node: usize, theta: f64 },

    #[error("invalid mesh dimensions: {0}")]
    InvalidDimensions(String),
    #[error("no boundary edge carries tag {0:?}")]
    UnknownTag(crate::mesh::BoundaryTag),
    #[error("element {element} has non-positive Jacobian {det_j:e}")]
    DegenerateElement { element: usize, det_j: f64 },
    #[error("linear system is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("line search failed after {iterations} Newton iterations (residual {residual:e})")]
    LineSearchFailed { iterations: usize, residual: f64, last_iterate: Box<Vec<f64>> },
    #[error("no convergence within {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64, last_iterate: Box<Vec<f64>> },
    #[error("could not construct an orientation-preserving initial guess")]
    InfeasibleInit,

    #[error("load curve evaluated at t = {t} outside its domain [{start}, {end}]")]
    CurveUndefined { t: f64, start: f64, end: f64 },
    #[error("time step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
        partial: Box<Trajectory>,
    },
    #[error("mismatched experiment configurations: {0}")]
    MismatchedConfigs(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("unknown preset or missing file: {}", .0.display())]
    NotFound(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
