//! Element machinery and global assembly of the mechanical and thermal step functionals.

pub mod mechanical;
pub mod quadrature;
pub mod sparse;
pub mod thermal;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

pub use mechanical::{MechContext, MechEnergy};
pub use quadrature::{deformation_gradient, gauss_2x2, QuadraturePoint};
pub use sparse::{SkylineCholesky, SkylineMatrix, SparseSystem};
pub use thermal::{ThermalContext, ThermalTotals};

/// Mesh plus precomputed quadrature, shared by every step.
#[derive(Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub quad: Vec<[QuadraturePoint; 4]>,
    pub area: f64,
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Discretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Discretization")
            .field("nodes", &self.mesh.num_nodes())
            .field("elements", &self.mesh.num_elements())
            .field("area", &self.area)
            .finish()
    }
}

impl Discretization {
    pub fn new(mesh: Mesh) -> Result<Self> {
        let quad = (0..mesh.num_elements()).map(|e| gauss_2x2(&mesh, e)).collect::<Result<Vec<_>>>()?;
        let area = quad.iter().flatten().map(QuadraturePoint::jxw).sum();
        Ok(Discretization { mesh, quad, area, pool: None })
    }

    /// Runs element loops on a dedicated pool of `workers` threads (`0` means the global pool).
    pub fn with_workers(mut self, workers: usize) -> Result<Self> {
        self.pool = if workers == 0 {
            None
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
            Some(Arc::new(pool))
        };
        Ok(self)
    }

    /// Maps `f` over elements in parallel; results come back in element order,
    /// so any later sequential reduction is independent of the worker count.
    pub fn map_elements<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        let n = self.mesh.num_elements();
        let run = || (0..n).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
        match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }
}

/// Partition of global unknowns into free and constrained ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    free_index: Vec<Option<usize>>,
    free: Vec<usize>,
    fixed: Vec<usize>,
}

impl DofMap {
    pub fn new(total: usize, fixed: &[usize]) -> Self {
        let mut is_fixed = vec![false; total];
        for &d in fixed {
            is_fixed[d] = true;
        }
        let mut free_index = vec![None; total];
        let mut free = Vec::new();
        for d in 0..total {
            if !is_fixed[d] {
                free_index[d] = Some(free.len());
                free.push(d);
            }
        }
        let fixed = (0..total).filter(|&d| is_fixed[d]).collect();
        DofMap { free_index, free, fixed }
    }

    pub fn total(&self) -> usize {
        self.free_index.len()
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }

    /// Adds `alpha · step` (over free unknowns) to a full vector.
    pub fn axpy_free(&self, full: &mut [f64], alpha: f64, step: &[f64]) {
        for (k, &d) in self.free.iter().enumerate() {
            full[d] += alpha * step[k];
        }
    }

    /// Skyline pattern coupling every pair of free unknowns within an element.
    ///
    /// `per_node` is the number of unknowns attached to each node.
    pub fn pattern(&self, mesh: &Mesh, per_node: usize) -> SkylineMatrix {
        let mut first: Vec<usize> = (0..self.num_free()).collect();
        for el in &mesh.elements {
            let dofs: Vec<usize> = el
                .iter()
                .flat_map(|&n| (0..per_node).map(move |c| per_node * n + c))
                .filter_map(|d| self.free_index[d])
                .collect();
            if let Some(&lo) = dofs.iter().min() {
                for &d in &dofs {
                    first[d] = first[d].min(lo);
                }
            }
        }
        SkylineMatrix::from_pairs(self.num_free(), first.iter().enumerate().map(|(i, &f)| (i, f)))
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
