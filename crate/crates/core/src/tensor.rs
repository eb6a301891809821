//! Small dense matrix algebra for 2×2 and 3×3 kinematics.
//!
//! Deformation gradients, Cauchy–Green strains and stresses are carried as
//! [`nalgebra`] fixed-size matrices. This module adds the handful of
//! operations the model needs on top: symmetric eigendecomposition by Jacobi
//! rotations, SPD square roots, polar decomposition, the isotropic viscosity
//! tensor and the plane-strain lift.

use nalgebra::{Matrix2, Matrix3, SMatrix, SVector};

use crate::error::{Error, Result};

pub type Mat2 = Matrix2<f64>;
pub type Mat3 = Matrix3<f64>;
pub type SquareMatrix<const D: usize> = SMatrix<f64, D, D>;

/// Relative symmetry tolerance accepted by [`SpdMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue, relative to the trace.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det<const D: usize>(m: &SquareMatrix<D>) -> f64 {
    let mut a = *m;
    let mut d = 1.0;
    for k in 0..D {
        let p = (k..D).max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs())).unwrap_or(k);
        if a[(p, k)] == 0.0 {
            return 0.0;
        }
        if p != k {
            a.swap_rows(p, k);
            d = -d;
        }
        d *= a[(k, k)];
        for i in k + 1..D {
            let l = a[(i, k)] / a[(k, k)];
            for j in k..D {
                a[(i, j)] -= l * a[(k, j)];
            }
        }
    }
    d
}

/// Symmetric positive definite matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdMatrix<const D: usize>(SquareMatrix<D>);

impl<const D: usize> SpdMatrix<D> {
    pub fn new(m: SquareMatrix<D>) -> Result<Self> {
        let scale = m.norm();
        if (m - m.transpose()).norm() > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NotSpd { min_eigenvalue: f64::NAN });
        }
        let (values, _) = symmetric_eigen(&sym(&m));
        let min = values[0];
        if !(min > EIGEN_FLOOR * m.trace()) {
            return Err(Error::NotSpd { min_eigenvalue: min });
        }
        Ok(SpdMatrix(sym(&m)))
    }

    pub(crate) fn new_unchecked(m: SquareMatrix<D>) -> Self {
        SpdMatrix(m)
    }

    pub fn matrix(&self) -> &SquareMatrix<D> {
        &self.0
    }

    pub fn into_inner(self) -> SquareMatrix<D> {
        self.0
    }

    /// Eigenvalues in ascending order and the matching orthonormal eigenvectors (columns).
    pub fn eigen(&self) -> (SVector<f64, D>, SquareMatrix<D>) {
        symmetric_eigen(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().0[0]
    }
}

/// Proper rotation, `QᵀQ = Id` and `det Q = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation<const D: usize>(SquareMatrix<D>);

impl<const D: usize> Rotation<D> {
    pub fn new(q: SquareMatrix<D>) -> Result<Self> {
        let orth = (q.transpose() * q - SquareMatrix::<D>::identity()).norm();
        let det = det(&q);
        if orth > 1e-10 || (det - 1.0).abs() > 1e-10 {
            return Err(Error::NotRotation { orthogonality_defect: orth, det });
        }
        Ok(Rotation(q))
    }

    pub fn matrix(&self) -> &SquareMatrix<D> {
        &self.0
    }

    pub fn into_inner(self) -> SquareMatrix<D> {
        self.0
    }
}

impl Rotation<2> {
    pub fn planar(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation(Mat2::new(c, -s, s, c))
    }
}

impl Rotation<3> {
    /// Rotation about the `e₃` axis.
    pub fn about_e3(angle: f64) -> Self {
        Rotation(lift_plane_strain(Rotation::<2>::planar(angle).matrix()))
    }
}

pub fn sym<const D: usize>(a: &SquareMatrix<D>) -> SquareMatrix<D> {
    (a + a.transpose()) * 0.5
}

/// Frobenius inner product `A : B`.
pub fn ddot<const D: usize>(a: &SquareMatrix<D>, b: &SquareMatrix<D>) -> f64 {
    a.component_mul(b).sum()
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted ascending and orthonormal eigenvectors as
/// columns. For `D = 2` a single rotation is exact.
pub fn symmetric_eigen<const D: usize>(m: &SquareMatrix<D>) -> (SVector<f64, D>, SquareMatrix<D>) {
    let mut a = sym(m);
    let mut v = SquareMatrix::<D>::identity();
    let scale = a.norm();
    if scale == 0.0 {
        return (SVector::zeros(), v);
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..D {
            for q in (p + 1)..D {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..D {
            for q in (p + 1)..D {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A ← JᵀAJ, V ← VJ
                for k in 0..D {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..D {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..D {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..D).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = SVector::<f64, D>::from_fn(|i, _| a[(order[i], order[i])]);
    let vectors = SquareMatrix::<D>::from_fn(|r, c| v[(r, order[c])]);
    (values, vectors)
}

fn spectral_map<const D: usize>(c: &SpdMatrix<D>, f: impl Fn(f64) -> f64) -> SquareMatrix<D> {
    let (values, vectors) = c.eigen();
    let mapped = SVector::<f64, D>::from_fn(|i, _| f(values[i]));
    sym(&(vectors * SquareMatrix::<D>::from_diagonal(&mapped) * vectors.transpose()))
}

/// Unique SPD square root.
pub fn spd_sqrt<const D: usize>(c: &SpdMatrix<D>) -> SpdMatrix<D> {
    SpdMatrix(spectral_map(c, f64::sqrt))
}

/// `F = Q·U` with `Q` a rotation and `U = √(FᵀF)`.
pub fn polar_decompose<const D: usize>(f: &SquareMatrix<D>) -> Result<(Rotation<D>, SpdMatrix<D>)> {
    let det = det(f);
    let tol = 1e-14 * f.norm().powi(D as i32);
    if !(det > tol) {
        return Err(Error::NonInvertible { det });
    }
    let c = SpdMatrix::new_unchecked(sym(&(f.transpose() * f)));
    let u = spd_sqrt(&c);
    let u_inv = spectral_map(&c, |l| 1.0 / l.sqrt());
    Ok((Rotation(f * u_inv), u))
}

/// Action of the isotropic viscosity tensor `V_ijkl = ν/2 (δ_ik δ_jl + δ_il δ_jk)`.
pub fn visc_apply<const D: usize>(nu: f64, cdot: &SquareMatrix<D>) -> SquareMatrix<D> {
    sym(cdot) * nu
}

/// Bilinear form `V[A, B] = V A : B`.
pub fn visc_form<const D: usize>(nu: f64, a: &SquareMatrix<D>, b: &SquareMatrix<D>) -> f64 {
    ddot(&visc_apply(nu, a), b)
}

/// Block embedding `[[F₂, 0], [0, 1]]`.
pub fn lift_plane_strain(f2: &Mat2) -> Mat3 {
    Mat3::new(f2[(0, 0)], f2[(0, 1)], 0.0, f2[(1, 0)], f2[(1, 1)], 0.0, 0.0, 0.0, 1.0)
}

/// In-plane 2×2 block of a 3×3 matrix.
pub fn plane_block(m: &Mat3) -> Mat2 {
    m.fixed_view::<2, 2>(0, 0).into_owned()
}
