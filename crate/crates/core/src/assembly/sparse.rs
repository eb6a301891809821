//! Symmetric skyline (variable band) storage with an in-place Cholesky factorization.

use crate::error::{Error, Result};

/// Lower triangle stored row by row from the first structural nonzero to the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SkylineMatrix {
    first: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineMatrix {
    /// Pattern from structural pairs `(i, j)`; the diagonal is always present.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut first: Vec<usize> = (0..n).collect();
        for (i, j) in pairs {
            let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
            first[hi] = first[hi].min(lo);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            offsets.push(total);
            total += i - f + 1;
        }
        offsets.push(total);
        SkylineMatrix { first, offsets, data: vec![0.0; total] }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Stored entries (the profile size).
    pub fn stored(&self) -> usize {
        self.data.len()
    }

    pub fn zero(&mut self) {
        self.data.fill(0.0);
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if lo < self.first[hi] {
            None
        } else {
            Some(self.offsets[hi] + lo - self.first[hi])
        }
    }

    pub fn in_profile(&self, i: usize, j: usize) -> bool {
        self.slot(i, j).is_some()
    }

    /// Adds `v` to the symmetric pair `(i, j)`, `(j, i)`.
    ///
    /// Panics if the entry lies outside the profile.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) outside the skyline profile"));
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[self.offsets[i + 1] - 1]).collect()
    }

    pub fn add_to_diagonal(&mut self, shift: f64) {
        for i in 0..self.dim() {
            self.data[self.offsets[i + 1] - 1] += shift;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = &self.data[self.offsets[i]..self.offsets[i + 1]];
            let f = self.first[i];
            for (k, &v) in row.iter().enumerate() {
                let j = f + k;
                y[i] += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    /// `A = L Lᵀ`; fails on the first pivot not exceeding `1e-14` times its diagonal entry.
    pub fn cholesky(&self) -> Result<SkylineCholesky> {
        let n = self.dim();
        let mut l = self.data.clone();
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offsets[i];
            for j in fi..i {
                let fj = self.first[j];
                let oj = self.offsets[j];
                let start = fi.max(fj);
                let mut s = l[oi + j - fi];
                for k in start..j {
                    s -= l[oi + k - fi] * l[oj + k - fj];
                }
                let ljj = l[oj + j - fj];
                l[oi + j - fi] = s / ljj;
            }
            let diag_orig = l[oi + i - fi];
            let mut d = diag_orig;
            for k in fi..i {
                let v = l[oi + k - fi];
                d -= v * v;
            }
            if !(d > 1e-14 * diag_orig.abs()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { row: i, pivot: d });
            }
            l[oi + i - fi] = d.sqrt();
        }
        Ok(SkylineCholesky { first: self.first.clone(), offsets: self.offsets.clone(), data: l })
    }
}

#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    first: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.first.len();
        let mut x = b.to_vec();
        for i in 0..n {
            let f = self.first[i];
            let row = &self.data[self.offsets[i]..self.offsets[i + 1]];
            let mut s = x[i];
            for k in f..i {
                s -= row[k - f] * x[k];
            }
            x[i] = s / row[i - f];
        }
        for i in (0..n).rev() {
            let f = self.first[i];
            let row = &self.data[self.offsets[i]..self.offsets[i + 1]];
            x[i] /= row[i - f];
            let xi = x[i];
            for k in f..i {
                x[k] -= row[k - f] * xi;
            }
        }
        x
    }
}

/// A matrix together with a right-hand side, both over free unknowns.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: SkylineMatrix,
    pub rhs: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, rng: &mut impl Rng) -> (SkylineMatrix, DMatrix<f64>) {
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in 0..=i {
                if i - j <= 3 || rng.gen_bool(0.05) {
                    pairs.push((i, j));
                }
            }
        }
        let mut sky = SkylineMatrix::from_pairs(n, pairs.iter().copied());
        let mut dense = DMatrix::zeros(n, n);
        for &(i, j) in &pairs {
            let v = if i == j { 10.0 + rng.gen_range(0.0..1.0) } else { rng.gen_range(-1.0..1.0) };
            sky.add(i, j, v);
            dense[(i, j)] += v;
            if i != j {
                dense[(j, i)] += v;
            }
        }
        (sky, dense)
    }

    #[test]
    fn matvec_and_solve_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 7, 40] {
            let (sky, dense) = random_banded(n, &mut rng);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = sky.matvec(&x);
            let yd = &dense * DVector::from_vec(x.clone());
            for i in 0..n {
                assert!((y[i] - yd[i]).abs() < 1e-12);
            }
            let sol = sky.cholesky().unwrap().solve(&y);
            for i in 0..n {
                assert!((sol[i] - x[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let mut m = SkylineMatrix::from_pairs(2, [(1, 0)]);
        m.add(0, 0, 1.0);
        m.add(1, 1, 1.0);
        m.add(1, 0, 2.0);
        assert!(matches!(m.cholesky(), Err(Error::NotPositiveDefinite { row: 1, .. })));
        m.add_to_diagonal(5.0);
        assert!(m.cholesky().is_ok());
        assert_eq!(m.diagonal(), vec![6.0, 6.0]);
        assert_eq!(m.get(0, 1), 2.0);
    }

    #[test]
    fn profile_contains_only_declared_rows() {
        let m = SkylineMatrix::from_pairs(4, [(3, 1)]);
        assert!(m.in_profile(3, 2));
        assert!(!m.in_profile(3, 0));
        assert!(!m.in_profile(2, 1));
        assert_eq!(m.stored(), 1 + 1 + 1 + 3);
    }
}
