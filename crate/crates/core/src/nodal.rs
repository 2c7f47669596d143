//! Dense nodal admittance system with a cached LU factorization.

use nalgebra::{ComplexField, DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::network::GROUND;

/// `Y v = i` with ground eliminated: row/column `k` is node `k + 1`.
#[derive(Debug, Clone)]
pub struct NodalSystem<T: ComplexField> {
    matrix: DMatrix<T>,
    rhs: DVector<T>,
    lu: Option<LU<T, Dyn, Dyn>>,
}

impl<T: ComplexField<RealField = f64> + Copy> NodalSystem<T> {
    /// `node_count` includes ground.
    pub fn new(node_count: usize) -> Self {
        let n = node_count.saturating_sub(1);
        Self { matrix: DMatrix::zeros(n, n), rhs: DVector::zeros(n), lu: None }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn is_factorized(&self) -> bool {
        self.lu.is_some()
    }

    /// Stamps an admittance `y` between nodes `a` and `b`.
    pub fn stamp_admittance(&mut self, a: usize, b: usize, y: T) {
        self.lu = None;
        if a != GROUND {
            self.matrix[(a - 1, a - 1)] += y;
        }
        if b != GROUND {
            self.matrix[(b - 1, b - 1)] += y;
        }
        if a != GROUND && b != GROUND {
            self.matrix[(a - 1, b - 1)] -= y;
            self.matrix[(b - 1, a - 1)] -= y;
        }
    }

    pub fn clear_rhs(&mut self) {
        self.rhs.fill(T::zero());
    }

    /// Adds a current flowing into `node`.
    pub fn inject(&mut self, node: usize, current: T) {
        if node != GROUND {
            self.rhs[node - 1] += current;
        }
    }

    pub fn rhs(&self) -> &DVector<T> {
        &self.rhs
    }

    pub fn factorize(&mut self) -> Result<()> {
        let lu = self.matrix.clone().lu();
        let u = lu.u();
        let diag: Vec<f64> = u.diagonal().iter().map(|d| d.modulus()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if diag.is_empty() || !(min > 64.0 * f64::EPSILON * max) {
            return Err(Error::SingularMatrix);
        }
        self.lu = Some(lu);
        Ok(())
    }

    /// Solves with the current right-hand side. Returns node voltages with
    /// ground prepended (index = node number).
    pub fn solve(&mut self) -> Result<Vec<T>> {
        if self.lu.is_none() {
            self.factorize()?;
        }
        let lu = self.lu.as_ref().expect("factorized above");
        let x = lu.solve(&self.rhs).ok_or(Error::SingularMatrix)?;
        let mut v = Vec::with_capacity(x.len() + 1);
        v.push(T::zero());
        v.extend(x.iter().copied());
        Ok(v)
    }
}
