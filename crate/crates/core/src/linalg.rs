//! Sparse storage and the two solvers the time steppers need: a reordered
//! sparse Cholesky factorization and conjugate gradients in a weighted
//! inner product.

use nalgebra::DMatrixViewMut;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows below this size are multiplied sequentially.
const PAR_THRESHOLD: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix from per-row entry lists. Duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .zip(&self.vals[r])
            .map(|(&j, &v)| v * x[j])
            .sum()
    }

    /// `y = M x`. Each row is summed in a fixed order, so the result does not
    /// depend on the thread count.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        if self.n < PAR_THRESHOLD {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        } else {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = self.row_dot(i, x));
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix,
/// applied after a caller-supplied symmetric permutation.
pub struct Cholesky {
    factor: CscCholesky<f64>,
    /// `position[i]` is the row of unknown `i` in the permuted system.
    position: Vec<usize>,
}

impl Cholesky {
    /// `order` lists the unknowns in elimination order.
    pub fn new(matrix: &CsrMatrix, order: &[usize]) -> Result<Self> {
        let n = matrix.dim();
        if order.len() != n {
            return Err(Error::Solver(format!("ordering has {} entries for {n} unknowns", order.len())));
        }
        let mut position = vec![usize::MAX; n];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        if position.contains(&usize::MAX) {
            return Err(Error::Solver("ordering is not a permutation".into()));
        }
        let mut coo = CooMatrix::new(n, n);
        for i in 0..n {
            for (j, v) in matrix.row(i) {
                coo.push(position[i], position[j], v);
            }
        }
        let csc = CscMatrix::from(&coo);
        let factor = CscCholesky::factor(&csc).map_err(|e| Error::Solver(format!("{e:?}")))?;
        Ok(Self { factor, position })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut permuted = vec![0.0; n];
        for (i, &bi) in b.iter().enumerate() {
            permuted[self.position[i]] = bi;
        }
        self.factor
            .solve_mut(DMatrixViewMut::from_slice(&mut permuted, n, 1));
        (0..n).map(|i| permuted[self.position[i]]).collect()
    }
}

/// Weighted inner product `Σ w_i x_i y_i`, summed sequentially.
pub fn wdot(w: &[f64], x: &[f64], y: &[f64]) -> f64 {
    w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum()
}

/// Conjugate gradients for an operator that is self-adjoint and positive
/// definite in the inner product weighted by `w`. Starts from `x = 0`, so
/// every iterate lies in the Krylov space of `b`.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    w: &[f64],
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = wdot(w, b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = wdot(w, &r, &r);
    for it in 0..max_iter {
        if rr.sqrt() <= rtol * b_norm {
            return Ok((x, it));
        }
        apply(&p, &mut ap);
        let pap = wdot(w, &p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver(format!("operator not positive definite (pAp = {pap})")));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = wdot(w, &r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rr.sqrt() <= 1e3 * rtol * b_norm {
        // stagnated at the rounding floor
        return Ok((x, max_iter));
    }
    Err(Error::Solver(format!(
        "conjugate gradients did not converge: residual {:.3e} of {:.3e}",
        rr.sqrt(),
        b_norm
    )))
}
