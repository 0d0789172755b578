//! Sparse direct solve of the free-free tangent system.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Mat, Side};

use super::assembly::SparsePattern;
use crate::error::{Error, Result};

/// Cholesky factorisation with cached symbolic analysis; falls back to LU
/// when the tangent is not positive definite.
pub struct LinearSolver {
    symbolic: SymbolicSparseColMat<usize>,
    llt: Option<SymbolicLlt<usize>>,
    lu: Option<SymbolicLu<usize>>,
}

impl LinearSolver {
    pub fn new(pattern: &SparsePattern) -> Result<Self> {
        let n = pattern.dim();
        let symbolic = SymbolicSparseColMat::new_checked(
            n,
            n,
            pattern.col_ptr().to_vec(),
            None,
            pattern.row_idx().to_vec(),
        );
        Ok(LinearSolver {
            symbolic,
            llt: None,
            lu: None,
        })
    }

    pub fn solve(&mut self, values: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.symbolic.nrows();
        if rhs.len() != n || values.len() != self.symbolic.row_idx().len() {
            return Err(Error::LinearSolve("dimension mismatch".into()));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let mat = SparseColMatRef::new(self.symbolic.as_ref(), values);
        let mut x = Mat::from_fn(n, 1, |i, _| rhs[i]);
        if self.llt.is_none() {
            self.llt = Some(
                SymbolicLlt::try_new(self.symbolic.as_ref(), Side::Lower)
                    .map_err(|e| Error::LinearSolve(format!("symbolic Cholesky: {e:?}")))?,
            );
        }
        let sym = self.llt.clone().expect("set above");
        match Llt::try_new_with_symbolic(sym, mat, Side::Lower) {
            Ok(f) => f.solve_in_place(x.as_mut()),
            Err(_) => {
                if self.lu.is_none() {
                    self.lu = Some(
                        SymbolicLu::try_new(self.symbolic.as_ref())
                            .map_err(|e| Error::LinearSolve(format!("symbolic LU: {e:?}")))?,
                    );
                }
                let sym = self.lu.clone().expect("set above");
                let f = Lu::try_new_with_symbolic(sym, mat)
                    .map_err(|e| Error::LinearSolve(format!("LU: {e:?}")))?;
                f.solve_in_place(x.as_mut());
            }
        }
        let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::LinearSolve("non-finite solution".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::DofMap;
    use crate::mesh::build_box;

    fn pattern() -> SparsePattern {
        let mesh = build_box([2.0, 1.0, 1.0], [2, 1, 1]).unwrap();
        let dofs = DofMap::new(mesh.node_count(), &[]).unwrap();
        SparsePattern::new(&mesh, &dofs)
    }

    fn fill(p: &SparsePattern, diag: f64) -> Vec<f64> {
        let mut v = vec![0.0; p.nnz()];
        for j in 0..p.dim() {
            for k in p.col_ptr()[j]..p.col_ptr()[j + 1] {
                let i = p.row_idx()[k];
                v[k] = if i == j { diag } else { 1.0 / (1.0 + (i + j) as f64) };
            }
        }
        v
    }

    #[test]
    fn solves_spd_system() {
        let p = pattern();
        let v = fill(&p, 40.0);
        let x: Vec<f64> = (0..p.dim()).map(|i| i as f64 - 10.0).collect();
        let b = p.mul_vec(&v, &x);
        let mut s = LinearSolver::new(&p).unwrap();
        let y = s.solve(&v, &b).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_system_uses_lu() {
        let p = pattern();
        let mut v = fill(&p, 40.0);
        // flip the sign of the first diagonal entry
        v[p.col_ptr()[0]] = -40.0;
        let x: Vec<f64> = (0..p.dim()).map(|i| (i % 3) as f64).collect();
        let b = p.mul_vec(&v, &x);
        let mut s = LinearSolver::new(&p).unwrap();
        let y = s.solve(&v, &b).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
