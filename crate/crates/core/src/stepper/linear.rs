//! Sparse linear core of the Newton solver.
//!
//! `DirectSparse` refactors the Jacobian on every call. `BiCGStab` runs a
//! right-preconditioned BiCGStab whose preconditioner is an LU factorization
//! of an earlier Jacobian, refreshed only when the iteration fails or gets
//! slow. Both share one symbolic analysis as long as the sparsity pattern
//! does not change.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearSolver {
    #[default]
    DirectSparse,
    #[serde(rename = "bicgstab")]
    BiCGStab {
        /// Relative residual target `‖b − Ax‖₂ ≤ tol·‖b‖₂`.
        tol: f64,
        max_iter: usize,
    },
}

impl LinearSolver {
    pub fn validate(&self) -> Result<()> {
        if let LinearSolver::BiCGStab { tol, max_iter } = *self {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "BiCGStab tol must be in (0, 1), got {tol}"
                )));
            }
            if max_iter == 0 {
                return Err(Error::InvalidParameter(
                    "BiCGStab max_iter must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Square sparse matrix in compressed-column form.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    mat: SparseColMat<usize, f64>,
}

impl SparseSystem {
    /// Builds an `n × n` matrix; duplicate entries are summed.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= n || c >= n) {
            return Err(Error::dims(
                format!("indices below {n}"),
                format!("entry ({r}, {c})"),
            ));
        }
        let trip: Vec<Triplet<usize, usize, f64>> = entries
            .iter()
            .map(|&(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let mat = SparseColMat::try_new_from_triplets(n, n, &trip)
            .map_err(|e| Error::LinearBreakdown(format!("matrix assembly failed: {e:?}")))?;
        Ok(Self { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.mat.val().len()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        let sym = self.mat.symbolic();
        let cp = sym.col_ptr();
        let ri = sym.row_idx();
        let val = self.mat.val();
        for (c, &xc) in x.iter().enumerate() {
            if xc == 0.0 {
                continue;
            }
            for k in cp[c]..cp[c + 1] {
                y[ri[k]] += val[k] * xc;
            }
        }
        y
    }

    fn same_pattern(&self, other: &SparseColMat<usize, f64>) -> bool {
        let a = self.mat.symbolic();
        let b = other.symbolic();
        a.nrows() == b.nrows() && a.col_ptr() == b.col_ptr() && a.row_idx() == b.row_idx()
    }
}

/// Counters accumulated by a [`LinearWorkspace`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinearStats {
    pub solves: usize,
    pub factorizations: usize,
    pub krylov_iterations: usize,
}

/// Cached factorizations reused across solves with the same pattern.
pub struct LinearWorkspace {
    solver: LinearSolver,
    pattern: Option<SparseColMat<usize, f64>>,
    symbolic: Option<SymbolicLu<usize>>,
    lagged: Option<Lu<usize, f64>>,
    stale: bool,
    stats: LinearStats,
}

/// Iteration count above which the lagged factorization is refreshed before
/// the next solve.
const REFRESH_AFTER: usize = 12;

impl LinearWorkspace {
    pub fn new(solver: LinearSolver) -> Self {
        faer::set_global_parallelism(faer::Par::Seq);
        Self {
            solver,
            pattern: None,
            symbolic: None,
            lagged: None,
            stale: false,
            stats: LinearStats::default(),
        }
    }

    pub fn solver(&self) -> LinearSolver {
        self.solver
    }

    pub fn stats(&self) -> LinearStats {
        self.stats
    }

    fn factor(&mut self, a: &SparseSystem) -> Result<Lu<usize, f64>> {
        let reuse = matches!(&self.pattern, Some(p) if a.same_pattern(p));
        if !reuse || self.symbolic.is_none() {
            let sym = SymbolicLu::try_new(a.mat.symbolic())
                .map_err(|e| Error::LinearBreakdown(format!("symbolic LU failed: {e:?}")))?;
            self.symbolic = Some(sym);
            self.pattern = Some(a.mat.clone());
            self.lagged = None;
        }
        let sym = self
            .symbolic
            .clone()
            .expect("symbolic factorization present");
        self.stats.factorizations += 1;
        Lu::try_new_with_symbolic(sym, a.mat.as_ref())
            .map_err(|e| Error::LinearBreakdown(format!("numeric LU failed: {e:?}")))
    }

    pub fn solve(&mut self, a: &SparseSystem, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != a.dim() {
            return Err(Error::dims(format!("rhs of length {}", a.dim()), rhs.len()));
        }
        self.stats.solves += 1;
        let x = match self.solver {
            LinearSolver::DirectSparse => {
                let lu = self.factor(a)?;
                lu_solve(&lu, rhs)
            }
            LinearSolver::BiCGStab { tol, max_iter } => {
                let fresh = self.stale
                    || self.lagged.is_none()
                    || !matches!(&self.pattern, Some(p) if a.same_pattern(p));
                if fresh {
                    let lu = self.factor(a)?;
                    self.lagged = Some(lu);
                    self.stale = false;
                }
                let first = bicgstab(
                    a,
                    rhs,
                    self.lagged.as_ref().expect("preconditioner present"),
                    tol,
                    max_iter,
                );
                match first {
                    Ok((x, it)) => {
                        self.stats.krylov_iterations += it;
                        self.stale = it > REFRESH_AFTER;
                        x
                    }
                    Err(_) if !fresh => {
                        let lu = self.factor(a)?;
                        self.lagged = Some(lu);
                        let (x, it) = bicgstab(
                            a,
                            rhs,
                            self.lagged.as_ref().expect("preconditioner present"),
                            tol,
                            max_iter,
                        )?;
                        self.stats.krylov_iterations += it;
                        x
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::LinearBreakdown("non-finite solution".into()))
        }
    }
}

fn lu_solve(lu: &Lu<usize, f64>, rhs: &[f64]) -> Vec<f64> {
    let mut b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    lu.solve_in_place(b.as_mut());
    (0..rhs.len()).map(|i| b[(i, 0)]).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned BiCGStab. Returns the solution and iteration count.
fn bicgstab(
    a: &SparseSystem,
    b: &[f64],
    m: &Lu<usize, f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let target = tol * bnorm;
    // Start from the preconditioner's answer; with a fresh factorization
    // this is already the solution.
    let mut x = lu_solve(m, b);
    let ax = a.apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    if norm(&r) <= target {
        return Ok((x, 0));
    }
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(Error::LinearBreakdown(format!(
                "BiCGStab breakdown at iteration {it}"
            )));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let phat = lu_solve(m, &p);
        v = a.apply(&phat);
        let denom = dot(&r0, &v);
        if denom == 0.0 {
            return Err(Error::LinearBreakdown(format!(
                "BiCGStab breakdown at iteration {it}"
            )));
        }
        alpha = rho / denom;
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm(&s) <= target {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok((x, it));
        }
        let shat = lu_solve(m, &s);
        let t = a.apply(&shat);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= target {
            return Ok((x, it));
        }
        if !norm(&r).is_finite() {
            break;
        }
    }
    Err(Error::LinearBreakdown(format!(
        "BiCGStab did not reach tol {tol:e} in {max_iter} iterations"
    )))
}

/// One-shot solve of `A x = rhs`.
pub fn solve_linearized(
    system: &SparseSystem,
    rhs: &[f64],
    solver: LinearSolver,
) -> Result<Vec<f64>> {
    LinearWorkspace::new(solver).solve(system, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, d: f64) -> SparseSystem {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, d));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -0.5));
            }
        }
        SparseSystem::from_triplets(n, &t).unwrap()
    }

    #[test]
    fn duplicates_are_summed() {
        let a =
            SparseSystem::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0), (1, 0, 0.0)])
                .unwrap();
        assert_eq!(a.apply(&[1.0, 1.0]), vec![3.0, 1.0]);
    }

    #[test]
    fn out_of_range_entry_is_rejected() {
        assert!(SparseSystem::from_triplets(2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn direct_and_iterative_agree() {
        let a = tridiag(50, 3.0);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).cos()).collect();
        let x1 = solve_linearized(&a, &b, LinearSolver::DirectSparse).unwrap();
        let x2 = solve_linearized(
            &a,
            &b,
            LinearSolver::BiCGStab {
                tol: 1e-13,
                max_iter: 50,
            },
        )
        .unwrap();
        let r = a.apply(&x1);
        for i in 0..50 {
            assert!((r[i] - b[i]).abs() < 1e-13);
            assert!((x1[i] - x2[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn lagged_preconditioner_is_reused() {
        let mut ws = LinearWorkspace::new(LinearSolver::BiCGStab {
            tol: 1e-12,
            max_iter: 100,
        });
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        for d in [3.0, 3.05, 3.1] {
            let a = tridiag(40, d);
            let x = ws.solve(&a, &b).unwrap();
            let r = a.apply(&x);
            let err = r
                .iter()
                .zip(&b)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-10);
        }
        assert_eq!(ws.stats().factorizations, 1);
        assert!(ws.stats().krylov_iterations > 0);
    }
}
