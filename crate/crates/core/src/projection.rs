//! The one-sided projection statistic
//! `S = max{0, T_J' Σ_J⁻ T_J : J ≠ ∅, Σ_J⁻ T_J ≥ 0}`
//! evaluated by enumerating every nonempty subset of the weight indices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::weights::MAX_WEIGHTS;

/// Components of `Σ_J⁻ T_J` above `-SIGN_TOLERANCE` count as nonnegative.
pub const SIGN_TOLERANCE: f64 = 1e-10;
/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-12;

/// Moore–Penrose inverse through the singular value decomposition.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = a.clone().svd(true, true);
    let largest = svd.singular_values.max();
    if largest <= 0.0 || !largest.is_finite() {
        return DMatrix::zeros(cols, rows);
    }
    let cutoff = PINV_RELATIVE_CUTOFF * largest;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut inv = DMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            inv += v_t.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    inv
}

/// All nonempty subsets of `0..m` in lexicographic order of their sorted
/// index lists: `{0} < {0,1} < {0,1,2} < {0,2} < {1} < …`.
pub fn lexicographic_subsets(m: usize) -> Vec<Vec<usize>> {
    fn extend(start: usize, m: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for i in start..m {
            current.push(i);
            out.push(current.clone());
            extend(i + 1, m, current, out);
            current.pop();
        }
    }
    let mut out = Vec::with_capacity((1usize << m) - 1);
    extend(0, m, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub value: f64,
    /// Subset attaining the maximum, 0-based; empty when `value == 0`.
    pub active_subset: Vec<usize>,
}

/// Projection statistic for a fixed covariance matrix. Pseudoinverses of all
/// principal submatrices are computed once, so evaluating many vectors
/// against the same matrix is cheap.
#[derive(Debug, Clone)]
pub struct ProjectionSolver {
    m: usize,
    subsets: Vec<Vec<usize>>,
    inverses: Vec<DMatrix<f64>>,
}

impl ProjectionSolver {
    pub fn new(sigma: &DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = sigma.shape();
        if rows != cols {
            return Err(Error::ShapeError(format!("covariance matrix is {rows}x{cols}")));
        }
        if rows == 0 {
            return Err(Error::ShapeError("empty covariance matrix".into()));
        }
        if rows > MAX_WEIGHTS {
            return Err(Error::ShapeError(format!(
                "{rows} weights exceed the limit of {MAX_WEIGHTS}"
            )));
        }
        let subsets = lexicographic_subsets(rows);
        let inverses = subsets
            .iter()
            .map(|j| pseudo_inverse(&sigma.select_rows(j).select_columns(j)))
            .collect();
        Ok(ProjectionSolver {
            m: rows,
            subsets,
            inverses,
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn evaluate(&self, t: &[f64]) -> Result<Projection> {
        if t.len() != self.m {
            return Err(Error::ShapeError(format!(
                "statistic vector has length {} but the covariance is {}x{}",
                t.len(),
                self.m,
                self.m
            )));
        }
        Ok(self.evaluate_unchecked(t))
    }

    pub(crate) fn evaluate_unchecked(&self, t: &[f64]) -> Projection {
        let mut best = 0.0;
        let mut best_index = None;
        let mut t_sub = [0.0; MAX_WEIGHTS];
        for (idx, (subset, inv)) in self.subsets.iter().zip(&self.inverses).enumerate() {
            let k = subset.len();
            for (slot, &i) in t_sub.iter_mut().zip(subset) {
                *slot = t[i];
            }
            let mut value = 0.0;
            let mut feasible = true;
            for r in 0..k {
                let mut beta = 0.0;
                for c in 0..k {
                    beta += inv[(r, c)] * t_sub[c];
                }
                if beta < -SIGN_TOLERANCE {
                    feasible = false;
                    break;
                }
                value += t_sub[r] * beta;
            }
            if feasible && value > best {
                best = value;
                best_index = Some(idx);
            }
        }
        Projection {
            value: best,
            active_subset: best_index.map(|i| self.subsets[i].clone()).unwrap_or_default(),
        }
    }
}

/// One-shot evaluation of the projection statistic.
pub fn max_projection_statistic(t: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<Projection> {
    if sigma.nrows() != t.len() {
        return Err(Error::ShapeError(format!(
            "statistic vector has length {} but the covariance is {}x{}",
            t.len(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    ProjectionSolver::new(sigma)?.evaluate(t.as_slice())
}
