//! Independent route to the projection statistic: the supremum of the
//! concave quadratic `2β'T − β'Σβ` over the nonnegative orthant, computed by
//! accelerated projected gradient ascent. Used to cross-check subset
//! enumeration, not on the production path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100_000;
pub const GRADIENT_TOLERANCE: f64 = 1e-12;
/// Eigenvalues below `-PSD_TOLERANCE * λ_max` reject the matrix.
pub const PSD_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub value: f64,
    pub beta: DVector<f64>,
    pub iterations: usize,
}

pub fn qp_oracle_statistic(t: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    Ok(qp_oracle_solve(t, sigma)?.value)
}

pub fn qp_oracle_solve(t: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<QpSolution> {
    let m = t.len();
    if sigma.shape() != (m, m) {
        return Err(Error::ShapeError(format!(
            "statistic vector has length {m} but the covariance is {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let eigen = sigma.clone().symmetric_eigen();
    let lambda_max = eigen.eigenvalues.max();
    let lambda_min = eigen.eigenvalues.min();
    if lambda_min < -PSD_TOLERANCE * lambda_max.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd {
            min_eigenvalue: lambda_min,
        });
    }
    if lambda_max <= 0.0 {
        // Σ = 0: linear objective, bounded only if t ≤ 0.
        let value = if t.iter().any(|&x| x > 0.0) { f64::INFINITY } else { 0.0 };
        return Ok(QpSolution {
            value,
            beta: DVector::zeros(m),
            iterations: 0,
        });
    }

    // Minimise h(β) = β'Σβ − 2β't; half-gradient Σβ − t has Lipschitz constant λ_max.
    let step = 1.0 / lambda_max;
    let mut beta = DVector::zeros(m);
    let mut previous = beta.clone();
    let mut momentum = 0.0f64;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let look = &beta + (&beta - &previous) * ((momentum.max(1.0) - 1.0) / next_momentum);
        let grad = sigma * &look - t;
        let candidate = (&look - grad * step).map(|x| x.max(0.0));

        // Gradient restart: drop momentum when it points uphill.
        if (&look - &candidate).dot(&(&candidate - &beta)) > 0.0 {
            momentum = 0.0;
        } else {
            momentum = next_momentum;
        }
        previous = std::mem::replace(&mut beta, candidate);

        if projected_gradient_norm(&beta, &(sigma * &beta - t)) < GRADIENT_TOLERANCE {
            break;
        }
    }
    let value = 2.0 * beta.dot(t) - beta.dot(&(sigma * &beta));
    Ok(QpSolution {
        value: value.max(0.0),
        beta,
        iterations,
    })
}

/// Norm of the half-gradient restricted to the active face of the orthant.
fn projected_gradient_norm(beta: &DVector<f64>, grad: &DVector<f64>) -> f64 {
    beta.iter()
        .zip(grad.iter())
        .map(|(&b, &g)| if b > 0.0 { g * g } else { g.min(0.0).powi(2) })
        .sum::<f64>()
        .sqrt()
}
