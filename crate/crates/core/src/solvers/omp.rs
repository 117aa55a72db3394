//! Batch orthogonal matching pursuit with per-step least-squares refit.

use ndarray::Array1;
use ndarray_linalg::Solve;

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Greedy codes plus bookkeeping about degenerate columns.
#[derive(Debug, Clone)]
pub struct OmpOutcome {
    pub code: Mat,
    /// Columns whose selected atom subset went rank deficient; their pursuit
    /// stopped early at the last solvable support.
    pub truncated_columns: Vec<usize>,
}

/// Codes every column of `y` greedily over `d` with at most `sparsity`
/// nonzeros: pick the atom with the largest absolute residual correlation,
/// refit the selected atoms by least squares, repeat.
pub fn omp_batch(y: &Mat, d: &Mat, sparsity: usize) -> Result<OmpOutcome> {
    let k = d.ncols();
    if k == 0 {
        return Err(Error::EmptyDictionary);
    }
    if sparsity == 0 || sparsity > k {
        return Err(Error::InvalidArgument(format!(
            "sparsity level {sparsity} outside 1..={k}"
        )));
    }
    if d.nrows() != y.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "dictionary rows {} vs sample rows {}",
            d.nrows(),
            y.nrows()
        )));
    }

    let gram = d.t().dot(d);
    let mut code = Mat::zeros((k, y.ncols()));
    let mut truncated = Vec::new();

    for (col_idx, target) in y.columns().into_iter().enumerate() {
        let target = target.to_owned();
        let mut support: Vec<usize> = Vec::with_capacity(sparsity);
        let mut coeffs: Array1<f64> = Array1::zeros(0);
        let mut residual = target.clone();

        for _ in 0..sparsity {
            let corr = d.t().dot(&residual);
            let mut best = usize::MAX;
            let mut best_mag = 0.0;
            for (j, &c) in corr.iter().enumerate() {
                if support.contains(&j) {
                    continue;
                }
                let mag = c.abs();
                if mag > best_mag {
                    best_mag = mag;
                    best = j;
                }
            }
            if best == usize::MAX || best_mag < 1e-13 {
                break; // residual already orthogonal to every remaining atom
            }
            support.push(best);

            // least-squares refit on the selected atoms via normal equations
            let m = support.len();
            let mut gs = Mat::zeros((m, m));
            let mut rhs = Array1::zeros(m);
            for (a, &ja) in support.iter().enumerate() {
                for (b, &jb) in support.iter().enumerate() {
                    gs[[a, b]] = gram[[ja, jb]];
                }
                rhs[a] = d.column(ja).dot(&target);
            }
            match gs.solve(&rhs) {
                Ok(sol) => coeffs = sol,
                Err(_) => {
                    support.pop();
                    truncated.push(col_idx);
                    break;
                }
            }
            residual = target.clone();
            for (a, &ja) in support.iter().enumerate() {
                residual.scaled_add(-coeffs[a], &d.column(ja));
            }
            if residual.dot(&residual).sqrt() < 1e-12 {
                break;
            }
        }

        for (a, &ja) in support.iter().enumerate() {
            code[[ja, col_idx]] = coeffs[a];
        }
    }

    Ok(OmpOutcome {
        code,
        truncated_columns: truncated,
    })
}
