//! Batch lasso coding `min_X ½‖Y − DX‖_F² + λ‖X‖₁` by FISTA.

use crate::error::{Error, Result};
use crate::mat::{column_norms, extreme_eigenvalue, fro_norm_sq, l1_norm, Extreme, Mat};
use crate::solvers::{fista_solve, FistaProblem, FitReport, ProxKind};

#[derive(Debug, Clone)]
pub struct LassoConfig {
    pub max_iter: usize,
    pub tol: f64,
    /// Warm start; zero code when absent.
    pub init: Option<Mat>,
    /// Penalty variant; defaults to plain l1.
    pub prox: ProxKind,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-6,
            init: None,
            prox: ProxKind::l1(),
        }
    }
}

impl LassoConfig {
    pub fn with_iters(mut self, max_iter: usize, tol: f64) -> Self {
        self.max_iter = max_iter;
        self.tol = tol;
        self
    }

    pub fn with_init(mut self, init: Mat) -> Self {
        self.init = Some(init);
        self
    }

    pub fn with_prox(mut self, prox: ProxKind) -> Self {
        self.prox = prox;
        self
    }
}

/// Sparse code of `y` over `d`: gradient `DᵀD X − DᵀY`, step `1/λ_max(DᵀD)`.
pub fn lasso_code(y: &Mat, d: &Mat, lambda: f64, cfg: &LassoConfig) -> Result<Mat> {
    lasso_code_with_report(y, d, lambda, cfg).map(|(x, _)| x)
}

pub fn lasso_code_with_report(
    y: &Mat,
    d: &Mat,
    lambda: f64,
    cfg: &LassoConfig,
) -> Result<(Mat, FitReport)> {
    if d.ncols() == 0 {
        return Err(Error::EmptyDictionary);
    }
    if d.nrows() != y.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "dictionary rows {} vs sample rows {}",
            d.nrows(),
            y.nrows()
        )));
    }
    if column_norms(d).iter().any(|&n| n > 1.0 + 1e-6) {
        log::warn!("lasso_code: dictionary has columns with norm > 1");
    }

    let gram = d.t().dot(d);
    let dty = d.t().dot(y);
    let lip = extreme_eigenvalue(&gram, Extreme::Max)?.max(1e-12);

    let init = match &cfg.init {
        Some(x0) => {
            if x0.dim() != (d.ncols(), y.ncols()) {
                return Err(Error::ShapeMismatch("lasso warm start shape".into()));
            }
            x0.clone()
        }
        None => Mat::zeros((d.ncols(), y.ncols())),
    };

    let problem = FistaProblem::new(
        |x: &Mat| gram.dot(x) - &dty,
        lip,
        lambda,
        cfg.prox.clone(),
        init,
    )
    .with_iters(cfg.max_iter, cfg.tol)
    .with_objective(|x: &Mat| 0.5 * fro_norm_sq(&(y - &d.dot(x))) + lambda * l1_norm(x));

    fista_solve(&problem)
}
