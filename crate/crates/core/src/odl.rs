//! Quadratic-surrogate dictionary updates by cyclic column minimization, and
//! the plain reconstructive learner built on top of them.

use crate::error::{Error, Result};
use crate::mat::{fro_norm_sq, l1_norm, normalize_columns, Mat};
use crate::solvers::{lasso_code, LassoConfig};

/// Column constraint used during the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `‖d_j‖ ≤ 1`: project onto the unit ball.
    Ball,
    /// `‖d_j‖ = 1`: rescale onto the unit sphere.
    Sphere,
}

/// One dictionary-update problem `min_D −2 tr(E Dᵀ) + tr(D F Dᵀ)`.
#[derive(Debug, Clone)]
pub struct QuadDictProblem {
    pub e: Mat,
    pub f: Mat,
    pub d_init: Mat,
    pub max_pass: usize,
    pub tol: f64,
    pub normalization: Normalization,
}

impl QuadDictProblem {
    pub fn new(e: Mat, f: Mat, d_init: Mat) -> Self {
        Self {
            e,
            f,
            d_init,
            max_pass: 10,
            tol: 1e-6,
            normalization: Normalization::Ball,
        }
    }

    pub fn with_passes(mut self, max_pass: usize, tol: f64) -> Self {
        self.max_pass = max_pass;
        self.tol = tol;
        self
    }

    pub fn with_normalization(mut self, n: Normalization) -> Self {
        self.normalization = n;
        self
    }

    fn validate(&self) -> Result<()> {
        let k = self.d_init.ncols();
        if self.e.dim() != (self.d_init.nrows(), k) {
            return Err(Error::ShapeMismatch(format!(
                "E is {:?}, expected {:?}",
                self.e.dim(),
                (self.d_init.nrows(), k)
            )));
        }
        if self.f.dim() != (k, k) {
            return Err(Error::ShapeMismatch(format!(
                "F is {:?}, expected {:?}",
                self.f.dim(),
                (k, k)
            )));
        }
        let asym = fro_norm_sq(&(&self.f - &self.f.t()));
        if asym.sqrt() > 1e-10 * (1.0 + fro_norm_sq(&self.f).sqrt()) {
            return Err(Error::InvalidArgument("F must be symmetric".into()));
        }
        Ok(())
    }
}

/// Updated dictionary plus columns skipped because no code uses them.
#[derive(Debug, Clone)]
pub struct DictUpdate {
    pub dict: Mat,
    pub skipped_atoms: Vec<usize>,
    pub passes: usize,
}

/// `tr(D F Dᵀ) − 2 tr(Dᵀ E)`, the quantity the update minimizes.
pub fn quad_dict_objective(d: &Mat, e: &Mat, f: &Mat) -> f64 {
    let dfd = d.dot(f).dot(&d.t());
    let de = d.t().dot(e);
    dfd.diag().sum() - 2.0 * de.diag().sum()
}

/// Cyclic column updates `u_j = (e_j − D f_j)/F_jj + d_j` followed by the
/// configured normalization; stops when the largest column change in a pass
/// falls below `tol`.
pub fn odl_dict_update(p: &QuadDictProblem) -> Result<DictUpdate> {
    p.validate()?;
    let k = p.d_init.ncols();
    let mut d = p.d_init.clone();
    let mut skipped = Vec::new();
    let mut passes = 0;

    for _ in 0..p.max_pass {
        passes += 1;
        let mut max_change = 0.0f64;
        for j in 0..k {
            let fjj = p.f[[j, j]];
            if fjj < 1e-12 {
                if passes == 1 {
                    skipped.push(j);
                }
                continue;
            }
            let fj = p.f.column(j);
            let dfj = d.dot(&fj);
            let mut u = (&p.e.column(j) - &dfj) / fjj + &d.column(j);
            let norm = u.dot(&u).sqrt();
            match p.normalization {
                Normalization::Ball => {
                    if norm > 1.0 {
                        u.mapv_inplace(|v| v / norm);
                    }
                }
                Normalization::Sphere => {
                    if norm > 1e-12 {
                        u.mapv_inplace(|v| v / norm);
                    } else {
                        // direction is undefined; keep the current atom
                        u = d.column(j).to_owned();
                        if passes == 1 {
                            skipped.push(j);
                        }
                    }
                }
            }
            let change = (&u - &d.column(j)).dot(&(&u - &d.column(j))).sqrt();
            max_change = max_change.max(change);
            d.column_mut(j).assign(&u);
        }
        if max_change < p.tol {
            break;
        }
    }

    Ok(DictUpdate {
        dict: d,
        skipped_atoms: skipped,
        passes,
    })
}

/// Training trace of the reconstructive learner.
#[derive(Debug, Clone)]
pub struct OdlFit {
    pub dictionary: Mat,
    pub code: Mat,
    /// `½‖Y − DX‖² + λ‖X‖₁` after every alternation step.
    pub objective_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OdlConfig {
    pub lasso: LassoConfig,
    pub dict_passes: usize,
    pub dict_tol: f64,
}

impl Default for OdlConfig {
    fn default() -> Self {
        Self {
            lasso: LassoConfig::default(),
            dict_passes: 10,
            dict_tol: 1e-6,
        }
    }
}

fn odl_objective(y: &Mat, d: &Mat, x: &Mat, lambda: f64) -> f64 {
    0.5 * fro_norm_sq(&(y - &d.dot(x))) + lambda * l1_norm(x)
}

/// Deterministic initial dictionary: the first `k` data columns (cycled when
/// the data has fewer), rescaled to unit norm.
pub fn init_dictionary_from_data(y: &Mat, k: usize) -> Mat {
    let n = y.ncols();
    let mut d = Mat::zeros((y.nrows(), k));
    for j in 0..k {
        d.column_mut(j).assign(&y.column(j % n));
    }
    normalize_columns(&d)
}

/// Alternates lasso coding with the quadratic dictionary update on
/// `E = YXᵀ, F = XXᵀ`.
pub fn odl_learn(y: &Mat, k: usize, lambda: f64, iters: usize, cfg: &OdlConfig) -> Result<OdlFit> {
    if k == 0 {
        return Err(Error::InvalidArgument("dictionary size must be >= 1".into()));
    }
    if y.ncols() == 0 || y.nrows() == 0 {
        return Err(Error::InvalidArgument("empty training matrix".into()));
    }
    let mut d = init_dictionary_from_data(y, k);
    let mut x = Mat::zeros((k, y.ncols()));
    let mut history = Vec::new();

    for _ in 0..iters {
        let lasso_cfg = cfg.lasso.clone().with_init(x.clone());
        x = lasso_code(y, &d, lambda, &lasso_cfg)?;
        history.push(odl_objective(y, &d, &x, lambda));

        let e = y.dot(&x.t());
        let f = x.dot(&x.t());
        let problem =
            QuadDictProblem::new(e, f, d.clone()).with_passes(cfg.dict_passes, cfg.dict_tol);
        d = odl_dict_update(&problem)?.dict;
        history.push(odl_objective(y, &d, &x, lambda));
    }

    Ok(OdlFit {
        dictionary: d,
        code: x,
        objective_history: history,
    })
}
