//! Structured-incoherence dictionary learning: per-class lasso coding, the
//! one-column-at-a-time dictionary update kept as an equivalence oracle, and
//! the single-inversion ADMM update.

use ndarray::{concatenate, Array1, Axis};
use ndarray_linalg::{Eigh, InverseC, UPLO};

use crate::data::{ClassificationResult, LabeledDataset};
use crate::error::{Error, Result};
use crate::mat::{fro_norm, fro_norm_sq, l1_norm, Mat};
use crate::odl::{init_dictionary_from_data, odl_dict_update, QuadDictProblem};
use crate::solvers::{lasso_code, LassoConfig};

/// Per-class dictionaries with the incoherence weights.
#[derive(Debug, Clone)]
pub struct DlsiModel {
    pub dicts: Vec<Mat>,
    pub lambda: f64,
    pub eta: f64,
}

impl DlsiModel {
    pub fn num_classes(&self) -> usize {
        self.dicts.len()
    }

    /// Stack of every dictionary except class `c`, transposed.
    pub fn incoherence_stack(&self, c: usize) -> Mat {
        let views: Vec<_> = self
            .dicts
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != c)
            .map(|(_, d)| d.view())
            .collect();
        if views.is_empty() {
            Mat::zeros((0, self.dicts[c].nrows()))
        } else {
            concatenate(Axis(1), &views).expect("same row count").t().to_owned()
        }
    }
}

/// `Σ_c (‖Y_c − D_c X^c‖² + λ‖X^c‖₁ + (η/2) Σ_{j≠c} ‖D_jᵀ D_c‖²)`.
pub fn dlsi_cost(model: &DlsiModel, class_samples: &[Mat], codes: &[Mat]) -> Result<f64> {
    if class_samples.len() != model.num_classes() || codes.len() != model.num_classes() {
        return Err(Error::ShapeMismatch(
            "per-class sample/code count must match the model".into(),
        ));
    }
    let mut total = 0.0;
    for c in 0..model.num_classes() {
        total += fro_norm_sq(&(&class_samples[c] - &model.dicts[c].dot(&codes[c])));
        total += model.lambda * l1_norm(&codes[c]);
        for j in 0..model.num_classes() {
            if j != c {
                total += 0.5 * model.eta * fro_norm_sq(&model.dicts[j].t().dot(&model.dicts[c]));
            }
        }
    }
    Ok(total)
}

/// Objective of one class-dictionary subproblem
/// `‖Y_c − D X‖² + η‖A D‖²`.
pub fn dlsi_dict_objective(yc: &Mat, xc: &Mat, a: &Mat, d: &Mat, eta: f64) -> f64 {
    fro_norm_sq(&(yc - &d.dot(xc))) + eta * fro_norm_sq(&a.dot(d))
}

#[derive(Debug, Clone)]
pub struct OdlsiConfig {
    pub max_pass: usize,
    pub tol: f64,
}

impl Default for OdlsiConfig {
    fn default() -> Self {
        Self {
            max_pass: 200,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DictOutcome {
    pub dict: Mat,
    pub skipped_atoms: Vec<usize>,
    /// Number of matrix factorizations (eigen/Cholesky) performed.
    pub factorizations: usize,
    pub iterations: usize,
}

/// One-column-at-a-time update of a class dictionary: each column solves
/// `min_d ‖x^j‖² ‖d‖² − 2 dᵀ R_j x^jᵀ + η dᵀAᵀA d` over the unit ball
/// exactly (shifted inverse when the unconstrained solution leaves the
/// ball), cycled until the columns settle.
pub fn odlsi_update_dc(
    yc: &Mat,
    xc: &Mat,
    a: &Mat,
    d_init: &Mat,
    eta: f64,
    cfg: &OdlsiConfig,
) -> Result<DictOutcome> {
    let k = d_init.ncols();
    if xc.nrows() != k || yc.ncols() != xc.ncols() || yc.nrows() != d_init.nrows() {
        return Err(Error::ShapeMismatch("odlsi operand shapes".into()));
    }
    let dim = d_init.nrows();
    let gram = if a.nrows() > 0 {
        a.t().dot(a)
    } else {
        Mat::zeros((dim, dim))
    };
    let sym = 0.5 * (&gram + &gram.t());
    let (lam, q) = sym
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e}")))?;
    let factorizations = 1;

    let mut d = d_init.clone();
    let mut skipped = Vec::new();
    let mut iterations = 0;

    for pass in 0..cfg.max_pass {
        iterations += 1;
        let mut max_change = 0.0f64;
        let mut residual = yc - &d.dot(xc);
        for j in 0..k {
            let xrow = xc.row(j).to_owned();
            let s = xrow.dot(&xrow);
            if s < 1e-12 {
                if pass == 0 {
                    skipped.push(j);
                }
                continue;
            }
            // residual with column j added back
            let dj_old = d.column(j).to_owned();
            let rj_xt: Array1<f64> = residual.dot(&xrow) + &dj_old * s;
            let b_tilde = q.t().dot(&rj_xt);

            let norm_at = |mu: f64| -> f64 {
                let mut acc = 0.0;
                for (bi, li) in b_tilde.iter().zip(lam.iter()) {
                    let den = s + eta * li + mu;
                    if den.abs() < 1e-300 {
                        return f64::INFINITY;
                    }
                    let v = bi / den;
                    acc += v * v;
                }
                acc.sqrt()
            };
            let column_at = |mu: f64| -> Array1<f64> {
                let scaled =
                    Array1::from_iter(b_tilde.iter().zip(lam.iter()).map(|(bi, li)| {
                        bi / (s + eta * li + mu)
                    }));
                q.dot(&scaled)
            };

            let dj_new = if norm_at(0.0) <= 1.0 {
                column_at(0.0)
            } else {
                // bisect the shift: ‖d(mu)‖ is decreasing, with a root in
                // (0, ‖b‖] since ‖d(mu)‖ <= ‖b‖ / mu
                let mut lo = 0.0f64;
                let mut hi = rj_xt.dot(&rj_xt).sqrt().max(1e-12);
                while norm_at(hi) > 1.0 {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if norm_at(mid) > 1.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                column_at(0.5 * (lo + hi))
            };

            let diff = &dj_new - &dj_old;
            max_change = max_change.max(diff.dot(&diff).sqrt());
            // maintain the residual incrementally
            for (mut rrow, &delta) in residual.rows_mut().into_iter().zip(diff.iter()) {
                rrow.scaled_add(-delta, &xrow);
            }
            d.column_mut(j).assign(&dj_new);
        }
        if max_change < cfg.tol {
            break;
        }
    }

    Ok(DictOutcome {
        dict: d,
        skipped_atoms: skipped,
        factorizations,
        iterations,
    })
}

#[derive(Debug, Clone)]
pub struct EdlsiConfig {
    pub rho: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub dict_passes: usize,
    pub dict_tol: f64,
}

impl Default for EdlsiConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iter: 100,
            tol: 1e-5,
            dict_passes: 10,
            dict_tol: 1e-6,
        }
    }
}

/// ADMM update of a class dictionary with the incoherence term split off:
/// the quadratic step reuses the column updates, the splitting step solves
/// `(2η AᵀA + ρI) Z = ρ (D + U)` with the inverse factored exactly once.
pub fn edlsi_update_dc(
    yc: &Mat,
    xc: &Mat,
    a: &Mat,
    d_init: &Mat,
    eta: f64,
    cfg: &EdlsiConfig,
) -> Result<DictOutcome> {
    if cfg.rho <= 0.0 {
        return Err(Error::InvalidArgument("ADMM rho must be positive".into()));
    }
    let k = d_init.ncols();
    if xc.nrows() != k || yc.ncols() != xc.ncols() || yc.nrows() != d_init.nrows() {
        return Err(Error::ShapeMismatch("edlsi operand shapes".into()));
    }
    let dim = d_init.nrows();
    let rho = cfg.rho;

    let e = yc.dot(&xc.t());
    let f = xc.dot(&xc.t());

    let mut m = if a.nrows() > 0 {
        2.0 * eta * &a.t().dot(a)
    } else {
        Mat::zeros((dim, dim))
    };
    for i in 0..dim {
        m[[i, i]] += rho;
    }
    let m_inv = m
        .invc()
        .map_err(|e| Error::Linalg(format!("Cholesky inversion failed: {e}")))?;
    let factorizations = 1;

    let mut d = d_init.clone();
    let mut z = d.clone();
    let mut u = d.clone();
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        iterations += 1;
        let e_bar = &e + &(0.5 * rho * (&z - &u));
        let f_bar = &f + &(0.5 * rho * Mat::eye(k));
        let problem = QuadDictProblem::new(e_bar, f_bar, d.clone())
            .with_passes(cfg.dict_passes, cfg.dict_tol);
        d = odl_dict_update(&problem)?.dict;
        let z_prev = z;
        z = rho * &m_inv.dot(&(&d + &u));
        u = &u + &d - &z;
        let primal = fro_norm(&(&d - &z)) / fro_norm(&d).max(1.0);
        let dual = fro_norm(&(&z - &z_prev)) / fro_norm(&z).max(1.0);
        if primal < cfg.tol && dual < cfg.tol {
            break;
        }
    }

    Ok(DictOutcome {
        dict: d,
        skipped_atoms: Vec::new(),
        factorizations,
        iterations,
    })
}

#[derive(Debug, Clone)]
pub struct DlsiConfig {
    pub atoms_per_class: usize,
    pub lambda: f64,
    pub eta: f64,
    pub iters: usize,
    pub rel_tol: f64,
    pub lasso: LassoConfig,
    pub edlsi: EdlsiConfig,
}

impl Default for DlsiConfig {
    fn default() -> Self {
        Self {
            atoms_per_class: 8,
            lambda: 0.1,
            eta: 0.1,
            iters: 30,
            rel_tol: 1e-4,
            lasso: LassoConfig::default(),
            edlsi: EdlsiConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DlsiFit {
    pub model: DlsiModel,
    pub codes: Vec<Mat>,
    pub cost_history: Vec<f64>,
}

/// Alternates per-class lasso coding with safeguarded ADMM dictionary
/// updates until the printed cost settles.
pub fn dlsi_train(dataset: &LabeledDataset, cfg: &DlsiConfig) -> Result<DlsiFit> {
    let num_classes = dataset.num_classes();
    if num_classes == 0 {
        return Err(Error::InvalidArgument("dataset has no class labels".into()));
    }
    let mut class_samples = Vec::with_capacity(num_classes);
    for c in 1..=num_classes {
        let yc = dataset.class_matrix(c)?;
        if yc.ncols() == 0 {
            return Err(Error::InvalidArgument(format!("class {c} has no samples")));
        }
        class_samples.push(yc);
    }

    let mut model = DlsiModel {
        dicts: class_samples
            .iter()
            .map(|yc| init_dictionary_from_data(yc, cfg.atoms_per_class))
            .collect(),
        lambda: cfg.lambda,
        eta: cfg.eta,
    };
    let mut codes: Vec<Mat> = class_samples
        .iter()
        .map(|yc| Mat::zeros((cfg.atoms_per_class, yc.ncols())))
        .collect();

    let mut history = vec![dlsi_cost(&model, &class_samples, &codes)?];

    for _ in 0..cfg.iters {
        for c in 0..num_classes {
            // the printed fidelity lacks the ½, so the l1 weight halves
            let lasso_cfg = cfg.lasso.clone().with_init(codes[c].clone());
            codes[c] = lasso_code(
                &class_samples[c],
                &model.dicts[c],
                0.5 * cfg.lambda,
                &lasso_cfg,
            )?;
        }
        for c in 0..num_classes {
            let a = model.incoherence_stack(c);
            let before = dlsi_dict_objective(
                &class_samples[c],
                &codes[c],
                &a,
                &model.dicts[c],
                cfg.eta,
            );
            let updated = edlsi_update_dc(
                &class_samples[c],
                &codes[c],
                &a,
                &model.dicts[c],
                cfg.eta,
                &cfg.edlsi,
            )?;
            let after =
                dlsi_dict_objective(&class_samples[c], &codes[c], &a, &updated.dict, cfg.eta);
            // ADMM iterates need not descend; keep the better dictionary
            if after <= before {
                model.dicts[c] = updated.dict;
            }
        }
        let cost = dlsi_cost(&model, &class_samples, &codes)?;
        if !cost.is_finite() {
            return Err(Error::NonFinite("dlsi cost"));
        }
        let prev = *history.last().unwrap();
        history.push(cost);
        if (prev - cost).abs() <= cfg.rel_tol * prev.abs().max(1e-12) {
            break;
        }
    }

    Ok(DlsiFit {
        model,
        codes,
        cost_history: history,
    })
}

/// Scores one sample per class by the printed per-class objective evaluated
/// at that class's lasso solution.
pub fn dlsi_classify(sample: &Array1<f64>, model: &DlsiModel) -> Result<ClassificationResult> {
    let y = sample
        .clone()
        .into_shape_with_order((sample.len(), 1))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let cfg = LassoConfig::default().with_iters(500, 1e-8);
    let mut scores = Vec::with_capacity(model.num_classes());
    for dc in &model.dicts {
        let x = lasso_code(&y, dc, 0.5 * model.lambda, &cfg)?;
        let score = fro_norm_sq(&(&y - &dc.dot(&x))) + model.lambda * l1_norm(&x);
        scores.push(score);
    }
    Ok(ClassificationResult::from_residuals(scores))
}
