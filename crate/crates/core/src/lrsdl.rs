//! Low-rank shared dictionary learning: joint class dictionaries, a nuclear-
//! norm-regularized shared dictionary, the stacked FISTA code update, the
//! ADMM + SVT shared-dictionary update, the trainer and the classifier.

use ndarray::{concatenate, s, Array1, Axis};

use crate::data::{ClassificationResult, LabeledDataset};
use crate::error::{Error, Result};
use crate::fddl::{
    classwise_mean_matrix, efddl_dict_quadratic, efddl_grad_x, efddl_lipschitz, efddl_update_x,
    fddl_cost, FddlLayout, FddlSolveConfig,
};
use crate::mat::{
    column_mean, column_mean_matrix, doubled_diagonal, extreme_eigenvalue, fro_norm, fro_norm_sq,
    l1_norm, nuclear_norm, svt, BlockPartition, Extreme, Mat,
};
use crate::odl::{odl_dict_update, odl_learn, OdlConfig, QuadDictProblem};
use crate::solvers::{fista_solve, FistaProblem, ProxKind};

/// Trained model: class dictionaries, shared dictionary and code means.
#[derive(Debug, Clone)]
pub struct LrsdlModel {
    pub dict: Mat,
    /// Shared dictionary, `d × k0`; `k0 = 0` makes the model plain FDDL.
    pub dict0: Mat,
    pub atoms: BlockPartition,
    /// Per-class means of the full code columns, `K × C`.
    pub class_means: Mat,
    /// Mean of the shared code columns, length `k0`.
    pub shared_mean: Array1<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub eta: f64,
    /// Classifier weight between residual and mean proximity.
    pub w: f64,
}

impl LrsdlModel {
    pub fn num_classes(&self) -> usize {
        self.atoms.num_classes()
    }

    pub fn shared_size(&self) -> usize {
        self.dict0.ncols()
    }
}

/// Mutable training state: block code `X` and shared code `X0` with their
/// cached mean matrices.
#[derive(Debug, Clone)]
pub struct LrsdlState {
    pub x: Mat,
    pub x0: Mat,
    pub mean_all: Mat,
    pub mean_classwise: Mat,
    pub mean_shared: Mat,
}

impl LrsdlState {
    pub fn new(x: Mat, x0: Mat, samples: &BlockPartition) -> Result<Self> {
        let mut state = Self {
            mean_all: Mat::zeros((0, 0)),
            mean_classwise: Mat::zeros((0, 0)),
            mean_shared: Mat::zeros((0, 0)),
            x,
            x0,
        };
        state.refresh_means(samples)?;
        Ok(state)
    }

    /// Recompute every cached mean matrix from the current codes.
    pub fn refresh_means(&mut self, samples: &BlockPartition) -> Result<()> {
        self.mean_all = column_mean_matrix(&self.x, self.x.ncols())?;
        self.mean_classwise = classwise_mean_matrix(&self.x, samples)?;
        self.mean_shared = if self.x0.nrows() > 0 {
            column_mean_matrix(&self.x0, self.x0.ncols())?
        } else {
            Mat::zeros((0, self.x.ncols()))
        };
        Ok(())
    }
}

/// `Ȳ = Y − D0 X0`.
fn deflate_shared(y: &Mat, d0: &Mat, x0: &Mat) -> Mat {
    if d0.ncols() == 0 {
        y.clone()
    } else {
        y - &d0.dot(x0)
    }
}

/// `V = Y − ½ D M(X)`.
pub fn shared_target(y: &Mat, d: &Mat, x: &Mat, layout: &FddlLayout) -> Result<Mat> {
    let xd = doubled_diagonal(x, &layout.atoms, &layout.samples)?;
    Ok(y - &(0.5 * &d.dot(&xd)))
}

/// Full cost `½ f_Ȳ(D, X) + λ1‖X̄‖₁ + (λ2/2)(g(X) + ‖X0 − M0‖²) + η‖D0‖_*`.
pub fn lrsdl_cost(
    y: &Mat,
    model: &LrsdlModel,
    state: &LrsdlState,
    layout: &FddlLayout,
) -> Result<f64> {
    let ybar = deflate_shared(y, &model.dict0, &state.x0);
    let base = fddl_cost(
        &ybar,
        &model.dict,
        &state.x,
        layout,
        model.lambda1,
        model.lambda2,
    )?;
    if model.dict0.ncols() == 0 {
        return Ok(base);
    }
    let m0 = column_mean_matrix(&state.x0, state.x0.ncols())?;
    let code_sim = fro_norm_sq(&(&state.x0 - &m0));
    Ok(base
        + model.lambda1 * l1_norm(&state.x0)
        + 0.5 * model.lambda2 * code_sim
        + model.eta * nuclear_norm(&model.dict0)?)
}

/// Stacked gradient of the smooth part: the upper block is the FDDL gradient
/// against `Ȳ`, the lower block is `(2D0ᵀD0 + λ2 I) X0 − 2D0ᵀV − λ2 M0`.
pub fn lrsdl_grad_x(
    y: &Mat,
    model: &LrsdlModel,
    x: &Mat,
    x0: &Mat,
    layout: &FddlLayout,
) -> Result<(Mat, Mat)> {
    let ybar = deflate_shared(y, &model.dict0, x0);
    let upper = efddl_grad_x(&ybar, &model.dict, x, layout, model.lambda2)?;
    if model.dict0.ncols() == 0 {
        return Ok((upper, Mat::zeros((0, x.ncols()))));
    }
    let v = shared_target(y, &model.dict, x, layout)?;
    let d0 = &model.dict0;
    let m0 = column_mean_matrix(x0, x0.ncols())?;
    let mut lower = 2.0 * &d0.t().dot(&d0.dot(x0));
    lower.scaled_add(model.lambda2, x0);
    lower.scaled_add(-2.0, &d0.t().dot(&v));
    lower.scaled_add(-model.lambda2, &m0);
    Ok((upper, lower))
}

/// Smooth-plus-l1 objective of the code subproblem (the full cost minus the
/// nuclear term, which is constant in `X̄`).
fn code_subproblem_cost(
    y: &Mat,
    model: &LrsdlModel,
    x: &Mat,
    x0: &Mat,
    layout: &FddlLayout,
) -> Result<f64> {
    let ybar = deflate_shared(y, &model.dict0, x0);
    let base = fddl_cost(&ybar, &model.dict, x, layout, model.lambda1, model.lambda2)?;
    if model.dict0.ncols() == 0 {
        return Ok(base);
    }
    let m0 = column_mean_matrix(x0, x0.ncols())?;
    Ok(base
        + model.lambda1 * l1_norm(x0)
        + 0.5 * model.lambda2 * fro_norm_sq(&(x0 - &m0)))
}

/// FISTA on the stacked `[X; X0]` with
/// `L = λ_max(A) + λ_max(B) + 4λ2 + 1`.
pub fn lrsdl_update_x(
    y: &Mat,
    model: &LrsdlModel,
    state: &LrsdlState,
    layout: &FddlLayout,
    cfg: &FddlSolveConfig,
) -> Result<(Mat, Mat)> {
    let k0 = model.dict0.ncols();
    if k0 == 0 {
        let x = efddl_update_x(
            y,
            &model.dict,
            &state.x,
            layout,
            model.lambda1,
            model.lambda2,
            cfg,
        )?;
        return Ok((x, state.x0.clone()));
    }

    let kk = model.dict.ncols();
    let lambda2 = model.lambda2;
    let lip_a = efddl_lipschitz(&model.dict, &layout.atoms, lambda2)? - 4.0 * lambda2 - 1.0;
    let gram0 = model.dict0.t().dot(&model.dict0);
    let lip_b = 2.0 * extreme_eigenvalue(&gram0, Extreme::Max)? + lambda2;
    let lip = lip_a + lip_b + 4.0 * lambda2 + 1.0;

    let stack = concatenate![Axis(0), state.x.view(), state.x0.view()];
    let split = |s: &Mat| -> (Mat, Mat) {
        (
            s.slice(ndarray::s![0..kk, ..]).to_owned(),
            s.slice(ndarray::s![kk.., ..]).to_owned(),
        )
    };

    let problem = FistaProblem::new(
        |w: &Mat| {
            let (x, x0) = split(w);
            let (up, lo) = lrsdl_grad_x(y, model, &x, &x0, layout).expect("validated shapes");
            concatenate![Axis(0), up.view(), lo.view()]
        },
        lip,
        model.lambda1,
        ProxKind::l1(),
        stack,
    )
    .with_iters(cfg.max_iter, cfg.tol)
    .with_objective(|w: &Mat| {
        let (x, x0) = split(w);
        code_subproblem_cost(y, model, &x, &x0, layout).expect("validated shapes")
    });

    let (solution, _) = fista_solve(&problem)?;
    Ok(split(&solution))
}

#[derive(Debug, Clone)]
pub struct AdmmConfig {
    pub rho: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub dict_passes: usize,
    pub dict_tol: f64,
}

impl Default for AdmmConfig {
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

/// Shared-dictionary update outcome.
#[derive(Debug, Clone)]
pub struct SharedDictUpdate {
    pub dict0: Mat,
    /// Set when the shared code is all zero and the update was skipped.
    pub degenerate: bool,
    pub admm_iterations: usize,
}

/// Objective of the shared-dictionary subproblem
/// `‖V − D0 X0‖² + η‖D0‖_*`.
pub fn shared_dict_objective(v: &Mat, d0: &Mat, x0: &Mat, eta: f64) -> Result<f64> {
    Ok(fro_norm_sq(&(v - &d0.dot(x0))) + eta * nuclear_norm(d0)?)
}

/// ADMM on the shared dictionary: quadratic step via the column updates,
/// singular-value thresholding step, dual update.
pub fn lrsdl_update_d0(
    y: &Mat,
    model: &LrsdlModel,
    state: &LrsdlState,
    layout: &FddlLayout,
    cfg: &AdmmConfig,
) -> Result<SharedDictUpdate> {
    if cfg.rho <= 0.0 {
        return Err(Error::InvalidArgument("ADMM rho must be positive".into()));
    }
    let k0 = model.dict0.ncols();
    if k0 == 0 {
        return Ok(SharedDictUpdate {
            dict0: model.dict0.clone(),
            degenerate: false,
            admm_iterations: 0,
        });
    }
    if fro_norm(&state.x0) < 1e-14 {
        return Ok(SharedDictUpdate {
            dict0: model.dict0.clone(),
            degenerate: true,
            admm_iterations: 0,
        });
    }

    let v = shared_target(y, &model.dict, &state.x, layout)?;
    let e = v.dot(&state.x0.t());
    let f = state.x0.dot(&state.x0.t());
    let rho = cfg.rho;

    let mut d0 = model.dict0.clone();
    let mut z = d0.clone();
    let mut u = d0.clone();
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        iterations += 1;
        let e_bar = &e + &(0.5 * rho * (&z - &u));
        let f_bar = &f + &(0.5 * rho * Mat::eye(k0));
        let problem = QuadDictProblem::new(e_bar, f_bar, d0.clone())
            .with_passes(cfg.dict_passes, cfg.dict_tol);
        d0 = odl_dict_update(&problem)?.dict;
        let z_prev = z;
        z = svt(&(&d0 + &u), model.eta / rho)?;
        u = &u + &d0 - &z;
        let primal = fro_norm(&(&d0 - &z)) / fro_norm(&d0).max(1.0);
        let dual = fro_norm(&(&z - &z_prev)) / fro_norm(&z).max(1.0);
        if primal < cfg.tol && dual < cfg.tol {
            break;
        }
    }

    Ok(SharedDictUpdate {
        dict0: d0,
        degenerate: false,
        admm_iterations: iterations,
    })
}

#[derive(Debug, Clone)]
pub struct LrsdlConfig {
    pub atoms_per_class: usize,
    pub shared_atoms: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub eta: f64,
    pub w: f64,
    pub iters: usize,
    /// Early stop on relative cost change.
    pub rel_tol: f64,
    pub init_odl_iters: usize,
    pub solve: FddlSolveConfig,
    pub admm: AdmmConfig,
}

impl Default for LrsdlConfig {
    fn default() -> Self {
        Self {
            atoms_per_class: 8,
            shared_atoms: 0,
            lambda1: 0.01,
            lambda2: 0.003,
            eta: 0.003,
            w: 0.5,
            iters: 50,
            rel_tol: 1e-4,
            init_odl_iters: 10,
            solve: FddlSolveConfig::default(),
            admm: AdmmConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LrsdlFit {
    pub model: LrsdlModel,
    pub state: LrsdlState,
    pub layout: FddlLayout,
    pub cost_history: Vec<f64>,
}

/// Full training loop: per-class reconstructive init, then alternating
/// code, class-dictionary and shared-dictionary updates.
pub fn lrsdl_train(dataset: &LabeledDataset, cfg: &LrsdlConfig) -> Result<LrsdlFit> {
    let y = dataset.samples.as_single()?;
    let num_classes = dataset.num_classes();
    if num_classes == 0 {
        return Err(Error::InvalidArgument("dataset has no class labels".into()));
    }

    // samples must be grouped by class for the block bookkeeping
    let mut class_cols: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in dataset.labels.iter().enumerate() {
        if l == 0 || l > num_classes {
            return Err(Error::InvalidArgument(format!(
                "label {l} outside 1..={num_classes}"
            )));
        }
        class_cols[l - 1].push(i);
    }
    if class_cols.iter().any(|c| c.is_empty()) {
        return Err(Error::InvalidArgument(
            "every class needs at least one sample".into(),
        ));
    }
    let order: Vec<usize> = class_cols.iter().flatten().copied().collect();
    let mut y_sorted = Mat::zeros(y.dim());
    for (j, &i) in order.iter().enumerate() {
        y_sorted.column_mut(j).assign(&y.column(i));
    }
    let samples_part =
        BlockPartition::new(class_cols.iter().map(|c| c.len()).collect(), 0)?;
    let atoms_part = BlockPartition::uniform(num_classes, cfg.atoms_per_class);
    let layout = FddlLayout::new(samples_part, atoms_part)?;

    let n_total = y_sorted.ncols();
    let kk = layout.atoms.total();
    let odl_cfg = OdlConfig::default();

    // per-class reconstructive warm start fills only the (c, c) code block
    let mut dict = Mat::zeros((y_sorted.nrows(), kk));
    let mut x = Mat::zeros((kk, n_total));
    for c in 0..num_classes {
        let cols = layout.samples.class_range(c);
        let yc = y_sorted.slice(s![.., cols.clone()]).to_owned();
        let fit = odl_learn(&yc, cfg.atoms_per_class, cfg.lambda1, cfg.init_odl_iters, &odl_cfg)?;
        let rows = layout.atoms.class_range(c);
        dict.slice_mut(s![.., rows.clone()]).assign(&fit.dictionary);
        x.slice_mut(s![rows, cols]).assign(&fit.code);
    }

    let (dict0, x0) = if cfg.shared_atoms > 0 {
        let fit = odl_learn(&y_sorted, cfg.shared_atoms, cfg.lambda1, cfg.init_odl_iters, &odl_cfg)?;
        (fit.dictionary, fit.code)
    } else {
        (Mat::zeros((y_sorted.nrows(), 0)), Mat::zeros((0, n_total)))
    };

    let mut model = LrsdlModel {
        dict,
        dict0,
        atoms: layout.atoms.clone(),
        class_means: Mat::zeros((kk, num_classes)),
        shared_mean: Array1::zeros(cfg.shared_atoms),
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        eta: cfg.eta,
        w: cfg.w,
    };
    let mut state = LrsdlState::new(x, x0, &layout.samples)?;

    let mut history = vec![lrsdl_cost(&y_sorted, &model, &state, &layout)?];

    for _ in 0..cfg.iters {
        let (x_new, x0_new) = lrsdl_update_x(&y_sorted, &model, &state, &layout, &cfg.solve)?;
        state.x = x_new;
        state.x0 = x0_new;
        state.refresh_means(&layout.samples)?;

        let ybar = deflate_shared(&y_sorted, &model.dict0, &state.x0);
        let (e, f) = efddl_dict_quadratic(&ybar, &state.x, &layout)?;
        let problem = QuadDictProblem::new(e, f, model.dict.clone())
            .with_passes(cfg.solve.dict_passes, cfg.solve.dict_tol);
        model.dict = odl_dict_update(&problem)?.dict;

        if model.dict0.ncols() > 0 {
            let v = shared_target(&y_sorted, &model.dict, &state.x, &layout)?;
            let before = shared_dict_objective(&v, &model.dict0, &state.x0, model.eta)?;
            let update = lrsdl_update_d0(&y_sorted, &model, &state, &layout, &cfg.admm)?;
            let after = shared_dict_objective(&v, &update.dict0, &state.x0, model.eta)?;
            // ADMM iterates need not descend; keep the better of the two
            if !update.degenerate && after <= before {
                model.dict0 = update.dict0;
            }
        }

        let cost = lrsdl_cost(&y_sorted, &model, &state, &layout)?;
        if !cost.is_finite() {
            return Err(Error::NonFinite("lrsdl cost"));
        }
        let prev = *history.last().unwrap();
        history.push(cost);
        if (prev - cost).abs() <= cfg.rel_tol * prev.abs().max(1e-12) {
            break;
        }
    }

    // store classifier statistics
    for c in 0..num_classes {
        let cols = layout.samples.class_range(c);
        let xc = state.x.slice(s![.., cols]).to_owned();
        model.class_means.column_mut(c).assign(&column_mean(&xc));
    }
    if model.dict0.ncols() > 0 {
        model.shared_mean = column_mean(&state.x0);
    }

    Ok(LrsdlFit {
        model,
        state,
        layout,
        cost_history: history,
    })
}

/// Codes one sample over `[D, D0]` with the shared code pulled toward its
/// training mean, then scores classes by weighted residual and mean
/// proximity.
pub fn lrsdl_classify(sample: &Array1<f64>, model: &LrsdlModel) -> Result<ClassificationResult> {
    let kk = model.dict.ncols();
    let k0 = model.dict0.ncols();
    let y = sample
        .clone()
        .into_shape_with_order((sample.len(), 1))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;

    let dbar = if k0 > 0 {
        concatenate![Axis(1), model.dict.view(), model.dict0.view()]
    } else {
        model.dict.clone()
    };
    let gram = dbar.t().dot(&dbar);
    let dty = dbar.t().dot(&y);
    let lip = extreme_eigenvalue(&gram, Extreme::Max)?.max(1e-12) + model.lambda2;
    let m0 = &model.shared_mean;

    let problem = FistaProblem::new(
        |xb: &Mat| {
            let mut g = gram.dot(xb) - &dty;
            if k0 > 0 {
                for (i, &mv) in m0.iter().enumerate() {
                    g[[kk + i, 0]] += model.lambda2 * (xb[[kk + i, 0]] - mv);
                }
            }
            g
        },
        lip,
        model.lambda1,
        ProxKind::l1(),
        Mat::zeros((kk + k0, 1)),
    )
    .with_iters(500, 1e-8)
    .with_objective(|xb: &Mat| {
        let mut obj = 0.5 * fro_norm_sq(&(&y - &dbar.dot(xb))) + model.lambda1 * l1_norm(xb);
        if k0 > 0 {
            let mut dev = 0.0;
            for (i, &mv) in m0.iter().enumerate() {
                let d = xb[[kk + i, 0]] - mv;
                dev += d * d;
            }
            obj += 0.5 * model.lambda2 * dev;
        }
        obj
    });
    let (xbar, _) = fista_solve(&problem)?;

    let x = xbar.slice(s![0..kk, 0]).to_owned();
    let x0 = xbar.slice(s![kk.., 0]).to_owned();
    let zero_code = xbar.iter().all(|v| v.abs() < 1e-14);

    let ybar = if k0 > 0 {
        &y.column(0).to_owned() - &model.dict0.dot(&x0)
    } else {
        y.column(0).to_owned()
    };

    let mut scores = Vec::with_capacity(model.num_classes());
    for c in 0..model.num_classes() {
        let mean_dev = {
            let mc = model.class_means.column(c).to_owned();
            crate::mat::vec_norm_sq(&(&x - &mc))
        };
        if zero_code {
            scores.push(mean_dev);
            continue;
        }
        let rows = model.atoms.class_range(c);
        let dc = model.dict.slice(s![.., rows.clone()]);
        let xc = x.slice(s![rows]).to_owned();
        let resid = &ybar - &dc.dot(&xc);
        scores.push(model.w * crate::mat::vec_norm_sq(&resid) + (1.0 - model.w) * mean_dev);
    }

    let mut result = ClassificationResult::from_residuals(scores);
    result.low_confidence = zero_code;
    Ok(result)
}
