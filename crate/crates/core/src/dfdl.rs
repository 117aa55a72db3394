//! Class-specific dictionaries that fit in-class patches and reject
//! complementary ones, plus the patch/image/region decision pipeline.

use ndarray::{concatenate, s, Array1, Array2, Axis};

use crate::data::{ClassificationResult, LabeledDataset};
use crate::error::{Error, Result};
use crate::mat::{extreme_eigenvalue, fro_norm_sq, Extreme, Mat};
use crate::odl::{odl_dict_update, odl_learn, Normalization, OdlConfig, QuadDictProblem};
use crate::solvers::{lasso_code, omp_batch, LassoConfig};

/// Counts nonzeros (|x| > 1e-10) per column, returns the rounded mean
/// clamped to at least one.
pub fn estimate_sparsity_level(x0: &Mat) -> usize {
    if x0.ncols() == 0 {
        return 1;
    }
    let total: usize = x0
        .columns()
        .into_iter()
        .map(|c| c.iter().filter(|v| v.abs() > 1e-10).count())
        .sum();
    let mean = total as f64 / x0.ncols() as f64;
    (mean.round() as usize).max(1)
}

#[derive(Debug, Clone)]
pub struct DfdlConfig {
    pub atoms_per_class: usize,
    pub rho: f64,
    /// l1 weight of the reconstructive warm start.
    pub lambda: f64,
    /// l1 weight of the classifier coding step.
    pub gamma: f64,
    pub outer_iters: usize,
    pub rel_tol: f64,
    pub warm_start_iters: usize,
    pub dict_passes: usize,
    pub dict_tol: f64,
}

impl Default for DfdlConfig {
    fn default() -> Self {
        Self {
            atoms_per_class: 16,
            rho: 0.1,
            lambda: 0.1,
            gamma: 0.01,
            outer_iters: 30,
            rel_tol: 1e-4,
            warm_start_iters: 10,
            dict_passes: 10,
            dict_tol: 1e-6,
        }
    }
}

/// One trained class: its dictionary and estimated sparsity level.
#[derive(Debug, Clone)]
pub struct DfdlClassFit {
    pub dict: Mat,
    pub sparsity: usize,
    /// Value of `(1/N)‖Y − DX‖² − (ρ/N̄)‖Ȳ − DX̄‖²` after each outer step.
    pub objective_history: Vec<f64>,
    /// Convexified surrogate value before and after each dictionary update.
    pub surrogate_history: Vec<(f64, f64)>,
}

fn dfdl_objective(
    y_in: &Mat,
    y_out: &Mat,
    d: &Mat,
    x_in: &Mat,
    x_out: &Mat,
    rho: f64,
) -> f64 {
    let n = y_in.ncols() as f64;
    let n_bar = y_out.ncols() as f64;
    fro_norm_sq(&(y_in - &d.dot(x_in))) / n - rho * fro_norm_sq(&(y_out - &d.dot(x_out))) / n_bar
}

/// `(E, F)` of the discriminative quadratic:
/// `E = (1/N) Y Xᵀ − (ρ/N̄) Ȳ X̄ᵀ`, `F = (1/N) X Xᵀ − (ρ/N̄) X̄ X̄ᵀ`.
pub fn dfdl_quadratic(
    y_in: &Mat,
    y_out: &Mat,
    x_in: &Mat,
    x_out: &Mat,
    rho: f64,
) -> (Mat, Mat) {
    let n = y_in.ncols() as f64;
    let n_bar = y_out.ncols() as f64;
    let e = y_in.dot(&x_in.t()) / n - &(y_out.dot(&x_out.t()) * (rho / n_bar));
    let f = x_in.dot(&x_in.t()) / n - &(x_out.dot(&x_out.t()) * (rho / n_bar));
    (e, f)
}

/// Learns one class dictionary from in-class samples `y_in` and
/// complementary samples `y_out`: reconstructive warm start, sparsity-level
/// estimate, then alternating batch OMP and the convexified dictionary
/// update with columns kept exactly unit norm.
pub fn dfdl_train_class(y_in: &Mat, y_out: &Mat, cfg: &DfdlConfig) -> Result<DfdlClassFit> {
    if y_in.ncols() == 0 || y_out.ncols() == 0 {
        return Err(Error::InvalidArgument(
            "both sample sets must be nonempty".into(),
        ));
    }
    if y_in.nrows() != y_out.nrows() {
        return Err(Error::ShapeMismatch("sample dimensions differ".into()));
    }

    let warm = odl_learn(
        y_in,
        cfg.atoms_per_class,
        cfg.lambda,
        cfg.warm_start_iters,
        &OdlConfig::default(),
    )?;
    let sparsity = estimate_sparsity_level(&warm.code).min(cfg.atoms_per_class);
    // sphere-normalized start (the warm start only guarantees the ball)
    let mut d = crate::mat::normalize_columns(&warm.dictionary);

    let y_all = concatenate![Axis(1), y_in.view(), y_out.view()];
    let n = y_in.ncols();

    let mut objective_history: Vec<f64> = Vec::new();
    let mut surrogate_history = Vec::new();
    let mut rising = 0usize;

    for _ in 0..cfg.outer_iters {
        let codes = omp_batch(&y_all, &d, sparsity)?.code;
        let x_in = codes.slice(s![.., 0..n]).to_owned();
        let x_out = codes.slice(s![.., n..]).to_owned();

        let (e, f) = dfdl_quadratic(y_in, y_out, &x_in, &x_out, cfg.rho);
        let shift = extreme_eigenvalue(&f, Extreme::Min)?;
        let mut f_hat = f;
        for i in 0..f_hat.nrows() {
            f_hat[[i, i]] -= shift;
        }

        let before = crate::odl::quad_dict_objective(&d, &e, &f_hat);
        let problem = QuadDictProblem::new(e.clone(), f_hat.clone(), d.clone())
            .with_passes(cfg.dict_passes, cfg.dict_tol)
            .with_normalization(Normalization::Sphere);
        d = odl_dict_update(&problem)?.dict;
        let after = crate::odl::quad_dict_objective(&d, &e, &f_hat);
        surrogate_history.push((before, after));

        let obj = dfdl_objective(y_in, y_out, &d, &x_in, &x_out, cfg.rho);
        if let Some(&prev) = objective_history.last() {
            if obj > prev + 1e-12 {
                rising += 1;
                if rising >= 3 {
                    return Err(Error::Diverged(format!(
                        "discriminative objective rose 3 consecutive iterations \
                         (rho = {} too aggressive)",
                        cfg.rho
                    )));
                }
            } else {
                rising = 0;
            }
            if (prev - obj).abs() <= cfg.rel_tol * prev.abs().max(1e-12) {
                objective_history.push(obj);
                break;
            }
        }
        objective_history.push(obj);
    }

    Ok(DfdlClassFit {
        dict: d,
        sparsity,
        objective_history,
        surrogate_history,
    })
}

/// Per-class dictionaries with the classifier weight.
#[derive(Debug, Clone)]
pub struct DfdlModel {
    pub dicts: Vec<Mat>,
    pub sparsity: Vec<usize>,
    pub gamma: f64,
    pub rho: f64,
}

impl DfdlModel {
    pub fn num_classes(&self) -> usize {
        self.dicts.len()
    }

    pub fn total_dictionary(&self) -> Mat {
        let views: Vec<_> = self.dicts.iter().map(|d| d.view()).collect();
        concatenate(Axis(1), &views).expect("same row count")
    }

    /// Trains one dictionary per class against the complement of that class.
    pub fn train(dataset: &LabeledDataset, cfg: &DfdlConfig) -> Result<(Self, Vec<DfdlClassFit>)> {
        let num_classes = dataset.num_classes();
        if num_classes < 2 {
            return Err(Error::InvalidArgument(
                "need at least two classes".into(),
            ));
        }
        let y = dataset.samples.as_single()?;
        let mut dicts = Vec::new();
        let mut sparsity = Vec::new();
        let mut fits = Vec::new();
        for c in 1..=num_classes {
            let y_in = dataset.class_matrix(c)?;
            let out_idx: Vec<usize> = dataset
                .labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l != c && l != 0)
                .map(|(i, _)| i)
                .collect();
            let mut y_out = Mat::zeros((y.nrows(), out_idx.len()));
            for (j, &i) in out_idx.iter().enumerate() {
                y_out.column_mut(j).assign(&y.column(i));
            }
            let fit = dfdl_train_class(&y_in, &y_out, cfg)?;
            dicts.push(fit.dict.clone());
            sparsity.push(fit.sparsity);
            fits.push(fit);
        }
        Ok((
            Self {
                dicts,
                sparsity,
                gamma: cfg.gamma,
                rho: cfg.rho,
            },
            fits,
        ))
    }
}

/// Codes the patch over the concatenated dictionaries and picks the class
/// with the smallest reconstruction residual.
pub fn dfdl_classify(sample: &Array1<f64>, model: &DfdlModel) -> Result<ClassificationResult> {
    let d_total = model.total_dictionary();
    let y = sample
        .clone()
        .into_shape_with_order((sample.len(), 1))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let cfg = LassoConfig::default().with_iters(500, 1e-8);
    let code = lasso_code(&y, &d_total, model.gamma, &cfg)?;

    if code.iter().all(|v| v.abs() < 1e-14) {
        // raw nearest-dictionary residual with x = 0: every class scores ‖y‖
        let norm = sample.dot(sample).sqrt();
        let mut r = ClassificationResult::from_residuals(vec![norm; model.num_classes()]);
        r.low_confidence = true;
        return Ok(r);
    }

    let mut offset = 0;
    let mut residuals = Vec::with_capacity(model.num_classes());
    for dc in &model.dicts {
        let k = dc.ncols();
        let xc = code.slice(s![offset..offset + k, 0]).to_owned();
        let diff = &y.column(0).to_owned() - &dc.dot(&xc);
        residuals.push(crate::mat::vec_norm(&diff));
        offset += k;
    }
    Ok(ClassificationResult::from_residuals(residuals))
}

/// Threshold on the healthy-patch fraction that maximizes training
/// accuracy of the rule "healthy iff fraction >= theta"; ties prefer the
/// smaller threshold. A linear classifier on this one-dimensional feature
/// is exactly such a threshold.
pub fn learn_theta(train_fractions: &[(f64, bool)]) -> Result<f64> {
    if train_fractions.is_empty() {
        return Err(Error::InvalidArgument("no training fractions".into()));
    }
    let mut values: Vec<f64> = train_fractions.iter().map(|&(f, _)| f).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();

    let mut candidates = vec![0.0];
    for pair in values.windows(2) {
        candidates.push(0.5 * (pair[0] + pair[1]));
    }
    let top = *values.last().unwrap();
    if top < 1.0 {
        candidates.push((top + 1.0) * 0.5);
    }

    let accuracy = |theta: f64| -> usize {
        train_fractions
            .iter()
            .filter(|&&(f, healthy)| (f >= theta) == healthy)
            .count()
    };

    let mut best = candidates[0];
    let mut best_acc = accuracy(best);
    for &theta in &candidates[1..] {
        let acc = accuracy(theta);
        if acc > best_acc || (acc == best_acc && theta < best) {
            best = theta;
            best_acc = acc;
        }
    }
    Ok(best)
}

/// Healthy iff the healthy-patch proportion reaches `theta`.
pub fn image_classify(healthy_fraction: f64, theta: f64) -> bool {
    healthy_fraction >= theta
}

/// Classifies every patch column, then applies the proportion rule with the
/// given healthy class id. Returns (healthy decision, healthy fraction).
pub fn image_classify_patches(
    patches: &Mat,
    model: &DfdlModel,
    healthy_class: usize,
    theta: f64,
) -> Result<(bool, f64)> {
    if patches.ncols() == 0 {
        return Err(Error::InvalidArgument("image has no patches".into()));
    }
    let mut healthy = 0usize;
    for col in patches.columns() {
        let r = dfdl_classify(&col.to_owned(), model)?;
        if r.label == healthy_class {
            healthy += 1;
        }
    }
    let fraction = healthy as f64 / patches.ncols() as f64;
    Ok((image_classify(fraction, theta), fraction))
}

/// Region decision: the grid holds per-patch detections; the image is
/// positive when some 4-connected component has at least `m` cells.
pub fn mvp_detect(grid: &Array2<bool>, m: usize) -> bool {
    largest_component(grid) >= m.max(1)
}

/// Size of the largest 4-connected component of `true` cells.
pub fn largest_component(grid: &Array2<bool>) -> usize {
    let (rows, cols) = grid.dim();
    let mut seen = Array2::<bool>::from_elem((rows, cols), false);
    let mut best = 0usize;
    let mut stack = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if !grid[[r, c]] || seen[[r, c]] {
                continue;
            }
            let mut size = 0usize;
            stack.push((r, c));
            seen[[r, c]] = true;
            while let Some((i, j)) = stack.pop() {
                size += 1;
                let mut push = |a: usize, b: usize| {
                    if grid[[a, b]] && !seen[[a, b]] {
                        seen[[a, b]] = true;
                        stack.push((a, b));
                    }
                };
                if i > 0 {
                    push(i - 1, j);
                }
                if i + 1 < rows {
                    push(i + 1, j);
                }
                if j > 0 {
                    push(i, j - 1);
                }
                if j + 1 < cols {
                    push(i, j + 1);
                }
            }
            best = best.max(size);
        }
    }
    best
}
