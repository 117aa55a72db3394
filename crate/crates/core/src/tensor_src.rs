//! Multi-channel sparse classification: four coding structures over tensor
//! codes, the shared-ground decision rule with confuser rejection, signal
//! denoising by code splitting, multi-look shift coding and the per-channel
//! discriminative dictionary learner.

use ndarray::{concatenate, s, Array1, Axis};

use crate::data::{ClassificationResult, LabeledDataset};
use crate::error::{Error, Result};
use crate::fddl::{
    discriminative_fidelity, efddl_grad_x, efddl_lipschitz, efddl_update_d, fisher_term,
    FddlLayout, FddlSolveConfig,
};
use crate::mat::{extreme_eigenvalue, normalize_columns, BlockPartition, Extreme, Mat};
use crate::solvers::{
    fista_solve, lasso_code, CodeSpace, FistaProblem, LassoConfig, PenaltyKind, ProxKind,
};
use crate::tensor3::Tensor3;

/// Cross-channel sparsity structure imposed on the tensor code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparsityMode {
    /// Independent l1 per channel; residuals summed at decision time.
    Cr,
    /// Channels concatenated into one long vector, one shared code.
    Cc,
    /// Tube sparsity: a dictionary column is active in all channels or none.
    Sm,
    /// Group tensor sparsity at class-block granularity.
    Gt,
}

impl SparsityMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cr" => Ok(Self::Cr),
            "cc" => Ok(Self::Cc),
            "sm" => Ok(Self::Sm),
            "gt" => Ok(Self::Gt),
            other => Err(Error::InvalidArgument(format!("unknown mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for SparsityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Cr => "cr",
            Self::Cc => "cc",
            Self::Sm => "sm",
            Self::Gt => "gt",
        };
        write!(f, "{s}")
    }
}

/// Class-partitioned multi-channel dictionary, optionally with a trailing
/// shared (ground) block.
#[derive(Debug, Clone)]
pub struct TensorDictionary {
    pub dict: Tensor3,
    pub partition: BlockPartition,
}

impl TensorDictionary {
    pub fn new(dict: Tensor3, partition: BlockPartition) -> Result<Self> {
        if partition.total() != dict.cols() {
            return Err(Error::PartitionMismatch(format!(
                "partition covers {} columns, dictionary has {}",
                partition.total(),
                dict.cols()
            )));
        }
        Ok(Self { dict, partition })
    }

    /// Normalizes every column of every channel onto the unit sphere.
    pub fn normalized(mut self) -> Self {
        for t in 0..self.dict.num_channels() {
            *self.dict.channel_mut(t) = normalize_columns(self.dict.channel(t));
        }
        self
    }

    /// Appends a shared block to a class-only dictionary.
    pub fn with_shared(classes: Tensor3, shared: Tensor3, class_sizes: Vec<usize>) -> Result<Self> {
        if classes.num_channels() != shared.num_channels() {
            return Err(Error::ShapeMismatch("channel counts differ".into()));
        }
        let k0 = shared.cols();
        let mut chans = Vec::with_capacity(classes.num_channels());
        for t in 0..classes.num_channels() {
            chans.push(concatenate![
                Axis(1),
                classes.channel(t).view(),
                shared.channel(t).view()
            ]);
        }
        let partition = BlockPartition::new(class_sizes, k0)?;
        Self::new(Tensor3::new(chans)?, partition)
    }

    pub fn num_classes(&self) -> usize {
        self.partition.num_classes()
    }

    pub fn num_channels(&self) -> usize {
        self.dict.num_channels()
    }

    /// Class block `c` (0-based) across channels.
    pub fn class_block(&self, c: usize) -> Tensor3 {
        self.dict.slice_cols(self.partition.class_range(c))
    }

    /// Shared block across channels (zero columns when absent).
    pub fn shared_block(&self) -> Tensor3 {
        self.dict.slice_cols(self.partition.shared_range())
    }
}

#[derive(Debug, Clone)]
pub struct TensorCodingConfig {
    pub lambda: f64,
    pub nonneg: bool,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for TensorCodingConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            nonneg: false,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

fn mode_prox(mode: SparsityMode, partition: &BlockPartition, nonneg: bool) -> ProxKind {
    match mode {
        SparsityMode::Cr | SparsityMode::Cc => ProxKind {
            penalty: PenaltyKind::L1,
            nonneg,
        },
        SparsityMode::Sm => ProxKind {
            penalty: PenaltyKind::TubeL2,
            nonneg,
        },
        SparsityMode::Gt => ProxKind {
            penalty: PenaltyKind::GroupL2(partition.clone()),
            nonneg,
        },
    }
}

/// Codes multi-channel samples `y` (d × n × T) over the dictionary under the
/// requested sparsity structure. CR and CC reduce to plain lasso solves; SM
/// and GT run FISTA over the tensor code with their structured prox.
pub fn tensor_code(
    y: &Tensor3,
    dict: &TensorDictionary,
    mode: SparsityMode,
    cfg: &TensorCodingConfig,
) -> Result<Tensor3> {
    let d = &dict.dict;
    if y.num_channels() != d.num_channels() {
        return Err(Error::ShapeMismatch(format!(
            "sample has {} channels, dictionary {}",
            y.num_channels(),
            d.num_channels()
        )));
    }
    if y.rows() != d.rows() {
        return Err(Error::ShapeMismatch("sample/dictionary dimensions".into()));
    }
    let nch = d.num_channels();
    let prox = mode_prox(mode, &dict.partition, cfg.nonneg);
    let lasso_cfg = LassoConfig::default()
        .with_iters(cfg.max_iter, cfg.tol)
        .with_prox(prox.clone());

    match mode {
        SparsityMode::Cr => {
            let mut chans = Vec::with_capacity(nch);
            for t in 0..nch {
                chans.push(lasso_code(y.channel(t), d.channel(t), cfg.lambda, &lasso_cfg)?);
            }
            Tensor3::new(chans)
        }
        SparsityMode::Cc => {
            let d_views: Vec<_> = d.channels().iter().map(|c| c.view()).collect();
            let y_views: Vec<_> = y.channels().iter().map(|c| c.view()).collect();
            let d_stack = concatenate(Axis(0), &d_views).expect("same column count");
            let y_stack = concatenate(Axis(0), &y_views).expect("same column count");
            let code = lasso_code(&y_stack, &d_stack, cfg.lambda, &lasso_cfg)?;
            Tensor3::new(vec![code; nch])
        }
        SparsityMode::Sm | SparsityMode::Gt => {
            let grams: Vec<Mat> = (0..nch)
                .map(|t| d.channel(t).t().dot(d.channel(t)))
                .collect();
            let rhs: Vec<Mat> = (0..nch)
                .map(|t| d.channel(t).t().dot(y.channel(t)))
                .collect();
            let mut lip = 0.0f64;
            for gram in &grams {
                lip = lip.max(extreme_eigenvalue(gram, Extreme::Max)?);
            }
            let lip = lip.max(1e-12);
            let init = Tensor3::zeros(d.cols(), y.cols(), nch);

            let problem = FistaProblem::new(
                |x: &Tensor3| {
                    let chans = (0..nch)
                        .map(|t| grams[t].dot(x.channel(t)) - &rhs[t])
                        .collect();
                    Tensor3::new(chans).expect("matching shapes")
                },
                lip,
                cfg.lambda,
                prox.clone(),
                init,
            )
            .with_iters(cfg.max_iter, cfg.tol)
            .with_objective(|x: &Tensor3| {
                let fit: f64 = (0..nch)
                    .map(|t| {
                        crate::mat::fro_norm_sq(&(y.channel(t) - &d.channel(t).dot(x.channel(t))))
                    })
                    .sum();
                0.5 * fit + cfg.lambda * x.penalty_value(&prox).expect("valid partition")
            });
            let (code, _) = fista_solve(&problem)?;
            Ok(code)
        }
    }
}

/// Rejection thresholds of the shared-class decision rule.
#[derive(Debug, Clone, Copy)]
pub struct ConfuserThresholds {
    /// Ground-energy floor: below it the signal is ground only.
    pub epsilon: f64,
    /// Residual ceiling: above it no class explains the signal.
    pub tau: f64,
}

impl Default for ConfuserThresholds {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            tau: f64::INFINITY,
        }
    }
}

/// Codes the sample, strips the shared-block contribution and scores each
/// class by its residual. Rejects as confuser when no residual clears `tau`,
/// when the deflated signal carries less energy than `epsilon`, or when the
/// winner is the designated known-confuser class.
pub fn generalized_src(
    y: &Tensor3,
    dict: &TensorDictionary,
    mode: SparsityMode,
    cfg: &TensorCodingConfig,
    thresholds: &ConfuserThresholds,
    confuser_class: Option<usize>,
) -> Result<ClassificationResult> {
    let code = tensor_code(y, dict, mode, cfg)?;
    let shared = dict.shared_block();
    let ybar = if dict.partition.shared_size() > 0 {
        let x0 = code.slice_rows(dict.partition.shared_range());
        y.sub(&shared.matmul(&x0)?)
    } else {
        y.clone()
    };

    let mut residuals = Vec::with_capacity(dict.num_classes());
    for c in 0..dict.num_classes() {
        let dc = dict.class_block(c);
        let xc = code.slice_rows(dict.partition.class_range(c));
        residuals.push(ybar.sub(&dc.matmul(&xc)?).fro_norm());
    }

    let mut result = ClassificationResult::from_residuals(residuals);
    let min_res = result.residuals[result.label - 1];
    if min_res > thresholds.tau || ybar.fro_norm() < thresholds.epsilon {
        result.confuser = true;
        result.label = 0;
    } else if confuser_class == Some(result.label) {
        result.confuser = true;
        result.label = 0;
    }
    Ok(result)
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = ((sorted.len() as f64 - 1.0) * p).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Data-driven rejection thresholds: `epsilon` is the 5th percentile of the
/// deflated-signal energy over training grounds, `tau` the 95th percentile
/// of correct-class residuals over a held-out slice of training targets.
pub fn calibrate_thresholds(
    targets: &[(Tensor3, usize)],
    grounds: &[Tensor3],
    dict: &TensorDictionary,
    mode: SparsityMode,
    cfg: &TensorCodingConfig,
) -> Result<ConfuserThresholds> {
    let mut ground_energy = Vec::with_capacity(grounds.len());
    for g in grounds {
        let code = tensor_code(g, dict, mode, cfg)?;
        let ybar = if dict.partition.shared_size() > 0 {
            let x0 = code.slice_rows(dict.partition.shared_range());
            g.sub(&dict.shared_block().matmul(&x0)?)
        } else {
            g.clone()
        };
        ground_energy.push(ybar.fro_norm());
    }
    ground_energy.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut residuals = Vec::with_capacity(targets.len());
    for (y, label) in targets {
        if *label == 0 {
            continue;
        }
        let code = tensor_code(y, dict, mode, cfg)?;
        let ybar = if dict.partition.shared_size() > 0 {
            let x0 = code.slice_rows(dict.partition.shared_range());
            y.sub(&dict.shared_block().matmul(&x0)?)
        } else {
            y.clone()
        };
        let c = label - 1;
        let dc = dict.class_block(c);
        let xc = code.slice_rows(dict.partition.class_range(c));
        residuals.push(ybar.sub(&dc.matmul(&xc)?).fro_norm());
    }
    residuals.sort_by(|a, b| a.partial_cmp(b).unwrap());

    Ok(ConfuserThresholds {
        epsilon: percentile(&ground_energy, 0.05),
        tau: if residuals.is_empty() {
            f64::INFINITY
        } else {
            percentile(&residuals, 0.95)
        },
    })
}

/// Splits a noisy signal into an object part and a ground part by tube-
/// sparse coding over `[D_objects, D_ground]`. The full reconstruction is
/// the sum of the two returned parts.
pub fn denoise_decompose(
    y: &Tensor3,
    d_objects: &Tensor3,
    d_ground: &Tensor3,
    lambda: f64,
    cfg: &TensorCodingConfig,
) -> Result<(Tensor3, Tensor3)> {
    let k_obj = d_objects.cols();
    if k_obj == 0 {
        return Err(Error::EmptyDictionary);
    }
    let dict = TensorDictionary::with_shared(d_objects.clone(), d_ground.clone(), vec![k_obj])?;
    let mut cfg = cfg.clone();
    cfg.lambda = lambda;
    let code = tensor_code(y, &dict, SparsityMode::Sm, &cfg)?;
    let x_obj = code.slice_rows(0..k_obj);
    let clean = d_objects.matmul(&x_obj)?;
    let ground = if d_ground.cols() > 0 {
        let x_g = code.slice_rows(k_obj..code.rows());
        d_ground.matmul(&x_g)?
    } else {
        Tensor3::zeros(y.rows(), y.cols(), y.num_channels())
    };
    Ok((clean, ground))
}

/// Circularly shifts each class block left by `look − 1` positions; the
/// shared block is never shifted. Class blocks must be ordered by view
/// angle for the shifted stacks to align into tubes.
pub fn shift_dictionary(d: &Mat, partition: &BlockPartition, look: usize) -> Result<Mat> {
    if look < 1 {
        return Err(Error::InvalidArgument("look index starts at 1".into()));
    }
    if partition.total() != d.ncols() {
        return Err(Error::PartitionMismatch(
            "partition does not cover the dictionary".into(),
        ));
    }
    let mut out = d.clone();
    for c in 0..partition.num_classes() {
        let range = partition.class_range(c);
        let size = range.len();
        let shift = (look - 1) % size;
        if shift == 0 {
            continue;
        }
        for (pos, col) in range.clone().enumerate() {
            let src = range.start + (pos + shift) % size;
            out.column_mut(col).assign(&d.column(src));
        }
    }
    Ok(out)
}

/// Multi-look classification: stack the looks as channels, give channel `t`
/// the dictionary shifted by `t − 1`, and decide with tube-sparse coding so
/// consecutive views share one tube support.
pub fn shiftsrc_classify(
    looks: &[Array1<f64>],
    d: &Mat,
    partition: &BlockPartition,
    cfg: &TensorCodingConfig,
    thresholds: &ConfuserThresholds,
    confuser_class: Option<usize>,
) -> Result<ClassificationResult> {
    if looks.len() < 2 {
        return Err(Error::InvalidArgument(
            "shift coding needs at least two looks".into(),
        ));
    }
    let dim = looks[0].len();
    if looks.iter().any(|l| l.len() != dim) {
        return Err(Error::ShapeMismatch("looks must share dimension".into()));
    }
    let mut dict_chans = Vec::with_capacity(looks.len());
    let mut y_chans = Vec::with_capacity(looks.len());
    for (idx, look) in looks.iter().enumerate() {
        dict_chans.push(shift_dictionary(d, partition, idx + 1)?);
        y_chans.push(
            look.clone()
                .into_shape_with_order((dim, 1))
                .map_err(|e| Error::ShapeMismatch(e.to_string()))?,
        );
    }
    let dict = TensorDictionary::new(Tensor3::new(dict_chans)?, partition.clone())?;
    let y = Tensor3::new(y_chans)?;
    generalized_src(&y, &dict, SparsityMode::Sm, cfg, thresholds, confuser_class)
}

#[derive(Debug, Clone)]
pub struct TensorDlConfig {
    pub atoms_per_class: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mode: SparsityMode,
    pub nonneg: bool,
    pub iters: usize,
    pub rel_tol: f64,
    pub init_odl_iters: usize,
    pub solve: FddlSolveConfig,
}

impl Default for TensorDlConfig {
    fn default() -> Self {
        Self {
            atoms_per_class: 8,
            lambda1: 0.01,
            lambda2: 0.003,
            mode: SparsityMode::Sm,
            nonneg: false,
            iters: 20,
            rel_tol: 1e-4,
            init_odl_iters: 10,
            solve: FddlSolveConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TensorDlFit {
    pub dictionary: TensorDictionary,
    pub code: Tensor3,
    pub layout: FddlLayout,
    pub cost_history: Vec<f64>,
}

/// Joint cost: per-channel discriminative fidelity and Fisher terms plus
/// the cross-channel sparsity penalty.
pub fn tensordl_cost(
    y: &Tensor3,
    dict: &Tensor3,
    code: &Tensor3,
    layout: &FddlLayout,
    lambda1: f64,
    lambda2: f64,
    prox: &ProxKind,
) -> Result<f64> {
    let mut total = 0.0;
    for t in 0..y.num_channels() {
        total += 0.5 * discriminative_fidelity(y.channel(t), dict.channel(t), code.channel(t), layout)?;
        total += 0.5 * lambda2 * fisher_term(code.channel(t), &layout.samples)?;
    }
    Ok(total + lambda1 * code.penalty_value(prox)?)
}

/// Per-channel Fisher-discriminative dictionary learning joined by a
/// cross-channel sparsity prox on the shared code tensor.
pub fn tensordl_train(dataset: &LabeledDataset, cfg: &TensorDlConfig) -> Result<TensorDlFit> {
    let y_all = match &dataset.samples {
        crate::data::Samples::Multi(t) => t.clone(),
        crate::data::Samples::Single(m) => Tensor3::from_mat(m.clone()),
    };
    let num_classes = dataset.num_classes();
    if num_classes == 0 {
        return Err(Error::InvalidArgument("dataset has no class labels".into()));
    }

    // sort columns class by class
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
    let nch = y_all.num_channels();
    let mut y_chans = Vec::with_capacity(nch);
    for t in 0..nch {
        let src = y_all.channel(t);
        let mut m = Mat::zeros(src.dim());
        for (j, &i) in order.iter().enumerate() {
            m.column_mut(j).assign(&src.column(i));
        }
        y_chans.push(m);
    }
    let y = Tensor3::new(y_chans)?;

    let samples_part = BlockPartition::new(class_cols.iter().map(|c| c.len()).collect(), 0)?;
    let atoms_part = BlockPartition::uniform(num_classes, cfg.atoms_per_class);
    let layout = FddlLayout::new(samples_part, atoms_part.clone())?;
    let kk = atoms_part.total();
    let n_total = y.cols();
    let prox = mode_prox(cfg.mode, &atoms_part, cfg.nonneg);

    // per-channel per-class reconstructive warm start
    let odl_cfg = crate::odl::OdlConfig::default();
    let mut dict_chans = Vec::with_capacity(nch);
    let mut code_chans = Vec::with_capacity(nch);
    for t in 0..nch {
        let mut dct = Mat::zeros((y.rows(), kk));
        let mut xt = Mat::zeros((kk, n_total));
        for c in 0..num_classes {
            let cols = layout.samples.class_range(c);
            let yc = y.channel(t).slice(s![.., cols.clone()]).to_owned();
            let fit = crate::odl::odl_learn(
                &yc,
                cfg.atoms_per_class,
                cfg.lambda1,
                cfg.init_odl_iters,
                &odl_cfg,
            )?;
            let rows = layout.atoms.class_range(c);
            dct.slice_mut(s![.., rows.clone()]).assign(&fit.dictionary);
            xt.slice_mut(s![rows, cols]).assign(&fit.code);
        }
        dict_chans.push(dct);
        code_chans.push(xt);
    }
    let mut dict = Tensor3::new(dict_chans)?;
    let mut code = Tensor3::new(code_chans)?;

    let mut history = vec![tensordl_cost(
        &y, &dict, &code, &layout, cfg.lambda1, cfg.lambda2, &prox,
    )?];

    for _ in 0..cfg.iters {
        // joint code update with the cross-channel prox
        let mut lip = 0.0f64;
        for t in 0..nch {
            lip = lip.max(efddl_lipschitz(dict.channel(t), &layout.atoms, cfg.lambda2)?);
        }
        code = {
            let dict_ref = &dict;
            let problem = FistaProblem::new(
                |x: &Tensor3| {
                    let chans = (0..nch)
                        .map(|t| {
                            efddl_grad_x(
                                y.channel(t),
                                dict_ref.channel(t),
                                x.channel(t),
                                &layout,
                                cfg.lambda2,
                            )
                            .expect("validated shapes")
                        })
                        .collect();
                    Tensor3::new(chans).expect("matching shapes")
                },
                lip,
                cfg.lambda1,
                prox.clone(),
                code.clone(),
            )
            .with_iters(cfg.solve.max_iter, cfg.solve.tol)
            .with_objective(|x: &Tensor3| {
                tensordl_cost(&y, dict_ref, x, &layout, cfg.lambda1, cfg.lambda2, &prox)
                    .expect("validated shapes")
            });
            fista_solve(&problem)?.0
        };

        // per-channel dictionary update
        let mut new_chans = Vec::with_capacity(nch);
        for t in 0..nch {
            new_chans.push(efddl_update_d(
                y.channel(t),
                code.channel(t),
                dict.channel(t),
                &layout,
                &cfg.solve,
            )?);
        }
        dict = Tensor3::new(new_chans)?;

        let cost = tensordl_cost(&y, &dict, &code, &layout, cfg.lambda1, cfg.lambda2, &prox)?;
        if !cost.is_finite() {
            return Err(Error::NonFinite("tensordl cost"));
        }
        let prev = *history.last().unwrap();
        history.push(cost);
        if (prev - cost).abs() <= cfg.rel_tol * prev.abs().max(1e-12) {
            break;
        }
    }

    Ok(TensorDlFit {
        dictionary: TensorDictionary::new(dict, atoms_part)?,
        code,
        layout,
        cost_history: history,
    })
}
