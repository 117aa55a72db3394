//! Fisher-discriminative cost, its efficient sparse-code update (FISTA on
//! the block-doubled gradient) and the single-problem dictionary update.

use ndarray::s;

use crate::error::{Error, Result};
use crate::mat::{
    column_mean_matrix, doubled_diagonal, extreme_eigenvalue, fro_norm_sq, l1_norm, BlockPartition,
    Extreme, Mat,
};
use crate::odl::{odl_dict_update, QuadDictProblem};
use crate::solvers::{fista_solve, FistaProblem, ProxKind};

/// Layout of one Fisher-discriminative problem: `Y` columns grouped by class,
/// `D` columns (= `X` rows) grouped by per-class atom blocks.
#[derive(Debug, Clone)]
pub struct FddlLayout {
    /// Per-class sample counts (columns of `Y`/`X`).
    pub samples: BlockPartition,
    /// Per-class atom counts (columns of `D`, rows of `X`).
    pub atoms: BlockPartition,
}

impl FddlLayout {
    pub fn new(samples: BlockPartition, atoms: BlockPartition) -> Result<Self> {
        if samples.num_classes() != atoms.num_classes() {
            return Err(Error::PartitionMismatch(
                "sample and atom partitions disagree on class count".into(),
            ));
        }
        Ok(Self { samples, atoms })
    }

    pub fn num_classes(&self) -> usize {
        self.samples.num_classes()
    }
}

/// `[M_1 .. M_C]`: per-class mean matrices laid side by side.
pub fn classwise_mean_matrix(x: &Mat, samples: &BlockPartition) -> Result<Mat> {
    let mut out = Mat::zeros(x.dim());
    for c in 0..samples.num_classes() {
        let r = samples.class_range(c);
        let xc = x.slice(s![.., r.clone()]).to_owned();
        let mc = column_mean_matrix(&xc, r.len())?;
        out.slice_mut(s![.., r]).assign(&mc);
    }
    Ok(out)
}

/// Discriminative fidelity
/// `Σ_c ‖Y_c − D X_c‖² + ‖Y_c − D_c X_c^c‖² + Σ_{j≠c} ‖D_j X_c^j‖²`.
pub fn discriminative_fidelity(y: &Mat, d: &Mat, x: &Mat, layout: &FddlLayout) -> Result<f64> {
    let c_num = layout.num_classes();
    let mut f = 0.0;
    let recon = y - &d.dot(x);
    f += fro_norm_sq(&recon);
    for c in 0..c_num {
        let cols = layout.samples.class_range(c);
        let yc = y.slice(s![.., cols.clone()]);
        for j in 0..c_num {
            let rows = layout.atoms.class_range(j);
            let dj = d.slice(s![.., rows.clone()]);
            let xjc = x.slice(s![rows, cols.clone()]);
            let block = dj.dot(&xjc);
            if j == c {
                f += fro_norm_sq(&(&yc - &block));
            } else {
                f += fro_norm_sq(&block);
            }
        }
    }
    Ok(f)
}

/// Fisher coefficient term
/// `Σ_c (‖X_c − M_c‖² − ‖M_c − M‖²) + ‖X‖²`.
pub fn fisher_term(x: &Mat, samples: &BlockPartition) -> Result<f64> {
    let mhat = classwise_mean_matrix(x, samples)?;
    let m = column_mean_matrix(x, x.ncols())?;
    let within = fro_norm_sq(&(x - &mhat));
    let between = fro_norm_sq(&(&mhat - &m));
    Ok(within - between + fro_norm_sq(x))
}

/// Full cost `½f + λ1‖X‖₁ + (λ2/2)g`.
pub fn fddl_cost(
    y: &Mat,
    d: &Mat,
    x: &Mat,
    layout: &FddlLayout,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    let f = discriminative_fidelity(y, d, x, layout)?;
    let g = fisher_term(x, &layout.samples)?;
    Ok(0.5 * f + lambda1 * l1_norm(x) + 0.5 * lambda2 * g)
}

/// Gradient of the smooth part:
/// `(M(DᵀD) + 2λ2 I) X − M(DᵀY) + λ2 (M − 2M̂)`.
pub fn efddl_grad_x(y: &Mat, d: &Mat, x: &Mat, layout: &FddlLayout, lambda2: f64) -> Result<Mat> {
    let gram = doubled_diagonal(&d.t().dot(d), &layout.atoms, &layout.atoms)?;
    let dty = doubled_diagonal(&d.t().dot(y), &layout.atoms, &layout.samples)?;
    let m = column_mean_matrix(x, x.ncols())?;
    let mhat = classwise_mean_matrix(x, &layout.samples)?;
    let mut g = gram.dot(x) - &dty;
    g.scaled_add(2.0 * lambda2, x);
    g.scaled_add(lambda2, &(&m - &(2.0 * &mhat)));
    Ok(g)
}

#[derive(Debug, Clone)]
pub struct FddlSolveConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub dict_passes: usize,
    pub dict_tol: f64,
}

impl Default for FddlSolveConfig {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-6,
            dict_passes: 10,
            dict_tol: 1e-6,
        }
    }
}

/// Lipschitz bound used by the code update: `λ_max(M(DᵀD)) + 6λ2 + 1`
/// (the `4λ2 + 1` slack on top of the exact `λ_max + 2λ2`).
pub fn efddl_lipschitz(d: &Mat, atoms: &BlockPartition, lambda2: f64) -> Result<f64> {
    let gram = doubled_diagonal(&d.t().dot(d), atoms, atoms)?;
    Ok(extreme_eigenvalue(&gram, Extreme::Max)? + 2.0 * lambda2 + 4.0 * lambda2 + 1.0)
}

/// Sparse-code update: FISTA with the block-doubled gradient and l1 prox.
pub fn efddl_update_x(
    y: &Mat,
    d: &Mat,
    x_init: &Mat,
    layout: &FddlLayout,
    lambda1: f64,
    lambda2: f64,
    cfg: &FddlSolveConfig,
) -> Result<Mat> {
    let lip = efddl_lipschitz(d, &layout.atoms, lambda2)?;
    let problem = FistaProblem::new(
        |x: &Mat| efddl_grad_x(y, d, x, layout, lambda2).expect("validated shapes"),
        lip,
        lambda1,
        ProxKind::l1(),
        x_init.clone(),
    )
    .with_iters(cfg.max_iter, cfg.tol)
    .with_objective(|x: &Mat| {
        fddl_cost(y, d, x, layout, lambda1, lambda2).expect("validated shapes")
    });
    let (x, _) = fista_solve(&problem)?;
    Ok(x)
}

/// Dictionary update: the fidelity as a function of `D` collapses to a
/// quadratic with `E = Y M(Xᵀ)` and `F = M(XXᵀ)`.
pub fn efddl_update_d(
    y: &Mat,
    x: &Mat,
    d_init: &Mat,
    layout: &FddlLayout,
    cfg: &FddlSolveConfig,
) -> Result<Mat> {
    let (e, f) = efddl_dict_quadratic(y, x, layout)?;
    let problem =
        QuadDictProblem::new(e, f, d_init.clone()).with_passes(cfg.dict_passes, cfg.dict_tol);
    Ok(odl_dict_update(&problem)?.dict)
}

/// `(E, F)` of the dictionary quadratic.
pub fn efddl_dict_quadratic(y: &Mat, x: &Mat, layout: &FddlLayout) -> Result<(Mat, Mat)> {
    let xd = doubled_diagonal(x, &layout.atoms, &layout.samples)?;
    let e = y.dot(&xd.t());
    let f = doubled_diagonal(&x.dot(&x.t()), &layout.atoms, &layout.atoms)?;
    Ok((e, f))
}
