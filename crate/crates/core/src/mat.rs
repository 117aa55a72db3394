//! Dense matrix primitives shared by every learner: block bookkeeping,
//! the diagonal-block doubling operator, mean matrices, soft/singular-value
//! thresholding, column projections and extreme eigenvalues.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eigh, SVD, UPLO};

use crate::error::{Error, Result};

/// Dense row-major matrix of reals. Houses samples, dictionaries and codes.
pub type Mat = Array2<f64>;

/// Which end of the spectrum `extreme_eigenvalue` should return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Max,
    Min,
}

/// Partition of one matrix axis into per-class blocks plus an optional
/// shared block. Blocks are ordered `[class 1, .., class C, shared]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    class_sizes: Vec<usize>,
    shared_size: usize,
}

impl BlockPartition {
    pub fn new(class_sizes: Vec<usize>, shared_size: usize) -> Result<Self> {
        if class_sizes.iter().any(|&k| k == 0) {
            return Err(Error::InvalidArgument(
                "class block sizes must be positive".into(),
            ));
        }
        Ok(Self {
            class_sizes,
            shared_size,
        })
    }

    /// Partition with `classes` equal blocks of `size` and no shared block.
    pub fn uniform(classes: usize, size: usize) -> Self {
        Self {
            class_sizes: vec![size; classes],
            shared_size: 0,
        }
    }

    pub fn class_sizes(&self) -> &[usize] {
        &self.class_sizes
    }

    pub fn shared_size(&self) -> usize {
        self.shared_size
    }

    pub fn num_classes(&self) -> usize {
        self.class_sizes.len()
    }

    /// Total length of the partitioned axis (classes plus shared).
    pub fn total(&self) -> usize {
        self.class_sizes.iter().sum::<usize>() + self.shared_size
    }

    /// Offset of class block `c` (0-based).
    pub fn class_offset(&self, c: usize) -> usize {
        self.class_sizes[..c].iter().sum()
    }

    /// Half-open index range of class block `c` (0-based).
    pub fn class_range(&self, c: usize) -> std::ops::Range<usize> {
        let start = self.class_offset(c);
        start..start + self.class_sizes[c]
    }

    /// Half-open index range of the shared block (empty when absent).
    pub fn shared_range(&self) -> std::ops::Range<usize> {
        let start: usize = self.class_sizes.iter().sum();
        start..start + self.shared_size
    }

    fn check_axis(&self, len: usize, what: &str) -> Result<()> {
        if self.total() != len {
            return Err(Error::PartitionMismatch(format!(
                "{what} axis has length {len}, partition covers {}",
                self.total()
            )));
        }
        Ok(())
    }
}

/// Adds each diagonal class block of `a` to itself once more; off-diagonal
/// blocks are untouched. The shared block is treated as its own diagonal
/// block only when both partitions carry one.
pub fn doubled_diagonal(a: &Mat, rowp: &BlockPartition, colp: &BlockPartition) -> Result<Mat> {
    rowp.check_axis(a.nrows(), "row")?;
    colp.check_axis(a.ncols(), "column")?;
    if rowp.num_classes() != colp.num_classes() {
        return Err(Error::PartitionMismatch(format!(
            "row partition has {} classes, column partition has {}",
            rowp.num_classes(),
            colp.num_classes()
        )));
    }
    let mut out = a.clone();
    for c in 0..rowp.num_classes() {
        let (rr, cr) = (rowp.class_range(c), colp.class_range(c));
        let block = a.slice(s![rr.clone(), cr.clone()]).to_owned();
        let mut dst = out.slice_mut(s![rr, cr]);
        dst += &block;
    }
    if rowp.shared_size() > 0 && colp.shared_size() > 0 {
        let (rr, cr) = (rowp.shared_range(), colp.shared_range());
        let block = a.slice(s![rr.clone(), cr.clone()]).to_owned();
        let mut dst = out.slice_mut(s![rr, cr]);
        dst += &block;
    }
    Ok(out)
}

/// Mean of the columns of `a` as a vector.
pub fn column_mean(a: &Mat) -> Array1<f64> {
    let n = a.ncols() as f64;
    a.sum_axis(ndarray::Axis(1)) / n
}

/// `μ(a, n)`: `n` identical columns, each the column-mean of `a`.
pub fn column_mean_matrix(a: &Mat, n: usize) -> Result<Mat> {
    if a.ncols() == 0 {
        return Err(Error::InvalidArgument("mean of an empty matrix".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "mean matrix must have at least one column".into(),
        ));
    }
    let m = column_mean(a);
    let mut out = Mat::zeros((a.nrows(), n));
    for mut col in out.columns_mut() {
        col.assign(&m);
    }
    Ok(out)
}

/// Element-wise soft thresholding `sgn(x) · max(|x| − alpha, 0)`.
pub fn soft_threshold(x: &Mat, alpha: f64) -> Mat {
    debug_assert!(alpha >= 0.0);
    x.mapv(|v| {
        let mag = v.abs() - alpha;
        if mag > 0.0 {
            v.signum() * mag
        } else {
            0.0
        }
    })
}

/// Scalar soft threshold, used by coordinate-wise solvers.
pub fn soft_threshold_scalar(v: f64, alpha: f64) -> f64 {
    let mag = v.abs() - alpha;
    if mag > 0.0 {
        v.signum() * mag
    } else {
        0.0
    }
}

/// Singular value thresholding: `U · max(Σ − tau, 0) · Vᵀ` from a full SVD.
/// The proximal operator of `tau‖·‖_*`.
pub fn svt(a: &Mat, tau: f64) -> Result<Mat> {
    debug_assert!(tau >= 0.0);
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(a.clone());
    }
    let (u, sigma, vt) = a
        .svd(true, true)
        .map_err(|e| Error::Linalg(format!("SVD failed: {e}")))?;
    let u = u.expect("requested U");
    let vt = vt.expect("requested Vt");
    let r = sigma.len();
    let mut out = Mat::zeros(a.dim());
    for i in 0..r {
        let s = sigma[i] - tau;
        if s > 0.0 {
            let ui = u.column(i);
            let vi = vt.row(i);
            for (row, &uv) in ui.iter().enumerate() {
                if uv != 0.0 {
                    let scale = s * uv;
                    out.row_mut(row).scaled_add(scale, &vi);
                }
            }
        }
    }
    Ok(out)
}

/// Singular values of `a`, descending.
pub fn singular_values(a: &Mat) -> Result<Array1<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Array1::zeros(0));
    }
    let (_, sigma, _) = a
        .svd(false, false)
        .map_err(|e| Error::Linalg(format!("SVD failed: {e}")))?;
    Ok(sigma)
}

/// Nuclear norm `Σ σᵢ`.
pub fn nuclear_norm(a: &Mat) -> Result<f64> {
    Ok(singular_values(a)?.sum())
}

/// Rescales every column with norm > 1 back to the unit sphere; columns
/// already inside the ball are unchanged. The tolerance keeps the map
/// idempotent: a rescaled column whose recomputed norm lands an ulp above
/// one is not rescaled again.
pub fn project_unit_columns(d: &Mat) -> Mat {
    let mut out = d.clone();
    for mut col in out.columns_mut() {
        let norm = col.dot(&col).sqrt();
        if norm > 1.0 + 1e-14 {
            col.mapv_inplace(|v| v / norm);
        }
    }
    out
}

/// Scales every nonzero column to exactly unit norm.
pub fn normalize_columns(d: &Mat) -> Mat {
    let mut out = d.clone();
    for mut col in out.columns_mut() {
        let norm = col.dot(&col).sqrt();
        if norm > 0.0 {
            col.mapv_inplace(|v| v / norm);
        }
    }
    out
}

/// Largest or smallest eigenvalue of a symmetric matrix. The input is
/// symmetrized as `(S + Sᵀ)/2` first to absorb round-off.
pub fn extreme_eigenvalue(s_mat: &Mat, which: Extreme) -> Result<f64> {
    if s_mat.nrows() != s_mat.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "extreme_eigenvalue needs a square matrix, got {}x{}",
            s_mat.nrows(),
            s_mat.ncols()
        )));
    }
    if s_mat.nrows() == 0 {
        return Ok(0.0);
    }
    let sym = 0.5 * (s_mat + &s_mat.t());
    let (vals, _) = sym
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e}")))?;
    let picked = match which {
        Extreme::Max => vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        Extreme::Min => vals.iter().cloned().fold(f64::INFINITY, f64::min),
    };
    Ok(picked)
}

/// Frobenius norm.
pub fn fro_norm(a: &Mat) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Squared Frobenius norm.
pub fn fro_norm_sq(a: &Mat) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>()
}

/// Sum of absolute values of all entries.
pub fn l1_norm(a: &Mat) -> f64 {
    a.iter().map(|v| v.abs()).sum::<f64>()
}

/// Euclidean norms of each column.
pub fn column_norms(a: &Mat) -> Array1<f64> {
    Array1::from_iter(a.columns().into_iter().map(|c| c.dot(&c).sqrt()))
}

/// Squared Euclidean norm of a vector.
pub fn vec_norm_sq(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Euclidean norm of a vector.
pub fn vec_norm(v: &Array1<f64>) -> f64 {
    vec_norm_sq(v).sqrt()
}
