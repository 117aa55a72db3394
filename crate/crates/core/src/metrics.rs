//! Accuracy, confusion matrices, ROC sweeps and subspace angles.

use ndarray::Array2;
use ndarray_linalg::{QR, SVD};
use serde::{Deserialize, Serialize};

use crate::dfdl::mvp_detect;
use crate::error::{Error, Result};
use crate::mat::Mat;

/// One operating point of a sweep: parameter value, miss rate and
/// false-alarm rate with the diseased/target role as the positive class.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RocPoint {
    pub param: f64,
    pub miss: f64,
    pub false_alarm: f64,
}

/// Classification quality summary.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// `confusion[true][pred]`, labels 0..=max observed.
    pub confusion: Vec<Vec<usize>>,
    pub roc: Vec<RocPoint>,
}

/// Accuracy plus a confusion matrix over labels `0..=max`.
pub fn evaluate(pred: &[usize], truth: &[usize]) -> Result<MetricsReport> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let classes = pred.iter().chain(truth.iter()).copied().max().unwrap() + 1;
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut correct = 0usize;
    for (&p, &t) in pred.iter().zip(truth.iter()) {
        confusion[t][p] += 1;
        if p == t {
            correct += 1;
        }
    }
    Ok(MetricsReport {
        accuracy: correct as f64 / pred.len() as f64,
        confusion,
        roc: Vec::new(),
    })
}

/// Sweeps the healthy-fraction threshold over per-image
/// `(fraction, is_positive)` pairs. An image is called healthy when its
/// fraction reaches theta; positives (diseased) called healthy are misses.
pub fn roc_theta_sweep(images: &[(f64, bool)], thetas: &[f64]) -> Result<Vec<RocPoint>> {
    if thetas.is_empty() {
        return Err(Error::InvalidArgument("empty sweep range".into()));
    }
    let positives = images.iter().filter(|&&(_, p)| p).count();
    let negatives = images.len() - positives;
    Ok(thetas
        .iter()
        .map(|&theta| {
            let mut miss = 0usize;
            let mut fa = 0usize;
            for &(fraction, positive) in images {
                let healthy = fraction >= theta;
                if positive && healthy {
                    miss += 1;
                }
                if !positive && !healthy {
                    fa += 1;
                }
            }
            RocPoint {
                param: theta,
                miss: if positives > 0 {
                    miss as f64 / positives as f64
                } else {
                    0.0
                },
                false_alarm: if negatives > 0 {
                    fa as f64 / negatives as f64
                } else {
                    0.0
                },
            }
        })
        .collect())
}

/// Sweeps the connected-region size over per-image detection grids;
/// positives are true region images.
pub fn roc_m_sweep(images: &[(Array2<bool>, bool)], ms: &[usize]) -> Result<Vec<RocPoint>> {
    if ms.is_empty() {
        return Err(Error::InvalidArgument("empty sweep range".into()));
    }
    let positives = images.iter().filter(|&&(_, p)| p).count();
    let negatives = images.len() - positives;
    Ok(ms
        .iter()
        .map(|&m| {
            let mut miss = 0usize;
            let mut fa = 0usize;
            for (grid, positive) in images {
                let detected = mvp_detect(grid, m);
                if *positive && !detected {
                    miss += 1;
                }
                if !*positive && detected {
                    fa += 1;
                }
            }
            RocPoint {
                param: m as f64,
                miss: if positives > 0 {
                    miss as f64 / positives as f64
                } else {
                    0.0
                },
                false_alarm: if negatives > 0 {
                    fa as f64 / negatives as f64
                } else {
                    0.0
                },
            }
        })
        .collect())
}

/// Principal angles (radians, ascending) between the column spans of two
/// full-column-rank matrices.
pub fn principal_angles(a: &Mat, b: &Mat) -> Result<Vec<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::ShapeMismatch("subspace ambient dims differ".into()));
    }
    if a.ncols() == 0 || b.ncols() == 0 {
        return Err(Error::InvalidArgument("empty subspace".into()));
    }
    let (qa, _) = a.qr().map_err(|e| Error::Linalg(e.to_string()))?;
    let (qb, _) = b.qr().map_err(|e| Error::Linalg(e.to_string()))?;
    let m = qa.t().dot(&qb);
    let (_, sigma, _) = m.svd(false, false).map_err(|e| Error::Linalg(e.to_string()))?;
    let mut angles: Vec<f64> = sigma.iter().map(|s| s.min(1.0).max(-1.0).acos()).collect();
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(angles)
}

/// Largest principal angle, in degrees.
pub fn max_principal_angle_deg(a: &Mat, b: &Mat) -> Result<f64> {
    let angles = principal_angles(a, b)?;
    Ok(angles.last().copied().unwrap_or(0.0).to_degrees())
}
