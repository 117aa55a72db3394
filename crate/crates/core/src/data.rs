//! Shared dataset and classification-output containers.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::tensor3::Tensor3;

/// Sample storage: a plain matrix or a multi-channel tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Single(Mat),
    Multi(Tensor3),
}

impl Samples {
    pub fn num_samples(&self) -> usize {
        match self {
            Samples::Single(m) => m.ncols(),
            Samples::Multi(t) => t.cols(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Samples::Single(m) => m.nrows(),
            Samples::Multi(t) => t.rows(),
        }
    }

    pub fn num_channels(&self) -> usize {
        match self {
            Samples::Single(_) => 1,
            Samples::Multi(t) => t.num_channels(),
        }
    }

    pub fn as_single(&self) -> Result<&Mat> {
        match self {
            Samples::Single(m) => Ok(m),
            Samples::Multi(_) => Err(Error::InvalidArgument(
                "expected single-channel samples".into(),
            )),
        }
    }

    pub fn as_multi(&self) -> Result<&Tensor3> {
        match self {
            Samples::Multi(t) => Ok(t),
            Samples::Single(_) => Err(Error::InvalidArgument(
                "expected multi-channel samples".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Samples with class ids. Class labels run 1..=C; label 0 tags
/// ground/confuser roles.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Samples,
    pub labels: Vec<usize>,
    pub split: Split,
}

impl LabeledDataset {
    pub fn new(samples: Samples, labels: Vec<usize>, split: Split) -> Result<Self> {
        if samples.num_samples() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples vs {} labels",
                samples.num_samples(),
                labels.len()
            )));
        }
        Ok(Self {
            samples,
            labels,
            split,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Column indices carrying class `label`.
    pub fn indices_of(&self, label: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// Single-channel samples of one class, gathered into a matrix.
    pub fn class_matrix(&self, label: usize) -> Result<Mat> {
        let m = self.samples.as_single()?;
        let idx = self.indices_of(label);
        let mut out = Mat::zeros((m.nrows(), idx.len()));
        for (j, &i) in idx.iter().enumerate() {
            out.column_mut(j).assign(&m.column(i));
        }
        Ok(out)
    }

    /// Multi-channel samples of one class.
    pub fn class_tensor(&self, label: usize) -> Result<Tensor3> {
        let t = self.samples.as_multi()?;
        let idx = self.indices_of(label);
        let mut chans = Vec::with_capacity(t.num_channels());
        for ch in t.channels() {
            let mut out = Mat::zeros((ch.nrows(), idx.len()));
            for (j, &i) in idx.iter().enumerate() {
                out.column_mut(j).assign(&ch.column(i));
            }
            chans.push(out);
        }
        Tensor3::new(chans)
    }
}

/// Outcome of classifying one sample.
#[derive(Debug, Clone)]
pub struct ClassificationResult {
    /// Per-class residuals (or scores), index 0 = class 1.
    pub residuals: Vec<f64>,
    /// Predicted class id (1-based); 0 when rejected as a confuser.
    pub label: usize,
    /// Sample rejected by the confuser rules.
    pub confuser: bool,
    /// Degenerate code path (e.g. all-zero sparse code).
    pub low_confidence: bool,
}

impl ClassificationResult {
    /// Smallest-residual class with ties resolved toward the lower index.
    pub fn from_residuals(residuals: Vec<f64>) -> Self {
        let mut best = 0usize;
        for (i, &r) in residuals.iter().enumerate() {
            if r < residuals[best] {
                best = i;
            }
        }
        Self {
            residuals,
            label: best + 1,
            confuser: false,
            low_confidence: false,
        }
    }
}
