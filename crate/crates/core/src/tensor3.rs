//! Three-way tensors stored as per-channel dense matrices. Tensor products
//! follow the channel-wise convention: `(M N)⁽ᵗ⁾ = M⁽ᵗ⁾ N⁽ᵗ⁾`.

use ndarray::s;

use crate::error::{Error, Result};
use crate::mat::Mat;

/// A `rows × cols × channels` stack of equally shaped matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    channels: Vec<Mat>,
}

impl Tensor3 {
    pub fn new(channels: Vec<Mat>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidArgument(
                "tensor needs at least one channel".into(),
            ));
        }
        let dim = channels[0].dim();
        if channels.iter().any(|c| c.dim() != dim) {
            return Err(Error::ShapeMismatch(
                "tensor channels must share rows x cols".into(),
            ));
        }
        Ok(Self { channels })
    }

    pub fn zeros(rows: usize, cols: usize, nch: usize) -> Self {
        Self {
            channels: vec![Mat::zeros((rows, cols)); nch.max(1)],
        }
    }

    /// A single-channel tensor wrapping one matrix.
    pub fn from_mat(m: Mat) -> Self {
        Self { channels: vec![m] }
    }

    pub fn rows(&self) -> usize {
        self.channels[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.channels[0].ncols()
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, t: usize) -> &Mat {
        &self.channels[t]
    }

    pub fn channel_mut(&mut self, t: usize) -> &mut Mat {
        &mut self.channels[t]
    }

    pub fn channels(&self) -> &[Mat] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Mat> {
        self.channels
    }

    /// Channel-wise matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &Tensor3) -> Result<Tensor3> {
        if self.num_channels() != rhs.num_channels() {
            return Err(Error::ShapeMismatch(format!(
                "channel counts differ: {} vs {}",
                self.num_channels(),
                rhs.num_channels()
            )));
        }
        if self.cols() != rhs.rows() {
            return Err(Error::ShapeMismatch(format!(
                "inner dimensions differ: {} vs {}",
                self.cols(),
                rhs.rows()
            )));
        }
        let channels = self
            .channels
            .iter()
            .zip(&rhs.channels)
            .map(|(a, b)| a.dot(b))
            .collect();
        Ok(Tensor3 { channels })
    }

    /// Restriction to a contiguous row range (used for code blocks).
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Tensor3 {
        Tensor3 {
            channels: self
                .channels
                .iter()
                .map(|c| c.slice(s![range.clone(), ..]).to_owned())
                .collect(),
        }
    }

    /// Restriction to a contiguous column range.
    pub fn slice_cols(&self, range: std::ops::Range<usize>) -> Tensor3 {
        Tensor3 {
            channels: self
                .channels
                .iter()
                .map(|c| c.slice(s![.., range.clone()]).to_owned())
                .collect(),
        }
    }

    /// One column across all channels, as a `rows × 1 × T` tensor.
    pub fn column(&self, j: usize) -> Tensor3 {
        self.slice_cols(j..j + 1)
    }

    pub fn fro_norm_sq(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    pub fn fro_norm(&self) -> f64 {
        self.fro_norm_sq().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.channels
            .iter()
            .all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// Element-wise `ca·self + cb·other`.
    pub fn combine(&self, ca: f64, other: &Tensor3, cb: f64) -> Tensor3 {
        let channels = self
            .channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| {
                let mut out = a * ca;
                out.scaled_add(cb, b);
                out
            })
            .collect();
        Tensor3 { channels }
    }

    pub fn sub(&self, other: &Tensor3) -> Tensor3 {
        self.combine(1.0, other, -1.0)
    }

    pub fn add(&self, other: &Tensor3) -> Tensor3 {
        self.combine(1.0, other, 1.0)
    }

    /// Channel-wise transpose.
    pub fn transpose(&self) -> Tensor3 {
        Tensor3 {
            channels: self.channels.iter().map(|c| c.t().to_owned()).collect(),
        }
    }
}
