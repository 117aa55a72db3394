//! Discriminative dictionary learning and structured tensor sparse coding.
//!
//! The crate bundles a family of sparse-representation classifiers around a
//! single accelerated proximal-gradient engine:
//!
//! * feature-oriented per-class dictionaries with a convexified update and
//!   a patch/image/region decision pipeline ([`dfdl`]);
//! * Fisher-discriminative dictionaries with an optional low-rank shared
//!   dictionary ([`fddl`], [`lrsdl`]);
//! * structured-incoherence dictionaries with a single-inversion ADMM
//!   update ([`dlsi`]);
//! * multi-channel tensor coding with tube/group sparsity, confuser
//!   rejection, multi-look shift coding and per-channel dictionary
//!   learning ([`tensor_src`]);
//! * synthetic data generators, metrics, operation-count formulas and
//!   binary file formats ([`datagen`], [`metrics`], [`complexity`], [`io`]).

pub mod complexity;
pub mod data;
pub mod datagen;
pub mod dfdl;
pub mod dlsi;
pub mod error;
pub mod fddl;
pub mod gradcheck;
pub mod io;
pub mod lrsdl;
pub mod mat;
pub mod metrics;
pub mod odl;
pub mod solvers;
pub mod tensor3;
pub mod tensor_src;

pub use data::{ClassificationResult, LabeledDataset, Samples, Split};
pub use error::{Error, Result};
pub use mat::{BlockPartition, Mat};
pub use tensor3::Tensor3;
