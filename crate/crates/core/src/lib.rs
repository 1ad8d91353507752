//! Scan-adaptive Cartesian undersampling for multi-coil MRI.
//!
//! Per-scan k-space line masks are optimized against a ground-truth image
//! with greedy selection and iterative coordinate descent, alternating with
//! the tuning of a reconstructor. At test time the mask of the training scan
//! with the closest low-frequency reconstruction is reused.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the double-precision types used by the command line tool.

mod error;
mod scalar;

pub mod bundle;
pub mod fourier;
pub mod image;
pub mod mask;
pub mod maskopt;
pub mod metrics;
pub mod nn;
pub mod operator;
pub mod phantom;
pub mod recon;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use bundle::{load_bundle, make_bundle, save_bundle, DatasetIndex, ScanBundle};
pub use image::{CoilMaps, Image, KSpace};
pub use mask::{central_lines, LineMask};
pub use maskopt::{OptimConfig, TrainSchedule};
pub use metrics::{LossKind, MetricReport};
pub use nn::{build_library, predict_mask, MaskLibrary};
pub use recon::{reconstruct, ReconKind, ReconParams};

pub type Complex64 = num_complex::Complex<f64>;
pub type ComplexImage = Image<f64>;
pub type MultiCoilKSpace = KSpace<f64>;
pub type SensitivityMaps = CoilMaps<f64>;

pub type ComplexImage32 = Image<f32>;
pub type MultiCoilKSpace32 = KSpace<f32>;
pub type SensitivityMaps32 = CoilMaps<f32>;
