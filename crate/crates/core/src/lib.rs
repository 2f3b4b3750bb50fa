//! Defect detection in periodic (patterned) textures.
//!
//! The pipeline filters an image with a bank of complex Gabor wavelets, fuses
//! the responses into one L2-norm "Gabor space" image, tiles that image into
//! periodic blocks from each of its four corners, clusters the block energies
//! with Ward's method, and fuses the defective blocks of all four crops into a
//! filled defect mask whose Canny edges are drawn over the input.
//!
//! Numeric stages are generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar for the common case.

pub mod corpus;
pub mod defect_fusion;
pub mod error;
pub mod evaluation;
pub mod filter_engine;
pub mod gabor_bank;
pub mod imaging;
pub mod periodic_blocks;
pub mod scalar;
pub mod synth;
pub mod ward_clustering;

pub use defect_fusion::{inspect, CannyParams, InspectOptions, InspectionReport};
pub use error::{Error, Result};
pub use evaluation::{ConfusionCounts, Metrics};
pub use gabor_bank::{GaborBankConfig, GaborKernel};
pub use imaging::{PaddingMode, Raster};
pub use periodic_blocks::{BlockGrid, BlockLabel, CropSpec, Periodicity};
pub use scalar::Scalar;
pub use ward_clustering::Dendrogram;

/// Double precision grayscale image.
pub type Image = Raster<f64>;
/// Single precision grayscale image.
pub type ImageF32 = Raster<f32>;
pub type Kernel = GaborKernel<f64>;
pub type KernelF32 = GaborKernel<f32>;
pub type BankConfig = GaborBankConfig<f64>;
pub type BankConfigF32 = GaborBankConfig<f32>;
pub type Grid = BlockGrid<f64>;
pub type Report = InspectionReport<f64>;
pub type ReportF32 = InspectionReport<f32>;
