//! Long-sequence FFT convolutions computed through Monarch decompositions of
//! the DFT: the transform runs as a small number of blocked matrix-multiply
//! stages with twiddle corrections, so convolutions, gating, gradients, and
//! frequency-sparse variants all reduce to dense tile work plus elementwise
//! passes.
//!
//! Module map:
//! - [`tensor`]: dense tensors and the on-disk format.
//! - [`dft`]: DFT matrices, twiddles, naive reference transforms, real-input
//!   packing, and the direct convolution oracle.
//! - [`plan`]: length factorization, precomputed stage data, and the roofline
//!   cost model with order selection.
//! - [`exec`]: the blocked-matmul execution engine — forward/inverse
//!   transforms, convolutions, fused gating, and gradients.
//! - [`sparse`]: partial (truncated-kernel) and frequency-sparse convolutions
//!   with structural block skipping.

pub mod dft;
pub mod exec;
pub mod plan;
pub mod sparse;
pub mod tensor;

pub use dft::{ConvMode, Direction};
pub use plan::Precision;
