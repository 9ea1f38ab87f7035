//! Execution engine: blocked complex matmul microkernel, Monarch-decomposed
//! transforms, fused convolutions with gating and causal shortcuts, and the
//! recomputation-based backward pass.

mod conv;
mod element;
mod grad;
mod matmul;
mod stats;
mod transform;

pub use conv::{
    conv_forward, conv_gated, prepare_kernel, ConvOptions, KernelLayout, KernelSpectrum,
};
pub use element::Element;
pub use grad::conv_backward;
pub use matmul::{blocked_matmul, BlockedMatmulConfig};
pub use stats::{StatsCollector, StatsSnapshot};
pub use transform::{apply_layout, monarch_fft, monarch_ifft, Spectrum, SpectrumLayout};

pub(crate) use conv::{conv_dispatch, SkipSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("matrix shapes incompatible: {a_rows}x{a_cols} times {b_rows}x{b_cols}")]
    MatmulShapeMismatch {
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
        b_cols: usize,
    },
    #[error("tile extents must be positive")]
    BadTileConfig,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("spectrum layout does not match this plan")]
    LayoutMismatch,
    #[error("plan uses real-input packing; complex transform entry points do not apply")]
    RealPlanComplexTransform,
    #[error("kernel exceeds causal budget ({kernel} taps, budget {budget})")]
    KernelExceedsCausalBudget { kernel: usize, budget: usize },
    #[error("kernel has {kernel} channels, input has {input}")]
    KernelChannelMismatch { kernel: usize, input: usize },
    #[error("kernel was prepared for a different convolution mode than the plan")]
    ModeMismatch,
    #[error("kernel spectrum missing data for the plan's execution precision")]
    PrecisionMismatch,
    #[error("{0}")]
    InputShape(String),
}
