//! Execution precision abstraction: the engine is generic over f32/f64
//! elements, with the microkernel always accumulating in f64.

use num_complex::{Complex, Complex64};

use super::conv::KernelSpectrum;
use crate::plan::{FactorMatrices, Precision, Stage};
use crate::tensor::Tensor;

/// Scalar the execution engine can run on. Accumulation happens in f64 for
/// both; f32 elements round once on store.
pub trait Element: num_traits::Float + Send + Sync + std::fmt::Debug + 'static {
    const PRECISION: Precision;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;

    fn factor_forward(m: &FactorMatrices) -> &[Complex<Self>];
    fn factor_inverse(m: &FactorMatrices) -> &[Complex<Self>];
    fn stage_twiddle_forward(s: &Stage) -> Option<&[Complex<Self>]>;
    fn stage_twiddle_inverse(s: &Stage) -> Option<&[Complex<Self>]>;
    fn kernel_data(kf: &KernelSpectrum) -> &[Complex<Self>];
    fn into_tensor(dims: Vec<u64>, data: Vec<Self>) -> Tensor;

    #[inline]
    fn c64(z: Complex<Self>) -> Complex64 {
        Complex64::new(z.re.to_f64(), z.im.to_f64())
    }

    #[inline]
    fn from_c64(z: Complex64) -> Complex<Self> {
        Complex::new(Self::from_f64(z.re), Self::from_f64(z.im))
    }
}

impl Element for f64 {
    const PRECISION: Precision = Precision::F64;

    #[inline]
    fn from_f64(x: f64) -> f64 {
        x
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self
    }

    #[inline]
    fn factor_forward(m: &FactorMatrices) -> &[Complex64] {
        &m.forward.entries
    }

    #[inline]
    fn factor_inverse(m: &FactorMatrices) -> &[Complex64] {
        &m.inverse.entries
    }

    #[inline]
    fn stage_twiddle_forward(s: &Stage) -> Option<&[Complex64]> {
        s.twiddle_forward.as_ref().map(|t| t.entries.as_slice())
    }

    #[inline]
    fn stage_twiddle_inverse(s: &Stage) -> Option<&[Complex64]> {
        s.twiddle_inverse.as_ref().map(|t| t.entries.as_slice())
    }

    #[inline]
    fn kernel_data(kf: &KernelSpectrum) -> &[Complex64] {
        &kf.data
    }

    fn into_tensor(dims: Vec<u64>, data: Vec<f64>) -> Tensor {
        Tensor::from_f64(dims, data).expect("dims match data length")
    }
}

impl Element for f32 {
    const PRECISION: Precision = Precision::F32;

    #[inline]
    fn from_f64(x: f64) -> f32 {
        x as f32
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn factor_forward(m: &FactorMatrices) -> &[Complex<f32>] {
        &m.forward32
    }

    #[inline]
    fn factor_inverse(m: &FactorMatrices) -> &[Complex<f32>] {
        &m.inverse32
    }

    #[inline]
    fn stage_twiddle_forward(s: &Stage) -> Option<&[Complex<f32>]> {
        if s.twiddle_forward.is_some() {
            Some(&s.twiddle_forward32)
        } else {
            None
        }
    }

    #[inline]
    fn stage_twiddle_inverse(s: &Stage) -> Option<&[Complex<f32>]> {
        if s.twiddle_inverse.is_some() {
            Some(&s.twiddle_inverse32)
        } else {
            None
        }
    }

    #[inline]
    fn kernel_data(kf: &KernelSpectrum) -> &[Complex<f32>] {
        &kf.data32
    }

    fn into_tensor(dims: Vec<u64>, data: Vec<f32>) -> Tensor {
        Tensor::from_f32(dims, data).expect("dims match data length")
    }
}
