//! Partial (truncated-filter) convolutions and frequency-sparse convolutions.
//!
//! A sparsity pattern reshapes the kernel spectrum to four extents and keeps
//! only the leading slab along each. Masking is the reference semantics;
//! the sparse execution path realizes the same result structurally, by
//! dropping loop iterations for the two outer extents and restricting the two
//! innermost factor matmuls to leading blocks (rounded up to the tile size —
//! the masked kernel zeroes whatever the rounding leaves in).

use thiserror::Error;

use crate::exec::{self, ConvOptions, ExecError, KernelLayout, KernelSpectrum};
use crate::plan::{MonarchPlan, Precision};
use crate::tensor::{Tensor, TensorData};

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("truncation length {n_k} exceeds filter length {n}")]
    TruncationTooLong { n_k: usize, n: usize },
    #[error("filter must be a real 2-d channels x taps tensor")]
    BadFilter,
    #[error("pattern text `{0}` is not dims=..;keep=..")]
    BadPatternText(String),
    #[error("keep {keep} exceeds extent {dim} in dimension {index}")]
    KeepOutOfRange { index: usize, keep: usize, dim: usize },
    #[error("pattern dims {dims:?} do not multiply to the transform length {n}")]
    DimProductMismatch { dims: [usize; 4], n: usize },
    #[error("pattern dims {dims:?} do not line up with plan factors {factors:?}")]
    DimFactorMismatch {
        dims: [usize; 4],
        factors: Vec<usize>,
    },
    #[error("frequency-sparse execution requires a complex (non-real-packed) plan")]
    NeedsComplexPlan,
    #[error("kernel spectrum must be in flat or this plan's layout")]
    KernelLayout,
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// Reshape extents and per-dimension keep counts for the kernel spectrum.
/// Entries at index >= keep along each dimension are zeroed; `keep == dim`
/// leaves a dimension untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencySparsityPattern {
    pub dims: [usize; 4],
    pub keep: [usize; 4],
}

impl FrequencySparsityPattern {
    pub fn new(dims: [usize; 4], keep: [usize; 4]) -> Result<Self, SparseError> {
        for i in 0..4 {
            if keep[i] > dims[i] || dims[i] == 0 {
                return Err(SparseError::KeepOutOfRange {
                    index: i + 1,
                    keep: keep[i],
                    dim: dims[i],
                });
            }
        }
        Ok(FrequencySparsityPattern { dims, keep })
    }

    /// Dense pattern (nothing zeroed) for the given extents.
    pub fn dense(dims: [usize; 4]) -> Self {
        FrequencySparsityPattern { dims, keep: dims }
    }

    pub fn total_len(&self) -> usize {
        self.dims.iter().product()
    }

    /// Parse the text form `dims=d1,d2,d3,d4;keep=a,b,c,d`.
    pub fn parse(text: &str) -> Result<Self, SparseError> {
        let bad = || SparseError::BadPatternText(text.to_string());
        let (dims_part, keep_part) = text.trim().split_once(';').ok_or_else(bad)?;
        let dims_str = dims_part.trim().strip_prefix("dims=").ok_or_else(bad)?;
        let keep_str = keep_part.trim().strip_prefix("keep=").ok_or_else(bad)?;
        let parse4 = |s: &str| -> Result<[usize; 4], SparseError> {
            let vals: Vec<usize> = s
                .split(',')
                .map(|v| v.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad())?;
            if vals.len() != 4 {
                return Err(bad());
            }
            Ok([vals[0], vals[1], vals[2], vals[3]])
        };
        FrequencySparsityPattern::new(parse4(dims_str)?, parse4(keep_str)?)
    }
}

impl std::fmt::Display for FrequencySparsityPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "dims={},{},{},{};keep={},{},{},{}",
            self.dims[0],
            self.dims[1],
            self.dims[2],
            self.dims[3],
            self.keep[0],
            self.keep[1],
            self.keep[2],
            self.keep[3]
        )
    }
}

/// Fraction of spectrum entries zeroed: `1 - prod(keep_i / dim_i)`.
pub fn sparsity_fraction(pattern: &FrequencySparsityPattern) -> f64 {
    let mut kept = 1.0;
    for i in 0..4 {
        kept *= pattern.keep[i] as f64 / pattern.dims[i] as f64;
    }
    1.0 - kept
}

/// Zero filter taps at index >= `n_k`, keeping the length (and therefore any
/// downstream plan) unchanged.
pub fn truncate_kernel(k: &Tensor, n_k: usize) -> Result<Tensor, SparseError> {
    let dims = k.dims();
    if dims.len() != 2 {
        return Err(SparseError::BadFilter);
    }
    let (h, n) = (dims[0] as usize, dims[1] as usize);
    if n_k > n {
        return Err(SparseError::TruncationTooLong { n_k, n });
    }
    let data = match k.data() {
        TensorData::Real32(v) => {
            let mut out = v.clone();
            for ch in 0..h {
                for t in out[ch * n + n_k..(ch + 1) * n].iter_mut() {
                    *t = 0.0;
                }
            }
            TensorData::Real32(out)
        }
        TensorData::Real64(v) => {
            let mut out = v.clone();
            for ch in 0..h {
                for t in out[ch * n + n_k..(ch + 1) * n].iter_mut() {
                    *t = 0.0;
                }
            }
            TensorData::Real64(out)
        }
        _ => return Err(SparseError::BadFilter),
    };
    Ok(Tensor::new(dims.to_vec(), data).expect("shape unchanged"))
}

/// Reference masking semantics: reshape the flat spectrum to the pattern's
/// extents (row-major) and zero the trailing slab of each dimension.
pub fn apply_frequency_mask(
    kf: &KernelSpectrum,
    pattern: &FrequencySparsityPattern,
) -> Result<KernelSpectrum, SparseError> {
    if kf.layout != KernelLayout::Flat {
        return Err(SparseError::KernelLayout);
    }
    if pattern.total_len() != kf.row_len {
        return Err(SparseError::DimProductMismatch {
            dims: pattern.dims,
            n: kf.row_len,
        });
    }
    let [_, d2, d3, d4] = pattern.dims;
    let [k1, k2, k3, k4] = pattern.keep;
    let mut out = kf.clone();
    for ch in 0..kf.h {
        let row = &mut out.data[ch * kf.row_len..(ch + 1) * kf.row_len];
        for (idx, v) in row.iter_mut().enumerate() {
            let q4 = idx % d4;
            let q3 = (idx / d4) % d3;
            let q2 = (idx / (d3 * d4)) % d2;
            let q1 = idx / (d2 * d3 * d4);
            if q1 >= k1 || q2 >= k2 || q3 >= k3 || q4 >= k4 {
                *v = num_complex::Complex64::new(0.0, 0.0);
            }
        }
    }
    out.data32.clear();
    Ok(out)
}

/// Check the pattern against a plan and derive the structural skip limits.
fn skip_spec(
    pattern: &FrequencySparsityPattern,
    plan: &MonarchPlan,
    tiles: &exec::BlockedMatmulConfig,
) -> Result<exec::SkipSpec, SparseError> {
    if plan.real_input {
        return Err(SparseError::NeedsComplexPlan);
    }
    if pattern.total_len() != plan.transform_len {
        return Err(SparseError::DimProductMismatch {
            dims: pattern.dims,
            n: plan.transform_len,
        });
    }
    let p = plan.p;
    let mismatch = || SparseError::DimFactorMismatch {
        dims: pattern.dims,
        factors: plan.factors.clone(),
    };
    // dims, highest stride first, govern: [core cols, core rows, inner loop,
    // outer loop] — the reverse of the factor list, padded with extent-1 dims.
    if pattern.dims[0] != plan.factors[p - 1] || pattern.dims[1] != plan.factors[p - 2] {
        return Err(mismatch());
    }
    let mut loop_keep = vec![0usize; p - 2];
    for (level, keep) in loop_keep.iter_mut().enumerate() {
        let dim_idx = p - 1 - level;
        if pattern.dims[dim_idx] != plan.factors[level] {
            return Err(mismatch());
        }
        *keep = pattern.keep[dim_idx];
    }
    for dim_idx in p..4 {
        if pattern.dims[dim_idx] != 1 {
            return Err(mismatch());
        }
    }
    let round_up = |keep: usize, tile: usize, extent: usize| -> usize {
        if keep == 0 {
            0
        } else {
            (keep.div_ceil(tile) * tile).min(extent)
        }
    };
    let all_zero = pattern.keep.iter().any(|&k| k == 0);
    Ok(exec::SkipSpec {
        loop_keep,
        core_rows: round_up(pattern.keep[1], tiles.tile_rows, plan.factors[p - 2]),
        core_cols: round_up(pattern.keep[0], tiles.tile_cols, plan.factors[p - 1]),
        all_zero,
    })
}

/// Frequency-sparse convolution: numerically equal to `conv_forward` with the
/// masked kernel, with the masked regions' compute skipped structurally.
pub fn conv_frequency_sparse(
    u: &Tensor,
    kf_masked: &KernelSpectrum,
    pattern: &FrequencySparsityPattern,
    plan: &MonarchPlan,
    opts: &ConvOptions<'_>,
) -> Result<Tensor, SparseError> {
    let skip = skip_spec(pattern, plan, &opts.tiles)?;
    let kf_plan;
    let kf = match kf_masked.layout {
        KernelLayout::Flat => {
            kf_plan = kf_masked.to_plan_layout(plan)?;
            &kf_plan
        }
        KernelLayout::Plan(_) => kf_masked,
        KernelLayout::HalfFlat => return Err(SparseError::NeedsComplexPlan),
    };
    let out = match plan.precision {
        Precision::F64 => exec::conv_dispatch::<f64>(u, None, None, kf, false, plan, &skip, opts)?,
        Precision::F32 => exec::conv_dispatch::<f32>(u, None, None, kf, false, plan, &skip, opts)?,
    };
    Ok(out)
}
