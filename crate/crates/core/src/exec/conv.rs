//! Fused FFT convolution: forward transform, pointwise kernel multiply, and
//! inverse transform in one pass over a (batch, channel) grid.
//!
//! The spectrum never leaves the plan's fused layout between the forward and
//! inverse halves; kernels are prepared pre-permuted into that layout so the
//! multiply point is a straight elementwise product. Gating multiplies are
//! folded into the load and store passes. With real-input packing the whole
//! pipeline runs through one half-length complex transform per direction.

use num_complex::{Complex, Complex32, Complex64};

use super::element::Element;
use super::matmul::BlockedMatmulConfig;
use super::stats::StatsCollector;
use super::transform::StageExec;
use super::ExecError;
use crate::dft::{root_of_unity, rfft_via_half, ConvMode, Direction};
use crate::plan::{MonarchPlan, Precision};
use crate::tensor::{Tensor, TensorData};

/// Ordering of a prepared kernel spectrum's entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelLayout {
    /// Flat frequency bins, full transform length per channel.
    Flat,
    /// The fused layout of the plan with this signature.
    Plan(u64),
    /// Bins 0..=n/2 of the real-input path, flat order.
    HalfFlat,
}

/// Per-channel kernel spectrum, stored in the layout the execution path
/// multiplies at.
#[derive(Debug, Clone)]
pub struct KernelSpectrum {
    pub h: usize,
    /// Convolution frame length the kernel was padded to.
    pub n: usize,
    /// Entries per channel.
    pub row_len: usize,
    pub layout: KernelLayout,
    pub mode: ConvMode,
    pub data: Vec<Complex64>,
    /// f32 copy, present when prepared for an f32 plan on the complex path.
    pub data32: Vec<Complex32>,
}

impl KernelSpectrum {
    pub fn channel(&self, h: usize) -> &[Complex64] {
        &self.data[h * self.row_len..(h + 1) * self.row_len]
    }

    /// Permute a plan-layout kernel back to flat bin order.
    pub fn to_flat(&self, plan: &MonarchPlan) -> Result<KernelSpectrum, ExecError> {
        match self.layout {
            KernelLayout::Flat => Ok(self.clone()),
            KernelLayout::HalfFlat => Err(ExecError::LayoutMismatch),
            KernelLayout::Plan(sig) => {
                if sig != plan.layout_signature() || self.row_len != plan.transform_len {
                    return Err(ExecError::LayoutMismatch);
                }
                let mut data = vec![Complex64::new(0.0, 0.0); self.data.len()];
                for h in 0..self.h {
                    let src = self.channel(h);
                    let dst = &mut data[h * self.row_len..(h + 1) * self.row_len];
                    for (q, &v) in src.iter().enumerate() {
                        dst[plan.layout_perm[q]] = v;
                    }
                }
                Ok(KernelSpectrum {
                    h: self.h,
                    n: self.n,
                    row_len: self.row_len,
                    layout: KernelLayout::Flat,
                    mode: self.mode,
                    data,
                    data32: Vec::new(),
                })
            }
        }
    }

    /// Permute a flat kernel spectrum into the plan's fused layout, building
    /// the f32 copy when the plan executes in f32.
    pub fn to_plan_layout(&self, plan: &MonarchPlan) -> Result<KernelSpectrum, ExecError> {
        match self.layout {
            KernelLayout::Plan(sig) if sig == plan.layout_signature() => Ok(self.clone()),
            KernelLayout::Plan(_) | KernelLayout::HalfFlat => Err(ExecError::LayoutMismatch),
            KernelLayout::Flat => {
                if self.row_len != plan.transform_len {
                    return Err(ExecError::LayoutMismatch);
                }
                let mut data = vec![Complex64::new(0.0, 0.0); self.data.len()];
                for h in 0..self.h {
                    let src = self.channel(h);
                    let dst = &mut data[h * self.row_len..(h + 1) * self.row_len];
                    for (q, out) in dst.iter_mut().enumerate() {
                        *out = src[plan.layout_perm[q]];
                    }
                }
                let data32 = if plan.precision == Precision::F32 {
                    data.iter()
                        .map(|z| Complex32::new(z.re as f32, z.im as f32))
                        .collect()
                } else {
                    Vec::new()
                };
                Ok(KernelSpectrum {
                    h: self.h,
                    n: self.n,
                    row_len: self.row_len,
                    layout: KernelLayout::Plan(plan.layout_signature()),
                    mode: self.mode,
                    data,
                    data32,
                })
            }
        }
    }
}

/// Execution knobs for the convolution entry points.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConvOptions<'a> {
    /// Worker threads over the (batch, channel) grid; 0 picks the machine
    /// parallelism. Outputs are bit-identical for every thread count.
    pub threads: usize,
    pub tiles: BlockedMatmulConfig,
    pub stats: Option<&'a StatsCollector>,
}

/// Structural skipping limits. The dense convolution uses the identity spec;
/// the frequency-sparse path narrows it.
#[derive(Debug, Clone)]
pub(crate) struct SkipSpec {
    /// Rows recursed into per loop level (levels 0..p-2); the rest are zeroed.
    pub loop_keep: Vec<usize>,
    /// Computed rows of the core (innermost pair) view, tile-rounded.
    pub core_rows: usize,
    /// Computed columns of the core view, tile-rounded.
    pub core_cols: usize,
    /// Whole output is identically zero (some dimension fully masked).
    pub all_zero: bool,
}

impl SkipSpec {
    pub fn dense(plan: &MonarchPlan) -> Self {
        let p = plan.p;
        SkipSpec {
            loop_keep: plan.factors[..p - 2].to_vec(),
            core_rows: plan.factors[p - 2],
            core_cols: plan.factors[p - 1],
            all_zero: false,
        }
    }
}

fn real_row_f64(data: &TensorData, offset: usize, idx: usize) -> f64 {
    match data {
        TensorData::Real32(v) => v[offset + idx] as f64,
        TensorData::Real64(v) => v[offset + idx],
        _ => unreachable!("validated real input"),
    }
}

/// Shape/meta checks shared by the convolution entry points. Returns
/// (batch, channels, input length, output length).
fn validate_conv_shapes(
    u: &Tensor,
    kf: &KernelSpectrum,
    plan: &MonarchPlan,
) -> Result<(usize, usize, usize, usize), ExecError> {
    let dims = u.dims();
    if dims.len() != 3 {
        return Err(ExecError::InputShape(format!(
            "expected a 3-d batch x channels x length tensor, got {} dims",
            dims.len()
        )));
    }
    if !matches!(u.data(), TensorData::Real32(_) | TensorData::Real64(_)) {
        return Err(ExecError::InputShape(
            "convolution input must be a real tensor".into(),
        ));
    }
    let (b, h, n_in) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
    let expected_in = if plan.causal { plan.n / 2 } else { plan.n };
    if n_in != expected_in {
        return Err(ExecError::LengthMismatch {
            expected: expected_in,
            got: n_in,
        });
    }
    if kf.h != h {
        return Err(ExecError::KernelChannelMismatch {
            kernel: kf.h,
            input: h,
        });
    }
    if kf.n != plan.n {
        return Err(ExecError::LengthMismatch {
            expected: plan.n,
            got: kf.n,
        });
    }
    let plan_mode = if plan.causal {
        ConvMode::Causal
    } else {
        ConvMode::Circular
    };
    if kf.mode != plan_mode {
        return Err(ExecError::ModeMismatch);
    }
    match (plan.real_input, kf.layout) {
        (false, KernelLayout::Plan(sig)) if sig == plan.layout_signature() => {}
        (true, KernelLayout::HalfFlat) if kf.row_len == plan.n / 2 + 1 => {}
        _ => return Err(ExecError::LayoutMismatch),
    }
    if !plan.real_input && plan.precision == Precision::F32 && kf.data32.len() != kf.data.len() {
        return Err(ExecError::PrecisionMismatch);
    }
    Ok((b, h, n_in, n_in))
}

/// Precompute the FFT of a filter bank, stored pre-permuted into the plan's
/// multiply-point layout (half-spectrum form for real-packing plans).
pub fn prepare_kernel(
    k: &Tensor,
    plan: &MonarchPlan,
    mode: ConvMode,
) -> Result<KernelSpectrum, ExecError> {
    let dims = k.dims();
    if dims.len() != 2 {
        return Err(ExecError::InputShape(format!(
            "expected a 2-d channels x taps filter tensor, got {} dims",
            dims.len()
        )));
    }
    if !matches!(k.data(), TensorData::Real32(_) | TensorData::Real64(_)) {
        return Err(ExecError::InputShape("filter must be a real tensor".into()));
    }
    let plan_mode = if plan.causal {
        ConvMode::Causal
    } else {
        ConvMode::Circular
    };
    if mode != plan_mode {
        return Err(ExecError::ModeMismatch);
    }
    let (h, n_k) = (dims[0] as usize, dims[1] as usize);
    match mode {
        ConvMode::Causal => {
            if n_k > plan.n / 2 {
                return Err(ExecError::KernelExceedsCausalBudget {
                    kernel: n_k,
                    budget: plan.n / 2,
                });
            }
        }
        ConvMode::Circular => {
            if n_k != plan.n {
                return Err(ExecError::LengthMismatch {
                    expected: plan.n,
                    got: n_k,
                });
            }
        }
    }

    let n = plan.n;
    let cfg = BlockedMatmulConfig::default();
    if plan.real_input {
        let half = n / 2;
        let row_len = half + 1;
        let mut data = vec![Complex64::new(0.0, 0.0); h * row_len];
        let ex = StageExec::<f64>::new(plan, &cfg, None);
        let mut padded = vec![0.0f64; n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); half];
        for ch in 0..h {
            for (j, v) in padded.iter_mut().enumerate() {
                *v = if j < n_k {
                    real_row_f64(k.data(), ch * n_k, j)
                } else {
                    0.0
                };
            }
            let spec = rfft_via_half(&padded, |z| {
                let mut buf = z.to_vec();
                ex.forward_rec(0, &mut buf, &mut scratch, None);
                // Back to flat order for the packing algebra.
                let mut flat = vec![Complex64::new(0.0, 0.0); buf.len()];
                for (q, &v) in buf.iter().enumerate() {
                    flat[plan.layout_perm[q]] = v;
                }
                flat
            })
            .expect("even padded length");
            data[ch * row_len..(ch + 1) * row_len].copy_from_slice(&spec.entries);
        }
        Ok(KernelSpectrum {
            h,
            n,
            row_len,
            layout: KernelLayout::HalfFlat,
            mode,
            data,
            data32: Vec::new(),
        })
    } else {
        let mut data = vec![Complex64::new(0.0, 0.0); h * n];
        let ex = StageExec::<f64>::new(plan, &cfg, None);
        let mut scratch = vec![Complex64::new(0.0, 0.0); n];
        for ch in 0..h {
            let row = &mut data[ch * n..(ch + 1) * n];
            for (j, v) in row.iter_mut().enumerate() {
                *v = if j < n_k {
                    Complex64::new(real_row_f64(k.data(), ch * n_k, j), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            ex.forward_rec(0, row, &mut scratch, None);
        }
        let data32 = if plan.precision == Precision::F32 {
            data.iter()
                .map(|z| Complex32::new(z.re as f32, z.im as f32))
                .collect()
        } else {
            Vec::new()
        };
        Ok(KernelSpectrum {
            h,
            n,
            row_len: n,
            layout: KernelLayout::Plan(plan.layout_signature()),
            mode,
            data,
            data32,
        })
    }
}

/// Per-worker scratch: one complex buffer and one matmul staging buffer of
/// the transform length, plus the half-spectrum staging for real plans.
pub(crate) struct Workspace<T> {
    pub buf: Vec<Complex<T>>,
    pub scratch: Vec<Complex<T>>,
    pub half: Vec<Complex64>,
}

impl<T: Element> Workspace<T> {
    pub fn new(plan: &MonarchPlan, stats: Option<&StatsCollector>) -> Self {
        let len = plan.transform_len;
        let half_len = if plan.real_input { plan.n / 2 + 1 } else { 0 };
        let zero = Complex::new(T::zero(), T::zero());
        let ws = Workspace {
            buf: vec![zero; len],
            scratch: vec![zero; len],
            half: vec![Complex64::new(0.0, 0.0); half_len],
        };
        if let Some(s) = stats {
            let bytes = (2 * len * std::mem::size_of::<Complex<T>>()
                + half_len * std::mem::size_of::<Complex64>()) as u64;
            s.record_workspace(bytes);
        }
        ws
    }
}

/// Distribute (batch * channels) row tasks over worker threads. `out` is
/// split into disjoint per-row slices; every task is pure, so results do not
/// depend on the thread count.
pub(crate) fn run_tasks<T, F>(
    plan: &MonarchPlan,
    channels: usize,
    n_out: usize,
    threads: usize,
    stats: Option<&StatsCollector>,
    out: &mut [T],
    task: F,
) where
    T: Element,
    F: Fn(usize, usize, &mut [T], &mut Workspace<T>) + Sync,
{
    if n_out == 0 || out.is_empty() {
        return;
    }
    let mut rows: Vec<(usize, &mut [T])> = out.chunks_mut(n_out).enumerate().collect();
    let requested = if threads == 0 {
        std::thread::available_parallelism()
            .map(|p| p.get())
            .unwrap_or(1)
    } else {
        threads
    };
    let nthreads = requested.clamp(1, rows.len());
    if nthreads == 1 {
        let mut ws = Workspace::<T>::new(plan, stats);
        for (idx, row) in rows.iter_mut() {
            task(*idx / channels, *idx % channels, row, &mut ws);
        }
        return;
    }
    let per = rows.len().div_ceil(nthreads);
    std::thread::scope(|s| {
        for group in rows.chunks_mut(per) {
            s.spawn(|| {
                let mut ws = Workspace::<T>::new(plan, stats);
                for (idx, row) in group.iter_mut() {
                    task(*idx / channels, *idx % channels, row, &mut ws);
                }
            });
        }
    });
}

/// One fused convolution level: forward stage matmul, twiddle, recursion (or
/// the two-factor core with the pointwise kernel multiply), then the mirrored
/// inverse stage.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_rec<T: Element>(
    ex: &StageExec<'_, T>,
    level: usize,
    buf: &mut [Complex<T>],
    scratch: &mut [Complex<T>],
    kf: &[Complex<T>],
    conj_kernel: bool,
    skip: &SkipSpec,
    causal: bool,
) {
    let p = ex.plan.p;
    let stage = &ex.plan.stages[level];
    let (f, rest) = (stage.factor, stage.rest);
    let mats = ex.plan.matrices(f);
    let top = level == 0;
    let core = level == p - 2;
    let inner = if top && causal { 0..f / 2 } else { 0..f };
    let out_rows = if top && causal { 0..f / 2 } else { 0..f };

    if core {
        let ka = skip.core_rows.min(f);
        let kb = skip.core_cols.min(rest);
        ex.left_matmul(
            T::factor_forward(mats),
            f,
            rest,
            buf,
            scratch,
            0..ka,
            inner,
            true,
            true,
        );
        ex.twiddle(level, Direction::Forward, buf, ka);
        let last = ex.plan.matrices(rest);
        ex.right_matmul(
            T::factor_forward(last),
            f,
            rest,
            buf,
            scratch,
            0..ka,
            0..kb,
            0..rest,
            true,
            true,
        );
        for r in 0..ka {
            let row = &mut buf[r * rest..r * rest + kb];
            let krow = &kf[r * rest..r * rest + kb];
            if conj_kernel {
                for (v, k) in row.iter_mut().zip(krow.iter()) {
                    *v = *v * k.conj();
                }
            } else {
                for (v, k) in row.iter_mut().zip(krow.iter()) {
                    *v = *v * *k;
                }
            }
        }
        ex.right_matmul(
            T::factor_inverse(last),
            f,
            rest,
            buf,
            scratch,
            0..ka,
            0..rest,
            0..kb,
            true,
            true,
        );
        ex.twiddle(level, Direction::Inverse, buf, ka);
        ex.left_matmul(
            T::factor_inverse(mats),
            f,
            rest,
            buf,
            scratch,
            out_rows,
            0..ka,
            true,
            true,
        );
    } else {
        ex.left_matmul(
            T::factor_forward(mats),
            f,
            rest,
            buf,
            scratch,
            0..f,
            inner,
            false,
            false,
        );
        let keep = skip.loop_keep[level].min(f);
        ex.twiddle(level, Direction::Forward, buf, keep);
        let zero = Complex::new(T::zero(), T::zero());
        for v in buf[keep * rest..f * rest].iter_mut() {
            *v = zero;
        }
        for r in 0..keep {
            conv_rec(
                ex,
                level + 1,
                &mut buf[r * rest..(r + 1) * rest],
                &mut scratch[r * rest..(r + 1) * rest],
                &kf[r * rest..(r + 1) * rest],
                conj_kernel,
                skip,
                false,
            );
        }
        ex.twiddle(level, Direction::Inverse, buf, keep);
        ex.left_matmul(
            T::factor_inverse(mats),
            f,
            rest,
            buf,
            scratch,
            out_rows,
            0..keep,
            true,
            false,
        );
    }
}

/// Unpack/repack phase tables for the real-input path, built once per call.
pub(crate) struct HalfTables {
    pub forward: Vec<Complex64>,
    pub inverse: Vec<Complex64>,
}

impl HalfTables {
    pub fn new(n: usize) -> Self {
        let half = n / 2;
        HalfTables {
            forward: (0..half)
                .map(|k| root_of_unity(n, k as u64, Direction::Forward))
                .collect(),
            inverse: (0..half)
                .map(|k| root_of_unity(n, k as u64, Direction::Inverse))
                .collect(),
        }
    }
}

/// Complex-path task body: load (with optional input gate), fused transform
/// and multiply, store (with optional output gate).
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_task_complex<T: Element>(
    ex: &StageExec<'_, T>,
    kf_row: &[Complex<T>],
    conj_kernel: bool,
    skip: &SkipSpec,
    u: &TensorData,
    in_gate: Option<&TensorData>,
    out_gate: Option<&TensorData>,
    row_offset: usize,
    n_in: usize,
    out: &mut [T],
    ws: &mut Workspace<T>,
) {
    let plan = ex.plan;
    let n = plan.transform_len;
    let causal = plan.causal;
    for j in 0..n_in {
        let mut x = real_row_f64(u, row_offset, j);
        if let Some(g) = in_gate {
            x *= real_row_f64(g, row_offset, j);
        }
        ws.buf[j] = Complex::new(T::from_f64(x), T::zero());
    }
    let zero = Complex::new(T::zero(), T::zero());
    for v in ws.buf[n_in..n].iter_mut() {
        *v = zero;
    }

    if skip.all_zero {
        for v in ws.buf.iter_mut() {
            *v = zero;
        }
    } else {
        if let Some(s) = ex.stats {
            s.record_transform(Direction::Forward, n);
            s.record_transform(Direction::Inverse, n);
        }
        conv_rec(ex, 0, &mut ws.buf, &mut ws.scratch, kf_row, conj_kernel, skip, causal);
    }

    let scale = 1.0 / n as f64;
    for (j, o) in out.iter_mut().enumerate() {
        let mut y = ws.buf[j].re.to_f64() * scale;
        if let Some(g) = out_gate {
            y *= real_row_f64(g, row_offset, j);
        }
        *o = T::from_f64(y);
    }
}

/// Unpack bins 0..=n/2 of the length-n real transform from the packed
/// half-length spectrum sitting in plan layout. Bookkeeping runs in f64.
pub(crate) fn unpack_half<T: Element>(
    plan: &MonarchPlan,
    tables: &HalfTables,
    buf: &[Complex<T>],
    out: &mut [Complex64],
) {
    let half = plan.transform_len;
    let perm = &plan.inv_layout_perm;
    let z0 = T::c64(buf[perm[0]]);
    out[0] = Complex64::new(z0.re + z0.im, 0.0);
    out[half] = Complex64::new(z0.re - z0.im, 0.0);
    for k in 1..half {
        let zk = T::c64(buf[perm[k]]);
        let zm = T::c64(buf[perm[half - k]]).conj();
        let xe = (zk + zm) * 0.5;
        let xo = (zk - zm) / Complex64::new(0.0, 2.0);
        out[k] = xe + tables.forward[k] * xo;
    }
}

/// Rebuild the packed half-length spectrum (plan layout) from half-spectrum
/// bins 0..=n/2.
pub(crate) fn repack_half<T: Element>(
    plan: &MonarchPlan,
    tables: &HalfTables,
    half_spec: &[Complex64],
    buf: &mut [Complex<T>],
) {
    let half = plan.transform_len;
    let perm = &plan.inv_layout_perm;
    for k in 0..half {
        let yk = half_spec[k];
        let ym = half_spec[half - k].conj();
        let ye = (yk + ym) * 0.5;
        let yo = (yk - ym) * 0.5 * tables.inverse[k];
        buf[perm[k]] = T::from_c64(ye + Complex64::new(0.0, 1.0) * yo);
    }
}

/// Real-packing task body: even/odd pack, one half-length forward transform,
/// unpack-multiply-repack through the layout permutation, one half-length
/// inverse transform, demultiplex.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_task_real<T: Element>(
    ex: &StageExec<'_, T>,
    kf_row: &[Complex64],
    conj_kernel: bool,
    tables: &HalfTables,
    u: &TensorData,
    in_gate: Option<&TensorData>,
    out_gate: Option<&TensorData>,
    row_offset: usize,
    n_in: usize,
    out: &mut [T],
    ws: &mut Workspace<T>,
) {
    let plan = ex.plan;
    let half = plan.transform_len;
    let causal = plan.causal;
    let zero = Complex::new(T::zero(), T::zero());

    let fetch = |j: usize| -> f64 {
        if j < n_in {
            let mut x = real_row_f64(u, row_offset, j);
            if let Some(g) = in_gate {
                x *= real_row_f64(g, row_offset, j);
            }
            x
        } else {
            0.0
        }
    };
    let packed_in = n_in.div_ceil(2);
    for j in 0..packed_in {
        ws.buf[j] = Complex::new(T::from_f64(fetch(2 * j)), T::from_f64(fetch(2 * j + 1)));
    }
    for v in ws.buf[packed_in..half].iter_mut() {
        *v = zero;
    }

    let causal_inner = if causal {
        Some(plan.factors[0] / 2)
    } else {
        None
    };
    ex.forward(&mut ws.buf, &mut ws.scratch, causal_inner);

    unpack_half(plan, tables, &ws.buf, &mut ws.half);
    if conj_kernel {
        for (v, k) in ws.half.iter_mut().zip(kf_row.iter()) {
            *v *= k.conj();
        }
    } else {
        for (v, k) in ws.half.iter_mut().zip(kf_row.iter()) {
            *v *= k;
        }
    }
    // Split borrow: repack reads ws.half while writing ws.buf.
    let (buf, half_spec) = (&mut ws.buf, &ws.half);
    repack_half(plan, tables, half_spec, buf);

    let causal_out = if causal {
        Some(plan.factors[0] / 2)
    } else {
        None
    };
    ex.inverse(&mut ws.buf, &mut ws.scratch, causal_out);

    let scale = 1.0 / half as f64;
    let n_out = out.len();
    for j in 0..n_out.div_ceil(2) {
        let z = ws.buf[j];
        let mut even = z.re.to_f64() * scale;
        let mut odd = z.im.to_f64() * scale;
        if let Some(g) = out_gate {
            even *= real_row_f64(g, row_offset, 2 * j);
            if 2 * j + 1 < n_out {
                odd *= real_row_f64(g, row_offset, 2 * j + 1);
            }
        }
        out[2 * j] = T::from_f64(even);
        if 2 * j + 1 < n_out {
            out[2 * j + 1] = T::from_f64(odd);
        }
    }
}

pub(crate) fn kf_rows<'a, T: Element>(kf: &'a KernelSpectrum) -> Vec<&'a [Complex<T>]> {
    let data = T::kernel_data(kf);
    (0..kf.h)
        .map(|h| &data[h * kf.row_len..(h + 1) * kf.row_len])
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_dispatch<T: Element>(
    u: &Tensor,
    in_gate: Option<&Tensor>,
    out_gate: Option<&Tensor>,
    kf: &KernelSpectrum,
    conj_kernel: bool,
    plan: &MonarchPlan,
    skip: &SkipSpec,
    opts: &ConvOptions<'_>,
) -> Result<Tensor, ExecError> {
    opts.tiles.validate()?;
    let (b, h, n_in, n_out) = validate_conv_shapes(u, kf, plan)?;
    for gate in [in_gate, out_gate].into_iter().flatten() {
        if gate.dims() != u.dims() {
            return Err(ExecError::InputShape(
                "gate tensors must match the input shape".into(),
            ));
        }
        if !matches!(gate.data(), TensorData::Real32(_) | TensorData::Real64(_)) {
            return Err(ExecError::InputShape("gates must be real tensors".into()));
        }
    }

    let mut out = vec![T::zero(); b * h * n_out];
    let ex = StageExec::<T>::new(plan, &opts.tiles, opts.stats);
    if plan.real_input {
        let tables = HalfTables::new(plan.n);
        run_tasks(
            plan,
            h,
            n_out,
            opts.threads,
            opts.stats,
            &mut out,
            |bi, hi, row, ws| {
                conv_task_real(
                    &ex,
                    kf.channel(hi),
                    conj_kernel,
                    &tables,
                    u.data(),
                    in_gate.map(|t| t.data()),
                    out_gate.map(|t| t.data()),
                    (bi * h + hi) * n_in,
                    n_in,
                    row,
                    ws,
                );
            },
        );
    } else {
        let rows = kf_rows::<T>(kf);
        run_tasks(
            plan,
            h,
            n_out,
            opts.threads,
            opts.stats,
            &mut out,
            |bi, hi, row, ws| {
                conv_task_complex(
                    &ex,
                    rows[hi],
                    conj_kernel,
                    skip,
                    u.data(),
                    in_gate.map(|t| t.data()),
                    out_gate.map(|t| t.data()),
                    (bi * h + hi) * n_in,
                    n_in,
                    row,
                    ws,
                );
            },
        );
    }
    Ok(T::into_tensor(
        vec![b as u64, h as u64, n_out as u64],
        out,
    ))
}

/// FFT convolution of every (batch, channel) sequence against its channel's
/// prepared kernel. Circular when the plan frame equals the input length,
/// causal via the implicit zero-padded frame otherwise.
pub fn conv_forward(
    u: &Tensor,
    kf: &KernelSpectrum,
    plan: &MonarchPlan,
    opts: &ConvOptions<'_>,
) -> Result<Tensor, ExecError> {
    let skip = SkipSpec::dense(plan);
    match plan.precision {
        Precision::F64 => conv_dispatch::<f64>(u, None, None, kf, false, plan, &skip, opts),
        Precision::F32 => conv_dispatch::<f32>(u, None, None, kf, false, plan, &skip, opts),
    }
}

/// Gated convolution `y = v .* conv(u .* w)`, with both elementwise products
/// fused into the transform's load and store passes — no gated copy of the
/// input and no pre-gate output are ever materialized.
pub fn conv_gated(
    u: &Tensor,
    v: &Tensor,
    w: &Tensor,
    kf: &KernelSpectrum,
    plan: &MonarchPlan,
    opts: &ConvOptions<'_>,
) -> Result<Tensor, ExecError> {
    let skip = SkipSpec::dense(plan);
    match plan.precision {
        Precision::F64 => conv_dispatch::<f64>(u, Some(w), Some(v), kf, false, plan, &skip, opts),
        Precision::F32 => conv_dispatch::<f32>(u, Some(w), Some(v), kf, false, plan, &skip, opts),
    }
}
