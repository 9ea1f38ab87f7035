//! Monarch-decomposed forward and inverse transforms.
//!
//! Each stage applies its factor's DFT matrix to the natural row-major
//! reshape of the buffer (a left matmul over the high digit), multiplies in
//! the stage twiddle grid, and recurses on the contiguous rows; the final two
//! factors collapse into one left and one right matmul. No permutation is
//! ever applied to the data: the output sits in the plan's fused layout, and
//! [`Spectrum::to_flat`] (a gather through the plan's permutation) recovers
//! flat frequency order.

use num_complex::{Complex, Complex64};

use super::element::Element;
use super::matmul::{matmul_ranges, BlockedMatmulConfig, TileCounter};
use super::stats::StatsCollector;
use super::ExecError;
use crate::dft::Direction;
use crate::plan::MonarchPlan;

/// Frequency-domain array produced by [`monarch_fft`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub n: usize,
    pub layout: SpectrumLayout,
    pub data: Vec<Complex64>,
}

/// How a spectrum's entries are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumLayout {
    /// Entry k is frequency bin k.
    Flat,
    /// The fused mid-decomposition order of the plan with this signature.
    Plan(u64),
}

impl Spectrum {
    /// Undo the plan layout: a pure permutation back to flat bin order.
    pub fn to_flat(&self, plan: &MonarchPlan) -> Result<Vec<Complex64>, ExecError> {
        match self.layout {
            SpectrumLayout::Flat => Ok(self.data.clone()),
            SpectrumLayout::Plan(sig) => {
                if sig != plan.layout_signature() || self.data.len() != plan.transform_len {
                    return Err(ExecError::LayoutMismatch);
                }
                let mut flat = vec![Complex64::new(0.0, 0.0); self.data.len()];
                for (q, &v) in self.data.iter().enumerate() {
                    flat[plan.layout_perm[q]] = v;
                }
                Ok(flat)
            }
        }
    }
}

/// Reorder a flat spectrum into the plan's fused layout.
pub fn apply_layout(flat: &[Complex64], plan: &MonarchPlan) -> Result<Spectrum, ExecError> {
    if flat.len() != plan.transform_len {
        return Err(ExecError::LengthMismatch {
            expected: plan.transform_len,
            got: flat.len(),
        });
    }
    let mut data = vec![Complex64::new(0.0, 0.0); flat.len()];
    for (q, out) in data.iter_mut().enumerate() {
        *out = flat[plan.layout_perm[q]];
    }
    Ok(Spectrum {
        n: plan.transform_len,
        layout: SpectrumLayout::Plan(plan.layout_signature()),
        data,
    })
}

/// Shared stage executor: plan data, tile config, and counters.
pub(crate) struct StageExec<'a, T: Element> {
    pub plan: &'a MonarchPlan,
    pub cfg: &'a BlockedMatmulConfig,
    pub stats: Option<&'a StatsCollector>,
    pub _marker: std::marker::PhantomData<T>,
}

impl<'a, T: Element> StageExec<'a, T> {
    pub fn new(
        plan: &'a MonarchPlan,
        cfg: &'a BlockedMatmulConfig,
        stats: Option<&'a StatsCollector>,
    ) -> Self {
        StageExec {
            plan,
            cfg,
            stats,
            _marker: std::marker::PhantomData,
        }
    }

    fn counter(&self, core: bool) -> TileCounter<'a> {
        TileCounter {
            stats: self.stats,
            core,
        }
    }

    /// `buf[rows, :] = mat[rows, inner] . buf[inner-rows, :]` over an f x rest
    /// view, via scratch. Rows outside `rows` are zeroed when `zero_rest` is
    /// set, otherwise left as they were.
    #[allow(clippy::too_many_arguments)]
    pub fn left_matmul(
        &self,
        mat: &[Complex<T>],
        f: usize,
        rest: usize,
        buf: &mut [Complex<T>],
        scratch: &mut [Complex<T>],
        rows: std::ops::Range<usize>,
        inner: std::ops::Range<usize>,
        zero_rest: bool,
        core: bool,
    ) {
        matmul_ranges(
            scratch,
            rest,
            mat,
            f,
            buf,
            rest,
            rows.clone(),
            0..rest,
            inner,
            self.cfg,
            &self.counter(core),
        );
        let zero = Complex::new(T::zero(), T::zero());
        buf[rows.start * rest..rows.end * rest]
            .copy_from_slice(&scratch[rows.start * rest..rows.end * rest]);
        if zero_rest {
            for v in buf[..rows.start * rest].iter_mut() {
                *v = zero;
            }
            for v in buf[rows.end * rest..f * rest].iter_mut() {
                *v = zero;
            }
        }
    }

    /// `buf[rows, cols] = buf[rows, inner] . mat[inner, cols]` over an
    /// f x rest view, via scratch. Written rows have columns outside `cols`
    /// zeroed when `zero_rest` is set; rows outside `rows` are zeroed too.
    #[allow(clippy::too_many_arguments)]
    pub fn right_matmul(
        &self,
        mat: &[Complex<T>],
        f: usize,
        rest: usize,
        buf: &mut [Complex<T>],
        scratch: &mut [Complex<T>],
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
        inner: std::ops::Range<usize>,
        zero_rest: bool,
        core: bool,
    ) {
        matmul_ranges(
            scratch,
            rest,
            buf,
            rest,
            mat,
            rest,
            rows.clone(),
            cols.clone(),
            inner,
            self.cfg,
            &self.counter(core),
        );
        let zero = Complex::new(T::zero(), T::zero());
        for r in rows.clone() {
            let row = &mut buf[r * rest..(r + 1) * rest];
            row[cols.start..cols.end].copy_from_slice(&scratch[r * rest + cols.start..r * rest + cols.end]);
            if zero_rest {
                for v in row[..cols.start].iter_mut() {
                    *v = zero;
                }
                for v in row[cols.end..].iter_mut() {
                    *v = zero;
                }
            }
        }
        if zero_rest {
            for v in buf[..rows.start * rest].iter_mut() {
                *v = zero;
            }
            for v in buf[rows.end * rest..f * rest].iter_mut() {
                *v = zero;
            }
        }
    }

    /// Elementwise twiddle over the first `row_limit` rows of the stage view.
    pub fn twiddle(
        &self,
        level: usize,
        direction: Direction,
        buf: &mut [Complex<T>],
        row_limit: usize,
    ) {
        let stage = &self.plan.stages[level];
        let grid = match direction {
            Direction::Forward => T::stage_twiddle_forward(stage),
            Direction::Inverse => T::stage_twiddle_inverse(stage),
        };
        let grid = grid.expect("twiddle applies only below the last stage");
        let count = row_limit * stage.rest;
        for (v, t) in buf[..count].iter_mut().zip(grid[..count].iter()) {
            *v = *v * *t;
        }
    }

    /// Forward transform of one sequence, recursing from `level`. The result
    /// is left in plan layout. `causal_inner` restricts the top-level
    /// contraction to the leading rows (inputs known zero beyond them).
    pub fn forward_rec(
        &self,
        level: usize,
        buf: &mut [Complex<T>],
        scratch: &mut [Complex<T>],
        causal_inner: Option<usize>,
    ) {
        let p = self.plan.p;
        let stage = &self.plan.stages[level];
        let (f, rest) = (stage.factor, stage.rest);
        let mats = self.plan.matrices(f);
        let inner = match causal_inner {
            Some(limit) if level == 0 => 0..limit,
            _ => 0..f,
        };
        let core = level == p - 2;
        self.left_matmul(
            T::factor_forward(mats),
            f,
            rest,
            buf,
            scratch,
            0..f,
            inner,
            false,
            core,
        );
        self.twiddle(level, Direction::Forward, buf, f);
        if core {
            let last = self.plan.matrices(rest);
            self.right_matmul(
                T::factor_forward(last),
                f,
                rest,
                buf,
                scratch,
                0..f,
                0..rest,
                0..rest,
                false,
                true,
            );
        } else {
            for r in 0..f {
                self.forward_rec(
                    level + 1,
                    &mut buf[r * rest..(r + 1) * rest],
                    &mut scratch[r * rest..(r + 1) * rest],
                    None,
                );
            }
        }
    }

    /// Inverse of [`Self::forward_rec`] without the final 1/n scaling.
    /// `causal_out` restricts the top-level output to the leading rows.
    pub fn inverse_rec(
        &self,
        level: usize,
        buf: &mut [Complex<T>],
        scratch: &mut [Complex<T>],
        causal_out: Option<usize>,
    ) {
        let p = self.plan.p;
        let stage = &self.plan.stages[level];
        let (f, rest) = (stage.factor, stage.rest);
        let mats = self.plan.matrices(f);
        let core = level == p - 2;
        if core {
            let last = self.plan.matrices(rest);
            self.right_matmul(
                T::factor_inverse(last),
                f,
                rest,
                buf,
                scratch,
                0..f,
                0..rest,
                0..rest,
                false,
                true,
            );
        } else {
            for r in 0..f {
                self.inverse_rec(
                    level + 1,
                    &mut buf[r * rest..(r + 1) * rest],
                    &mut scratch[r * rest..(r + 1) * rest],
                    None,
                );
            }
        }
        self.twiddle(level, Direction::Inverse, buf, f);
        let rows = match causal_out {
            Some(limit) if level == 0 => 0..limit,
            _ => 0..f,
        };
        self.left_matmul(
            T::factor_inverse(mats),
            f,
            rest,
            buf,
            scratch,
            rows,
            0..f,
            true,
            core,
        );
    }

    /// Full forward transform with instrumentation.
    pub fn forward(
        &self,
        buf: &mut [Complex<T>],
        scratch: &mut [Complex<T>],
        causal_inner: Option<usize>,
    ) {
        if let Some(s) = self.stats {
            s.record_transform(Direction::Forward, self.plan.transform_len);
        }
        self.forward_rec(0, buf, scratch, causal_inner);
    }

    /// Full inverse transform (unscaled) with instrumentation.
    pub fn inverse(
        &self,
        buf: &mut [Complex<T>],
        scratch: &mut [Complex<T>],
        causal_out: Option<usize>,
    ) {
        if let Some(s) = self.stats {
            s.record_transform(Direction::Inverse, self.plan.transform_len);
        }
        self.inverse_rec(0, buf, scratch, causal_out);
    }
}

fn check_complex_plan(plan: &MonarchPlan) -> Result<(), ExecError> {
    if plan.real_input {
        return Err(ExecError::RealPlanComplexTransform);
    }
    Ok(())
}

/// Monarch-decomposed FFT of a complex sequence. The result stays in the
/// plan's fused layout; [`Spectrum::to_flat`] recovers bin order.
pub fn monarch_fft(x: &[Complex64], plan: &MonarchPlan) -> Result<Spectrum, ExecError> {
    check_complex_plan(plan)?;
    if x.len() != plan.n {
        return Err(ExecError::LengthMismatch {
            expected: plan.n,
            got: x.len(),
        });
    }
    let cfg = BlockedMatmulConfig::default();
    let ex = StageExec::<f64>::new(plan, &cfg, None);
    let mut buf = x.to_vec();
    let mut scratch = vec![Complex64::new(0.0, 0.0); x.len()];
    ex.forward(&mut buf, &mut scratch, None);
    Ok(Spectrum {
        n: plan.n,
        layout: SpectrumLayout::Plan(plan.layout_signature()),
        data: buf,
    })
}

/// Exact inverse of [`monarch_fft`], including the single final 1/n scaling.
pub fn monarch_ifft(spectrum: &Spectrum, plan: &MonarchPlan) -> Result<Vec<Complex64>, ExecError> {
    check_complex_plan(plan)?;
    let mut buf = match spectrum.layout {
        SpectrumLayout::Plan(sig) => {
            if sig != plan.layout_signature() || spectrum.data.len() != plan.transform_len {
                return Err(ExecError::LayoutMismatch);
            }
            spectrum.data.clone()
        }
        SpectrumLayout::Flat => apply_layout(&spectrum.data, plan)?.data,
    };
    let cfg = BlockedMatmulConfig::default();
    let ex = StageExec::<f64>::new(plan, &cfg, None);
    let mut scratch = vec![Complex64::new(0.0, 0.0); buf.len()];
    ex.inverse(&mut buf, &mut scratch, None);
    let scale = 1.0 / plan.transform_len as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
    Ok(buf)
}
