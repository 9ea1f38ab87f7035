//! Backward pass for the convolution. Nothing is retained from the forward
//! call: every spectrum needed here is recomputed from the saved inputs.
//!
//! Both gradients are correlations, computed through the same transform
//! machinery with a conjugated spectrum:
//! `du = ifft(fft(dy) .* conj(kf))` per sequence, and
//! `dk[h] = ifft(sum_b fft(dy[b,h]) .* conj(fft(u[b,h])))`.

use num_complex::{Complex, Complex64};

use super::conv::{
    conv_dispatch, repack_half, unpack_half, ConvOptions, HalfTables, KernelSpectrum, SkipSpec,
};
use super::element::Element;
use super::transform::StageExec;
use super::ExecError;
use crate::plan::{MonarchPlan, Precision};
use crate::tensor::{Tensor, TensorData};

fn real_at(data: &TensorData, idx: usize) -> f64 {
    match data {
        TensorData::Real32(v) => v[idx] as f64,
        TensorData::Real64(v) => v[idx],
        _ => unreachable!("validated real input"),
    }
}

/// Gradients of the convolution with respect to its input and filter.
///
/// `dy` must have the forward output shape; `u` is the saved forward input.
/// `dk` comes back in the time domain with `plan.n` taps per channel, the
/// tail beyond the causal budget zeroed in causal mode.
pub fn conv_backward(
    dy: &Tensor,
    u: &Tensor,
    kf: &KernelSpectrum,
    plan: &MonarchPlan,
    opts: &ConvOptions<'_>,
) -> Result<(Tensor, Tensor), ExecError> {
    if dy.dims() != u.dims() {
        return Err(ExecError::InputShape(format!(
            "dy dims {:?} do not match input dims {:?}",
            dy.dims(),
            u.dims()
        )));
    }
    let skip = SkipSpec::dense(plan);
    // du: correlation of dy with the kernel == convolution with the
    // conjugated spectrum. Same machinery, conjugated multiply point.
    let du = match plan.precision {
        Precision::F64 => conv_dispatch::<f64>(dy, None, None, kf, true, plan, &skip, opts)?,
        Precision::F32 => conv_dispatch::<f32>(dy, None, None, kf, true, plan, &skip, opts)?,
    };
    let dk = match plan.precision {
        Precision::F64 => filter_grad::<f64>(dy, u, kf, plan, opts)?,
        Precision::F32 => filter_grad::<f32>(dy, u, kf, plan, opts)?,
    };
    Ok((du, dk))
}

fn filter_grad<T: Element>(
    dy: &Tensor,
    u: &Tensor,
    kf: &KernelSpectrum,
    plan: &MonarchPlan,
    opts: &ConvOptions<'_>,
) -> Result<Tensor, ExecError> {
    let dims = dy.dims();
    let (b, h, n_in) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
    if kf.h != h {
        return Err(ExecError::KernelChannelMismatch {
            kernel: kf.h,
            input: h,
        });
    }
    let n = plan.n;
    let len = plan.transform_len;
    let causal = plan.causal;
    let causal_rows = if causal {
        Some(plan.factors[0] / 2)
    } else {
        None
    };
    let ex = StageExec::<T>::new(plan, &opts.tiles, opts.stats);
    let tables = if plan.real_input {
        Some(HalfTables::new(n))
    } else {
        None
    };

    let mut dk = vec![T::zero(); h * n];
    super::conv::run_tasks(
        plan,
        h,
        n,
        opts.threads,
        opts.stats,
        &mut dk,
        |_, hi, row, ws| {
            let zero = Complex::new(T::zero(), T::zero());
            let mut buf2 = vec![zero; len];
            if plan.real_input {
                let tables = tables.as_ref().unwrap();
                let half = len;
                let mut acc = vec![Complex64::new(0.0, 0.0); half + 1];
                let mut spec2 = vec![Complex64::new(0.0, 0.0); half + 1];
                for bi in 0..b {
                    let off = (bi * h + hi) * n_in;
                    pack_real(dy.data(), off, n_in, &mut ws.buf);
                    ex.forward(&mut ws.buf, &mut ws.scratch, causal_rows);
                    unpack_half(plan, tables, &ws.buf, &mut ws.half);
                    pack_real(u.data(), off, n_in, &mut buf2);
                    ex.forward(&mut buf2, &mut ws.scratch, causal_rows);
                    unpack_half(plan, tables, &buf2, &mut spec2);
                    for (a, (x, y)) in acc
                        .iter_mut()
                        .zip(ws.half.iter().zip(spec2.iter()))
                    {
                        *a += x * y.conj();
                    }
                }
                ws.half.copy_from_slice(&acc);
                repack_half(plan, tables, &ws.half, &mut ws.buf);
                ex.inverse(&mut ws.buf, &mut ws.scratch, causal_rows);
                let scale = 1.0 / half as f64;
                store_filter_grad_real(&ws.buf, scale, causal, row);
            } else {
                let mut acc = vec![Complex64::new(0.0, 0.0); len];
                for bi in 0..b {
                    let off = (bi * h + hi) * n_in;
                    load_padded(dy.data(), off, n_in, &mut ws.buf);
                    ex.forward(&mut ws.buf, &mut ws.scratch, causal_rows);
                    load_padded(u.data(), off, n_in, &mut buf2);
                    ex.forward(&mut buf2, &mut ws.scratch, causal_rows);
                    for (a, (x, y)) in acc.iter_mut().zip(ws.buf.iter().zip(buf2.iter())) {
                        *a += T::c64(*x) * T::c64(*y).conj();
                    }
                }
                for (v, a) in ws.buf.iter_mut().zip(acc.iter()) {
                    *v = T::from_c64(*a);
                }
                ex.inverse(&mut ws.buf, &mut ws.scratch, causal_rows);
                let scale = 1.0 / len as f64;
                let valid = if causal { n / 2 } else { n };
                for (m, out) in row.iter_mut().enumerate() {
                    *out = if m < valid {
                        T::from_f64(ws.buf[m].re.to_f64() * scale)
                    } else {
                        T::zero()
                    };
                }
            }
        },
    );
    Ok(T::into_tensor(vec![h as u64, n as u64], dk))
}

fn load_padded<T: Element>(data: &TensorData, offset: usize, n_in: usize, buf: &mut [Complex<T>]) {
    for (j, v) in buf.iter_mut().enumerate() {
        *v = if j < n_in {
            Complex::new(T::from_f64(real_at(data, offset + j)), T::zero())
        } else {
            Complex::new(T::zero(), T::zero())
        };
    }
}

fn pack_real<T: Element>(data: &TensorData, offset: usize, n_in: usize, buf: &mut [Complex<T>]) {
    let fetch = |j: usize| -> f64 {
        if j < n_in {
            real_at(data, offset + j)
        } else {
            0.0
        }
    };
    for (j, v) in buf.iter_mut().enumerate() {
        *v = Complex::new(
            T::from_f64(fetch(2 * j)),
            T::from_f64(fetch(2 * j + 1)),
        );
    }
}

fn store_filter_grad_real<T: Element>(buf: &[Complex<T>], scale: f64, causal: bool, row: &mut [T]) {
    let n = row.len();
    let valid = if causal { n / 2 } else { n };
    for j in 0..n / 2 {
        let z = buf[j];
        let even = 2 * j;
        let odd = 2 * j + 1;
        row[even] = if even < valid {
            T::from_f64(z.re.to_f64() * scale)
        } else {
            T::zero()
        };
        row[odd] = if odd < valid {
            T::from_f64(z.im.to_f64() * scale)
        } else {
            T::zero()
        };
    }
}
