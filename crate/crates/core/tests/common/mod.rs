//! Shared helpers for the integration suites.

#![allow(dead_code)]

use fftconv_core::dft::{direct_conv, ConvMode};
use fftconv_core::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_tensor(dims: &[u64], rng: &mut ChaCha8Rng) -> Tensor {
    let count: u64 = dims.iter().product();
    Tensor::from_f64(dims.to_vec(), random_vec(count as usize, rng)).unwrap()
}

pub fn random_tensor_f32(dims: &[u64], rng: &mut ChaCha8Rng) -> Tensor {
    let count: u64 = dims.iter().product();
    let vals: Vec<f32> = (0..count).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    Tensor::from_f32(dims.to_vec(), vals).unwrap()
}

/// Max absolute difference scaled by the oracle's infinity norm.
pub fn rel_error(got: &[f64], oracle: &[f64]) -> f64 {
    let norm = oracle.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-300);
    got.iter()
        .zip(oracle.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / norm
}

pub fn tensor_as_f64(t: &Tensor) -> Vec<f64> {
    t.to_f64_vec().expect("real tensor")
}

/// Direct-conv oracle applied per (batch, channel) row of a 3-d tensor.
pub fn direct_conv_grid(u: &Tensor, k: &Tensor, mode: ConvMode, frame: usize) -> Vec<f64> {
    let dims = u.dims();
    let (b, h, n_in) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
    let kdims = k.dims();
    let n_k = kdims[1] as usize;
    let uv = tensor_as_f64(u);
    let kv = tensor_as_f64(k);
    let mut out = Vec::with_capacity(b * h * n_in);
    for bi in 0..b {
        for hi in 0..h {
            let urow = &uv[(bi * h + hi) * n_in..(bi * h + hi + 1) * n_in];
            let krow = &kv[hi * n_k..(hi + 1) * n_k];
            let y = match mode {
                ConvMode::Circular => direct_conv(urow, krow, ConvMode::Circular).unwrap(),
                ConvMode::Causal => {
                    // Same padded-frame semantics as the fast path.
                    let mut up = urow.to_vec();
                    up.resize(frame, 0.0);
                    let mut kp = krow.to_vec();
                    kp.resize(frame, 0.0);
                    let full = direct_conv(&up, &kp, ConvMode::Circular).unwrap();
                    full[..n_in].to_vec()
                }
            };
            out.extend_from_slice(&y);
        }
    }
    out
}
