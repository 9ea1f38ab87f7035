//! Convolution execution against the direct-summation oracle, plus the
//! structural guarantees: causal-skip transparency, real-packing
//! transparency, fused gating, determinism, and instrumentation counts.

mod common;

use common::*;
use fftconv_core::dft::ConvMode;
use fftconv_core::exec::{
    conv_forward, conv_gated, prepare_kernel, ConvOptions, StatsCollector,
};
use fftconv_core::plan::{build_plan, Precision};
use fftconv_core::tensor::Tensor;

fn admissible(n: usize, p: usize) -> bool {
    n >= (1 << p)
}

fn run_config(
    n: usize,
    p: usize,
    mode: ConvMode,
    real_input: bool,
    precision: Precision,
    b: usize,
    h: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let causal = mode == ConvMode::Causal;
    let plan = build_plan(n, p, precision, real_input, causal).unwrap();
    let mut r = rng(seed);
    let n_in = if causal { n / 2 } else { n };
    let n_k = if causal { n / 2 } else { n };
    let u = random_tensor(&[b as u64, h as u64, n_in as u64], &mut r);
    let k = random_tensor(&[h as u64, n_k as u64], &mut r);
    let kf = prepare_kernel(&k, &plan, mode).unwrap();
    let y = conv_forward(&u, &kf, &plan, &ConvOptions::default()).unwrap();
    let oracle = direct_conv_grid(&u, &k, mode, n);
    (tensor_as_f64(&y), oracle)
}

#[test]
fn delta_kernel_is_identity() {
    for &(n, p) in &[(16usize, 2usize), (64, 3), (256, 4), (512, 2)] {
        let plan = build_plan(n, p, Precision::F64, false, false).unwrap();
        let mut r = rng(5);
        let u = random_tensor(&[2, 3, n as u64], &mut r);
        let mut kdata = vec![0.0; 3 * n];
        for hi in 0..3 {
            kdata[hi * n] = 1.0;
        }
        let k = Tensor::from_f64(vec![3, n as u64], kdata).unwrap();
        let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();
        let y = conv_forward(&u, &kf, &plan, &ConvOptions::default()).unwrap();
        let err = rel_error(&tensor_as_f64(&y), &tensor_as_f64(&u));
        assert!(err < 1e-10, "n={n} p={p} err={err}");
    }
}

#[test]
fn circular_matches_direct_conv() {
    for &p in &[2usize, 3] {
        let (y, oracle) = run_config(512, p, ConvMode::Circular, false, Precision::F64, 2, 2, 11);
        let err = rel_error(&y, &oracle);
        assert!(err <= 1e-8, "p={p} err={err}");
    }
}

#[test]
fn causal_shortcut_matches_direct_conv() {
    let (y, oracle) = run_config(4096, 3, ConvMode::Causal, false, Precision::F64, 1, 2, 13);
    let err = rel_error(&y, &oracle);
    assert!(err <= 1e-8, "err={err}");
}

#[test]
fn oracle_equivalence_sweep_small() {
    for &n in &[16usize, 64, 256, 1024] {
        for p in 2..=4usize {
            if !admissible(n, p) {
                continue;
            }
            for &mode in &[ConvMode::Circular, ConvMode::Causal] {
                for &real in &[false, true] {
                    if real && !admissible(n / 2, p) {
                        continue;
                    }
                    let (y, oracle) =
                        run_config(n, p, mode, real, Precision::F64, 2, 2, n as u64 + p as u64);
                    let err = rel_error(&y, &oracle);
                    assert!(err <= 1e-8, "n={n} p={p} mode={mode:?} real={real} err={err}");
                }
            }
        }
    }
}

#[test]
fn f32_path_within_budget() {
    for &(n, p) in &[(256usize, 2usize), (1024, 3)] {
        for &real in &[false, true] {
            let plan = build_plan(n, p, Precision::F32, real, false).unwrap();
            let mut r = rng(n as u64);
            let u = random_tensor_f32(&[1, 2, n as u64], &mut r);
            let k = random_tensor_f32(&[2, n as u64], &mut r);
            let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();
            let y = conv_forward(&u, &kf, &plan, &ConvOptions::default()).unwrap();
            let oracle = direct_conv_grid(&u, &k, ConvMode::Circular, n);
            let err = rel_error(&tensor_as_f64(&y), &oracle);
            assert!(err <= 3e-3, "n={n} p={p} real={real} err={err}");
        }
    }
}

#[test]
fn f32_error_budget_scales_with_sqrt_np() {
    // The 3e-3 budget at the top of the sweep corresponds to a per-config
    // allowance of C * sqrt(N * p); the same constant must already hold at
    // N = 16, so error growth stays square-root-like.
    let c0 = 3e-3 / (262144.0f64 * 4.0).sqrt();
    for &n in &[16usize, 256, 4096, 32768] {
        for p in 2..=4usize {
            if n < (1 << p) {
                continue;
            }
            let plan = build_plan(n, p, Precision::F32, false, false).unwrap();
            let mut r = rng(0xF32 + (n * p) as u64);
            let u = random_tensor_f32(&[1, 1, n as u64], &mut r);
            let k = random_tensor_f32(&[1, n as u64], &mut r);
            let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();
            let y = conv_forward(&u, &kf, &plan, &ConvOptions::default()).unwrap();
            let oracle = direct_conv_grid(&u, &k, ConvMode::Circular, n);
            let err = rel_error(&tensor_as_f64(&y), &oracle);
            let budget = c0 * ((n * p) as f64).sqrt();
            assert!(err <= budget, "n={n} p={p}: err {err:.3e} > budget {budget:.3e}");
        }
    }
}

#[test]
fn explicit_factor_plan_matches_oracle() {
    use fftconv_core::plan::build_plan_with_factors;
    let n = 2048usize;
    let plan = build_plan_with_factors(n, &[8, 64, 4], Precision::F64, false, false).unwrap();
    let mut r = rng(77);
    let u = random_tensor(&[1, 2, n as u64], &mut r);
    let k = random_tensor(&[2, n as u64], &mut r);
    let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();
    let y = conv_forward(&u, &kf, &plan, &ConvOptions::default()).unwrap();
    let oracle = direct_conv_grid(&u, &k, ConvMode::Circular, n);
    let err = rel_error(&tensor_as_f64(&y), &oracle);
    assert!(err <= 1e-8, "err={err}");
}

#[test]
fn causal_skip_is_transparent() {
    // The same padded input through a non-causal plan must agree with the
    // causal-shortcut plan to near machine precision: skipping only drops
    // terms that are exactly zero.
    let n = 1024;
    let p = 3;
    let mut r = rng(17);
    let u_half = random_vec(n / 2, &mut r);
    let k_half = random_vec(n / 2, &mut r);

    let causal_plan = build_plan(n, p, Precision::F64, false, true).unwrap();
    let u = Tensor::from_f64(vec![1, 1, (n / 2) as u64], u_half.clone()).unwrap();
    let k = Tensor::from_f64(vec![1, (n / 2) as u64], k_half.clone()).unwrap();
    let kf = prepare_kernel(&k, &causal_plan, ConvMode::Causal).unwrap();
    let y_causal = conv_forward(&u, &kf, &causal_plan, &ConvOptions::default()).unwrap();

    let full_plan = build_plan(n, p, Precision::F64, false, false).unwrap();
    let mut up = u_half.clone();
    up.resize(n, 0.0);
    let mut kp = k_half;
    kp.resize(n, 0.0);
    let u_full = Tensor::from_f64(vec![1, 1, n as u64], up).unwrap();
    let k_full = Tensor::from_f64(vec![1, n as u64], kp).unwrap();
    let kf_full = prepare_kernel(&k_full, &full_plan, ConvMode::Circular).unwrap();
    let y_full = conv_forward(&u_full, &kf_full, &full_plan, &ConvOptions::default()).unwrap();

    let a = tensor_as_f64(&y_causal);
    let b = tensor_as_f64(&y_full);
    let err = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-12, "causal transparency err={err}");
}

#[test]
fn real_packing_is_transparent() {
    for &(n, p, mode) in &[
        (512usize, 2usize, ConvMode::Circular),
        (1024, 3, ConvMode::Causal),
    ] {
        let causal = mode == ConvMode::Causal;
        let mut r = rng(23 + n as u64);
        let n_in = if causal { n / 2 } else { n };
        let u = random_tensor(&[1, 2, n_in as u64], &mut r);
        let k = random_tensor(&[2, n_in as u64], &mut r);

        let plain = build_plan(n, p, Precision::F64, false, causal).unwrap();
        let packed = build_plan(n, p, Precision::F64, true, causal).unwrap();
        let kf_plain = prepare_kernel(&k, &plain, mode).unwrap();
        let kf_packed = prepare_kernel(&k, &packed, mode).unwrap();
        let y_plain = conv_forward(&u, &kf_plain, &plain, &ConvOptions::default()).unwrap();
        let y_packed = conv_forward(&u, &kf_packed, &packed, &ConvOptions::default()).unwrap();
        let err = y_plain
            .as_f64()
            .unwrap()
            .iter()
            .zip(y_packed.as_f64().unwrap().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "n={n} p={p} mode={mode:?} err={err}");
    }
}

#[test]
fn real_packing_runs_half_length_transforms() {
    let n = 1024;
    let plan = build_plan(n, 2, Precision::F64, true, false).unwrap();
    let mut r = rng(31);
    let u = random_tensor(&[2, 3, n as u64], &mut r);
    let k = random_tensor(&[3, n as u64], &mut r);
    let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();
    let stats = StatsCollector::new();
    let opts = ConvOptions {
        stats: Some(&stats),
        ..ConvOptions::default()
    };
    let _ = conv_forward(&u, &kf, &plan, &opts).unwrap();
    let snap = stats.snapshot();
    // Exactly one forward and one inverse complex transform of length n/2
    // per sequence, and none of length n.
    assert_eq!(snap.forward_count(n / 2), 6);
    assert_eq!(snap.inverse_count(n / 2), 6);
    assert_eq!(snap.forward_count(n), 0);
    assert_eq!(snap.inverse_count(n), 0);
}

#[test]
fn gating_matches_composed_oracle() {
    let n = 1024;
    let plan = build_plan(n, 3, Precision::F64, false, false).unwrap();
    let mut r = rng(37);
    let u = random_tensor(&[2, 2, n as u64], &mut r);
    let v = random_tensor(&[2, 2, n as u64], &mut r);
    let w = random_tensor(&[2, 2, n as u64], &mut r);
    let k = random_tensor(&[2, n as u64], &mut r);
    let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();
    let y = conv_gated(&u, &v, &w, &kf, &plan, &ConvOptions::default()).unwrap();

    // Composed oracle: v .* direct_conv(u .* w, k).
    let (uv, vv, wv) = (tensor_as_f64(&u), tensor_as_f64(&v), tensor_as_f64(&w));
    let gated_in: Vec<f64> = uv.iter().zip(wv.iter()).map(|(a, b)| a * b).collect();
    let gin = Tensor::from_f64(vec![2, 2, n as u64], gated_in).unwrap();
    let mut oracle = direct_conv_grid(&gin, &k, ConvMode::Circular, n);
    for (o, g) in oracle.iter_mut().zip(vv.iter()) {
        *o *= g;
    }
    let err = rel_error(&tensor_as_f64(&y), &oracle);
    assert!(err <= 1e-8, "err={err}");
}

#[test]
fn gating_trivial_cases() {
    let n = 256;
    let plan = build_plan(n, 2, Precision::F64, false, false).unwrap();
    let mut r = rng(41);
    let u = random_tensor(&[1, 2, n as u64], &mut r);
    let k = random_tensor(&[2, n as u64], &mut r);
    let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();
    let ones = Tensor::from_f64(vec![1, 2, n as u64], vec![1.0; 2 * n]).unwrap();
    let zeros = Tensor::from_f64(vec![1, 2, n as u64], vec![0.0; 2 * n]).unwrap();

    let plain = conv_forward(&u, &kf, &plan, &ConvOptions::default()).unwrap();
    let gated = conv_gated(&u, &ones, &ones, &kf, &plan, &ConvOptions::default()).unwrap();
    assert_eq!(tensor_as_f64(&plain), tensor_as_f64(&gated));

    let gated_zero = conv_gated(&u, &zeros, &ones, &kf, &plan, &ConvOptions::default()).unwrap();
    assert!(tensor_as_f64(&gated_zero).iter().all(|&x| x == 0.0));
}

#[test]
fn gating_allocates_no_extra_workspace() {
    let n = 512;
    let plan = build_plan(n, 2, Precision::F64, false, false).unwrap();
    let mut r = rng(43);
    let b = 4u64;
    let h = 4u64;
    let u = random_tensor(&[b, h, n as u64], &mut r);
    let v = random_tensor(&[b, h, n as u64], &mut r);
    let w = random_tensor(&[b, h, n as u64], &mut r);
    let k = random_tensor(&[h, n as u64], &mut r);
    let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();

    let plain_stats = StatsCollector::new();
    let _ = conv_forward(
        &u,
        &kf,
        &plan,
        &ConvOptions {
            threads: 1,
            stats: Some(&plain_stats),
            ..ConvOptions::default()
        },
    )
    .unwrap();
    let gated_stats = StatsCollector::new();
    let _ = conv_gated(
        &u,
        &v,
        &w,
        &kf,
        &plan,
        &ConvOptions {
            threads: 1,
            stats: Some(&gated_stats),
            ..ConvOptions::default()
        },
    )
    .unwrap();
    let ps = plain_stats.snapshot();
    let gs = gated_stats.snapshot();
    // Gating is fused into load/store: identical workspace, no gated input
    // copy, no pre-gate output buffer.
    assert_eq!(ps.peak_task_workspace, gs.peak_task_workspace);
    assert_eq!(ps.workspace_total, gs.workspace_total);
    let full_tensor_bytes = (b * h * n as u64) * 8;
    assert!(gs.peak_task_workspace < full_tensor_bytes);
}

#[test]
fn linear_in_input() {
    let n = 256;
    let plan = build_plan(n, 2, Precision::F64, false, false).unwrap();
    let mut r = rng(47);
    let x = random_vec(n, &mut r);
    let y = random_vec(n, &mut r);
    let k = random_tensor(&[1, n as u64], &mut r);
    let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();
    let opts = ConvOptions::default();

    let run = |data: Vec<f64>| -> Vec<f64> {
        let t = Tensor::from_f64(vec![1, 1, n as u64], data).unwrap();
        tensor_as_f64(&conv_forward(&t, &kf, &plan, &opts).unwrap())
    };
    let (alpha, beta) = (0.7, -1.3);
    let mixed: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| alpha * a + beta * b).collect();
    let lhs = run(mixed);
    let fx = run(x);
    let fy = run(y);
    let rhs: Vec<f64> = fx.iter().zip(fy.iter()).map(|(a, b)| alpha * a + beta * b).collect();
    let err = rel_error(&lhs, &rhs);
    assert!(err <= 1e-10, "linearity err={err}");
}

#[test]
fn deterministic_across_threads_and_calls() {
    let n = 512;
    let plan = build_plan(n, 3, Precision::F64, false, false).unwrap();
    let mut r = rng(53);
    let u = random_tensor(&[3, 5, n as u64], &mut r);
    let k = random_tensor(&[5, n as u64], &mut r);
    let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();

    let run = |threads: usize| -> Vec<u64> {
        let opts = ConvOptions {
            threads,
            ..ConvOptions::default()
        };
        tensor_as_f64(&conv_forward(&u, &kf, &plan, &opts).unwrap())
            .iter()
            .map(|x| x.to_bits())
            .collect()
    };
    let single = run(1);
    assert_eq!(single, run(1), "repeat calls must be bit-identical");
    for threads in [2, 3, 8] {
        assert_eq!(single, run(threads), "threads={threads}");
    }
}

#[test]
fn shape_and_mode_errors() {
    let plan = build_plan(256, 2, Precision::F64, false, true).unwrap();
    let mut r = rng(59);
    let k_long = random_tensor(&[1, 200], &mut r);
    let err = prepare_kernel(&k_long, &plan, ConvMode::Causal).unwrap_err();
    assert!(err.to_string().contains("kernel exceeds causal budget"), "{err}");

    let k = random_tensor(&[1, 128], &mut r);
    let kf = prepare_kernel(&k, &plan, ConvMode::Causal).unwrap();
    let u_bad = random_tensor(&[1, 1, 256], &mut r);
    assert!(conv_forward(&u_bad, &kf, &plan, &ConvOptions::default()).is_err());

    let circ_plan = build_plan(256, 2, Precision::F64, false, false).unwrap();
    assert!(prepare_kernel(&k, &circ_plan, ConvMode::Causal).is_err());

    let other = build_plan(512, 2, Precision::F64, false, false).unwrap();
    let u_other = random_tensor(&[1, 1, 512], &mut r);
    assert!(conv_forward(&u_other, &kf, &other, &ConvOptions::default()).is_err());
}

#[test]
fn kernel_spectrum_undoes_to_naive_dft() {
    use fftconv_core::dft::naive_dft;
    use num_complex::Complex64;
    let n = 1024;
    let plan = build_plan(n, 3, Precision::F64, false, false).unwrap();
    let mut r = rng(61);
    let k = random_tensor(&[2, n as u64], &mut r);
    let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();
    let flat = kf.to_flat(&plan).unwrap();
    let kv = tensor_as_f64(&k);
    for hi in 0..2 {
        let row: Vec<Complex64> = kv[hi * n..(hi + 1) * n]
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        let oracle = naive_dft(&row).unwrap();
        let err = flat
            .channel(hi)
            .iter()
            .zip(oracle.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "channel {hi} err={err}");
    }
}

#[test]
fn delta_kernel_spectrum_is_all_ones() {
    let n = 64;
    let plan = build_plan(n, 2, Precision::F64, false, false).unwrap();
    let mut kdata = vec![0.0; n];
    kdata[0] = 1.0;
    let k = Tensor::from_f64(vec![1, n as u64], kdata).unwrap();
    let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();
    for v in kf.channel(0) {
        assert!((v - num_complex::Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }
    let zeros = Tensor::from_f64(vec![1, n as u64], vec![0.0; n]).unwrap();
    let kf0 = prepare_kernel(&zeros, &plan, ConvMode::Circular).unwrap();
    assert!(kf0.channel(0).iter().all(|v| v.norm() == 0.0));
}
