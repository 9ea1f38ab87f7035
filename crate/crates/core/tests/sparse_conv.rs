//! Frequency-sparse and partial convolutions: skip/mask equivalence, work
//! monotonicity of the tile counter, and the sliding-window property of
//! truncated causal filters.

mod common;

use common::*;
use fftconv_core::dft::ConvMode;
use fftconv_core::exec::{
    conv_forward, prepare_kernel, ConvOptions, KernelSpectrum, StatsCollector,
};
use fftconv_core::plan::{build_plan, MonarchPlan, Precision};
use fftconv_core::sparse::{
    apply_frequency_mask, conv_frequency_sparse, sparsity_fraction, truncate_kernel,
    FrequencySparsityPattern,
};
use fftconv_core::tensor::Tensor;
use rand::Rng;

fn pattern_dims(plan: &MonarchPlan) -> [usize; 4] {
    let p = plan.p;
    let mut dims = [1usize; 4];
    for (level, &f) in plan.factors.iter().enumerate() {
        dims[p - 1 - level] = f;
    }
    dims
}

struct SparseCase {
    plan: MonarchPlan,
    u: Tensor,
    kf_flat: KernelSpectrum,
}

fn sparse_case(n: usize, p: usize, seed: u64) -> SparseCase {
    let plan = build_plan(n, p, Precision::F64, false, false).unwrap();
    let mut r = rng(seed);
    let u = random_tensor(&[1, 1, n as u64], &mut r);
    let k = random_tensor(&[1, n as u64], &mut r);
    let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();
    let kf_flat = kf.to_flat(&plan).unwrap();
    SparseCase { plan, u, kf_flat }
}

fn run_pair(
    case: &SparseCase,
    pattern: &FrequencySparsityPattern,
    stats: Option<&StatsCollector>,
) -> (Vec<f64>, Vec<f64>) {
    let masked = apply_frequency_mask(&case.kf_flat, pattern).unwrap();
    let opts = ConvOptions {
        threads: 1,
        stats,
        ..ConvOptions::default()
    };
    let sparse = conv_frequency_sparse(&case.u, &masked, pattern, &case.plan, &opts).unwrap();
    let masked_plan = masked.to_plan_layout(&case.plan).unwrap();
    let dense = conv_forward(&case.u, &masked_plan, &case.plan, &ConvOptions::default()).unwrap();
    (tensor_as_f64(&sparse), tensor_as_f64(&dense))
}

#[test]
fn zero_sparsity_is_dense() {
    let case = sparse_case(1 << 12, 4, 101);
    let dims = pattern_dims(&case.plan);
    let pattern = FrequencySparsityPattern::dense(dims);
    let (sparse, dense) = run_pair(&case, &pattern, None);
    let err = rel_error(&sparse, &dense);
    assert!(err <= 1e-12, "err={err}");
}

#[test]
fn full_mask_gives_zero_output() {
    let case = sparse_case(1 << 12, 4, 103);
    let dims = pattern_dims(&case.plan);
    let pattern = FrequencySparsityPattern::new(dims, [0, 0, 0, 0]).unwrap();
    let masked = apply_frequency_mask(&case.kf_flat, &pattern).unwrap();
    assert!(masked.data.iter().all(|v| v.norm() == 0.0));
    let sparse =
        conv_frequency_sparse(&case.u, &masked, &pattern, &case.plan, &ConvOptions::default())
            .unwrap();
    assert!(tensor_as_f64(&sparse).iter().all(|&x| x == 0.0));
}

#[test]
fn half_mask_zeroes_exactly_half() {
    let case = sparse_case(1 << 12, 4, 107);
    let dims = pattern_dims(&case.plan);
    let mut keep = dims;
    keep[0] = dims[0] / 2;
    let pattern = FrequencySparsityPattern::new(dims, keep).unwrap();
    assert_eq!(sparsity_fraction(&pattern), 0.5);
    let masked = apply_frequency_mask(&case.kf_flat, &pattern).unwrap();
    let zeros = masked.data.iter().filter(|v| v.norm() == 0.0).count();
    assert_eq!(zeros, masked.data.len() / 2);
}

#[test]
fn skip_mask_equivalence_randomized() {
    for &(n, p) in &[(1usize << 12, 3usize), (1 << 12, 4), (1 << 14, 4)] {
        let case = sparse_case(n, p, 109 + n as u64 + p as u64);
        let dims = pattern_dims(&case.plan);
        let mut r = rng(n as u64 * 31 + p as u64);
        for trial in 0..20 {
            let mut keep = [0usize; 4];
            for i in 0..4 {
                keep[i] = if dims[i] == 1 {
                    1
                } else {
                    r.gen_range(1..=dims[i])
                };
            }
            let pattern = FrequencySparsityPattern::new(dims, keep).unwrap();
            let (sparse, dense) = run_pair(&case, &pattern, None);
            let err = rel_error(&sparse, &dense);
            assert!(
                err <= 1e-10,
                "n={n} p={p} trial={trial} keep={keep:?} err={err}"
            );
        }
    }
}

#[test]
fn tile_count_monotone_in_cutoffs() {
    let case = sparse_case(1 << 12, 4, 127);
    let dims = pattern_dims(&case.plan);
    // Walk each dimension down separately; executed tiles must never grow.
    for dim_idx in 0..4 {
        let mut prev = u64::MAX;
        let mut keep = dims;
        let mut cut = dims[dim_idx];
        loop {
            keep[dim_idx] = cut;
            let pattern = FrequencySparsityPattern::new(dims, keep).unwrap();
            let stats = StatsCollector::new();
            let _ = run_pair(&case, &pattern, Some(&stats));
            let tiles = stats.snapshot().tiles_total;
            assert!(
                tiles <= prev,
                "dim {dim_idx} cut {cut}: tiles {tiles} grew past {prev}"
            );
            prev = tiles;
            if cut == 0 {
                break;
            }
            cut /= 2;
        }
    }
}

#[test]
fn core_tile_reduction_at_75_percent() {
    // Halving the two innermost dimensions must cut the core matmul work by
    // well over the required margin once the factors span multiple tiles.
    let n = 1usize << 21;
    let plan = build_plan(n, 4, Precision::F64, false, false).unwrap();
    assert_eq!(plan.factors, vec![64, 32, 32, 32]);
    let dims = pattern_dims(&plan);
    assert_eq!(dims, [32, 32, 32, 64]);

    let mut r = rng(131);
    let u = random_tensor(&[1, 1, n as u64], &mut r);
    let k = random_tensor(&[1, n as u64], &mut r);
    let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();
    let kf_flat = kf.to_flat(&plan).unwrap();

    let dense_stats = StatsCollector::new();
    let dense_pattern = FrequencySparsityPattern::dense(dims);
    let opts = |stats| ConvOptions {
        threads: 0,
        stats: Some(stats),
        ..ConvOptions::default()
    };
    let dense_out = conv_frequency_sparse(&u, &kf_flat, &dense_pattern, &plan, &opts(&dense_stats))
        .unwrap();

    let pattern = FrequencySparsityPattern::new(dims, [16, 16, 32, 64]).unwrap();
    assert_eq!((sparsity_fraction(&pattern) * 100.0).round() as u32, 75);
    let masked = apply_frequency_mask(&kf_flat, &pattern).unwrap();
    let sparse_stats = StatsCollector::new();
    let sparse_out =
        conv_frequency_sparse(&u, &masked, &pattern, &plan, &opts(&sparse_stats)).unwrap();

    let dense_tiles = dense_stats.snapshot().tiles_core;
    let sparse_tiles = sparse_stats.snapshot().tiles_core;
    let reduction = 1.0 - sparse_tiles as f64 / dense_tiles as f64;
    assert!(
        reduction >= 0.45,
        "core tiles {sparse_tiles} vs {dense_tiles}: reduction {reduction:.3}"
    );

    // And the skipped execution still matches the dense masked result.
    let masked_plan = masked.to_plan_layout(&plan).unwrap();
    let dense_masked = conv_forward(&u, &masked_plan, &plan, &ConvOptions::default()).unwrap();
    let err = rel_error(&tensor_as_f64(&sparse_out), &tensor_as_f64(&dense_masked));
    assert!(err <= 1e-10, "err={err}");
    drop(dense_out);
}

#[test]
fn truncated_kernel_matches_direct_conv() {
    let n = 1024;
    let plan = build_plan(n, 3, Precision::F64, false, true).unwrap();
    let mut r = rng(137);
    let u = random_tensor(&[1, 2, (n / 2) as u64], &mut r);
    let k = random_tensor(&[2, (n / 2) as u64], &mut r);
    let k_trunc = truncate_kernel(&k, n / 8).unwrap();
    let kf = prepare_kernel(&k_trunc, &plan, ConvMode::Causal).unwrap();
    let y = conv_forward(&u, &kf, &plan, &ConvOptions::default()).unwrap();
    let oracle = direct_conv_grid(&u, &k_trunc, ConvMode::Causal, n);
    let err = rel_error(&tensor_as_f64(&y), &oracle);
    assert!(err <= 1e-8, "err={err}");
}

#[test]
fn truncated_kernel_window_property() {
    // With the filter truncated to n_k taps, output i depends only on
    // u[i-n_k+1 ..= i]: perturbing anything earlier leaves y[i] unchanged.
    let n = 512;
    let n_k = 32;
    let plan = build_plan(n, 2, Precision::F64, false, true).unwrap();
    let mut r = rng(139);
    let len = n / 2;
    let base = random_vec(len, &mut r);
    let k_full = random_tensor(&[1, len as u64], &mut r);
    let k_trunc = truncate_kernel(&k_full, n_k).unwrap();
    let kf = prepare_kernel(&k_trunc, &plan, ConvMode::Causal).unwrap();

    let run = |vals: Vec<f64>| -> Vec<f64> {
        let t = Tensor::from_f64(vec![1, 1, len as u64], vals).unwrap();
        tensor_as_f64(&conv_forward(&t, &kf, &plan, &ConvOptions::default()).unwrap())
    };
    let y_base = run(base.clone());

    let probe = 200;
    let mut perturbed = base.clone();
    for v in perturbed[..probe - n_k].iter_mut() {
        *v += 10.0;
    }
    let y_pert = run(perturbed);
    for i in probe..len {
        let delta = (y_base[i] - y_pert[i]).abs();
        assert!(
            delta <= 1e-9,
            "position {i} saw influence {delta} from outside its window"
        );
    }
    // Sanity: early outputs did change.
    assert!((y_base[0] - y_pert[0]).abs() > 1e-6);
}

#[test]
fn pattern_plan_mismatches_rejected() {
    let case = sparse_case(1 << 12, 4, 149);
    let bad_dims = FrequencySparsityPattern::dense([16, 16, 16, 16]);
    assert!(
        conv_frequency_sparse(&case.u, &case.kf_flat, &bad_dims, &case.plan, &ConvOptions::default())
            .is_err()
    );

    let real_plan = build_plan(1 << 12, 4, Precision::F64, true, false).unwrap();
    let dims = pattern_dims(&real_plan);
    let pattern = FrequencySparsityPattern::dense(dims);
    assert!(
        conv_frequency_sparse(&case.u, &case.kf_flat, &pattern, &real_plan, &ConvOptions::default())
            .is_err()
    );
}
