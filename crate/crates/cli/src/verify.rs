//! Property suites over the library's oracle layer. Every suite is driven by
//! the seed printed in the report, so any failure is reproducible from the
//! command line it prints.

use anyhow::{bail, Result};
use num_complex::Complex64;
use rand::Rng;

use fftconv_core::dft::{
    direct_conv, naive_dft, naive_idft, rfft_via_half, ConvMode,
};
use fftconv_core::exec::{
    conv_backward, conv_forward, monarch_fft, monarch_ifft, prepare_kernel, ConvOptions,
    StatsCollector,
};
use fftconv_core::plan::{build_plan, cost, select_order, CostModelParams, Precision};
use fftconv_core::sparse::{
    apply_frequency_mask, conv_frequency_sparse, sparsity_fraction, FrequencySparsityPattern,
};
use fftconv_core::tensor::{read_tensor, write_tensor, Tensor};

use crate::util::{random_tensor_f64, rel_error, seeded_rng};

pub struct PropertyReport {
    pub name: String,
    pub instances: usize,
    pub worst_error: f64,
    pub tolerance: f64,
    pub failure: Option<String>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.worst_error <= self.tolerance
    }
}

struct Prop {
    name: String,
    instances: usize,
    worst: f64,
    tol: f64,
    failure: Option<String>,
}

impl Prop {
    fn new(name: &str, tol: f64) -> Self {
        Prop {
            name: name.to_string(),
            instances: 0,
            worst: 0.0,
            tol,
            failure: None,
        }
    }

    fn record(&mut self, err: f64, context: impl Fn() -> String) {
        self.instances += 1;
        if err > self.worst {
            self.worst = err;
        }
        if err > self.tol && self.failure.is_none() {
            self.failure = Some(context());
        }
    }

    fn fail(&mut self, context: String) {
        self.instances += 1;
        if self.failure.is_none() {
            self.failure = Some(context);
        }
    }

    fn finish(self) -> PropertyReport {
        PropertyReport {
            name: self.name,
            instances: self.instances,
            worst_error: self.worst,
            tolerance: self.tol,
            failure: self.failure,
        }
    }
}

fn random_complex(n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

pub fn suite_fft(seed: u64) -> Vec<PropertyReport> {
    let mut out = Vec::new();
    let mut rng = seeded_rng(seed);

    let mut parseval = Prop::new("fft/parseval", 1e-10);
    for &n in &[2usize, 8, 64, 177, 512] {
        let x = random_complex(n, &mut rng);
        let spec = naive_dft(&x).unwrap();
        let t: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let f: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
        let err = (f - n as f64 * t).abs() / (n as f64 * t);
        parseval.record(err, || format!("n={n} seed={seed}"));
    }
    out.push(parseval.finish());

    let mut roundtrip = Prop::new("fft/naive-roundtrip", 1e-11);
    for &n in &[4usize, 33, 128] {
        let x = random_complex(n, &mut rng);
        let back = naive_idft(&naive_dft(&x).unwrap()).unwrap();
        let err = x
            .iter()
            .zip(back.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        roundtrip.record(err, || format!("n={n} seed={seed}"));
    }
    out.push(roundtrip.finish());

    let mut rfft = Prop::new("fft/real-packing-vs-naive", 1e-10);
    for half in 1..=512usize {
        let n = 2 * half;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spec = rfft_via_half(&x, |z| naive_dft(z).unwrap()).unwrap();
        let full: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        let oracle = naive_dft(&full).unwrap();
        let err = (0..=half)
            .map(|k| (spec.entries[k] - oracle[k]).norm())
            .fold(0.0, f64::max);
        rfft.record(err, || format!("n={n} seed={seed}"));
    }
    out.push(rfft.finish());

    let mut layout = Prop::new("fft/monarch-matches-naive", 1e-9);
    for &(n, p) in &[(64usize, 2usize), (64, 3), (256, 2), (256, 4), (1024, 3), (4096, 3)] {
        let plan = build_plan(n, p, Precision::F64, false, false).unwrap();
        for _ in 0..4 {
            let x = random_complex(n, &mut rng);
            let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let flat = monarch_fft(&x, &plan).unwrap().to_flat(&plan).unwrap();
            let oracle = naive_dft(&x).unwrap();
            let err = flat
                .iter()
                .zip(oracle.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
                / norm.max(1e-300);
            layout.record(err, || format!("n={n} p={p} seed={seed}"));
        }
    }
    out.push(layout.finish());

    let mut inverse = Prop::new("fft/monarch-roundtrip", 1e-9);
    for &(n, p) in &[(256usize, 2usize), (4096, 3), (65536, 3)] {
        let plan = build_plan(n, p, Precision::F64, false, false).unwrap();
        let x = random_complex(n, &mut rng);
        let back = monarch_ifft(&monarch_fft(&x, &plan).unwrap(), &plan).unwrap();
        let err = x
            .iter()
            .zip(back.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        inverse.record(err, || format!("n={n} p={p} seed={seed}"));
    }
    out.push(inverse.finish());

    out
}

pub fn suite_conv(seed: u64, lengths: &[usize]) -> Vec<PropertyReport> {
    let mut out = Vec::new();
    let mut rng = seeded_rng(seed);
    let mut prop = Prop::new("conv/matches-direct", 1e-8);
    for &n in lengths {
        for p in 2..=4usize {
            if n < (1 << p) {
                continue;
            }
            for &mode in &[ConvMode::Circular, ConvMode::Causal] {
                for &real in &[false, true] {
                    let causal = mode == ConvMode::Causal;
                    if real && (n / 2) < (1 << p) {
                        continue;
                    }
                    let plan = match build_plan(n, p, Precision::F64, real, causal) {
                        Ok(p) => p,
                        Err(_) => continue,
                    };
                    let n_in = if causal { n / 2 } else { n };
                    let u = random_tensor_f64(&[1, 2, n_in as u64], &mut rng);
                    let k = random_tensor_f64(&[2, n_in as u64], &mut rng);
                    let kf = prepare_kernel(&k, &plan, mode).unwrap();
                    let y = conv_forward(&u, &kf, &plan, &ConvOptions::default()).unwrap();
                    let oracle = direct_grid(&u, &k, mode, n);
                    let err = rel_error(&y.to_f64_vec().unwrap(), &oracle);
                    prop.record(err, || {
                        format!("n={n} p={p} mode={mode:?} real={real} seed={seed}")
                    });
                }
            }
        }
    }
    out.push(prop.finish());
    out
}

fn direct_grid(u: &Tensor, k: &Tensor, mode: ConvMode, frame: usize) -> Vec<f64> {
    let dims = u.dims();
    let (b, h, n_in) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
    let n_k = k.dims()[1] as usize;
    let uv = u.to_f64_vec().unwrap();
    let kv = k.to_f64_vec().unwrap();
    let mut out = Vec::with_capacity(b * h * n_in);
    for bi in 0..b {
        for hi in 0..h {
            let urow = &uv[(bi * h + hi) * n_in..(bi * h + hi + 1) * n_in];
            let krow = &kv[hi * n_k..(hi + 1) * n_k];
            match mode {
                ConvMode::Circular => {
                    out.extend(direct_conv(urow, krow, ConvMode::Circular).unwrap())
                }
                ConvMode::Causal => {
                    let mut up = urow.to_vec();
                    up.resize(frame, 0.0);
                    let mut kp = krow.to_vec();
                    kp.resize(frame, 0.0);
                    let full = direct_conv(&up, &kp, ConvMode::Circular).unwrap();
                    out.extend_from_slice(&full[..n_in]);
                }
            }
        }
    }
    out
}

pub fn suite_sparse(seed: u64) -> Vec<PropertyReport> {
    let mut out = Vec::new();
    let mut rng = seeded_rng(seed);

    let mut fractions = Prop::new("sparse/table-fractions", 0.0);
    let cases: [([usize; 4], u32); 6] = [
        ([32, 32, 32, 64], 0),
        ([16, 32, 32, 64], 50),
        ([16, 16, 32, 64], 75),
        ([16, 16, 28, 60], 79),
        ([16, 16, 24, 56], 84),
        ([16, 16, 16, 48], 91),
    ];
    for (keep, pct) in cases {
        let p = FrequencySparsityPattern::new([32, 32, 32, 64], keep).unwrap();
        let got = (sparsity_fraction(&p) * 100.0).round() as u32;
        if got != pct {
            fractions.fail(format!("keep={keep:?} -> {got}% want {pct}%"));
        } else {
            fractions.record(0.0, String::new);
        }
    }
    out.push(fractions.finish());

    let mut equiv = Prop::new("sparse/skip-equals-mask", 1e-10);
    let mut monotone = Prop::new("sparse/tiles-monotone", 0.0);
    let n = 1usize << 12;
    let plan = build_plan(n, 4, Precision::F64, false, false).unwrap();
    let mut dims = [1usize; 4];
    for (level, &f) in plan.factors.iter().enumerate() {
        dims[plan.p - 1 - level] = f;
    }
    let u = random_tensor_f64(&[1, 1, n as u64], &mut rng);
    let k = random_tensor_f64(&[1, n as u64], &mut rng);
    let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();
    let kf_flat = kf.to_flat(&plan).unwrap();
    for _ in 0..40 {
        let keep = [
            rng.gen_range(1..=dims[0]),
            rng.gen_range(1..=dims[1]),
            rng.gen_range(1..=dims[2]),
            rng.gen_range(1..=dims[3]),
        ];
        let pattern = FrequencySparsityPattern::new(dims, keep).unwrap();
        let masked = apply_frequency_mask(&kf_flat, &pattern).unwrap();
        let stats = StatsCollector::new();
        let opts = ConvOptions {
            threads: 1,
            stats: Some(&stats),
            ..ConvOptions::default()
        };
        let sparse = conv_frequency_sparse(&u, &masked, &pattern, &plan, &opts).unwrap();
        let masked_plan = masked.to_plan_layout(&plan).unwrap();
        let dense = conv_forward(&u, &masked_plan, &plan, &ConvOptions::default()).unwrap();
        let err = rel_error(&sparse.to_f64_vec().unwrap(), &dense.to_f64_vec().unwrap());
        equiv.record(err, || format!("keep={keep:?} seed={seed}"));

        // Tightening any one dimension must not add work.
        let tiles_before = stats.snapshot().tiles_total;
        let mut tighter = keep;
        let dim = rng.gen_range(0..4);
        tighter[dim] = tighter[dim].saturating_sub(1).max(1);
        let pattern2 = FrequencySparsityPattern::new(dims, tighter).unwrap();
        let masked2 = apply_frequency_mask(&kf_flat, &pattern2).unwrap();
        let stats2 = StatsCollector::new();
        let opts2 = ConvOptions {
            threads: 1,
            stats: Some(&stats2),
            ..ConvOptions::default()
        };
        let _ = conv_frequency_sparse(&u, &masked2, &pattern2, &plan, &opts2).unwrap();
        let tiles_after = stats2.snapshot().tiles_total;
        if tiles_after > tiles_before {
            monotone.fail(format!(
                "keep {keep:?} -> {tighter:?}: tiles {tiles_before} -> {tiles_after} seed={seed}"
            ));
        } else {
            monotone.record(0.0, String::new);
        }
    }
    out.push(equiv.finish());
    out.push(monotone.finish());
    out
}

pub fn suite_grad(seed: u64) -> Vec<PropertyReport> {
    let mut out = Vec::new();
    let mut rng = seeded_rng(seed);
    let mut prop = Prop::new("grad/finite-differences", 1e-4);
    for &(n, p) in &[(64usize, 2usize), (64, 3), (256, 2), (256, 3)] {
        let plan = build_plan(n, p, Precision::F64, false, false).unwrap();
        let (b, h) = (2usize, 3usize);
        let u = random_tensor_f64(&[b as u64, h as u64, n as u64], &mut rng);
        let k = random_tensor_f64(&[h as u64, n as u64], &mut rng);
        let kf = prepare_kernel(&k, &plan, ConvMode::Circular).unwrap();
        let y = conv_forward(&u, &kf, &plan, &ConvOptions::default()).unwrap();
        let dy_vals: Vec<f64> = y.to_f64_vec().unwrap().iter().map(|v| 2.0 * v).collect();
        let dy = Tensor::from_f64(y.dims().to_vec(), dy_vals).unwrap();
        let (du, dk) = conv_backward(&dy, &u, &kf, &plan, &ConvOptions::default()).unwrap();

        let loss = |uu: &Tensor, kk: &Tensor| -> f64 {
            let kfx = prepare_kernel(kk, &plan, ConvMode::Circular).unwrap();
            conv_forward(uu, &kfx, &plan, &ConvOptions::default())
                .unwrap()
                .to_f64_vec()
                .unwrap()
                .iter()
                .map(|v| v * v)
                .sum()
        };
        let step = 1e-5;
        let uv = u.to_f64_vec().unwrap();
        let du_v = du.to_f64_vec().unwrap();
        let du_norm = du_v.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-12);
        // Spot-check a deterministic sample of coordinates; full sweeps live
        // in the library's test suite.
        let mut err = 0.0f64;
        for idx in (0..uv.len()).step_by(uv.len() / 24 + 1) {
            let mut plus = uv.clone();
            plus[idx] += step;
            let mut minus = uv.clone();
            minus[idx] -= step;
            let fd = (loss(&Tensor::from_f64(u.dims().to_vec(), plus).unwrap(), &k)
                - loss(&Tensor::from_f64(u.dims().to_vec(), minus).unwrap(), &k))
                / (2.0 * step);
            err = err.max((fd - du_v[idx]).abs() / du_norm);
        }
        let kv = k.to_f64_vec().unwrap();
        let dk_v = dk.to_f64_vec().unwrap();
        let dk_norm = dk_v.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-12);
        for idx in (0..kv.len()).step_by(kv.len() / 24 + 1) {
            let mut plus = kv.clone();
            plus[idx] += step;
            let mut minus = kv.clone();
            minus[idx] -= step;
            let fd = (loss(&u, &Tensor::from_f64(k.dims().to_vec(), plus).unwrap())
                - loss(&u, &Tensor::from_f64(k.dims().to_vec(), minus).unwrap()))
                / (2.0 * step);
            let hi = idx / n;
            let ti = idx % n;
            err = err.max((fd - dk_v[hi * n + ti]).abs() / dk_norm);
        }
        prop.record(err, || format!("n={n} p={p} seed={seed}"));
    }
    out.push(prop.finish());
    out
}

pub fn suite_tensor(seed: u64) -> Vec<PropertyReport> {
    let mut out = Vec::new();
    let mut rng = seeded_rng(seed);
    let mut prop = Prop::new("tensor/roundtrip-bit-exact", 0.0);
    let dir = std::env::temp_dir();
    for trial in 0..8 {
        let dims: Vec<u64> = (0..rng.gen_range(1..=4))
            .map(|_| rng.gen_range(1..5u64))
            .collect();
        let t = random_tensor_f64(&dims, &mut rng);
        let path = dir.join(format!("fftconv-verify-{seed}-{trial}.t"));
        write_tensor(&path, &t).unwrap();
        let back = read_tensor(&path).unwrap();
        let _ = std::fs::remove_file(&path);
        if back != t {
            prop.fail(format!("dims={dims:?} seed={seed}"));
        } else {
            prop.record(0.0, String::new);
        }
    }
    out.push(prop.finish());
    out
}

pub fn suite_cost(_seed: u64) -> Vec<PropertyReport> {
    let mut out = Vec::new();
    let params = CostModelParams::a100();
    let mut prop = Prop::new("cost/crossovers", 0.0);
    let want: [(usize, usize); 9] = [
        (256, 2),
        (1024, 2),
        (4096, 3),
        (8192, 3),
        (16384, 3),
        (32768, 3),
        (1 << 20, 4),
        (1 << 21, 4),
        (1 << 22, 4),
    ];
    for (n, p) in want {
        let got = select_order(n, 1, 1, &params).unwrap();
        if got != p {
            prop.fail(format!("n={n}: selected {got}, want {p}"));
        } else {
            prop.record(0.0, String::new);
        }
    }
    out.push(prop.finish());

    let mut bump = Prop::new("cost/sram-bump", 1e-9);
    let lo = cost(1 << 15, 3, 1, 1, &params).unwrap();
    let hi = cost(1 << 16, 3, 1, 1, &params).unwrap();
    let ratio = hi.per_stage[0].io_seconds / (2.0 * lo.per_stage[0].io_seconds);
    bump.record(
        (ratio - params.sigma_s / params.sigma_h).abs(),
        || "stage-1 bandwidth ratio".to_string(),
    );
    out.push(bump.finish());
    out
}

pub const SUITES: [&str; 7] = ["fft", "conv", "sparse", "grad", "tensor", "cost", "all"];

pub fn run(suite: &str, seed: u64, lengths: Option<Vec<usize>>) -> Result<()> {
    let default_lengths = vec![256usize, 512, 1024, 2048, 4096];
    let lengths = lengths.unwrap_or(default_lengths);
    let mut reports = Vec::new();
    if !SUITES.contains(&suite) {
        bail!("unknown suite `{suite}` (expected one of {SUITES:?})");
    }
    if suite == "fft" || suite == "all" {
        reports.extend(suite_fft(seed));
    }
    if suite == "conv" || suite == "all" {
        reports.extend(suite_conv(seed, &lengths));
    }
    if suite == "sparse" || suite == "all" {
        reports.extend(suite_sparse(seed));
    }
    if suite == "grad" || suite == "all" {
        reports.extend(suite_grad(seed));
    }
    if suite == "tensor" || suite == "all" {
        reports.extend(suite_tensor(seed));
    }
    if suite == "cost" || suite == "all" {
        reports.extend(suite_cost(seed));
    }

    println!("# verify suite={suite} seed={seed}");
    let mut failed = 0;
    for r in &reports {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status} {name} instances={inst} worst={worst:.3e} tol={tol:.1e}",
            name = r.name,
            inst = r.instances,
            worst = r.worst_error,
            tol = r.tolerance,
        );
        if !r.passed() {
            failed += 1;
            if let Some(f) = &r.failure {
                println!("     first failure: {f}");
            }
        }
    }
    if failed > 0 {
        return Err(crate::util::run_failure(format!(
            "{failed} propert{} failed",
            if failed == 1 { "y" } else { "ies" }
        )));
    }
    Ok(())
}
