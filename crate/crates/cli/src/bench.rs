//! Benchmark sweeps. One CSV row per configuration: warm once, time `reps`
//! runs, report the median plus the cost-model estimate and the executed-tile
//! count. Configurations that would blow the memory cap are emitted as
//! `skipped` rows without running.

use anyhow::Result;
use std::time::Instant;

use fftconv_core::dft::{direct_conv, ConvMode};
use fftconv_core::exec::{
    conv_forward, conv_gated, prepare_kernel, BlockedMatmulConfig, ConvOptions, StatsCollector,
};
use fftconv_core::plan::{build_plan, cost, CostModelParams, Precision};
use fftconv_core::sparse::{apply_frequency_mask, conv_frequency_sparse, FrequencySparsityPattern};
use fftconv_core::tensor::Tensor;

use crate::util::{median, random_tensor_f32, random_tensor_f64, rel_error, seeded_rng};

pub struct BenchArgs {
    pub lengths: Vec<usize>,
    pub orders: Vec<usize>,
    pub modes: Vec<ConvMode>,
    pub real: bool,
    pub gated: bool,
    pub pattern: Option<FrequencySparsityPattern>,
    pub reps: usize,
    pub batch: usize,
    pub hidden: usize,
    pub precision: Precision,
    pub threads: usize,
    pub check: bool,
    pub direct: bool,
    pub mem_cap_bytes: u64,
    pub seed: u64,
    pub params: CostModelParams,
    pub tiles: BlockedMatmulConfig,
}

pub const CSV_HEADER: &str = "op,n,p,factors,mode,real,gated,pattern,batch,hidden,reps,median_s,modeled_s,max_rel_err,tiles,status";

struct Row {
    op: String,
    n: usize,
    p: usize,
    factors: String,
    mode: ConvMode,
    real: bool,
    gated: bool,
    pattern: String,
    batch: usize,
    hidden: usize,
    reps: usize,
    median_s: Option<f64>,
    modeled_s: Option<f64>,
    max_rel_err: Option<f64>,
    tiles: Option<u64>,
    status: String,
}

impl Row {
    fn print(&self) {
        let fmt_opt =
            |v: &Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        println!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.op,
            self.n,
            self.p,
            self.factors,
            match self.mode {
                ConvMode::Circular => "circular",
                ConvMode::Causal => "causal",
            },
            self.real,
            self.gated,
            self.pattern,
            self.batch,
            self.hidden,
            self.reps,
            fmt_opt(&self.median_s),
            fmt_opt(&self.modeled_s),
            fmt_opt(&self.max_rel_err),
            self.tiles.map(|t| t.to_string()).unwrap_or_default(),
            self.status
        );
    }
}

fn estimated_bytes(n: usize, batch: usize, hidden: usize, gated: bool, precision: Precision) -> u64 {
    let elem = match precision {
        Precision::F32 => 4u64,
        Precision::F64 => 8u64,
    };
    let tensors = (batch * hidden * n) as u64 * elem * if gated { 4 } else { 2 };
    let kernel = (hidden * n) as u64 * 16;
    let plan = (3 * n) as u64 * 16; // twiddles + factor matrices, generous
    let threads = std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1) as u64;
    let workspace = threads * 2 * n as u64 * 2 * elem;
    tensors + kernel + plan + workspace
}

fn direct_oracle(u: &Tensor, k: &Tensor, mode: ConvMode, frame: usize) -> Vec<f64> {
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

pub fn run(args: &BenchArgs) -> Result<()> {
    println!("{CSV_HEADER}");
    eprintln!("# bench seed={}", args.seed);
    for &n in &args.lengths {
        for &p in &args.orders {
            for &mode in &args.modes {
                if args.pattern.is_some() {
                    // Emit the dense baseline alongside every sparse row so
                    // the tile-count columns are directly comparable.
                    bench_config(args, n, p, mode, None)?;
                }
                bench_config(args, n, p, mode, args.pattern.as_ref())?;
            }
        }
    }
    Ok(())
}

fn bench_config(
    args: &BenchArgs,
    n: usize,
    p: usize,
    mode: ConvMode,
    pattern: Option<&FrequencySparsityPattern>,
) -> Result<()> {
    let causal = mode == ConvMode::Causal;
    let op_name = if pattern.is_some() {
        "conv_sparse"
    } else if args.gated {
        "conv_gated"
    } else {
        "conv"
    };
    let mut row = Row {
        op: op_name.into(),
        n,
        p,
        factors: String::new(),
        mode,
        real: args.real,
        gated: args.gated,
        pattern: pattern
            .map(|pt| format!("\"{pt}\""))
            .unwrap_or_else(|| "-".into()),
        batch: args.batch,
        hidden: args.hidden,
        reps: args.reps,
        median_s: None,
        modeled_s: None,
        max_rel_err: None,
        tiles: None,
        status: "ok".into(),
    };

    let needed = estimated_bytes(n, args.batch, args.hidden, args.gated, args.precision);
    if needed > args.mem_cap_bytes {
        row.status = format!("skipped: needs ~{} MiB", needed >> 20);
        row.print();
        return Ok(());
    }

    let plan = match build_plan(n, p, args.precision, args.real, causal) {
        Ok(plan) => plan,
        Err(e) => {
            row.status = format!("skipped: {e}");
            row.print();
            return Ok(());
        }
    };
    row.factors = plan
        .factors
        .iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join("x");
    row.modeled_s = cost(n, p, args.batch, args.hidden, &args.params)
        .ok()
        .map(|c| c.seconds);

    let mut rng = seeded_rng(args.seed ^ (n as u64) ^ ((p as u64) << 32));
    let n_in = if causal { n / 2 } else { n };
    let dims = [args.batch as u64, args.hidden as u64, n_in as u64];
    let kdims = [args.hidden as u64, n_in as u64];
    let (u, v, w, k) = match args.precision {
        Precision::F64 => (
            random_tensor_f64(&dims, &mut rng),
            random_tensor_f64(&dims, &mut rng),
            random_tensor_f64(&dims, &mut rng),
            random_tensor_f64(&kdims, &mut rng),
        ),
        Precision::F32 => (
            random_tensor_f32(&dims, &mut rng),
            random_tensor_f32(&dims, &mut rng),
            random_tensor_f32(&dims, &mut rng),
            random_tensor_f32(&kdims, &mut rng),
        ),
    };
    let kf = prepare_kernel(&k, &plan, mode)?;

    let sparse_setup = match (pattern, plan.real_input) {
        (Some(pattern), false) => {
            let flat = kf.to_flat(&plan)?;
            let masked = apply_frequency_mask(&flat, pattern)?;
            Some((masked, *pattern))
        }
        (Some(_), true) => {
            row.status = "skipped: sparse patterns need a complex plan".into();
            row.print();
            return Ok(());
        }
        (None, _) => None,
    };

    let stats = StatsCollector::new();
    let opts = ConvOptions {
        threads: args.threads,
        tiles: args.tiles,
        stats: Some(&stats),
    };
    let run_once = |opts: &ConvOptions| -> Result<Tensor> {
        let y = match &sparse_setup {
            Some((masked, pattern)) => conv_frequency_sparse(&u, masked, pattern, &plan, opts)?,
            None if args.gated => conv_gated(&u, &v, &w, &kf, &plan, opts)?,
            None => conv_forward(&u, &kf, &plan, opts)?,
        };
        Ok(y)
    };

    // Warmup run doubles as the instrumented + checked run.
    let y = run_once(&opts)?;
    row.tiles = Some(stats.snapshot().tiles_total);
    if args.check {
        let mut oracle = direct_oracle(&u, &k, mode, n);
        if args.gated {
            let vv = v.to_f64_vec().unwrap();
            let wv = w.to_f64_vec().unwrap();
            let uv = u.to_f64_vec().unwrap();
            let gated_in: Vec<f64> = uv.iter().zip(wv.iter()).map(|(a, b)| a * b).collect();
            let gt = Tensor::from_f64(u.dims().to_vec(), gated_in).unwrap();
            oracle = direct_oracle(&gt, &k, mode, n);
            for (o, g) in oracle.iter_mut().zip(vv.iter()) {
                *o *= g;
            }
        }
        if sparse_setup.is_none() {
            row.max_rel_err = Some(rel_error(&y.to_f64_vec().unwrap(), &oracle));
        }
    }

    let quiet = ConvOptions {
        threads: args.threads,
        tiles: args.tiles,
        stats: None,
    };
    let mut samples = Vec::with_capacity(args.reps);
    for _ in 0..args.reps {
        let t0 = Instant::now();
        let _ = run_once(&quiet)?;
        samples.push(t0.elapsed().as_secs_f64());
    }
    row.median_s = Some(median(&mut samples));
    row.print();

    if args.direct {
        let mut drow = Row {
            op: "direct".into(),
            factors: "-".into(),
            modeled_s: None,
            tiles: None,
            max_rel_err: None,
            median_s: None,
            pattern: "-".into(),
            status: "ok".into(),
            ..row
        };
        let mut samples = Vec::with_capacity(args.reps);
        for _ in 0..args.reps {
            let t0 = Instant::now();
            let _ = direct_oracle(&u, &k, mode, n);
            samples.push(t0.elapsed().as_secs_f64());
        }
        drow.median_s = Some(median(&mut samples));
        drow.print();
    }
    Ok(())
}
