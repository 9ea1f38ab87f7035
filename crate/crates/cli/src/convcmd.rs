//! File-based convolution: read input and filter tensors, run the requested
//! configuration, write the output tensor.

use anyhow::{bail, Context, Result};

use fftconv_core::dft::{direct_conv, ConvMode};
use fftconv_core::exec::{conv_forward, conv_gated, prepare_kernel, ConvOptions};
use fftconv_core::plan::{build_plan, select_order, CostModelParams, Precision};
use fftconv_core::sparse::{apply_frequency_mask, conv_frequency_sparse, FrequencySparsityPattern};
use fftconv_core::tensor::{read_tensor, write_tensor, Tensor};

pub struct ConvArgs {
    pub input: String,
    pub kernel: String,
    pub out: String,
    pub mode: ConvMode,
    pub order: Option<usize>,
    pub real: bool,
    pub gated: Option<(String, String)>,
    pub pattern: Option<FrequencySparsityPattern>,
    pub precision: Precision,
    pub threads: usize,
    pub check: bool,
}

pub fn run(args: &ConvArgs) -> Result<()> {
    let u = read_tensor(&args.input).context("reading input tensor")?;
    let k = read_tensor(&args.kernel).context("reading kernel tensor")?;
    if u.dims().len() != 3 {
        bail!(
            "input tensor must be batch x channels x length, got {:?}",
            u.dims()
        );
    }
    if k.dims().len() != 2 {
        bail!("kernel tensor must be channels x taps, got {:?}", k.dims());
    }
    let n_in = u.dims()[2] as usize;
    let causal = args.mode == ConvMode::Causal;
    let frame = if causal { 2 * n_in } else { n_in };
    let n_k = k.dims()[1] as usize;
    if causal && n_k > frame / 2 {
        bail!("kernel exceeds causal budget ({n_k} taps, budget {})", frame / 2);
    }

    let order = match args.order {
        Some(p) => p,
        None => select_order(frame.max(16), 1, 1, &CostModelParams::a100())?,
    };
    let plan = build_plan(frame, order, args.precision, args.real, causal)?;
    let kf = prepare_kernel(&k, &plan, args.mode)?;

    let gates = match &args.gated {
        Some((v_path, w_path)) => {
            let v = read_tensor(v_path).context("reading v gate tensor")?;
            let w = read_tensor(w_path).context("reading w gate tensor")?;
            if v.dims() != u.dims() || w.dims() != u.dims() {
                bail!("gate tensors must match the input shape");
            }
            Some((v, w))
        }
        None => None,
    };

    let opts = ConvOptions {
        threads: args.threads,
        ..ConvOptions::default()
    };
    let y = match (&args.pattern, &gates) {
        (Some(pattern), None) => {
            let flat = kf.to_flat(&plan)?;
            let masked = apply_frequency_mask(&flat, pattern)?;
            conv_frequency_sparse(&u, &masked, pattern, &plan, &opts)?
        }
        (Some(_), Some(_)) => bail!("--pattern and --gated cannot be combined"),
        (None, Some((v, w))) => conv_gated(&u, v, w, &kf, &plan, &opts)?,
        (None, None) => conv_forward(&u, &kf, &plan, &opts)?,
    };

    if args.check {
        if args.pattern.is_some() || gates.is_some() {
            eprintln!("note: --check compares the plain convolution only; skipping");
        } else {
            let err = check_against_direct(&u, &k, &y, args.mode, frame)?;
            println!("max_rel_error={err:.6e}");
        }
    }

    write_tensor(&args.out, &y).context("writing output tensor")?;
    Ok(())
}

fn check_against_direct(
    u: &Tensor,
    k: &Tensor,
    y: &Tensor,
    mode: ConvMode,
    frame: usize,
) -> Result<f64> {
    let dims = u.dims();
    let (b, h, n_in) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
    let n_k = k.dims()[1] as usize;
    let uv = u.to_f64_vec().context("real input required for --check")?;
    let kv = k.to_f64_vec().context("real kernel required for --check")?;
    let yv = y.to_f64_vec().unwrap();
    let mut worst = 0.0f64;
    for bi in 0..b {
        for hi in 0..h {
            let urow = &uv[(bi * h + hi) * n_in..(bi * h + hi + 1) * n_in];
            let krow = &kv[hi * n_k..(hi + 1) * n_k];
            let oracle = match mode {
                ConvMode::Circular => direct_conv(urow, krow, ConvMode::Circular)?,
                ConvMode::Causal => {
                    let mut up = urow.to_vec();
                    up.resize(frame, 0.0);
                    let mut kp = krow.to_vec();
                    kp.resize(frame, 0.0);
                    direct_conv(&up, &kp, ConvMode::Circular)?[..n_in].to_vec()
                }
            };
            let yrow = &yv[(bi * h + hi) * n_in..(bi * h + hi + 1) * n_in];
            worst = worst.max(crate::util::rel_error(yrow, &oracle));
        }
    }
    Ok(worst)
}
