//! Flag parsing helpers and small shared utilities.

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fftconv_core::plan::{parse_profile, CostModelParams};
use fftconv_core::tensor::Tensor;

/// Marker for verification/benchmark failures, reported with exit code 1
/// (usage errors exit with 2).
#[derive(Debug)]
pub struct RunFailure(pub String);

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for RunFailure {}

pub fn run_failure(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(RunFailure(msg.into()))
}

/// Parse a length spec: a single power of two (`4096`) or an inclusive range
/// of powers of two (`256..4096`).
pub fn parse_lengths(spec: &str) -> Result<Vec<usize>> {
    let parse_one = |s: &str| -> Result<usize> {
        let v: usize = s
            .trim()
            .parse()
            .with_context(|| format!("`{s}` is not a length"))?;
        if !v.is_power_of_two() {
            bail!("length {v} is not a power of two");
        }
        Ok(v)
    };
    if let Some((lo, hi)) = spec.split_once("..") {
        let (lo, hi) = (parse_one(lo)?, parse_one(hi)?);
        if lo > hi {
            bail!("empty length range {spec}");
        }
        let mut out = Vec::new();
        let mut n = lo;
        while n <= hi {
            out.push(n);
            n *= 2;
        }
        Ok(out)
    } else {
        Ok(vec![parse_one(spec)?])
    }
}

/// Parse a comma-separated list of decomposition orders.
pub fn parse_orders(spec: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in spec.split(',') {
        let p: usize = part
            .trim()
            .parse()
            .with_context(|| format!("`{part}` is not an order"))?;
        if !(2..=4).contains(&p) {
            bail!("order {p} out of range (2..=4)");
        }
        out.push(p);
    }
    Ok(out)
}

pub fn load_profile(name: &str) -> Result<CostModelParams> {
    if name == "a100" {
        return Ok(CostModelParams::a100());
    }
    let text = std::fs::read_to_string(name)
        .with_context(|| format!("unknown profile `{name}` (not built in, not a readable file)"))?;
    Ok(parse_profile(&text)?)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor_f64(dims: &[u64], rng: &mut ChaCha8Rng) -> Tensor {
    let count: u64 = dims.iter().product();
    let vals: Vec<f64> = (0..count).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_f64(dims.to_vec(), vals).unwrap()
}

pub fn random_tensor_f32(dims: &[u64], rng: &mut ChaCha8Rng) -> Tensor {
    let count: u64 = dims.iter().product();
    let vals: Vec<f32> = (0..count).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    Tensor::from_f32(dims.to_vec(), vals).unwrap()
}

/// Max |got - want| scaled by the oracle's infinity norm.
pub fn rel_error(got: &[f64], want: &[f64]) -> f64 {
    let norm = want.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-300);
    got.iter()
        .zip(want.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / norm
}

pub fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        0.5 * (samples[mid - 1] + samples[mid])
    }
}
