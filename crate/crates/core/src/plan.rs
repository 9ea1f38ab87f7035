//! Factorization of the transform length, precomputed per-stage matrices and
//! twiddles, and the roofline cost model used to pick the decomposition order.
//!
//! A plan factors an N-point transform into p stages (p in 2..=4). Stage i
//! applies the `factors[i]`-point DFT matrix to the natural reshape of the
//! data and multiplies in a twiddle grid for the split
//! `remaining = factors[i] * rest`; the last factor needs no grid. The plan
//! also precomputes the permutation between the fused mid-decomposition
//! ("plan") layout and flat frequency order.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::{Complex32, Complex64};
use thiserror::Error;

use crate::dft::{dft_matrix, twiddle_grid, ComplexMatrix, Direction, TwiddleGrid};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("length {0} is not a power of two")]
    NotAPowerOfTwo(usize),
    #[error("order must be between 2 and 4, got {0}")]
    UnsupportedOrder(usize),
    #[error("length {n} too short for order {p} (need at least 2^{p})")]
    TooShort { n: usize, p: usize },
    #[error("real packing of length {n} requires an even length with factorizable half")]
    RealPackingLength { n: usize },
    #[error("profile field `{0}` missing")]
    ProfileMissingField(String),
    #[error("profile line `{0}` is not key=value")]
    ProfileBadLine(String),
    #[error("profile value for `{key}` is not a number: {value}")]
    ProfileBadNumber { key: String, value: String },
    #[error("cost model parameters out of range: {0}")]
    BadParams(String),
}

/// Execution element kind for the fast paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

/// Split a power-of-two length into `p` power-of-two factors, exponents as
/// balanced as possible, larger factors first. Deterministic.
pub fn factorize(n: usize, p: usize) -> Result<Vec<usize>, PlanError> {
    if !n.is_power_of_two() {
        return Err(PlanError::NotAPowerOfTwo(n));
    }
    if !(2..=4).contains(&p) {
        return Err(PlanError::UnsupportedOrder(p));
    }
    if n < (1 << p) {
        return Err(PlanError::TooShort { n, p });
    }
    let e = n.trailing_zeros() as usize;
    let base = e / p;
    let rem = e % p;
    let mut factors = Vec::with_capacity(p);
    for i in 0..p {
        let exp = if i < rem { base + 1 } else { base };
        factors.push(1usize << exp);
    }
    Ok(factors)
}

/// Per-stage data: the DFT factor matrices for one unique factor size.
#[derive(Debug)]
pub struct FactorMatrices {
    pub forward: ComplexMatrix,
    pub inverse: ComplexMatrix,
    pub forward32: Vec<Complex32>,
    pub inverse32: Vec<Complex32>,
}

/// One decomposition stage: the atomic factor, the length of the remaining
/// sub-transform, and the twiddle grids for this split (absent on the last
/// stage).
#[derive(Debug)]
pub struct Stage {
    pub factor: usize,
    /// Product of the factors below this stage; 1 on the last stage.
    pub rest: usize,
    pub twiddle_forward: Option<TwiddleGrid>,
    pub twiddle_inverse: Option<TwiddleGrid>,
    pub twiddle_forward32: Vec<Complex32>,
    pub twiddle_inverse32: Vec<Complex32>,
}

/// Executable transform plan: factorization, precomputed factor matrices and
/// twiddles for both directions, layout permutations, and mode flags.
///
/// Plans are immutable once built and safe to share across threads.
#[derive(Debug)]
pub struct MonarchPlan {
    /// Convolution frame length (the padded FFT length the plan serves).
    pub n: usize,
    /// Decomposition order.
    pub p: usize,
    /// Length of the complex transform actually executed: `n`, or `n/2` when
    /// real-input packing is enabled.
    pub transform_len: usize,
    /// Factors of `transform_len`, largest first.
    pub factors: Vec<usize>,
    pub precision: Precision,
    pub real_input: bool,
    pub causal: bool,
    pub stages: Vec<Stage>,
    matrices: BTreeMap<usize, Arc<FactorMatrices>>,
    /// `layout_perm[q]` is the flat frequency index held at plan position q.
    pub layout_perm: Vec<usize>,
    /// `inv_layout_perm[k]` is the plan position holding flat frequency k.
    pub inv_layout_perm: Vec<usize>,
}

impl MonarchPlan {
    pub fn matrices(&self, factor: usize) -> &FactorMatrices {
        &self.matrices[&factor]
    }

    /// Structural identity of the layout: equal signatures mean equal
    /// plan-layout permutations.
    pub fn layout_signature(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x100000001b3);
        };
        mix(self.n as u64);
        mix(self.transform_len as u64);
        mix(self.real_input as u64);
        for &f in &self.factors {
            mix(f as u64);
        }
        h
    }
}

fn to32(entries: &[Complex64]) -> Vec<Complex32> {
    entries
        .iter()
        .map(|z| Complex32::new(z.re as f32, z.im as f32))
        .collect()
}

/// Build an executable plan with the balanced factorization.
///
/// With `real_input` the packing path runs a complex transform of length
/// `n/2`, which must itself satisfy the factorization preconditions.
pub fn build_plan(
    n: usize,
    p: usize,
    precision: Precision,
    real_input: bool,
    causal: bool,
) -> Result<MonarchPlan, PlanError> {
    build_plan_inner(n, p, None, precision, real_input, causal)
}

/// Build a plan with an explicit factor list instead of the balanced split.
/// The cost model is advisory; any valid factorization executes.
pub fn build_plan_with_factors(
    n: usize,
    factors: &[usize],
    precision: Precision,
    real_input: bool,
    causal: bool,
) -> Result<MonarchPlan, PlanError> {
    build_plan_inner(n, factors.len(), Some(factors), precision, real_input, causal)
}

fn build_plan_inner(
    n: usize,
    p: usize,
    explicit: Option<&[usize]>,
    precision: Precision,
    real_input: bool,
    causal: bool,
) -> Result<MonarchPlan, PlanError> {
    let transform_len = if real_input {
        if n < 2 || n % 2 != 0 {
            return Err(PlanError::RealPackingLength { n });
        }
        n / 2
    } else {
        n
    };
    let factors = match explicit {
        None => factorize(transform_len, p)?,
        Some(list) => {
            if !(2..=4).contains(&p) {
                return Err(PlanError::UnsupportedOrder(p));
            }
            let product: usize = list.iter().product();
            if product != transform_len || list.iter().any(|&f| !f.is_power_of_two() || f < 2) {
                return Err(PlanError::NotAPowerOfTwo(transform_len));
            }
            list.to_vec()
        }
    };

    let wants32 = precision == Precision::F32;
    let mut stages = Vec::with_capacity(p);
    let mut rest = transform_len;
    for (i, &f) in factors.iter().enumerate() {
        rest /= f;
        let (tf, ti, tf32, ti32) = if i + 1 < p {
            let fwd = twiddle_grid(f, rest, Direction::Forward).expect("valid extents");
            let inv = twiddle_grid(f, rest, Direction::Inverse).expect("valid extents");
            let f32s = if wants32 { to32(&fwd.entries) } else { Vec::new() };
            let i32s = if wants32 { to32(&inv.entries) } else { Vec::new() };
            (Some(fwd), Some(inv), f32s, i32s)
        } else {
            (None, None, Vec::new(), Vec::new())
        };
        stages.push(Stage {
            factor: f,
            rest,
            twiddle_forward: tf,
            twiddle_inverse: ti,
            twiddle_forward32: tf32,
            twiddle_inverse32: ti32,
        });
    }

    let mut matrices = BTreeMap::new();
    for &f in &factors {
        matrices.entry(f).or_insert_with(|| {
            let forward = dft_matrix(f, Direction::Forward).expect("factor >= 2");
            let inverse = dft_matrix(f, Direction::Inverse).expect("factor >= 2");
            let forward32 = if wants32 { to32(&forward.entries) } else { Vec::new() };
            let inverse32 = if wants32 { to32(&inverse.entries) } else { Vec::new() };
            Arc::new(FactorMatrices {
                forward,
                inverse,
                forward32,
                inverse32,
            })
        });
    }

    let layout_perm = layout_permutation(&factors);
    let mut inv_layout_perm = vec![0usize; transform_len];
    for (q, &k) in layout_perm.iter().enumerate() {
        inv_layout_perm[k] = q;
    }

    Ok(MonarchPlan {
        n,
        p,
        transform_len,
        factors,
        precision,
        real_input,
        causal,
        stages,
        matrices,
        layout_perm,
        inv_layout_perm,
    })
}

/// Plan-position -> flat-frequency map for the fused layout.
///
/// At each split `m = f * rest`, plan position `r * rest + s` holds flat
/// frequency `phi_rest(s) * f + r`: the factor transformed at this stage
/// lands in the low output digit while positions keep it in the high one.
fn layout_permutation(factors: &[usize]) -> Vec<usize> {
    let mut perm = vec![0usize];
    for &f in factors.iter().rev() {
        let rest = perm.len();
        let mut next = Vec::with_capacity(f * rest);
        for r in 0..f {
            for s in 0..rest {
                next.push(perm[s] * f + r);
            }
        }
        perm = next;
    }
    perm
}

// ---------------------------------------------------------------------------
// Cost model
// ---------------------------------------------------------------------------

/// Hardware constants feeding the cost model.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModelParams {
    /// Matrix-multiply unit size (dimensionless).
    pub mu: usize,
    /// General-arithmetic throughput, FLOP/s.
    pub tau_g: f64,
    /// Matrix-multiply throughput, FLOP/s.
    pub tau_m: f64,
    /// Slow-memory bandwidth, byte/s.
    pub sigma_h: f64,
    /// Fast-memory bandwidth, byte/s.
    pub sigma_s: f64,
    /// Fast-memory working-set budget, bytes.
    pub sram_budget: f64,
}

impl CostModelParams {
    /// Measured A100-40GB constants; fast-memory budget of 128 KiB puts the
    /// order-3 fast/slow boundary between 32K and 64K.
    pub fn a100() -> Self {
        CostModelParams {
            mu: 16,
            tau_g: 1.76e13,
            tau_m: 2.34e14,
            sigma_h: 1.35e12,
            sigma_s: 9.5e12,
            sram_budget: 131072.0,
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.mu == 0
            || self.tau_g <= 0.0
            || self.tau_m <= 0.0
            || self.sigma_h <= 0.0
            || self.sigma_s <= 0.0
            || self.sram_budget <= 0.0
        {
            return Err(PlanError::BadParams("all constants must be positive".into()));
        }
        if self.tau_m < self.tau_g {
            return Err(PlanError::BadParams("tau_m must be >= tau_g".into()));
        }
        if self.sigma_s < self.sigma_h {
            return Err(PlanError::BadParams("sigma_s must be >= sigma_h".into()));
        }
        Ok(())
    }
}

/// Parse a `key=value` hardware profile. Keys: mu, tau_g, tau_m, sigma_h,
/// sigma_s, sram_budget (SI units). Blank lines and `#` comments allowed.
pub fn parse_profile(text: &str) -> Result<CostModelParams, PlanError> {
    let mut fields: BTreeMap<String, f64> = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| PlanError::ProfileBadLine(line.to_string()))?;
        let key = key.trim().to_string();
        let value = value.trim();
        let num: f64 = value.parse().map_err(|_| PlanError::ProfileBadNumber {
            key: key.clone(),
            value: value.to_string(),
        })?;
        fields.insert(key, num);
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| PlanError::ProfileMissingField(k.to_string()))
    };
    let params = CostModelParams {
        mu: get("mu")? as usize,
        tau_g: get("tau_g")?,
        tau_m: get("tau_m")?,
        sigma_h: get("sigma_h")?,
        sigma_s: get("sigma_s")?,
        sram_budget: get("sram_budget")?,
    };
    params.validate()?;
    Ok(params)
}

/// Throughput for a factor-size matrix multiply: general arithmetic below the
/// matrix-unit size, matrix-unit throughput at or above it.
pub fn gamma(n_i: usize, params: &CostModelParams) -> f64 {
    if n_i < params.mu {
        params.tau_g
    } else {
        params.tau_m
    }
}

/// Bandwidth serving stage `i` (1-based): the stage working set is
/// `4 * n / prod_{j<i} N_j` bytes; it reads from fast memory while it fits in
/// the budget and from slow memory otherwise.
pub fn omega(stage: usize, factors: &[usize], n: usize, params: &CostModelParams) -> f64 {
    debug_assert!(stage >= 1 && stage <= factors.len());
    let shrink: usize = factors[..stage - 1].iter().product();
    let working_set = 4.0 * n as f64 / shrink as f64;
    if working_set <= params.sram_budget {
        params.sigma_s
    } else {
        params.sigma_h
    }
}

/// Modeled time for one convolution: per stage, a compute term and a
/// bandwidth term, scaled by batch and hidden counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CostEstimate {
    pub seconds: f64,
    pub flop_seconds: f64,
    pub io_seconds: f64,
    pub per_stage: Vec<StageCost>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageCost {
    pub factor: usize,
    pub flop_seconds: f64,
    pub io_seconds: f64,
}

/// Evaluate the cost model: `C = B*H * sum_i 16*N*N_i/gamma(N_i) + 4*N/omega(i)`.
pub fn cost(
    n: usize,
    p: usize,
    batch: usize,
    hidden: usize,
    params: &CostModelParams,
) -> Result<CostEstimate, PlanError> {
    let factors = factorize(n, p)?;
    let bh = (batch * hidden) as f64;
    let mut per_stage = Vec::with_capacity(p);
    let mut flop_seconds = 0.0;
    let mut io_seconds = 0.0;
    for (i, &f) in factors.iter().enumerate() {
        let fs = bh * 16.0 * n as f64 * f as f64 / gamma(f, params);
        let is = bh * 4.0 * n as f64 / omega(i + 1, &factors, n, params);
        flop_seconds += fs;
        io_seconds += is;
        per_stage.push(StageCost {
            factor: f,
            flop_seconds: fs,
            io_seconds: is,
        });
    }
    Ok(CostEstimate {
        seconds: flop_seconds + io_seconds,
        flop_seconds,
        io_seconds,
        per_stage,
    })
}

/// Smallest-cost order in {2, 3, 4}, ties broken toward smaller p.
pub fn select_order(
    n: usize,
    batch: usize,
    hidden: usize,
    params: &CostModelParams,
) -> Result<usize, PlanError> {
    if !n.is_power_of_two() || n < 16 {
        return Err(PlanError::NotAPowerOfTwo(n));
    }
    let mut best = (f64::INFINITY, 0usize);
    for p in 2..=4 {
        if n < (1 << p) {
            continue;
        }
        let c = cost(n, p, batch, hidden, params)?;
        if c.seconds < best.0 {
            best = (c.seconds, p);
        }
    }
    Ok(best.1)
}
