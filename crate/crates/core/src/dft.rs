//! DFT matrices, twiddle grids, naive O(N^2) reference transforms, real-input
//! packing, and the direct-summation convolution — the ground truth that every
//! fast path in this crate is checked against.
//!
//! Reference transforms here always run in complex-128 so that oracle error is
//! negligible next to the tolerances they arbitrate. The inverse matrices and
//! twiddles carry no 1/N scaling; the scaling is applied exactly once at the
//! final output of an inverse transform.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DftError {
    #[error("transform length must be at least 1")]
    EmptyInput,
    #[error("extent must be nonzero")]
    ZeroExtent,
    #[error("real packing requires even length, got {0}")]
    OddLength(usize),
    #[error("half spectrum endpoints must be real (imag {imag:.3e} at bin {bin})")]
    NonHermitianEndpoint { bin: usize, imag: f64 },
    #[error("circular convolution requires equal lengths (input {input}, kernel {kernel})")]
    CircularLengthMismatch { input: usize, kernel: usize },
    #[error("causal kernel longer than input (input {input}, kernel {kernel})")]
    CausalKernelTooLong { input: usize, kernel: usize },
}

/// Transform direction. Forward uses `W_n = exp(-2*pi*i/n)`, inverse the
/// conjugate, without scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Convolution boundary semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    /// Indices wrap modulo N; kernel must match the input length.
    Circular,
    /// Output position i sums over j <= i only; out-of-range kernel taps are zero.
    Causal,
}

/// Root of unity power `W_n^k = exp(-2*pi*i*k/n)`, with the product reduced
/// mod n before the trig call so large exponents stay accurate.
pub fn root_of_unity(n: usize, exponent: u64, direction: Direction) -> Complex64 {
    let e = (exponent % n as u64) as f64;
    let sign = match direction {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    };
    let angle = sign * 2.0 * std::f64::consts::PI * e / n as f64;
    let (s, c) = angle.sin_cos();
    Complex64::new(c, s)
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.entries[r * self.cols + c] = v;
    }
}

/// Twiddle correction grid for a split `m = rows * cols`: entry `[i][j]` is
/// `W_m^{i*j}` (forward) or `W_m^{-i*j}` (inverse). Row 0 and column 0 are
/// all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct TwiddleGrid {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Complex64>,
}

impl TwiddleGrid {
    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.entries[r * self.cols + c]
    }
}

/// Bins 0..=N/2 of a real input's DFT. Bins 0 and N/2 are real by symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpectrum {
    /// Full (even) transform length N.
    pub n: usize,
    /// N/2 + 1 complex bins.
    pub entries: Vec<Complex64>,
}

/// The n x n discrete Fourier matrix (or its unscaled inverse).
pub fn dft_matrix(n: usize, direction: Direction) -> Result<ComplexMatrix, DftError> {
    if n == 0 {
        return Err(DftError::ZeroExtent);
    }
    let mut m = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            m.set(j, k, root_of_unity(n, (j * k) as u64, direction));
        }
    }
    Ok(m)
}

/// Twiddle grid for the split `n1 * n2`.
pub fn twiddle_grid(n1: usize, n2: usize, direction: Direction) -> Result<TwiddleGrid, DftError> {
    if n1 == 0 || n2 == 0 {
        return Err(DftError::ZeroExtent);
    }
    let m = n1 * n2;
    let mut entries = Vec::with_capacity(m);
    for i in 0..n1 {
        for j in 0..n2 {
            entries.push(root_of_unity(m, (i as u64) * (j as u64), direction));
        }
    }
    Ok(TwiddleGrid {
        rows: n1,
        cols: n2,
        entries,
    })
}

/// Direct O(N^2) DFT. The correctness oracle for every fast transform path.
pub fn naive_dft(x: &[Complex64]) -> Result<Vec<Complex64>, DftError> {
    if x.is_empty() {
        return Err(DftError::EmptyInput);
    }
    let n = x.len();
    // Table of W_n^m keeps the inner loop to one multiply-add per term.
    let table: Vec<Complex64> = (0..n)
        .map(|m| root_of_unity(n, m as u64, Direction::Forward))
        .collect();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &v) in x.iter().enumerate() {
            acc += v * table[(j * k) % n];
        }
        out.push(acc);
    }
    Ok(out)
}

/// Direct inverse DFT with the single 1/N scaling applied at the output.
pub fn naive_idft(x: &[Complex64]) -> Result<Vec<Complex64>, DftError> {
    if x.is_empty() {
        return Err(DftError::EmptyInput);
    }
    let n = x.len();
    let table: Vec<Complex64> = (0..n)
        .map(|m| root_of_unity(n, m as u64, Direction::Inverse))
        .collect();
    let scale = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &v) in x.iter().enumerate() {
            acc += v * table[(j * k) % n];
        }
        out.push(acc * scale);
    }
    Ok(out)
}

/// Real-input FFT by one-stage decimation in time: packs even samples into
/// real parts and odd samples into imaginary parts, runs a single length-N/2
/// complex transform through `fft`, and unpacks bins 0..=N/2.
///
/// The even/odd split spectra are recovered as
/// `X_e[k] = (Z[k] + conj(Z[N/2-k])) / 2` and
/// `X_o[k] = (Z[k] - conj(Z[N/2-k])) / (2i)`,
/// then combined as `X[k] = X_e[k] + W_N^k * X_o[k]`.
pub fn rfft_via_half<F>(x: &[f64], mut fft: F) -> Result<HalfSpectrum, DftError>
where
    F: FnMut(&[Complex64]) -> Vec<Complex64>,
{
    let n = x.len();
    if n < 2 || n % 2 != 0 {
        return Err(DftError::OddLength(n));
    }
    let half = n / 2;
    let packed: Vec<Complex64> = (0..half)
        .map(|j| Complex64::new(x[2 * j], x[2 * j + 1]))
        .collect();
    let z = fft(&packed);
    debug_assert_eq!(z.len(), half);

    let mut entries = Vec::with_capacity(half + 1);
    for k in 0..half {
        let zk = z[k];
        let zm = z[(half - k) % half].conj();
        let xe = (zk + zm) * 0.5;
        let xo = (zk - zm) / Complex64::new(0.0, 2.0);
        entries.push(xe + root_of_unity(n, k as u64, Direction::Forward) * xo);
    }
    // Bin N/2: X_e[0] - X_o[0], both real. Build it with an exactly zero
    // imaginary part so the Hermitian-endpoint invariant holds bit-for-bit.
    let xe0 = z[0].re;
    let xo0 = z[0].im;
    entries.push(Complex64::new(xe0 - xo0, 0.0));
    let mut spectrum = HalfSpectrum { n, entries };
    spectrum.entries[0] = Complex64::new(xe0 + xo0, 0.0);
    Ok(spectrum)
}

/// Inverse of [`rfft_via_half`]: rebuilds the packed length-N/2 spectrum via
/// `X_e[k] = (X[k] + conj(X[N/2-k])) / 2`,
/// `X_o[k] = (X[k] - conj(X[N/2-k])) / 2 * W_N^{-k}`,
/// runs one complex inverse transform (which must include its 1/(N/2)
/// scaling), and demultiplexes even/odd samples.
pub fn irfft_via_half<F>(spectrum: &HalfSpectrum, mut ifft: F) -> Result<Vec<f64>, DftError>
where
    F: FnMut(&[Complex64]) -> Vec<Complex64>,
{
    let n = spectrum.n;
    let half = n / 2;
    debug_assert_eq!(spectrum.entries.len(), half + 1);
    let tol = endpoint_tolerance(spectrum);
    for &bin in &[0, half] {
        let imag = spectrum.entries[bin].im;
        if imag.abs() > tol {
            return Err(DftError::NonHermitianEndpoint { bin, imag });
        }
    }

    let x = &spectrum.entries;
    let mut packed = Vec::with_capacity(half);
    for k in 0..half {
        let xk = x[k];
        let xm = x[half - k].conj();
        let xe = (xk + xm) * 0.5;
        let xo = (xk - xm) * 0.5 * root_of_unity(n, k as u64, Direction::Inverse);
        packed.push(xe + Complex64::new(0.0, 1.0) * xo);
    }
    let z = ifft(&packed);
    debug_assert_eq!(z.len(), half);

    let mut out = vec![0.0; n];
    for (j, v) in z.iter().enumerate() {
        out[2 * j] = v.re;
        out[2 * j + 1] = v.im;
    }
    Ok(out)
}

fn endpoint_tolerance(spectrum: &HalfSpectrum) -> f64 {
    let max = spectrum
        .entries
        .iter()
        .map(|z| z.norm_sqr().sqrt())
        .fold(0.0f64, f64::max);
    1e-6 * max.max(1.0)
}

/// Direct-summation convolution oracle, O(N * N_k).
///
/// Circular: `y[i] = sum_j u[j] * k[(i-j) mod N]`.
/// Causal:   `y[i] = sum_{j<=i} u[j] * k[i-j]`, out-of-range taps are zero.
pub fn direct_conv(u: &[f64], kernel: &[f64], mode: ConvMode) -> Result<Vec<f64>, DftError> {
    let n = u.len();
    match mode {
        ConvMode::Circular => {
            if kernel.len() != n {
                return Err(DftError::CircularLengthMismatch {
                    input: n,
                    kernel: kernel.len(),
                });
            }
            let mut y = vec![0.0; n];
            for (i, yi) in y.iter_mut().enumerate() {
                // Split the wrap: j <= i hits k[i-j], j > i hits k[n+i-j].
                let mut acc = 0.0;
                for (uj, kj) in u[..=i].iter().zip(kernel[..=i].iter().rev()) {
                    acc += uj * kj;
                }
                for (uj, kj) in u[i + 1..].iter().zip(kernel[i + 1..].iter().rev()) {
                    acc += uj * kj;
                }
                *yi = acc;
            }
            Ok(y)
        }
        ConvMode::Causal => {
            if kernel.len() > n {
                return Err(DftError::CausalKernelTooLong {
                    input: n,
                    kernel: kernel.len(),
                });
            }
            let nk = kernel.len();
            let mut y = vec![0.0; n];
            for (i, yi) in y.iter_mut().enumerate() {
                let lo = (i + 1).saturating_sub(nk);
                let mut acc = 0.0;
                for (uj, kj) in u[lo..=i].iter().zip(kernel[..=i - lo].iter().rev()) {
                    acc += uj * kj;
                }
                *yi = acc;
            }
            Ok(y)
        }
    }
}
