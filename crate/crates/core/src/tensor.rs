//! Dense tensors and the on-disk tensor format shared by every module.
//!
//! The file format is deliberately small: a fixed header (`FFCV`, version,
//! dtype code, rank) followed by little-endian extents and the flat row-major
//! element buffer. Complex elements are stored as adjacent (re, im) pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::{Complex32, Complex64};
use thiserror::Error;

pub const TENSOR_MAGIC: [u8; 4] = *b"FFCV";
pub const TENSOR_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{path}: not a tensor file")]
    NotATensorFile { path: String },
    #[error("{path}: unsupported dtype code {code}")]
    UnsupportedDtype { path: String, code: u8 },
    #[error("{path}: size mismatch (header claims {expected} elements, {actual} present)")]
    SizeMismatch {
        path: String,
        expected: u64,
        actual: u64,
    },
    #[error("{path}: unsupported version {version}")]
    UnsupportedVersion { path: String, version: u8 },
    #[error("dimension {dim} exceeds 2^63")]
    DimTooLarge { dim: u64 },
    #[error("element count overflows: dims {dims:?}")]
    ElementCountOverflow { dims: Vec<u64> },
    #[error("tensor data length {data_len} does not match dims {dims:?}")]
    ShapeDataMismatch { dims: Vec<u64>, data_len: usize },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Element kind of a [`Tensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    Real32,
    Real64,
    Complex64,
    Complex128,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::Real32 => 0,
            DType::Real64 => 1,
            DType::Complex64 => 2,
            DType::Complex128 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::Real32),
            1 => Some(DType::Real64),
            2 => Some(DType::Complex64),
            3 => Some(DType::Complex128),
            _ => None,
        }
    }

    /// Bytes per element on disk.
    pub fn elem_bytes(self) -> usize {
        match self {
            DType::Real32 => 4,
            DType::Real64 => 8,
            DType::Complex64 => 8,
            DType::Complex128 => 16,
        }
    }
}

/// Flat row-major element storage, one variant per dtype.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    Real32(Vec<f32>),
    Real64(Vec<f64>),
    Complex64(Vec<Complex32>),
    Complex128(Vec<Complex64>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::Real32(v) => v.len(),
            TensorData::Real64(v) => v.len(),
            TensorData::Complex64(v) => v.len(),
            TensorData::Complex128(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            TensorData::Real32(_) => DType::Real32,
            TensorData::Real64(_) => DType::Real64,
            TensorData::Complex64(_) => DType::Complex64,
            TensorData::Complex128(_) => DType::Complex128,
        }
    }
}

/// Dense tensor: dtype, extents, and a flat row-major buffer.
///
/// Tensors are immutable after construction as far as callers are concerned;
/// sharing one read-only across threads is safe. Reshapes elsewhere in the
/// crate are index reinterpretations of this buffer, never data movement.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<u64>,
    data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<u64>, data: TensorData) -> Result<Self, TensorError> {
        let count = element_count(&dims)?;
        if count != data.len() as u64 {
            return Err(TensorError::ShapeDataMismatch {
                dims,
                data_len: data.len(),
            });
        }
        Ok(Tensor { dims, data })
    }

    pub fn from_f64(dims: Vec<u64>, values: Vec<f64>) -> Result<Self, TensorError> {
        Tensor::new(dims, TensorData::Real64(values))
    }

    pub fn from_f32(dims: Vec<u64>, values: Vec<f32>) -> Result<Self, TensorError> {
        Tensor::new(dims, TensorData::Real32(values))
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn dims(&self) -> &[u64] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// View as f64 values, converting from f32 if needed. Errors on complex.
    pub fn to_f64_vec(&self) -> Option<Vec<f64>> {
        match &self.data {
            TensorData::Real32(v) => Some(v.iter().map(|&x| x as f64).collect()),
            TensorData::Real64(v) => Some(v.clone()),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match &self.data {
            TensorData::Real64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            TensorData::Real32(v) => Some(v),
            _ => None,
        }
    }
}

fn element_count(dims: &[u64]) -> Result<u64, TensorError> {
    for &d in dims {
        if d > (1u64 << 63) - 1 {
            return Err(TensorError::DimTooLarge { dim: d });
        }
    }
    dims.iter().try_fold(1u64, |acc, &d| {
        acc.checked_mul(d)
            .ok_or_else(|| TensorError::ElementCountOverflow {
                dims: dims.to_vec(),
            })
    })
}

/// Header size in bytes: magic + version + dtype + ndim, then one u64 per dim.
pub fn header_size(ndim: usize) -> usize {
    7 + 8 * ndim
}

fn io_err(path: &Path, source: std::io::Error) -> TensorError {
    TensorError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write `t` to `path` in the canonical little-endian format.
pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<(), TensorError> {
    let path = path.as_ref();
    element_count(&t.dims)?;
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);

    let mut header = Vec::with_capacity(header_size(t.dims.len()));
    header.extend_from_slice(&TENSOR_MAGIC);
    header.push(TENSOR_VERSION);
    header.push(t.dtype().code());
    header.push(t.dims.len() as u8);
    for &d in &t.dims {
        header.extend_from_slice(&d.to_le_bytes());
    }
    w.write_all(&header).map_err(|e| io_err(path, e))?;

    match &t.data {
        TensorData::Real32(v) => {
            for x in v {
                w.write_all(&x.to_le_bytes()).map_err(|e| io_err(path, e))?;
            }
        }
        TensorData::Real64(v) => {
            for x in v {
                w.write_all(&x.to_le_bytes()).map_err(|e| io_err(path, e))?;
            }
        }
        TensorData::Complex64(v) => {
            for z in v {
                w.write_all(&z.re.to_le_bytes())
                    .map_err(|e| io_err(path, e))?;
                w.write_all(&z.im.to_le_bytes())
                    .map_err(|e| io_err(path, e))?;
            }
        }
        TensorData::Complex128(v) => {
            for z in v {
                w.write_all(&z.re.to_le_bytes())
                    .map_err(|e| io_err(path, e))?;
                w.write_all(&z.im.to_le_bytes())
                    .map_err(|e| io_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Read a tensor previously written by [`write_tensor`]. Bit-exact round-trip.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor, TensorError> {
    let path = path.as_ref();
    let pstr = path.display().to_string();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);

    let mut fixed = [0u8; 7];
    r.read_exact(&mut fixed).map_err(|_| TensorError::NotATensorFile {
        path: pstr.clone(),
    })?;
    if fixed[0..4] != TENSOR_MAGIC {
        return Err(TensorError::NotATensorFile { path: pstr });
    }
    if fixed[4] != TENSOR_VERSION {
        return Err(TensorError::UnsupportedVersion {
            path: pstr,
            version: fixed[4],
        });
    }
    let dtype = DType::from_code(fixed[5]).ok_or(TensorError::UnsupportedDtype {
        path: pstr.clone(),
        code: fixed[5],
    })?;
    let ndim = fixed[6] as usize;

    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let mut b = [0u8; 8];
        r.read_exact(&mut b).map_err(|_| TensorError::SizeMismatch {
            path: pstr.clone(),
            expected: ndim as u64,
            actual: 0,
        })?;
        dims.push(u64::from_le_bytes(b));
    }
    let count = element_count(&dims)?;

    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| io_err(path, e))?;
    let expected_bytes = count
        .checked_mul(dtype.elem_bytes() as u64)
        .ok_or_else(|| TensorError::ElementCountOverflow { dims: dims.clone() })?;
    if bytes.len() as u64 != expected_bytes {
        return Err(TensorError::SizeMismatch {
            path: pstr,
            expected: count,
            actual: bytes.len() as u64 / dtype.elem_bytes() as u64,
        });
    }

    let data = match dtype {
        DType::Real32 => TensorData::Real32(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        DType::Real64 => TensorData::Real64(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        DType::Complex64 => TensorData::Complex64(
            bytes
                .chunks_exact(8)
                .map(|c| {
                    Complex32::new(
                        f32::from_le_bytes(c[0..4].try_into().unwrap()),
                        f32::from_le_bytes(c[4..8].try_into().unwrap()),
                    )
                })
                .collect(),
        ),
        DType::Complex128 => TensorData::Complex128(
            bytes
                .chunks_exact(16)
                .map(|c| {
                    Complex64::new(
                        f64::from_le_bytes(c[0..8].try_into().unwrap()),
                        f64::from_le_bytes(c[8..16].try_into().unwrap()),
                    )
                })
                .collect(),
        ),
    };
    Tensor::new(dims, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmpfile(name: &str) -> std::path::PathBuf {
        let dir = tempfile::tempdir().unwrap();
        // Keep the dir alive by leaking; tests are short-lived.
        let path = dir.path().join(name);
        std::mem::forget(dir);
        path
    }

    #[test]
    fn layout_1d_real64() {
        let path = tmpfile("a.t");
        let t = Tensor::from_f64(vec![2], vec![1.0, 2.0]).unwrap();
        write_tensor(&path, &t).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        // 4 magic + 1 version + 1 dtype + 1 ndim + 8 dims, then 2 x 8 data
        assert_eq!(header_size(1), 15);
        assert_eq!(bytes.len(), 15 + 16);
        assert_eq!(&bytes[0..4], b"FFCV");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 1);
        assert_eq!(bytes[6], 1);
        assert_eq!(u64::from_le_bytes(bytes[7..15].try_into().unwrap()), 2);
        assert_eq!(read_tensor(&path).unwrap(), t);
    }

    #[test]
    fn empty_tensor_roundtrip() {
        let path = tmpfile("empty.t");
        let t = Tensor::from_f64(vec![0], vec![]).unwrap();
        write_tensor(&path, &t).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), header_size(1));
        assert_eq!(read_tensor(&path).unwrap(), t);
    }

    #[test]
    fn layout_3d_real32() {
        let path = tmpfile("b.t");
        let t = Tensor::from_f32(vec![2, 3, 4], (0..24).map(|i| i as f32).collect()).unwrap();
        write_tensor(&path, &t).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), header_size(3) + 96);
        assert_eq!(read_tensor(&path).unwrap(), t);
    }

    #[test]
    fn bad_magic_rejected() {
        let path = tmpfile("bad.t");
        std::fs::write(&path, b"XXXX\x01\x01\x01\x00\x00\x00\x00\x00\x00\x00\x00").unwrap();
        let err = read_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("not a tensor file"), "{err}");
    }

    #[test]
    fn unknown_dtype_rejected() {
        let path = tmpfile("dtype.t");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"FFCV");
        bytes.push(1);
        bytes.push(9); // bogus dtype code
        bytes.push(1);
        bytes.extend_from_slice(&1u64.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 8]);
        std::fs::write(&path, bytes).unwrap();
        let err = read_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported dtype"), "{err}");
    }

    #[test]
    fn truncated_data_rejected() {
        let path = tmpfile("trunc.t");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"FFCV");
        bytes.push(1);
        bytes.push(1); // real-64
        bytes.push(1);
        bytes.extend_from_slice(&8u64.to_le_bytes()); // claims 8 elements
        bytes.extend_from_slice(&[0u8; 32]); // only 4 present
        std::fs::write(&path, bytes).unwrap();
        let err = read_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("size mismatch"), "{err}");
    }

    #[test]
    fn shape_data_mismatch_rejected() {
        assert!(Tensor::from_f64(vec![3], vec![1.0]).is_err());
    }

    fn bits64(v: &[f64]) -> Vec<u64> {
        v.iter().map(|x| x.to_bits()).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn roundtrip_real64_bit_exact(
            dims in proptest::collection::vec(1u64..5, 1..=4),
            seedling in proptest::collection::vec(proptest::num::f64::ANY, 0..32),
        ) {
            let count: u64 = dims.iter().product();
            let mut vals = seedling;
            vals.resize(count as usize, -0.0);
            let t = Tensor::from_f64(dims, vals).unwrap();
            let path = tmpfile("p64.t");
            write_tensor(&path, &t).unwrap();
            let back = read_tensor(&path).unwrap();
            prop_assert_eq!(back.dims(), t.dims());
            match (back.data(), t.data()) {
                (TensorData::Real64(a), TensorData::Real64(b)) => {
                    prop_assert_eq!(bits64(a), bits64(b));
                }
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn roundtrip_complex128_bit_exact(
            dims in proptest::collection::vec(1u64..4, 1..=3),
            res in proptest::collection::vec(proptest::num::f64::ANY, 0..16),
        ) {
            let count: usize = dims.iter().product::<u64>() as usize;
            let mut vals: Vec<Complex64> =
                res.iter().map(|&r| Complex64::new(r, -r)).collect();
            vals.resize(count, Complex64::new(0.0, 0.0));
            let t = Tensor::new(dims, TensorData::Complex128(vals)).unwrap();
            let path = tmpfile("pc128.t");
            write_tensor(&path, &t).unwrap();
            let back = read_tensor(&path).unwrap();
            match (back.data(), t.data()) {
                (TensorData::Complex128(a), TensorData::Complex128(b)) => {
                    for (x, y) in a.iter().zip(b.iter()) {
                        prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
                        prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
                    }
                }
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn roundtrip_real32_and_complex64(
            dims in proptest::collection::vec(1u64..4, 1..=4),
            res in proptest::collection::vec(proptest::num::f32::ANY, 0..16),
        ) {
            let count: usize = dims.iter().product::<u64>() as usize;
            let mut vals = res.clone();
            vals.resize(count, 0.5f32);
            let t = Tensor::from_f32(dims.clone(), vals.clone()).unwrap();
            let path = tmpfile("p32.t");
            write_tensor(&path, &t).unwrap();
            let back = read_tensor(&path).unwrap();
            match back.data() {
                TensorData::Real32(a) => {
                    for (x, y) in a.iter().zip(vals.iter()) {
                        prop_assert_eq!(x.to_bits(), y.to_bits());
                    }
                }
                _ => prop_assert!(false),
            }

            let zvals: Vec<Complex32> = vals.iter().map(|&r| Complex32::new(r, 1.0 - r)).collect();
            let t = Tensor::new(dims, TensorData::Complex64(zvals.clone())).unwrap();
            let path = tmpfile("pc64.t");
            write_tensor(&path, &t).unwrap();
            let back = read_tensor(&path).unwrap();
            match back.data() {
                TensorData::Complex64(a) => {
                    for (x, y) in a.iter().zip(zvals.iter()) {
                        prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
                        prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
                    }
                }
                _ => prop_assert!(false),
            }
        }
    }
}
