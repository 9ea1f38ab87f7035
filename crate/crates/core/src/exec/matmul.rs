//! Cache-blocked complex matrix multiply: the single compute kernel behind
//! every decomposition stage.
//!
//! The kernel walks output tiles in a fixed row/column/inner order, so the
//! accumulation order — and therefore the output bit pattern — never depends
//! on tile configuration hints beyond the tile extents themselves, and never
//! on the thread that runs it. Accumulation is f64 in both precisions.

use num_complex::{Complex, Complex64};
use std::ops::Range;

use super::element::Element;
use super::stats::StatsCollector;
use super::ExecError;
use crate::dft::ComplexMatrix;

/// Blocking extents for the microkernel. The default mirrors a 16x16x16
/// multiply block; any positive extents are valid (partial tiles are handled).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockedMatmulConfig {
    pub tile_rows: usize,
    pub tile_cols: usize,
    pub tile_inner: usize,
}

impl Default for BlockedMatmulConfig {
    fn default() -> Self {
        BlockedMatmulConfig {
            tile_rows: 16,
            tile_cols: 16,
            tile_inner: 16,
        }
    }
}

impl BlockedMatmulConfig {
    pub fn validate(&self) -> Result<(), ExecError> {
        if self.tile_rows == 0 || self.tile_cols == 0 || self.tile_inner == 0 {
            return Err(ExecError::BadTileConfig);
        }
        Ok(())
    }
}

pub(crate) struct TileCounter<'a> {
    pub stats: Option<&'a StatsCollector>,
    pub core: bool,
}

impl TileCounter<'_> {
    #[inline]
    fn add(&self, tiles: u64) {
        if let Some(s) = self.stats {
            s.record_tiles(tiles, self.core);
        }
    }
}

/// `out[r][c] = sum_{q in inner} a[r][q] * b[q][c]` for `r in rows`,
/// `c in cols`. All matrices are row-major with `*_cols` as both width and
/// stride. Positions of `out` outside the written region are untouched.
#[allow(clippy::too_many_arguments)]
pub(crate) fn matmul_ranges<T: Element>(
    out: &mut [Complex<T>],
    out_cols: usize,
    a: &[Complex<T>],
    a_cols: usize,
    b: &[Complex<T>],
    b_cols: usize,
    rows: Range<usize>,
    cols: Range<usize>,
    inner: Range<usize>,
    cfg: &BlockedMatmulConfig,
    counter: &TileCounter<'_>,
) {
    if rows.is_empty() || cols.is_empty() {
        return;
    }
    let mut acc = vec![Complex64::new(0.0, 0.0); cfg.tile_rows * cfg.tile_cols];
    let mut tiles: u64 = 0;

    let mut rt = rows.start;
    while rt < rows.end {
        let r_end = (rt + cfg.tile_rows).min(rows.end);
        let mut ct = cols.start;
        while ct < cols.end {
            let c_end = (ct + cfg.tile_cols).min(cols.end);
            let width = c_end - ct;
            for v in acc[..(r_end - rt) * width].iter_mut() {
                *v = Complex64::new(0.0, 0.0);
            }
            let mut qt = inner.start;
            while qt < inner.end {
                let q_end = (qt + cfg.tile_inner).min(inner.end);
                tiles += 1;
                for r in rt..r_end {
                    let arow = r * a_cols;
                    let acc_row = (r - rt) * width;
                    for q in qt..q_end {
                        let av = T::c64(a[arow + q]);
                        let brow = q * b_cols;
                        for (o, bv) in acc[acc_row..acc_row + width]
                            .iter_mut()
                            .zip(b[brow + ct..brow + c_end].iter())
                        {
                            *o += av * T::c64(*bv);
                        }
                    }
                }
                qt = q_end;
            }
            for r in rt..r_end {
                let orow = r * out_cols;
                let acc_row = (r - rt) * width;
                for (dst, src) in out[orow + ct..orow + c_end]
                    .iter_mut()
                    .zip(acc[acc_row..acc_row + width].iter())
                {
                    *dst = T::from_c64(*src);
                }
            }
            ct = c_end;
        }
        rt = r_end;
    }
    counter.add(tiles);
}

/// Exact blocked complex matrix product with a fixed, deterministic
/// accumulation order.
pub fn blocked_matmul(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    cfg: &BlockedMatmulConfig,
) -> Result<ComplexMatrix, ExecError> {
    cfg.validate()?;
    if a.cols != b.rows {
        return Err(ExecError::MatmulShapeMismatch {
            a_rows: a.rows,
            a_cols: a.cols,
            b_rows: b.rows,
            b_cols: b.cols,
        });
    }
    let mut out = ComplexMatrix::zeros(a.rows, b.cols);
    matmul_ranges::<f64>(
        &mut out.entries,
        b.cols,
        &a.entries,
        a.cols,
        &b.entries,
        b.cols,
        0..a.rows,
        0..b.cols,
        0..a.cols,
        cfg,
        &TileCounter {
            stats: None,
            core: false,
        },
    );
    Ok(out)
}
