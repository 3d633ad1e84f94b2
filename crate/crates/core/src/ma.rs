//! Column-wise moving averages and PCA on them.

use alloc::format;
use alloc::vec::Vec;

use crate::data::{DataMatrix, GridShape, LabelVector};
use crate::error::{Error, Result};
use crate::numerics::{spectral_labels, GramMatrix, PrefixSumTable, SummedAreaTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaConfig {
    pub h3: usize,
}

impl MaConfig {
    pub fn new(h3: usize) -> Self {
        Self { h3 }
    }
}

/// `n x (p - h3 + 1)` matrix with column `g` equal to
/// `h3^{-1/2} (X_g + ... + X_{g + h3 - 1})`. `h3 = 1` returns a copy of `x`.
pub fn moving_average_matrix(x: &DataMatrix, h3: usize) -> Result<DataMatrix> {
    let p = x.p();
    if h3 == 0 || h3 > p {
        return Err(Error::input(format!("window h3 = {h3} outside [1, {p}]")));
    }
    if h3 == 1 {
        return Ok(x.clone().without_grid());
    }
    let width = p - h3 + 1;
    let table = PrefixSumTable::new(x);
    let scale = 1.0 / libm::sqrt(h3 as f64);
    let mut values = Vec::with_capacity(x.n() * width);
    for i in 0..x.n() {
        values.extend((1..=width).map(|g| table.range_sum(i, g, g + h3 - 1) * scale));
    }
    DataMatrix::new(x.n(), width, values)
}

/// Square-window analogue on grid data: every `h3 x h3` window sum scaled by
/// `1 / h3`, laid out on a `(p1 - h3 + 1) x (p2 - h3 + 1)` grid.
pub fn moving_average_matrix_2d(x: &DataMatrix, h3: usize) -> Result<DataMatrix> {
    let g = x
        .grid()
        .ok_or_else(|| Error::input("matrix-valued method needs grid metadata"))?;
    if h3 == 0 || h3 > g.p1.min(g.p2) {
        return Err(Error::input(format!(
            "window h3 = {h3} outside [1, {}]",
            g.p1.min(g.p2)
        )));
    }
    if h3 == 1 {
        return Ok(x.clone());
    }
    let out = GridShape::new(g.p1 - h3 + 1, g.p2 - h3 + 1);
    let table = SummedAreaTable::new(x, g)?;
    let scale = 1.0 / h3 as f64;
    let mut values = Vec::with_capacity(x.n() * out.len());
    for i in 0..x.n() {
        for a in 1..=out.p1 {
            for b in 1..=out.p2 {
                values.push(table.box_sum(i, a, a + h3 - 1, b, b + h3 - 1) * scale);
            }
        }
    }
    DataMatrix::new(x.n(), out.len(), values)?.with_grid(out)
}

fn check_n(x: &DataMatrix) -> Result<()> {
    if x.n() < 2 {
        return Err(Error::input(format!("need n >= 2, got {}", x.n())));
    }
    x.ensure_finite()
}

/// Signs of the leading eigenvector of `Y Y^T` for the moving-average matrix
/// `Y`.
pub fn ma_pca(x: &DataMatrix, cfg: &MaConfig) -> Result<LabelVector> {
    check_n(x)?;
    let y = moving_average_matrix(x, cfg.h3)?;
    spectral_labels(&GramMatrix::from_data(&y))
}

pub fn ma_pca_2d(x: &DataMatrix, h3: usize) -> Result<LabelVector> {
    check_n(x)?;
    let y = moving_average_matrix_2d(x, h3)?;
    spectral_labels(&GramMatrix::from_data(&y))
}
