//! Observation matrices and cluster label vectors.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Index;

use crate::error::{Error, Result};

/// Shape of matrix-valued observations. Cell `(j1, j2)` (1-based) is stored in
/// column `(j1 - 1) * p2 + (j2 - 1)` of the flattened row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridShape {
    pub p1: usize,
    pub p2: usize,
}

impl GridShape {
    pub const fn new(p1: usize, p2: usize) -> Self {
        Self { p1, p2 }
    }

    pub const fn len(&self) -> usize {
        self.p1 * self.p2
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 0-based flat column of the 1-based cell `(j1, j2)`.
    #[inline]
    pub const fn column(&self, j1: usize, j2: usize) -> usize {
        (j1 - 1) * self.p2 + (j2 - 1)
    }
}

/// `n x p` row-major matrix of observations (rows) by variables (columns),
/// optionally tagged with a grid shape when every row is a flattened
/// `p1 x p2` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    grid: Option<GridShape>,
}

impl DataMatrix {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::input(format!("empty matrix ({n} x {p})")));
        }
        if values.len() != n * p {
            return Err(Error::input(format!(
                "expected {} values for a {n} x {p} matrix, got {}",
                n * p,
                values.len()
            )));
        }
        Ok(Self { n, p, values, grid: None })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(n * p);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != p {
                return Err(Error::input(format!(
                    "row {} has {} entries, expected {p}",
                    i + 1,
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(n, p, values)
    }

    pub fn zeros(n: usize, p: usize) -> Result<Self> {
        Self::new(n, p, alloc::vec![0.0; n * p])
    }

    /// Attaches a grid shape; `p1 * p2` must equal the column count.
    pub fn with_grid(mut self, shape: GridShape) -> Result<Self> {
        if shape.len() != self.p || shape.p1 == 0 || shape.p2 == 0 {
            return Err(Error::input(format!(
                "grid {}x{} inconsistent with {} columns",
                shape.p1, shape.p2, self.p
            )));
        }
        self.grid = Some(shape);
        Ok(self)
    }

    pub fn without_grid(mut self) -> Self {
        self.grid = None;
        self
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn grid(&self) -> Option<GridShape> {
        self.grid
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.p)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(Error::input(format!(
                "non-finite entry at row {}, column {}",
                k / self.p + 1,
                k % self.p + 1
            ))),
        }
    }

    /// Keeps the listed columns (0-based) in the given order. Grid metadata
    /// is dropped.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.p) {
            return Err(Error::input(format!("column {bad} out of range")));
        }
        let mut values = Vec::with_capacity(self.n * columns.len());
        for row in self.rows() {
            values.extend(columns.iter().map(|&c| row[c]));
        }
        Self::new(self.n, columns.len(), values)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }
}

/// Cluster labels in `{-1, +1}`. Two label vectors that differ by a global
/// sign flip describe the same partition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<i8>", into = "Vec<i8>"))]
pub struct LabelVector(Vec<i8>);

impl LabelVector {
    pub fn new(labels: Vec<i8>) -> Result<Self> {
        if let Some(k) = labels.iter().position(|&l| l != 1 && l != -1) {
            return Err(Error::input(format!(
                "label {} at position {} is not +1 or -1",
                labels[k],
                k + 1
            )));
        }
        Ok(Self(labels))
    }

    /// Entry-wise sign; exact zeros map to `+1`.
    pub fn from_signs(v: &[f64]) -> Self {
        Self(v.iter().map(|&x| if x < 0.0 { -1 } else { 1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = i8> + '_ {
        self.0.iter().copied()
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|&l| -l).collect())
    }

    /// Sizes of the `+1` and `-1` groups.
    pub fn group_sizes(&self) -> (usize, usize) {
        let plus = self.0.iter().filter(|&&l| l == 1).count();
        (plus, self.0.len() - plus)
    }

    /// Flips the vector if needed so the first entry is `+1`.
    pub fn canonical(&self) -> Self {
        match self.0.first() {
            Some(&-1) => self.flipped(),
            _ => self.clone(),
        }
    }
}

impl Index<usize> for LabelVector {
    type Output = i8;

    fn index(&self, i: usize) -> &i8 {
        &self.0[i]
    }
}

impl TryFrom<Vec<i8>> for LabelVector {
    type Error = Error;

    fn try_from(v: Vec<i8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LabelVector> for Vec<i8> {
    fn from(l: LabelVector) -> Self {
        l.0
    }
}
