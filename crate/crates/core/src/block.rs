//! Contiguous blocks of coordinates and the operations the scans need on
//! them: enumeration of candidate blocks, expansion, overlap and the set
//! dissimilarity `D(I1, I2) = 1 - |I1 ∩ I2| / sqrt(|I1| |I2|)`.
//!
//! All indices are 1-based and inclusive.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::data::{DataMatrix, GridShape, LabelVector};
use crate::error::{Error, Result};
use crate::numerics::{spectral_labels, GramMatrix, PrefixSumTable, SummedAreaTable};

/// Candidate counts above this switch [`EnumerationMode::Auto`] to dyadic.
pub const AUTO_DYADIC_THRESHOLD: usize = 20_000;

/// `{start, ..., end}` within `{1, ..., p}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Block {
    pub start: usize,
    pub end: usize,
}

impl Block {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start == 0 || start > end {
            return Err(Error::input(format!("invalid block {start}..={end}")));
        }
        Ok(Self { start, end })
    }

    /// Singleton `{j}`.
    pub fn at(j: usize) -> Result<Self> {
        Self::new(j, j)
    }

    #[inline]
    pub const fn len(&self) -> usize {
        self.end - self.start + 1
    }

    #[inline]
    pub const fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn within(&self, p: usize) -> bool {
        self.start >= 1 && self.end <= p
    }

    #[inline]
    pub fn contains(&self, j: usize) -> bool {
        self.start <= j && j <= self.end
    }

    #[inline]
    pub fn overlap(&self, other: &Block) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        if lo > hi {
            0
        } else {
            hi - lo + 1
        }
    }

    #[inline]
    pub fn intersects(&self, other: &Block) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    /// `{start - c, ..., end + c} ∩ {1, ..., p}`.
    pub fn expand(&self, c: usize, p: usize) -> Block {
        Block {
            start: self.start.saturating_sub(c).max(1),
            end: (self.end + c).min(p),
        }
    }

    pub fn indices(&self) -> core::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// Product of one [`Block`] per grid mode: rows `modes[0]` of a `p1 x p2`
/// grid crossed with columns `modes[1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TensorBlock(pub [Block; 2]);

impl TensorBlock {
    pub fn new(rows: Block, cols: Block) -> Self {
        Self([rows, cols])
    }

    pub fn rows(&self) -> Block {
        self.0[0]
    }

    pub fn cols(&self) -> Block {
        self.0[1]
    }

    pub fn len(&self) -> usize {
        self.0[0].len() * self.0[1].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for TensorBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.0[0], self.0[1])
    }
}

/// How candidate blocks are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EnumerationMode {
    /// Every block with length in `[min_len, h1 + 1]`.
    Full,
    /// Power-of-two lengths in `[min_len, h1 + 1]` at stride `max(1, len / 2)`.
    Dyadic,
    /// Full unless it would produce more than [`AUTO_DYADIC_THRESHOLD`]
    /// candidates.
    #[default]
    Auto,
}

/// Per-observation block sums in O(1).
pub trait BlockSums<R> {
    fn n(&self) -> usize;

    /// Raw sum of observation `i` over `region`. The region must lie inside
    /// the data's dimensions.
    fn sum(&self, i: usize, region: &R) -> f64;
}

impl BlockSums<Block> for PrefixSumTable {
    fn n(&self) -> usize {
        PrefixSumTable::n(self)
    }

    #[inline]
    fn sum(&self, i: usize, b: &Block) -> f64 {
        self.range_sum(i, b.start, b.end)
    }
}

impl BlockSums<TensorBlock> for SummedAreaTable {
    fn n(&self) -> usize {
        SummedAreaTable::n(self)
    }

    #[inline]
    fn sum(&self, i: usize, b: &TensorBlock) -> f64 {
        let [r, c] = b.0;
        self.box_sum(i, r.start, r.end, c.start, c.end)
    }
}

/// The block shapes the scans are generic over: [`Block`] on a line of `p`
/// variables and [`TensorBlock`] on a `p1 x p2` grid.
pub trait Region: Copy + Ord + Send + Sync + fmt::Debug + fmt::Display {
    type Dims: Copy + fmt::Debug + PartialEq;
    type Sums: BlockSums<Self>;

    /// Dimensions of `x` in this layout; errors if `x` lacks them.
    fn dims_of(x: &DataMatrix) -> Result<Self::Dims>;
    fn total_dim(dims: Self::Dims) -> usize;
    fn build_sums(x: &DataMatrix, dims: Self::Dims) -> Result<Self::Sums>;
    fn enumerate(
        dims: Self::Dims,
        h1: usize,
        min_len: usize,
        mode: EnumerationMode,
    ) -> Result<Vec<Self>>;
    fn size(&self) -> usize;
    fn overlap(&self, other: &Self) -> usize;
    fn intersects(&self, other: &Self) -> bool;
    fn expand(&self, c: usize, dims: Self::Dims) -> Self;
    fn within(&self, dims: Self::Dims) -> bool;
    /// Calls `f` with the 0-based flattened column of every covered cell.
    fn for_each_column(&self, dims: Self::Dims, f: impl FnMut(usize));

    /// Moving averages of `x` over windows of `h3` per mode.
    fn moving_average(x: &DataMatrix, h3: usize) -> Result<DataMatrix>;

    /// Moving-average PCA labels for this layout.
    fn ma_pca(x: &DataMatrix, h3: usize) -> Result<LabelVector> {
        let y = Self::moving_average(x, h3)?;
        spectral_labels(&GramMatrix::from_data(&y))
    }
}

impl Region for Block {
    type Dims = usize;
    type Sums = PrefixSumTable;

    fn dims_of(x: &DataMatrix) -> Result<usize> {
        Ok(x.p())
    }

    fn total_dim(p: usize) -> usize {
        p
    }

    fn build_sums(x: &DataMatrix, _: usize) -> Result<PrefixSumTable> {
        Ok(PrefixSumTable::new(x))
    }

    fn enumerate(p: usize, h1: usize, min_len: usize, mode: EnumerationMode) -> Result<Vec<Self>> {
        enumerate_blocks(p, h1, min_len, mode)
    }

    fn size(&self) -> usize {
        self.len()
    }

    fn overlap(&self, other: &Self) -> usize {
        Block::overlap(self, other)
    }

    fn intersects(&self, other: &Self) -> bool {
        Block::intersects(self, other)
    }

    fn expand(&self, c: usize, p: usize) -> Self {
        Block::expand(self, c, p)
    }

    fn within(&self, p: usize) -> bool {
        Block::within(self, p)
    }

    fn for_each_column(&self, _: usize, f: impl FnMut(usize)) {
        (self.start - 1..self.end).for_each(f);
    }

    fn moving_average(x: &DataMatrix, h3: usize) -> Result<DataMatrix> {
        crate::ma::moving_average_matrix(x, h3)
    }
}

impl Region for TensorBlock {
    type Dims = GridShape;
    type Sums = SummedAreaTable;

    fn dims_of(x: &DataMatrix) -> Result<GridShape> {
        x.grid()
            .ok_or_else(|| Error::input("matrix-valued method needs grid metadata"))
    }

    fn total_dim(g: GridShape) -> usize {
        g.len()
    }

    fn build_sums(x: &DataMatrix, g: GridShape) -> Result<SummedAreaTable> {
        SummedAreaTable::new(x, g)
    }

    fn enumerate(
        g: GridShape,
        h1: usize,
        min_len: usize,
        mode: EnumerationMode,
    ) -> Result<Vec<Self>> {
        enumerate_tensor_blocks(g, h1, min_len, mode)
    }

    fn size(&self) -> usize {
        self.len()
    }

    fn overlap(&self, other: &Self) -> usize {
        self.0[0].overlap(&other.0[0]) * self.0[1].overlap(&other.0[1])
    }

    fn intersects(&self, other: &Self) -> bool {
        self.0[0].intersects(&other.0[0]) && self.0[1].intersects(&other.0[1])
    }

    fn expand(&self, c: usize, g: GridShape) -> Self {
        TensorBlock([self.0[0].expand(c, g.p1), self.0[1].expand(c, g.p2)])
    }

    fn within(&self, g: GridShape) -> bool {
        self.0[0].within(g.p1) && self.0[1].within(g.p2)
    }

    fn for_each_column(&self, g: GridShape, mut f: impl FnMut(usize)) {
        for a in self.0[0].indices() {
            for b in self.0[1].indices() {
                f(g.column(a, b));
            }
        }
    }

    fn moving_average(x: &DataMatrix, h3: usize) -> Result<DataMatrix> {
        crate::ma::moving_average_matrix_2d(x, h3)
    }
}

fn check_window(p: usize, h1: usize, min_len: usize) -> Result<()> {
    if h1 < 1 {
        return Err(Error::input("window h1 must be at least 1"));
    }
    if h1 > p {
        return Err(Error::input(format!("window h1 = {h1} exceeds dimension {p}")));
    }
    if min_len < 1 || min_len > h1 + 1 {
        return Err(Error::input(format!(
            "minimum block length {min_len} outside [1, {}]",
            h1 + 1
        )));
    }
    Ok(())
}

/// Number of blocks [`EnumerationMode::Full`] produces.
pub fn full_count(p: usize, h1: usize, min_len: usize) -> usize {
    (min_len..=h1 + 1).map(|len| (p + 1).saturating_sub(len)).sum()
}

fn dyadic_lengths(h1: usize, min_len: usize) -> impl Iterator<Item = usize> {
    core::iter::successors(Some(1usize), |l| l.checked_mul(2))
        .take_while(move |&l| l <= h1 + 1)
        .filter(move |&l| l >= min_len)
}

/// Candidate blocks `{j, ..., j + h}` with `min_len - 1 <= h <= h1`, sorted by
/// start and then length.
pub fn enumerate_blocks(
    p: usize,
    h1: usize,
    min_len: usize,
    mode: EnumerationMode,
) -> Result<Vec<Block>> {
    check_window(p, h1, min_len)?;
    let mode = match mode {
        EnumerationMode::Auto if full_count(p, h1, min_len) > AUTO_DYADIC_THRESHOLD => {
            EnumerationMode::Dyadic
        }
        EnumerationMode::Auto => EnumerationMode::Full,
        m => m,
    };
    Ok(enumerate_resolved(p, h1, min_len, mode))
}

fn enumerate_resolved(p: usize, h1: usize, min_len: usize, mode: EnumerationMode) -> Vec<Block> {
    let mut out = Vec::new();
    match mode {
        EnumerationMode::Dyadic => {
            for len in dyadic_lengths(h1, min_len) {
                let stride = (len / 2).max(1);
                let mut start = 1;
                while start + len - 1 <= p {
                    out.push(Block { start, end: start + len - 1 });
                    start += stride;
                }
            }
            out.sort_unstable();
        }
        _ => {
            for start in 1..=p {
                for len in min_len..=h1 + 1 {
                    let end = start + len - 1;
                    if end > p {
                        break;
                    }
                    out.push(Block { start, end });
                }
            }
        }
    }
    out
}

/// Cartesian product of the per-mode enumerations. In `Auto` mode the switch
/// to dyadic is decided on the product count.
pub fn enumerate_tensor_blocks(
    g: GridShape,
    h1: usize,
    min_len: usize,
    mode: EnumerationMode,
) -> Result<Vec<TensorBlock>> {
    check_window(g.p1, h1, min_len)?;
    check_window(g.p2, h1, min_len)?;
    let mode = match mode {
        EnumerationMode::Auto
            if full_count(g.p1, h1, min_len) * full_count(g.p2, h1, min_len)
                > AUTO_DYADIC_THRESHOLD =>
        {
            EnumerationMode::Dyadic
        }
        EnumerationMode::Auto => EnumerationMode::Full,
        m => m,
    };
    let rows = enumerate_resolved(g.p1, h1, min_len, mode);
    let cols = enumerate_resolved(g.p2, h1, min_len, mode);
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for r in &rows {
        for c in &cols {
            out.push(TensorBlock([*r, *c]));
        }
    }
    Ok(out)
}

/// `1 - |a ∩ b| / sqrt(|a| |b|)`, in `[0, 1]`.
pub fn dissimilarity<R: Region>(a: &R, b: &R) -> f64 {
    let inter = a.overlap(b) as f64;
    1.0 - inter / libm::sqrt(a.size() as f64 * b.size() as f64)
}

/// `max over truth of min over est of D`; `1` when `est` is empty.
pub fn maxmin_dissimilarity<R: Region>(truth: &[R], est: &[R]) -> f64 {
    if est.is_empty() {
        return 1.0;
    }
    truth
        .iter()
        .map(|t| {
            est.iter()
                .map(|e| dissimilarity(e, t))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// A block chosen by a step-down selection, with the statistics it was
/// chosen on.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectedBlock<R> {
    pub block: R,
    /// Signed statistic the selection ranked on by absolute value.
    pub statistic: f64,
    /// Statistic divided by its estimated standard deviation.
    pub standardized: f64,
    /// Estimated standard deviation used for standardization.
    pub sigma: f64,
    /// Partner block of a cross-block screen; `None` for the post-clustering
    /// scan.
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub partner: Option<R>,
}

/// Blocks in selection order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockSet<R> {
    pub blocks: Vec<SelectedBlock<R>>,
}

impl<R> Default for BlockSet<R> {
    fn default() -> Self {
        Self { blocks: Vec::new() }
    }
}

impl<R: Region> BlockSet<R> {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn regions(&self) -> Vec<R> {
        self.blocks.iter().map(|b| b.block).collect()
    }

    /// Sorted, deduplicated 1-based flattened indices covered by the blocks.
    pub fn signal_set(&self, dims: R::Dims) -> Vec<usize> {
        let mut out = Vec::new();
        for b in &self.blocks {
            b.block.for_each_column(dims, |c| out.push(c + 1));
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn b(s: usize, e: usize) -> Block {
        Block::new(s, e).unwrap()
    }

    #[test]
    fn expand_clamps_both_ends() {
        assert_eq!(b(3, 5).expand(2, 10), b(1, 7));
        assert_eq!(b(1, 2).expand(3, 10), b(1, 5));
        assert_eq!(b(8, 10).expand(5, 10), b(3, 10));
        assert_eq!(b(4, 6).expand(0, 10), b(4, 6));
    }

    #[test]
    fn dissimilarity_basics() {
        assert_eq!(dissimilarity(&b(1, 2), &b(1, 2)), 0.0);
        assert_eq!(dissimilarity(&b(1, 2), &b(4, 5)), 1.0);
        assert!((dissimilarity(&b(1, 2), &b(2, 3)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn maxmin_examples() {
        let truth = [b(1, 4), b(10, 13)];
        assert_eq!(maxmin_dissimilarity(&truth, &truth), 0.0);
        assert_eq!(maxmin_dissimilarity::<Block>(&truth, &[]), 1.0);
        let est = [b(1, 4), b(11, 14)];
        assert!((maxmin_dissimilarity(&truth, &est) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn window_of_two_on_four_columns() {
        // lengths 2 and 3
        let got = enumerate_blocks(4, 2, 2, EnumerationMode::Full).unwrap();
        assert_eq!(got, vec![b(1, 2), b(1, 3), b(2, 3), b(2, 4), b(3, 4)]);
    }

    #[test]
    fn full_count_example() {
        assert_eq!(enumerate_blocks(5, 4, 2, EnumerationMode::Full).unwrap().len(), 10);
    }

    #[test]
    fn singletons_only_with_min_len_one() {
        let got = enumerate_blocks(3, 1, 1, EnumerationMode::Full).unwrap();
        assert_eq!(got, vec![b(1, 1), b(1, 2), b(2, 2), b(2, 3), b(3, 3)]);
    }

    #[test]
    fn window_validation() {
        assert!(enumerate_blocks(5, 0, 2, EnumerationMode::Full).is_err());
        assert!(enumerate_blocks(5, 6, 2, EnumerationMode::Full).is_err());
        assert!(enumerate_blocks(5, 2, 4, EnumerationMode::Full).is_err());
    }

    #[test]
    fn auto_switches_on_count() {
        let full = enumerate_blocks(100, 4, 2, EnumerationMode::Auto).unwrap();
        assert_eq!(full.len(), full_count(100, 4, 2));
        let big = enumerate_blocks(10_000, 4, 2, EnumerationMode::Auto).unwrap();
        assert!(big.len() < full_count(10_000, 4, 2));
    }

    #[test]
    fn tensor_overlap_and_expand() {
        let a = TensorBlock::new(b(1, 2), b(1, 3));
        let c = TensorBlock::new(b(2, 3), b(3, 4));
        assert_eq!(a.overlap(&c), 1);
        assert!(a.intersects(&c));
        let g = GridShape::new(5, 5);
        assert_eq!(a.expand(1, g), TensorBlock::new(b(1, 3), b(1, 4)));
        let mut cols = Vec::new();
        a.for_each_column(g, |k| cols.push(k));
        assert_eq!(cols, vec![0, 1, 2, 5, 6, 7]);
    }

    #[test]
    fn signal_set_is_sorted_union() {
        let set = BlockSet {
            blocks: vec![
                SelectedBlock { block: b(5, 6), statistic: 1.0, standardized: 1.0, sigma: 1.0, partner: None },
                SelectedBlock { block: b(1, 2), statistic: 1.0, standardized: 1.0, sigma: 1.0, partner: None },
            ],
        };
        assert_eq!(set.signal_set(10), vec![1, 2, 5, 6]);
    }
}
