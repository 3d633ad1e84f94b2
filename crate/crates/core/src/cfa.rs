//! Cross-block feature aggregation: a screen run before clustering that pairs
//! every candidate block with its most correlated distant partner, keeps the
//! blocks whose aggregated cross products are large, and clusters on the
//! aggregated features of the kept blocks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::block::{BlockSet, BlockSums, EnumerationMode, Region, SelectedBlock, TensorBlock};
use crate::data::{DataMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::numerics::{spectral_labels, GramMatrix};
use crate::stepdown::step_down;

pub const DEFAULT_THRESHOLD_SCALE: f64 = 6.0;
/// Threshold scale of the second attempt when the first screen is empty.
pub const FALLBACK_THRESHOLD_SCALE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CfaConfig {
    /// Candidate blocks have length at most `h1 + 1` (per mode).
    pub h1: usize,
    /// Partners must avoid the candidate expanded by `h2`.
    pub h2: usize,
    /// `s` in the screening threshold `sqrt(s * ln(p * h1))`.
    pub threshold_scale: f64,
    pub enumeration: EnumerationMode,
    pub min_len: usize,
}

impl CfaConfig {
    pub fn new(h1: usize, h2: usize) -> Self {
        Self {
            h1,
            h2,
            threshold_scale: DEFAULT_THRESHOLD_SCALE,
            enumeration: EnumerationMode::Auto,
            min_len: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h1 < 1 {
            return Err(Error::config("h1 must be at least 1"));
        }
        if self.h2 < self.h1 {
            return Err(Error::config(format!(
                "h2 = {} must be at least h1 = {}",
                self.h2, self.h1
            )));
        }
        if !(self.threshold_scale > 0.0) || !self.threshold_scale.is_finite() {
            return Err(Error::config("threshold scale must be positive"));
        }
        Ok(())
    }

    /// `sqrt(threshold_scale * ln(p * h1))` for total dimension `p`.
    pub fn threshold(&self, p: usize) -> f64 {
        libm::sqrt(self.threshold_scale * libm::log((p * self.h1) as f64))
    }
}

/// A candidate block, its best admissible partner and the cross statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CfaCandidate<R> {
    pub block: R,
    pub partner: R,
    /// `n^{-1/2} sum_i X_i(block) X_i(partner)`.
    pub w0: f64,
    /// Square root of `n^{-1} (sum_i W_i^2 - w0^2)`.
    pub sigma_w: f64,
    /// `|w0| / sigma_w`; `+inf` when `sigma_w = 0 < |w0|`, `0` when both vanish.
    pub standardized: f64,
}

/// Aggregates `X_i(I_k)` stored observation-major (`values[i * stride + k]`)
/// with the candidate axis padded to a multiple of 4 by zeros.
pub(crate) struct Aggregates {
    pub stride: usize,
    pub values: Vec<f64>,
}

impl Aggregates {
    pub fn new<R: Region>(sums: &R::Sums, regions: &[R]) -> Self {
        let n = sums.n();
        let stride = regions.len().div_ceil(4) * 4;
        let mut values = vec![0.0; n * stride];
        for (k, r) in regions.iter().enumerate() {
            let scale = 1.0 / libm::sqrt(r.size() as f64);
            for i in 0..n {
                values[i * stride + k] = sums.sum(i, r) * scale;
            }
        }
        Self { stride, values }
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.stride + k]
    }
}

#[derive(Debug, Clone, Copy)]
struct Best {
    abs: f64,
    dot: f64,
    idx: usize,
}

const NONE: Best = Best { abs: -1.0, dot: 0.0, idx: usize::MAX };

impl Best {
    /// Larger magnitude wins; equal magnitudes go to the lower index.
    #[inline]
    fn beaten_by(&self, abs: f64, idx: usize) -> bool {
        abs > self.abs || (abs == self.abs && idx < self.idx)
    }

    #[cfg(feature = "rayon")]
    fn merge(self, other: Best) -> Best {
        if self.beaten_by(other.abs, other.idx) {
            other
        } else {
            self
        }
    }
}

/// Inner products of candidates `a..a + 4` with `b..b + 4`.
#[inline]
fn tile(agg: &Aggregates, a: usize, b: usize) -> [[f64; 4]; 4] {
    let mut acc = [[0.0f64; 4]; 4];
    for row in agg.values.chunks_exact(agg.stride) {
        let x: &[f64; 4] = row[a..a + 4].try_into().expect("padded");
        let y: &[f64; 4] = row[b..b + 4].try_into().expect("padded");
        for r in 0..4 {
            for c in 0..4 {
                acc[r][c] += x[r] * y[c];
            }
        }
    }
    acc
}

/// Scans all pairs of candidates in the tile row starting at `a`. `best` has
/// one entry per padded candidate; padding entries hold an infinite score so
/// they never take part.
fn scan_tile_row<R: Region>(
    agg: &Aggregates,
    regions: &[R],
    expanded: &[R],
    a: usize,
    best: &mut [Best],
) {
    let count = regions.len();
    for b in (a..agg.stride).step_by(4) {
        let d = tile(agg, a, b);
        let floor = best[a..a + 4]
            .iter()
            .chain(&best[b..b + 4])
            .fold(f64::INFINITY, |m, x| m.min(x.abs));
        let top = d.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if top < floor {
            continue;
        }
        for (r, row) in d.iter().enumerate() {
            let i = a + r;
            if i >= count {
                break;
            }
            for (c, &v) in row.iter().enumerate() {
                let j = b + c;
                if j >= count {
                    break;
                }
                if j <= i {
                    continue;
                }
                let av = v.abs();
                let up_i = best[i].beaten_by(av, j);
                let up_j = best[j].beaten_by(av, i);
                if (up_i || up_j) && !regions[j].intersects(&expanded[i]) {
                    if up_i {
                        best[i] = Best { abs: av, dot: v, idx: j };
                    }
                    if up_j {
                        best[j] = Best { abs: av, dot: v, idx: i };
                    }
                }
            }
        }
    }
}

fn initial_best(count: usize, stride: usize) -> Vec<Best> {
    let mut best = vec![NONE; stride];
    best[count..].iter_mut().for_each(|b| b.abs = f64::INFINITY);
    best
}

#[cfg(not(feature = "rayon"))]
fn best_partners<R: Region>(agg: &Aggregates, regions: &[R], expanded: &[R]) -> Vec<Best> {
    let mut best = initial_best(regions.len(), agg.stride);
    for a in (0..regions.len()).step_by(4) {
        scan_tile_row(agg, regions, expanded, a, &mut best);
    }
    best.truncate(regions.len());
    best
}

#[cfg(feature = "rayon")]
fn best_partners<R: Region>(agg: &Aggregates, regions: &[R], expanded: &[R]) -> Vec<Best> {
    use rayon::prelude::*;
    let (count, stride) = (regions.len(), agg.stride);
    let tiles: Vec<usize> = (0..count).step_by(4).collect();
    let mut best = tiles
        .par_iter()
        .fold(
            || initial_best(count, stride),
            |mut best, &a| {
                scan_tile_row(agg, regions, expanded, a, &mut best);
                best
            },
        )
        .reduce(
            || initial_best(count, stride),
            |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
        );
    best.truncate(count);
    best
}

/// For every candidate block, finds the admissible partner maximizing the
/// absolute aggregated cross product and records the standardized statistic.
///
/// A partner is admissible when it misses the candidate expanded by `h2`.
/// Ties go to the partner that comes first in block order.
pub fn cross_scan<R: Region>(x: &DataMatrix, cfg: &CfaConfig) -> Result<Vec<CfaCandidate<R>>> {
    cfg.validate()?;
    x.ensure_finite()?;
    let n = x.n();
    if n < 3 {
        return Err(Error::input(format!("cross scan needs n >= 3, got {n}")));
    }
    let dims = R::dims_of(x)?;
    let regions = R::enumerate(dims, cfg.h1, cfg.min_len, cfg.enumeration)?;
    let sums = R::build_sums(x, dims)?;
    let agg = Aggregates::new::<R>(&sums, &regions);
    let expanded: Vec<R> = regions.iter().map(|r| r.expand(cfg.h2, dims)).collect();
    let best = best_partners(&agg, &regions, &expanded);

    let root_n = libm::sqrt(n as f64);
    let mut out = Vec::with_capacity(regions.len());
    for (k, b) in best.iter().enumerate() {
        if b.idx == usize::MAX {
            return Err(Error::config(format!(
                "block {} has no partner outside its h2 = {} expansion",
                regions[k], cfg.h2
            )));
        }
        let sum_sq: f64 = (0..n)
            .map(|i| {
                let w = agg.get(i, k) * agg.get(i, b.idx);
                w * w
            })
            .sum();
        let w0 = b.dot / root_n;
        let sigma_w = libm::sqrt(((sum_sq - w0 * w0) / n as f64).max(0.0));
        out.push(CfaCandidate {
            block: regions[k],
            partner: regions[b.idx],
            w0,
            sigma_w,
            standardized: standardize(w0, sigma_w),
        });
    }
    Ok(out)
}

pub(crate) fn standardize(stat: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        stat.abs() / sigma
    } else if stat != 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Step-down selection over the candidates whose standardized statistic
/// exceeds the threshold, ranked by `|w0|`, removing neighbours within
/// `floor(h1 / 2)` of each pick.
pub fn cfa_select<R: Region>(
    cands: &[CfaCandidate<R>],
    dims: R::Dims,
    cfg: &CfaConfig,
) -> BlockSet<R> {
    let t = cfg.threshold(R::total_dim(dims));
    let regions: Vec<R> = cands.iter().map(|c| c.block).collect();
    let rank: Vec<f64> = cands.iter().map(|c| c.w0.abs()).collect();
    let passes: Vec<bool> = cands.iter().map(|c| c.standardized > t).collect();
    let chosen = step_down(&regions, &rank, &passes, cfg.h1 / 2, dims);
    BlockSet {
        blocks: chosen
            .into_iter()
            .map(|k| {
                let c = &cands[k];
                SelectedBlock {
                    block: c.block,
                    statistic: c.w0,
                    standardized: c.standardized,
                    sigma: c.sigma_w,
                    partner: Some(c.partner),
                }
            })
            .collect(),
    }
}

/// `n x m` matrix whose column `k` is the sum of `x` over block `k` divided by
/// the square root of its size.
pub fn aggregated_features<R: Region>(x: &DataMatrix, blocks: &[R]) -> Result<DataMatrix> {
    let dims = R::dims_of(x)?;
    if let Some(b) = blocks.iter().find(|b| !b.within(dims)) {
        return Err(Error::input(format!("block {b} outside the data")));
    }
    let m = blocks.len();
    let mut values = vec![0.0; x.n() * m];
    for (k, b) in blocks.iter().enumerate() {
        let scale = 1.0 / libm::sqrt(b.size() as f64);
        for i in 0..x.n() {
            let row = x.row(i);
            let mut s = 0.0;
            b.for_each_column(dims, |c| s += row[c]);
            values[i * m + k] = s * scale;
        }
    }
    DataMatrix::new(x.n(), m, values)
}

/// Labels from the leading eigenvector of `Y Y^T`, `Y` the aggregated
/// features of the selected blocks.
pub fn cfa_pca<R: Region>(x: &DataMatrix, blocks: &BlockSet<R>) -> Result<LabelVector> {
    if blocks.is_empty() {
        return Err(Error::NoFeaturesSelected);
    }
    x.ensure_finite()?;
    let y = aggregated_features(x, &blocks.regions())?;
    spectral_labels(&GramMatrix::from_data(&y))
}

/// Which route produced the labels of [`cfa_pipeline_with_fallback`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CfaPath {
    Screen,
    /// The screen at the configured scale was empty; it was repeated with
    /// [`FALLBACK_THRESHOLD_SCALE`].
    LoweredThreshold,
    /// Both screens were empty; labels come from moving-average PCA.
    MovingAverage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfaOutcome<R> {
    pub blocks: BlockSet<R>,
    pub labels: LabelVector,
    pub path: CfaPath,
}

/// Screen, select and cluster. Fails with [`Error::NoFeaturesSelected`] when
/// the screen is empty.
pub fn cfa_pipeline<R: Region>(
    x: &DataMatrix,
    cfg: &CfaConfig,
) -> Result<CfaOutcome<R>> {
    let dims = R::dims_of(x)?;
    let cands = cross_scan::<R>(x, cfg)?;
    let blocks = cfa_select(&cands, dims, cfg);
    let labels = cfa_pca(x, &blocks)?;
    Ok(CfaOutcome { blocks, labels, path: CfaPath::Screen })
}

pub fn cfa_pipeline_2d(x: &DataMatrix, cfg: &CfaConfig) -> Result<CfaOutcome<TensorBlock>> {
    cfa_pipeline(x, cfg)
}

/// Like [`cfa_pipeline`], but an empty screen is retried at a lower
/// threshold and then replaced by moving-average PCA with window `ma_h3`.
pub fn cfa_pipeline_with_fallback<R: Region>(
    x: &DataMatrix,
    cfg: &CfaConfig,
    ma_h3: usize,
) -> Result<CfaOutcome<R>> {
    let dims = R::dims_of(x)?;
    let cands = cross_scan::<R>(x, cfg)?;
    let blocks = cfa_select(&cands, dims, cfg);
    if !blocks.is_empty() {
        let labels = cfa_pca(x, &blocks)?;
        return Ok(CfaOutcome { blocks, labels, path: CfaPath::Screen });
    }
    if cfg.threshold_scale > FALLBACK_THRESHOLD_SCALE {
        let lowered = CfaConfig { threshold_scale: FALLBACK_THRESHOLD_SCALE, ..*cfg };
        let blocks = cfa_select(&cands, dims, &lowered);
        if !blocks.is_empty() {
            let labels = cfa_pca(x, &blocks)?;
            return Ok(CfaOutcome { blocks, labels, path: CfaPath::LoweredThreshold });
        }
    }
    let labels = R::ma_pca(x, ma_h3)?;
    Ok(CfaOutcome { blocks: BlockSet::default(), labels, path: CfaPath::MovingAverage })
}
