//! Block identification after clustering: scan label-aligned block means,
//! standardize by the pooled within-group spread and keep the significant
//! blocks by step-down selection.

use alloc::format;
use alloc::vec::Vec;

use crate::block::{BlockSet, BlockSums, EnumerationMode, Region, SelectedBlock, TensorBlock};
use crate::cfa::standardize;
use crate::data::{DataMatrix, LabelVector};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD_SCALE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecoveryConfig {
    /// Candidate blocks have length at most `h1 + 1` (per mode); selected
    /// blocks are kept `floor(h1 / 2)` apart.
    pub h1: usize,
    /// `s` in the threshold `sqrt(s * ln(p * h1))`.
    pub threshold_scale: f64,
    pub enumeration: EnumerationMode,
    pub min_len: usize,
}

impl RecoveryConfig {
    pub fn new(h1: usize) -> Self {
        Self {
            h1,
            threshold_scale: DEFAULT_THRESHOLD_SCALE,
            enumeration: EnumerationMode::Full,
            min_len: 2,
        }
    }

    /// `sqrt(threshold_scale * ln(p * h1))` for total dimension `p`.
    pub fn threshold(&self, p: usize) -> f64 {
        libm::sqrt(self.threshold_scale * libm::log((p * self.h1) as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlignedScanStat<R> {
    pub block: R,
    /// `n^{-1/2} sum_i l_i X_i(block)`.
    pub y0: f64,
    /// Pooled within-group standard deviation of `l_i X_i(block)`.
    pub sigma: f64,
    pub standardized: f64,
    /// `sigma` is zero, so `standardized` follows the degenerate convention.
    pub degenerate: bool,
}

/// Computes the aligned statistic for every candidate block.
///
/// Requires both labels to be present and `n >= 3`; the pooled variance
/// divides by `n - 2`.
pub fn aligned_scan<R: Region>(
    x: &DataMatrix,
    labels: &LabelVector,
    cfg: &RecoveryConfig,
) -> Result<Vec<AlignedScanStat<R>>> {
    x.ensure_finite()?;
    let n = x.n();
    if labels.len() != n {
        return Err(Error::input(format!(
            "{} labels for {n} observations",
            labels.len()
        )));
    }
    if n < 3 {
        return Err(Error::input(format!("aligned scan needs n >= 3, got {n}")));
    }
    let (plus, minus) = labels.group_sizes();
    if plus == 0 || minus == 0 {
        return Err(Error::config("labels put every observation in one group"));
    }
    let dims = R::dims_of(x)?;
    let regions = R::enumerate(dims, cfg.h1, cfg.min_len, cfg.enumeration)?;
    let sums = R::build_sums(x, dims)?;
    let sign: Vec<f64> = labels.iter().map(f64::from).collect();
    let root_n = libm::sqrt(n as f64);
    let mut y = alloc::vec![0.0; n];
    let mut out = Vec::with_capacity(regions.len());
    for region in regions {
        let scale = 1.0 / libm::sqrt(region.size() as f64);
        let (mut s_plus, mut s_minus) = (0.0, 0.0);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = sign[i] * sums.sum(i, &region) * scale;
            if sign[i] > 0.0 {
                s_plus += *yi;
            } else {
                s_minus += *yi;
            }
        }
        let (m_plus, m_minus) = (s_plus / plus as f64, s_minus / minus as f64);
        let ss: f64 = y
            .iter()
            .zip(&sign)
            .map(|(v, s)| {
                let d = v - if *s > 0.0 { m_plus } else { m_minus };
                d * d
            })
            .sum();
        let y0 = (s_plus + s_minus) / root_n;
        let sigma = libm::sqrt(ss / (n - 2) as f64);
        out.push(AlignedScanStat {
            block: region,
            y0,
            sigma,
            standardized: standardize(y0, sigma),
            degenerate: sigma == 0.0,
        });
    }
    Ok(out)
}

/// Step-down selection over the blocks whose standardized statistic exceeds
/// the threshold, ranked by `|y0|`.
pub fn identify_blocks<R: Region>(
    stats: &[AlignedScanStat<R>],
    dims: R::Dims,
    cfg: &RecoveryConfig,
) -> BlockSet<R> {
    let t = cfg.threshold(R::total_dim(dims));
    let regions: Vec<R> = stats.iter().map(|s| s.block).collect();
    let rank: Vec<f64> = stats.iter().map(|s| s.y0.abs()).collect();
    let passes: Vec<bool> = stats.iter().map(|s| s.standardized > t).collect();
    let chosen = crate::stepdown::step_down(&regions, &rank, &passes, cfg.h1 / 2, dims);
    BlockSet {
        blocks: chosen
            .into_iter()
            .map(|k| SelectedBlock {
                block: stats[k].block,
                statistic: stats[k].y0,
                standardized: stats[k].standardized,
                sigma: stats[k].sigma,
                partner: None,
            })
            .collect(),
    }
}

/// [`aligned_scan`] followed by [`identify_blocks`].
pub fn recover<R: Region>(
    x: &DataMatrix,
    labels: &LabelVector,
    cfg: &RecoveryConfig,
) -> Result<BlockSet<R>> {
    let stats = aligned_scan::<R>(x, labels, cfg)?;
    Ok(identify_blocks(&stats, R::dims_of(x)?, cfg))
}

pub fn recover_2d(
    x: &DataMatrix,
    labels: &LabelVector,
    cfg: &RecoveryConfig,
) -> Result<BlockSet<TensorBlock>> {
    recover(x, labels, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::Block;
    use alloc::vec;

    #[test]
    fn noiseless_constant_signal() {
        let tau = 0.7;
        let l = [1i8, -1, 1, 1, -1];
        let rows: Vec<Vec<f64>> = l.iter().map(|&s| vec![f64::from(s) * tau; 8]).collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let labels = LabelVector::new(l.to_vec()).unwrap();
        let stats = aligned_scan::<Block>(&x, &labels, &RecoveryConfig::new(3)).unwrap();
        for s in &stats {
            let expect = libm::sqrt((5 * s.block.len()) as f64) * tau;
            assert!((s.y0 - expect).abs() < 1e-12);
            assert!(s.sigma < 1e-12);
            assert!(s.standardized > 1e10);
        }
    }

    #[test]
    fn zero_data_scores_zero() {
        let x = DataMatrix::zeros(4, 10).unwrap();
        let labels = LabelVector::new(vec![1, 1, -1, -1]).unwrap();
        let set = recover::<Block>(&x, &labels, &RecoveryConfig::new(2)).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn single_group_rejected() {
        let x = DataMatrix::zeros(4, 10).unwrap();
        let labels = LabelVector::new(vec![1; 4]).unwrap();
        let err = recover::<Block>(&x, &labels, &RecoveryConfig::new(2)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn threshold_value() {
        let t = RecoveryConfig::new(15).threshold(2500);
        assert!((t - 6.490_638_246_569_747).abs() < 1e-12);
    }
}
