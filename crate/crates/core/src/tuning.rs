//! Window selection by the number of identified signal coordinates: among
//! the grid points whose count is within a factor `1 - epsilon` of the
//! largest, take the one with the smallest `h1`.

use alloc::format;
use alloc::vec::Vec;

use crate::block::Region;
use crate::cfa::{cfa_pipeline_with_fallback, CfaConfig};
use crate::data::{DataMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::recovery::{recover, RecoveryConfig};

pub const DEFAULT_EPSILON: f64 = 0.01;

/// Largest window used for grids of side 50, 100 and 200.
pub fn default_h_max(p1: usize) -> Option<usize> {
    match p1 {
        50 => Some(15),
        100 => Some(25),
        200 => Some(30),
        _ => None,
    }
}

/// Candidate `(h1, second)` pairs, `second` being `h3` for moving averages
/// or `h2` for the cross-block screen.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningGrid {
    pub points: Vec<(usize, usize)>,
    pub epsilon: f64,
}

impl TuningGrid {
    pub fn new(points: Vec<(usize, usize)>, epsilon: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("tuning grid is empty"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::config(format!("epsilon = {epsilon} outside (0, 1)")));
        }
        if let Some(&(a, b)) = points.iter().find(|&&(a, b)| a == 0 || b < a) {
            return Err(Error::config(format!("grid point ({a}, {b}) needs 1 <= h1 <= second")));
        }
        Ok(Self { points, epsilon })
    }

    /// All `(h1, h)` with `1 <= h1 <= h <= h_max`.
    pub fn triangle(h_max: usize) -> Result<Self> {
        let points = (1..=h_max)
            .flat_map(|a| (a..=h_max).map(move |b| (a, b)))
            .collect();
        Self::new(points, DEFAULT_EPSILON)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningRow {
    pub h1: usize,
    pub second: usize,
    /// Number of coordinates covered by the identified blocks.
    pub s_hat: usize,
    /// Labels produced at this point; `None` if the point could not be run.
    pub labels: Option<LabelVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub h1: usize,
    pub second: usize,
    /// Every grid point found no signal; the choice is the smallest point.
    pub no_signal: bool,
    pub table: Vec<TuningRow>,
}

impl TuningResult {
    pub fn chosen(&self) -> &TuningRow {
        self.table
            .iter()
            .find(|r| r.h1 == self.h1 && r.second == self.second)
            .expect("chosen point is in the table")
    }
}

/// Applies the selection rule to a filled table.
pub fn select_point(table: &[TuningRow], epsilon: f64) -> (usize, usize, bool) {
    let s_max = table.iter().map(|r| r.s_hat).max().unwrap_or(0);
    if s_max == 0 {
        let r = table
            .iter()
            .min_by_key(|r| (r.h1, r.second))
            .expect("table is non-empty");
        return (r.h1, r.second, true);
    }
    let cut = (1.0 - epsilon) * s_max as f64;
    let r = table
        .iter()
        .filter(|r| r.s_hat as f64 > cut)
        .min_by_key(|r| (r.h1, r.second, core::cmp::Reverse(r.s_hat)))
        .expect("the maximum passes its own cut");
    (r.h1, r.second, false)
}

fn covered<R: Region>(x: &DataMatrix, labels: &LabelVector, cfg: &RecoveryConfig) -> usize {
    let dims = match R::dims_of(x) {
        Ok(d) => d,
        Err(_) => return 0,
    };
    recover::<R>(x, labels, cfg).map_or(0, |set| set.signal_set(dims).len())
}

fn finish(grid: &TuningGrid, table: Vec<TuningRow>) -> TuningResult {
    let (h1, second, no_signal) = select_point(&table, grid.epsilon);
    TuningResult { h1, second, no_signal, table }
}

/// Tunes `(h1, h3)` for moving-average PCA followed by post-clustering
/// recovery. `recovery` supplies everything but `h1`.
pub fn tune_ma<R: Region>(
    x: &DataMatrix,
    grid: &TuningGrid,
    recovery: &RecoveryConfig,
) -> Result<TuningResult> {
    let mut table = Vec::with_capacity(grid.points.len());
    for &(h1, h3) in &grid.points {
        let cfg = RecoveryConfig { h1, ..*recovery };
        let labels = R::ma_pca(x, h3).ok();
        let s_hat = labels.as_ref().map_or(0, |l| covered::<R>(x, l, &cfg));
        table.push(TuningRow { h1, second: h3, s_hat, labels });
    }
    Ok(finish(grid, table))
}

/// Tunes `(h1, h2)` for the cross-block pipeline: labels from the screen
/// (with its fallbacks, moving averages using `fallback_h3`), then
/// post-clustering recovery with the same `h1` counts the signal.
pub fn tune_cfa<R: Region>(
    x: &DataMatrix,
    grid: &TuningGrid,
    cfa: &CfaConfig,
    recovery: &RecoveryConfig,
    fallback_h3: usize,
) -> Result<TuningResult> {
    let mut table = Vec::with_capacity(grid.points.len());
    for &(h1, h2) in &grid.points {
        let cfg = CfaConfig { h1, h2, ..*cfa };
        let labels = cfa_pipeline_with_fallback::<R>(x, &cfg, fallback_h3)
            .ok()
            .map(|o| o.labels);
        let rcfg = RecoveryConfig { h1, ..*recovery };
        let s_hat = labels.as_ref().map_or(0, |l| covered::<R>(x, l, &rcfg));
        table.push(TuningRow { h1, second: h2, s_hat, labels });
    }
    Ok(finish(grid, table))
}
