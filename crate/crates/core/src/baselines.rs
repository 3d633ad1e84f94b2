//! Comparison methods that ignore block structure: spectral clustering on the
//! raw rows, two-means, and a simplified influential-feature PCA (KS screen
//! followed by PCA).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::data::{DataMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::ma::{ma_pca, MaConfig};
use crate::numerics::{spectral_labels, GramMatrix, RngStream};

/// Signs of the leading eigenvector of `X X^T`.
pub fn spectral_baseline(x: &DataMatrix) -> Result<LabelVector> {
    ma_pca(x, &MaConfig::new(1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Restart `k` draws from `stream.derive(k)`.
    pub stream: RngStream,
}

impl KmeansConfig {
    pub fn new(stream: RngStream) -> Self {
        Self { restarts: 10, max_iter: 100, stream }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansFit {
    /// Canonical labels: the first observation is `+1`.
    pub labels: LabelVector,
    /// Within-cluster sum of squares of the returned partition.
    pub wcss: f64,
    /// Restart that produced the fit.
    pub restart: usize,
    /// WCSS after every Lloyd iteration of the winning restart.
    pub trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Centers as two `p`-vectors; `assign[i]` in `{0, 1}`.
fn centers(x: &DataMatrix, assign: &[u8]) -> [Vec<f64>; 2] {
    let p = x.p();
    let mut c = [vec![0.0; p], vec![0.0; p]];
    let mut count = [0usize; 2];
    for (i, &a) in assign.iter().enumerate() {
        count[a as usize] += 1;
        c[a as usize].iter_mut().zip(x.row(i)).for_each(|(s, v)| *s += v);
    }
    for k in 0..2 {
        if count[k] > 0 {
            let inv = 1.0 / count[k] as f64;
            c[k].iter_mut().for_each(|v| *v *= inv);
        }
    }
    c
}

fn wcss(x: &DataMatrix, assign: &[u8], c: &[Vec<f64>; 2]) -> f64 {
    assign
        .iter()
        .enumerate()
        .map(|(i, &a)| sq_dist(x.row(i), &c[a as usize]))
        .sum()
}

fn plus_plus(x: &DataMatrix, rng: &mut impl Rng) -> [Vec<f64>; 2] {
    let n = x.n();
    let first = rng.random_range(0..n);
    let d: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(first))).collect();
    let total: f64 = d.iter().sum();
    let second = if total > 0.0 {
        let mut u = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, &di) in d.iter().enumerate() {
            if u < di {
                pick = i;
                break;
            }
            u -= di;
        }
        pick
    } else {
        rng.random_range(0..n)
    };
    [x.row(first).to_vec(), x.row(second).to_vec()]
}

fn assign_nearest(x: &DataMatrix, c: &[Vec<f64>; 2], assign: &mut [u8]) -> bool {
    let mut changed = false;
    for (i, a) in assign.iter_mut().enumerate() {
        let row = x.row(i);
        let k = u8::from(sq_dist(row, &c[1]) < sq_dist(row, &c[0]));
        changed |= *a != k;
        *a = k;
    }
    changed
}

/// Moves the point farthest from its center into an empty cluster.
fn repair(x: &DataMatrix, c: &[Vec<f64>; 2], assign: &mut [u8]) {
    for empty in 0..2u8 {
        if assign.iter().all(|&a| a != empty) {
            let far = (0..assign.len())
                .max_by(|&a, &b| {
                    let da = sq_dist(x.row(a), &c[assign[a] as usize]);
                    let db = sq_dist(x.row(b), &c[assign[b] as usize]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("n >= 2");
            assign[far] = empty;
        }
    }
}

fn lloyd(x: &DataMatrix, max_iter: usize, rng: &mut impl Rng) -> (Vec<u8>, f64, Vec<f64>) {
    let mut c = plus_plus(x, rng);
    let mut assign = vec![0u8; x.n()];
    assign_nearest(x, &c, &mut assign);
    repair(x, &c, &mut assign);
    c = centers(x, &assign);
    let mut trace = vec![wcss(x, &assign, &c)];
    for _ in 0..max_iter {
        let changed = assign_nearest(x, &c, &mut assign);
        repair(x, &c, &mut assign);
        if !changed {
            break;
        }
        c = centers(x, &assign);
        trace.push(wcss(x, &assign, &c));
    }
    let w = *trace.last().expect("trace is non-empty");
    (assign, w, trace)
}

/// Two-means by Lloyd iterations from k-means++ seeds; the restart with the
/// smallest within-cluster sum of squares wins (ties: earliest restart).
pub fn kmeans2(x: &DataMatrix, cfg: &KmeansConfig) -> Result<KmeansFit> {
    if x.n() < 2 {
        return Err(Error::input(format!("need n >= 2, got {}", x.n())));
    }
    if cfg.restarts == 0 {
        return Err(Error::config("k-means needs at least one restart"));
    }
    x.ensure_finite()?;
    let mut best: Option<KmeansFit> = None;
    for k in 0..cfg.restarts {
        let mut rng = cfg.stream.derive(k as u64).rng();
        let (assign, w, trace) = lloyd(x, cfg.max_iter, &mut rng);
        if best.as_ref().map_or(true, |b| w < b.wcss) {
            let signs = assign.iter().map(|&a| if a == 0 { 1 } else { -1 }).collect();
            best = Some(KmeansFit {
                labels: LabelVector::new(signs)?.canonical(),
                wcss: w,
                restart: k,
                trace,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

/// How the KS screen picks columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IfpcaSelection {
    /// The `k` largest statistics (ties: lower column).
    TopK(usize),
    /// Every column whose statistic exceeds the value.
    Threshold(f64),
}

impl IfpcaSelection {
    /// `TopK(ceil(sqrt(p)))`.
    pub fn default_for(p: usize) -> Self {
        IfpcaSelection::TopK(libm::ceil(libm::sqrt(p as f64)) as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IfpcaFit {
    pub labels: LabelVector,
    /// Selected 0-based columns in decreasing order of statistic.
    pub selected: Vec<usize>,
    /// Columns dropped because their MAD is zero.
    pub excluded: Vec<usize>,
    /// KS statistic per column; `NaN` for excluded columns.
    pub scores: Vec<f64>,
}

const MAD_SCALE: f64 = 1.4826;

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// Kolmogorov-Smirnov distance between the empirical distribution of `v`
/// and the standard normal.
pub fn ks_statistic(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    s.iter().enumerate().fold(0.0, |d, (i, &z)| {
        let f = normal_cdf(z);
        d.max((i + 1) as f64 / m - f).max(f - i as f64 / m)
    })
}

/// Standardizes every column by median and MAD. Returns the standardized
/// columns (column-major) and the zero-MAD columns.
fn robust_columns(x: &DataMatrix) -> (Vec<Option<Vec<f64>>>, Vec<usize>) {
    let mut cols = Vec::with_capacity(x.p());
    let mut excluded = Vec::new();
    for j in 0..x.p() {
        let col: Vec<f64> = (0..x.n()).map(|i| x.get(i, j)).collect();
        let mut s = col.clone();
        s.sort_by(f64::total_cmp);
        let med = median(&s);
        let mut dev: Vec<f64> = col.iter().map(|v| (v - med).abs()).collect();
        dev.sort_by(f64::total_cmp);
        let mad = median(&dev) * MAD_SCALE;
        if mad > 0.0 {
            cols.push(Some(col.iter().map(|v| (v - med) / mad).collect()));
        } else {
            cols.push(None);
            excluded.push(j);
        }
    }
    (cols, excluded)
}

/// KS screen on robustly standardized columns followed by PCA labels on the
/// selected standardized columns.
pub fn ifpca_lite(x: &DataMatrix, selection: IfpcaSelection) -> Result<IfpcaFit> {
    if x.n() < 3 {
        return Err(Error::input(format!("need n >= 3, got {}", x.n())));
    }
    x.ensure_finite()?;
    let (cols, excluded) = robust_columns(x);
    let scores: Vec<f64> = cols
        .iter()
        .map(|c| c.as_deref().map_or(f64::NAN, ks_statistic))
        .collect();
    let mut order: Vec<usize> = (0..x.p()).filter(|&j| cols[j].is_some()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let selected: Vec<usize> = match selection {
        IfpcaSelection::TopK(k) => order.into_iter().take(k).collect(),
        IfpcaSelection::Threshold(t) => order.into_iter().filter(|&j| scores[j] > t).collect(),
    };
    if selected.is_empty() {
        return Err(Error::NoFeaturesSelected);
    }
    let (n, m) = (x.n(), selected.len());
    let mut values = vec![0.0; n * m];
    for (k, &j) in selected.iter().enumerate() {
        let col = cols[j].as_ref().expect("selected columns are standardized");
        for i in 0..n {
            values[i * m + k] = col[i];
        }
    }
    let labels = spectral_labels(&GramMatrix::from_row_major(n, m, &values))?;
    Ok(IfpcaFit { labels, selected, excluded, scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_clouds() {
        let rows = [
            [0.0, 0.1],
            [10.0, 10.2],
            [0.2, -0.1],
            [9.9, 10.0],
            [-0.1, 0.0],
        ];
        let x = DataMatrix::from_rows(&rows).unwrap();
        let fit = kmeans2(&x, &KmeansConfig::new(RngStream::new(1, 0))).unwrap();
        assert_eq!(fit.labels.as_slice(), &[1, -1, 1, -1, 1]);
    }

    #[test]
    fn identical_points_still_split() {
        let x = DataMatrix::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        let fit = kmeans2(&x, &KmeansConfig::new(RngStream::new(3, 0))).unwrap();
        let (a, b) = fit.labels.group_sizes();
        assert!(a > 0 && b > 0);
        assert_eq!(fit.wcss, 0.0);
    }

    #[test]
    fn ks_of_a_point_mass() {
        assert!((ks_statistic(&[0.0, 0.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_mad_columns_excluded() {
        let rows = [[1.0, 0.3, 5.0], [1.0, -0.7, 4.0], [1.0, 1.1, 9.0], [1.0, 0.0, 2.0]];
        let x = DataMatrix::from_rows(&rows).unwrap();
        let fit = ifpca_lite(&x, IfpcaSelection::TopK(5)).unwrap();
        assert_eq!(fit.excluded, vec![0]);
        assert_eq!(fit.selected.len(), 2);
        assert!(fit.scores[0].is_nan());
    }

    #[test]
    fn default_top_k() {
        assert_eq!(IfpcaSelection::default_for(2500), IfpcaSelection::TopK(50));
        assert_eq!(IfpcaSelection::default_for(10), IfpcaSelection::TopK(4));
    }
}
