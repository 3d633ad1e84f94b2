//! Synthetic two-cluster data on a `p1 x p2` grid with rectangular signal
//! blocks, the two losses, and the per-replicate evaluation behind a sweep
//! over signal strengths.
//!
//! Randomness: the signal pattern comes from stream [`SIGNAL_STREAM`] of the
//! seed, replicate `r` draws its labels and noise from stream `r`, and the
//! same draws are reused for every signal strength.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::baselines::{ifpca_lite, kmeans2, spectral_baseline, IfpcaSelection, KmeansConfig};
use crate::block::{Block, EnumerationMode, Region, TensorBlock};
use crate::cfa::{cfa_pipeline_with_fallback, CfaConfig};
use crate::data::{DataMatrix, GridShape, LabelVector};
use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::recovery::{recover, RecoveryConfig};

pub const SIGNAL_STREAM: u64 = u64::MAX;
const KMEANS_SALT: u64 = 0x6b6d_6561_6e73;
const SIZE_DRAWS: usize = 100;
const PLACEMENT_RESTARTS: usize = 50;
/// Share of failed replicates above which a sweep cell is flagged.
pub const FAILURE_FLAG_RATE: f64 = 0.1;

/// `floor(x)` that is not thrown off by `x` landing a rounding error below
/// an integer.
fn floor_guarded(x: f64) -> usize {
    libm::floor(x * (1.0 + 1e-12)) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SignalLayout {
    /// Rectangular blocks with random sizes, kept apart.
    #[default]
    Block,
    /// Single cells chosen uniformly at random.
    Scattered,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    pub p1: usize,
    pub p2: usize,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho0: f64,
    pub tau_grid: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub layout: SignalLayout,
}

impl SimConfig {
    /// `theta = 0.4`, `rho_min = 0.8`, `rho_max = 1.25`, `rho0 = 1.5`.
    pub fn new(p1: usize, p2: usize, alpha: f64, beta: f64) -> Self {
        Self {
            p1,
            p2,
            theta: 0.4,
            alpha,
            beta,
            rho_min: 0.8,
            rho_max: 1.25,
            rho0: 1.5,
            tau_grid: Vec::new(),
            reps: 100,
            seed: 0,
            layout: SignalLayout::Block,
        }
    }

    /// Dense setting: `alpha = 0.5`, `beta = 0.24`.
    pub fn dense(p1: usize) -> Self {
        Self::new(p1, p1, 0.5, 0.24)
    }

    /// Sparse setting: `alpha = 0.3`, `beta = 0.6`.
    pub fn sparse(p1: usize) -> Self {
        Self::new(p1, p1, 0.3, 0.6)
    }

    pub fn grid(&self) -> GridShape {
        GridShape::new(self.p1, self.p2)
    }

    pub fn p(&self) -> usize {
        self.p1 * self.p2
    }

    /// `2 floor(p^theta / 2)`.
    pub fn n(&self) -> usize {
        2 * floor_guarded(libm::pow(self.p() as f64, self.theta) / 2.0)
    }

    /// Number of blocks, `floor(p^{1 - alpha - beta})`.
    pub fn m(&self) -> usize {
        floor_guarded(libm::pow(self.p() as f64, 1.0 - self.alpha - self.beta))
    }

    fn side(&self, rho: f64) -> usize {
        floor_guarded(rho * libm::pow(self.p1 as f64, self.alpha))
    }

    pub fn l_min(&self) -> usize {
        match self.layout {
            SignalLayout::Block => self.side(self.rho_min),
            SignalLayout::Scattered => 1,
        }
    }

    pub fn l_max(&self) -> usize {
        match self.layout {
            SignalLayout::Block => self.side(self.rho_max),
            SignalLayout::Scattered => 1,
        }
    }

    /// Minimum gap between blocks.
    pub fn d0(&self) -> usize {
        match self.layout {
            SignalLayout::Block => self.side(self.rho0),
            SignalLayout::Scattered => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p1 == 0 || self.p2 == 0 {
            return Err(Error::config("grid dimensions must be positive"));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::config(format!("theta = {} outside (0, 1)", self.theta)));
        }
        if self.n() < 4 {
            return Err(Error::config(format!("sample size n = {} is below 4", self.n())));
        }
        if self.m() < 1 {
            return Err(Error::config("configuration yields no signal blocks"));
        }
        if self.l_min() < 1 || self.l_min() > self.l_max() {
            return Err(Error::config(format!(
                "block sizes [{}, {}] are empty",
                self.l_min(),
                self.l_max()
            )));
        }
        if self.l_max() > self.p1.min(self.p2) {
            return Err(Error::config("blocks do not fit in the grid"));
        }
        if let Some(t) = self.tau_grid.iter().find(|t| !t.is_finite() || **t < 0.0) {
            return Err(Error::config(format!("invalid signal strength {t}")));
        }
        Ok(())
    }
}

/// The signal pattern of a sweep: blocks, their signs, and the unit-strength
/// signal matrix (entries `0` or `+-1`, scaled by `tau` per dataset).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruth {
    pub grid: GridShape,
    pub blocks: Vec<TensorBlock>,
    pub signs: Vec<i8>,
    pub pattern: Vec<f64>,
}

impl GroundTruth {
    /// Builds the pattern from blocks and signs.
    pub fn from_blocks(grid: GridShape, blocks: Vec<TensorBlock>, signs: Vec<i8>) -> Result<Self> {
        if blocks.len() != signs.len() {
            return Err(Error::input("one sign per block is required"));
        }
        let mut pattern = vec![0.0; grid.len()];
        for (b, &s) in blocks.iter().zip(&signs) {
            if !b.within(grid) {
                return Err(Error::input(format!("block {b} outside the grid")));
            }
            b.for_each_column(grid, |c| pattern[c] = f64::from(s));
        }
        Ok(Self { grid, blocks, signs, pattern })
    }

    /// Sorted 1-based flattened indices of the signal cells.
    pub fn signal_set(&self) -> Vec<usize> {
        (0..self.pattern.len())
            .filter(|&k| self.pattern[k] != 0.0)
            .map(|k| k + 1)
            .collect()
    }

    /// The signal matrix at strength `tau`.
    pub fn u(&self, tau: f64) -> Vec<f64> {
        self.pattern.iter().map(|v| v * tau).collect()
    }
}

/// Number of cells strictly between two blocks along the mode where they are
/// farthest apart (`0` when they overlap in every mode).
pub fn block_gap(a: &TensorBlock, b: &TensorBlock) -> usize {
    (0..2)
        .map(|t| {
            let (x, y) = (a.0[t], b.0[t]);
            if x.end < y.start {
                y.start - x.end - 1
            } else if y.end < x.start {
                x.start - y.end - 1
            } else {
                0
            }
        })
        .max()
        .unwrap_or(0)
}

fn centered(center: usize, len: usize) -> Block {
    let start = center - (len - 1) / 2;
    Block { start, end: start + len - 1 }
}

fn try_place(
    cfg: &SimConfig,
    rng: &mut impl Rng,
    placed: &mut Vec<TensorBlock>,
) -> bool {
    let (lmin, lmax, d0, m) = (cfg.l_min(), cfg.l_max(), cfg.d0(), cfg.m());
    let border = lmax.div_ceil(2);
    let g = cfg.grid();
    if g.p1 < 2 * border + 1 || g.p2 < 2 * border + 1 {
        return false;
    }
    let rows = border + 1..=g.p1 - border;
    let cols = border + 1..=g.p2 - border;
    let mut fits = Vec::new();
    while placed.len() < m {
        let expanded: Vec<TensorBlock> = placed.iter().map(|b| b.expand(d0, g)).collect();
        let mut done = false;
        for _ in 0..SIZE_DRAWS {
            let l1 = rng.random_range(lmin..=lmax);
            let l2 = rng.random_range(lmin..=lmax);
            fits.clear();
            for a in rows.clone() {
                for b in cols.clone() {
                    let cand = TensorBlock([centered(a, l1), centered(b, l2)]);
                    if expanded.iter().all(|e| !e.intersects(&cand)) {
                        fits.push(cand);
                    }
                }
            }
            if !fits.is_empty() {
                placed.push(fits[rng.random_range(0..fits.len())]);
                done = true;
                break;
            }
        }
        if !done {
            return false;
        }
    }
    true
}

/// Places `m` blocks one at a time: sizes uniform on `[L_min, L_max]` per
/// mode, centre uniform over the cells outside a border band of
/// `ceil(L_max / 2)` whose block misses every earlier block expanded by
/// `d0`. Each block gets sign `+1` or `-1` with equal probability.
pub fn generate_signal(cfg: &SimConfig, stream: RngStream) -> Result<GroundTruth> {
    cfg.validate()?;
    let mut rng = stream.rng();
    let g = cfg.grid();
    let m = cfg.m();
    let blocks = match cfg.layout {
        SignalLayout::Scattered => {
            if m > g.len() {
                return Err(Error::InfeasiblePlacement { placed: 0, requested: m });
            }
            let mut cells = index::sample(&mut rng, g.len(), m).into_vec();
            cells.sort_unstable();
            cells
                .into_iter()
                .map(|c| {
                    let (a, b) = (c / g.p2 + 1, c % g.p2 + 1);
                    TensorBlock([Block { start: a, end: a }, Block { start: b, end: b }])
                })
                .collect()
        }
        SignalLayout::Block => {
            let mut best = 0;
            let mut placed = Vec::with_capacity(m);
            let mut ok = false;
            for _ in 0..PLACEMENT_RESTARTS {
                placed.clear();
                if try_place(cfg, &mut rng, &mut placed) {
                    ok = true;
                    break;
                }
                best = best.max(placed.len());
            }
            if !ok {
                return Err(Error::InfeasiblePlacement { placed: best, requested: m });
            }
            placed
        }
    };
    let signs: Vec<i8> = (0..m).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    for (k, a) in blocks.iter().enumerate() {
        for b in &blocks[k + 1..] {
            assert!(block_gap(a, b) >= cfg.d0(), "placed blocks {a} and {b} too close");
        }
    }
    GroundTruth::from_blocks(g, blocks, signs)
}

/// `n` observations `l_i tau U + Z_i` with symmetric random labels and
/// standard normal noise. Labels are drawn first, then the noise row by row,
/// so the draws do not depend on `tau`.
pub fn generate_dataset(
    truth: &GroundTruth,
    tau: f64,
    n: usize,
    stream: RngStream,
) -> Result<(DataMatrix, LabelVector)> {
    let mut rng = stream.rng();
    let labels: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let u = truth.u(tau);
    let p = truth.grid.len();
    let mut values = Vec::with_capacity(n * p);
    for &l in &labels {
        let l = f64::from(l);
        values.extend(u.iter().map(|&s| l * s + rng.sample::<f64, _>(StandardNormal)));
    }
    let x = DataMatrix::new(n, p, values)?.with_grid(truth.grid)?;
    Ok((x, LabelVector::new(labels)?))
}

/// Mismatch fraction minimized over the global sign flip.
pub fn hamming_clustering(est: &LabelVector, truth: &LabelVector) -> Result<f64> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(Error::input(format!(
            "label vectors of lengths {} and {}",
            est.len(),
            truth.len()
        )));
    }
    let n = est.len();
    let diff = est.iter().zip(truth.iter()).filter(|(a, b)| a != b).count();
    Ok(diff.min(n - diff) as f64 / n as f64)
}

/// `|est symmetric-difference truth| / |truth|` for sorted, deduplicated
/// index sets.
pub fn hamming_signal(est: &[usize], truth: &[usize]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::UndefinedLoss("true signal set is empty".into()));
    }
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < est.len() && j < truth.len() {
        match est[i].cmp(&truth[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok((est.len() + truth.len() - 2 * common) as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Cfa,
    Ma,
    Spectral,
    Kmeans,
    Ifpca,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Cfa, Method::Ma, Method::Spectral, Method::Kmeans, Method::Ifpca];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Cfa => "cfa",
            Method::Ma => "ma",
            Method::Spectral => "spectral",
            Method::Kmeans => "kmeans",
            Method::Ifpca => "ifpca",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// Tuning parameters of every method in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSettings {
    pub cfa: CfaConfig,
    pub ma_h3: usize,
    pub recovery: RecoveryConfig,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub ifpca: IfpcaSelection,
}

impl MethodSettings {
    /// Windows matched to the block sizes of `cfg`: candidate blocks up to
    /// `L_max` long (`h1 = L_max - 1`, `h2 = h1`), moving-average window
    /// `L_min`. Scattered layouts use single cells and pairs.
    pub fn for_config(cfg: &SimConfig) -> Self {
        let (h1, min_len) = match cfg.layout {
            SignalLayout::Block => (cfg.l_max().saturating_sub(1).max(1), 2),
            SignalLayout::Scattered => (1, 1),
        };
        let cfa = CfaConfig { min_len, ..CfaConfig::new(h1, h1) };
        let recovery = RecoveryConfig { min_len, ..RecoveryConfig::new(h1) };
        Self {
            cfa,
            ma_h3: cfg.l_min().max(1),
            recovery,
            kmeans_restarts: 10,
            kmeans_max_iter: 100,
            ifpca: IfpcaSelection::default_for(cfg.p()),
        }
    }

    pub fn with_cfa_enumeration(mut self, mode: EnumerationMode) -> Self {
        self.cfa.enumeration = mode;
        self
    }
}

/// Losses of one method on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    /// `(clustering loss, signal loss)` or the error message.
    pub result: core::result::Result<(f64, f64), String>,
}

/// Runs one method on one dataset and scores it against the truth.
pub fn evaluate_method(
    method: Method,
    x: &DataMatrix,
    labels: &LabelVector,
    truth: &GroundTruth,
    settings: &MethodSettings,
    stream: RngStream,
) -> Result<(f64, f64)> {
    let grid = truth.grid;
    let post = |est: &LabelVector| -> Result<Vec<usize>> {
        match recover::<TensorBlock>(x, est, &settings.recovery) {
            Ok(set) => Ok(set.signal_set(grid)),
            // one estimated group: nothing to align on, nothing recovered
            Err(Error::Config(_)) => Ok(Vec::new()),
            Err(e) => Err(e),
        }
    };
    let (est, s_hat) = match method {
        Method::Cfa => {
            let out = cfa_pipeline_with_fallback::<TensorBlock>(x, &settings.cfa, settings.ma_h3)?;
            let s = out.blocks.signal_set(grid);
            (out.labels, s)
        }
        Method::Ma => {
            let est = TensorBlock::ma_pca(x, settings.ma_h3)?;
            let s = post(&est)?;
            (est, s)
        }
        Method::Spectral => {
            let est = spectral_baseline(x)?;
            let s = post(&est)?;
            (est, s)
        }
        Method::Kmeans => {
            let cfg = KmeansConfig {
                restarts: settings.kmeans_restarts,
                max_iter: settings.kmeans_max_iter,
                stream: stream.derive(KMEANS_SALT),
            };
            let est = kmeans2(x, &cfg)?.labels;
            let s = post(&est)?;
            (est, s)
        }
        Method::Ifpca => {
            let est = ifpca_lite(x, settings.ifpca)?.labels;
            let s = post(&est)?;
            (est, s)
        }
    };
    Ok((hamming_clustering(&est, labels)?, hamming_signal(&s_hat, &truth.signal_set())?))
}

/// Everything a sweep needs, with the signal pattern already drawn.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub config: SimConfig,
    pub truth: GroundTruth,
    pub methods: Vec<Method>,
    pub settings: MethodSettings,
}

impl SweepPlan {
    pub fn new(config: SimConfig, methods: Vec<Method>, settings: MethodSettings) -> Result<Self> {
        if config.tau_grid.is_empty() {
            return Err(Error::config("sweep needs at least one signal strength"));
        }
        if methods.is_empty() {
            return Err(Error::config("sweep needs at least one method"));
        }
        let truth = generate_signal(&config, RngStream::new(config.seed, SIGNAL_STREAM))?;
        Ok(Self { config, truth, methods, settings })
    }

    /// `(tau index, replicate)` pairs in reduction order.
    pub fn jobs(&self) -> Vec<(usize, usize)> {
        (0..self.config.tau_grid.len())
            .flat_map(|t| (0..self.config.reps).map(move |r| (t, r)))
            .collect()
    }

    /// All methods on replicate `rep` at the `tau_index`-th strength.
    pub fn evaluate(&self, tau_index: usize, rep: usize) -> Vec<MethodOutcome> {
        let stream = RngStream::new(self.config.seed, rep as u64);
        let tau = self.config.tau_grid[tau_index];
        let data = generate_dataset(&self.truth, tau, self.config.n(), stream);
        self.methods
            .iter()
            .map(|&method| MethodOutcome {
                method,
                result: data
                    .as_ref()
                    .map_err(|e| format!("{e}"))
                    .and_then(|(x, l)| {
                        evaluate_method(method, x, l, &self.truth, &self.settings, stream)
                            .map_err(|e| format!("{e}"))
                    }),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepCell {
    pub tau: f64,
    pub method: Method,
    /// Means over the successful replicates (`NaN` if none succeeded).
    pub clu_loss: f64,
    pub sig_loss: f64,
    pub reps: usize,
    pub failures: usize,
    /// More than [`FAILURE_FLAG_RATE`] of the replicates failed.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    /// Averages outcomes listed in [`SweepPlan::jobs`] order.
    pub fn reduce(plan: &SweepPlan, outcomes: &[Vec<MethodOutcome>]) -> Self {
        let reps = plan.config.reps;
        let mut cells = Vec::new();
        for (t, &tau) in plan.config.tau_grid.iter().enumerate() {
            for (k, &method) in plan.methods.iter().enumerate() {
                let (mut clu, mut sig, mut ok, mut failures) = (0.0, 0.0, 0, 0);
                for rep_out in &outcomes[t * reps..(t + 1) * reps] {
                    match rep_out[k].result {
                        Ok((c, s)) => {
                            clu += c;
                            sig += s;
                            ok += 1;
                        }
                        Err(_) => failures += 1,
                    }
                }
                let denom = if ok == 0 { f64::NAN } else { ok as f64 };
                cells.push(SweepCell {
                    tau,
                    method,
                    clu_loss: clu / denom,
                    sig_loss: sig / denom,
                    reps: ok,
                    failures,
                    flagged: failures as f64 > FAILURE_FLAG_RATE * reps as f64,
                });
            }
        }
        Self { cells }
    }

    pub fn cell(&self, tau: f64, method: Method) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.tau == tau && c.method == method)
    }
}

/// Sequential sweep.
pub fn run_sweep(plan: &SweepPlan) -> SweepResult {
    let outcomes: Vec<Vec<MethodOutcome>> =
        plan.jobs().into_iter().map(|(t, r)| plan.evaluate(t, r)).collect();
    SweepResult::reduce(plan, &outcomes)
}
