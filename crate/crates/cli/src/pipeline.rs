//! One clustering run described by a [`Manifest`], and the files it writes.

use std::path::{Path, PathBuf};

use blocksig_core::baselines::{ifpca_lite, kmeans2, spectral_baseline, IfpcaSelection, KmeansConfig};
use blocksig_core::block::Region;
use blocksig_core::cfa::{cfa_pipeline_with_fallback, CfaConfig, CfaPath, DEFAULT_THRESHOLD_SCALE};
use blocksig_core::numerics::RngStream;
use blocksig_core::recovery::{self, recover, RecoveryConfig};
use blocksig_core::sim::Method;
use blocksig_core::tuning::{tune_cfa, tune_ma, TuningGrid, TuningResult};
use blocksig_core::{Block, BlockSet, DataMatrix, EnumerationMode, Error, GridShape, LabelVector, TensorBlock};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{self, LoadOptions};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub input: PathBuf,
    /// `[p1, p2]` when every row is a flattened grid.
    #[serde(default)]
    pub grid: Option<[usize; 2]>,
    pub method: Method,
    pub h1: usize,
    /// Partner exclusion window of the cross-block screen; defaults to `h1`.
    #[serde(default)]
    pub h2: Option<usize>,
    /// Moving-average window, also used by the screen's last fallback.
    pub h3: usize,
    #[serde(default = "default_cfa_scale")]
    pub threshold_scale: f64,
    #[serde(default = "default_recovery_scale")]
    pub recovery_scale: f64,
    #[serde(default)]
    pub enumeration: EnumerationMode,
    #[serde(default = "default_min_len")]
    pub min_len: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub kmeans_restarts: usize,
    /// Columns kept by the KS screen; `ceil(sqrt(p))` when absent.
    #[serde(default)]
    pub ifpca_top_k: Option<usize>,
    pub output: PathBuf,
}

fn default_cfa_scale() -> f64 {
    DEFAULT_THRESHOLD_SCALE
}

fn default_recovery_scale() -> f64 {
    recovery::DEFAULT_THRESHOLD_SCALE
}

fn default_min_len() -> usize {
    2
}

fn default_restarts() -> usize {
    10
}

impl Manifest {
    pub fn new(input: PathBuf, method: Method, h1: usize, h3: usize, output: PathBuf) -> Self {
        Self {
            input,
            grid: None,
            method,
            h1,
            h2: None,
            h3,
            threshold_scale: DEFAULT_THRESHOLD_SCALE,
            recovery_scale: recovery::DEFAULT_THRESHOLD_SCALE,
            enumeration: EnumerationMode::Auto,
            min_len: 2,
            seed: 0,
            kmeans_restarts: 10,
            ifpca_top_k: None,
            output,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Format { path: path.to_path_buf(), msg: e.to_string() })
    }

    pub fn grid_shape(&self) -> Option<GridShape> {
        self.grid.map(|[a, b]| GridShape::new(a, b))
    }

    pub fn cfa(&self) -> CfaConfig {
        CfaConfig {
            threshold_scale: self.threshold_scale,
            enumeration: self.enumeration,
            min_len: self.min_len,
            ..CfaConfig::new(self.h1, self.h2.unwrap_or(self.h1))
        }
    }

    pub fn recovery(&self) -> RecoveryConfig {
        RecoveryConfig {
            threshold_scale: self.recovery_scale,
            min_len: self.min_len,
            ..RecoveryConfig::new(self.h1)
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if let Some([a, b]) = self.grid {
            if a * b != p {
                return Err(CliError::Config(format!("grid {a} x {b} does not match {p} columns")));
            }
        }
        self.cfa().validate()?;
        if self.h3 == 0 {
            return Err(CliError::Config("h3 must be at least 1".into()));
        }
        Ok(())
    }
}

/// Selected blocks of either dimensionality.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "blocks", rename_all = "lowercase")]
pub enum Blocks {
    Interval(BlockSet<Block>),
    Rectangle(BlockSet<TensorBlock>),
}

impl Blocks {
    pub fn len(&self) -> usize {
        match self {
            Blocks::Interval(b) => b.len(),
            Blocks::Rectangle(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub labels: LabelVector,
    pub blocks: Blocks,
    /// Sorted 1-based flattened column indices covered by `blocks`.
    pub signal: Vec<usize>,
    /// Route of the cross-block pipeline; `None` for other methods.
    pub path: Option<CfaPath>,
    /// Fallbacks and other non-fatal events, in order.
    pub notes: Vec<String>,
}

trait Wrap: Region {
    fn wrap(set: BlockSet<Self>) -> Blocks;
}

impl Wrap for Block {
    fn wrap(set: BlockSet<Self>) -> Blocks {
        Blocks::Interval(set)
    }
}

impl Wrap for TensorBlock {
    fn wrap(set: BlockSet<Self>) -> Blocks {
        Blocks::Rectangle(set)
    }
}

fn labels_for<R: Region>(x: &DataMatrix, m: &Manifest) -> Result<LabelVector> {
    Ok(match m.method {
        Method::Ma => R::ma_pca(x, m.h3)?,
        Method::Spectral => spectral_baseline(x)?,
        Method::Kmeans => {
            let cfg = KmeansConfig {
                restarts: m.kmeans_restarts,
                ..KmeansConfig::new(RngStream::new(m.seed, 0))
            };
            kmeans2(x, &cfg)?.labels
        }
        Method::Ifpca => {
            let sel = m.ifpca_top_k.map_or(IfpcaSelection::default_for(x.p()), IfpcaSelection::TopK);
            ifpca_lite(x, sel)?.labels
        }
        Method::Cfa => unreachable!("handled by the screen"),
    })
}

fn post_recovery<R: Wrap>(x: &DataMatrix, labels: &LabelVector, m: &Manifest, notes: &mut Vec<String>) -> Result<BlockSet<R>> {
    match recover::<R>(x, labels, &m.recovery()) {
        Ok(set) => Ok(set),
        Err(Error::Config(msg)) => {
            notes.push(format!("recovery skipped: {msg}"));
            Ok(BlockSet::default())
        }
        Err(e) => Err(e.into()),
    }
}

fn run<R: Wrap>(x: &DataMatrix, m: &Manifest) -> Result<Artifacts> {
    let dims = R::dims_of(x)?;
    let mut notes = Vec::new();
    let (labels, set, path) = if m.method == Method::Cfa {
        let out = cfa_pipeline_with_fallback::<R>(x, &m.cfa(), m.h3)?;
        match out.path {
            CfaPath::Screen => {}
            CfaPath::LoweredThreshold => notes.push(format!(
                "no features selected at threshold scale {}; screen repeated at scale {}",
                m.threshold_scale,
                blocksig_core::cfa::FALLBACK_THRESHOLD_SCALE
            )),
            CfaPath::MovingAverage => notes.push(format!(
                "no features selected by the screen; labels from moving-average PCA with h3 = {}, blocks from post-clustering recovery",
                m.h3
            )),
        }
        let set = if out.path == CfaPath::MovingAverage {
            post_recovery::<R>(x, &out.labels, m, &mut notes)?
        } else {
            out.blocks
        };
        (out.labels, set, Some(out.path))
    } else {
        let labels = labels_for::<R>(x, m)?;
        let set = post_recovery::<R>(x, &labels, m, &mut notes)?;
        (labels, set, None)
    };
    let signal = set.signal_set(dims);
    Ok(Artifacts { labels, blocks: R::wrap(set), signal, path, notes })
}

/// Runs the manifest on an already loaded matrix.
pub fn run_on(x: &DataMatrix, m: &Manifest) -> Result<Artifacts> {
    m.validate(x.p())?;
    match m.grid_shape() {
        Some(g) => run::<TensorBlock>(&x.clone().with_grid(g)?, m),
        None if x.grid().is_some() => run::<TensorBlock>(x, m),
        None => run::<Block>(x, m),
    }
}

/// Loads the input, runs, and writes `labels.json`, `blocks.json`,
/// `signal.txt` and `summary.json` into the output directory.
pub fn run_pipeline(m: &Manifest, load: &LoadOptions) -> Result<Artifacts> {
    let opts = LoadOptions { grid: m.grid_shape().or(load.grid), ..load.clone() };
    let x = io::load_matrix(&m.input, &opts)?;
    let art = run_on(&x, m)?;
    write_artifacts(&art, m, &x)?;
    Ok(art)
}

#[derive(Serialize)]
struct LabelsFile<'a> {
    schema_version: u32,
    method: Method,
    labels: &'a [i8],
}

#[derive(Serialize)]
struct BlocksFile<'a> {
    schema_version: u32,
    #[serde(flatten)]
    blocks: &'a Blocks,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    n: usize,
    p: usize,
    manifest: &'a Manifest,
    path: Option<CfaPath>,
    notes: &'a [String],
    blocks: usize,
    s_hat: usize,
    group_sizes: (usize, usize),
}

pub fn write_artifacts(art: &Artifacts, m: &Manifest, x: &DataMatrix) -> Result<()> {
    let dir = io::ensure_dir(&m.output)?;
    io::write_json(
        &dir.join("labels.json"),
        &LabelsFile { schema_version: SCHEMA_VERSION, method: m.method, labels: art.labels.as_slice() },
    )?;
    io::write_json(&dir.join("blocks.json"), &BlocksFile { schema_version: SCHEMA_VERSION, blocks: &art.blocks })?;
    let mut sig = String::new();
    for j in &art.signal {
        sig.push_str(&j.to_string());
        sig.push('\n');
    }
    io::write_text(&dir.join("signal.txt"), &sig)?;
    io::write_json(
        &dir.join("summary.json"),
        &Summary {
            schema_version: SCHEMA_VERSION,
            n: x.n(),
            p: x.p(),
            manifest: m,
            path: art.path,
            notes: &art.notes,
            blocks: art.blocks.len(),
            s_hat: art.signal.len(),
            group_sizes: art.labels.group_sizes(),
        },
    )
}

/// Post-clustering recovery from given labels.
pub fn recover_blocks(x: &DataMatrix, labels: &LabelVector, cfg: &RecoveryConfig) -> Result<(Blocks, Vec<usize>)> {
    if labels.len() != x.n() {
        return Err(CliError::Config(format!("{} labels for {} rows", labels.len(), x.n())));
    }
    Ok(match x.grid() {
        Some(g) => {
            let set = recover::<TensorBlock>(x, labels, cfg)?;
            let s = set.signal_set(g);
            (Blocks::Rectangle(set), s)
        }
        None => {
            let set = recover::<Block>(x, labels, cfg)?;
            let s = set.signal_set(x.p());
            (Blocks::Interval(set), s)
        }
    })
}

pub fn write_blocks(path: &Path, blocks: &Blocks) -> Result<()> {
    io::write_json(path, &BlocksFile { schema_version: SCHEMA_VERSION, blocks })
}

/// Grid search over `(h1, h3)` for moving averages or `(h1, h2)` for the
/// screen, whichever `m.method` names.
pub fn tune(x: &DataMatrix, m: &Manifest, grid: &TuningGrid) -> Result<TuningResult> {
    let rec = m.recovery();
    let res = match (m.method, x.grid()) {
        (Method::Ma, Some(_)) => tune_ma::<TensorBlock>(x, grid, &rec)?,
        (Method::Ma, None) => tune_ma::<Block>(x, grid, &rec)?,
        (Method::Cfa, Some(_)) => tune_cfa::<TensorBlock>(x, grid, &m.cfa(), &rec, m.h3)?,
        (Method::Cfa, None) => tune_cfa::<Block>(x, grid, &m.cfa(), &rec, m.h3)?,
        (other, _) => {
            return Err(CliError::Config(format!("tuning supports ma and cfa, not {}", other.name())))
        }
    };
    Ok(res)
}

/// `h1,second,s_hat,loss` rows; `loss` is the clustering loss against
/// `truth` when given and empty otherwise.
pub fn tuning_csv(res: &TuningResult, truth: Option<&LabelVector>) -> Result<String> {
    let mut out = String::from("h1,second,s_hat,loss,chosen\n");
    for row in &res.table {
        let loss = match (truth, &row.labels) {
            (Some(t), Some(l)) => format!("{:?}", blocksig_core::sim::hamming_clustering(l, t)?),
            _ => String::new(),
        };
        let chosen = u8::from(row.h1 == res.h1 && row.second == res.second);
        out.push_str(&format!("{},{},{},{},{}\n", row.h1, row.second, row.s_hat, loss, chosen));
    }
    Ok(out)
}
