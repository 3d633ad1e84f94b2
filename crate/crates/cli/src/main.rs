use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blocksig::error::{CliError, Result};
use blocksig::io::{self, Format, LoadOptions, NanPolicy};
use blocksig::pipeline::{self, Manifest};
use blocksig::{ingest, sweep};
use blocksig_core::minimax::phase_grid;
use blocksig_core::recovery::RecoveryConfig;
use blocksig_core::sim::{Method, MethodSettings, SignalLayout, SimConfig, SweepPlan};
use blocksig_core::tuning::{default_h_max, TuningGrid, DEFAULT_EPSILON};
use blocksig_core::{EnumerationMode, GridShape};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "blocksig", version, about = "Clustering and block-signal recovery for high-dimensional data")]
struct Cli {
    /// Worker threads for parallel stages (0: one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cluster observations and identify signal blocks.
    Cluster(ClusterArgs),
    /// Identify signal blocks from given labels.
    Recover(RecoverArgs),
    /// Choose windows by the number of recovered signal coordinates.
    Tune(TuneArgs),
    /// Monte-Carlo sweep over signal strengths.
    Simulate(SimulateArgs),
    /// Classify (beta, r) points against the minimax boundaries.
    Phase(PhaseArgs),
    /// Row-to-row differences of a time-ordered panel.
    Diff(DiffArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Matrix file, rows are observations (CSV or .bin).
    #[arg(long, short)]
    input: PathBuf,
    /// Grid rows when each row is a flattened p1 x p2 matrix.
    #[arg(long, requires = "p2")]
    p1: Option<usize>,
    #[arg(long, requires = "p1")]
    p2: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    format: Format,
    #[arg(long, value_enum, default_value_t = NanPolicy::Reject)]
    nan: NanPolicy,
    /// The CSV file starts with a header line.
    #[arg(long)]
    header: bool,
}

impl InputArgs {
    fn grid(&self) -> Option<GridShape> {
        self.p1.zip(self.p2).map(|(a, b)| GridShape::new(a, b))
    }

    fn options(&self) -> LoadOptions {
        LoadOptions { format: self.format, nan: self.nan, header: self.header, grid: self.grid() }
    }

    fn load(&self) -> Result<blocksig_core::DataMatrix> {
        io::load_matrix(&self.input, &self.options())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Cfa,
    Ma,
    Spectral,
    Kmeans,
    Ifpca,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cfa => Method::Cfa,
            MethodArg::Ma => Method::Ma,
            MethodArg::Spectral => Method::Spectral,
            MethodArg::Kmeans => Method::Kmeans,
            MethodArg::Ifpca => Method::Ifpca,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EnumArg {
    Full,
    Dyadic,
    Auto,
}

impl From<EnumArg> for EnumerationMode {
    fn from(e: EnumArg) -> Self {
        match e {
            EnumArg::Full => EnumerationMode::Full,
            EnumArg::Dyadic => EnumerationMode::Dyadic,
            EnumArg::Auto => EnumerationMode::Auto,
        }
    }
}

#[derive(Args)]
struct WindowArgs {
    /// Candidate blocks have length at most h1 + 1 per mode.
    #[arg(long, default_value_t = 5)]
    h1: usize,
    /// Partner exclusion window of the cross-block screen [default: h1].
    #[arg(long)]
    h2: Option<usize>,
    /// Moving-average window.
    #[arg(long, default_value_t = 3)]
    h3: usize,
    /// s in the screen threshold sqrt(s ln(p h1)).
    #[arg(long, default_value_t = blocksig_core::cfa::DEFAULT_THRESHOLD_SCALE)]
    threshold_scale: f64,
    /// s in the recovery threshold sqrt(s ln(p h1)).
    #[arg(long, default_value_t = blocksig_core::recovery::DEFAULT_THRESHOLD_SCALE)]
    recovery_scale: f64,
    #[arg(long, value_enum, default_value_t = EnumArg::Auto)]
    enumeration: EnumArg,
    #[arg(long, default_value_t = 2)]
    min_len: usize,
}

#[derive(Args)]
struct ClusterArgs {
    /// Read every setting from a JSON manifest instead of flags.
    #[arg(long, conflicts_with_all = ["input", "method", "out"])]
    manifest: Option<PathBuf>,
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, requires = "p2")]
    p1: Option<usize>,
    #[arg(long, requires = "p1")]
    p2: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    format: Format,
    #[arg(long, value_enum, default_value_t = NanPolicy::Reject)]
    nan: NanPolicy,
    #[arg(long)]
    header: bool,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[command(flatten)]
    windows: WindowArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// k-means restarts.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Columns kept by the IF-PCA-lite screen [default: ceil(sqrt(p))].
    #[arg(long)]
    top_k: Option<usize>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RecoverArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Labels as JSON (from `cluster`) or a list of 1 / -1.
    #[arg(long, short)]
    labels: PathBuf,
    #[arg(long, default_value_t = 5)]
    h1: usize,
    #[arg(long, default_value_t = blocksig_core::recovery::DEFAULT_THRESHOLD_SCALE)]
    recovery_scale: f64,
    #[arg(long, value_enum, default_value_t = EnumArg::Full)]
    enumeration: EnumArg,
    #[arg(long, default_value_t = 2)]
    min_len: usize,
    /// Block JSON output [default: stdout].
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the signal index list here.
    #[arg(long)]
    signal: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Ma)]
    method: MethodArg,
    /// Largest window [default: 15, 25, 30 for p1 = 50, 100, 200].
    #[arg(long)]
    h_max: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Moving-average window for the screen's last fallback.
    #[arg(long, default_value_t = 3)]
    h3: usize,
    #[arg(long, default_value_t = blocksig_core::cfa::DEFAULT_THRESHOLD_SCALE)]
    threshold_scale: f64,
    #[arg(long, value_enum, default_value_t = EnumArg::Auto)]
    enumeration: EnumArg,
    /// True labels; adds the clustering loss of every grid point.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Regime {
    Dense,
    Sparse,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Block,
    Scattered,
}

#[derive(Args)]
struct SimulateArgs {
    /// Preset exponents and signal strengths. Dense: alpha 0.5, beta 0.24.
    /// Sparse: alpha 0.3, beta 0.6, full enumeration for the screen.
    #[arg(long, value_enum, default_value_t = Regime::Dense)]
    regime: Regime,
    #[arg(long, default_value_t = 50)]
    p1: usize,
    /// [default: p1]
    #[arg(long)]
    p2: Option<usize>,
    #[arg(long, default_value_t = 0.4)]
    theta: f64,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 0.8)]
    rho_min: f64,
    #[arg(long, default_value_t = 1.25)]
    rho_max: f64,
    #[arg(long, default_value_t = 1.5)]
    rho0: f64,
    /// Signal strengths [default: the regime's grid].
    #[arg(long, value_delimiter = ',')]
    tau: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', value_enum, default_values_t = [MethodArg::Cfa, MethodArg::Ma, MethodArg::Spectral, MethodArg::Kmeans])]
    methods: Vec<MethodArg>,
    #[arg(long, value_enum, default_value_t = LayoutArg::Block)]
    layout: LayoutArg,
    /// Enumeration of the screen [default: full for sparse, auto otherwise].
    #[arg(long, value_enum)]
    cfa_enumeration: Option<EnumArg>,
    #[arg(long)]
    h1: Option<usize>,
    #[arg(long)]
    h2: Option<usize>,
    #[arg(long)]
    h3: Option<usize>,
    /// Sweep CSV [default: stdout].
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Ground-truth JSON sidecar.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long, default_value_t = 0.4)]
    theta: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Explicit beta values; otherwise `beta_steps` interior points of (0, 1 - alpha).
    #[arg(long, value_delimiter = ',')]
    betas: Vec<f64>,
    #[arg(long, default_value_t = 99)]
    beta_steps: usize,
    /// Explicit r values; otherwise `r_steps` points of [0, 1].
    #[arg(long, value_delimiter = ',')]
    rs: Vec<f64>,
    #[arg(long, default_value_t = 101)]
    r_steps: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiffArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, short)]
    output: PathBuf,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => io::write_text(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let (m, opts) = match a.manifest {
        Some(path) => (Manifest::load(&path)?, LoadOptions::default()),
        None => {
            let missing = |f: &str| CliError::Config(format!("--{f} is required without --manifest"));
            let input = a.input.ok_or_else(|| missing("input"))?;
            let method = a.method.ok_or_else(|| missing("method"))?;
            let out = a.out.ok_or_else(|| missing("out"))?;
            let w = &a.windows;
            let m = Manifest {
                grid: a.p1.zip(a.p2).map(|(x, y)| [x, y]),
                h2: w.h2,
                threshold_scale: w.threshold_scale,
                recovery_scale: w.recovery_scale,
                enumeration: w.enumeration.into(),
                min_len: w.min_len,
                seed: a.seed,
                kmeans_restarts: a.restarts,
                ifpca_top_k: a.top_k,
                ..Manifest::new(input, method.into(), w.h1, w.h3, out)
            };
            let opts = LoadOptions { format: a.format, nan: a.nan, header: a.header, grid: None };
            (m, opts)
        }
    };
    let art = pipeline::run_pipeline(&m, &opts)?;
    for note in &art.notes {
        eprintln!("note: {note}");
    }
    eprintln!(
        "{} blocks, {} signal coordinates, groups {:?}",
        art.blocks.len(),
        art.signal.len(),
        art.labels.group_sizes()
    );
    Ok(())
}

fn recover(a: RecoverArgs) -> Result<()> {
    let x = a.input.load()?;
    let labels = io::load_labels(&a.labels)?;
    let cfg = RecoveryConfig {
        threshold_scale: a.recovery_scale,
        enumeration: a.enumeration.into(),
        min_len: a.min_len,
        ..RecoveryConfig::new(a.h1)
    };
    let (blocks, signal) = pipeline::recover_blocks(&x, &labels, &cfg)?;
    match &a.out {
        Some(p) => pipeline::write_blocks(p, &blocks)?,
        None => {
            let s = serde_json::to_string_pretty(&serde_json::json!({
                "schema_version": pipeline::SCHEMA_VERSION,
                "blocks": blocks,
            }))
            .expect("serializable");
            emit(None, &(s + "\n"))?;
        }
    }
    if let Some(p) = &a.signal {
        let text: String = signal.iter().map(|j| format!("{j}\n")).collect();
        io::write_text(p, &text)?;
    }
    Ok(())
}

fn tune(a: TuneArgs) -> Result<()> {
    let x = a.input.load()?;
    let h_max = match a.h_max {
        Some(h) => h,
        None => a
            .input
            .p1
            .and_then(default_h_max)
            .ok_or_else(|| CliError::Config("--h-max is required unless p1 is 50, 100 or 200".into()))?,
    };
    let mut grid = TuningGrid::triangle(h_max)?;
    grid.epsilon = a.epsilon;
    let grid = TuningGrid::new(grid.points, grid.epsilon)?;
    let m = Manifest {
        threshold_scale: a.threshold_scale,
        enumeration: a.enumeration.into(),
        ..Manifest::new(a.input.input.clone(), a.method.into(), 1, a.h3, PathBuf::new())
    };
    let truth = a.truth.as_deref().map(io::load_labels).transpose()?;
    let res = pipeline::tune(&x, &m, &grid)?;
    if res.no_signal {
        eprintln!("note: no grid point found any signal");
    }
    eprintln!("chosen h1 = {}, second = {}", res.h1, res.second);
    emit(a.out.as_deref(), &pipeline::tuning_csv(&res, truth.as_ref())?)
}

/// Signal strengths calibrated on 50 x 50 grids.
fn default_taus(r: Regime) -> Vec<f64> {
    match r {
        Regime::Dense => vec![0.1, 0.15, 0.2, 0.25, 0.3, 0.5, 0.7, 1.0],
        Regime::Sparse => vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 1.0],
    }
}

fn simulate(a: SimulateArgs, threads: usize) -> Result<()> {
    let (alpha, beta) = match a.regime {
        Regime::Dense => (0.5, 0.24),
        Regime::Sparse => (0.3, 0.6),
    };
    let mut cfg = SimConfig::new(a.p1, a.p2.unwrap_or(a.p1), a.alpha.unwrap_or(alpha), a.beta.unwrap_or(beta));
    cfg.theta = a.theta;
    cfg.rho_min = a.rho_min;
    cfg.rho_max = a.rho_max;
    cfg.rho0 = a.rho0;
    cfg.tau_grid = if a.tau.is_empty() { default_taus(a.regime) } else { a.tau };
    cfg.reps = a.reps;
    cfg.seed = a.seed;
    cfg.layout = match a.layout {
        LayoutArg::Block => SignalLayout::Block,
        LayoutArg::Scattered => SignalLayout::Scattered,
    };
    cfg.validate()?;
    let mut settings = MethodSettings::for_config(&cfg);
    let mode = match (a.cfa_enumeration, a.regime) {
        (Some(e), _) => e.into(),
        (None, Regime::Sparse) => EnumerationMode::Full,
        (None, Regime::Dense) => EnumerationMode::Auto,
    };
    settings = settings.with_cfa_enumeration(mode);
    if let Some(h1) = a.h1 {
        settings.cfa.h1 = h1;
        settings.cfa.h2 = settings.cfa.h2.max(h1);
        settings.recovery.h1 = h1;
    }
    if let Some(h2) = a.h2 {
        settings.cfa.h2 = h2;
    }
    if let Some(h3) = a.h3 {
        settings.ma_h3 = h3;
    }
    settings.cfa.validate()?;
    let methods: Vec<Method> = a.methods.iter().map(|&m| m.into()).collect();
    let plan = SweepPlan::new(cfg, methods, settings)?;
    if let Some(p) = &a.truth {
        sweep::write_truth(p, &plan)?;
    }
    let res = sweep::run_parallel(&plan, threads)?;
    for c in res.cells.iter().filter(|c| c.flagged) {
        eprintln!("warning: {} at tau = {} failed in {} replicates", c.method.name(), c.tau, c.failures);
    }
    emit(a.out.as_deref(), &sweep::sweep_csv(&res))
}

fn phase(a: PhaseArgs) -> Result<()> {
    let betas = if a.betas.is_empty() {
        let top = 1.0 - a.alpha;
        (1..=a.beta_steps).map(|k| top * k as f64 / (a.beta_steps + 1) as f64).collect()
    } else {
        a.betas
    };
    let rs = if a.rs.is_empty() {
        let d = a.r_steps.saturating_sub(1).max(1) as f64;
        (0..a.r_steps).map(|k| k as f64 / d).collect()
    } else {
        a.rs
    };
    // theta and alpha are checked at a beta that is always valid
    blocksig_core::minimax::validate(a.theta, a.alpha, (1.0 - a.alpha) / 2.0)?;
    let mut out = String::from("beta,r,class_clu,class_sig\n");
    for c in phase_grid(a.theta, a.alpha, &betas, &rs) {
        out.push_str(&format!("{:?},{:?},{},{}\n", c.beta, c.r, c.clu.as_str(), c.sig.as_str()));
    }
    emit(a.out.as_deref(), &out)
}

fn diff(a: DiffArgs) -> Result<()> {
    let x = a.input.load()?;
    let d = ingest::difference_series(&x)?;
    io::save_matrix(&d, &a.output, a.input.format)
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    match cli.cmd {
        Cmd::Simulate(a) => simulate(a, threads),
        cmd => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
            pool.install(|| match cmd {
                Cmd::Cluster(a) => cluster(a),
                Cmd::Recover(a) => recover(a),
                Cmd::Tune(a) => tune(a),
                Cmd::Phase(a) => phase(a),
                Cmd::Diff(a) => diff(a),
                Cmd::Simulate(_) => unreachable!(),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
