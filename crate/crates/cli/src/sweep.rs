//! Simulation sweeps on a worker pool. Replicates run in any order; results
//! are reduced in replicate order, so the output does not depend on the
//! number of workers.

use std::path::Path;

use blocksig_core::baselines::IfpcaSelection;
use blocksig_core::cfa::CfaConfig;
use blocksig_core::recovery::RecoveryConfig;
use blocksig_core::sim::{GroundTruth, MethodOutcome, MethodSettings, SimConfig, SweepPlan, SweepResult};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io;
use crate::pipeline::SCHEMA_VERSION;

/// Runs every `(tau, replicate)` job on `threads` workers (`0`: one per
/// core).
pub fn run_parallel(plan: &SweepPlan, threads: usize) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let jobs = plan.jobs();
    let outcomes: Vec<Vec<MethodOutcome>> =
        pool.install(|| jobs.par_iter().map(|&(t, r)| plan.evaluate(t, r)).collect());
    Ok(SweepResult::reduce(plan, &outcomes))
}

pub fn sweep_csv(res: &SweepResult) -> String {
    let mut out = String::from("tau,method,clu_loss,sig_loss,reps,failures,flagged\n");
    for c in &res.cells {
        out.push_str(&format!(
            "{:?},{},{:?},{:?},{},{},{}\n",
            c.tau,
            c.method.name(),
            c.clu_loss,
            c.sig_loss,
            c.reps,
            c.failures,
            u8::from(c.flagged)
        ));
    }
    out
}

#[derive(Serialize)]
struct SettingsRecord {
    cfa: CfaConfig,
    ma_h3: usize,
    recovery: RecoveryConfig,
    kmeans_restarts: usize,
    kmeans_max_iter: usize,
    ifpca_top_k: Option<usize>,
    ifpca_threshold: Option<f64>,
}

impl From<&MethodSettings> for SettingsRecord {
    fn from(s: &MethodSettings) -> Self {
        let (k, t) = match s.ifpca {
            IfpcaSelection::TopK(k) => (Some(k), None),
            IfpcaSelection::Threshold(t) => (None, Some(t)),
        };
        Self {
            cfa: s.cfa,
            ma_h3: s.ma_h3,
            recovery: s.recovery,
            kmeans_restarts: s.kmeans_restarts,
            kmeans_max_iter: s.kmeans_max_iter,
            ifpca_top_k: k,
            ifpca_threshold: t,
        }
    }
}

#[derive(Serialize)]
struct TruthFile<'a> {
    schema_version: u32,
    config: &'a SimConfig,
    n: usize,
    m: usize,
    l_min: usize,
    l_max: usize,
    d0: usize,
    settings: SettingsRecord,
    truth: &'a GroundTruth,
}

/// Sidecar with the configuration (including the signal-strength grid), the
/// method settings and the drawn signal pattern.
pub fn write_truth(path: &Path, plan: &SweepPlan) -> Result<()> {
    let c = &plan.config;
    io::write_json(
        path,
        &TruthFile {
            schema_version: SCHEMA_VERSION,
            config: c,
            n: c.n(),
            m: c.m(),
            l_min: c.l_min(),
            l_max: c.l_max(),
            d0: c.d0(),
            settings: (&plan.settings).into(),
            truth: &plan.truth,
        },
    )
}
