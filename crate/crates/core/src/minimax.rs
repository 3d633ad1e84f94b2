//! Closed-form boundaries of the signal-strength exponent `r` (signal size
//! `p^{-r}`) beyond which clustering or signal recovery fails, for all
//! procedures (`eta`) and for polynomial-time procedures (`eta_tilde`).
//!
//! The parameters are the sample-size exponent `theta` (`n = p^theta`), the
//! block-size exponent `alpha` and the sparsity exponent `beta`
//! (`p^{1 - alpha - beta}` blocks).

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Distance from a breakpoint within which `beta` is treated as on it.
pub const BREAKPOINT_TOL: f64 = 1e-12;

pub fn c1(theta: f64, alpha: f64) -> f64 {
    (1.0 - theta - alpha) / 2.0
}

pub fn c2(theta: f64, alpha: f64) -> f64 {
    1.0 - theta / 2.0 - alpha
}

/// Value of a boundary function. The functions are only defined between
/// breakpoints; on one, both one-sided limits are returned.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BoundaryValue {
    Value(f64),
    Breakpoint { left: f64, right: f64 },
}

impl BoundaryValue {
    /// The value, or the smaller one-sided limit on a breakpoint.
    pub fn lower(&self) -> f64 {
        match *self {
            BoundaryValue::Value(v) => v,
            BoundaryValue::Breakpoint { left, right } => left.min(right),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            BoundaryValue::Value(v) => Some(v),
            BoundaryValue::Breakpoint { .. } => None,
        }
    }

    pub fn is_breakpoint(&self) -> bool {
        matches!(self, BoundaryValue::Breakpoint { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Boundaries {
    pub eta_clu: BoundaryValue,
    pub eta_sig: BoundaryValue,
    pub eta_tilde_clu: BoundaryValue,
    pub eta_tilde_sig: BoundaryValue,
}

type Piece = fn(f64, f64, f64) -> f64;

fn dense_clu(t: f64, a: f64, b: f64) -> f64 {
    (1.0 + t + a - 2.0 * b) / 4.0
}

fn flat(t: f64, a: f64, _: f64) -> f64 {
    (t + a) / 2.0
}

fn sparse_clu(_: f64, _: f64, b: f64) -> f64 {
    (1.0 - b) / 2.0
}

fn sparse_sig(t: f64, a: f64, b: f64) -> f64 {
    (1.0 + t + a - b) / 4.0
}

fn comp_flat(t: f64, a: f64, _: f64) -> f64 {
    t / 4.0 + a / 2.0
}

/// `pieces[k]` applies below `cuts[k]` (and above `cuts[k - 1]`).
fn piecewise(theta: f64, alpha: f64, beta: f64, cuts: &[f64], pieces: &[Piece]) -> BoundaryValue {
    debug_assert_eq!(cuts.len() + 1, pieces.len());
    for (k, &c) in cuts.iter().enumerate() {
        if (beta - c).abs() <= BREAKPOINT_TOL {
            return BoundaryValue::Breakpoint {
                left: pieces[k](theta, alpha, c),
                right: pieces[k + 1](theta, alpha, c),
            };
        }
    }
    let k = cuts.iter().take_while(|&&c| beta > c).count();
    BoundaryValue::Value(pieces[k](theta, alpha, beta))
}

pub fn validate(theta: f64, alpha: f64, beta: f64) -> Result<()> {
    let ok = theta > 0.0
        && theta < 1.0
        && alpha >= 0.0
        && alpha < 1.0
        && theta < 1.0 - alpha
        && beta > 0.0
        && beta < 1.0 - alpha;
    if ok {
        Ok(())
    } else {
        Err(Error::input(format!(
            "need 0 < theta < 1 - alpha, 0 <= alpha < 1, 0 < beta < 1 - alpha; got theta = {theta}, alpha = {alpha}, beta = {beta}"
        )))
    }
}

pub fn eval_boundaries(theta: f64, alpha: f64, beta: f64) -> Result<Boundaries> {
    validate(theta, alpha, beta)?;
    let (c1, c2) = (c1(theta, alpha), c2(theta, alpha));
    let mid = (1.0 - alpha) / 2.0;
    let pw = |cuts: &[f64], pieces: &[Piece]| piecewise(theta, alpha, beta, cuts, pieces);
    Ok(Boundaries {
        eta_clu: pw(&[c1, 2.0 * c1], &[dense_clu, flat, sparse_clu]),
        eta_sig: pw(&[2.0 * c1], &[flat, sparse_sig]),
        eta_tilde_clu: pw(&[mid, c2], &[dense_clu, comp_flat, sparse_clu]),
        eta_tilde_sig: pw(&[c1, mid], &[flat, dense_clu, comp_flat]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PhaseClass {
    /// `r` above the statistical boundary.
    StatImpossible,
    /// Between the computational and the statistical boundary.
    CompImpossible,
    /// At or below the computational boundary.
    PolyAchievable,
}

impl PhaseClass {
    pub fn classify(r: f64, eta: &BoundaryValue, eta_tilde: &BoundaryValue) -> Self {
        if r > eta.lower() {
            PhaseClass::StatImpossible
        } else if r > eta_tilde.lower() {
            PhaseClass::CompImpossible
        } else {
            PhaseClass::PolyAchievable
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseClass::StatImpossible => "stat_impossible",
            PhaseClass::CompImpossible => "comp_impossible",
            PhaseClass::PolyAchievable => "poly_achievable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseCell {
    pub beta: f64,
    pub r: f64,
    pub clu: PhaseClass,
    pub sig: PhaseClass,
}

/// Classifies every `(beta, r)` pair, `beta` outer. Invalid `beta` values
/// are skipped.
pub fn phase_grid(theta: f64, alpha: f64, betas: &[f64], rs: &[f64]) -> Vec<PhaseCell> {
    let mut out = Vec::with_capacity(betas.len() * rs.len());
    for &beta in betas {
        let Ok(b) = eval_boundaries(theta, alpha, beta) else {
            continue;
        };
        for &r in rs {
            out.push(PhaseCell {
                beta,
                r,
                clu: PhaseClass::classify(r, &b.eta_clu, &b.eta_tilde_clu),
                sig: PhaseClass::classify(r, &b.eta_sig, &b.eta_tilde_sig),
            });
        }
    }
    out
}
