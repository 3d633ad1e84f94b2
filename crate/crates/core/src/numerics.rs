//! Numeric building blocks shared by every pipeline: Gram matrices, the
//! leading eigenvector, prefix-sum tables and seeded random streams.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{DataMatrix, GridShape, LabelVector};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Relative gap between the two leading eigenvalues below which the spectrum
/// is reported as degenerate.
const DEGENERATE_GAP: f64 = 1e-6;
const MAX_SQUARINGS: usize = 32;
const FALLBACK_SEED: u64 = 0x5eed_0f_b10c;

/// Symmetric `n x n` matrix, usually `Y Y^T` for some `n x w` matrix `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl GramMatrix {
    /// Wraps explicit entries (row-major). Rejects asymmetric input.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::input(format!(
                "expected {} entries for a {n} x {n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (entries[i * n + j], entries[j * n + i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::input(format!(
                        "matrix not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { n, entries })
    }

    /// `Y Y^T` for the `n x width` row-major matrix `rows`.
    pub fn from_row_major(n: usize, width: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), n * width, "row buffer has wrong length");
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            let ri = &rows[i * width..(i + 1) * width];
            for j in i..n {
                let v = dot(ri, &rows[j * width..(j + 1) * width]);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self { n, entries }
    }

    pub fn from_data(x: &DataMatrix) -> Self {
        Self::from_row_major(x.n(), x.p(), x.as_slice())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&self.entries[i * self.n..(i + 1) * self.n], x);
        }
    }
}

/// Result of [`leading_eigenvector`].
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    /// Unit vector, signed so its largest-magnitude entry is positive.
    pub vector: Vec<f64>,
    pub value: f64,
    /// Matrix-vector products spent in the refinement phase.
    pub iterations: usize,
    /// `false` when `max_iter` ran out before the residual test passed; the
    /// vector is then the best iterate.
    pub converged: bool,
    /// The second eigenvalue is within a relative `1e-6` of the first, so the
    /// leading eigenvector is not well defined.
    pub degenerate: bool,
}

/// Leading eigenvector of a positive semidefinite matrix by the power method.
///
/// The iteration starts from the normalized all-ones vector (or a seeded
/// random unit vector when that start has a negligible Rayleigh quotient) and
/// is preconditioned by repeated squaring of `G`, which makes the cost
/// independent of the spectral gap. Plain power steps on `G` then run until
/// `||G v - (v'Gv) v|| <= tol * (v'Gv)`.
pub fn leading_eigenvector(g: &GramMatrix, tol: f64, max_iter: usize) -> Result<Eigenpair> {
    let n = g.n;
    if n < 2 {
        return Err(Error::input(format!("need n >= 2, got {n}")));
    }
    if !(tol > 0.0) {
        return Err(Error::input("tolerance must be positive"));
    }
    if let Some(k) = g.entries.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!(
            "non-finite matrix entry at ({}, {})",
            k / n + 1,
            k % n + 1
        )));
    }
    let scale = max_abs(&g.entries);
    if scale == 0.0 {
        return Err(Error::DegenerateSpectrum("zero matrix".into()));
    }

    // M = (G / scale)^(2^k), renormalized after every squaring.
    let mut m: Vec<f64> = g.entries.iter().map(|v| v / scale).collect();
    let mut sq = vec![0.0; n * n];
    for _ in 0..MAX_SQUARINGS {
        square_symmetric(&m, n, &mut sq);
        let s = max_abs(&sq);
        if s == 0.0 {
            break;
        }
        sq.iter_mut().for_each(|v| *v /= s);
        let delta = m
            .iter()
            .zip(&sq)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        core::mem::swap(&mut m, &mut sq);
        if delta <= 1e-14 {
            break;
        }
    }

    let mut start = vec![1.0 / libm::sqrt(n as f64); n];
    let mut gx = vec![0.0; n];
    g.apply(&start, &mut gx);
    if dot(&start, &gx) < 1e-12 * g.trace() / n as f64 {
        start = random_unit(n, RngStream::new(FALLBACK_SEED, 0));
    }
    let mut x = vec![0.0; n];
    mat_vec(&m, n, &start, &mut x);
    let best_col = (0..n)
        .max_by(|&a, &b| m[a * n + a].total_cmp(&m[b * n + b]))
        .unwrap_or(0);
    if norm(&x) < 1e-6 * norm(&m[best_col * n..(best_col + 1) * n]) {
        // start was (numerically) orthogonal to the dominant direction
        x.copy_from_slice(&m[best_col * n..(best_col + 1) * n]);
    }
    normalize(&mut x)?;

    let mut y = vec![0.0; n];
    let mut value;
    let mut converged = false;
    let mut iterations = 0;
    loop {
        g.apply(&x, &mut y);
        iterations += 1;
        value = dot(&x, &y);
        let resid = libm::sqrt(
            x.iter()
                .zip(&y)
                .map(|(a, b)| (b - value * a) * (b - value * a))
                .sum::<f64>(),
        );
        if resid <= tol * value.abs() {
            converged = true;
            break;
        }
        if iterations >= max_iter.max(1) {
            break;
        }
        if norm(&y) == 0.0 {
            break;
        }
        x.copy_from_slice(&y);
        normalize(&mut x)?;
    }

    let degenerate = second_eigenvalue_close(g, &x, value);
    orient(&mut x);
    Ok(Eigenpair {
        vector: x,
        value,
        iterations,
        converged,
        degenerate,
    })
}

/// Estimates the top eigenvalue of `G - value * v v^T` from below and
/// compares it with `value`.
fn second_eigenvalue_close(g: &GramMatrix, v: &[f64], value: f64) -> bool {
    let n = g.n;
    let mut x = random_unit(n, RngStream::new(FALLBACK_SEED, 1));
    let mut y = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..200 {
        let proj = dot(&x, v);
        x.iter_mut().zip(v).for_each(|(a, b)| *a -= proj * b);
        if normalize(&mut x).is_err() {
            return false;
        }
        g.apply(&x, &mut y);
        let proj = dot(&y, v);
        y.iter_mut().zip(v).for_each(|(a, b)| *a -= proj * b);
        estimate = dot(&x, &y);
        if estimate >= (1.0 - DEGENERATE_GAP) * value {
            return true;
        }
        x.copy_from_slice(&y);
    }
    estimate >= (1.0 - DEGENERATE_GAP) * value
}

/// Flips `v` so that its largest-magnitude entry (lowest index on ties) is
/// positive.
pub fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Entry-wise sign with zeros mapped to `+1`.
pub fn sign_labels(v: &[f64]) -> LabelVector {
    LabelVector::from_signs(v)
}

/// Cluster labels from the leading eigenvector of `g` with default settings.
pub(crate) fn spectral_labels(g: &GramMatrix) -> Result<LabelVector> {
    let eig = leading_eigenvector(g, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(sign_labels(&eig.vector))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

fn normalize(a: &mut [f64]) -> Result<()> {
    let s = norm(a);
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::DegenerateSpectrum("iterate vanished".into()));
    }
    a.iter_mut().for_each(|v| *v /= s);
    Ok(())
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn square_symmetric(m: &[f64], n: usize, out: &mut [f64]) {
    // m symmetric, so (m m)_{ij} = <row_i, row_j>
    for i in 0..n {
        for j in i..n {
            let v = dot(&m[i * n..(i + 1) * n], &m[j * n..(j + 1) * n]);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
}

fn mat_vec(m: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&m[i * n..(i + 1) * n], x);
    }
}

fn random_unit(n: usize, stream: RngStream) -> Vec<f64> {
    let mut rng = stream.rng();
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let s = norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Row-wise cumulative sums `S[i][0] = 0`, `S[i][j] = S[i][j-1] + X[i][j]`.
#[derive(Debug, Clone)]
pub struct PrefixSumTable {
    n: usize,
    p: usize,
    sums: Vec<f64>,
}

impl PrefixSumTable {
    pub fn new(x: &DataMatrix) -> Self {
        let (n, p) = (x.n(), x.p());
        let mut sums = Vec::with_capacity(n * (p + 1));
        for row in x.rows() {
            let mut acc = 0.0;
            sums.push(0.0);
            for &v in row {
                acc += v;
                sums.push(acc);
            }
        }
        Self { n, p, sums }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `S[i][j]` for `0 <= j <= p`.
    #[inline]
    pub fn cumulative(&self, i: usize, j: usize) -> f64 {
        self.sums[i * (self.p + 1) + j]
    }

    /// Sum of `X[i][start..=end]` (1-based, inclusive); no range checks.
    #[inline]
    pub fn range_sum(&self, i: usize, start: usize, end: usize) -> f64 {
        let base = i * (self.p + 1);
        self.sums[base + end] - self.sums[base + start - 1]
    }
}

/// Per-observation 2-D summed-area tables for matrix-valued rows.
#[derive(Debug, Clone)]
pub struct SummedAreaTable {
    n: usize,
    shape: GridShape,
    sums: Vec<f64>,
}

impl SummedAreaTable {
    pub fn new(x: &DataMatrix, shape: GridShape) -> Result<Self> {
        if shape.len() != x.p() {
            return Err(Error::input(format!(
                "grid {}x{} inconsistent with {} columns",
                shape.p1,
                shape.p2,
                x.p()
            )));
        }
        let (p1, p2) = (shape.p1, shape.p2);
        let stride = (p1 + 1) * (p2 + 1);
        let mut sums = vec![0.0; x.n() * stride];
        for (i, row) in x.rows().enumerate() {
            let t = &mut sums[i * stride..(i + 1) * stride];
            for a in 1..=p1 {
                let mut row_acc = 0.0;
                for b in 1..=p2 {
                    row_acc += row[(a - 1) * p2 + (b - 1)];
                    t[a * (p2 + 1) + b] = t[(a - 1) * (p2 + 1) + b] + row_acc;
                }
            }
        }
        Ok(Self {
            n: x.n(),
            shape,
            sums,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    /// Sum over the 1-based inclusive rectangle `[a0, a1] x [b0, b1]`.
    #[inline]
    pub fn box_sum(&self, i: usize, a0: usize, a1: usize, b0: usize, b1: usize) -> f64 {
        let w = self.shape.p2 + 1;
        let t = &self.sums[i * (self.shape.p1 + 1) * w..];
        t[a1 * w + b1] - t[(a0 - 1) * w + b1] - t[a1 * w + (b0 - 1)] + t[(a0 - 1) * w + (b0 - 1)]
    }
}

/// Seed plus stream id. Identical pairs give identical sequences on every
/// platform; distinct stream ids under one seed are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

pub type StreamRng = ChaCha8Rng;

impl RngStream {
    pub const fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// A new family of streams keyed by `(seed, stream, salt)`.
    pub fn derive(&self, salt: u64) -> RngStream {
        let mut h = splitmix64(self.seed ^ splitmix64(self.stream));
        h = splitmix64(h ^ salt.rotate_left(17));
        RngStream::new(h, salt)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
