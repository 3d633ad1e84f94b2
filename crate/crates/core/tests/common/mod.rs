#![allow(dead_code)]

use blocksig_core::numerics::RngStream;
use blocksig_core::{Block, DataMatrix, GridShape};
use rand::Rng;
use rand_distr::StandardNormal;

pub type TestRng = rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    RngStream::new(seed, 0).rng()
}

pub fn gaussian(n: usize, p: usize, rng: &mut TestRng) -> DataMatrix {
    let v = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    DataMatrix::new(n, p, v).unwrap()
}

pub fn gaussian_grid(n: usize, g: GridShape, rng: &mut TestRng) -> DataMatrix {
    gaussian(n, g.len(), rng).with_grid(g).unwrap()
}

/// Cyclic Jacobi rotations on a dense symmetric matrix. Returns eigenvalues
/// (descending) and the matching eigenvectors as rows.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| a[y * n + y].total_cmp(&a[x * n + x]));
    let values = idx.iter().map(|&k| a[k * n + k]).collect();
    let vectors = idx.iter().map(|&k| (0..n).map(|r| v[r * n + k]).collect()).collect();
    (values, vectors)
}

pub fn naive_block_mean(x: &DataMatrix, i: usize, b: &Block) -> f64 {
    let mut s = 0.0;
    for j in b.start..=b.end {
        s += x.get(i, j - 1);
    }
    s / (b.len() as f64).sqrt()
}

pub fn disjoint(a: &Block, b: &Block) -> bool {
    a.end < b.start || b.end < a.start
}

pub fn naive_expand(a: &Block, c: usize, p: usize) -> Block {
    Block { start: a.start.saturating_sub(c).max(1), end: (a.end + c).min(p) }
}

/// Literal step-down: repeatedly take the best survivor and delete what its
/// expansion touches.
pub fn brute_step_down(regions: &[Block], rank: &[f64], passes: &[bool], c: usize, p: usize) -> Vec<usize> {
    let mut alive: Vec<usize> = (0..regions.len()).filter(|&k| passes[k]).collect();
    let mut out = Vec::new();
    while !alive.is_empty() {
        let mut top = alive[0];
        for &k in &alive[1..] {
            if rank[k] > rank[top] || (rank[k] == rank[top] && regions[k] < regions[top]) {
                top = k;
            }
        }
        out.push(top);
        let e = naive_expand(&regions[top], c, p);
        alive.retain(|&k| disjoint(&e, &regions[k]));
    }
    out
}

/// `2 asin(|a - b| / 2)` for unit vectors aligned in sign; accurate for tiny
/// angles, unlike `acos` of the cosine.
pub fn angle(a: &[f64], b: &[f64]) -> f64 {
    let unit = |v: &[f64]| {
        let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / s).collect::<Vec<f64>>()
    };
    let (a, mut b) = (unit(a), unit(b));
    if a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() < 0.0 {
        b.iter_mut().for_each(|x| *x = -*x);
    }
    let d = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    2.0 * (d / 2.0).asin()
}


pub struct PairScan {
    pub block: Block,
    pub partner: Block,
    pub w0: f64,
    pub sigma_w: f64,
}

/// Every block of length `2..=h1 + 1` against every block missing its
/// `h2` expansion, by explicit loops over observations and columns.
pub fn exhaustive_pair_scan(x: &DataMatrix, h1: usize, h2: usize) -> Vec<PairScan> {
    let (n, p) = (x.n(), x.p());
    let mut blocks = Vec::new();
    for s in 1..=p {
        for e in s + 1..=(s + h1).min(p) {
            blocks.push(Block { start: s, end: e });
        }
    }
    blocks.sort();
    let mut out = Vec::new();
    for b in &blocks {
        let e = naive_expand(b, h2, p);
        let mut best: Option<(f64, Block)> = None;
        for other in &blocks {
            if !disjoint(&e, other) {
                continue;
            }
            let dot: f64 = (0..n)
                .map(|i| naive_block_mean(x, i, b) * naive_block_mean(x, i, other))
                .sum();
            if best.map_or(true, |(d, _)| dot.abs() > d.abs()) {
                best = Some((dot, *other));
            }
        }
        let (dot, partner) = best.expect("some admissible partner");
        let w0 = dot / (n as f64).sqrt();
        let w: Vec<f64> = (0..n)
            .map(|i| naive_block_mean(x, i, b) * naive_block_mean(x, i, &partner))
            .collect();
        let var = (w.iter().map(|v| v * v).sum::<f64>() - w0 * w0) / n as f64;
        out.push(PairScan { block: *b, partner, w0, sigma_w: var.max(0.0).sqrt() });
    }
    out
}
