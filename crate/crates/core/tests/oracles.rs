mod common;

use blocksig_core::block::{enumerate_blocks, Region};
use blocksig_core::cfa::{aggregated_features, cross_scan, CfaConfig};
use blocksig_core::ma::{moving_average_matrix, moving_average_matrix_2d};
use blocksig_core::numerics::{leading_eigenvector, GramMatrix, PrefixSumTable, SummedAreaTable};
use blocksig_core::recovery::{identify_blocks, AlignedScanStat, RecoveryConfig};
use blocksig_core::{Block, EnumerationMode, GridShape, TensorBlock};
use common::{
    angle, brute_step_down, exhaustive_pair_scan, gaussian, gaussian_grid, jacobi_eigen, naive_block_mean, rng,
};
use rand::Rng;

#[test]
fn cross_scan_matches_exhaustive_pairs() {
    let mut r = rng(11);
    let (n, p, h1, h2) = (6, 30, 2, 6);
    for _ in 0..20 {
        let x = gaussian(n, p, &mut r);
        let cfg = CfaConfig { enumeration: EnumerationMode::Full, ..CfaConfig::new(h1, h2) };
        let got = cross_scan::<Block>(&x, &cfg).unwrap();
        let want = exhaustive_pair_scan(&x, h1, h2);
        assert_eq!(got.len(), want.len());
        for (c, w) in got.iter().zip(&want) {
            assert_eq!(c.block, w.block);
            assert_eq!(c.partner, w.partner, "partner of {}", w.block);
            assert!((c.w0 - w.w0).abs() < 1e-10, "{} vs {}", c.w0, w.w0);
            assert!((c.sigma_w - w.sigma_w).abs() < 1e-10);
        }
    }
}

#[test]
fn step_down_matches_brute_force_loop() {
    let mut r = rng(12);
    for case in 0..100 {
        let p = r.random_range(5..=200);
        let h1 = r.random_range(1..=4);
        let regions = enumerate_blocks(p, h1, 2.min(h1 + 1), EnumerationMode::Full).unwrap();
        // coarse ranks force ties
        let stats: Vec<AlignedScanStat<Block>> = regions
            .iter()
            .map(|&b| {
                let y0 = f64::from(r.random_range(-20i32..=20)) / 4.0;
                let standardized = r.random_range(0.0..12.0);
                AlignedScanStat { block: b, y0, sigma: 1.0, standardized, degenerate: false }
            })
            .collect();
        let cfg = RecoveryConfig { enumeration: EnumerationMode::Full, ..RecoveryConfig::new(h1) };
        let t = cfg.threshold(p);
        let rank: Vec<f64> = stats.iter().map(|s| s.y0.abs()).collect();
        let passes: Vec<bool> = stats.iter().map(|s| s.standardized > t).collect();
        let want: Vec<Block> = brute_step_down(&regions, &rank, &passes, h1 / 2, p)
            .into_iter()
            .map(|k| regions[k])
            .collect();
        let got = identify_blocks(&stats, p, &cfg).regions();
        assert_eq!(got, want, "case {case}: p = {p}, h1 = {h1}");
    }
}

#[test]
fn power_iteration_matches_jacobi() {
    let mut r = rng(13);
    let mut checked = 0;
    while checked < 100 {
        let n = r.random_range(3..=30);
        let p = r.random_range(1..=40);
        let x = gaussian(n, p, &mut r);
        let g = GramMatrix::from_data(&x);
        let (values, vectors) = jacobi_eigen(g.entries(), n);
        if values[0] - values[1] < 1e-3 * values[0] {
            continue;
        }
        let eig = leading_eigenvector(&g, 1e-10, 10_000).unwrap();
        assert!(eig.converged);
        assert!(!eig.degenerate);
        let a = angle(&eig.vector, &vectors[0]);
        assert!(a < 1e-8, "n = {n}, p = {p}: angle {a:e}");
        assert!((eig.value - values[0]).abs() < 1e-9 * values[0]);
        checked += 1;
    }
}

#[test]
fn near_degenerate_gap_still_resolved() {
    // eigenvalues 1 and 1 - 1e-3 on a rotated basis
    let (c, s) = (0.6f64, 0.8f64);
    let (l1, l2, l3) = (1.0, 1.0 - 1e-3, 0.2);
    let u = [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]];
    let mut m = vec![0.0; 9];
    for (k, l) in [l1, l2, l3].into_iter().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                m[i * 3 + j] += l * u[k][i] * u[k][j];
            }
        }
    }
    let g = GramMatrix::new(3, m).unwrap();
    let eig = leading_eigenvector(&g, 1e-12, 100_000).unwrap();
    assert!(angle(&eig.vector, &u[0]) < 1e-8);
}

#[test]
fn prefix_sums_match_loops() {
    let mut r = rng(14);
    let x = gaussian(5, 37, &mut r);
    let t = PrefixSumTable::new(&x);
    for i in 0..5 {
        for s in 1..=37 {
            for e in s..=37 {
                let naive: f64 = (s..=e).map(|j| x.get(i, j - 1)).sum();
                assert!((t.range_sum(i, s, e) - naive).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn summed_area_matches_loops() {
    let mut r = rng(15);
    let g = GridShape::new(7, 9);
    let x = gaussian_grid(3, g, &mut r);
    let t = SummedAreaTable::new(&x, g).unwrap();
    for i in 0..3 {
        for a0 in 1..=7 {
            for a1 in a0..=7 {
                for b0 in 1..=9 {
                    for b1 in b0..=9 {
                        let mut naive = 0.0;
                        for a in a0..=a1 {
                            for b in b0..=b1 {
                                naive += x.get(i, g.column(a, b));
                            }
                        }
                        assert!((t.box_sum(i, a0, a1, b0, b1) - naive).abs() < 1e-10);
                    }
                }
            }
        }
    }
}

#[test]
fn moving_average_matches_loops() {
    let mut r = rng(16);
    let x = gaussian(4, 25, &mut r);
    for h3 in 1..=25 {
        let y = moving_average_matrix(&x, h3).unwrap();
        assert_eq!(y.p(), 25 - h3 + 1);
        for i in 0..4 {
            for g in 0..y.p() {
                let naive: f64 = (g..g + h3).map(|j| x.get(i, j)).sum::<f64>() / (h3 as f64).sqrt();
                assert!((y.get(i, g) - naive).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn moving_average_2d_matches_loops() {
    let mut r = rng(17);
    let g = GridShape::new(8, 6);
    let x = gaussian_grid(3, g, &mut r);
    for h3 in 1..=6 {
        let y = moving_average_matrix_2d(&x, h3).unwrap();
        let out = y.grid().unwrap();
        assert_eq!((out.p1, out.p2), (8 - h3 + 1, 6 - h3 + 1));
        for i in 0..3 {
            for a in 1..=out.p1 {
                for b in 1..=out.p2 {
                    let mut naive = 0.0;
                    for u in a..a + h3 {
                        for v in b..b + h3 {
                            naive += x.get(i, g.column(u, v));
                        }
                    }
                    naive /= h3 as f64;
                    assert!((y.get(i, out.column(a, b)) - naive).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn aggregates_match_loops() {
    let mut r = rng(18);
    let x = gaussian(5, 40, &mut r);
    let blocks = enumerate_blocks(40, 4, 1, EnumerationMode::Full).unwrap();
    let y = aggregated_features(&x, &blocks).unwrap();
    for (k, b) in blocks.iter().enumerate() {
        for i in 0..5 {
            assert!((y.get(i, k) - naive_block_mean(&x, i, b)).abs() < 1e-10);
        }
    }

    let g = GridShape::new(6, 7);
    let x = gaussian_grid(4, g, &mut r);
    let tb = TensorBlock::enumerate(g, 3, 1, EnumerationMode::Full).unwrap();
    let y = aggregated_features(&x, &tb).unwrap();
    for (k, t) in tb.iter().enumerate() {
        for i in 0..4 {
            let mut s = 0.0;
            for a in t.rows().indices() {
                for b in t.cols().indices() {
                    s += x.get(i, g.column(a, b));
                }
            }
            let naive = s / (t.len() as f64).sqrt();
            assert!((y.get(i, k) - naive).abs() < 1e-10);
        }
    }
}
