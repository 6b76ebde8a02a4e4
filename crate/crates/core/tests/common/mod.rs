//! Brute-force oracles and random fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use geoloss::metrics::Connectivity;
use geoloss::{BinaryMask, GridSpec, ProbabilityMap};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_mask(rng: &mut ChaCha8Rng, grid: GridSpec, density: f64) -> BinaryMask {
    BinaryMask::from_fn(grid, |_| rng.gen_bool(density))
}

pub fn random_prob(rng: &mut ChaCha8Rng, grid: GridSpec, lo: f64, hi: f64) -> ProbabilityMap {
    let data = (0..grid.voxel_count()).map(|_| rng.gen_range(lo..=hi)).collect();
    ProbabilityMap::new(grid, data).unwrap()
}

/// Random `(s, g)` whose mask has both foreground and background.
pub fn random_pair(rng: &mut ChaCha8Rng, dims: [usize; 3], lo: f64, hi: f64) -> (ProbabilityMap, BinaryMask) {
    let grid = GridSpec::isotropic(dims).unwrap();
    loop {
        let density = rng.gen_range(0.15..0.6);
        let g = random_mask(rng, grid, density);
        if g.has_boundary() {
            return (random_prob(rng, grid, lo, hi), g);
        }
    }
}

fn coords(dims: [usize; 3], i: usize) -> [usize; 3] {
    [i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1])]
}

fn linear(dims: [usize; 3], c: [usize; 3]) -> usize {
    c[0] + dims[0] * (c[1] + dims[1] * c[2])
}

/// Neighbour coordinates of `c` inside the volume for the given offsets.
fn neighbours(dims: [usize; 3], c: [usize; 3], offsets: &[[i64; 3]]) -> Vec<[usize; 3]> {
    offsets
        .iter()
        .filter_map(|o| {
            let n = [0, 1, 2].map(|a| c[a] as i64 + o[a]);
            (0..3)
                .all(|a| n[a] >= 0 && n[a] < dims[a] as i64)
                .then(|| n.map(|x| x as usize))
        })
        .collect()
}

fn offsets(max_nonzero: usize) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    for a in -1..=1 {
        for b in -1..=1 {
            for c in -1..=1 {
                let k = [a, b, c].iter().filter(|&&x| x != 0).count();
                if k > 0 && k <= max_nonzero {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// Foreground voxels with a background face neighbour or lying on the volume
/// edge of an axis with more than one voxel.
pub fn oracle_boundary(mask: &BinaryMask) -> Vec<bool> {
    let dims = mask.grid().dims();
    let fg = mask.data();
    let faces = offsets(1);
    (0..fg.len())
        .map(|i| {
            if !fg[i] {
                return false;
            }
            let c = coords(dims, i);
            let on_edge = (0..3).any(|a| dims[a] > 1 && (c[a] == 0 || c[a] == dims[a] - 1));
            on_edge || neighbours(dims, c, &faces).iter().any(|&n| !fg[linear(dims, n)])
        })
        .collect()
}

/// Distance from every voxel centre to the nearest boundary voxel centre,
/// negated strictly inside the foreground when `signed`.
pub fn oracle_edt(mask: &BinaryMask, signed: bool) -> Vec<f64> {
    let dims = mask.grid().dims();
    let sp = mask.grid().spacing();
    let boundary = oracle_boundary(mask);
    let sites: Vec<[usize; 3]> = (0..boundary.len())
        .filter(|&i| boundary[i])
        .map(|i| coords(dims, i))
        .collect();
    (0..boundary.len())
        .map(|i| {
            let c = coords(dims, i);
            let d = sites
                .iter()
                .map(|b| {
                    (0..3)
                        .map(|a| ((c[a] as f64 - b[a] as f64) * sp[a]).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            if signed && mask.data()[i] && !boundary[i] {
                -d
            } else {
                d
            }
        })
        .collect()
}

/// Breadth-first flood fill; labels start at 1, 0 is background.
pub fn oracle_components(mask: &BinaryMask, connectivity: Connectivity) -> (Vec<usize>, usize) {
    let dims = mask.grid().dims();
    let fg = mask.data();
    let offs = offsets(match connectivity {
        Connectivity::Six => 1,
        Connectivity::Eighteen => 2,
        Connectivity::TwentySix => 3,
    });
    let mut labels = vec![0usize; fg.len()];
    let mut count = 0;
    for start in 0..fg.len() {
        if !fg[start] || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for n in neighbours(dims, coords(dims, i), &offs) {
                let j = linear(dims, n);
                if fg[j] && labels[j] == 0 {
                    labels[j] = count;
                    queue.push_back(j);
                }
            }
        }
    }
    (labels, count)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleMetrics {
    pub ltpr: f64,
    pub lppv: f64,
    pub lf1: f64,
    pub gl: usize,
    pub pl: usize,
}

/// Lesion metrics from the full prediction x ground-truth overlap matrix.
pub fn oracle_lesion_metrics(pred: &BinaryMask, gt: &BinaryMask, connectivity: Connectivity) -> OracleMetrics {
    let (lp, pl) = oracle_components(pred, connectivity);
    let (lg, gl) = oracle_components(gt, connectivity);
    let mut overlap = vec![vec![0usize; gl + 1]; pl + 1];
    for (&a, &b) in lp.iter().zip(&lg) {
        overlap[a][b] += 1;
    }
    let detected = (1..=gl).filter(|&j| (1..=pl).any(|i| overlap[i][j] > 0)).count();
    let true_pred = (1..=pl).filter(|&i| (1..=gl).any(|j| overlap[i][j] > 0)).count();
    let frac = |num: usize, den: usize, other: usize| {
        if den == 0 {
            if other == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            num as f64 / den as f64
        }
    };
    let ltpr = frac(detected, gl, pl);
    let lppv = frac(true_pred, pl, gl);
    let lf1 = if ltpr + lppv == 0.0 {
        0.0
    } else {
        2.0 * ltpr * lppv / (ltpr + lppv)
    };
    OracleMetrics {
        ltpr,
        lppv,
        lf1,
        gl,
        pl,
    }
}

/// `1 - 2 Σ s g / Σ (s + g)` by a plain loop.
pub fn oracle_dice(s: &ProbabilityMap, g: &BinaryMask) -> f64 {
    let (mut inter, mut total) = (0.0, 0.0);
    for (&p, &m) in s.data().iter().zip(g.data()) {
        let t = if m { 1.0 } else { 0.0 };
        inter += p * t;
        total += p + t;
    }
    1.0 - 2.0 * inter / total
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
