//! Brute-force cross-checks that share no code path with the builder: grid sampling
//! of activation regions, generic-arrangement counts, and local perturbation of
//! vertices.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::builder::Vertex;
use crate::model::ReluNetwork;
use crate::signs::SignSequence;

/// Flat cutoff below which a sampled node map value is considered too close to a bent
/// hyperplane to classify.
pub const EXCLUSION_TOL: f64 = 1e-6;

/// Regular grid over an axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: usize,
}

impl SampleGrid {
    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64, resolution: usize) -> Self {
        SampleGrid::new(vec![lo; dim], vec![hi; dim], resolution)
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>, resolution: usize) -> Self {
        assert!(resolution >= 2, "grid needs at least two points per axis");
        assert_eq!(lower.len(), upper.len());
        assert!(lower.iter().zip(&upper).all(|(l, u)| l < u), "box must have positive volume");
        SampleGrid { lower, upper, resolution }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest spacing between neighbouring points along any axis.
    pub fn spacing(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| (u - l) / (self.resolution - 1) as f64).fold(0.0, f64::max)
    }

    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let step = (self.resolution - 1) as f64;
        (0..self.dim())
            .map(|k| {
                let i = index % self.resolution;
                index /= self.resolution;
                self.lower[k] + (self.upper[k] - self.lower[k]) * i as f64 / step
            })
            .collect()
    }
}

/// Strict sign pattern at every grid point whose node map values all exceed
/// `exclusion_tol` in magnitude, with the number of points landing in each.
pub fn sample_region_witnesses(
    net: &ReluNetwork,
    grid: &SampleGrid,
    exclusion_tol: f64,
) -> BTreeMap<SignSequence, usize> {
    assert_eq!(grid.dim(), net.input_dim());
    let counts = (0..grid.len())
        .into_par_iter()
        .fold(HashMap::new, |mut acc: HashMap<SignSequence, usize>, i| {
            let values = net.node_map_values(&grid.point(i)).expect("grid matches input dimension");
            if values.iter().all(|v| v.abs() >= exclusion_tol) {
                let signs: Vec<i8> = values.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect();
                let key = SignSequence::from_signs(&signs).expect("strict signs");
                *acc.entry(key).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    counts.into_iter().collect()
}

/// The set of region sign sequences seen on the grid.
pub fn sample_region_signs(net: &ReluNetwork, grid: &SampleGrid, exclusion_tol: f64) -> Vec<SignSequence> {
    sample_region_witnesses(net, grid, exclusion_tol).into_keys().collect()
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Vertex and region counts of a generic arrangement of `n1` hyperplanes in `R^n0`.
pub fn arrangement_counts(n0: usize, n1: usize) -> (u64, u64) {
    assert!(n1 >= n0);
    let (n0, n1) = (n0 as u64, n1 as u64);
    (binomial(n1, n0), (0..=n0).map(|i| binomial(n1, i)).sum())
}

/// Samples `trials` points on the sphere of radius `epsilon` around `vertex` and checks
/// the local picture of a vertex: every node map vanishing there takes both signs
/// nearby, and every other node map keeps its sign.
pub fn perturb_check(net: &ReluNetwork, vertex: &Vertex, epsilon: f64, trials: usize) -> bool {
    let n0 = net.input_dim();
    let zeros = vertex.signs.zero_positions();
    let mut seen = vec![[false; 2]; zeros.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..trials {
        let dir: Vec<f64> = (0..n0).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        let x: Vec<f64> = vertex.coords.iter().zip(&dir).map(|(c, d)| c + epsilon * d / norm).collect();
        let values = net.node_map_values(&x).expect("vertex matches input dimension");
        for (j, v) in values.iter().enumerate() {
            let s = vertex.signs.get(j);
            if s != 0 && (*v > 0.0) != (s > 0) {
                return false;
            }
        }
        for (k, &j) in zeros.iter().enumerate() {
            if values[j] > 0.0 {
                seen[k][0] = true;
            } else if values[j] < 0.0 {
                seen[k][1] = true;
            }
        }
    }
    seen.iter().all(|s| s[0] && s[1])
}
