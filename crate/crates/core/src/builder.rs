//! Layer-by-layer vertex enumeration for the canonical polyhedral complex.
//!
//! Vertices of the first layer are the intersections of `n_0` hyperplanes. Each later
//! layer is processed region by region: on a region of the complex built so far every
//! node map is affine, so new vertices are solutions of `n_0 × n_0` linear systems
//! mixing at least one new node map with node maps whose common zero set spans a
//! face of the region. A solution is kept exactly when every other earlier node map
//! has the region's sign there.
//!
//! Zero entries of a vertex sign sequence are never decided by thresholding: they
//! are the equations that were solved. Values of other node maps that come out
//! within `degeneracy_tol` of zero mean the network is not generic enough for the
//! combinatorics to be trusted, and the build stops with
//! [`Error::DegenerateNetwork`].

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Degeneracy, Error, Result};
use crate::model::{RegionMaps, ReluNetwork};
use crate::signs::SignSequence;

/// Numerical thresholds used while building.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute magnitude below which a node map value that was not solved for is degenerate.
    pub degeneracy_tol: f64,
    /// Largest 2-norm condition number accepted for a vertex system.
    pub cond_max: f64,
    /// Largest residual allowed on the solved equations.
    pub residual_tol: f64,
    /// Two discoveries of one vertex must agree within `merge_tol * (1 + |x|)`.
    pub merge_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { degeneracy_tol: 1e-8, cond_max: 1e12, residual_tol: 1e-6, merge_tol: 1e-6 }
    }
}

/// A 0-cell of the complex.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub coords: Vec<f64>,
    pub signs: SignSequence,
    /// Flat indices of the `n_0` node maps solved for, ascending.
    pub zero_set: Vec<usize>,
    pub max_residual: f64,
    pub solve_condition: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub systems_solved: usize,
    pub singular_skipped: usize,
    pub rejected: usize,
}

/// Vertices and top-dimensional regions of the complex for the layers processed so far.
#[derive(Debug, Clone)]
pub struct LayerBuildState {
    /// Number of affine layers processed.
    pub layers_done: usize,
    /// Keyed by the sign prefix over processed layers.
    pub vertices: BTreeMap<SignSequence, Vertex>,
    /// All-nonzero sign prefixes, sorted.
    pub regions: Vec<SignSequence>,
    pub stats: BuildStats,
}

impl LayerBuildState {
    pub fn prefix_len(&self) -> usize {
        self.regions.first().map_or_else(|| self.vertices.keys().next().map_or(0, SignSequence::len), SignSequence::len)
    }

    /// Vertices in canonical sign order.
    pub fn vertex_list(&self) -> Vec<Vertex> {
        self.vertices.values().cloned().collect()
    }
}

/// The cells generated by a set of vertex sequences, graded by zero count.
#[derive(Debug, Clone, Default)]
pub struct Closure {
    /// `by_zeros[z]` holds the cells with `z` zero entries, sorted.
    pub by_zeros: Vec<Vec<SignSequence>>,
}

impl Closure {
    /// The all-nonzero cells.
    pub fn regions(&self) -> &[SignSequence] {
        self.by_zeros.first().map_or(&[], Vec::as_slice)
    }

    pub fn total(&self) -> usize {
        self.by_zeros.iter().map(Vec::len).sum()
    }
}

/// Every way of overwriting the listed positions with `-1`, `0` or `+1`
/// (or only `±1` when `allow_zero` is false).
fn fills(seq: &SignSequence, positions: &[usize], allow_zero: bool) -> Vec<SignSequence> {
    let choices: &[i8] = if allow_zero { &[-1, 0, 1] } else { &[-1, 1] };
    let mut out = vec![seq.clone()];
    for &p in positions {
        out = out
            .into_iter()
            .flat_map(|s| {
                choices.iter().map(move |&c| {
                    let mut t = s.clone();
                    t.set(p, c);
                    t
                })
            })
            .collect();
    }
    out
}

/// Closes vertex sequences (truncated to `active_prefix_length`) under replacing any
/// subset of their zeros by `±1`. Each vertex contributes `3^z` cells before
/// deduplication, where `z` is its zero count.
pub fn cube_closure(vertices: &[SignSequence], active_prefix_length: usize) -> Closure {
    let mut cells: BTreeSet<SignSequence> = BTreeSet::new();
    let mut top = 0;
    for v in vertices {
        let v = v.prefix(active_prefix_length);
        let zeros = v.zero_positions();
        top = top.max(zeros.len());
        cells.extend(fills(&v, &zeros, true));
    }
    let mut by_zeros = vec![Vec::new(); top + 1];
    for c in cells {
        by_zeros[c.codimension()].push(c);
    }
    Closure { by_zeros }
}

/// Maps each region to the indices of the vertices on its closure.
fn region_incidence(vertices: &[&Vertex], prefix_len: usize) -> BTreeMap<SignSequence, Vec<usize>> {
    let mut incidence: BTreeMap<SignSequence, Vec<usize>> = BTreeMap::new();
    for (i, v) in vertices.iter().enumerate() {
        let key = v.signs.prefix(prefix_len);
        let zeros = key.zero_positions();
        for region in fills(&key, &zeros, false) {
            incidence.entry(region).or_default().push(i);
        }
    }
    incidence
}

fn degenerate(d: Degeneracy) -> Error {
    Error::DegenerateNetwork(d)
}

fn strict_sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else {
        -1
    }
}

struct Solve {
    x: DVector<f64>,
    condition: f64,
}

/// Solves `normals[eqs] x = -offsets[eqs]` through an SVD, returning the minimum-norm
/// least-squares point together with the 2-norm condition estimate.
fn solve_system(maps: &RegionMaps, equations: &[usize], cond_max: f64) -> Solve {
    let n0 = maps.normals.ncols();
    let mut a = DMatrix::zeros(n0, n0);
    let mut b = DVector::zeros(n0);
    for (r, &e) in equations.iter().enumerate() {
        a.row_mut(r).copy_from(&maps.normals.row(e));
        b[r] = -maps.offsets[e];
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let eps = if smax > 0.0 { smax / cond_max } else { f64::MIN_POSITIVE };
    let x = svd.solve(&b, eps).unwrap_or_else(|_| DVector::zeros(n0));
    Solve { x, condition }
}

fn max_residual(maps: &RegionMaps, equations: &[usize], x: &DVector<f64>) -> f64 {
    equations.iter().map(|&e| maps.eval(e, x).abs()).fold(0.0, f64::max)
}

/// Vertices of the first-layer hyperplane arrangement: one per `n_0`-subset of units.
pub fn first_layer_vertices(net: &ReluNetwork, tol: &Tolerances) -> Result<LayerBuildState> {
    let n0 = net.input_dim();
    let n1 = net.architecture()[1];
    if n1 < n0 {
        return Err(Error::ArchitectureUnsupported { n0, n1 });
    }
    let empty = SignSequence::filled(0, 0);
    let maps = net.region_maps(&empty, 1)?;
    let mut vertices = BTreeMap::new();
    let mut stats = BuildStats::default();
    for alpha in (0..n1).combinations(n0) {
        let solve = solve_system(&maps, &alpha, tol.cond_max);
        stats.systems_solved += 1;
        if solve.condition.is_nan() || solve.condition > tol.cond_max {
            return Err(degenerate(Degeneracy::IllConditioned { condition: solve.condition, equations: alpha }));
        }
        let residual = max_residual(&maps, &alpha, &solve.x);
        if residual > tol.residual_tol {
            return Err(degenerate(Degeneracy::Residual { residual, equations: alpha }));
        }
        let mut signs = SignSequence::filled(n1, 0);
        for j in (0..n1).filter(|j| !alpha.contains(j)) {
            let value = maps.eval(j, &solve.x);
            if value.abs() <= tol.degeneracy_tol {
                return Err(degenerate(Degeneracy::NearZeroValue { node: j, value, equations: alpha }));
            }
            signs.set(j, strict_sign(value));
        }
        let vertex = Vertex {
            coords: solve.x.iter().copied().collect(),
            signs: signs.clone(),
            zero_set: alpha,
            max_residual: residual,
            solve_condition: solve.condition,
        };
        vertices.insert(signs, vertex);
    }
    let keys: Vec<SignSequence> = vertices.keys().cloned().collect();
    let regions = cube_closure(&keys, n1).regions().to_vec();
    Ok(LayerBuildState { layers_done: 1, vertices, regions, stats })
}

/// Candidate vertices found on one region of the previous complex.
struct RegionDiscoveries {
    vertices: Vec<Vertex>,
    stats: BuildStats,
}

fn discover_in_region(
    net: &ReluNetwork,
    layer: usize,
    region: &SignSequence,
    incident: &[&Vertex],
    tol: &Tolerances,
) -> Result<RegionDiscoveries> {
    let n0 = net.input_dim();
    let maps = net.region_maps(region, layer)?;
    let new_nodes: Vec<usize> = net.layer_nodes(layer).collect();
    let old_count = new_nodes[0];
    let mut stats = BuildStats::default();
    let mut found = Vec::new();

    for ell in 1..=n0.min(new_nodes.len()) {
        let old_size = n0 - ell;
        let pool: BTreeSet<Vec<usize>> = if old_size == 0 {
            BTreeSet::from([Vec::new()])
        } else {
            incident.iter().flat_map(|v| v.zero_set.iter().copied().combinations(old_size)).collect()
        };
        if pool.is_empty() {
            return Err(degenerate(Degeneracy::EmptyFacePool { region: region.to_string() }));
        }
        for new_subset in new_nodes.iter().copied().combinations(ell) {
            for old_subset in &pool {
                let equations: Vec<usize> = old_subset.iter().chain(&new_subset).copied().collect();
                let solve = solve_system(&maps, &equations, tol.cond_max);
                stats.systems_solved += 1;
                let well_posed = solve.condition <= tol.cond_max;
                let residual = max_residual(&maps, &equations, &solve.x);
                if !well_posed && residual > tol.residual_tol {
                    // Parallel bent hyperplanes on this region: no intersection.
                    stats.singular_skipped += 1;
                    continue;
                }

                // Earlier node maps not solved for must carry the region's sign.
                let mut mismatch = false;
                let mut ambiguous = None;
                for j in (0..old_count).filter(|j| !old_subset.contains(j)) {
                    let value = maps.eval(j, &solve.x);
                    if value.abs() <= tol.degeneracy_tol {
                        ambiguous.get_or_insert((j, value));
                    } else if strict_sign(value) != region.get(j) {
                        mismatch = true;
                        break;
                    }
                }
                if mismatch {
                    stats.rejected += 1;
                    continue;
                }
                if !well_posed {
                    return Err(degenerate(Degeneracy::IllConditioned { condition: solve.condition, equations }));
                }
                if let Some((node, value)) = ambiguous {
                    return Err(degenerate(Degeneracy::NearZeroValue { node, value, equations }));
                }
                if residual > tol.residual_tol {
                    return Err(degenerate(Degeneracy::Residual { residual, equations }));
                }

                let mut tail = vec![0i8; new_nodes.len()];
                for (t, &j) in new_nodes.iter().enumerate() {
                    if new_subset.contains(&j) {
                        continue;
                    }
                    let value = maps.eval(j, &solve.x);
                    if value.abs() <= tol.degeneracy_tol {
                        return Err(degenerate(Degeneracy::NearZeroValue { node: j, value, equations }));
                    }
                    tail[t] = strict_sign(value);
                }
                let mut signs = region.prefix(old_count);
                for &j in old_subset {
                    signs.set(j, 0);
                }
                found.push(Vertex {
                    coords: solve.x.iter().copied().collect(),
                    signs: signs.extended(&tail),
                    zero_set: equations,
                    max_residual: residual,
                    solve_condition: solve.condition,
                });
            }
        }
    }
    Ok(RegionDiscoveries { vertices: found, stats })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Inserts `vertex` keyed by its sign sequence. A repeated key must agree in position;
/// the copy with the smaller residual (then the lexicographically smaller coordinates) is kept.
pub(crate) fn merge_vertex(into: &mut BTreeMap<SignSequence, Vertex>, vertex: Vertex, tol: &Tolerances) -> Result<()> {
    match into.get_mut(&vertex.signs) {
        None => {
            into.insert(vertex.signs.clone(), vertex);
        }
        Some(kept) => {
            let norm = kept.coords.iter().map(|c| c * c).sum::<f64>().sqrt();
            let distance = euclidean(&kept.coords, &vertex.coords);
            if distance > tol.merge_tol * (1.0 + norm) {
                return Err(Error::DuplicateMismatch { signs: vertex.signs.to_string(), distance });
            }
            let better = vertex
                .max_residual
                .total_cmp(&kept.max_residual)
                .then_with(|| {
                    vertex
                        .coords
                        .iter()
                        .zip(&kept.coords)
                        .map(|(a, b)| a.total_cmp(b))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .is_lt();
            if better {
                *kept = vertex;
            }
        }
    }
    Ok(())
}

/// Adds layer `layer` (1-based; `2..=depth`) to a complete build state of the earlier layers.
pub fn extend_layer(
    net: &ReluNetwork,
    layer: usize,
    state: &LayerBuildState,
    tol: &Tolerances,
) -> Result<LayerBuildState> {
    let order: Vec<usize> = (0..state.regions.len()).collect();
    extend_layer_in_order(net, layer, state, tol, &order)
}

/// [`extend_layer`] merging per-region discoveries in the given region order.
#[doc(hidden)]
pub fn extend_layer_in_order(
    net: &ReluNetwork,
    layer: usize,
    state: &LayerBuildState,
    tol: &Tolerances,
    order: &[usize],
) -> Result<LayerBuildState> {
    assert_eq!(state.layers_done + 1, layer, "layers must be added in order");
    let old_count = net.layer_nodes(layer).start;
    let new_range = net.layer_nodes(layer);
    let prefix_len = new_range.end;

    // (a) existing vertices pick up signs for the new node maps.
    let mut vertices = BTreeMap::new();
    for v in state.vertices.values() {
        let values = net.node_map_values(&v.coords)?;
        let mut tail = Vec::with_capacity(new_range.len());
        for j in new_range.clone() {
            let value = values[j];
            if value.abs() <= tol.degeneracy_tol {
                return Err(degenerate(Degeneracy::NearZeroValue { node: j, value, equations: v.zero_set.clone() }));
            }
            tail.push(strict_sign(value));
        }
        let mut extended = v.clone();
        extended.signs = v.signs.prefix(old_count).extended(&tail);
        vertices.insert(extended.signs.clone(), extended);
    }

    // (b) new vertices, region by region.
    let old: Vec<&Vertex> = state.vertices.values().collect();
    let incidence = region_incidence(&old, old_count);
    let empty: Vec<usize> = Vec::new();
    let discoveries: Vec<Result<RegionDiscoveries>> = order
        .par_iter()
        .map(|&r| {
            let region = &state.regions[r];
            let incident: Vec<&Vertex> = incidence.get(region).unwrap_or(&empty).iter().map(|&i| old[i]).collect();
            discover_in_region(net, layer, region, &incident, tol)
        })
        .collect();

    // (c) merge in the given order.
    let mut stats = state.stats;
    for d in discoveries {
        let d = d?;
        stats.systems_solved += d.stats.systems_solved;
        stats.singular_skipped += d.stats.singular_skipped;
        stats.rejected += d.stats.rejected;
        for v in d.vertices {
            merge_vertex(&mut vertices, v, tol)?;
        }
    }

    // (d) regions of the extended complex.
    let keys: Vec<SignSequence> = vertices.keys().cloned().collect();
    let regions = cube_closure(&keys, prefix_len).regions().to_vec();
    Ok(LayerBuildState { layers_done: layer, vertices, regions, stats })
}

/// Runs the full layer-by-layer construction, including the output map as the last layer.
pub fn build_complex(net: &ReluNetwork, tol: &Tolerances) -> Result<LayerBuildState> {
    let mut state = first_layer_vertices(net, tol)?;
    for layer in 2..=net.depth() {
        state = extend_layer(net, layer, &state, tol)?;
    }
    Ok(state)
}

/// One line of `vertices.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexRecord {
    pub coords: Vec<f64>,
    pub signs: SignSequence,
    pub zero_set: Vec<usize>,
    pub residual: f64,
}

impl From<&Vertex> for VertexRecord {
    fn from(v: &Vertex) -> Self {
        VertexRecord {
            coords: v.coords.clone(),
            signs: v.signs.clone(),
            zero_set: v.zero_set.clone(),
            residual: v.max_residual,
        }
    }
}

/// Writes vertices one JSON object per line, in canonical sign order.
pub fn write_vertices_jsonl<'a, W: Write>(out: &mut W, vertices: impl IntoIterator<Item = &'a Vertex>) -> Result<()> {
    let mut records: Vec<VertexRecord> = vertices.into_iter().map(VertexRecord::from).collect();
    records.sort_by(|a, b| a.signs.cmp(&b.signs));
    for r in &records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("<vertices>", e))?;
    }
    Ok(())
}

pub fn read_vertices_jsonl<R: BufRead>(input: R) -> Result<Vec<VertexRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<vertices>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Counts of cells of the complex by dimension, from vertex sequences alone.
pub fn cell_counts(vertices: &[SignSequence], n0: usize) -> Vec<usize> {
    let len = vertices.first().map_or(0, SignSequence::len);
    let closure = cube_closure(vertices, len);
    let mut counts = vec![0; n0 + 1];
    for (z, cells) in closure.by_zeros.iter().enumerate() {
        if z <= n0 {
            counts[n0 - z] += cells.len();
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::hand_net;
    use crate::model::AffineLayer;

    fn seq(s: &[i8]) -> SignSequence {
        SignSequence::from_signs(s).unwrap()
    }

    fn lines(rows: &[[f64; 3]]) -> ReluNetwork {
        // Each row is (a, b, c) for the line a x + b y + c = 0, followed by a generic output.
        let n = rows.len();
        let w: Vec<f64> = rows.iter().flat_map(|r| [r[0], r[1]]).collect();
        let b: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        ReluNetwork::new(vec![
            AffineLayer::new(DMatrix::from_row_slice(n, 2, &w), DVector::from_vec(b)),
            AffineLayer::new(DMatrix::from_fn(1, n, |_, j| 0.3 + 0.17 * j as f64), DVector::from_element(1, -0.7)),
        ])
        .unwrap()
    }

    #[test]
    fn identity_first_layer() {
        let net = hand_net();
        let state = first_layer_vertices(&net, &Tolerances::default()).unwrap();
        assert_eq!(state.vertices.len(), 1);
        let v = state.vertices.values().next().unwrap();
        assert_eq!(v.coords, vec![0.0, 0.0]);
        assert_eq!(v.signs, seq(&[0, 0]));
        assert_eq!(state.regions.len(), 4);
    }

    #[test]
    fn three_lines() {
        let net = lines(&[[1.0, 0.2, 0.1], [-0.3, 1.0, -0.4], [0.7, 0.9, 1.3]]);
        let state = first_layer_vertices(&net, &Tolerances::default()).unwrap();
        assert_eq!(state.vertices.len(), 3);
        assert_eq!(state.regions.len(), 7);
        let keys: Vec<_> = state.vertices.keys().cloned().collect();
        let counts = cell_counts(&keys, 2);
        assert_eq!(counts, vec![3, 9, 7]);
    }

    #[test]
    fn hand_network_vertices() {
        let net = hand_net();
        let state = build_complex(&net, &Tolerances::default()).unwrap();
        let expected = [([0.0, 0.0], "(0,0,-1)"), ([0.0, 1.0], "(0,1,0)"), ([1.0, 0.0], "(1,0,0)")];
        assert_eq!(state.vertices.len(), expected.len());
        for (v, (coords, signs)) in state.vertices.values().zip(expected) {
            assert_eq!(v.signs.to_string(), signs);
            assert!(euclidean(&v.coords, &coords) < 1e-12, "{:?}", v.coords);
        }
        for v in state.vertices.values() {
            assert_eq!(v.signs.codimension(), 2);
            assert_eq!(v.signs.zero_positions(), v.zero_set);
        }
    }

    #[test]
    fn narrow_first_layer_is_rejected() {
        let net = ReluNetwork::random_init(&[3, 2, 1], 0).unwrap();
        assert!(matches!(
            build_complex(&net, &Tolerances::default()),
            Err(Error::ArchitectureUnsupported { n0: 3, n1: 2 })
        ));
    }

    #[test]
    fn concurrent_lines_are_degenerate() {
        // Three lines through the origin.
        let net = lines(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]);
        assert!(matches!(
            first_layer_vertices(&net, &Tolerances::default()),
            Err(Error::DegenerateNetwork(Degeneracy::NearZeroValue { .. }))
        ));
        let parallel = lines(&[[1.0, 0.0, 0.0], [2.0, 0.0, 1.0], [0.0, 1.0, 0.5]]);
        assert!(matches!(
            first_layer_vertices(&parallel, &Tolerances::default()),
            Err(Error::DegenerateNetwork(Degeneracy::IllConditioned { .. }))
        ));
    }

    #[test]
    fn dead_unit_never_vanishes() {
        let mut layers = ReluNetwork::random_init(&[2, 4, 3, 1], 5).unwrap().layers().to_vec();
        layers[1].weights.row_mut(1).fill(0.0);
        layers[1].bias[1] = -10.0;
        let net = ReluNetwork::new(layers).unwrap();
        let state = build_complex(&net, &Tolerances::default()).unwrap();
        assert!(!state.vertices.is_empty());
        assert!(state.vertices.keys().all(|s| s.get(5) == -1));
    }

    #[test]
    fn vertices_satisfy_forward_evaluation() {
        let tol = Tolerances::default();
        for seed in 0..20 {
            let net = ReluNetwork::random_init(&[2, 5, 1], seed).unwrap();
            let state = build_complex(&net, &tol).unwrap();
            for v in state.vertices.values() {
                let values = net.node_map_values(&v.coords).unwrap();
                for (j, value) in values.iter().enumerate() {
                    if v.zero_set.contains(&j) {
                        assert!(value.abs() < 1e-6);
                        assert_eq!(v.signs.get(j), 0);
                    } else {
                        assert!(value.abs() > tol.degeneracy_tol);
                        assert_eq!(v.signs.get(j), strict_sign(*value));
                    }
                }
            }
        }
    }

    /// Enumerates every activation mask of a single hidden layer, intersects each
    /// first-layer line with the output functional of that mask, and keeps points whose
    /// actual activation pattern matches the mask.
    fn brute_force_vertex_count(net: &ReluNetwork) -> usize {
        let file = net.to_file();
        let (w1, b1) = (&file.layers[0].weights, &file.layers[0].bias);
        let (w2, b2) = (&file.layers[1].weights[0], file.layers[1].bias[0]);
        let n = b1.len();
        let mut points: Vec<(usize, [f64; 2])> = Vec::new();
        for mask in 0u32..(1 << n) {
            let active = |j: usize| mask >> j & 1 == 1;
            let mut g = [0.0; 2];
            let mut g0 = b2;
            for j in (0..n).filter(|&j| active(j)) {
                g[0] += w2[j] * w1[j][0];
                g[1] += w2[j] * w1[j][1];
                g0 += w2[j] * b1[j];
            }
            for i in 0..n {
                let det = w1[i][0] * g[1] - w1[i][1] * g[0];
                if det.abs() < 1e-12 {
                    continue;
                }
                let x = (-b1[i] * g[1] + g0 * w1[i][1]) / det;
                let y = (-w1[i][0] * g0 + g[0] * b1[i]) / det;
                let ok = (0..n).filter(|&j| j != i).all(|j| {
                    let v = w1[j][0] * x + w1[j][1] * y + b1[j];
                    (v > 0.0) == active(j)
                });
                if ok && !points.iter().any(|(k, p)| *k == i && (p[0] - x).abs() + (p[1] - y).abs() < 1e-7) {
                    points.push((i, [x, y]));
                }
            }
        }
        n * (n - 1) / 2 + points.len()
    }

    #[test]
    fn single_hidden_layer_matches_brute_force() {
        for seed in 0..50 {
            let net = ReluNetwork::random_init(&[2, 5, 1], 100 + seed).unwrap();
            let state = build_complex(&net, &Tolerances::default()).unwrap();
            assert_eq!(state.vertices.len(), brute_force_vertex_count(&net), "seed {seed}");
        }
    }

    #[test]
    fn merge_order_does_not_matter() {
        let tol = Tolerances::default();
        for seed in 0..10 {
            let net = ReluNetwork::random_init(&[2, 5, 5, 1], seed).unwrap();
            let mut forward = first_layer_vertices(&net, &tol).unwrap();
            let mut backward = forward.clone();
            for layer in 2..=net.depth() {
                let n = forward.regions.len();
                forward = extend_layer(&net, layer, &forward, &tol).unwrap();
                let rev: Vec<usize> = (0..backward.regions.len()).rev().collect();
                assert_eq!(rev.len(), n);
                backward = extend_layer_in_order(&net, layer, &backward, &tol, &rev).unwrap();
            }
            assert_eq!(forward.vertices.len(), backward.vertices.len());
            for (a, b) in forward.vertices.values().zip(backward.vertices.values()) {
                assert_eq!(a.signs, b.signs);
                assert!(euclidean(&a.coords, &b.coords) <= 1e-6);
            }
        }
    }

    #[test]
    fn conflicting_duplicate_is_reported() {
        let tol = Tolerances::default();
        let v = Vertex {
            coords: vec![0.0, 1.0],
            signs: seq(&[0, 1, 0]),
            zero_set: vec![0, 2],
            max_residual: 0.0,
            solve_condition: 1.0,
        };
        let mut map = BTreeMap::new();
        merge_vertex(&mut map, v.clone(), &tol).unwrap();
        let mut close = v.clone();
        close.coords[0] = 1e-9;
        close.max_residual = -1.0;
        merge_vertex(&mut map, close.clone(), &tol).unwrap();
        assert_eq!(map[&v.signs].coords, close.coords);
        let mut far = v.clone();
        far.coords[0] = 0.5;
        assert!(matches!(merge_vertex(&mut map, far, &tol), Err(Error::DuplicateMismatch { .. })));
    }

    #[test]
    fn closure_of_single_vertex() {
        let c = cube_closure(&[seq(&[0, 0, 1])], 3);
        assert_eq!(c.total(), 9);
        assert_eq!(c.by_zeros.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 1]);
        // Truncation to an active prefix.
        let c = cube_closure(&[seq(&[0, 1, 0])], 2);
        assert_eq!(c.by_zeros.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 1]);
    }

    #[test]
    fn closure_cells_are_faces_of_vertex_cubes() {
        let net = ReluNetwork::random_init(&[3, 5, 1], 2).unwrap();
        let state = build_complex(&net, &Tolerances::default()).unwrap();
        let keys: Vec<_> = state.vertices.keys().cloned().collect();
        let closure = cube_closure(&keys, net.node_count());
        for (z, cells) in closure.by_zeros.iter().enumerate() {
            for c in cells {
                assert_eq!(c.codimension(), z);
                assert!(keys.iter().any(|v| v.is_face_of(c)));
            }
        }
        // Vertex-level cells are exactly the vertices.
        assert_eq!(closure.by_zeros[3], keys);
    }

    #[test]
    fn vertices_jsonl_round_trip() {
        let net = ReluNetwork::random_init(&[2, 4, 3, 1], 8).unwrap();
        let state = build_complex(&net, &Tolerances::default()).unwrap();
        let mut buf = Vec::new();
        write_vertices_jsonl(&mut buf, state.vertices.values()).unwrap();
        let back = read_vertices_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.len(), state.vertices.len());
        for (r, v) in back.iter().zip(state.vertices.values()) {
            assert_eq!(r.signs, v.signs);
            assert_eq!(r.coords, v.coords);
        }
    }
}
