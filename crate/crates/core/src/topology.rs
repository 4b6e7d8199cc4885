//! The sign-sequence cubical complex, its mod-2 chain complex, the decision boundary
//! subcomplex, and Betti numbers of the one-point compactification.
//!
//! Dimensions here are always those of the polyhedral cells: a sequence with `z` zeros
//! names a cell of dimension `n_0 - z`. The facets of a cell are the present sequences
//! obtained by zeroing one of its nonzero entries.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::builder::{cube_closure, Vertex};
use crate::error::{Error, Result};
use crate::gf2::SparseGf2;
use crate::model::ReluNetwork;
use crate::signs::SignSequence;

/// Cells keyed by sign sequence and graded by polyhedral dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicalComplex {
    n0: usize,
    /// `grading[d]` lists the `d`-cells in canonical order.
    grading: Vec<Vec<SignSequence>>,
    index: HashMap<SignSequence, (usize, usize)>,
}

impl CubicalComplex {
    fn from_graded(n0: usize, grading: Vec<Vec<SignSequence>>) -> Self {
        let mut index = HashMap::new();
        for (d, cells) in grading.iter().enumerate() {
            for (i, c) in cells.iter().enumerate() {
                index.insert(c.clone(), (d, i));
            }
        }
        CubicalComplex { n0, grading, index }
    }

    /// Input dimension of the network the complex lives in.
    pub fn n0(&self) -> usize {
        self.n0
    }

    /// Highest dimension the grading has room for.
    pub fn top_dim(&self) -> usize {
        self.grading.len() - 1
    }

    pub fn cells(&self, dim: usize) -> &[SignSequence] {
        self.grading.get(dim).map_or(&[], Vec::as_slice)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.grading.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, cell: &SignSequence) -> bool {
        self.index.contains_key(cell)
    }

    /// `(dimension, position within that dimension)`.
    pub fn locate(&self, cell: &SignSequence) -> Option<(usize, usize)> {
        self.index.get(cell).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &SignSequence)> {
        self.grading.iter().enumerate().flat_map(|(d, cells)| cells.iter().map(move |c| (d, c)))
    }

    /// Present facets of `cell`.
    pub fn facets<'a>(&'a self, cell: &'a SignSequence) -> impl Iterator<Item = SignSequence> + 'a {
        cell.facet_candidates().filter(|f| self.contains(f))
    }

    /// Present cells having `cell` as a facet.
    pub fn cofacets(&self, cell: &SignSequence) -> Vec<SignSequence> {
        cell.coface_candidates().into_iter().filter(|c| self.contains(c)).collect()
    }

    /// Validates a full complex given as an arbitrary list of cells: every cofacet
    /// candidate of every cell must be present, and every cell of dimension above zero
    /// must have a facet.
    pub fn from_cells(cells: impl IntoIterator<Item = SignSequence>, n0: usize) -> Result<Self> {
        let mut grading = vec![Vec::new(); n0 + 1];
        let mut len = None;
        for c in cells {
            if *len.get_or_insert(c.len()) != c.len() {
                return Err(Error::LengthMismatch { left: len.unwrap(), right: c.len() });
            }
            let z = c.codimension();
            if z > n0 {
                return Err(Error::ClosureViolation {
                    cell: c.to_string(),
                    missing: format!("a cell with at most {n0} zeros"),
                });
            }
            grading[n0 - z].push(c);
        }
        for g in &mut grading {
            g.sort();
            g.dedup();
        }
        let cx = CubicalComplex::from_graded(n0, grading);
        for (d, cell) in cx.iter() {
            if let Some(missing) = cell.coface_candidates().into_iter().find(|c| !cx.contains(c)) {
                return Err(Error::ClosureViolation { cell: cell.to_string(), missing: missing.to_string() });
            }
            if d > 0 && cx.facets(cell).next().is_none() {
                return Err(Error::ClosureViolation { cell: cell.to_string(), missing: "any facet".into() });
            }
        }
        Ok(cx)
    }

    /// Cells whose last entry is zero: the decision boundary `F = 0`.
    pub fn decision_boundary(&self) -> CubicalComplex {
        let top = self.n0.saturating_sub(1);
        let grading = (0..=top)
            .map(|d| self.cells(d).iter().filter(|c| !c.is_empty() && c.get(c.len() - 1) == 0).cloned().collect())
            .collect();
        CubicalComplex::from_graded(self.n0, grading)
    }

    /// Mod-2 cellular boundary maps `∂_d : C_d → C_{d-1}` for `d = 1..=top`.
    pub fn boundary_matrices(&self) -> ChainComplexGF2 {
        let mut boundaries = Vec::with_capacity(self.top_dim());
        for d in 1..=self.top_dim() {
            let mut m = SparseGf2::with_rows(self.cells(d - 1).len());
            for cell in self.cells(d) {
                m.push_column(self.facets(cell).map(|f| self.index[&f].1 as u32).collect());
            }
            boundaries.push(m);
        }
        ChainComplexGF2 { dims: self.counts(), boundaries, infinity: None }
    }

    /// Chain complex of the one-point compactification: one extra 0-cell `∞` (the last
    /// 0-cell), attached once to every edge for each endpoint it lacks, mod 2.
    pub fn compactify(&self) -> ChainComplexGF2 {
        let mut chain = self.boundary_matrices();
        let inf = self.cells(0).len();
        chain.dims[0] += 1;
        chain.infinity = Some(inf);
        if self.top_dim() >= 1 {
            let mut d1 = SparseGf2::with_rows(inf + 1);
            for cell in self.cells(1) {
                let mut rows: Vec<u32> = self.facets(cell).map(|f| self.index[&f].1 as u32).collect();
                if rows.len() == 1 {
                    rows.push(inf as u32);
                }
                d1.push_column(rows);
            }
            chain.boundaries[0] = d1;
        }
        chain
    }

    /// `complex.jsonl`: one `{"signs": "...", "dim": d}` per line, in canonical sign order.
    pub fn write_jsonl<W: Write>(&self, out: &mut W) -> Result<()> {
        let mut records: Vec<CellRecord> = self.iter().map(|(dim, c)| CellRecord { signs: c.clone(), dim }).collect();
        records.sort_by(|a, b| a.signs.cmp(&b.signs));
        for r in &records {
            serde_json::to_writer(&mut *out, r)?;
            out.write_all(b"\n").map_err(|e| Error::io("<complex>", e))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R, n0: usize) -> Result<Self> {
        let mut cells = Vec::new();
        for line in input.lines() {
            let line = line.map_err(|e| Error::io("<complex>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CellRecord = serde_json::from_str(&line)?;
            if rec.dim + rec.signs.codimension() != n0 {
                return Err(Error::ClosureViolation {
                    cell: rec.signs.to_string(),
                    missing: format!("consistent dimension (recorded {})", rec.dim),
                });
            }
            cells.push(rec.signs);
        }
        CubicalComplex::from_cells(cells, n0)
    }
}

/// One line of `complex.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub signs: SignSequence,
    pub dim: usize,
}

/// The complex generated by vertex sign sequences (all `N` coordinates).
pub fn assemble(vertices: &[SignSequence], n0: usize) -> Result<CubicalComplex> {
    let Some(first) = vertices.first() else {
        return Ok(CubicalComplex::from_graded(n0, vec![Vec::new(); n0 + 1]));
    };
    for v in vertices {
        if v.len() != first.len() {
            return Err(Error::LengthMismatch { left: first.len(), right: v.len() });
        }
        if v.codimension() != n0 {
            return Err(Error::ClosureViolation {
                cell: v.to_string(),
                missing: format!("a vertex must have exactly {n0} zeros"),
            });
        }
    }
    let closure = cube_closure(vertices, first.len());
    let mut grading = vec![Vec::new(); n0 + 1];
    for (z, cells) in closure.by_zeros.into_iter().enumerate() {
        grading[n0 - z] = cells;
    }
    Ok(CubicalComplex::from_graded(n0, grading))
}

/// [`assemble`] from built vertices.
pub fn assemble_vertices(vertices: &[Vertex], n0: usize) -> Result<CubicalComplex> {
    let keys: Vec<SignSequence> = vertices.iter().map(|v| v.signs.clone()).collect();
    assemble(&keys, n0)
}

/// Graded boundary maps over GF(2).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainComplexGF2 {
    /// Number of cells in each degree.
    pub dims: Vec<usize>,
    /// `boundaries[d - 1]` is `∂_d`, with `dims[d - 1]` rows and `dims[d]` columns.
    pub boundaries: Vec<SparseGf2>,
    /// Row of the point at infinity in degree 0, when present.
    pub infinity: Option<usize>,
}

impl ChainComplexGF2 {
    /// First degree `d` with `∂_d ∂_{d+1} ≠ 0`, if any.
    pub fn boundary_defect(&self) -> Option<usize> {
        self.boundaries.windows(2).position(|w| !w[0].mul(&w[1]).is_zero()).map(|i| i + 1)
    }

    pub fn check(&self) -> Result<()> {
        match self.boundary_defect() {
            Some(degree) => Err(Error::BoundaryInconsistent { degree }),
            None => Ok(()),
        }
    }
}

/// Mod-2 Betti numbers with the bounded/unbounded component split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BettiReport {
    pub betti: Vec<usize>,
    pub bounded: i64,
    pub unbounded: i64,
}

impl BettiReport {
    /// Bounded components are `β_0 - 1`; unbounded are `β_top - β_0 + 1`.
    pub fn from_betti(betti: Vec<usize>) -> Self {
        let b0 = betti.first().copied().unwrap_or(0) as i64;
        let top = betti.last().copied().unwrap_or(0) as i64;
        BettiReport { betti, bounded: b0 - 1, unbounded: top - b0 + 1 }
    }
}

/// `β_d = dim C_d − rank ∂_d − rank ∂_{d+1}`.
pub fn betti_gf2(chain: &ChainComplexGF2) -> Result<BettiReport> {
    chain.check()?;
    let ranks: Vec<usize> = chain.boundaries.iter().map(SparseGf2::rank).collect();
    let betti = (0..chain.dims.len())
        .map(|d| {
            let into = if d == 0 { 0 } else { ranks[d - 1] };
            let out = ranks.get(d).copied().unwrap_or(0);
            chain.dims[d] - into - out
        })
        .collect();
    Ok(BettiReport::from_betti(betti))
}

/// Betti numbers of the compactified decision boundary of an assembled complex.
pub fn decision_boundary_betti(cx: &CubicalComplex) -> Result<BettiReport> {
    betti_gf2(&cx.decision_boundary().compactify())
}

/// Axis-aligned drawing window for the planar decision boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

/// Clips `p + t d`, `t ∈ [lo, hi]`, to the window (Liang–Barsky).
fn clip(p: [f64; 2], d: [f64; 2], mut lo: f64, mut hi: f64, w: &Window) -> Option<([f64; 2], [f64; 2])> {
    for k in 0..2 {
        if d[k] == 0.0 {
            if p[k] < w.min[k] || p[k] > w.max[k] {
                return None;
            }
            continue;
        }
        let t1 = (w.min[k] - p[k]) / d[k];
        let t2 = (w.max[k] - p[k]) / d[k];
        lo = lo.max(t1.min(t2));
        hi = hi.min(t1.max(t2));
    }
    (lo <= hi).then(|| ([p[0] + lo * d[0], p[1] + lo * d[1]], [p[0] + hi * d[0], p[1] + hi * d[1]]))
}

/// SVG drawing of the decision-boundary edges of a network with two inputs,
/// clipped to `window`. Returns `None` unless `n_0 = 2`.
pub fn decision_boundary_svg(
    net: &ReluNetwork,
    db: &CubicalComplex,
    vertices: &[Vertex],
    window: &Window,
) -> Result<Option<String>> {
    if net.input_dim() != 2 {
        return Ok(None);
    }
    let coords: HashMap<&SignSequence, [f64; 2]> =
        vertices.iter().map(|v| (&v.signs, [v.coords[0], v.coords[1]])).collect();
    let mut segments = Vec::new();
    for edge in db.cells(1) {
        let ends: Vec<(SignSequence, [f64; 2])> =
            db.facets(edge).filter_map(|f| coords.get(&f).map(|&p| (f, p))).collect();
        if let [(_, a), (_, b)] = ends[..] {
            segments.extend(clip(a, [b[0] - a[0], b[1] - a[1]], 0.0, 1.0, window));
            continue;
        }
        // Unbounded edge: it runs along the output functional of its hidden region.
        let maps = net.region_maps(edge, net.depth())?;
        let g = maps.normals.row(net.output_node());
        let mut dir = [-g[1], g[0]];
        let seg = match &ends[..] {
            [(signs, a)] => {
                // Orient away from the vertex, into the side of the hidden map it crosses.
                let crossed = signs.zero_positions().into_iter().find(|&j| j != net.output_node());
                if let Some(j) = crossed {
                    let n = maps.normals.row(j);
                    let along = n[0] * dir[0] + n[1] * dir[1];
                    if (along > 0.0) != (edge.get(j) > 0) {
                        dir = [-dir[0], -dir[1]];
                    }
                }
                clip(*a, dir, 0.0, f64::INFINITY, window)
            }
            _ => {
                let c = maps.offsets[net.output_node()];
                let norm2 = g[0] * g[0] + g[1] * g[1];
                let p = [-c * g[0] / norm2, -c * g[1] / norm2];
                clip(p, dir, f64::NEG_INFINITY, f64::INFINITY, window)
            }
        };
        segments.extend(seg);
    }
    let (w, h) = (window.max[0] - window.min[0], window.max[1] - window.min[1]);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">\n",
        window.min[0], -window.max[1], w, h
    );
    let stroke = w.max(h) / 300.0;
    for (a, b) in segments {
        writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"red\" stroke-width=\"{stroke}\"/>",
            a[0], -a[1], b[0], -b[1]
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(Some(svg))
}
