//! Matrices over GF(2) and their ranks.
//!
//! Boundary maps are stored column-sparse. Ranks use word-packed dense elimination
//! while both dimensions fit under [`DENSE_LIMIT`], and a sparse column reduction
//! beyond that.

use std::collections::HashMap;

/// Largest dimension handled by dense elimination.
pub const DENSE_LIMIT: usize = 1 << 15;

/// A GF(2) matrix stored as sorted row indices per column.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparseGf2 {
    nrows: usize,
    cols: Vec<Vec<u32>>,
}

impl SparseGf2 {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseGf2 { nrows, cols: vec![Vec::new(); ncols] }
    }

    pub fn with_rows(nrows: usize) -> Self {
        SparseGf2 { nrows, cols: Vec::new() }
    }

    /// Appends a column given by the row indices holding a one. Repeated indices
    /// cancel in pairs.
    pub fn push_column(&mut self, mut rows: Vec<u32>) {
        rows.sort_unstable();
        let mut reduced: Vec<u32> = Vec::with_capacity(rows.len());
        for r in rows {
            assert!((r as usize) < self.nrows, "row {r} out of range {}", self.nrows);
            if reduced.last() == Some(&r) {
                reduced.pop();
            } else {
                reduced.push(r);
            }
        }
        self.cols.push(reduced);
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> &[u32] {
        &self.cols[j]
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cols[col].binary_search(&(row as u32)).is_ok()
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.cols.iter().all(Vec::is_empty)
    }

    /// The product `self · rhs`.
    pub fn mul(&self, rhs: &SparseGf2) -> SparseGf2 {
        assert_eq!(self.ncols(), rhs.nrows(), "inner dimensions differ");
        let mut out = SparseGf2::with_rows(self.nrows);
        for col in &rhs.cols {
            let mut acc: Vec<u32> = col.iter().flat_map(|&k| self.cols[k as usize].iter().copied()).collect();
            acc.sort_unstable();
            let mut reduced = Vec::new();
            for r in acc {
                if reduced.last() == Some(&r) {
                    reduced.pop();
                } else {
                    reduced.push(r);
                }
            }
            out.cols.push(reduced);
        }
        out
    }

    pub fn rank(&self) -> usize {
        if self.nrows <= DENSE_LIMIT && self.ncols() <= DENSE_LIMIT {
            BitMatrix::from_columns(self).rank()
        } else {
            sparse_rank(&self.cols)
        }
    }
}

/// Dense row-packed bit matrix.
#[derive(Debug, Clone)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = cols.div_ceil(64);
        BitMatrix { rows, cols, stride, data: vec![0; rows * stride] }
    }

    /// The transpose of `m`: one packed row per column of `m`. Rank is unchanged.
    fn from_columns(m: &SparseGf2) -> Self {
        let mut out = BitMatrix::zeros(m.ncols(), m.nrows());
        for (j, col) in m.cols.iter().enumerate() {
            for &r in col {
                out.set(j, r as usize);
            }
        }
        out
    }

    pub fn set(&mut self, r: usize, c: usize) {
        assert!(r < self.rows && c < self.cols);
        self.data[r * self.stride + c / 64] |= 1 << (c % 64);
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.stride + c / 64] >> (c % 64) & 1 == 1
    }

    fn xor_row_into(&mut self, src: usize, dst: usize, from_word: usize) {
        let (s, d) = (src * self.stride, dst * self.stride);
        for w in from_word..self.stride {
            let v = self.data[s + w];
            self.data[d + w] ^= v;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for w in 0..self.stride {
            self.data.swap(a * self.stride + w, b * self.stride + w);
        }
    }

    /// Rank by forward elimination. Consumes the working copy.
    pub fn rank(mut self) -> usize {
        let mut rank = 0;
        for c in 0..self.cols {
            if rank == self.rows {
                break;
            }
            let Some(pivot) = (rank..self.rows).find(|&r| self.get(r, c)) else {
                continue;
            };
            self.swap_rows(rank, pivot);
            for r in rank + 1..self.rows {
                if self.get(r, c) {
                    self.xor_row_into(rank, r, c / 64);
                }
            }
            rank += 1;
        }
        rank
    }
}

/// Column reduction keyed by the largest row index of each reduced column.
fn sparse_rank(cols: &[Vec<u32>]) -> usize {
    let mut pivots: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut rank = 0;
    for col in cols {
        let mut cur = col.clone();
        while let Some(&low) = cur.last() {
            match pivots.get(&low) {
                Some(p) => cur = symmetric_difference(&cur, p),
                None => {
                    pivots.insert(low, cur);
                    rank += 1;
                    break;
                }
            }
        }
    }
    rank
}

fn symmetric_difference(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Rank by elimination on `Vec<bool>` rows, no packing.
    fn naive_rank(rows: usize, cols: &[Vec<u32>]) -> usize {
        let mut m: Vec<Vec<bool>> = cols
            .iter()
            .map(|c| {
                let mut v = vec![false; rows];
                for &r in c {
                    v[r as usize] ^= true;
                }
                v
            })
            .collect();
        let mut rank = 0;
        for c in 0..rows {
            if let Some(p) = (rank..m.len()).find(|&r| m[r][c]) {
                m.swap(rank, p);
                let pivot = m[rank].clone();
                for row in m.iter_mut().skip(rank + 1) {
                    if row[c] {
                        for (x, y) in row.iter_mut().zip(&pivot) {
                            *x ^= *y;
                        }
                    }
                }
                rank += 1;
            }
        }
        rank
    }

    #[test]
    fn small_ranks() {
        let mut m = SparseGf2::with_rows(3);
        m.push_column(vec![0, 1]);
        m.push_column(vec![1, 2]);
        m.push_column(vec![0, 2]);
        assert_eq!(m.rank(), 2);
        assert_eq!(sparse_rank(&m.cols), 2);
        m.push_column(vec![2]);
        assert_eq!(m.rank(), 3);
        assert_eq!(SparseGf2::zeros(4, 5).rank(), 0);
        assert_eq!(SparseGf2::zeros(0, 0).rank(), 0);
    }

    #[test]
    fn repeated_entries_cancel() {
        let mut m = SparseGf2::with_rows(2);
        m.push_column(vec![1, 0, 1]);
        assert_eq!(m.column(0), &[0]);
    }

    #[test]
    fn product_of_boundaries_of_a_square_vanishes() {
        // Square with vertices 0..4, edges (0,1),(1,2),(2,3),(3,0).
        let mut d1 = SparseGf2::with_rows(4);
        for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            d1.push_column(vec![a, b]);
        }
        let mut d2 = SparseGf2::with_rows(4);
        d2.push_column(vec![0, 1, 2, 3]);
        assert!(d1.mul(&d2).is_zero());
    }

    proptest! {
        #[test]
        fn dense_sparse_and_naive_agree(
            rows in 1usize..90,
            cols in proptest::collection::vec(proptest::collection::vec(0u32..90, 0..6), 0..90)
        ) {
            let cols: Vec<Vec<u32>> = cols.into_iter().map(|c| c.into_iter().filter(|&r| (r as usize) < rows).collect()).collect();
            let mut m = SparseGf2::with_rows(rows);
            for c in &cols {
                m.push_column(c.clone());
            }
            let expected = naive_rank(rows, &cols);
            prop_assert_eq!(BitMatrix::from_columns(&m).rank(), expected);
            prop_assert_eq!(sparse_rank(&m.cols), expected);
        }
    }
}
