//! Block-sparse matrices over the mesh skeleton. Block rows and columns
//! correspond to trace edges; block sizes may vary per edge (different trace
//! orders across elements are allowed). Storage is block CSR.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct BlockSparseMatrix {
    row_bs: Vec<usize>,
    col_bs: Vec<usize>,
    /// Scalar offset of each block row; last entry is the scalar row count.
    row_offsets: Vec<usize>,
    col_offsets: Vec<usize>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    blocks: Vec<DMatrix<f64>>,
}

fn offsets(bs: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(bs.len() + 1);
    let mut acc = 0;
    off.push(0);
    for &b in bs {
        acc += b;
        off.push(acc);
    }
    off
}

impl BlockSparseMatrix {
    pub fn num_block_rows(&self) -> usize {
        self.row_bs.len()
    }

    pub fn num_block_cols(&self) -> usize {
        self.col_bs.len()
    }

    pub fn nrows(&self) -> usize {
        *self.row_offsets.last().unwrap()
    }

    pub fn ncols(&self) -> usize {
        *self.col_offsets.last().unwrap()
    }

    pub fn row_block_size(&self, i: usize) -> usize {
        self.row_bs[i]
    }

    pub fn row_offset(&self, i: usize) -> usize {
        self.row_offsets[i]
    }

    pub fn col_offset(&self, j: usize) -> usize {
        self.col_offsets[j]
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&DMatrix<f64>> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .binary_search(&j)
            .ok()
            .map(|k| &self.blocks[lo + k])
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols());
        let mut y = DVector::zeros(self.nrows());
        for i in 0..self.num_block_rows() {
            let r0 = self.row_offsets[i];
            let rb = self.row_bs[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let c0 = self.col_offsets[j];
                let cb = self.col_bs[j];
                let blk = &self.blocks[k];
                for r in 0..rb {
                    let mut acc = 0.0;
                    for c in 0..cb {
                        acc += blk[(r, c)] * x[c0 + c];
                    }
                    y[r0 + r] += acc;
                }
            }
        }
        y
    }

    pub fn densify(&self) -> DMatrix<f64> {
        assert!(
            self.nrows().max(self.ncols()) <= 20_000,
            "densify guard: matrix too large"
        );
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        for i in 0..self.num_block_rows() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let blk = &self.blocks[k];
                m.view_mut(
                    (self.row_offsets[i], self.col_offsets[j]),
                    (self.row_bs[i], self.col_bs[j]),
                )
                .copy_from(blk);
            }
        }
        m
    }

    pub fn transpose(&self) -> BlockSparseMatrix {
        let mut b = BlockMatrixBuilder::new(self.col_bs.clone(), self.row_bs.clone());
        for i in 0..self.num_block_rows() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                b.add_block(self.col_idx[k], i, &self.blocks[k].transpose());
            }
        }
        b.build()
    }

    /// Submatrix selecting the given block rows and columns, renumbered in
    /// the order given.
    pub fn extract(&self, rows: &[usize], cols: &[usize]) -> BlockSparseMatrix {
        let mut col_map: BTreeMap<usize, usize> = BTreeMap::new();
        for (nj, &j) in cols.iter().enumerate() {
            col_map.insert(j, nj);
        }
        let row_bs: Vec<usize> = rows.iter().map(|&i| self.row_bs[i]).collect();
        let col_bs: Vec<usize> = cols.iter().map(|&j| self.col_bs[j]).collect();
        let mut b = BlockMatrixBuilder::new(row_bs, col_bs);
        for (ni, &i) in rows.iter().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if let Some(&nj) = col_map.get(&self.col_idx[k]) {
                    b.add_block(ni, nj, &self.blocks[k]);
                }
            }
        }
        b.build()
    }

    /// Scatter a renumbered subvector back into full-size positions.
    pub fn scatter_rows(&self, rows: &[usize], sub: &DVector<f64>, out: &mut DVector<f64>) {
        let mut p = 0;
        for &i in rows {
            for r in 0..self.row_bs[i] {
                out[self.row_offsets[i] + r] = sub[p];
                p += 1;
            }
        }
    }

    /// Gather the scalar entries of the given block rows into a packed
    /// vector (the inverse of scatter_rows).
    pub fn gather_rows(&self, rows: &[usize], x: &DVector<f64>) -> DVector<f64> {
        let len: usize = rows.iter().map(|&i| self.row_bs[i]).sum();
        let mut v = DVector::zeros(len);
        let mut p = 0;
        for &i in rows {
            for r in 0..self.row_bs[i] {
                v[p] = x[self.row_offsets[i] + r];
                p += 1;
            }
        }
        v
    }

    pub fn for_each_block(&self, mut f: impl FnMut(usize, usize, &DMatrix<f64>)) {
        for i in 0..self.num_block_rows() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                f(i, self.col_idx[k], &self.blocks[k]);
            }
        }
    }

    /// Column block indices with stored blocks in block row i.
    pub fn block_cols_of_row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn is_square_symmetric(&self, tol: f64) -> bool {
        if self.nrows() != self.ncols() {
            return false;
        }
        let d = self.densify();
        (&d - d.transpose()).amax() <= tol * d.amax().max(1.0)
    }
}

/// Accumulating builder; repeated blocks at the same position are summed.
#[derive(Debug, Clone)]
pub struct BlockMatrixBuilder {
    row_bs: Vec<usize>,
    col_bs: Vec<usize>,
    map: BTreeMap<(usize, usize), DMatrix<f64>>,
}

impl BlockMatrixBuilder {
    pub fn new(row_bs: Vec<usize>, col_bs: Vec<usize>) -> Self {
        Self {
            row_bs,
            col_bs,
            map: BTreeMap::new(),
        }
    }

    pub fn square(bs: Vec<usize>) -> Self {
        Self::new(bs.clone(), bs)
    }

    pub fn add_block(&mut self, i: usize, j: usize, blk: &DMatrix<f64>) {
        debug_assert_eq!(blk.nrows(), self.row_bs[i]);
        debug_assert_eq!(blk.ncols(), self.col_bs[j]);
        self.map
            .entry((i, j))
            .and_modify(|b| *b += blk)
            .or_insert_with(|| blk.clone());
    }

    pub fn add_entry(&mut self, i: usize, j: usize, r: usize, c: usize, v: f64) {
        let (rb, cb) = (self.row_bs[i], self.col_bs[j]);
        self.map
            .entry((i, j))
            .or_insert_with(|| DMatrix::zeros(rb, cb))[(r, c)] += v;
    }

    pub fn build(self) -> BlockSparseMatrix {
        let n = self.row_bs.len();
        let mut row_ptr = vec![0usize; n + 1];
        for &(i, _) in self.map.keys() {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut col_idx = Vec::with_capacity(self.map.len());
        let mut blocks = Vec::with_capacity(self.map.len());
        // BTreeMap iterates in (i, j) order, matching CSR layout directly.
        for ((_, j), blk) in self.map {
            col_idx.push(j);
            blocks.push(blk);
        }
        BlockSparseMatrix {
            row_offsets: offsets(&self.row_bs),
            col_offsets: offsets(&self.col_bs),
            row_bs: self.row_bs,
            col_bs: self.col_bs,
            row_ptr,
            col_idx,
            blocks,
        }
    }
}

/// Dense LU solve helper with a singularity check.
pub fn dense_solve(a: DMatrix<f64>, b: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    a.lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular(format!("{what}: LU solve failed")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block_matrix(seed: u64, n: usize) -> (BlockSparseMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bs: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=3)).collect();
        let mut b = BlockMatrixBuilder::square(bs.clone());
        for i in 0..n {
            for j in 0..n {
                if i == j || rng.gen_bool(0.3) {
                    let blk = DMatrix::from_fn(bs[i], bs[j], |_, _| rng.gen_range(-1.0..1.0));
                    b.add_block(i, j, &blk);
                }
            }
        }
        (b.build(), bs)
    }

    #[test]
    fn matvec_matches_densify() {
        for seed in 0..5 {
            let (a, _) = random_block_matrix(seed, 7);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let x = DVector::from_fn(a.ncols(), |_, _| rng.gen_range(-1.0..1.0));
            let y1 = a.matvec(&x);
            let y2 = a.densify() * &x;
            assert!((y1 - y2).amax() < 1e-13);
        }
    }

    #[test]
    fn transpose_matches_densify() {
        let (a, _) = random_block_matrix(3, 6);
        let t = a.transpose();
        assert!((t.densify() - a.densify().transpose()).amax() < 1e-15);
    }

    #[test]
    fn accumulation_sums_blocks() {
        let mut b = BlockMatrixBuilder::square(vec![2, 2]);
        let blk = DMatrix::from_element(2, 2, 1.0);
        b.add_block(0, 1, &blk);
        b.add_block(0, 1, &blk);
        let a = b.build();
        assert_eq!(a.block(0, 1).unwrap()[(1, 1)], 2.0);
        assert!(a.block(1, 0).is_none());
    }

    /// Partitioning into (I, B) and reassembling the dense 2x2 block form
    /// must reproduce the original matrix up to the permutation.
    #[test]
    fn extract_partition_reassembles() {
        let (a, _) = random_block_matrix(7, 8);
        let i_set = vec![0, 2, 5, 6];
        let b_set = vec![1, 3, 4, 7];
        let aii = a.extract(&i_set, &i_set).densify();
        let aib = a.extract(&i_set, &b_set).densify();
        let abi = a.extract(&b_set, &i_set).densify();
        let abb = a.extract(&b_set, &b_set).densify();
        let d = a.densify();
        let perm: Vec<usize> = i_set
            .iter()
            .chain(&b_set)
            .flat_map(|&blk| a.row_offset(blk)..a.row_offset(blk) + a.row_block_size(blk))
            .collect();
        let n = d.nrows();
        let mut expect = DMatrix::zeros(n, n);
        for (r, &pr) in perm.iter().enumerate() {
            for (c, &pc) in perm.iter().enumerate() {
                expect[(r, c)] = d[(pr, pc)];
            }
        }
        let ni = aii.nrows();
        let mut got = DMatrix::zeros(n, n);
        got.view_mut((0, 0), (ni, ni)).copy_from(&aii);
        got.view_mut((0, ni), (ni, n - ni)).copy_from(&aib);
        got.view_mut((ni, 0), (n - ni, ni)).copy_from(&abi);
        got.view_mut((ni, ni), (n - ni, n - ni)).copy_from(&abb);
        assert!((got - expect).amax() < 1e-15);
    }

    #[test]
    fn gather_scatter_roundtrip() {
        let (a, _) = random_block_matrix(11, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = DVector::from_fn(a.nrows(), |_, _| rng.gen_range(-1.0..1.0));
        let rows = vec![1, 3, 4];
        let sub = a.gather_rows(&rows, &x);
        let mut out = DVector::zeros(a.nrows());
        a.scatter_rows(&rows, &sub, &mut out);
        for &i in &rows {
            for r in 0..a.row_block_size(i) {
                assert_eq!(out[a.row_offset(i) + r], x[a.row_offset(i) + r]);
            }
        }
    }

    proptest! {
        #[test]
        fn prop_matvec_linear(seed in 0u64..50, alpha in -2.0f64..2.0) {
            let (a, _) = random_block_matrix(seed, 5);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let x = DVector::from_fn(a.ncols(), |_, _| rng.gen_range(-1.0..1.0));
            let y = DVector::from_fn(a.ncols(), |_, _| rng.gen_range(-1.0..1.0));
            let lhs = a.matvec(&(alpha * &x + &y));
            let rhs = alpha * a.matvec(&x) + a.matvec(&y);
            prop_assert!((lhs - rhs).amax() < 1e-12);
        }
    }
}
