//! Compressed-row sparse matrices over a fixed sparsity pattern.

use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Pattern of the dof adjacency implied by element connectivity.
    pub fn from_elements<'a>(n: usize, elements: impl Iterator<Item = &'a [usize]>) -> SparsityPattern {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for dofs in elements {
            for &i in dofs {
                rows[i].extend_from_slice(dofs);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        SparsityPattern { n, row_ptr, col_idx }
    }

    pub fn dense(n: usize) -> SparsityPattern {
        let row_ptr = (0..=n).map(|i| i * n).collect();
        let col_idx = (0..n * n).map(|k| k % n).collect();
        SparsityPattern { n, row_ptr, col_idx }
    }

    pub fn diagonal(n: usize) -> SparsityPattern {
        SparsityPattern { n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Storage position of entry `(i, j)`, if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|k| start + k)
    }
}

/// Square sparse matrix; symmetric for every assembled operator.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> SparseOperator {
        let nnz = pattern.nnz();
        SparseOperator { pattern, values: vec![0.0; nnz] }
    }

    pub fn identity(n: usize) -> SparseOperator {
        SparseOperator { pattern: Arc::new(SparsityPattern::diagonal(n)), values: vec![1.0; n] }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> SparseOperator {
        let n = rows.len();
        let values = rows.iter().flat_map(|r| r.iter().copied()).collect();
        SparseOperator { pattern: Arc::new(SparsityPattern::dense(n)), values }
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    /// Entry `(i, j)`; zero outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to entry `(i, j)`. Panics if the entry is outside the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.pattern.position(i, j).expect("entry outside sparsity pattern");
        self.values[k] += v;
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let (a, b) = (p.row_ptr[i], p.row_ptr[i + 1]);
            *yi = p.col_idx[a..b].iter().zip(&self.values[a..b]).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for &j in self.pattern.row(i) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Symmetric elimination: rows and columns flagged in `mask` become
    /// those of the identity.
    pub fn mask_symmetric(&mut self, mask: &[bool]) {
        let p = Arc::clone(&self.pattern);
        for i in 0..self.dim() {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[k];
                if mask[i] || mask[j] {
                    self.values[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
    }

    /// `self + alpha * other` over the same pattern.
    pub fn add_scaled(&self, alpha: f64, other: &SparseOperator) -> SparseOperator {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern);
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + alpha * b).collect();
        SparseOperator { pattern: Arc::clone(&self.pattern), values }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for &j in self.pattern.row(i) {
                row[j] = self.get(i, j);
            }
        }
        d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
