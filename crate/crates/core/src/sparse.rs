//! Compressed sparse row matrices, a direct LU solver and restarted GMRES
//! with an ILU(0) preconditioner.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearSolveError {
    #[error("matrix is singular to working precision (pivot ratio {pivot_ratio:e})")]
    Singular { pivot_ratio: f64 },
    #[error("GMRES stalled after {iterations} iterations at relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("ILU(0) breakdown: zero pivot in row {row}")]
    IluBreakdown { row: usize },
    #[error("dimension mismatch: matrix is {rows}x{cols}, vector has length {len}")]
    Dimension { rows: usize, cols: usize, len: usize },
}

/// Coordinate-format accumulator. Duplicates are summed on compression and
/// explicit zeros are kept in the pattern.
#[derive(Clone, Debug)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    /// Add every entry of `m` shifted by (`row0`, `col0`), scaled by `alpha`.
    pub fn add_block(&mut self, m: &CsrMatrix, row0: usize, col0: usize, alpha: f64) {
        for i in 0..m.nrows {
            for k in m.indptr[i]..m.indptr[i + 1] {
                self.push(row0 + i, col0 + m.indices[k], alpha * m.data[k]);
            }
        }
    }

    /// Add the transpose of `m` shifted by (`row0`, `col0`), scaled by `alpha`.
    pub fn add_block_transposed(&mut self, m: &CsrMatrix, row0: usize, col0: usize, alpha: f64) {
        for i in 0..m.nrows {
            for k in m.indptr[i]..m.indptr[i + 1] {
                self.push(row0 + m.indices[k], col0 + i, alpha * m.data[k]);
            }
        }
    }

    /// Sort and sum duplicates; the result does not depend on push order.
    pub fn build(mut self) -> CsrMatrix {
        self.entries
            .sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        let mut indptr = vec![0; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut data: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                data.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> Self {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, 1.0);
        }
        t.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.data[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.data[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn has_entry(&self, i: usize, j: usize) -> bool {
        self.indices[self.indptr[i]..self.indptr[i + 1]].binary_search(&j).is_ok()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// Bilinear form yᵀ A x.
    pub fn form(&self, y: &[f64], x: &[f64]) -> f64 {
        dot(y, &self.matvec(x))
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        t.add_block_transposed(self, 0, 0, 1.0);
        t.build()
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    /// alpha·self + beta·other over the union pattern.
    pub fn add(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        t.add_block(self, 0, 0, alpha);
        t.add_block(other, 0, 0, beta);
        t.build()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |A - Aᵀ| over all entries.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        self.add(1.0, &t, -1.0).max_abs()
    }

    /// Rows and columns selected by index maps (`None` drops the index).
    pub fn select(&self, row_map: &[Option<usize>], nrows: usize, col_map: &[Option<usize>], ncols: usize) -> CsrMatrix {
        let mut t = TripletBuilder::with_capacity(nrows, ncols, self.nnz());
        for i in 0..self.nrows {
            if let Some(ri) = row_map[i] {
                for (j, v) in self.row(i) {
                    if let Some(cj) = col_map[j] {
                        t.push(ri, cj, v);
                    }
                }
            }
        }
        t.build()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[(i, j)] += v;
            }
        }
        d
    }

    /// Matrix Market coordinate format, 1-based.
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                let _ = writeln!(s, "{} {} {:.17e}", i + 1, j + 1, v);
            }
        }
        s
    }

    fn to_csc(&self) -> rsparse::data::Sprs<f64> {
        // the CSR arrays of A are the CSC arrays of Aᵀ
        let t = self.transpose();
        rsparse::data::Sprs {
            nzmax: t.nnz(),
            m: self.nrows,
            n: self.ncols,
            p: t.indptr.iter().map(|&v| v as isize).collect(),
            i: t.indices.clone(),
            x: t.data.clone(),
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sparse LU with fill-reducing ordering and threshold partial pivoting.
pub struct SparseLu {
    n: usize,
    q: Option<Vec<isize>>,
    numeric: rsparse::data::Nmrc<f64>,
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self, LinearSolveError> {
        assert_eq!(a.nrows, a.ncols, "LU needs a square matrix");
        let n = a.nrows;
        if n == 0 {
            return Ok(SparseLu { n, q: None, numeric: rsparse::data::Nmrc::new() });
        }
        let csc = a.to_csc();
        let mut symbolic = rsparse::sqr(&csc, 1, false);
        let numeric = rsparse::lu(&csc, &mut symbolic, 0.1)
            .map_err(|_| LinearSolveError::Singular { pivot_ratio: 0.0 })?;
        let u = &numeric.u;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for k in 0..n {
            // the diagonal is the last entry of each column of U
            let d = u.x[u.p[k + 1] as usize - 1].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if !(lo > 1e-13 * hi) {
            return Err(LinearSolveError::Singular { pivot_ratio: lo / hi });
        }
        Ok(SparseLu { n, q: symbolic.q, numeric })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        if self.n == 0 {
            return Vec::new();
        }
        let mut x = vec![0.0; self.n];
        let pinv = self.numeric.pinv.as_ref().expect("LU has a row permutation");
        for k in 0..self.n {
            x[pinv[k] as usize] = b[k];
        }
        rsparse::lsolve(&self.numeric.l, &mut x);
        rsparse::usolve(&self.numeric.u, &mut x);
        match &self.q {
            Some(q) => {
                let mut out = vec![0.0; self.n];
                for k in 0..self.n {
                    out[q[k] as usize] = x[k];
                }
                out
            }
            None => x,
        }
    }
}

/// Incomplete LU factorization restricted to the pattern of A.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self, LinearSolveError> {
        let n = a.nrows;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.indptr[i]..lu.indptr[i + 1] {
                if lu.indices[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(LinearSolveError::IluBreakdown { row: i });
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.indptr[i], lu.indptr[i + 1]);
            for k in start..end {
                pos[lu.indices[k]] = k;
            }
            for k in start..end {
                let j = lu.indices[k];
                if j >= i {
                    break;
                }
                let pivot = lu.data[diag[j]];
                let l = lu.data[k] / pivot;
                lu.data[k] = l;
                for kk in diag[j] + 1..lu.indptr[j + 1] {
                    let c = lu.indices[kk];
                    if pos[c] != usize::MAX && pos[c] >= start && pos[c] < end {
                        lu.data[pos[c]] -= l * lu.data[kk];
                    }
                }
            }
            for k in start..end {
                pos[lu.indices[k]] = usize::MAX;
            }
            if lu.data[diag[i]] == 0.0 || !lu.data[diag[i]].is_finite() {
                return Err(LinearSolveError::IluBreakdown { row: i });
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in self.lu.indptr[i]..self.diag[i] {
                s -= self.lu.data[k] * x[self.lu.indices[k]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in self.diag[i] + 1..self.lu.indptr[i + 1] {
                s -= self.lu.data[k] * x[self.lu.indices[k]];
            }
            x[i] = s / self.lu.data[self.diag[i]];
        }
        x
    }
}

/// Right-preconditioned restarted GMRES.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    precond: &Ilu0,
    tol: f64,
    restart: usize,
    max_iters: usize,
) -> Result<(Vec<f64>, usize), LinearSolveError> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut iterations = 0;
    while iterations < max_iters {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        if beta / bnorm <= tol {
            return Ok((x, iterations));
        }
        let m = restart.min(max_iters - iterations);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            iterations += 1;
            let mut w = a.matvec(&precond.apply(&v[k]));
            for (i, vi) in v.iter().enumerate() {
                h[i][k] = dot(&w, vi);
                w.iter_mut().zip(vi).for_each(|(wj, vj)| *wj -= h[i][k] * vj);
            }
            h[k + 1][k] = norm2(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            let next_norm = h[k + 1][k];
            if (g[k + 1] / bnorm).abs() <= tol || next_norm == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / next_norm).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut z = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            z.iter_mut().zip(&v[j]).for_each(|(zi, vi)| *zi += yj * vi);
        }
        let dz = precond.apply(&z);
        x.iter_mut().zip(&dz).for_each(|(xi, di)| *xi += di);
    }
    let ax = a.matvec(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let final_rel = norm2(&r) / bnorm;
    if final_rel <= tol {
        Ok((x, iterations))
    } else {
        Err(LinearSolveError::NotConverged { iterations, residual: final_rel })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LinearSolver {
    DirectLu,
    GmresIlu { tol: f64, restart: usize, max_iters: usize },
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::DirectLu
    }
}

impl LinearSolver {
    pub fn gmres_default() -> Self {
        LinearSolver::GmresIlu { tol: 1e-13, restart: 200, max_iters: 5000 }
    }

    pub fn solve(&self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, LinearSolveError> {
        if b.len() != a.nrows() || a.nrows() != a.ncols() {
            return Err(LinearSolveError::Dimension { rows: a.nrows(), cols: a.ncols(), len: b.len() });
        }
        match *self {
            LinearSolver::DirectLu => Ok(SparseLu::factor(a)?.solve(b)),
            LinearSolver::GmresIlu { tol, restart, max_iters } => {
                let p = Ilu0::new(a)?;
                gmres(a, b, &p, tol, restart, max_iters).map(|(x, _)| x)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, density: f64, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, 4.0 + rng.random::<f64>());
            for j in 0..n {
                if i != j && rng.random::<f64>() < density {
                    t.push(i, j, rng.random::<f64>() - 0.5);
                }
            }
        }
        t.build()
    }

    #[test]
    fn builder_sums_duplicates_in_any_order() {
        let mut a = TripletBuilder::new(2, 3);
        a.push(1, 2, 1.0);
        a.push(0, 0, 2.0);
        a.push(1, 2, 0.5);
        a.push(0, 1, 0.0);
        let m = a.build();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 2), 1.5);
        assert!(m.has_entry(0, 1));
        let dense = m.to_dense();
        assert_eq!(dense[(0, 0)], 2.0);
    }

    #[test]
    fn lu_solves_random_system() {
        let a = random_matrix(60, 0.1, 7);
        let x: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
        let b = a.matvec(&x);
        let y = SparseLu::factor(&a).unwrap().solve(&b);
        let err = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn lu_matches_dense_solve_on_saddle_point() {
        // [A Bᵀ; B 0] with explicit zero diagonal
        let mut t = TripletBuilder::new(5, 5);
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 5.0]];
        let b = [[1.0, -1.0, 0.5], [0.0, 1.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                t.push(i, j, a[i][j]);
            }
        }
        for i in 0..2 {
            for j in 0..3 {
                t.push(3 + i, j, b[i][j]);
                t.push(j, 3 + i, b[i][j]);
            }
            t.push(3 + i, 3 + i, 0.0);
        }
        let m = t.build();
        let rhs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let x = SparseLu::factor(&m).unwrap().solve(&rhs);
        let dense = m.to_dense().lu().solve(&nalgebra::DVector::from_row_slice(&rhs)).unwrap();
        for i in 0..5 {
            assert!((x[i] - dense[i]).abs() < 1e-12);
        }
        let g = LinearSolver::gmres_default().solve(&m, &rhs).unwrap();
        for i in 0..5 {
            assert!((g[i] - dense[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut t = TripletBuilder::new(3, 3);
        t.push(0, 0, 1.0);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        t.push(1, 1, 1.0);
        t.push(2, 2, 1.0);
        assert!(matches!(SparseLu::factor(&t.build()), Err(LinearSolveError::Singular { .. })));
    }

    #[test]
    fn gmres_agrees_with_lu() {
        let a = random_matrix(80, 0.08, 11);
        let b: Vec<f64> = (0..80).map(|i| 1.0 + (i % 3) as f64).collect();
        let direct = SparseLu::factor(&a).unwrap().solve(&b);
        let (x, _) = gmres(&a, &b, &Ilu0::new(&a).unwrap(), 1e-13, 10, 500).unwrap();
        let err = direct.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        let n = 20;
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, 2.0);
            if i > 0 {
                t.push(i, i - 1, -1.0);
                t.push(i - 1, i, -1.0);
            }
        }
        let a = t.build();
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x = Ilu0::new(&a).unwrap().apply(&b);
        let r = a.matvec(&x);
        for i in 0..n {
            assert!((r[i] - b[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn matrix_market_header() {
        let m = CsrMatrix::identity(2);
        let s = m.to_matrix_market();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 "));
    }

    #[test]
    fn select_and_transpose() {
        let a = random_matrix(6, 0.5, 3);
        let rows: Vec<Option<usize>> = (0..6).map(|i| (i % 2 == 0).then_some(i / 2)).collect();
        let cols: Vec<Option<usize>> = (0..6).map(Some).collect();
        let s = a.select(&rows, 3, &cols, 6);
        for i in 0..3 {
            for j in 0..6 {
                assert_eq!(s.get(i, j), a.get(2 * i, j));
            }
        }
        let at = a.transpose();
        let x = [1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let y1 = at.matvec(&x);
        let y2 = a.matvec_transpose(&x);
        for i in 0..6 {
            assert!((y1[i] - y2[i]).abs() < 1e-14);
        }
    }
}
