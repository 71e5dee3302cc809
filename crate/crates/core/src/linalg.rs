//! Compressed-row sparse matrices and a banded Cholesky factorization.

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(n_cols: usize) -> Self {
        SparseMatrix {
            n_cols,
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn with_capacity(n_cols: usize, rows: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(rows + 1);
        row_ptr.push(0);
        SparseMatrix {
            n_cols,
            row_ptr,
            cols: Vec::with_capacity(nnz),
            vals: Vec::with_capacity(nnz),
        }
    }

    /// Appends a row; exact zeros are dropped.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (j, v) in entries {
            debug_assert!(j < self.n_cols);
            if v != 0.0 {
                self.cols.push(j);
                self.vals.push(v);
            }
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.iter().position(|&k| k == j).map_or(0.0, |p| v[p])
    }

    /// `J x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows())
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
            })
            .collect()
    }

    /// `J^T y`
    pub fn tmul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        self.tmul_add(y, &mut out);
        out
    }

    /// `out += J^T y`
    pub fn tmul_add(&self, y: &[f64], out: &mut [f64]) {
        for (i, yi) in y.iter().enumerate() {
            if *yi == 0.0 {
                continue;
            }
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                out[j] += a * yi;
            }
        }
    }

    /// Largest `|i - j|` between two columns sharing a row.
    pub fn coupling_bandwidth(&self) -> usize {
        (0..self.n_rows())
            .map(|i| {
                let (c, _) = self.row(i);
                match (c.iter().min(), c.iter().max()) {
                    (Some(lo), Some(hi)) => hi - lo,
                    _ => 0,
                }
            })
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows()];
        for (i, row) in d.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                row[j] += a;
            }
        }
        d
    }
}

/// Symmetric banded matrix storing the lower band row by row.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        BandMatrix {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` at `(i, j)` (and implicitly `(j, i)`); entries outside the band are ignored.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) -> bool {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            return false;
        }
        let k = self.idx(i, j);
        self.data[k] += v;
        true
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.data[self.idx(i, i)]
    }

    /// Replaces row and column `i` by the identity.
    pub fn pin(&mut self, i: usize) {
        let lo = i.saturating_sub(self.bw);
        for j in lo..i {
            let k = self.idx(i, j);
            self.data[k] = 0.0;
        }
        let hi = (i + self.bw).min(self.n - 1);
        for r in i + 1..=hi {
            let k = self.idx(r, i);
            self.data[k] = 0.0;
        }
        let k = self.idx(i, i);
        self.data[k] = 1.0;
    }

    /// In-place `L L^T` factorization; `None` if the matrix is not positive definite.
    pub fn cholesky(mut self) -> Option<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = self.data[i * w + (j + bw - i)];
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in k0..j {
                    s -= self.data[ri + k] * self.data[rj + k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    self.data[i * w + bw] = s.sqrt();
                } else {
                    self.data[i * w + (j + bw - i)] = s / self.data[j * w + bw];
                }
            }
        }
        Some(BandCholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    l: BandMatrix,
}

impl BandCholesky {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.l.n, self.l.bw);
        let w = bw + 1;
        let d = &self.l.data;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut s = x[i];
            for j in j0..i {
                s -= d[i * w + (j + bw - i)] * x[j];
            }
            x[i] = s / d[i * w + bw];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = x[i];
            for r in i + 1..=hi {
                s -= d[r * w + (i + bw - r)] * x[r];
            }
            x[i] = s / d[i * w + bw];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_products() {
        let mut j = SparseMatrix::new(3);
        j.push_row([(0, 1.0), (2, 2.0)]);
        j.push_row([(1, -1.0), (2, 0.0)]);
        assert_eq!(j.nnz(), 3);
        assert_eq!(j.mul_vec(&[1.0, 2.0, 3.0]), vec![7.0, -2.0]);
        assert_eq!(j.tmul_vec(&[1.0, 1.0]), vec![1.0, -1.0, 2.0]);
        assert_eq!(j.coupling_bandwidth(), 2);
    }

    #[test]
    fn band_cholesky_matches_dense_solve() {
        // tridiagonal SPD system with known solution
        let n = 6;
        let mut a = BandMatrix::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 4.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = 4.0 * x_true[i];
                if i > 0 {
                    s -= x_true[i - 1];
                }
                if i + 1 < n {
                    s -= x_true[i + 1];
                }
                s
            })
            .collect();
        a.cholesky().unwrap().solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x_true[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn pinned_rows_decouple() {
        let mut a = BandMatrix::zeros(3, 2);
        for i in 0..3 {
            for j in 0..=i {
                a.add(i, j, if i == j { 3.0 } else { 1.0 });
            }
        }
        a.pin(1);
        assert_eq!(a.get(1, 0), 0.0);
        assert_eq!(a.get(2, 1), 0.0);
        let mut b = vec![4.0, 7.0, 4.0];
        a.cholesky().unwrap().solve_in_place(&mut b);
        assert!((b[0] - 1.0).abs() < 1e-14 && (b[1] - 7.0).abs() < 1e-14 && (b[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut a = BandMatrix::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.cholesky().is_none());
    }
}
