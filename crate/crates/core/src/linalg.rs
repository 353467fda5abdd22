//! Sparse and banded linear algebra for the grid solvers: CSR storage,
//! preconditioned conjugate gradients with IC(0), and banded LU with
//! partial pivoting.

use crate::error::{Error, Result};

/// Compressed sparse row matrix with a fixed pattern.
#[derive(Clone, Debug)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<usize>,
}

impl Csr {
    /// Builds the pattern from per-row sorted column lists. Every row must
    /// contain its diagonal.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        for (r, mut c) in rows.into_iter().enumerate() {
            c.sort_unstable();
            c.dedup();
            let d = c.iter().position(|&x| x == r).expect("pattern row lacks its diagonal");
            diag.push(cols.len() + d);
            cols.extend(c);
            row_ptr.push(cols.len());
        }
        let nnz = cols.len();
        Self {
            n,
            row_ptr,
            cols,
            vals: vec![0.0; nnz],
            diag,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Position of `(r, c)` in the value array.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let s = &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]];
        s.binary_search(&c).ok().map(|k| self.row_ptr[r] + k)
    }

    pub fn clear(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    pub fn add_at(&mut self, pos: usize, v: f64) {
        self.vals[pos] += v;
    }

    pub fn add_diagonal(&mut self, r: usize, v: f64) {
        self.vals[self.diag[r]] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.vals[k])
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[r] = s;
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }
}

/// Incomplete Cholesky factor with the lower pattern of the matrix, stored
/// as `L` with unit-free diagonal.
struct Ic0 {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Ic0 {
    fn new(a: &Csr, shift: f64) -> Option<Self> {
        let n = a.n;
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        for r in 0..n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let c = a.cols[k];
                if c <= r {
                    cols.push(c);
                    let mut v = a.vals[k];
                    if c == r {
                        v *= 1.0 + shift;
                    }
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        // row-oriented IC(0): L(r,c) = (A(r,c) - Σ_k L(r,k)L(c,k)) / L(c,c)
        for r in 0..n {
            let (rs, re) = (row_ptr[r], row_ptr[r + 1]);
            for idx in rs..re {
                let c = cols[idx];
                let (cs, ce) = (row_ptr[c], row_ptr[c + 1]);
                // sparse dot of row r and row c over columns < c
                let mut s = 0.0;
                let (mut a_i, mut b_i) = (rs, cs);
                while a_i < idx && b_i < ce - 1 {
                    let (ca, cb) = (cols[a_i], cols[b_i]);
                    if ca == cb {
                        s += vals[a_i] * vals[b_i];
                        a_i += 1;
                        b_i += 1;
                    } else if ca < cb {
                        a_i += 1;
                    } else {
                        b_i += 1;
                    }
                }
                if c == r {
                    let d = vals[idx] - s;
                    if !(d > 0.0) || !d.is_finite() {
                        return None;
                    }
                    vals[idx] = d.sqrt();
                } else {
                    vals[idx] = (vals[idx] - s) / vals[ce - 1];
                }
            }
        }
        Some(Self { n, row_ptr, cols, vals })
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        // L y = b
        for r in 0..self.n {
            let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut v = b[r];
            for k in s..e - 1 {
                v -= self.vals[k] * x[self.cols[k]];
            }
            x[r] = v / self.vals[e - 1];
        }
        // Lᵀ x = y
        for r in (0..self.n).rev() {
            let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
            x[r] /= self.vals[e - 1];
            let xr = x[r];
            for k in s..e - 1 {
                x[self.cols[k]] -= self.vals[k] * xr;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    /// Diagonal shift that made the incomplete factorization succeed.
    pub shift: f64,
}

/// Solves the SPD system `A x = b` by IC(0)-preconditioned conjugate
/// gradients, starting from the incoming `x`.
pub fn pcg(a: &Csr, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> Result<CgOutcome> {
    let n = a.n;
    let mut shift = 0.0;
    let pre = loop {
        if let Some(f) = Ic0::new(a, shift) {
            break f;
        }
        shift = if shift == 0.0 { 1e-3 } else { shift * 2.0 };
        if shift > 10.0 {
            return Err(Error::Internal(
                "incomplete Cholesky breaks down: matrix is not positive definite".into(),
            ));
        }
    };
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
            shift,
        });
    }
    let mut r = vec![0.0; n];
    a.mul(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    pre.solve(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = norm(&r) / bnorm;
    let mut it = 0;
    while res > rel_tol && it < max_iter {
        a.mul(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Internal(format!(
                "conjugate gradients met non-positive curvature {pap:e}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        pre.solve(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = norm(&r) / bnorm;
        it += 1;
    }
    if res > rel_tol {
        return Err(Error::Internal(format!(
            "conjugate gradients stopped at relative residual {res:e} after {it} iterations"
        )));
    }
    Ok(CgOutcome {
        iterations: it,
        relative_residual: res,
        shift,
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Band matrix with `kl` sub- and `ku` super-diagonals, with room for the
/// fill created by partial pivoting.
#[derive(Clone, Debug)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    factored: bool,
}

impl Banded {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: Vec::new(),
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.kl - r)
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
        self.factored = false;
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(c + self.kl >= r && c <= r + self.ku, "entry ({r},{c}) outside the band");
        let k = self.idx(r, c);
        self.data[k] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl < r || c > r + self.kl + self.ku {
            return 0.0;
        }
        self.data[self.idx(r, c)]
    }

    /// In-place LU factorization with partial pivoting.
    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let reach = self.kl + self.ku;
        self.pivots = vec![0; n];
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut piv = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::Internal(format!("singular banded matrix at column {k}")));
            }
            self.pivots[k] = piv;
            let last_col = (k + reach).min(n - 1);
            if piv != k {
                for c in k..=last_col {
                    let (a, b) = (self.idx(k, c), self.idx(piv, c));
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.idx(k, k)];
            for r in k + 1..=last_row {
                let ir = self.idx(r, k);
                let l = self.data[ir] / d;
                self.data[ir] = l;
                if l != 0.0 {
                    // idx(r, c) = r (width - 1) + kl + c
                    let base_r = r * (self.width - 1) + self.kl;
                    let base_k = k * (self.width - 1) + self.kl;
                    for c in k + 1..=last_col {
                        let u = self.data[base_k + c];
                        self.data[base_r + c] -= l * u;
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = b` with a factored matrix; `b` is overwritten by `x`.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        if !self.factored {
            return Err(Error::Internal("banded solve before factorization".into()));
        }
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + self.kl).min(n - 1) {
                    b[r] -= self.data[self.idx(r, k)] * bk;
                }
            }
        }
        let reach = self.kl + self.ku;
        for k in (0..n).rev() {
            let mut v = b[k];
            for c in k + 1..=(k + reach).min(n - 1) {
                v -= self.data[self.idx(k, c)] * b[c];
            }
            b[k] = v / self.data[self.idx(k, k)];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> Csr {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![i];
                if i > 0 {
                    r.push(i - 1);
                }
                if i + 1 < n {
                    r.push(i + 1);
                }
                r
            })
            .collect();
        let mut a = Csr::from_pattern(rows);
        for i in 0..n {
            a.add_diagonal(i, 2.0);
            if i > 0 {
                let k = a.position(i, i - 1).unwrap();
                a.add_at(k, -1.0);
            }
            if i + 1 < n {
                let k = a.position(i, i + 1).unwrap();
                a.add_at(k, -1.0);
            }
        }
        a
    }

    #[test]
    fn pcg_tridiagonal_is_exact_with_ic0() {
        // IC(0) of a tridiagonal matrix is its exact Cholesky factor
        let a = laplace_1d(50);
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; 50];
        a.mul(&xs, &mut b);
        let mut x = vec![0.0; 50];
        let out = pcg(&a, &b, &mut x, 1e-12, 100).unwrap();
        assert!(out.iterations <= 2);
        for i in 0..50 {
            assert!((x[i] - xs[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn banded_lu_with_pivoting() {
        // non-symmetric with a zero leading diagonal entry
        let n = 30;
        let mut m = Banded::new(n, 2, 1);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for c in i.saturating_sub(2)..=(i + 1).min(n - 1) {
                let v = if i == c {
                    if i == 0 {
                        0.0
                    } else {
                        4.0
                    }
                } else {
                    1.0 + 0.1 * (i + 2 * c) as f64
                };
                m.add(i, c, v);
                dense[i][c] = v;
            }
        }
        let xs: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.5).collect();
        let mut b: Vec<f64> = (0..n).map(|i| (0..n).map(|c| dense[i][c] * xs[c]).sum()).collect();
        m.factor().unwrap();
        m.solve_in_place(&mut b).unwrap();
        for i in 0..n {
            assert!((b[i] - xs[i]).abs() < 1e-10, "{i}: {} vs {}", b[i], xs[i]);
        }
    }

    #[test]
    fn singular_banded_reported() {
        let mut m = Banded::new(3, 1, 1);
        m.add(0, 0, 1.0);
        m.add(1, 1, 0.0);
        assert!(m.factor().is_err());
    }
}
