//! Small dense and banded linear-algebra kernels used by the mode solver and
//! the beam propagator.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Symmetric banded matrix stored by lower band rows.
///
/// Row `i` holds `A[i][i - b ..= i]` at positions `0 ..= b`, so column `j`
/// of row `i` lives at `j + b - i`. Entries left of column 0 are padding.
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
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

    /// Sets `A[i][j]` for `j <= i`, `i - j <= bw`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.bw);
        self.data[i * (self.bw + 1) + j + self.bw - i] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            return 0.0;
        }
        self.data[i * (self.bw + 1) + j + self.bw - i]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)]
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let b = self.bw;
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let row = self.row(i);
            let j0 = i.saturating_sub(b);
            let mut acc = row[b] * x[i];
            for j in j0..i {
                let a = row[j + b - i];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    /// In-place banded Cholesky factorisation `A = L Lᵀ`.
    pub fn cholesky(mut self) -> Result<BandedCholesky> {
        let b = self.bw;
        let w = b + 1;
        for i in 0..self.n {
            let j0 = i.saturating_sub(b);
            for j in j0..=i {
                // columns k shared by rows i and j: max(i-b, j-b) .. j
                let k0 = j.saturating_sub(b).max(j0);
                let len = j - k0;
                let (ri, rj) = (i * w + k0 + b - i, j * w + k0 + b - j);
                let mut s = self.data[i * w + j + b - i];
                s -= dot(&self.data[ri..ri + len], &self.data[rj..rj + len]);
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i });
                    }
                    self.data[i * w + b] = s.sqrt();
                } else {
                    self.data[i * w + j + b - i] = s / self.data[j * w + b];
                }
            }
        }
        Ok(BandedCholesky { l: self })
    }

    /// Number of negative eigenvalues, from the pivots of an unpivoted
    /// banded `L D Lᵀ` factorisation (Sylvester inertia).
    pub fn negative_inertia(&self) -> usize {
        let b = self.bw;
        let w = b + 1;
        let n = self.n;
        // l holds unit-lower factor entries, d the pivots
        let mut l = vec![0.0; n * w];
        let mut d = vec![0.0; n];
        let mut tmp = vec![0.0; w];
        let mut negatives = 0;
        for i in 0..n {
            let j0 = i.saturating_sub(b);
            for j in j0..i {
                let k0 = j.saturating_sub(b).max(j0);
                let lj = j * w + k0 + b - j;
                let s = self.data[i * w + j + b - i]
                    - dot(&tmp[k0 - j0..j - j0], &l[lj..lj + (j - k0)]);
                // tmp[j] = L[i][j] * D[j]
                tmp[j - j0] = s;
                l[i * w + j + b - i] = s / d[j];
            }
            let li = i * w + j0 + b - i;
            let mut s = self.data[i * w + b] - dot(&tmp[..i - j0], &l[li..li + (i - j0)]);
            if s == 0.0 {
                s = f64::EPSILON * (1.0 + self.data[i * w + b].abs());
            }
            d[i] = s;
            if s < 0.0 {
                negatives += 1;
            }
        }
        negatives
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorise the reduction
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = acc[0] + acc[1] + acc[2] + acc[3];
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Factor `L` of a banded Cholesky decomposition.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    l: SymBanded,
}

impl BandedCholesky {
    pub fn dim(&self) -> usize {
        self.l.n
    }

    /// Solves `A x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.l.n;
        let b = self.l.bw;
        let w = b + 1;
        let data = &self.l.data;
        for i in 0..n {
            let j0 = i.saturating_sub(b);
            let row = &data[i * w + j0 + b - i..i * w + b];
            let s = x[i] - dot(row, &x[j0..i]);
            x[i] = s / data[i * w + b];
        }
        for i in (0..n).rev() {
            x[i] /= data[i * w + b];
            let xi = x[i];
            let j0 = i.saturating_sub(b);
            let row = &data[i * w + j0 + b - i..i * w + b];
            for (xj, &lij) in x[j0..i].iter_mut().zip(row) {
                *xj -= lij * xi;
            }
        }
    }
}

/// Count of eigenvalues strictly greater than `shift` of the symmetric
/// tridiagonal matrix with diagonal `diag` and off-diagonal `off`.
pub fn sturm_count_above(diag: &[f64], off: &[f64], shift: f64) -> usize {
    // counts negative pivots of (shift I - T)
    let mut count = 0;
    let mut q = shift - diag[0];
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let prev = if q == 0.0 { f64::EPSILON * (1.0 + shift.abs()) } else { q };
        q = (shift - diag[i]) - off[i - 1] * off[i - 1] / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
pub fn tridiagonal_max_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    // Gershgorin bounds
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count_above(diag, off, mid) >= 1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Complex tridiagonal solve (Thomas algorithm) of `a_i x_{i-1} + b_i x_i +
/// c_i x_{i+1} = d_i`. `scratch` must have the same length as `d`.
pub fn solve_tridiagonal_complex(
    a: &[Complex64],
    b: &[Complex64],
    c: &[Complex64],
    d: &mut [Complex64],
    scratch: &mut [Complex64],
) {
    let n = d.len();
    if n == 0 {
        return;
    }
    scratch[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let m = b[i] - a[i] * scratch[i - 1];
        scratch[i] = if i + 1 < n { c[i] / m } else { Complex64::new(0.0, 0.0) };
        d[i] = (d[i] - a[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] -= scratch[i] * next;
    }
}

/// Orthonormalises the columns of a column-major block in place (modified
/// Gram-Schmidt, two passes). Returns the number of independent columns kept.
pub fn orthonormalize(cols: &mut [Vec<f64>]) -> usize {
    let mut kept = 0;
    for j in 0..cols.len() {
        for _ in 0..2 {
            for i in 0..kept {
                let p = dot(&cols[i], &cols[j]);
                let (head, tail) = cols.split_at_mut(j);
                for (x, y) in tail[0].iter_mut().zip(&head[i]) {
                    *x -= p * y;
                }
            }
        }
        let norm = dot(&cols[j], &cols[j]).sqrt();
        if norm > 1e-300 {
            cols[j].iter_mut().for_each(|v| *v /= norm);
            cols.swap(kept, j);
            kept += 1;
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, shift: f64) -> SymBanded {
        let mut m = SymBanded::zeros(n, 1);
        for i in 0..n {
            m.set(i, i, 2.0 + shift);
            if i > 0 {
                m.set(i, i - 1, -1.0);
            }
        }
        m
    }

    #[test]
    fn cholesky_solves_banded_system() {
        let n = 50;
        let mut m = SymBanded::zeros(n, 3);
        for i in 0..n {
            m.set(i, i, 10.0 + i as f64 * 0.1);
            for k in 1..=3 {
                if i >= k {
                    m.set(i, i - k, -1.0 / k as f64);
                }
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut rhs = vec![0.0; n];
        m.matvec(&x_true, &mut rhs);
        let chol = m.clone().cholesky().unwrap();
        chol.solve_in_place(&mut rhs);
        for (a, b) in rhs.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = laplacian_1d(10, -3.0);
        assert!(matches!(m.cholesky(), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn inertia_matches_sturm_count() {
        // eigenvalues of the 1D Laplacian: 2 - 2cos(k pi/(n+1))
        let n = 40;
        for shift in [-0.5, -1.0, -2.5, -3.9] {
            let m = laplacian_1d(n, shift);
            let analytic = (1..=n)
                .filter(|&k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos() + shift < 0.0)
                .count();
            assert_eq!(m.negative_inertia(), analytic);
            let diag = vec![-2.0 - shift; n];
            let off = vec![1.0; n - 1];
            // eigenvalues of -(L + shift) above 0 are the negative ones of L + shift
            assert_eq!(sturm_count_above(&diag, &off, 0.0), analytic);
        }
    }

    #[test]
    fn tridiagonal_max_matches_closed_form() {
        let n = 25;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let expected = 2.0 - 2.0 * (n as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert!((tridiagonal_max_eigenvalue(&diag, &off) - expected).abs() < 1e-12);
    }

    #[test]
    fn thomas_matches_dense_product() {
        let n = 12;
        let a: Vec<Complex64> = (0..n).map(|i| Complex64::new(0.3, 0.1 * i as f64)).collect();
        let b: Vec<Complex64> = (0..n).map(|_| Complex64::new(2.0, -0.5)).collect();
        let c: Vec<Complex64> = (0..n).map(|i| Complex64::new(-0.2, 0.05 * i as f64)).collect();
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let mut d: Vec<Complex64> = (0..n)
            .map(|i| {
                let mut s = b[i] * x[i];
                if i > 0 {
                    s += a[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += c[i] * x[i + 1];
                }
                s
            })
            .collect();
        let mut scratch = vec![Complex64::new(0.0, 0.0); n];
        solve_tridiagonal_complex(&a, &b, &c, &mut d, &mut scratch);
        for (u, v) in d.iter().zip(&x) {
            assert!((u - v).norm() < 1e-12);
        }
    }
}
