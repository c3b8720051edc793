//! Small dense linear algebra: row-major matrices, pivoted Householder QR and a
//! cyclic Jacobi eigensolver. Sized for the handful-of-variables problems the
//! planners produce; nothing here is tuned for large matrices.

use std::ops::{Index, IndexMut};

use crate::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from rows; every row must have length `cols`.
    pub fn from_rows(cols: usize, rows: &[Vec<T>]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged row");
            data.extend_from_slice(row);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `selfᵀ x`.
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o = *o + a * xr;
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == T::zero() {
                    continue;
                }
                for c in 0..other.cols {
                    out[(r, c)] = out[(r, c)] + a * other[(k, c)];
                }
            }
        }
        out
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|`; `None` for non-square input.
    pub fn asymmetry(&self) -> Option<T> {
        if self.rows != self.cols {
            return None;
        }
        let mut worst = T::zero();
        for r in 0..self.rows {
            for c in r + 1..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)]).abs());
            }
        }
        Some(worst)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

#[inline]
pub fn norm_inf<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

#[inline]
pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Householder QR with column pivoting, `M P = Q R`, of an `n × k` matrix.
///
/// The planners use it with `M = Aᵀ` (constraint rows as columns): the first
/// `rank` columns of `Q` span the row space of `A`, the rest its null space.
#[derive(Clone, Debug)]
pub struct Qr<T> {
    q: Mat<T>,
    r: Mat<T>,
    perm: Vec<usize>,
    rank: usize,
}

impl<T: Scalar> Qr<T> {
    pub fn new(m: &Mat<T>) -> Self {
        let n = m.rows();
        let k = m.cols();
        let mut r = m.clone();
        let mut q = Mat::identity(n);
        let mut perm: Vec<usize> = (0..k).collect();
        let scale = m.max_abs().max(T::one());
        let rank_tol = T::epsilon() * T::lit(1e4) * scale;
        let mut rank = 0;
        let mut v = vec![T::zero(); n];

        for j in 0..n.min(k) {
            let col_norm2 = |r: &Mat<T>, c: usize| (j..n).fold(T::zero(), |s, i| s + r[(i, c)] * r[(i, c)]);
            let mut best = j;
            let mut best_norm = col_norm2(&r, j);
            for c in j + 1..k {
                let cn = col_norm2(&r, c);
                if cn > best_norm {
                    best = c;
                    best_norm = cn;
                }
            }
            if best != j {
                for i in 0..n {
                    let tmp = r[(i, j)];
                    r[(i, j)] = r[(i, best)];
                    r[(i, best)] = tmp;
                }
                perm.swap(j, best);
            }
            let norm = best_norm.sqrt();
            if norm <= rank_tol {
                break;
            }
            rank = j + 1;

            let x0 = r[(j, j)];
            let alpha = if x0 >= T::zero() { -norm } else { norm };
            for i in 0..n {
                v[i] = if i < j { T::zero() } else { r[(i, j)] };
            }
            v[j] = v[j] - alpha;
            let vtv = (j..n).fold(T::zero(), |s, i| s + v[i] * v[i]);
            if vtv == T::zero() {
                continue;
            }
            let beta = T::lit(2.0) / vtv;

            for c in j..k {
                let s = (j..n).fold(T::zero(), |s, i| s + v[i] * r[(i, c)]) * beta;
                for i in j..n {
                    r[(i, c)] = r[(i, c)] - s * v[i];
                }
            }
            for row in 0..n {
                let s = (j..n).fold(T::zero(), |s, i| s + q[(row, i)] * v[i]) * beta;
                for i in j..n {
                    q[(row, i)] = q[(row, i)] - s * v[i];
                }
            }
            for i in j + 1..n {
                r[(i, j)] = T::zero();
            }
        }
        Self { q, r, perm, rank }
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Column permutation: column `i` of `M P` is column `perm()[i]` of `M`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Orthonormal basis of the null space of `Mᵀ`, as an `n × (n - rank)` matrix.
    pub fn null_basis(&self) -> Mat<T> {
        let n = self.q.rows();
        Mat::from_fn(n, n - self.rank, |r, c| self.q[(r, self.rank + c)])
    }

    /// Least-squares solution of `M λ = v`; returns `(λ, residual norm)`.
    ///
    /// Columns beyond the numerical rank get a zero coefficient.
    pub fn solve_ls(&self, v: &[T]) -> (Vec<T>, T) {
        let c = self.q.tr_mul_vec(v);
        let mut z = vec![T::zero(); self.rank];
        for i in (0..self.rank).rev() {
            let mut s = c[i];
            for l in i + 1..self.rank {
                s = s - self.r[(i, l)] * z[l];
            }
            z[i] = s / self.r[(i, i)];
        }
        let mut lambda = vec![T::zero(); self.perm.len()];
        for (i, &zi) in z.iter().enumerate() {
            lambda[self.perm[i]] = zi;
        }
        let resid = c[self.rank..].iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
        (lambda, resid)
    }

    /// Minimum-norm solution of `Mᵀ x = b`; returns `(x, consistency residual)`.
    pub fn solve_min_norm_transposed(&self, b: &[T]) -> (Vec<T>, T) {
        let n = self.q.rows();
        let k = self.perm.len();
        debug_assert_eq!(b.len(), k);
        let c: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        let mut y = vec![T::zero(); n];
        for i in 0..self.rank {
            let mut s = c[i];
            for l in 0..i {
                s = s - self.r[(l, i)] * y[l];
            }
            y[i] = s / self.r[(i, i)];
        }
        let mut resid = T::zero();
        for i in self.rank..k {
            let mut s = -c[i];
            for l in 0..self.rank {
                s = s + self.r[(l, i)] * y[l];
            }
            resid = resid.max(s.abs());
        }
        (self.q.mul_vec(&y), resid)
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    /// Ascending eigenvalues.
    pub values: Vec<T>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: Mat<T>,
}

impl<T: Scalar> SymEigen<T> {
    /// Cyclic Jacobi rotations; the input is assumed symmetric.
    pub fn new(m: &Mat<T>) -> Self {
        let n = m.rows();
        assert_eq!(n, m.cols(), "eigen of non-square matrix");
        let mut a = m.clone();
        let mut v = Mat::identity(n);
        let scale = a.max_abs();
        if n > 1 && scale > T::zero() {
            let tol = T::epsilon() * scale;
            for _sweep in 0..64 {
                let mut off = T::zero();
                for p in 0..n {
                    for q in p + 1..n {
                        off = off.max(a[(p, q)].abs());
                    }
                }
                if off <= tol {
                    break;
                }
                for p in 0..n {
                    for q in p + 1..n {
                        let apq = a[(p, q)];
                        if apq.abs() <= tol * T::lit(1e-3) {
                            continue;
                        }
                        let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                        let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                        let c = T::one() / (t * t + T::one()).sqrt();
                        let s = t * c;
                        for k in 0..n {
                            let akp = a[(k, p)];
                            let akq = a[(k, q)];
                            a[(k, p)] = c * akp - s * akq;
                            a[(k, q)] = s * akp + c * akq;
                        }
                        for k in 0..n {
                            let apk = a[(p, k)];
                            let aqk = a[(q, k)];
                            a[(p, k)] = c * apk - s * aqk;
                            a[(q, k)] = s * apk + c * aqk;
                        }
                        for k in 0..n {
                            let vkp = v[(k, p)];
                            let vkq = v[(k, q)];
                            v[(k, p)] = c * vkp - s * vkq;
                            v[(k, q)] = s * vkp + c * vkq;
                        }
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = Mat::from_fn(n, n, |r, c| v[(r, order[c])]);
        Self { values, vectors }
    }

    pub fn min(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    pub fn max(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }
}
