//! Dense least squares by Householder QR.

use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
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
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|i| dot(self.row(i), x))
            .collect()
    }

    /// `X' v`.
    pub fn t_mul_vec(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o = *o + x * vi;
            }
        }
        out
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Solves `min ||diag(sqrt(w)) (A x - b)||` by Householder QR.
///
/// Returns the indices of numerically dependent columns on failure. A column
/// is dependent when its diagonal entry of R falls below `T::RANK_TOL` times
/// the largest diagonal entry.
pub fn weighted_lstsq<T: Scalar>(
    a: &Matrix<T>,
    b: &[T],
    w: Option<&[T]>,
) -> Result<Vec<T>, Vec<usize>> {
    let (n, p) = (a.rows, a.cols);
    assert_eq!(b.len(), n);
    // Column-major working copy, rows scaled by sqrt(w).
    let mut q = vec![T::zero(); n * p];
    let mut rhs = b.to_vec();
    for i in 0..n {
        let s = w.map_or(T::one(), |w| w[i].sqrt());
        for j in 0..p {
            q[j * n + i] = a.get(i, j) * s;
        }
        rhs[i] = rhs[i] * s;
    }

    let mut diag = vec![T::zero(); p];
    let mut col_scale = vec![T::zero(); p];
    for j in 0..p {
        col_scale[j] = q[j * n..(j + 1) * n]
            .iter()
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt();
    }
    for k in 0..p.min(n) {
        let col = &mut q[k * n..(k + 1) * n];
        let norm = col[k..].iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
        if norm == T::zero() {
            diag[k] = T::zero();
            continue;
        }
        let alpha = if col[k] > T::zero() { -norm } else { norm };
        // v = x - alpha e_k, stored in place; H = I - 2 v v' / (v'v)
        col[k] = col[k] - alpha;
        let vtv = col[k..].iter().fold(T::zero(), |acc, &x| acc + x * x);
        diag[k] = alpha;
        if vtv == T::zero() {
            continue;
        }
        let v: Vec<T> = col[k..].to_vec();
        let two = T::lit(2.0);
        for j in (k + 1)..p {
            let cj = &mut q[j * n..(j + 1) * n];
            let s = two * dot(&v, &cj[k..]) / vtv;
            for (c, &vi) in cj[k..].iter_mut().zip(&v) {
                *c = *c - s * vi;
            }
        }
        let s = two * dot(&v, &rhs[k..]) / vtv;
        for (r, &vi) in rhs[k..].iter_mut().zip(&v) {
            *r = *r - s * vi;
        }
    }

    // A column is dependent when the part of it orthogonal to earlier columns
    // is negligible relative to its own length.
    let tol = T::lit(T::RANK_TOL);
    let dependent: Vec<usize> = (0..p)
        .filter(|&j| j >= n || diag[j].abs() <= tol * col_scale[j].max(T::min_positive_value()))
        .collect();
    if !dependent.is_empty() {
        return Err(dependent);
    }

    let mut x = vec![T::zero(); p];
    for k in (0..p).rev() {
        let mut s = rhs[k];
        for j in (k + 1)..p {
            s = s - q[j * n + k] * x[j];
        }
        x[k] = s / diag[k];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_system_is_recovered() {
        let a = Matrix::from_rows(&[
            vec![1.0_f64, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 2.0],
            vec![1.0, 3.0],
        ]);
        let b = [2.0, 5.0, 8.0, 11.0];
        let x = weighted_lstsq(&a, &b, None).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_is_reported() {
        let a = Matrix::from_rows(&[
            vec![1.0, 0.5, 0.5],
            vec![1.0, 1.5, 1.5],
            vec![1.0, -2.0, -2.0],
            vec![1.0, 4.0, 4.0],
        ]);
        assert_eq!(weighted_lstsq(&a, &[1.0, 2.0, 3.0, 4.0], None), Err(vec![2]));
    }

    #[test]
    fn integer_weights_match_row_duplication() {
        let a = Matrix::from_rows(&[vec![1.0_f64, 0.0], vec![1.0, 1.0], vec![1.0, 3.0]]);
        let b = [1.0, 0.0, 4.0];
        let weighted = weighted_lstsq(&a, &b, Some(&[2.0, 1.0, 1.0])).unwrap();
        let dup = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 3.0],
        ]);
        let plain = weighted_lstsq(&dup, &[1.0, 1.0, 0.0, 4.0], None).unwrap();
        for (x, y) in weighted.iter().zip(&plain) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
