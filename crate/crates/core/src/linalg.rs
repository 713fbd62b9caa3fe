//! Dense symmetric positive-definite kernels on packed lower-triangular
//! storage (row-major: row `i` holds columns `0..=i` contiguously).

use alloc::vec::Vec;

#[inline]
pub(crate) fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

#[inline]
pub(crate) fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

/// Dot product with four independent accumulators so it vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Lower Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Cholesky {
    n: usize,
    data: Vec<f64>,
}

impl Cholesky {
    /// Factorizes the packed lower triangle of a symmetric matrix, consuming
    /// it. Returns the index of the failing pivot if `A` is not numerically
    /// positive definite.
    pub(crate) fn factor(n: usize, mut a: Vec<f64>) -> Result<Self, usize> {
        debug_assert_eq!(a.len(), packed_len(n));
        for i in 0..n {
            let (done, rest) = a.split_at_mut(row_start(i));
            let row_i = &mut rest[..=i];
            for j in 0..i {
                let row_j = &done[row_start(j)..row_start(j) + j + 1];
                let s = row_i[j] - dot(&row_i[..j], &row_j[..j]);
                row_i[j] = s / row_j[j];
            }
            let d = row_i[i] - dot(&row_i[..i], &row_i[..i]);
            if !(d > 0.0) || !d.is_finite() {
                return Err(i);
            }
            row_i[i] = crate::math::sqrt(d);
        }
        Ok(Cholesky { n, data: a })
    }

    pub(crate) fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[row_start(i)..row_start(i) + i + 1]
    }

    pub(crate) fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[row_start(i) + j]
    }

    pub(crate) fn diag(&self, i: usize) -> f64 {
        self.data[row_start(i) + i]
    }

    /// `Σ log L_ii = ½ log det A`.
    pub(crate) fn half_log_det(&self) -> f64 {
        (0..self.n).map(|i| crate::math::ln(self.diag(i))).sum()
    }

    /// Solves `L z = b` in place.
    pub(crate) fn solve_lower_in_place(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let row = self.row(i);
            b[i] = (b[i] - dot(&row[..i], &b[..i])) / row[i];
        }
    }

    /// Solves `Lᵀ x = z` in place.
    pub(crate) fn solve_upper_in_place(&self, z: &mut [f64]) {
        for i in (0..self.n).rev() {
            let row = self.row(i);
            let xi = z[i] / row[i];
            z[i] = xi;
            for (zk, lik) in z[..i].iter_mut().zip(&row[..i]) {
                *zk -= lik * xi;
            }
        }
    }

    /// Solves `A x = b`.
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// Packed lower triangle of `A⁻¹`.
    pub(crate) fn inverse_packed(&self) -> Vec<f64> {
        let n = self.n;
        // Columns of W = L⁻¹, column a stored contiguously for rows a..n.
        let mut offsets = Vec::with_capacity(n + 1);
        let mut off = 0;
        for a in 0..n {
            offsets.push(off);
            off += n - a;
        }
        offsets.push(off);
        let mut w = alloc::vec![0.0; off];
        for a in 0..n {
            let col = &mut w[offsets[a]..offsets[a + 1]];
            col[0] = 1.0 / self.diag(a);
            for k in a + 1..n {
                let row = self.row(k);
                let s = dot(&row[a..k], &col[..k - a]);
                col[k - a] = -s / row[k];
            }
        }
        // (A⁻¹)_{ab} = Σ_{k ≥ max(a,b)} W_{ka} W_{kb}.
        let mut inv = alloc::vec![0.0; packed_len(n)];
        for b in 0..n {
            let col_b = &w[offsets[b]..offsets[b + 1]];
            for a in 0..=b {
                let col_a = &w[offsets[a] + (b - a)..offsets[a + 1]];
                inv[row_start(b) + a] = dot(col_a, col_b);
            }
        }
        inv
    }
}
