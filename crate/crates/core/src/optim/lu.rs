//! Dense LU with partial pivoting.

const PIVOT_TOL: f64 = 1e-10;

/// Columns without an acceptable pivot, paired with rows left unpivoted.
#[derive(Debug, Clone, PartialEq)]
pub struct Singular {
    pub columns: Vec<usize>,
    pub rows: Vec<usize>,
}

/// `P A = L U` for a square matrix stored row-major.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    // perm[k] = original row placed at position k
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factors the `n x n` row-major matrix `a`.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Result<Self, Singular> {
        debug_assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut bad_cols = Vec::new();
        // Row position where the next pivot goes; lags k when columns are singular.
        let mut r = 0;
        for k in 0..n {
            let mut best = r;
            let mut best_abs = 0.0;
            for i in r..n {
                let v = a[i * n + k].abs();
                if v > best_abs {
                    best_abs = v;
                    best = i;
                }
            }
            if best_abs < PIVOT_TOL {
                bad_cols.push(k);
                continue;
            }
            if best != r {
                for j in 0..n {
                    a.swap(best * n + j, r * n + j);
                }
                perm.swap(best, r);
            }
            let piv = a[r * n + k];
            for i in r + 1..n {
                let f = a[i * n + k] / piv;
                if f == 0.0 {
                    continue;
                }
                a[i * n + k] = f;
                let (top, bottom) = a.split_at_mut(i * n);
                let src = &top[r * n + k + 1..r * n + n];
                let dst = &mut bottom[k + 1..n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= f * s;
                }
            }
            r += 1;
        }
        if !bad_cols.is_empty() {
            let rows = perm[r..].to_vec();
            return Err(Singular {
                columns: bad_cols,
                rows,
            });
        }
        Ok(Self { n, lu: a, perm })
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let mut s = x[i];
            for (l, xv) in row.iter().zip(&x[..i]) {
                s -= l * xv;
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let mut s = x[i];
            for j in i + 1..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        b.copy_from_slice(&x);
    }

    /// Solves `A^T x = b` in place.
    pub fn solve_transpose(&self, b: &mut [f64]) {
        let n = self.n;
        let mut z = b.to_vec();
        // U^T z = b
        for i in 0..n {
            z[i] /= self.lu[i * n + i];
            let zi = z[i];
            if zi != 0.0 {
                let row = &self.lu[i * n + i + 1..(i + 1) * n];
                for (zj, u) in z[i + 1..].iter_mut().zip(row) {
                    *zj -= u * zi;
                }
            }
        }
        // L^T w = z
        for i in (0..n).rev() {
            let zi = z[i];
            if zi != 0.0 {
                let row = &self.lu[i * n..i * n + i];
                for (zj, l) in z[..i].iter_mut().zip(row) {
                    *zj -= l * zi;
                }
            }
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = z[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(n: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
        (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
    }

    #[test]
    fn solves_both_orientations() {
        let a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 4.0];
        let lu = DenseLu::factor(3, a.clone()).unwrap();
        let mut b = vec![1.0, 2.0, 3.0];
        lu.solve(&mut b);
        let back = matvec(3, &a, &b);
        for (u, v) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((u - v).abs() < 1e-12);
        }
        let at: Vec<f64> = (0..9).map(|k| a[(k % 3) * 3 + k / 3]).collect();
        let mut c = vec![-1.0, 0.5, 2.0];
        lu.solve_transpose(&mut c);
        let back = matvec(3, &at, &c);
        for (u, v) in back.iter().zip([-1.0, 0.5, 2.0]) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_dependent_column() {
        let a = vec![1.0, 2.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0, 1.0];
        let err = DenseLu::factor(3, a).unwrap_err();
        assert_eq!(err.columns, vec![1]);
        assert_eq!(err.rows.len(), 1);
    }
}
