//! Basis factorization for `[A  -I]`.
//!
//! Logical columns are unit vectors, so only the kernel formed by the tight
//! rows and basic structural columns needs a numeric factor. Pivots between
//! refactorizations are kept as a product-form eta file.

use super::lu::DenseLu;

/// Column-compressed constraint matrix.
#[derive(Debug, Clone)]
pub struct Csc {
    pub rows: usize,
    pub cols: usize,
    pub start: Vec<usize>,
    pub index: Vec<usize>,
    pub value: Vec<f64>,
}

impl Csc {
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.start[j], self.start[j + 1]);
        self.index[a..b].iter().copied().zip(self.value[a..b].iter().copied())
    }

    pub fn dot(&self, j: usize, y: &[f64]) -> f64 {
        self.column(j).map(|(i, a)| a * y[i]).sum()
    }
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    others: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct BasisFactor {
    m: usize,
    // basic positions holding structurals, and their column indices
    struct_pos: Vec<usize>,
    struct_col: Vec<usize>,
    // tight rows, in kernel order
    tight: Vec<usize>,
    // position of the basic logical of row i, if any
    logical_pos: Vec<Option<usize>>,
    kernel: Option<DenseLu>,
    etas: Vec<Eta>,
}

/// A singular basis: each entry pairs a basis position holding a dependent
/// structural with a row whose logical should replace it.
pub type Repair = Vec<(usize, usize)>;

impl BasisFactor {
    pub fn new(a: &Csc, heads: &[usize]) -> Result<Self, Repair> {
        let m = a.rows;
        let n = a.cols;
        let mut struct_pos = Vec::new();
        let mut struct_col = Vec::new();
        let mut logical_pos = vec![None; m];
        for (p, &h) in heads.iter().enumerate() {
            if h < n {
                struct_pos.push(p);
                struct_col.push(h);
            } else {
                logical_pos[h - n] = Some(p);
            }
        }
        let tight: Vec<usize> = (0..m).filter(|&i| logical_pos[i].is_none()).collect();
        let q = tight.len();
        debug_assert_eq!(q, struct_col.len());
        let kernel = if q == 0 {
            None
        } else {
            let mut kidx = vec![usize::MAX; m];
            for (k, &i) in tight.iter().enumerate() {
                kidx[i] = k;
            }
            let mut dense = vec![0.0; q * q];
            for (b, &j) in struct_col.iter().enumerate() {
                for (i, v) in a.column(j) {
                    let k = kidx[i];
                    if k != usize::MAX {
                        dense[k * q + b] += v;
                    }
                }
            }
            match DenseLu::factor(q, dense) {
                Ok(lu) => Some(lu),
                Err(s) => {
                    let repair = s
                        .columns
                        .iter()
                        .zip(&s.rows)
                        .map(|(&b, &k)| (struct_pos[b], tight[k]))
                        .collect();
                    return Err(repair);
                }
            }
        };
        Ok(Self {
            m,
            struct_pos,
            struct_col,
            tight,
            logical_pos,
            kernel,
            etas: Vec::new(),
        })
    }

    pub fn eta_count(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B w = r`; `r` is indexed by row, the result by basis position.
    pub fn ftran(&self, a: &Csc, r: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        let mut u: Vec<f64> = self.tight.iter().map(|&i| r[i]).collect();
        if let Some(lu) = &self.kernel {
            lu.solve(&mut u);
        }
        let mut acc = vec![0.0; self.m];
        for (b, &j) in self.struct_col.iter().enumerate() {
            w[self.struct_pos[b]] = u[b];
            if u[b] != 0.0 {
                for (i, v) in a.column(j) {
                    acc[i] += v * u[b];
                }
            }
        }
        for (i, lp) in self.logical_pos.iter().enumerate() {
            if let Some(p) = *lp {
                w[p] = acc[i] - r[i];
            }
        }
        for e in &self.etas {
            let wp = w[e.pos] / e.pivot;
            w[e.pos] = wp;
            if wp != 0.0 {
                for &(i, v) in &e.others {
                    w[i] -= v * wp;
                }
            }
        }
        w
    }

    /// Solves `B^T y = c`; `c` is indexed by basis position, `y` by row.
    pub fn btran(&self, a: &Csc, c: &[f64]) -> Vec<f64> {
        let mut c = c.to_vec();
        for e in self.etas.iter().rev() {
            let mut s = c[e.pos];
            for &(i, v) in &e.others {
                s -= v * c[i];
            }
            c[e.pos] = s / e.pivot;
        }
        let mut y = vec![0.0; self.m];
        for (i, lp) in self.logical_pos.iter().enumerate() {
            if let Some(p) = *lp {
                y[i] = -c[p];
            }
        }
        let mut rhs: Vec<f64> = Vec::with_capacity(self.struct_col.len());
        for (b, &j) in self.struct_col.iter().enumerate() {
            let mut s = c[self.struct_pos[b]];
            for (i, v) in a.column(j) {
                if self.logical_pos[i].is_some() {
                    s -= v * y[i];
                }
            }
            rhs.push(s);
        }
        if let Some(lu) = &self.kernel {
            lu.solve_transpose(&mut rhs);
        }
        for (k, &i) in self.tight.iter().enumerate() {
            y[i] = rhs[k];
        }
        y
    }

    /// Records the replacement of position `pos` by a column whose ftran is `alpha`.
    pub fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let others = alpha
            .iter()
            .enumerate()
            .filter(|&(i, v)| i != pos && *v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            others,
        });
    }
}
