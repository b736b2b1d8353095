//! Lowering to `min c^T x (+ 1/2 x^T Q x)` over `x >= 0`.

use super::{LpSpec, RowKind, Sense};

pub(crate) struct StdForm {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub kinds: Vec<RowKind>,
    pub c: Vec<f64>,
    pub q: Option<Vec<Vec<f64>>>,
    /// Original variable `j` equals `offset + sum coef * x_std[col]`.
    var_map: Vec<(f64, Vec<(usize, f64)>)>,
}

impl StdForm {
    /// The first `spec.num_rows()` rows keep the original order; bound rows follow.
    pub fn from_spec(spec: &LpSpec, quadratic: Option<&Vec<Vec<f64>>>) -> Self {
        let sign = match spec.sense {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        };
        let n = spec.num_vars();
        let mut var_map = Vec::with_capacity(n);
        let mut ncols = 0usize;
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            let (l, u) = (spec.lower[j], spec.upper[j]);
            if l.is_finite() {
                var_map.push((l, vec![(ncols, 1.0)]));
                if u.is_finite() {
                    bound_rows.push((ncols, u - l));
                }
                ncols += 1;
            } else if u.is_finite() {
                var_map.push((u, vec![(ncols, -1.0)]));
                ncols += 1;
            } else {
                var_map.push((0.0, vec![(ncols, 1.0), (ncols + 1, -1.0)]));
                ncols += 2;
            }
        }
        let offset: Vec<f64> = var_map.iter().map(|(o, _)| *o).collect();

        let mut a = Vec::with_capacity(spec.num_rows() + bound_rows.len());
        let mut b = Vec::with_capacity(a.capacity());
        let mut kinds = Vec::with_capacity(a.capacity());
        for (i, row) in spec.matrix.iter().enumerate() {
            let mut std_row = vec![0.0; ncols];
            let mut shift = 0.0;
            for (j, &aij) in row.iter().enumerate() {
                if aij == 0.0 {
                    continue;
                }
                shift += aij * offset[j];
                for &(col, coef) in &var_map[j].1 {
                    std_row[col] += aij * coef;
                }
            }
            a.push(std_row);
            b.push(spec.rhs[i] - shift);
            kinds.push(spec.kinds[i]);
        }
        for (col, width) in bound_rows {
            let mut row = vec![0.0; ncols];
            row[col] = 1.0;
            a.push(row);
            b.push(width);
            kinds.push(RowKind::Le);
        }

        let mut c = vec![0.0; ncols];
        for (j, cj) in spec.cost.iter().enumerate() {
            for &(col, coef) in &var_map[j].1 {
                c[col] += sign * cj * coef;
            }
        }
        let q = quadratic.map(|qm| {
            let mut qs = vec![vec![0.0; ncols]; ncols];
            for (i, row) in qm.iter().enumerate() {
                for (j, &qij) in row.iter().enumerate() {
                    if qij == 0.0 {
                        continue;
                    }
                    // linear part picked up from the offset: (Q o)_i
                    for &(ci, ki) in &var_map[i].1 {
                        c[ci] += sign * ki * qij * offset[j];
                        for &(cj, kj) in &var_map[j].1 {
                            qs[ci][cj] += sign * ki * qij * kj;
                        }
                    }
                }
            }
            qs
        });

        StdForm {
            a,
            b,
            kinds,
            c,
            q,
            var_map,
        }
    }

    pub fn num_cols(&self) -> usize {
        self.c.len()
    }

    pub fn recover_primal(&self, x_std: &[f64]) -> Vec<f64> {
        self.var_map
            .iter()
            .map(|(o, cols)| o + cols.iter().map(|&(c, k)| k * x_std[c]).sum::<f64>())
            .collect()
    }
}
