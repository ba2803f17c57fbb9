//! Sparse LU factorization of simplex bases with product-form updates.
//!
//! The basis is factorized column by column (left-looking, Gilbert-Peierls)
//! with threshold partial pivoting. Columns are processed shortest first so
//! that logical (identity) columns are absorbed without any work. Pivots that
//! happen after the factorization are kept as an eta file and replayed in
//! FTRAN/BTRAN until the next refactorization.

const NOT_PIVOTED: usize = usize::MAX;
const SINGULAR_TOL: f64 = 1e-11;
const THRESHOLD: f64 = 0.1;
const DROP_TOL: f64 = 1e-14;

/// Column-compressed sparse column, used to hand basis columns to the factorization.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ColRef<'a> {
    pub idx: &'a [usize],
    pub val: &'a [f64],
}

#[derive(Debug, Default, Clone)]
pub(crate) struct LuFactors {
    m: usize,
    /// Pivot k sits in row `prow[k]` and basis position `pcol[k]`.
    prow: Vec<usize>,
    pcol: Vec<usize>,
    row_to_pivot: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    /// Off-diagonal U entries of pivot column k, as (earlier pivot index, value).
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
    eta_pos: Vec<usize>,
    eta_piv: Vec<f64>,
    eta_start: Vec<usize>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
}

/// Outcome of a factorization: positions whose column had to be replaced by a
/// logical because the basis was (numerically) singular.
#[derive(Debug, Default)]
pub(crate) struct Repairs {
    /// (basis position, row whose logical now occupies it)
    pub replaced: Vec<(usize, usize)>,
}

impl LuFactors {
    pub fn num_etas(&self) -> usize {
        self.eta_pos.len()
    }

    pub fn eta_nnz(&self) -> usize {
        self.eta_idx.len()
    }

    pub fn factor_nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m
    }

    /// Factorizes the basis whose column at position `p` is `col(p)`.
    ///
    /// `row_counts` gives the number of basis nonzeros in each row and is
    /// used to break pivot ties towards sparse rows.
    pub fn factorize<'a, F>(m: usize, col: F) -> (Self, Repairs)
    where
        F: Fn(usize) -> ColRef<'a>,
    {
        let mut row_counts = vec![0usize; m];
        let mut lens = Vec::with_capacity(m);
        for p in 0..m {
            let c = col(p);
            for &r in c.idx {
                row_counts[r] += 1;
            }
            lens.push((c.idx.len(), p));
        }
        lens.sort_unstable();

        let mut f = LuFactors {
            m,
            prow: Vec::with_capacity(m),
            pcol: Vec::with_capacity(m),
            row_to_pivot: vec![NOT_PIVOTED; m],
            l_start: vec![0],
            u_start: vec![0],
            u_diag: Vec::with_capacity(m),
            eta_start: vec![0],
            ..Default::default()
        };

        let mut work = vec![0.0f64; m];
        let mut touched: Vec<usize> = Vec::new();
        let mut in_touched = vec![false; m];
        let mut reach: Vec<usize> = Vec::new();
        let mut visited = vec![false; m];
        let mut stack: Vec<usize> = Vec::new();
        let mut singular: Vec<usize> = Vec::new();

        for &(_, p) in &lens {
            let c = col(p);
            for (&r, &v) in c.idx.iter().zip(c.val) {
                if !in_touched[r] {
                    in_touched[r] = true;
                    touched.push(r);
                }
                work[r] += v;
            }
            // Pivots reachable from the column pattern; dependencies only run
            // from lower to higher pivot indices, so ascending order is topological.
            reach.clear();
            for &r in c.idx {
                let k = f.row_to_pivot[r];
                if k != NOT_PIVOTED && !visited[k] {
                    visited[k] = true;
                    stack.push(k);
                }
            }
            while let Some(k) = stack.pop() {
                reach.push(k);
                for e in f.l_start[k]..f.l_start[k + 1] {
                    let r = f.l_idx[e];
                    let k2 = f.row_to_pivot[r];
                    if k2 != NOT_PIVOTED && !visited[k2] {
                        visited[k2] = true;
                        stack.push(k2);
                    }
                }
            }
            reach.sort_unstable();

            let u_mark = f.u_idx.len();
            for &k in &reach {
                visited[k] = false;
                let t = work[f.prow[k]];
                if t.abs() <= DROP_TOL {
                    continue;
                }
                for e in f.l_start[k]..f.l_start[k + 1] {
                    let r = f.l_idx[e];
                    if !in_touched[r] {
                        in_touched[r] = true;
                        touched.push(r);
                    }
                    work[r] -= f.l_val[e] * t;
                }
                f.u_idx.push(k);
                f.u_val.push(t);
            }

            let mut max_abs = 0.0f64;
            for &r in &touched {
                if f.row_to_pivot[r] == NOT_PIVOTED {
                    max_abs = max_abs.max(work[r].abs());
                }
            }
            if max_abs < SINGULAR_TOL {
                f.u_idx.truncate(u_mark);
                f.u_val.truncate(u_mark);
                singular.push(p);
            } else {
                let mut best = NOT_PIVOTED;
                let mut best_key = (usize::MAX, 0.0f64);
                for &r in &touched {
                    if f.row_to_pivot[r] != NOT_PIVOTED {
                        continue;
                    }
                    let a = work[r].abs();
                    if a < THRESHOLD * max_abs {
                        continue;
                    }
                    let key = (row_counts[r], a);
                    if best == NOT_PIVOTED || key.0 < best_key.0 || (key.0 == best_key.0 && key.1 > best_key.1) {
                        best = r;
                        best_key = key;
                    }
                }
                let piv = work[best];
                let k = f.prow.len();
                for &r in &touched {
                    if r != best && f.row_to_pivot[r] == NOT_PIVOTED && work[r].abs() > DROP_TOL {
                        f.l_idx.push(r);
                        f.l_val.push(work[r] / piv);
                    }
                }
                f.l_start.push(f.l_idx.len());
                f.u_start.push(f.u_idx.len());
                f.u_diag.push(piv);
                f.prow.push(best);
                f.pcol.push(p);
                f.row_to_pivot[best] = k;
            }
            for &r in &touched {
                work[r] = 0.0;
                in_touched[r] = false;
            }
            touched.clear();
        }

        // Replace singular columns by logicals of the rows left without a pivot.
        let mut repairs = Repairs::default();
        if !singular.is_empty() {
            let free_rows: Vec<usize> = (0..m).filter(|&r| f.row_to_pivot[r] == NOT_PIVOTED).collect();
            debug_assert_eq!(free_rows.len(), singular.len());
            for (&p, &r) in singular.iter().zip(&free_rows) {
                let k = f.prow.len();
                f.l_start.push(f.l_idx.len());
                f.u_start.push(f.u_idx.len());
                f.u_diag.push(-1.0);
                f.prow.push(r);
                f.pcol.push(p);
                f.row_to_pivot[r] = k;
                repairs.replaced.push((p, r));
            }
        }
        (f, repairs)
    }

    /// Solves `B x = rhs`. `rhs` is indexed by row and is destroyed; the
    /// result is written to `out`, indexed by basis position.
    pub fn ftran(&self, rhs: &mut [f64], out: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let t = rhs[self.prow[k]];
            if t != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    rhs[self.l_idx[e]] -= self.l_val[e] * t;
                }
            }
        }
        for k in (0..m).rev() {
            let y = rhs[self.prow[k]];
            let z = if y != 0.0 { y / self.u_diag[k] } else { 0.0 };
            if z != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    rhs[self.prow[self.u_idx[e]]] -= self.u_val[e] * z;
                }
            }
            out[self.pcol[k]] = z;
        }
        for e in 0..self.eta_pos.len() {
            let r = self.eta_pos[e];
            let xr = out[r];
            if xr == 0.0 {
                continue;
            }
            let xr = xr / self.eta_piv[e];
            out[r] = xr;
            for q in self.eta_start[e]..self.eta_start[e + 1] {
                out[self.eta_idx[q]] -= self.eta_val[q] * xr;
            }
        }
    }

    /// Solves `Bᵀ y = d`. `d` is indexed by basis position and is destroyed;
    /// the result is written to `out`, indexed by row.
    pub fn btran(&self, d: &mut [f64], out: &mut [f64]) {
        for e in (0..self.eta_pos.len()).rev() {
            let r = self.eta_pos[e];
            let mut s = d[r];
            for q in self.eta_start[e]..self.eta_start[e + 1] {
                s -= self.eta_val[q] * d[self.eta_idx[q]];
            }
            d[r] = s / self.eta_piv[e];
        }
        let m = self.m;
        // w is stored in `d` at position pcol[k].
        for k in 0..m {
            let mut s = d[self.pcol[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[e] * d[self.pcol[self.u_idx[e]]];
            }
            d[self.pcol[k]] = s / self.u_diag[k];
        }
        for k in (0..m).rev() {
            let mut s = d[self.pcol[k]];
            for e in self.l_start[k]..self.l_start[k + 1] {
                s -= self.l_val[e] * out[self.l_idx[e]];
            }
            out[self.prow[k]] = s;
        }
    }

    /// Records that the column at position `r` was replaced by a column whose
    /// FTRAN image (w.r.t. the old basis) is `alpha`.
    pub fn push_eta(&mut self, r: usize, alpha: &[f64]) {
        self.eta_pos.push(r);
        self.eta_piv.push(alpha[r]);
        for (i, &a) in alpha.iter().enumerate() {
            if i != r && a.abs() > DROP_TOL {
                self.eta_idx.push(i);
                self.eta_val.push(a);
            }
        }
        self.eta_start.push(self.eta_idx.len());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(a: &[Vec<f64>]) -> Vec<(Vec<usize>, Vec<f64>)> {
        let m = a.len();
        (0..m)
            .map(|c| {
                let mut idx = vec![];
                let mut val = vec![];
                for (r, row) in a.iter().enumerate() {
                    if row[c] != 0.0 {
                        idx.push(r);
                        val.push(row[c]);
                    }
                }
                (idx, val)
            })
            .collect()
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    fn mat_t_vec(a: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let m = a.len();
        (0..m).map(|c| (0..m).map(|r| a[r][c] * y[r]).sum()).collect()
    }

    #[test]
    fn solves_small_system_both_ways() {
        let a = vec![
            vec![2.0, 0.0, 1.0, 0.0],
            vec![0.0, -1.0, 0.0, 3.0],
            vec![4.0, 0.0, 0.0, 1.0],
            vec![0.0, 5.0, 1.0, 0.0],
        ];
        let cols = dense_cols(&a);
        let (lu, rep) = LuFactors::factorize(4, |p| ColRef { idx: &cols[p].0, val: &cols[p].1 });
        assert!(rep.replaced.is_empty());
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let mut b = matvec(&a, &x_true);
        let mut x = vec![0.0; 4];
        lu.ftran(&mut b, &mut x);
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-12);
        }
        let mut d = mat_t_vec(&a, &x_true);
        let mut y = vec![0.0; 4];
        lu.btran(&mut d, &mut y);
        for (u, v) in y.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_update_matches_refactorization() {
        let mut a = vec![
            vec![1.0, 2.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![3.0, 0.0, 4.0],
        ];
        let cols = dense_cols(&a);
        let (mut lu, _) = LuFactors::factorize(3, |p| ColRef { idx: &cols[p].0, val: &cols[p].1 });
        // Replace column 1 by (1, 1, 1).
        let newcol = [1.0, 1.0, 1.0];
        let mut rhs = newcol.to_vec();
        let mut alpha = vec![0.0; 3];
        lu.ftran(&mut rhs, &mut alpha);
        lu.push_eta(1, &alpha);
        for r in 0..3 {
            a[r][1] = newcol[r];
        }
        let x_true = [0.3, -1.0, 2.0];
        let mut b = matvec(&a, &x_true);
        let mut x = vec![0.0; 3];
        lu.ftran(&mut b, &mut x);
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-12, "{x:?}");
        }
        let mut d = mat_t_vec(&a, &x_true);
        let mut y = vec![0.0; 3];
        lu.btran(&mut d, &mut y);
        for (u, v) in y.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-12, "{y:?}");
        }
    }

    #[test]
    fn singular_column_is_replaced_by_logical() {
        let a = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        let cols = dense_cols(&a);
        let (_, rep) = LuFactors::factorize(2, |p| ColRef { idx: &cols[p].0, val: &cols[p].1 });
        assert_eq!(rep.replaced.len(), 1);
    }
}
