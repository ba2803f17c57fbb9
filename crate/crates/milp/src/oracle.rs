//! Reference solvers used only to cross-check the production kernel.
//!
//! `dense_lp` is a textbook two-phase tableau simplex with Bland's rule and
//! shares no code with the sparse solver. `enumerate_milp` tries every binary
//! assignment and solves the remaining LP with `dense_lp`.

use crate::problem::{LpProblem, MilpProblem, Relation};

#[derive(Debug, Clone, PartialEq)]
pub enum DenseOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-9;

/// Solves `p` with a dense tableau. All lower bounds must be finite.
pub fn dense_lp(p: &LpProblem) -> DenseOutcome {
    let n = p.n_vars();
    let lo: Vec<f64> = p.bounds.iter().map(|b| b.0).collect();
    assert!(lo.iter().all(|v| v.is_finite()), "dense oracle needs finite lower bounds");

    // Rows in z = x − lo, z ≥ 0.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &p.constraints {
        let mut a = vec![0.0; n];
        for &(j, v) in &c.coeffs {
            a[j] += v;
        }
        let shift: f64 = a.iter().zip(&lo).map(|(x, y)| x * y).sum();
        rows.push((a, c.relation, c.rhs - shift));
    }
    for (j, &(l, u)) in p.bounds.iter().enumerate() {
        if u.is_finite() {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            rows.push((a, Relation::Le, u - l));
        }
    }
    for r in rows.iter_mut() {
        if r.2 < 0.0 {
            r.0.iter_mut().for_each(|v| *v = -*v);
            r.2 = -r.2;
            r.1 = match r.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let width = n + n_slack + n_art;
    // Tableau rows: m constraint rows, each `width` coefficients + rhs.
    let mut t = vec![vec![0.0; width + 1]; m];
    let mut basis = vec![0usize; m];
    let (mut s_col, mut a_col) = (n, n + n_slack);
    let art_start = n + n_slack;
    for (i, (a, rel, b)) in rows.iter().enumerate() {
        t[i][..n].copy_from_slice(a);
        t[i][width] = *b;
        match rel {
            Relation::Le => {
                t[i][s_col] = 1.0;
                basis[i] = s_col;
                s_col += 1;
            }
            Relation::Ge => {
                t[i][s_col] = -1.0;
                s_col += 1;
                t[i][a_col] = 1.0;
                basis[i] = a_col;
                a_col += 1;
            }
            Relation::Eq => {
                t[i][a_col] = 1.0;
                basis[i] = a_col;
                a_col += 1;
            }
        }
    }

    let run = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, cost: &[f64], allowed: usize| -> bool {
        loop {
            // reduced costs
            let mut entering = None;
            for j in 0..allowed {
                if basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j];
                for i in 0..m {
                    d -= cost[basis[i]] * t[i][j];
                }
                if d < -EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(q) = entering else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if t[i][q] > EPS {
                    let ratio = t[i][width] / t[i][q];
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 || ((ratio - lr).abs() <= 1e-12 && basis[i] < basis[li]) {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leave else { return false };
            let piv = t[r][q];
            t[r].iter_mut().for_each(|v| *v /= piv);
            let prow = t[r].clone();
            for (i, row) in t.iter_mut().enumerate() {
                if i != r && row[q] != 0.0 {
                    let f = row[q];
                    for (v, pv) in row.iter_mut().zip(&prow) {
                        *v -= f * pv;
                    }
                }
            }
            basis[r] = q;
        }
    };

    if n_art > 0 {
        let mut c1 = vec![0.0; width];
        c1[art_start..].iter_mut().for_each(|v| *v = 1.0);
        run(&mut t, &mut basis, &c1, width);
        let infeas: f64 = (0..m).filter(|&i| basis[i] >= art_start).map(|i| t[i][width]).sum();
        if infeas > 1e-7 {
            return DenseOutcome::Infeasible;
        }
        // Drive zero-valued artificials out of the basis where possible.
        for i in 0..m {
            if basis[i] >= art_start {
                if let Some(q) = (0..art_start).find(|&j| !basis.contains(&j) && t[i][j].abs() > 1e-9) {
                    let piv = t[i][q];
                    t[i].iter_mut().for_each(|v| *v /= piv);
                    let prow = t[i].clone();
                    for (k, row) in t.iter_mut().enumerate() {
                        if k != i && row[q] != 0.0 {
                            let f = row[q];
                            for (v, pv) in row.iter_mut().zip(&prow) {
                                *v -= f * pv;
                            }
                        }
                    }
                    basis[i] = q;
                }
            }
        }
    }
    let mut c2 = vec![0.0; width];
    c2[..n].copy_from_slice(&p.objective);
    if !run(&mut t, &mut basis, &c2, art_start) {
        return DenseOutcome::Unbounded;
    }
    let mut x = lo.clone();
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] += t[i][width];
        }
    }
    let objective = p.objective_value(&x);
    DenseOutcome::Optimal { x, objective }
}

/// Exhaustive search over binary assignments. Returns the best objective and
/// assignment, or `None` when no assignment is feasible.
pub fn enumerate_milp(p: &MilpProblem) -> Option<(f64, Vec<f64>)> {
    let bins: Vec<usize> = p.binaries.iter().copied().collect();
    assert!(bins.len() <= 20, "enumeration oracle is for small instances");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1u32 << bins.len()) {
        let mut lp = p.lp.clone();
        for (k, &j) in bins.iter().enumerate() {
            let v = f64::from((mask >> k) & 1);
            lp.bounds[j] = (v, v);
        }
        if let DenseOutcome::Optimal { x, objective } = dense_lp(&lp) {
            if best.as_ref().map_or(true, |(b, _)| objective < *b) {
                best = Some((objective, x));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_oracle_on_corner_problem() {
        let mut lp = LpProblem::new();
        let x = lp.add_var(0.0, 1.0, -1.0);
        let y = lp.add_var(0.0, 1.0, -1.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Le, 1.0);
        match dense_lp(&lp) {
            DenseOutcome::Optimal { objective, .. } => assert!((objective + 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn enumeration_on_pair() {
        let mut p = MilpProblem::new(LpProblem::new());
        let a = p.add_binary(-3.0);
        let b = p.add_binary(-2.0);
        p.lp.add_constraint(vec![(a, 1.0), (b, 1.0)], Relation::Le, 1.0);
        let (obj, x) = enumerate_milp(&p).unwrap();
        assert_eq!(obj, -3.0);
        assert_eq!(x, vec![1.0, 0.0]);
    }
}

/// SplitMix64, so instance generation needs no external RNG.
struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn int(&mut self, lo: i64, hi: i64) -> i64 {
        lo + (self.next() % (hi - lo + 1) as u64) as i64
    }
}

/// Random bounded MILP with `n_bins` binaries among `n_vars` variables.
///
/// Rows are built around a random point so most instances are feasible;
/// every variable is boxed so the relaxation is never unbounded.
pub fn random_milp(seed: u64, n_vars: usize, n_bins: usize, n_rows: usize) -> MilpProblem {
    assert!(n_bins <= n_vars);
    let mut rng = SplitMix(seed);
    let mut p = MilpProblem::new(LpProblem::new());
    let mut point = Vec::with_capacity(n_vars);
    for j in 0..n_vars {
        let cost = rng.int(-10, 10) as f64;
        if j < n_bins {
            p.add_binary(cost);
            point.push((rng.next() & 1) as f64);
        } else {
            let (lo, hi) = if rng.unit() < 0.3 { (-5.0, 5.0) } else { (0.0, 10.0) };
            p.lp.add_var(lo, hi, cost);
            point.push(lo + (hi - lo) * rng.unit());
        }
    }
    for _ in 0..n_rows {
        let mut coeffs = Vec::new();
        for j in 0..n_vars {
            if rng.unit() < 0.6 {
                let a = rng.int(-5, 5) as f64;
                if a != 0.0 {
                    coeffs.push((j, a));
                }
            }
        }
        if coeffs.is_empty() {
            coeffs.push((rng.int(0, n_vars as i64 - 1) as usize, 1.0));
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * point[j]).sum();
        let u = rng.unit();
        let (rel, rhs) = if u < 0.65 {
            (Relation::Le, (act + 5.0 * rng.unit()).round())
        } else if u < 0.9 {
            (Relation::Ge, (act - 5.0 * rng.unit()).round())
        } else {
            (Relation::Eq, act)
        };
        p.lp.add_constraint(coeffs, rel, rhs);
    }
    p
}
