//! Bounded-variable primal simplex on a sparse LU-factorized basis.
//!
//! Every row `a·x (rel) b` gets a logical variable `s` with `a·x − s = 0` and
//! bounds derived from the relation, so the solver only ever sees equality
//! rows and box-bounded variables. Phase 1 minimizes the sum of bound
//! infeasibilities of the basic variables (composite method), so a warm start
//! from any basis works, including one whose values violate tightened bounds.
//!
//! When the starting basis is dual feasible (always the case after a bound
//! change in branch-and-bound) a dual simplex with steepest-edge pricing runs
//! first; the primal loop then only confirms optimality.

use std::time::Instant;

use crate::error::ProblemError;
use crate::lu::{ColRef, LuFactors};
use crate::problem::{LpProblem, Relation};

/// Tuning knobs for [`solve_lp_with`].
#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Primal feasibility tolerance on bounds and rows.
    pub feas_tol: f64,
    /// Reduced-cost threshold for an improving column.
    pub opt_tol: f64,
    /// Smallest usable pivot element.
    pub pivot_tol: f64,
    pub max_iterations: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    /// Number of eta updates between refactorizations.
    pub refactor_every: usize,
    pub deadline: Option<Instant>,
    /// Try the dual simplex first when the start basis is dual feasible.
    pub dual: bool,
    /// Stop with [`LpStatus::Cutoff`] once the dual simplex proves the
    /// objective exceeds this value.
    pub objective_cutoff: Option<f64>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            opt_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: 5_000_000,
            bland_after: 1000,
            refactor_every: 100,
            deadline: None,
            dual: true,
            objective_cutoff: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    IterationLimit,
    /// The objective provably exceeds [`SimplexOptions::objective_cutoff`].
    Cutoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// Basis statuses of structural variables followed by the row logicals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values (meaningful when `Optimal`).
    pub x: Vec<f64>,
    /// Optimal objective; for an iteration limit hit inside the dual simplex,
    /// the dual objective reached so far (a lower bound). Infinite otherwise.
    pub objective: f64,
    /// Row duals `y` with reduced costs `d = c − Aᵀy`.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    pub basis: Option<Basis>,
}

/// A problem converted to the column-wise layout the simplex works on.
///
/// Building this once and calling [`PreparedLp::solve`] with different bounds
/// is how branch-and-bound re-solves nodes.
#[derive(Debug, Clone)]
pub struct PreparedLp {
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
    row_start: Vec<usize>,
    row_idx: Vec<usize>,
    row_val: Vec<f64>,
    cost: Vec<f64>,
    offset: f64,
    struct_lb: Vec<f64>,
    struct_ub: Vec<f64>,
    row_lb: Vec<f64>,
    row_ub: Vec<f64>,
    logical_rows: Vec<usize>,
}

const NEG_ONE: [f64; 1] = [-1.0];
const NO_POS: usize = usize::MAX;
const DUAL_TOL: f64 = 1e-7;
const DUAL_PIVOT_TOL: f64 = 1e-9;

impl PreparedLp {
    pub fn new(p: &LpProblem) -> Result<Self, ProblemError> {
        p.validate()?;
        let n = p.n_vars();
        let m = p.n_constraints();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in p.constraints.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                cols[j].push((i, a));
            }
        }
        let mut col_start = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut col_val = Vec::new();
        col_start.push(0);
        for mut c in cols {
            c.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < c.len() {
                let r = c[k].0;
                let mut v = 0.0;
                while k < c.len() && c[k].0 == r {
                    v += c[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    col_idx.push(r);
                    col_val.push(v);
                }
            }
            col_start.push(col_idx.len());
        }
        let mut row_start = vec![0usize; m + 1];
        for &r in &col_idx {
            row_start[r + 1] += 1;
        }
        for i in 0..m {
            row_start[i + 1] += row_start[i];
        }
        let mut fill = row_start.clone();
        let mut row_idx = vec![0usize; col_idx.len()];
        let mut row_val = vec![0.0; col_idx.len()];
        for j in 0..n {
            for e in col_start[j]..col_start[j + 1] {
                let r = col_idx[e];
                row_idx[fill[r]] = j;
                row_val[fill[r]] = col_val[e];
                fill[r] += 1;
            }
        }
        let mut row_lb = Vec::with_capacity(m);
        let mut row_ub = Vec::with_capacity(m);
        for row in &p.constraints {
            let (lo, hi) = match row.relation {
                Relation::Le => (f64::NEG_INFINITY, row.rhs),
                Relation::Ge => (row.rhs, f64::INFINITY),
                Relation::Eq => (row.rhs, row.rhs),
            };
            row_lb.push(lo);
            row_ub.push(hi);
        }
        Ok(Self {
            n,
            m,
            col_start,
            col_idx,
            col_val,
            row_start,
            row_idx,
            row_val,
            cost: p.objective.clone(),
            offset: p.objective_offset,
            struct_lb: p.bounds.iter().map(|b| b.0).collect(),
            struct_ub: p.bounds.iter().map(|b| b.1).collect(),
            row_lb,
            row_ub,
            logical_rows: (0..m).collect(),
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.struct_lb
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.struct_ub
    }

    /// Solves with the stored bounds.
    pub fn solve_default(&self, warm: Option<&Basis>, opts: &SimplexOptions) -> LpSolution {
        self.solve(&self.struct_lb, &self.struct_ub, warm, opts)
    }

    /// Solves with structural bounds `lb`/`ub` replacing the stored ones.
    pub fn solve(&self, lb: &[f64], ub: &[f64], warm: Option<&Basis>, opts: &SimplexOptions) -> LpSolution {
        assert_eq!(lb.len(), self.n);
        assert_eq!(ub.len(), self.n);
        if lb.iter().zip(ub).any(|(l, u)| l > u) {
            return LpSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::INFINITY,
                duals: Vec::new(),
                reduced_costs: Vec::new(),
                iterations: 0,
                basis: warm.cloned(),
            };
        }
        let mut engine = Engine::new(self, lb, ub, opts);
        engine.start(warm);
        let dual = if opts.dual {
            engine.in_dual = true;
            let d = engine.run_dual();
            if d != Some(LpStatus::IterationLimit) {
                engine.in_dual = false;
            }
            d
        } else {
            None
        };
        let status = match dual {
            Some(LpStatus::Optimal) | None => engine.run(),
            Some(s) => s,
        };
        engine.finish(status)
    }

    fn column(&self, j: usize) -> ColRef<'_> {
        if j < self.n {
            let (s, e) = (self.col_start[j], self.col_start[j + 1]);
            ColRef { idx: &self.col_idx[s..e], val: &self.col_val[s..e] }
        } else {
            let i = j - self.n;
            ColRef { idx: &self.logical_rows[i..i + 1], val: &NEG_ONE }
        }
    }
}

/// Solves `p` from a slack basis with default options.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, ProblemError> {
    solve_lp_with(p, &SimplexOptions::default(), None)
}

pub fn solve_lp_with(p: &LpProblem, opts: &SimplexOptions, warm: Option<&Basis>) -> Result<LpSolution, ProblemError> {
    Ok(PreparedLp::new(p)?.solve_default(warm, opts))
}

struct Engine<'a> {
    lp: &'a PreparedLp,
    opts: &'a SimplexOptions,
    n: usize,
    m: usize,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    basis: Vec<usize>,
    pos_of: Vec<usize>,
    lu: LuFactors,
    iterations: usize,
    // scratch
    row_work: Vec<f64>,
    pos_work: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
    alpha: Vec<f64>,
    cb: Vec<f64>,
    rejected: Vec<bool>,
    rho: Vec<f64>,
    arow: Vec<f64>,
    tau: Vec<f64>,
    dse: Vec<f64>,
    in_dual: bool,
}

enum Step {
    Pivot { pos: usize, theta: f64, to_upper: bool },
    Flip { theta: f64 },
    Unbounded,
}

impl<'a> Engine<'a> {
    fn new(lp: &'a PreparedLp, slb: &[f64], sub: &[f64], opts: &'a SimplexOptions) -> Self {
        let (n, m) = (lp.n, lp.m);
        let mut lb = Vec::with_capacity(n + m);
        let mut ub = Vec::with_capacity(n + m);
        lb.extend_from_slice(slb);
        lb.extend_from_slice(&lp.row_lb);
        ub.extend_from_slice(sub);
        ub.extend_from_slice(&lp.row_ub);
        Self {
            lp,
            opts,
            n,
            m,
            lb,
            ub,
            x: vec![0.0; n + m],
            status: vec![VarStatus::AtLower; n + m],
            basis: Vec::with_capacity(m),
            pos_of: vec![NO_POS; n + m],
            lu: LuFactors::default(),
            iterations: 0,
            row_work: vec![0.0; m],
            pos_work: vec![0.0; m],
            y: vec![0.0; m],
            d: vec![0.0; n + m],
            alpha: vec![0.0; m],
            cb: vec![0.0; m],
            rejected: vec![false; n + m],
            rho: vec![0.0; m],
            arow: vec![0.0; n + m],
            tau: vec![0.0; m],
            dse: vec![1.0; m],
            in_dual: false,
        }
    }

    fn nonbasic_status(&self, j: usize, prefer_upper: bool) -> VarStatus {
        let (l, u) = (self.lb[j], self.ub[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if prefer_upper && l != u {
                    VarStatus::AtUpper
                } else {
                    VarStatus::AtLower
                }
            }
            (true, false) => VarStatus::AtLower,
            (false, true) => VarStatus::AtUpper,
            (false, false) => VarStatus::Free,
        }
    }

    fn set_nonbasic(&mut self, j: usize, st: VarStatus) {
        self.status[j] = st;
        self.pos_of[j] = NO_POS;
        self.x[j] = match st {
            VarStatus::AtLower => self.lb[j],
            VarStatus::AtUpper => self.ub[j],
            VarStatus::Free => 0.0,
            VarStatus::Basic => unreachable!(),
        };
    }

    fn slack_basis(&mut self) {
        let (n, m) = (self.n, self.m);
        self.basis.clear();
        for j in 0..n {
            let st = self.nonbasic_status(j, false);
            self.set_nonbasic(j, st);
        }
        for i in 0..m {
            self.status[n + i] = VarStatus::Basic;
            self.pos_of[n + i] = i;
            self.basis.push(n + i);
        }
    }

    fn start(&mut self, warm: Option<&Basis>) {
        let total = self.n + self.m;
        let usable = warm.filter(|b| {
            b.status.len() == total && b.status.iter().filter(|s| **s == VarStatus::Basic).count() == self.m
        });
        match usable {
            None => self.slack_basis(),
            Some(b) => {
                self.basis.clear();
                for j in 0..total {
                    match b.status[j] {
                        VarStatus::Basic => {
                            self.status[j] = VarStatus::Basic;
                            self.pos_of[j] = self.basis.len();
                            self.basis.push(j);
                        }
                        s => {
                            let st = self.nonbasic_status(j, s == VarStatus::AtUpper);
                            self.set_nonbasic(j, st);
                        }
                    }
                }
            }
        }
        if !self.refactor() {
            self.slack_basis();
            let ok = self.refactor();
            debug_assert!(ok);
        }
        self.compute_basic_values();
    }

    /// Refactorizes; returns false if the basis could not be repaired.
    fn refactor(&mut self) -> bool {
        let lp = self.lp;
        let basis = &self.basis;
        let (lu, repairs) = LuFactors::factorize(self.m, |p| lp.column(basis[p]));
        self.lu = lu;
        for (pos, row) in repairs.replaced {
            let logical = self.n + row;
            if self.status[logical] == VarStatus::Basic {
                return false;
            }
            let old = self.basis[pos];
            let v = self.x[old];
            let prefer_upper = self.ub[old].is_finite() && (self.ub[old] - v).abs() < (v - self.lb[old]).abs();
            let st = self.nonbasic_status(old, prefer_upper);
            self.set_nonbasic(old, st);
            self.basis[pos] = logical;
            self.status[logical] = VarStatus::Basic;
            self.pos_of[logical] = pos;
        }
        true
    }

    fn compute_basic_values(&mut self) {
        let n = self.n;
        self.row_work.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n + self.m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            if j < n {
                let c = self.lp.column(j);
                for (&r, &a) in c.idx.iter().zip(c.val) {
                    self.row_work[r] -= a * xj;
                }
            } else {
                self.row_work[j - n] += xj;
            }
        }
        self.lu.ftran(&mut self.row_work, &mut self.pos_work);
        for p in 0..self.m {
            self.x[self.basis[p]] = self.pos_work[p];
        }
    }

    /// Fills `cb` with the phase cost of each basic variable; returns whether
    /// phase 1 is active.
    fn phase_costs(&mut self) -> bool {
        let tol = self.opts.feas_tol;
        let mut infeasible = false;
        for p in 0..self.m {
            let b = self.basis[p];
            let v = self.x[b];
            self.cb[p] = if v < self.lb[b] - tol {
                infeasible = true;
                -1.0
            } else if v > self.ub[b] + tol {
                infeasible = true;
                1.0
            } else {
                0.0
            };
        }
        if !infeasible {
            for p in 0..self.m {
                let b = self.basis[p];
                self.cb[p] = if b < self.n { self.lp.cost[b] } else { 0.0 };
            }
        }
        infeasible
    }

    fn compute_duals(&mut self) {
        self.pos_work.copy_from_slice(&self.cb);
        self.lu.btran(&mut self.pos_work, &mut self.y);
    }

    fn reduced_cost(&self, j: usize, phase1: bool) -> f64 {
        if j < self.n {
            let c = self.lp.column(j);
            let mut dj = if phase1 { 0.0 } else { self.lp.cost[j] };
            for (&r, &a) in c.idx.iter().zip(c.val) {
                dj -= self.y[r] * a;
            }
            dj
        } else {
            self.y[j - self.n]
        }
    }

    /// Picks an entering variable and its direction (+1 increase, −1 decrease).
    fn price(&mut self, phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.opt_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let st = self.status[j];
            if st == VarStatus::Basic || self.rejected[j] || self.lb[j] == self.ub[j] {
                continue;
            }
            let dj = self.reduced_cost(j, phase1);
            self.d[j] = dj;
            let dir = match st {
                VarStatus::AtLower if dj < -tol => 1.0,
                VarStatus::AtUpper if dj > tol => -1.0,
                VarStatus::Free if dj.abs() > tol => -dj.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = dj.abs();
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    fn ratio_test(&self, q: usize, dir: f64, phase1: bool, bland: bool) -> Step {
        let ftol = self.opts.feas_tol;
        let ptol = self.opts.pivot_tol;
        // (position, distance to limiting bound, |rate|, hits upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for p in 0..self.m {
            let a = self.alpha[p];
            if a.abs() <= ptol {
                continue;
            }
            let rate = -dir * a;
            let b = self.basis[p];
            let v = self.x[b];
            let (l, u) = (self.lb[b], self.ub[b]);
            if rate > 0.0 {
                if phase1 && v < l - ftol {
                    cands.push((p, l - v, rate, false));
                } else if v > u + ftol {
                    continue;
                } else if u.is_finite() {
                    cands.push((p, (u - v).max(0.0), rate, true));
                }
            } else if phase1 && v > u + ftol {
                cands.push((p, v - u, -rate, true));
            } else if v < l - ftol {
                continue;
            } else if l.is_finite() {
                cands.push((p, (v - l).max(0.0), -rate, false));
            }
        }
        let flip_range = self.ub[q] - self.lb[q];

        let chosen = if cands.is_empty() {
            None
        } else if bland {
            let mut best: Option<(usize, f64, bool)> = None;
            for &(p, dist, rate, up) in &cands {
                let t = dist / rate;
                match best {
                    None => best = Some((p, t, up)),
                    Some((bp, bt, _)) => {
                        if t < bt || (t == bt && self.basis[p] < self.basis[bp]) {
                            best = Some((p, t, up));
                        }
                    }
                }
            }
            best
        } else {
            let theta_max = cands.iter().map(|&(_, dist, rate, _)| (dist + ftol) / rate).fold(f64::INFINITY, f64::min);
            let mut best: Option<(usize, f64, bool)> = None;
            let mut best_pivot = 0.0;
            for &(p, dist, rate, up) in &cands {
                let t = dist / rate;
                if t <= theta_max && self.alpha[p].abs() > best_pivot {
                    best_pivot = self.alpha[p].abs();
                    best = Some((p, t, up));
                }
            }
            best
        };

        match chosen {
            Some((p, t, up)) => {
                if flip_range.is_finite() && flip_range <= t {
                    Step::Flip { theta: flip_range }
                } else {
                    Step::Pivot { pos: p, theta: t.max(0.0), to_upper: up }
                }
            }
            None if flip_range.is_finite() => Step::Flip { theta: flip_range },
            None => Step::Unbounded,
        }
    }

    fn load_column(&mut self, q: usize) {
        self.row_work.iter_mut().for_each(|v| *v = 0.0);
        let c = self.lp.column(q);
        for (&r, &a) in c.idx.iter().zip(c.val) {
            self.row_work[r] = a;
        }
        self.lu.ftran(&mut self.row_work, &mut self.alpha);
    }

    fn deadline_passed(&self) -> bool {
        matches!(self.opts.deadline, Some(d) if Instant::now() >= d)
    }

    fn run(&mut self) -> LpStatus {
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut verified = false;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return LpStatus::IterationLimit;
            }
            if self.iterations % 32 == 0 && self.deadline_passed() {
                return LpStatus::TimeLimit;
            }
            if self.lu.num_etas() >= self.opts.refactor_every
                || self.lu.eta_nnz() > self.lu.factor_nnz() + self.m
            {
                if !self.refactor() {
                    self.slack_basis();
                    self.refactor();
                }
                self.compute_basic_values();
            }

            let phase1 = self.phase_costs();
            self.compute_duals();
            let entering = self.price(phase1, bland);
            let Some((q, dir)) = entering else {
                if self.rejected.iter().any(|&r| r) {
                    self.rejected.iter_mut().for_each(|r| *r = false);
                    if !verified {
                        verified = true;
                        self.refactor();
                        self.compute_basic_values();
                        continue;
                    }
                }
                if !verified {
                    // Confirm on a fresh factorization before concluding.
                    verified = true;
                    if !self.refactor() {
                        self.slack_basis();
                        self.refactor();
                    }
                    self.compute_basic_values();
                    continue;
                }
                return if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            };

            self.load_column(q);
            let step = self.ratio_test(q, dir, phase1, bland);
            self.iterations += 1;
            let theta = match step {
                Step::Unbounded => {
                    if phase1 {
                        self.rejected[q] = true;
                        continue;
                    }
                    return LpStatus::Unbounded;
                }
                Step::Flip { theta } => theta,
                Step::Pivot { pos, theta, .. } => {
                    let big = self.alpha.iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
                    if self.alpha[pos].abs() < 1e-9 * big.max(1.0) {
                        // Unstable pivot: refactorize and try another column.
                        self.rejected[q] = true;
                        self.refactor();
                        self.compute_basic_values();
                        continue;
                    }
                    theta
                }
            };
            verified = false;
            if theta > 0.0 {
                for p in 0..self.m {
                    let a = self.alpha[p];
                    if a != 0.0 {
                        self.x[self.basis[p]] -= dir * theta * a;
                    }
                }
                self.x[q] += dir * theta;
            }
            match step {
                Step::Flip { .. } => {
                    let st = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                    self.set_nonbasic(q, st);
                }
                Step::Pivot { pos, to_upper, .. } => {
                    let leaving = self.basis[pos];
                    let st = if to_upper { VarStatus::AtUpper } else { VarStatus::AtLower };
                    // Exact bound for the leaving variable.
                    self.status[leaving] = st;
                    self.pos_of[leaving] = NO_POS;
                    self.x[leaving] = if to_upper { self.ub[leaving] } else { self.lb[leaving] };
                    self.status[q] = VarStatus::Basic;
                    self.pos_of[q] = pos;
                    self.basis[pos] = q;
                    self.lu.push_eta(pos, &self.alpha);
                }
                Step::Unbounded => unreachable!(),
            }
            self.rejected.iter_mut().for_each(|r| *r = false);

            let col_scale = self.alpha.iter().fold(1.0f64, |acc, a| acc.max(a.abs()));
            if theta * col_scale <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > self.opts.bland_after {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }

    /// Recomputes duals and reduced costs for the true costs, moves boxed
    /// nonbasics to the bound their reduced cost prefers and recomputes the
    /// basic values. False if a nonbasic is dual infeasible and cannot flip.
    fn dual_reset(&mut self) -> bool {
        for p in 0..self.m {
            let b = self.basis[p];
            self.cb[p] = if b < self.n { self.lp.cost[b] } else { 0.0 };
        }
        self.compute_duals();
        for j in 0..self.n + self.m {
            let st = self.status[j];
            if st == VarStatus::Basic {
                continue;
            }
            let dj = self.reduced_cost(j, false);
            self.d[j] = dj;
            if self.lb[j] == self.ub[j] {
                continue;
            }
            match st {
                VarStatus::AtLower if dj < -DUAL_TOL => {
                    if !self.ub[j].is_finite() {
                        return false;
                    }
                    self.set_nonbasic(j, VarStatus::AtUpper);
                }
                VarStatus::AtUpper if dj > DUAL_TOL => {
                    if !self.lb[j].is_finite() {
                        return false;
                    }
                    self.set_nonbasic(j, VarStatus::AtLower);
                }
                VarStatus::Free if dj.abs() > DUAL_TOL => return false,
                _ => {}
            }
        }
        self.compute_basic_values();
        true
    }

    fn objective_value(&self) -> f64 {
        self.lp.offset + self.x[..self.n].iter().zip(&self.lp.cost).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Fills `arow` with row `r` of `B⁻¹·[A −I]` for the nonbasic columns,
    /// using `rho = B⁻ᵀ e_r`.
    fn pivot_row(&mut self, r: usize) {
        let (n, m) = (self.n, self.m);
        self.pos_work.iter_mut().for_each(|v| *v = 0.0);
        self.pos_work[r] = 1.0;
        self.lu.btran(&mut self.pos_work, &mut self.rho);
        self.arow[..n].iter_mut().for_each(|v| *v = 0.0);
        let lp = self.lp;
        for i in 0..m {
            let ri = self.rho[i];
            if ri == 0.0 {
                continue;
            }
            for e in lp.row_start[i]..lp.row_start[i + 1] {
                self.arow[lp.row_idx[e]] += ri * lp.row_val[e];
            }
            self.arow[n + i] = -ri;
        }
        for i in 0..m {
            if self.rho[i] == 0.0 {
                self.arow[n + i] = 0.0;
            }
        }
    }

    /// Dual simplex from the current basis. `None` means the start basis was
    /// not dual feasible or the iteration ran into numerical trouble; the
    /// primal loop then continues from wherever this stopped.
    fn run_dual(&mut self) -> Option<LpStatus> {
        let (n, m) = (self.n, self.m);
        let ftol = self.opts.feas_tol;
        if !self.dual_reset() {
            return None;
        }
        self.dse.iter_mut().for_each(|w| *w = 1.0);
        let mut verified = false;
        let mut trouble = 0;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Some(LpStatus::IterationLimit);
            }
            if self.iterations % 32 == 0 && self.deadline_passed() {
                return Some(LpStatus::TimeLimit);
            }
            if self.lu.num_etas() >= self.opts.refactor_every
                || self.lu.eta_nnz() > self.lu.factor_nnz() + self.m
            {
                if !self.refactor() || !self.dual_reset() {
                    return None;
                }
            }
            if let Some(cut) = self.opts.objective_cutoff {
                if self.iterations % 8 == 0 && self.objective_value() > cut {
                    return Some(LpStatus::Cutoff);
                }
            }

            let mut r = NO_POS;
            let mut best = 0.0;
            for p in 0..m {
                let b = self.basis[p];
                let v = self.x[b];
                let infeas = if v < self.lb[b] - ftol {
                    self.lb[b] - v
                } else if v > self.ub[b] + ftol {
                    v - self.ub[b]
                } else {
                    continue;
                };
                let score = infeas * infeas / self.dse[p];
                if score > best {
                    best = score;
                    r = p;
                }
            }
            if r == NO_POS {
                return Some(LpStatus::Optimal);
            }
            let leaving = self.basis[r];
            let to_upper = self.x[leaving] > self.ub[leaving];
            let sgn = if to_upper { 1.0 } else { -1.0 };
            self.pivot_row(r);

            // Harris two-pass ratio test on |d_j / arow_j|.
            let mut theta_max = f64::INFINITY;
            for j in 0..n + m {
                let a = self.arow[j];
                if a.abs() <= DUAL_PIVOT_TOL || !self.dual_eligible(j, sgn * a) {
                    continue;
                }
                theta_max = theta_max.min((self.d[j].abs() + DUAL_TOL) / a.abs());
            }
            if theta_max == f64::INFINITY {
                if verified {
                    return Some(LpStatus::Infeasible);
                }
                verified = true;
                if !self.refactor() || !self.dual_reset() {
                    return None;
                }
                continue;
            }
            let mut q = NO_POS;
            let mut best_pivot = 0.0;
            for j in 0..n + m {
                let a = self.arow[j];
                if a.abs() <= DUAL_PIVOT_TOL || !self.dual_eligible(j, sgn * a) {
                    continue;
                }
                if self.d[j].abs() / a.abs() <= theta_max && a.abs() > best_pivot {
                    best_pivot = a.abs();
                    q = j;
                }
            }

            self.load_column(q);
            let piv = self.alpha[r];
            if (piv - self.arow[q]).abs() > 1e-7 * (1.0 + piv.abs()) || piv.abs() <= DUAL_PIVOT_TOL {
                trouble += 1;
                if trouble > 5 || !self.refactor() || !self.dual_reset() {
                    return None;
                }
                continue;
            }
            verified = false;
            self.iterations += 1;

            // Steepest-edge weights need τ = B⁻¹ρ from the old basis.
            self.row_work.copy_from_slice(&self.rho);
            self.lu.ftran(&mut self.row_work, &mut self.tau);

            let bound = if to_upper { self.ub[leaving] } else { self.lb[leaving] };
            let delta = (self.x[leaving] - bound) / piv;
            if delta != 0.0 {
                for p in 0..m {
                    let a = self.alpha[p];
                    if a != 0.0 {
                        self.x[self.basis[p]] -= delta * a;
                    }
                }
                self.x[q] += delta;
            }
            self.x[leaving] = bound;

            let t = self.d[q] / self.arow[q];
            if t != 0.0 {
                for j in 0..n + m {
                    if self.status[j] != VarStatus::Basic && self.arow[j] != 0.0 {
                        self.d[j] -= t * self.arow[j];
                    }
                }
            }
            self.d[leaving] = -t;
            self.d[q] = 0.0;

            let wr = self.dse[r];
            for p in 0..m {
                if p == r {
                    continue;
                }
                let ratio = self.alpha[p] / piv;
                if ratio != 0.0 {
                    let w = self.dse[p] - 2.0 * ratio * self.tau[p] + ratio * ratio * wr;
                    self.dse[p] = w.max(ratio * ratio * wr).max(1e-6);
                }
            }
            self.dse[r] = (wr / (piv * piv)).max(1e-6);

            self.status[leaving] = if to_upper { VarStatus::AtUpper } else { VarStatus::AtLower };
            self.pos_of[leaving] = NO_POS;
            self.status[q] = VarStatus::Basic;
            self.pos_of[q] = r;
            self.basis[r] = q;
            self.lu.push_eta(r, &self.alpha);
        }
    }

    /// Whether nonbasic `j` may enter when its pivot-row entry, signed towards
    /// the leaving variable's violated bound, is `signed`.
    fn dual_eligible(&self, j: usize, signed: f64) -> bool {
        if self.lb[j] == self.ub[j] {
            return false;
        }
        match self.status[j] {
            VarStatus::Basic => false,
            VarStatus::AtLower => signed > 0.0,
            VarStatus::AtUpper => signed < 0.0,
            VarStatus::Free => true,
        }
    }

    fn finish(mut self, status: LpStatus) -> LpSolution {
        let n = self.n;
        let basis = Some(Basis { status: self.status.clone() });
        if status != LpStatus::Optimal {
            let objective = match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                LpStatus::IterationLimit if self.in_dual => self.objective_value(),
                _ => f64::INFINITY,
            };
            return LpSolution {
                status,
                x: self.x[..n].to_vec(),
                objective,
                duals: Vec::new(),
                reduced_costs: Vec::new(),
                iterations: self.iterations,
                basis,
            };
        }
        // Clean basic values and duals from a fresh factorization.
        self.refactor();
        self.compute_basic_values();
        self.phase_costs();
        self.compute_duals();
        let reduced_costs = (0..n)
            .map(|j| if self.status[j] == VarStatus::Basic { 0.0 } else { self.reduced_cost(j, false) })
            .collect();
        let x: Vec<f64> = self.x[..n].to_vec();
        let objective = self.lp.offset + x.iter().zip(&self.lp.cost).map(|(a, b)| a * b).sum::<f64>();
        LpSolution {
            status,
            x,
            objective,
            duals: self.y.clone(),
            reduced_costs,
            iterations: self.iterations,
            basis: Some(Basis { status: self.status.clone() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn single_active_bound() {
        let mut lp = LpProblem::new();
        let x = lp.add_var(0.0, 10.0, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 3.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(close(s.x[0], 3.0));
        assert!(close(s.objective, 3.0));
    }

    #[test]
    fn simplex_corner() {
        let mut lp = LpProblem::new();
        let x = lp.add_var(0.0, 1.0, -1.0);
        let y = lp.add_var(0.0, 1.0, -1.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Le, 1.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(close(s.objective, -1.0));
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LpProblem::new();
        let x = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 2.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 1.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LpProblem::new();
        let x = lp.add_var(0.0, f64::INFINITY, -1.0);
        let y = lp.add_var(0.0, f64::INFINITY, 0.0);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + 2y  s.t. x + y = 4, x − y >= −2, x,y free → x = 3? check: y = 4 − x, obj = x + 8 − 2x = 8 − x,
        // x − (4 − x) >= −2 → x >= 1; maximize x unbounded... add x <= 3 row.
        let mut lp = LpProblem::new();
        let x = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let y = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 2.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 4.0);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Relation::Ge, -2.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 3.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(close(s.x[0], 3.0) && close(s.x[1], 1.0), "{:?}", s.x);
        assert!(close(s.objective, 5.0));
    }

    #[test]
    fn malformed_problem_is_rejected() {
        let mut lp = LpProblem::new();
        lp.add_var(0.0, 1.0, 1.0);
        lp.add_constraint(vec![(5, 1.0)], Relation::Le, 1.0);
        assert!(solve_lp(&lp).is_err());
    }

    #[test]
    fn warm_start_after_bound_change() {
        let mut lp = LpProblem::new();
        let a = lp.add_var(0.0, 1.0, -3.0);
        let b = lp.add_var(0.0, 1.0, -2.0);
        lp.add_constraint(vec![(a, 1.0), (b, 1.0)], Relation::Le, 1.5);
        let prep = PreparedLp::new(&lp).unwrap();
        let opts = SimplexOptions::default();
        let root = prep.solve_default(None, &opts);
        assert!(close(root.objective, -4.0));
        let lb = vec![0.0, 0.0];
        let ub = vec![1.0, 0.0];
        let child = prep.solve(&lb, &ub, root.basis.as_ref(), &opts);
        assert_eq!(child.status, LpStatus::Optimal);
        assert!(close(child.objective, -3.0));
    }
}
