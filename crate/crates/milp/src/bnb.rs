//! Best-bound branch-and-bound over binary variables.
//!
//! Until the first incumbent exists the search plunges depth first, taking the
//! child on the rounding side of the branching variable; afterwards nodes are
//! taken strictly in order of their parent's LP bound (ties by creation
//! order). Every node re-solves its LP relaxation warm-started from the parent
//! basis. Branching uses pseudocosts initialized by strong branching
//! (reliability branching), or optionally the most fractional binary.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::error::ProblemError;
use crate::problem::{relax, MilpProblem};
use crate::simplex::{Basis, LpStatus, PreparedLp, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    /// Search finished with relative gap at most `gap_tol`.
    Optimal,
    /// Stopped early (time limit) with an incumbent.
    Feasible,
    Infeasible,
    Unbounded,
    /// Stopped at the time limit without any incumbent; `x` is empty.
    TimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching {
    /// Most fractional binary, lowest index on ties.
    MostFractional,
    /// Pseudocost product score; binaries with fewer than `RELIABLE`
    /// observations in either direction are scored by strong branching.
    Reliability,
}

const RELIABLE: u32 = 2;
const STRONG_ITERATIONS: usize = 40;
const STRONG_CANDIDATES: usize = 8;
/// Strong branching stops after this many candidates without a better score.
const STRONG_LOOKAHEAD: usize = 4;

#[derive(Debug, Clone)]
pub struct MilpOptions {
    pub time_limit: Duration,
    pub gap_tol: f64,
    pub int_tol: f64,
    pub lp: SimplexOptions,
    /// Known solution used as the starting incumbent if it is feasible.
    pub initial_solution: Option<Vec<f64>>,
    /// Starting basis for the root relaxation, e.g. from a related solve.
    pub root_basis: Option<Basis>,
    /// Run the rounding heuristic at the root and then every this many nodes
    /// (0 disables it).
    pub rounding_every: usize,
    pub branching: Branching,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            time_limit: Duration::from_secs(60),
            gap_tol: 1e-4,
            int_tol: 1e-6,
            lp: SimplexOptions::default(),
            initial_solution: None,
            root_basis: None,
            rounding_every: 50,
            branching: Branching::Reliability,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Best proven lower bound.
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub wall_time: f64,
    pub lp_iterations: usize,
    /// Objective of every new incumbent, in discovery order.
    pub incumbent_trace: Vec<f64>,
    /// Optimal basis of the root relaxation, when it was solved.
    pub root_basis: Option<Basis>,
}

impl MilpSolution {
    pub fn has_solution(&self) -> bool {
        matches!(self.status, MilpStatus::Optimal | MilpStatus::Feasible)
    }
}

pub fn solve_milp(p: &MilpProblem, time_limit: Duration, gap_tol: f64) -> Result<MilpSolution, ProblemError> {
    solve_milp_with(p, &MilpOptions { time_limit, gap_tol, ..MilpOptions::default() })
}

/// Persistent list of branching decisions from the root.
struct Fixing {
    var: usize,
    value: f64,
    parent: Option<Rc<Fixing>>,
}

struct Node {
    id: usize,
    bound: f64,
    fixings: Option<Rc<Fixing>>,
    basis: Option<Rc<Basis>>,
    /// Branching variable, direction, parent objective and distance moved,
    /// for the pseudocost update once this node's LP is solved.
    origin: Option<(usize, bool, f64, f64)>,
}

/// Per-unit objective gains observed when branching a variable down / up.
#[derive(Debug, Clone, Copy, Default)]
struct Pseudocost {
    sum: [f64; 2],
    count: [u32; 2],
}

impl Pseudocost {
    fn record(&mut self, up: bool, gain_per_unit: f64) {
        let k = up as usize;
        self.sum[k] += gain_per_unit.max(0.0);
        self.count[k] += 1;
    }

    fn estimate(&self, up: bool, fallback: f64) -> f64 {
        let k = up as usize;
        if self.count[k] == 0 {
            fallback
        } else {
            self.sum[k] / self.count[k] as f64
        }
    }

    fn reliable(&self) -> bool {
        self.count[0].min(self.count[1]) >= RELIABLE
    }
}

fn product_score(down: f64, up: f64) -> f64 {
    down.max(1e-6) * up.max(1e-6)
}

struct HeapEntry(Node);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // BinaryHeap is a max-heap: smallest bound, then smallest id, comes out first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.bound.total_cmp(&self.0.bound).then_with(|| other.0.id.cmp(&self.0.id))
    }
}

struct Search<'a> {
    p: &'a MilpProblem,
    opts: &'a MilpOptions,
    prep: PreparedLp,
    lp_opts: SimplexOptions,
    incumbent: Option<(Vec<f64>, f64)>,
    trace: Vec<f64>,
    /// Smallest bound among nodes discarded because of the incumbent cutoff.
    pruned_bound: f64,
    nodes: usize,
    lp_iterations: usize,
    next_id: usize,
    lb: Vec<f64>,
    ub: Vec<f64>,
    root_basis: Option<Basis>,
    pseudo: Vec<Pseudocost>,
}

enum NodeResult {
    Pruned,
    Integral,
    Branched(Node, Node, bool),
    Unbounded,
    Stopped,
}

impl<'a> Search<'a> {
    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((_, obj)) => obj - (self.opts.gap_tol * obj.abs()).max(1e-9),
            None => f64::INFINITY,
        }
    }

    fn load_bounds(&mut self, fixings: &Option<Rc<Fixing>>) {
        self.lb.copy_from_slice(self.prep.lower_bounds());
        self.ub.copy_from_slice(self.prep.upper_bounds());
        let mut cur = fixings.as_ref();
        while let Some(f) = cur {
            self.lb[f.var] = f.value;
            self.ub[f.var] = f.value;
            cur = f.parent.as_ref();
        }
    }

    fn most_fractional(&self, x: &[f64]) -> Option<usize> {
        let mut best = None;
        let mut best_frac = self.opts.int_tol;
        for &j in &self.p.binaries {
            let f = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
            if f > best_frac {
                best_frac = f;
                best = Some(j);
            }
        }
        best
    }

    fn offer(&mut self, x: Vec<f64>, obj: f64) {
        let better = match &self.incumbent {
            Some((_, best)) => obj < *best - 1e-12,
            None => true,
        };
        if better {
            self.trace.push(obj);
            self.incumbent = Some((x, obj));
        }
    }

    /// Re-solves with binaries fixed at their rounded values so the continuous
    /// part is consistent with exactly integral binaries.
    fn polish(&mut self, x: &[f64], basis: Option<&Basis>) -> Option<(Vec<f64>, f64)> {
        let mut lb = self.lb.clone();
        let mut ub = self.ub.clone();
        for &j in &self.p.binaries {
            let v = x[j].round();
            lb[j] = v;
            ub[j] = v;
        }
        let sol = self.prep.solve(&lb, &ub, basis, &self.lp_opts);
        self.lp_iterations += sol.iterations;
        if sol.status != LpStatus::Optimal {
            return None;
        }
        let mut xs = sol.x;
        for &j in &self.p.binaries {
            xs[j] = xs[j].round();
        }
        Some((xs, sol.objective))
    }

    /// Fixes every binary to a rounded value and solves the remaining LP, first
    /// rounding to nearest, then rounding fractional values up.
    fn rounding(&mut self, x: &[f64], basis: Option<&Basis>) {
        for up in [false, true] {
            let mut lb = self.lb.clone();
            let mut ub = self.ub.clone();
            for &j in &self.p.binaries {
                if lb[j] == ub[j] {
                    continue;
                }
                let frac = x[j] - x[j].floor() > self.opts.int_tol;
                let v = if up && frac { x[j].ceil() } else { x[j].round() };
                lb[j] = v;
                ub[j] = v;
            }
            let sol = self.prep.solve(&lb, &ub, basis, &self.lp_opts);
            self.lp_iterations += sol.iterations;
            if sol.status == LpStatus::Optimal && sol.objective < self.cutoff() {
                let mut xs = sol.x;
                for &j in &self.p.binaries {
                    xs[j] = xs[j].round();
                }
                self.offer(xs, sol.objective);
            }
        }
    }

    /// Fixes binaries whose reduced cost shows that moving them off their
    /// bound cannot beat the incumbent. The fixings extend `chain` and are
    /// applied to the current node bounds.
    fn reduced_cost_fixing(
        &mut self,
        x: &[f64],
        d: &[f64],
        obj: f64,
        mut chain: Option<Rc<Fixing>>,
    ) -> Option<Rc<Fixing>> {
        let allowed = self.cutoff() - obj;
        if !allowed.is_finite() {
            return chain;
        }
        let tol = self.opts.int_tol;
        for &j in &self.p.binaries {
            if self.lb[j] == self.ub[j] {
                continue;
            }
            let value = if x[j] <= tol && d[j] > allowed {
                0.0
            } else if x[j] >= 1.0 - tol && -d[j] > allowed {
                1.0
            } else {
                continue;
            };
            self.lb[j] = value;
            self.ub[j] = value;
            chain = Some(Rc::new(Fixing { var: j, value, parent: chain }));
        }
        chain
    }

    /// Child LP bound with `var` fixed to `value`, from an iteration-limited
    /// dual simplex run; infinite when the child is infeasible or cut off.
    fn strong_child(&mut self, var: usize, value: f64, obj: f64, basis: Option<&Basis>) -> f64 {
        let (old_lb, old_ub) = (self.lb[var], self.ub[var]);
        self.lb[var] = value;
        self.ub[var] = value;
        let mut opts = self.lp_opts.clone();
        opts.max_iterations = STRONG_ITERATIONS;
        let cutoff = self.cutoff();
        opts.objective_cutoff = cutoff.is_finite().then_some(cutoff);
        let sol = self.prep.solve(&self.lb, &self.ub, basis, &opts);
        self.lb[var] = old_lb;
        self.ub[var] = old_ub;
        self.lp_iterations += sol.iterations;
        match sol.status {
            LpStatus::Optimal => sol.objective,
            LpStatus::Infeasible | LpStatus::Cutoff => f64::INFINITY,
            LpStatus::IterationLimit if sol.objective.is_finite() => sol.objective.max(obj),
            _ => obj,
        }
    }

    /// Picks the branching binary by pseudocost score, strong branching on
    /// unreliable candidates. Returns the variable and the child bounds
    /// known so far (down, up).
    fn select_reliable(&mut self, x: &[f64], obj: f64, basis: Option<&Basis>) -> (usize, [f64; 2]) {
        let tol = self.opts.int_tol;
        let mut cands: Vec<(usize, f64)> = Vec::new();
        let (mut avg, mut seen) = ([0.0f64; 2], [0u32; 2]);
        for &j in &self.p.binaries {
            let pc = &self.pseudo[j];
            for k in 0..2 {
                if pc.count[k] > 0 {
                    avg[k] += pc.sum[k] / pc.count[k] as f64;
                    seen[k] += 1;
                }
            }
            let f = x[j] - x[j].floor();
            if f > tol && f < 1.0 - tol {
                cands.push((j, f));
            }
        }
        let avg = [0, 1].map(|k| if seen[k] > 0 { avg[k] / seen[k] as f64 } else { 1.0 });
        let estimate = |s: &Self, j: usize, f: f64| {
            let pc = &s.pseudo[j];
            product_score(f * pc.estimate(false, avg[0]), (1.0 - f) * pc.estimate(true, avg[1]))
        };
        // Unreliable candidates are strong branched, most fractional first.
        let mut order: Vec<(usize, f64)> = cands.clone();
        order.sort_by(|a, b| {
            let fa = a.1.min(1.0 - a.1);
            let fb = b.1.min(1.0 - b.1);
            fb.total_cmp(&fa).then(a.0.cmp(&b.0))
        });
        let mut best = (order[0].0, f64::NEG_INFINITY, [obj; 2]);
        for &(j, f) in &cands {
            if self.pseudo[j].reliable() {
                let sc = estimate(self, j, f);
                if sc > best.1 {
                    best = (j, sc, [obj; 2]);
                }
            }
        }
        let (mut tried, mut stale) = (0, 0);
        for &(j, f) in &order {
            if self.pseudo[j].reliable() {
                continue;
            }
            if tried >= STRONG_CANDIDATES || stale >= STRONG_LOOKAHEAD {
                let sc = estimate(self, j, f);
                if sc > best.1 {
                    best = (j, sc, [obj; 2]);
                }
                continue;
            }
            tried += 1;
            let down = self.strong_child(j, 0.0, obj, basis);
            let up = self.strong_child(j, 1.0, obj, basis);
            if down.is_finite() {
                self.pseudo[j].record(false, (down - obj) / f);
            }
            if up.is_finite() {
                self.pseudo[j].record(true, (up - obj) / (1.0 - f));
            }
            let gain = |b: f64, dist: f64| if b.is_finite() { b - obj } else { 1e12 * dist };
            let sc = product_score(gain(down, f), gain(up, 1.0 - f));
            if sc > best.1 {
                best = (j, sc, [down, up]);
                stale = 0;
            } else {
                stale += 1;
            }
            if !down.is_finite() || !up.is_finite() {
                break;
            }
        }
        (best.0, best.2)
    }

    fn process(&mut self, node: Node) -> NodeResult {
        if node.bound >= self.cutoff() {
            self.pruned_bound = self.pruned_bound.min(node.bound);
            return NodeResult::Pruned;
        }
        self.load_bounds(&node.fixings);
        let lb = std::mem::take(&mut self.lb);
        let ub = std::mem::take(&mut self.ub);
        let cutoff = self.cutoff();
        self.lp_opts.objective_cutoff = cutoff.is_finite().then_some(cutoff);
        let sol = self.prep.solve(&lb, &ub, node.basis.as_deref(), &self.lp_opts);
        self.lp_opts.objective_cutoff = None;
        self.lb = lb;
        self.ub = ub;
        self.nodes += 1;
        self.lp_iterations += sol.iterations;
        if let (Some((var, up, parent_obj, dist)), LpStatus::Optimal) = (node.origin, sol.status) {
            self.pseudo[var].record(up, (sol.objective - parent_obj) / dist);
        }
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return NodeResult::Pruned,
            LpStatus::Cutoff => {
                self.pruned_bound = self.pruned_bound.min(cutoff);
                return NodeResult::Pruned;
            }
            LpStatus::Unbounded => return NodeResult::Unbounded,
            LpStatus::TimeLimit | LpStatus::IterationLimit => return NodeResult::Stopped,
        }
        if sol.objective >= self.cutoff() {
            self.pruned_bound = self.pruned_bound.min(sol.objective);
            return NodeResult::Pruned;
        }
        if node.id == 0 {
            self.root_basis = sol.basis.clone();
        }
        let fixings = self.reduced_cost_fixing(&sol.x, &sol.reduced_costs, sol.objective, node.fixings);
        let basis = sol.basis.map(Rc::new);
        match self.most_fractional(&sol.x) {
            None => {
                let (x, obj) = self
                    .polish(&sol.x, basis.as_deref())
                    .unwrap_or_else(|| (sol.x.clone(), sol.objective));
                self.offer(x, obj);
                NodeResult::Integral
            }
            Some(j) => {
                let every = self.opts.rounding_every;
                if every > 0 && (self.nodes - 1) % every == 0 {
                    self.rounding(&sol.x, basis.as_deref());
                }
                let (j, bounds) = match self.opts.branching {
                    Branching::MostFractional => (j, [sol.objective; 2]),
                    Branching::Reliability => self.select_reliable(&sol.x, sol.objective, basis.as_deref()),
                };
                let xj = sol.x[j];
                let up_first = xj >= 0.5;
                let mut child = |value: f64| {
                    self.next_id += 1;
                    let dist = (value - xj).abs().max(1e-9);
                    Node {
                        id: self.next_id,
                        bound: bounds[value as usize].max(sol.objective),
                        fixings: Some(Rc::new(Fixing { var: j, value, parent: fixings.clone() })),
                        basis: basis.clone(),
                        origin: Some((j, value > 0.5, sol.objective, dist)),
                    }
                };
                let down = child(0.0);
                let up = child(1.0);
                NodeResult::Branched(down, up, up_first)
            }
        }
    }
}

pub fn solve_milp_with(p: &MilpProblem, opts: &MilpOptions) -> Result<MilpSolution, ProblemError> {
    p.validate()?;
    if opts.time_limit.is_zero() {
        return Err(ProblemError::NonPositiveTimeLimit);
    }
    let start = Instant::now();
    let deadline = start + opts.time_limit;
    let relaxed = relax(p);
    let prep = PreparedLp::new(&relaxed)?;
    let n = prep.n_vars();
    let mut lp_opts = opts.lp.clone();
    lp_opts.deadline = Some(lp_opts.deadline.map_or(deadline, |d| d.min(deadline)));

    let mut search = Search {
        p,
        opts,
        prep,
        lp_opts,
        incumbent: None,
        trace: Vec::new(),
        pruned_bound: f64::INFINITY,
        nodes: 0,
        lp_iterations: 0,
        next_id: 0,
        lb: vec![0.0; n],
        ub: vec![0.0; n],
        root_basis: None,
        pseudo: vec![Pseudocost::default(); n],
    };

    if let Some(x0) = &opts.initial_solution {
        if x0.len() == n
            && relaxed.max_violation(x0) <= 1e-6
            && p.max_integrality_violation(x0) <= opts.int_tol
        {
            let obj = relaxed.objective_value(x0);
            search.offer(x0.clone(), obj);
        }
    }

    let mut dive: Vec<Node> = vec![Node {
        id: 0,
        bound: f64::NEG_INFINITY,
        fixings: None,
        basis: opts.root_basis.clone().map(Rc::new),
        origin: None,
    }];
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    let mut stopped: Option<f64> = None;
    let mut unbounded = false;

    loop {
        if search.incumbent.is_some() && !dive.is_empty() {
            heap.extend(dive.drain(..).map(HeapEntry));
        }
        let node = match dive.pop() {
            Some(nd) => nd,
            None => match heap.pop() {
                Some(HeapEntry(nd)) => nd,
                None => break,
            },
        };
        if Instant::now() >= deadline {
            stopped = Some(node.bound);
            break;
        }
        let bound = node.bound;
        match search.process(node) {
            NodeResult::Pruned | NodeResult::Integral => {}
            NodeResult::Unbounded => {
                unbounded = true;
                break;
            }
            NodeResult::Stopped => {
                stopped = Some(bound);
                break;
            }
            NodeResult::Branched(down, up, up_first) => {
                if search.incumbent.is_none() {
                    if up_first {
                        dive.push(down);
                        dive.push(up);
                    } else {
                        dive.push(up);
                        dive.push(down);
                    }
                } else {
                    heap.push(HeapEntry(down));
                    heap.push(HeapEntry(up));
                }
            }
        }
    }

    let wall_time = start.elapsed().as_secs_f64();
    let open_bound = heap
        .iter()
        .map(|e| e.0.bound)
        .chain(dive.iter().map(|nd| nd.bound))
        .chain(stopped)
        .fold(f64::INFINITY, f64::min);

    if unbounded && search.incumbent.is_none() {
        return Ok(MilpSolution {
            status: MilpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::NEG_INFINITY,
            bound: f64::NEG_INFINITY,
            gap: f64::INFINITY,
            nodes: search.nodes,
            wall_time,
            lp_iterations: search.lp_iterations,
            incumbent_trace: search.trace,
            root_basis: search.root_basis,
        });
    }

    let finished = stopped.is_none() && !unbounded;
    let result = match search.incumbent.take() {
        Some((x, obj)) => {
            let bound = open_bound.min(search.pruned_bound).min(obj);
            let gap = relative_gap(obj, bound);
            let status = if finished || gap <= opts.gap_tol { MilpStatus::Optimal } else { MilpStatus::Feasible };
            MilpSolution {
                status,
                x,
                objective: obj,
                bound,
                gap,
                nodes: search.nodes,
                wall_time,
                lp_iterations: search.lp_iterations,
                incumbent_trace: search.trace,
            root_basis: search.root_basis,
            }
        }
        None => MilpSolution {
            status: if finished { MilpStatus::Infeasible } else { MilpStatus::TimeLimit },
            x: Vec::new(),
            objective: f64::INFINITY,
            bound: if finished { f64::INFINITY } else { open_bound },
            gap: f64::INFINITY,
            nodes: search.nodes,
            wall_time,
            lp_iterations: search.lp_iterations,
            incumbent_trace: search.trace,
            root_basis: search.root_basis,
        },
    };
    Ok(result)
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    let diff = (incumbent - bound).max(0.0);
    if diff <= 1e-9 {
        0.0
    } else {
        diff / incumbent.abs().max(1e-9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{LpProblem, Relation};

    #[test]
    fn knapsack_pair() {
        let mut p = MilpProblem::new(LpProblem::new());
        let a = p.add_binary(-3.0);
        let b = p.add_binary(-2.0);
        p.lp.add_constraint(vec![(a, 1.0), (b, 1.0)], Relation::Le, 1.0);
        let s = solve_milp(&p, Duration::from_secs(10), 1e-9).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert_eq!(s.x, vec![1.0, 0.0]);
        assert!((s.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn integral_relaxation_needs_one_node() {
        let mut p = MilpProblem::new(LpProblem::new());
        let a = p.add_binary(-1.0);
        let c = p.lp.add_var(0.0, 5.0, 1.0);
        p.lp.add_constraint(vec![(a, 1.0), (c, -1.0)], Relation::Le, 0.0);
        let s = solve_milp(&p, Duration::from_secs(10), 1e-9).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert_eq!(s.nodes, 1);
    }

    #[test]
    fn infeasible_integer_problem() {
        // a + b = 1.5 has LP solutions but no binary ones.
        let mut p = MilpProblem::new(LpProblem::new());
        let a = p.add_binary(0.0);
        let b = p.add_binary(0.0);
        p.lp.add_constraint(vec![(a, 1.0), (b, 1.0)], Relation::Eq, 1.5);
        let s = solve_milp(&p, Duration::from_secs(10), 1e-9).unwrap();
        assert_eq!(s.status, MilpStatus::Infeasible);
        assert!(s.x.is_empty());
    }

    #[test]
    fn zero_time_limit_is_rejected() {
        let p = MilpProblem::new(LpProblem::new());
        assert!(solve_milp(&p, Duration::ZERO, 1e-4).is_err());
    }

    #[test]
    fn relative_gap_handles_zero_incumbent() {
        assert_eq!(relative_gap(0.0, 0.0), 0.0);
        assert!(relative_gap(10.0, 9.0) > 0.09);
    }
}
