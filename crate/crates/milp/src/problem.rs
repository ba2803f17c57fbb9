//! Problem containers shared by the LP and MILP solvers.

use std::collections::BTreeSet;

use crate::error::ProblemError;

/// Sense of a linear constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

/// One sparse row `Σ a_j x_j (rel) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A linear program in minimization form.
///
/// The objective is stored densely (one coefficient per variable, zero for
/// variables that do not appear in it); rows are sparse.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
    pub bounds: Vec<(f64, f64)>,
    /// Optional variable names, used only by the LP-format writer.
    pub names: Vec<Option<String>>,
    /// Constant added to the objective value (does not affect the argmin).
    pub objective_offset: f64,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.bounds.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Adds a variable with bounds `[lo, hi]` and objective coefficient `cost`.
    pub fn add_var(&mut self, lo: f64, hi: f64, cost: f64) -> usize {
        self.bounds.push((lo, hi));
        self.objective.push(cost);
        self.names.push(None);
        self.bounds.len() - 1
    }

    pub fn add_named_var(&mut self, name: impl Into<String>, lo: f64, hi: f64, cost: f64) -> usize {
        let j = self.add_var(lo, hi, cost);
        self.names[j] = Some(name.into());
        j
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(LinearConstraint { coeffs, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn var_name(&self, j: usize) -> String {
        match self.names.get(j) {
            Some(Some(name)) => name.clone(),
            _ => format!("x{j}"),
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max);
        let bounds = self
            .bounds
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Structural checks performed before any solve.
    pub fn validate(&self) -> Result<(), ProblemError> {
        let n = self.n_vars();
        if self.objective.len() != n {
            return Err(ProblemError::ObjectiveLength { expected: n, got: self.objective.len() });
        }
        if !self.names.is_empty() && self.names.len() != n {
            return Err(ProblemError::NamesLength { expected: n, got: self.names.len() });
        }
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(ProblemError::NonFiniteCost { var: j });
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(ProblemError::BadBounds { var: j, lo, hi });
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(ProblemError::NonFiniteRhs { row: i });
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(ProblemError::IndexOutOfRange { row: i, var: j, n_vars: n });
                }
                if !a.is_finite() {
                    return Err(ProblemError::NonFiniteCoefficient { row: i, var: j });
                }
            }
        }
        Ok(())
    }
}

/// An [`LpProblem`] plus a set of variables restricted to `{0, 1}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpProblem {
    pub lp: LpProblem,
    pub binaries: BTreeSet<usize>,
}

impl MilpProblem {
    pub fn new(lp: LpProblem) -> Self {
        Self { lp, binaries: BTreeSet::new() }
    }

    /// Adds a binary variable; its bounds are `[0, 1]`.
    pub fn add_binary(&mut self, cost: f64) -> usize {
        let j = self.lp.add_var(0.0, 1.0, cost);
        self.binaries.insert(j);
        j
    }

    pub fn add_named_binary(&mut self, name: impl Into<String>, cost: f64) -> usize {
        let j = self.add_binary(cost);
        self.lp.names[j] = Some(name.into());
        j
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        self.lp.validate()?;
        let n = self.lp.n_vars();
        for &j in &self.binaries {
            if j >= n {
                return Err(ProblemError::BinaryOutOfRange { var: j, n_vars: n });
            }
        }
        Ok(())
    }

    /// Largest distance of a binary variable from `{0, 1}`.
    pub fn max_integrality_violation(&self, x: &[f64]) -> f64 {
        self.binaries
            .iter()
            .map(|&j| {
                let v = x[j];
                if v < 0.0 {
                    -v
                } else if v > 1.0 {
                    v - 1.0
                } else {
                    v.min(1.0 - v)
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Continuous relaxation: binaries become continuous on `[0, 1]`, intersected
/// with whatever bounds the variable already carried.
pub fn relax(p: &MilpProblem) -> LpProblem {
    let mut lp = p.lp.clone();
    for &j in &p.binaries {
        let (lo, hi) = lp.bounds[j];
        lp.bounds[j] = (lo.max(0.0), hi.min(1.0));
    }
    lp
}
