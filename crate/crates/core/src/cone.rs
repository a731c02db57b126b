//! Canonical cone programs over real variables.
//!
//! A program maximizes `cᵀx` subject to a list of blocks `A_i x + b_i ∈ K_i`.
//! Supported cones, for a block value `v`:
//!
//! - `Nonnegative`: every `v_j ≥ 0`.
//! - `SecondOrder`: `v_0 ≥ ‖(v_1, …)‖`.
//! - `RotatedSecondOrder`: `v_0·v_1 ≥ ‖(v_2, …)‖²`, `v_0, v_1 ≥ 0`
//!   (no factor two).
//! - `Exponential`: `(x, y, z)` with `y > 0, y·e^{x/y} ≤ z`, plus its closure.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::{Error, Result};

/// Feasibility tolerance an optimal outcome must meet, relative to
/// `1 + magnitude` of each block (see [`AffineMap::magnitude`]).
pub const FEASIBILITY_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Nonnegative,
    SecondOrder,
    RotatedSecondOrder,
    Exponential,
}

impl ConeKind {
    pub fn tag(self) -> &'static str {
        match self {
            ConeKind::Nonnegative => "nonneg",
            ConeKind::SecondOrder => "soc",
            ConeKind::RotatedSecondOrder => "rsoc",
            ConeKind::Exponential => "exp",
        }
    }

    fn min_dim(self) -> usize {
        match self {
            ConeKind::Nonnegative | ConeKind::SecondOrder => 1,
            ConeKind::RotatedSecondOrder => 2,
            ConeKind::Exponential => 3,
        }
    }

    /// How far `v` lies outside the cone (zero inside).
    pub fn violation(self, v: &[f64]) -> f64 {
        match self {
            ConeKind::Nonnegative => v.iter().fold(0.0, |acc, &x| acc.max(-x)),
            ConeKind::SecondOrder => {
                let rest = math::sqrt(v[1..].iter().map(|x| x * x).sum());
                (rest - v[0]).max(0.0)
            }
            ConeKind::RotatedSecondOrder => {
                // u·v ≥ ‖z‖² ⇔ ‖(u − v, 2z)‖ ≤ u + v
                let (u, w) = (v[0], v[1]);
                let z2: f64 = v[2..].iter().map(|x| x * x).sum();
                let lhs = math::sqrt((u - w) * (u - w) + 4.0 * z2);
                (lhs - (u + w)).max(0.0)
            }
            ConeKind::Exponential => exp_cone_violation(v[0], v[1], v[2]),
        }
    }
}

fn exp_cone_violation(x: f64, y: f64, z: f64) -> f64 {
    if y > 0.0 {
        let lhs = y * math::exp(x / y);
        (lhs - z).max(0.0).max(-z)
    } else {
        // closure: {x ≤ 0, y = 0, z ≥ 0}
        (-y).max(x.max(0.0)).max((-z).max(0.0))
    }
}

/// Sparse affine map `x ↦ A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    coefficients: BTreeMap<(usize, usize), f64>,
    constant: Vec<f64>,
}

impl AffineMap {
    pub fn new(rows: usize) -> Self {
        Self {
            coefficients: BTreeMap::new(),
            constant: vec![0.0; rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.constant.len()
    }

    /// Adds `value` to `A[row, col]`.
    pub fn add(&mut self, row: usize, col: usize, value: f64) -> &mut Self {
        if value != 0.0 {
            *self.coefficients.entry((row, col)).or_insert(0.0) += value;
        }
        self
    }

    pub fn add_constant(&mut self, row: usize, value: f64) -> &mut Self {
        self.constant[row] += value;
        self
    }

    pub fn constant(&self) -> &[f64] {
        &self.constant
    }

    /// Nonzero `(row, col, value)` triplets in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.coefficients.iter().map(|(&(r, c), &v)| (r, c, v))
    }

    pub fn max_column(&self) -> Option<usize> {
        self.coefficients.keys().map(|&(_, c)| c).max()
    }

    /// `max_i |b_i| + Σ_j |a_ij x_j|`: the size of the terms that cancel in
    /// the block value, used to scale residuals.
    pub fn magnitude(&self, x: &[f64]) -> f64 {
        let mut rows: Vec<f64> = self.constant.iter().map(|c| c.abs()).collect();
        for (&(r, c), &v) in &self.coefficients {
            rows[r] += (v * x[c]).abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.constant.clone();
        for (&(r, c), &v) in &self.coefficients {
            out[r] += v * x[c];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeConstraint {
    pub cone: ConeKind,
    pub map: AffineMap,
    /// Free-form label used in dumps and diagnostics.
    pub label: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeProgram {
    variable_count: usize,
    objective: Vec<f64>,
    constraints: Vec<ConeConstraint>,
}

impl ConeProgram {
    pub fn new(variable_count: usize) -> Self {
        Self {
            variable_count,
            objective: vec![0.0; variable_count],
            constraints: Vec::new(),
        }
    }

    pub fn variable_count(&self) -> usize {
        self.variable_count
    }

    /// Coefficients of the maximized linear objective.
    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_objective(&mut self, var: usize, coefficient: f64) {
        self.objective[var] = coefficient;
    }

    pub fn constraints(&self) -> &[ConeConstraint] {
        &self.constraints
    }

    pub fn add(&mut self, cone: ConeKind, map: AffineMap, label: &'static str) -> Result<()> {
        if map.rows() < cone.min_dim() || (cone == ConeKind::Exponential && map.rows() != 3) {
            return Err(Error::MalformedProgram(format!(
                "{} block '{label}' has dimension {}",
                cone.tag(),
                map.rows()
            )));
        }
        if let Some(c) = map.max_column() {
            if c >= self.variable_count {
                return Err(Error::MalformedProgram(format!(
                    "block '{label}' references variable {c} of {}",
                    self.variable_count
                )));
            }
        }
        self.constraints.push(ConeConstraint { cone, map, label });
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest cone violation over all blocks at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.cone.violation(&c.map.evaluate(x)))
            .fold(0.0, f64::max)
    }

    /// Largest violation with each block's residual divided by
    /// `1 + magnitude`.
    pub fn max_scaled_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.cone.violation(&c.map.evaluate(x)) / (1.0 + c.map.magnitude(x)))
            .fold(0.0, f64::max)
    }

    /// Per-block violations, labelled.
    pub fn violations(&self, x: &[f64]) -> Vec<(&'static str, f64)> {
        self.constraints
            .iter()
            .map(|c| (c.label, c.cone.violation(&c.map.evaluate(x))))
            .collect()
    }

    /// Plain-text dump: variable count, objective, then one header line per
    /// block followed by its constant vector and `row col value` triplets.
    pub fn write_dump<W: fmt::Write>(&self, out: &mut W) -> fmt::Result {
        writeln!(out, "variables {}", self.variable_count)?;
        let nz: Vec<_> = self.objective.iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
        writeln!(out, "objective {}", nz.len())?;
        for (i, v) in nz {
            writeln!(out, "{i} {v:?}")?;
        }
        writeln!(out, "blocks {}", self.constraints.len())?;
        for c in &self.constraints {
            let nnz = c.map.coefficients.len();
            writeln!(out, "{} {} {} {}", c.cone.tag(), c.map.rows(), nnz, c.label)?;
            let consts: Vec<_> = c.map.constant.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", consts.join(" "))?;
            for (r, col, v) in c.map.triplets() {
                writeln!(out, "{r} {col} {v:?}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
}

impl SolveOutcome {
    pub fn failure(status: SolveStatus) -> Self {
        Self {
            status,
            primal: Vec::new(),
            objective: f64::NAN,
            iterations: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// A cone-program solver. Implementations own their workspace per call.
pub trait ConeSolver {
    fn solve(&self, program: &ConeProgram) -> SolveOutcome;
}

/// Downgrades an `Optimal` outcome whose point violates a cone by more than
/// [`FEASIBILITY_TOLERANCE`] (scaled). Backends call this before returning.
pub fn certify(program: &ConeProgram, mut outcome: SolveOutcome) -> SolveOutcome {
    if outcome.status == SolveStatus::Optimal {
        let finite = outcome.primal.len() == program.variable_count() && outcome.primal.iter().all(|v| v.is_finite());
        if !finite || program.max_scaled_violation(&outcome.primal) > FEASIBILITY_TOLERANCE {
            outcome.status = SolveStatus::NumericalFailure;
        } else {
            outcome.objective = program.objective_value(&outcome.primal);
        }
    }
    outcome
}

/// Solves with the default interior-point backend.
#[cfg(feature = "clarabel")]
pub fn solve(program: &ConeProgram) -> SolveOutcome {
    crate::clarabel_backend::ClarabelSolver::default().solve(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_row(constant: f64) -> ConeProgram {
        // x - constant ≥ 0
        let mut p = ConeProgram::new(1);
        let mut m = AffineMap::new(1);
        m.add(0, 0, 1.0).add_constant(0, -constant);
        p.add(ConeKind::Nonnegative, m, "row").unwrap();
        p
    }

    #[test]
    fn certify_scales_residuals_by_block_magnitude() {
        let outcome = |x: f64| SolveOutcome {
            status: SolveStatus::Optimal,
            primal: vec![x],
            objective: 0.0,
            iterations: 1,
        };
        // 1e-6 short of a threshold near 100 is solver noise …
        let big = one_row(100.0);
        assert_eq!(certify(&big, outcome(100.0 - 1e-6)).status, SolveStatus::Optimal);
        // … but not near 1
        let small = one_row(1.0);
        assert_eq!(
            certify(&small, outcome(1.0 - 1e-6)).status,
            SolveStatus::NumericalFailure
        );
        assert_eq!(certify(&small, outcome(f64::NAN)).status, SolveStatus::NumericalFailure);
    }

    #[test]
    fn exponential_block_must_be_three_dimensional() {
        let mut p = ConeProgram::new(1);
        assert!(p.add(ConeKind::Exponential, AffineMap::new(2), "bad").is_err());
        assert!(p.add(ConeKind::Exponential, AffineMap::new(3), "ok").is_ok());
    }

    #[test]
    fn block_columns_must_fit_variables() {
        let mut p = ConeProgram::new(2);
        let mut m = AffineMap::new(1);
        m.add(0, 2, 1.0);
        assert!(matches!(
            p.add(ConeKind::Nonnegative, m, "x"),
            Err(Error::MalformedProgram(_))
        ));
    }

    #[test]
    fn violations_match_cone_definitions() {
        assert_eq!(ConeKind::Nonnegative.violation(&[1.0, -0.5]), 0.5);
        assert_eq!(ConeKind::SecondOrder.violation(&[5.0, 3.0, 4.0]), 0.0);
        assert!((ConeKind::SecondOrder.violation(&[4.0, 3.0, 4.0]) - 1.0).abs() < 1e-15);
        // 2·2 ≥ 2²
        assert!(ConeKind::RotatedSecondOrder.violation(&[2.0, 2.0, 2.0]) < 1e-15);
        assert!(ConeKind::RotatedSecondOrder.violation(&[2.0, 2.0, 2.1]) > 0.0);
        assert!(ConeKind::RotatedSecondOrder.violation(&[-1.0, -1.0, 0.0]) > 0.0);
        // (ln 2, 1, 2) is on the boundary
        assert!(ConeKind::Exponential.violation(&[core::f64::consts::LN_2, 1.0, 2.0]) < 1e-15);
        assert!(ConeKind::Exponential.violation(&[1.0, 1.0, 2.0]) > 0.0);
        assert_eq!(ConeKind::Exponential.violation(&[-1.0, 0.0, 0.5]), 0.0);
        assert!(ConeKind::Exponential.violation(&[1.0, 0.0, 0.5]) > 0.0);
    }

    #[test]
    fn affine_map_accumulates_duplicate_entries() {
        let mut m = AffineMap::new(2);
        m.add(0, 0, 1.0).add(0, 0, 2.0).add(1, 1, -1.0).add_constant(1, 4.0);
        assert_eq!(m.evaluate(&[1.0, 2.0]), vec![3.0, 2.0]);
    }

    #[test]
    fn dump_lists_blocks() {
        let mut p = ConeProgram::new(2);
        p.set_objective(0, 1.0);
        let mut m = AffineMap::new(1);
        m.add(0, 0, -1.0).add_constant(0, 1.0);
        p.add(ConeKind::Nonnegative, m, "cap").unwrap();
        let mut s = alloc::string::String::new();
        p.write_dump(&mut s).unwrap();
        assert_eq!(
            s,
            "variables 2\nobjective 1\n0 1.0\nblocks 1\nnonneg 1 1 cap\n1.0\n0 0 -1.0\n"
        );
    }
}
