//! [`ConeSolver`] backed by the Clarabel interior-point solver.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use crate::cone::{certify, ConeKind, ConeProgram, ConeSolver, SolveOutcome, SolveStatus};

/// Clarabel with gap/feasibility tolerances of `1e-8`, one decade tighter
/// than [`crate::cone::FEASIBILITY_TOLERANCE`].
#[derive(Debug, Clone)]
pub struct ClarabelSolver {
    pub tolerance: f64,
    pub max_iter: u32,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iter: 200,
        }
    }
}

/// Constraint data in Clarabel's `A x + s = b, s ∈ K` form.
struct Standardized {
    a: CscMatrix<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

fn standardize(program: &ConeProgram) -> Standardized {
    // entries keyed (col, row) so the CSC assembly is a single ordered pass
    let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();
    for block in program.constraints() {
        let base = b.len();
        let rows = block.map.rows();
        let constant = block.map.constant();
        // Clarabel slack s = b − A x must equal our block value M x + c,
        // so A = −M and b = c (after the rotated-cone change of basis).
        match block.cone {
            ConeKind::RotatedSecondOrder => {
                // (u, v, z) ↦ (u + v, u − v, 2z) turns u·v ≥ ‖z‖² into a Lorentz cone
                let mut push = |row: usize, col: usize, v: f64| {
                    *entries.entry((col, base + row)).or_insert(0.0) -= v;
                };
                for (r, c, v) in block.map.triplets() {
                    match r {
                        0 => {
                            push(0, c, v);
                            push(1, c, v);
                        }
                        1 => {
                            push(0, c, v);
                            push(1, c, -v);
                        }
                        _ => push(r, c, 2.0 * v),
                    }
                }
                b.push(constant[0] + constant[1]);
                b.push(constant[0] - constant[1]);
                b.extend(constant[2..].iter().map(|v| 2.0 * v));
                cones.push(SupportedConeT::SecondOrderConeT(rows));
            }
            kind => {
                for (r, c, v) in block.map.triplets() {
                    *entries.entry((c, base + r)).or_insert(0.0) -= v;
                }
                b.extend_from_slice(constant);
                cones.push(match kind {
                    ConeKind::Nonnegative => SupportedConeT::NonnegativeConeT(rows),
                    ConeKind::SecondOrder => SupportedConeT::SecondOrderConeT(rows),
                    ConeKind::Exponential => SupportedConeT::ExponentialConeT(),
                    ConeKind::RotatedSecondOrder => unreachable!(),
                });
            }
        }
    }
    let n = program.variable_count();
    let m = b.len();
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::with_capacity(entries.len());
    let mut nzval = Vec::with_capacity(entries.len());
    let mut iter = entries.into_iter().filter(|(_, v)| *v != 0.0).peekable();
    for col in 0..n {
        colptr.push(rowval.len());
        while let Some(&((c, r), v)) = iter.peek() {
            if c != col {
                break;
            }
            rowval.push(r);
            nzval.push(v);
            iter.next();
        }
    }
    colptr.push(rowval.len());
    Standardized {
        a: CscMatrix::new(m, n, colptr, rowval, nzval),
        b,
        cones,
    }
}

impl ConeSolver for ClarabelSolver {
    fn solve(&self, program: &ConeProgram) -> SolveOutcome {
        let n = program.variable_count();
        let data = standardize(program);
        let p = CscMatrix::<f64>::zeros((n, n));
        let q: Vec<f64> = program.objective().iter().map(|c| -c).collect();
        let settings = DefaultSettings {
            verbose: false,
            max_iter: self.max_iter,
            tol_gap_abs: self.tolerance,
            tol_gap_rel: self.tolerance,
            tol_feas: self.tolerance,
            ..DefaultSettings::default()
        };
        let mut solver = match DefaultSolver::new(&p, &q, &data.a, &data.b, &data.cones, settings) {
            Ok(s) => s,
            Err(_) => return SolveOutcome::failure(SolveStatus::NumericalFailure),
        };
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            _ => SolveStatus::NumericalFailure,
        };
        let outcome = SolveOutcome {
            status,
            primal: sol.x.clone(),
            objective: -sol.obj_val,
            iterations: sol.iterations,
        };
        certify(program, outcome)
    }
}
