//! Energy-efficient multicast precoding by successive convex approximation.
//!
//! [`find_feasible_start`] repeatedly solves the slack-penalized restoration
//! problem until every slack vanishes, giving a point that satisfies the
//! power, interference and QoS constraints. [`optimize`] then iterates the
//! Charnes-Cooper subproblem, mapping each solution back through `φ*` and
//! re-linearizing there, until the weighted scaled rate changes by at most
//! `ξ` between iterations.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::cone::{ConeSolver, SolveStatus};
use crate::linalg::norm_sq;
use crate::math;
use crate::metrics::{energy_efficiency, interference, BeamUserTable, EvaluationReport, PrecodingMatrix, SystemParams};
use crate::subproblem::{build_ee_subproblem, build_feasibility_subproblem, taylor_lower_bound, ExpansionPoint};
use crate::{Error, Result};

/// Margin applied to the interference-plus-noise value of the initial `β`.
pub const INITIAL_BETA_MARGIN: f64 = 1.1;

/// Optimal `φ` below `MIN_SCALE_FACTOR / P_0` is treated as a solver failure.
pub const MIN_SCALE_FACTOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Restoration,
    Fractional,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Restoration => "feasibility-restoration",
            Phase::Fractional => "sca",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub phase: Phase,
    /// One-based within its phase.
    pub iteration: usize,
    /// `Σ α_n r̄_n` (fractional phase) or `Σ α_n r_n` (restoration phase).
    pub weighted_rate: f64,
    /// Energy efficiency of the precoder recovered at this iteration.
    pub ee: f64,
    /// Largest restoration slack; zero in the fractional phase.
    pub max_slack: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScaTrace {
    pub records: Vec<TraceRecord>,
}

impl ScaTrace {
    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &TraceRecord> + '_ {
        self.records.iter().filter(move |r| r.phase == phase)
    }

    /// Weighted rates of the fractional phase, in order.
    pub fn weighted_rates(&self) -> Vec<f64> {
        self.phase(Phase::Fractional).map(|r| r.weighted_rate).collect()
    }

    /// Whether the fractional-phase weighted rate never drops by more than `slack`.
    pub fn is_ascending(&self, slack: f64) -> bool {
        self.weighted_rates().windows(2).all(|w| w[1] >= w[0] - slack)
    }
}

/// Certified start of the fractional phase.
#[derive(Debug, Clone)]
pub struct FeasibleStart {
    pub point: ExpansionPoint,
    pub iterations: usize,
    pub trace: ScaTrace,
}

/// The last fractional step, mapped back to unscaled variables.
#[derive(Debug, Clone)]
pub struct FractionalIterate {
    /// Point the step was linearized at.
    pub point: ExpansionPoint,
    pub w: PrecodingMatrix,
    pub beta: BeamUserTable,
    pub gamma: BeamUserTable,
    pub rates: Vec<f64>,
    /// Optimal `φ*`.
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct PrecoderSolution {
    pub w: PrecodingMatrix,
    pub report: EvaluationReport,
    pub trace: ScaTrace,
    pub converged: bool,
    /// Fractional-phase iterations performed.
    pub iterations: usize,
    /// `W^(0)` from the restoration phase.
    pub start: PrecodingMatrix,
    pub last_step: FractionalIterate,
}

/// Matched-filter start: column `n` points along the conjugate of beam `n`'s
/// mean channel row, all columns with equal power and `Σ‖w_n‖² = P_T/2`.
pub fn initial_precoder(h: &ChannelMatrix, params: &SystemParams) -> PrecodingMatrix {
    let (m, n_beams) = (h.num_feeds(), h.num_beams());
    let mean = h.beam_average_rows();
    let column_power = params.max_power / (2.0 * n_beams as f64);
    let columns: Vec<Vec<Complex64>> = (0..n_beams)
        .map(|n| {
            let mut dir: Vec<Complex64> = mean.row(n).iter().map(|v| v.conj()).collect();
            if norm_sq(&dir) < 1e-300 {
                // phases cancelled or no real users: use the strongest row, else a unit vector
                let best = (0..h.users_per_beam())
                    .filter(|&q| !h.is_virtual(n, q))
                    .max_by(|&a, &b| norm_sq(h.row(n, a)).total_cmp(&norm_sq(h.row(n, b))));
                dir = match best {
                    Some(q) => h.row(n, q).iter().map(|v| v.conj()).collect(),
                    None => (0..m)
                        .map(|i| Complex64::new(if i == n % m { 1.0 } else { 0.0 }, 0.0))
                        .collect(),
                };
            }
            let norm = math::sqrt(norm_sq(&dir));
            let s = math::sqrt(column_power) / norm;
            dir.iter().map(|v| v * s).collect()
        })
        .collect();
    PrecodingMatrix::from_columns(&columns).expect("columns share the feed count")
}

/// `W = W̄*/φ*`, `β = β̄*/φ*`.
pub fn de_transform(
    w_bar: &PrecodingMatrix,
    beta_bar: &BeamUserTable,
    scale: f64,
) -> Result<(PrecodingMatrix, BeamUserTable)> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::NonPositiveScaling(scale));
    }
    let mut w = w_bar.clone();
    w.scale(1.0 / scale);
    let beta = BeamUserTable::from_values(
        beta_bar.beams(),
        beta_bar.users_per_beam(),
        beta_bar.values().iter().map(|b| b / scale).collect(),
    )?;
    Ok((w, beta))
}

fn solver_error(phase: Phase, status: SolveStatus, iteration: usize, trace: &ScaTrace) -> Error {
    Error::Solver {
        phase,
        status,
        iteration,
        trace: Box::new(trace.clone()),
    }
}

/// Whether some real user's threshold exceeds `‖h‖²·P_T/σ²`, an upper bound
/// on its SINR under any precoder within budget.
pub fn exceeds_sinr_cap(h: &ChannelMatrix, params: &SystemParams) -> bool {
    h.active_users().any(|(n, q)| {
        let gain: f64 = h.row(n, q).iter().map(|v| v.norm_sqr()).sum();
        params.sinr_thresholds[n] > gain * params.max_power / params.noise_power
    })
}

/// Restoration phase with an explicit solver.
pub fn find_feasible_start_with<S: ConeSolver + ?Sized>(
    h: &ChannelMatrix,
    params: &SystemParams,
    solver: &S,
) -> Result<FeasibleStart> {
    params.check_against(h)?;
    let noise = params.noise_power;
    let mut point = ExpansionPoint::tight(h, initial_precoder(h, params), noise, INITIAL_BETA_MARGIN)?;
    let mut trace = ScaTrace::default();
    let mut max_slack = f64::INFINITY;
    for iteration in 1..=params.max_feas_iters {
        let sp = build_feasibility_subproblem(h, params, &point)?;
        let out = solver.solve(&sp.program);
        if !out.is_optimal() {
            // Badly scaled restoration problems can stall the solver; when the
            // thresholds are provably out of reach, say so instead.
            if exceeds_sinr_cap(h, params) {
                return Err(Error::InfeasibleProblem {
                    iterations: iteration,
                    max_slack,
                    trace: Box::new(trace),
                });
            }
            return Err(solver_error(Phase::Restoration, out.status, iteration, &trace));
        }
        let x = &out.primal;
        let w = sp.layout.precoder(x);
        let beta = sp.layout.betas(x, noise);
        max_slack = sp.layout.max_slack(x);
        let weighted_rate: f64 = sp.layout.rates(x).iter().zip(&params.weights).map(|(r, a)| r * a).sum();
        let ee = energy_efficiency(h, &w, params)?.ee;
        trace.records.push(TraceRecord {
            phase: Phase::Restoration,
            iteration,
            weighted_rate,
            ee,
            max_slack,
            status: out.status,
        });
        point = ExpansionPoint::lifted(h, w, beta, noise)?;
        if max_slack <= params.slack_tolerance {
            return Ok(FeasibleStart {
                point,
                iterations: iteration,
                trace,
            });
        }
    }
    Err(Error::InfeasibleProblem {
        iterations: params.max_feas_iters,
        max_slack,
        trace: Box::new(trace),
    })
}

/// Fractional phase from a given start, with an explicit solver.
pub fn optimize_from<S: ConeSolver + ?Sized>(
    h: &ChannelMatrix,
    params: &SystemParams,
    start: FeasibleStart,
    solver: &S,
) -> Result<PrecoderSolution> {
    params.check_against(h)?;
    let noise = params.noise_power;
    let mut trace = start.trace;
    let start_w = start.point.w().clone();
    let mut point = start.point;
    let mut previous = 0.0;
    let mut last: Option<(FractionalIterate, bool, usize)> = None;
    for iteration in 1..=params.max_sca_iters {
        let sp = build_ee_subproblem(h, params, &point)?;
        let out = solver.solve(&sp.program);
        if !out.is_optimal() {
            return Err(solver_error(Phase::Fractional, out.status, iteration, &trace));
        }
        let x = &out.primal;
        let scale = x[sp.layout.scale().expect("fractional layout")];
        if !(scale > 0.0) {
            return Err(Error::NonPositiveScaling(scale));
        }
        if scale < MIN_SCALE_FACTOR / params.static_power {
            return Err(solver_error(
                Phase::Fractional,
                SolveStatus::NumericalFailure,
                iteration,
                &trace,
            ));
        }
        let (w, beta) = de_transform(&sp.layout.precoder(x), &sp.layout.betas(x, noise * scale), scale)?;
        let gamma_bar = sp.layout.gammas(x);
        let gamma = BeamUserTable::from_values(
            gamma_bar.beams(),
            gamma_bar.users_per_beam(),
            gamma_bar.values().iter().map(|g| g / scale).collect(),
        )?;
        let rates: Vec<f64> = sp.layout.rates(x).iter().map(|r| r / scale).collect();
        let weighted_rate = sp.program.objective_value(x);
        let ee = energy_efficiency(h, &w, params)?.ee;
        trace.records.push(TraceRecord {
            phase: Phase::Fractional,
            iteration,
            weighted_rate,
            ee,
            max_slack: 0.0,
            status: out.status,
        });
        let converged = (weighted_rate - previous).abs() <= params.tolerance;
        previous = weighted_rate;
        let next = ExpansionPoint::lifted(h, w.clone(), beta.clone(), noise)?;
        let used = core::mem::replace(&mut point, next);
        last = Some((
            FractionalIterate {
                point: used,
                w,
                beta,
                gamma,
                rates,
                scale,
            },
            converged,
            iteration,
        ));
        if converged {
            break;
        }
    }
    let (last_step, converged, iterations) = last.expect("at least one fractional iteration runs");
    let w = last_step.w.clone();
    let report = energy_efficiency(h, &w, params)?;
    Ok(PrecoderSolution {
        w,
        report,
        trace,
        converged,
        iterations,
        start: start_w,
        last_step,
    })
}

/// Restoration followed by the fractional phase, with an explicit solver.
pub fn optimize_with<S: ConeSolver + ?Sized>(
    h: &ChannelMatrix,
    params: &SystemParams,
    solver: &S,
) -> Result<PrecoderSolution> {
    let start = find_feasible_start_with(h, params, solver)?;
    optimize_from(h, params, start, solver)
}

#[cfg(feature = "clarabel")]
pub fn find_feasible_start(h: &ChannelMatrix, params: &SystemParams) -> Result<FeasibleStart> {
    find_feasible_start_with(h, params, &crate::clarabel_backend::ClarabelSolver::default())
}

#[cfg(feature = "clarabel")]
pub fn optimize(h: &ChannelMatrix, params: &SystemParams) -> Result<PrecoderSolution> {
    optimize_with(h, params, &crate::clarabel_backend::ClarabelSolver::default())
}

/// Largest violation of the unscaled step constraints by `step`:
/// QoS `γ ≥ Γ̄`, Taylor bound `γ ≤ φ^(t)(w, β)`, power `Σ‖w‖² ≤ P_T`,
/// interference `β ≥ Σ_{i≠n}|h w_i|² + σ²` and rate `r_n ≤ log(1+γ)`.
///
/// Power and interference violations are relative to `P_T` and `β`.
pub fn step_violation(h: &ChannelMatrix, params: &SystemParams, step: &FractionalIterate) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let power = crate::metrics::total_power(&step.w);
    worst = worst.max((power - params.max_power) / params.max_power);
    for (n, q) in h.active_users() {
        let g = step.gamma.get(n, q);
        let b = step.beta.get(n, q);
        worst = worst.max(params.sinr_thresholds[n] - g);
        let bound = taylor_lower_bound(h.row(n, q), &step.point.w().column(n), step.point.beta().get(n, q))?;
        worst = worst.max(g - bound.evaluate(&step.w.column(n), b));
        let floor = interference(h, &step.w, n, q) + params.noise_power;
        worst = worst.max((floor - b) / b.max(params.noise_power));
        worst = worst.max(step.rates[n] - params.log_base.rate(g));
    }
    Ok(worst)
}
