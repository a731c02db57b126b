//! Sweeps, single solves and their CSV outputs.
//!
//! Results CSV columns, in order:
//! `seed,p_t_dbw,q,algorithm,ee,weighted_sum_rate,total_power_w,qos_feasible,
//! iterations,converged,wall_time_s,status`.
//! A failed point keeps its row: numeric columns are zero and `status` is
//! `infeasible`, `solver-failure` or `error`.

use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use satee_core::baselines::{baseline_precoder, BaselineKind, BaselineTag};
use satee_core::channel::{generate_channel, ChannelMatrix, UserLayout};
use satee_core::metrics::{energy_efficiency, EvaluationReport, SystemParams};
use satee_core::precoder::{self, PrecoderSolution, ScaTrace};
use satee_core::Error;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, ExperimentConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub p_t_dbw: f64,
    pub q: usize,
    pub algorithm: String,
    pub ee: f64,
    pub weighted_sum_rate: f64,
    pub total_power_w: f64,
    pub qos_feasible: bool,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    pub status: String,
}

/// Per-iteration record of a single solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub phase: String,
    pub iteration: usize,
    pub weighted_rate: f64,
    pub ee: f64,
    pub max_slack: f64,
    pub status: String,
}

/// Final evaluation of a single solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub ee: f64,
    pub weighted_sum_rate: f64,
    pub total_power_w: f64,
    pub power_margin_w: f64,
    pub min_qos_margin: f64,
    pub power_feasible: bool,
    pub qos_feasible: bool,
    pub converged: bool,
    pub iterations: usize,
}

impl ReportRow {
    pub fn new(report: &EvaluationReport, converged: bool, iterations: usize) -> Self {
        Self {
            ee: report.ee,
            weighted_sum_rate: report.weighted_sum_rate,
            total_power_w: report.total_power,
            power_margin_w: report.power_margin,
            min_qos_margin: report.min_qos_margin(),
            power_feasible: report.power_feasible,
            qos_feasible: report.qos_feasible,
            converged,
            iterations,
        }
    }
}

/// Mean over the successful seeds of one (sweep point, algorithm) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub p_t_dbw: f64,
    pub q: usize,
    pub algorithm: String,
    pub runs: usize,
    pub ok: usize,
    pub mean_ee: f64,
    pub mean_weighted_sum_rate: f64,
    pub mean_total_power_w: f64,
    pub qos_feasible_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Power,
    Users,
    /// One operating point (`P_T`, `Q` from the params/layout sections).
    Point,
}

pub fn status_of(err: &Error) -> &'static str {
    match err {
        Error::InfeasibleProblem { .. } => "infeasible",
        Error::Solver { .. } | Error::NonPositiveScaling(_) => "solver-failure",
        _ => "error",
    }
}

/// Channel realization for `seed` with `q` slots per beam. The seed drives
/// both user placement and phases; per-beam streams keep user sets nested
/// across `q`.
pub fn channel_for(config: &ExperimentConfig, seed: u64, q: usize) -> Result<ChannelMatrix, Error> {
    let mut geometry = config.geometry.clone();
    geometry.rng_seed = seed;
    let real = config.real_users_at(q);
    let layout = UserLayout::uniform_in_beams(&geometry, q, real.as_deref())?;
    generate_channel(&geometry, &layout, seed)
}

/// Runs one algorithm on one channel.
pub fn run_algorithm(
    algorithm: Algorithm,
    h: &ChannelMatrix,
    params: &SystemParams,
) -> Result<(EvaluationReport, usize, bool), Error> {
    let tag = match algorithm {
        Algorithm::EeSca => {
            let sol = precoder::optimize(h, params)?;
            return Ok((sol.report, sol.iterations, sol.converged));
        }
        Algorithm::Rzf => BaselineTag::Rzf,
        Algorithm::Mmse => BaselineTag::Mmse,
        Algorithm::Mbim => BaselineTag::Mbim,
    };
    let w = baseline_precoder(h, params, BaselineKind::standard(tag, params))?;
    Ok((energy_efficiency(h, &w, params)?, 0, true))
}

#[derive(Debug, Clone, Copy)]
struct Point {
    seed: u64,
    p_t_dbw: f64,
    p_t_w: f64,
    q: usize,
}

fn evaluate_point(config: &ExperimentConfig, pt: Point) -> Vec<ResultRow> {
    let params = config.system_params(pt.p_t_w, pt.q);
    let channel = channel_for(config, pt.seed, pt.q);
    config
        .algorithms
        .iter()
        .map(|&alg| {
            let started = Instant::now();
            let outcome = channel
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|h| run_algorithm(alg, h, &params));
            let wall_time_s = started.elapsed().as_secs_f64();
            let mut row = ResultRow {
                seed: pt.seed,
                p_t_dbw: pt.p_t_dbw,
                q: pt.q,
                algorithm: alg.name().to_string(),
                ee: 0.0,
                weighted_sum_rate: 0.0,
                total_power_w: 0.0,
                qos_feasible: false,
                iterations: 0,
                converged: false,
                wall_time_s,
                status: "ok".to_string(),
            };
            match outcome {
                Ok((report, iterations, converged)) => {
                    row.ee = report.ee;
                    row.weighted_sum_rate = report.weighted_sum_rate;
                    row.total_power_w = report.total_power;
                    row.qos_feasible = report.qos_feasible;
                    row.iterations = iterations;
                    row.converged = converged;
                }
                Err(e) => row.status = status_of(&e).to_string(),
            }
            row
        })
        .collect()
}

fn points(config: &ExperimentConfig, kind: SweepKind) -> Vec<Point> {
    let p = &config.params;
    let grid: Vec<(f64, f64, usize)> = match kind {
        SweepKind::Power => config
            .sweep_p_t_dbw
            .iter()
            .zip(&config.sweep_p_t_w)
            .map(|(&d, &w)| (d, w, config.users_per_beam))
            .collect(),
        SweepKind::Users => config
            .sweep_users_per_beam
            .iter()
            .map(|&q| (p.max_power_dbw, p.max_power_w, q))
            .collect(),
        SweepKind::Point => vec![(p.max_power_dbw, p.max_power_w, config.users_per_beam)],
    };
    config
        .seeds
        .iter()
        .flat_map(|&seed| {
            grid.iter().map(move |&(p_t_dbw, p_t_w, q)| Point {
                seed,
                p_t_dbw,
                p_t_w,
                q,
            })
        })
        .collect()
}

fn algorithm_rank(name: &str) -> usize {
    Algorithm::ALL
        .iter()
        .position(|a| a.name() == name)
        .unwrap_or(usize::MAX)
}

/// Evaluates every (seed, sweep point, algorithm) on `config.workers`
/// threads. Rows come back sorted by seed, `P_T`, `Q`, then algorithm.
pub fn run_sweep(config: &ExperimentConfig, kind: SweepKind) -> Vec<ResultRow> {
    let pts = points(config, kind);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .expect("thread pool");
    let mut rows: Vec<ResultRow> =
        pool.install(|| pts.par_iter().flat_map_iter(|&pt| evaluate_point(config, pt)).collect());
    rows.sort_by(|a, b| {
        a.seed
            .cmp(&b.seed)
            .then(a.p_t_dbw.total_cmp(&b.p_t_dbw))
            .then(a.q.cmp(&b.q))
            .then(algorithm_rank(&a.algorithm).cmp(&algorithm_rank(&b.algorithm)))
    });
    rows
}

pub fn run_power_sweep(config: &ExperimentConfig) -> Vec<ResultRow> {
    run_sweep(config, SweepKind::Power)
}

pub fn run_user_sweep(config: &ExperimentConfig) -> Vec<ResultRow> {
    run_sweep(config, SweepKind::Users)
}

pub fn run_baselines(config: &ExperimentConfig) -> Vec<ResultRow> {
    run_sweep(config, SweepKind::Point)
}

/// Means over seeds, ordered by sweep point then algorithm.
pub fn mean_over_seeds(rows: &[ResultRow]) -> Vec<MeanRow> {
    let mut keys: Vec<(f64, usize, String)> = Vec::new();
    for r in rows {
        if !keys
            .iter()
            .any(|(p, q, a)| *p == r.p_t_dbw && *q == r.q && *a == r.algorithm)
        {
            keys.push((r.p_t_dbw, r.q, r.algorithm.clone()));
        }
    }
    keys.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(algorithm_rank(&a.2).cmp(&algorithm_rank(&b.2)))
    });
    keys.into_iter()
        .map(|(p_t_dbw, q, algorithm)| {
            let group: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.p_t_dbw == p_t_dbw && r.q == q && r.algorithm == algorithm)
                .collect();
            let ok: Vec<&&ResultRow> = group.iter().filter(|r| r.status == "ok").collect();
            let mean = |f: fn(&ResultRow) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            MeanRow {
                p_t_dbw,
                q,
                runs: group.len(),
                ok: ok.len(),
                mean_ee: mean(|r| r.ee),
                mean_weighted_sum_rate: mean(|r| r.weighted_sum_rate),
                mean_total_power_w: mean(|r| r.total_power_w),
                qos_feasible_fraction: mean(|r| if r.qos_feasible { 1.0 } else { 0.0 }),
                algorithm,
            }
        })
        .collect()
}

/// Gnuplot data: one line per sweep value, one mean-EE column per algorithm.
pub fn gnuplot_table(means: &[MeanRow], kind: SweepKind) -> String {
    let mut algs: Vec<&str> = Vec::new();
    for m in means {
        if !algs.contains(&m.algorithm.as_str()) {
            algs.push(&m.algorithm);
        }
    }
    algs.sort_by_key(|a| algorithm_rank(a));
    let x = |m: &MeanRow| match kind {
        SweepKind::Users => m.q as f64,
        _ => m.p_t_dbw,
    };
    let mut xs: Vec<f64> = means.iter().map(x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut out = format!(
        "# {} {}\n",
        if kind == SweepKind::Users { "q" } else { "p_t_dbw" },
        algs.join(" ")
    );
    for xv in xs {
        out.push_str(&format!("{xv:?}"));
        for a in &algs {
            let v = means
                .iter()
                .find(|m| x(m) == xv && m.algorithm == *a)
                .map_or(f64::NAN, |m| m.mean_ee);
            out.push_str(&format!(" {v:?}"));
        }
        out.push('\n');
    }
    out
}

/// `results.csv` → `results.<suffix>`.
pub fn companion_path(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for r in rows {
        w.serialize(r).map_err(io::Error::other)?;
    }
    w.flush()
}

/// Writes `out`, `out.mean.csv` and `out.dat`.
pub fn write_sweep(out: &Path, rows: &[ResultRow], kind: SweepKind) -> io::Result<()> {
    write_csv(out, rows)?;
    let means = mean_over_seeds(rows);
    write_csv(&companion_path(out, "mean.csv"), &means)?;
    std::fs::write(companion_path(out, "dat"), gnuplot_table(&means, kind))
}

pub fn trace_rows(trace: &ScaTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            phase: r.phase.to_string(),
            iteration: r.iteration,
            weighted_rate: r.weighted_rate,
            ee: r.ee,
            max_slack: r.max_slack,
            status: format!("{:?}", r.status),
        })
        .collect()
}

/// Trace carried by a failed solve, if any.
pub fn error_trace(err: &Error) -> Option<&ScaTrace> {
    match err {
        Error::InfeasibleProblem { trace, .. } | Error::Solver { trace, .. } => Some(trace),
        _ => None,
    }
}

/// One EE-SCA solve at the nominal operating point.
pub fn run_single(h: &ChannelMatrix, config: &ExperimentConfig) -> Result<PrecoderSolution, Error> {
    let mut params = config.system_params(config.params.max_power_w, h.users_per_beam());
    // a loaded channel may differ in size from the configured geometry
    params.feeds = h.num_feeds();
    params.beams = h.num_beams();
    precoder::optimize(h, &params)
}
