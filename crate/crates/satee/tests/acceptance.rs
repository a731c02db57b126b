//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test -p satee --test acceptance`.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use satee::config::{Algorithm, ExperimentConfig, Preset};
use satee::experiment::{self, ResultRow};
use satee_core::baselines::{baseline_precoder, BaselineKind, BaselineTag};
use satee_core::channel::{generate_channel, ChannelMatrix, GeometryConfig, UserLayout};
use satee_core::linalg::CMat;
use satee_core::metrics::{total_power, SystemParams};
use satee_core::precoder::{optimize, step_violation};
use satee_core::subproblem::taylor_lower_bound;
use satee_core::{Complex64, Error};

// ---- pinned tolerances ------------------------------------------------------

const TAYLOR_TOL: f64 = 1e-9;
const ASCENT_TOL: f64 = 1e-6;
const STOP_XI: f64 = 1e-3;
const MAX_SCA_ITERS: usize = 50;
const RUNTIME_BUDGET: Duration = Duration::from_secs(300);
const AUDIT_TOL: f64 = 1e-6;
const CC_TOL: f64 = 1e-6;
const SCALAR_EE_REL: f64 = 0.01;
const GRID_POINTS: usize = 10_000;
const SHAPE_TOL: f64 = 1e-6;
const POWER_SWEEP_SEEDS: u64 = 10;
// Fewer seeds leave the MBIM-style Q = 3 → 4 step inside the seed noise.
const USER_SWEEP_SEEDS: u64 = 40;
const BASELINE_POWER_TOL: f64 = 1e-9;
const COFACTOR_TOL: f64 = 1e-10;

// Desk suite: N = M = 4, Q = 2, σ² = 1, P_0 = 10 W, P_T = 25.1 W.
const DESK_BEAMS: usize = 4;
const DESK_Q: usize = 2;
const DESK_PT: f64 = 25.1;
const DESK_P0: f64 = 10.0;
const DESK_SEEDS: u64 = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cgauss(r: &mut ChaCha8Rng) -> Complex64 {
    // Box-Muller, unit variance per complex entry
    let u1: f64 = r.random::<f64>().max(1e-300);
    let u2: f64 = r.random();
    let rad = (-u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    Complex64::new(rad * t.cos(), rad * t.sin())
}

fn cvec(r: &mut ChaCha8Rng, m: usize) -> Vec<Complex64> {
    (0..m).map(|_| cgauss(r)).collect()
}

fn quad_over(h: &[Complex64], w: &[Complex64], beta: f64) -> f64 {
    let s: Complex64 = h.iter().zip(w).map(|(a, b)| a * b).sum();
    s.norm_sqr() / beta
}

fn desk_channel(seed: u64) -> ChannelMatrix {
    let mut g = GeometryConfig::ka_band_geo(DESK_BEAMS);
    g.rng_seed = seed;
    let layout = UserLayout::uniform_in_beams(&g, DESK_Q, None).unwrap();
    generate_channel(&g, &layout, seed).unwrap()
}

fn desk_params(h: &ChannelMatrix) -> SystemParams {
    let mut p = SystemParams::for_channel(h, DESK_PT, DESK_P0);
    p.tolerance = STOP_XI;
    p.max_sca_iters = MAX_SCA_ITERS;
    p.with_thresholds(1.0)
}

// ---- criteria ---------------------------------------------------------------

fn taylor_tightness() -> Outcome {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = r.random_range(1..=8);
        let (h, w) = (cvec(&mut r, m), cvec(&mut r, m));
        let beta = r.random_range(0.1..10.0);
        let phi = taylor_lower_bound(&h, &w, beta).unwrap().evaluate(&w, beta);
        worst = worst.max((phi - quad_over(&h, &w, beta)).abs());
    }
    verdict(
        worst <= TAYLOR_TOL,
        format!("max |φ(w_t,β_t) - |h w_t|²/β_t| = {worst:.2e} over 1000 draws (tol {TAYLOR_TOL:.0e})"),
    )
}

fn taylor_dominance() -> Outcome {
    let mut r = rng(2);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let m = r.random_range(1..=8);
        let (h, wt) = (cvec(&mut r, m), cvec(&mut r, m));
        let bt = r.random_range(0.1..10.0);
        let bound = taylor_lower_bound(&h, &wt, bt).unwrap();
        for _ in 0..1000 {
            let w = cvec(&mut r, m);
            let beta = r.random_range(0.05..20.0);
            worst = worst.max(bound.evaluate(&w, beta) - quad_over(&h, &w, beta));
        }
    }
    verdict(
        worst <= TAYLOR_TOL,
        format!("max φ - |hw|²/β = {worst:.2e} over 1000×1000 draws (tol {TAYLOR_TOL:.0e})"),
    )
}

struct DeskRun {
    ascending: bool,
    converged: bool,
    iterations: usize,
    power_margin: f64,
    qos_margin: f64,
    step_violation: f64,
    cc_gap: f64,
}

fn desk_suite() -> (Vec<Result<DeskRun, Error>>, Duration) {
    let started = Instant::now();
    let runs = (0..DESK_SEEDS)
        .map(|seed| {
            let h = desk_channel(seed);
            let params = desk_params(&h);
            let sol = optimize(&h, &params)?;
            let step = &sol.last_step;
            let consumed = total_power(&step.w) + params.static_power;
            Ok(DeskRun {
                ascending: sol.trace.is_ascending(ASCENT_TOL),
                converged: sol.converged,
                iterations: sol.iterations,
                power_margin: sol.report.power_margin,
                qos_margin: sol.report.min_qos_margin(),
                step_violation: step_violation(&h, &params, step)?,
                cc_gap: (1.0 / step.scale - consumed).abs() * step.scale,
            })
        })
        .collect();
    (runs, started.elapsed())
}

fn sca_ascent(runs: &[Result<DeskRun, Error>], elapsed: Duration) -> Outcome {
    let mut bad = Vec::new();
    let mut max_iters = 0;
    for (seed, run) in runs.iter().enumerate() {
        match run {
            Ok(r) => {
                max_iters = max_iters.max(r.iterations);
                if !(r.ascending && r.converged && r.iterations <= MAX_SCA_ITERS) {
                    bad.push(format!("seed {seed}"));
                }
            }
            Err(e) => bad.push(format!("seed {seed}: {e}")),
        }
    }
    verdict(
        bad.is_empty() && elapsed <= RUNTIME_BUDGET,
        format!(
            "{}/{} instances ascend and stop (ξ = {STOP_XI}) within {max_iters} ≤ {MAX_SCA_ITERS} iterations; \
             {:.1} s (budget {} s){}",
            runs.len() - bad.len(),
            runs.len(),
            elapsed.as_secs_f64(),
            RUNTIME_BUDGET.as_secs(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; failing: {}", bad.join(", "))
            }
        ),
    )
}

fn feasibility_audit(runs: &[Result<DeskRun, Error>]) -> Outcome {
    let ok: Vec<&DeskRun> = runs
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .filter(|r| r.converged)
        .collect();
    let worst_power = ok.iter().map(|r| -r.power_margin).fold(f64::NEG_INFINITY, f64::max);
    let worst_qos = ok.iter().map(|r| -r.qos_margin).fold(f64::NEG_INFINITY, f64::max);
    verdict(
        ok.len() == runs.len() && worst_power <= AUDIT_TOL && worst_qos <= AUDIT_TOL,
        format!(
            "{} converged solutions at Γ̄ = 1: max power excess {worst_power:.2e} W, \
             max QoS shortfall {worst_qos:.2e} (tol {AUDIT_TOL:.0e})",
            ok.len()
        ),
    )
}

fn charnes_cooper(runs: &[Result<DeskRun, Error>]) -> Outcome {
    let ok: Vec<&DeskRun> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let worst_step = ok.iter().map(|r| r.step_violation).fold(f64::NEG_INFINITY, f64::max);
    let worst_gap = ok.iter().map(|r| r.cc_gap).fold(f64::NEG_INFINITY, f64::max);
    verdict(
        ok.len() == runs.len() && worst_step <= CC_TOL && worst_gap <= CC_TOL,
        format!(
            "max de-transformed step violation {worst_step:.2e}, \
             max |1/φ - (‖W‖² + P_0)|·φ = {worst_gap:.2e} (tol {CC_TOL:.0e})"
        ),
    )
}

fn scalar_oracle() -> Outcome {
    let mut r = rng(6);
    let (pt, p0, noise) = (DESK_PT, DESK_P0, 1.0);
    let mut worst: f64 = 0.0;
    let mut errors = Vec::new();
    for i in 0..20 {
        // gains spread over three decades
        let mut h = cgauss(&mut r);
        h *= 10f64.powf(r.random_range(-1.5..1.5)) / h.norm();
        let g = h.norm_sqr();
        let ch = ChannelMatrix::from_entries(CMat::from_rows(1, 1, vec![h]).unwrap(), 1).unwrap();
        let params = SystemParams::new(1, 1, 1, pt, p0);
        let grid = (0..GRID_POINTS)
            .map(|k| {
                let p = pt * k as f64 / (GRID_POINTS - 1) as f64;
                (1.0 + p * g / noise).log2() / (p + p0)
            })
            .fold(0.0, f64::max);
        match optimize(&ch, &params) {
            Ok(sol) => worst = worst.max((sol.report.ee - grid).abs() / grid),
            Err(e) => errors.push(format!("channel {i}: {e}")),
        }
    }
    verdict(
        errors.is_empty() && worst <= SCALAR_EE_REL,
        format!(
            "M = N = Q = 1, 20 channels: max relative EE gap to a {GRID_POINTS}-point grid = {worst:.2e} \
             (tol {SCALAR_EE_REL}){}",
            if errors.is_empty() {
                String::new()
            } else {
                format!("; {}", errors.join("; "))
            }
        ),
    )
}

fn infeasibility_detection() -> Outcome {
    let mut r = rng(7);
    let (pt, p0, noise) = (DESK_PT, DESK_P0, 1.0);
    let mut detected = 0;
    let mut full_restoration = 0;
    let mut other = Vec::new();
    for i in 0..20 {
        let m = 1 + i % 4;
        let h = cvec(&mut r, m);
        let cap = h.iter().map(|v| v.norm_sqr()).sum::<f64>() * pt / noise;
        let ch = ChannelMatrix::from_entries(CMat::from_rows(1, m, h).unwrap(), 1).unwrap();
        let params = SystemParams::new(m, 1, 1, pt, p0).with_thresholds(1.5 * cap);
        match optimize(&ch, &params) {
            Err(Error::InfeasibleProblem { iterations, trace, .. }) => {
                detected += 1;
                // the restoration phase itself ran to exhaustion
                if iterations == params.max_feas_iters && trace.records.len() == iterations {
                    full_restoration += 1;
                }
            }
            Err(e) => other.push(format!("channel {i}: {e}")),
            Ok(_) => other.push(format!("channel {i}: solved")),
        }
    }
    verdict(
        detected == 20,
        format!(
            "Γ̄ = 1.5·‖h‖²P_T/σ²: {detected}/20 raise InfeasibleProblem \
             ({full_restoration} after the full restoration budget){}",
            if other.is_empty() {
                String::new()
            } else {
                format!("; {}", other.join("; "))
            }
        ),
    )
}

fn shape_config(seeds: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(Preset::Desk);
    assert_eq!(c.geometry.num_beams(), 8);
    assert_eq!(c.users_per_beam, 2);
    c.seeds = (0..seeds).collect();
    c.params.sinr_thresholds = vec![0.0; 8];
    c.workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    c
}

fn mean_ee(rows: &[ResultRow], alg: Algorithm, key: impl Fn(&ResultRow) -> f64, xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.algorithm == alg.name() && key(r) == x)
                .map(|r| r.ee)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect()
}

fn fmt_seq(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

fn nonincreasing(v: &[f64], tol: f64) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] + tol)
}

fn interior_max(v: &[f64]) -> bool {
    let k = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    k > 0 && k + 1 < v.len()
}

fn curve_shapes() -> Vec<(String, Outcome)> {
    let mut out = Vec::new();

    let config = shape_config(POWER_SWEEP_SEEDS);
    let xs = config.sweep_p_t_dbw.clone();
    let rows = experiment::run_power_sweep(&config);
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    let sca = mean_ee(&rows, Algorithm::EeSca, |r| r.p_t_dbw, &xs);
    let rising = sca.windows(2).all(|w| w[1] >= w[0] - SHAPE_TOL);
    out.push((
        "8a EE-SCA nondecreasing in P_T".into(),
        verdict(
            failed == 0 && rising,
            format!(
                "{POWER_SWEEP_SEEDS} seeds, P_T = {:?} dBW: {} ({failed} failed points)",
                xs,
                fmt_seq(&sca)
            ),
        ),
    ));
    for alg in [Algorithm::Rzf, Algorithm::Mmse] {
        let m = mean_ee(&rows, alg, |r| r.p_t_dbw, &xs);
        out.push((
            format!("8b {alg} rise-then-fall in P_T"),
            verdict(
                failed == 0 && interior_max(&m),
                format!("{POWER_SWEEP_SEEDS} seeds: {}", fmt_seq(&m)),
            ),
        ));
    }

    let config = shape_config(USER_SWEEP_SEEDS);
    let qs: Vec<f64> = config.sweep_users_per_beam.iter().map(|&q| q as f64).collect();
    let rows = experiment::run_user_sweep(&config);
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    for alg in Algorithm::ALL {
        let m = mean_ee(&rows, alg, |r| r.q as f64, &qs);
        out.push((
            format!("8c {alg} non-increasing in Q"),
            verdict(
                failed == 0 && nonincreasing(&m, SHAPE_TOL),
                format!(
                    "{USER_SWEEP_SEEDS} seeds, Q = {qs:?}: {} ({failed} failed points)",
                    fmt_seq(&m)
                ),
            ),
        ));
    }
    out
}

fn parameter_fidelity() -> Outcome {
    let c = ExperimentConfig::preset(Preset::Paper16);
    let g = &c.geometry;
    let checks = [
        ("altitude 35786 km", g.satellite_altitude_m == 35_786_000.0),
        ("carrier 20 GHz", g.carrier_frequency_hz == 20e9),
        ("bandwidth 500 MHz", g.bandwidth_hz == 500e6),
        (
            "user gain 41.7 dBi",
            (g.receive_gain - 10f64.powf(4.17)).abs() <= 1e-9 * g.receive_gain,
        ),
        ("κ = 1.38e-23 J/K", g.boltzmann == 1.38e-23),
        ("M = N = 16", g.num_beams() == 16 && g.num_feeds() == 16),
        ("Q = 2", c.users_per_beam == 2),
        ("P_0 = 10 dBW", (c.params.static_power_w - 10.0).abs() <= 1e-12),
        ("P_T = 14 dBW", c.params.max_power_dbw == 14.0),
        (
            "α = 1",
            c.params.weights.is_none() && c.system_params(1.0, 2).weights == vec![1.0; 16],
        ),
        ("σ² = 1", c.params.noise_power == 1.0),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    verdict(
        failed.is_empty(),
        format!(
            "paper16 preset: {}/{} fields match{}",
            checks.len() - failed.len(),
            checks.len(),
            if failed.is_empty() {
                String::new()
            } else {
                format!("; mismatched: {}", failed.join(", "))
            }
        ),
    )
}

#[allow(clippy::needless_range_loop)]
fn baseline_sanity() -> Outcome {
    let mut worst_power: f64 = 0.0;
    for seed in 0..20 {
        let h = desk_channel(seed);
        let params = desk_params(&h);
        for tag in BaselineTag::ALL {
            let w = baseline_precoder(&h, &params, BaselineKind::standard(tag, &params)).unwrap();
            worst_power = worst_power.max((total_power(&w) - params.max_power).abs() / params.max_power);
        }
    }

    // RZF on a 2×2 channel against a cofactor inverse
    let mut r = rng(10);
    let mut worst_entry: f64 = 0.0;
    for _ in 0..20 {
        let rows = cvec(&mut r, 4);
        let ch = ChannelMatrix::from_entries(CMat::from_rows(2, 2, rows.clone()).unwrap(), 1).unwrap();
        let params = SystemParams::new(2, 2, 1, DESK_PT, DESK_P0);
        let kind = BaselineKind::standard(BaselineTag::Rzf, &params);
        let w = baseline_precoder(&ch, &params, kind).unwrap();

        let (h00, h01, h10, h11) = (rows[0], rows[1], rows[2], rows[3]);
        let rho = kind.regularization;
        // G = H Hᴴ + ρI
        let g00 = h00.norm_sqr() + h01.norm_sqr() + rho;
        let g11 = h10.norm_sqr() + h11.norm_sqr() + rho;
        let g01 = h00 * h10.conj() + h01 * h11.conj();
        let g10 = g01.conj();
        let det = g00 * g11 - g01 * g10;
        let inv = [[g11 / det, -g01 / det], [-g10 / det, g00 / det]];
        // Hᴴ G⁻¹
        let hh = [[h00.conj(), h10.conj()], [h01.conj(), h11.conj()]];
        let mut raw = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                raw[i][j] = hh[i][0] * inv[0][j] + hh[i][1] * inv[1][j];
            }
        }
        let fro: f64 = raw.iter().flatten().map(|v| v.norm_sqr()).sum();
        let s = (DESK_PT / fro).sqrt();
        for i in 0..2 {
            for j in 0..2 {
                worst_entry = worst_entry.max((w.matrix()[(i, j)] - raw[i][j] * s).norm());
            }
        }
    }
    verdict(
        worst_power <= BASELINE_POWER_TOL && worst_entry <= COFACTOR_TOL,
        format!(
            "max relative |‖W‖² - P_T| = {worst_power:.2e} (tol {BASELINE_POWER_TOL:.0e}); \
             RZF 2×2 max entry error vs cofactor inverse = {worst_entry:.2e} (tol {COFACTOR_TOL:.0e})"
        ),
    )
}

fn main() {
    let mut results: Vec<(String, Outcome)> = Vec::new();
    let mut report = |name: String, o: Outcome| {
        println!("{} [{name}] {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };
    report("1 Taylor tightness".into(), taylor_tightness());
    report("2 Taylor dominance".into(), taylor_dominance());
    let (runs, elapsed) = desk_suite();
    report("3 SCA ascent".into(), sca_ascent(&runs, elapsed));
    report("4 feasibility audit".into(), feasibility_audit(&runs));
    report("5 Charnes-Cooper consistency".into(), charnes_cooper(&runs));
    report("6 scalar oracle".into(), scalar_oracle());
    report("7 infeasibility detection".into(), infeasibility_detection());
    for (name, o) in curve_shapes() {
        report(name, o);
    }
    report("9 parameter fidelity".into(), parameter_fidelity());
    report("10 baseline sanity".into(), baseline_sanity());

    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
