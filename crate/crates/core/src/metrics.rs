//! Multicast SINR, worst-user rates, energy efficiency and constraint audits.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::linalg::{dot, CMat};
use crate::math;
use crate::{Error, Result};

/// Tolerance used by [`energy_efficiency`] for its feasibility flags.
pub const AUDIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBase {
    /// Rates in bit/s/Hz.
    Two,
    /// Rates in nat/s/Hz.
    E,
}

impl LogBase {
    /// `ln(base)`; a rate in this base is `ln(1+Γ) / ln(base)`.
    pub fn ln_base(self) -> f64 {
        match self {
            LogBase::Two => core::f64::consts::LN_2,
            LogBase::E => 1.0,
        }
    }

    pub fn rate(self, sinr: f64) -> f64 {
        math::ln_1p(sinr) / self.ln_base()
    }
}

/// Scenario scalars and algorithm settings. All powers are in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Feeds `M`.
    pub feeds: usize,
    /// Beams `N`.
    pub beams: usize,
    /// Users per beam `Q`.
    pub users_per_beam: usize,
    pub max_power: f64,
    pub static_power: f64,
    pub noise_power: f64,
    pub weights: Vec<f64>,
    /// Linear SINR thresholds, one per beam.
    pub sinr_thresholds: Vec<f64>,
    /// Stop threshold on the change of the weighted scaled rate.
    pub tolerance: f64,
    pub penalty: f64,
    pub max_sca_iters: usize,
    pub max_feas_iters: usize,
    pub slack_tolerance: f64,
    pub log_base: LogBase,
}

impl SystemParams {
    /// Unit weights, zero thresholds, `σ² = 1`, `ξ = 1e-3`, `λ = 100`.
    pub fn new(feeds: usize, beams: usize, users_per_beam: usize, max_power: f64, static_power: f64) -> Self {
        Self {
            feeds,
            beams,
            users_per_beam,
            max_power,
            static_power,
            noise_power: 1.0,
            weights: vec![1.0; beams],
            sinr_thresholds: vec![0.0; beams],
            tolerance: 1e-3,
            penalty: 100.0,
            max_sca_iters: 50,
            max_feas_iters: 30,
            slack_tolerance: 1e-6,
            log_base: LogBase::Two,
        }
    }

    /// Parameters sized to match `channel`.
    pub fn for_channel(channel: &ChannelMatrix, max_power: f64, static_power: f64) -> Self {
        Self::new(
            channel.num_feeds(),
            channel.num_beams(),
            channel.users_per_beam(),
            max_power,
            static_power,
        )
    }

    pub fn with_thresholds(mut self, threshold: f64) -> Self {
        self.sinr_thresholds = vec![threshold; self.beams];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.feeds == 0 || self.beams == 0 || self.users_per_beam == 0 {
            return Err(Error::InvalidParams("M, N and Q must be positive".into()));
        }
        let positive = [
            ("P_T", self.max_power),
            ("P_0", self.static_power),
            ("noise power", self.noise_power),
            ("stop tolerance", self.tolerance),
            ("penalty", self.penalty),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.slack_tolerance >= 0.0) {
            return Err(Error::InvalidParams("slack tolerance must be nonnegative".into()));
        }
        if self.max_sca_iters == 0 || self.max_feas_iters == 0 {
            return Err(Error::InvalidParams("iteration limits must be positive".into()));
        }
        for (name, v) in [("weights", &self.weights), ("SINR thresholds", &self.sinr_thresholds)] {
            if v.len() != self.beams {
                return Err(Error::DimensionMismatch {
                    what: name,
                    expected: self.beams,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(Error::InvalidParams(format!("{name} must be nonnegative and finite")));
            }
        }
        Ok(())
    }

    /// Validates and checks dimensions against `channel`.
    pub fn check_against(&self, channel: &ChannelMatrix) -> Result<()> {
        self.validate()?;
        for (what, expected, found) in [
            ("feeds", self.feeds, channel.num_feeds()),
            ("beams", self.beams, channel.num_beams()),
            ("users per beam", self.users_per_beam, channel.users_per_beam()),
        ] {
            if expected != found {
                return Err(Error::DimensionMismatch { what, expected, found });
            }
        }
        Ok(())
    }
}

/// Complex `M×N` precoder; column `n` is `w_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix {
    matrix: CMat,
}

impl PrecodingMatrix {
    pub fn new(matrix: CMat) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::InvalidParams("precoder entries must be finite".into()));
        }
        Ok(Self { matrix })
    }

    pub fn zeros(feeds: usize, beams: usize) -> Self {
        Self {
            matrix: CMat::zeros(feeds, beams),
        }
    }

    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let beams = columns.len();
        let feeds = columns.first().map_or(0, Vec::len);
        let mut matrix = CMat::zeros(feeds, beams);
        for (n, col) in columns.iter().enumerate() {
            if col.len() != feeds {
                return Err(Error::DimensionMismatch {
                    what: "precoder column length",
                    expected: feeds,
                    found: col.len(),
                });
            }
            matrix.set_column(n, col);
        }
        Self::new(matrix)
    }

    pub fn feeds(&self) -> usize {
        self.matrix.rows()
    }

    pub fn beams(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn column(&self, n: usize) -> Vec<Complex64> {
        self.matrix.column(n)
    }

    pub fn scale(&mut self, s: f64) {
        self.matrix.scale(s);
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }
}

/// `Σ_n ‖w_n‖²`.
pub fn total_power(w: &PrecodingMatrix) -> f64 {
    w.matrix.frobenius_sq()
}

/// `N×Q` table indexed `(beam, user)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamUserTable {
    beams: usize,
    users_per_beam: usize,
    values: Vec<f64>,
}

impl BeamUserTable {
    pub fn filled(beams: usize, users_per_beam: usize, value: f64) -> Self {
        Self {
            beams,
            users_per_beam,
            values: vec![value; beams * users_per_beam],
        }
    }

    pub fn from_values(beams: usize, users_per_beam: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != beams * users_per_beam {
            return Err(Error::DimensionMismatch {
                what: "beam/user table",
                expected: beams * users_per_beam,
                found: values.len(),
            });
        }
        Ok(Self {
            beams,
            users_per_beam,
            values,
        })
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn users_per_beam(&self) -> usize {
        self.users_per_beam
    }

    #[inline]
    pub fn get(&self, beam: usize, user: usize) -> f64 {
        self.values[beam * self.users_per_beam + user]
    }

    #[inline]
    pub fn set(&mut self, beam: usize, user: usize, v: f64) {
        self.values[beam * self.users_per_beam + user] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_dims(h: &ChannelMatrix, w: &PrecodingMatrix) -> Result<()> {
    if h.num_feeds() != w.feeds() {
        return Err(Error::DimensionMismatch {
            what: "precoder rows vs channel feeds",
            expected: h.num_feeds(),
            found: w.feeds(),
        });
    }
    if h.num_beams() != w.beams() {
        return Err(Error::DimensionMismatch {
            what: "precoder columns vs channel beams",
            expected: h.num_beams(),
            found: w.beams(),
        });
    }
    Ok(())
}

/// Received powers `|h_{n,q} w_i|²` for every user, as a `K×N` matrix.
pub(crate) fn received_powers(h: &ChannelMatrix, w: &PrecodingMatrix) -> Vec<Vec<f64>> {
    let columns: Vec<Vec<Complex64>> = (0..w.beams()).map(|i| w.column(i)).collect();
    (0..h.num_users())
        .map(|k| {
            let row = h.entries().row(k);
            columns.iter().map(|col| dot(row, col).norm_sqr()).collect()
        })
        .collect()
}

/// `Σ_{i≠n} |h_{n,q} w_i|²` for user `(n, q)`.
pub fn interference(h: &ChannelMatrix, w: &PrecodingMatrix, beam: usize, user: usize) -> f64 {
    let row = h.row(beam, user);
    (0..w.beams())
        .filter(|&i| i != beam)
        .map(|i| dot(row, &w.column(i)).norm_sqr())
        .sum()
}

/// `Γ_{n,q} = |h_{n,q}w_n|² / (Σ_{i≠n}|h_{n,q}w_i|² + σ²)`.
///
/// Virtual users are reported as zero.
pub fn sinr(h: &ChannelMatrix, w: &PrecodingMatrix, noise_power: f64) -> Result<BeamUserTable> {
    check_dims(h, w)?;
    if !(noise_power > 0.0) {
        return Err(Error::InvalidParams("noise power must be positive".into()));
    }
    let q_per = h.users_per_beam();
    let powers = received_powers(h, w);
    let mut table = BeamUserTable::filled(h.num_beams(), q_per, 0.0);
    for (k, p) in powers.iter().enumerate() {
        if h.virtual_mask()[k] {
            continue;
        }
        let n = h.beam_of_row(k);
        let signal = p[n];
        let interference: f64 = p.iter().enumerate().filter(|(i, _)| *i != n).map(|(_, v)| v).sum();
        table.set(n, k % q_per, signal / (interference + noise_power));
    }
    Ok(table)
}

/// Objective value and constraint audit of a precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub sinr: BeamUserTable,
    /// `min_q log(1+Γ_{n,q})` over non-virtual users; zero for beams
    /// without real users.
    pub worst_rate: Vec<f64>,
    pub weighted_sum_rate: f64,
    pub total_power: f64,
    pub ee: f64,
    /// `P_T - Σ‖w_n‖²`.
    pub power_margin: f64,
    /// `Γ_{n,q} - Γ̄_n`; `NaN` for virtual users.
    pub qos_margins: BeamUserTable,
    pub power_feasible: bool,
    pub qos_feasible: bool,
    /// Beams whose users are all virtual.
    pub empty_beams: Vec<usize>,
    pub tolerance: f64,
}

impl EvaluationReport {
    /// Smallest QoS margin over non-virtual users (`+∞` if there are none).
    pub fn min_qos_margin(&self) -> f64 {
        self.qos_margins
            .values()
            .iter()
            .filter(|v| !v.is_nan())
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

/// Evaluates the energy-efficiency objective with feasibility flags at
/// [`AUDIT_TOLERANCE`].
pub fn energy_efficiency(h: &ChannelMatrix, w: &PrecodingMatrix, params: &SystemParams) -> Result<EvaluationReport> {
    evaluate_with_tolerance(h, w, params, AUDIT_TOLERANCE)
}

/// As [`energy_efficiency`] with an explicit feasibility tolerance.
#[allow(clippy::needless_range_loop)]
pub fn evaluate_with_tolerance(
    h: &ChannelMatrix,
    w: &PrecodingMatrix,
    params: &SystemParams,
    tolerance: f64,
) -> Result<EvaluationReport> {
    params.check_against(h)?;
    let sinr = sinr(h, w, params.noise_power)?;
    let (n_beams, q_per) = (h.num_beams(), h.users_per_beam());
    let mut worst_rate = vec![0.0; n_beams];
    let mut qos_margins = BeamUserTable::filled(n_beams, q_per, f64::NAN);
    let mut empty_beams = Vec::new();
    let mut qos_feasible = true;
    for n in 0..n_beams {
        let mut worst = f64::INFINITY;
        for q in 0..q_per {
            if h.is_virtual(n, q) {
                continue;
            }
            let g = sinr.get(n, q);
            worst = worst.min(params.log_base.rate(g));
            let margin = g - params.sinr_thresholds[n];
            qos_margins.set(n, q, margin);
            if margin < -tolerance {
                qos_feasible = false;
            }
        }
        if worst.is_infinite() {
            empty_beams.push(n);
            worst = 0.0;
        }
        worst_rate[n] = worst;
    }
    let weighted_sum_rate: f64 = worst_rate.iter().zip(&params.weights).map(|(r, a)| r * a).sum();
    let power = total_power(w);
    let power_margin = params.max_power - power;
    Ok(EvaluationReport {
        sinr,
        worst_rate,
        weighted_sum_rate,
        total_power: power,
        ee: weighted_sum_rate / (power + params.static_power),
        power_margin,
        qos_margins,
        power_feasible: power_margin >= -tolerance,
        qos_feasible,
        empty_beams,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single() -> (ChannelMatrix, PrecodingMatrix) {
        let h = ChannelMatrix::from_entries(CMat::from_rows(1, 1, vec![c(0.6, 0.8)]).unwrap(), 1).unwrap();
        let w = PrecodingMatrix::new(CMat::from_rows(1, 1, vec![c(1.0, 0.0)]).unwrap()).unwrap();
        (h, w)
    }

    #[test]
    fn single_beam_reduces_to_snr() {
        let (h, w) = single();
        let s = sinr(&h, &w, 1.0).unwrap();
        assert!((s.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_precoder_has_zero_sinr_and_ee() {
        let (h, _) = single();
        let w = PrecodingMatrix::zeros(1, 1);
        let p = SystemParams::new(1, 1, 1, 10.0, 10.0);
        let r = energy_efficiency(&h, &w, &p).unwrap();
        assert_eq!(r.sinr.get(0, 0), 0.0);
        assert_eq!(r.ee, 0.0);
        assert_eq!(total_power(&w), 0.0);
    }

    #[test]
    fn ee_arithmetic_for_unit_snr() {
        let (h, w) = single();
        let p = SystemParams::new(1, 1, 1, 10.0, 10.0);
        let r = energy_efficiency(&h, &w, &p).unwrap();
        assert!((r.ee - 1.0 / 11.0).abs() < 1e-15);
        assert!((total_power(&w) - 1.0).abs() < 1e-15);
        assert!(r.power_feasible && r.qos_feasible);
    }

    #[test]
    fn natural_log_rescales_rates() {
        let (h, w) = single();
        let mut p = SystemParams::new(1, 1, 1, 10.0, 10.0);
        p.log_base = LogBase::E;
        let r = energy_efficiency(&h, &w, &p).unwrap();
        assert!((r.ee - core::f64::consts::LN_2 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn audits_flag_violations() {
        let (h, mut w) = single();
        w.scale(4.0);
        let p = SystemParams::new(1, 1, 1, 10.0, 10.0).with_thresholds(100.0);
        let r = energy_efficiency(&h, &w, &p).unwrap();
        assert!(!r.power_feasible);
        assert!(!r.qos_feasible);
        assert!((r.power_margin + 6.0).abs() < 1e-12);
    }

    #[test]
    fn virtual_users_are_excluded_from_min_and_qos() {
        let entries = CMat::from_rows(2, 1, vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let h = ChannelMatrix::new(entries, 2, vec![false, true]).unwrap();
        let w = PrecodingMatrix::new(CMat::from_rows(1, 1, vec![c(1.0, 0.0)]).unwrap()).unwrap();
        let p = SystemParams::new(1, 1, 2, 10.0, 10.0).with_thresholds(0.5);
        let r = energy_efficiency(&h, &w, &p).unwrap();
        assert!((r.worst_rate[0] - 1.0).abs() < 1e-15);
        assert!(r.qos_feasible);
        assert!(r.qos_margins.get(0, 1).is_nan());
    }

    #[test]
    fn all_virtual_beam_contributes_zero_and_is_flagged() {
        let entries = CMat::from_rows(2, 2, vec![c(1.0, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let h = ChannelMatrix::new(entries, 1, vec![false, true]).unwrap();
        let w = PrecodingMatrix::new(CMat::identity(2)).unwrap();
        let p = SystemParams::new(2, 2, 1, 10.0, 10.0);
        let r = energy_efficiency(&h, &w, &p).unwrap();
        assert_eq!(r.empty_beams, vec![1]);
        assert_eq!(r.worst_rate[1], 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (h, _) = single();
        let w = PrecodingMatrix::zeros(2, 1);
        assert!(matches!(sinr(&h, &w, 1.0), Err(Error::DimensionMismatch { .. })));
    }

    fn arb_instance() -> impl Strategy<Value = (ChannelMatrix, PrecodingMatrix)> {
        (1usize..4, 1usize..4, 1usize..3).prop_flat_map(|(m, n, q)| {
            let k = n * q;
            (
                proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), k * m),
                proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), m * n),
            )
                .prop_map(move |(hv, wv)| {
                    let h = CMat::from_rows(k, m, hv.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap();
                    let w = CMat::from_rows(m, n, wv.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap();
                    (
                        ChannelMatrix::from_entries(h, q).unwrap(),
                        PrecodingMatrix::new(w).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn sinr_is_invariant_to_column_phase((h, w) in arb_instance(), theta in 0.0f64..core::f64::consts::TAU, col in 0usize..3) {
            let col = col % w.beams();
            let mut rotated = w.matrix().clone();
            let rot = Complex64::new(libm::cos(theta), libm::sin(theta));
            for r in 0..rotated.rows() {
                rotated[(r, col)] *= rot;
            }
            let a = sinr(&h, &w, 1.0).unwrap();
            let b = sinr(&h, &PrecodingMatrix::new(rotated).unwrap(), 1.0).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }

        #[test]
        fn ee_denominator_and_p0_monotonicity((h, w) in arb_instance(), p0 in 0.1f64..50.0) {
            let p = SystemParams::for_channel(&h, 10.0, p0);
            let r = energy_efficiency(&h, &w, &p).unwrap();
            prop_assert!(r.total_power + p.static_power >= p.static_power);
            let mut p2 = p.clone();
            p2.static_power = p0 * 1.5;
            let r2 = energy_efficiency(&h, &w, &p2).unwrap();
            if r.weighted_sum_rate > 0.0 {
                prop_assert!(r2.ee < r.ee);
            }
        }

        #[test]
        fn qos_flag_implies_thresholds_met((h, w) in arb_instance(), th in 0.0f64..2.0) {
            let p = SystemParams::for_channel(&h, 10.0, 1.0).with_thresholds(th);
            let r = evaluate_with_tolerance(&h, &w, &p, 1e-9).unwrap();
            if r.qos_feasible {
                for n in 0..h.num_beams() {
                    for q in 0..h.users_per_beam() {
                        prop_assert!(r.sinr.get(n, q) >= th - 1e-9);
                    }
                }
            }
        }

        #[test]
        fn scaling_weights_scales_ee((h, w) in arb_instance(), s in 0.1f64..10.0) {
            let p = SystemParams::for_channel(&h, 10.0, 1.0);
            let mut ps = p.clone();
            ps.weights.iter_mut().for_each(|a| *a *= s);
            let a = energy_efficiency(&h, &w, &p).unwrap().ee;
            let b = energy_efficiency(&h, &w, &ps).unwrap().ee;
            prop_assert!((b - s * a).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
