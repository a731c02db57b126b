//! Convex subproblems solved at each successive-approximation step.
//!
//! Complex precoder entries become interleaved real pairs: entry `m` of
//! column `w_n` occupies variables `2(n·M + m)` (real) and `2(n·M + m) + 1`
//! (imaginary). After the `2MN` precoder variables come one `β` and one `γ`
//! per non-virtual user (row order), one rate per beam, and then either the
//! Charnes-Cooper scale `φ` or the slack blocks of the restoration problem.
//! Virtual users get no variables and no constraints.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::cone::{AffineMap, ConeKind, ConeProgram};
use crate::linalg::dot;
use crate::math;
use crate::metrics::{interference, BeamUserTable, PrecodingMatrix, SystemParams};
use crate::{Error, Result};

/// Linearization point `(W^(t), β^(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionPoint {
    w: PrecodingMatrix,
    beta: BeamUserTable,
}

impl ExpansionPoint {
    /// Every `β` entry must be positive and finite.
    pub fn new(w: PrecodingMatrix, beta: BeamUserTable) -> Result<Self> {
        if beta.beams() != w.beams() {
            return Err(Error::DimensionMismatch {
                what: "beta rows vs precoder beams",
                expected: w.beams(),
                found: beta.beams(),
            });
        }
        for n in 0..beta.beams() {
            for q in 0..beta.users_per_beam() {
                let b = beta.get(n, q);
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::ZeroExpansionBeta { beam: n, user: q });
                }
            }
        }
        Ok(Self { w, beta })
    }

    /// Point at `w` with `β_{n,q} = margin·(Σ_{i≠n}|h_{n,q}w_i|² + σ²)`.
    pub fn tight(h: &ChannelMatrix, w: PrecodingMatrix, noise_power: f64, margin: f64) -> Result<Self> {
        let mut beta = BeamUserTable::filled(h.num_beams(), h.users_per_beam(), noise_power);
        for (n, q) in h.active_users() {
            beta.set(n, q, margin * (interference(h, &w, n, q) + noise_power));
        }
        Self::new(w, beta)
    }

    /// Raises each `β_{n,q}` to at least the interference-plus-noise it
    /// bounds at `w`, removing solver-tolerance undershoot.
    pub fn lifted(h: &ChannelMatrix, w: PrecodingMatrix, mut beta: BeamUserTable, noise_power: f64) -> Result<Self> {
        for n in 0..beta.beams() {
            for q in 0..beta.users_per_beam() {
                let floor = if h.is_virtual(n, q) {
                    noise_power
                } else {
                    interference(h, &w, n, q) + noise_power
                };
                if !(beta.get(n, q) >= floor) {
                    beta.set(n, q, floor);
                }
            }
        }
        Self::new(w, beta)
    }

    pub fn w(&self) -> &PrecodingMatrix {
        &self.w
    }

    pub fn beta(&self) -> &BeamUserTable {
        &self.beta
    }

    pub fn into_parts(self) -> (PrecodingMatrix, BeamUserTable) {
        (self.w, self.beta)
    }
}

/// Affine functional `φ^(t)(w, β) = 2·Re{(w^(t))ᴴ hᴴ h w}/β^(t) − (|h w^(t)|/β^(t))²·β`,
/// stored by its coefficients on `Re w`, `Im w` and `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorBound {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub beta: f64,
}

impl TaylorBound {
    pub fn evaluate(&self, w: &[Complex64], beta: f64) -> f64 {
        let lin: f64 = w
            .iter()
            .zip(self.re.iter().zip(&self.im))
            .map(|(v, (a, b))| a * v.re + b * v.im)
            .sum();
        lin + self.beta * beta
    }
}

/// First-order lower bound of `|h w|²/β` around `(w_point, beta_point)`.
pub fn taylor_lower_bound(h: &[Complex64], w_point: &[Complex64], beta_point: f64) -> Result<TaylorBound> {
    if w_point.len() != h.len() {
        return Err(Error::DimensionMismatch {
            what: "expansion column length",
            expected: h.len(),
            found: w_point.len(),
        });
    }
    if !(beta_point > 0.0) {
        return Err(Error::ZeroExpansionBeta { beam: 0, user: 0 });
    }
    let a = dot(h, w_point);
    let scale = 2.0 / beta_point;
    // Re{conj(a)·h_m·w_m} = Re(c_m)·Re(w_m) − Im(c_m)·Im(w_m)
    let (re, im) = h
        .iter()
        .map(|hm| {
            let c = a.conj() * hm;
            (scale * c.re, -scale * c.im)
        })
        .unzip();
    Ok(TaylorBound {
        re,
        im,
        beta: -a.norm_sqr() / (beta_point * beta_point),
    })
}

/// Offsets of the restoration slacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlackLayout {
    /// `ψ₁`, one scalar.
    pub power: usize,
    /// `ψ₂`, one per active user.
    pub taylor: usize,
    /// `ψ₃`, one per active user.
    pub interference: usize,
    /// `ψ₄`, one per beam.
    pub qos: usize,
    /// `ψ₅`, one per beam.
    pub rate: usize,
    pub count: usize,
}

/// Variable indexing shared by both subproblems.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableLayout {
    feeds: usize,
    beams: usize,
    users_per_beam: usize,
    active: Vec<(usize, usize)>,
    beta_offset: usize,
    gamma_offset: usize,
    rate_offset: usize,
    scale: Option<usize>,
    slacks: Option<SlackLayout>,
    total: usize,
}

impl VariableLayout {
    fn base(h: &ChannelMatrix) -> Self {
        let (m, n) = (h.num_feeds(), h.num_beams());
        let active: Vec<_> = h.active_users().collect();
        let beta_offset = 2 * m * n;
        let gamma_offset = beta_offset + active.len();
        let rate_offset = gamma_offset + active.len();
        Self {
            feeds: m,
            beams: n,
            users_per_beam: h.users_per_beam(),
            total: rate_offset + n,
            active,
            beta_offset,
            gamma_offset,
            rate_offset,
            scale: None,
            slacks: None,
        }
    }

    /// Layout of the Charnes-Cooper subproblem: `2MN + 2·|active| + N + 1`.
    pub fn fractional(h: &ChannelMatrix) -> Self {
        let mut l = Self::base(h);
        l.scale = Some(l.total);
        l.total += 1;
        l
    }

    /// Layout of the restoration problem: base variables plus
    /// `1 + 2·|active| + 2N` slacks.
    pub fn restoration(h: &ChannelMatrix) -> Self {
        let mut l = Self::base(h);
        let a = l.active.len();
        let power = l.total;
        let slacks = SlackLayout {
            power,
            taylor: power + 1,
            interference: power + 1 + a,
            qos: power + 1 + 2 * a,
            rate: power + 1 + 2 * a + l.beams,
            count: 1 + 2 * a + 2 * l.beams,
        };
        l.total += slacks.count;
        l.slacks = Some(slacks);
        l
    }

    pub fn variable_count(&self) -> usize {
        self.total
    }

    /// Non-virtual `(beam, user)` pairs; position `j` in this list indexes
    /// the per-user variables.
    pub fn active_users(&self) -> &[(usize, usize)] {
        &self.active
    }

    #[inline]
    pub fn w_re(&self, beam: usize, feed: usize) -> usize {
        2 * (beam * self.feeds + feed)
    }

    #[inline]
    pub fn w_im(&self, beam: usize, feed: usize) -> usize {
        self.w_re(beam, feed) + 1
    }

    #[inline]
    pub fn beta(&self, j: usize) -> usize {
        self.beta_offset + j
    }

    #[inline]
    pub fn gamma(&self, j: usize) -> usize {
        self.gamma_offset + j
    }

    #[inline]
    pub fn rate(&self, beam: usize) -> usize {
        self.rate_offset + beam
    }

    /// Index of `φ` (fractional layout only).
    pub fn scale(&self) -> Option<usize> {
        self.scale
    }

    pub fn slacks(&self) -> Option<SlackLayout> {
        self.slacks
    }

    /// Writes `w` into a variable vector.
    pub fn put_precoder(&self, x: &mut [f64], w: &PrecodingMatrix, factor: f64) {
        for n in 0..self.beams {
            for m in 0..self.feeds {
                let v = w.matrix()[(m, n)] * factor;
                x[self.w_re(n, m)] = v.re;
                x[self.w_im(n, m)] = v.im;
            }
        }
    }

    pub fn precoder(&self, x: &[f64]) -> PrecodingMatrix {
        let mut w = PrecodingMatrix::zeros(self.feeds, self.beams).into_matrix();
        for n in 0..self.beams {
            for m in 0..self.feeds {
                w[(m, n)] = Complex64::new(x[self.w_re(n, m)], x[self.w_im(n, m)]);
            }
        }
        PrecodingMatrix::new(w).unwrap_or_else(|_| PrecodingMatrix::zeros(self.feeds, self.beams))
    }

    /// `β` values as a table, virtual slots set to `fill`.
    pub fn betas(&self, x: &[f64], fill: f64) -> BeamUserTable {
        let mut t = BeamUserTable::filled(self.beams, self.users_per_beam, fill);
        for (j, &(n, q)) in self.active.iter().enumerate() {
            t.set(n, q, x[self.beta(j)]);
        }
        t
    }

    pub fn gammas(&self, x: &[f64]) -> BeamUserTable {
        let mut t = BeamUserTable::filled(self.beams, self.users_per_beam, 0.0);
        for (j, &(n, q)) in self.active.iter().enumerate() {
            t.set(n, q, x[self.gamma(j)]);
        }
        t
    }

    pub fn rates(&self, x: &[f64]) -> Vec<f64> {
        (0..self.beams).map(|n| x[self.rate(n)]).collect()
    }

    /// Largest restoration slack value at `x` (restoration layout only).
    pub fn max_slack(&self, x: &[f64]) -> f64 {
        self.slacks
            .map(|s| x[s.power..s.power + s.count].iter().fold(0.0, |a: f64, &b| a.max(b)))
            .unwrap_or(0.0)
    }

    /// Adds `Re(h·w_i)` and `Im(h·w_i)` (times `factor`) to two rows.
    fn add_product(&self, map: &mut AffineMap, re_row: usize, im_row: usize, h: &[Complex64], beam: usize) {
        for (m, hm) in h.iter().enumerate() {
            let (wr, wi) = (self.w_re(beam, m), self.w_im(beam, m));
            map.add(re_row, wr, hm.re).add(re_row, wi, -hm.im);
            map.add(im_row, wr, hm.im).add(im_row, wi, hm.re);
        }
    }

    fn add_taylor(&self, map: &mut AffineMap, row: usize, bound: &TaylorBound, beam: usize, j: usize) {
        for m in 0..self.feeds {
            map.add(row, self.w_re(beam, m), bound.re[m]);
            map.add(row, self.w_im(beam, m), bound.im[m]);
        }
        map.add(row, self.beta(j), bound.beta);
    }
}

/// A built cone program with the layout needed to read its solution.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub program: ConeProgram,
    pub layout: VariableLayout,
}

fn check_inputs(h: &ChannelMatrix, params: &SystemParams, point: &ExpansionPoint) -> Result<()> {
    params.check_against(h)?;
    let w = point.w();
    if w.feeds() != h.num_feeds() || w.beams() != h.num_beams() {
        return Err(Error::DimensionMismatch {
            what: "expansion point precoder",
            expected: h.num_feeds() * h.num_beams(),
            found: w.feeds() * w.beams(),
        });
    }
    if point.beta().users_per_beam() != h.users_per_beam() {
        return Err(Error::DimensionMismatch {
            what: "expansion point beta columns",
            expected: h.users_per_beam(),
            found: point.beta().users_per_beam(),
        });
    }
    Ok(())
}

fn taylor_bounds(h: &ChannelMatrix, layout: &VariableLayout, point: &ExpansionPoint) -> Result<Vec<TaylorBound>> {
    layout
        .active_users()
        .iter()
        .map(|&(n, q)| {
            taylor_lower_bound(h.row(n, q), &point.w().column(n), point.beta().get(n, q))
                .map_err(|_| Error::ZeroExpansionBeta { beam: n, user: q })
        })
        .collect()
}

fn empty_beams(layout: &VariableLayout) -> Vec<usize> {
    (0..layout.beams)
        .filter(|&n| !layout.active.iter().any(|&(b, _)| b == n))
        .collect()
}

/// Charnes-Cooper form of the SCA step at `point`:
///
/// ```text
/// max  Σ α_n r̄_n
/// s.t. Σ‖w̄_n‖² + φ²P_0 ≤ φ                       (rotated cone)
///      r̄_n ≤ φ·log(1 + γ̄_{n,q}/φ)                 (exponential cone)
///      Σ‖w̄_n‖² ≤ φ²P_T                            (second-order cone)
///      γ̄_{n,q} ≤ φ^(t)(w̄_n, β̄_{n,q})              (linear)
///      φ·β̄_{n,q} ≥ Σ_{i≠n}|h_{n,q}w̄_i|² + φ²σ²    (rotated cone)
///      γ̄_{n,q} ≥ φ·Γ̄_n,  φ ≥ 0,  β̄ ≥ 0           (linear)
/// ```
pub fn build_ee_subproblem(h: &ChannelMatrix, params: &SystemParams, point: &ExpansionPoint) -> Result<Subproblem> {
    check_inputs(h, params, point)?;
    let layout = VariableLayout::fractional(h);
    let phi = layout.scale().expect("fractional layout has a scale variable");
    let mut program = ConeProgram::new(layout.variable_count());
    let (m_feeds, n_beams) = (h.num_feeds(), h.num_beams());
    let ln_base = params.log_base.ln_base();
    let bounds = taylor_bounds(h, &layout, point)?;

    for n in 0..n_beams {
        program.set_objective(layout.rate(n), params.weights[n]);
    }

    // Σ‖w̄‖² + P_0 φ² ≤ φ·1
    let mut map = AffineMap::new(2 + 2 * m_feeds * n_beams + 1);
    map.add(0, phi, 1.0).add_constant(1, 1.0);
    for v in 0..2 * m_feeds * n_beams {
        map.add(2 + v, v, 1.0);
    }
    map.add(2 + 2 * m_feeds * n_beams, phi, math::sqrt(params.static_power));
    program.add(ConeKind::RotatedSecondOrder, map, "power_consumption")?;

    // ‖w̄‖ ≤ √P_T φ
    let mut map = AffineMap::new(1 + 2 * m_feeds * n_beams);
    map.add(0, phi, math::sqrt(params.max_power));
    for v in 0..2 * m_feeds * n_beams {
        map.add(1 + v, v, 1.0);
    }
    program.add(ConeKind::SecondOrder, map, "power_budget")?;

    for (j, &(n, q)) in layout.active_users().iter().enumerate() {
        // (r̄_n ln b, φ, γ̄ + φ) ∈ K_exp
        let mut map = AffineMap::new(3);
        map.add(0, layout.rate(n), ln_base);
        map.add(1, phi, 1.0);
        map.add(2, layout.gamma(j), 1.0).add(2, phi, 1.0);
        program.add(ConeKind::Exponential, map, "rate")?;

        let mut map = AffineMap::new(1);
        layout.add_taylor(&mut map, 0, &bounds[j], n, j);
        map.add(0, layout.gamma(j), -1.0);
        program.add(ConeKind::Nonnegative, map, "taylor")?;

        let row = h.row(n, q);
        let mut map = AffineMap::new(2 + 2 * (n_beams - 1) + 1);
        map.add(0, phi, 1.0).add(1, layout.beta(j), 1.0);
        let mut r = 2;
        for i in (0..n_beams).filter(|&i| i != n) {
            layout.add_product(&mut map, r, r + 1, row, i);
            r += 2;
        }
        map.add(r, phi, math::sqrt(params.noise_power));
        program.add(ConeKind::RotatedSecondOrder, map, "interference")?;

        let mut map = AffineMap::new(1);
        map.add(0, layout.gamma(j), 1.0).add(0, phi, -params.sinr_thresholds[n]);
        program.add(ConeKind::Nonnegative, map, "qos")?;
    }

    let active = layout.active_users().len();
    let empty = empty_beams(&layout);
    let mut map = AffineMap::new(1 + active + empty.len());
    map.add(0, phi, 1.0);
    for j in 0..active {
        map.add(1 + j, layout.beta(j), 1.0);
    }
    // beams without real users carry no rate
    for (e, &n) in empty.iter().enumerate() {
        map.add(1 + active + e, layout.rate(n), -1.0);
    }
    program.add(ConeKind::Nonnegative, map, "sign")?;

    Ok(Subproblem { program, layout })
}

/// Slack-penalized restoration problem at `point`:
///
/// ```text
/// max  Σ α_n r_n − λ(ψ₁ + Σψ₂ + Σψ₃ + Σψ₄ + Σψ₅)
/// s.t. Σ‖w_n‖² ≤ P_T + ψ₁
///      γ_{n,q} ≤ φ^(t)(w_n, β_{n,q}) + ψ₂_{n,q}
///      Σ_{i≠n}|h_{n,q}w_i|² + σ² ≤ β_{n,q} + ψ₃_{n,q}
///      Γ̄_n ≤ γ_{n,q} + ψ₄_n
///      r_n ≤ log(1 + γ_{n,q}) + ψ₅_n
///      ψ ≥ 0
/// ```
pub fn build_feasibility_subproblem(
    h: &ChannelMatrix,
    params: &SystemParams,
    point: &ExpansionPoint,
) -> Result<Subproblem> {
    check_inputs(h, params, point)?;
    let layout = VariableLayout::restoration(h);
    let s = layout.slacks().expect("restoration layout has slacks");
    let mut program = ConeProgram::new(layout.variable_count());
    let (m_feeds, n_beams) = (h.num_feeds(), h.num_beams());
    let ln_base = params.log_base.ln_base();
    let bounds = taylor_bounds(h, &layout, point)?;

    for n in 0..n_beams {
        program.set_objective(layout.rate(n), params.weights[n]);
    }
    for v in s.power..s.power + s.count {
        program.set_objective(v, -params.penalty);
    }

    // ‖w‖² ≤ (P_T + ψ₁)·1
    let mut map = AffineMap::new(2 + 2 * m_feeds * n_beams);
    map.add(0, s.power, 1.0)
        .add_constant(0, params.max_power)
        .add_constant(1, 1.0);
    for v in 0..2 * m_feeds * n_beams {
        map.add(2 + v, v, 1.0);
    }
    program.add(ConeKind::RotatedSecondOrder, map, "power_budget")?;

    for (j, &(n, q)) in layout.active_users().iter().enumerate() {
        let mut map = AffineMap::new(1);
        layout.add_taylor(&mut map, 0, &bounds[j], n, j);
        map.add(0, s.taylor + j, 1.0).add(0, layout.gamma(j), -1.0);
        program.add(ConeKind::Nonnegative, map, "taylor")?;

        // Σ_{i≠n}|h w_i|² ≤ (β + ψ₃ − σ²)·1
        let row = h.row(n, q);
        let mut map = AffineMap::new(2 + 2 * (n_beams - 1));
        map.add(0, layout.beta(j), 1.0)
            .add(0, s.interference + j, 1.0)
            .add_constant(0, -params.noise_power)
            .add_constant(1, 1.0);
        let mut r = 2;
        for i in (0..n_beams).filter(|&i| i != n) {
            layout.add_product(&mut map, r, r + 1, row, i);
            r += 2;
        }
        program.add(ConeKind::RotatedSecondOrder, map, "interference")?;

        let mut map = AffineMap::new(1);
        map.add(0, layout.gamma(j), 1.0)
            .add(0, s.qos + n, 1.0)
            .add_constant(0, -params.sinr_thresholds[n]);
        program.add(ConeKind::Nonnegative, map, "qos")?;

        // ((r − ψ₅) ln b, 1, 1 + γ) ∈ K_exp
        let mut map = AffineMap::new(3);
        map.add(0, layout.rate(n), ln_base).add(0, s.rate + n, -ln_base);
        map.add_constant(1, 1.0);
        map.add(2, layout.gamma(j), 1.0).add_constant(2, 1.0);
        program.add(ConeKind::Exponential, map, "rate")?;
    }

    let empty = empty_beams(&layout);
    let active = layout.active_users().len();
    let mut map = AffineMap::new(s.count + active + empty.len());
    for v in 0..s.count {
        map.add(v, s.power + v, 1.0);
    }
    for j in 0..active {
        map.add(s.count + j, layout.beta(j), 1.0);
    }
    for (e, &n) in empty.iter().enumerate() {
        map.add(s.count + active + e, layout.rate(n), -1.0);
    }
    program.add(ConeKind::Nonnegative, map, "sign")?;

    Ok(Subproblem { program, layout })
}
