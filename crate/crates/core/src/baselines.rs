//! Closed-form reference precoders.
//!
//! Multicast beams are reduced to one representative row per beam (the mean
//! of its non-virtual rows), giving an `N×M` matrix `Ĥ` the unicast designs
//! operate on. Every output is scaled to use exactly `P_T`.

use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::linalg::{dot, norm_sq, CMat};
use crate::math;
use crate::metrics::{sinr, total_power, PrecodingMatrix, SystemParams};
use crate::{Error, Result};

/// Points of the MBIM-style power-shaping grid.
pub const MBIM_GRID_POINTS: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaselineTag {
    Rzf,
    Mmse,
    Mbim,
}

impl BaselineTag {
    pub const ALL: [BaselineTag; 3] = [BaselineTag::Rzf, BaselineTag::Mmse, BaselineTag::Mbim];

    pub fn label(self) -> &'static str {
        match self {
            BaselineTag::Rzf => "RZF",
            BaselineTag::Mmse => "MMSE",
            BaselineTag::Mbim => "MBIM-style",
        }
    }
}

impl fmt::Display for BaselineTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineKind {
    pub tag: BaselineTag,
    /// Diagonal loading `ρ` for RZF/MMSE; ignored by MBIM.
    pub regularization: f64,
}

impl BaselineKind {
    /// `ρ = N·σ²/P_T` for the regularized designs.
    pub fn standard(tag: BaselineTag, params: &SystemParams) -> Self {
        let regularization = match tag {
            BaselineTag::Rzf | BaselineTag::Mmse => params.beams as f64 * params.noise_power / params.max_power,
            BaselineTag::Mbim => 0.0,
        };
        Self { tag, regularization }
    }
}

/// `Ĥ`: row `n` is the mean of beam `n`'s non-virtual channel rows.
pub fn representative_rows(h: &ChannelMatrix) -> Result<CMat> {
    let rows = h.beam_average_rows();
    if rows.frobenius_sq() == 0.0 {
        return Err(Error::DegenerateChannel("all representative rows are zero".into()));
    }
    Ok(rows)
}

/// `Ĥᴴ (Ĥ Ĥᴴ + ρ I)⁻¹`, unscaled.
pub fn regularized_inverse(rep: &CMat, regularization: f64) -> Result<CMat> {
    let adj = rep.adjoint();
    let mut gram = rep.matmul(&adj)?;
    for i in 0..gram.rows() {
        gram[(i, i)] += regularization;
    }
    let inv = gram.solve(&CMat::identity(gram.rows()))?;
    adj.matmul(&inv)
}

fn scale_to_budget(mut w: PrecodingMatrix, budget: f64) -> Result<PrecodingMatrix> {
    let p = total_power(&w);
    if !(p > 0.0) {
        return Err(Error::DegenerateChannel("baseline precoder is identically zero".into()));
    }
    w.scale(math::sqrt(budget / p));
    Ok(w)
}

/// Unit-norm directions nulling the other beams' representative rows
/// (matched filter when the null space is empty).
fn block_zf_directions(rep: &CMat) -> Result<Vec<Vec<Complex64>>> {
    let (n_beams, m) = (rep.rows(), rep.cols());
    let mut dirs = Vec::with_capacity(n_beams);
    for n in 0..n_beams {
        let own: Vec<Complex64> = rep.row(n).iter().map(|v| v.conj()).collect();
        let own_norm = math::sqrt(norm_sq(&own));
        if own_norm == 0.0 {
            dirs.push(alloc::vec![Complex64::new(0.0, 0.0); m]);
            continue;
        }
        let others: Vec<Complex64> = (0..n_beams)
            .filter(|&i| i != n)
            .flat_map(|i| rep.row(i).iter().copied())
            .collect();
        let mut d = own.clone();
        if !others.is_empty() {
            let a = CMat::from_rows(n_beams - 1, m, others)?;
            let mut gram = a.matmul(&a.adjoint())?;
            let load = 1e-10 * (0..gram.rows()).map(|i| gram[(i, i)].re).sum::<f64>() / gram.rows() as f64;
            for i in 0..gram.rows() {
                gram[(i, i)] += load;
            }
            // d = (I − Aᴴ(AAᴴ)⁻¹A) ĥᴴ
            let own_col = CMat::from_rows(m, 1, own.clone())?;
            let coeff = gram.solve(&a.matmul(&own_col)?)?;
            let proj = a.adjoint().matmul(&coeff)?;
            for (di, pi) in d.iter_mut().zip(proj.as_slice()) {
                *di -= pi;
            }
        }
        let mut norm = math::sqrt(norm_sq(&d));
        if norm < 1e-9 * own_norm {
            d = own;
            norm = own_norm;
        }
        dirs.push(d.iter().map(|v| v / norm).collect());
    }
    Ok(dirs)
}

/// Two-stage design: block zero-forcing directions, then one power-shaping
/// exponent `τ ∈ [0, 1]` with `p_n ∝ g_n^{−τ}`, where `g_n` is the weakest
/// intra-beam gain `min_q |h_{n,q} d_n|²`. `τ = 0` is equal power and `τ = 1`
/// equalizes the weakest users' received signal. The grid point with the
/// largest worst-user SINR wins.
fn mbim(h: &ChannelMatrix, params: &SystemParams, rep: &CMat) -> Result<PrecodingMatrix> {
    let dirs = block_zf_directions(rep)?;
    let n_beams = h.num_beams();
    let gains: Vec<f64> = (0..n_beams)
        .map(|n| {
            (0..h.users_per_beam())
                .filter(|&q| !h.is_virtual(n, q))
                .map(|q| dot(h.row(n, q), &dirs[n]).norm_sqr())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut best: Option<(f64, PrecodingMatrix)> = None;
    for step in 0..MBIM_GRID_POINTS {
        let tau = step as f64 / (MBIM_GRID_POINTS - 1) as f64;
        let weights: Vec<f64> = gains
            .iter()
            .map(|&g| {
                if g.is_finite() && g > 0.0 {
                    math::powf(g, -tau)
                } else {
                    0.0
                }
            })
            .collect();
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::DegenerateChannel("no beam has a usable direction".into()));
        }
        let columns: Vec<Vec<Complex64>> = dirs
            .iter()
            .zip(&weights)
            .map(|(d, wgt)| {
                let amp = math::sqrt(params.max_power * wgt / sum);
                d.iter().map(|v| v * amp).collect()
            })
            .collect();
        let w = PrecodingMatrix::from_columns(&columns)?;
        let table = sinr(h, &w, params.noise_power)?;
        let worst = h
            .active_users()
            .map(|(n, q)| table.get(n, q))
            .fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|(b, _)| worst > *b) {
            best = Some((worst, w));
        }
    }
    let (_, w) = best.expect("grid is nonempty");
    scale_to_budget(w, params.max_power)
}

pub fn baseline_precoder(h: &ChannelMatrix, params: &SystemParams, kind: BaselineKind) -> Result<PrecodingMatrix> {
    params.check_against(h)?;
    let rep = representative_rows(h)?;
    match kind.tag {
        BaselineTag::Rzf | BaselineTag::Mmse => {
            if !(kind.regularization > 0.0) {
                return Err(Error::InvalidParams("regularization must be positive".into()));
            }
            let w = PrecodingMatrix::new(regularized_inverse(&rep, kind.regularization)?)?;
            scale_to_budget(w, params.max_power)
        }
        BaselineTag::Mbim => mbim(h, params, &rep),
    }
}
