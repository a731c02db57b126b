//! Multibeam downlink channels `H = Φ·C`.
//!
//! `C` holds the real link coefficients from geometry and the feed pattern,
//! `Φ` is a diagonal matrix of per-user random phases. Rows are ordered beam
//! by beam: row `n·Q + q` is user `q` of beam `n` (zero-based).

mod geometry;
mod pattern;

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::CMat;
use crate::math;
use crate::{Error, Result};

pub use geometry::{
    ground_point_at_view, hexagonal_offsets, off_axis_angle, slant_range, GroundPoint, EARTH_RADIUS_M, SPEED_OF_LIGHT,
};
pub use pattern::{beam_gain, normalized_gain, LinkConstants, HALF_POWER_ARGUMENT};

/// Stream offset separating the phase draws from the position draws, so a
/// layout seed and a phase seed that coincide still give independent values.
const PHASE_STREAM_BASE: u64 = 1 << 32;

/// Satellite, beam and link-budget description of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub satellite_altitude_m: f64,
    /// One ground point per beam; users of beam `n` are placed around
    /// `beam_centers[n]`.
    pub beam_centers: Vec<GroundPoint>,
    /// Boresight ground point of each of the `M` feeds.
    pub feed_boresights: Vec<GroundPoint>,
    pub coverage_radius_m: f64,
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    /// User terminal gain `G_R`, linear.
    pub receive_gain: f64,
    /// Peak feed gain, linear. `G_{k,m}` equals this on the feed boresight.
    pub feed_peak_gain: f64,
    pub noise_temperature_k: f64,
    pub boltzmann: f64,
    pub beam_halfwidth_3db_rad: f64,
    /// Seed for user placement.
    pub rng_seed: u64,
}

impl GeometryConfig {
    /// Geostationary Ka-band scenario with `beams` feeds/beams on a
    /// hexagonal lattice around nadir.
    ///
    /// Adjacent beam centres are one 3 dB beamwidth apart and the coverage
    /// radius is the lattice circumradius, so coverage disks tile the area.
    pub fn ka_band_geo(beams: usize) -> Self {
        let halfwidth = 0.2f64.to_radians();
        let altitude = 35_786_000.0;
        let spacing = 2.0 * halfwidth;
        let centers = hex_beam_centers(altitude, beams, spacing);
        let receive_gain_dbi = 41.7;
        let g_over_t_db = 17.68;
        Self {
            satellite_altitude_m: altitude,
            feed_boresights: centers.clone(),
            beam_centers: centers,
            coverage_radius_m: altitude * math::tan(spacing / math::sqrt(3.0)),
            carrier_frequency_hz: 20e9,
            bandwidth_hz: 500e6,
            receive_gain: crate::db_to_linear(receive_gain_dbi),
            feed_peak_gain: crate::db_to_linear(52.0),
            noise_temperature_k: crate::db_to_linear(receive_gain_dbi - g_over_t_db),
            boltzmann: 1.38e-23,
            beam_halfwidth_3db_rad: halfwidth,
            rng_seed: 0,
        }
    }

    pub fn num_beams(&self) -> usize {
        self.beam_centers.len()
    }

    pub fn num_feeds(&self) -> usize {
        self.feed_boresights.len()
    }

    /// `λ = c / f`.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    pub fn link_constants(&self) -> LinkConstants {
        LinkConstants {
            wavelength_m: self.wavelength(),
            receive_gain: self.receive_gain,
            boltzmann: self.boltzmann,
            noise_temperature_k: self.noise_temperature_k,
            bandwidth_hz: self.bandwidth_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("satellite altitude", self.satellite_altitude_m),
            ("carrier frequency", self.carrier_frequency_hz),
            ("bandwidth", self.bandwidth_hz),
            ("receive gain", self.receive_gain),
            ("feed peak gain", self.feed_peak_gain),
            ("noise temperature", self.noise_temperature_k),
            ("Boltzmann constant", self.boltzmann),
            ("3 dB half-width", self.beam_halfwidth_3db_rad),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidGeometry(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.coverage_radius_m >= 0.0) {
            return Err(Error::InvalidGeometry("coverage radius must be nonnegative".into()));
        }
        if self.beam_centers.is_empty() {
            return Err(Error::InvalidGeometry("at least one beam is required".into()));
        }
        if self.feed_boresights.is_empty() {
            return Err(Error::InvalidGeometry("at least one feed is required".into()));
        }
        Ok(())
    }

    /// Order-sensitive FNV-1a hash over every field's bit pattern.
    pub fn config_hash(&self) -> u64 {
        let mut h = Fnv::new();
        h.f64(self.satellite_altitude_m);
        for p in self.beam_centers.iter().chain(&self.feed_boresights) {
            h.f64(p.lat_deg);
            h.f64(p.lon_deg);
        }
        h.u64(self.beam_centers.len() as u64);
        h.f64(self.coverage_radius_m);
        h.f64(self.carrier_frequency_hz);
        h.f64(self.bandwidth_hz);
        h.f64(self.receive_gain);
        h.f64(self.feed_peak_gain);
        h.f64(self.noise_temperature_k);
        h.f64(self.boltzmann);
        h.f64(self.beam_halfwidth_3db_rad);
        h.u64(self.rng_seed);
        h.finish()
    }
}

/// Beam centres on a hexagonal lattice of angular pitch `spacing_rad`,
/// centred on nadir.
pub fn hex_beam_centers(altitude_m: f64, beams: usize, spacing_rad: f64) -> Vec<GroundPoint> {
    hexagonal_offsets(beams)
        .into_iter()
        .map(|(x, y)| {
            ground_point_at_view(altitude_m, x * spacing_rad, y * spacing_rad)
                .expect("lattice offsets near nadir always intersect the Earth")
        })
        .collect()
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
    fn u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

/// User positions grouped `Q` per beam, with virtual padding slots.
#[derive(Debug, Clone, PartialEq)]
pub struct UserLayout {
    positions: Vec<GroundPoint>,
    virtual_mask: Vec<bool>,
    users_per_beam: usize,
}

impl UserLayout {
    pub fn new(positions: Vec<GroundPoint>, virtual_mask: Vec<bool>, users_per_beam: usize) -> Result<Self> {
        if users_per_beam == 0 {
            return Err(Error::InvalidGeometry("users per beam must be at least one".into()));
        }
        if positions.len() != virtual_mask.len() {
            return Err(Error::DimensionMismatch {
                what: "virtual mask",
                expected: positions.len(),
                found: virtual_mask.len(),
            });
        }
        if positions.is_empty() || !positions.len().is_multiple_of(users_per_beam) {
            return Err(Error::InvalidGeometry(format!(
                "{} user slots cannot be split into beams of {users_per_beam}",
                positions.len()
            )));
        }
        Ok(Self {
            positions,
            virtual_mask,
            users_per_beam,
        })
    }

    /// Places `real_per_beam[n]` users uniformly in the coverage disk of beam
    /// `n` and pads the remaining slots up to `users_per_beam` with virtual
    /// users. With `real_per_beam = None` every slot is real.
    ///
    /// Each beam draws from its own random stream, so the first `q` users of
    /// a beam are the same for every `users_per_beam ≥ q`.
    pub fn uniform_in_beams(
        geometry: &GeometryConfig,
        users_per_beam: usize,
        real_per_beam: Option<&[usize]>,
    ) -> Result<Self> {
        geometry.validate()?;
        let n_beams = geometry.num_beams();
        if let Some(real) = real_per_beam {
            if real.len() != n_beams {
                return Err(Error::DimensionMismatch {
                    what: "real users per beam",
                    expected: n_beams,
                    found: real.len(),
                });
            }
            if let Some(&bad) = real.iter().find(|&&r| r > users_per_beam) {
                return Err(Error::InvalidGeometry(format!(
                    "{bad} real users exceed {users_per_beam} slots per beam"
                )));
            }
        }
        let mut positions = Vec::with_capacity(n_beams * users_per_beam);
        let mut mask = Vec::with_capacity(n_beams * users_per_beam);
        for (n, center) in geometry.beam_centers.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(geometry.rng_seed);
            rng.set_stream(n as u64);
            let real = real_per_beam.map_or(users_per_beam, |r| r[n]);
            for q in 0..users_per_beam {
                if q < real {
                    let radius = geometry.coverage_radius_m * math::sqrt(rng.random::<f64>());
                    let bearing = TAU * rng.random::<f64>();
                    positions.push(center.destination(radius, bearing));
                    mask.push(false);
                } else {
                    positions.push(*center);
                    mask.push(true);
                }
            }
        }
        Self::new(positions, mask, users_per_beam)
    }

    pub fn positions(&self) -> &[GroundPoint] {
        &self.positions
    }

    pub fn virtual_mask(&self) -> &[bool] {
        &self.virtual_mask
    }

    pub fn users_per_beam(&self) -> usize {
        self.users_per_beam
    }

    pub fn num_beams(&self) -> usize {
        self.positions.len() / self.users_per_beam
    }

    pub fn num_users(&self) -> usize {
        self.positions.len()
    }
}

/// Diagonal phase matrix `Φ`, stored by its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    diagonal: Vec<Complex64>,
}

impl PhaseMatrix {
    pub fn diagonal(&self) -> &[Complex64] {
        &self.diagonal
    }

    pub fn to_dense(&self) -> CMat {
        let k = self.diagonal.len();
        let mut m = CMat::zeros(k, k);
        for (i, v) in self.diagonal.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }
}

/// Draws `e^{jφ_k}` with `φ_k` uniform on `[0, 2π)` for every user slot.
///
/// Like [`UserLayout::uniform_in_beams`], each beam uses its own stream and
/// slot `q` of a beam always receives the `q`-th draw of that stream.
pub fn generate_phase_matrix(layout: &UserLayout, seed: u64) -> PhaseMatrix {
    let q_per = layout.users_per_beam();
    let mut diagonal = Vec::with_capacity(layout.num_users());
    for n in 0..layout.num_beams() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(PHASE_STREAM_BASE + n as u64);
        for _ in 0..q_per {
            let phi = 2.0 * PI * rng.random::<f64>();
            diagonal.push(Complex64::new(math::cos(phi), math::sin(phi)));
        }
    }
    PhaseMatrix { diagonal }
}

/// `[C]_{k,m}` for a user at `user` and feed `feed`.
pub fn antenna_pattern_entry(geometry: &GeometryConfig, user: GroundPoint, feed: usize) -> Result<f64> {
    let boresight = *geometry.feed_boresights.get(feed).ok_or(Error::DimensionMismatch {
        what: "feed index",
        expected: geometry.num_feeds(),
        found: feed,
    })?;
    let distance = slant_range(geometry.satellite_altitude_m, user);
    let theta = off_axis_angle(geometry.satellite_altitude_m, user, boresight);
    let gain = beam_gain(geometry.feed_peak_gain, theta, geometry.beam_halfwidth_3db_rad);
    geometry.link_constants().coefficient(distance, gain)
}

/// Provenance of a generated channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationMetadata {
    pub seed: u64,
    pub config_hash: u64,
}

/// Complex `K×M` downlink matrix with beam/user indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: CMat,
    users_per_beam: usize,
    virtual_mask: Vec<bool>,
    metadata: Option<GenerationMetadata>,
}

impl ChannelMatrix {
    /// Wraps raw entries. Rows flagged virtual must be exactly zero.
    pub fn new(entries: CMat, users_per_beam: usize, virtual_mask: Vec<bool>) -> Result<Self> {
        let k = entries.rows();
        if virtual_mask.len() != k {
            return Err(Error::DimensionMismatch {
                what: "virtual mask",
                expected: k,
                found: virtual_mask.len(),
            });
        }
        if users_per_beam == 0 || k == 0 || !k.is_multiple_of(users_per_beam) {
            return Err(Error::InvalidGeometry(format!(
                "{k} channel rows cannot be split into beams of {users_per_beam}"
            )));
        }
        if entries.cols() == 0 {
            return Err(Error::InvalidGeometry("channel needs at least one feed".into()));
        }
        if !entries.is_finite() {
            return Err(Error::InvalidGeometry("channel entries must be finite".into()));
        }
        for (r, &is_virtual) in virtual_mask.iter().enumerate() {
            if is_virtual && entries.row(r).iter().any(|v| v.norm_sqr() != 0.0) {
                return Err(Error::InvalidGeometry(format!("virtual row {r} has nonzero entries")));
            }
        }
        Ok(Self {
            entries,
            users_per_beam,
            virtual_mask,
            metadata: None,
        })
    }

    /// All-real-users channel.
    pub fn from_entries(entries: CMat, users_per_beam: usize) -> Result<Self> {
        let k = entries.rows();
        Self::new(entries, users_per_beam, alloc::vec![false; k])
    }

    pub fn with_metadata(mut self, metadata: GenerationMetadata) -> Self {
        self.metadata = Some(metadata);
        self
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn num_users(&self) -> usize {
        self.entries.rows()
    }

    pub fn num_feeds(&self) -> usize {
        self.entries.cols()
    }

    pub fn num_beams(&self) -> usize {
        self.entries.rows() / self.users_per_beam
    }

    pub fn users_per_beam(&self) -> usize {
        self.users_per_beam
    }

    pub fn virtual_mask(&self) -> &[bool] {
        &self.virtual_mask
    }

    pub fn metadata(&self) -> Option<GenerationMetadata> {
        self.metadata
    }

    #[inline]
    pub fn row_index(&self, beam: usize, user: usize) -> usize {
        beam * self.users_per_beam + user
    }

    pub fn beam_of_row(&self, row: usize) -> usize {
        row / self.users_per_beam
    }

    pub fn user_of_row(&self, row: usize) -> usize {
        row % self.users_per_beam
    }

    /// `h_{n,q}`.
    pub fn row(&self, beam: usize, user: usize) -> &[Complex64] {
        self.entries.row(self.row_index(beam, user))
    }

    pub fn is_virtual(&self, beam: usize, user: usize) -> bool {
        self.virtual_mask[self.row_index(beam, user)]
    }

    /// Non-virtual `(beam, user)` pairs in row order.
    pub fn active_users(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_users())
            .filter(move |&k| !self.virtual_mask[k])
            .map(move |k| (self.beam_of_row(k), self.user_of_row(k)))
    }

    /// Per-beam mean of the non-virtual rows (zero for an all-virtual beam).
    pub fn beam_average_rows(&self) -> CMat {
        let (n_beams, m) = (self.num_beams(), self.num_feeds());
        let mut out = CMat::zeros(n_beams, m);
        for n in 0..n_beams {
            let mut count = 0usize;
            for q in 0..self.users_per_beam {
                if self.is_virtual(n, q) {
                    continue;
                }
                count += 1;
                for (acc, v) in out.row_mut(n).iter_mut().zip(self.row(n, q)) {
                    *acc += v;
                }
            }
            if count > 0 {
                for v in out.row_mut(n) {
                    *v /= count as f64;
                }
            }
        }
        out
    }
}

/// Builds `H = Φ·C` for the given geometry and layout.
pub fn generate_channel(geometry: &GeometryConfig, layout: &UserLayout, seed: u64) -> Result<ChannelMatrix> {
    geometry.validate()?;
    if layout.num_beams() != geometry.num_beams() {
        return Err(Error::DimensionMismatch {
            what: "beams in layout",
            expected: geometry.num_beams(),
            found: layout.num_beams(),
        });
    }
    let m = geometry.num_feeds();
    let k = layout.num_users();
    let phases = generate_phase_matrix(layout, seed);
    let mut entries = CMat::zeros(k, m);
    for (row, (pos, &is_virtual)) in layout.positions().iter().zip(layout.virtual_mask()).enumerate() {
        if is_virtual {
            continue;
        }
        let phase = phases.diagonal()[row];
        for feed in 0..m {
            entries[(row, feed)] = phase * antenna_pattern_entry(geometry, *pos, feed)?;
        }
    }
    let channel = ChannelMatrix::new(entries, layout.users_per_beam(), layout.virtual_mask().to_vec())?;
    Ok(channel.with_metadata(GenerationMetadata {
        seed,
        config_hash: geometry.config_hash(),
    }))
}
