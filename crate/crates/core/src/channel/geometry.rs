//! Earth/satellite geometry on a spherical Earth.
//!
//! The satellite sits above the sub-satellite point (0°, 0°). Positions use
//! an Earth-centred frame with x through (0°, 0°), y through (0°, 90°E) and
//! z through the north pole.

use alloc::vec::Vec;

use crate::math;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A point on the ground, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPoint {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl GroundPoint {
    pub const fn new(lat_deg: f64, lon_deg: f64) -> Self {
        Self { lat_deg, lon_deg }
    }

    pub fn to_ecef(self) -> [f64; 3] {
        let lat = self.lat_deg.to_radians();
        let lon = self.lon_deg.to_radians();
        [
            EARTH_RADIUS_M * math::cos(lat) * math::cos(lon),
            EARTH_RADIUS_M * math::cos(lat) * math::sin(lon),
            EARTH_RADIUS_M * math::sin(lat),
        ]
    }

    /// Point reached after travelling `distance_m` along a great circle with
    /// initial bearing `bearing_rad` (clockwise from north).
    pub fn destination(self, distance_m: f64, bearing_rad: f64) -> Self {
        let d = distance_m / EARTH_RADIUS_M;
        let lat1 = self.lat_deg.to_radians();
        let lon1 = self.lon_deg.to_radians();
        let sin_lat2 = math::sin(lat1) * math::cos(d) + math::cos(lat1) * math::sin(d) * math::cos(bearing_rad);
        let lat2 = math::asin(sin_lat2.clamp(-1.0, 1.0));
        let lon2 = lon1
            + math::atan2(
                math::sin(bearing_rad) * math::sin(d) * math::cos(lat1),
                math::cos(d) - math::sin(lat1) * sin_lat2,
            );
        Self::new(lat2.to_degrees(), lon2.to_degrees())
    }

    /// Great-circle distance.
    pub fn distance_to(self, other: GroundPoint) -> f64 {
        let a = self.to_ecef();
        let b = other.to_ecef();
        let cos = dot3(a, b) / (EARTH_RADIUS_M * EARTH_RADIUS_M);
        EARTH_RADIUS_M * libm::acos(cos.clamp(-1.0, 1.0))
    }
}

pub(crate) fn satellite_position(altitude_m: f64) -> [f64; 3] {
    [EARTH_RADIUS_M + altitude_m, 0.0, 0.0]
}

#[inline]
pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    math::sqrt(dot3(a, a))
}

#[inline]
fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Angle at the satellite between the directions to `a` and `b`.
///
/// Uses `atan2(|u×v|, u·v)` so small angles keep full precision.
pub fn off_axis_angle(altitude_m: f64, a: GroundPoint, b: GroundPoint) -> f64 {
    let sat = satellite_position(altitude_m);
    let u = sub3(a.to_ecef(), sat);
    let v = sub3(b.to_ecef(), sat);
    math::atan2(norm3(cross3(u, v)), dot3(u, v))
}

/// Slant range from the satellite to a ground point.
pub fn slant_range(altitude_m: f64, p: GroundPoint) -> f64 {
    norm3(sub3(p.to_ecef(), satellite_position(altitude_m)))
}

/// Ground point hit by the ray leaving the satellite at the given angular
/// offsets from nadir (east and north components, radians). `None` if the
/// ray misses the Earth.
pub fn ground_point_at_view(altitude_m: f64, east_rad: f64, north_rad: f64) -> Option<GroundPoint> {
    let sat = satellite_position(altitude_m);
    let dir = [-1.0, math::tan(east_rad), math::tan(north_rad)];
    let len = norm3(dir);
    let d = [dir[0] / len, dir[1] / len, dir[2] / len];
    // |sat + t d|² = R²
    let b = dot3(sat, d);
    let c = dot3(sat, sat) - EARTH_RADIUS_M * EARTH_RADIUS_M;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - math::sqrt(disc);
    let p = [sat[0] + t * d[0], sat[1] + t * d[1], sat[2] + t * d[2]];
    let lat = math::asin((p[2] / EARTH_RADIUS_M).clamp(-1.0, 1.0));
    let lon = math::atan2(p[1], p[0]);
    Some(GroundPoint::new(lat.to_degrees(), lon.to_degrees()))
}

/// Offsets of the first `n` cells of a hexagonal lattice with unit spacing,
/// ordered ring by ring outward from the origin.
pub fn hexagonal_offsets(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push((0.0, 0.0));
    let s3 = math::sqrt(3.0) / 2.0;
    // axial unit steps around a ring
    let dirs = [(1.0, 0.0), (0.5, s3), (-0.5, s3), (-1.0, 0.0), (-0.5, -s3), (0.5, -s3)];
    let mut ring = 1usize;
    while out.len() < n {
        // start at ring * dirs[4], walk the six sides
        let mut x = dirs[4].0 * ring as f64;
        let mut y = dirs[4].1 * ring as f64;
        for &(dx, dy) in &dirs {
            for _ in 0..ring {
                if out.len() == n {
                    return out;
                }
                out.push((x, y));
                x += dx;
                y += dy;
            }
        }
        ring += 1;
    }
    out
}
