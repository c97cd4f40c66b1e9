//! Diffusion channel with 3-D drift and a spherical passive receiver.
//!
//! Coordinates are in meters with the releasing node at the origin. A released
//! molecule at time `t` is Gaussian with mean `drift * t` and per-axis variance
//! `2 D t`; the receiver counts it if it lies inside its sphere at that instant.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{domain, Error, Result};

/// Values below this are flushed to zero.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Maximum supported ISI memory.
pub const MAX_ISI_LENGTH: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Builds a vector from micrometer (or micrometer per second) components.
    pub fn from_micro(x: f64, y: f64, z: f64) -> Self {
        Self::new(x * 1e-6, y * 1e-6, z * 1e-6)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Passive spherical receiver, center relative to the releasing node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereReceiver {
    pub center: Vec3,
    pub radius: f64,
}

impl SphereReceiver {
    pub fn new(center: Vec3, radius: f64) -> Result<Self> {
        let rx = Self { center, radius };
        rx.validate()?;
        Ok(rx)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.is_finite() {
            return Err(domain("receiver center must be finite"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(domain(format!(
                "receiver radius must be positive, got {}",
                self.radius
            )));
        }
        Ok(())
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (p - self.center).norm_sq() <= self.radius * self.radius
    }
}

/// Everything the presence probability depends on for one hop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Diffusion coefficient in m²/s.
    pub diffusion: f64,
    /// Drift velocity in m/s.
    pub drift: Vec3,
    pub receiver: SphereReceiver,
}

impl ChannelParams {
    pub fn new(diffusion: f64, drift: Vec3, receiver: SphereReceiver) -> Result<Self> {
        let params = Self {
            diffusion,
            drift,
            receiver,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diffusion > 0.0 && self.diffusion.is_finite()) {
            return Err(domain(format!(
                "diffusion coefficient must be positive, got {}",
                self.diffusion
            )));
        }
        if !self.drift.is_finite() {
            return Err(domain("drift velocity must be finite"));
        }
        self.receiver.validate()
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("time must be positive and finite, got {t}")))
    }
}

/// Molecule density at `point`, given relative to the receiver center.
///
/// The density is the free-space Gaussian of a point release at the origin,
/// translated by `drift * t`.
pub fn pdf_at_point(params: &ChannelParams, point: Vec3, t: f64) -> Result<f64> {
    check_time(t)?;
    params.validate()?;
    let spread = 4.0 * params.diffusion * t;
    let offset = point + params.receiver.center - params.drift * t;
    let peak = (std::f64::consts::PI * spread).powf(-1.5);
    Ok(peak * (-offset.norm_sq() / spread).exp())
}

/// Slab approximation of the probability that a molecule is inside the
/// receiver at time `t`, before clamping.
///
/// The receiver cross-section through its center is integrated with a
/// 17-node composite Simpson rule along `y` (chords along `x` integrated
/// exactly with erf) and extruded along `z` with the density frozen at the
/// center plane. The result can leave `[0, 1]`.
pub fn presence_probability_raw(params: &ChannelParams, t: f64) -> Result<f64> {
    check_time(t)?;
    params.validate()?;
    let r = params.receiver.radius;
    let c = params.receiver.center;
    let v = params.drift;
    let d = params.diffusion;

    let spread = 4.0 * d * t;
    let erf_scale = 2.0 * (d * t).sqrt();
    let y0 = c.y - v.y * t;
    let x0 = c.x - v.x * t;

    // Pair of y-nodes at ±offset·r.
    let y_pair = |offset: f64| {
        let a = offset * r + y0;
        let b = -offset * r + y0;
        (-a * a / spread).exp() + (-b * b / spread).exp()
    };
    // Chord of half-width `half_chord·r` along x.
    let x_chord = |half_chord: f64| {
        libm::erf((half_chord * r + x0) / erf_scale) - libm::erf((-half_chord * r + x0) / erf_scale)
    };

    let alpha: f64 = (0..4)
        .map(|k| {
            let s = (2 * k + 1) as f64 / 8.0;
            y_pair(s) * x_chord((1.0 - s * s).sqrt())
        })
        .sum();
    let beta: f64 = (1..4)
        .map(|k| {
            let s = k as f64 / 4.0;
            y_pair(s) * x_chord((1.0 - s * s).sqrt())
        })
        .sum();
    let phi = (-y0 * y0 / spread).exp() * x_chord(1.0);

    let z0 = c.z - v.z * t;
    let prefactor = r * r / (144.0 * std::f64::consts::PI * d * t) * (-z0 * z0 / spread).exp();
    Ok(prefactor * (4.0 * alpha + 2.0 * beta + 2.0 * phi))
}

/// Presence probability clamped to `[0, 1]`, with underflow flushed to zero.
pub fn presence_probability(params: &ChannelParams, t: f64) -> Result<f64> {
    let raw = presence_probability_raw(params, t)?;
    Ok(clamp_probability(raw))
}

pub(crate) fn clamp_probability(p: f64) -> f64 {
    if p.is_nan() {
        return 0.0;
    }
    let p = p.clamp(0.0, 1.0);
    if p < PROBABILITY_FLOOR {
        0.0
    } else {
        p
    }
}

/// Channel seen by the relay when it re-emits towards the destination: the
/// destination center is expressed relative to the relay.
pub fn second_hop_params(
    relay_center: Vec3,
    dest_center: Vec3,
    dest_radius: f64,
    diffusion: f64,
    drift: Vec3,
) -> Result<ChannelParams> {
    if !relay_center.is_finite() || !dest_center.is_finite() {
        return Err(domain("node centers must be finite"));
    }
    let receiver = SphereReceiver::new(dest_center - relay_center, dest_radius)?;
    ChannelParams::new(diffusion, drift, receiver)
}

/// Presence probabilities `P[j][i]` at `t = j t_s − i t_s / I` and the ISI
/// increments `q[j][i] = max(P[j+1][i] − P[j][i], 0)`.
///
/// Rows are stored zero-based: `p_rows[0]` holds `j = 1`. Use [`Self::p`] and
/// [`Self::q`] for one-based slot indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalTable {
    pub slot: f64,
    pub sub_slots: usize,
    pub isi_length: usize,
    pub p_rows: Vec<Vec<f64>>,
    pub q_rows: Vec<Vec<f64>>,
    /// Number of `q` entries whose raw difference was negative.
    pub clamp_count: usize,
}

impl ArrivalTable {
    /// `P_{j,i}` for `j = 1..=J+1`; `i` is the 0-based sub-slot index.
    pub fn p(&self, j: usize, i: usize) -> f64 {
        self.p_rows[j - 1][i]
    }

    /// `q_{j,i}` for `j = 1..=J`; `i` is the 0-based sub-slot index.
    pub fn q(&self, j: usize, i: usize) -> f64 {
        self.q_rows[j - 1][i]
    }

    /// Current-slot arrival probabilities `P_{1,i}`.
    pub fn current(&self) -> &[f64] {
        &self.p_rows[0]
    }

    /// Builds a table from explicit `P` rows (`J + 1` rows of `I` entries),
    /// deriving `q` the same way [`arrival_table`] does.
    pub fn from_presence(slot: f64, p_rows: Vec<Vec<f64>>) -> Result<Self> {
        if p_rows.is_empty() {
            return Err(domain("arrival table needs at least one row"));
        }
        let sub_slots = p_rows[0].len();
        if sub_slots == 0 {
            return Err(domain("arrival table needs at least one sub-slot"));
        }
        for row in &p_rows {
            if row.len() != sub_slots {
                return Err(Error::DimensionMismatch {
                    what: "arrival table row",
                    expected: sub_slots,
                    got: row.len(),
                });
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(domain("presence probabilities must lie in [0, 1]"));
            }
        }
        let isi_length = p_rows.len() - 1;
        let mut clamp_count = 0;
        let q_rows = p_rows
            .windows(2)
            .map(|w| {
                w[0].iter()
                    .zip(&w[1])
                    .map(|(&now, &next)| {
                        let diff = next - now;
                        if diff < 0.0 {
                            clamp_count += 1;
                            0.0
                        } else {
                            diff
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            slot,
            sub_slots,
            isi_length,
            p_rows,
            q_rows,
            clamp_count,
        })
    }
}

/// Tabulates arrival probabilities for a slot of duration `slot` split into
/// `sub_slots` release instants, with ISI memory `isi_length`.
pub fn arrival_table(
    params: &ChannelParams,
    slot: f64,
    sub_slots: usize,
    isi_length: usize,
) -> Result<ArrivalTable> {
    check_time(slot)?;
    if sub_slots == 0 {
        return Err(domain("sub-slot count must be at least 1"));
    }
    if isi_length > MAX_ISI_LENGTH {
        return Err(domain(format!(
            "ISI length {isi_length} exceeds the supported maximum {MAX_ISI_LENGTH}"
        )));
    }
    let p_rows = (1..=isi_length + 1)
        .map(|j| {
            (0..sub_slots)
                .map(|i| {
                    let t = j as f64 * slot - i as f64 * slot / sub_slots as f64;
                    presence_probability(params, t)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ArrivalTable::from_presence(slot, p_rows)
}
