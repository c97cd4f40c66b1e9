//! Non-uniform BCSK pulse shapes.
//!
//! Bit "1" releases `g(i)` molecules at the start of sub-slot `i`, i.e. at
//! `i t_s / I` into the slot; bit "0" releases nothing.

use std::fmt;

use crate::energy::{total_energy, EnergyParams};
use crate::error::{domain, Error, Result};

pub const DEFAULT_EXPONENTIAL_RATE: f64 = 0.5;
pub const DEFAULT_SINC_OFFSET: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeFamily {
    Uniform,
    /// `w(i) = exp(-rate i)`.
    Exponential {
        rate: f64,
    },
    /// `w(i) = |sinc(pi (i + offset) / I)|`.
    Sinc {
        offset: f64,
    },
    /// `w(i) = cos(pi i / (2 I))`.
    Cosine,
}

impl ShapeFamily {
    pub fn exponential() -> Self {
        ShapeFamily::Exponential {
            rate: DEFAULT_EXPONENTIAL_RATE,
        }
    }

    pub fn sinc() -> Self {
        ShapeFamily::Sinc {
            offset: DEFAULT_SINC_OFFSET,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ShapeFamily::Uniform => "uniform",
            ShapeFamily::Exponential { .. } => "exponential",
            ShapeFamily::Sinc { .. } => "sinc",
            ShapeFamily::Cosine => "cosine",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ShapeFamily::Exponential { rate } if !(rate >= 0.0 && rate.is_finite()) => Err(domain(
                format!("exponential rate must be finite and >= 0, got {rate}"),
            )),
            ShapeFamily::Sinc { offset } if !offset.is_finite() => {
                Err(domain("sinc offset must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Unnormalized, non-negative weights for `sub_slots` sub-slots.
    pub fn weights(&self, sub_slots: usize) -> Vec<f64> {
        let n = sub_slots as f64;
        (0..sub_slots)
            .map(|i| {
                let i = i as f64;
                match *self {
                    ShapeFamily::Uniform => 1.0,
                    ShapeFamily::Exponential { rate } => (-rate * i).exp(),
                    ShapeFamily::Sinc { offset } => {
                        let x = std::f64::consts::PI * (i + offset) / n;
                        if x == 0.0 {
                            1.0
                        } else {
                            (x.sin() / x).abs()
                        }
                    }
                    ShapeFamily::Cosine => (std::f64::consts::PI * i / (2.0 * n)).cos(),
                }
            })
            .collect()
    }
}

impl fmt::Display for ShapeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeFamily::Exponential { rate } => write!(f, "exponential(rate={rate})"),
            ShapeFamily::Sinc { offset } => write!(f, "sinc(offset={offset})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Molecules released per sub-slot for bit "1".
#[derive(Debug, Clone, PartialEq)]
pub struct PulseShape {
    /// `g(i)` for `i = 0..I`.
    pub counts: Vec<u64>,
    /// Slot duration `t_s` in seconds.
    pub slot: f64,
}

impl PulseShape {
    pub fn new(counts: Vec<u64>, slot: f64) -> Result<Self> {
        if counts.is_empty() {
            return Err(domain("a pulse needs at least one sub-slot"));
        }
        if !(slot > 0.0 && slot.is_finite()) {
            return Err(domain(format!(
                "slot duration must be positive, got {slot}"
            )));
        }
        Ok(Self { counts, slot })
    }

    pub fn sub_slots(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Release instant of sub-slot `i`, relative to the slot start.
    pub fn release_time(&self, i: usize) -> f64 {
        i as f64 * self.slot / self.sub_slots() as f64
    }

    /// Same counts, different slot duration.
    pub fn with_slot(&self, slot: f64) -> Result<Self> {
        Self::new(self.counts.clone(), slot)
    }
}

/// Largest-remainder apportionment of `total` items proportionally to
/// `weights`. Ties in the remainder go to the lower index.
pub fn apportion(weights: &[f64], total: u64) -> Result<Vec<u64>> {
    if weights.is_empty() {
        return Err(domain("cannot apportion over zero bins"));
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(domain("weights must be finite and non-negative"));
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(domain("weights must not all be zero"));
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    // Floating-point quotas can overshoot by a unit in pathological cases.
    let mut excess = assigned.saturating_sub(total);
    while excess > 0 {
        let idx = (0..counts.len())
            .filter(|&i| counts[i] > 0)
            .min_by(|&a, &b| {
                (quotas[a] - counts[a] as f64)
                    .total_cmp(&(quotas[b] - counts[b] as f64))
                    .then(b.cmp(&a))
            })
            .expect("positive assignment exists when overshooting");
        counts[idx] -= 1;
        excess -= 1;
    }
    let remaining = total - counts.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(remaining as usize) {
        counts[i] += 1;
    }
    Ok(counts)
}

/// Pulse of `family` over `sub_slots` sub-slots releasing exactly `total`
/// molecules.
pub fn make_pulse(
    family: ShapeFamily,
    sub_slots: usize,
    total: u64,
    slot: f64,
) -> Result<PulseShape> {
    family.validate()?;
    if sub_slots == 0 {
        return Err(domain("sub-slot count must be at least 1"));
    }
    let counts = apportion(&family.weights(sub_slots), total)?;
    PulseShape::new(counts, slot)
}

/// Largest pulse of `family` whose total energy fits in `budget` joules.
pub fn scale_to_energy(
    family: ShapeFamily,
    sub_slots: usize,
    slot: f64,
    budget: f64,
    energy: &EnergyParams,
) -> Result<PulseShape> {
    energy.validate()?;
    if !budget.is_finite() {
        return Err(domain(format!(
            "energy budget must be finite, got {budget}"
        )));
    }
    let cost =
        |n: u64| -> Result<f64> { total_energy(&make_pulse(family, sub_slots, n, slot)?, energy) };

    let minimum = cost(1)?;
    if budget < minimum {
        return Err(Error::InfeasibleBudget { budget, minimum });
    }
    // Synthesis alone exceeds the budget past this count.
    let mut hi = (budget / energy.molecule_cost()).ceil() as u64 + 1;
    let mut lo = 1u64;
    while cost(hi)? <= budget {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if cost(mid)? <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Rounding can make the energy locally non-monotone in the total; settle on
    // the boundary where N fits and N + 1 does not.
    while lo > 1 && cost(lo)? > budget {
        lo -= 1;
    }
    while cost(lo + 1)? <= budget {
        lo += 1;
    }
    make_pulse(family, sub_slots, lo, slot)
}
