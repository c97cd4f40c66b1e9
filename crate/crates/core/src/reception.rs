//! Received-count statistics for one hop and the MAP detection threshold.
//!
//! The count at the end of a slot is the sum of current-slot arrivals, ISI
//! from the previous `J` slots, additive source noise and a counting noise
//! whose variance equals the conditional mean. Each part is approximated as
//! Gaussian, giving one normal law per hypothesis on the current bit.

use crate::channel::ArrivalTable;
use crate::error::{domain, Error, Result};
use crate::modulation::PulseShape;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Priors {
    /// Probability of sending bit "1".
    pub pi1: f64,
}

impl Priors {
    pub fn new(pi1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi1) {
            return Err(domain(format!("prior must lie in [0, 1], got {pi1}")));
        }
        Ok(Self { pi1 })
    }

    pub fn equiprobable() -> Self {
        Self { pi1: 0.5 }
    }

    pub fn pi0(&self) -> f64 {
        1.0 - self.pi1
    }
}

impl Default for Priors {
    fn default() -> Self {
        Self::equiprobable()
    }
}

/// Gaussian noise from other molecule sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub mean: f64,
    pub variance: f64,
}

impl NoiseParams {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        let noise = Self { mean, variance };
        noise.validate()?;
        Ok(noise)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean >= 0.0
            && self.mean.is_finite()
            && self.variance >= 0.0
            && self.variance.is_finite())
        {
            return Err(domain(format!(
                "noise mean and variance must be finite and non-negative, got ({}, {})",
                self.mean, self.variance
            )));
        }
        Ok(())
    }
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            mean: 100.0,
            variance: 100.0,
        }
    }
}

/// Mean and variance of the ISI count, averaged over the previous bits.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IsiMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Conditional Gaussian laws of the received count given the current bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkStats {
    pub mu0: f64,
    pub var0: f64,
    pub mu1: f64,
    pub var1: f64,
    pub threshold: Option<f64>,
    /// ISI part shared by both hypotheses.
    pub isi: IsiMoments,
}

impl LinkStats {
    /// Stats with explicit moments and no ISI bookkeeping.
    pub fn from_moments(mu0: f64, var0: f64, mu1: f64, var1: f64) -> Self {
        Self {
            mu0,
            var0,
            mu1,
            var1,
            threshold: None,
            isi: IsiMoments::default(),
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }

    pub fn is_degenerate(&self) -> bool {
        self.mu0 == self.mu1 && self.var0 == self.var1
    }

    pub fn threshold(&self) -> Result<f64> {
        self.threshold.ok_or(Error::ThresholdUnset)
    }
}

fn check_table(pulse: &PulseShape, table: &ArrivalTable) -> Result<()> {
    if table.sub_slots != pulse.sub_slots() {
        return Err(Error::DimensionMismatch {
            what: "arrival table sub-slots",
            expected: pulse.sub_slots(),
            got: table.sub_slots,
        });
    }
    if table.p_rows.len() != table.isi_length + 1 || table.q_rows.len() != table.isi_length {
        return Err(Error::DimensionMismatch {
            what: "arrival table rows",
            expected: table.isi_length + 1,
            got: table.p_rows.len(),
        });
    }
    Ok(())
}

/// ISI mean and variance, averaging each earlier slot over its Bernoulli bit.
pub fn isi_moments(pulse: &PulseShape, table: &ArrivalTable, priors: Priors) -> Result<IsiMoments> {
    check_table(pulse, table)?;
    let (pi1, pi0) = (priors.pi1, priors.pi0());
    let mut moments = IsiMoments::default();
    for row in &table.q_rows {
        let mut mean = 0.0;
        let mut binomial_var = 0.0;
        for (&g, &q) in pulse.counts.iter().zip(row) {
            let g = g as f64;
            mean += g * q;
            binomial_var += g * q * (1.0 - q);
        }
        moments.mean += pi1 * mean;
        moments.variance += pi1 * binomial_var + pi0 * pi1 * mean * mean;
    }
    Ok(moments)
}

/// Conditional count statistics for one hop (threshold left unset).
pub fn link_stats(
    pulse: &PulseShape,
    table: &ArrivalTable,
    priors: Priors,
    noise: NoiseParams,
) -> Result<LinkStats> {
    noise.validate()?;
    let isi = isi_moments(pulse, table, priors)?;
    let (mut current, mut current_var) = (0.0, 0.0);
    for (&g, &p) in pulse.counts.iter().zip(table.current()) {
        let g = g as f64;
        current += g * p;
        current_var += g * p * (1.0 - p);
    }
    let mu0 = isi.mean + noise.mean;
    let mu1 = mu0 + current;
    // Counting noise contributes a variance equal to the conditional mean.
    let var0 = isi.variance + noise.variance + mu0;
    let var1 = isi.variance + current_var + noise.variance + mu1;
    Ok(LinkStats {
        mu0,
        var0,
        mu1,
        var1,
        threshold: None,
        isi,
    })
}

fn normal_tail(x: f64, mean: f64, var: f64) -> f64 {
    0.5 * libm::erfc((x - mean) / (2.0 * var).sqrt())
}

/// `P(count >= tau)` under bit 1 and under bit 0.
pub fn detection_probabilities(stats: &LinkStats) -> Result<(f64, f64)> {
    let tau = stats.threshold()?;
    Ok((
        normal_tail(tau, stats.mu1, stats.var1),
        normal_tail(tau, stats.mu0, stats.var0),
    ))
}

/// Error probability of the single-threshold detector at `tau` for the
/// given priors.
pub fn threshold_error(stats: &LinkStats, priors: Priors, tau: f64) -> f64 {
    let miss = 0.5 * libm::erfc((stats.mu1 - tau) / (2.0 * stats.var1).sqrt());
    let false_alarm = normal_tail(tau, stats.mu0, stats.var0);
    priors.pi1 * miss + priors.pi0() * false_alarm
}

/// MAP threshold: where the prior-weighted conditional densities cross with
/// the likelihood ratio increasing, so that counts above it favour bit 1.
pub fn map_threshold(stats: &LinkStats, priors: Priors) -> Result<f64> {
    if !(stats.var0 > 0.0 && stats.var1 > 0.0) {
        return Err(domain("conditional variances must be positive"));
    }
    if stats.is_degenerate() {
        return Err(Error::NoThreshold);
    }
    if priors.pi1 == 0.0 {
        return Ok(f64::INFINITY);
    }
    if priors.pi1 == 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    // Work in x = tau - mu0. Multiplying the log-likelihood ratio by
    // 2 var1 gives a x^2 + b x + c with
    let (v0, v1) = (stats.var0, stats.var1);
    let delta = stats.mu1 - stats.mu0;
    let dvar = v1 - v0;
    let log_bias = (priors.pi1 / priors.pi0()).ln() - 0.5 * (dvar / v0).ln_1p();
    let a = dvar / v0;
    let b = 2.0 * delta;
    let c = 2.0 * v1 * log_bias - delta * delta;

    let root = if a == 0.0 {
        (b != 0.0).then(|| -c / b)
    } else {
        let disc = b * b - 4.0 * a * c;
        (disc >= 0.0).then(|| {
            let s = disc.sqrt();
            // Root where 2 a x + b = +sqrt(disc), i.e. the ratio is increasing.
            if b >= 0.0 {
                2.0 * c / (-b - s)
            } else {
                (-b + s) / (2.0 * a)
            }
        })
    };
    match root {
        Some(x) if x.is_finite() => Ok(stats.mu0 + x),
        _ => Ok(search_threshold(stats, priors)),
    }
}

/// Grid search plus golden-section refinement of the threshold error.
fn search_threshold(stats: &LinkStats, priors: Priors) -> f64 {
    let (s0, s1) = (stats.var0.sqrt(), stats.var1.sqrt());
    let lo = (stats.mu0 - 8.0 * s0).min(stats.mu1 - 8.0 * s1);
    let hi = (stats.mu0 + 8.0 * s0).max(stats.mu1 + 8.0 * s1);
    let n = 10_000;
    let step = (hi - lo) / n as f64;
    let err = |tau: f64| threshold_error(stats, priors, tau);
    let best = (0..=n)
        .map(|k| lo + k as f64 * step)
        .min_by(|a, b| err(*a).total_cmp(&err(*b)))
        .unwrap_or(lo);
    let (x, _) = crate::optimizer::golden_section_max(
        |t| -err(t),
        (best - step).max(lo),
        (best + step).min(hi),
        1e-12 * (hi - lo).max(1.0),
    );
    x
}
