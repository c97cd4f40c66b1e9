//! Deterministic integration of the drifted Gaussian over the receiver ball.
//!
//! Spherical coordinates are centered on the receiver with the polar axis
//! pointing at the Gaussian mean, so the integrand does not depend on the
//! azimuth. Shells and polar angles use composite Gauss–Legendre rules on
//! panels graded geometrically towards the density peak.

use crate::channel::ChannelParams;
use crate::error::{domain, Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for k in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    (nodes, weights)
}

/// Composite rule: every panel `[b[k], b[k+1]]` gets the scaled base rule.
fn composite(breaks: &[f64], base: &(Vec<f64>, Vec<f64>)) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(breaks.len() * base.0.len());
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, wt) in base.0.iter().zip(&base.1) {
            out.push((mid + half * x, half * wt));
        }
    }
    out
}

/// Breakpoints on `[lo, hi]` graded geometrically around `peak` with
/// smallest panel `scale`.
fn graded_breaks(lo: f64, hi: f64, peak: f64, scale: f64) -> Vec<f64> {
    let peak = peak.clamp(lo, hi);
    let mut breaks = vec![lo, peak, hi];
    let mut step = scale;
    while step < hi - lo {
        for p in [peak - step, peak + step] {
            if p > lo && p < hi {
                breaks.push(p);
            }
        }
        step *= 2.0;
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
}

fn integrate(d: f64, radius: f64, spread: f64, order: usize) -> f64 {
    let base = gauss_legendre(order);
    let s = (0.5 * spread).sqrt();
    // Radial profile peaks at the point of the ball nearest the mean.
    let rho_breaks = graded_breaks(0.0, radius, d.min(radius), 0.125 * s);
    let rho_rule = composite(&rho_breaks, &base);
    // Polar profile decays like exp(-rho d (1 - mu) / (2 D t)) away from mu = 1.
    let k_max = radius * d / spread * 2.0;
    let mu_scale = if k_max > 1.0 { 0.125 / k_max } else { 0.25 };
    let mu_breaks = graded_breaks(-1.0, 1.0, 1.0, mu_scale);
    let mu_rule = composite(&mu_breaks, &base);

    let norm = (std::f64::consts::PI * spread).powf(-1.5);
    let mut total = 0.0;
    for &(rho, w_rho) in &rho_rule {
        let mut inner = 0.0;
        for &(mu, w_mu) in &mu_rule {
            let dist_sq = d * d + rho * rho - 2.0 * rho * d * mu;
            inner += w_mu * (-dist_sq.max(0.0) / spread).exp();
        }
        total += w_rho * rho * rho * inner;
    }
    // Azimuth contributes 2 pi.
    2.0 * std::f64::consts::PI * norm * total
}

/// Probability mass of the drifted Gaussian inside the receiver at time `t`,
/// converged to `1e-8` relative by doubling the per-panel order from `order`.
pub fn quadrature_presence_probability(
    params: &ChannelParams,
    t: f64,
    order: usize,
) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(domain(format!("time must be positive and finite, got {t}")));
    }
    if order < 16 {
        return Err(domain(format!(
            "quadrature order must be at least 16, got {order}"
        )));
    }
    params.validate()?;
    let spread = 4.0 * params.diffusion * t;
    let d = (params.receiver.center - params.drift * t).norm();
    let radius = params.receiver.radius;

    let mut n = order;
    let mut previous = integrate(d, radius, spread, n);
    let mut history = vec![previous];
    while n <= 256 {
        n *= 2;
        let current = integrate(d, radius, spread, n);
        history.push(current);
        let diff = (current - previous).abs();
        if diff <= 1e-8 * current.abs() || current.abs() < 1e-300 {
            return Ok(current.clamp(0.0, 1.0));
        }
        previous = current;
    }
    Err(Error::NonConvergence {
        what: "sphere quadrature",
        detail: format!("order {n}, successive values {history:?}"),
    })
}
