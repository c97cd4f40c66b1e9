//! Symbol-duration optimization by bisection on the objective level.
//!
//! For a level `l`, the superlevel set `{t : F(t) >= l}` is non-empty iff
//! `l` is below the maximum of `F`. Bisecting on `l` with a feasibility test
//! therefore brackets the maximum value; the last feasible witness is the
//! optimal duration.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::link::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Stop when `upper - lower <= epsilon`.
    pub epsilon: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub feasibility_samples: usize,
    pub level_upper_init: f64,
    pub max_iterations: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            t_min: 1e-3,
            t_max: 0.1,
            feasibility_samples: 200,
            level_upper_init: 1e3,
            max_iterations: 64,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(domain(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.t_min > 0.0 && self.t_min < self.t_max && self.t_max.is_finite()) {
            return Err(domain(format!(
                "search interval must satisfy 0 < t_min < t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.feasibility_samples < 100 {
            return Err(domain(format!(
                "feasibility_samples must be at least 100, got {}",
                self.feasibility_samples
            )));
        }
        if !(self.level_upper_init > 0.0 && self.level_upper_init.is_finite()) {
            return Err(domain("initial level bound must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(domain("max_iterations must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub iteration: usize,
    pub level: f64,
    pub feasible: bool,
    pub witness: f64,
    /// Bounds after this step.
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub t_star: f64,
    /// Lower bound on the maximum (bits/s).
    pub f_star: f64,
    pub upper: f64,
    pub iterations: usize,
    pub trace: Vec<TraceStep>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Best sampled point and its objective value.
    pub witness: f64,
    pub value: f64,
}

/// Largest sampled objective on the configured interval: a uniform grid, then
/// one golden-section refinement around the best grid point.
fn sampled_supremum<F>(f: &F, config: &OptimizerConfig) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let n = config.feasibility_samples;
    let step = (config.t_max - config.t_min) / (n - 1) as f64;
    let (best_t, best_f) = grid_search_max(f, config.t_min, config.t_max, n)?;
    let lo = (best_t - step).max(config.t_min);
    let hi = (best_t + step).min(config.t_max);
    let mut failure = None;
    let (t, v) = golden_section_max(
        |t| match f(t) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        1e-9 * (hi - lo).max(f64::MIN_POSITIVE),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(if v > best_f { (t, v) } else { (best_t, best_f) })
}

/// Whether some sampled `t` in `[t_min, t_max]` has `F(t) > level`.
pub fn feasibility<F>(level: f64, f: &F, config: &OptimizerConfig) -> Result<Feasibility>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    config.validate()?;
    if !(level >= 0.0) {
        return Err(domain(format!("level must be non-negative, got {level}")));
    }
    let (witness, value) = sampled_supremum(f, config)?;
    Ok(Feasibility {
        feasible: value > level,
        witness,
        value,
    })
}

/// Bisection on the level `l` of any objective.
///
/// The feasibility test does not depend on `l` except through the final
/// comparison, so the sampled supremum is computed once and reused.
pub fn bisection_optimize_fn<F>(f: &F, config: &OptimizerConfig) -> Result<Optimum>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    config.validate()?;
    let (witness, value) = sampled_supremum(f, config)?;
    if value > config.level_upper_init {
        return Err(domain(format!(
            "initial level bound {} is below the sampled objective {value}",
            config.level_upper_init
        )));
    }
    let (mut lower, mut upper) = (0.0_f64, config.level_upper_init);
    let mut trace = Vec::new();
    let mut t_star = witness;
    while upper - lower > config.epsilon {
        if trace.len() == config.max_iterations {
            return Err(Error::NonConvergence {
                what: "bisection",
                detail: format!("{trace:?}"),
            });
        }
        let level = 0.5 * (lower + upper);
        let feasible = value > level;
        if feasible {
            lower = level;
            t_star = witness;
        } else {
            upper = level;
        }
        trace.push(TraceStep {
            iteration: trace.len() + 1,
            level,
            feasible,
            witness,
            lower,
            upper,
        });
    }
    Ok(Optimum {
        t_star,
        f_star: lower,
        upper,
        iterations: trace.len(),
        trace,
    })
}

/// Optimal symbol duration of a link scenario.
pub fn bisection_optimize(scenario: &Scenario, config: &OptimizerConfig) -> Result<Optimum> {
    scenario.validate()?;
    bisection_optimize_fn(&|t| scenario.objective(t), config)
}

/// Objective of a scenario at slot duration `t`.
pub fn objective(scenario: &Scenario, t: f64) -> Result<f64> {
    scenario.objective(t)
}

/// Evaluates `f` on `points` evenly spaced nodes (endpoints included) and
/// returns the best one. Ties go to the smaller `t`.
pub fn grid_search_max<F>(f: &F, t_min: f64, t_max: f64, points: usize) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if points < 2 || !(t_min < t_max) {
        return Err(domain(
            "grid search needs at least two points on a proper interval",
        ));
    }
    let step = (t_max - t_min) / (points - 1) as f64;
    let values = (0..points)
        .into_par_iter()
        .map(|k| {
            let t = if k == points - 1 {
                t_max
            } else {
                t_min + k as f64 * step
            };
            f(t).map(|v| (t, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(values
        .into_iter()
        .fold((t_min, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        }))
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Finite-difference derivative signs of an objective over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SignScan {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Central differences `F(t + h) - F(t - h)`.
    pub differences: Vec<f64>,
    /// -1, 0 or +1; zero inside the flat band.
    pub signs: Vec<i8>,
    /// Changes between consecutive non-zero signs.
    pub sign_changes: usize,
    /// Non-zero signs form `+...+ -...-` (either run may be empty).
    pub quasi_concave: bool,
    /// Grid indices of positive signs that follow a negative one.
    pub violations: Vec<usize>,
}

impl SignScan {
    pub fn single_change(&self) -> bool {
        self.sign_changes == 1 && self.quasi_concave
    }
}

pub fn derivative_sign_scan_fn<F>(f: &F, grid: &[f64]) -> Result<SignScan>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(domain("scan grid must be positive and finite"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain("scan grid must be strictly increasing"));
    }
    let rows = grid
        .par_iter()
        .map(|&t| {
            let h = 1e-4 * t;
            Ok((f(t)?, f(t + h)? - f(t - h)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (values, differences): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let band = 1e-9 * scale;
    let signs: Vec<i8> = differences
        .iter()
        .map(|&d| {
            if d.abs() <= band {
                0
            } else if d > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();

    let mut sign_changes = 0;
    let mut previous = 0;
    let mut seen_negative = false;
    let mut violations = Vec::new();
    for (k, &s) in signs.iter().enumerate() {
        if s == 0 {
            continue;
        }
        if previous != 0 && s != previous {
            sign_changes += 1;
        }
        if s < 0 {
            seen_negative = true;
        } else if seen_negative {
            violations.push(k);
        }
        previous = s;
    }
    Ok(SignScan {
        grid: grid.to_vec(),
        values,
        differences,
        signs,
        sign_changes,
        quasi_concave: violations.is_empty(),
        violations,
    })
}

pub fn derivative_sign_scan(scenario: &Scenario, grid: &[f64]) -> Result<SignScan> {
    derivative_sign_scan_fn(&|t| scenario.objective(t), grid)
}

/// `points` evenly spaced values on `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (points - 1) as f64;
            (0..points)
                .map(|k| {
                    if k == points - 1 {
                        b
                    } else {
                        a + k as f64 * step
                    }
                })
                .collect()
        }
    }
}
