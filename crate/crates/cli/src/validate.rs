//! Oracle suite: the analytic channel and moment formulas against the
//! quadrature and Monte Carlo oracles, and the closed-form relay BER
//! against bit-level simulation.

use std::path::{Path, PathBuf};

use mcvd_core::channel::{presence_probability, ArrivalTable, ChannelParams, SphereReceiver, Vec3};
use mcvd_core::modulation::PulseShape;
use mcvd_core::montecarlo::{
    mc_count_moments, mc_link_ber, mc_presence_probability, quadrature_presence_probability,
    McEstimate, RngConfig,
};
use mcvd_core::reception::{isi_moments, link_stats, LinkStats, NoiseParams, Priors};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::{csv_writer, sci, CliError};

type PresenceFn = dyn Fn(&ChannelParams, f64) -> mcvd_core::Result<f64> + Send + Sync;
type StatsFn = dyn Fn(&PulseShape, &ArrivalTable, Priors, NoiseParams) -> mcvd_core::Result<LinkStats>
    + Send
    + Sync;

/// The analytic formulas under test; swapping one in lets a fixture check
/// that the suite notices a broken model.
pub struct AnalyticModel {
    pub presence: Box<PresenceFn>,
    pub stats: Box<StatsFn>,
}

impl Default for AnalyticModel {
    fn default() -> Self {
        Self {
            presence: Box::new(presence_probability),
            stats: Box::new(link_stats),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Outside the check's domain (reference too small, BER out of range).
    Skip,
}

impl Verdict {
    fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Skip => "skip",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub index: usize,
    pub description: String,
    pub reference: f64,
    pub estimate: f64,
    /// Relative error, z-score or absolute difference, per check.
    pub metric: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl Check {
    fn judged(
        name: &'static str,
        index: usize,
        description: String,
        reference: f64,
        estimate: f64,
        metric: f64,
        tolerance: f64,
    ) -> Self {
        let verdict = if metric <= tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            name,
            index,
            description,
            reference,
            estimate,
            metric,
            tolerance,
            verdict,
        }
    }

    fn skipped(
        name: &'static str,
        index: usize,
        description: String,
        reference: f64,
        estimate: f64,
        tolerance: f64,
    ) -> Self {
        Self {
            name,
            index,
            description,
            reference,
            estimate,
            metric: f64::NAN,
            tolerance,
            verdict: Verdict::Skip,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.verdict == Verdict::Fail)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }

    /// (pass, fail, skip) counts per check name, in first-seen order.
    pub fn summary(&self) -> Vec<(&'static str, [usize; 3])> {
        let mut out: Vec<(&'static str, [usize; 3])> = Vec::new();
        for c in &self.checks {
            let slot = match out.iter().position(|(n, _)| *n == c.name) {
                Some(k) => k,
                None => {
                    out.push((c.name, [0; 3]));
                    out.len() - 1
                }
            };
            out[slot].1[c.verdict as usize] += 1;
        }
        out
    }

    pub fn write_csv(&self, dir: &Path, name: &str) -> Result<PathBuf, CliError> {
        let (mut w, path) = csv_writer(dir, name)?;
        w.write_record([
            "check",
            "index",
            "description",
            "reference",
            "estimate",
            "metric",
            "tolerance",
            "verdict",
        ])?;
        for c in &self.checks {
            w.write_record([
                c.name.to_string(),
                c.index.to_string(),
                c.description.clone(),
                sci(c.reference),
                sci(c.estimate),
                if c.metric.is_nan() {
                    String::new()
                } else {
                    sci(c.metric)
                },
                sci(c.tolerance),
                c.verdict.name().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Random channel points: drift components 1–100 μm/s, receiver 20–200 μm
/// from the source in the positive octant, radius 50 μm, t in 1–18 ms.
pub fn presence_grid(points: usize, seed: u64) -> Vec<(ChannelParams, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..points)
        .map(|_| {
            let drift = Vec3::from_micro(
                rng.random_range(1.0..=100.0),
                rng.random_range(1.0..=100.0),
                rng.random_range(1.0..=100.0),
            );
            let dir: [f64; 3] = std::array::from_fn(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z.abs()
            });
            let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
            let dist = rng.random_range(20.0..=200.0);
            let center = Vec3::from_micro(
                dist * dir[0] / norm,
                dist * dir[1] / norm,
                dist * dir[2] / norm,
            );
            let t = rng.random_range(1e-3..=18e-3);
            let receiver = SphereReceiver::new(center, 50e-6).expect("positive radius");
            (
                ChannelParams::new(4e-9, drift, receiver).expect("valid channel"),
                t,
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentInstance {
    pub pulse: PulseShape,
    pub table: ArrivalTable,
    pub priors: Priors,
    pub noise: NoiseParams,
}

/// Small reception instances: I ≤ 4 sub-slots, J ≤ 3, counts up to 200,
/// presence probabilities up to 0.3.
pub fn moment_instances(count: usize, seed: u64) -> Vec<MomentInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let i = rng.random_range(1..=4usize);
            let j = rng.random_range(0..=3usize);
            let counts = (0..i).map(|_| rng.random_range(0..=200u64)).collect();
            let rows = (0..=j)
                .map(|_| (0..i).map(|_| rng.random_range(0.0..0.3)).collect())
                .collect();
            MomentInstance {
                pulse: PulseShape::new(counts, 0.01).expect("valid pulse"),
                table: ArrivalTable::from_presence(0.01, rows).expect("valid table"),
                priors: Priors::new(rng.random_range(0.2..0.8)).expect("valid prior"),
                noise: NoiseParams::new(rng.random_range(0.0..150.0), rng.random_range(1.0..150.0))
                    .expect("valid noise"),
            }
        })
        .collect()
}

/// `|estimate - reference|` in standard errors; exact agreement is required
/// when the standard error vanishes.
fn z_distance(estimate: f64, reference: f64, std_error: f64) -> f64 {
    let gap = (estimate - reference).abs();
    if std_error > 0.0 {
        gap / std_error
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn validate_oracles(
    config: &ExperimentConfig,
    model: &AnalyticModel,
) -> Result<Report, CliError> {
    let v = &config.validate;
    let oracles = &config.oracles;
    let mc = v.mc;
    let seed = oracles.seed;
    let rng =
        |salt: u64, k: usize| RngConfig::new(seed ^ salt.wrapping_add(k as u64), oracles.streams);
    let mut checks = Vec::new();

    let grid = presence_grid(v.presence_points, seed);
    let presence: Vec<Vec<Check>> = grid
        .par_iter()
        .enumerate()
        .map(|(k, (params, t))| -> Result<Vec<Check>, CliError> {
            let d = params.receiver.center;
            let desc = format!(
                "R=({:.1},{:.1},{:.1})um V=({:.1},{:.1},{:.1})um/s t={:.3}ms",
                d.x * 1e6,
                d.y * 1e6,
                d.z * 1e6,
                params.drift.x * 1e6,
                params.drift.y * 1e6,
                params.drift.z * 1e6,
                t * 1e3
            );
            let reference = quadrature_presence_probability(params, *t, v.quadrature_order)?;
            let analytic = (model.presence)(params, *t)?;
            let mut out = vec![if reference > v.presence_floor {
                let rel = (analytic - reference).abs() / reference;
                Check::judged(
                    "presence_analytic",
                    k,
                    desc.clone(),
                    reference,
                    analytic,
                    rel,
                    v.presence_relative,
                )
            } else {
                Check::skipped(
                    "presence_analytic",
                    k,
                    desc.clone(),
                    reference,
                    analytic,
                    v.presence_relative,
                )
            }];
            if mc {
                let est =
                    mc_presence_probability(params, *t, v.presence_trials, rng(0x9e37_79b9, k)?)?;
                let se = (reference * (1.0 - reference) / v.presence_trials as f64).sqrt();
                let z = z_distance(est.value, reference, se);
                out.push(Check::judged(
                    "presence_mc",
                    k,
                    desc,
                    reference,
                    est.value,
                    z,
                    v.z_limit,
                ));
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;
    checks.extend(presence.into_iter().flatten());

    for (k, inst) in moment_instances(v.moment_instances, seed.wrapping_add(1))
        .iter()
        .enumerate()
    {
        let stats = (model.stats)(&inst.pulse, &inst.table, inst.priors, inst.noise)?;
        let desc = format!(
            "I={} J={} g={:?} pi1={:.3}",
            inst.pulse.sub_slots(),
            inst.table.isi_length,
            inst.pulse.counts,
            inst.priors.pi1
        );
        let isi = isi_moments(&inst.pulse, &inst.table, inst.priors)?;
        let gap = (stats.isi.mean - isi.mean)
            .abs()
            .max((stats.isi.variance - isi.variance).abs());
        checks.push(Check::judged(
            "isi_exact",
            k,
            desc.clone(),
            isi.mean,
            stats.isi.mean,
            gap,
            0.0,
        ));
        if mc {
            let m = mc_count_moments(
                &inst.pulse,
                &inst.table,
                inst.priors,
                inst.noise,
                v.moment_trials,
                rng(0x85eb_ca6b, k)?,
            )?;
            let pairs: [(&'static str, f64, McEstimate); 4] = [
                ("moment_mean0", stats.mu0, m.bit0.mean),
                ("moment_var0", stats.var0, m.bit0.variance),
                ("moment_mean1", stats.mu1, m.bit1.mean),
                ("moment_var1", stats.var1, m.bit1.variance),
            ];
            for (name, reference, est) in pairs {
                let z = z_distance(est.value, reference, est.std_error);
                checks.push(Check::judged(
                    name,
                    k,
                    desc.clone(),
                    reference,
                    est.value,
                    z,
                    v.z_limit,
                ));
            }
        }
    }

    if mc && v.ber_bits > 0 {
        let mut k = 0;
        for point in config.points()? {
            for family in config.families() {
                let scenario = point.scenario(family)?;
                let analytic = scenario.evaluate(point.slot)?.relay.p_e;
                let desc = format!(
                    "{} {} t_s={:.3}ms",
                    if point.label.is_empty() {
                        "base"
                    } else {
                        &point.label
                    },
                    family.name(),
                    point.slot * 1e3
                );
                if (1e-3..=0.2).contains(&analytic) {
                    let est = mc_link_ber(&scenario, point.slot, v.ber_bits, rng(0xc2b2_ae35, k)?)?;
                    let rel = (est.value - analytic).abs() / analytic;
                    checks.push(Check::judged(
                        "ber_mc",
                        k,
                        desc,
                        analytic,
                        est.value,
                        rel,
                        v.ber_relative,
                    ));
                } else {
                    checks.push(Check::skipped(
                        "ber_mc",
                        k,
                        desc,
                        analytic,
                        f64::NAN,
                        v.ber_relative,
                    ));
                }
                k += 1;
            }
        }
    }
    Ok(Report { checks })
}

pub fn run_validate(
    config: &ExperimentConfig,
    model: &AnalyticModel,
    out_dir: &Path,
) -> Result<(Report, PathBuf), CliError> {
    let report = validate_oracles(config, model)?;
    let path = report.write_csv(out_dir, &format!("{}_validate.csv", config.prefix()))?;
    Ok((report, path))
}
