//! Symbol-duration optimization for every case and pulse family.

use std::path::{Path, PathBuf};

use mcvd_core::modulation::ShapeFamily;
use mcvd_core::optimizer::{bisection_optimize, derivative_sign_scan, linspace, Optimum, SignScan};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Point};
use crate::{csv_writer, sci, CliError};

#[derive(Debug, Clone)]
pub struct CaseOptimum {
    pub case: String,
    pub family: ShapeFamily,
    pub point: Point,
    pub optimum: Optimum,
    /// Relay BER at `t_star`.
    pub ber_relay: f64,
    pub scan: Option<SignScan>,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub results: Vec<CaseOptimum>,
    pub optimum_csv: PathBuf,
    pub trace_csv: PathBuf,
    pub scan_csv: Option<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn optimize_cases(config: &ExperimentConfig) -> Result<Vec<CaseOptimum>, CliError> {
    let section = config.optimizer.as_ref().ok_or_else(|| {
        CliError::config(
            "optimizer",
            "an [optimizer] table is required for this command",
        )
    })?;
    let opt = section.to_config();
    opt.validate()
        .map_err(|e| CliError::config("optimizer", e.to_string()))?;
    let mut jobs = Vec::new();
    for point in config.points()? {
        for family in config.families() {
            jobs.push((point.clone(), family));
        }
    }
    jobs.into_par_iter()
        .map(|(point, family)| {
            let scenario = point.scenario(family)?;
            let optimum = bisection_optimize(&scenario, &opt)?;
            let ber_relay = scenario.evaluate(optimum.t_star)?.relay.p_e;
            let scan = match section.scan_points {
                0 => None,
                n => Some(derivative_sign_scan(
                    &scenario,
                    &linspace(opt.t_min, opt.t_max, n),
                )?),
            };
            Ok(CaseOptimum {
                case: if point.label.is_empty() {
                    "base".into()
                } else {
                    point.label.clone()
                },
                family,
                point,
                optimum,
                ber_relay,
                scan,
            })
        })
        .collect()
}

pub fn run_optimize(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<OptimizeOutcome, CliError> {
    let results = optimize_cases(config)?;
    let prefix = config.prefix();

    let (mut w, optimum_csv) = csv_writer(out_dir, &format!("{prefix}_optimum.csv"))?;
    w.write_record([
        "case",
        "family",
        "t_star_ms",
        "f_star_bits_per_s",
        "f_upper_bits_per_s",
        "ber_relay_at_t_star",
        "iterations",
        "sign_changes",
        "quasi_concave",
    ])?;
    for r in &results {
        let (changes, qc) = match &r.scan {
            Some(s) => (s.sign_changes.to_string(), s.quasi_concave.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            r.case.clone(),
            r.family.name().into(),
            sci(r.optimum.t_star * 1e3),
            sci(r.optimum.f_star),
            sci(r.optimum.upper),
            sci(r.ber_relay),
            r.optimum.iterations.to_string(),
            changes,
            qc,
        ])?;
    }
    w.flush()?;

    let (mut w, trace_csv) = csv_writer(out_dir, &format!("{prefix}_trace.csv"))?;
    w.write_record([
        "case",
        "family",
        "iteration",
        "level_bits_per_s",
        "feasible",
        "witness_ms",
        "lower_bits_per_s",
        "upper_bits_per_s",
    ])?;
    for r in &results {
        for step in &r.optimum.trace {
            w.write_record([
                r.case.clone(),
                r.family.name().into(),
                step.iteration.to_string(),
                sci(step.level),
                step.feasible.to_string(),
                sci(step.witness * 1e3),
                sci(step.lower),
                sci(step.upper),
            ])?;
        }
    }
    w.flush()?;

    let scan_csv = if results.iter().any(|r| r.scan.is_some()) {
        let (mut w, path) = csv_writer(out_dir, &format!("{prefix}_scan.csv"))?;
        w.write_record([
            "case",
            "family",
            "t_s_ms",
            "objective_bits_per_s",
            "derivative_sign",
        ])?;
        for r in &results {
            let Some(scan) = &r.scan else { continue };
            for ((t, f), s) in scan.grid.iter().zip(&scan.values).zip(&scan.signs) {
                w.write_record([
                    r.case.clone(),
                    r.family.name().into(),
                    sci(t * 1e3),
                    sci(*f),
                    s.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Some(path)
    } else {
        None
    };

    let at_optimum: Vec<Point> = results
        .iter()
        .map(|r| Point {
            slot: r.optimum.t_star,
            ..r.point.clone()
        })
        .collect();
    let warnings = crate::range_warnings(&at_optimum);
    Ok(OptimizeOutcome {
        results,
        optimum_csv,
        trace_csv,
        scan_csv,
        warnings,
    })
}
