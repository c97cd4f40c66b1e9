//! One-axis parameter sweeps written as CSV in sweep order.

use std::path::{Path, PathBuf};

use mcvd_core::modulation::ShapeFamily;
use mcvd_core::montecarlo::{mc_link_ber, McEstimate, RngConfig};
use mcvd_core::Error;
use rayon::prelude::*;

use crate::config::{sweep_values, Axis, ExperimentConfig, Point};
use crate::{csv_writer, sci, CliError};

#[derive(Debug, Clone, PartialEq)]
pub struct RowValues {
    pub n_total: u64,
    /// J
    pub energy: f64,
    pub ber_direct: f64,
    pub ber_relay: f64,
    pub ber_exact_chain: f64,
    /// bits/s
    pub objective: f64,
    pub clamped_q: usize,
    pub mc: Option<McEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowOutcome {
    Ok(RowValues),
    /// The energy budget cannot pay for a single molecule.
    Infeasible(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub case: String,
    pub family: ShapeFamily,
    /// In the axis' file units.
    pub axis_value: f64,
    pub point: Point,
    pub outcome: RowOutcome,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub axis: Axis,
    pub rows: Vec<SweepRow>,
    pub csv: PathBuf,
    pub warnings: Vec<String>,
}

impl SweepOutcome {
    pub fn infeasible_rows(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!(r.outcome, RowOutcome::Infeasible(_)))
            .count()
    }
}

/// Evaluates every (case, family, axis value) combination; rows come back in
/// that nesting order whatever order they finish in.
pub fn sweep_rows(config: &ExperimentConfig) -> Result<(Axis, Vec<SweepRow>), CliError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("sweep", "a [sweep] table is required for this command"))?;
    let values = sweep_values(sweep)?;
    let mut jobs = Vec::new();
    for base in config.points()? {
        for family in config.families() {
            for &value in &values {
                jobs.push((
                    base.label.clone(),
                    family,
                    value,
                    base.along(sweep.axis, value),
                ));
            }
        }
    }
    let oracles = &config.oracles;
    let rows = jobs
        .into_par_iter()
        .enumerate()
        .map(|(k, (case, family, axis_value, point))| {
            let mc = oracles
                .mc
                .then(|| RngConfig::new(oracles.seed.wrapping_add(k as u64), oracles.streams))
                .transpose()?
                .map(|rng| (oracles.mc_bits, rng));
            let outcome = evaluate_row(&point, family, mc)
                .map_err(|e| row_error(e, k, sweep.axis, axis_value))?;
            Ok(SweepRow {
                case,
                family,
                axis_value,
                point,
                outcome,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((sweep.axis, rows))
}

fn row_error(e: Error, k: usize, axis: Axis, value: f64) -> CliError {
    match e {
        Error::Domain(msg) => {
            CliError::config(format!("sweep row {k} ({} = {value})", axis.column()), msg)
        }
        other => CliError::Core(other),
    }
}

/// Analytic pipeline at one point, plus the Monte Carlo BER when requested.
pub fn evaluate_row(
    point: &Point,
    family: ShapeFamily,
    mc: Option<(u64, RngConfig)>,
) -> Result<RowOutcome, Error> {
    let scenario = match point.scenario(family) {
        Ok(s) => s,
        Err(Error::InfeasibleBudget { budget, minimum }) => {
            return Ok(RowOutcome::Infeasible(format!(
                "infeasible: budget {:.3e} fJ below minimum {:.3e} fJ",
                budget * 1e15,
                minimum * 1e15
            )));
        }
        Err(e) => return Err(e),
    };
    let eval = scenario.evaluate(point.slot)?;
    let mc = match mc {
        Some((bits, rng)) => Some(mc_link_ber(&scenario, point.slot, bits, rng)?),
        None => None,
    };
    Ok(RowOutcome::Ok(RowValues {
        n_total: scenario.pulse.total(),
        energy: eval.energy,
        ber_direct: eval.direct.p_e,
        ber_relay: eval.relay.p_e,
        ber_exact_chain: eval.exact_chain,
        objective: eval.objective,
        clamped_q: eval.clamp_count(),
        mc,
    }))
}

pub fn run_sweep(config: &ExperimentConfig, out_dir: &Path) -> Result<SweepOutcome, CliError> {
    let (axis, rows) = sweep_rows(config)?;
    let prefix = config.prefix();
    let csv = write_rows(out_dir, &format!("{prefix}_sweep.csv"), axis, &rows)?;
    if config.output.gnuplot {
        write_gnuplot(out_dir, &prefix, axis, &csv)?;
    }
    let warnings = crate::range_warnings(rows.iter().map(|r| &r.point));
    Ok(SweepOutcome {
        axis,
        rows,
        csv,
        warnings,
    })
}

fn write_rows(dir: &Path, name: &str, axis: Axis, rows: &[SweepRow]) -> Result<PathBuf, CliError> {
    let (mut w, path) = csv_writer(dir, name)?;
    let mut header = vec!["case", "family", axis.column()];
    if axis != Axis::SlotDuration {
        header.push("t_s_ms");
    }
    header.extend([
        "n_total",
        "energy_fJ",
        "ber_direct",
        "ber_relay",
        "ber_relay_exact_chain",
        "objective_bits_per_s",
        "clamped_q",
        "mc_ber_relay",
        "mc_std_error",
        "mc_bits",
        "status",
    ]);
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![
            if row.case.is_empty() {
                "base".to_string()
            } else {
                row.case.clone()
            },
            row.family.name().to_string(),
            sci(row.axis_value),
        ];
        if axis != Axis::SlotDuration {
            rec.push(sci(row.point.slot * 1e3));
        }
        match &row.outcome {
            RowOutcome::Ok(v) => {
                rec.extend([
                    v.n_total.to_string(),
                    sci(v.energy * 1e15),
                    sci(v.ber_direct),
                    sci(v.ber_relay),
                    sci(v.ber_exact_chain),
                    sci(v.objective),
                    v.clamped_q.to_string(),
                ]);
                match &v.mc {
                    Some(m) => rec.extend([sci(m.value), sci(m.std_error), m.trials.to_string()]),
                    None => rec.extend([String::new(), String::new(), String::new()]),
                }
                rec.push("ok".into());
            }
            RowOutcome::Infeasible(msg) => {
                rec.extend(std::iter::repeat_n(String::new(), 10));
                rec.push(msg.clone());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(path)
}

fn write_gnuplot(dir: &Path, prefix: &str, axis: Axis, csv: &Path) -> Result<(), CliError> {
    let file = csv
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let script = format!(
        "set datafile separator ','\n\
         set logscale y\n\
         set xlabel '{col}'\n\
         set ylabel 'BER'\n\
         set key autotitle columnhead\n\
         plot '{file}' using '{col}':'ber_relay' with linespoints, \\\n     \
         '{file}' using '{col}':'ber_direct' with linespoints\n",
        col = axis.column(),
    );
    std::fs::write(dir.join(format!("{prefix}_sweep.gp")), script)?;
    Ok(())
}
