//! Experiment files: TOML with one table per concern, parsed strictly and
//! then resolved to SI units.

use std::path::{Path, PathBuf};

use mcvd_core::channel::{SphereReceiver, Vec3};
use mcvd_core::energy::{EnergyParams, ZEPTO};
use mcvd_core::link::{Geometry, Scenario, SecondHopPrior};
use mcvd_core::modulation::{make_pulse, scale_to_energy, ShapeFamily};
use mcvd_core::optimizer::OptimizerConfig;
use mcvd_core::reception::{NoiseParams, Priors};
use serde::Deserialize;

use crate::CliError;

const FEMTO: f64 = 1e-15;
const MICRO: f64 = 1e-6;
const MILLI: f64 = 1e-3;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelSection,
    pub pulse: PulseSection,
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub energy: EnergySection,
    pub sweep: Option<SweepSection>,
    pub optimizer: Option<OptimizerSection>,
    #[serde(default, rename = "case")]
    pub cases: Vec<CaseSection>,
    #[serde(default)]
    pub oracles: OracleSection,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    /// m²/s
    #[serde(default = "default_diffusion")]
    pub diffusion: f64,
    /// Diffusion coefficient of the relay's molecule type; defaults to `diffusion`.
    pub diffusion_relay: Option<f64>,
    pub drift_um_s: [f64; 3],
    pub relay_um: [f64; 3],
    /// Defaults to twice the relay position.
    pub dest_um: Option<[f64; 3]>,
    #[serde(default = "default_radius")]
    pub radius_um: f64,
    pub dest_radius_um: Option<f64>,
    /// Recorded for reference; the transport model takes `diffusion` directly.
    pub stokes_radius_nm: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    #[serde(default = "default_families")]
    pub families: Vec<String>,
    #[serde(default = "default_rate")]
    pub exponential_rate: f64,
    #[serde(default = "default_offset")]
    pub sinc_offset: f64,
    #[serde(default = "default_sub_slots")]
    pub sub_slots: usize,
    #[serde(rename = "budget_fJ")]
    pub budget_fj: Option<f64>,
    pub molecules: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    #[serde(default = "default_isi")]
    pub isi_length: usize,
    #[serde(default = "default_pi1")]
    pub pi1: f64,
    #[serde(default = "default_noise")]
    pub noise_mean: f64,
    #[serde(default = "default_noise")]
    pub noise_var: f64,
    #[serde(default = "default_ts")]
    pub t_s_ms: f64,
    #[serde(default)]
    pub second_hop_prior: HopPrior,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            isi_length: default_isi(),
            pi1: default_pi1(),
            noise_mean: default_noise(),
            noise_var: default_noise(),
            t_s_ms: default_ts(),
            second_hop_prior: HopPrior::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum HopPrior {
    #[default]
    Source,
    Exact,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    #[serde(rename = "e_am_zJ")]
    pub e_am_zj: Option<f64>,
    /// zJ per nm² of vesicle surface.
    #[serde(rename = "e_sy_zJ")]
    pub e_sy_zj: Option<f64>,
    #[serde(rename = "e_ph_zJ")]
    pub e_ph_zj: Option<f64>,
    #[serde(rename = "e_e_zJ")]
    pub e_e_zj: Option<f64>,
    pub n_aa: Option<u32>,
    pub r_mm_nm: Option<f64>,
    pub r_unit_nm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Axis {
    #[serde(rename = "t_s")]
    SlotDuration,
    #[serde(rename = "R_y")]
    RelayY,
    #[serde(rename = "R_z")]
    RelayZ,
    #[serde(rename = "V_y")]
    DriftY,
    #[serde(rename = "V_z")]
    DriftZ,
    #[serde(rename = "J")]
    IsiLength,
    #[serde(rename = "energy_budget")]
    EnergyBudget,
}

impl Axis {
    /// CSV column name, unit included.
    pub fn column(self) -> &'static str {
        match self {
            Axis::SlotDuration => "t_s_ms",
            Axis::RelayY => "R_y_um",
            Axis::RelayZ => "R_z_um",
            Axis::DriftY => "V_y_um_s",
            Axis::DriftZ => "V_z_um_s",
            Axis::IsiLength => "J",
            Axis::EnergyBudget => "energy_budget_fJ",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Axis,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_t_min")]
    pub t_min_ms: f64,
    #[serde(default = "default_t_max")]
    pub t_max_ms: f64,
    #[serde(default = "default_samples")]
    pub feasibility_samples: usize,
    #[serde(default = "default_level_upper")]
    pub level_upper: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Points of the derivative-sign scan; 0 skips it.
    #[serde(default = "default_scan_points")]
    pub scan_points: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            t_min_ms: default_t_min(),
            t_max_ms: default_t_max(),
            feasibility_samples: default_samples(),
            level_upper: default_level_upper(),
            max_iterations: default_max_iterations(),
            scan_points: default_scan_points(),
        }
    }
}

impl OptimizerSection {
    pub fn to_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            epsilon: self.epsilon,
            t_min: self.t_min_ms * MILLI,
            t_max: self.t_max_ms * MILLI,
            feasibility_samples: self.feasibility_samples,
            level_upper_init: self.level_upper,
            max_iterations: self.max_iterations,
        }
    }
}

/// Overrides applied on top of the base scenario.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSection {
    pub label: String,
    pub relay_um: Option<[f64; 3]>,
    pub dest_um: Option<[f64; 3]>,
    pub drift_um_s: Option<[f64; 3]>,
    pub isi_length: Option<usize>,
    pub t_s_ms: Option<f64>,
    #[serde(rename = "budget_fJ")]
    pub budget_fj: Option<f64>,
    pub molecules: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default)]
    pub mc: bool,
    #[serde(default = "default_mc_bits")]
    pub mc_bits: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_streams")]
    pub streams: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            mc: false,
            mc_bits: default_mc_bits(),
            seed: default_seed(),
            streams: default_streams(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    /// Run the Monte Carlo checks.
    #[serde(default = "default_true")]
    pub mc: bool,
    #[serde(default = "default_presence_points")]
    pub presence_points: usize,
    #[serde(default = "default_presence_trials")]
    pub presence_trials: u64,
    #[serde(default = "default_moment_instances")]
    pub moment_instances: usize,
    #[serde(default = "default_moment_trials")]
    pub moment_trials: u64,
    /// Bits per end-to-end BER check; 0 skips the BER checks.
    #[serde(default = "default_ber_bits")]
    pub ber_bits: u64,
    #[serde(default = "default_order")]
    pub quadrature_order: usize,
    #[serde(default = "default_relative")]
    pub presence_relative: f64,
    #[serde(default = "default_floor")]
    pub presence_floor: f64,
    #[serde(default = "default_z")]
    pub z_limit: f64,
    #[serde(default = "default_ber_relative")]
    pub ber_relative: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            mc: true,
            presence_points: default_presence_points(),
            presence_trials: default_presence_trials(),
            moment_instances: default_moment_instances(),
            moment_trials: default_moment_trials(),
            ber_bits: default_ber_bits(),
            quadrature_order: default_order(),
            presence_relative: default_relative(),
            presence_floor: default_floor(),
            z_limit: default_z(),
            ber_relative: default_ber_relative(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub prefix: Option<String>,
    #[serde(default)]
    pub gnuplot: bool,
}

fn default_diffusion() -> f64 {
    4e-9
}
fn default_radius() -> f64 {
    50.0
}
fn default_families() -> Vec<String> {
    vec!["exponential".into()]
}
fn default_rate() -> f64 {
    mcvd_core::modulation::DEFAULT_EXPONENTIAL_RATE
}
fn default_offset() -> f64 {
    mcvd_core::modulation::DEFAULT_SINC_OFFSET
}
fn default_sub_slots() -> usize {
    10
}
fn default_isi() -> usize {
    10
}
fn default_pi1() -> f64 {
    0.5
}
fn default_noise() -> f64 {
    100.0
}
fn default_ts() -> f64 {
    18.0
}
fn default_epsilon() -> f64 {
    0.01
}
fn default_t_min() -> f64 {
    1.0
}
fn default_t_max() -> f64 {
    100.0
}
fn default_samples() -> usize {
    200
}
fn default_level_upper() -> f64 {
    1e3
}
fn default_max_iterations() -> usize {
    64
}
fn default_scan_points() -> usize {
    200
}
fn default_mc_bits() -> u64 {
    100_000
}
fn default_seed() -> u64 {
    0x5eed
}
fn default_streams() -> usize {
    64
}
fn default_true() -> bool {
    true
}
fn default_presence_points() -> usize {
    20
}
fn default_presence_trials() -> u64 {
    1_000_000
}
fn default_moment_instances() -> usize {
    5
}
fn default_moment_trials() -> u64 {
    200_000
}
fn default_ber_bits() -> u64 {
    200_000
}
fn default_order() -> usize {
    16
}
fn default_relative() -> f64 {
    0.05
}
fn default_floor() -> f64 {
    1e-4
}
fn default_z() -> f64 {
    3.0
}
fn default_ber_relative() -> f64 {
    0.10
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| CliError::config("<document>", e.to_string()))?;
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(path, e.into_inner().message().to_string())
        })?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config("--config", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    /// Structural checks that serde cannot express.
    fn check(&self) -> Result<(), CliError> {
        let budget_modes = usize::from(self.pulse.budget_fj.is_some())
            + usize::from(self.pulse.molecules.is_some());
        if budget_modes != 1 {
            return Err(CliError::config(
                "pulse",
                "set exactly one of budget_fJ or molecules",
            ));
        }
        if self.pulse.families.is_empty() {
            return Err(CliError::config(
                "pulse.families",
                "at least one pulse family is required",
            ));
        }
        for (k, name) in self.pulse.families.iter().enumerate() {
            parse_family(name, &self.pulse)
                .map_err(|msg| CliError::config(format!("pulse.families[{k}]"), msg))?;
        }
        for (k, case) in self.cases.iter().enumerate() {
            if case.budget_fj.is_some() && case.molecules.is_some() {
                return Err(CliError::config(
                    format!("case[{k}]"),
                    "set at most one of budget_fJ or molecules",
                ));
            }
        }
        if let Some(sweep) = &self.sweep {
            sweep_values(sweep)?;
        }
        if self.oracles.streams == 0 {
            return Err(CliError::config(
                "oracles.streams",
                "at least one stream is required",
            ));
        }
        Ok(())
    }

    pub fn families(&self) -> Vec<ShapeFamily> {
        self.pulse
            .families
            .iter()
            .map(|name| parse_family(name, &self.pulse).expect("checked at load"))
            .collect()
    }

    pub fn energy_params(&self) -> Result<EnergyParams, CliError> {
        let e = &self.energy;
        let mut p = EnergyParams::default();
        if let Some(v) = e.e_am_zj {
            p.e_am = v * ZEPTO;
        }
        if let Some(v) = e.e_sy_zj {
            p.e_sy = v * ZEPTO;
        }
        if let Some(v) = e.e_ph_zj {
            p.e_ph = v * ZEPTO;
        }
        if let Some(v) = e.e_e_zj {
            p.e_e = v * ZEPTO;
        }
        if let Some(v) = e.n_aa {
            p.n_aa = v;
        }
        if let Some(v) = e.r_mm_nm {
            p.r_mm = v * 1e-9;
        }
        if let Some(v) = e.r_unit_nm {
            p.r_unit_nm = v;
        }
        p.validate()
            .map_err(|err| CliError::config("energy", err.to_string()))?;
        Ok(p)
    }

    /// The base scenario, or one per `[[case]]` when cases are present.
    pub fn points(&self) -> Result<Vec<Point>, CliError> {
        let base = self.base_point()?;
        if self.cases.is_empty() {
            return Ok(vec![base]);
        }
        Ok(self.cases.iter().map(|case| base.with_case(case)).collect())
    }

    fn base_point(&self) -> Result<Point, CliError> {
        let c = &self.channel;
        let l = &self.link;
        let budget = match (self.pulse.budget_fj, self.pulse.molecules) {
            (Some(fj), None) => Budget::Energy(fj * FEMTO),
            (None, Some(n)) => Budget::Molecules(n),
            _ => unreachable!("checked at load"),
        };
        Ok(Point {
            label: String::new(),
            diffusion: c.diffusion,
            diffusion_relay: c.diffusion_relay.unwrap_or(c.diffusion),
            drift: micro(c.drift_um_s),
            relay: micro(c.relay_um),
            dest: c.dest_um.map(micro),
            radius: c.radius_um * MICRO,
            dest_radius: c.dest_radius_um.unwrap_or(c.radius_um) * MICRO,
            sub_slots: self.pulse.sub_slots,
            budget,
            isi_length: l.isi_length,
            pi1: l.pi1,
            noise_mean: l.noise_mean,
            noise_var: l.noise_var,
            slot: l.t_s_ms * MILLI,
            second_hop_prior: match l.second_hop_prior {
                HopPrior::Source => SecondHopPrior::Source,
                HopPrior::Exact => SecondHopPrior::Exact,
            },
            energy: self.energy_params()?,
        })
    }

    pub fn prefix(&self) -> String {
        self.output.prefix.clone().unwrap_or_else(|| "mcvd".into())
    }
}

fn parse_family(name: &str, pulse: &PulseSection) -> Result<ShapeFamily, String> {
    match name {
        "uniform" => Ok(ShapeFamily::Uniform),
        "exponential" => Ok(ShapeFamily::Exponential {
            rate: pulse.exponential_rate,
        }),
        "sinc" => Ok(ShapeFamily::Sinc {
            offset: pulse.sinc_offset,
        }),
        "cosine" => Ok(ShapeFamily::Cosine),
        other => Err(format!(
            "unknown pulse family `{other}` (uniform, exponential, sinc, cosine)"
        )),
    }
}

/// Axis values in the file's units.
pub fn sweep_values(sweep: &SweepSection) -> Result<Vec<f64>, CliError> {
    let values = match (&sweep.values, sweep.start, sweep.stop, sweep.points) {
        (Some(v), None, None, None) => v.clone(),
        (None, Some(a), Some(b), Some(n)) => mcvd_core::optimizer::linspace(a, b, n),
        _ => {
            return Err(CliError::config(
                "sweep",
                "give either `values` or all of `start`, `stop`, `points`",
            ));
        }
    };
    for (k, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(CliError::config(
                format!("sweep.values[{k}]"),
                "must be finite",
            ));
        }
        if sweep.axis == Axis::IsiLength && (v.fract() != 0.0 || *v < 0.0) {
            return Err(CliError::config(
                format!("sweep.values[{k}]"),
                "ISI length must be a non-negative integer",
            ));
        }
    }
    Ok(values)
}

fn micro(v: [f64; 3]) -> Vec3 {
    Vec3::from_micro(v[0], v[1], v[2])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    /// Joules available for bit "1".
    Energy(f64),
    Molecules(u64),
}

/// One fully resolved operating point in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub label: String,
    pub diffusion: f64,
    pub diffusion_relay: f64,
    pub drift: Vec3,
    pub relay: Vec3,
    /// `None` keeps the destination at twice the relay position.
    pub dest: Option<Vec3>,
    pub radius: f64,
    pub dest_radius: f64,
    pub sub_slots: usize,
    pub budget: Budget,
    pub isi_length: usize,
    pub pi1: f64,
    pub noise_mean: f64,
    pub noise_var: f64,
    pub slot: f64,
    pub second_hop_prior: SecondHopPrior,
    pub energy: EnergyParams,
}

impl Point {
    fn with_case(&self, case: &CaseSection) -> Point {
        let mut p = self.clone();
        p.label = case.label.clone();
        if let Some(r) = case.relay_um {
            p.relay = micro(r);
        }
        if let Some(d) = case.dest_um {
            p.dest = Some(micro(d));
        }
        if let Some(v) = case.drift_um_s {
            p.drift = micro(v);
        }
        if let Some(j) = case.isi_length {
            p.isi_length = j;
        }
        if let Some(t) = case.t_s_ms {
            p.slot = t * MILLI;
        }
        if let Some(fj) = case.budget_fj {
            p.budget = Budget::Energy(fj * FEMTO);
        }
        if let Some(n) = case.molecules {
            p.budget = Budget::Molecules(n);
        }
        p
    }

    /// Moves the point along `axis` to `value` (file units).
    pub fn along(&self, axis: Axis, value: f64) -> Point {
        let mut p = self.clone();
        match axis {
            Axis::SlotDuration => p.slot = value * MILLI,
            Axis::RelayY => p.relay.y = value * MICRO,
            Axis::RelayZ => p.relay.z = value * MICRO,
            Axis::DriftY => p.drift.y = value * MICRO,
            Axis::DriftZ => p.drift.z = value * MICRO,
            Axis::IsiLength => p.isi_length = value as usize,
            Axis::EnergyBudget => p.budget = Budget::Energy(value * FEMTO),
        }
        p
    }

    pub fn dest_center(&self) -> Vec3 {
        self.dest.unwrap_or(self.relay * 2.0)
    }

    pub fn scenario(&self, family: ShapeFamily) -> mcvd_core::Result<Scenario> {
        let pulse = match self.budget {
            Budget::Energy(joules) => {
                scale_to_energy(family, self.sub_slots, self.slot, joules, &self.energy)?
            }
            Budget::Molecules(n) => make_pulse(family, self.sub_slots, n, self.slot)?,
        };
        let geometry = Geometry {
            diffusion_source: self.diffusion,
            diffusion_relay: self.diffusion_relay,
            drift: self.drift,
            relay: SphereReceiver::new(self.relay, self.radius)?,
            dest: SphereReceiver::new(self.dest_center(), self.dest_radius)?,
        };
        let mut scenario = Scenario::new(
            geometry,
            pulse,
            self.isi_length,
            Priors::new(self.pi1)?,
            NoiseParams::new(self.noise_mean, self.noise_var)?,
        )?;
        scenario.second_hop_prior = self.second_hop_prior;
        scenario.energy = self.energy;
        Ok(scenario)
    }

    /// Values outside the published parameter ranges as
    /// `(name, value, lo, hi)`; these are warnings, never errors.
    pub fn range_violations(&self) -> Vec<(&'static str, f64, f64, f64)> {
        let [vx, vy, vz] = self.drift.to_array().map(|v| v / MICRO);
        let checks = [
            ("diffusion_m2_s", self.diffusion, 4e-9, 4e-9),
            ("V_x_um_s", vx, 1.0, 100.0),
            ("V_y_um_s", vy, 1.0, 100.0),
            ("V_z_um_s", vz, 1.0, 100.0),
            (
                "dest_distance_um",
                self.dest_center().norm() / MICRO,
                20.0,
                200.0,
            ),
            ("t_s_ms", self.slot / MILLI, 1.0, 16.0),
            ("radius_um", self.radius / MICRO, 50.0, 50.0),
            ("J", self.isi_length as f64, 1.0, 30.0),
            ("I", self.sub_slots as f64, 10.0, 10.0),
        ];
        checks
            .into_iter()
            .filter(|&(_, v, lo, hi)| !(lo..=hi).contains(&v))
            .collect()
    }
}
