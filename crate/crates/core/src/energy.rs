//! Exocytosis energy for transmitting bit "1".
//!
//! Every non-empty sub-slot packs its `g(i)` molecules into one vesicle whose
//! capacity equals `g(i)`, so the vesicle radius grows as `g(i)^(1/3)`.

use crate::error::{domain, Result};
use crate::modulation::PulseShape;

/// One zeptojoule.
pub const ZEPTO: f64 = 1e-21;

/// Vesicle surface area enters the synthesis cost in square nanometers.
pub const VESICLE_AREA_UNIT_M2: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// Cost of adding one amino acid to a chain (J).
    pub e_am: f64,
    /// Vesicle synthesis cost per unit area (J per nm²).
    pub e_sy: f64,
    /// Phosphorylation cost (J).
    pub e_ph: f64,
    /// Cost of releasing one vesicle into the medium (J).
    pub e_e: f64,
    /// Amino acids per messenger protein.
    pub n_aa: u32,
    /// Messenger molecule radius (m).
    pub r_mm: f64,
    /// Transmitter unit radius (nm).
    pub r_unit_nm: f64,
}

impl Default for EnergyParams {
    /// Insulin-like messenger with the usual exocytosis costs.
    fn default() -> Self {
        Self {
            e_am: 202.88 * ZEPTO,
            e_sy: 415.0 * ZEPTO,
            e_ph: 83.0 * ZEPTO,
            e_e: 830.0 * ZEPTO,
            n_aa: 51,
            r_mm: 2.5e-9,
            r_unit_nm: 10_000.0,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("e_am", self.e_am),
            ("e_sy", self.e_sy),
            ("e_ph", self.e_ph),
            ("e_e", self.e_e),
            ("r_mm", self.r_mm),
            ("r_unit_nm", self.r_unit_nm),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(domain(format!("{name} must be positive, got {value}")));
            }
        }
        if self.n_aa < 2 {
            return Err(domain(format!(
                "n_aa must be at least 2, got {}",
                self.n_aa
            )));
        }
        Ok(())
    }

    /// Synthesis cost of one messenger molecule.
    pub fn molecule_cost(&self) -> f64 {
        self.e_am * f64::from(self.n_aa - 1)
    }

    /// Cost of carrying one vesicle to the membrane.
    pub fn carry_cost(&self) -> f64 {
        self.e_ph * (self.r_unit_nm / 2.0 / 8.0).ceil()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub synthesis: f64,
    pub vesicle: f64,
    pub carry: f64,
    pub release: f64,
    pub total: f64,
}

impl std::ops::Add for EnergyBreakdown {
    type Output = EnergyBreakdown;
    fn add(self, o: EnergyBreakdown) -> EnergyBreakdown {
        EnergyBreakdown {
            synthesis: self.synthesis + o.synthesis,
            vesicle: self.vesicle + o.vesicle,
            carry: self.carry + o.carry,
            release: self.release + o.release,
            total: self.total + o.total,
        }
    }
}

/// Radius (m) of a vesicle holding `count` molecules of radius `r_mm`.
pub fn vesicle_radius(count: u64, r_mm: f64) -> Result<f64> {
    if count < 1 {
        return Err(domain("a vesicle holds at least one molecule"));
    }
    if !(r_mm > 0.0 && r_mm.is_finite()) {
        return Err(domain(format!(
            "molecule radius must be positive, got {r_mm}"
        )));
    }
    Ok(3f64.sqrt() * r_mm * (count as f64).cbrt())
}

/// Number of molecules a vesicle of radius `r_v` holds.
pub fn vesicle_capacity(r_v: f64, r_mm: f64) -> Result<f64> {
    if !(r_v > 0.0 && r_mm > 0.0 && r_v.is_finite() && r_mm.is_finite()) {
        return Err(domain(format!(
            "radii must be positive, got r_v={r_v}, r_mm={r_mm}"
        )));
    }
    Ok((r_v / (r_mm * 3f64.sqrt())).powi(3))
}

/// Energy of one sub-slot releasing `count` molecules. An empty sub-slot
/// makes no vesicle and costs nothing.
pub fn subslot_energy(count: u64, params: &EnergyParams) -> Result<EnergyBreakdown> {
    params.validate()?;
    if count == 0 {
        return Ok(EnergyBreakdown::default());
    }
    let synthesis = params.molecule_cost() * count as f64;
    let r_v = vesicle_radius(count, params.r_mm)?;
    let area = 4.0 * std::f64::consts::PI * r_v * r_v / VESICLE_AREA_UNIT_M2;
    let vesicle = params.e_sy * area;
    let carry = params.carry_cost();
    let release = params.e_e;
    Ok(EnergyBreakdown {
        synthesis,
        vesicle,
        carry,
        release,
        total: synthesis + vesicle + carry + release,
    })
}

/// Summed breakdown over all sub-slots of a pulse.
pub fn pulse_energy(pulse: &PulseShape, params: &EnergyParams) -> Result<EnergyBreakdown> {
    pulse
        .counts
        .iter()
        .try_fold(EnergyBreakdown::default(), |acc, &g| {
            Ok(acc + subslot_energy(g, params)?)
        })
}

/// Total energy (J) to transmit bit "1" with `pulse`.
pub fn total_energy(pulse: &PulseShape, params: &EnergyParams) -> Result<f64> {
    pulse
        .counts
        .iter()
        .map(|&g| subslot_energy(g, params).map(|e| e.total))
        .sum()
}
