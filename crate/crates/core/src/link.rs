//! The full S→R→D link: channel geometry for all three hops, the pulse, and
//! the analytic pipeline from arrival tables to BER and energy.

use crate::ber::{
    direct_ber, exact_chain_ber, relay_ber, relay_one_probability, success_probability, BerResult,
};
use crate::channel::{
    arrival_table, second_hop_params, ArrivalTable, ChannelParams, SphereReceiver, Vec3,
};
use crate::energy::{total_energy, EnergyParams};
use crate::error::{domain, Error, Result};
use crate::modulation::PulseShape;
use crate::reception::{link_stats, map_threshold, LinkStats, NoiseParams, Priors};

/// Prior used for the relay's own bits on the second hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SecondHopPrior {
    /// Reuse the source prior.
    #[default]
    Source,
    /// `pi1 P(detect) + pi0 P(false alarm)` at the relay.
    Exact,
}

/// Node positions and transport constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    /// Diffusion coefficient of the source's molecules (m²/s).
    pub diffusion_source: f64,
    /// Diffusion coefficient of the relay's molecules (m²/s).
    pub diffusion_relay: f64,
    pub drift: Vec3,
    pub relay: SphereReceiver,
    pub dest: SphereReceiver,
}

impl Geometry {
    /// Destination at twice the relay position, same radius.
    pub fn with_mirrored_dest(diffusion: f64, drift: Vec3, relay: SphereReceiver) -> Result<Self> {
        Ok(Self {
            diffusion_source: diffusion,
            diffusion_relay: diffusion,
            drift,
            relay,
            dest: SphereReceiver::new(relay.center * 2.0, relay.radius)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub source_relay: ChannelParams,
    pub relay_dest: ChannelParams,
    pub source_dest: ChannelParams,
    /// Pulse sent for bit "1" by both transmitters; its slot is replaced at
    /// evaluation time.
    pub pulse: PulseShape,
    pub isi_length: usize,
    pub priors: Priors,
    pub noise: NoiseParams,
    pub second_hop_prior: SecondHopPrior,
    pub energy: EnergyParams,
}

impl Scenario {
    pub fn new(
        geometry: Geometry,
        pulse: PulseShape,
        isi_length: usize,
        priors: Priors,
        noise: NoiseParams,
    ) -> Result<Self> {
        let source_relay =
            ChannelParams::new(geometry.diffusion_source, geometry.drift, geometry.relay)?;
        let relay_dest = second_hop_params(
            geometry.relay.center,
            geometry.dest.center,
            geometry.dest.radius,
            geometry.diffusion_relay,
            geometry.drift,
        )?;
        let source_dest =
            ChannelParams::new(geometry.diffusion_source, geometry.drift, geometry.dest)?;
        let scenario = Self {
            source_relay,
            relay_dest,
            source_dest,
            pulse,
            isi_length,
            priors,
            noise,
            second_hop_prior: SecondHopPrior::default(),
            energy: EnergyParams::default(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.source_relay.validate()?;
        self.relay_dest.validate()?;
        self.source_dest.validate()?;
        self.noise.validate()?;
        self.energy.validate()?;
        Priors::new(self.priors.pi1)?;
        if self.pulse.sub_slots() == 0 {
            return Err(domain("pulse needs at least one sub-slot"));
        }
        if self.isi_length > crate::channel::MAX_ISI_LENGTH {
            return Err(domain(format!(
                "ISI length {} is too long",
                self.isi_length
            )));
        }
        Ok(())
    }

    /// Runs the analytic pipeline at slot duration `slot`.
    pub fn evaluate(&self, slot: f64) -> Result<Evaluation> {
        let pulse = self.pulse.with_slot(slot)?;
        let (i, j) = (pulse.sub_slots(), self.isi_length);

        let table_sr = arrival_table(&self.source_relay, slot, i, j)?;
        let table_rd = arrival_table(&self.relay_dest, slot, i, j)?;
        let table_sd = arrival_table(&self.source_dest, slot, i, j)?;

        let stats_sr = detector(&pulse, &table_sr, self.priors, self.noise)?;
        let relay_prior = match self.second_hop_prior {
            SecondHopPrior::Source => self.priors,
            SecondHopPrior::Exact => Priors::new(relay_one_probability(&stats_sr, self.priors)?)?,
        };
        let stats_rd = detector(&pulse, &table_rd, relay_prior, self.noise)?;
        let stats_sd = detector(&pulse, &table_sd, self.priors, self.noise)?;

        let direct = direct_ber(&stats_sd)?;
        let relay = relay_ber(&stats_sr, &stats_rd)?;
        let exact_chain = exact_chain_ber(&stats_sr, &stats_rd, self.priors)?;
        let energy = total_energy(&pulse, &self.energy)?;
        Ok(Evaluation {
            slot,
            objective: success_probability(relay.p_e, 1) / slot,
            table_sr,
            table_rd,
            table_sd,
            stats_sr,
            stats_rd,
            stats_sd,
            relay_prior: relay_prior.pi1,
            direct,
            relay,
            exact_chain,
            energy,
        })
    }

    /// Successfully received bits per second at slot duration `slot`.
    pub fn objective(&self, slot: f64) -> Result<f64> {
        Ok(self.evaluate(slot)?.objective)
    }
}

/// Stats with the MAP threshold set. Indistinguishable hypotheses get
/// `tau = mu0`, which makes the hop a coin flip.
fn detector(
    pulse: &PulseShape,
    table: &ArrivalTable,
    priors: Priors,
    noise: NoiseParams,
) -> Result<LinkStats> {
    let stats = link_stats(pulse, table, priors, noise)?;
    let tau = match map_threshold(&stats, priors) {
        Ok(tau) => tau,
        Err(Error::NoThreshold) => stats.mu0,
        Err(e) => return Err(e),
    };
    Ok(stats.with_threshold(tau))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub slot: f64,
    pub table_sr: ArrivalTable,
    pub table_rd: ArrivalTable,
    pub table_sd: ArrivalTable,
    pub stats_sr: LinkStats,
    pub stats_rd: LinkStats,
    pub stats_sd: LinkStats,
    /// Prior of the relay's bits used on the second hop.
    pub relay_prior: f64,
    pub direct: BerResult,
    pub relay: BerResult,
    /// Two-hop error computed through the relay's decision chain.
    pub exact_chain: f64,
    /// Energy (J) to send bit "1".
    pub energy: f64,
    /// Successfully received bits per second.
    pub objective: f64,
}

impl Evaluation {
    /// Clamped `q` entries over all three tables.
    pub fn clamp_count(&self) -> usize {
        self.table_sr.clamp_count + self.table_rd.clamp_count + self.table_sd.clamp_count
    }
}
