//! Stochastic oracles for the analytic pipeline.
//!
//! Work is split over a fixed number of independent ChaCha streams, one per
//! stream index, and results are reduced in stream order. Output therefore
//! depends only on the seed and the stream count, not on the thread pool.

mod quadrature;

pub use quadrature::{gauss_legendre, quadrature_presence_probability};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::channel::{ArrivalTable, ChannelParams};
use crate::error::{domain, Error, Result};
use crate::link::Scenario;
use crate::modulation::PulseShape;
use crate::reception::{NoiseParams, Priors};

/// Above this mean a binomial draw uses its normal approximation.
pub const BINOMIAL_EXACT_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngConfig {
    pub seed: u64,
    pub streams: usize,
}

impl RngConfig {
    pub fn new(seed: u64, streams: usize) -> Result<Self> {
        if streams == 0 {
            return Err(domain("at least one random stream is required"));
        }
        Ok(Self { seed, streams })
    }

    pub fn stream(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }

    /// Trial counts per stream, summing to `trials`.
    fn partition(&self, trials: u64) -> Vec<u64> {
        let n = self.streams as u64;
        (0..n)
            .map(|k| trials / n + u64::from(k < trials % n))
            .collect()
    }
}

impl Default for RngConfig {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            streams: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl McEstimate {
    pub fn proportion(successes: u64, trials: u64) -> Self {
        let p = successes as f64 / trials as f64;
        Self {
            value: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }

    /// `|value - reference|` in units of the standard error.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = (self.value - reference).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

/// Binomial draw. Exact when `n p < 30`, otherwise the unrounded normal
/// with matching mean and variance.
pub fn sample_binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> f64 {
    if n == 0 || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return n as f64;
    }
    let mean = n as f64 * p;
    if mean < BINOMIAL_EXACT_LIMIT {
        // `p` is a probability in (0, 1), so construction cannot fail.
        Binomial::new(n, p)
            .map(|b| b.sample(rng) as f64)
            .unwrap_or(mean)
    } else {
        let z: f64 = rng.sample(StandardNormal);
        mean + z * (mean * (1.0 - p)).sqrt()
    }
}

fn normal<R: Rng + ?Sized>(mean: f64, variance: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + z * variance.sqrt()
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("time must be positive and finite, got {t}")))
    }
}

/// Fraction of particles inside the receiver at `t`, sampling each final
/// position directly from its drifted Gaussian.
pub fn mc_presence_probability(
    params: &ChannelParams,
    t: f64,
    trials: u64,
    rng: RngConfig,
) -> Result<McEstimate> {
    check_time(t)?;
    params.validate()?;
    if trials == 0 {
        return Err(domain("trials must be at least 1"));
    }
    let sd = (2.0 * params.diffusion * t).sqrt();
    let mean = params.drift * t;
    let center = params.receiver.center;
    let r2 = params.receiver.radius * params.receiver.radius;
    let hits: u64 = rng
        .partition(trials)
        .into_par_iter()
        .enumerate()
        .map(|(k, n)| {
            let mut g = rng.stream(k);
            let mut hits = 0u64;
            for _ in 0..n {
                let dx = mean.x + sd * g.sample::<f64, _>(StandardNormal) - center.x;
                let dy = mean.y + sd * g.sample::<f64, _>(StandardNormal) - center.y;
                let dz = mean.z + sd * g.sample::<f64, _>(StandardNormal) - center.z;
                hits += u64::from(dx * dx + dy * dy + dz * dz <= r2);
            }
            hits
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(McEstimate::proportion(hits, trials))
}

/// One hop's arrival model: per-sub-slot counts and probabilities.
struct HopModel<'a> {
    counts: &'a [u64],
    table: &'a ArrivalTable,
    noise: NoiseParams,
    /// Counting-noise variances (the conditional means) for bit 0 and 1.
    counting_var: [f64; 2],
}

impl<'a> HopModel<'a> {
    fn new(
        pulse: &'a PulseShape,
        table: &'a ArrivalTable,
        prior: f64,
        noise: NoiseParams,
    ) -> Result<Self> {
        if table.sub_slots != pulse.sub_slots() {
            return Err(Error::DimensionMismatch {
                what: "arrival table sub-slots",
                expected: pulse.sub_slots(),
                got: table.sub_slots,
            });
        }
        let g = &pulse.counts;
        let dot = |row: &[f64]| g.iter().zip(row).map(|(&g, &p)| g as f64 * p).sum::<f64>();
        let isi_mean: f64 = table.q_rows.iter().map(|row| prior * dot(row)).sum();
        let mean0 = isi_mean + noise.mean;
        let mean1 = mean0 + dot(table.current());
        Ok(Self {
            counts: g,
            table,
            noise,
            counting_var: [mean0, mean1],
        })
    }

    /// Count for current bit `bit` with earlier bits `history[j - 1]` sent
    /// `j` slots before.
    fn sample<R: Rng + ?Sized>(
        &self,
        bit: bool,
        history: impl Iterator<Item = bool>,
        rng: &mut R,
    ) -> f64 {
        let mut total = 0.0;
        if bit {
            for (&g, &p) in self.counts.iter().zip(self.table.current()) {
                total += sample_binomial(g, p, rng);
            }
        }
        for (row, sent) in self.table.q_rows.iter().zip(history) {
            if sent {
                for (&g, &q) in self.counts.iter().zip(row) {
                    total += sample_binomial(g, q, rng);
                }
            }
        }
        total += normal(self.noise.mean, self.noise.variance, rng);
        total + normal(0.0, self.counting_var[usize::from(bit)], rng)
    }
}

/// Sample moments of one conditional count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub mean: McEstimate,
    pub variance: McEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountMoments {
    pub bit0: MomentEstimate,
    pub bit1: MomentEstimate,
}

/// Power sums of `x - shift` up to the fourth.
#[derive(Debug, Clone, Copy, Default)]
struct PowerSums {
    n: u64,
    s: [f64; 4],
}

impl PowerSums {
    fn push(&mut self, d: f64) {
        self.n += 1;
        self.s[0] += d;
        self.s[1] += d * d;
        self.s[2] += d * d * d;
        self.s[3] += d * d * d * d;
    }

    fn merge(mut self, o: &PowerSums) -> Self {
        self.n += o.n;
        for k in 0..4 {
            self.s[k] += o.s[k];
        }
        self
    }

    fn estimate(&self, shift: f64) -> MomentEstimate {
        let n = self.n as f64;
        let [a1, a2, a3, a4] = self.s.map(|s| s / n);
        let m2 = a2 - a1 * a1;
        let m4 = a4 - 4.0 * a1 * a3 + 6.0 * a1 * a1 * a2 - 3.0 * a1.powi(4);
        let var = m2 * n / (n - 1.0);
        MomentEstimate {
            mean: McEstimate {
                value: shift + a1,
                std_error: (var / n).sqrt(),
                trials: self.n,
            },
            variance: McEstimate {
                value: var,
                std_error: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
                trials: self.n,
            },
        }
    }
}

/// Conditional count moments given the current bit, with earlier bits drawn
/// from the priors. `trials` samples are taken for each hypothesis.
pub fn mc_count_moments(
    pulse: &PulseShape,
    table: &ArrivalTable,
    priors: Priors,
    noise: NoiseParams,
    trials: u64,
    rng: RngConfig,
) -> Result<CountMoments> {
    if trials < 10_000 {
        return Err(domain(format!(
            "at least 10^4 trials are required, got {trials}"
        )));
    }
    noise.validate()?;
    let hop = HopModel::new(pulse, table, priors.pi1, noise)?;
    let shifts = hop.counting_var;
    let j = table.isi_length;
    let sums = rng
        .partition(trials)
        .into_par_iter()
        .enumerate()
        .map(|(k, n)| {
            let mut g = rng.stream(k);
            let mut acc = [PowerSums::default(); 2];
            let mut history = vec![false; j];
            for _ in 0..n {
                for bit in [false, true] {
                    for h in history.iter_mut() {
                        *h = g.random::<f64>() < priors.pi1;
                    }
                    let x = hop.sample(bit, history.iter().copied(), &mut g);
                    acc[usize::from(bit)].push(x - shifts[usize::from(bit)]);
                }
            }
            acc
        })
        .collect::<Vec<_>>();
    let [s0, s1] = sums.iter().fold([PowerSums::default(); 2], |acc, s| {
        [acc[0].merge(&s[0]), acc[1].merge(&s[1])]
    });
    Ok(CountMoments {
        bit0: s0.estimate(shifts[0]),
        bit1: s1.estimate(shifts[1]),
    })
}

/// Empirical end-to-end BER of the decode-and-forward chain at slot `slot`.
///
/// Each stream simulates its own contiguous bit sequence with a warm-up of
/// `2J` uncounted bits so both hops start with full ISI memory. The relay
/// decides with the analytic relay threshold and re-sends its decision one
/// slot later; the destination decides with its own threshold.
pub fn mc_link_ber(
    scenario: &Scenario,
    slot: f64,
    bits: u64,
    rng: RngConfig,
) -> Result<McEstimate> {
    if bits < 1000 {
        return Err(domain(format!(
            "at least 1000 bits are required, got {bits}"
        )));
    }
    let eval = scenario.evaluate(slot)?;
    let pulse = scenario.pulse.with_slot(slot)?;
    let tau_r = eval.stats_sr.threshold()?;
    let tau_d = eval.stats_rd.threshold()?;
    let first = HopModel::new(&pulse, &eval.table_sr, scenario.priors.pi1, scenario.noise)?;
    let second = HopModel::new(&pulse, &eval.table_rd, eval.relay_prior, scenario.noise)?;
    let j = scenario.isi_length;
    let warmup = 2 * j;
    let pi1 = scenario.priors.pi1;

    let errors: u64 = rng
        .partition(bits)
        .into_par_iter()
        .enumerate()
        .map(|(k, n)| {
            let mut g = rng.stream(k);
            // Most recent bit first.
            let mut source = std::collections::VecDeque::from(vec![false; j + 1]);
            let mut relay = std::collections::VecDeque::from(vec![false; j + 1]);
            let mut errors = 0u64;
            for step in 0..n as usize + warmup {
                let bit = g.random::<f64>() < pi1;
                source.pop_back();
                source.push_front(bit);
                let m_r = first
                    .sample(bit, source.iter().skip(1).copied(), &mut g)
                    .max(0.0);
                let relayed = m_r >= tau_r;
                relay.pop_back();
                relay.push_front(relayed);
                let m_d = second
                    .sample(relayed, relay.iter().skip(1).copied(), &mut g)
                    .max(0.0);
                let decided = m_d >= tau_d;
                if step >= warmup && decided != bit {
                    errors += 1;
                }
            }
            errors
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(McEstimate::proportion(errors, bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{SphereReceiver, Vec3};
    use crate::link::Geometry;
    use crate::modulation::{make_pulse, ShapeFamily};
    use crate::reception::{isi_moments, link_stats};

    fn params(center: Vec3, radius: f64, drift: Vec3) -> ChannelParams {
        ChannelParams::new(4e-9, drift, SphereReceiver::new(center, radius).unwrap()).unwrap()
    }

    #[test]
    fn presence_limits() {
        let rng = RngConfig::new(7, 8).unwrap();
        let all = mc_presence_probability(&params(Vec3::ZERO, 1.0, Vec3::ZERO), 1e-6, 10_000, rng)
            .unwrap();
        assert_eq!(all.value, 1.0);
        let far = params(Vec3::new(1.0, 0.0, 0.0), 50e-6, Vec3::ZERO);
        assert_eq!(
            mc_presence_probability(&far, 1.0, 1_000_000, rng)
                .unwrap()
                .value,
            0.0
        );
        assert!(mc_presence_probability(&far, 1.0, 0, rng).is_err());
    }

    #[test]
    fn presence_agrees_with_quadrature() {
        let p = params(
            Vec3::from_micro(20.0, 10.0, -5.0),
            50e-6,
            Vec3::from_micro(60.0, 10.0, 30.0),
        );
        let mc = mc_presence_probability(&p, 0.01, 200_000, RngConfig::default()).unwrap();
        let q = quadrature_presence_probability(&p, 0.01, 16).unwrap();
        assert!(mc.z_score(q) < 3.0, "mc={mc:?} quad={q}");
    }

    #[test]
    fn same_seed_same_answer_regardless_of_threads() {
        let p = params(
            Vec3::from_micro(20.0, 10.0, -5.0),
            50e-6,
            Vec3::from_micro(60.0, 10.0, 30.0),
        );
        let rng = RngConfig::new(99, 16).unwrap();
        let a = mc_presence_probability(&p, 0.01, 50_000, rng).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| mc_presence_probability(&p, 0.01, 50_000, rng).unwrap());
        assert_eq!(a, b);
        let c =
            mc_presence_probability(&p, 0.01, 50_000, RngConfig::new(100, 16).unwrap()).unwrap();
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn binomial_moments() {
        let mut g = RngConfig::default().stream(3);
        for (n, p) in [(10u64, 0.3), (200, 0.1), (1000, 0.5), (5, 0.999)] {
            let draws: Vec<f64> = (0..200_000)
                .map(|_| sample_binomial(n, p, &mut g))
                .collect();
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let var =
                draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
            let expected_var = n as f64 * p * (1.0 - p);
            assert!((mean - n as f64 * p).abs() < 4.0 * (expected_var / 2e5).sqrt() + 1e-12);
            assert!((var - expected_var).abs() < 0.03 * expected_var);
        }
        assert_eq!(sample_binomial(0, 0.5, &mut g), 0.0);
        assert_eq!(sample_binomial(7, 1.0, &mut g), 7.0);
    }

    fn table(p_rows: Vec<Vec<f64>>) -> ArrivalTable {
        ArrivalTable::from_presence(0.01, p_rows).unwrap()
    }

    #[test]
    fn silent_pulse_moments() {
        let pulse = PulseShape::new(vec![0, 0], 0.01).unwrap();
        let t = table(vec![vec![0.2, 0.1], vec![0.4, 0.3]]);
        let m = mc_count_moments(
            &pulse,
            &t,
            Priors::default(),
            NoiseParams::default(),
            100_000,
            RngConfig::default(),
        )
        .unwrap();
        for est in [m.bit0, m.bit1] {
            assert!(est.mean.z_score(100.0) < 4.0);
            assert!(est.variance.z_score(200.0) < 4.0);
        }
    }

    #[test]
    fn isi_hand_example_by_sampling() {
        // g = 100, q = 0.3, pi1 = 0.5: ISI mean 15, variance 235.5.
        let pulse = PulseShape::new(vec![100], 0.01).unwrap();
        let t = table(vec![vec![0.2], vec![0.5]]);
        let noise = NoiseParams::new(0.0, 0.0).unwrap();
        let m = mc_count_moments(
            &pulse,
            &t,
            Priors::default(),
            noise,
            400_000,
            RngConfig::default(),
        )
        .unwrap();
        // Bit 0 adds only the counting noise, whose variance is the mean.
        assert!(m.bit0.mean.z_score(15.0) < 4.0, "{m:?}");
        assert!(m.bit0.variance.z_score(235.5 + 15.0) < 4.0, "{m:?}");
    }

    #[test]
    fn moments_match_closed_forms() {
        let pulse = PulseShape::new(vec![50, 150, 20], 0.01).unwrap();
        let t = table(vec![
            vec![0.3, 0.2, 0.05],
            vec![0.45, 0.3, 0.2],
            vec![0.5, 0.5, 0.26],
        ]);
        let priors = Priors::new(0.4).unwrap();
        let noise = NoiseParams::default();
        let s = link_stats(&pulse, &t, priors, noise).unwrap();
        let m = mc_count_moments(
            &pulse,
            &t,
            priors,
            noise,
            200_000,
            RngConfig::new(11, 32).unwrap(),
        )
        .unwrap();
        assert!(m.bit0.mean.z_score(s.mu0) < 4.0, "{m:?} {s:?}");
        assert!(m.bit1.mean.z_score(s.mu1) < 4.0, "{m:?} {s:?}");
        assert!(m.bit0.variance.z_score(s.var0) < 4.0, "{m:?} {s:?}");
        assert!(m.bit1.variance.z_score(s.var1) < 4.0, "{m:?} {s:?}");
        let isi = isi_moments(&pulse, &t, priors).unwrap();
        assert_eq!(s.isi, isi);
    }

    #[test]
    fn rejects_small_runs() {
        let pulse = PulseShape::new(vec![1], 0.01).unwrap();
        let t = table(vec![vec![0.2]]);
        assert!(mc_count_moments(
            &pulse,
            &t,
            Priors::default(),
            NoiseParams::default(),
            10,
            RngConfig::default()
        )
        .is_err());
    }

    fn toy(total: u64, isi: usize) -> Scenario {
        let relay = SphereReceiver::new(Vec3::from_micro(40.0, 5.0, 5.0), 50e-6).unwrap();
        let geometry =
            Geometry::with_mirrored_dest(4e-9, Vec3::from_micro(100.0, 40.0, 40.0), relay).unwrap();
        let pulse = make_pulse(ShapeFamily::exponential(), 4, total, 0.02).unwrap();
        Scenario::new(
            geometry,
            pulse,
            isi,
            Priors::default(),
            NoiseParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn silent_link_is_a_coin_flip() {
        let est = mc_link_ber(&toy(0, 2), 0.02, 100_000, RngConfig::default()).unwrap();
        assert!(est.z_score(0.5) < 4.0, "{est:?}");
    }

    #[test]
    fn loud_link_makes_no_errors() {
        let est = mc_link_ber(&toy(2_000_000, 2), 0.02, 100_000, RngConfig::default()).unwrap();
        assert_eq!(est.value, 0.0);
    }

    fn small_link(total: u64, isi: usize, noise: NoiseParams) -> Scenario {
        let relay = SphereReceiver::new(Vec3::from_micro(65.0, 7.8, 9.1), 50e-6).unwrap();
        let geometry =
            Geometry::with_mirrored_dest(4e-9, Vec3::from_micro(100.0, 40.0, 40.0), relay).unwrap();
        let pulse = make_pulse(ShapeFamily::exponential(), 10, total, 0.03).unwrap();
        Scenario::new(geometry, pulse, isi, Priors::default(), noise).unwrap()
    }

    #[test]
    fn moderate_ber_matches_closed_form() {
        let s = small_link(250, 0, NoiseParams::default());
        let analytic = s.evaluate(0.03).unwrap().relay.p_e;
        assert!((0.04..0.08).contains(&analytic), "{analytic}");
        let est = mc_link_ber(&s, 0.03, 1_000_000, RngConfig::new(11, 64).unwrap()).unwrap();
        assert!(
            (est.value - analytic).abs() <= 0.1 * analytic,
            "{est:?} vs {analytic}"
        );
    }

    #[test]
    fn memoryless_link_is_a_product_of_hops() {
        // With the background removed the counts are too skewed for the
        // Gaussian tails, so keep the default noise.
        let s = small_link(400, 0, NoiseParams::default());
        let e = s.evaluate(0.03).unwrap();
        let chain = crate::ber::exact_chain_ber(&e.stats_sr, &e.stats_rd, s.priors).unwrap();
        let est = mc_link_ber(&s, 0.03, 1_000_000, RngConfig::new(12, 64).unwrap()).unwrap();
        assert!(est.z_score(chain) < 4.0, "{est:?} vs {chain}");
    }

    #[test]
    fn link_ber_rejects_short_runs() {
        assert!(mc_link_ber(&toy(100, 1), 0.02, 10, RngConfig::default()).is_err());
    }
}
