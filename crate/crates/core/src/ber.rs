//! Bit error probabilities for direct and relay-assisted transmission.
//!
//! Both closed forms are evaluated through complementary error functions so
//! that tiny error rates keep their relative precision; the algebra is the
//! same as the erf-difference form.

use crate::error::Result;
use crate::reception::{detection_probabilities, LinkStats, Priors};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BerMode {
    Direct,
    Relay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerResult {
    pub p_e: f64,
    pub mode: BerMode,
}

/// `P(miss) + P(false alarm)` of one hop, i.e. twice its equiprobable BER.
fn hop_error_sum(stats: &LinkStats) -> Result<f64> {
    let tau = stats.threshold()?;
    let miss = 0.5 * libm::erfc((stats.mu1 - tau) / (2.0 * stats.var1).sqrt());
    let false_alarm = 0.5 * libm::erfc((tau - stats.mu0) / (2.0 * stats.var0).sqrt());
    Ok(miss + false_alarm)
}

/// Direct-link BER with equiprobable bits,
/// `1/2 + 1/4 [erf(a1) - erf(a0)]` with `ak = (tau - muk) / sqrt(2 vark)`.
pub fn direct_ber(stats: &LinkStats) -> Result<BerResult> {
    let h = hop_error_sum(stats)?;
    Ok(BerResult {
        p_e: (0.5 * h).clamp(0.0, 1.0),
        mode: BerMode::Direct,
    })
}

/// Decode-and-forward BER,
/// `1/2 + 1/8 [erf(a1) - erf(a0)]_SR [erf(a0) - erf(a1)]_RD`.
///
/// With `h = P(miss) + P(false alarm)` per hop this is `(h1 + h2 - h1 h2) / 2`.
pub fn relay_ber(stats_sr: &LinkStats, stats_rd: &LinkStats) -> Result<BerResult> {
    let h1 = hop_error_sum(stats_sr)?;
    let h2 = hop_error_sum(stats_rd)?;
    Ok(BerResult {
        p_e: (0.5 * (h1 + h2 - h1 * h2)).clamp(0.0, 1.0),
        mode: BerMode::Relay,
    })
}

/// End-to-end error of the two-hop chain for arbitrary source priors: the
/// relay forwards its decision and the destination errs against the source
/// bit. Equals [`relay_ber`] when `pi1 = 1/2`.
pub fn exact_chain_ber(stats_sr: &LinkStats, stats_rd: &LinkStats, priors: Priors) -> Result<f64> {
    let (pd_r, pf_r) = detection_probabilities(stats_sr)?;
    let (pd_d, pf_d) = detection_probabilities(stats_rd)?;
    let miss = pd_r * (1.0 - pd_d) + (1.0 - pd_r) * (1.0 - pf_d);
    let false_alarm = pf_r * pd_d + (1.0 - pf_r) * pf_d;
    Ok((priors.pi1 * miss + priors.pi0() * false_alarm).clamp(0.0, 1.0))
}

/// Probability that the relay emits "1": `pi1 P(detect) + pi0 P(false alarm)`.
pub fn relay_one_probability(stats_sr: &LinkStats, priors: Priors) -> Result<f64> {
    let (pd, pf) = detection_probabilities(stats_sr)?;
    Ok((priors.pi1 * pd + priors.pi0() * pf).clamp(0.0, 1.0))
}

/// `(1 - 2p)^bits` with `p = min(p_e, 1 - p_e)`: an error rate above one half
/// is relabelled by inverting the decisions.
pub fn success_probability(p_e: f64, bits_per_symbol: u32) -> f64 {
    let p = p_e.clamp(0.0, 1.0);
    let p = p.min(1.0 - p);
    (1.0 - 2.0 * p).powi(bits_per_symbol as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    fn stats(mu0: f64, var0: f64, mu1: f64, var1: f64, tau: f64) -> LinkStats {
        LinkStats::from_moments(mu0, var0, mu1, var1).with_threshold(tau)
    }

    fn erf_form_direct(s: &LinkStats) -> f64 {
        let tau = s.threshold.unwrap();
        0.5 + 0.25
            * (libm::erf((tau - s.mu1) / (2.0 * s.var1).sqrt())
                - libm::erf((tau - s.mu0) / (2.0 * s.var0).sqrt()))
    }

    fn erf_form_relay(a: &LinkStats, b: &LinkStats) -> f64 {
        let (ta, tb) = (a.threshold.unwrap(), b.threshold.unwrap());
        let first = libm::erf((ta - a.mu1) / (2.0 * a.var1).sqrt())
            - libm::erf((ta - a.mu0) / (2.0 * a.var0).sqrt());
        let second = libm::erf((tb - b.mu0) / (2.0 * b.var0).sqrt())
            - libm::erf((tb - b.mu1) / (2.0 * b.var1).sqrt());
        0.5 + 0.125 * first * second
    }

    #[test]
    fn direct_limits() {
        let s = stats(100.0, 400.0, 300.0, 900.0, 0.0);
        for tau in [f64::NEG_INFINITY, f64::INFINITY] {
            assert!((direct_ber(&s.with_threshold(tau)).unwrap().p_e - 0.5).abs() <= 1e-12);
        }
        let same = stats(250.0, 400.0, 250.0, 400.0, 260.0);
        assert!((direct_ber(&same).unwrap().p_e - 0.5).abs() <= 1e-12);
        let sharp = stats(100.0, 1e-6, 10_000.0, 1e-6, 5050.0);
        assert!(direct_ber(&sharp).unwrap().p_e < 1e-10);
    }

    #[test]
    fn relay_limits() {
        let sharp = stats(100.0, 1e-6, 10_000.0, 1e-6, 5050.0);
        let r = relay_ber(&sharp, &sharp).unwrap();
        assert_eq!(r.mode, BerMode::Relay);
        assert!(r.p_e.abs() <= 1e-12);
        let flat = stats(250.0, 400.0, 250.0, 400.0, 250.0);
        assert!((relay_ber(&sharp, &flat).unwrap().p_e - 0.5).abs() <= 1e-12);
        assert!((relay_ber(&flat, &sharp).unwrap().p_e - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn unset_threshold_is_an_error() {
        let s = LinkStats::from_moments(1.0, 1.0, 2.0, 1.0);
        assert_eq!(direct_ber(&s), Err(Error::ThresholdUnset));
        assert_eq!(
            relay_ber(&s, &s.with_threshold(1.5)),
            Err(Error::ThresholdUnset)
        );
    }

    #[test]
    fn success_probability_values() {
        assert_eq!(success_probability(0.0, 1), 1.0);
        assert_eq!(success_probability(0.5, 1), 0.0);
        assert!((success_probability(0.7, 1) - 0.4).abs() <= 1e-12);
        assert!((success_probability(0.7, 1) - success_probability(0.3, 1)).abs() <= 1e-12);
        assert!((success_probability(0.1, 3) - 0.512).abs() <= 1e-12);
    }

    #[test]
    fn exact_chain_differs_for_unequal_priors() {
        let a = stats(100.0, 400.0, 150.0, 500.0, 140.0);
        let b = stats(100.0, 300.0, 140.0, 400.0, 135.0);
        let eq25 = relay_ber(&a, &b).unwrap().p_e;
        let exact = exact_chain_ber(&a, &b, Priors::new(0.2).unwrap()).unwrap();
        assert!((exact - eq25).abs() > 1e-3);
    }

    prop_compose! {
        fn any_stats()(mu0 in 0.0..500.0f64, sep in -50.0..800.0f64, var0 in 1.0..2000.0f64,
                       var1 in 1.0..4000.0f64, frac in -0.5..1.5f64) -> LinkStats {
            stats(mu0, var0, mu0 + sep, var1, mu0 + frac * sep)
        }
    }

    proptest! {
        #[test]
        fn matches_erf_forms(a in any_stats(), b in any_stats()) {
            let d = direct_ber(&a).unwrap().p_e;
            prop_assert!((d - erf_form_direct(&a)).abs() <= 1e-12);
            let r = relay_ber(&a, &b).unwrap().p_e;
            prop_assert!((r - erf_form_relay(&a, &b)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&r));
        }

        #[test]
        fn relay_sign_symmetry(a in any_stats(), b in any_stats()) {
            // Flipping the sign of both brackets leaves the product unchanged;
            // swapping hops just swaps factors.
            let first = |s: &LinkStats| {
                let t = s.threshold.unwrap();
                libm::erf((t - s.mu1) / (2.0 * s.var1).sqrt()) - libm::erf((t - s.mu0) / (2.0 * s.var0).sqrt())
            };
            let flipped = 0.5 + 0.125 * (-first(&a)) * first(&b);
            prop_assert!((relay_ber(&a, &b).unwrap().p_e - flipped).abs() <= 1e-12);
            prop_assert!((relay_ber(&a, &b).unwrap().p_e - relay_ber(&b, &a).unwrap().p_e).abs() <= 1e-12);
        }

        #[test]
        fn exact_chain_matches_at_equal_priors(a in any_stats(), b in any_stats()) {
            let exact = exact_chain_ber(&a, &b, Priors::equiprobable()).unwrap();
            prop_assert!((exact - relay_ber(&a, &b).unwrap().p_e).abs() <= 1e-12);
        }

        #[test]
        fn success_is_monotone(p in 0.0..1.0f64, q in 0.0..1.0f64) {
            let (ep, eq) = (p.min(1.0 - p), q.min(1.0 - q));
            if ep <= eq {
                prop_assert!(success_probability(p, 1) >= success_probability(q, 1));
            }
        }
    }
}
