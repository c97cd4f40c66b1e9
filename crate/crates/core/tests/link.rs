use mcvd_core::channel::{SphereReceiver, Vec3};
use mcvd_core::energy::{total_energy, EnergyParams};
use mcvd_core::link::{Geometry, Scenario};
use mcvd_core::modulation::{make_pulse, scale_to_energy, ShapeFamily};
use mcvd_core::montecarlo::{mc_link_ber, RngConfig};
use mcvd_core::optimizer::{bisection_optimize, grid_search_max, OptimizerConfig};
use mcvd_core::reception::{NoiseParams, Priors};
use proptest::prelude::*;

fn geometry(relay: (f64, f64, f64), drift: (f64, f64, f64)) -> Geometry {
    let relay = SphereReceiver::new(Vec3::from_micro(relay.0, relay.1, relay.2), 50e-6).unwrap();
    Geometry::with_mirrored_dest(4e-9, Vec3::from_micro(drift.0, drift.1, drift.2), relay).unwrap()
}

fn scenario(total: u64, isi: usize, slot: f64) -> Scenario {
    let pulse = make_pulse(ShapeFamily::exponential(), 10, total, slot).unwrap();
    Scenario::new(
        geometry((65.0, 7.8, 9.1), (100.0, 40.0, 40.0)),
        pulse,
        isi,
        Priors::default(),
        NoiseParams::default(),
    )
    .unwrap()
}

#[test]
fn budgeted_pulse_spends_at_most_the_budget() {
    let energy = EnergyParams::default();
    for family in [
        ShapeFamily::exponential(),
        ShapeFamily::sinc(),
        ShapeFamily::Cosine,
        ShapeFamily::Uniform,
    ] {
        let pulse = scale_to_energy(family, 10, 0.018, 1e-12, &energy).unwrap();
        let spent = total_energy(&pulse, &energy).unwrap();
        assert!(spent <= 1e-12, "{family:?}: {spent}");
        let more = make_pulse(family, 10, pulse.total() + 1, 0.018).unwrap();
        assert!(total_energy(&more, &energy).unwrap() > 1e-12, "{family:?}");
    }
}

#[test]
fn evaluation_agrees_with_simulation() {
    let s = scenario(250, 3, 0.03);
    let e = s.evaluate(0.03).unwrap();
    let est = mc_link_ber(&s, 0.03, 1_000_000, RngConfig::new(5, 64).unwrap()).unwrap();
    assert!(
        (est.value - e.relay.p_e).abs() <= 0.1 * e.relay.p_e,
        "{est:?} vs {}",
        e.relay.p_e
    );
}

#[test]
fn more_memory_never_helps() {
    let short = scenario(250, 0, 0.03).evaluate(0.03).unwrap().relay.p_e;
    let long = scenario(250, 5, 0.03).evaluate(0.03).unwrap().relay.p_e;
    assert!(long >= short, "{long} < {short}");
}

#[test]
fn bisection_reaches_the_grid_maximum() {
    let s = scenario(400, 5, 0.02);
    let config = OptimizerConfig {
        t_min: 5e-3,
        t_max: 0.2,
        ..OptimizerConfig::default()
    };
    let opt = bisection_optimize(&s, &config).unwrap();
    let (_, best) = grid_search_max(&|t| s.objective(t), config.t_min, config.t_max, 2000).unwrap();
    assert!(opt.upper - opt.f_star <= config.epsilon);
    assert!(
        opt.f_star >= best * (1.0 - 1e-3) - config.epsilon,
        "{} vs {best}",
        opt.f_star
    );
    assert!((s.objective(opt.t_star).unwrap() - opt.f_star).abs() <= config.epsilon);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relay_ber_is_a_valid_error_rate(
        rx in 20.0..200.0f64, ry in 1.0..100.0f64, rz in 1.0..100.0f64,
        vx in 1.0..100.0f64, vy in 1.0..100.0f64, vz in 1.0..100.0f64,
        total in 1u64..2000, isi in 0usize..10, slot in 1e-3..0.03f64,
    ) {
        let pulse = make_pulse(ShapeFamily::exponential(), 10, total, slot).unwrap();
        let s = Scenario::new(geometry((rx, ry, rz), (vx, vy, vz)), pulse, isi, Priors::default(), NoiseParams::default()).unwrap();
        let e = s.evaluate(slot).unwrap();
        for p in [e.direct.p_e, e.relay.p_e, e.exact_chain] {
            prop_assert!((0.0..=0.5 + 1e-12).contains(&p), "{p}");
        }
        prop_assert!((e.relay.p_e - e.exact_chain).abs() <= 1e-12);
        prop_assert!(e.objective >= 0.0 && e.objective <= 1.0 / slot);
    }
}
