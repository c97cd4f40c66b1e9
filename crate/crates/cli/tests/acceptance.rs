//! End-to-end acceptance run: one line per criterion, non-zero exit if any
//! criterion fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use mcvd_cli::sweep::{sweep_rows, RowOutcome, SweepRow};
use mcvd_cli::validate::{moment_instances, presence_grid};
use mcvd_cli::ExperimentConfig;
use mcvd_core::ber::{direct_ber, relay_ber, success_probability};
use mcvd_core::channel::{presence_probability, SphereReceiver, Vec3};
use mcvd_core::energy::{vesicle_capacity, vesicle_radius};
use mcvd_core::link::{Geometry, Scenario};
use mcvd_core::modulation::{make_pulse, ShapeFamily};
use mcvd_core::montecarlo::{
    mc_count_moments, mc_link_ber, mc_presence_probability, quadrature_presence_probability,
    RngConfig,
};
use mcvd_core::optimizer::{
    bisection_optimize, derivative_sign_scan, grid_search_max, linspace, objective,
};
use mcvd_core::reception::{isi_moments, link_stats, LinkStats, NoiseParams, Priors};

const SEED: u64 = 20_240_917;
const PRESENCE_RELATIVE: f64 = 0.05;
const PRESENCE_FLOOR: f64 = 1e-4;
const Z_LIMIT: f64 = 3.0;
const BER_RELATIVE: f64 = 0.10;
const EXACT: f64 = 1e-12;
const OPT_EPSILON: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs().join(name)).expect("shipped config loads")
}

fn within_budget(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn channel_oracles() -> Outcome {
    let start = Instant::now();
    let grid = presence_grid(20, SEED);
    let (mut applicable, mut close, mut mc_ok) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    for (k, (params, t)) in grid.iter().enumerate() {
        let q = quadrature_presence_probability(params, *t, 16).unwrap();
        let analytic = presence_probability(params, *t).unwrap();
        if q > PRESENCE_FLOOR {
            applicable += 1;
            let rel = (analytic - q).abs() / q;
            worst = worst.max(rel);
            if rel <= PRESENCE_RELATIVE {
                close += 1;
            }
        }
        let n = 1_000_000;
        let mc =
            mc_presence_probability(params, *t, n, RngConfig::new(SEED + k as u64, 64).unwrap())
                .unwrap();
        let se = (q * (1.0 - q) / n as f64).sqrt();
        let gap = (mc.value - q).abs();
        if gap <= Z_LIMIT * se || (se == 0.0 && gap == 0.0) {
            mc_ok += 1;
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: close == applicable && mc_ok == grid.len() && within_budget(elapsed, 60),
        detail: format!(
            "analytic within {PRESENCE_RELATIVE} of quadrature at {close}/{applicable} points above {PRESENCE_FLOOR} \
             (worst relative error {worst:.3}); MC within {Z_LIMIT} SE at {mc_ok}/{}; {:.1} s",
            grid.len(),
            elapsed.as_secs_f64()
        ),
    }
}

/// The ISI sums written out independently, in the same order.
fn isi_by_hand(inst: &mcvd_cli::validate::MomentInstance) -> (f64, f64) {
    let (pi1, pi0) = (inst.priors.pi1, inst.priors.pi0());
    let (mut mean, mut var) = (0.0, 0.0);
    for j in 1..=inst.table.isi_length {
        let (mut m, mut b) = (0.0, 0.0);
        for i in 0..inst.pulse.sub_slots() {
            let g = inst.pulse.counts[i] as f64;
            let q = inst.table.q(j, i);
            m += g * q;
            b += g * q * (1.0 - q);
        }
        mean += pi1 * m;
        var += pi1 * b + pi0 * pi1 * m * m;
    }
    (mean, var)
}

fn moments() -> Outcome {
    let start = Instant::now();
    let instances = moment_instances(5, SEED);
    let (mut agree, mut exact) = (0, 0);
    let mut worst_z: f64 = 0.0;
    for (k, inst) in instances.iter().enumerate() {
        let stats = link_stats(&inst.pulse, &inst.table, inst.priors, inst.noise).unwrap();
        let mc = mc_count_moments(
            &inst.pulse,
            &inst.table,
            inst.priors,
            inst.noise,
            1_000_000,
            RngConfig::new(SEED ^ (k as u64 + 1), 64).unwrap(),
        )
        .unwrap();
        let pairs = [
            (stats.mu0, mc.bit0.mean),
            (stats.var0, mc.bit0.variance),
            (stats.mu1, mc.bit1.mean),
            (stats.var1, mc.bit1.variance),
        ];
        for (reference, est) in pairs {
            let z = (est.value - reference).abs() / est.std_error;
            worst_z = worst_z.max(z);
            if z <= Z_LIMIT {
                agree += 1;
            }
        }
        let isi = isi_moments(&inst.pulse, &inst.table, inst.priors).unwrap();
        let (mean, var) = isi_by_hand(inst);
        if stats.isi == isi
            && isi.mean.to_bits() == mean.to_bits()
            && isi.variance.to_bits() == var.to_bits()
        {
            exact += 1;
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: agree == 4 * instances.len() && exact == instances.len() && within_budget(elapsed, 120),
        detail: format!(
            "moments within {Z_LIMIT} SE: {agree}/{} (worst z {worst_z:.2}); ISI sums bit-identical: {exact}/{}; {:.1} s",
            4 * instances.len(),
            instances.len(),
            elapsed.as_secs_f64()
        ),
    }
}

fn small_link(molecules: u64, isi_length: usize) -> Scenario {
    let relay = SphereReceiver::new(Vec3::from_micro(65.0, 7.8, 9.1), 50e-6).unwrap();
    let geometry =
        Geometry::with_mirrored_dest(4e-9, Vec3::from_micro(100.0, 40.0, 40.0), relay).unwrap();
    let pulse = make_pulse(ShapeFamily::exponential(), 10, molecules, 0.03).unwrap();
    Scenario::new(
        geometry,
        pulse,
        isi_length,
        Priors::default(),
        NoiseParams::default(),
    )
    .unwrap()
}

fn ber_oracle() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for (k, (n, j)) in [(250, 0), (250, 3), (400, 0)].into_iter().enumerate() {
        let scenario = small_link(n, j);
        let eval = scenario.evaluate(0.03).unwrap();
        let p_sr = direct_ber(&eval.stats_sr).unwrap().p_e;
        let mc = mc_link_ber(
            &scenario,
            0.03,
            1_000_000,
            RngConfig::new(SEED + 100 + k as u64, 64).unwrap(),
        )
        .unwrap();
        let rel = (mc.value - eval.relay.p_e).abs() / eval.relay.p_e;
        pass &= (1e-3..=0.2).contains(&p_sr) && rel <= BER_RELATIVE;
        parts.push(format!(
            "N={n} J={j}: P_SR {p_sr:.3e}, relay {:.4e} vs MC {:.4e} ({:.1}%)",
            eval.relay.p_e,
            mc.value,
            100.0 * rel
        ));
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: pass && within_budget(elapsed, 300),
        detail: format!("{}; {:.1} s", parts.join("; "), elapsed.as_secs_f64()),
    }
}

fn trivial_limits() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > EXACT {
            failures.push(format!("{name}: {got} vs {want}"));
        }
    };
    let same = LinkStats::from_moments(180.0, 260.0, 180.0, 260.0).with_threshold(190.0);
    check(
        "direct, identical laws",
        direct_ber(&same).unwrap().p_e,
        0.5,
    );
    let stats = LinkStats::from_moments(100.0, 200.0, 300.0, 500.0);
    for tau in [f64::INFINITY, f64::NEG_INFINITY, 1e300, -1e300] {
        check(
            "direct, extreme threshold",
            direct_ber(&stats.with_threshold(tau)).unwrap().p_e,
            0.5,
        );
    }
    let sharp = LinkStats::from_moments(100.0, 1e-4, 1e5, 1e-4).with_threshold(5e4);
    check(
        "relay, perfect separation",
        relay_ber(&sharp, &sharp).unwrap().p_e,
        0.0,
    );
    check("success at 0", success_probability(0.0, 1), 1.0);
    check("success at 1/2", success_probability(0.5, 1), 0.0);
    let r_mm = 2.5e-9;
    for g in [1u64, 2, 7, 100, 12_345, 1_000_000, 987_654_321] {
        let back = vesicle_capacity(vesicle_radius(g, r_mm).unwrap(), r_mm).unwrap();
        check(&format!("capacity round trip at {g}"), back / g as f64, 1.0);
    }
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "all limits exact to 1e-12".into()
        } else {
            failures.join("; ")
        },
    }
}

/// Relay BER of the exponential rows of one case, in sweep order.
fn series(rows: &[SweepRow], case: &str, family: &str) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.case == case && r.family.name() == family)
        .map(|r| match &r.outcome {
            RowOutcome::Ok(v) => (r.axis_value, v.ber_relay),
            RowOutcome::Infeasible(m) => panic!("{m}"),
        })
        .collect()
}

fn monotone(points: &[(f64, f64)], increasing: bool) -> Option<(f64, f64)> {
    points
        .windows(2)
        .find(|w| {
            if increasing {
                w[1].1 < w[0].1
            } else {
                w[1].1 > w[0].1
            }
        })
        .map(|w| (w[0].0, w[1].0))
}

fn trends() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut judge = |label: &str, points: Vec<(f64, f64)>, increasing: bool| {
        let bad = monotone(&points, increasing);
        let ok = points.len() >= 8 && bad.is_none();
        pass &= ok;
        parts.push(match bad {
            None => format!("{label} ok over {} points", points.len()),
            Some((a, b)) => format!("{label} broken between {a} and {b}"),
        });
    };
    let rows = |name: &str| sweep_rows(&load(name)).unwrap().1;

    let fig3 = rows("fig3.cfg");
    for case in ["R_100_12_14", "R_100_14_14"] {
        judge(
            &format!("(a) t_s {case}"),
            series(&fig3, case, "exponential"),
            false,
        );
    }
    judge(
        "(b) R_y",
        series(&rows("fig4_ry.cfg"), "E_1000fJ", "exponential"),
        true,
    );
    judge(
        "(b) R_z",
        series(&rows("fig4_rz.cfg"), "E_1000fJ", "exponential"),
        true,
    );
    judge(
        "(c) V_y",
        series(&rows("fig5_vy.cfg"), "", "exponential"),
        false,
    );
    judge(
        "(c) V_z",
        series(&rows("fig5_vz.cfg"), "", "exponential"),
        false,
    );
    let fig6: Vec<(f64, f64)> = series(&rows("fig6.cfg"), "t_s_16ms", "exponential");
    judge(
        "(d) J",
        fig6.into_iter()
            .filter(|(j, _)| (6.0..=14.0).contains(j))
            .collect(),
        true,
    );

    // Both pulses saturate at exactly 1/2 for short slots, where no order
    // can be seen; everywhere else the exponential pulse must win.
    let exp = series(&fig3, "R_100_12_14", "exponential");
    let uni = series(&fig3, "R_100_12_14", "uniform");
    let never_worse = exp.iter().zip(&uni).all(|(e, u)| e.1 <= u.1);
    let resolved: Vec<_> = exp.iter().zip(&uni).filter(|(_, u)| u.1 != 0.5).collect();
    let strict = resolved.iter().filter(|(e, u)| e.1 < u.1).count();
    let at_18 = exp.last().unwrap().1 < uni.last().unwrap().1;
    let ok = never_worse && at_18 && resolved.len() >= 8 && strict == resolved.len();
    pass &= ok;
    parts.push(format!(
        "(e) exponential < uniform at {strict}/{} resolved t_s points (of {}), at 18 ms: {at_18}",
        resolved.len(),
        exp.len()
    ));

    let elapsed = start.elapsed();
    Outcome {
        pass,
        detail: format!("{}; {:.1} s", parts.join("; "), elapsed.as_secs_f64()),
    }
}

fn optimizer() -> Outcome {
    let start = Instant::now();
    let config = load("fig7.cfg");
    let opt = config.optimizer.as_ref().unwrap().to_config();
    let family = config.families()[0];
    let mut pass = true;
    let mut parts = Vec::new();
    for point in config.points().unwrap() {
        let scenario = point.scenario(family).unwrap();
        let o = bisection_optimize(&scenario, &opt).unwrap();
        let (t_grid, f_grid) =
            grid_search_max(&|t| objective(&scenario, t), opt.t_min, opt.t_max, 10_000).unwrap();
        let halving = o.trace.windows(2).all(|w| {
            ((w[1].upper - w[1].lower) - 0.5 * (w[0].upper - w[0].lower)).abs()
                <= 1e-9 * (w[0].upper - w[0].lower)
        });
        let first = o.trace.first().map(|s| s.upper - s.lower).unwrap_or(0.0);
        let halving =
            halving && (first - 0.5 * opt.level_upper_init).abs() <= 1e-9 * opt.level_upper_init;
        let scan = derivative_sign_scan(&scenario, &linspace(opt.t_min, opt.t_max, 500)).unwrap();
        let close = (o.f_star - f_grid).abs() <= OPT_EPSILON;
        pass &= close && halving && scan.single_change();
        parts.push(format!(
            "{}: t*={:.2} ms F*={:.4} (grid {:.2} ms, {:.4}), halving {halving}, sign changes {}",
            point.label,
            o.t_star * 1e3,
            o.f_star,
            t_grid * 1e3,
            f_grid,
            scan.sign_changes
        ));
        if point.label == "Vy60_R_100_12_13" {
            parts.push(format!(
                "published optimum 13.89 ms / 70.8 bits/s, ratio t* {:.1}x, F* {:.3}x",
                o.t_star * 1e3 / 13.89,
                o.f_star / 70.8
            ));
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: pass && within_budget(elapsed, 120),
        detail: format!("{}; {:.1} s", parts.join("; "), elapsed.as_secs_f64()),
    }
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let validate_cfg = tmp.path().join("validate_small.cfg");
    let text = std::fs::read_to_string(configs().join("validate.cfg"))
        .unwrap()
        .replace("presence_trials = 1000000", "presence_trials = 100000")
        .replace("moment_trials = 1000000", "moment_trials = 20000")
        .replace("ber_bits = 1000000", "ber_bits = 20000");
    std::fs::write(&validate_cfg, text).unwrap();
    let runs: [(&str, PathBuf, &[&str]); 3] = [
        (
            "sweep",
            configs().join("fig5_vz.cfg"),
            &["--mc-bits", "5000", "--seed", "7"],
        ),
        ("optimize", configs().join("fig7.cfg"), &[]),
        ("validate", validate_cfg, &[]),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (command, cfg, extra) in runs {
        let mut outputs = Vec::new();
        for threads in ["1", "4"] {
            let out = tmp.path().join(format!("{command}_{threads}"));
            let status = Command::new(env!("CARGO_BIN_EXE_mcvd"))
                .arg(command)
                .arg("--config")
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
                .args(extra)
                .env("RAYON_NUM_THREADS", threads)
                .output()
                .unwrap()
                .status;
            outputs.push((status.code(), read_tree(&out)));
        }
        let same = outputs[0] == outputs[1] && !outputs[0].1.is_empty();
        pass &= same;
        parts.push(format!(
            "{command}: {} file(s) {}",
            outputs[0].1.len(),
            if same { "identical" } else { "DIFFER" }
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 channel oracle agreement", channel_oracles),
        ("2 moment formulas", moments),
        ("3 BER oracle agreement", ber_oracle),
        ("4 trivial limits", trivial_limits),
        ("5 qualitative trends", trends),
        ("6 optimizer", optimizer),
        ("7 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = run();
        println!(
            "{} {name}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
        failed += usize::from(!outcome.pass);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
