//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p okd --test acceptance`.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use okd::sweep::{run_sweep, write_panels, DecodingKind, Panel, SweepSpec, SWEEP_HEADER};
use okd::validate::parallel_estimate;
use okd::waveform;
use okd_core::infokey::{i_ab_hard, i_ab_soft, i_be};
use okd_core::montecarlo::{estimate_key_rate, simulate, Estimator, SimConfig};
use okd_core::modes::Complex64;
use okd_core::{
    optimize_hard, optimize_soft, Decoding, HardDecoder, OperatingPoint, OptimizationBudget,
    OptimizedPoint, PoissonLaw, ScenarioParams, TruncationPolicy,
};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use statrs::distribution::{Discrete, Poisson};

const PLATEAU: f64 = 1e-8;
const ENERGIES: [f64; 3] = [10.0, 75.0, 500.0];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn budget() -> OptimizationBudget {
    OptimizationBudget::default()
}

fn policy() -> TruncationPolicy {
    TruncationPolicy::default()
}

fn optimize(kind: DecodingKind, n: f64, d: f64, tau: f64, nb: f64) -> OptimizedPoint {
    let p = OperatingPoint::new(n, d, tau, nb).unwrap();
    match kind {
        DecodingKind::Soft => optimize_soft(&p, &budget(), &policy()).unwrap(),
        DecodingKind::Hard => optimize_hard(&p, &budget(), &policy()).unwrap(),
    }
}

fn soft_key(n: f64, d: f64, tau: f64, nb: f64) -> f64 {
    optimize(DecodingKind::Soft, n, d, tau, nb).key_rate()
}

/// The default panel grid (81 points over [-40, 0] dB), shared by several
/// criteria.
fn coarse_grid() -> &'static [Panel] {
    static PANELS: OnceLock<Vec<Panel>> = OnceLock::new();
    PANELS.get_or_init(|| run_sweep(&SweepSpec::figure3(81), &budget(), &policy()).unwrap())
}

/// `(tau, n_b, nbar_E, K_soft, K_hard)`.
type PlateauRow = (f64, f64, f64, f64, f64);

/// Optimised soft and hard keys of every curve at the plateau distortion.
fn plateau_grid() -> &'static [PlateauRow] {
    static ROWS: OnceLock<Vec<PlateauRow>> = OnceLock::new();
    ROWS.get_or_init(|| {
        let spec = SweepSpec::figure3(2);
        let mut rows = Vec::new();
        for (tau, nb) in spec.panels() {
            for n in ENERGIES {
                let s = soft_key(n, PLATEAU, tau, nb);
                let h = optimize(DecodingKind::Hard, n, PLATEAU, tau, nb).key_rate();
                rows.push((tau, nb, n, s, h));
            }
        }
        rows
    })
}

fn c1_monte_carlo() -> Verdict {
    // (nbar_E, D, tau, n_b, decoding): all four noise levels, both ratios,
    // all three energies. Soft points sit where the plug-in bias of a 10^6
    // slot run is well inside the tolerance.
    let points = [
        (10.0, 1e-6, 1.0, 0.0, DecodingKind::Soft),
        (10.0, 1e-2, 1.0, 0.0, DecodingKind::Soft),
        (10.0, 1e-1, 0.1, 1.0, DecodingKind::Soft),
        (75.0, 1e-3, 1.0, 0.1, DecodingKind::Hard),
        (75.0, 1e-2, 0.1, 10.0, DecodingKind::Hard),
        (500.0, 1e-4, 1.0, 10.0, DecodingKind::Hard),
    ];
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (i, &(n, d, tau, nb, kind)) in points.iter().enumerate() {
        let o = optimize(kind, n, d, tau, nb);
        let cfg = SimConfig::new(o.params, 1_000_000, 2024, o.result.decoding).unwrap();
        let e = parallel_estimate(&cfg, 4, Estimator::PlugIn).unwrap();
        let se = e.standard_errors;
        let z = [
            (e.i_ab_hat - o.result.i_ab) / se.i_ab,
            (e.i_be_hat - o.result.i_be) / se.i_be,
            (e.k_hat - o.result.key_rate) / se.key_rate,
        ];
        let zmax = z.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        worst = worst.max(zmax);
        if !e.agreement(&o.result, 3.0).all() {
            failures.push(format!("point {} z={z:.2?}", i + 1));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        failures.is_empty() && secs <= 120.0,
        format!("6 points, worst |z| = {worst:.2}, {secs:.1} s{}", fmt_failures(&failures)),
    )
}

fn fmt_failures(f: &[String]) -> String {
    if f.is_empty() {
        String::new()
    } else {
        format!("; failing: {}", f.join(", "))
    }
}

fn pmf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        if k == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        Poisson::new(mean).unwrap().pmf(k)
    }
}

fn upper(mean: f64) -> u64 {
    (mean + 15.0 * mean.sqrt() + 40.0).ceil() as u64
}

/// I(B;E) summed over Bob's estimate and both of Eve's counts, with no
/// collapse of her alphabet.
fn full_i_be(p: &ScenarioParams, decoder: Option<HardDecoder>) -> f64 {
    let (bob, eve) = (p.bob_channel(), p.eve_channel());
    let bmax = upper(bob.law(0).mean().max(bob.law(1).mean()));
    let umax = upper(eve.u_law(0).mean().max(eve.u_law(1).mean()));
    let vmax = upper(eve.v_law(1).mean());
    let mut q = [Vec::new(), Vec::new()];
    for a in 0..2u8 {
        let m = bob.law(a).mean();
        q[a as usize] = match decoder {
            None => (0..=bmax).map(|b| pmf(m, b)).collect(),
            Some(d) => {
                let mut t = vec![0.0; 3];
                for b in 0..=bmax {
                    let i = match d.decode(b) {
                        okd_core::Symbol::Zero => 0,
                        okd_core::Symbol::Inconclusive => 1,
                        okd_core::Symbol::One => 2,
                    };
                    t[i] += pmf(m, b);
                }
                t
            }
        };
    }
    let pu: Vec<Vec<f64>> = (0..2u8)
        .map(|a| (0..=umax).map(|k| pmf(eve.u_law(a).mean(), k)).collect())
        .collect();
    let pv: Vec<Vec<f64>> = (0..2u8)
        .map(|a| (0..=vmax).map(|k| pmf(eve.v_law(a).mean(), k)).collect())
        .collect();
    let pq: Vec<f64> = (0..q[0].len()).map(|i| 0.5 * (q[0][i] + q[1][i])).collect();
    let mut info = 0.0;
    for ku in 0..=umax as usize {
        for kv in 0..=vmax as usize {
            let e = [pu[0][ku] * pv[0][kv], pu[1][ku] * pv[1][kv]];
            let pe = 0.5 * (e[0] + e[1]);
            if pe == 0.0 {
                continue;
            }
            for (i, &m) in pq.iter().enumerate() {
                let joint = 0.5 * (q[0][i] * e[0] + q[1][i] * e[1]);
                if joint > 0.0 {
                    info += joint * (joint / m / pe).log2();
                }
            }
        }
    }
    info
}

fn c2_collapse() -> Verdict {
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let n: f64 = rng.random_range(1.0..40.0);
        let delta = rng.random_range(0.0..n.sqrt());
        let d = 10f64.powf(rng.random_range(-8.0..0.0));
        let tau = rng.random_range(0.05..1.0);
        let nb = rng.random_range(0.0..5.0);
        let p = ScenarioParams::new(n, delta, d, tau, nb).unwrap();
        let decoder = (i % 2 == 1).then(|| {
            let m = tau * n;
            let k0 = rng.random_range(0..(m as u64 + 2));
            HardDecoder::new(k0, k0 + rng.random_range(0..4)).unwrap()
        });
        let decoding = decoder.map_or(Decoding::Soft, Decoding::Hard);
        let collapsed = i_be(&p, &decoding, &policy()).unwrap();
        worst = worst.max((collapsed - full_i_be(&p, decoder)).abs());
    }
    verdict(worst <= 1e-10, format!("20 draws, max |difference| = {worst:.2e}"))
}

fn relative_spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::MIN, f64::max);
    let lo = v.iter().cloned().fold(f64::MAX, f64::min);
    (hi - lo) / hi
}

fn c3_universality() -> Verdict {
    let k: Vec<f64> = ENERGIES.iter().map(|&n| soft_key(n, PLATEAU, 1.0, 0.0)).collect();
    let spread = relative_spread(&k);
    verdict(spread <= 0.02, format!("K = {k:.5?}, spread {:.2}%", 100.0 * spread))
}

fn c4_knee() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in ENERGIES {
        let plateau = soft_key(n, PLATEAU, 1.0, 0.0);
        let near = soft_key(n, 0.1 / n, 1.0, 0.0) / plateau;
        let far = soft_key(n, (10.0 / n).min(1.0), 1.0, 0.0) / plateau;
        pass &= near >= 0.9 && far < 0.5;
        parts.push(format!("n={n}: {near:.3}/{far:.3}"));
    }
    verdict(pass, format!("K(0.1/n)/K0, K(10/n)/K0: {}", parts.join(", ")))
}

fn c5_hard_vs_soft() -> Verdict {
    let mut worst = f64::MIN;
    let mut rows = 0;
    for panel in coarse_grid() {
        for n in ENERGIES {
            let soft: Vec<_> = panel.curve(DecodingKind::Soft, n).collect();
            let hard: Vec<_> = panel.curve(DecodingKind::Hard, n).collect();
            for (s, h) in soft.iter().zip(&hard) {
                assert_eq!(s.distortion_db, h.distortion_db);
                worst = worst.max(h.optimum.key_rate() - s.optimum.key_rate());
                rows += 1;
            }
        }
    }
    for &(_, _, _, s, h) in plateau_grid() {
        worst = worst.max(h - s);
        rows += 1;
    }
    let ratios: Vec<f64> = plateau_grid()
        .iter()
        .filter(|r| r.0 == 1.0 && r.1 == 0.0)
        .map(|r| r.4 / r.3)
        .collect();
    let min_ratio = ratios.iter().cloned().fold(f64::MAX, f64::min);
    verdict(
        worst <= 1e-9 && min_ratio >= 0.8,
        format!("{rows} grid points, max(K_hard - K_soft) = {worst:.2e}; K_hard/K_soft at plateau = {ratios:.3?}"),
    )
}

fn c6_noise_tradeoff() -> Verdict {
    let strong = soft_key(500.0, PLATEAU, 1.0, 10.0);
    let weak = soft_key(10.0, PLATEAU, 1.0, 10.0);
    let crossing = (0..=16).map(|i| -40.0 + 2.5 * i as f64).find(|&db| {
        let d = 10f64.powf(db / 10.0);
        soft_key(10.0, d, 1.0, 10.0) > soft_key(500.0, d, 1.0, 10.0)
    });
    verdict(
        strong > weak && crossing.is_some(),
        format!(
            "plateau K(500) = {strong:.5} > K(10) = {weak:.5}; first crossing at {}",
            crossing.map_or("none".into(), |db| format!("{db} dB"))
        ),
    )
}

fn c7_optimal_strength() -> Verdict {
    let energies = [2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0];
    let k: Vec<f64> = energies.iter().map(|&n| soft_key(n, 1e-2, 1.0, 1.0)).collect();
    let best = (0..k.len()).max_by(|&a, &b| k[a].total_cmp(&k[b])).unwrap();
    verdict(
        best > 0 && best < k.len() - 1,
        format!("maximum at nbar_E = {} (K = {k:.4?})", energies[best]),
    )
}

fn c8_magnitude() -> Verdict {
    let positive: Vec<f64> = plateau_grid()
        .iter()
        .flat_map(|r| [r.3, r.4])
        .filter(|&k| k > 0.0)
        .collect();
    let min = positive.iter().cloned().fold(f64::MAX, f64::min);
    verdict(
        min > 3e-6,
        format!("{} positive plateau keys, smallest {min:.3e}", positive.len()),
    )
}

fn c9_modes() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut worst = [0.0f64; 4];
    for (i, &(dt, sigma)) in [(0.1, 1.0), (0.5, 1.0), (2.0, 0.7), (5.0, 1.5)].iter().enumerate() {
        let path = dir.path().join(format!("gauss{i}.csv"));
        waveform::generate_gaussian_file(&path, dt, sigma, 4001).unwrap();
        let pair = waveform::load_pair(&path).unwrap();
        let closed = 1.0 - (-dt * dt / (4.0 * sigma * sigma)).exp();
        let v = pair.complement_mode().unwrap();
        let c = pair.overlap();
        let rebuilt = pair
            .u0()
            .combine(c, &v, Complex64::new(pair.distortion().sqrt(), 0.0))
            .unwrap();
        let errs = [
            (pair.distortion() - closed).abs(),
            pair.u0().inner(&v).unwrap().norm(),
            (v.inner(&v).unwrap().re - 1.0).abs(),
            rebuilt.l2_distance(pair.u1()).unwrap(),
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    verdict(
        worst[0] <= 1e-6 && worst[1] <= 1e-9 && worst[2] <= 1e-9 && worst[3] <= 1e-8,
        format!(
            "|D - closed form| {:.1e}, |<u0,v>| {:.1e}, |<v,v> - 1| {:.1e}, reconstruction {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn c10_invariants() -> Verdict {
    let mut failures = Vec::new();

    // Poisson mass and mean on the certified window.
    for mean in [0.01, 0.5, 3.0, 29.9, 30.0, 75.0, 510.0, 1000.0] {
        let law = PoissonLaw::new(mean).unwrap();
        let (lo, hi) = law.support_window(&policy()).unwrap();
        let (mass, m1) = (lo..=hi).fold((0.0, 0.0), |(s, m), k| {
            let p = law.pmf(k);
            (s + p, m + k as f64 * p)
        });
        if !((1.0 - mass).abs() <= 2e-12 + 1e-13 && (m1 - mean).abs() <= 1e-9 * mean.max(1.0)) {
            failures.push(format!("poisson {mean}: mass {mass}, mean {m1}"));
        }
    }

    // Information bounds and data processing.
    let mut rng = StdRng::seed_from_u64(10);
    for _ in 0..40 {
        let n: f64 = rng.random_range(0.5..200.0);
        let p = ScenarioParams::new(
            n,
            rng.random_range(0.0..n.sqrt()),
            10f64.powf(rng.random_range(-8.0..0.0)),
            rng.random_range(0.05..1.0),
            rng.random_range(0.0..10.0),
        )
        .unwrap();
        let soft = i_ab_soft(&p, &policy()).unwrap();
        let be = i_be(&p, &Decoding::Soft, &policy()).unwrap();
        let m = p.bob_channel().law(1).mean();
        let k0 = rng.random_range(0..(m as u64 + 3));
        let d = HardDecoder::new(k0, k0 + rng.random_range(0..5)).unwrap();
        let hard = i_ab_hard(&p, &d, &policy()).unwrap();
        if !((0.0..=1.0).contains(&soft) && (0.0..=1.0).contains(&be) && be <= soft + 1e-12 && hard <= soft + 1e-12)
        {
            failures.push(format!("information bounds at {p:?}"));
        }
    }

    // Seeded simulation is reproducible and shard independent.
    let p = ScenarioParams::new(10.0, 1.0, 1e-2, 1.0, 0.1).unwrap();
    let cfg = SimConfig::new(p, 200_000, 99, Decoding::Soft).unwrap();
    if simulate(&cfg).collect::<Vec<_>>() != simulate(&cfg).collect::<Vec<_>>() {
        failures.push("simulation not deterministic".into());
    }
    let serial = estimate_key_rate(&cfg).unwrap();
    if (1..=3).any(|s| parallel_estimate(&cfg, s, Estimator::PlugIn).unwrap() != serial) {
        failures.push("estimate depends on sharding".into());
    }

    // Emitted sweep files never let the key rise with distortion.
    let dir = tempfile::tempdir().unwrap();
    let paths = write_panels(coarse_grid(), dir.path(), "figure3").unwrap();
    let mut sequences = 0;
    for path in &paths {
        let text = std::fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(SWEEP_HEADER));
        let mut prev: Option<(String, String, f64)> = None;
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f[1] == "marker" {
                continue;
            }
            let k: f64 = f[8].parse().unwrap();
            match &prev {
                Some((dec, n, last)) if dec == f[1] && n == f[2] => {
                    if k > last + 1e-9 {
                        failures.push(format!("{} rises: {line}", path.display()));
                    }
                }
                _ => sequences += 1,
            }
            prev = Some((f[1].to_string(), f[2].to_string(), k));
        }
    }

    verdict(
        failures.is_empty(),
        format!(
            "poisson windows, 40 information draws, determinism, {sequences} monotone sweep sequences{}",
            fmt_failures(&failures)
        ),
    )
}

fn main() -> ExitCode {
    type Check = fn() -> Verdict;
    let criteria: [(&str, Check); 10] = [
        ("analytic and Monte Carlo agree", c1_monte_carlo),
        ("collapsed Eve alphabet is exact", c2_collapse),
        ("vanishing-distortion universality", c3_universality),
        ("rule-of-thumb knee at D ~ 1/nbar_E", c4_knee),
        ("hard decoding never beats soft", c5_hard_vs_soft),
        ("noise favours strong pulses, distortion weak ones", c6_noise_tradeoff),
        ("interior optimal signal strength", c7_optimal_strength),
        ("plateau keys exceed 3e-6 bit/slot", c8_magnitude),
        ("mode algebra on generated waveforms", c9_modes),
        ("module invariant suites", c10_invariants),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{:.1} s]",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
