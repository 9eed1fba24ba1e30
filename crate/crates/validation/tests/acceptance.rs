//! Acceptance suite. Prints one `[PASS]` / `[FAIL]` line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p tcell-validation --test acceptance`.

use std::f64::consts::LN_2;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tcell_cli::{cmd_run_abm, csvio, ConfigBuilder};
use tcell_core::{
    compare, default_params, default_scenario, export_modulation, extract_features, hazard_to_prob,
    integrate, memory_estimate, proliferation_dilution, run_ensemble, step_population, thymic_output,
    trec_death_factor, AbmConfig, AgentPopulation, Compartment, ModelParams, Scenario, ToleranceProfile,
    Trajectory,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn criterion_1() -> Outcome {
    let p = default_params();
    let expected = [
        ("b", p.b, 4.2),
        ("n_p_bar", p.n_p_bar, 392.0),
        ("mu_n", p.mu_n, 4.4),
        ("lambda_n", p.lambda_n, 0.003),
        ("mu_m", p.mu_m, 0.05),
        ("lambda_npa", p.lambda_npa, 0.1),
        ("lambda_na", p.lambda_na, 0.0),
        ("lambda_mn", p.lambda_mn, 0.0),
        ("s_bar", p.s_bar, 0.0),
        ("mu_a", p.mu_a, 44.4),
        ("lambda_thymic", p.lambda_thymic, LN_2 / 15.7),
        ("c", p.c, 4.4 * (1.0 - LN_2 / 392.0)),
    ];
    let wrong: Vec<String> = expected
        .iter()
        .filter(|(_, got, want)| got.to_bits() != want.to_bits())
        .map(|(name, got, want)| format!("{name} = {got} (want {want})"))
        .collect();
    if wrong.is_empty() {
        Outcome::new(true, format!("{} default parameters exact", expected.len()))
    } else {
        Outcome::new(false, wrong.join("; "))
    }
}

// Straight-line evaluations typed from the model definition.
fn oracle_s(n_p: f64, s_bar: f64) -> f64 {
    1.0 / (1.0 + s_bar * n_p / 392.0)
}

fn oracle_g(n_p: f64, b: f64) -> f64 {
    1.0 + b * (n_p / 392.0) / (1.0 + n_p / 392.0)
}

fn oracle_h(n: f64, n_p: f64, n_b: f64) -> f64 {
    1.0 / (1.0 + (n + n_p) / n_b)
}

fn oracle_s0(t: f64) -> f64 {
    0.82 * (7024.0 * (-((t - 12.02) / 3.623).powi(2)).exp()
        + 5.203e5 * (-((t + 127.8) / 64.47).powi(2)).exp()
        + 1937.0 * (-((t - 7.357) / 6.03).powi(2)).exp()
        + 1.259e18 * (-((t - 1309.0) / 214.4).powi(2)).exp())
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = [0.0f64; 4];
    for _ in 0..100 {
        let n = rng.random_range(0.0..1e5);
        let n_p = rng.random_range(0.0..1e5);
        let t = rng.random_range(0.0..100.0);
        let p = ModelParams {
            s_bar: rng.random_range(0.0..5.0),
            b: rng.random_range(0.0..10.0),
            n_b: rng.random_range(1.0..1e7),
            ..default_params()
        };
        worst[0] = worst[0].max(relative_gap(export_modulation(n_p, &p), oracle_s(n_p, p.s_bar)));
        worst[1] = worst[1].max(relative_gap(trec_death_factor(n_p, &p), oracle_g(n_p, p.b)));
        worst[2] = worst[2].max(relative_gap(proliferation_dilution(n, n_p, &p), oracle_h(n, n_p, p.n_b)));
        worst[3] = worst[3].max(relative_gap(thymic_output(t, &p), oracle_s0(t)));
    }
    let pass = worst.iter().all(|w| *w <= 1e-12);
    Outcome::new(
        pass,
        format!(
            "max relative gap s {:.1e}, g {:.1e}, h {:.1e}, s0 {:.1e} (limit 1e-12)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn max_diff(a: &Trajectory, b: &Trajectory) -> f64 {
    a.samples
        .iter()
        .zip(&b.samples)
        .flat_map(|(x, y)| x.values().into_iter().zip(y.values()).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

fn criterion_3() -> Outcome {
    let p = default_params();
    let runs: Vec<Trajectory> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&dt| {
            let sc = Scenario {
                dt,
                record_every: (1.0 / dt).round() as u64,
                ..default_scenario()
            };
            integrate(&sc, &p).unwrap()
        })
        .collect();
    let ratio = max_diff(&runs[0], &runs[1]) / max_diff(&runs[1], &runs[2]);
    Outcome::new(
        (12.0..=20.0).contains(&ratio),
        format!("step-halving contraction ratio {ratio:.2} (want [12, 20])"),
    )
}

fn criterion_4() -> Outcome {
    let traj = integrate(&default_scenario(), &default_params()).unwrap();
    let f = extract_features(&traj).unwrap();
    let n = traj.series(Compartment::NaiveThymic);
    let early_max = n[..=15].iter().copied().fold(0.0, f64::max);
    let sharp_early = n[30] < 0.5 * early_max;
    let halflife_ok = f.late_decay_halflife.is_some_and(|h| (h - 15.7).abs() <= 2.5);
    let crossover_ok = f.crossover_age.is_some();
    let drift_ok = f.total_naive_drift.is_some_and(|d| d.abs() < 0.5);
    let n_fall_ok = f.thymic_naive_change.is_some_and(|c| c < -0.8);
    let fmt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.3}"));
    let mark = |ok: bool| if ok { "ok" } else { "FAILED" };
    Outcome::new(
        sharp_early && halflife_ok && crossover_ok && drift_ok && n_fall_ok,
        format!(
            "(a) early N(30)/max = {:.3} {}, late half-life {} {} (want 15.7 +/- 2.5); \
             (b) crossover {} {}; (c) N+Np drift {} {} (want |.| < 0.5), N change {} {} (want < -0.8)",
            n[30] / early_max,
            mark(sharp_early),
            fmt(f.late_decay_halflife),
            mark(halflife_ok),
            fmt(f.crossover_age),
            mark(crossover_ok),
            fmt(f.total_naive_drift),
            mark(drift_ok),
            fmt(f.thymic_naive_change),
            mark(n_fall_ok),
        ),
    )
}

fn criterion_5() -> Outcome {
    let sc = default_scenario();
    let p = default_params();
    let cfg = AbmConfig::default();
    let ode = integrate(&sc, &p).unwrap();
    let stats = run_ensemble(&sc, &p, &cfg).unwrap();
    let report = compare(&ode, &stats, &ToleranceProfile::default()).unwrap();
    let ratios: Vec<String> = report
        .compartments
        .iter()
        .map(|c| format!("{} {:.2}", c.compartment.label(), c.worst_tolerance_ratio))
        .collect();
    Outcome::new(
        report.pass,
        format!(
            "{} replicates, dt {}, scale {}: worst |err|/max(5%, 5) {} (want <= 1)",
            cfg.replicates,
            cfg.dt,
            cfg.scale,
            ratios.join(", ")
        ),
    )
}

fn criterion_6() -> Outcome {
    let p = ModelParams {
        s0_global_scale: 0.0,
        ..default_params()
    };
    let dt = 0.01;
    let trials = 100_000u64;
    let pop = AgentPopulation {
        t: 0.0,
        naive_thymic: 0,
        naive_proliferated: 0,
        active: 1,
        memory: 0,
    };
    let total = p.mu_a + p.lambda_a;
    let fire = hazard_to_prob(total, dt);
    let expected = [p.mu_a / total * fire, p.lambda_a / total * fire];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut counts = [0u64; 2];
    for _ in 0..trials {
        let next = step_population(&pop, &p, dt, 1.0, &mut rng);
        match (next.active, next.memory) {
            (1, 0) => {}
            (0, 0) => counts[0] += 1,
            (0, 1) => counts[1] += 1,
            other => return Outcome::new(false, format!("impossible outcome {other:?}")),
        }
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, (k, q)) in ["death", "to memory"].iter().zip(counts.iter().zip(expected)) {
        let freq = *k as f64 / trials as f64;
        let sigma = (q * (1.0 - q) / trials as f64).sqrt();
        let z = (freq - q) / sigma;
        pass &= z.abs() <= 3.0;
        parts.push(format!("{name} {freq:.5} vs {q:.5} (z = {z:+.2})"));
    }
    Outcome::new(pass, format!("{trials} trials: {}", parts.join(", ")))
}

fn criterion_7() -> Outcome {
    let sc = default_scenario();
    let with_b = integrate(&sc, &default_params()).unwrap();
    let without = integrate(&sc, &ModelParams { b: 0.0, ..default_params() }).unwrap();
    let late: Vec<(f64, f64, f64)> = with_b
        .samples
        .iter()
        .zip(&without.samples)
        .filter(|(x, _)| x.t >= 40.0)
        .map(|(x, y)| (x.t, x.n, y.n))
        .collect();
    let violation = late.iter().find(|(_, hi, lo)| hi >= lo);
    match violation {
        None => {
            let min_gap = late.iter().map(|(_, hi, lo)| lo - hi).fold(f64::INFINITY, f64::min);
            Outcome::new(
                true,
                format!("N(b=4.2) < N(b=0) at all {} samples t >= 40 (smallest gap {min_gap:.3})", late.len()),
            )
        }
        Some((t, hi, lo)) => Outcome::new(false, format!("t = {t}: N(b=4.2) = {hi} >= N(b=0) = {lo}")),
    }
}

fn criterion_8() -> Outcome {
    let traj = integrate(&default_scenario(), &default_params()).unwrap();
    let fractions = [0.05, 0.1, 0.2, 0.5];
    let estimates: Vec<_> = fractions.iter().map(|&f| memory_estimate(&traj, f).unwrap()).collect();
    // est(f) = A / f, so est(f) · f / est(f') · f' = 1 at every sample.
    let mut worst_linear = 0.0f64;
    let mut exact = true;
    for (est, &f) in estimates.iter().zip(&fractions) {
        for ((pt, s), base) in est.points.iter().zip(&traj.samples).zip(&estimates[0].points) {
            let Some(total) = pt.estimated_total else {
                exact = false;
                continue;
            };
            exact &= total.to_bits() == (s.a / f).to_bits();
            let base = base.estimated_total.unwrap_or(f64::NAN);
            if base > 0.0 {
                worst_linear = worst_linear.max(relative_gap(total * f, base * fractions[0]));
            }
        }
    }
    let linear = exact && worst_linear <= 1e-12;
    let mid_life: Vec<&tcell_core::MemoryPoint> =
        estimates[1].points.iter().filter(|p| p.t <= 45.0).collect();
    let monotone = mid_life.windows(2).all(|w| w[1].model_memory >= w[0].model_memory);
    Outcome::new(
        linear && monotone,
        format!(
            "estimate = A/f exact: {exact}, worst deviation from 1/f scaling {worst_linear:.1e}; \
             memory non-decreasing over {} samples in [0, 45]: {monotone}",
            mid_life.len()
        ),
    )
}

/// `run-abm` with 20 replicates, written to a file and read back.
fn abm_csv(seed: u64, dir: &Path) -> Result<Vec<u8>, String> {
    let path = dir.join(format!("abm_{seed}_{}.csv", rand::random::<u32>()));
    let mut builder = ConfigBuilder::new();
    for kv in ["abm.replicates=20".to_string(), format!("abm.seed={seed}"), format!("output.path={}", path.display())] {
        builder.apply_override(&kv).map_err(|e| e.to_string())?;
    }
    let cfg = builder.build().map_err(|e| e.to_string())?;
    cmd_run_abm(&cfg).map_err(|e| e.to_string())?;
    std::fs::read(&path).map_err(|e| e.to_string())
}

fn criterion_9() -> Outcome {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    let run = |seed| abm_csv(seed, dir.path());
    let (a, b, c) = match (run(11), run(11), run(12)) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (Err(e), ..) | (_, Err(e), _) | (.., Err(e)) => return Outcome::new(false, e),
    };
    let identical = a == b;
    let seed_matters = a != c;

    let traj = integrate(&default_scenario(), &default_params()).unwrap();
    let mut buf = Vec::new();
    csvio::write_trajectory(&traj, &mut buf).unwrap();
    let back = csvio::read_samples(buf.as_slice()).unwrap();
    let round_trip = back.len() == traj.samples.len()
        && back.iter().zip(&traj.samples).all(|(x, y)| {
            x.t.to_bits() == y.t.to_bits()
                && x.values().iter().zip(y.values()).all(|(u, v)| u.to_bits() == v.to_bits())
        });
    Outcome::new(
        identical && seed_matters && round_trip,
        format!(
            "same seed byte-identical ({} bytes): {identical}, different seed differs: {seed_matters}, \
             trajectory CSV round-trip bit-exact: {round_trip}",
            a.len()
        ),
    )
}

type Criterion = (u32, fn() -> Outcome, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, criterion_1, secs(1)),
        (2, criterion_2, secs(1)),
        (3, criterion_3, secs(30)),
        (4, criterion_4, secs(10)),
        (5, criterion_5, secs(300)),
        (6, criterion_6, secs(30)),
        (7, criterion_7, secs(10)),
        (8, criterion_8, secs(5)),
        (9, criterion_9, secs(10)),
    ];
    let mut failed = 0;
    for (id, check, budget) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = outcome.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "[{}] criterion {id}: {} [{:.2}s, budget {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
