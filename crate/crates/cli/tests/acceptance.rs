//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

#[allow(dead_code)]
#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use pickup_auth::datagen::{
    gen_dataset, gen_pickup_trace, make_user, Context, DatasetConfig, GenParams, GenScenario, ScenarioKind,
};
use pickup_auth::evaluation::{far_frr, sweep, unlock_reduction, LabeledDistance};
use pickup_auth::profile::post_authenticate;
use pickup_auth::signal::detection_stats;
use pickup_auth::*;
use pickup_auth_cli::{cmd_bench, cmd_gen, cmd_sweep, Config, SweepFlags, SweepSummary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one criterion: pass flag and a one-line detail.
type Verdict = (bool, String);

const ORACLE_CASES: usize = 1200;
const INVARIANT_CASES: usize = 2000;
const EXTRACTION_TRACES: usize = 500;
const DRIFT_TRIALS: u64 = 50;

fn exact_case(rng: &mut ChaCha8Rng) -> (Vec<Exact>, Vec<Exact>) {
    let draw = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(1..=6);
        (0..n).map(|_| Exact::from_integer(rng.random_range(0..=3))).collect::<Vec<_>>()
    };
    (draw(rng), draw(rng))
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut mismatches = 0;
    for _ in 0..ORACLE_CASES {
        let (x, y) = exact_case(&mut rng);
        let want = oracle::enumerate(&x, &y, None);
        let got = Dtw::new().raw_1d(&x, &y, true).unwrap();
        if got.distance != want.distance || got.path.unwrap().pairs() != want.path.as_slice() {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    (
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("{ORACLE_CASES} cases, {mismatches} mismatches, {:.2} s", elapsed.as_secs_f64()),
    )
}

fn random_multi(rng: &mut ChaCha8Rng, k: usize, n: usize) -> MultiSeries64 {
    let ids = (0..k).map(|i| ChannelId::new(format!("c{i}"))).collect();
    let chans = (0..k)
        .map(|_| Series::new((0..n).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap())
        .collect();
    MultiSeries::new(ids, chans).unwrap()
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let dtw = Dtw::new();
    let mut failures = Vec::new();
    for case in 0..INVARIANT_CASES {
        let (n, m) = (rng.random_range(1..=40), rng.random_range(1..=40));
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-10.0..10.0)).collect();
        let xy = dtw.raw_1d(&x, &y, true).unwrap();
        let yx = dtw.raw_1d(&y, &x, false).unwrap();
        let xx = dtw.raw_1d(&x, &x, false).unwrap();
        let path = xy.path.as_ref().unwrap();
        let path_mean = path.cost(&x, &y) / path.len() as f64;
        if xy.distance < 0.0 {
            failures.push(format!("case {case}: negative"));
        }
        if xx.distance != 0.0 {
            failures.push(format!("case {case}: self distance {}", xx.distance));
        }
        if (xy.distance - yx.distance).abs() > 1e-9 {
            failures.push(format!("case {case}: asymmetric"));
        }
        if path.validate(n, m).is_err() || (path_mean - xy.distance).abs() > 1e-9 {
            failures.push(format!("case {case}: path cost"));
        }
        let k = rng.random_range(1..=6);
        let len_a = rng.random_range(1..=30);
        let len_b = rng.random_range(1..=30);
        let (a, b) = (random_multi(&mut rng, k, len_a), random_multi(&mut rng, k, len_b));
        let base = dtw.multi_baseline(&a, &b).unwrap().distance;
        let uni = dtw.multi_weighted(&a, &b, &WeightVector::uniform(k).unwrap()).unwrap().distance;
        if (base - uni).abs() > 1e-9 {
            failures.push(format!("case {case}: uniform {uni} vs baseline {base}"));
        }
    }
    let elapsed = start.elapsed();
    (
        failures.is_empty() && elapsed < Duration::from_secs(30),
        format!(
            "{INVARIANT_CASES} cases, {} violations{}, {:.2} s",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut sweep_violations = 0;
    for _ in 0..500 {
        let d: Vec<LabeledDistance<f64>> = (0..rng.random_range(2..60))
            .map(|i| {
                let v = rng.random_range(0.0..5.0);
                if i % 2 == 0 {
                    LabeledDistance::genuine(v)
                } else {
                    LabeledDistance::impostor(v)
                }
            })
            .collect();
        let mut grid: Vec<f64> = (0..rng.random_range(1..50)).map(|_| rng.random_range(0.0..6.0)).collect();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        let r = sweep(&d, &grid).unwrap();
        for i in 1..grid.len() {
            if r.far[i] < r.far[i - 1] || r.frr[i] > r.frr[i - 1] {
                sweep_violations += 1;
            }
        }
        for (i, &t) in grid.iter().enumerate() {
            let direct = far_frr(&d, t);
            if direct.far != Some(r.far[i]) || direct.frr != Some(r.frr[i]) {
                sweep_violations += 1;
            }
        }
    }

    let cfg = DatasetConfig {
        users: 4,
        contexts: 6,
        reps: 3,
        seed: 31,
        unstable_fraction: 0.3,
        attacks: None,
    };
    let ds = gen_dataset(&cfg, &GenParams::default()).unwrap();
    let mut counts = Vec::new();
    for scale in [0.001, 0.01, 0.05, 0.2, 0.5, 1.0, 2.0, 5.0, 20.0] {
        let mut p = ExtractParams::default();
        p.flat.epsilon_acc *= scale;
        p.flat.epsilon_gyr *= scale;
        counts.push(detection_stats(&ds.traces, &p).unwrap().detected);
    }
    let eps_ok = counts.windows(2).all(|w| w[1] >= w[0]);

    let mut theta_violations = 0;
    for _ in 0..300 {
        let k = 6;
        let (a, b) = (random_multi(&mut rng, k, 20), random_multi(&mut rng, k, 25));
        let w = WeightVector::uniform(k).unwrap();
        let template = PickUpSignal::new(a, 0.0, 1000.0).unwrap();
        let cand = PickUpSignal::new(b, 0.0, 1000.0).unwrap();
        let mut last = false;
        for i in 1..=60 {
            let theta = i as f64 * 0.05;
            let p = Profile::new("u", template.clone(), w.clone(), theta).unwrap();
            let d = authenticate(&p, &cand).unwrap();
            if (last && !d.accepted) || d.accepted != (d.distance <= theta) {
                theta_violations += 1;
            }
            last = d.accepted;
        }
    }
    (
        sweep_violations == 0 && eps_ok && theta_violations == 0,
        format!(
            "sweep violations {sweep_violations}, detections by epsilon {counts:?}, theta violations {theta_violations}"
        ),
    )
}

fn criterion_4() -> Verdict {
    let params = GenParams::default();
    let extract = ExtractParams::default();
    let window_ms = extract.flat.window as f64 * 1000.0 / params.rate_hz;
    let stable = gen_dataset(
        &DatasetConfig {
            users: 5,
            contexts: 10,
            reps: 10,
            seed: 404,
            unstable_fraction: 0.0,
            attacks: None,
        },
        &params,
    )
    .unwrap();
    assert_eq!(stable.traces.len(), EXTRACTION_TRACES);
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for (e, t) in stable.entries.iter().zip(&stable.traces) {
        let signals = extract_pickups(t, &extract).unwrap();
        if let [s] = signals.as_slice() {
            let err = (s.t_begin - e.t_begin).abs();
            worst = worst.max(err);
            if err <= window_ms {
                within += 1;
            }
        }
    }
    let walking = gen_dataset(
        &DatasetConfig {
            users: 5,
            contexts: 4,
            reps: 5,
            seed: 405,
            unstable_fraction: 1.0,
            attacks: None,
        },
        &params,
    )
    .unwrap();
    let spurious: usize = walking
        .traces
        .iter()
        .map(|t| extract_pickups(t, &extract).unwrap().len())
        .sum();
    let rate = within as f64 / EXTRACTION_TRACES as f64;
    (
        rate >= 0.99 && spurious == 0,
        format!(
            "{within}/{EXTRACTION_TRACES} within {window_ms} ms (worst {worst:.1} ms); {spurious} signals from {} walking traces",
            walking.traces.len()
        ),
    )
}

fn benchmark_sweep(dir: &Path) -> (SweepSummary, Duration) {
    let start = Instant::now();
    let config = Config::default();
    let manifest = cmd_gen(&config, &dir.join("data")).unwrap();
    let flags = SweepFlags {
        ablation: true,
        ..SweepFlags::default()
    };
    let summary = cmd_sweep(&config, &manifest, &dir.join("report"), flags).unwrap();
    (summary, start.elapsed())
}

fn criterion_5(summary: &SweepSummary, elapsed: Duration) -> Verdict {
    let op = summary.chosen;
    let separated = summary.separated_users();
    let users = summary.separation.len();
    (
        users == 24 && op.accuracy >= 0.95 && separated >= 23 && elapsed < Duration::from_secs(300),
        format!(
            "accuracy {:.5} at theta {:.4} (far {:.5}, frr {:.5}); {separated}/{users} users intra < inter; {} signals; {:.1} s",
            op.accuracy,
            op.theta,
            op.far,
            op.frr,
            summary.detection.detected,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6(dir: &Path) -> Verdict {
    let mut config = Config::default();
    for (k, v) in [
        ("users", "6"),
        ("contexts", "1"),
        ("reps", "10"),
        ("seed", "606"),
        ("attack_victims", "6"),
        ("attack_attackers", "6"),
        ("attack_reps", "5"),
    ] {
        config.set(k, v).unwrap();
    }
    let manifest = cmd_gen(&config, &dir.join("attack-data")).unwrap();
    let flags = SweepFlags {
        attacks: true,
        ..SweepFlags::default()
    };
    let summary = cmd_sweep(&config, &manifest, &dir.join("attack-report"), flags).unwrap();
    let a = summary.attacks.unwrap();
    let far = |k| &a.per_attack[&k].far;
    let (ra, caa, ea) = (far(ScenarioKind::Ra), far(ScenarioKind::Caa), far(ScenarioKind::Ea));
    let violations = (0..a.thresholds.len())
        .filter(|&i| !(ea[i] >= caa[i] && caa[i] >= ra[i]))
        .count();
    let zero = a.zero_far_all();
    let zero_ok = zero.is_some_and(|(_, frr)| frr < 0.35);
    (
        violations == 0 && zero_ok,
        format!(
            "{violations} ordering violations over {} thresholds; all-tier zero FAR {}",
            a.thresholds.len(),
            zero.map(|(t, frr)| format!("up to theta {t:.4} at frr {frr:.4}"))
                .unwrap_or_else(|| "never reached".into())
        ),
    )
}

fn criterion_7(summary: &SweepSummary) -> Verdict {
    let acc = |k: &str| summary.ablation[k].accuracy;
    let (both, a, g) = (acc("acc+gyr"), acc("acc"), acc("gyr"));
    let params = GenParams::default();
    (
        params.separability_gyr < params.separability_acc && both >= a && a >= g,
        format!("accuracy acc+gyr {both:.5} >= acc {a:.5} >= gyr {g:.5}"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn criterion_8() -> Verdict {
    let params = GenParams::default();
    let extract = ExtractParams::default();
    let scenario = GenScenario {
        kind: ScenarioKind::Genuine,
        context: Context::from_index(0),
        stable_prefix: true,
    };
    let pickup = |m: &datagen::UserMotionModel, seed: u64| {
        let (t, _) = gen_pickup_trace(m, scenario, seed, &params).unwrap();
        extract_pickups(&t, &extract).unwrap().remove(0)
    };
    let mut improved = 0;
    let mut ratios = Vec::new();
    for trial in 0..DRIFT_TRIALS {
        let user = make_user(8000 + trial, &params);
        let enrollment: Vec<PickUpSignal64> = (0..10).map(|s| pickup(&user, s)).collect();
        let w = WeightVector::default_imu(&imu_channel_ids()).unwrap();
        let profile = enroll("u", &enrollment, w, 1e-3).unwrap();
        let drifted = user.drifted(30.0, trial);
        let candidate = pickup(&drifted, 100);
        let decision = authenticate(&profile, &candidate).unwrap();
        let (updated, access) =
            post_authenticate(&profile, &candidate, &decision, Some(ExplicitAuthOutcome { passed: true })).unwrap();
        if !access || updated.update_count != 1 {
            continue;
        }
        let fresh: Vec<PickUpSignal64> = (200..221).map(|s| pickup(&drifted, s)).collect();
        let score = |p: &Profile64| median(fresh.iter().map(|f| authenticate(p, f).unwrap().distance).collect());
        let (pre, post) = (score(&profile), score(&updated));
        ratios.push(post / pre);
        if post < pre {
            improved += 1;
        }
    }
    (
        improved == DRIFT_TRIALS,
        format!(
            "{improved}/{DRIFT_TRIALS} trials with lower median distance after update; median post/pre ratio {:.3}",
            median(ratios)
        ),
    )
}

fn criterion_9() -> Verdict {
    let r = unlock_reduction(0.356, 0.076).unwrap();
    let rounded = (r * 1000.0).round() / 1000.0;
    (rounded == 0.329, format!("unlock_reduction(0.356, 0.076) = {r:.6}"))
}

fn criterion_10() -> Verdict {
    let rows = cmd_bench(&Config::default(), &[200], 1000, 1).unwrap();
    let r = &rows[0];
    (
        r.p99_ms <= 5.0,
        format!("N = M = {}, k = {}: median {:.3} ms, p99 {:.3} ms", r.n, r.k, r.median_ms, r.p99_ms),
    )
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let (ok, detail) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        (false, format!("panicked: {msg}"))
    });
    println!("criterion {n:>2} [{name}]: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    ok
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut results = vec![
        run(1, "dtw oracle equivalence", criterion_1),
        run(2, "algebraic invariants", criterion_2),
        run(3, "monotonicity", criterion_3),
        run(4, "extraction round trip", criterion_4),
    ];
    let bench = catch_unwind(AssertUnwindSafe(|| benchmark_sweep(dir.path())));
    match &bench {
        Ok((summary, elapsed)) => {
            results.push(run(5, "synthetic benchmark", || criterion_5(summary, *elapsed)));
        }
        Err(_) => results.push(run(5, "synthetic benchmark", || (false, "benchmark sweep panicked".into()))),
    }
    results.push(run(6, "attack ordering", || criterion_6(dir.path())));
    match &bench {
        Ok((summary, _)) => results.push(run(7, "ablation ordering", || criterion_7(summary))),
        Err(_) => results.push(run(7, "ablation ordering", || (false, "benchmark sweep panicked".into()))),
    }
    results.push(run(8, "updating efficacy", criterion_8));
    results.push(run(9, "unlock reduction", criterion_9));
    results.push(run(10, "latency", criterion_10));
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
