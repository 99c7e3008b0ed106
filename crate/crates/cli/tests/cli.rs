use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pickup_auth::datagen::{gen_pickup_trace, make_user, read_manifest, Context, GenParams, GenScenario, ScenarioKind};
use pickup_auth::profile::read_profile;
use pickup_auth::trace_io::write_trace_file;
use pickup_auth::*;
use pickup_auth_cli::*;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pickup-auth")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small(dir: &Path, users: usize, contexts: usize, reps: usize) -> PathBuf {
    let out = bin(&[
        "gen",
        "--out",
        s(dir),
        "--users",
        &users.to_string(),
        "--contexts",
        &contexts.to_string(),
        "--reps",
        &reps.to_string(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("manifest.tsv")
}

#[test]
fn gen_writes_requested_files_deterministically() {
    let t = tempfile::tempdir().unwrap();
    let m = small(&t.path().join("a"), 2, 1, 1);
    let entries = read_manifest(&m).unwrap();
    assert_eq!(entries.len(), 2);
    let traces = fs::read_dir(t.path().join("a")).unwrap().filter(|e| {
        e.as_ref().unwrap().path().extension().is_some_and(|x| x == "trace")
    });
    assert_eq!(traces.count(), 2);
    let m2 = small(&t.path().join("b"), 2, 1, 1);
    assert_eq!(fs::read_to_string(&m).unwrap(), fs::read_to_string(&m2).unwrap());
    for e in &entries {
        assert_eq!(
            fs::read(t.path().join("a").join(&e.filename)).unwrap(),
            fs::read(t.path().join("b").join(&e.filename)).unwrap()
        );
    }
}

#[test]
fn enroll_then_auth_workflow() {
    let t = tempfile::tempdir().unwrap();
    let m = small(&t.path().join("d"), 2, 1, 5);
    let dir = m.parent().unwrap();
    let own: Vec<PathBuf> = (0..5).map(|r| dir.join(format!("u00_p1-sit_r{r:02}.trace"))).collect();
    let profile = t.path().join("u00.profile");
    let mut args = vec!["enroll", "--user", "u00", "--profile", s(&profile)];
    args.extend(own.iter().map(|p| s(p)));
    let out = bin(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stored: Profile64 = read_profile(&profile).unwrap();
    assert_eq!(stored.update_count, 0);

    // same template as a direct library enrollment
    let signals: Vec<PickUpSignal64> = own
        .iter()
        .flat_map(|p| extract_pickups(&trace_io::read_trace_file(p).unwrap(), &ExtractParams::default()).unwrap())
        .collect();
    let direct = enroll("u00", &signals, WeightVector::default_imu(&imu_channel_ids()).unwrap(), 0.15).unwrap();
    assert_eq!(stored.template.signal, direct.template.signal);

    // a candidate equal to an enrollment trace is accepted
    let template_trace = own
        .iter()
        .find(|p| {
            let sig = extract_pickups(&trace_io::read_trace_file(p).unwrap(), &ExtractParams::default()).unwrap();
            sig[0].signal == stored.template.signal
        })
        .unwrap();
    let out = bin(&["auth", "--profile", s(&profile), "--trace", s(template_trace)]);
    assert_eq!(out.status.code(), Some(0));
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.starts_with("distance=0 theta=0.15 decision=accept access=yes"), "{line}");

    // impostor with a failed explicit check: denied, profile untouched
    let before = fs::read_to_string(&profile).unwrap();
    let impostor = dir.join("u01_p1-sit_r00.trace");
    let out = bin(&["auth", "--profile", s(&profile), "--trace", s(&impostor), "--explicit-fail"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stdout).unwrap().contains("decision=reject access=no"));
    assert_eq!(fs::read_to_string(&profile).unwrap(), before);

    // no explicit outcome at all behaves like a failure
    let out = bin(&["auth", "--profile", s(&profile), "--trace", s(&impostor)]);
    assert_eq!(out.status.code(), Some(2));

    // both flags at once is a usage error
    let out = bin(&["auth", "--profile", s(&profile), "--trace", s(&impostor), "--explicit-pass", "--explicit-fail"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn explicit_pass_updates_a_drifted_profile() {
    let t = tempfile::tempdir().unwrap();
    let params = GenParams::default();
    let model = make_user(21, &params);
    let scenario = GenScenario {
        kind: ScenarioKind::Genuine,
        context: Context::from_index(0),
        stable_prefix: true,
    };
    let mut paths = Vec::new();
    for seed in 0..3 {
        let (trace, _) = gen_pickup_trace(&model, scenario, seed, &params).unwrap();
        let p = t.path().join(format!("e{seed}.trace"));
        write_trace_file(&p, &trace).unwrap();
        paths.push(p);
    }
    let (drifted, _) = gen_pickup_trace(&model.drifted(90.0, 4), scenario, 50, &params).unwrap();
    let drifted_path = t.path().join("drifted.trace");
    write_trace_file(&drifted_path, &drifted).unwrap();

    let profile = t.path().join("p.profile");
    let config = Config {
        theta: 1e-3,
        ..Config::default()
    };
    cmd_enroll(&config, &paths, "u", &profile).unwrap();
    let outcome = cmd_auth(&config, &profile, &drifted_path, Some(true)).unwrap();
    assert!(!outcome.accepted && outcome.access && outcome.updated);
    assert_eq!(outcome.exit_code(), 0);
    let stored: Profile64 = read_profile(&profile).unwrap();
    assert_eq!(stored.update_count, 1);
    let again = cmd_auth(&config, &profile, &drifted_path, None).unwrap();
    assert!(again.distance < outcome.distance);
}

#[test]
fn enroll_without_stable_prefix_fails() {
    let t = tempfile::tempdir().unwrap();
    let params = GenParams::default();
    let (trace, _) = gen_pickup_trace(
        &make_user(1, &params),
        GenScenario {
            kind: ScenarioKind::Genuine,
            context: Context::from_index(0),
            stable_prefix: false,
        },
        1,
        &params,
    )
    .unwrap();
    let p = t.path().join("walk.trace");
    write_trace_file(&p, &trace).unwrap();
    let profile = t.path().join("p.profile");
    let out = bin(&["enroll", "--user", "u", "--profile", s(&profile), s(&p)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no pick-up signal"));
    assert!(!profile.exists());
}

#[test]
fn tiny_sweep_curves_are_monotone() {
    let t = tempfile::tempdir().unwrap();
    let m = small(&t.path().join("d"), 2, 1, 3);
    let out_dir = t.path().join("r");
    let out = bin(&["sweep", "--manifest", s(&m), "--out", s(&out_dir), "--jobs", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = fs::read_to_string(out_dir.join("curve.tsv")).unwrap();
    let rows: Vec<Vec<f64>> = curve
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 200);
    for w in rows.windows(2) {
        assert!(w[1][0] > w[0][0]);
        assert!(w[1][1] >= w[0][1], "far decreased");
        assert!(w[1][2] <= w[0][2], "frr increased");
    }
    assert!(out_dir.join("summary.txt").exists());
    assert!(out_dir.join("separation.tsv").exists());

    let report = bin(&["report", "--curve", s(&out_dir.join("curve.tsv")), "--detection-ratio", "0.5"]);
    assert!(report.status.success());
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("theta: ") && text.contains("unlock reduction: "), "{text}");
}

#[test]
fn sweep_attacks_without_attack_traces_is_an_error() {
    let t = tempfile::tempdir().unwrap();
    let m = small(&t.path().join("d"), 2, 1, 2);
    let out = bin(&["sweep", "--manifest", s(&m), "--out", s(&t.path().join("r")), "--attacks"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_rows_and_usage_errors() {
    let rows = cmd_bench(&Config::default(), &[25, 200], 30, 1).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].median_ms < rows[1].median_ms);
    assert!(rows.iter().all(|r| r.p99_ms >= r.median_ms && r.k == 6));
    assert!(cmd_bench(&Config::default(), &[25], 0, 1).is_err());
    let out = bin(&["bench", "--reps", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reps"));
}

#[test]
fn config_file_and_overrides() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("run.conf");
    fs::write(&cfg, "users = 1\ncontexts = 1\nreps = 2\n").unwrap();
    let out = bin(&["gen", "--config", s(&cfg), "--out", s(&t.path().join("d"))]);
    assert!(out.status.success());
    assert_eq!(read_manifest(t.path().join("d/manifest.tsv")).unwrap().len(), 2);

    fs::write(&cfg, "users = 1\nusres = 2\n").unwrap();
    let out = bin(&["gen", "--config", s(&cfg), "--out", s(&t.path().join("e"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usres"));

    let out = bin(&["--set", "reps=1", "gen", "--users", "1", "--contexts", "2", "--out", s(&t.path().join("f"))]);
    assert!(out.status.success());
    assert_eq!(read_manifest(t.path().join("f/manifest.tsv")).unwrap().len(), 2);
    let out = bin(&["--set", "theta", "bench"]);
    assert_eq!(out.status.code(), Some(1));
}
