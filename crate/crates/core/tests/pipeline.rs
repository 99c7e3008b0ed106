use pickup_auth::datagen::*;
use pickup_auth::evaluation::*;
use pickup_auth::signal::{SensorSample, TraceEvent};
use pickup_auth::trace_io::{parse_trace, read_trace_file, write_trace};
use pickup_auth::*;

fn scenario(stable: bool) -> GenScenario {
    GenScenario {
        kind: ScenarioKind::Genuine,
        context: Context::from_index(0),
        stable_prefix: stable,
    }
}

fn pickup(model: &UserMotionModel, seed: u64, params: &GenParams) -> PickUpSignal64 {
    let (trace, _) = gen_pickup_trace(model, scenario(true), seed, params).unwrap();
    extract_pickups(&trace, &ExtractParams::default()).unwrap().remove(0)
}

/// Appends `b` after `a` with a gap, shifting `b`'s timestamps.
fn concat(a: &SensorTrace64, b: &SensorTrace64) -> SensorTrace64 {
    let shift = a.time_range().unwrap().1 + 20.0 - b.time_range().unwrap().0;
    let mut samples: Vec<SensorSample<f64>> = a.samples().to_vec();
    samples.extend(b.samples().iter().map(|s| SensorSample { t: s.t + shift, ..*s }));
    let mut events: Vec<TraceEvent> = a.events().to_vec();
    events.extend(b.events().iter().map(|e| TraceEvent { t: e.t + shift, ..*e }));
    SensorTrace::new(a.rate_hz(), samples, events).unwrap()
}

#[test]
fn generated_traces_survive_text_round_trip() {
    let params = GenParams::default();
    let model = make_user(5, &params);
    for (seed, stable) in [(1, true), (2, false)] {
        let (trace, _) = gen_pickup_trace(&model, scenario(stable), seed, &params).unwrap();
        let text = write_trace(&trace);
        let back: SensorTrace64 = parse_trace(&text).unwrap();
        assert_eq!(back, trace);
        assert_eq!(write_trace(&back), text);
    }
}

#[test]
fn three_pickups_one_from_walking() {
    let params = GenParams::default();
    let model = make_user(9, &params);
    let (a, ta) = gen_pickup_trace(&model, scenario(true), 1, &params).unwrap();
    let (b, _) = gen_pickup_trace(&model, scenario(false), 2, &params).unwrap();
    let (c, _) = gen_pickup_trace(&model, scenario(true), 3, &params).unwrap();
    let trace = concat(&concat(&a, &b), &c);
    assert_eq!(detect_triggers(&trace).len(), 3);
    let signals = extract_pickups(&trace, &ExtractParams::default()).unwrap();
    assert_eq!(signals.len(), 2);
    assert!((signals[0].t_begin - ta.t_begin).abs() <= 200.0);
    assert_eq!(signals[0].t_end, ta.t_end);
    let stats = detection_stats(&[trace], &ExtractParams::default()).unwrap();
    assert_eq!((stats.detected, stats.triggers), (2, 3));
}

#[test]
fn extracted_signal_has_nominal_rate() {
    let params = GenParams::default();
    let model = make_user(2, &params);
    let s = pickup(&model, 4, &params);
    let expected = (s.duration() * params.rate_hz).round() as usize + 1;
    assert_eq!(s.signal.len(), expected);
    assert_eq!(s.signal.k(), 6);
    assert_eq!(s.channel_ids(), imu_channel_ids().as_slice());
}

#[test]
fn dataset_is_deterministic_and_written_consistently() {
    let cfg = DatasetConfig {
        users: 2,
        contexts: 2,
        reps: 2,
        seed: 42,
        unstable_fraction: 0.5,
        attacks: Some(AttackConfig {
            victims: 1,
            attackers: 1,
            reps: 1,
        }),
    };
    let params = GenParams::default();
    let a = gen_dataset(&cfg, &params).unwrap();
    let b = gen_dataset(&cfg, &params).unwrap();
    assert_eq!(a.entries, b.entries);
    assert_eq!(a.traces, b.traces);
    assert_eq!(a.traces.len(), 2 * 2 * 2 + 3);

    let dir = tempfile::tempdir().unwrap();
    let manifest = a.write_to(dir.path()).unwrap();
    let entries = read_manifest(&manifest).unwrap();
    assert_eq!(entries, a.entries);
    for (e, t) in entries.iter().zip(&a.traces) {
        let back: SensorTrace64 = read_trace_file(dir.path().join(&e.filename)).unwrap();
        assert_eq!(&back, t);
    }
    let other = gen_dataset(&DatasetConfig { seed: 43, ..cfg }, &params).unwrap();
    assert_ne!(other.traces, a.traces);
}

#[test]
fn medoid_ignores_an_outlier() {
    let params = GenParams::default();
    let model = make_user(3, &params);
    let stranger = make_user(300, &params);
    let mut samples: Vec<PickUpSignal64> = (0..4).map(|s| pickup(&model, s, &params)).collect();
    samples.insert(2, pickup(&stranger, 99, &params));
    let ids = imu_channel_ids();
    let w = WeightVector::default_imu(&ids).unwrap();
    let dtw = Dtw::new();
    let mut sums = [0.0; 5];
    for i in 0..5 {
        for j in 0..5 {
            sums[i] += dtw.multi_weighted(&samples[i].signal, &samples[j].signal, &w).unwrap().distance;
        }
    }
    let argmin = (0..5).min_by(|&a, &b| sums[a].partial_cmp(&sums[b]).unwrap()).unwrap();
    assert_ne!(argmin, 2);
    let profile = enroll("u", &samples, w, 1.0).unwrap();
    assert_eq!(profile.template.signal, samples[argmin].signal);
}

#[test]
fn zero_weights_match_channel_selection() {
    let params = GenParams::default();
    let (a, b) = (make_user(1, &params), make_user(2, &params));
    let x = pickup(&a, 1, &params);
    let y = pickup(&b, 2, &params);
    let ids = imu_channel_ids();
    for label in ["acc", "gyr"] {
        let w = subset_weights(label, &ids, &default_shares()).unwrap();
        let full = dtw_multi_weighted(&x.signal, &y.signal, &w).unwrap().distance;
        let kept = subset_channels(label, &ids).unwrap();
        let (xs, ys) = (x.select(&kept).unwrap(), y.select(&kept).unwrap());
        let reduced = dtw_multi_weighted(&xs.signal, &ys.signal, &WeightVector::uniform(3).unwrap()).unwrap();
        assert!((full - reduced.distance).abs() <= 1e-12, "{label}: {full} vs {}", reduced.distance);
    }
}

fn small_population() -> Vec<evaluation::UserSignals<f64>> {
    let cfg = DatasetConfig {
        users: 3,
        contexts: 2,
        reps: 3,
        ..DatasetConfig::default()
    };
    let ds = gen_dataset(&cfg, &GenParams::default()).unwrap();
    let mut signals = Vec::new();
    for (e, t) in ds.entries.iter().zip(&ds.traces) {
        for s in extract_pickups(t, &ExtractParams::default()).unwrap() {
            signals.push(s.with_user(e.user_id.clone()));
        }
    }
    group_by_user(signals).unwrap()
}

#[test]
fn trial_counts_and_direct_scoring() {
    let users = small_population();
    assert_eq!(users.len(), 3);
    let total: usize = users.iter().map(|u| u.signals.len()).sum();
    let ids = imu_channel_ids();
    let w = WeightVector::default_imu(&ids).unwrap();
    let trials = build_trials(&users, &w, Dtw::new()).unwrap();
    let genuine = trials.distances.iter().filter(|d| d.genuine).count();
    let impostor = trials.distances.len() - genuine;
    assert_eq!(genuine, total);
    let expected_impostor: usize = users.iter().map(|u| total - u.signals.len()).sum();
    assert_eq!(impostor, expected_impostor);

    // impostor trials of the first user equal direct authentication
    // against the enrolled profile
    let profile = enroll(&users[0].user_id, &users[0].signals, w.clone(), 1.0).unwrap();
    assert_eq!(profile.template.signal, users[0].signals[trials.templates[0]].signal);
    let direct: Vec<f64> = users[1..]
        .iter()
        .flat_map(|u| &u.signals)
        .map(|s| authenticate(&profile, s).unwrap().distance)
        .collect();
    let first_user_genuine = users[0].signals.len();
    let scored: Vec<f64> = trials.distances[first_user_genuine..first_user_genuine + direct.len()]
        .iter()
        .map(|d| d.distance)
        .collect();
    assert_eq!(scored, direct);
}

#[test]
fn attack_eval_rejects_bad_labels() {
    let users = small_population();
    let ids = imu_channel_ids();
    let w = WeightVector::default_imu(&ids).unwrap();
    let profile = enroll(&users[0].user_id, &users[0].signals, w, 1.0).unwrap();
    let sample = |target: &str, kind| AttackSample {
        signal: users[1].signals[0].clone(),
        target: target.to_string(),
        kind,
    };
    let grid = [0.1, 0.2];
    let dtw = Dtw::new();
    let ok = attack_eval(std::slice::from_ref(&profile), &[sample("u00", ScenarioKind::Ra)], &[0.05], &grid, &dtw).unwrap();
    assert_eq!(ok.per_attack.len(), 1);
    assert!(attack_eval(std::slice::from_ref(&profile), &[sample("u00", ScenarioKind::Genuine)], &[0.05], &grid, &dtw).is_err());
    assert!(attack_eval(std::slice::from_ref(&profile), &[sample("nobody", ScenarioKind::Ea)], &[0.05], &grid, &dtw).is_err());
    assert!(attack_eval(std::slice::from_ref(&profile), &[], &[], &grid, &dtw).is_err());
}

#[test]
fn updating_tracks_drift() {
    let params = GenParams::default();
    let model = make_user(77, &params);
    let enrollment: Vec<PickUpSignal64> = (0..6).map(|s| pickup(&model, s, &params)).collect();
    let ids = imu_channel_ids();
    let profile = enroll("u", &enrollment, WeightVector::default_imu(&ids).unwrap(), 1e-6).unwrap();
    let drifted = model.drifted(60.0, 1);
    let fresh = pickup(&drifted, 500, &params);
    let decision = authenticate(&profile, &fresh).unwrap();
    assert!(!decision.accepted);
    let (updated, access) =
        post_authenticate(&profile, &fresh, &decision, Some(ExplicitAuthOutcome { passed: true })).unwrap();
    assert!(access);
    assert_eq!(updated.update_count, 1);
    assert_eq!(updated.template.signal.len(), profile.template.signal.len());
    let probe = pickup(&drifted, 600, &params);
    let before = authenticate(&profile, &probe).unwrap().distance;
    let after = authenticate(&updated, &probe).unwrap().distance;
    assert!(after < before, "{after} !< {before}");
}
