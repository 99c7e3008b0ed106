//! The subcommands as library functions. Each returns data; `main` does
//! the printing and exit-code mapping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pickup_auth::datagen::{gen_dataset, read_manifest, ManifestEntry, ScenarioKind};
use pickup_auth::evaluation::{
    attack_eval, attack_tsv, choose_threshold, curve_tsv, group_by_user, linear_grid, percentile, subset_ablation,
    sweep, unlock_reduction, weight_search, AttackReport, AttackSample, EvalReport, OperatingPoint, ThresholdPolicy,
    TrialEngine, UserSeparation, UserSignals,
};
use pickup_auth::profile::{
    authenticate_with, enroll_with, modify_profile, post_authenticate_with, write_profile,
};
use pickup_auth::signal::extract_with_count;
use pickup_auth::trace_io::read_trace_file;
use pickup_auth::{
    imu_channel_ids, DetectionStats, Error, ExplicitAuthOutcome, MultiSeries, PickUpSignal64, Profile64, Result,
    Series, SensorTrace64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Config, MAG_SENSOR};

pub fn cmd_gen(config: &Config, out_dir: &Path) -> Result<PathBuf> {
    config.validate()?;
    let ds = gen_dataset(&config.dataset_config(), &config.generator)?;
    ds.write_to(out_dir)
}

fn load_trace(path: &Path) -> Result<SensorTrace64> {
    read_trace_file(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrollSummary {
    pub samples: usize,
    pub triggers: usize,
    pub template_len: usize,
}

pub fn cmd_enroll(config: &Config, traces: &[PathBuf], user_id: &str, profile_path: &Path) -> Result<EnrollSummary> {
    config.validate()?;
    let mut signals = Vec::new();
    let mut triggers = 0;
    for path in traces {
        let ex = extract_with_count(&load_trace(path)?, &config.extract)?;
        triggers += ex.triggers;
        signals.extend(ex.signals);
    }
    let first = signals.first().ok_or_else(|| {
        Error::invalid(format!(
            "no pick-up signal found in {} trace(s) ({triggers} trigger(s), none with a stable prefix and admissible duration)",
            traces.len()
        ))
    })?;
    let weights = config.weights(first.channel_ids())?;
    let profile = enroll_with(&config.dtw(), user_id, &signals, weights, config.theta)?;
    write_profile(profile_path, &profile)?;
    Ok(EnrollSummary {
        samples: signals.len(),
        triggers,
        template_len: profile.template.signal.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthOutcome {
    pub distance: f64,
    pub theta: f64,
    pub accepted: bool,
    pub access: bool,
    pub updated: bool,
}

impl AuthOutcome {
    pub fn line(&self) -> String {
        format!(
            "distance={} theta={} decision={} access={}",
            self.distance,
            self.theta,
            if self.accepted { "accept" } else { "reject" },
            if self.access { "yes" } else { "no" }
        )
    }

    /// 0 when access is granted, 2 when denied.
    pub fn exit_code(&self) -> i32 {
        if self.access {
            0
        } else {
            2
        }
    }
}

/// Authenticates the most recent pick-up in `trace` against the stored
/// profile and persists an update when the explicit check passes after a
/// rejection.
pub fn cmd_auth(config: &Config, profile_path: &Path, trace: &Path, explicit: Option<bool>) -> Result<AuthOutcome> {
    config.validate()?;
    let ex = extract_with_count(&load_trace(trace)?, &config.extract)?;
    let candidate = ex.signals.into_iter().last().ok_or_else(|| {
        Error::invalid(format!(
            "no pick-up signal found in {} ({} trigger(s))",
            trace.display(),
            ex.triggers
        ))
    })?;
    let dtw = config.dtw();
    modify_profile(profile_path, |profile: Profile64| {
        let decision = authenticate_with(&dtw, &profile, &candidate)?;
        let outcome = explicit.map(|passed| ExplicitAuthOutcome { passed });
        let (next, access) =
            post_authenticate_with(&dtw, config.update_rule, &profile, &candidate, &decision, outcome)?;
        let updated = next.update_count != profile.update_count;
        let result = AuthOutcome {
            distance: decision.distance,
            theta: decision.theta,
            accepted: decision.accepted,
            access,
            updated,
        };
        Ok((updated.then_some(next), result))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepFlags {
    pub attacks: bool,
    pub ablation: bool,
    pub weights: bool,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub detection: DetectionStats,
    pub report: EvalReport<f64>,
    pub chosen: OperatingPoint<f64>,
    pub separation: Vec<UserSeparation<f64>>,
    pub attacks: Option<AttackReport<f64>>,
    pub ablation: BTreeMap<String, OperatingPoint<f64>>,
    pub best_acc_share: Option<f64>,
    pub files: Vec<PathBuf>,
    pub text: String,
}

impl SweepSummary {
    /// Users whose mean distance to their own template is below the mean
    /// distance of other users' signals to it.
    pub fn separated_users(&self) -> usize {
        self.separation.iter().filter(|s| s.intra_mean < s.inter_mean).count()
    }
}

struct Loaded {
    entry: ManifestEntry,
    signals: Vec<PickUpSignal64>,
    triggers: usize,
}

fn load_manifest(manifest: &Path, config: &Config) -> Result<Vec<Loaded>> {
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let entries = read_manifest(manifest)?;
    entries
        .into_par_iter()
        .map(|entry| {
            let trace = load_trace(&dir.join(&entry.filename))?;
            let ex = extract_with_count(&trace, &config.extract)?;
            let signals = ex
                .signals
                .into_iter()
                .map(|s| s.with_user(entry.user_id.clone()).with_context(entry.context.to_string()))
                .collect();
            Ok(Loaded {
                entry,
                signals,
                triggers: ex.triggers,
            })
        })
        .collect()
}

fn grid_for(config: &Config, distances: &[f64]) -> Vec<f64> {
    let top = if config.grid_max > 0.0 {
        config.grid_max
    } else {
        percentile(distances, 0.99).unwrap_or(1.0)
    };
    linear_grid(top, config.grid_points)
}

fn write_file(dir: &Path, name: &str, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

/// Extraction, trials, threshold sweep, and the optional attack, ablation
/// and weight analyses over the traces listed in `manifest`. Tables and a
/// summary are written into `out_dir`.
pub fn cmd_sweep(config: &Config, manifest: &Path, out_dir: &Path, flags: SweepFlags) -> Result<SweepSummary> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = flags.jobs {
        if j == 0 {
            return Err(Error::invalid("--jobs must be at least 1"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| sweep_inner(config, manifest, out_dir, flags))
}

fn sweep_inner(config: &Config, manifest: &Path, out_dir: &Path, flags: SweepFlags) -> Result<SweepSummary> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let loaded = load_manifest(manifest, config)?;
    let dtw = config.dtw();
    let mut files = Vec::new();

    let genuine: Vec<&Loaded> = loaded.iter().filter(|l| l.entry.kind == ScenarioKind::Genuine).collect();
    let detection = DetectionStats::from_counts(
        genuine.iter().map(|l| l.signals.len()).sum(),
        genuine.iter().map(|l| l.triggers).sum(),
    );
    let users = group_by_user(genuine.iter().flat_map(|l| l.signals.iter().cloned()).collect())?;
    let mut engine = TrialEngine::new(&users, dtw)?;
    let ids = engine.channel_ids().to_vec();
    let weights = config.weights(&ids)?;
    let trials = engine.trials(&weights, "all")?;
    let all: Vec<f64> = trials.distances.iter().map(|d| d.distance).collect();
    let grid = grid_for(config, &all);
    let mut report = sweep(&trials.distances, &grid)?;
    report.chosen_theta = choose_threshold(&report, config.policy);
    let chosen = report.chosen();
    write_file(out_dir, "curve.tsv", &curve_tsv(&report), &mut files)?;

    let mut sep = String::from("user\tintra_mean\tinter_mean\n");
    for s in &trials.separation {
        let _ = writeln!(sep, "{}\t{}\t{}", s.user_id, s.intra_mean, s.inter_mean);
    }
    write_file(out_dir, "separation.tsv", &sep, &mut files)?;

    let mut ablation = BTreeMap::new();
    if flags.ablation {
        let mut labels = vec!["acc", "gyr", "acc+gyr"];
        if ids.iter().any(|id| id.sensor() == MAG_SENSOR) {
            labels.extend(["mag", "acc+gyr+mag"]);
        }
        let shares = config.shares();
        let results = subset_ablation(&mut engine, &labels, &shares, None)?;
        let mut t = String::from("subset\ttheta\tfar\tfrr\taccuracy\n");
        for label in &labels {
            let op = results[*label].0;
            let _ = writeln!(t, "{label}\t{}\t{}\t{}\t{}", op.theta, op.far, op.frr, op.accuracy);
            ablation.insert(label.to_string(), op);
        }
        write_file(out_dir, "ablation.tsv", &t, &mut files)?;
    }

    let mut best_acc_share = None;
    if flags.weights {
        let ws = weight_search(&mut engine, config.weight_step)?;
        let mut t = String::from("acc_share\taccuracy\n");
        for (share, acc) in &ws.surface {
            let _ = writeln!(t, "{share}\t{acc}");
        }
        write_file(out_dir, "weights.tsv", &t, &mut files)?;
        best_acc_share = Some(ws.best_acc_share);
    }

    let attacks = if flags.attacks {
        let r = attack_analysis(config, &loaded, &genuine)?;
        write_file(out_dir, "attacks.tsv", &attack_tsv(&r), &mut files)?;
        Some(r)
    } else {
        None
    };

    let mut summary = SweepSummary {
        detection,
        chosen,
        separation: trials.separation,
        report,
        attacks,
        ablation,
        best_acc_share,
        files,
        text: String::new(),
    };
    summary.text = summary_text(&summary, users.len(), trials.distances.len());
    let text = summary.text.clone();
    write_file(out_dir, "summary.txt", &text, &mut summary.files)?;
    Ok(summary)
}

/// Victims enroll from their genuine signals in the contexts the attacks
/// on them were staged in (all their genuine signals when none match).
fn attack_analysis(config: &Config, loaded: &[Loaded], genuine: &[&Loaded]) -> Result<AttackReport<f64>> {
    let attempts: Vec<&Loaded> = loaded.iter().filter(|l| l.entry.kind.is_attack()).collect();
    if attempts.is_empty() {
        return Err(Error::invalid("--attacks given but the manifest lists no attack traces"));
    }
    let victims: BTreeSet<&str> = attempts.iter().map(|l| l.entry.user_id.as_str()).collect();
    let mut groups = Vec::new();
    for v in &victims {
        let staged: BTreeSet<String> = attempts
            .iter()
            .filter(|l| l.entry.user_id == *v && l.entry.kind != ScenarioKind::Ra)
            .map(|l| l.entry.context.to_string())
            .collect();
        let own: Vec<&PickUpSignal64> = genuine
            .iter()
            .filter(|l| l.entry.user_id == *v)
            .flat_map(|l| &l.signals)
            .collect();
        let in_context: Vec<PickUpSignal64> = own
            .iter()
            .filter(|s| s.context.as_ref().is_some_and(|c| staged.contains(c)))
            .map(|s| (*s).clone())
            .collect();
        let signals = if in_context.is_empty() {
            own.into_iter().cloned().collect()
        } else {
            in_context
        };
        if signals.is_empty() {
            return Err(Error::invalid(format!("attack victim {v} has no genuine signals to enroll")));
        }
        groups.push(UserSignals {
            user_id: v.to_string(),
            signals,
        });
    }
    let dtw = config.dtw();
    let mut engine = TrialEngine::new(&groups, dtw)?;
    let weights = config.weights(engine.channel_ids())?;
    let genuine_d = engine.trials(&weights, "all")?.genuine_distances();
    let profiles: Vec<Profile64> = groups
        .iter()
        .map(|g| enroll_with(&dtw, &g.user_id, &g.signals, weights.clone(), config.theta))
        .collect::<Result<_>>()?;
    let samples: Vec<AttackSample<f64>> = attempts
        .iter()
        .flat_map(|l| {
            l.signals.iter().map(|s| AttackSample {
                signal: s.clone(),
                target: l.entry.user_id.clone(),
                kind: l.entry.kind,
            })
        })
        .collect();
    // score once to size the grid, then sweep
    let probe = attack_eval(&profiles, &samples, &genuine_d, &[config.theta], &dtw)?;
    let mut all = genuine_d.clone();
    all.extend(probe.distances.iter().map(|d| d.distance));
    let grid = grid_for(config, &all);
    attack_eval(&profiles, &samples, &genuine_d, &grid, &dtw)
}

fn summary_text(s: &SweepSummary, users: usize, trials: usize) -> String {
    let mut t = String::new();
    let d = &s.detection;
    let _ = writeln!(t, "users: {users}");
    let _ = writeln!(t, "trials: {trials}");
    let _ = writeln!(t, "detected: {} of {} triggers", d.detected, d.triggers);
    let _ = writeln!(t, "chosen theta: {}", s.chosen.theta);
    let _ = writeln!(t, "far: {}", s.chosen.far);
    let _ = writeln!(t, "frr: {}", s.chosen.frr);
    let _ = writeln!(t, "accuracy: {}", s.chosen.accuracy);
    let _ = writeln!(t, "separated users: {} of {}", s.separated_users(), s.separation.len());
    if !d.undefined {
        if let Ok(r) = unlock_reduction(d.ratio, s.chosen.frr) {
            let _ = writeln!(t, "unlock reduction: {r}");
        }
    }
    for (label, op) in &s.ablation {
        let _ = writeln!(
            t,
            "subset {label}: theta {} far {} frr {} accuracy {}",
            op.theta, op.far, op.frr, op.accuracy
        );
    }
    if let Some(share) = s.best_acc_share {
        let _ = writeln!(t, "best accelerometer share: {share}");
    }
    if let Some(a) = &s.attacks {
        for (kind, c) in &a.per_attack {
            match (c.max_zero_far_theta, c.frr_at_zero_far) {
                (Some(th), Some(frr)) => {
                    let _ = writeln!(t, "attack {kind}: far zero up to theta {th} (frr {frr})");
                }
                _ => {
                    let _ = writeln!(t, "attack {kind}: far never zero on the grid");
                }
            }
        }
        if let Some((th, frr)) = a.zero_far_all() {
            let _ = writeln!(t, "all attacks rejected up to theta {th} (frr {frr})");
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub k: usize,
    pub reps: usize,
    pub median_ms: f64,
    pub p99_ms: f64,
}

fn bench_signal(n: usize, rng: &mut ChaCha8Rng) -> PickUpSignal64 {
    let channels = (0..6)
        .map(|_| {
            let f = rng.random_range(0.5..3.0);
            let p = rng.random_range(0.0..std::f64::consts::TAU);
            let a = rng.random_range(0.5..2.0);
            let v: Vec<f64> = (0..n)
                .map(|i| a * (f * i as f64 / n as f64 * std::f64::consts::TAU + p).sin() + rng.random_range(-0.05..0.05))
                .collect();
            Series::new(v)
        })
        .collect::<Result<Vec<_>>>()
        .expect("finite values");
    let signal = MultiSeries::new(imu_channel_ids(), channels).expect("six channels");
    PickUpSignal64::new(signal, 0.0, (n.max(2) - 1) as f64 * 20.0).expect("non-empty window")
}

/// Wall-clock latency of single authentications (weighted six-channel
/// DTW), per length, after one warm-up call.
pub fn cmd_bench(config: &Config, lengths: &[usize], reps: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if reps == 0 {
        return Err(Error::invalid("bench needs --reps of at least 1"));
    }
    if lengths.is_empty() || lengths.contains(&0) {
        return Err(Error::invalid("bench lengths must be positive"));
    }
    let dtw = config.dtw();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &n in lengths {
        let template = bench_signal(n, &mut rng);
        let candidate = bench_signal(n, &mut rng);
        let weights = config.weights(template.channel_ids())?;
        let profile = Profile64::new("bench", template, weights, config.theta)?;
        authenticate_with(&dtw, &profile, &candidate)?;
        let mut times: Vec<f64> = (0..reps)
            .map(|_| {
                let start = Instant::now();
                let d = authenticate_with(&dtw, &profile, &candidate);
                let ms = start.elapsed().as_secs_f64() * 1000.0;
                std::hint::black_box(d).map(|_| ms)
            })
            .collect::<Result<_>>()?;
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        rows.push(BenchRow {
            n,
            k: 6,
            reps,
            median_ms: percentile(&times, 0.5).expect("reps > 0"),
            p99_ms: percentile(&times, 0.99).expect("reps > 0"),
        });
    }
    Ok(rows)
}

pub fn bench_tsv(rows: &[BenchRow]) -> String {
    let mut t = String::from("n\tk\treps\tmedian_ms\tp99_ms\n");
    for r in rows {
        let _ = writeln!(t, "{}\t{}\t{}\t{:.4}\t{:.4}", r.n, r.k, r.reps, r.median_ms, r.p99_ms);
    }
    t
}

/// Parses a curve table written by `sweep`.
pub fn parse_curve(text: &str) -> Result<EvalReport<f64>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "theta\tfar\tfrr\taccuracy" => {}
        _ => return Err(Error::parse(1, "expected header theta\\tfar\\tfrr\\taccuracy")),
    }
    let mut r = EvalReport {
        thresholds: Vec::new(),
        far: Vec::new(),
        frr: Vec::new(),
        accuracy: Vec::new(),
        chosen_theta: 0.0,
        per_attack: BTreeMap::new(),
        per_subset: BTreeMap::new(),
    };
    for (i, line) in lines {
        let fields: Vec<f64> = line
            .split('\t')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(i + 1, format!("bad number in {line:?}")))?;
        let [theta, far, frr, acc] = fields[..] else {
            return Err(Error::parse(i + 1, "expected 4 columns"));
        };
        if r.thresholds.last().is_some_and(|&t| theta <= t) {
            return Err(Error::parse(i + 1, "thresholds must be strictly ascending"));
        }
        r.thresholds.push(theta);
        r.far.push(far);
        r.frr.push(frr);
        r.accuracy.push(acc);
    }
    if r.thresholds.is_empty() {
        return Err(Error::invalid("curve has no rows"));
    }
    Ok(r)
}

/// Re-reads a curve, picks the operating point under `policy`, and
/// optionally converts a detection ratio into the share of unlocks that no
/// longer need explicit authentication.
pub fn cmd_report(curve: &Path, policy: ThresholdPolicy, detection_ratio: Option<f64>) -> Result<String> {
    let text = fs::read_to_string(curve).map_err(|e| Error::io(curve, e))?;
    let mut report = parse_curve(&text).map_err(|e| e.with_path(curve))?;
    report.chosen_theta = choose_threshold(&report, policy);
    let op = report.chosen();
    let mut t = String::new();
    let _ = writeln!(t, "theta: {}", op.theta);
    let _ = writeln!(t, "far: {}", op.far);
    let _ = writeln!(t, "frr: {}", op.frr);
    let _ = writeln!(t, "accuracy: {}", op.accuracy);
    if let Some(d) = detection_ratio {
        let _ = writeln!(t, "unlock reduction: {}", unlock_reduction(d, op.frr)?);
    }
    Ok(t)
}
