//! Seeded synthetic pick-up traces with ground truth.
//!
//! Each simulated user has a motion prototype per channel: a sum of
//! half-period sine harmonics over the normalised pick-up time, plus (for
//! the accelerometer) the gravity projection rotating from the resting
//! orientation on the table to the user's holding orientation. Individual
//! samples jitter the amplitudes, the duration, and the time base, and add
//! measurement noise. Contexts (place × posture) add a shared offset, and
//! attacks blend the attacker's and victim's prototypes.
//!
//! Everything is a pure function of the seeds; two runs with the same
//! configuration produce identical traces and manifests.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::signal::{EventKind, SensorSample, SensorTrace, TraceEvent};
use crate::trace_io::write_trace;

const GRAVITY: f64 = 9.81;
/// Harmonics per channel.
pub const HARMONICS: usize = 5;

/// Population-average pick-up shape: rows are acc-x/y/z, gyr-x/y/z, columns
/// harmonics 1..=5.
const BASE_SHAPE: [[f64; HARMONICS]; 6] = [
    [0.3, -0.2, 0.1, 0.0, 0.0],
    [1.2, 0.4, -0.3, 0.1, 0.0],
    [1.5, -0.8, 0.3, 0.1, 0.0],
    [1.8, 0.5, -0.3, 0.1, 0.0],
    [0.3, -0.3, 0.1, 0.0, 0.0],
    [0.4, 0.2, -0.1, 0.0, 0.0],
];

/// Generator knobs. Defaults produce a population that is separable but
/// not trivially so.
#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub rate_hz: f64,
    /// Timestamp jitter, uniform ± this many ms.
    pub jitter_ms: f64,
    pub noise_acc: f64,
    pub noise_gyr: f64,
    /// Inter-user spread of accelerometer harmonics (m/s²).
    pub separability_acc: f64,
    /// Inter-user spread of gyroscope harmonics (rad/s).
    pub separability_gyr: f64,
    /// Inter-user spread of the holding orientation, radians.
    pub separability_orientation: f64,
    /// Relative per-sample amplitude jitter.
    pub intra_sd: f64,
    /// Relative per-sample duration jitter.
    pub duration_sd: f64,
    /// Strength of the per-sample time warp `u + c u (1 - u)`.
    pub warp_sd: f64,
    /// Magnitude of the per-context prototype offset.
    pub context_scale: f64,
    /// Range of the stable prefix length, seconds.
    pub flat_prefix: (f64, f64),
    /// Length of the walking prefix used when there is no stable prefix.
    pub walking_prefix: f64,
    /// Still period after the trigger, seconds.
    pub tail: f64,
    /// How far a context-aware attacker's holding orientation moves toward
    /// the victim's from copying their place and posture.
    pub context_skill: f64,
    /// Attacker/victim blend of the motion itself for educated attacks.
    pub mimic_skill: f64,
    /// Per-day random-walk scale applied by [`UserMotionModel::drifted`].
    pub drift_rate: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            rate_hz: 50.0,
            jitter_ms: 2.0,
            noise_acc: 0.03,
            noise_gyr: 0.005,
            separability_acc: 0.8,
            separability_gyr: 0.4,
            separability_orientation: 0.35,
            intra_sd: 0.08,
            duration_sd: 0.08,
            warp_sd: 0.15,
            context_scale: 0.25,
            flat_prefix: (1.5, 2.5),
            walking_prefix: 5.0,
            tail: 0.2,
            context_skill: 0.5,
            mimic_skill: 0.5,
            drift_rate: 0.05,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.rate_hz, self.noise_acc, self.noise_gyr];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("rate and noise levels must be positive"));
        }
        let non_negative = [
            self.jitter_ms,
            self.separability_acc,
            self.separability_gyr,
            self.separability_orientation,
            self.intra_sd,
            self.duration_sd,
            self.warp_sd,
            self.context_scale,
            self.walking_prefix,
            self.tail,
            self.drift_rate,
        ];
        if non_negative.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("generator spreads must be non-negative"));
        }
        if self.jitter_ms * 2.0 >= 1000.0 / self.rate_hz {
            return Err(Error::invalid("timestamp jitter must stay below half the sample period"));
        }
        if !(0.0..=1.0).contains(&self.mimic_skill) || !(0.0..=1.0).contains(&self.context_skill) {
            return Err(Error::invalid("mimic_skill and context_skill must lie in [0, 1]"));
        }
        if !(self.flat_prefix.0 > 0.0 && self.flat_prefix.0 <= self.flat_prefix.1) {
            return Err(Error::invalid("flat prefix range must be positive and ordered"));
        }
        Ok(())
    }
}

/// A simulated user's pick-up habit.
#[derive(Debug, Clone, PartialEq)]
pub struct UserMotionModel {
    pub seed: u64,
    /// Harmonic amplitudes per channel (acc-x/y/z, gyr-x/y/z).
    pub basis: [[f64; HARMONICS]; 6],
    /// (pitch, roll) lying on the table, radians.
    pub rest_orientation: [f64; 2],
    /// (pitch, roll) once in the hand.
    pub hold_orientation: [f64; 2],
    /// Seconds.
    pub duration_mean: f64,
    pub duration_sd: f64,
    /// Measurement noise (acc, gyr).
    pub noise_sd: [f64; 2],
    pub drift_rate: f64,
    /// Inter-user spread (acc, gyr) the model was drawn with.
    pub separability: [f64; 2],
}

impl UserMotionModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=4.0).contains(&self.duration_mean) {
            return Err(Error::invalid("duration_mean must lie in [0.5, 4] s"));
        }
        if self.noise_sd.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("noise_sd must be positive"));
        }
        Ok(())
    }

    /// The model after `days` of behavioural drift: a random walk on the
    /// harmonic amplitudes and holding orientation.
    pub fn drifted(&self, days: f64, seed: u64) -> Self {
        let mut rng = rng_for(&[self.seed, seed, 0xD81F]);
        let scale = self.drift_rate * days.max(0.0).sqrt();
        let mut out = self.clone();
        for row in out.basis.iter_mut() {
            for a in row.iter_mut() {
                *a += scale * normal(&mut rng);
            }
        }
        for o in out.hold_orientation.iter_mut() {
            *o += 0.3 * scale * normal(&mut rng);
        }
        out
    }

    /// Moves the holding orientation toward `other`'s by `s`.
    pub fn copy_posture(&self, other: &Self, s: f64) -> Self {
        let mut out = self.clone();
        for i in 0..2 {
            out.hold_orientation[i] = (1.0 - s) * self.hold_orientation[i] + s * other.hold_orientation[i];
        }
        out
    }

    /// Convex blend `(1 - s) * self + s * other`.
    pub fn blend(&self, other: &Self, s: f64) -> Self {
        let mix = |a: f64, b: f64| (1.0 - s) * a + s * b;
        let mut out = self.clone();
        for (row, orow) in out.basis.iter_mut().zip(&other.basis) {
            for (a, &b) in row.iter_mut().zip(orow) {
                *a = mix(*a, b);
            }
        }
        for i in 0..2 {
            out.rest_orientation[i] = mix(self.rest_orientation[i], other.rest_orientation[i]);
            out.hold_orientation[i] = mix(self.hold_orientation[i], other.hold_orientation[i]);
        }
        out.duration_mean = mix(self.duration_mean, other.duration_mean);
        out.duration_sd = mix(self.duration_sd, other.duration_sd);
        out
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic stream keyed by a tuple of integers.
fn rng_for(keys: &[u64]) -> ChaCha8Rng {
    let seed = keys.iter().fold(0x5EED_u64, |acc, &k| splitmix(acc ^ splitmix(k)));
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws a user from the population.
pub fn make_user(seed: u64, params: &GenParams) -> UserMotionModel {
    let mut rng = rng_for(&[seed, 0xA11CE]);
    let mut basis = BASE_SHAPE;
    for (c, row) in basis.iter_mut().enumerate() {
        let spread = if c < 3 { params.separability_acc } else { params.separability_gyr };
        for (k, a) in row.iter_mut().enumerate() {
            *a += spread * normal(&mut rng) / ((k + 1) as f64).sqrt();
        }
    }
    let rest_orientation = [0.03 * normal(&mut rng), 0.03 * normal(&mut rng)];
    let hold_orientation = [
        0.9 + params.separability_orientation * normal(&mut rng),
        params.separability_orientation * normal(&mut rng),
    ];
    let duration_mean = rng.random_range(0.9..1.5);
    UserMotionModel {
        seed,
        basis,
        rest_orientation,
        hold_orientation,
        duration_mean,
        duration_sd: params.duration_sd * duration_mean,
        noise_sd: [params.noise_acc, params.noise_gyr],
        drift_rate: params.drift_rate,
        separability: [params.separability_acc, params.separability_gyr],
    }
}

pub const PLACES: usize = 6;
pub const CONTEXTS: usize = PLACES * 2;

/// Place (0..6) and posture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Context {
    pub place: u8,
    pub standing: bool,
}

impl Context {
    pub fn from_index(i: usize) -> Self {
        Self {
            place: (i / 2 % PLACES) as u8,
            standing: i % 2 == 1,
        }
    }

    pub fn index(&self) -> usize {
        self.place as usize * 2 + usize::from(self.standing)
    }

    /// Offset added to harmonic 1 of each channel.
    fn offset(&self, scale: f64) -> [f64; 6] {
        // places: two each to the left, front and right; near then far
        let side = [-1.0, -1.0, 0.0, 0.0, 1.0, 1.0][self.place as usize];
        let reach = if self.place.is_multiple_of(2) { -0.5 } else { 0.5 };
        let lift = if self.standing { 0.8 } else { -0.8 };
        [
            scale * side,
            scale * reach,
            scale * lift,
            scale * 0.5 * reach,
            scale * 0.3 * side,
            scale * 0.6 * side,
        ]
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let posture = if self.standing { "stand" } else { "sit" };
        write!(f, "p{}-{posture}", self.place + 1)
    }
}

impl FromStr for Context {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("bad context label {s:?}"));
        let (place, posture) = s.strip_prefix('p').and_then(|r| r.split_once('-')).ok_or_else(bad)?;
        let place: u8 = place.parse().map_err(|_| bad())?;
        if !(1..=PLACES as u8).contains(&place) {
            return Err(bad());
        }
        let standing = match posture {
            "stand" => true,
            "sit" => false,
            _ => return Err(bad()),
        };
        Ok(Self {
            place: place - 1,
            standing,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    Genuine,
    /// Random attack.
    Ra,
    /// Context-aware attack.
    Caa,
    /// Educated attack.
    Ea,
}

impl ScenarioKind {
    pub const ATTACKS: [ScenarioKind; 3] = [ScenarioKind::Ra, ScenarioKind::Caa, ScenarioKind::Ea];

    pub fn is_attack(&self) -> bool {
        *self != ScenarioKind::Genuine
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Genuine => "genuine",
            ScenarioKind::Ra => "RA",
            ScenarioKind::Caa => "CAA",
            ScenarioKind::Ea => "EA",
        })
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "genuine" => Ok(ScenarioKind::Genuine),
            "RA" => Ok(ScenarioKind::Ra),
            "CAA" => Ok(ScenarioKind::Caa),
            "EA" => Ok(ScenarioKind::Ea),
            other => Err(Error::invalid(format!("unknown scenario kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenScenario {
    pub kind: ScenarioKind,
    pub context: Context,
    pub stable_prefix: bool,
}

/// What the generator knows about a trace it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub t_begin: f64,
    pub t_end: f64,
    pub context: Context,
    pub kind: ScenarioKind,
    pub stable_prefix: bool,
}

fn round_to(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

fn gravity(pitch: f64, roll: f64) -> [f64; 3] {
    [
        GRAVITY * roll.sin(),
        GRAVITY * pitch.sin() * roll.cos(),
        GRAVITY * pitch.cos() * roll.cos(),
    ]
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// One realised pick-up: jittered amplitudes, duration and warp.
struct Realisation {
    basis: [[f64; HARMONICS]; 6],
    rest: [f64; 2],
    hold: [f64; 2],
    duration: f64,
    warp: f64,
}

impl Realisation {
    fn draw(model: &UserMotionModel, context: Context, params: &GenParams, rng: &mut ChaCha8Rng) -> Self {
        let mut basis = model.basis;
        let offset = context.offset(params.context_scale);
        for (c, row) in basis.iter_mut().enumerate() {
            row[0] += offset[c];
            for a in row.iter_mut() {
                *a = *a * (1.0 + params.intra_sd * normal(rng)) + 0.3 * params.intra_sd * normal(rng);
            }
        }
        let duration = (model.duration_mean + model.duration_sd * normal(rng)).clamp(0.6, 3.8);
        let warp = (params.warp_sd * normal(rng)).clamp(-0.6, 0.6);
        let hold = [
            model.hold_orientation[0] + 0.03 * normal(rng),
            model.hold_orientation[1] + 0.03 * normal(rng),
        ];
        Self {
            basis,
            rest: model.rest_orientation,
            hold,
            duration,
            warp,
        }
    }

    /// Noise-free channels at normalised time `u` in [0, 1].
    fn at(&self, u: f64) -> ([f64; 3], [f64; 3]) {
        let w = u + self.warp * u * (1.0 - u);
        let mut ch = [0.0; 6];
        for (c, row) in self.basis.iter().enumerate() {
            ch[c] = row
                .iter()
                .enumerate()
                .map(|(k, a)| a * (PI * (k + 1) as f64 * w).sin())
                .sum();
        }
        let s = smoothstep(w);
        let g = gravity(
            self.rest[0] + (self.hold[0] - self.rest[0]) * s,
            self.rest[1] + (self.hold[1] - self.rest[1]) * s,
        );
        (
            [g[0] + ch[0], g[1] + ch[1], g[2] + ch[2]],
            [ch[3], ch[4], ch[5]],
        )
    }
}

struct TraceBuilder<'a> {
    params: &'a GenParams,
    noise: [f64; 2],
    rng: ChaCha8Rng,
    k: usize,
    samples: Vec<SensorSample<f64>>,
}

impl TraceBuilder<'_> {
    fn next_time(&mut self) -> f64 {
        let period = 1000.0 / self.params.rate_hz;
        let jitter = if self.params.jitter_ms > 0.0 {
            self.rng.random_range(-self.params.jitter_ms..=self.params.jitter_ms)
        } else {
            0.0
        };
        let t = round_to(self.k as f64 * period + jitter, 0.1);
        self.k += 1;
        t
    }

    fn push(&mut self, t: f64, acc: [f64; 3], gyro: [f64; 3]) {
        let [na, ng] = self.noise;
        let an = Normal::new(0.0, na).expect("positive noise");
        let gn = Normal::new(0.0, ng).expect("positive noise");
        let acc = acc.map(|v| round_to(v + an.sample(&mut self.rng), 1e-5));
        let gyro = gyro.map(|v| round_to(v + gn.sample(&mut self.rng), 1e-5));
        self.samples.push(SensorSample::new(t, acc, gyro));
    }
}

/// Simulates one trace: a stable (or walking) prefix, the pick-up motion,
/// a trigger at the end of the motion, and a short still tail.
pub fn gen_pickup_trace(
    model: &UserMotionModel,
    scenario: GenScenario,
    sample_seed: u64,
    params: &GenParams,
) -> Result<(SensorTrace<f64>, GroundTruth)> {
    params.validate()?;
    model.validate()?;
    let mut rng = rng_for(&[model.seed, sample_seed, 0x7ACE]);
    let real = Realisation::draw(model, scenario.context, params, &mut rng);
    let prefix = if scenario.stable_prefix {
        rng.random_range(params.flat_prefix.0..=params.flat_prefix.1)
    } else {
        params.walking_prefix
    };
    let walk_freq = rng.random_range(1.6..2.2);
    let walk_amp = rng.random_range(1.5..2.5);
    let walk_phase = rng.random_range(0.0..(2.0 * PI));
    let mut b = TraceBuilder {
        params,
        noise: model.noise_sd,
        rng: rng_for(&[model.seed, sample_seed, 0x401E]),
        k: 0,
        samples: Vec::new(),
    };

    let rest_acc = gravity(real.rest[0], real.rest[1]);
    let t_begin = loop {
        let t = b.next_time();
        if scenario.stable_prefix {
            b.push(t, rest_acc, [0.0; 3]);
        } else {
            let ph = 2.0 * PI * walk_freq * t / 1000.0 + walk_phase;
            let acc = [
                rest_acc[0] + 0.8 * (0.5 * ph).sin(),
                rest_acc[1] + 0.6 * (ph + 1.0).cos(),
                rest_acc[2] + walk_amp * ph.sin(),
            ];
            let gyro = [0.4 * ph.cos(), 0.5 * (0.5 * ph).sin(), 0.3 * (ph + 0.7).sin()];
            b.push(t, acc, gyro);
        }
        if t >= prefix * 1000.0 {
            break t;
        }
    };
    let duration_ms = real.duration * 1000.0;
    let t_end = loop {
        let t = b.next_time();
        let u = ((t - t_begin) / duration_ms).min(1.0);
        let (acc, gyro) = real.at(u);
        b.push(t, acc, gyro);
        if u >= 1.0 {
            break t;
        }
    };
    let (hold_acc, _) = real.at(1.0);
    let tail_end = t_end + params.tail * 1000.0;
    loop {
        let t = b.next_time();
        if t > tail_end {
            break;
        }
        b.push(t, hold_acc, [0.0; 3]);
    }
    let trace = SensorTrace::new(
        params.rate_hz,
        b.samples,
        vec![TraceEvent {
            t: t_end,
            kind: EventKind::Trigger,
        }],
    )?;
    let truth = GroundTruth {
        t_begin,
        t_end,
        context: scenario.context,
        kind: scenario.kind,
        stable_prefix: scenario.stable_prefix,
    };
    Ok((trace, truth))
}

/// Simulates an impersonation attempt on `victim` in `victim_context`.
///
/// * RA: the attacker's own motion in a random context.
/// * CAA: the attacker's own motion in the victim's context, with the
///   holding orientation moved toward the victim's by `context_skill`.
/// * EA: as CAA, with the rest of the motion also blended toward the
///   victim's by `mimic_skill`.
pub fn gen_attack(
    victim: &UserMotionModel,
    attacker: &UserMotionModel,
    kind: ScenarioKind,
    victim_context: Context,
    sample_seed: u64,
    params: &GenParams,
) -> Result<(SensorTrace<f64>, GroundTruth)> {
    let (model, context) = match kind {
        ScenarioKind::Ra => {
            let mut rng = rng_for(&[attacker.seed, sample_seed, 0xC0E7]);
            (attacker.clone(), Context::from_index(rng.random_range(0..CONTEXTS)))
        }
        ScenarioKind::Caa => (attacker.copy_posture(victim, params.context_skill), victim_context),
        ScenarioKind::Ea => (
            attacker
                .copy_posture(victim, params.context_skill)
                .blend(victim, params.mimic_skill),
            victim_context,
        ),
        ScenarioKind::Genuine => return Err(Error::invalid("gen_attack needs RA, CAA or EA")),
    };
    gen_pickup_trace(
        &model,
        GenScenario {
            kind,
            context,
            stable_prefix: true,
        },
        sample_seed,
        params,
    )
}

/// Attack section of a dataset: every victim is attacked by every other
/// listed attacker with each tier.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    /// Number of victims, taken as the first users of the population.
    pub victims: usize,
    /// Attackers are drawn from users after the victims.
    pub attackers: usize,
    /// Attempts per (victim, attacker, tier).
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub users: usize,
    pub contexts: usize,
    pub reps: usize,
    pub seed: u64,
    /// Fraction of genuine traces whose pick-up starts while walking.
    pub unstable_fraction: f64,
    pub attacks: Option<AttackConfig>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            users: 24,
            contexts: CONTEXTS,
            reps: 10,
            seed: 1,
            unstable_fraction: 0.0,
            attacks: None,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.reps == 0 || self.contexts == 0 {
            return Err(Error::invalid("users, contexts and reps must be at least 1"));
        }
        if self.contexts > CONTEXTS {
            return Err(Error::invalid(format!("at most {CONTEXTS} contexts")));
        }
        if !(0.0..=1.0).contains(&self.unstable_fraction) {
            return Err(Error::invalid("unstable_fraction must lie in [0, 1]"));
        }
        Ok(())
    }
}

pub fn user_label(i: usize) -> String {
    format!("u{i:02}")
}

/// One generated trace and its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub filename: String,
    /// The identity the trace claims: the performer for genuine traces, the
    /// targeted victim for attacks.
    pub user_id: String,
    pub kind: ScenarioKind,
    pub context: Context,
    pub stable_prefix: bool,
    pub t_begin: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub entries: Vec<ManifestEntry>,
    pub traces: Vec<SensorTrace<f64>>,
}

pub const MANIFEST_NAME: &str = "manifest.tsv";
const MANIFEST_HEADER: &str = "#filename\tuser_id\tkind\tcontext\tstable_prefix\tt_begin\tt_end";

fn user_seed(dataset_seed: u64, user: usize) -> u64 {
    splitmix(dataset_seed.wrapping_mul(1_000_003).wrapping_add(user as u64))
}

/// The population a dataset with this seed draws users from.
pub fn population(config: &DatasetConfig, params: &GenParams, n: usize) -> Vec<UserMotionModel> {
    (0..n).map(|u| make_user(user_seed(config.seed, u), params)).collect()
}

fn sample_seed(keys: &[u64]) -> u64 {
    keys.iter().fold(0xC0FFEE, |acc, &k| splitmix(acc ^ k))
}

/// Generates the dataset in memory, in deterministic order.
pub fn gen_dataset(config: &DatasetConfig, params: &GenParams) -> Result<Dataset> {
    config.validate()?;
    params.validate()?;
    let attack_users = config.attacks.as_ref().map_or(0, |a| a.victims + a.attackers);
    let users = population(config, params, config.users.max(attack_users));
    let mut entries = Vec::new();
    let mut traces = Vec::new();

    for (u, model) in users.iter().enumerate().take(config.users) {
        for c in 0..config.contexts {
            let context = Context::from_index(c);
            for r in 0..config.reps {
                let seed = sample_seed(&[config.seed, u as u64, c as u64, r as u64]);
                let unstable = config.unstable_fraction > 0.0
                    && rng_for(&[seed, 0x57AB]).random_bool(config.unstable_fraction);
                let scenario = GenScenario {
                    kind: ScenarioKind::Genuine,
                    context,
                    stable_prefix: !unstable,
                };
                let (trace, truth) = gen_pickup_trace(model, scenario, seed, params)?;
                entries.push(ManifestEntry {
                    filename: format!("{}_{}_r{r:02}.trace", user_label(u), context),
                    user_id: user_label(u),
                    kind: ScenarioKind::Genuine,
                    context,
                    stable_prefix: truth.stable_prefix,
                    t_begin: truth.t_begin,
                    t_end: truth.t_end,
                });
                traces.push(trace);
            }
        }
    }

    if let Some(ac) = &config.attacks {
        for v in 0..ac.victims {
            let victim_ctx = Context::from_index(0);
            for a in ac.victims..ac.victims + ac.attackers {
                for kind in ScenarioKind::ATTACKS {
                    for r in 0..ac.reps {
                        let seed = sample_seed(&[config.seed, 0xA77AC, v as u64, a as u64, r as u64]);
                        let (trace, truth) = gen_attack(&users[v], &users[a], kind, victim_ctx, seed, params)?;
                        entries.push(ManifestEntry {
                            filename: format!(
                                "atk-{}_{}_by_{}_r{r:02}.trace",
                                kind.to_string().to_lowercase(),
                                user_label(v),
                                user_label(a)
                            ),
                            user_id: user_label(v),
                            kind,
                            context: truth.context,
                            stable_prefix: true,
                            t_begin: truth.t_begin,
                            t_end: truth.t_end,
                        });
                        traces.push(trace);
                    }
                }
            }
        }
    }
    Ok(Dataset { entries, traces })
}

pub fn manifest_string(entries: &[ManifestEntry]) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for e in entries {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            e.filename, e.user_id, e.kind, e.context, e.stable_prefix, e.t_begin, e.t_end
        ));
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(Error::parse(n, format!("expected 7 tab-separated fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(n, format!("bad time {s:?}")));
        out.push(ManifestEntry {
            filename: f[0].to_string(),
            user_id: f[1].to_string(),
            kind: f[2].parse().map_err(|e: Error| Error::parse(n, e.to_string()))?,
            context: f[3].parse().map_err(|e: Error| Error::parse(n, e.to_string()))?,
            stable_prefix: f[4].parse().map_err(|_| Error::parse(n, format!("bad flag {:?}", f[4])))?,
            t_begin: num(f[5])?,
            t_end: num(f[6])?,
        });
    }
    Ok(out)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text).map_err(|e| e.with_path(path))
}

impl Dataset {
    /// Writes every trace plus the manifest into `dir`, returning the
    /// manifest path.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (entry, trace) in self.entries.iter().zip(&self.traces) {
            let path = dir.join(&entry.filename);
            fs::write(&path, write_trace(trace)).map_err(|e| Error::io(&path, e))?;
        }
        let manifest = dir.join(MANIFEST_NAME);
        fs::write(&manifest, manifest_string(&self.entries)).map_err(|e| Error::io(&manifest, e))?;
        Ok(manifest)
    }
}
