//! User profiles: enrollment, the accept/reject decision, post-decision
//! handling, and template updating.

use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use crate::dtw::{align, Dtw};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{ChannelId, MultiSeries, Series, WeightVector};
use crate::signal::{resample_uniform, PickUpSignal, SensorSample};
use crate::trace_io::{write_sample_line, SampleLines};

#[derive(Debug, Clone, PartialEq)]
pub struct Profile<T> {
    pub user_id: String,
    pub template: PickUpSignal<T>,
    pub weights: WeightVector<T>,
    pub theta: T,
    pub update_count: u64,
}

impl<T: Scalar> Profile<T> {
    pub fn new(
        user_id: impl Into<String>,
        template: PickUpSignal<T>,
        weights: WeightVector<T>,
        theta: T,
    ) -> Result<Self> {
        let profile = Self {
            user_id: user_id.into(),
            template,
            weights,
            theta,
            update_count: 0,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > T::zero()) || !self.theta.is_finite_value() {
            return Err(Error::invalid(format!("theta must be positive, got {}", self.theta)));
        }
        if self.weights.len() != self.template.signal.k() {
            return Err(Error::invalid(format!(
                "{} weights for a {}-channel template",
                self.weights.len(),
                self.template.signal.k()
            )));
        }
        if self.user_id.is_empty() || self.user_id.contains(['\n', '\r']) {
            return Err(Error::invalid("user id must be a non-empty single line"));
        }
        Ok(())
    }

    pub fn with_theta(mut self, theta: T) -> Result<Self> {
        self.theta = theta;
        self.validate()?;
        Ok(self)
    }

    pub fn channel_ids(&self) -> &[ChannelId] {
        self.template.signal.ids()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthDecision<T> {
    pub distance: T,
    pub theta: T,
    pub accepted: bool,
    pub per_channel: Vec<T>,
}

/// Result of the fallback password/PIN/fingerprint check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExplicitAuthOutcome {
    pub passed: bool,
}

/// How an aligned template and candidate are combined on update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum UpdateRule {
    /// Plain average of the aligned pair.
    #[default]
    Average,
    /// `(1 - alpha) * template + alpha * candidate`.
    Exponential { alpha: f64 },
}

/// Weighted DTW distance matrix, evaluated on the lower triangle.
pub fn distance_matrix<T: Scalar>(
    dtw: &Dtw,
    signals: &[&PickUpSignal<T>],
    weights: &WeightVector<T>,
) -> Result<Vec<Vec<T>>> {
    let n = signals.len();
    let mut d = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..i {
            let v = dtw
                .multi_weighted(&signals[i].signal, &signals[j].signal, weights)?
                .distance;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

/// Index minimising the row sum; earliest index wins ties.
pub fn medoid_index<T: Scalar>(distances: &[Vec<T>]) -> Option<usize> {
    distances
        .iter()
        .map(|row| row.iter().copied().sum::<T>())
        .enumerate()
        .fold(None, |best: Option<(usize, T)>, (i, s)| match best {
            Some((_, b)) if !(s < b) => best,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i)
}

/// Builds a profile whose template is the medoid of `samples`.
pub fn enroll<T: Scalar>(
    user_id: &str,
    samples: &[PickUpSignal<T>],
    weights: WeightVector<T>,
    theta: T,
) -> Result<Profile<T>> {
    enroll_with(&Dtw::new(), user_id, samples, weights, theta)
}

pub fn enroll_with<T: Scalar>(
    dtw: &Dtw,
    user_id: &str,
    samples: &[PickUpSignal<T>],
    weights: WeightVector<T>,
    theta: T,
) -> Result<Profile<T>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("enrollment needs at least one sample"))?;
    for s in &samples[1..] {
        first.signal.ensure_same_channels(&s.signal)?;
    }
    if weights.len() != first.signal.k() {
        return Err(Error::invalid(format!(
            "{} weights for {} channels",
            weights.len(),
            first.signal.k()
        )));
    }
    let refs: Vec<&PickUpSignal<T>> = samples.iter().collect();
    let d = distance_matrix(dtw, &refs, &weights)?;
    let idx = medoid_index(&d).expect("non-empty");
    let mut template = samples[idx].clone();
    template.user_id = Some(user_id.to_string());
    Profile::new(user_id, template, weights, theta)
}

pub fn authenticate<T: Scalar>(profile: &Profile<T>, candidate: &PickUpSignal<T>) -> Result<AuthDecision<T>> {
    authenticate_with(&Dtw::new(), profile, candidate)
}

pub fn authenticate_with<T: Scalar>(
    dtw: &Dtw,
    profile: &Profile<T>,
    candidate: &PickUpSignal<T>,
) -> Result<AuthDecision<T>> {
    let r = dtw.multi_weighted(&profile.template.signal, &candidate.signal, &profile.weights)?;
    Ok(AuthDecision {
        accepted: r.distance <= profile.theta,
        distance: r.distance,
        theta: profile.theta,
        per_channel: r.per_channel,
    })
}

/// Applies the decision and the optional explicit check. The profile is
/// updated only when the implicit check failed and the explicit one passed.
/// Returns the (possibly updated) profile and whether access is granted.
pub fn post_authenticate<T: Scalar>(
    profile: &Profile<T>,
    candidate: &PickUpSignal<T>,
    decision: &AuthDecision<T>,
    explicit: Option<ExplicitAuthOutcome>,
) -> Result<(Profile<T>, bool)> {
    post_authenticate_with(&Dtw::new(), UpdateRule::Average, profile, candidate, decision, explicit)
}

pub fn post_authenticate_with<T: Scalar>(
    dtw: &Dtw,
    rule: UpdateRule,
    profile: &Profile<T>,
    candidate: &PickUpSignal<T>,
    decision: &AuthDecision<T>,
    explicit: Option<ExplicitAuthOutcome>,
) -> Result<(Profile<T>, bool)> {
    if decision.accepted {
        return Ok((profile.clone(), true));
    }
    match explicit {
        Some(ExplicitAuthOutcome { passed: true }) => Ok((update_with(dtw, profile, candidate, rule)?, true)),
        _ => Ok((profile.clone(), false)),
    }
}

pub fn update<T: Scalar>(profile: &Profile<T>, candidate: &PickUpSignal<T>) -> Result<Profile<T>> {
    update_with(&Dtw::new(), profile, candidate, UpdateRule::Average)
}

/// Aligns each channel of the template with the candidate, combines the
/// aligned pair, and resamples back onto the template's time base.
pub fn update_with<T: Scalar>(
    dtw: &Dtw,
    profile: &Profile<T>,
    candidate: &PickUpSignal<T>,
    rule: UpdateRule,
) -> Result<Profile<T>> {
    let template = &profile.template.signal;
    template.ensure_same_channels(&candidate.signal)?;
    let (keep, take) = match rule {
        UpdateRule::Average => (T::half(), T::half()),
        UpdateRule::Exponential { alpha } => {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::invalid(format!("update alpha {alpha} outside [0, 1]")));
            }
            let a = T::lit(alpha);
            (T::one() - a, a)
        }
    };
    let n = template.len();
    let channels = template
        .channels()
        .iter()
        .zip(candidate.signal.channels())
        .map(|(x, y)| {
            let path = dtw
                .distance_1d(x, y, true)?
                .path
                .expect("path requested");
            let (xa, ya) = align(x, y, &path)?;
            let merged: Vec<T> = xa
                .values()
                .iter()
                .zip(ya.values())
                .map(|(&a, &b)| keep * a + take * b)
                .collect();
            Series::new(resample_uniform(&merged, n))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut updated = profile.clone();
    updated.template.signal = MultiSeries::new(template.ids().to_vec(), channels)?;
    updated.update_count += 1;
    Ok(updated)
}

const PROFILE_MAGIC: &str = "#profile-v1";

/// Serialises a profile: magic line, `key=value` header, then the template
/// as trace sample lines.
pub fn write_profile_string<T: Scalar>(profile: &Profile<T>) -> Result<String> {
    let sig = &profile.template;
    let ids = sig.signal.ids();
    let k = ids.len();
    let layout = layout_of(ids)?;
    let mut out = String::new();
    let _ = writeln!(out, "{PROFILE_MAGIC}");
    let _ = writeln!(out, "user_id={}", profile.user_id);
    let _ = writeln!(out, "theta={}", profile.theta.to_f64());
    let w: Vec<String> = profile.weights.as_slice().iter().map(|w| w.to_f64().to_string()).collect();
    let _ = writeln!(out, "weights={}", w.join(","));
    let _ = writeln!(out, "update_count={}", profile.update_count);
    let _ = writeln!(out, "t_begin={}", sig.t_begin);
    let _ = writeln!(out, "t_end={}", sig.t_end);
    if let Some(ctx) = &sig.context {
        let _ = writeln!(out, "context={ctx}");
    }
    let n = sig.signal.len();
    let step = if n > 1 { (sig.t_end - sig.t_begin) / (n - 1) as f64 } else { 0.0 };
    for idx in 0..n {
        let v = |c: usize| sig.signal.channels()[c].values()[idx];
        let t = if idx + 1 == n && n > 1 { sig.t_end } else { sig.t_begin + step * idx as f64 };
        let mut s = SensorSample::new(t, [v(0), v(1), v(2)], [v(3), v(4), v(5)]);
        if layout == 9 {
            s.mag = Some([v(6), v(7), v(8)]);
        }
        debug_assert_eq!(k, layout);
        write_sample_line(&mut out, &s);
    }
    Ok(out)
}

fn layout_of(ids: &[ChannelId]) -> Result<usize> {
    let imu = crate::series::imu_channel_ids();
    let mut full = imu.clone();
    full.extend(["mag-x", "mag-y", "mag-z"].map(ChannelId::from));
    if ids == imu.as_slice() {
        Ok(6)
    } else if ids == full.as_slice() {
        Ok(9)
    } else {
        Err(Error::invalid("profiles store the 6 inertial channels, optionally with magnetometer"))
    }
}

pub fn parse_profile<T: Scalar>(text: &str) -> Result<Profile<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, PROFILE_MAGIC)) => {}
        Some((_, other)) if other.starts_with("#profile-") => {
            return Err(Error::UnsupportedVersion(other.to_string()));
        }
        _ => return Err(Error::parse(1, format!("missing {PROFILE_MAGIC} magic line"))),
    }
    let (mut user_id, mut theta, mut weights, mut count) = (None, None, None, None);
    let (mut t_begin, mut t_end, mut context) = (None, None, None);
    let mut samples = SampleLines::<T>::new();
    for (n, l) in lines {
        if l.is_empty() {
            continue;
        }
        if let Some((key, value)) = l.split_once('=') {
            if !samples.samples.is_empty() {
                return Err(Error::parse(n, "header key after template data"));
            }
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(n, format!("bad number for {key}: {v:?}")))
            };
            let scalar = |v: &str| -> Result<T> {
                T::from_f64(num(v)?).ok_or_else(|| Error::parse(n, format!("{key} not representable")))
            };
            match key {
                "user_id" => user_id = Some(value.to_string()),
                "theta" => theta = Some(scalar(value)?),
                "weights" => {
                    weights = Some(value.split(',').map(|w| scalar(w.trim())).collect::<Result<Vec<T>>>()?)
                }
                "update_count" => {
                    count = Some(
                        value
                            .parse::<u64>()
                            .map_err(|_| Error::parse(n, format!("bad update_count {value:?}")))?,
                    )
                }
                "t_begin" => t_begin = Some(num(value)?),
                "t_end" => t_end = Some(num(value)?),
                "context" => context = Some(value.to_string()),
                other => return Err(Error::parse(n, format!("unknown key {other:?}"))),
            }
            continue;
        }
        samples.push(l, n)?;
    }
    let missing = |k: &str| Error::parse(0, format!("profile missing {k}"));
    let user_id = user_id.ok_or_else(|| missing("user_id"))?;
    let theta = theta.ok_or_else(|| missing("theta"))?;
    let weights = WeightVector::new(weights.ok_or_else(|| missing("weights"))?)?;
    let update_count = count.ok_or_else(|| missing("update_count"))?;
    let samples = samples.samples;
    if samples.is_empty() {
        return Err(missing("template samples"));
    }
    let t_begin = t_begin.unwrap_or(samples[0].t);
    let t_end = t_end.unwrap_or(samples[samples.len() - 1].t);

    let mut ids = crate::series::imu_channel_ids();
    let mut getters: Vec<fn(&SensorSample<T>) -> T> = vec![
        |s| s.acc[0],
        |s| s.acc[1],
        |s| s.acc[2],
        |s| s.gyro[0],
        |s| s.gyro[1],
        |s| s.gyro[2],
    ];
    if samples[0].mag.is_some() {
        ids.extend(["mag-x", "mag-y", "mag-z"].map(ChannelId::from));
        getters.push(|s| s.mag.map_or(T::zero(), |m| m[0]));
        getters.push(|s| s.mag.map_or(T::zero(), |m| m[1]));
        getters.push(|s| s.mag.map_or(T::zero(), |m| m[2]));
    }
    let channels = getters
        .iter()
        .map(|g| Series::new(samples.iter().map(g).collect()))
        .collect::<Result<Vec<_>>>()?;
    let mut template = PickUpSignal::new(MultiSeries::new(ids, channels)?, t_begin, t_end)?;
    template.user_id = Some(user_id.clone());
    template.context = context;
    let mut profile = Profile::new(user_id, template, weights, theta)?;
    profile.update_count = update_count;
    Ok(profile)
}

pub fn read_profile<T: Scalar>(path: impl AsRef<Path>) -> Result<Profile<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_profile(&text).map_err(|e| e.with_path(path))
}

fn lock_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".lock");
    path.with_file_name(name)
}

fn lock(path: &Path) -> Result<File> {
    let lp = lock_path(path);
    let file = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&lp)
        .map_err(|e| Error::io(&lp, e))?;
    file.lock().map_err(|e| Error::io(&lp, e))?;
    Ok(file)
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes the profile under the store's exclusive lock.
pub fn write_profile<T: Scalar>(path: impl AsRef<Path>, profile: &Profile<T>) -> Result<()> {
    let path = path.as_ref();
    let text = write_profile_string(profile)?;
    let _guard = lock(path)?;
    write_atomic(path, &text)
}

/// Read-modify-write under an exclusive lock. `f` returns the new profile,
/// or `None` to leave the file untouched, plus a value passed through.
pub fn modify_profile<T: Scalar, R>(
    path: impl AsRef<Path>,
    f: impl FnOnce(Profile<T>) -> Result<(Option<Profile<T>>, R)>,
) -> Result<R> {
    let path = path.as_ref();
    let _guard = lock(path)?;
    let current = read_profile(path)?;
    let (next, out) = f(current)?;
    if let Some(p) = next {
        write_atomic(path, &write_profile_string(&p)?)?;
    }
    Ok(out)
}
