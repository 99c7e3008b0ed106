//! Raw inertial traces and extraction of pick-up signals from them.
//!
//! A pick-up ends at a trigger event (the wake-up press). Extraction walks
//! backwards from the trigger until it finds a stable interval lasting at
//! least `t_f`; the end of that interval is where the pick-up begins. The
//! stable prefix itself is not part of the extracted signal.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{imu_channel_ids, ChannelId, MultiSeries, Series};

/// One 6-axis reading (optionally with a magnetometer). `t` is in ms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSample<T> {
    pub t: f64,
    pub acc: [T; 3],
    pub gyro: [T; 3],
    pub mag: Option<[T; 3]>,
}

impl<T: Scalar> SensorSample<T> {
    pub fn new(t: f64, acc: [T; 3], gyro: [T; 3]) -> Self {
        Self {
            t,
            acc,
            gyro,
            mag: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.acc.iter().chain(&self.gyro).all(|v| v.is_finite_value())
            && self.mag.is_none_or(|m| m.iter().all(|v| v.is_finite_value()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Trigger,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub t: f64,
    pub kind: EventKind,
}

/// A validated recording: strictly increasing sample times, events in
/// order and inside the sampled time range.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorTrace<T> {
    rate_hz: f64,
    samples: Vec<SensorSample<T>>,
    events: Vec<TraceEvent>,
}

impl<T: Scalar> SensorTrace<T> {
    pub fn new(rate_hz: f64, samples: Vec<SensorSample<T>>, events: Vec<TraceEvent>) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::invalid(format!("sample rate {rate_hz} must be positive")));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("sample {i} has a non-finite component")));
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::invalid(format!(
                "sample timestamps not strictly increasing at sample {}",
                i + 1
            )));
        }
        let has_mag = samples.first().is_some_and(|s| s.mag.is_some());
        if samples.iter().any(|s| s.mag.is_some() != has_mag) {
            return Err(Error::invalid("magnetometer present on only some samples"));
        }
        if events.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::invalid("events out of order"));
        }
        if let Some(ev) = events.iter().find(|e| {
            samples.is_empty() || e.t < samples[0].t || e.t > samples[samples.len() - 1].t
        }) {
            return Err(Error::invalid(format!(
                "event at t={} lies outside the sampled range",
                ev.t
            )));
        }
        Ok(Self {
            rate_hz,
            samples,
            events,
        })
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn samples(&self) -> &[SensorSample<T>] {
        &self.samples
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn has_magnetometer(&self) -> bool {
        self.samples.first().is_some_and(|s| s.mag.is_some())
    }

    pub fn time_range(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }
}

/// Stability criterion for a sliding window of samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatParams {
    /// Minimum duration of the stable interval, seconds.
    pub t_f: f64,
    /// Per-axis accelerometer variance bound, (m/s²)².
    pub epsilon_acc: f64,
    /// Per-axis gyroscope variance bound, (rad/s)².
    pub epsilon_gyr: f64,
    /// Sliding window length in samples.
    pub window: usize,
}

impl Default for FlatParams {
    fn default() -> Self {
        Self {
            t_f: 0.5,
            epsilon_acc: 0.05,
            epsilon_gyr: 0.005,
            window: 10,
        }
    }
}

impl FlatParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_f > 0.0 && self.epsilon_acc > 0.0 && self.epsilon_gyr > 0.0 && self.window > 0;
        if !ok || !self.t_f.is_finite() || !self.epsilon_acc.is_finite() || !self.epsilon_gyr.is_finite() {
            return Err(Error::invalid("flat parameters must all be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractParams {
    pub flat: FlatParams,
    /// Seconds.
    pub min_duration: f64,
    pub max_duration: f64,
    pub max_backtrack: f64,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            flat: FlatParams::default(),
            min_duration: 0.5,
            max_duration: 4.0,
            max_backtrack: 4.0,
        }
    }
}

impl ExtractParams {
    pub fn validate(&self) -> Result<()> {
        self.flat.validate()?;
        if !(self.min_duration > 0.0 && self.min_duration <= self.max_duration && self.max_backtrack > 0.0) {
            return Err(Error::invalid("duration bounds must satisfy 0 < min <= max and backtrack > 0"));
        }
        Ok(())
    }
}

/// Extracted pick-up motion: six resampled channels plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PickUpSignal<T> {
    pub signal: MultiSeries<T>,
    /// Milliseconds.
    pub t_begin: f64,
    pub t_end: f64,
    pub user_id: Option<String>,
    pub context: Option<String>,
}

impl<T: Scalar> PickUpSignal<T> {
    pub fn new(signal: MultiSeries<T>, t_begin: f64, t_end: f64) -> Result<Self> {
        if !(t_begin.is_finite() && t_end.is_finite() && t_begin < t_end) {
            return Err(Error::invalid(format!(
                "pick-up window [{t_begin}, {t_end}] is empty"
            )));
        }
        Ok(Self {
            signal,
            t_begin,
            t_end,
            user_id: None,
            context: None,
        })
    }

    pub fn with_user(mut self, user: impl Into<String>) -> Self {
        self.user_id = Some(user.into());
        self
    }

    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        self.context = Some(context.into());
        self
    }

    /// Seconds.
    pub fn duration(&self) -> f64 {
        (self.t_end - self.t_begin) / 1000.0
    }

    pub fn channel_ids(&self) -> &[ChannelId] {
        self.signal.ids()
    }

    /// Copy restricted to a channel subset.
    pub fn select(&self, subset: &[ChannelId]) -> Result<Self> {
        Ok(Self {
            signal: self.signal.select(subset)?,
            ..self.clone()
        })
    }
}

fn axis_variance<T: Scalar>(window: &[SensorSample<T>], get: impl Fn(&SensorSample<T>) -> T) -> T {
    let n = T::from_usize(window.len());
    let mean = window.iter().map(&get).sum::<T>() / n;
    window
        .iter()
        .map(|s| {
            let d = get(s) - mean;
            d * d
        })
        .sum::<T>()
        / n
}

/// True when every accelerometer and gyroscope axis has population
/// variance within its bound over `window`.
pub fn is_flat<T: Scalar>(window: &[SensorSample<T>], params: &FlatParams) -> bool {
    if window.is_empty() {
        return false;
    }
    let eps_acc = T::lit(params.epsilon_acc);
    let eps_gyr = T::lit(params.epsilon_gyr);
    (0..3).all(|a| axis_variance(window, |s| s.acc[a]) <= eps_acc)
        && (0..3).all(|a| axis_variance(window, |s| s.gyro[a]) <= eps_gyr)
}

pub fn detect_triggers<T>(trace: &SensorTrace<T>) -> Vec<f64> {
    trace
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Trigger)
        .map(|e| e.t)
        .collect()
}

const TIME_EPS_MS: f64 = 1e-6;

/// Finds the pick-up start for a trigger at `t_end`.
///
/// Returns the end time of the most recent stable interval of at least
/// `t_f` seconds, where every sliding window inside it is flat. Only end
/// times within `max_backtrack` of `t_end` are considered; the interval
/// itself may reach further back. `Ok(None)` when no such interval exists.
pub fn backtrack_begin<T: Scalar>(
    trace: &SensorTrace<T>,
    t_end: f64,
    params: &ExtractParams,
) -> Result<Option<f64>> {
    let samples = trace.samples();
    let (first, last) = trace
        .time_range()
        .ok_or_else(|| Error::invalid("trace has no samples"))?;
    if !(t_end >= first && t_end <= last) {
        return Err(Error::invalid(format!(
            "t_end {t_end} outside trace range [{first}, {last}]"
        )));
    }
    let w = params.flat.window;
    let end_idx = samples.partition_point(|s| s.t <= t_end + TIME_EPS_MS) - 1;
    if end_idx + 1 < w {
        return Ok(None);
    }
    let t_f_ms = params.flat.t_f * 1000.0;
    let cap = t_end - params.max_backtrack * 1000.0;
    // Earliest window end that can belong to a qualifying interval.
    let window_ms = w as f64 * 1000.0 / trace.rate_hz();
    let lo_t = cap - t_f_ms - window_ms;
    let lo = samples.partition_point(|s| s.t < lo_t).max(w - 1);
    if lo > end_idx {
        return Ok(None);
    }

    // run_start[i - lo]: first sample index of the contiguous flat run whose
    // last window ends at i.
    let mut run_start: Vec<Option<usize>> = Vec::with_capacity(end_idx + 1 - lo);
    for i in lo..=end_idx {
        let flat = is_flat(&samples[i + 1 - w..=i], &params.flat);
        let start = if !flat {
            None
        } else {
            match run_start.last() {
                Some(Some(s)) if i > lo => Some(*s),
                _ => Some(i + 1 - w),
            }
        };
        run_start.push(start);
    }

    for i in (lo..=end_idx).rev() {
        if samples[i].t < cap - TIME_EPS_MS {
            break;
        }
        if let Some(start) = run_start[i - lo] {
            if samples[i].t - samples[start].t >= t_f_ms - TIME_EPS_MS {
                return Ok(Some(samples[i].t));
            }
        }
    }
    Ok(None)
}

/// Resamples `values` onto `n_out` evenly spaced points spanning the same
/// index range. Endpoints are preserved exactly.
pub fn resample_uniform<T: Scalar>(values: &[T], n_out: usize) -> Vec<T> {
    assert!(!values.is_empty() && n_out > 0);
    let n_in = values.len();
    if n_out == 1 || n_in == 1 {
        return vec![values[0]; n_out];
    }
    let denom = n_out - 1;
    (0..n_out)
        .map(|k| {
            let num = k * (n_in - 1);
            let (idx, rem) = (num / denom, num % denom);
            if rem == 0 {
                values[idx]
            } else {
                let frac = T::from_usize(rem) / T::from_usize(denom);
                values[idx] + (values[idx + 1] - values[idx]) * frac
            }
        })
        .collect()
}

/// Linear interpolation of samples `[lo..=hi]` at time `t`, clamped to the
/// range's endpoints.
fn interpolate<T: Scalar>(samples: &[SensorSample<T>], t: f64, get: &dyn Fn(&SensorSample<T>) -> T) -> T {
    let pos = samples.partition_point(|s| s.t <= t);
    if pos == 0 {
        return get(&samples[0]);
    }
    if pos >= samples.len() {
        return get(&samples[samples.len() - 1]);
    }
    let (a, b) = (&samples[pos - 1], &samples[pos]);
    let frac = (t - a.t) / (b.t - a.t);
    if frac <= 0.0 {
        return get(a);
    }
    get(a) + (get(b) - get(a)) * T::lit(frac)
}

/// Cuts `[t_begin, t_end]` out of the trace and resamples all channels to
/// the trace's nominal rate.
pub fn cut_signal<T: Scalar>(trace: &SensorTrace<T>, t_begin: f64, t_end: f64) -> Result<PickUpSignal<T>> {
    let samples = trace.samples();
    let lo = samples.partition_point(|s| s.t < t_begin - TIME_EPS_MS);
    let hi = samples.partition_point(|s| s.t <= t_end + TIME_EPS_MS);
    if lo >= hi {
        return Err(Error::invalid("no samples inside pick-up window"));
    }
    let window = &samples[lo..hi];
    let n_out = (((t_end - t_begin) * trace.rate_hz() / 1000.0).round() as usize + 1).max(2);
    let step = (t_end - t_begin) / (n_out - 1) as f64;
    let times: Vec<f64> = (0..n_out)
        .map(|k| if k + 1 == n_out { t_end } else { t_begin + step * k as f64 })
        .collect();

    let mut ids = imu_channel_ids();
    let mut getters: Vec<Box<dyn Fn(&SensorSample<T>) -> T>> = Vec::new();
    for a in 0..3 {
        getters.push(Box::new(move |s: &SensorSample<T>| s.acc[a]));
    }
    for a in 0..3 {
        getters.push(Box::new(move |s: &SensorSample<T>| s.gyro[a]));
    }
    if trace.has_magnetometer() {
        for (a, axis) in ["x", "y", "z"].into_iter().enumerate() {
            ids.push(ChannelId::new(format!("mag-{axis}")));
            getters.push(Box::new(move |s: &SensorSample<T>| {
                s.mag.map(|m| m[a]).unwrap_or_else(T::zero)
            }));
        }
    }
    let channels = getters
        .iter()
        .map(|get| Series::new(times.iter().map(|&t| interpolate(window, t, get.as_ref())).collect()))
        .collect::<Result<Vec<_>>>()?;
    PickUpSignal::new(MultiSeries::new(ids, channels)?, t_begin, t_end)
}

/// Outcome of extracting one trace: usable signals and skipped triggers.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction<T> {
    pub signals: Vec<PickUpSignal<T>>,
    pub triggers: usize,
}

pub fn extract_with_count<T: Scalar>(trace: &SensorTrace<T>, params: &ExtractParams) -> Result<Extraction<T>> {
    params.validate()?;
    let triggers = detect_triggers(trace);
    let mut signals = Vec::new();
    for &t_end in &triggers {
        let Some(t_begin) = backtrack_begin(trace, t_end, params)? else {
            continue;
        };
        let duration = (t_end - t_begin) / 1000.0;
        if duration < params.min_duration - 1e-9 || duration > params.max_duration + 1e-9 {
            continue;
        }
        signals.push(cut_signal(trace, t_begin, t_end)?);
    }
    Ok(Extraction {
        signals,
        triggers: triggers.len(),
    })
}

/// Pick-up signals for every trigger that has a stable prefix and an
/// admissible duration; other triggers are skipped.
pub fn extract_pickups<T: Scalar>(trace: &SensorTrace<T>, params: &ExtractParams) -> Result<Vec<PickUpSignal<T>>> {
    Ok(extract_with_count(trace, params)?.signals)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionStats {
    pub detected: usize,
    pub triggers: usize,
    pub ratio: f64,
    /// Set when there were no triggers, in which case `ratio` is 0.
    pub undefined: bool,
}

impl DetectionStats {
    pub fn from_counts(detected: usize, triggers: usize) -> Self {
        if triggers == 0 {
            return Self {
                detected,
                triggers,
                ratio: 0.0,
                undefined: true,
            };
        }
        Self {
            detected,
            triggers,
            ratio: detected as f64 / triggers as f64,
            undefined: false,
        }
    }
}

pub fn detection_stats<T: Scalar>(traces: &[SensorTrace<T>], params: &ExtractParams) -> Result<DetectionStats> {
    let (mut detected, mut triggers) = (0, 0);
    for trace in traces {
        let ex = extract_with_count(trace, params)?;
        detected += ex.signals.len();
        triggers += ex.triggers;
    }
    Ok(DetectionStats::from_counts(detected, triggers))
}
