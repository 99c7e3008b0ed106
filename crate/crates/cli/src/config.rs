//! Key-value run configuration.
//!
//! One `key = value` per line; `#` starts a comment. Every key has a
//! default, and unknown keys are rejected so typos fail loudly.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use pickup_auth::datagen::{AttackConfig, DatasetConfig, GenParams};
use pickup_auth::evaluation::ThresholdPolicy;
use pickup_auth::profile::UpdateRule;
use pickup_auth::series::{ACC_SENSOR, GYR_SENSOR};
use pickup_auth::{ChannelId, Dtw, Error, ExtractParams, Result, WeightVector};

pub const MAG_SENSOR: &str = "mag";

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Sensor shares; channels of one sensor split its share equally.
    pub weight_acc: f64,
    pub weight_gyr: f64,
    pub weight_mag: f64,
    pub theta: f64,
    pub extract: ExtractParams,
    /// Sakoe-Chiba radius in samples; 0 disables the band.
    pub band: usize,
    pub update_rule: UpdateRule,
    pub grid_points: usize,
    /// Upper end of the threshold grid; 0 means the 99th percentile of
    /// the observed distances.
    pub grid_max: f64,
    pub policy: ThresholdPolicy,
    pub weight_step: f64,
    pub dataset: DatasetConfig,
    pub generator: GenParams,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            weight_acc: 0.6,
            weight_gyr: 0.4,
            weight_mag: 0.0,
            theta: 0.15,
            extract: ExtractParams::default(),
            band: 0,
            update_rule: UpdateRule::Average,
            grid_points: 200,
            grid_max: 0.0,
            policy: ThresholdPolicy::MinFarMaxAccuracy,
            weight_step: 0.1,
            dataset: DatasetConfig::default(),
            generator: GenParams::default(),
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("{key}: cannot parse {value:?}")))
}

fn parse_policy(value: &str) -> Result<ThresholdPolicy> {
    match value {
        "min-far-max-accuracy" => Ok(ThresholdPolicy::MinFarMaxAccuracy),
        "eer" => Ok(ThresholdPolicy::Eer),
        _ => match value.strip_prefix("target-frr:") {
            Some(t) => Ok(ThresholdPolicy::TargetFrr(num("policy", t)?)),
            None => Err(Error::invalid(format!(
                "policy: expected min-far-max-accuracy, eer or target-frr:<rate>, got {value:?}"
            ))),
        },
    }
}

fn policy_text(p: ThresholdPolicy) -> String {
    match p {
        ThresholdPolicy::MinFarMaxAccuracy => "min-far-max-accuracy".into(),
        ThresholdPolicy::Eer => "eer".into(),
        ThresholdPolicy::TargetFrr(t) => format!("target-frr:{t}"),
    }
}

fn parse_rule(value: &str) -> Result<UpdateRule> {
    match value {
        "average" => Ok(UpdateRule::Average),
        _ => match value.strip_prefix("exponential:") {
            Some(a) => Ok(UpdateRule::Exponential {
                alpha: num("update_rule", a)?,
            }),
            None => Err(Error::invalid(format!(
                "update_rule: expected average or exponential:<alpha>, got {value:?}"
            ))),
        },
    }
}

fn rule_text(r: UpdateRule) -> String {
    match r {
        UpdateRule::Average => "average".into(),
        UpdateRule::Exponential { alpha } => format!("exponential:{alpha}"),
    }
}

fn attacks_mut(d: &mut DatasetConfig) -> &mut AttackConfig {
    d.attacks.get_or_insert(AttackConfig {
        victims: 0,
        attackers: 0,
        reps: 1,
    })
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let g = &mut self.generator;
        let f = &mut self.extract.flat;
        match key.trim() {
            "weight_acc" => self.weight_acc = num(key, v)?,
            "weight_gyr" => self.weight_gyr = num(key, v)?,
            "weight_mag" => self.weight_mag = num(key, v)?,
            "theta" => self.theta = num(key, v)?,
            "t_f" => f.t_f = num(key, v)?,
            "epsilon_acc" => f.epsilon_acc = num(key, v)?,
            "epsilon_gyr" => f.epsilon_gyr = num(key, v)?,
            "flat_window" => f.window = num(key, v)?,
            "min_duration" => self.extract.min_duration = num(key, v)?,
            "max_duration" => self.extract.max_duration = num(key, v)?,
            "max_backtrack" => self.extract.max_backtrack = num(key, v)?,
            "band" => self.band = num(key, v)?,
            "update_rule" => self.update_rule = parse_rule(v)?,
            "grid_points" => self.grid_points = num(key, v)?,
            "grid_max" => self.grid_max = num(key, v)?,
            "policy" => self.policy = parse_policy(v)?,
            "weight_step" => self.weight_step = num(key, v)?,
            "seed" => self.dataset.seed = num(key, v)?,
            "users" => self.dataset.users = num(key, v)?,
            "contexts" => self.dataset.contexts = num(key, v)?,
            "reps" => self.dataset.reps = num(key, v)?,
            "unstable_fraction" => self.dataset.unstable_fraction = num(key, v)?,
            "attack_victims" => attacks_mut(&mut self.dataset).victims = num(key, v)?,
            "attack_attackers" => attacks_mut(&mut self.dataset).attackers = num(key, v)?,
            "attack_reps" => attacks_mut(&mut self.dataset).reps = num(key, v)?,
            "rate_hz" => g.rate_hz = num(key, v)?,
            "jitter_ms" => g.jitter_ms = num(key, v)?,
            "noise_acc" => g.noise_acc = num(key, v)?,
            "noise_gyr" => g.noise_gyr = num(key, v)?,
            "separability_acc" => g.separability_acc = num(key, v)?,
            "separability_gyr" => g.separability_gyr = num(key, v)?,
            "separability_orientation" => g.separability_orientation = num(key, v)?,
            "intra_sd" => g.intra_sd = num(key, v)?,
            "duration_sd" => g.duration_sd = num(key, v)?,
            "warp_sd" => g.warp_sd = num(key, v)?,
            "context_scale" => g.context_scale = num(key, v)?,
            "flat_prefix_min" => g.flat_prefix.0 = num(key, v)?,
            "flat_prefix_max" => g.flat_prefix.1 = num(key, v)?,
            "walking_prefix" => g.walking_prefix = num(key, v)?,
            "tail" => g.tail = num(key, v)?,
            "context_skill" => g.context_skill = num(key, v)?,
            "mimic_skill" => g.mimic_skill = num(key, v)?,
            "drift_rate" => g.drift_rate = num(key, v)?,
            other => return Err(Error::invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` text on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected key = value, got {line:?}")))?;
            self.set(k, v).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::default();
        c.apply_text(&text).map_err(|e| e.with_path(path))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("weight_acc", self.weight_acc),
            ("weight_gyr", self.weight_gyr),
            ("weight_mag", self.weight_mag),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(format!("{name} must be non-negative")));
            }
        }
        if self.weight_acc + self.weight_gyr <= 0.0 {
            return Err(Error::invalid("accelerometer and gyroscope weights are both zero"));
        }
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::invalid("theta must be positive"));
        }
        if self.grid_points < 2 {
            return Err(Error::invalid("grid_points must be at least 2"));
        }
        if !(self.grid_max.is_finite() && self.grid_max >= 0.0) {
            return Err(Error::invalid("grid_max must be non-negative"));
        }
        if let UpdateRule::Exponential { alpha } = self.update_rule {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::invalid("update_rule alpha must lie in [0, 1]"));
            }
        }
        self.extract.validate()?;
        self.dataset.validate()?;
        self.generator.validate()
    }

    pub fn dtw(&self) -> Dtw {
        match self.band {
            0 => Dtw::new(),
            r => Dtw::new().with_band(r),
        }
    }

    /// Weights for `ids` from the sensor shares, renormalised over the
    /// sensors present.
    pub fn weights(&self, ids: &[ChannelId]) -> Result<WeightVector<f64>> {
        WeightVector::by_sensor(ids, &self.shares())
    }

    pub fn shares(&self) -> Vec<(&'static str, f64)> {
        vec![
            (ACC_SENSOR, self.weight_acc),
            (GYR_SENSOR, self.weight_gyr),
            (MAG_SENSOR, self.weight_mag),
        ]
    }

    /// The full configuration as text accepted by [`Config::apply_text`].
    pub fn to_text(&self) -> String {
        let g = &self.generator;
        let f = &self.extract.flat;
        let d = &self.dataset;
        let a = d.attacks.clone().unwrap_or(AttackConfig {
            victims: 0,
            attackers: 0,
            reps: 1,
        });
        let pairs: Vec<(&str, String)> = vec![
            ("weight_acc", self.weight_acc.to_string()),
            ("weight_gyr", self.weight_gyr.to_string()),
            ("weight_mag", self.weight_mag.to_string()),
            ("theta", self.theta.to_string()),
            ("t_f", f.t_f.to_string()),
            ("epsilon_acc", f.epsilon_acc.to_string()),
            ("epsilon_gyr", f.epsilon_gyr.to_string()),
            ("flat_window", f.window.to_string()),
            ("min_duration", self.extract.min_duration.to_string()),
            ("max_duration", self.extract.max_duration.to_string()),
            ("max_backtrack", self.extract.max_backtrack.to_string()),
            ("band", self.band.to_string()),
            ("update_rule", rule_text(self.update_rule)),
            ("grid_points", self.grid_points.to_string()),
            ("grid_max", self.grid_max.to_string()),
            ("policy", policy_text(self.policy)),
            ("weight_step", self.weight_step.to_string()),
            ("seed", d.seed.to_string()),
            ("users", d.users.to_string()),
            ("contexts", d.contexts.to_string()),
            ("reps", d.reps.to_string()),
            ("unstable_fraction", d.unstable_fraction.to_string()),
            ("attack_victims", a.victims.to_string()),
            ("attack_attackers", a.attackers.to_string()),
            ("attack_reps", a.reps.to_string()),
            ("rate_hz", g.rate_hz.to_string()),
            ("jitter_ms", g.jitter_ms.to_string()),
            ("noise_acc", g.noise_acc.to_string()),
            ("noise_gyr", g.noise_gyr.to_string()),
            ("separability_acc", g.separability_acc.to_string()),
            ("separability_gyr", g.separability_gyr.to_string()),
            ("separability_orientation", g.separability_orientation.to_string()),
            ("intra_sd", g.intra_sd.to_string()),
            ("duration_sd", g.duration_sd.to_string()),
            ("warp_sd", g.warp_sd.to_string()),
            ("context_scale", g.context_scale.to_string()),
            ("flat_prefix_min", g.flat_prefix.0.to_string()),
            ("flat_prefix_max", g.flat_prefix.1.to_string()),
            ("walking_prefix", g.walking_prefix.to_string()),
            ("tail", g.tail.to_string()),
            ("context_skill", g.context_skill.to_string()),
            ("mimic_skill", g.mimic_skill.to_string()),
            ("drift_rate", g.drift_rate.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Dataset settings with attacks dropped when no victims are set.
    pub fn dataset_config(&self) -> DatasetConfig {
        let mut d = self.dataset.clone();
        if d.attacks.as_ref().is_some_and(|a| a.victims == 0 || a.attackers == 0) {
            d.attacks = None;
        }
        d
    }
}
