//! Validated time-series containers: single channels, labelled channel
//! bundles, and per-channel weight vectors.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A non-empty sequence of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Series<T> {
    values: Vec<T>,
}

impl<T: Scalar> Series<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("series must contain at least one value"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite_value()) {
            return Err(Error::invalid(format!(
                "series value at index {pos} is not finite"
            )));
        }
        Ok(Self { values })
    }

    pub fn from_f64(values: &[f64]) -> Result<Self> {
        let converted = values
            .iter()
            .map(|&v| {
                T::from_f64(v).ok_or_else(|| Error::invalid(format!("value {v} not representable")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(converted)
    }

    pub fn constant(value: T, len: usize) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

impl<T> AsRef<[T]> for Series<T> {
    fn as_ref(&self) -> &[T] {
        &self.values
    }
}

/// Label of one channel, e.g. `acc-x` or `gyr-z`.
///
/// The part before the first `-` names the sensor; weight presets and
/// subset ablation group channels by it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelId(String);

impl ChannelId {
    pub fn new(label: impl Into<String>) -> Self {
        Self(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn sensor(&self) -> &str {
        self.0.split('-').next().unwrap_or(&self.0)
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ChannelId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

pub const ACC_SENSOR: &str = "acc";
pub const GYR_SENSOR: &str = "gyr";

/// The six inertial channels in storage order.
pub fn imu_channel_ids() -> Vec<ChannelId> {
    ["acc-x", "acc-y", "acc-z", "gyr-x", "gyr-y", "gyr-z"]
        .into_iter()
        .map(ChannelId::from)
        .collect()
}

/// `k` equal-length channels with unique labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSeries<T> {
    ids: Vec<ChannelId>,
    channels: Vec<Series<T>>,
}

impl<T: Scalar> MultiSeries<T> {
    pub fn new(ids: Vec<ChannelId>, channels: Vec<Series<T>>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::invalid("multi-series needs at least one channel"));
        }
        if ids.len() != channels.len() {
            return Err(Error::invalid(format!(
                "{} channel ids for {} channels",
                ids.len(),
                channels.len()
            )));
        }
        let len = channels[0].len();
        if let Some(bad) = channels.iter().position(|c| c.len() != len) {
            return Err(Error::invalid(format!(
                "channel {} has length {}, expected {len}",
                ids[bad],
                channels[bad].len()
            )));
        }
        for (i, id) in ids.iter().enumerate() {
            if ids[..i].contains(id) {
                return Err(Error::invalid(format!("duplicate channel id {id}")));
            }
        }
        Ok(Self { ids, channels })
    }

    pub fn ids(&self) -> &[ChannelId] {
        &self.ids
    }

    pub fn channels(&self) -> &[Series<T>] {
        &self.channels
    }

    pub fn channel(&self, id: &ChannelId) -> Option<&Series<T>> {
        self.ids.iter().position(|c| c == id).map(|i| &self.channels[i])
    }

    pub fn k(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Restricts to the listed channels, in the listed order.
    pub fn select(&self, subset: &[ChannelId]) -> Result<Self> {
        if subset.is_empty() {
            return Err(Error::invalid("empty channel subset"));
        }
        let channels = subset
            .iter()
            .map(|id| {
                self.channel(id)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("channel {id} not present")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(subset.to_vec(), channels)
    }

    pub(crate) fn ensure_same_channels(&self, other: &Self) -> Result<()> {
        if self.ids != other.ids {
            return Err(Error::invalid(format!(
                "channel mismatch: [{}] vs [{}]",
                join_ids(&self.ids),
                join_ids(&other.ids)
            )));
        }
        Ok(())
    }
}

fn join_ids(ids: &[ChannelId]) -> String {
    ids.iter().map(ChannelId::as_str).collect::<Vec<_>>().join(",")
}

/// Tolerance on the weight sum for floating scalars.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Non-negative per-channel weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<T> {
    weights: Vec<T>,
}

impl<T: Scalar> WeightVector<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weight vector is empty"));
        }
        if weights.iter().any(|w| !w.is_finite_value() || *w < T::zero()) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        let sum: T = weights.iter().copied().sum();
        if (sum.to_f64() - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::invalid(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("weight vector is empty"));
        }
        let w = T::one() / T::from_usize(k);
        Self::new(vec![w; k])
    }

    /// Splits each sensor's share equally across that sensor's channels.
    ///
    /// Sensors absent from `shares` get zero weight; shares are renormalised
    /// over the sensors actually present in `ids`.
    pub fn by_sensor(ids: &[ChannelId], shares: &[(&str, T)]) -> Result<Self> {
        let present: Vec<(&str, T, usize)> = shares
            .iter()
            .map(|&(sensor, share)| {
                let n = ids.iter().filter(|id| id.sensor() == sensor).count();
                (sensor, share, n)
            })
            .filter(|&(_, _, n)| n > 0)
            .collect();
        let total: T = present.iter().map(|&(_, s, _)| s).sum();
        if present.is_empty() || total <= T::zero() {
            return Err(Error::invalid("no weighted sensor present in channel set"));
        }
        let weights = ids
            .iter()
            .map(|id| {
                present
                    .iter()
                    .find(|(sensor, _, _)| *sensor == id.sensor())
                    .map(|&(_, share, n)| share / total / T::from_usize(n))
                    .unwrap_or_else(T::zero)
            })
            .collect();
        Self::new(weights)
    }

    /// Accelerometer 0.6, gyroscope 0.4, uniform within each sensor.
    pub fn default_imu(ids: &[ChannelId]) -> Result<Self> {
        Self::by_sensor(
            ids,
            &[
                (ACC_SENSOR, T::lit(0.6)),
                (GYR_SENSOR, T::lit(0.4)),
            ],
        )
    }

    pub fn as_slice(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
