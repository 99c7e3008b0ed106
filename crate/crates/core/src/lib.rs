//! Implicit smartphone authentication from the pick-up motion.
//!
//! A pick-up is the accelerometer and gyroscope trace between the phone
//! leaving a stable resting state and the wake-up press. Signals are
//! compared against a stored template with a weighted multi-channel
//! dynamic time warping distance and accepted below a threshold.
//!
//! Everything numeric is generic over [`Scalar`]; the aliases at the bottom
//! of this file fix it to `f64` for everyday use.

pub mod datagen;
pub mod dtw;
pub mod error;
pub mod evaluation;
pub mod profile;
pub mod scalar;
pub mod series;
pub mod signal;
pub mod trace_io;

pub use dtw::{align, dtw_1d, dtw_multi_baseline, dtw_multi_weighted, local_distance, Dtw, DtwResult, WarpingPath};
pub use error::{Error, Result};
pub use profile::{
    authenticate, enroll, post_authenticate, update, AuthDecision, ExplicitAuthOutcome, Profile, UpdateRule,
};
pub use scalar::Scalar;
pub use series::{imu_channel_ids, ChannelId, MultiSeries, Series, WeightVector};
pub use signal::{
    backtrack_begin, detect_triggers, detection_stats, extract_pickups, is_flat, DetectionStats, ExtractParams,
    FlatParams, PickUpSignal, SensorSample, SensorTrace,
};

/// Exact rational scalar used by the oracle tests.
pub type Exact = num_rational::Ratio<i64>;

pub type Series64 = Series<f64>;
pub type MultiSeries64 = MultiSeries<f64>;
pub type WeightVector64 = WeightVector<f64>;
pub type PickUpSignal64 = PickUpSignal<f64>;
pub type SensorTrace64 = SensorTrace<f64>;
pub type Profile64 = Profile<f64>;
pub type AuthDecision64 = AuthDecision<f64>;

pub type Series32 = Series<f32>;
pub type MultiSeries32 = MultiSeries<f32>;
pub type ExactSeries = Series<Exact>;
pub type ExactMultiSeries = MultiSeries<Exact>;
