//! Error rates, threshold sweeps, and the trial protocols behind them.
//!
//! Trials follow the profile workflow. For each user the template is the
//! medoid of their signals. A genuine trial holds one signal out, re-picks
//! the medoid from the rest, and scores the held-out signal against it. An
//! impostor trial scores every signal of every other user against the
//! user's full template.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::datagen::ScenarioKind;
use crate::dtw::{weighted_sum, Dtw};
use crate::error::{Error, Result};
use crate::profile::{authenticate_with, medoid_index, Profile};
use crate::scalar::Scalar;
use crate::series::{ChannelId, WeightVector, ACC_SENSOR, GYR_SENSOR};
use crate::signal::PickUpSignal;

/// One scored trial.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDistance<T> {
    pub distance: T,
    pub genuine: bool,
    pub attack_kind: Option<ScenarioKind>,
    pub channel_subset: String,
}

impl<T: Scalar> LabeledDistance<T> {
    pub fn genuine(distance: T) -> Self {
        Self {
            distance,
            genuine: true,
            attack_kind: None,
            channel_subset: String::new(),
        }
    }

    pub fn impostor(distance: T) -> Self {
        Self {
            genuine: false,
            ..Self::genuine(distance)
        }
    }
}

/// FAR and FRR at one threshold. A rate is `None` when its class is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    pub far: Option<f64>,
    pub frr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Counts {
    genuine: usize,
    genuine_rejected: usize,
    impostor: usize,
    impostor_accepted: usize,
}

impl Counts {
    fn at<T: Scalar>(distances: &[LabeledDistance<T>], theta: T) -> Self {
        let mut c = Counts::default();
        for d in distances {
            let accepted = d.distance <= theta;
            if d.genuine {
                c.genuine += 1;
                c.genuine_rejected += usize::from(!accepted);
            } else {
                c.impostor += 1;
                c.impostor_accepted += usize::from(accepted);
            }
        }
        c
    }

    fn rates(&self) -> ErrorRates {
        ErrorRates {
            far: ratio(self.impostor_accepted, self.impostor),
            frr: ratio(self.genuine_rejected, self.genuine),
        }
    }

    fn accuracy(&self) -> Option<f64> {
        let total = self.genuine + self.impostor;
        let correct = (self.genuine - self.genuine_rejected) + (self.impostor - self.impostor_accepted);
        ratio(correct, total)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// FAR = impostors with `d <= theta` over impostors; FRR = genuine trials
/// with `d > theta` over genuine trials.
pub fn far_frr<T: Scalar>(distances: &[LabeledDistance<T>], theta: T) -> ErrorRates {
    Counts::at(distances, theta).rates()
}

/// Correctly classified trials over all trials; `None` when there are none.
pub fn accuracy<T: Scalar>(distances: &[LabeledDistance<T>], theta: T) -> Option<f64> {
    Counts::at(distances, theta).accuracy()
}

/// Rates at a chosen operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint<T> {
    pub theta: T,
    pub far: f64,
    pub frr: f64,
    pub accuracy: f64,
}

/// Per-tier attack curve against the shared genuine FRR curve.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackCurve<T> {
    pub far: Vec<f64>,
    /// Largest grid threshold at which no attempt of this tier is accepted.
    pub max_zero_far_theta: Option<T>,
    /// FRR at `max_zero_far_theta`.
    pub frr_at_zero_far: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<T> {
    pub thresholds: Vec<T>,
    pub far: Vec<f64>,
    pub frr: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub chosen_theta: T,
    pub per_attack: BTreeMap<ScenarioKind, AttackCurve<T>>,
    pub per_subset: BTreeMap<String, OperatingPoint<T>>,
}

impl<T: Scalar> EvalReport<T> {
    pub fn operating_point(&self, theta: T) -> Option<OperatingPoint<T>> {
        let i = self.thresholds.iter().position(|&t| t == theta)?;
        Some(OperatingPoint {
            theta,
            far: self.far[i],
            frr: self.frr[i],
            accuracy: self.accuracy[i],
        })
    }

    pub fn chosen(&self) -> OperatingPoint<T> {
        self.operating_point(self.chosen_theta)
            .expect("chosen threshold is a grid point")
    }
}

fn sorted_class<T: Scalar>(distances: &[LabeledDistance<T>], genuine: bool) -> Vec<T> {
    let mut v: Vec<T> = distances
        .iter()
        .filter(|d| d.genuine == genuine)
        .map(|d| d.distance)
        .collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    v
}

/// Number of entries `<= theta` in a sorted slice.
fn count_le<T: Scalar>(sorted: &[T], theta: T) -> usize {
    sorted.partition_point(|&d| d <= theta)
}

fn check_grid<T: Scalar>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("threshold grid is empty"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("threshold grid must be strictly ascending"));
    }
    Ok(())
}

/// FAR, FRR and accuracy over `grid`; the chosen threshold uses
/// [`ThresholdPolicy::MinFarMaxAccuracy`].
///
/// Both classes must be present.
pub fn sweep<T: Scalar>(distances: &[LabeledDistance<T>], grid: &[T]) -> Result<EvalReport<T>> {
    check_grid(grid)?;
    let genuine = sorted_class(distances, true);
    let impostor = sorted_class(distances, false);
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::invalid("sweep needs both genuine and impostor trials"));
    }
    let (ng, ni) = (genuine.len(), impostor.len());
    let mut far = Vec::with_capacity(grid.len());
    let mut frr = Vec::with_capacity(grid.len());
    let mut acc = Vec::with_capacity(grid.len());
    for &theta in grid {
        let gen_acc = count_le(&genuine, theta);
        let imp_acc = count_le(&impostor, theta);
        far.push(imp_acc as f64 / ni as f64);
        frr.push((ng - gen_acc) as f64 / ng as f64);
        acc.push((gen_acc + ni - imp_acc) as f64 / (ng + ni) as f64);
    }
    let mut report = EvalReport {
        thresholds: grid.to_vec(),
        far,
        frr,
        accuracy: acc,
        chosen_theta: grid[0],
        per_attack: BTreeMap::new(),
        per_subset: BTreeMap::new(),
    };
    report.chosen_theta = choose_threshold(&report, ThresholdPolicy::MinFarMaxAccuracy);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy {
    /// Among grid points with the minimum FAR, the most accurate; ties go
    /// to the smaller threshold.
    MinFarMaxAccuracy,
    /// Smallest threshold whose FRR is at most the target.
    TargetFrr(f64),
    /// Threshold minimising `|FAR - FRR|`; ties go to the smaller one.
    Eer,
}

pub fn choose_threshold<T: Scalar>(report: &EvalReport<T>, policy: ThresholdPolicy) -> T {
    let n = report.thresholds.len();
    let idx = match policy {
        ThresholdPolicy::MinFarMaxAccuracy => {
            let min_far = report.far.iter().copied().fold(f64::INFINITY, f64::min);
            (0..n)
                .filter(|&i| report.far[i] == min_far)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if report.accuracy[i] <= report.accuracy[b] => Some(b),
                    _ => Some(i),
                })
                .unwrap_or(0)
        }
        ThresholdPolicy::TargetFrr(target) => (0..n).find(|&i| report.frr[i] <= target).unwrap_or(n - 1),
        ThresholdPolicy::Eer => (0..n)
            .fold(None, |best: Option<(usize, f64)>, i| {
                let gap = (report.far[i] - report.frr[i]).abs();
                match best {
                    Some((_, g)) if gap >= g => best,
                    _ => Some((i, gap)),
                }
            })
            .map_or(0, |(i, _)| i),
    };
    report.thresholds[idx]
}

/// Nearest-rank percentile of `values`, `q` in [0, 1].
pub fn percentile<T: Scalar>(values: &[T], q: f64) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let rank = ((q.clamp(0.0, 1.0) * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

pub const DEFAULT_GRID_POINTS: usize = 200;

/// `points` evenly spaced thresholds from 0 to `top`.
pub fn linear_grid<T: Scalar>(top: T, points: usize) -> Vec<T> {
    let points = points.max(2);
    let top = if top > T::zero() { top } else { T::one() };
    (0..points)
        .map(|i| top * T::from_usize(i) / T::from_usize(points - 1))
        .collect()
}

/// 200 points spanning `[0, p99]` of all distances.
pub fn default_grid<T: Scalar>(distances: &[LabeledDistance<T>]) -> Vec<T> {
    let all: Vec<T> = distances.iter().map(|d| d.distance).collect();
    linear_grid(percentile(&all, 0.99).unwrap_or_else(T::one), DEFAULT_GRID_POINTS)
}

/// Fraction of unlocks that no longer need explicit authentication:
/// `detection_ratio * (1 - frr)`.
pub fn unlock_reduction(detection_ratio: f64, frr: f64) -> Result<f64> {
    for (name, v) in [("detection ratio", detection_ratio), ("frr", frr)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} {v} outside [0, 1]")));
        }
    }
    Ok(detection_ratio * (1.0 - frr))
}

/// Signals grouped by user.
#[derive(Debug, Clone)]
pub struct UserSignals<T> {
    pub user_id: String,
    pub signals: Vec<PickUpSignal<T>>,
}

/// Groups signals by their `user_id`, preserving first-seen order.
pub fn group_by_user<T: Scalar>(signals: Vec<PickUpSignal<T>>) -> Result<Vec<UserSignals<T>>> {
    let mut order: Vec<UserSignals<T>> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for s in signals {
        let user = s
            .user_id
            .clone()
            .ok_or_else(|| Error::invalid("signal without user label"))?;
        let i = *index.entry(user.clone()).or_insert_with(|| {
            order.push(UserSignals {
                user_id: user,
                signals: Vec::new(),
            });
            order.len() - 1
        });
        order[i].signals.push(s);
    }
    Ok(order)
}

/// Per-user separation statistics, the heat-map analogue.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSeparation<T> {
    pub user_id: String,
    /// Mean distance from the user's template to their other signals.
    pub intra_mean: T,
    /// Mean distance from the user's template to other users' signals;
    /// zero when there are no other users.
    pub inter_mean: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trials<T> {
    pub distances: Vec<LabeledDistance<T>>,
    /// Index into each user's signals of their full-data template.
    pub templates: Vec<usize>,
    pub separation: Vec<UserSeparation<T>>,
}

impl<T: Scalar> Trials<T> {
    pub fn genuine_distances(&self) -> Vec<T> {
        self.distances.iter().filter(|d| d.genuine).map(|d| d.distance).collect()
    }
}

/// Per-channel DTW distances with caching, so trials can be re-scored
/// under many weight vectors for the price of one set of alignments.
pub struct TrialEngine<'a, T> {
    users: &'a [UserSignals<T>],
    dtw: Dtw,
    ids: Vec<ChannelId>,
    /// `intra[u][i][j]` per-channel distances, `i > j`.
    intra: Vec<Vec<Vec<Vec<T>>>>,
    /// `(user, template index)` -> per-channel distances to every signal of
    /// every other user, in user order.
    cross: HashMap<(usize, usize), Vec<Vec<T>>>,
}

impl<'a, T: Scalar> TrialEngine<'a, T> {
    pub fn new(users: &'a [UserSignals<T>], dtw: Dtw) -> Result<Self> {
        let first = users
            .iter()
            .flat_map(|u| u.signals.first())
            .next()
            .ok_or_else(|| Error::invalid("no signals to evaluate"))?;
        let ids = first.signal.ids().to_vec();
        for s in users.iter().flat_map(|u| &u.signals) {
            if s.signal.ids() != ids.as_slice() {
                return Err(Error::invalid("signals do not share a channel set"));
            }
        }
        let intra = users
            .iter()
            .map(|u| {
                let n = u.signals.len();
                let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
                let flat: Vec<Vec<T>> = pairs
                    .par_iter()
                    .map(|&(i, j)| per_channel(&dtw, &u.signals[i], &u.signals[j]))
                    .collect();
                let mut rows: Vec<Vec<Vec<T>>> = (0..n).map(Vec::with_capacity).collect();
                for ((i, _), d) in pairs.into_iter().zip(flat) {
                    rows[i].push(d);
                }
                rows
            })
            .collect();
        Ok(Self {
            users,
            dtw,
            ids,
            intra,
            cross: HashMap::new(),
        })
    }

    pub fn channel_ids(&self) -> &[ChannelId] {
        &self.ids
    }

    fn intra_weighted(&self, u: usize, w: &[T]) -> Vec<Vec<T>> {
        let n = self.users[u].signals.len();
        let mut d = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in 0..i {
                let v = weighted_sum(&self.intra[u][i][j], w);
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        d
    }

    fn cross_rows(&mut self, u: usize, template: usize) -> &Vec<Vec<T>> {
        let users = self.users;
        let dtw = self.dtw;
        self.cross.entry((u, template)).or_insert_with(|| {
            let t = &users[u].signals[template];
            let others: Vec<&PickUpSignal<T>> = users
                .iter()
                .enumerate()
                .filter(|&(v, _)| v != u)
                .flat_map(|(_, o)| &o.signals)
                .collect();
            others.par_iter().map(|s| per_channel(&dtw, t, s)).collect()
        })
    }

    /// Scores every genuine and impostor trial under `weights`.
    pub fn trials(&mut self, weights: &WeightVector<T>, subset_label: &str) -> Result<Trials<T>> {
        if weights.len() != self.ids.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} channels",
                weights.len(),
                self.ids.len()
            )));
        }
        let w = weights.as_slice();
        let mut distances = Vec::new();
        let mut templates = Vec::new();
        let mut separation = Vec::new();
        for u in 0..self.users.len() {
            let d = self.intra_weighted(u, w);
            let n = d.len();
            let template = medoid_index(&d).expect("user has signals");
            templates.push(template);
            if n >= 2 {
                for held in 0..n {
                    let loo = (0..n)
                        .filter(|&j| j != held)
                        .map(|j| (j, (0..n).filter(|&k| k != held).map(|k| d[j][k]).sum::<T>()))
                        .fold(None, |best: Option<(usize, T)>, (j, s)| match best {
                            Some((_, b)) if !(s < b) => best,
                            _ => Some((j, s)),
                        })
                        .map(|(j, _)| j)
                        .expect("n >= 2");
                    distances.push(labeled(d[held][loo], true, subset_label));
                }
            }
            let intra_mean = if n >= 2 {
                (0..n).filter(|&i| i != template).map(|i| d[template][i]).sum::<T>() / T::from_usize(n - 1)
            } else {
                T::zero()
            };
            let rows = self.cross_rows(u, template);
            let impostor: Vec<T> = rows.iter().map(|pc| weighted_sum(pc, w)).collect();
            let inter_mean = impostor.iter().copied().sum::<T>() / T::from_usize(impostor.len().max(1));
            distances.extend(impostor.into_iter().map(|v| labeled(v, false, subset_label)));
            separation.push(UserSeparation {
                user_id: self.users[u].user_id.clone(),
                intra_mean,
                inter_mean,
            });
        }
        Ok(Trials {
            distances,
            templates,
            separation,
        })
    }
}

fn labeled<T: Scalar>(distance: T, genuine: bool, subset: &str) -> LabeledDistance<T> {
    LabeledDistance {
        distance,
        genuine,
        attack_kind: None,
        channel_subset: subset.to_string(),
    }
}

fn per_channel<T: Scalar>(dtw: &Dtw, a: &PickUpSignal<T>, b: &PickUpSignal<T>) -> Vec<T> {
    a.signal
        .channels()
        .iter()
        .zip(b.signal.channels())
        .map(|(x, y)| dtw.distance_1d(x, y, false).expect("non-empty channels").distance)
        .collect()
}

/// Convenience: genuine/impostor trials for one weight vector.
pub fn build_trials<T: Scalar>(users: &[UserSignals<T>], weights: &WeightVector<T>, dtw: Dtw) -> Result<Trials<T>> {
    let label = "all";
    TrialEngine::new(users, dtw)?.trials(weights, label)
}

/// An impersonation attempt against a named victim.
#[derive(Debug, Clone)]
pub struct AttackSample<T> {
    pub signal: PickUpSignal<T>,
    pub target: String,
    pub kind: ScenarioKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport<T> {
    pub thresholds: Vec<T>,
    /// Shared across tiers: depends only on genuine trials.
    pub frr: Vec<f64>,
    pub per_attack: BTreeMap<ScenarioKind, AttackCurve<T>>,
    /// The scored attempts.
    pub distances: Vec<LabeledDistance<T>>,
}

impl<T: Scalar> AttackReport<T> {
    /// Largest grid threshold at which every tier has zero FAR, with its FRR.
    pub fn zero_far_all(&self) -> Option<(T, f64)> {
        (0..self.thresholds.len())
            .rev()
            .find(|&i| self.per_attack.values().all(|c| c.far[i] == 0.0))
            .map(|i| (self.thresholds[i], self.frr[i]))
    }
}

/// Scores attack attempts against their victims' profiles and builds one
/// FAR curve per tier, sharing the FRR curve from `genuine` distances.
pub fn attack_eval<T: Scalar>(
    victims: &[Profile<T>],
    attacks: &[AttackSample<T>],
    genuine: &[T],
    grid: &[T],
    dtw: &Dtw,
) -> Result<AttackReport<T>> {
    check_grid(grid)?;
    if genuine.is_empty() {
        return Err(Error::invalid("attack evaluation needs genuine distances for the FRR curve"));
    }
    let by_user: HashMap<&str, &Profile<T>> = victims.iter().map(|p| (p.user_id.as_str(), p)).collect();
    for a in attacks {
        if !a.kind.is_attack() {
            return Err(Error::invalid(format!("attack sample labelled {}", a.kind)));
        }
        if !by_user.contains_key(a.target.as_str()) {
            return Err(Error::invalid(format!("unknown attack target {:?}", a.target)));
        }
    }
    let distances: Vec<LabeledDistance<T>> = attacks
        .par_iter()
        .map(|a| {
            let d = authenticate_with(dtw, by_user[a.target.as_str()], &a.signal)?;
            Ok(LabeledDistance {
                distance: d.distance,
                genuine: false,
                attack_kind: Some(a.kind),
                channel_subset: "all".into(),
            })
        })
        .collect::<Result<_>>()?;

    let mut gen = genuine.to_vec();
    gen.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let frr: Vec<f64> = grid
        .iter()
        .map(|&t| (gen.len() - count_le(&gen, t)) as f64 / gen.len() as f64)
        .collect();

    let mut per_attack = BTreeMap::new();
    for kind in ScenarioKind::ATTACKS {
        let mut d: Vec<T> = distances
            .iter()
            .filter(|x| x.attack_kind == Some(kind))
            .map(|x| x.distance)
            .collect();
        if d.is_empty() {
            continue;
        }
        d.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let far: Vec<f64> = grid.iter().map(|&t| count_le(&d, t) as f64 / d.len() as f64).collect();
        let zero = (0..grid.len()).rev().find(|&i| far[i] == 0.0);
        per_attack.insert(
            kind,
            AttackCurve {
                far,
                max_zero_far_theta: zero.map(|i| grid[i]),
                frr_at_zero_far: zero.map(|i| frr[i]),
            },
        );
    }
    Ok(AttackReport {
        thresholds: grid.to_vec(),
        frr,
        per_attack,
        distances,
    })
}

/// Channels of a subset label such as `acc`, `gyr`, `acc+gyr`.
pub fn subset_channels(label: &str, available: &[ChannelId]) -> Result<Vec<ChannelId>> {
    let sensors: Vec<&str> = label.split('+').map(str::trim).filter(|s| !s.is_empty()).collect();
    if sensors.is_empty() {
        return Err(Error::invalid("empty channel subset"));
    }
    let chosen: Vec<ChannelId> = available
        .iter()
        .filter(|id| sensors.contains(&id.sensor()))
        .cloned()
        .collect();
    for s in &sensors {
        if !available.iter().any(|id| id.sensor() == *s) {
            return Err(Error::invalid(format!("sensor {s:?} not present in signals")));
        }
    }
    Ok(chosen)
}

/// Weights over the full channel list that keep only `label`'s sensors,
/// splitting by `shares` across sensors and uniformly within each.
pub fn subset_weights<T: Scalar>(
    label: &str,
    available: &[ChannelId],
    shares: &[(&str, T)],
) -> Result<WeightVector<T>> {
    let chosen = subset_channels(label, available)?;
    let sensors: Vec<&str> = chosen.iter().map(ChannelId::sensor).collect();
    let mut kept: Vec<(&str, T)> = shares.iter().copied().filter(|(s, _)| sensors.contains(s)).collect();
    for s in &sensors {
        if !kept.iter().any(|(k, _)| k == s) {
            // sensors without a configured share get the mean share
            kept.push((s, T::one()));
        }
    }
    WeightVector::by_sensor(available, &kept)
}

/// Default sensor shares: accelerometer 0.6, gyroscope 0.4.
pub fn default_shares<T: Scalar>() -> Vec<(&'static str, T)> {
    vec![(ACC_SENSOR, T::lit(0.6)), (GYR_SENSOR, T::lit(0.4))]
}

/// Operating point per subset at that subset's own chosen threshold.
///
/// Restricting to a subset is realised as zero weight on the excluded
/// channels, which yields exactly the distance of the reduced signal.
pub fn subset_ablation<T: Scalar>(
    engine: &mut TrialEngine<'_, T>,
    subsets: &[&str],
    shares: &[(&str, T)],
    grid: Option<&[T]>,
) -> Result<BTreeMap<String, (OperatingPoint<T>, EvalReport<T>)>> {
    let ids = engine.channel_ids().to_vec();
    let mut out = BTreeMap::new();
    for &label in subsets {
        let w = subset_weights(label, &ids, shares)?;
        let trials = engine.trials(&w, label)?;
        let g = grid.map_or_else(|| default_grid(&trials.distances), <[T]>::to_vec);
        let report = sweep(&trials.distances, &g)?;
        out.insert(label.to_string(), (report.chosen(), report));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSearch<T> {
    pub best: WeightVector<T>,
    pub best_acc_share: f64,
    /// `(accelerometer share, accuracy at chosen threshold)`.
    pub surface: Vec<(f64, f64)>,
}

/// Grid search over the accelerometer/gyroscope split from 0.1 to 0.9,
/// uniform within each sensor. Ties go to the split closest to even.
pub fn weight_search<T: Scalar>(engine: &mut TrialEngine<'_, T>, grid_step: f64) -> Result<WeightSearch<T>> {
    if !(grid_step > 0.0 && grid_step <= 0.8) {
        return Err(Error::invalid("grid step must lie in (0, 0.8]"));
    }
    let steps = 0.8 / grid_step;
    if (steps - steps.round()).abs() > 1e-9 {
        return Err(Error::invalid(format!("grid step {grid_step} does not divide [0.1, 0.9]")));
    }
    let ids = engine.channel_ids().to_vec();
    let mut surface = Vec::new();
    let mut best: Option<(f64, f64, WeightVector<T>)> = None;
    for s in 0..=(steps.round() as usize) {
        let acc_share = ((0.1 + s as f64 * grid_step) * 1e9).round() / 1e9;
        let w = WeightVector::by_sensor(
            &ids,
            &[(ACC_SENSOR, T::lit(acc_share)), (GYR_SENSOR, T::lit(1.0 - acc_share))],
        )?;
        let trials = engine.trials(&w, "acc+gyr")?;
        let report = sweep(&trials.distances, &default_grid(&trials.distances))?;
        let acc = report.chosen().accuracy;
        surface.push((acc_share, acc));
        let better = match &best {
            None => true,
            Some((b_acc, b_share, _)) => {
                acc > *b_acc || (acc == *b_acc && (acc_share - 0.5).abs() < (b_share - 0.5).abs())
            }
        };
        if better {
            best = Some((acc, acc_share, w));
        }
    }
    let (_, best_acc_share, best) = best.expect("at least one grid point");
    Ok(WeightSearch {
        best,
        best_acc_share,
        surface,
    })
}

/// Tab-separated curve: `theta far frr accuracy`.
pub fn curve_tsv<T: Scalar>(report: &EvalReport<T>) -> String {
    let mut out = String::from("theta\tfar\tfrr\taccuracy\n");
    for i in 0..report.thresholds.len() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            report.thresholds[i].to_f64(),
            report.far[i],
            report.frr[i],
            report.accuracy[i]
        );
    }
    out
}

/// Tab-separated attack curves: `theta frr far_RA far_CAA far_EA`.
pub fn attack_tsv<T: Scalar>(report: &AttackReport<T>) -> String {
    let kinds: Vec<&ScenarioKind> = report.per_attack.keys().collect();
    let mut out = String::from("theta\tfrr");
    for k in &kinds {
        let _ = write!(out, "\tfar_{k}");
    }
    out.push('\n');
    for i in 0..report.thresholds.len() {
        let _ = write!(out, "{}\t{}", report.thresholds[i].to_f64(), report.frr[i]);
        for k in &kinds {
            let _ = write!(out, "\t{}", report.per_attack[k].far[i]);
        }
        out.push('\n');
    }
    out
}
