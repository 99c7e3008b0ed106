//! Dynamic time warping over single channels and weighted channel bundles.
//!
//! The local cost is the absolute difference and the step pattern is the
//! classical one: diagonal, vertical (advance in `x`), horizontal (advance
//! in `y`). Distances are path-length normalised: the dynamic program
//! minimises the cumulative cost, then divides by the length of the path
//! that achieves it. This is the mean cost along the optimal-sum path, not
//! the minimum over paths of the mean cost.
//!
//! When several predecessors tie, the diagonal wins, then vertical, then
//! horizontal. The same rule drives both the forward pass and the
//! backtrace, so the recovered path always has the length used for
//! normalisation.
//!
//! Multi-channel distances align each channel independently; channels may
//! warp differently.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{MultiSeries, Series, WeightVector};

/// Absolute difference.
#[inline]
pub fn local_distance<T: Scalar>(a: T, b: T) -> T {
    (a - b).abs()
}

/// Alignment between `x` (length `n`) and `y` (length `m`) as 0-based index
/// pairs. Starts at `(0, 0)`, ends at `(n - 1, m - 1)`, and every step
/// advances each index by 0 or 1 but never neither.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpingPath {
    pairs: Vec<(usize, usize)>,
}

impl WarpingPath {
    /// Validates `pairs` against the sequence lengths.
    pub fn new(pairs: Vec<(usize, usize)>, n: usize, m: usize) -> Result<Self> {
        let path = Self { pairs };
        path.validate(n, m)?;
        Ok(path)
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        let (Some(&first), Some(&last)) = (self.pairs.first(), self.pairs.last()) else {
            return Err(Error::invalid("warping path is empty"));
        };
        if n == 0 || m == 0 {
            return Err(Error::invalid("warping path over empty sequence"));
        }
        if first != (0, 0) {
            return Err(Error::invalid(format!("path starts at {first:?}, not (0, 0)")));
        }
        if last != (n - 1, m - 1) {
            return Err(Error::invalid(format!(
                "path ends at {last:?}, expected ({}, {})",
                n - 1,
                m - 1
            )));
        }
        for (l, w) in self.pairs.windows(2).enumerate() {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            if di > 1 || dj > 1 || (di == 0 && dj == 0) {
                return Err(Error::invalid(format!(
                    "invalid step {:?} -> {:?} at position {}",
                    w[0],
                    w[1],
                    l + 1
                )));
            }
        }
        Ok(())
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sum of local distances along the path.
    pub fn cost<T: Scalar>(&self, x: &[T], y: &[T]) -> T {
        self.pairs
            .iter()
            .map(|&(i, j)| local_distance(x[i], y[j]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult<T> {
    /// Normalised distance (cumulative cost over path length), or the
    /// channel combination for multi-channel calls.
    pub distance: T,
    /// Unnormalised minimum cumulative cost. Single-channel only; zero for
    /// multi-channel results.
    pub cumulative_cost: T,
    /// Length of the minimising path. Single-channel only.
    pub path_len: usize,
    /// Unweighted per-channel distances. Multi-channel only.
    pub per_channel: Vec<T>,
    pub path: Option<WarpingPath>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Step {
    Start,
    Diagonal,
    Vertical,
    Horizontal,
}

/// DTW engine. The default is unconstrained; [`Dtw::with_band`] enables a
/// Sakoe-Chiba band.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Dtw {
    band: Option<usize>,
}

impl Dtw {
    pub fn new() -> Self {
        Self::default()
    }

    /// Restricts cells to `|i - j| <= radius`. The radius is widened to
    /// `|n - m|` when needed so the end cell stays reachable.
    pub fn with_band(mut self, radius: usize) -> Self {
        self.band = Some(radius);
        self
    }

    pub fn band(&self) -> Option<usize> {
        self.band
    }

    fn column_range(&self, i: usize, n: usize, m: usize) -> (usize, usize) {
        match self.band {
            None => (0, m),
            Some(r) => {
                let r = r.max(n.abs_diff(m));
                (i.saturating_sub(r), (i + r + 1).min(m))
            }
        }
    }

    pub fn distance_1d<T: Scalar>(
        &self,
        x: &Series<T>,
        y: &Series<T>,
        recover_path: bool,
    ) -> Result<DtwResult<T>> {
        self.raw_1d(x.values(), y.values(), recover_path)
    }

    /// Same as [`Dtw::distance_1d`] over raw slices; non-finite values are
    /// the caller's responsibility.
    pub fn raw_1d<T: Scalar>(&self, x: &[T], y: &[T], recover_path: bool) -> Result<DtwResult<T>> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::invalid("dtw on empty series"));
        }
        let (cost, len, path) = if recover_path {
            let (cost, len, path) = self.full_matrix(x, y);
            (cost, len, Some(path))
        } else {
            let (cost, len) = self.rolling(x, y);
            (cost, len, None)
        };
        Ok(DtwResult {
            distance: cost / T::from_usize(len),
            cumulative_cost: cost,
            path_len: len,
            per_channel: Vec::new(),
            path,
        })
    }

    /// Picks the predecessor under the diagonal > vertical > horizontal
    /// tie-break. Each candidate is `(cost, len)` or `None` when outside
    /// the grid or band.
    #[inline]
    fn best<T: Scalar>(
        diag: Option<(T, u32)>,
        vert: Option<(T, u32)>,
        horiz: Option<(T, u32)>,
    ) -> Option<(T, u32, Step)> {
        let mut best = diag.map(|(c, l)| (c, l, Step::Diagonal));
        for (cand, step) in [(vert, Step::Vertical), (horiz, Step::Horizontal)] {
            if let Some((c, l)) = cand {
                match best {
                    Some((bc, _, _)) if !(c < bc) => {}
                    _ => best = Some((c, l, step)),
                }
            }
        }
        best
    }

    fn rolling<T: Scalar>(&self, x: &[T], y: &[T]) -> (T, usize) {
        if self.band.is_none() {
            return Self::rolling_free(x, y);
        }
        let (n, m) = (x.len(), y.len());
        let mut prev: Vec<Option<(T, u32)>> = vec![None; m];
        let mut cur: Vec<Option<(T, u32)>> = vec![None; m];
        for i in 0..n {
            let (lo, hi) = self.column_range(i, n, m);
            cur.iter_mut().for_each(|c| *c = None);
            for j in lo..hi {
                let d = local_distance(x[i], y[j]);
                if i == 0 && j == 0 {
                    cur[0] = Some((d, 1));
                    continue;
                }
                let diag = if i > 0 && j > 0 { prev[j - 1] } else { None };
                let vert = if i > 0 { prev[j] } else { None };
                let horiz = if j > 0 { cur[j - 1] } else { None };
                cur[j] = Self::best(diag, vert, horiz).map(|(c, l, _)| (c + d, l + 1));
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        let (cost, len) = prev[m - 1].expect("end cell reachable");
        (cost, len as usize)
    }

    /// Unbanded two-row DP. Every cell is reachable, so the edges are
    /// handled explicitly and the interior needs no reachability checks.
    fn rolling_free<T: Scalar>(x: &[T], y: &[T]) -> (T, usize) {
        let m = y.len();
        let mut prev_c: Vec<T> = Vec::with_capacity(m);
        let mut prev_l: Vec<u32> = Vec::with_capacity(m);
        let (mut c, mut l) = (T::zero(), 0u32);
        for &yj in y {
            c = c + local_distance(x[0], yj);
            l += 1;
            prev_c.push(c);
            prev_l.push(l);
        }
        let mut cur_c = prev_c.clone();
        let mut cur_l = prev_l.clone();
        for &xi in &x[1..] {
            cur_c[0] = prev_c[0] + local_distance(xi, y[0]);
            cur_l[0] = prev_l[0] + 1;
            for j in 1..m {
                let (mut bc, mut bl) = (prev_c[j - 1], prev_l[j - 1]);
                if prev_c[j] < bc {
                    bc = prev_c[j];
                    bl = prev_l[j];
                }
                if cur_c[j - 1] < bc {
                    bc = cur_c[j - 1];
                    bl = cur_l[j - 1];
                }
                cur_c[j] = bc + local_distance(xi, y[j]);
                cur_l[j] = bl + 1;
            }
            std::mem::swap(&mut prev_c, &mut cur_c);
            std::mem::swap(&mut prev_l, &mut cur_l);
        }
        (prev_c[m - 1], prev_l[m - 1] as usize)
    }

    fn full_matrix<T: Scalar>(&self, x: &[T], y: &[T]) -> (T, usize, WarpingPath) {
        let (n, m) = (x.len(), y.len());
        let mut cells: Vec<Option<(T, u32)>> = vec![None; n * m];
        let mut steps = vec![Step::Start; n * m];
        for i in 0..n {
            let (lo, hi) = self.column_range(i, n, m);
            for j in lo..hi {
                let d = local_distance(x[i], y[j]);
                let at = i * m + j;
                if i == 0 && j == 0 {
                    cells[at] = Some((d, 1));
                    continue;
                }
                let diag = if i > 0 && j > 0 { cells[at - m - 1] } else { None };
                let vert = if i > 0 { cells[at - m] } else { None };
                let horiz = if j > 0 { cells[at - 1] } else { None };
                if let Some((c, l, step)) = Self::best(diag, vert, horiz) {
                    cells[at] = Some((c + d, l + 1));
                    steps[at] = step;
                }
            }
        }
        let (cost, len) = cells[n * m - 1].expect("end cell reachable");
        let mut pairs = Vec::with_capacity(len as usize);
        let (mut i, mut j) = (n - 1, m - 1);
        loop {
            pairs.push((i, j));
            match steps[i * m + j] {
                Step::Start => break,
                Step::Diagonal => {
                    i -= 1;
                    j -= 1;
                }
                Step::Vertical => i -= 1,
                Step::Horizontal => j -= 1,
            }
        }
        pairs.reverse();
        debug_assert_eq!(pairs.len(), len as usize);
        (cost, len as usize, WarpingPath { pairs })
    }

    fn per_channel<T: Scalar>(&self, x: &MultiSeries<T>, y: &MultiSeries<T>) -> Result<Vec<T>> {
        x.ensure_same_channels(y)?;
        x.channels()
            .iter()
            .zip(y.channels())
            .map(|(a, b)| Ok(self.distance_1d(a, b, false)?.distance))
            .collect()
    }

    /// Unweighted mean of per-channel distances.
    pub fn multi_baseline<T: Scalar>(
        &self,
        x: &MultiSeries<T>,
        y: &MultiSeries<T>,
    ) -> Result<DtwResult<T>> {
        let per_channel = self.per_channel(x, y)?;
        let sum: T = per_channel.iter().copied().sum();
        Ok(multi_result(sum / T::from_usize(per_channel.len()), per_channel))
    }

    /// `sum_i w_i * dtw_1d(x_i, y_i)`.
    pub fn multi_weighted<T: Scalar>(
        &self,
        x: &MultiSeries<T>,
        y: &MultiSeries<T>,
        weights: &WeightVector<T>,
    ) -> Result<DtwResult<T>> {
        if weights.len() != x.k() {
            return Err(Error::invalid(format!(
                "{} weights for {} channels",
                weights.len(),
                x.k()
            )));
        }
        let per_channel = self.per_channel(x, y)?;
        Ok(multi_result(weighted_sum(&per_channel, weights.as_slice()), per_channel))
    }
}

/// `sum_i w_i * d_i` in channel order. Every weighted combination of
/// per-channel distances goes through here so cached and direct
/// evaluations agree bit for bit.
#[inline]
pub fn weighted_sum<T: Scalar>(per_channel: &[T], weights: &[T]) -> T {
    per_channel.iter().zip(weights).map(|(&d, &w)| w * d).sum()
}

fn multi_result<T: Scalar>(distance: T, per_channel: Vec<T>) -> DtwResult<T> {
    DtwResult {
        distance,
        cumulative_cost: T::zero(),
        path_len: 0,
        per_channel,
        path: None,
    }
}

/// Unconstrained single-channel DTW.
pub fn dtw_1d<T: Scalar>(x: &Series<T>, y: &Series<T>, recover_path: bool) -> Result<DtwResult<T>> {
    Dtw::new().distance_1d(x, y, recover_path)
}

pub fn dtw_multi_baseline<T: Scalar>(x: &MultiSeries<T>, y: &MultiSeries<T>) -> Result<DtwResult<T>> {
    Dtw::new().multi_baseline(x, y)
}

pub fn dtw_multi_weighted<T: Scalar>(
    x: &MultiSeries<T>,
    y: &MultiSeries<T>,
    weights: &WeightVector<T>,
) -> Result<DtwResult<T>> {
    Dtw::new().multi_weighted(x, y, weights)
}

/// Expands both series along `path` so they share its length.
pub fn align<T: Scalar>(
    x: &Series<T>,
    y: &Series<T>,
    path: &WarpingPath,
) -> Result<(Series<T>, Series<T>)> {
    path.validate(x.len(), y.len())?;
    let (xv, yv) = (x.values(), y.values());
    let (xs, ys) = path.pairs().iter().map(|&(i, j)| (xv[i], yv[j])).unzip();
    Ok((Series::new(xs)?, Series::new(ys)?))
}
