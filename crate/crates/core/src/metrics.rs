//! Evaluation metrics: success rate, timesteps, duration, tracking and
//! targeting error, trajectory curvature and the Kruskal-Wallis test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::environment::EpisodeResult;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scalar::Real;

pub const DEFAULT_SAMPLES: usize = 500;
pub const SIGNIFICANCE: f64 = 0.05;

/// `n_s / n`.
pub fn success_rate(successes: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("success rate of zero experiments"));
    }
    if successes > n {
        return Err(Error::domain(format!("{successes} successes out of {n} experiments")));
    }
    Ok(successes as f64 / n as f64)
}

/// Steps from `n0` to `ng` inclusive.
pub fn timesteps(n0: usize, ng: usize) -> Result<usize> {
    if ng < n0 {
        return Err(Error::domain(format!("last step {ng} precedes first step {n0}")));
    }
    Ok(ng - n0 + 1)
}

pub fn duration<S: Real>(t0: S, tg: S) -> Result<S> {
    if !(tg >= t0) {
        return Err(Error::domain("end time precedes start time"));
    }
    Ok(tg - t0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

fn dedup<S: Real>(points: &[Vec3<S>]) -> Vec<Vec3<S>> {
    let mut out: Vec<Vec3<S>> = Vec::with_capacity(points.len());
    for &p in points {
        if out.last().is_none_or(|&q| q != p) {
            out.push(p);
        }
    }
    out
}

/// Samples a polyline at `n` arc-length-uniform points.
fn resample_polyline<S: Real>(pts: &[Vec3<S>], n: usize) -> Vec<Vec3<S>> {
    if pts.len() == 1 {
        return vec![pts[0]; n];
    }
    let mut cum = vec![S::zero(); pts.len()];
    for i in 1..pts.len() {
        cum[i] = cum[i - 1] + pts[i].distance(pts[i - 1]);
    }
    let total = cum[pts.len() - 1];
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        if k + 1 == n {
            out.push(pts[pts.len() - 1]);
            break;
        }
        let s = total * S::of_count(k) / S::of_count(n - 1);
        while seg + 2 < pts.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > S::zero() { ((s - cum[seg]) / len).min(S::one()) } else { S::zero() };
        out.push(pts[seg].lerp(pts[seg + 1], t));
    }
    out
}

/// Clamped cubic B-spline with the points as control polygon; knots by
/// averaging chord-length parameters.
struct BSpline<S> {
    ctrl: Vec<Vec3<S>>,
    knots: Vec<S>,
}

impl<S: Real> BSpline<S> {
    const DEGREE: usize = 3;

    fn new(ctrl: Vec<Vec3<S>>) -> Self {
        let p = Self::DEGREE;
        let n = ctrl.len();
        let mut params = vec![S::zero(); n];
        for i in 1..n {
            params[i] = params[i - 1] + ctrl[i].distance(ctrl[i - 1]);
        }
        let total = params[n - 1];
        params.iter_mut().for_each(|u| *u /= total);
        let mut knots = vec![S::zero(); p + 1];
        for j in 1..n - p {
            let avg = params[j..j + p].iter().copied().sum::<S>() / S::of_count(p);
            knots.push(avg);
        }
        knots.extend(std::iter::repeat_n(S::one(), p + 1));
        Self { ctrl, knots }
    }

    /// de Boor evaluation at `u` in `[0, 1]`.
    fn eval(&self, u: S) -> Vec3<S> {
        let p = Self::DEGREE;
        let n = self.ctrl.len();
        let mut k = p;
        while k < n - 1 && self.knots[k + 1] <= u {
            k += 1;
        }
        let mut d: Vec<Vec3<S>> = (0..=p).map(|j| self.ctrl[j + k - p]).collect();
        for r in 1..=p {
            for j in (r..=p).rev() {
                let i = j + k - p;
                let den = self.knots[i + p + 1 - r] - self.knots[i];
                let a = if den > S::zero() { (u - self.knots[i]) / den } else { S::zero() };
                d[j] = d[j - 1].lerp(d[j], a);
            }
        }
        d[p]
    }
}

/// Fits a cubic B-spline to the waypoints (a polyline when fewer than four
/// distinct points remain) and returns `n_samples` points spaced uniformly
/// in arc length. Consecutive duplicates are collapsed first.
pub fn resample_path<S: Real>(waypoints: &[Vec3<S>], n_samples: usize) -> Result<Vec<Vec3<S>>> {
    if waypoints.is_empty() || n_samples == 0 {
        return Err(Error::domain("resampling needs waypoints and at least one sample"));
    }
    let pts = dedup(waypoints);
    if pts.len() < 4 {
        return Ok(resample_polyline(&pts, n_samples));
    }
    let spline = BSpline::new(pts);
    let dense_n = (20 * n_samples).max(2000);
    let dense: Vec<Vec3<S>> = (0..dense_n).map(|k| spline.eval(S::of_count(k) / S::of_count(dense_n - 1))).collect();
    Ok(resample_polyline(&dense, n_samples))
}

/// Distance from each trajectory point to the nearest point of the
/// resampled desired path.
pub fn tracking_error<S: Real>(trajectory: &[Vec3<S>], path: &[Vec3<S>]) -> Result<Vec<S>> {
    if trajectory.is_empty() || path.is_empty() {
        return Err(Error::domain("tracking error needs a trajectory and a path"));
    }
    Ok(trajectory
        .iter()
        .map(|p| path.iter().map(|q| p.distance_squared(*q)).fold(S::infinity(), S::min).sqrt())
        .collect())
}

/// Closest approach of the trajectory to the target.
pub fn targeting_error<S: Real>(trajectory: &[Vec3<S>], target: Vec3<S>) -> Result<S> {
    if trajectory.is_empty() {
        return Err(Error::domain("targeting error of an empty trajectory"));
    }
    Ok(trajectory.iter().map(|p| p.distance(target)).fold(S::infinity(), S::min))
}

/// Circumscribed-circle curvature of each consecutive triple; triples with a
/// repeated point are skipped.
pub fn curvature<S: Real>(trajectory: &[Vec3<S>]) -> Result<Vec<S>> {
    if trajectory.len() < 3 {
        return Err(Error::domain("curvature needs at least three points"));
    }
    Ok(trajectory
        .windows(3)
        .filter_map(|w| {
            let (ab, bc, ca) = (w[1] - w[0], w[2] - w[1], w[0] - w[2]);
            let den = ab.norm() * bc.norm() * ca.norm();
            (ab.norm() > S::zero() && bc.norm() > S::zero() && ca.norm() > S::zero())
                .then(|| S::lit(2.0) * ab.cross(-ca).norm() / den)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallis {
    pub h: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Average ranks (1-based) of `values`, and the tie term `sum(t^3 - t)`.
pub fn ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

/// Rank-based H statistic with tie correction; p-value from the chi-squared
/// tail with `groups - 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalWallis> {
    if groups.len() < 2 || groups.iter().any(Vec::is_empty) {
        return Err(Error::domain("Kruskal-Wallis needs at least two non-empty groups"));
    }
    if groups.iter().flatten().any(|x| x.is_nan()) {
        return Err(Error::domain("Kruskal-Wallis input contains NaN"));
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let (r, ties) = ranks(&all);
    let correction = 1.0 - ties / (n * n * n - n);
    if !(correction > 0.0) {
        return Ok(KruskalWallis { h: 0.0, p_value: 1.0, significant: false });
    }
    let mut off = 0;
    let mut sum = 0.0;
    for g in groups {
        let rs: f64 = r[off..off + g.len()].iter().sum();
        sum += rs * rs / g.len() as f64;
        off += g.len();
    }
    let h = ((12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction).max(0.0);
    let chi = ChiSquared::new((groups.len() - 1) as f64).map_err(|e| Error::domain(e.to_string()))?;
    let p_value = chi.sf(h);
    Ok(KruskalWallis { h, p_value, significant: p_value < SIGNIFICANCE })
}

/// Per-episode metric values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub success: bool,
    #[serde(rename = "T_s")]
    pub t_s: usize,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "T_a")]
    pub t_a: f64,
    #[serde(rename = "T_r_mean")]
    pub t_r_mean: f64,
    pub curvature_mean: Option<f64>,
}

/// Aggregate metrics over a set of episodes. Timestep and duration means are
/// over successful episodes; errors and curvature over all episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub delta: f64,
    pub n_s: usize,
    pub n: usize,
    #[serde(rename = "T_s")]
    pub t_s: Option<f64>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[serde(rename = "T_a")]
    pub t_a: f64,
    #[serde(rename = "T_a_std")]
    pub t_a_std: f64,
    /// Per-point tracking error of all trajectories, concatenated.
    #[serde(rename = "T_r_series")]
    pub t_r_series: Vec<f64>,
    #[serde(rename = "T_r_mean")]
    pub t_r_mean: f64,
    #[serde(rename = "T_r_std")]
    pub t_r_std: f64,
    pub curvature_mean: f64,
    pub curvature_std: f64,
    pub episodes: Vec<EpisodeMetrics>,
}

impl MetricsReport {
    /// `desired` is the resampled reference path (see [`resample_path`]).
    pub fn from_episodes(results: &[EpisodeResult], desired: &[Vec3<f64>]) -> Result<Self> {
        let n_s = results.iter().filter(|r| r.success).count();
        let delta = success_rate(n_s, results.len())?;
        let mut episodes = Vec::with_capacity(results.len());
        let mut series = Vec::new();
        let mut curv = Vec::new();
        for r in results {
            let tr = tracking_error(&r.trajectory, desired)?;
            let c = if r.trajectory.len() >= 3 { curvature(&r.trajectory)? } else { Vec::new() };
            episodes.push(EpisodeMetrics {
                success: r.success,
                t_s: if r.ng == 0 { 0 } else { timesteps(r.n0, r.ng)? },
                t: duration(r.t0, r.tg)?,
                t_a: targeting_error(&r.trajectory, r.target)?,
                t_r_mean: Summary::of(tr.iter().copied()).map_or(0.0, |s| s.mean),
                curvature_mean: Summary::of(c.iter().copied()).map(|s| s.mean),
            });
            series.extend(tr);
            curv.extend(c);
        }
        let ok = || episodes.iter().filter(|e| e.success);
        let ta = Summary::of(episodes.iter().map(|e| e.t_a)).unwrap_or_default();
        let trs = Summary::of(series.iter().copied()).unwrap_or_default();
        let cs = Summary::of(curv).unwrap_or_default();
        Ok(Self {
            delta,
            n_s,
            n: results.len(),
            t_s: Summary::of(ok().map(|e| e.t_s as f64)).map(|s| s.mean),
            t: Summary::of(ok().map(|e| e.t)).map(|s| s.mean),
            t_a: ta.mean,
            t_a_std: ta.std,
            t_r_series: series,
            t_r_mean: trs.mean,
            t_r_std: trs.std,
            curvature_mean: cs.mean,
            curvature_std: cs.std,
            episodes,
        })
    }

    /// Pools reports over disjoint episode sets. Curvature statistics of the
    /// pool are over per-episode means, since raw curvature samples are not
    /// kept.
    pub fn merge(reports: &[MetricsReport]) -> Result<Self> {
        let episodes: Vec<EpisodeMetrics> = reports.iter().flat_map(|r| r.episodes.iter().copied()).collect();
        let series: Vec<f64> = reports.iter().flat_map(|r| r.t_r_series.iter().copied()).collect();
        let n_s = episodes.iter().filter(|e| e.success).count();
        let delta = success_rate(n_s, episodes.len())?;
        let ok = || episodes.iter().filter(|e| e.success);
        let ta = Summary::of(episodes.iter().map(|e| e.t_a)).unwrap_or_default();
        let trs = Summary::of(series.iter().copied()).unwrap_or_default();
        let cs = Summary::of(episodes.iter().filter_map(|e| e.curvature_mean)).unwrap_or_default();
        Ok(Self {
            delta,
            n_s,
            n: episodes.len(),
            t_s: Summary::of(ok().map(|e| e.t_s as f64)).map(|s| s.mean),
            t: Summary::of(ok().map(|e| e.t)).map(|s| s.mean),
            t_a: ta.mean,
            t_a_std: ta.std,
            t_r_series: series,
            t_r_mean: trs.mean,
            t_r_std: trs.std,
            curvature_mean: cs.mean,
            curvature_std: cs.std,
            episodes,
        })
    }
}
