//! Unique-point tabulation and rule-based qualitative classes.
//!
//! The classes are assigned by the first matching rule, in the order
//! T1 → T6 → T4 → T2F/T3F → T5 → T2 → T3 → T7, falling back to
//! [`QualClass::Other`]. Every threshold lives in [`ClassifyConfig`].
//!
//! The flying (T2F/T3F) versus haphazard (T5) split is an operational
//! reading of qualitative descriptions: flying means near-constant step
//! direction with large steps; haphazard means large steps in scattered
//! directions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::abscore;
use crate::scalar::Scalar;
use crate::traj::{tight_bbox, Dataset, Point2, Rect, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QualClass {
    /// Stationary.
    T1,
    /// 3–8 unique points inside a small box.
    T2,
    /// Small-box wanderer seen from a translating camera.
    T2F,
    /// 3–9 unique points inside a large box.
    T3,
    T3F,
    /// Start and end close together after leaving the small box.
    T4,
    /// Large steps in haphazard directions.
    T5,
    /// Backtracker.
    T6,
    /// Linear to moderately linear.
    T7,
    /// Matches none of the rules.
    #[serde(rename = "other")]
    Other,
}

impl QualClass {
    pub const ALL: [QualClass; 10] = [
        QualClass::T1,
        QualClass::T2,
        QualClass::T2F,
        QualClass::T3,
        QualClass::T3F,
        QualClass::T4,
        QualClass::T5,
        QualClass::T6,
        QualClass::T7,
        QualClass::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            QualClass::T1 => "T1",
            QualClass::T2 => "T2",
            QualClass::T2F => "T2F",
            QualClass::T3 => "T3",
            QualClass::T3F => "T3F",
            QualClass::T4 => "T4",
            QualClass::T5 => "T5",
            QualClass::T6 => "T6",
            QualClass::T7 => "T7",
            QualClass::Other => "other",
        }
    }
}

impl fmt::Display for QualClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QualClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        QualClass::ALL
            .iter()
            .copied()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown class {s:?}")))
    }
}

/// Classification thresholds, in scene units where applicable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    /// Required trajectory length; `None` accepts any length ≥ 3.
    pub expected_len: Option<usize>,
    /// Chebyshev tolerance for unique-point counting.
    pub unique_tol: f64,
    pub small_box: f64,
    pub large_box: f64,
    pub backtrack_tol: f64,
    /// Forward steps required before the reversal point.
    pub backtrack_min_forward: usize,
    /// Mirrored steps required after the reversal point.
    pub backtrack_min_retrace: usize,
    /// Scaled AbScore strictly below this is near-linear.
    pub linearity_threshold: f64,
    /// Mean step length above which motion counts as camera drift.
    pub drift_step: f64,
    /// Circular variance of step directions below which drift is uniform.
    pub flying_variance: f64,
    /// Circular variance above which large-step motion is haphazard.
    pub haphazard_variance: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            expected_len: Some(20),
            unique_tol: 0.0,
            small_box: 5.0,
            large_box: 100.0,
            backtrack_tol: 1e-6,
            backtrack_min_forward: 6,
            backtrack_min_retrace: 3,
            linearity_threshold: 1.0,
            drift_step: 5.0,
            flying_variance: 0.05,
            haphazard_variance: 0.5,
        }
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = i;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }
}

/// Number of distinct positions. Points closer than `tol` in Chebyshev
/// distance are linked, and each connected group counts once.
pub fn unique_points<T: Scalar>(points: &[Point2<T>], tol: f64) -> usize {
    if points.is_empty() {
        return 0;
    }
    let tol = T::lit(tol.max(0.0));
    let n = points.len();
    let mut dsu = Dsu((0..n).collect());
    let mut groups = n;
    for i in 0..n {
        for j in (i + 1)..n {
            if points[i].chebyshev(points[j]) <= tol {
                let (a, b) = (dsu.find(i), dsu.find(j));
                if a != b {
                    dsu.0[a] = b;
                    groups -= 1;
                }
            }
        }
    }
    groups
}

/// Circular variance `1 − |mean unit step|` over the non-zero steps.
pub fn step_circular_variance<T: Scalar>(points: &[Point2<T>]) -> Option<f64> {
    let mut sum = Point2::new(0.0, 0.0);
    let mut n = 0usize;
    for w in points.windows(2) {
        let d = (w[1] - w[0]).cast::<f64>();
        let len = d.norm();
        if len > 0.0 {
            sum += d.scale(1.0 / len);
            n += 1;
        }
    }
    (n > 0).then(|| 1.0 - sum.norm() / n as f64)
}

fn mean_step_length<T: Scalar>(points: &[Point2<T>]) -> f64 {
    let total: f64 = points
        .windows(2)
        .map(|w| w[0].cast::<f64>().distance(w[1].cast()))
        .sum();
    total / (points.len() - 1) as f64
}

/// Whether the trajectory reverses after at least `min_forward` steps and
/// retraces at least `min_retrace` of them within `tol`.
pub fn is_backtracker<T: Scalar>(points: &[Point2<T>], cfg: &ClassifyConfig) -> bool {
    let n = points.len();
    let tol = T::lit(cfg.backtrack_tol);
    let min_retrace = cfg.backtrack_min_retrace.max(1);
    for m in cfg.backtrack_min_forward..n {
        let mut r = 0;
        while m + r + 1 < n && r < m {
            let j = r + 1;
            let mirrored = points[m + j].chebyshev(points[m - j]) <= tol;
            let moving = points[m - j].chebyshev(points[m - j + 1]) > tol;
            if !(mirrored && moving) {
                break;
            }
            r = j;
        }
        if r >= min_retrace {
            return true;
        }
    }
    false
}

fn within(r: &Rect<f64>, side: f64) -> bool {
    r.width() <= side && r.height() <= side
}

/// Assigns the qualitative class of `t`.
pub fn classify<T: Scalar>(t: &Trajectory<T>, cfg: &ClassifyConfig) -> Result<QualClass> {
    if let Some(n) = cfg.expected_len {
        if t.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: t.len() });
        }
    }
    if t.len() < 3 {
        return Err(Error::InvalidArgument("classification needs at least 3 points".into()));
    }
    let pts = t.points();
    let uniq = unique_points(pts, cfg.unique_tol);
    if uniq == 1 {
        return Ok(QualClass::T1);
    }
    if is_backtracker(pts, cfg) {
        return Ok(QualClass::T6);
    }
    let bbox = {
        let b = tight_bbox(t);
        Rect { min_x: b.min_x.as_f64(), min_y: b.min_y.as_f64(), max_x: b.max_x.as_f64(), max_y: b.max_y.as_f64() }
    };
    let first = t.first().cast::<f64>();
    let last = t.last().cast::<f64>();
    if first.chebyshev(last) <= cfg.small_box && !within(&bbox, cfg.small_box) {
        return Ok(QualClass::T4);
    }

    let mean_step = mean_step_length(pts);
    let variance = step_circular_variance(pts).unwrap_or(0.0);
    if mean_step > cfg.drift_step && variance < cfg.flying_variance {
        let drift = (last - first).scale(1.0 / (pts.len() - 1) as f64);
        let dedrifted: Vec<Point2<f64>> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| p.cast::<f64>() - drift.scale(i as f64))
            .collect();
        let r = Rect::bounding(&dedrifted).expect("non-empty");
        if within(&r, cfg.small_box) {
            return Ok(QualClass::T2F);
        }
        if within(&r, cfg.large_box) {
            return Ok(QualClass::T3F);
        }
    }
    if mean_step > cfg.drift_step && variance > cfg.haphazard_variance {
        return Ok(QualClass::T5);
    }
    if (3..=8).contains(&uniq) && within(&bbox, cfg.small_box) {
        return Ok(QualClass::T2);
    }
    if (3..=9).contains(&uniq) && within(&bbox, cfg.large_box) {
        return Ok(QualClass::T3);
    }
    if abscore(t)?.scaled.as_f64() < cfg.linearity_threshold {
        return Ok(QualClass::T7);
    }
    Ok(QualClass::Other)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Stats {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std: var.sqrt(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub total: usize,
    /// Trajectory counts keyed by number of unique points.
    pub unique_counts: BTreeMap<usize, usize>,
    /// Percentage of the dataset per unique-point count.
    pub unique_percent: BTreeMap<usize, f64>,
    pub class_counts: BTreeMap<QualClass, usize>,
    pub class_percent: BTreeMap<QualClass, f64>,
    /// Raw AbScore statistics over trajectories with ≥ 3 points.
    pub abscore_raw: Option<Stats>,
    pub abscore_scaled: Option<Stats>,
}

/// One row of the per-trajectory export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub index: usize,
    pub scene_id: u64,
    pub agent_id: u64,
    pub unique_points: usize,
    pub class: QualClass,
    pub abscore_raw: f64,
    pub abscore_scaled: f64,
}

pub fn summarize<T: Scalar>(d: &Dataset<T>, cfg: &ClassifyConfig) -> Result<Vec<TrajectorySummary>> {
    d.ensure_non_empty()?;
    let mut out = Vec::with_capacity(d.num_trajectories());
    for scene in &d.scenes {
        for tr in scene.tracks() {
            let t = &tr.trajectory;
            let class = classify(t, cfg)?;
            let ab = abscore(t)?;
            out.push(TrajectorySummary {
                index: out.len(),
                scene_id: scene.id(),
                agent_id: tr.agent_id,
                unique_points: unique_points(t.points(), cfg.unique_tol),
                class,
                abscore_raw: ab.raw.as_f64(),
                abscore_scaled: ab.scaled.as_f64(),
            });
        }
    }
    Ok(out)
}

pub fn profile<T: Scalar>(d: &Dataset<T>, cfg: &ClassifyConfig) -> Result<DatasetProfile> {
    Ok(profile_from_summaries(&summarize(d, cfg)?))
}

pub fn profile_from_summaries(rows: &[TrajectorySummary]) -> DatasetProfile {
    let total = rows.len();
    let mut unique_counts = BTreeMap::new();
    let mut class_counts = BTreeMap::new();
    for r in rows {
        *unique_counts.entry(r.unique_points).or_insert(0) += 1;
        *class_counts.entry(r.class).or_insert(0) += 1;
    }
    let pct = |c: usize| 100.0 * c as f64 / total.max(1) as f64;
    let raw: Vec<f64> = rows.iter().map(|r| r.abscore_raw).collect();
    let scaled: Vec<f64> = rows.iter().map(|r| r.abscore_scaled).collect();
    DatasetProfile {
        total,
        unique_percent: unique_counts.iter().map(|(k, v)| (*k, pct(*v))).collect(),
        class_percent: class_counts.iter().map(|(k, v)| (*k, pct(*v))).collect(),
        unique_counts,
        class_counts,
        abscore_raw: Stats::of(&raw),
        abscore_scaled: Stats::of(&scaled),
    }
}

/// CSV with header `index,scene_id,agent_id,unique_points,class,abscore_raw,abscore_scaled`.
pub fn summaries_csv(rows: &[TrajectorySummary]) -> String {
    let mut s = String::from("index,scene_id,agent_id,unique_points,class,abscore_raw,abscore_scaled\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.index, r.scene_id, r.agent_id, r.unique_points, r.class, r.abscore_raw, r.abscore_scaled
        ));
    }
    s
}
