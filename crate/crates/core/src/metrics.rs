//! Abruptness score (AbScore) and displacement-error metrics.
//!
//! AbScore assigns each consecutive triple `(A, B, C)` of a trajectory the
//! score `ceil(180·θ / (10π)) · |a × b|` with `a = AB`, `b = BC` and
//! `θ = |asin(a × b / (|a||b|))|`, adding `π/2` to `θ` when the turn is
//! obtuse (`a · b < 0`). A trajectory's raw score is the sum over its
//! triples; the scaled score divides by the tight bounding-box area, or by
//! the path length when the box is degenerate.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::traj::{Point2, Rect, Trajectory, Vec2};

/// Bounding boxes with area at or below this are treated as degenerate.
pub const EPS_AREA: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TurnScore<T: Scalar> {
    /// Turn angle in radians, `[0, π]`.
    pub theta: T,
    pub cross_mag: T,
    pub score: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    Area,
    Length,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AbScoreReport<T: Scalar> {
    pub raw: T,
    pub scaled: T,
    pub scaling_mode: ScalingMode,
    pub per_turn: Vec<TurnScore<T>>,
}

/// Ceiling that snaps values within rounding noise of an integer onto it,
/// so that e.g. an exact right angle yields factor 9 rather than 10.
fn quantized_ceil<T: Scalar>(q: T) -> T {
    let r = q.round();
    if (q - r).abs() <= T::epsilon().sqrt() * T::one().max(q.abs()) {
        r
    } else {
        q.ceil()
    }
}

/// Score of the turn from displacement `a` into displacement `b`.
pub fn turn_score<T: Scalar>(a: Vec2<T>, b: Vec2<T>) -> TurnScore<T> {
    let zero = T::zero();
    let (na, nb) = (a.norm(), b.norm());
    if na == zero || nb == zero {
        return TurnScore { theta: zero, cross_mag: zero, score: zero };
    }
    let cross_mag = a.cross(b).abs();
    let ratio = (cross_mag / (na * nb)).max(zero).min(T::one());
    let mut theta = ratio.asin().abs();
    if a.dot(b) < zero {
        theta = theta + T::FRAC_PI_2();
    }
    let factor = quantized_ceil(T::lit(180.0) * theta / (T::lit(10.0) * T::PI()));
    TurnScore { theta, cross_mag, score: factor * cross_mag }
}

/// Raw and scaled AbScore of a trajectory with at least three points.
pub fn abscore<T: Scalar>(t: &Trajectory<T>) -> Result<AbScoreReport<T>> {
    abscore_points(t.points())
}

pub fn abscore_points<T: Scalar>(points: &[Point2<T>]) -> Result<AbScoreReport<T>> {
    if points.len() < 3 {
        return invalid(format!("AbScore needs at least 3 points, got {}", points.len()));
    }
    let per_turn: Vec<_> = points
        .windows(3)
        .map(|w| turn_score(w[1] - w[0], w[2] - w[1]))
        .collect();
    let raw: T = per_turn.iter().map(|s| s.score).sum();
    let area = Rect::bounding(points).map(|r| r.area()).unwrap_or_else(T::zero);
    let (scaled, scaling_mode) = if area > T::lit(EPS_AREA) {
        (raw / area, ScalingMode::Area)
    } else {
        let len: T = points.windows(2).map(|w| w[0].distance(w[1])).sum();
        if len > T::zero() {
            (raw / len, ScalingMode::Length)
        } else {
            (T::zero(), ScalingMode::Length)
        }
    };
    Ok(AbScoreReport { raw, scaled, scaling_mode, per_turn })
}

/// Convenience: scaled AbScore, `0` for trajectories shorter than 3 points.
pub fn scaled_abscore<T: Scalar>(t: &Trajectory<T>) -> T {
    abscore(t).map(|r| r.scaled).unwrap_or_else(|_| T::zero())
}

fn check_pair<T: Scalar>(pred: &[Point2<T>], gt: &[Point2<T>]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch { expected: gt.len(), found: pred.len() });
    }
    if gt.is_empty() {
        return invalid("displacement error of empty futures");
    }
    Ok(())
}

/// Average displacement error: mean per-step Euclidean distance.
pub fn ade<T: Scalar>(pred: &[Point2<T>], gt: &[Point2<T>]) -> Result<T> {
    check_pair(pred, gt)?;
    let total: T = pred.iter().zip(gt).map(|(p, g)| p.distance(*g)).sum();
    Ok(total / T::lit(gt.len() as f64))
}

/// ADE divided by a standardization factor.
pub fn ade_standardized<T: Scalar>(pred: &[Point2<T>], gt: &[Point2<T>], std: T) -> Result<T> {
    if !(std.is_finite() && std > T::zero()) {
        return invalid(format!("standardization must be positive, got {std}"));
    }
    Ok(ade(pred, gt)? / std)
}

/// Final displacement error: distance between the last points.
pub fn fde<T: Scalar>(pred: &[Point2<T>], gt: &[Point2<T>]) -> Result<T> {
    check_pair(pred, gt)?;
    Ok(pred[pred.len() - 1].distance(gt[gt.len() - 1]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Number of sampled futures per trajectory.
    pub k: usize,
    /// Input scale factor; only used when `legacy_scale_bug` is set.
    pub standardization: f64,
    /// Divide the reported ADE by `standardization`, reproducing the
    /// behaviour of the original reference implementation.
    pub legacy_scale_bug: bool,
    /// Minimize ADE and FDE independently over the samples.
    pub decoupled: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { k: 20, standardization: 1.0, legacy_scale_bug: false, decoupled: false }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.standardization.is_finite() && self.standardization > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "standardization must be positive, got {}",
                self.standardization
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrajectoryError<T: Scalar> {
    pub ade: T,
    pub fde: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EvalReport<T: Scalar> {
    pub ade: T,
    pub fde: T,
    pub per_trajectory: Vec<TrajectoryError<T>>,
    pub config: EvalConfig,
}

/// Best-of-K evaluation.
///
/// `samples[i]` holds the `cfg.k` predicted futures for ground truth
/// `gt[i]`. Coupled mode reports the ADE and FDE of the sample with the
/// lowest FDE (lowest index on ties); decoupled mode reports the minimum
/// ADE and minimum FDE independently.
pub fn evaluate<T: Scalar>(
    samples: &[Vec<Vec<Point2<T>>>],
    gt: &[Vec<Point2<T>>],
    cfg: &EvalConfig,
) -> Result<EvalReport<T>> {
    cfg.validate()?;
    if gt.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if samples.len() != gt.len() {
        return Err(Error::LengthMismatch { expected: gt.len(), found: samples.len() });
    }
    let std = T::lit(cfg.standardization);
    let mut per_trajectory = Vec::with_capacity(gt.len());
    for (cands, truth) in samples.iter().zip(gt) {
        if cands.len() != cfg.k {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples per trajectory, found {}",
                cfg.k,
                cands.len()
            )));
        }
        let errs = cands
            .iter()
            .map(|c| Ok((ade(c, truth)?, fde(c, truth)?)))
            .collect::<Result<Vec<_>>>()?;
        let (a, f) = if cfg.decoupled {
            let a = errs.iter().map(|e| e.0).fold(T::infinity(), T::min);
            let f = errs.iter().map(|e| e.1).fold(T::infinity(), T::min);
            (a, f)
        } else {
            let mut best = 0;
            for (i, e) in errs.iter().enumerate() {
                if e.1 < errs[best].1 {
                    best = i;
                }
            }
            errs[best]
        };
        per_trajectory.push(TrajectoryError { ade: a, fde: f });
    }
    let n = T::lit(per_trajectory.len() as f64);
    let mut ade_mean = per_trajectory.iter().map(|e| e.ade).sum::<T>() / n;
    let fde_mean = per_trajectory.iter().map(|e| e.fde).sum::<T>() / n;
    if cfg.legacy_scale_bug {
        ade_mean = ade_mean / std;
        for e in &mut per_trajectory {
            e.ade = e.ade / std;
        }
    }
    Ok(EvalReport { ade: ade_mean, fde: fde_mean, per_trajectory, config: *cfg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn v(x: f64, y: f64) -> Vec2<f64> {
        Point2::new(x, y)
    }

    #[test]
    fn collinear_turn_scores_zero() {
        let s = turn_score(v(1.0, 0.0), v(1.0, 0.0));
        assert_eq!((s.theta, s.cross_mag, s.score), (0.0, 0.0, 0.0));
    }

    #[test]
    fn right_angle_scores_nine() {
        let s = turn_score(v(1.0, 0.0), v(0.0, 1.0));
        assert!((s.theta - PI / 2.0).abs() < 1e-15);
        assert_eq!(s.cross_mag, 1.0);
        assert_eq!(s.score, 9.0);
    }

    #[test]
    fn obtuse_turn_gets_quarter_turn_added() {
        let s = turn_score(v(1.0, 0.0), v(-1.0, 1.0));
        assert!((s.theta - 3.0 * PI / 4.0).abs() < 1e-12);
        assert_eq!(s.score, 14.0);
    }

    #[test]
    fn zero_vectors_score_zero() {
        let s = turn_score(v(0.0, 0.0), v(3.0, 1.0));
        assert_eq!(s.score, 0.0);
        assert_eq!(turn_score(v(2.0, 1.0), v(0.0, 0.0)).theta, 0.0);
    }

    #[test]
    fn reversal_has_no_cross_and_scores_zero() {
        let s = turn_score(v(1.0, 0.0), v(-1.0, 0.0));
        assert_eq!(s.score, 0.0);
        assert!(s.theta <= PI);
    }

    #[test]
    fn square_path() {
        let t = Trajectory::new(vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)]).unwrap();
        let r = abscore(&t).unwrap();
        assert_eq!(r.raw, 18.0);
        assert_eq!(r.scaled, 18.0);
        assert_eq!(r.scaling_mode, ScalingMode::Area);
        assert_eq!(r.per_turn.len(), 2);
    }

    #[test]
    fn collinear_and_stationary_trajectories() {
        let line = Trajectory::new((0..20).map(|i| v(i as f64, 2.0 * i as f64)).collect()).unwrap();
        let r = abscore(&line).unwrap();
        assert_eq!((r.raw, r.scaled, r.scaling_mode), (0.0, 0.0, ScalingMode::Area));
        let flat = Trajectory::new((0..20).map(|i| v(i as f64, 1.0)).collect()).unwrap();
        let r = abscore(&flat).unwrap();
        assert_eq!((r.raw, r.scaled, r.scaling_mode), (0.0, 0.0, ScalingMode::Length));
        let still = Trajectory::new(vec![v(3.0, 3.0); 20]).unwrap();
        let r = abscore(&still).unwrap();
        assert_eq!((r.raw, r.scaled), (0.0, 0.0));
    }

    #[test]
    fn abscore_needs_three_points() {
        let t = Trajectory::new(vec![v(0.0, 0.0), v(1.0, 1.0)]).unwrap();
        assert!(abscore(&t).is_err());
    }

    #[test]
    fn ade_fde_basics() {
        let gt: Vec<_> = (0..12).map(|i| v(i as f64, -(i as f64))).collect();
        assert_eq!(ade(&gt, &gt).unwrap(), 0.0);
        assert_eq!(fde(&gt, &gt).unwrap(), 0.0);
        let shifted: Vec<_> = gt.iter().map(|p| *p + v(3.0, 4.0)).collect();
        assert!((ade(&shifted, &gt).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(fde(&[v(0.0, 0.0)], &[v(3.0, 4.0)]).unwrap(), 5.0);
        assert!(matches!(ade(&gt[..3], &gt), Err(Error::LengthMismatch { .. })));
        assert!(fde(&gt[..3], &gt).is_err());
        assert!(ade_standardized(&gt, &gt, 0.0).is_err());
    }

    #[test]
    fn coupled_picks_fde_best_sample() {
        let gt = vec![vec![v(0.0, 0.0), v(10.0, 0.0)]];
        // sample 0: ADE 2, FDE 2. sample 1: ADE 3, FDE 1.
        let s0 = vec![v(0.0, 2.0), v(10.0, 2.0)];
        let s1 = vec![v(0.0, 5.0), v(10.0, 1.0)];
        let samples = vec![vec![s0, s1]];
        let coupled = evaluate(&samples, &gt, &EvalConfig { k: 2, ..Default::default() }).unwrap();
        assert_eq!((coupled.ade, coupled.fde), (3.0, 1.0));
        let dec = evaluate(&samples, &gt, &EvalConfig { k: 2, decoupled: true, ..Default::default() }).unwrap();
        assert_eq!((dec.ade, dec.fde), (2.0, 1.0));
    }

    #[test]
    fn legacy_bug_divides_ade_only() {
        let gt = vec![vec![v(0.0, 0.0), v(3.0, 4.0)]];
        let samples = vec![vec![vec![v(1.0, 0.0), v(0.0, 0.0)]]];
        let base = evaluate(&samples, &gt, &EvalConfig { k: 1, ..Default::default() }).unwrap();
        let cfg = EvalConfig { k: 1, standardization: 1.86, legacy_scale_bug: true, decoupled: false };
        let bug = evaluate(&samples, &gt, &cfg).unwrap();
        assert_eq!(bug.ade, base.ade / 1.86);
        assert_eq!(bug.fde, base.fde);
    }

    #[test]
    fn sample_count_and_empty_errors() {
        let gt = vec![vec![v(0.0, 0.0)]];
        let samples = vec![vec![vec![v(0.0, 0.0)]]];
        assert!(evaluate(&samples, &gt, &EvalConfig::default()).is_err());
        let none: Vec<Vec<Point2<f64>>> = vec![];
        assert!(matches!(
            evaluate(&[], &none, &EvalConfig { k: 1, ..Default::default() }),
            Err(Error::EmptyDataset)
        ));
        assert!(EvalConfig { k: 0, ..Default::default() }.validate().is_err());
        assert!(EvalConfig { standardization: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn works_in_f32() {
        let s = turn_score(Point2::new(1.0f32, 0.0), Point2::new(0.0, 1.0));
        assert_eq!(s.score, 9.0f32);
    }

    #[test]
    fn raw_score_scales_quadratically() {
        let pts = [v(0.0, 0.0), v(3.0, 0.2), v(4.0, 2.5), v(2.0, 4.0), v(-1.0, 3.7)];
        let t = Trajectory::new(pts.to_vec()).unwrap();
        let base = abscore(&t).unwrap();
        for s in [0.5, 2.0, 10.0] {
            let r = abscore(&t.map_points(|p| p.scale(s)).unwrap()).unwrap();
            assert!((r.raw / base.raw - s * s).abs() < 1e-9 * s * s);
            assert!((r.scaled - base.scaled).abs() < 1e-9 * base.scaled);
        }
    }
}
