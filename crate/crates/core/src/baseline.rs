//! Kinematic baseline predictors and the dataset evaluation harness.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analysis::{classify, ClassifyConfig, QualClass};
use crate::error::{invalid, Error, Result};
use crate::metrics::{evaluate, EvalConfig, EvalReport};
use crate::rng::SeededRng;
use crate::traj::Point2;
use crate::{Dataset64, Point2d};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredictorKind {
    #[serde(rename = "cv")]
    ConstantVelocity,
    #[serde(rename = "linfit")]
    LinearFit,
    #[serde(rename = "stationary")]
    Stationary,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 3] = [PredictorKind::ConstantVelocity, PredictorKind::LinearFit, PredictorKind::Stationary];

    pub fn as_str(self) -> &'static str {
        match self {
            PredictorKind::ConstantVelocity => "cv",
            PredictorKind::LinearFit => "linfit",
            PredictorKind::Stationary => "stationary",
        }
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown predictor '{s}' (expected cv, linfit or stationary)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub kind: PredictorKind,
    pub k_samples: usize,
    /// Standard deviation of the endpoint jitter of samples after the first.
    pub jitter_sigma: f64,
}

impl Predictor {
    pub fn validate(&self) -> Result<()> {
        if self.k_samples == 0 {
            return Err(Error::InvalidConfig("k_samples must be at least 1".into()));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("jitter_sigma must be non-negative, got {}", self.jitter_sigma)));
        }
        Ok(())
    }
}

/// Unit direction of the total-least-squares line through `pts`, oriented
/// along the overall motion. `None` when the points do not spread.
fn principal_direction(pts: &[Point2d]) -> Option<Point2d> {
    let n = pts.len() as f64;
    let mean = pts.iter().fold(Point2::zero(), |a, p| a + *p) * (1.0 / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let d = *p - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    if sxx + syy <= 0.0 {
        return None;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let mut dir = Point2::new(angle.cos(), angle.sin());
    let motion = pts[pts.len() - 1] - pts[0];
    if dir.dot(motion) < 0.0 {
        dir = -dir;
    }
    Some(dir)
}

fn deterministic(kind: PredictorKind, obs: &[Point2d], pred_len: usize) -> Vec<Point2d> {
    let last = obs[obs.len() - 1];
    let ahead = |origin: Point2d, step: Point2d| (1..=pred_len).map(|i| origin + step * i as f64).collect();
    match kind {
        PredictorKind::Stationary => vec![last; pred_len],
        PredictorKind::ConstantVelocity => ahead(last, last - obs[obs.len() - 2]),
        PredictorKind::LinearFit => match principal_direction(obs) {
            None => vec![last; pred_len],
            Some(dir) => {
                let speed = obs.windows(2).map(|w| w[0].distance(w[1])).sum::<f64>() / (obs.len() - 1) as f64;
                let n = obs.len() as f64;
                let mean = obs.iter().fold(Point2::zero(), |a, p| a + *p) * (1.0 / n);
                let anchor = mean + dir * dir.dot(last - mean);
                ahead(anchor, dir * speed)
            }
        },
    }
}

/// `k_samples` futures of `pred_len` points. The first sample is the
/// deterministic prediction; each later sample adds an `N(0, σ²)` endpoint
/// offset scaled by `(i + 1) / pred_len` at future step `i`.
pub fn predict(p: &Predictor, obs: &[Point2d], pred_len: usize, rng: &mut SeededRng) -> Result<Vec<Vec<Point2d>>> {
    p.validate()?;
    if pred_len == 0 {
        return invalid("pred_len must be at least 1");
    }
    let min = if p.kind == PredictorKind::Stationary { 1 } else { 2 };
    if obs.len() < min {
        return invalid(format!("{} needs at least {min} observed points, got {}", p.kind, obs.len()));
    }
    let base = deterministic(p.kind, obs, pred_len);
    let normal = (p.jitter_sigma > 0.0).then(|| Normal::new(0.0, p.jitter_sigma).expect("valid sigma"));
    let mut out = Vec::with_capacity(p.k_samples);
    out.push(base.clone());
    for _ in 1..p.k_samples {
        match normal {
            None => out.push(base.clone()),
            Some(n) => {
                let end = Point2::new(n.sample(rng), n.sample(rng));
                out.push(
                    base.iter()
                        .enumerate()
                        .map(|(i, q)| *q + end * ((i + 1) as f64 / pred_len as f64))
                        .collect(),
                );
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassBreakdown {
    pub count: usize,
    pub ade: f64,
    pub fde: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub predictor: Predictor,
    pub overall: EvalReport<f64>,
    /// Per-trajectory class, in dataset order.
    pub classes: Vec<QualClass>,
    pub per_class: BTreeMap<QualClass, ClassBreakdown>,
}

impl BaselineReport {
    /// `index,class,ade,fde` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,class,ade,fde\n");
        for (i, (e, c)) in self.overall.per_trajectory.iter().zip(&self.classes).enumerate() {
            s.push_str(&format!("{i},{c},{},{}\n", e.ade, e.fde));
        }
        s
    }
}

/// Splits every trajectory at its `obs_len`, predicts the future with `p`
/// (trajectory `i` sampling from `rng.derive(i)`) and scores the samples
/// under `cfg`. The class breakdown uses [`classify`] without a length
/// requirement; trajectories too short to classify count as `Other`.
pub fn run_eval(d: &Dataset64, p: &Predictor, cfg: &EvalConfig, rng: &SeededRng) -> Result<BaselineReport> {
    d.ensure_non_empty()?;
    if p.k_samples != cfg.k {
        return invalid(format!("predictor draws {} samples but evaluation expects k = {}", p.k_samples, cfg.k));
    }
    let ccfg = ClassifyConfig { expected_len: None, ..ClassifyConfig::default() };
    let mut samples = Vec::new();
    let mut gt = Vec::new();
    let mut classes = Vec::new();
    for (i, t) in d.trajectories().enumerate() {
        t.check_split()?;
        let obs = t.observed()?;
        let fut = t.future()?;
        samples.push(predict(p, obs, fut.len(), &mut rng.derive(i as u64))?);
        gt.push(fut.to_vec());
        classes.push(if t.len() >= 3 { classify(t, &ccfg)? } else { QualClass::Other });
    }
    let overall = evaluate(&samples, &gt, cfg)?;
    let mut sums: BTreeMap<QualClass, (usize, f64, f64)> = BTreeMap::new();
    for (e, c) in overall.per_trajectory.iter().zip(&classes) {
        let s = sums.entry(*c).or_insert((0, 0.0, 0.0));
        s.0 += 1;
        s.1 += e.ade;
        s.2 += e.fde;
    }
    let per_class = sums
        .into_iter()
        .map(|(c, (n, a, f))| (c, ClassBreakdown { count: n, ade: a / n as f64, fde: f / n as f64 }))
        .collect();
    Ok(BaselineReport { predictor: *p, overall, classes, per_class })
}
