//! Newtonian, noisy and geometric-curve trajectory generators.
//!
//! Generated samples are consecutive frames (`Trajectory::dt() == 1`); the
//! `dt` of a [`NewtonSpec`] is the physical time between frames.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::SeededRng;
use crate::traj::Point2;
use crate::{Dataset64, Point2d, Trajectory64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AccelMode {
    /// Constant acceleration.
    Static { a: Point2d },
    /// Per-step acceleration, each component drawn from `[-bound, bound]`.
    Variable { bound: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonSpec {
    pub x0: Point2d,
    pub v0: Point2d,
    pub accel: AccelMode,
    /// Number of samples.
    pub steps: usize,
    #[serde(default = "one")]
    pub dt: f64,
}

fn one() -> f64 {
    1.0
}

impl NewtonSpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return invalid("steps must be at least 2");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.x0.is_finite() && self.v0.is_finite()) {
            return invalid("x0 and v0 must be finite");
        }
        match self.accel {
            AccelMode::Static { a } if !a.is_finite() => invalid("acceleration must be finite"),
            AccelMode::Variable { bound } if !(bound >= 0.0 && bound.is_finite()) => {
                invalid(format!("acceleration bound must be non-negative, got {bound}"))
            }
            _ => Ok(()),
        }
    }
}

/// Newtonian point-mass trajectory.
///
/// Static mode evaluates `x0 + v0·t + ½·a·t²`. Variable mode holds each
/// freshly drawn acceleration constant over one step, which gives
/// `p_i = x0 + v0·t_i + Σ_{j<i} a_j·dt²·(i − j − ½)` and second differences
/// `½·(a_i + a_{i−1})·dt²`.
pub fn gen_newton(spec: &NewtonSpec, rng: &mut SeededRng) -> Result<Trajectory64> {
    spec.validate()?;
    let dt = spec.dt;
    let points = match spec.accel {
        AccelMode::Static { a } => (0..spec.steps)
            .map(|i| {
                let t = i as f64 * dt;
                spec.x0 + spec.v0 * t + a * (0.5 * t * t)
            })
            .collect(),
        AccelMode::Variable { bound } => {
            let accels: Vec<Point2d> = (0..spec.steps.saturating_sub(1))
                .map(|_| {
                    if bound == 0.0 {
                        Point2::zero()
                    } else {
                        Point2::new(rng.random_range(-bound..=bound), rng.random_range(-bound..=bound))
                    }
                })
                .collect();
            (0..spec.steps)
                .map(|i| {
                    let mut p = spec.x0 + spec.v0 * (i as f64 * dt);
                    for (j, a) in accels.iter().enumerate().take(i) {
                        p += *a * (dt * dt * ((i - j) as f64 - 0.5));
                    }
                    p
                })
                .collect()
        }
    };
    Trajectory64::new(points)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Per-axis standard deviation of the position noise.
    pub sigma: f64,
}

/// Adds independent `N(0, sigma²)` noise to both coordinates of every point.
pub fn add_noise(t: &Trajectory64, noise: &NoiseSpec, rng: &mut SeededRng) -> Result<Trajectory64> {
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return invalid(format!("sigma must be non-negative, got {}", noise.sigma));
    }
    if noise.sigma == 0.0 {
        return Ok(t.clone());
    }
    let normal = Normal::new(0.0, noise.sigma).expect("valid sigma");
    t.map_points(|p| Point2::new(p.x + normal.sample(rng), p.y + normal.sample(rng)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CurveKind {
    Circle { radius: f64 },
    /// Archimedean spiral `r = a + b·φ` for `φ ∈ [0, 2π·turns]`.
    Spiral { a: f64, b: f64, #[serde(default = "one")] turns: f64 },
    /// Rose curve with `lobes` petals.
    Loop { lobes: u32, radius: f64 },
    Line { length: f64 },
}

impl CurveKind {
    fn closed(&self) -> bool {
        matches!(self, CurveKind::Circle { .. } | CurveKind::Loop { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Sampling {
    /// `n` points at uniform parameter increments.
    Fixed { n: usize },
    /// Each increment scaled by `1 + jitter·U(−1, 1)`, `jitter ∈ [0, 1)`.
    Variable { n: usize, jitter: f64 },
}

impl Sampling {
    pub fn n(&self) -> usize {
        match *self {
            Sampling::Fixed { n } | Sampling::Variable { n, .. } => n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub kind: CurveKind,
    pub sampling: Sampling,
    #[serde(default)]
    pub center: Point2d,
    /// Rotation of the curve about `center`, radians.
    #[serde(default)]
    pub phase: f64,
}

impl CurveSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sampling.n() < 3 {
            return invalid("curves need at least 3 samples");
        }
        if let Sampling::Variable { jitter, .. } = self.sampling {
            if !(0.0..1.0).contains(&jitter) {
                return invalid(format!("jitter must lie in [0, 1), got {jitter}"));
            }
        }
        if !(self.center.is_finite() && self.phase.is_finite()) {
            return invalid("center and phase must be finite");
        }
        let ok = match self.kind {
            CurveKind::Circle { radius } => radius > 0.0 && radius.is_finite(),
            CurveKind::Spiral { a, b, turns } => {
                a >= 0.0 && b >= 0.0 && a + b > 0.0 && turns > 0.0 && (a + b * turns).is_finite()
            }
            CurveKind::Loop { lobes, radius } => lobes >= 1 && radius > 0.0 && radius.is_finite(),
            CurveKind::Line { length } => length > 0.0 && length.is_finite(),
        };
        if !ok {
            return invalid(format!("invalid curve parameters {:?}", self.kind));
        }
        Ok(())
    }

    /// Curve point at normalized parameter `u ∈ [0, 1]`.
    pub fn point(&self, u: f64) -> Point2d {
        use std::f64::consts::{PI, TAU};
        let local = match self.kind {
            CurveKind::Circle { radius } => {
                let phi = TAU * u;
                Point2::new(radius * phi.cos(), radius * phi.sin())
            }
            CurveKind::Spiral { a, b, turns } => {
                let phi = TAU * turns * u;
                let r = a + b * phi;
                Point2::new(r * phi.cos(), r * phi.sin())
            }
            CurveKind::Loop { lobes, radius } => {
                // odd k: r = cos(kφ) over [0, π) draws k petals;
                // 4m: r = cos(2mφ) over [0, 2π); 2m with m odd: |cos(mφ)| over [0, 2π)
                let phi;
                let r = if lobes % 2 == 1 {
                    phi = PI * u;
                    (lobes as f64 * phi).cos()
                } else if lobes % 4 == 0 {
                    phi = TAU * u;
                    (lobes as f64 / 2.0 * phi).cos()
                } else {
                    phi = TAU * u;
                    (lobes as f64 / 2.0 * phi).cos().abs()
                } * radius;
                Point2::new(r * phi.cos(), r * phi.sin())
            }
            CurveKind::Line { length } => Point2::new(length * u, 0.0),
        };
        self.center + local.rotated(self.phase)
    }
}

/// Samples a geometric curve. Variable sampling jitters the parameter
/// spacing only, so every point stays exactly on the curve.
pub fn gen_curve(spec: &CurveSpec, rng: &mut SeededRng) -> Result<Trajectory64> {
    spec.validate()?;
    let n = spec.sampling.n();
    let increments = if spec.kind.closed() { n } else { n - 1 };
    let weights: Vec<f64> = match spec.sampling {
        Sampling::Fixed { .. } => vec![1.0; increments],
        Sampling::Variable { jitter, .. } => (0..increments)
            .map(|_| 1.0 + jitter * rng.random_range(-1.0..=1.0))
            .collect(),
    };
    let total: f64 = weights.iter().sum();
    let mut params = Vec::with_capacity(n);
    let mut acc = 0.0;
    params.push(0.0);
    for w in weights.iter().take(n - 1) {
        acc += w;
        params.push(acc / total);
    }
    if !spec.kind.closed() {
        params[n - 1] = 1.0;
    }
    Trajectory64::new(params.into_iter().map(|u| spec.point(u)).collect())
}

/// Batch generation recipes used by the `generate` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BatchSpec {
    Newton {
        spec: NewtonSpec,
        /// Half-width of the uniform perturbation applied to `x0`.
        #[serde(default)]
        x0_jitter: f64,
        #[serde(default)]
        v0_jitter: f64,
    },
    Noisy {
        spec: NewtonSpec,
        #[serde(default)]
        x0_jitter: f64,
        #[serde(default)]
        v0_jitter: f64,
        noise: NoiseSpec,
    },
    Curve {
        spec: CurveSpec,
        #[serde(default)]
        center_jitter: f64,
        /// Draw the phase uniformly from `[0, 2π)`.
        #[serde(default)]
        random_phase: bool,
    },
}

fn jitter(p: Point2d, half_width: f64, rng: &mut SeededRng) -> Point2d {
    if half_width > 0.0 {
        p + Point2::new(
            rng.random_range(-half_width..=half_width),
            rng.random_range(-half_width..=half_width),
        )
    } else {
        p
    }
}

/// Generates `count` single-agent scenes, trajectory `i` from the
/// stream `SeededRng::new(seed).derive(i)`.
pub fn generate_batch(batch: &BatchSpec, count: usize, seed: u64) -> Result<Dataset64> {
    let root = SeededRng::new(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = root.derive(i as u64);
        let t = match batch {
            BatchSpec::Newton { spec, x0_jitter, v0_jitter } => {
                let mut s = *spec;
                s.x0 = jitter(s.x0, *x0_jitter, &mut rng);
                s.v0 = jitter(s.v0, *v0_jitter, &mut rng);
                gen_newton(&s, &mut rng)?
            }
            BatchSpec::Noisy { spec, x0_jitter, v0_jitter, noise } => {
                let mut s = *spec;
                s.x0 = jitter(s.x0, *x0_jitter, &mut rng);
                s.v0 = jitter(s.v0, *v0_jitter, &mut rng);
                let clean = gen_newton(&s, &mut rng)?;
                add_noise(&clean, noise, &mut rng)?
            }
            BatchSpec::Curve { spec, center_jitter, random_phase } => {
                let mut s = *spec;
                s.center = jitter(s.center, *center_jitter, &mut rng);
                if *random_phase {
                    s.phase = rng.random_range(0.0..std::f64::consts::TAU);
                }
                gen_curve(&s, &mut rng)?
            }
        };
        out.push(t);
    }
    let label = match batch {
        BatchSpec::Newton { .. } => "newton",
        BatchSpec::Noisy { .. } => "noisy-newton",
        BatchSpec::Curve { .. } => "curve",
    };
    Ok(Dataset64::from_trajectories(label, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2d {
        Point2::new(x, y)
    }

    fn newton(a: AccelMode, v0: Point2d) -> NewtonSpec {
        NewtonSpec { x0: p(0.0, 0.0), v0, accel: a, steps: 20, dt: 1.0 }
    }

    #[test]
    fn uniform_motion() {
        let t = gen_newton(&newton(AccelMode::Static { a: p(0.0, 0.0) }, p(1.0, 0.0)), &mut SeededRng::new(0)).unwrap();
        let expected: Vec<_> = (0..20).map(|i| p(i as f64, 0.0)).collect();
        assert_eq!(t.points(), &expected[..]);
    }

    #[test]
    fn constant_acceleration_is_i_squared() {
        let t = gen_newton(&newton(AccelMode::Static { a: p(2.0, 0.0) }, p(0.0, 0.0)), &mut SeededRng::new(0)).unwrap();
        assert_eq!(&t.points()[..4], &[p(0.0, 0.0), p(1.0, 0.0), p(4.0, 0.0), p(9.0, 0.0)]);
        for (i, q) in t.points().iter().enumerate() {
            assert_eq!(q.x, (i * i) as f64);
        }
    }

    #[test]
    fn zero_bound_matches_static() {
        let mut spec = newton(AccelMode::Variable { bound: 0.0 }, p(0.7, -0.3));
        spec.dt = 0.37;
        spec.x0 = p(1.1, 2.2);
        let var = gen_newton(&spec, &mut SeededRng::new(5)).unwrap();
        spec.accel = AccelMode::Static { a: p(0.0, 0.0) };
        let stat = gen_newton(&spec, &mut SeededRng::new(5)).unwrap();
        assert_eq!(var, stat);
    }

    #[test]
    fn variable_acceleration_within_bounds() {
        let spec = NewtonSpec { dt: 0.5, ..newton(AccelMode::Variable { bound: 0.3 }, p(1.0, 1.0)) };
        let t = gen_newton(&spec, &mut SeededRng::new(3)).unwrap();
        let pts = t.points();
        for i in 1..pts.len() - 1 {
            let a = (pts[i + 1] - pts[i] * 2.0 + pts[i - 1]) * (1.0 / (0.5 * 0.5));
            assert!(a.x.abs() <= 0.3 + 1e-9 && a.y.abs() <= 0.3 + 1e-9);
        }
    }

    #[test]
    fn invalid_specs() {
        let mut s = newton(AccelMode::Static { a: p(0.0, 0.0) }, p(1.0, 0.0));
        s.steps = 1;
        assert!(gen_newton(&s, &mut SeededRng::new(0)).is_err());
        s.steps = 5;
        s.dt = 0.0;
        assert!(gen_newton(&s, &mut SeededRng::new(0)).is_err());
        s.dt = 1.0;
        s.accel = AccelMode::Variable { bound: -1.0 };
        assert!(gen_newton(&s, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let t = gen_newton(&newton(AccelMode::Static { a: p(0.1, 0.2) }, p(1.0, 0.0)), &mut SeededRng::new(0)).unwrap();
        assert_eq!(add_noise(&t, &NoiseSpec { sigma: 0.0 }, &mut SeededRng::new(1)).unwrap(), t);
        assert!(add_noise(&t, &NoiseSpec { sigma: -1.0 }, &mut SeededRng::new(1)).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let t = gen_newton(&newton(AccelMode::Static { a: p(0.0, 0.0) }, p(1.0, 0.0)), &mut SeededRng::new(0)).unwrap();
        let a = add_noise(&t, &NoiseSpec { sigma: 1.0 }, &mut SeededRng::new(8)).unwrap();
        let b = add_noise(&t, &NoiseSpec { sigma: 1.0 }, &mut SeededRng::new(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, t);
    }

    #[test]
    fn circle_quarter_points() {
        let spec = CurveSpec {
            kind: CurveKind::Circle { radius: 1.0 },
            sampling: Sampling::Fixed { n: 4 },
            center: p(0.0, 0.0),
            phase: 0.0,
        };
        let t = gen_curve(&spec, &mut SeededRng::new(0)).unwrap();
        let expected = [p(1.0, 0.0), p(0.0, 1.0), p(-1.0, 0.0), p(0.0, -1.0)];
        for (q, e) in t.points().iter().zip(expected) {
            assert!(q.distance(e) < 1e-12);
        }
    }

    #[test]
    fn spiral_at_full_turn() {
        let spec = CurveSpec {
            kind: CurveKind::Spiral { a: 0.0, b: 1.0, turns: 1.0 },
            sampling: Sampling::Fixed { n: 5 },
            center: p(3.0, 4.0),
            phase: 0.4,
        };
        let q = spec.point(1.0);
        assert!((q.distance(p(3.0, 4.0)) - std::f64::consts::TAU).abs() < 1e-12);
        let t = gen_curve(&spec, &mut SeededRng::new(0)).unwrap();
        assert_eq!(t.last(), q);
    }

    #[test]
    fn variable_sampling_stays_on_circle_and_monotone() {
        let spec = CurveSpec {
            kind: CurveKind::Circle { radius: 2.5 },
            sampling: Sampling::Variable { n: 40, jitter: 0.9 },
            center: p(-1.0, 7.0),
            phase: 0.0,
        };
        let t = gen_curve(&spec, &mut SeededRng::new(4)).unwrap();
        let mut last_angle = -1.0;
        for q in t.points() {
            assert!((q.distance(p(-1.0, 7.0)) - 2.5).abs() < 1e-9);
            let d = *q - p(-1.0, 7.0);
            let ang = d.y.atan2(d.x).rem_euclid(std::f64::consts::TAU);
            assert!(ang > last_angle);
            last_angle = ang;
        }
    }

    #[test]
    fn loops_and_lines() {
        for lobes in 1..=4 {
            let spec = CurveSpec {
                kind: CurveKind::Loop { lobes, radius: 10.0 },
                sampling: Sampling::Fixed { n: 30 },
                center: p(0.0, 0.0),
                phase: 0.0,
            };
            let t = gen_curve(&spec, &mut SeededRng::new(0)).unwrap();
            assert!(t.points().iter().all(|q| q.norm() <= 10.0 + 1e-9));
        }
        for lobes in 1..=9 {
            let spec = CurveSpec {
                kind: CurveKind::Loop { lobes, radius: 1.0 },
                sampling: Sampling::Fixed { n: 720 },
                center: p(0.0, 0.0),
                phase: 0.0,
            };
            let far: Vec<bool> = gen_curve(&spec, &mut SeededRng::new(0)).unwrap().points().iter().map(|q| q.norm() > 0.9).collect();
            let petals = (0..far.len()).filter(|&i| far[i] && !far[(i + far.len() - 1) % far.len()]).count();
            assert_eq!(petals, lobes as usize, "lobes {lobes}");
        }
        let line = CurveSpec {
            kind: CurveKind::Line { length: 19.0 },
            sampling: Sampling::Fixed { n: 20 },
            center: p(0.0, 0.0),
            phase: std::f64::consts::FRAC_PI_2,
        };
        let t = gen_curve(&line, &mut SeededRng::new(0)).unwrap();
        assert!((t.last().y - 19.0).abs() < 1e-12 && t.last().x.abs() < 1e-12);
    }

    #[test]
    fn invalid_curves() {
        let mut spec = CurveSpec {
            kind: CurveKind::Circle { radius: 0.0 },
            sampling: Sampling::Fixed { n: 10 },
            center: p(0.0, 0.0),
            phase: 0.0,
        };
        assert!(gen_curve(&spec, &mut SeededRng::new(0)).is_err());
        spec.kind = CurveKind::Circle { radius: 1.0 };
        spec.sampling = Sampling::Fixed { n: 2 };
        assert!(gen_curve(&spec, &mut SeededRng::new(0)).is_err());
        spec.sampling = Sampling::Variable { n: 10, jitter: 1.0 };
        assert!(gen_curve(&spec, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn batch_spec_json() {
        let json = r#"{"kind":"newton","spec":{"x0":{"x":0,"y":0},"v0":{"x":1,"y":0},
            "accel":{"mode":"static","a":{"x":0,"y":0}},"steps":20},"x0_jitter":10}"#;
        let b: BatchSpec = serde_json::from_str(json).unwrap();
        let d = generate_batch(&b, 3, 1).unwrap();
        assert_eq!(d.num_trajectories(), 3);
        assert_eq!(d, generate_batch(&b, 3, 1).unwrap());
    }
}
