//! Profile-matched synthetic datasets, rigid-motion augmentation and
//! proportion-controlled mixing.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{classify, unique_points, ClassifyConfig, QualClass};
use crate::error::{invalid, Error, Result};
use crate::kinematics::{gen_curve, gen_newton, AccelMode, CurveKind, CurveSpec, NewtonSpec, Sampling};
use crate::rng::SeededRng;
use crate::traj::{tight_bbox, Point2, Scene, Track};
use crate::{Dataset64, Point2d, Trajectory64};

/// Samples per synthetic trajectory.
pub const SYN_LEN: usize = 20;

/// Trajectory counts per unique-point count 1..=20 of the reference drone
/// recordings (2829 trajectories).
pub const REFERENCE_UNIQUE_COUNTS: [u32; SYN_LEN] =
    [145, 62, 71, 69, 57, 41, 51, 28, 26, 24, 22, 25, 17, 24, 22, 22, 39, 30, 76, 1978];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileTarget {
    /// Proportion of trajectories with `i + 1` unique points.
    pub unique_hist: Vec<f64>,
    pub class_mix: BTreeMap<QualClass, f64>,
}

impl Default for ProfileTarget {
    /// Reference unique-point proportions with a class mix that puts every
    /// 1-point trajectory in T1 and every 3–9-point trajectory in T2/T3.
    fn default() -> Self {
        let total: u32 = REFERENCE_UNIQUE_COUNTS.iter().sum();
        let hist: Vec<f64> = REFERENCE_UNIQUE_COUNTS.iter().map(|c| *c as f64 / total as f64).collect();
        let t1 = hist[0];
        let small: f64 = hist[2..9].iter().sum();
        let mut mix = BTreeMap::new();
        mix.insert(QualClass::T1, t1);
        mix.insert(QualClass::T2, 0.06);
        mix.insert(QualClass::T3, small - 0.06);
        mix.insert(QualClass::T4, 0.04);
        mix.insert(QualClass::T5, 0.02);
        mix.insert(QualClass::T6, 0.04);
        mix.insert(QualClass::T2F, 0.015);
        mix.insert(QualClass::T3F, 0.02);
        let rest: f64 = mix.values().sum();
        mix.insert(QualClass::T7, 1.0 - rest);
        Self { unique_hist: hist, class_mix: mix }
    }
}

/// Unique-point counts each class recipe can realize.
pub fn feasible_unique(c: QualClass) -> &'static [usize] {
    const T1: [usize; 1] = [1];
    const T2: [usize; 6] = [3, 4, 5, 6, 7, 8];
    const T3: [usize; 7] = [3, 4, 5, 6, 7, 8, 9];
    const LOOP: [usize; 11] = [10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20];
    const FULL: [usize; 1] = [20];
    const T6: [usize; 7] = [11, 12, 13, 14, 15, 16, 17];
    const T7: [usize; 12] = [2, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20];
    match c {
        QualClass::T1 => &T1,
        QualClass::T2 => &T2,
        QualClass::T3 => &T3,
        QualClass::T4 => &LOOP,
        QualClass::T5 | QualClass::T2F | QualClass::T3F => &FULL,
        QualClass::T6 => &T6,
        QualClass::T7 => &T7,
        QualClass::Other => &[],
    }
}

impl ProfileTarget {
    pub fn validate(&self) -> Result<()> {
        if self.unique_hist.len() != SYN_LEN {
            return Err(Error::InvalidConfig(format!("unique_hist needs {SYN_LEN} entries, got {}", self.unique_hist.len())));
        }
        for (name, vals) in [
            ("unique_hist", self.unique_hist.clone()),
            ("class_mix", self.class_mix.values().copied().collect::<Vec<_>>()),
        ] {
            if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidConfig(format!("{name} has negative or non-finite entries")));
            }
            let s: f64 = vals.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("{name} sums to {s}")));
            }
        }
        if self.class_mix.get(&QualClass::Other).is_some_and(|p| *p > 0.0) {
            return Err(Error::InvalidConfig("class 'other' has no generator".into()));
        }
        Ok(())
    }

    /// Joint class × unique-count proportions consistent with both
    /// marginals, restricted to feasible cells.
    pub fn joint(&self) -> Result<BTreeMap<(QualClass, usize), f64>> {
        self.validate()?;
        let classes: Vec<QualClass> = self.class_mix.keys().copied().filter(|c| self.class_mix[c] > 0.0).collect();
        let nc = classes.len();
        // nodes: 0 source, 1..=nc classes, nc+1..=nc+20 counts, nc+21 sink
        let n = nc + SYN_LEN + 2;
        let sink = n - 1;
        let mut cap = vec![vec![0.0f64; n]; n];
        for (i, c) in classes.iter().enumerate() {
            cap[0][1 + i] = self.class_mix[c];
            for &u in feasible_unique(*c) {
                cap[1 + i][nc + u] = f64::INFINITY;
            }
        }
        for u in 1..=SYN_LEN {
            cap[nc + u][sink] = self.unique_hist[u - 1];
        }
        let flow = max_flow(&mut cap, 0, sink);
        if flow < 1.0 - 1e-9 {
            return Err(Error::Infeasible(format!(
                "class mix and unique-point histogram are incompatible (only {:.6} of the mass can be matched)",
                flow
            )));
        }
        let mut out = BTreeMap::new();
        for (i, c) in classes.iter().enumerate() {
            for &u in feasible_unique(*c) {
                // residual reverse capacity carries the flow on the edge
                let f = cap[nc + u][1 + i];
                if f > 1e-15 {
                    out.insert((*c, u), f);
                }
            }
        }
        Ok(out)
    }
}

/// Edmonds–Karp on a dense real-capacity graph; `cap` becomes the residual.
fn max_flow(cap: &mut [Vec<f64>], s: usize, t: usize) -> f64 {
    let n = cap.len();
    let mut total = 0.0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for w in 0..n {
                if prev[w] == usize::MAX && cap[v][w] > 1e-15 {
                    prev[w] = v;
                    queue.push_back(w);
                }
            }
        }
        if prev[t] == usize::MAX {
            return total;
        }
        let mut b = f64::INFINITY;
        let mut v = t;
        while v != s {
            b = b.min(cap[prev[v]][v]);
            v = prev[v];
        }
        let mut v = t;
        while v != s {
            let u = prev[v];
            cap[u][v] -= b;
            cap[v][u] += b;
            v = u;
        }
        total += b;
    }
}

/// Integer counts summing to `total`, by largest remainder.
fn apportion<K: Clone + Ord>(shares: &BTreeMap<K, f64>, total: usize) -> BTreeMap<K, usize> {
    let mass: f64 = shares.values().sum();
    let mut out: BTreeMap<K, usize> = BTreeMap::new();
    let mut rema: Vec<(f64, K)> = Vec::new();
    let mut assigned = 0;
    for (k, v) in shares {
        let exact = v / mass * total as f64;
        let base = exact.floor() as usize;
        assigned += base;
        out.insert(k.clone(), base);
        rema.push((exact - base as f64, k.clone()));
    }
    rema.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    for (_, k) in rema.into_iter().take(total.saturating_sub(assigned)) {
        *out.get_mut(&k).expect("key present") += 1;
    }
    out
}

fn uniform_point(rng: &mut SeededRng, lo: f64, hi: f64) -> Point2d {
    Point2::new(rng.random_range(lo..hi), rng.random_range(lo..hi))
}

fn polar(r: f64, phi: f64) -> Point2d {
    Point2::new(r * phi.cos(), r * phi.sin())
}

/// Repeats each of the distinct `pts` at least once, in order, so the
/// result has `SYN_LEN` samples.
fn dwell(pts: &[Point2d], rng: &mut SeededRng) -> Vec<Point2d> {
    let u = pts.len();
    if u >= SYN_LEN {
        return pts[..SYN_LEN].to_vec();
    }
    let mut cuts: Vec<usize> = index::sample(rng, SYN_LEN - 1, u - 1).into_iter().map(|c| c + 1).collect();
    cuts.sort_unstable();
    cuts.push(SYN_LEN);
    let mut out = Vec::with_capacity(SYN_LEN);
    let mut start = 0;
    for (p, end) in pts.iter().zip(cuts) {
        out.extend(std::iter::repeat_n(*p, end - start));
        start = end;
    }
    out
}

fn recipe(class: QualClass, u: usize, rng: &mut SeededRng) -> Result<Vec<Point2d>> {
    use std::f64::consts::TAU;
    let origin = uniform_point(rng, 50.0, 950.0);
    let pts = match class {
        QualClass::T1 => vec![origin; SYN_LEN],
        QualClass::T2 => {
            let mut p = uniform_point(rng, 0.0, 4.5);
            let mut distinct = Vec::with_capacity(u);
            for _ in 0..u {
                distinct.push(origin + p);
                p += uniform_point(rng, -1.5, 1.5);
                p = Point2::new(p.x.clamp(0.0, 4.5), p.y.clamp(0.0, 4.5));
            }
            dwell(&distinct, rng)
        }
        QualClass::T3 => {
            let phi = rng.random_range(0.0..TAU);
            let dir = polar(1.0, phi);
            let perp = Point2::new(-dir.y, dir.x);
            let mut p = origin;
            let mut distinct = vec![p];
            for _ in 1..u {
                p = p + dir * rng.random_range(6.0..10.0) + perp * rng.random_range(-3.0..3.0);
                distinct.push(p);
            }
            dwell(&distinct, rng)
        }
        QualClass::T4 => {
            let chord = 2.0 * (std::f64::consts::PI / u as f64).sin();
            let r_max = (0.95 * 5.0 / chord).min(12.0);
            let spec = CurveSpec {
                kind: CurveKind::Circle { radius: rng.random_range(4.0..r_max) },
                sampling: Sampling::Fixed { n: u },
                center: origin,
                phase: rng.random_range(0.0..TAU),
            };
            dwell(gen_curve(&spec, rng)?.points(), rng)
        }
        QualClass::T5 => {
            let mut p = origin;
            let mut pts = vec![p];
            for _ in 1..SYN_LEN {
                p += polar(rng.random_range(6.0..15.0), rng.random_range(0.0..TAU));
                pts.push(p);
            }
            pts
        }
        QualClass::T6 => {
            let m = u - 1;
            let r = SYN_LEN - u;
            let mut phi = rng.random_range(0.0..TAU);
            let mut p = origin;
            let mut fwd = vec![p];
            for _ in 0..m {
                phi += rng.random_range(-0.3..0.3);
                p += polar(rng.random_range(1.0..3.0), phi);
                fwd.push(p);
            }
            let back: Vec<Point2d> = (1..=r).map(|j| fwd[m - j]).collect();
            fwd.extend(back);
            fwd
        }
        QualClass::T2F | QualClass::T3F => {
            let phi = rng.random_range(0.0..TAU);
            let (speed, amp) = if class == QualClass::T2F {
                (rng.random_range(8.0..15.0), 0.0)
            } else {
                (rng.random_range(30.0..50.0), rng.random_range(4.0..10.0))
            };
            let d = polar(speed, phi);
            let perp = Point2::new(-d.y, d.x) * (1.0 / speed);
            (0..SYN_LEN)
                .map(|i| {
                    let wave = perp * (amp * (TAU * i as f64 / (SYN_LEN - 1) as f64).sin());
                    let wobble = if class == QualClass::T2F { uniform_point(rng, -0.5, 0.5) } else { uniform_point(rng, -0.1, 0.1) };
                    origin + d * i as f64 + wave + wobble
                })
                .collect()
        }
        QualClass::T7 => {
            if u == 2 {
                let b = origin + polar(rng.random_range(0.5..10.0), rng.random_range(0.0..TAU));
                dwell(&[origin, b], rng)
            } else {
                let spec = NewtonSpec {
                    x0: origin,
                    v0: polar(rng.random_range(0.5..4.0), rng.random_range(0.0..TAU)),
                    accel: AccelMode::Static { a: polar(rng.random_range(0.0..0.02), rng.random_range(0.0..TAU)) },
                    steps: u,
                    dt: 1.0,
                };
                dwell(gen_newton(&spec, rng)?.points(), rng)
            }
        }
        QualClass::Other => return invalid("class 'other' has no generator"),
    };
    Ok(pts)
}

/// Maximum recipe attempts per trajectory.
pub const MAX_ATTEMPTS: usize = 200;

/// One trajectory of `class` with exactly `u` unique points, verified
/// against [`classify`] with the default configuration.
pub fn generate_class(class: QualClass, u: usize, rng: &mut SeededRng) -> Result<Trajectory64> {
    if !feasible_unique(class).contains(&u) {
        return Err(Error::Infeasible(format!("{class} cannot have {u} unique points")));
    }
    let cfg = ClassifyConfig::default();
    for _ in 0..MAX_ATTEMPTS {
        let t = Trajectory64::new(recipe(class, u, rng)?)?;
        if unique_points(t.points(), cfg.unique_tol) == u && classify(&t, &cfg)? == class {
            return Ok(t);
        }
    }
    Err(Error::Infeasible(format!("could not realize {class} with {u} unique points")))
}

/// Generates `count` 20-sample trajectories whose class and unique-point
/// proportions follow `target`. Cell counts of the joint allocation are
/// apportioned by largest remainder, then the order is shuffled; trajectory
/// `i` draws from `rng.derive(i)`.
pub fn gen_synsdd(target: &ProfileTarget, count: usize, rng: &SeededRng) -> Result<Dataset64> {
    if count == 0 {
        return invalid("count must be at least 1");
    }
    let joint = target.joint()?;
    let counts = apportion(&joint, count);
    let mut labels: Vec<(QualClass, usize)> =
        counts.iter().flat_map(|(k, n)| std::iter::repeat_n(*k, *n)).collect();
    labels.shuffle(&mut rng.derive(u64::MAX));
    let trajs = labels
        .iter()
        .enumerate()
        .map(|(i, (c, u))| generate_class(*c, *u, &mut rng.derive(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset64::from_trajectories("syn-sdd", trajs))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RtOptions {
    pub rotate: bool,
    pub translate: bool,
}

impl Default for RtOptions {
    fn default() -> Self {
        Self { rotate: true, translate: true }
    }
}

/// Replicates every scene `n_rot` times under a random rigid motion: a
/// rotation about the first point of the scene's first track, then a
/// translation moving that point to a uniform location inside the scene
/// bounds. Replica `r` of scene `id` gets id `id·n_rot + r`; its bounds grow
/// to contain the moved samples.
pub fn rt_augment(d: &Dataset64, n_rot: usize, opts: RtOptions, rng: &mut SeededRng) -> Result<Dataset64> {
    if n_rot == 0 {
        return invalid("n_rot must be at least 1");
    }
    let mut scenes = Vec::with_capacity(d.scenes.len() * n_rot);
    for s in &d.scenes {
        let pivot = s.tracks()[0].trajectory.first();
        let b = s.bounds();
        for r in 0..n_rot {
            let angle = if opts.rotate { rng.random_range(0.0..std::f64::consts::TAU) } else { 0.0 };
            let target = if opts.translate {
                let x = if b.width() > 0.0 { rng.random_range(b.min_x..=b.max_x) } else { b.min_x };
                let y = if b.height() > 0.0 { rng.random_range(b.min_y..=b.max_y) } else { b.min_y };
                Point2::new(x, y)
            } else {
                pivot
            };
            let motion = |p: Point2d| {
                if angle == 0.0 && target == pivot {
                    p
                } else {
                    target + (p - pivot).rotated(angle)
                }
            };
            let tracks = s
                .tracks()
                .iter()
                .map(|tr| {
                    Ok(Track { agent_id: tr.agent_id, start_frame: tr.start_frame, trajectory: tr.trajectory.map_points(motion)? })
                })
                .collect::<Result<Vec<_>>>()?;
            let bounds = tracks.iter().fold(b, |acc, tr| acc.union(&tight_bbox(&tr.trajectory)));
            let id = s
                .id()
                .checked_mul(n_rot as u64)
                .and_then(|v| v.checked_add(r as u64))
                .ok_or_else(|| Error::InvalidArgument("scene id overflow".into()))?;
            scenes.push(Scene::new(id, tracks, Some(bounds))?);
        }
    }
    Ok(Dataset64::new(d.label.clone(), scenes))
}

#[derive(Clone, Debug)]
pub struct MixSpec<'a> {
    pub base: &'a Dataset64,
    pub synth: &'a Dataset64,
    /// Synthetic share of the output, in `(0, 1]`.
    pub fraction: f64,
    pub seed: u64,
}

/// Number of synthetic trajectories added to `base_len` base trajectories.
pub fn synth_needed(base_len: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return invalid(format!("fraction must lie in (0, 1], got {fraction}"));
    }
    if fraction == 1.0 {
        return if base_len == 0 {
            Ok(0)
        } else {
            Err(Error::Infeasible("fraction 1 leaves no room for base trajectories".into()))
        };
    }
    Ok((fraction / (1.0 - fraction) * base_len as f64 - 1e-9).ceil().max(0.0) as usize)
}

/// All base trajectories plus a uniform sample of synthetic ones, shuffled
/// by seed, one trajectory per output scene.
pub fn mix(spec: &MixSpec<'_>) -> Result<Dataset64> {
    let base: Vec<&Trajectory64> = spec.base.trajectories().collect();
    let synth: Vec<&Trajectory64> = spec.synth.trajectories().collect();
    let need = synth_needed(base.len(), spec.fraction)?;
    if need > synth.len() {
        return Err(Error::Infeasible(format!(
            "need {need} synthetic trajectories, pool has {}",
            synth.len()
        )));
    }
    let root = SeededRng::new(spec.seed);
    let picked = index::sample(&mut root.derive(0), synth.len(), need);
    let mut all: Vec<Trajectory64> = base.into_iter().cloned().collect();
    all.extend(picked.into_iter().map(|i| synth[i].clone()));
    all.shuffle(&mut root.derive(1));
    Ok(Dataset64::from_trajectories(format!("{}+{}", spec.base.label, spec.synth.label), all))
}
