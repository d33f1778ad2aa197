//! Trajectory distances under matrix norms, k-medoids and bounding-box bins.
//!
//! A trajectory of `n` points is treated as an `n × 2` matrix and the
//! distance between two trajectories is a norm of their difference.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::traj::{tight_bbox, Dataset, Trajectory, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Square root of the sum of squared entries.
    #[serde(rename = "fro")]
    Frobenius,
    /// Entrywise absolute sum.
    L1,
    /// Operator 2-norm (largest singular value).
    L2op,
    /// Largest absolute entry.
    Linf,
}

impl NormKind {
    pub const ALL: [NormKind; 4] = [NormKind::Frobenius, NormKind::L1, NormKind::L2op, NormKind::Linf];

    pub fn as_str(&self) -> &'static str {
        match self {
            NormKind::Frobenius => "fro",
            NormKind::L1 => "l1",
            NormKind::L2op => "l2op",
            NormKind::Linf => "linf",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        NormKind::ALL
            .into_iter()
            .find(|n| n.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown norm {s:?}")))
    }
}

/// Norm of an `n × 2` matrix given by its rows.
pub fn matrix_norm<T: Scalar>(rows: &[Vec2<T>], norm: NormKind) -> T {
    match norm {
        NormKind::Frobenius => rows.iter().map(|r| r.norm_sq()).sum::<T>().sqrt(),
        NormKind::L1 => rows.iter().map(|r| r.x.abs() + r.y.abs()).sum(),
        NormKind::Linf => rows
            .iter()
            .map(|r| r.x.abs().max(r.y.abs()))
            .fold(T::zero(), T::max),
        NormKind::L2op => {
            // largest eigenvalue of the 2x2 Gram matrix [[a, b], [b, c]]
            let (mut a, mut b, mut c) = (T::zero(), T::zero(), T::zero());
            for r in rows {
                a = a + r.x * r.x;
                b = b + r.x * r.y;
                c = c + r.y * r.y;
            }
            let half = T::lit(0.5);
            let mid = (a + c) * half;
            let rad = ((a - c) * half).hypot(b);
            (mid + rad).max(T::zero()).sqrt()
        }
    }
}

pub fn traj_distance<T: Scalar>(a: &Trajectory<T>, b: &Trajectory<T>, norm: NormKind) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), found: b.len() });
    }
    let diff: Vec<_> = a.points().iter().zip(b.points()).map(|(p, q)| *p - *q).collect();
    Ok(matrix_norm(&diff, norm))
}

/// Dense symmetric distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix<T: Scalar> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DistanceMatrix<T> {
    pub fn from_trajectories(trajs: &[&Trajectory<T>], norm: NormKind) -> Result<Self> {
        let n = trajs.len();
        if let Some(first) = trajs.first() {
            if let Some(bad) = trajs.iter().find(|t| t.len() != first.len()) {
                return Err(Error::LengthMismatch { expected: first.len(), found: bad.len() });
            }
        }
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = traj_distance(trajs[i], trajs[j], norm)?;
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Ok(Self { n, data })
    }

    /// From a full row-major matrix.
    pub fn from_rows(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::LengthMismatch { expected: n * n, found: data.len() });
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Clustering<T: Scalar> {
    /// Cluster id per trajectory; ids index `medoids`.
    pub assignments: Vec<usize>,
    /// Medoid trajectory indices in ascending order.
    pub medoids: Vec<usize>,
    pub k: usize,
    pub total_cost: T,
    /// Total cost after initialization and after each accepted move.
    pub cost_history: Vec<T>,
}

impl<T: Scalar> Clustering<T> {
    /// Sum of member distances to the medoid, per cluster.
    pub fn cluster_costs(&self, dist: &DistanceMatrix<T>) -> Vec<T> {
        let mut costs = vec![T::zero(); self.k];
        for (i, &c) in self.assignments.iter().enumerate() {
            costs[c] = costs[c] + dist.get(i, self.medoids[c]);
        }
        costs
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignments {
            sizes[c] += 1;
        }
        sizes
    }

    /// CSV with header `index,cluster,is_medoid`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,cluster,is_medoid\n");
        for (i, c) in self.assignments.iter().enumerate() {
            let m = self.medoids[*c] == i;
            s.push_str(&format!("{i},{c},{m}\n"));
        }
        s
    }
}

/// Nearest medoid per point; lowest medoid index wins ties, and a medoid
/// always belongs to its own cluster.
fn assign<T: Scalar>(dist: &DistanceMatrix<T>, medoids: &[usize]) -> (Vec<usize>, T) {
    let mut assignments = vec![0; dist.len()];
    let mut cost = T::zero();
    for (i, slot) in assignments.iter_mut().enumerate() {
        if let Some(own) = medoids.iter().position(|&m| m == i) {
            *slot = own;
            continue;
        }
        let mut best = 0;
        for c in 1..medoids.len() {
            let (dc, db) = (dist.get(i, medoids[c]), dist.get(i, medoids[best]));
            if dc < db || (dc == db && medoids[c] < medoids[best]) {
                best = c;
            }
        }
        *slot = best;
        cost = cost + dist.get(i, medoids[best]);
    }
    (assignments, cost)
}

fn total_cost<T: Scalar>(dist: &DistanceMatrix<T>, medoids: &[usize]) -> T {
    (0..dist.len())
        .map(|i| medoids.iter().map(|&m| dist.get(i, m)).fold(T::infinity(), T::min))
        .sum()
}

fn farthest_point_init<T: Scalar>(dist: &DistanceMatrix<T>, k: usize, rng: &mut SeededRng) -> Vec<usize> {
    let n = dist.len();
    let mut medoids = vec![rng.random_range(0..n)];
    let mut nearest: Vec<T> = (0..n).map(|i| dist.get(i, medoids[0])).collect();
    while medoids.len() < k {
        let mut pick = None;
        for i in 0..n {
            if medoids.contains(&i) {
                continue;
            }
            match pick {
                None => pick = Some(i),
                Some(p) if nearest[i] > nearest[p] => pick = Some(i),
                _ => {}
            }
        }
        let p = pick.expect("k <= n");
        medoids.push(p);
        for (i, v) in nearest.iter_mut().enumerate() {
            *v = v.min(dist.get(i, p));
        }
    }
    medoids
}

/// Medoid sets up to this many candidates are searched exhaustively after
/// the swap phase.
pub const EXACT_LIMIT: u128 = 5000;

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > EXACT_LIMIT {
            return acc;
        }
    }
    acc
}

/// Advances `c` to the next k-subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let Some(i) = (0..k).rev().find(|&i| c[i] < n - k + i) else {
        return false;
    };
    c[i] += 1;
    for j in i + 1..k {
        c[j] = c[j - 1] + 1;
    }
    true
}

/// PAM-style k-medoids on a precomputed distance matrix.
///
/// Medoids start from a seeded farthest-point pick. Each iteration first
/// tries the within-cluster medoid update; when that no longer improves the
/// cost, it applies the best improving single medoid/non-medoid swap. Stops
/// when nothing improves or after `max_iter` iterations. When at most
/// [`EXACT_LIMIT`] medoid sets exist, they are then enumerated and the
/// global optimum is kept.
pub fn kmedoids_matrix<T: Scalar>(
    dist: &DistanceMatrix<T>,
    k: usize,
    rng: &mut SeededRng,
    max_iter: usize,
) -> Result<Clustering<T>> {
    let n = dist.len();
    if k == 0 {
        return invalid("k must be at least 1");
    }
    if k > n {
        return invalid(format!("k = {k} exceeds the {n} trajectories"));
    }
    let mut medoids = farthest_point_init(dist, k, rng);
    let mut cost = total_cost(dist, &medoids);
    let mut history = vec![cost];

    for _ in 0..max_iter {
        let (assignments, _) = assign(dist, &medoids);

        let mut updated = medoids.clone();
        for (c, slot) in updated.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| assignments[i] == c).collect();
            let within = |m: usize| members.iter().map(|&i| dist.get(i, m)).sum::<T>();
            let mut best = *slot;
            let mut best_cost = within(best);
            for &m in &members {
                let mc = within(m);
                if mc < best_cost || (mc == best_cost && m < best) {
                    best = m;
                    best_cost = mc;
                }
            }
            *slot = best;
        }
        let updated_cost = total_cost(dist, &updated);
        if updated_cost < cost {
            medoids = updated;
            cost = updated_cost;
            history.push(cost);
            continue;
        }

        let mut best_swap: Option<(usize, usize, T)> = None;
        for slot in 0..k {
            for h in 0..n {
                if medoids.contains(&h) {
                    continue;
                }
                let mut trial = medoids.clone();
                trial[slot] = h;
                let c = total_cost(dist, &trial);
                let better = match best_swap {
                    None => c < cost,
                    Some((_, _, bc)) => c < bc,
                };
                if better {
                    best_swap = Some((slot, h, c));
                }
            }
        }
        match best_swap {
            Some((slot, h, c)) => {
                medoids[slot] = h;
                cost = c;
                history.push(cost);
            }
            None => break,
        }
    }

    if binomial(n, k) <= EXACT_LIMIT {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            let c = total_cost(dist, &combo);
            if c < cost {
                medoids.clone_from(&combo);
                cost = c;
                history.push(cost);
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
    }

    medoids.sort_unstable();
    let (assignments, total_cost) = assign(dist, &medoids);
    Ok(Clustering { assignments, medoids, k, total_cost, cost_history: history })
}

pub fn kmedoids_trajectories<T: Scalar>(
    trajs: &[&Trajectory<T>],
    k: usize,
    norm: NormKind,
    rng: &mut SeededRng,
    max_iter: usize,
) -> Result<Clustering<T>> {
    let dist = DistanceMatrix::from_trajectories(trajs, norm)?;
    kmedoids_matrix(&dist, k, rng, max_iter)
}

/// k-medoids over every trajectory of `d`, indexed in dataset order.
pub fn kmedoids<T: Scalar>(
    d: &Dataset<T>,
    k: usize,
    norm: NormKind,
    rng: &mut SeededRng,
    max_iter: usize,
) -> Result<Clustering<T>> {
    d.ensure_non_empty()?;
    let trajs: Vec<&Trajectory<T>> = d.trajectories().collect();
    kmedoids_trajectories(&trajs, k, norm, rng, max_iter)
}

/// Groups trajectory indices by `(ceil(w / bin_w), ceil(h / bin_h))` of
/// their tight bounding box; degenerate extents fall in bin 1.
pub fn bbox_cluster<T: Scalar>(
    d: &Dataset<T>,
    bin_w: f64,
    bin_h: f64,
) -> Result<BTreeMap<(u64, u64), Vec<usize>>> {
    if !(bin_w > 0.0 && bin_h > 0.0 && bin_w.is_finite() && bin_h.is_finite()) {
        return invalid(format!("bin dimensions must be positive, got {bin_w} x {bin_h}"));
    }
    let mut bins: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    for (i, t) in d.trajectories().enumerate() {
        let b = tight_bbox(t);
        let bx = (b.width().as_f64() / bin_w).ceil().max(1.0) as u64;
        let by = (b.height().as_f64() / bin_h).ceil().max(1.0) as u64;
        bins.entry((bx, by)).or_default().push(i);
    }
    Ok(bins)
}
