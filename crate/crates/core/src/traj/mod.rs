//! Trajectory, scene and dataset model plus the line-based TSV format.

mod geometry;
pub mod tsv;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

pub use geometry::{Point2, Rect, Vec2};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_OBS_LEN: usize = 8;
pub const DEFAULT_PRED_LEN: usize = 12;

/// Ordered 2D samples at a uniform frame spacing.
///
/// Holds at least two finite points. `obs_len`/`pred_len` describe the
/// observed/future split used by evaluation; they are not required to cover
/// the whole trajectory until a trajectory is evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Trajectory<T: Scalar> {
    points: Vec<Point2<T>>,
    dt: T,
    obs_len: usize,
    pred_len: usize,
}

impl<T: Scalar> Trajectory<T> {
    /// Trajectory with `dt = 1` and the default 8 + 12 split.
    pub fn new(points: Vec<Point2<T>>) -> Result<Self> {
        if points.len() < 2 {
            return invalid(format!("trajectory needs at least 2 points, got {}", points.len()));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::NonFiniteValue(format!("trajectory point ({}, {})", p.x, p.y)));
        }
        Ok(Self {
            points,
            dt: T::one(),
            obs_len: DEFAULT_OBS_LEN,
            pred_len: DEFAULT_PRED_LEN,
        })
    }

    pub fn with_dt(mut self, dt: T) -> Result<Self> {
        if !(dt.is_finite() && dt > T::zero()) {
            return invalid(format!("dt must be finite and positive, got {dt}"));
        }
        self.dt = dt;
        Ok(self)
    }

    pub fn with_split(mut self, obs_len: usize, pred_len: usize) -> Result<Self> {
        if obs_len == 0 || pred_len == 0 {
            return invalid("obs_len and pred_len must be at least 1");
        }
        self.obs_len = obs_len;
        self.pred_len = pred_len;
        Ok(self)
    }

    #[inline]
    pub fn points(&self) -> &[Point2<T>] {
        &self.points
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with `len`.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn dt(&self) -> T {
        self.dt
    }

    #[inline]
    pub fn obs_len(&self) -> usize {
        self.obs_len
    }

    #[inline]
    pub fn pred_len(&self) -> usize {
        self.pred_len
    }

    pub fn first(&self) -> Point2<T> {
        self.points[0]
    }

    pub fn last(&self) -> Point2<T> {
        self.points[self.points.len() - 1]
    }

    /// Checks `len == obs_len + pred_len`.
    pub fn check_split(&self) -> Result<()> {
        let expected = self.obs_len + self.pred_len;
        if self.len() != expected {
            return Err(Error::LengthMismatch { expected, found: self.len() });
        }
        Ok(())
    }

    pub fn observed(&self) -> Result<&[Point2<T>]> {
        self.check_split()?;
        Ok(&self.points[..self.obs_len])
    }

    pub fn future(&self) -> Result<&[Point2<T>]> {
        self.check_split()?;
        Ok(&self.points[self.obs_len..])
    }

    /// Applies `f` to every point, keeping timing and split.
    pub fn map_points(&self, f: impl FnMut(Point2<T>) -> Point2<T>) -> Result<Self> {
        let points = self.points.iter().copied().map(f).collect();
        let mut t = Trajectory::new(points)?;
        t.dt = self.dt;
        t.obs_len = self.obs_len;
        t.pred_len = self.pred_len;
        Ok(t)
    }

    pub fn path_length(&self) -> T {
        self.points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    pub fn steps(&self) -> impl Iterator<Item = Vec2<T>> + '_ {
        self.points.windows(2).map(|w| w[1] - w[0])
    }
}

/// Tightest axis-aligned box around every sample of `t`.
pub fn tight_bbox<T: Scalar>(t: &Trajectory<T>) -> Rect<T> {
    Rect::bounding(t.points()).expect("trajectory has at least two points")
}

/// One agent's trajectory inside a scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Track<T: Scalar> {
    pub agent_id: u64,
    /// Frame of the first sample.
    pub start_frame: i64,
    pub trajectory: Trajectory<T>,
}

/// Agent trajectories sharing one frame clock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Scene<T: Scalar> {
    id: u64,
    frame0: i64,
    bounds: Rect<T>,
    tracks: Vec<Track<T>>,
}

impl<T: Scalar> Scene<T> {
    /// Builds a scene; `bounds = None` uses the tight box of all samples.
    pub fn new(id: u64, tracks: Vec<Track<T>>, bounds: Option<Rect<T>>) -> Result<Self> {
        if tracks.is_empty() {
            return invalid(format!("scene {id} has no tracks"));
        }
        let mut seen = HashSet::new();
        for tr in &tracks {
            if !seen.insert(tr.agent_id) {
                return invalid(format!("scene {id}: duplicate agent id {}", tr.agent_id));
            }
        }
        let tight = tracks
            .iter()
            .map(|tr| tight_bbox(&tr.trajectory))
            .reduce(|a, b| a.union(&b))
            .expect("non-empty");
        let bounds = match bounds {
            Some(b) => {
                let inside = tracks
                    .iter()
                    .flat_map(|tr| tr.trajectory.points())
                    .all(|p| b.contains(*p));
                if !inside {
                    return invalid(format!("scene {id}: samples outside scene bounds"));
                }
                b
            }
            None => tight,
        };
        let frame0 = tracks.iter().map(|t| t.start_frame).min().expect("non-empty");
        Ok(Self { id, frame0, bounds, tracks })
    }

    /// Single-agent scene (agent 0, frame 0).
    pub fn single(id: u64, trajectory: Trajectory<T>) -> Self {
        Self::new(id, vec![Track { agent_id: 0, start_frame: 0, trajectory }], None)
            .expect("single track scene is valid")
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn frame0(&self) -> i64 {
        self.frame0
    }

    pub fn bounds(&self) -> Rect<T> {
        self.bounds
    }

    pub fn tracks(&self) -> &[Track<T>] {
        &self.tracks
    }

    pub fn into_tracks(self) -> Vec<Track<T>> {
        self.tracks
    }
}

/// Labelled collection of scenes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dataset<T: Scalar> {
    pub label: String,
    pub scenes: Vec<Scene<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(label: impl Into<String>, scenes: Vec<Scene<T>>) -> Self {
        Self { label: label.into(), scenes }
    }

    /// Wraps each trajectory in its own single-agent scene, ids `0..n`.
    pub fn from_trajectories(label: impl Into<String>, trajs: Vec<Trajectory<T>>) -> Self {
        let scenes = trajs
            .into_iter()
            .enumerate()
            .map(|(i, t)| Scene::single(i as u64, t))
            .collect();
        Self::new(label, scenes)
    }

    /// Trajectories in scene order, then track order.
    pub fn trajectories(&self) -> impl Iterator<Item = &Trajectory<T>> + '_ {
        self.scenes
            .iter()
            .flat_map(|s| s.tracks.iter().map(|t| &t.trajectory))
    }

    pub fn num_trajectories(&self) -> usize {
        self.scenes.iter().map(|s| s.tracks.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.num_trajectories() == 0
    }

    pub fn ensure_non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyDataset)
        } else {
            Ok(())
        }
    }
}
