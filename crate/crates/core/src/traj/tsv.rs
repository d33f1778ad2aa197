//! Line-based TSV dataset format.
//!
//! Data lines are `scene_id \t agent_id \t frame \t x \t y`. Lines starting
//! with `#` are comments. Comments of the form `#! <directive>` carry the
//! metadata needed for lossless round-trips and are ignored by other readers:
//!
//! ```text
//! #! label <free text>
//! #! scene <scene_id> bounds <min_x> <min_y> <max_x> <max_y>
//! #! split <scene_id> <agent_id> <obs_len> <pred_len>
//! ```
//!
//! Coordinates are written with the shortest representation that parses back
//! to the identical value, so write → parse → write is byte-stable.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Dataset, Point2, Rect, Scene, Track, Trajectory, DEFAULT_OBS_LEN, DEFAULT_PRED_LEN};
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

struct Sample<T: Scalar> {
    frame: i64,
    point: Point2<T>,
    line: usize,
}

struct AgentRows<T: Scalar> {
    id: u64,
    rows: Vec<Sample<T>>,
}

struct SceneRows<T: Scalar> {
    id: u64,
    agents: Vec<AgentRows<T>>,
    index: HashMap<u64, usize>,
}

fn parse_err<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, message: message.into() })
}

fn field<F: std::str::FromStr>(raw: &str, name: &str, line: usize) -> Result<F> {
    raw.trim().parse::<F>().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {name} field {raw:?}"),
    })
}

/// Reads a dataset from a TSV file. The label defaults to the file stem.
pub fn parse_dataset<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dataset_str(&text, &stem)
}

/// Parses TSV text; `default_label` is used when no label directive exists.
pub fn parse_dataset_str<T: Scalar>(text: &str, default_label: &str) -> Result<Dataset<T>> {
    let mut label: Option<String> = None;
    let mut bounds: HashMap<u64, Rect<T>> = HashMap::new();
    let mut splits: HashMap<(u64, u64), (usize, usize)> = HashMap::new();
    let mut scenes: Vec<SceneRows<T>> = Vec::new();
    let mut scene_index: HashMap<u64, usize> = HashMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        if let Some(rest) = raw.strip_prefix('#') {
            if let Some(directive) = rest.strip_prefix('!') {
                parse_directive(directive.trim(), line, &mut label, &mut bounds, &mut splits)?;
            }
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 5 {
            return parse_err(line, format!("expected 5 tab-separated fields, found {}", cols.len()));
        }
        let scene: u64 = field(cols[0], "scene_id", line)?;
        let agent: u64 = field(cols[1], "agent_id", line)?;
        let frame: i64 = field(cols[2], "frame", line)?;
        let x: T = field(cols[3], "x", line)?;
        let y: T = field(cols[4], "y", line)?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite { line });
        }
        let si = *scene_index.entry(scene).or_insert_with(|| {
            scenes.push(SceneRows { id: scene, agents: Vec::new(), index: HashMap::new() });
            scenes.len() - 1
        });
        let sr = &mut scenes[si];
        let ai = *sr.index.entry(agent).or_insert_with(|| {
            sr.agents.push(AgentRows { id: agent, rows: Vec::new() });
            sr.agents.len() - 1
        });
        sr.agents[ai].rows.push(Sample { frame, point: Point2::new(x, y), line });
    }

    let mut out = Vec::with_capacity(scenes.len());
    for sr in scenes {
        let mut tracks = Vec::with_capacity(sr.agents.len());
        for mut ar in sr.agents {
            ar.rows.sort_by_key(|r| r.frame);
            let first_line = ar.rows[0].line;
            if ar.rows.len() < 2 {
                return parse_err(first_line, format!(
                    "scene {} agent {} has a single sample", sr.id, ar.id
                ));
            }
            let spacing = ar.rows[1].frame - ar.rows[0].frame;
            for w in ar.rows.windows(2) {
                let d = w[1].frame - w[0].frame;
                if d == 0 {
                    return parse_err(w[1].line, format!("duplicate frame {}", w[1].frame));
                }
                if d != spacing {
                    return Err(Error::NonUniformSpacing { scene: sr.id, agent: ar.id });
                }
            }
            let (obs, pred) = splits
                .get(&(sr.id, ar.id))
                .copied()
                .unwrap_or((DEFAULT_OBS_LEN, DEFAULT_PRED_LEN));
            let pts = ar.rows.iter().map(|r| r.point).collect();
            let trajectory = Trajectory::new(pts)?
                .with_dt(T::lit(spacing as f64))?
                .with_split(obs, pred)
                .map_err(|e| Error::Parse { line: first_line, message: e.to_string() })?;
            tracks.push(Track { agent_id: ar.id, start_frame: ar.rows[0].frame, trajectory });
        }
        out.push(Scene::new(sr.id, tracks, bounds.get(&sr.id).copied())?);
    }
    Ok(Dataset::new(label.unwrap_or_else(|| default_label.to_string()), out))
}

fn parse_directive<T: Scalar>(
    directive: &str,
    line: usize,
    label: &mut Option<String>,
    bounds: &mut HashMap<u64, Rect<T>>,
    splits: &mut HashMap<(u64, u64), (usize, usize)>,
) -> Result<()> {
    let (name, rest) = directive.split_once(' ').unwrap_or((directive, ""));
    match name {
        "label" => *label = Some(rest.to_string()),
        "scene" => {
            let t: Vec<&str> = rest.split_whitespace().collect();
            if t.len() != 6 || t[1] != "bounds" {
                return parse_err(line, "malformed scene directive");
            }
            let id: u64 = field(t[0], "scene_id", line)?;
            let v: Vec<T> = t[2..]
                .iter()
                .map(|s| field(s, "bound", line))
                .collect::<Result<_>>()?;
            let r = Rect::new(v[0], v[1], v[2], v[3])
                .map_err(|e| Error::Parse { line, message: e.to_string() })?;
            bounds.insert(id, r);
        }
        "split" => {
            let t: Vec<&str> = rest.split_whitespace().collect();
            if t.len() != 4 {
                return parse_err(line, "malformed split directive");
            }
            splits.insert(
                (field(t[0], "scene_id", line)?, field(t[1], "agent_id", line)?),
                (field(t[2], "obs_len", line)?, field(t[3], "pred_len", line)?),
            );
        }
        // Unknown directives are comments.
        _ => {}
    }
    Ok(())
}

/// Serializes a dataset to TSV text.
pub fn to_tsv_string<T: Scalar>(d: &Dataset<T>) -> Result<String> {
    d.ensure_non_empty()?;
    let mut s = String::new();
    let label = d.label.replace(['\n', '\r'], " ");
    writeln!(s, "#! label {label}").unwrap();
    for scene in &d.scenes {
        let b = scene.bounds();
        writeln!(
            s,
            "#! scene {} bounds {} {} {} {}",
            scene.id(),
            b.min_x,
            b.min_y,
            b.max_x,
            b.max_y
        )
        .unwrap();
        for tr in scene.tracks() {
            let t = &tr.trajectory;
            if (t.obs_len(), t.pred_len()) != (DEFAULT_OBS_LEN, DEFAULT_PRED_LEN) {
                writeln!(s, "#! split {} {} {} {}", scene.id(), tr.agent_id, t.obs_len(), t.pred_len())
                    .unwrap();
            }
        }
    }
    for scene in &d.scenes {
        for tr in scene.tracks() {
            let dt = tr.trajectory.dt().as_f64();
            if dt.fract() != 0.0 || dt > i64::MAX as f64 {
                return invalid(format!(
                    "scene {} agent {}: dt {dt} is not a whole number of frames",
                    scene.id(),
                    tr.agent_id
                ));
            }
            let step = dt as i64;
            for (i, p) in tr.trajectory.points().iter().enumerate() {
                let frame = tr.start_frame + step * i as i64;
                writeln!(s, "{}\t{}\t{}\t{}\t{}", scene.id(), tr.agent_id, frame, p.x, p.y).unwrap();
            }
        }
    }
    Ok(s)
}

/// Writes a dataset as TSV.
pub fn write_dataset<T: Scalar>(d: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let text = to_tsv_string(d)?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_agent(n: usize) -> String {
        (0..n).map(|i| format!("0\t0\t{i}\t{}\t0.5\n", i as f64 * 1.5)).collect()
    }

    #[test]
    fn twenty_lines_one_agent() {
        let d: Dataset<f64> = parse_dataset_str(&one_agent(20), "x").unwrap();
        assert_eq!(d.scenes.len(), 1);
        assert_eq!(d.num_trajectories(), 1);
        let t = d.trajectories().next().unwrap();
        assert_eq!(t.len(), 20);
        assert_eq!(t.points()[19], Point2::new(28.5, 0.5));
    }

    #[test]
    fn non_numeric_line_reports_line_one() {
        let r: Result<Dataset<f64>> = parse_dataset_str("a\tb\tc\tx\ty\n", "x");
        assert!(matches!(r, Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn interleaved_agents_grouped_and_sorted() {
        let text = "\
# two agents, frames shuffled
0\t2\t1\t10\t11
0\t1\t0\t0\t0
0\t2\t0\t10\t10
0\t1\t2\t2\t0
0\t2\t2\t10\t12
0\t1\t1\t1\t0
";
        let d: Dataset<f64> = parse_dataset_str(text, "x").unwrap();
        let s = &d.scenes[0];
        assert_eq!(s.tracks().len(), 2);
        // manual grouping of the six lines above
        let a2: Vec<_> = s.tracks()[0].trajectory.points().to_vec();
        let a1: Vec<_> = s.tracks()[1].trajectory.points().to_vec();
        assert_eq!(s.tracks()[0].agent_id, 2);
        assert_eq!(a2, vec![Point2::new(10.0, 10.0), Point2::new(10.0, 11.0), Point2::new(10.0, 12.0)]);
        assert_eq!(a1, vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)]);
    }

    #[test]
    fn rejects_non_uniform_spacing() {
        let text = "0\t0\t0\t0\t0\n0\t0\t1\t1\t0\n0\t0\t3\t2\t0\n";
        let r: Result<Dataset<f64>> = parse_dataset_str(text, "x");
        assert!(matches!(r, Err(Error::NonUniformSpacing { scene: 0, agent: 0 })));
    }

    #[test]
    fn rejects_non_finite() {
        let text = "0\t0\t0\t0\t0\n0\t0\t1\tNaN\t0\n";
        let r: Result<Dataset<f64>> = parse_dataset_str(text, "x");
        assert!(matches!(r, Err(Error::NonFinite { line: 2 })));
        let text = "0\t0\t0\t0\t0\n0\t0\t1\tinf\t0\n";
        assert!(parse_dataset_str::<f64>(text, "x").is_err());
    }

    #[test]
    fn wrong_field_count() {
        let r: Result<Dataset<f64>> = parse_dataset_str("0\t0\t0\t1\n", "x");
        assert!(matches!(r, Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn frame_spacing_becomes_dt() {
        let text = "3\t9\t10\t0\t0\n3\t9\t20\t1\t0\n3\t9\t30\t2\t0\n";
        let d: Dataset<f64> = parse_dataset_str(text, "x").unwrap();
        let tr = &d.scenes[0].tracks()[0];
        assert_eq!(tr.trajectory.dt(), 10.0);
        assert_eq!(tr.start_frame, 10);
        assert_eq!(to_tsv_string(&d).unwrap().lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>(),
                   text.lines().collect::<Vec<_>>());
    }

    #[test]
    fn empty_dataset_write_fails() {
        let d: Dataset<f64> = Dataset::new("empty", vec![]);
        assert!(matches!(to_tsv_string(&d), Err(Error::EmptyDataset)));
    }

    #[test]
    fn third_survives_text_precision() {
        let t = Trajectory::new(vec![Point2::new(1.0 / 3.0, 0.0), Point2::new(2.0, 2.0 / 3.0)]).unwrap();
        let d = Dataset::from_trajectories("third", vec![t]);
        let back: Dataset<f64> = parse_dataset_str(&to_tsv_string(&d).unwrap(), "").unwrap();
        let x = back.trajectories().next().unwrap().points()[0].x;
        assert!((x - 1.0 / 3.0).abs() < 1e-9);
        assert_eq!(back, d);
    }

    #[test]
    fn fractional_dt_not_writable() {
        let t = Trajectory::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)])
            .unwrap()
            .with_dt(0.5)
            .unwrap();
        assert!(to_tsv_string(&Dataset::from_trajectories("x", vec![t])).is_err());
    }

    #[test]
    fn f32_datasets_parse() {
        let d: Dataset<f32> = parse_dataset_str(&one_agent(4), "x").unwrap();
        assert_eq!(d.trajectories().next().unwrap().points()[3].x, 4.5f32);
    }
}
