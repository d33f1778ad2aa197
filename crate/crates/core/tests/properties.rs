use proptest::collection::vec;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use trajkit::analysis::{classify, profile, unique_points, ClassifyConfig, QualClass};
use trajkit::cluster::{kmedoids, matrix_norm, traj_distance, NormKind};
use trajkit::interaction::{simulate_scene, square_bounds, HmmAgentConfig, SceneConfig};
use trajkit::kinematics::{gen_newton, AccelMode, NewtonSpec};
use trajkit::metrics::{abscore, AbScoreReport, ade, evaluate, fde, turn_score, EvalConfig};
use trajkit::policy::{reward_fn, AgentProfile, AgentState};
use trajkit::synth::{mix, rt_augment, synth_needed, MixSpec, RtOptions};
use trajkit::traj::tsv::{parse_dataset_str, to_tsv_string};
use trajkit::traj::{tight_bbox, Point2, Scene, Track};
use trajkit::{Dataset64, Point2d, SeededRng, Trajectory64};

const NORMS: [NormKind; 4] = [NormKind::Frobenius, NormKind::L1, NormKind::L2op, NormKind::Linf];

fn point() -> impl Strategy<Value = Point2d> {
    (-100.0..100.0f64, -100.0..100.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

fn path(min: usize, max: usize) -> impl Strategy<Value = Vec<Point2d>> {
    vec(point(), min..max)
}

fn traj(points: Vec<Point2d>) -> Trajectory64 {
    Trajectory64::new(points).unwrap()
}

/// Angle factor of every turn; differs only when a turn straddles a
/// ceiling boundary.
fn factors(r: &AbScoreReport<f64>) -> Vec<f64> {
    r.per_turn.iter().map(|t| if t.cross_mag > 0.0 { (t.score / t.cross_mag).round() } else { 0.0 }).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tsv_round_trip_is_stable(paths in vec(path(2, 12), 1..6)) {
        let d = Dataset64::from_trajectories("prop", paths.into_iter().map(traj).collect());
        let first = to_tsv_string(&d).unwrap();
        let back: Dataset64 = parse_dataset_str(&first, "x").unwrap();
        prop_assert_eq!(&first, &to_tsv_string(&back).unwrap());
        prop_assert_eq!(back, d);
    }

    #[test]
    fn bbox_contains_every_point(p in path(2, 30)) {
        let t = traj(p);
        let b = tight_bbox(&t);
        prop_assert!(t.points().iter().all(|q| b.contains(*q)));
    }

    #[test]
    fn turn_geometry_is_rotation_invariant(a in point(), b in point(), angle in 0.0..std::f64::consts::TAU) {
        let s0 = turn_score(a, b);
        let s1 = turn_score(a.rotated(angle), b.rotated(angle));
        prop_assert!((s0.theta - s1.theta).abs() < 1e-9);
        prop_assert!(close(s0.cross_mag, s1.cross_mag, 1e-9));
    }

    #[test]
    fn abscore_is_rigid_invariant(p in path(3, 20), angle in 0.0..std::f64::consts::TAU, shift in point()) {
        let t = traj(p);
        let moved = t.map_points(|q| q.rotated(angle) + shift).unwrap();
        let (r0, r1) = (abscore(&t).unwrap(), abscore(&moved).unwrap());
        prop_assume!(factors(&r0) == factors(&r1));
        prop_assert!(close(r0.raw, r1.raw, 1e-6), "{} vs {}", r0.raw, r1.raw);
    }

    #[test]
    fn ade_fde_match_brute_force(pairs in vec((point(), point()), 1..30)) {
        let (pred, gt): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let d: Vec<f64> = pred.iter().zip(&gt).map(|(p, g)| ((p.x - g.x).powi(2) + (p.y - g.y).powi(2)).sqrt()).collect();
        let a = ade(&pred, &gt).unwrap();
        let f = fde(&pred, &gt).unwrap();
        prop_assert!(a >= 0.0 && f >= 0.0);
        prop_assert!(close(a, d.iter().sum::<f64>() / d.len() as f64, 1e-12));
        prop_assert!(close(f, *d.last().unwrap(), 1e-12));
    }

    #[test]
    fn decoupled_never_worse_and_monotone_in_k(
        gt in path(4, 5),
        cands in vec(path(4, 5), 2..8),
        extra in path(4, 5),
    ) {
        let k = cands.len();
        let coupled = EvalConfig { k, ..EvalConfig::default() };
        let decoupled = EvalConfig { decoupled: true, ..coupled };
        let c = evaluate(std::slice::from_ref(&cands), std::slice::from_ref(&gt), &coupled).unwrap();
        let dc = evaluate(std::slice::from_ref(&cands), std::slice::from_ref(&gt), &decoupled).unwrap();
        prop_assert!(dc.ade <= c.ade);
        prop_assert_eq!(dc.fde, c.fde);

        let mut more = cands;
        more.push(extra);
        let dc2 = evaluate(&[more.clone()], std::slice::from_ref(&gt), &EvalConfig { k: k + 1, ..decoupled }).unwrap();
        let c2 = evaluate(&[more], &[gt], &EvalConfig { k: k + 1, ..coupled }).unwrap();
        prop_assert!(dc2.ade <= dc.ade && dc2.fde <= dc.fde);
        prop_assert!(c2.fde <= c.fde);
    }

    #[test]
    fn norm_ordering(rows in path(1, 25)) {
        let v: Vec<f64> = [NormKind::Linf, NormKind::L2op, NormKind::Frobenius, NormKind::L1]
            .iter()
            .map(|n| matrix_norm(&rows, *n))
            .collect();
        for w in v.windows(2) {
            prop_assert!(w[0] <= w[1] * (1.0 + 1e-12) + 1e-12, "{:?}", v);
        }
    }

    #[test]
    fn distances_are_metrics(n in 2usize..10, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let make = |rng: &mut SeededRng| {
            traj((0..n).map(|_| Point2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0))).collect())
        };
        let (a, b, c) = (make(&mut rng), make(&mut rng), make(&mut rng));
        for norm in NORMS {
            let d = |x: &Trajectory64, y: &Trajectory64| traj_distance(x, y, norm).unwrap();
            prop_assert_eq!(d(&a, &a), 0.0);
            prop_assert!(d(&a, &b) > 0.0);
            prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-9);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9, "{:?}", norm);
        }
    }

    #[test]
    fn kmedoids_cost_never_increases(paths in vec(path(5, 6), 3..12), k in 1usize..4, seed in any::<u64>()) {
        let d = Dataset64::from_trajectories("c", paths.into_iter().map(traj).collect());
        let k = k.min(d.num_trajectories());
        let c = kmedoids(&d, k, NormKind::Frobenius, &mut SeededRng::new(seed), 50).unwrap();
        for w in c.cost_history.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        let again = kmedoids(&d, k, NormKind::Frobenius, &mut SeededRng::new(seed), 50).unwrap();
        prop_assert_eq!(c, again);
    }

    #[test]
    fn unique_points_monotone_and_order_free(p in path(1, 25), t1 in 0.0..5.0f64, t2 in 0.0..5.0f64, seed in any::<u64>()) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(unique_points(&p, hi) <= unique_points(&p, lo));
        let mut shuffled = p.clone();
        shuffled.shuffle(&mut SeededRng::new(seed));
        prop_assert_eq!(unique_points(&p, lo), unique_points(&shuffled, lo));
    }

    #[test]
    fn classification_implications(p in path(20, 21), dwell in 0usize..15) {
        let mut p = p;
        let last = p[19 - dwell];
        for q in p.iter_mut().skip(20 - dwell) {
            *q = last;
        }
        let t = traj(p);
        let cfg = ClassifyConfig::default();
        let class = classify(&t, &cfg).unwrap();
        prop_assert_eq!(class, classify(&t, &cfg).unwrap());
        let s = abscore(&t).unwrap();
        match class {
            QualClass::T1 => prop_assert_eq!(s.raw, 0.0),
            QualClass::T7 => prop_assert!(s.scaled < cfg.linearity_threshold),
            _ => {}
        }
    }

    #[test]
    fn profile_is_order_free(paths in vec(path(20, 21), 1..10), seed in any::<u64>()) {
        let trajs: Vec<_> = paths.into_iter().map(traj).collect();
        let mut shuffled = trajs.clone();
        shuffled.shuffle(&mut SeededRng::new(seed));
        let cfg = ClassifyConfig::default();
        let a = profile(&Dataset64::from_trajectories("a", trajs), &cfg).unwrap();
        let b = profile(&Dataset64::from_trajectories("a", shuffled), &cfg).unwrap();
        prop_assert_eq!(a.unique_counts, b.unique_counts);
        prop_assert_eq!(a.class_counts, b.class_counts);
    }

    #[test]
    fn static_second_differences_constant(x0 in point(), v0 in point(), ax in -2.0..2.0f64, ay in -2.0..2.0f64, dt in 0.1..2.0f64) {
        let a = Point2::new(ax, ay);
        let spec = NewtonSpec { x0, v0, accel: AccelMode::Static { a }, steps: 15, dt };
        let t = gen_newton(&spec, &mut SeededRng::new(0)).unwrap();
        let p = t.points();
        for i in 1..p.len() - 1 {
            let dd = p[i + 1] - p[i] * 2.0 + p[i - 1];
            prop_assert!((dd - a * (dt * dt)).norm() < 1e-9 * (1.0 + p[i].norm()));
        }
    }

    #[test]
    fn variable_accelerations_within_bound(bound in 0.0..1.0f64, seed in any::<u64>()) {
        let spec = NewtonSpec { x0: Point2::zero(), v0: Point2::new(1.0, 0.0), accel: AccelMode::Variable { bound }, steps: 20, dt: 1.0 };
        let t = gen_newton(&spec, &mut SeededRng::new(seed)).unwrap();
        let p = t.points();
        for i in 1..p.len() - 1 {
            let dd = p[i + 1] - p[i] * 2.0 + p[i - 1];
            prop_assert!(dd.x.abs() <= bound + 1e-9 && dd.y.abs() <= bound + 1e-9);
        }
    }

    #[test]
    fn collinear_static_motion_scores_zero(dir in 0.0..std::f64::consts::TAU, speed in 0.1..5.0f64, acc in -0.3..0.3f64) {
        let u = Point2::new(dir.cos(), dir.sin());
        let spec = NewtonSpec { x0: Point2::zero(), v0: u * speed, accel: AccelMode::Static { a: u * acc }, steps: 20, dt: 1.0 };
        let t = gen_newton(&spec, &mut SeededRng::new(0)).unwrap();
        prop_assert!(abscore(&t).unwrap().raw < 1e-6);
    }

    #[test]
    fn hmm_positions_stay_in_bounds(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = SeededRng::new(seed);
        let agents = (0..n)
            .map(|i| HmmAgentConfig {
                start: Point2::new(-8.0 + 4.0 * i as f64, rng.random_range(-8.0..8.0)),
                goal: Point2::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0)),
                base_speed: rng.random_range(0.5..3.0),
                transition: Default::default(),
            })
            .collect();
        let cfg = SceneConfig {
            agents,
            bounds: square_bounds(10.0),
            collision_radius: 0.5,
            detection_radius: 3.0,
            max_frames: 60,
            heading_noise_deg: 5.0,
            turn_max_deg: 90.0,
        };
        let (scene, log) = simulate_scene(&cfg, SeededRng::new(seed)).unwrap();
        for tr in scene.tracks() {
            prop_assert!(tr.trajectory.points().iter().all(|p| cfg.bounds.contains(*p)));
        }
        for w in log.entries.windows(2) {
            prop_assert!((w[0].frame, w[0].agent) < (w[1].frame, w[1].agent));
        }
    }

    #[test]
    fn reward_is_positive_and_directional(
        af in 0.01..1.0f64, as_ in 0.0..0.5f64, ap in 0.01..0.5f64,
        t in 1usize..30, n in 0usize..5, d in 0.0..50.0f64,
    ) {
        let p = AgentProfile { af, as_, ap, goal: Point2::zero() };
        let s = |t: usize, n: usize, d: f64| AgentState {
            position: Point2::new(d, 0.0), velocity: Point2::zero(), t, n_ics: n, neighbors: vec![],
        };
        let r = reward_fn(&s(t, n, d), &p);
        prop_assert!(r > 0.0);
        prop_assert!(reward_fn(&s(t, n + 1, d), &p) > r);
        prop_assert!(reward_fn(&s(t, n, d + 1.0), &p) < r);
        prop_assert!(reward_fn(&s(t + 1, n, d), &p) < r);
    }

    #[test]
    fn mix_cardinality_and_base_untouched(nb in 1usize..40, f in 0.05..0.9f64, seed in any::<u64>()) {
        let line = |i: usize, off: f64| traj((0..5).map(|k| Point2::new(k as f64 + off, i as f64)).collect());
        let base = Dataset64::from_trajectories("b", (0..nb).map(|i| line(i, 0.0)).collect());
        let pool = Dataset64::from_trajectories("s", (0..400).map(|i| line(i, 1000.0)).collect());
        let before = base.clone();
        let need = synth_needed(nb, f).unwrap();
        prop_assume!(need <= 400);
        let out = mix(&MixSpec { base: &base, synth: &pool, fraction: f, seed }).unwrap();
        prop_assert_eq!(&base, &before);
        prop_assert_eq!(out.num_trajectories(), nb + need);
        let share = need as f64 / (nb + need) as f64;
        prop_assert!(share >= f - 1e-9);
        prop_assert!(need == 0 || (need - 1) as f64 / (nb + need - 1) as f64 <= f + 1e-9);
        for t in base.trajectories() {
            prop_assert!(out.trajectories().any(|o| o == t));
        }
    }

    #[test]
    fn rt_augment_preserves_pairwise_frobenius(seed in any::<u64>(), n_rot in 1usize..4) {
        let mut rng = SeededRng::new(seed);
        let mut tracks = Vec::new();
        for agent in 0..4u64 {
            let pts = (0..10).map(|_| Point2::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0))).collect();
            tracks.push(Track { agent_id: agent, start_frame: 0, trajectory: traj(pts) });
        }
        let d = Dataset64::new("rt", vec![Scene::new(3, tracks, None).unwrap()]);
        let out = rt_augment(&d, n_rot, RtOptions::default(), &mut SeededRng::new(seed ^ 1)).unwrap();
        prop_assert_eq!(out.scenes.len(), n_rot);
        let orig = d.scenes[0].tracks();
        for s in &out.scenes {
            let moved = s.tracks();
            for i in 0..4 {
                for j in i + 1..4 {
                    let a = traj_distance(&orig[i].trajectory, &orig[j].trajectory, NormKind::Frobenius).unwrap();
                    let b = traj_distance(&moved[i].trajectory, &moved[j].trajectory, NormKind::Frobenius).unwrap();
                    prop_assert!((a - b).abs() <= 1e-6 * a.max(1.0));
                }
            }
            prop_assert!(moved.iter().all(|tr| tr.trajectory.points().iter().all(|p| s.bounds().contains(*p))));
        }
    }
}
