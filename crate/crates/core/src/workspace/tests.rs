use super::*;
use crate::dynamics::ModelId;
use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MINIMAL: &str = "
model: unicycle1_v0
start: [1, 1, 0]
goal: [2, 2, 0]
bounds: {lo: [0, 0], hi: [3, 3]}
";

fn quad_problem(obstacles: Vec<Obstacle>) -> Problem {
    let m = ModelSpec::new(ModelId::QuadrotorV0);
    let mut start = m.zero_state();
    start[0] = -1.5;
    let mut goal = m.zero_state();
    goal[0] = 1.5;
    Problem::new(
        "q",
        m,
        start,
        goal,
        Bounds {
            lo: vec![-2.0; 3],
            hi: vec![2.0; 3],
        },
        obstacles,
    )
    .unwrap()
}

#[test]
fn minimal_document_loads() {
    let p = Problem::from_yaml_str(MINIMAL, "minimal.yaml").unwrap();
    assert_eq!(p.obstacles.len(), 0);
    assert_eq!(p.name, "minimal");
    assert_eq!(p.model.id, ModelId::Unicycle1V0);
}

#[test]
fn obstacle_count_round_trips() {
    let mut doc = String::from(
        "name: maze\nmodel: unicycle1_v0\nstart: [0.5, 0.5, 0]\ngoal: [9.5, 9.5, 0]\nbounds: {lo: [0, 0], hi: [10, 10]}\nobstacles:\n",
    );
    for i in 0..14 {
        let x = 1.0 + 0.6 * i as f64;
        doc.push_str(&format!("  - {{type: box, center: [{x}, 5.0], size: [0.2, 1.0]}}\n"));
    }
    let p = Problem::from_yaml_str(&doc, "maze.yaml").unwrap();
    assert_eq!(p.obstacles.len(), 14);
    let back = Problem::from_yaml_str(&p.to_yaml(), "again").unwrap();
    assert_eq!(back.obstacles, p.obstacles);
    assert_eq!(back.name, "maze");
}

#[test]
fn goal_inside_obstacle_is_rejected() {
    let doc = format!("{MINIMAL}obstacles:\n  - {{type: box, center: [2, 2], size: [0.5, 0.5]}}\n");
    let err = Problem::from_yaml_str(&doc, "bad").unwrap_err();
    match err {
        Error::InvalidProblem { reason, .. } => assert!(reason.contains("goal"), "{reason}"),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn malformed_yaml_reports_a_line() {
    let err = Problem::from_yaml_str("model: unicycle1_v0\nstart: [1, 1\n", "x.yaml").unwrap_err();
    match err {
        Error::Parse { line, .. } => assert!(line.is_some()),
        e => panic!("unexpected {e}"),
    }
    let err = Problem::from_yaml_str(&MINIMAL.replace("unicycle1_v0", "boat"), "x").unwrap_err();
    assert!(matches!(err, Error::UnknownModel(_)));
}

#[test]
fn simple_collision_cases() {
    let p = Problem::from_yaml_str(MINIMAL, "m").unwrap();
    assert!(!p.state_in_collision(&[1.5, 1.5, 0.3]));
    // sticks out of the workspace
    assert!(p.state_in_collision(&[0.1, 1.5, 0.0]));

    let q = quad_problem(vec![Obstacle::boxed(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], 0.0)]);
    let mut x = q.model.zero_state();
    assert!(q.state_in_collision(x.as_slice()));
    // tangent contact counts as collision
    x[0] = 0.6;
    assert!(q.state_in_collision(x.as_slice()));
    x[0] = 0.6 + 1e-9;
    assert!(!q.state_in_collision(x.as_slice()));
}

#[test]
fn trajectory_collision_checks_sampled_states_only() {
    let q = quad_problem(vec![Obstacle::boxed(&[0.0, 0.0, 0.0], &[0.02, 2.0, 2.0], 0.0)]);
    let at = |x: f64| {
        let mut s = q.model.zero_state();
        s[0] = x;
        s
    };
    assert!(!q.trajectory_in_collision(&[at(-1.0), at(-0.8)]));
    assert!(q.trajectory_in_collision(&[at(-1.0), at(0.0), at(1.0)]));
    // jumps across the thin wall between samples
    assert!(!q.trajectory_in_collision(&[at(-0.5), at(0.5)]));
}

#[test]
fn sphere_distance_to_box_face() {
    let q = quad_problem(vec![Obstacle::boxed(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], 0.0)]);
    let mut x = q.model.zero_state();
    x[0] = 1.0;
    let (d, g) = q.signed_distance(x.as_slice());
    assert_abs_diff_eq!(d, 0.4, epsilon = 1e-12);
    assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(g.rows(1, 12).norm(), 0.0, epsilon = 1e-12);
    x[0] = 0.0;
    assert!(q.signed_distance(x.as_slice()).0 < 0.0);
}

fn cluttered(id: ModelId, seed: u64) -> Problem {
    let m = ModelSpec::new(id);
    let dim = id.workspace_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obstacles = Vec::new();
    for k in 0..6 {
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        if k % 2 == 0 {
            let s: Vec<f64> = (0..dim).map(|_| rng.random_range(0.3..1.5)).collect();
            obstacles.push(Obstacle::boxed(&c, &s, rng.random_range(-1.0..1.0)));
        } else {
            obstacles.push(Obstacle::sphere(&c, rng.random_range(0.2..0.8)));
        }
    }
    let mut p = Problem {
        name: "cluttered".into(),
        start: m.zero_state(),
        goal: m.zero_state(),
        bounds: Bounds {
            lo: vec![-4.0; dim],
            hi: vec![4.0; dim],
        },
        obstacles,
        robot: RobotShape::for_model(&m),
        model: m,
    };
    if id == ModelId::Acrobot {
        p.obstacles.retain(|o| {
            let c = o.center();
            c[0].hypot(c[1]) > 2.0
        });
    }
    p
}

fn random_pose(p: &Problem, rng: &mut ChaCha8Rng) -> State {
    let mut x = p.model.zero_state();
    for c in &p.model.layout {
        use crate::dynamics::ComponentKind::*;
        match c.kind {
            Euclidean => x[c.offset] = rng.random_range(-3.5..3.5),
            Angle => x[c.offset] = rng.random_range(-3.1..3.1),
            UnitQuaternion => {
                let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                let q = crate::dynamics::quat::normalized(&q);
                x.rows_mut(c.offset, 4).copy_from_slice(&q);
            }
        }
    }
    x
}

#[test]
fn gradient_matches_finite_differences() {
    let h = 1e-7;
    for (i, id) in ModelId::ALL.into_iter().enumerate() {
        let p = cluttered(id, 100 + i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let mut checked = 0;
        let mut tries = 0;
        while checked < 100 && tries < 2000 {
            tries += 1;
            let x = random_pose(&p, &mut rng);
            let (d, g) = p.signed_distance(x.as_slice());
            let mut fd = DVector::zeros(x.len());
            let mut smooth = true;
            for k in 0..x.len() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[k] += h;
                xm[k] -= h;
                let fwd = (p.clearance(xp.as_slice()) - d) / h;
                let bwd = (d - p.clearance(xm.as_slice())) / h;
                if (fwd - bwd).abs() > 1e-4 * (1.0 + fwd.abs()) {
                    smooth = false;
                    break;
                }
                fd[k] = 0.5 * (fwd + bwd);
            }
            if !smooth {
                continue;
            }
            checked += 1;
            let err = (&g - &fd).norm() / g.norm().max(1.0);
            assert!(err < 1e-4, "{id}: err {err} at {x} analytic {g} fd {fd}");
        }
        assert_eq!(checked, 100, "{id}: too few smooth samples");
    }
}

#[test]
fn distance_sign_agrees_with_collision_flag() {
    for (i, id) in ModelId::ALL.into_iter().enumerate() {
        let p = cluttered(id, 200 + i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(50 + i as u64);
        for _ in 0..500 {
            let x = random_pose(&p, &mut rng);
            let d = p.signed_distance(x.as_slice()).0;
            assert_eq!(p.state_in_collision(x.as_slice()), d <= 0.0, "{id} {x}");
            assert_eq!(p.clearance(x.as_slice()), d);
        }
    }
}

proptest! {
    #[test]
    fn translation_leaves_distance_unchanged(
        seed in 0u64..1000, tx in -5.0f64..5.0, ty in -5.0f64..5.0
    ) {
        let p = cluttered(ModelId::Unicycle1V0, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_pose(&p, &mut rng);
        let mut q = p.clone();
        q.obstacles = p.obstacles.iter().map(|o| o.translated(&[tx, ty])).collect();
        q.bounds.lo = vec![p.bounds.lo[0] + tx, p.bounds.lo[1] + ty];
        q.bounds.hi = vec![p.bounds.hi[0] + tx, p.bounds.hi[1] + ty];
        let mut y = x.clone();
        y[0] += tx;
        y[1] += ty;
        let d0 = p.clearance(x.as_slice());
        let d1 = q.clearance(y.as_slice());
        prop_assert!((d0 - d1).abs() < 1e-9, "{} vs {}", d0, d1);
    }

    #[test]
    fn inflating_obstacles_never_increases_distance(seed in 0u64..1000, eps in 0.0f64..0.5) {
        for id in [ModelId::Unicycle1V0, ModelId::CarTrailer, ModelId::QuadrotorV0] {
            let p = cluttered(id, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let x = random_pose(&p, &mut rng);
            let mut q = p.clone();
            q.obstacles = p.obstacles.iter().map(|o| o.inflated(eps)).collect();
            prop_assert!(q.clearance(x.as_slice()) <= p.clearance(x.as_slice()) + 1e-12);
        }
    }
}

#[test]
fn trajectories_round_trip_and_ignore_extra_keys() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let us = vec![DVector::from_vec(vec![0.5, 0.1]); 3];
    let xs = m.rollout(&DVector::from_vec(vec![0.0, 0.0, 0.0]), &us, m.dt_ref);
    let t = Trajectory::new(&xs, &us);
    let back = Trajectory::from_yaml_str(&t.to_yaml(), "t").unwrap();
    assert_eq!(back, t);
    assert_eq!(back.states(), xs);
    back.check(&m).unwrap();
    let with_chain = format!("delta: 0.3\nchain: []\n{}", t.to_yaml());
    assert_eq!(Trajectory::from_yaml_str(&with_chain, "t").unwrap(), t);
    let short = Trajectory::new(&xs[..2], &us);
    assert!(short.check(&m).is_err());
    assert!(Trajectory::new(&xs, &us).check(&ModelSpec::new(ModelId::Unicycle2)).is_err());
}
