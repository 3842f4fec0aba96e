use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dynamics::{ModelId, ModelSpec};
use crate::primitives::{MotionPrimitive, Origin, SetMeta};
use crate::trajopt::{optimize_search_t, resample, OptConfig};
use crate::workspace::{Bounds, Obstacle};

fn unicycle_problem(start: &[f64], goal: &[f64], obstacles: Vec<Obstacle>) -> Problem {
    Problem::new(
        "t",
        ModelSpec::new(ModelId::Unicycle1V0),
        DVector::from_column_slice(start),
        DVector::from_column_slice(goal),
        Bounds {
            lo: vec![-4.0, -4.0],
            hi: vec![4.0, 4.0],
        },
        obstacles,
    )
    .unwrap()
}

fn constant_primitive(m: &ModelSpec, theta: f64, u: [f64; 2], steps: usize) -> MotionPrimitive {
    let us = vec![DVector::from_column_slice(&u); steps];
    let xs = m.rollout(&DVector::from_vec(vec![0.0, 0.0, theta]), &us, m.dt_ref);
    MotionPrimitive::new(m, xs, us, Origin::Offline)
}

/// Short constant-control arcs starting at eight headings.
fn arc_set(m: &ModelSpec, seed: u64, n: usize) -> PrimitiveSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prims = (0..n)
        .map(|_| {
            let theta = rng.random_range(0..8) as f64 * std::f64::consts::FRAC_PI_4 - std::f64::consts::PI + 0.5;
            let v = [0.5, 0.3, -0.3][rng.random_range(0..3)];
            let w = [-0.5, 0.0, 0.5][rng.random_range(0..3)];
            constant_primitive(m, theta, [v, w], rng.random_range(4..12))
        })
        .collect();
    PrimitiveSet::new(m, prims, SetMeta::new(m.id))
}

fn euclid(p: &Problem) -> Heuristic {
    Heuristic::build(p, &HeuristicSpec::Euclidean)
}

#[test]
fn euclidean_heuristic_matches_the_hand_value() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    assert_eq!(heuristic_euclidean(&m, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]), 2.0);
    // the heading term dominates: π/2 at 0.5 rad/s
    let h = heuristic_euclidean(&m, &[0.0, 0.0, 0.0], &[0.1, 0.0, std::f64::consts::FRAC_PI_2]);
    assert!((h - std::f64::consts::PI).abs() < 1e-12);
    assert_eq!(heuristic_euclidean(&m, &[0.3, -1.0, 2.0], &[0.3, -1.0, 2.0]), 0.0);
}

#[test]
fn euclidean_heuristic_never_exceeds_a_rollout_duration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for id in ModelId::ALL {
        let m = ModelSpec::new(id);
        for _ in 0..20 {
            let x0 = crate::primitives::sample_state(&m, &crate::primitives::SampleBox::for_model(id), &mut rng);
            let k = rng.random_range(1..80);
            let us: Vec<_> = (0..k)
                .map(|_| DVector::from_fn(m.control_dim, |i, _| rng.random_range(m.u_lb[i]..=m.u_ub[i])))
                .collect();
            let xs = m.rollout(&x0, &us, m.dt_ref);
            if !xs.iter().all(|x| m.state_in_bounds(x.as_slice(), 0.0)) {
                continue;
            }
            let h = heuristic_euclidean(&m, x0.as_slice(), xs[k].as_slice());
            assert!(h <= k as f64 * m.dt_ref + 1e-9, "{id}: h {h} > {}", k as f64 * m.dt_ref);
        }
    }
}

#[test]
fn euclidean_heuristic_never_exceeds_an_optimized_duration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let mut solved = 0;
    for _ in 0..50 {
        let s = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-3.0..3.0)];
        let g = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-3.0..3.0)];
        let p = unicycle_problem(&s, &g, vec![]);
        let (xs, us) = resample(&m, &[p.start.clone(), p.goal.clone()], &[], &[0.0, 1.0], 40);
        let cfg = OptConfig {
            search_t_range: (0.5, 3.0),
            ..Default::default()
        };
        let out = optimize_search_t(&p, &xs, &us, &cfg).unwrap();
        if out.feasible {
            solved += 1;
            assert!(heuristic_euclidean(&m, &s, &g) <= out.duration() + 1e-9);
        }
    }
    assert!(solved >= 25, "only {solved} pairs solved");
}

#[test]
fn roadmap_tracks_euclidean_without_obstacles() {
    let p = unicycle_problem(&[-3.0, -3.0, 0.0], &[3.0, 3.0, 0.0], vec![]);
    let h = Heuristic::build(&p, &HeuristicSpec::roadmap(400, 1.0, 3));
    let e = euclid(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let x = [rng.random_range(-3.5..3.5), rng.random_range(-3.5..3.5), 0.0];
        let (hr, he) = (h.eval(&x), e.eval(&x));
        assert!(hr >= he - 1e-12 && hr <= 1.5 * he + 1e-9, "roadmap {hr} euclidean {he}");
    }
    assert!(h.eval(p.goal.as_slice()) == 0.0);
}

#[test]
fn roadmap_sees_the_wall() {
    let wall = Obstacle::boxed(&[0.0, -1.0], &[0.4, 6.0], 0.0);
    let p = unicycle_problem(&[-2.0, 0.0, 0.0], &[2.0, 0.0, 0.0], vec![wall]);
    let h = Heuristic::build(&p, &HeuristicSpec::roadmap(500, 1.0, 5));
    let x = [-1.0, -2.0, 0.0];
    let (hr, he) = (h.eval(&x), euclid(&p).eval(&x));
    // detour around the wall end at y = 2
    assert!(hr > 1.5 * he, "roadmap {hr} euclidean {he}");
}

#[test]
fn start_near_goal_is_an_empty_solution() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let p = unicycle_problem(&[0.0, 0.0, 0.0], &[0.05, 0.0, 0.0], vec![]);
    let out = db_astar(&p, &arc_set(&m, 1, 10), &SearchConfig::default(), &euclid(&p));
    let sol = out.solution().unwrap();
    assert!(sol.us.is_empty());
    assert_eq!(sol.cost, 0.0);
    assert_eq!(sol.xs.len(), 1);
    assert!(sol.validate(&p).is_empty());
}

#[test]
fn sparse_set_is_infeasible() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    // a single heading; after one move nothing applies again at this delta
    let prims = vec![constant_primitive(&m, 0.0, [0.5, 0.5], 10)];
    let set = PrimitiveSet::new(&m, prims, SetMeta::new(m.id));
    let p = unicycle_problem(&[0.0, 0.0, 0.0], &[2.0, 2.0, 0.0], vec![]);
    let cfg = SearchConfig {
        delta: 0.2,
        ..Default::default()
    };
    let out = db_astar(&p, &set, &cfg, &euclid(&p));
    assert_eq!(out.result.unwrap_err(), FailureKind::Exhausted);
    assert_eq!(out.stats.expansions, 2);
}

#[test]
fn cost_bound_failure_is_reported_as_such() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let p = unicycle_problem(&[-2.0, 0.0, 0.0], &[2.0, 0.0, 0.0], vec![]);
    let set = PrimitiveSet::new(&m, vec![constant_primitive(&m, 0.0, [0.5, 0.0], 5)], SetMeta::new(m.id));
    let cfg = SearchConfig {
        cmax: 3.0,
        ..Default::default()
    };
    let out = db_astar(&p, &set, &cfg, &euclid(&p));
    assert_eq!(out.result.unwrap_err(), FailureKind::PrunedByCostBound);
    let cfg = SearchConfig {
        cmax: 9.0,
        ..Default::default()
    };
    let sol = db_astar(&p, &set, &cfg, &euclid(&p)).result.unwrap();
    assert!(sol.cost <= 9.0 && sol.validate(&p).is_empty());
}

#[test]
fn corridor_with_forward_moves_reaches_the_end() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let prims = [2, 3, 5]
        .map(|k| constant_primitive(&m, 0.0, [0.5, 0.0], k))
        .to_vec();
    let set = PrimitiveSet::new(&m, prims, SetMeta::new(m.id));
    let walls = vec![
        Obstacle::boxed(&[0.0, 0.6], &[8.0, 0.4], 0.0),
        Obstacle::boxed(&[0.0, -0.6], &[8.0, 0.4], 0.0),
    ];
    let p = unicycle_problem(&[-2.0, 0.0, 0.0], &[-0.32, 0.0, 0.0], walls);
    let cfg = SearchConfig {
        delta: 0.2,
        ..Default::default()
    };
    let sol = db_astar(&p, &set, &cfg, &Heuristic::Blind).result.unwrap();
    // the goal is 1.68 m away: the shortest sum of 0.1, 0.15 and 0.25 m
    // steps landing within 0.2 of it is 1.5 m
    assert!((sol.cost - 3.0).abs() < 1e-9, "{}", sol.cost);
    assert!(sol.validate(&p).is_empty());
}

#[test]
fn timeout_is_reported() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let p = unicycle_problem(&[-3.0, -3.0, 0.0], &[3.0, 3.0, 0.0], vec![]);
    let cfg = SearchConfig {
        delta: 0.05,
        alpha: 0.9,
        time_limit: Some(0.0),
        ..Default::default()
    };
    let out = db_astar(&p, &arc_set(&m, 2, 30), &cfg, &Heuristic::Blind);
    assert_eq!(out.result.unwrap_err(), FailureKind::Timeout);
}

fn straight_solution(p: &Problem) -> (Vec<State>, Vec<Control>) {
    let us = vec![DVector::from_vec(vec![0.5, 0.0]); 20];
    (p.model.rollout(&p.start, &us, p.model.dt_ref), us)
}

#[test]
fn validator_names_the_broken_control() {
    let p = unicycle_problem(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], vec![]);
    let (xs, mut us) = straight_solution(&p);
    assert!(validate_delta_solution(&p, &xs, &us, 0.1).is_empty());
    us[4][0] = 0.7;
    let v = validate_delta_solution(&p, &xs, &us, 0.1);
    assert!(v.iter().any(|c| c.clause == Clause::ControlBounds && c.index == Some(4)));
}

#[test]
fn validator_names_the_broken_stitch() {
    let p = unicycle_problem(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], vec![]);
    let (mut xs, us) = straight_solution(&p);
    xs[10][1] += 0.15;
    let v = validate_delta_solution(&p, &xs, &us, 0.1);
    assert!(v.iter().any(|c| c.clause == Clause::Dynamics && c.index == Some(9)));
    assert!(validate_delta_solution(&p, &xs, &us, 0.2).is_empty());
}

#[test]
fn validator_checks_endpoints_and_obstacles() {
    let p = unicycle_problem(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], vec![Obstacle::boxed(&[0.5, 0.0], &[0.1, 0.1], 0.0)]);
    let (xs, us) = straight_solution(&p);
    let v = validate_delta_solution(&p, &xs, &us, 0.1);
    assert!(v.iter().any(|c| c.clause == Clause::FreeSpace));
    let p = unicycle_problem(&[0.0, 0.5, 0.0], &[1.0, 0.9, 0.0], vec![]);
    let v = validate_delta_solution(&p, &xs, &us, 0.1);
    assert!(v.iter().any(|c| c.clause == Clause::Start));
    assert!(v.iter().any(|c| c.clause == Clause::Goal));
}

#[test]
fn solution_yaml_carries_the_chain() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let p = unicycle_problem(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], vec![]);
    let set = PrimitiveSet::new(&m, vec![constant_primitive(&m, 0.0, [0.5, 0.0], 5)], SetMeta::new(m.id));
    let sol = db_astar(&p, &set, &SearchConfig::default(), &euclid(&p)).result.unwrap();
    // three 0.25 m moves leave the goal within the default delta
    assert_eq!(sol.chain.len(), 3);
    let y = sol.to_yaml();
    assert!(y.contains("chain:") && y.contains("delta:"));
}

#[test]
fn ties_prefer_deeper_nodes() {
    let a = Entry { f: 1.0, g: 0.2, seq: 0, node: 0 };
    let b = Entry { f: 1.0, g: 0.7, seq: 1, node: 1 };
    let c = Entry { f: 1.0, g: 0.7, seq: 2, node: 2 };
    let d = Entry { f: 0.9, g: 0.0, seq: 3, node: 3 };
    let mut heap = BinaryHeap::from([a, b, c, d]);
    let order: Vec<usize> = std::iter::from_fn(|| heap.pop().map(|e| e.node)).collect();
    assert_eq!(order, vec![3, 1, 2, 0]);
}

fn random_problem(rng: &mut ChaCha8Rng) -> Problem {
    loop {
        let obstacles = (0..rng.random_range(0..4))
            .map(|_| Obstacle::boxed(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)], &[0.5, 0.5], 0.0))
            .collect();
        let s = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let g = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let p = Problem::new(
            "r",
            ModelSpec::new(ModelId::Unicycle1V0),
            DVector::from_column_slice(&s),
            DVector::from_column_slice(&g),
            Bounds {
                lo: vec![-4.0, -4.0],
                hi: vec![4.0, 4.0],
            },
            obstacles,
        );
        if let Ok(p) = p {
            return p;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn search_invariants_hold(seed in any::<u64>(), delta in 0.1f64..0.6, alpha in 0.2f64..0.8, blind in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng);
        let set = arc_set(&p.model, seed, 30);
        let h = if blind { Heuristic::Blind } else { euclid(&p) };
        let cfg = SearchConfig { delta, alpha, time_limit: Some(2.0), trace: true, ..Default::default() };
        let out = db_astar(&p, &set, &cfg, &h);
        let t = out.trace.as_ref().unwrap();
        prop_assert!(t.min_separation > (1.0 - alpha) * delta);
        for w in t.popped.windows(2) {
            // f only drops right after a node was re-opened
            prop_assert!(w[1].0 >= w[0].0 - 1e-9 || w[1].1);
        }
        if let Ok(sol) = &out.result {
            let v = sol.validate(&p);
            prop_assert!(v.is_empty(), "{:?}", v);
            let tight = SearchConfig { cmax: sol.cost * 0.999 + 1e-6, ..cfg.clone() };
            if let Ok(s2) = db_astar(&p, &set, &tight, &h).result {
                prop_assert!(s2.cost <= tight.cmax);
            }
        }
    }
}
