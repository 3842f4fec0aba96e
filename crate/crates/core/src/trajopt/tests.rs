use super::ddp::{self, Ocp};
use super::*;
use crate::dynamics::{ModelId, ModelSpec};
use crate::metricspace::Metric;
use crate::workspace::{Bounds, Obstacle, Problem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn open_problem(id: ModelId, start: &[f64], goal: &[f64], obstacles: Vec<Obstacle>) -> Problem {
    let m = ModelSpec::new(id);
    let dim = id.workspace_dim();
    Problem::new(
        "open",
        m,
        DVector::from_column_slice(start),
        DVector::from_column_slice(goal),
        Bounds {
            lo: vec![-20.0; dim],
            hi: vec![20.0; dim],
        },
        obstacles,
    )
    .unwrap()
}

fn constant_rollout(p: &Problem, u: &[f64], k: usize) -> (Vec<State>, Vec<Control>) {
    let us = vec![DVector::from_column_slice(u); k];
    (p.model.rollout(&p.start, &us, p.model.dt_ref), us)
}

fn assert_certified(p: &Problem, o: &OptOutcome, cfg: &OptConfig) {
    let c = check_feasibility(p, &o.xs, &o.us, p.model.dt_ref, &cfg.tol);
    assert_eq!(c.pass, o.feasible);
    assert!(o.feasible, "not feasible: {:?} {:?}", o.failure, o.certificate);
}

#[test]
fn rollout_has_zero_defect() {
    let p = open_problem(ModelId::Unicycle1V0, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], vec![]);
    let (xs, us) = constant_rollout(&p, &[0.5, 0.0], 20);
    let c = check_feasibility(&p, &xs, &us, 0.1, &Tolerances::default());
    assert_eq!(c.defect_max, 0.0);
    assert!(c.goal_residual < 1e-12);
    assert!(c.pass);
}

#[test]
fn stitched_guess_fails_with_its_jump() {
    let p = open_problem(ModelId::Unicycle1V0, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], vec![]);
    let (mut xs, us) = constant_rollout(&p, &[0.5, 0.0], 20);
    for x in xs.iter_mut().skip(10) {
        x[1] += 0.3;
    }
    let c = check_feasibility(&p, &xs, &us, 0.1, &Tolerances::default());
    assert!((c.defect_max - 0.3).abs() < 1e-12);
    assert!(!c.pass);
}

/// Residual-form cost of the Unicycle2 test problem: control effort and a
/// terminal goal penalty, with dynamics handled by the caller.
struct Reach {
    x0: DVector<f64>,
    goal: DVector<f64>,
    k: usize,
    reg: f64,
    mu: f64,
}

impl Reach {
    fn new() -> Self {
        Reach {
            x0: DVector::zeros(5),
            goal: DVector::from_vec(vec![0.05, 0.0, 0.05, 0.0, 0.0]),
            k: 20,
            reg: 1e-2,
            mu: 1e3,
        }
    }

    fn weights(&self) -> Vec<f64> {
        vec![1.0, 1.0, 0.5, 0.25, 0.25]
    }

    fn cost(&self, xs: &[DVector<f64>], us: &[DVector<f64>]) -> f64 {
        let range = [0.5, 0.5];
        let mut c = 0.0;
        for u in us {
            for i in 0..2 {
                c += 0.5 * self.reg * (u[i] / range[i]).powi(2);
            }
        }
        let w = self.weights();
        let last = &xs[xs.len() - 1];
        for i in 0..5 {
            c += 0.5 * self.mu * (w[i] * (last[i] - self.goal[i])).powi(2);
        }
        c
    }

    /// Direct transcription with states and controls as variables, solved by
    /// an augmented Lagrangian around Levenberg-Marquardt on finite
    /// difference Jacobians.
    fn transcription_oracle(&self) -> f64 {
        let (nx, nu, k) = (5, 2, self.k);
        let nz = k * (nx + nu);
        let unpack = |z: &DVector<f64>| {
            let mut xs = vec![self.x0.clone()];
            let mut us = Vec::new();
            for s in 0..k {
                us.push(z.rows(s * nu, nu).into_owned());
                xs.push(z.rows(k * nu + s * nx, nx).into_owned());
            }
            (xs, us)
        };
        let w = self.weights();
        let residual = |z: &DVector<f64>, lam: &DVector<f64>, rho: f64| {
            let (xs, us) = unpack(z);
            let mut r = Vec::new();
            for u in &us {
                for i in 0..nu {
                    r.push(self.reg.sqrt() * u[i] / 0.5);
                }
            }
            let last = &xs[k];
            for i in 0..nx {
                r.push(self.mu.sqrt() * w[i] * (last[i] - self.goal[i]));
            }
            for s in 0..k {
                // explicit Euler written out for the unicycle with acceleration inputs
                let x = &xs[s];
                let u = &us[s];
                let dt = 0.1;
                let f = [
                    x[0] + dt * x[3] * x[2].cos(),
                    x[1] + dt * x[3] * x[2].sin(),
                    x[2] + dt * x[4],
                    x[3] + dt * u[0],
                    x[4] + dt * u[1],
                ];
                for i in 0..nx {
                    let c = xs[s + 1][i] - f[i];
                    r.push(rho.sqrt() * (c + lam[s * nx + i] / rho));
                }
            }
            DVector::from_vec(r)
        };
        let constraint = |z: &DVector<f64>| {
            let r = residual(z, &DVector::zeros(k * nx), 1.0);
            r.rows(r.len() - k * nx, k * nx).into_owned()
        };
        let mut z = DVector::zeros(nz);
        let mut lam = DVector::zeros(k * nx);
        let mut rho = 1e2;
        for _outer in 0..30 {
            let mut damping = 1e-3;
            for _inner in 0..100 {
                let r0 = residual(&z, &lam, rho);
                let mut jac = DMatrix::zeros(r0.len(), nz);
                let h = 1e-7;
                for j in 0..nz {
                    let mut zp = z.clone();
                    zp[j] += h;
                    let mut zm = z.clone();
                    zm[j] -= h;
                    let col = (residual(&zp, &lam, rho) - residual(&zm, &lam, rho)) / (2.0 * h);
                    jac.set_column(j, &col);
                }
                let g = jac.tr_mul(&r0);
                if g.norm() < 1e-10 {
                    break;
                }
                let mut hess = jac.tr_mul(&jac);
                loop {
                    let mut hd = hess.clone();
                    for i in 0..nz {
                        hd[(i, i)] += damping;
                    }
                    let step = hd.cholesky().unwrap().solve(&(-&g));
                    let zn = &z + &step;
                    if residual(&zn, &lam, rho).norm_squared() < r0.norm_squared() {
                        z = zn;
                        damping = (damping / 3.0).max(1e-12);
                        break;
                    }
                    damping *= 4.0;
                    if damping > 1e12 {
                        break;
                    }
                }
                if damping > 1e12 {
                    break;
                }
                hess.fill(0.0);
            }
            let c = constraint(&z);
            lam += &c * rho;
            if c.amax() < 1e-10 {
                break;
            }
            rho = (rho * 4.0).min(1e8);
        }
        let (xs, us) = unpack(&z);
        for u in &us {
            assert!(u[0].abs() < 0.24 && u[1].abs() < 0.24, "oracle touches control bounds: {u}");
        }
        for x in &xs {
            assert!(x[3].abs() < 0.49 && x[4].abs() < 0.49);
        }
        assert!(constraint(&z).amax() < 1e-8);
        self.cost(&xs, &us)
    }
}

#[test]
fn ddp_matches_direct_transcription_oracle() {
    let reach = Reach::new();
    let p = open_problem(ModelId::Unicycle2, reach.x0.as_slice(), reach.goal.as_slice(), vec![]);
    let mut cfg = OptConfig::default();
    cfg.control_reg = reach.reg;
    cfg.max_iters = 500;
    let mut w = cfg.weights.clone();
    w.goal = reach.mu;
    let ocp = OcpSpec::new(
        &p,
        &cfg,
        &p.start,
        reach.k,
        0.1,
        Terminal::Goal {
            target: p.goal.clone(),
            weight: reach.mu,
        },
        w,
    );
    let xs = vec![p.start.clone(); reach.k + 1];
    let us = vec![DVector::zeros(2); reach.k];
    let r = ddp::solve(&ocp, xs, us, &cfg.ddp_options());
    assert!(r.converged);
    assert!(r.gap_max < 1e-9);
    let got = reach.cost(&r.xs, &r.us);
    let want = reach.transcription_oracle();
    assert!((got - want).abs() <= 0.01 * want, "ddp {got} vs oracle {want}");
}

#[test]
fn merit_never_increases_at_a_fixed_gap_weight() {
    let p = open_problem(ModelId::Unicycle2, &[0.0; 5], &[1.0, 0.5, 0.5, 0.0, 0.0], vec![]);
    let cfg = OptConfig::default();
    let ocp = OcpSpec::new(
        &p,
        &cfg,
        &p.start,
        40,
        0.1,
        Terminal::Goal {
            target: p.goal.clone(),
            weight: 1e3,
        },
        cfg.weights.clone(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // discontinuous warm start
    let xs: Vec<State> = (0..=40)
        .map(|k| {
            let t = k as f64 / 40.0;
            DVector::from_vec(vec![t + rng.random_range(-0.1..0.1), 0.5 * t, 0.3, 0.1, 0.0])
        })
        .collect();
    let us = vec![DVector::zeros(2); 40];
    let r = ddp::solve(&ocp, xs, us, &cfg.ddp_options());
    for pair in r.merit_trace.windows(2) {
        if pair[0].0 == pair[1].0 {
            assert!(pair[1].1 <= pair[0].1, "{:?}", pair);
        }
    }
    assert!(r.gap_max < 1e-9);
}

#[test]
fn converged_solution_is_stationary() {
    // every penalty stays inactive at the optimum
    let p = open_problem(ModelId::Unicycle2, &[0.0; 5], &[0.1, 0.05, 0.1, 0.0, 0.0], vec![]);
    let cfg = OptConfig {
        max_iters: 500,
        ..Default::default()
    };
    let ocp = OcpSpec::new(
        &p,
        &cfg,
        &p.start,
        25,
        0.1,
        Terminal::Goal {
            target: p.goal.clone(),
            weight: 10.0,
        },
        cfg.weights.clone(),
    );
    let r = ddp::solve(&ocp, vec![p.start.clone(); 26], vec![DVector::zeros(2); 25], &cfg.ddp_options());
    assert!(r.converged);
    let total = |us: &[DVector<f64>]| {
        let mut x = ocp.x0().clone();
        let mut c = 0.0;
        for (k, u) in us.iter().enumerate() {
            c += ocp.running_cost(k, &x, u);
            x = ocp.step(&x, u);
        }
        c + ocp.terminal_cost(&x)
    };
    let j0 = total(&r.us);
    let h = 1e-6;
    let mut g2 = 0.0;
    for k in 0..r.us.len() {
        for i in 0..2 {
            let mut up = r.us.clone();
            up[k][i] += h;
            let mut um = r.us.clone();
            um[k][i] -= h;
            let g = (total(&up) - total(&um)) / (2.0 * h);
            g2 += g * g;
        }
    }
    assert!(g2.sqrt() < 1e-5 * (1.0 + j0), "gradient {} at cost {j0}", g2.sqrt());
}

#[test]
fn certified_guess_is_a_fixed_point() {
    let p = open_problem(ModelId::Unicycle1V0, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], vec![]);
    let (xs, us) = constant_rollout(&p, &[0.5, 0.0], 20);
    let o = ddp_solve(&p, &xs, &us, &OptConfig::default()).unwrap();
    assert!(o.feasible);
    for (a, b) in o.xs.iter().zip(&xs) {
        assert!((a - b).amax() <= 1e-6);
    }
    for (a, b) in o.us.iter().zip(&us) {
        assert!((a - b).amax() <= 1e-6);
    }
}

#[test]
fn single_step_problem_converges_quickly() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let start = DVector::from_vec(vec![0.0, 0.0, 0.0]);
    let goal = m.step_unchecked(&start, &DVector::from_vec(vec![0.3, 0.2]), 0.1);
    let p = open_problem(ModelId::Unicycle1V0, start.as_slice(), goal.as_slice(), vec![]);
    let o = ddp_solve(&p, &[start.clone(), start.clone()], &[DVector::zeros(2)], &OptConfig::default()).unwrap();
    assert_certified(&p, &o, &OptConfig::default());
    assert!(o.iterations <= 5, "{} iterations", o.iterations);
}

#[test]
fn wrong_guess_lengths_are_rejected() {
    let p = open_problem(ModelId::Unicycle1V0, &[0.0; 3], &[1.0, 0.0, 0.0], vec![]);
    let (xs, us) = constant_rollout(&p, &[0.5, 0.0], 20);
    let cfg = OptConfig::default();
    assert!(ddp_solve(&p, &xs[..5], &us, &cfg).is_err());
    assert!(optimize_free_dt(&p, &xs, &us[..3], &cfg).is_err());
}

#[test]
fn free_dt_never_worsens_a_feasible_guess() {
    let p = open_problem(ModelId::Unicycle1V0, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], vec![]);
    let (xs, us) = constant_rollout(&p, &[0.25, 0.0], 40);
    let cfg = OptConfig::default();
    let o = optimize_free_dt(&p, &xs, &us, &cfg).unwrap();
    assert_certified(&p, &o, &cfg);
    assert!(o.cost <= 4.0 + 1e-9);
    assert!(o.cost < 3.0, "expected a faster plan, got {}", o.cost);
    assert_eq!(o.dt_used, p.model.dt_ref);
}

#[test]
fn free_dt_absorbs_a_stretched_guess() {
    let p = open_problem(ModelId::Unicycle1V0, &[0.0, 0.0, 0.0], &[1.2, 0.4, 0.5], vec![]);
    let cfg = OptConfig::default();
    // a feasible but not time-optimal guess
    let us = vec![DVector::from_vec(vec![0.5, 0.2]); 28];
    let xs = p.model.rollout(&p.start, &us, 0.1);
    let mut q = p.clone();
    q.goal = xs[xs.len() - 1].clone();
    let base = optimize_free_dt(&q, &xs, &us, &cfg).unwrap();
    let (sx, su) = stretch(&q.model, &xs, &us, 56);
    let slow = optimize_free_dt(&q, &sx, &su, &cfg).unwrap();
    assert_certified(&q, &base, &cfg);
    assert_certified(&q, &slow, &cfg);
    assert!((slow.cost - base.cost).abs() <= 0.05 * base.cost, "{} vs {}", slow.cost, base.cost);
}

#[test]
fn search_t_stops_near_the_guess_duration() {
    let p = open_problem(ModelId::Unicycle1V0, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], vec![]);
    let (xs, us) = constant_rollout(&p, &[0.25, 0.0], 40);
    let cfg = OptConfig::default();
    let o = optimize_search_t(&p, &xs, &us, &cfg).unwrap();
    assert_certified(&p, &o, &cfg);
    let h = (2.0 - 0.5) * 4.0 / 10.0;
    assert!(o.cost <= 4.0 + h + 1e-9);
}

#[test]
fn search_t_exits_after_one_solve_when_the_shortest_time_works() {
    let p = open_problem(ModelId::Unicycle1V0, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], vec![]);
    let (xs, us) = constant_rollout(&p, &[0.125, 0.0], 80);
    let cfg = OptConfig::default();
    let o = optimize_search_t(&p, &xs, &us, &cfg).unwrap();
    assert_certified(&p, &o, &cfg);
    assert_eq!(o.solves, 1);
    assert!((o.cost - 4.0).abs() < 1e-9);
}

#[test]
fn search_t_gives_up_after_every_candidate() {
    let mut p = open_problem(ModelId::Unicycle1V0, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], vec![]);
    // placed directly so that validation does not reject the goal
    p.obstacles.push(Obstacle::boxed(&[1.0, 0.0], &[0.6, 0.6], 0.0));
    let (xs, us) = constant_rollout(&p, &[0.5, 0.0], 10);
    let cfg = OptConfig {
        penalty_rounds: 2,
        max_iters: 30,
        ..Default::default()
    };
    let o = optimize_search_t(&p, &xs, &us, &cfg).unwrap();
    assert!(!o.feasible);
    assert_eq!(o.solves, 11);
}

fn wavy_guess(p: &Problem, k: usize) -> (Vec<State>, Vec<Control>) {
    let us: Vec<Control> = (0..k)
        .map(|i| DVector::from_vec(vec![0.4, 0.3 * (i as f64 * 0.1).sin()]))
        .collect();
    (p.model.rollout(&p.start, &us, p.model.dt_ref), us)
}

#[test]
fn mpc_keeps_a_consistent_guess() {
    let mut p = open_problem(ModelId::Unicycle1V0, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], vec![]);
    let (xs, us) = wavy_guess(&p, 90);
    p.goal = xs[90].clone();
    let cfg = OptConfig::default();
    let o = optimize_mpc(&p, &xs, &us, &cfg).unwrap();
    assert_certified(&p, &o, &cfg);
    let metric = Metric::new(&p.model);
    for (a, b) in o.xs.iter().zip(&xs) {
        assert!(metric.distance(a.as_slice(), b.as_slice()) < 0.05);
    }
}

fn jumpy_unicycle2_guess(p: &Problem, k: usize, delta: f64, seed: u64) -> (Vec<State>, Vec<Control>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let us: Vec<Control> = (0..k)
        .map(|i| {
            let a = if i < k / 3 { 0.15 } else if i >= 2 * k / 3 { -0.15 } else { 0.0 };
            DVector::from_vec(vec![a, 0.05 * (i as f64 * 0.2).cos()])
        })
        .collect();
    let mut xs = p.model.rollout(&p.start, &us, p.model.dt_ref);
    let metric = Metric::new(&p.model);
    // shift every tenth block of states to mimic stitched primitives
    let mut off = DVector::zeros(5);
    for (i, x) in xs.iter_mut().enumerate().skip(1) {
        if i % 10 == 0 {
            let mut jump = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
            jump[2] *= 0.5;
            let d = metric.distance(jump.as_slice(), DVector::zeros(5).as_slice());
            off += jump * (delta / d / 2.0);
        }
        *x += &off;
    }
    (xs, us)
}

#[test]
fn mpc_repairs_a_jumpy_unicycle2_guess() {
    let m = ModelSpec::new(ModelId::Unicycle2);
    let mut p = open_problem(ModelId::Unicycle2, &[0.0; 5], &[0.0; 5], vec![]);
    let (xs, us) = jumpy_unicycle2_guess(&p, 90, 0.2, 3);
    p.goal = xs[90].clone();
    p.goal[3] = 0.0;
    p.goal[4] = 0.0;
    m.check_state(p.goal.as_slice()).unwrap();
    let cfg = OptConfig::default();
    let o = optimize_mpc(&p, &xs, &us, &cfg).unwrap();
    assert_certified(&p, &o, &cfg);
}

#[test]
fn mpc_without_subgoal_weight_falls_behind() {
    let p = open_problem(ModelId::Unicycle1V0, &[0.0, 0.0, 0.0], &[6.0, 0.0, 0.0], vec![]);
    // states only, no useful controls
    let xs: Vec<State> = (0..=140)
        .map(|i| DVector::from_vec(vec![6.0 * i as f64 / 140.0, 0.0, 0.0]))
        .collect();
    let us = vec![DVector::zeros(2); 140];
    let cfg = OptConfig::default();
    let tracked = optimize_mpc(&p, &xs, &us, &cfg).unwrap();
    assert_certified(&p, &tracked, &cfg);
    let cfg = OptConfig {
        mpc_k1: 0.0,
        ..Default::default()
    };
    let o = optimize_mpc(&p, &xs, &us, &cfg).unwrap();
    assert!(!o.feasible);
    assert!(o.failure.is_some());
}

#[test]
fn mpcc_follows_a_straight_corridor_to_the_end() {
    let mut p = open_problem(ModelId::Unicycle1V0, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], vec![]);
    let (xs, us) = constant_rollout(&p, &[0.4, 0.0], 100);
    p.goal = xs[100].clone();
    let cfg = OptConfig::default();
    let o = optimize_mpcc(&p, &xs, &us, &cfg).unwrap();
    assert_certified(&p, &o, &cfg);
    assert_eq!(*o.progress.last().unwrap(), 1.0);
    assert!(o.progress.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn stiff_contour_weight_hugs_the_path() {
    let mut p = open_problem(ModelId::Unicycle1V0, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], vec![]);
    let (xs, us) = wavy_guess(&p, 120);
    p.goal = xs[120].clone();
    let cfg = OptConfig {
        mpcc_k2: 1e4,
        ..Default::default()
    };
    let o = optimize_mpcc(&p, &xs, &us, &cfg).unwrap();
    assert_certified(&p, &o, &cfg);
    assert!(o.progress.windows(2).all(|w| w[1] >= w[0]));
    let metric = Metric::new(&p.model);
    let dense = stretch(&p.model, &xs, &us, 1200).0;
    let worst = o
        .xs
        .iter()
        .map(|x| {
            dense
                .iter()
                .map(|y| metric.distance(x.as_slice(), y.as_slice()))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    // bound set from a measured 0.033 with the default progress reward
    assert!(worst < 0.05, "contour distance {worst}");
}

#[test]
fn obstacle_penalty_pushes_a_path_clear() {
    let p = open_problem(
        ModelId::Unicycle1V0,
        &[0.0, 0.0, 0.0],
        &[3.0, 0.0, 0.0],
        vec![Obstacle::boxed(&[1.5, 0.0], &[0.4, 0.4], 0.0)],
    );
    // the straight line runs through the box
    let (xs, us) = constant_rollout(&p, &[0.5, 0.0], 60);
    assert!(p.trajectory_in_collision(&xs));
    let cfg = OptConfig::default();
    let o = optimize_free_dt(&p, &xs, &us, &cfg).unwrap();
    assert_certified(&p, &o, &cfg);
    assert!(o.clearance_min > 0.0);
}

#[test]
fn quadrotor_hover_shift_is_repaired() {
    let m = ModelSpec::new(ModelId::QuadrotorV0);
    let start = m.zero_state();
    let mut goal = m.zero_state();
    goal[0] = 0.5;
    goal[2] = 0.3;
    let p = open_problem(ModelId::QuadrotorV0, start.as_slice(), goal.as_slice(), vec![]);
    let k = 150;
    let xs: Vec<State> = (0..=k)
        .map(|i| {
            let t = i as f64 / k as f64;
            let mut x = start.clone();
            x[0] = 0.5 * t;
            x[2] = 0.3 * t;
            x
        })
        .collect();
    let us = vec![m.nominal_control(); k];
    let cfg = OptConfig::default();
    let o = optimize_free_dt(&p, &xs, &us, &cfg).unwrap();
    assert_certified(&p, &o, &cfg);
}

#[test]
fn penalty_rounds_mostly_reduce_violation() {
    let mut monotone = 0;
    let mut total = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let goal = [rng.random_range(1.5..3.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let c = [goal[0] * 0.5, goal[1] * 0.5 + rng.random_range(-0.2..0.2)];
        let p = open_problem(
            ModelId::Unicycle1V0,
            &[0.0, 0.0, 0.0],
            &goal,
            vec![Obstacle::boxed(&c, &[0.3, 0.3], 0.3)],
        );
        let k = 80;
        let xs: Vec<State> = (0..=k)
            .map(|i| {
                let t = i as f64 / k as f64;
                DVector::from_vec(vec![goal[0] * t, goal[1] * t, goal[2] * t])
            })
            .collect();
        let us = vec![DVector::zeros(2); k];
        let o = ddp_solve(&p, &xs, &us, &OptConfig::default()).unwrap();
        if o.violation_trace.len() > 1 {
            total += 1;
            if o.violation_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12) {
                monotone += 1;
            }
        }
    }
    assert!(monotone as f64 >= 0.95 * total as f64, "{monotone}/{total}");
}


