use std::time::{Duration, Instant};

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{canonicalize, check_primitive, split_trajectory, MotionPrimitive, Origin, PrimitiveSet, SetMeta};
use crate::dynamics::{quat, ComponentKind, Group, ModelId, ModelSpec, State};
use crate::metricspace::Metric;
use crate::trajopt::{optimize_search_t, resample, OptConfig};
use crate::workspace::{Bounds, Problem};

pub(super) const GENERATOR_VERSION: u32 = 1;

/// Half-widths of the box that boundary states are drawn from. Components
/// with finite model bounds are additionally clipped to them. Angles and
/// attitudes are always drawn from their full range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub position: f64,
    pub linear_velocity: f64,
    pub angular_velocity: f64,
}

impl SampleBox {
    pub fn for_model(id: ModelId) -> Self {
        match id {
            ModelId::Unicycle1V0 | ModelId::Unicycle1V1 | ModelId::Unicycle1V2 | ModelId::CarTrailer => SampleBox {
                position: 1.0,
                linear_velocity: 0.0,
                angular_velocity: 0.0,
            },
            ModelId::Unicycle2 => SampleBox {
                position: 1.0,
                linear_velocity: 0.5,
                angular_velocity: 0.5,
            },
            ModelId::Acrobot => SampleBox {
                position: 0.0,
                linear_velocity: 0.0,
                angular_velocity: 2.0,
            },
            _ => SampleBox {
                position: 0.5,
                linear_velocity: 0.5,
                angular_velocity: 1.0,
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub count: usize,
    pub seed: u64,
    pub time_budget: Option<Duration>,
    /// Step counts of the pieces a solved trajectory is cut into.
    pub piece_range: (usize, usize),
    pub sample_box: SampleBox,
    pub opt: OptConfig,
    /// Range of the initial guess duration, in seconds. The guess lasts the
    /// time lower bound between the endpoints clamped to this range.
    pub guess_duration: (f64, f64),
    pub workers: usize,
}

impl GenConfig {
    pub fn for_model(id: ModelId, count: usize, seed: u64) -> Self {
        let flying = id.is_flying();
        let mut opt = if flying {
            OptConfig {
                max_iters: 150,
                penalty_rounds: 4,
                search_t_range: (1.0, 1.5),
                search_t_steps: 1,
                ..Default::default()
            }
        } else {
            OptConfig {
                max_iters: 60,
                penalty_rounds: 4,
                search_t_range: (1.0, 3.0),
                search_t_steps: 6,
                ..Default::default()
            }
        };
        opt.tol.goal = 5e-3;
        GenConfig {
            count,
            seed,
            time_budget: None,
            piece_range: if flying { (20, 100) } else { (5, 30) },
            sample_box: SampleBox::for_model(id),
            opt,
            guess_duration: match id {
                ModelId::Acrobot => (2.0, 8.0),
                _ if flying => (2.0, 3.0),
                _ => (0.5, 10.0),
            },
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

/// Shoemake's uniform unit quaternion.
fn random_quaternion<R: Rng>(rng: &mut R) -> [f64; 4] {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    [a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin(), b * (tau * u3).cos()]
}

pub fn sample_state<R: Rng>(model: &ModelSpec, bx: &SampleBox, rng: &mut R) -> State {
    let mut x = model.zero_state();
    for c in &model.layout {
        let o = c.offset;
        match c.kind {
            ComponentKind::Angle => x[o] = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            ComponentKind::UnitQuaternion => {
                let q = random_quaternion(rng);
                x.rows_mut(o, 4).copy_from_slice(&quat::normalized(&q));
            }
            ComponentKind::Euclidean => {
                let half = match c.group {
                    Group::Position => bx.position,
                    Group::LinearVelocity => bx.linear_velocity,
                    Group::AngularVelocity | Group::Orientation => bx.angular_velocity,
                };
                let lo = (-half).max(model.x_lb[o]);
                let hi = half.min(model.x_ub[o]);
                x[o] = if hi > lo { rng.random_range(lo..hi) } else { lo.max(hi.min(0.0)) };
            }
        }
    }
    x
}

fn open_problem(model: &ModelSpec, start: State, goal: State) -> Option<Problem> {
    let dim = model.id.workspace_dim();
    let bounds = Bounds {
        lo: vec![-1e3; dim],
        hi: vec![1e3; dim],
    };
    Problem::new("bvp", model.clone(), start, goal, bounds, Vec::new()).ok()
}

/// One boundary value attempt: the canonical pieces of its solution, or none.
fn attempt(model: &ModelSpec, cfg: &GenConfig, index: u64) -> Vec<MotionPrimitive> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let start = sample_state(model, &cfg.sample_box, &mut rng);
    let goal = sample_state(model, &cfg.sample_box, &mut rng);
    let Some(problem) = open_problem(model, start, goal) else {
        return Vec::new();
    };
    let metric = Metric::new(model);
    let lb = metric.lower_bound(problem.start.as_slice(), problem.goal.as_slice());
    let dt = model.dt_ref;
    let t0 = lb.clamp(cfg.guess_duration.0, cfg.guess_duration.1);
    let k = ((t0 / dt).round() as usize).max(1);
    let (xs, us) = resample(model, &[problem.start.clone(), problem.goal.clone()], &[], &[0.0, 1.0], k);
    let out = match optimize_search_t(&problem, &xs, &us, &cfg.opt) {
        Ok(o) if o.feasible => o,
        _ => return Vec::new(),
    };
    split_trajectory(model, &out.xs, &out.us, cfg.piece_range, Origin::Offline, &mut rng)
        .iter()
        .map(|m| canonicalize(model, m))
        .filter(|m| check_primitive(model, m).ok())
        .collect()
}

/// Solves random boundary value problems and cuts their solutions into
/// primitives until `cfg.count` exist or the budget runs out. Attempts run in
/// batches across `cfg.workers` threads and are merged by attempt index, so
/// the output depends only on the seed and configuration.
pub fn generate_primitives(model: &ModelSpec, cfg: &GenConfig) -> PrimitiveSet {
    let started = Instant::now();
    let mut meta = SetMeta::new(model.id);
    meta.seed = cfg.seed;
    meta.requested = cfg.count;
    let mut opt = cfg.opt.clone();
    opt.deadline = cfg.time_budget.map(|b| started + b);
    let cfg = GenConfig { opt, ..cfg.clone() };
    let workers = cfg.workers.max(1);
    let mut prims: Vec<MotionPrimitive> = Vec::with_capacity(cfg.count);
    let mut next: u64 = 0;
    while prims.len() < cfg.count {
        if cfg.opt.expired() {
            meta.incomplete = true;
            warn!(
                "primitive budget exhausted: {} of {} after {} attempts",
                prims.len(),
                cfg.count,
                next
            );
            break;
        }
        let batch: Vec<Vec<MotionPrimitive>> = if workers == 1 {
            vec![attempt(model, &cfg, next)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = (0..workers as u64)
                    .map(|w| {
                        let cfg = &cfg;
                        s.spawn(move || attempt(model, cfg, next + w))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("generator worker panicked")).collect()
            })
        };
        // a batch cut short by the deadline may be missing pieces
        if cfg.opt.expired() {
            meta.incomplete = true;
        }
        for pieces in batch {
            next += 1;
            for p in pieces {
                if prims.len() < cfg.count {
                    prims.push(p);
                }
            }
        }
    }
    meta.attempts = next as usize;
    meta.elapsed_s = started.elapsed().as_secs_f64();
    if meta.incomplete && prims.len() < cfg.count {
        warn!("returning a partial primitive set");
    } else {
        meta.incomplete = false;
    }
    info!(
        "generated {} {} primitives in {:.1} s ({} attempts)",
        prims.len(),
        model.id,
        meta.elapsed_s,
        meta.attempts
    );
    PrimitiveSet::new(model, prims, meta)
}
