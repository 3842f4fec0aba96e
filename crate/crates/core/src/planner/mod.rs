//! The anytime loop: search with a growing primitive set and a shrinking
//! discontinuity bound, repair each result with the optimizer, and feed the
//! repaired trajectories back as new primitives.

use std::io::Write;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dbastar::{db_astar, FailureKind, Heuristic, HeuristicSpec, SearchConfig};
use crate::dynamics::{Control, ModelSpec, State};
use crate::error::{Error, Result};
use crate::primitives::{canonicalize, split_trajectory, MotionPrimitive, Origin, PrimitiveSet};
use crate::trajopt::{check_feasibility, optimize, Certificate, OptConfig, OptOutcome, Strategy};
use crate::workspace::Problem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub n0: usize,
    pub delta0: f64,
    pub n_r: f64,
    pub delta_r: f64,
    /// Decay applied to the bound after a failed search.
    pub delta_r_fail: f64,
    pub alpha: f64,
    pub heuristic: HeuristicSpec,
    pub strategy: Strategy,
    /// Seconds.
    pub time_budget: f64,
    pub seed: u64,
    pub max_iterations: usize,
    /// Step counts of the pieces cut from optimized trajectories.
    pub piece_range: (usize, usize),
    /// Feed optimized trajectories back into the active set.
    pub extract: bool,
    pub opt: OptConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            n0: 100,
            delta0: 0.3,
            n_r: 1.5,
            delta_r: 0.9,
            delta_r_fail: 0.999,
            alpha: 0.5,
            heuristic: HeuristicSpec::Euclidean,
            strategy: Strategy::FreeDt,
            time_budget: 120.0,
            seed: 0,
            max_iterations: 30,
            piece_range: (5, 30),
            extract: true,
            opt: OptConfig::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::Param {
                key: key.into(),
                reason: reason.into(),
            })
        };
        if self.n0 == 0 {
            return bad("n0", "must be at least 1");
        }
        if !(self.delta0 > 0.0) {
            return bad("delta0", "must be positive");
        }
        if !(self.n_r > 1.0) {
            return bad("n_r", "must exceed 1");
        }
        if !(self.delta_r > 0.0 && self.delta_r < 1.0) {
            return bad("delta_r", "must lie in (0, 1)");
        }
        if !(self.delta_r_fail > 0.0 && self.delta_r_fail <= 1.0) {
            return bad("delta_r_fail", "must lie in (0, 1]");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", "must lie in (0, 1)");
        }
        if !(self.time_budget > 0.0) {
            return bad("time_budget", "must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations", "must be at least 1");
        }
        Ok(())
    }
}

/// Running state of the geometric schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub iteration: usize,
    n: f64,
    pub delta: f64,
}

impl Schedule {
    pub fn new(cfg: &PlannerConfig) -> Self {
        Schedule {
            iteration: 1,
            n: cfg.n0 as f64,
            delta: cfg.delta0,
        }
    }

    pub fn n(&self) -> usize {
        self.n.round() as usize
    }

    pub fn advance(&mut self, cfg: &PlannerConfig, search_succeeded: bool) {
        self.iteration += 1;
        self.n *= cfg.n_r;
        self.delta *= if search_succeeded { cfg.delta_r } else { cfg.delta_r_fail };
    }
}

/// `(n_i, delta_i)` for iteration `i`, assuming every search before the last
/// one succeeded.
pub fn schedule(cfg: &PlannerConfig, i: usize, last_search_succeeded: bool) -> (usize, f64) {
    assert!(i >= 1, "iterations count from 1");
    let mut s = Schedule::new(cfg);
    for k in 2..=i {
        s.advance(cfg, k < i || last_search_succeeded);
    }
    (s.n(), s.delta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub xs: Vec<Vec<f64>>,
    pub us: Vec<Vec<f64>>,
    /// Duration in seconds.
    pub cost: f64,
    /// Seconds since the planner started.
    pub wall_time: f64,
    pub iteration: usize,
    pub n: usize,
    pub delta: f64,
    pub certificate: Certificate,
}

impl SolutionReport {
    pub fn states(&self) -> Vec<State> {
        self.xs.iter().map(|x| State::from_column_slice(x)).collect()
    }

    pub fn controls(&self) -> Vec<Control> {
        self.us.iter().map(|u| Control::from_column_slice(u)).collect()
    }
}

/// One line of the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub n: usize,
    pub delta: f64,
    /// Primitives actually searched, online ones included.
    pub active: usize,
    pub search_time: f64,
    pub opt_time: f64,
    pub search: String,
    pub expansions: usize,
    pub opt_feasible: Option<bool>,
    /// Cost of the repaired trajectory when it was feasible.
    pub cost: Option<f64>,
    pub improved: bool,
    pub extracted: usize,
    /// The offline set had fewer than `n` primitives left.
    pub library_exhausted: bool,
}

#[derive(Clone, Debug, Default)]
pub struct PlanRun {
    pub reports: Vec<SolutionReport>,
    pub log: Vec<IterationLog>,
    pub elapsed: f64,
}

impl PlanRun {
    pub fn best(&self) -> Option<&SolutionReport> {
        self.reports.last()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.cost).collect()
    }

    pub fn write_log<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for line in &self.log {
            serde_json::to_writer(&mut w, line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Cuts a feasible trajectory into canonical online primitives. Each piece's
/// states are re-rolled from its first state so it is dynamically exact.
pub fn extract_primitives<R: rand::Rng>(
    model: &ModelSpec,
    outcome: &OptOutcome,
    piece_range: (usize, usize),
    rng: &mut R,
) -> Result<Vec<MotionPrimitive>> {
    if !outcome.feasible {
        return Err(Error::Precondition("cannot extract primitives from an infeasible trajectory".into()));
    }
    if (outcome.dt_used - model.dt_ref).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "trajectory uses dt {} but primitives need {}",
            outcome.dt_used, model.dt_ref
        )));
    }
    let pieces = split_trajectory(model, &outcome.xs, &outcome.us, piece_range, Origin::Online, rng);
    Ok(pieces
        .into_iter()
        .map(|p| {
            let mut xs = Vec::with_capacity(p.xs.len());
            xs.push(p.xs[0].clone());
            for (k, u) in p.us.iter().enumerate() {
                let mut next = State::zeros(model.state_dim);
                model.step_into(xs[k].as_slice(), u.as_slice(), model.dt_ref, next.as_mut_slice());
                xs.push(next);
            }
            canonicalize(model, &MotionPrimitive::new(model, xs, p.us, Origin::Online))
        })
        .collect())
}

/// Runs the anytime loop until the budget or the iteration cap is reached.
/// `sink` sees every improving certified solution as soon as it exists.
pub fn plan(
    problem: &Problem,
    library: &PrimitiveSet,
    cfg: &PlannerConfig,
    mut sink: impl FnMut(&SolutionReport),
) -> Result<PlanRun> {
    cfg.validate()?;
    if library.is_empty() {
        return Err(Error::Precondition("the primitive library is empty".into()));
    }
    if library.model_id() != problem.model.id {
        return Err(Error::ModelMismatch {
            found: library.model_id().to_string(),
            expected: problem.model.id.to_string(),
        });
    }
    let started = Instant::now();
    let deadline = started + Duration::from_secs_f64(cfg.time_budget);
    let model = &problem.model;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<MotionPrimitive> = library.primitives().to_vec();
    order.shuffle(&mut rng);
    let mut split_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    split_rng.set_stream(1);

    let heuristic = Heuristic::build(problem, &cfg.heuristic);
    let mut opt = cfg.opt.clone();
    opt.deadline = Some(deadline);

    let mut run = PlanRun::default();
    let mut online: Vec<MotionPrimitive> = Vec::new();
    let mut cmax = f64::INFINITY;
    let mut sched = Schedule::new(cfg);
    let mut warned_exhausted = false;

    while sched.iteration <= cfg.max_iterations {
        let now = Instant::now();
        if now >= deadline {
            break;
        }
        let n = sched.n();
        let exhausted = n > order.len();
        if exhausted && !warned_exhausted {
            warn!("primitive library exhausted at iteration {}: {} available", sched.iteration, order.len());
            warned_exhausted = true;
        }
        let mut prims = order[..n.min(order.len())].to_vec();
        prims.extend(online.iter().cloned());
        let active = PrimitiveSet::new(model, prims, library.meta.clone());

        let search_cfg = SearchConfig {
            delta: sched.delta,
            alpha: cfg.alpha,
            cmax,
            time_limit: Some((deadline - now).as_secs_f64()),
            trace: false,
        };
        let out = db_astar(problem, &active, &search_cfg, &heuristic);
        let mut entry = IterationLog {
            iteration: sched.iteration,
            n,
            delta: sched.delta,
            active: active.len(),
            search_time: out.stats.time_s,
            opt_time: 0.0,
            search: "ok".into(),
            expansions: out.stats.expansions,
            opt_feasible: None,
            cost: None,
            improved: false,
            extracted: 0,
            library_exhausted: exhausted,
        };
        let sol = match out.result {
            Ok(s) => s,
            Err(kind) => {
                entry.search = kind.to_string();
                debug!("iteration {}: search failed ({kind})", sched.iteration);
                run.log.push(entry);
                if kind == FailureKind::Timeout {
                    break;
                }
                sched.advance(cfg, false);
                continue;
            }
        };

        let t_opt = Instant::now();
        let repaired = optimize(problem, &sol.xs, &sol.us, cfg.strategy, &opt);
        entry.opt_time = t_opt.elapsed().as_secs_f64();
        if let Ok(o) = repaired {
            entry.opt_feasible = Some(o.feasible);
            if o.feasible {
                let cost = o.duration();
                entry.cost = Some(cost);
                let cert = check_feasibility(problem, &o.xs, &o.us, o.dt_used, &opt.tol);
                if cert.pass && cost < cmax {
                    cmax = cost;
                    let report = SolutionReport {
                        xs: o.xs.iter().map(|x| x.as_slice().to_vec()).collect(),
                        us: o.us.iter().map(|u| u.as_slice().to_vec()).collect(),
                        cost,
                        wall_time: started.elapsed().as_secs_f64(),
                        iteration: sched.iteration,
                        n,
                        delta: sched.delta,
                        certificate: cert,
                    };
                    info!(
                        "iteration {}: new solution with cost {:.3} s at {:.2} s",
                        sched.iteration, cost, report.wall_time
                    );
                    sink(&report);
                    run.reports.push(report);
                    entry.improved = true;
                }
                if cfg.extract {
                    let pieces = extract_primitives(model, &o, cfg.piece_range, &mut split_rng)?;
                    entry.extracted = pieces.len();
                    online.extend(pieces);
                }
            }
        }
        run.log.push(entry);
        sched.advance(cfg, true);
    }
    run.elapsed = started.elapsed().as_secs_f64();
    Ok(run)
}
