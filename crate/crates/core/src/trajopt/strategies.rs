use log::debug;

use super::ddp::{self, DdpResult};
use super::interp::{align_quaternions, resample, stretch};
use super::ocp::{ArcPath, OcpSpec, Terminal};
use super::{check_feasibility, Certificate, OptConfig, OptOutcome, Strategy, Weights};
use crate::dynamics::{Control, ModelSpec, State};
use crate::metricspace::Metric;
use crate::workspace::Problem;
use crate::{Error, Result};

/// Constraint violation of an unpolished solver result.
#[derive(Clone, Copy, Debug, Default)]
struct Violation {
    goal: f64,
    control: f64,
    state: f64,
    /// Smallest clearance along the states.
    clearance: f64,
    dt: f64,
    gap: f64,
}

impl Violation {
    fn total(&self) -> f64 {
        self.goal + self.control + self.state + (-self.clearance).max(0.0) + self.dt + self.gap
    }
}

fn measure(ocp: &OcpSpec, r: &DdpResult, target: &State) -> Violation {
    let p = ocp.problem;
    let m = &p.model;
    let metric = Metric::new(m);
    let n = m.state_dim;
    let last = &r.xs[r.xs.len() - 1];
    let mut v = Violation {
        goal: metric.distance(&last.as_slice()[..n], target.as_slice()),
        clearance: f64::INFINITY,
        gap: r.gap_max,
        ..Default::default()
    };
    for x in &r.xs {
        for i in 0..n {
            v.state = v.state.max(m.x_lb[i] - x[i]).max(x[i] - m.x_ub[i]);
        }
        if ocp.collisions {
            v.clearance = v.clearance.min(p.clearance(&x.as_slice()[..n]));
        }
    }
    for u in &r.us {
        for i in 0..m.control_dim {
            v.control = v.control.max(m.u_lb[i] - u[i]).max(u[i] - m.u_ub[i]);
        }
        if ocp.free_dt {
            let s = u[m.control_dim];
            let (lo, hi) = ocp.cfg.dt_factor;
            v.dt = v.dt.max(lo - s).max(s - hi);
        }
    }
    v
}

fn escalate(w: &mut Weights, v: &Violation, cert: Option<&Certificate>, cfg: &OptConfig) {
    let g = cfg.penalty_growth;
    let tol = &cfg.tol;
    let goal_bad = v.goal > 0.5 * tol.goal || cert.is_some_and(|c| c.goal_residual > tol.goal);
    if goal_bad {
        w.goal *= g;
    }
    if v.control > 0.0 {
        w.control_bounds *= g;
    }
    if v.state > 0.0 || cert.is_some_and(|c| c.bound_violation > tol.bounds) {
        w.state_bounds *= g;
    }
    if v.clearance <= 0.5 * cfg.clearance_margin || cert.is_some_and(|c| c.clearance_min <= 0.0) {
        w.obstacles *= g;
    }
    if v.dt > 0.0 {
        w.dt_bounds *= g;
    }
}

/// Clamps the controls into their box and rolls them out from `x0`.
fn polish(m: &ModelSpec, x0: &State, us: &[Control], dt: f64) -> (Vec<State>, Vec<Control>) {
    let us: Vec<Control> = us
        .iter()
        .map(|u| {
            let mut u = u.rows(0, m.control_dim).into_owned();
            m.clamp_control(&mut u);
            u
        })
        .collect();
    (m.rollout(x0, &us, dt), us)
}

fn empty_outcome(dt: f64) -> OptOutcome {
    OptOutcome {
        xs: Vec::new(),
        us: Vec::new(),
        dt_used: dt,
        converged: false,
        feasible: false,
        cost: f64::INFINITY,
        iterations: 0,
        penalty_rounds: 0,
        defect_max: f64::INFINITY,
        clearance_min: f64::NEG_INFINITY,
        solves: 0,
        certificate: Certificate::failed(),
        violation_trace: Vec::new(),
        progress: Vec::new(),
        failure: None,
    }
}

fn finish(out: &mut OptOutcome, problem: &Problem, xs: Vec<State>, us: Vec<Control>, cfg: &OptConfig) {
    let dt = problem.model.dt_ref;
    let cert = check_feasibility(problem, &xs, &us, dt, &cfg.tol);
    out.cost = us.len() as f64 * dt;
    out.dt_used = dt;
    out.defect_max = cert.defect_max;
    out.clearance_min = cert.clearance_min;
    out.feasible = cert.pass;
    out.certificate = cert;
    out.xs = xs;
    out.us = us;
}

fn check_guess(xs: &[State], us: &[Control], m: &ModelSpec) -> Result<()> {
    if xs.len() != us.len() + 1 {
        return Err(Error::Precondition(format!(
            "guess has {} states and {} controls",
            xs.len(),
            us.len()
        )));
    }
    for x in xs {
        m.check_state(x.as_slice())?;
    }
    for u in us {
        m.check_control(u.as_slice())?;
    }
    Ok(())
}

/// Penalized DDP at the reference step from the problem start to its goal,
/// warm-started with `xs`, `us`. The controls of the result are clamped into
/// their box and rolled out before certification.
pub fn ddp_solve(problem: &Problem, xs: &[State], us: &[Control], cfg: &OptConfig) -> Result<OptOutcome> {
    check_guess(xs, us, &problem.model)?;
    if us.is_empty() {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    Ok(solve_fixed(problem, xs.to_vec(), us.to_vec(), cfg))
}

fn solve_fixed(problem: &Problem, mut xs: Vec<State>, mut us: Vec<Control>, cfg: &OptConfig) -> OptOutcome {
    let m = &problem.model;
    let dt = m.dt_ref;
    let k = us.len();
    align_quaternions(m, &problem.start, &mut xs);
    let mut out = empty_outcome(dt);
    out.solves = 1;
    // a certified warm start already has the best possible duration
    let cert = check_feasibility(problem, &xs, &us, dt, &cfg.tol);
    if cert.pass {
        out.converged = true;
        finish(&mut out, problem, xs, us, cfg);
        return out;
    }
    let mut w = cfg.weights.clone();
    let u_ref = us.clone();
    for round in 0..cfg.penalty_rounds {
        if round > 0 && cfg.expired() {
            out.failure = Some("timeout".into());
            break;
        }
        let ocp = OcpSpec::new(
            problem,
            cfg,
            &problem.start,
            k,
            dt,
            Terminal::Goal {
                target: problem.goal.clone(),
                weight: w.goal,
            },
            w.clone(),
        )
        .with_control_reference(&u_ref);
        let r = ddp::solve(&ocp, xs, us, &cfg.ddp_options());
        out.iterations += r.iterations;
        out.penalty_rounds = round + 1;
        out.converged = r.converged;
        let v = measure(&ocp, &r, &problem.goal);
        debug!("fixed-step round {round}: {} iterations, converged {}, {v:?}", r.iterations, r.converged);
        out.violation_trace.push(v.total());
        let (px, pu) = polish(m, &problem.start, &r.us, dt);
        finish(&mut out, problem, px, pu, cfg);
        if out.feasible {
            out.failure = None;
            break;
        }
        escalate(&mut w, &v, Some(&out.certificate), cfg);
        xs = r.xs;
        us = r.us;
    }
    if !out.feasible && out.failure.is_none() {
        out.failure = Some("penalty rounds exhausted".into());
    }
    out
}

/// Optimizes with the step length as an extra decision per step, then
/// resamples at the reference step and solves again with the step fixed.
pub fn optimize_free_dt(problem: &Problem, xs: &[State], us: &[Control], cfg: &OptConfig) -> Result<OptOutcome> {
    let m = &problem.model;
    check_guess(xs, us, m)?;
    if us.is_empty() {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    let dt = m.dt_ref;
    let k = us.len();
    let mut gx = xs.to_vec();
    align_quaternions(m, &problem.start, &mut gx);
    let mut w = cfg.weights.clone();
    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut stage1: Option<DdpResult> = None;
    let mut stage1_ok = false;
    let mut rounds = 0;
    for round in 0..cfg.penalty_rounds {
        if round > 0 && cfg.expired() {
            break;
        }
        let ocp = OcpSpec::new(
            problem,
            cfg,
            &problem.start,
            k,
            dt,
            Terminal::Goal {
                target: problem.goal.clone(),
                weight: w.goal,
            },
            w.clone(),
        )
        .with_control_reference(us)
        .with_free_dt();
        let (x_init, u_init) = match stage1.take() {
            Some(r) => (r.xs, r.us),
            None => (gx.clone(), us.iter().map(|u| ocp.augment_control(u, 1.0, 0.0)).collect()),
        };
        let r = ddp::solve(&ocp, x_init, u_init, &cfg.ddp_options());
        iterations += r.iterations;
        rounds = round + 1;
        let v = measure(&ocp, &r, &problem.goal);
        debug!("free-dt round {round}: {} iterations, converged {}, {v:?}", r.iterations, r.converged);
        trace.push(v.total());
        stage1_ok = v.goal <= 0.5 * cfg.tol.goal
            && v.control <= 0.0
            && v.state <= 0.0
            && v.dt <= 0.0
            && v.clearance > 0.0
            && v.gap <= 1e-6;
        stage1 = Some(r);
        if stage1_ok {
            break;
        }
        escalate(&mut w, &v, None, cfg);
    }
    let r = stage1.expect("at least one penalty round");
    let (lo, hi) = cfg.dt_factor;
    let mut times = vec![0.0];
    for u in &r.us {
        let s = u[m.control_dim].clamp(lo, hi);
        times.push(times[times.len() - 1] + s * dt);
    }
    let total = times[times.len() - 1];
    let sx: Vec<State> = r.xs.clone();
    let su: Vec<Control> = r.us.iter().map(|u| u.rows(0, m.control_dim).into_owned()).collect();
    debug!("free-dt stage 1: T = {total:.3}, ok = {stage1_ok}, iterations = {iterations}");

    let base = ((total / dt).round() as usize).max(1);
    let mut out = empty_outcome(dt);
    for extra in 0..3 {
        if cfg.expired() {
            out.failure = Some("timeout".into());
            break;
        }
        let (rx, ru) = resample(m, &sx, &su, &times, base + extra);
        let o = solve_fixed(problem, rx, ru, cfg);
        let solves = out.solves + o.solves;
        let its = out.iterations + o.iterations;
        out = o;
        out.solves = solves;
        out.iterations = its;
        if out.feasible {
            break;
        }
    }
    out.solves += 1;
    out.iterations += iterations;
    out.penalty_rounds += rounds;
    let mut t = trace;
    t.extend(out.violation_trace.drain(..));
    out.violation_trace = t;
    if !out.feasible {
        let s1 = if stage1_ok { "converged" } else { "not converged" };
        out.failure = Some(format!(
            "stage 1 {s1}; stage 2: {}",
            out.failure.clone().unwrap_or_else(|| "infeasible".into())
        ));
    }
    Ok(out)
}

/// Tries durations ascending from `lo·T0` to `hi·T0` and returns the first
/// certified solution.
pub fn optimize_search_t(problem: &Problem, xs: &[State], us: &[Control], cfg: &OptConfig) -> Result<OptOutcome> {
    let m = &problem.model;
    check_guess(xs, us, m)?;
    if us.is_empty() {
        return Err(Error::Precondition("guess duration must be positive".into()));
    }
    let dt = m.dt_ref;
    let t0 = us.len() as f64 * dt;
    let (lo, hi) = cfg.search_t_range;
    let (tmin, tmax) = (lo * t0, hi * t0);
    let steps = cfg.search_t_steps.max(1);
    let h = (tmax - tmin) / steps as f64;
    let mut out = empty_outcome(dt);
    let mut solves = 0;
    let mut iterations = 0;
    for i in 0..=steps {
        if cfg.expired() {
            out.failure = Some("timeout".into());
            break;
        }
        let t = tmin + h * i as f64;
        let k = ((t / dt).round() as usize).max(1);
        let (gx, gu) = stretch(m, xs, us, k);
        out = solve_fixed(problem, gx, gu, cfg);
        solves += 1;
        iterations += out.iterations;
        debug!("search-t: T = {t:.3} (K = {k}) feasible = {}", out.feasible);
        if out.feasible {
            break;
        }
    }
    out.solves = solves;
    out.iterations = iterations;
    if !out.feasible && out.failure.as_deref() != Some("timeout") {
        out.failure = Some(format!("no feasible duration among {solves} candidates"));
    }
    Ok(out)
}

/// Guess states `xs[j..=j+h]` with the first replaced by `x`, padded with
/// the last guess state.
fn window_guess(
    m: &ModelSpec,
    xs: &[State],
    us: &[Control],
    x: &State,
    j: usize,
    h: usize,
) -> (Vec<State>, Vec<Control>) {
    let last = xs.len() - 1;
    let mut wx: Vec<State> = (0..=h).map(|i| xs[(j + i).min(last)].clone()).collect();
    wx[0] = x.clone();
    let wu = (0..h)
        .map(|i| us.get(j + i).cloned().unwrap_or_else(|| m.nominal_control()))
        .collect();
    align_quaternions(m, x, &mut wx);
    (wx, wu)
}

struct Windowed {
    xs: Vec<State>,
    us: Vec<Control>,
    progress: Vec<f64>,
    iterations: usize,
    solves: usize,
}

impl Windowed {
    fn commit(&mut self, m: &ModelSpec, us: &[nalgebra::DVector<f64>], count: usize) {
        let x = self.xs[self.xs.len() - 1].clone();
        let (px, pu) = polish(m, &x, &us[..count], m.dt_ref);
        self.xs.extend(px.into_iter().skip(1));
        self.us.extend(pu);
    }

    fn current(&self) -> &State {
        &self.xs[self.xs.len() - 1]
    }
}

/// Solves the last stretch to the goal, allowing up to two extra shifts of
/// horizon.
fn final_window(
    problem: &Problem,
    xs: &[State],
    us: &[Control],
    j: usize,
    run: &mut Windowed,
    cfg: &OptConfig,
) -> bool {
    let m = &problem.model;
    let remaining = us.len().saturating_sub(j).max(1);
    let mut sub = problem.clone();
    sub.start = run.current().clone();
    for extra in 0..3 {
        if cfg.expired() {
            return false;
        }
        let h = remaining + extra * cfg.shift.max(1);
        let (wx, wu) = window_guess(m, xs, us, &sub.start, j, h);
        let o = solve_fixed(&sub, wx, wu, cfg);
        run.iterations += o.iterations;
        run.solves += o.solves;
        if o.feasible {
            run.xs.extend(o.xs.into_iter().skip(1));
            run.us.extend(o.us);
            return true;
        }
    }
    false
}

fn windowed_outcome(problem: &Problem, run: Windowed, ok: bool, failure: Option<String>, cfg: &OptConfig) -> OptOutcome {
    let mut out = empty_outcome(problem.model.dt_ref);
    out.iterations = run.iterations;
    out.solves = run.solves;
    out.converged = ok;
    out.progress = run.progress;
    finish(&mut out, problem, run.xs, run.us, cfg);
    if !out.feasible {
        out.failure = failure.or_else(|| Some("final trajectory not certified".into()));
    }
    out
}

/// Receding-horizon repair: each window tracks a subgoal taken from the
/// guess and commits its first `shift` steps.
pub fn optimize_mpc(problem: &Problem, xs: &[State], us: &[Control], cfg: &OptConfig) -> Result<OptOutcome> {
    let m = &problem.model;
    check_guess(xs, us, m)?;
    if cfg.window < cfg.shift || cfg.shift == 0 {
        return Err(Error::Precondition("window must be at least the shift, which must be positive".into()));
    }
    let metric = Metric::new(m);
    let n = us.len();
    let mut run = Windowed {
        xs: vec![problem.start.clone()],
        us: Vec::new(),
        progress: Vec::new(),
        iterations: 0,
        solves: 0,
    };
    let mut j = 0;
    let max_rounds = n / cfg.shift + 20;
    let mut w = cfg.weights.clone();
    w.goal = cfg.mpc_k1;
    for round in 0..max_rounds {
        if cfg.expired() {
            return Ok(windowed_outcome(problem, run, false, Some("timeout".into()), cfg));
        }
        if metric.distance(run.current().as_slice(), problem.goal.as_slice()) <= cfg.tol.goal {
            return Ok(windowed_outcome(problem, run, true, None, cfg));
        }
        if n.saturating_sub(j) <= cfg.window {
            let ok = final_window(problem, xs, us, j, &mut run, cfg);
            let failure = (!ok).then(|| format!("final window failed after {round} rounds"));
            return Ok(windowed_outcome(problem, run, ok, failure, cfg));
        }
        let h = cfg.window;
        let x = run.current().clone();
        let (wx, wu) = window_guess(m, xs, us, &x, j, h);
        let ocp = OcpSpec::new(
            problem,
            cfg,
            &x,
            h,
            m.dt_ref,
            Terminal::Goal {
                target: xs[j + h].clone(),
                weight: cfg.mpc_k1,
            },
            w.clone(),
        )
        .with_control_reference(&wu);
        let r = ddp::solve(&ocp, wx, wu, &cfg.ddp_options());
        run.iterations += r.iterations;
        run.solves += 1;
        if r.us.iter().any(|u| u.iter().any(|v| !v.is_finite())) {
            return Ok(windowed_outcome(problem, run, false, Some(format!("window at step {j} diverged")), cfg));
        }
        run.commit(m, &r.us, cfg.shift);
        j += cfg.shift;
    }
    Ok(windowed_outcome(problem, run, false, Some("round limit".into()), cfg))
}

/// Receding-horizon repair that maximizes progress along a path through the
/// guess while penalizing the distance to it.
pub fn optimize_mpcc(problem: &Problem, xs: &[State], us: &[Control], cfg: &OptConfig) -> Result<OptOutcome> {
    let m = &problem.model;
    check_guess(xs, us, m)?;
    if cfg.window < cfg.shift || cfg.shift == 0 {
        return Err(Error::Precondition("window must be at least the shift, which must be positive".into()));
    }
    let metric = Metric::new(m);
    let path = ArcPath::new(m, &metric, xs);
    let n = us.len();
    let mut run = Windowed {
        xs: vec![problem.start.clone()],
        us: Vec::new(),
        progress: Vec::new(),
        iterations: 0,
        solves: 0,
    };
    let mut alpha: f64 = 0.0;
    let mut j = 0;
    let max_rounds = n / cfg.shift + 20;
    for round in 0..max_rounds {
        if cfg.expired() {
            return Ok(windowed_outcome(problem, run, false, Some("timeout".into()), cfg));
        }
        if metric.distance(run.current().as_slice(), problem.goal.as_slice()) <= cfg.tol.goal {
            run.progress.push(1.0);
            return Ok(windowed_outcome(problem, run, true, None, cfg));
        }
        if n.saturating_sub(j) <= cfg.window {
            let before = run.us.len();
            let ok = final_window(problem, xs, us, j, &mut run, cfg);
            if ok {
                let steps = run.us.len() - before;
                for i in 1..=steps {
                    run.progress.push(alpha + (1.0 - alpha) * i as f64 / steps as f64);
                }
            }
            let failure = (!ok).then(|| format!("final window failed after {round} rounds"));
            return Ok(windowed_outcome(problem, run, ok, failure, cfg));
        }
        let h = cfg.window;
        let x = run.current().clone();
        let (wx, wu) = window_guess(m, xs, us, &x, j, h);
        let ocp = OcpSpec::new(
            problem,
            cfg,
            &x,
            h,
            m.dt_ref,
            Terminal::Contour {
                path: &path,
                k1: cfg.mpcc_k1,
                k2: cfg.mpcc_k2,
            },
            cfg.weights.clone(),
        )
        .with_control_reference(&wu)
        .with_progress(alpha);
        let rate = 1.0 / n as f64;
        let ax = wx
            .iter()
            .enumerate()
            .map(|(i, s)| ocp.augment_state(s, (alpha + rate * i as f64).min(1.0)))
            .collect();
        let au = wu.iter().map(|u| ocp.augment_control(u, 1.0, rate)).collect();
        let r = ddp::solve(&ocp, ax, au, &cfg.ddp_options());
        run.iterations += r.iterations;
        run.solves += 1;
        if r.us.iter().any(|u| u.iter().any(|v| !v.is_finite())) {
            return Ok(windowed_outcome(problem, run, false, Some(format!("window at step {j} diverged")), cfg));
        }
        run.commit(m, &r.us, cfg.shift);
        let vi = m.control_dim;
        for u in &r.us[..cfg.shift] {
            alpha = (alpha + u[vi].max(0.0)).min(1.0);
            run.progress.push(alpha);
        }
        j = (j + 1).max((alpha * n as f64).round() as usize).min(n);
    }
    Ok(windowed_outcome(problem, run, false, Some("round limit".into()), cfg))
}

pub fn optimize(
    problem: &Problem,
    xs: &[State],
    us: &[Control],
    strategy: Strategy,
    cfg: &OptConfig,
) -> Result<OptOutcome> {
    match strategy {
        Strategy::FreeDt => optimize_free_dt(problem, xs, us, cfg),
        Strategy::SearchT => optimize_search_t(problem, xs, us, cfg),
        Strategy::Mpc => optimize_mpc(problem, xs, us, cfg),
        Strategy::Mpcc => optimize_mpcc(problem, xs, us, cfg),
    }
}
