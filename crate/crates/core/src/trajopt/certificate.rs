use serde::{Deserialize, Serialize};

use super::Tolerances;
use crate::dynamics::{Control, State};
use crate::metricspace::Metric;
use crate::workspace::Problem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Largest metric defect, the start residual included.
    pub defect_max: f64,
    pub start_residual: f64,
    pub goal_residual: f64,
    /// Largest amount by which a state or control leaves its box.
    pub bound_violation: f64,
    pub clearance_min: f64,
    pub pass: bool,
}

impl Certificate {
    /// Certificate of an empty trajectory.
    pub fn failed() -> Self {
        Certificate {
            defect_max: f64::INFINITY,
            start_residual: f64::INFINITY,
            goal_residual: f64::INFINITY,
            bound_violation: f64::INFINITY,
            clearance_min: f64::NEG_INFINITY,
            pass: false,
        }
    }
}

pub fn check_feasibility(problem: &Problem, xs: &[State], us: &[Control], dt: f64, tol: &Tolerances) -> Certificate {
    let m = &problem.model;
    let metric = Metric::new(m);
    if xs.is_empty() || xs.len() != us.len() + 1 {
        return Certificate::failed();
    }
    let start_residual = metric.distance(xs[0].as_slice(), problem.start.as_slice());
    let mut defect_max = start_residual;
    let mut next = State::zeros(m.state_dim);
    for k in 0..us.len() {
        m.step_into(xs[k].as_slice(), us[k].as_slice(), dt, next.as_mut_slice());
        defect_max = defect_max.max(metric.distance(xs[k + 1].as_slice(), next.as_slice()));
    }
    let goal_residual = metric.distance(xs[xs.len() - 1].as_slice(), problem.goal.as_slice());
    let mut bound_violation: f64 = 0.0;
    for x in xs {
        for i in 0..m.state_dim {
            bound_violation = bound_violation.max(m.x_lb[i] - x[i]).max(x[i] - m.x_ub[i]);
        }
    }
    for u in us {
        for i in 0..m.control_dim {
            bound_violation = bound_violation.max(m.u_lb[i] - u[i]).max(u[i] - m.u_ub[i]);
        }
    }
    let clearance_min = xs
        .iter()
        .map(|x| problem.clearance(x.as_slice()))
        .fold(f64::INFINITY, f64::min);
    let finite = xs.iter().chain(us).all(|v| v.iter().all(|e| e.is_finite()));
    let pass = finite
        && defect_max <= tol.dynamics
        && goal_residual <= tol.goal
        && bound_violation <= tol.bounds
        && clearance_min > 0.0;
    Certificate {
        defect_max,
        start_residual,
        goal_residual,
        bound_violation,
        clearance_min,
        pass,
    }
}
