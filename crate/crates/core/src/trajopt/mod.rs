//! Trajectory optimization: penalized DDP, the Free-dt, Search-T, MPC and
//! MPCC repair strategies, and feasibility certificates.

mod certificate;
pub mod ddp;
mod interp;
pub mod ocp;
mod strategies;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Control, State};

pub use certificate::{check_feasibility, Certificate};
pub use interp::{align_quaternions, resample, stretch};
pub use ocp::{ArcPath, OcpSpec, Terminal};
pub use strategies::{ddp_solve, optimize, optimize_free_dt, optimize_mpc, optimize_mpcc, optimize_search_t};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest allowed metric defect between consecutive states, including
    /// the distance of the first state to the start.
    pub dynamics: f64,
    pub bounds: f64,
    pub goal: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            dynamics: 1e-4,
            bounds: 1e-6,
            goal: 1e-2,
        }
    }
}

/// Penalty weight of each constraint class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub goal: f64,
    pub control_bounds: f64,
    pub state_bounds: f64,
    pub obstacles: f64,
    pub dt_bounds: f64,
    pub progress_bounds: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            goal: 1e3,
            control_bounds: 1e3,
            state_bounds: 1e3,
            obstacles: 1e3,
            dt_bounds: 1e3,
            progress_bounds: 1e3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    FreeDt,
    SearchT,
    Mpc,
    Mpcc,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::FreeDt, Strategy::SearchT, Strategy::Mpc, Strategy::Mpcc];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::FreeDt => "free-dt",
            Strategy::SearchT => "search-t",
            Strategy::Mpc => "mpc",
            Strategy::Mpcc => "mpcc",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| crate::Error::Param {
                key: "strategy".into(),
                reason: format!("unknown strategy `{s}`"),
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptConfig {
    /// Weight of elapsed time in the Free-dt objective.
    pub time_weight: f64,
    /// Weight of the squared control deviation from nominal, in units of the
    /// control range.
    pub control_reg: f64,
    pub dt_reg: f64,
    pub progress_reg: f64,
    /// Required clearance inside the obstacle penalty.
    pub clearance_margin: f64,
    /// Penalized control box is shrunk by this fraction of the range.
    pub control_margin: f64,
    /// Penalized state box is shrunk by this amount.
    pub state_margin: f64,
    /// Allowed step-length scale in Free-dt.
    pub dt_factor: (f64, f64),
    pub weights: Weights,
    pub penalty_growth: f64,
    pub penalty_rounds: usize,
    pub max_iters: usize,
    pub tol: Tolerances,
    pub window: usize,
    pub shift: usize,
    /// Subgoal weight for MPC.
    pub mpc_k1: f64,
    /// Progress reward for MPCC.
    pub mpcc_k1: f64,
    /// Contour weight for MPCC.
    pub mpcc_k2: f64,
    pub search_t_range: (f64, f64),
    pub search_t_steps: usize,
    #[serde(skip)]
    pub deadline: Option<std::time::Instant>,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            time_weight: 1.0,
            control_reg: 1e-2,
            dt_reg: 1e-4,
            progress_reg: 1e-4,
            clearance_margin: 0.01,
            control_margin: 1e-3,
            state_margin: 1e-3,
            dt_factor: (0.5, 2.0),
            weights: Weights::default(),
            penalty_growth: 10.0,
            penalty_rounds: 5,
            max_iters: 300,
            tol: Tolerances::default(),
            window: 50,
            shift: 10,
            mpc_k1: 100.0,
            mpcc_k1: 0.02,
            mpcc_k2: 100.0,
            search_t_range: (0.5, 2.0),
            search_t_steps: 10,
            deadline: None,
        }
    }
}

impl OptConfig {
    pub fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| std::time::Instant::now() >= d)
    }

    pub(crate) fn ddp_options(&self) -> ddp::DdpOptions {
        ddp::DdpOptions {
            max_iters: self.max_iters,
            deadline: self.deadline,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptOutcome {
    pub xs: Vec<State>,
    pub us: Vec<Control>,
    pub dt_used: f64,
    pub converged: bool,
    pub feasible: bool,
    /// Duration in seconds.
    pub cost: f64,
    pub iterations: usize,
    pub penalty_rounds: usize,
    pub defect_max: f64,
    pub clearance_min: f64,
    /// Number of complete penalized DDP solves.
    pub solves: usize,
    pub certificate: Certificate,
    /// Total constraint violation after each penalty round.
    pub violation_trace: Vec<f64>,
    /// Progress value after each committed step (MPCC only).
    pub progress: Vec<f64>,
    pub failure: Option<String>,
}

impl OptOutcome {
    pub fn duration(&self) -> f64 {
        self.us.len() as f64 * self.dt_used
    }
}

#[cfg(test)]
mod tests;
