//! Repeated planning trials and their summary metrics: success rate, median
//! time to first solution, median cost once half the trials have solved, and
//! median final cost.

use std::fmt::Write as _;
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{plan, PlannerConfig};
use crate::primitives::PrimitiveSet;
use crate::workspace::Problem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionEvent {
    pub time: f64,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub problem: String,
    pub seed: u64,
    pub events: Vec<SolutionEvent>,
    pub success: bool,
    pub first_time: Option<f64>,
    pub first_cost: Option<f64>,
    pub final_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrialRecord {
    /// Panics if the costs do not strictly decrease.
    pub fn from_events(problem: &str, seed: u64, events: Vec<(f64, f64)>) -> Self {
        assert!(
            events.windows(2).all(|w| w[1].1 < w[0].1 && w[1].0 >= w[0].0),
            "solution events must improve over time"
        );
        let events: Vec<SolutionEvent> = events.into_iter().map(|(time, cost)| SolutionEvent { time, cost }).collect();
        TrialRecord {
            problem: problem.to_string(),
            seed,
            success: !events.is_empty(),
            first_time: events.first().map(|e| e.time),
            first_cost: events.first().map(|e| e.cost),
            final_cost: events.last().map(|e| e.cost),
            events,
            error: None,
        }
    }

    pub fn failed(problem: &str, seed: u64, error: impl Into<String>) -> Self {
        TrialRecord {
            error: Some(error.into()),
            ..Self::from_events(problem, seed, Vec::new())
        }
    }

    /// Best cost found by time `t`.
    pub fn cost_at(&self, t: f64) -> Option<f64> {
        self.events.iter().take_while(|e| e.time <= t).last().map(|e| e.cost)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemMetrics {
    pub problem: String,
    pub trials: usize,
    pub p: f64,
    pub t_st: Option<f64>,
    pub j_st: Option<f64>,
    pub j_f: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub budget: f64,
    pub rows: Vec<ProblemMetrics>,
}

/// Median of the values; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

fn metrics_for(problem: &str, trials: &[&TrialRecord]) -> ProblemMetrics {
    let n = trials.len();
    let mut firsts: Vec<f64> = trials.iter().filter_map(|t| t.first_time).collect();
    firsts.sort_by(f64::total_cmp);
    let finals: Vec<f64> = trials.iter().filter_map(|t| t.final_cost).collect();
    // earliest instant at which at least half of the trials hold a solution
    let need = n.div_ceil(2);
    let j_st = (firsts.len() >= need && need > 0)
        .then(|| firsts[need - 1])
        .and_then(|t| median(&trials.iter().filter_map(|r| r.cost_at(t)).collect::<Vec<_>>()));
    ProblemMetrics {
        problem: problem.to_string(),
        trials: n,
        p: firsts.len() as f64 / n as f64,
        t_st: median(&firsts),
        j_st,
        j_f: median(&finals),
    }
}

/// Groups records by problem, in order of first appearance.
pub fn compute_metrics(records: &[TrialRecord], budget: f64) -> BenchReport {
    let mut names: Vec<&str> = Vec::new();
    for r in records {
        if !names.contains(&r.problem.as_str()) {
            names.push(&r.problem);
        }
    }
    let rows = names
        .into_iter()
        .map(|name| {
            let group: Vec<&TrialRecord> = records.iter().filter(|r| r.problem == name).collect();
            metrics_for(name, &group)
        })
        .collect();
    BenchReport { budget, rows }
}

/// Renders an optional metric, with "-" for undefined values.
pub fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Md,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Md];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Md => "md",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReportFormat::ALL
            .into_iter()
            .find(|f| f.extension() == s)
            .ok_or_else(|| Error::Param {
                key: "format".into(),
                reason: format!("unknown report format `{s}`"),
            })
    }
}

pub fn render_report(report: &BenchReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Json => out = serde_json::to_string_pretty(report).expect("report serializes"),
        ReportFormat::Csv => {
            out.push_str("problem,trials,budget,p,t_st,J_st,J_f\n");
            for r in &report.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.problem,
                    r.trials,
                    report.budget,
                    r.p,
                    cell(r.t_st),
                    cell(r.j_st),
                    cell(r.j_f)
                );
            }
        }
        ReportFormat::Md => {
            let _ = writeln!(out, "Budget: {} s\n", report.budget);
            out.push_str("| # | Problem | Trials | p | t_st [s] | J_st [s] | J_f [s] |\n");
            out.push_str("|---|---|---|---|---|---|---|\n");
            for (i, r) in report.rows.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    i + 1,
                    r.problem,
                    r.trials,
                    r.p,
                    cell(r.t_st),
                    cell(r.j_st),
                    cell(r.j_f)
                );
            }
        }
    }
    out
}

pub fn parse_csv_report(text: &str) -> Result<BenchReport> {
    let bad = |msg: String| Error::Parse {
        path: "report.csv".into(),
        line: None,
        msg,
    };
    let num = |s: &str| -> Result<Option<f64>> {
        if s == "-" {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| bad(format!("not a number: `{s}`")))
        }
    };
    let mut budget = 0.0;
    let mut rows = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(format!("expected 7 fields in `{line}`")));
        }
        budget = num(f[2])?.unwrap_or(0.0);
        rows.push(ProblemMetrics {
            problem: f[0].to_string(),
            trials: f[1].parse().map_err(|_| bad(format!("bad trial count `{}`", f[1])))?,
            p: num(f[3])?.unwrap_or(0.0),
            t_st: num(f[4])?,
            j_st: num(f[5])?,
            j_f: num(f[6])?,
        });
    }
    Ok(BenchReport { budget, rows })
}

/// Writes `report.<ext>` into `dir` and returns its path.
pub fn emit_report(report: &BenchReport, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("report.{}", format.extension()));
    std::fs::write(&path, render_report(report, format))?;
    Ok(path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub time: f64,
    /// Fraction of trials holding a solution.
    pub solved: f64,
    pub median: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// 95% bootstrap interval of the median.
pub fn bootstrap_median_ci(values: &[f64], resamples: usize, rng: &mut impl Rng) -> (f64, f64) {
    assert!(!values.is_empty());
    let mut meds: Vec<f64> = (0..resamples)
        .map(|_| {
            let s: Vec<f64> = (0..values.len()).map(|_| values[rng.random_range(0..values.len())]).collect();
            median(&s).unwrap()
        })
        .collect();
    meds.sort_by(f64::total_cmp);
    let at = |q: f64| meds[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (at(0.025), at(0.975))
}

/// Median best cost over time for one problem, with its confidence band,
/// evaluated at every solution event and at the budget. Points where fewer
/// than half of the trials hold a solution are omitted.
pub fn convergence_series(records: &[&TrialRecord], budget: f64, seed: u64) -> Vec<ConvergencePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times: Vec<f64> = records.iter().flat_map(|r| r.events.iter().map(|e| e.time)).collect();
    times.push(budget);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let n = records.len();
    times
        .into_iter()
        .filter_map(|t| {
            let costs: Vec<f64> = records.iter().filter_map(|r| r.cost_at(t)).collect();
            if costs.is_empty() || 2 * costs.len() < n {
                return None;
            }
            let (ci_lo, ci_hi) = bootstrap_median_ci(&costs, BOOTSTRAP_RESAMPLES, &mut rng);
            Some(ConvergencePoint {
                time: t,
                solved: costs.len() as f64 / n as f64,
                median: median(&costs).unwrap(),
                ci_lo,
                ci_hi,
            })
        })
        .collect()
}

pub fn convergence_csv(records: &[TrialRecord], budget: f64, seed: u64) -> String {
    let mut out = String::from("problem,time,solved,median,ci_lo,ci_hi\n");
    let report = compute_metrics(records, budget);
    for row in &report.rows {
        let group: Vec<&TrialRecord> = records.iter().filter(|r| r.problem == row.problem).collect();
        for pt in convergence_series(&group, budget, seed) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                row.problem, pt.time, pt.solved, pt.median, pt.ci_lo, pt.ci_hi
            );
        }
    }
    out
}

/// One planning trial. Panics inside the planner become failed records.
pub fn run_trial(problem: &Problem, library: &PrimitiveSet, cfg: &PlannerConfig) -> TrialRecord {
    let name = problem.name.as_str();
    let mut events = Vec::new();
    let res = std::panic::catch_unwind(AssertUnwindSafe(|| {
        plan(problem, library, cfg, |r| events.push((r.wall_time, r.cost)))
    }));
    match res {
        Ok(Ok(_)) => TrialRecord::from_events(name, cfg.seed, events),
        Ok(Err(e)) => TrialRecord::failed(name, cfg.seed, e.to_string()),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "planner panicked".into());
            warn!("trial {name}/{} crashed: {msg}", cfg.seed);
            TrialRecord::failed(name, cfg.seed, msg)
        }
    }
}

/// Runs `trials` seeded trials per problem with seeds `seed0 + k`.
pub fn run_benchmark(
    cases: &[(Problem, PrimitiveSet)],
    cfg: &PlannerConfig,
    trials: usize,
    budget: f64,
    seed0: u64,
) -> Result<Vec<TrialRecord>> {
    if trials == 0 {
        return Err(Error::Param {
            key: "trials".into(),
            reason: "must be at least 1".into(),
        });
    }
    let mut out = Vec::with_capacity(cases.len() * trials);
    for (problem, library) in cases {
        for k in 0..trials as u64 {
            let cfg = PlannerConfig {
                seed: seed0 + k,
                time_budget: budget,
                ..cfg.clone()
            };
            out.push(run_trial(problem, library, &cfg));
        }
    }
    Ok(out)
}

/// Writes `results/<problem>/<seed>.json` under `root`.
pub fn write_trial(root: &Path, record: &TrialRecord) -> Result<PathBuf> {
    let dir = root.join(&record.problem);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}.json", record.seed));
    std::fs::write(&path, serde_json::to_string_pretty(record).expect("record serializes"))?;
    Ok(path)
}
