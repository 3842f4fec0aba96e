use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use idbastar::bench::{compute_metrics, convergence_csv, emit_report, run_benchmark, write_trial, ReportFormat};
use idbastar::dbastar::{db_astar, Heuristic, HeuristicSpec, SearchConfig};
use idbastar::planner::{plan, PlannerConfig};
use idbastar::primitives::{export_yaml, generate_primitives, load_set, save_set, GenConfig};
use idbastar::trajopt::{check_feasibility, optimize, Strategy};
use idbastar::{dbastar, ModelId, ModelSpec, PrimitiveSet, Problem, Trajectory};
use log::info;
use serde_json::json;

use crate::config::FileConfig;
use crate::{BenchArgs, Cli, Command, GenArgs, HeuristicArgs, HeuristicKind, OptimizeArgs, PlanArgs, SearchArgs, StrategyKind, ValidateArgs};

pub const EXIT_NO_SOLUTION: u8 = 2;
pub const EXIT_INVALID: u8 = 3;

pub enum Status {
    Ok,
    NoSolution,
}

impl Status {
    pub fn code(&self) -> ExitCode {
        match self {
            Status::Ok => ExitCode::SUCCESS,
            Status::NoSolution => ExitCode::from(EXIT_NO_SOLUTION),
        }
    }
}

pub fn run(cli: &Cli) -> Result<Status> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::GenPrimitives(a) => gen_primitives(a, &cfg),
        Command::Dbastar(a) => search(a, &cfg),
        Command::Optimize(a) => optimize_guess(a, &cfg),
        Command::Plan(a) => run_plan(a, &cfg),
        Command::Bench(a) => bench(a, &cfg),
        Command::Validate(a) => validate(a),
    }
}

fn strategy(k: StrategyKind) -> Strategy {
    match k {
        StrategyKind::FreeDt => Strategy::FreeDt,
        StrategyKind::SearchT => Strategy::SearchT,
        StrategyKind::Mpc => Strategy::Mpc,
        StrategyKind::Mpcc => Strategy::Mpcc,
    }
}

fn heuristic_spec(a: &HeuristicArgs, fallback: &HeuristicSpec, seed: u64) -> HeuristicSpec {
    match a.heuristic {
        None => fallback.clone(),
        Some(HeuristicKind::Euclidean) => HeuristicSpec::Euclidean,
        Some(HeuristicKind::Blind) => HeuristicSpec::Blind,
        Some(HeuristicKind::Roadmap) => HeuristicSpec::roadmap(a.roadmap_vertices, a.roadmap_radius, seed),
    }
}

fn load_problem(path: &Path) -> Result<Problem> {
    Problem::load(path).with_context(|| format!("loading problem {}", path.display()))
}

fn load_library(path: &Path, model: &ModelSpec) -> Result<PrimitiveSet> {
    let set = load_set(path, model).with_context(|| format!("loading primitives {}", path.display()))?;
    if set.is_empty() {
        bail!("primitive library {} is empty", path.display());
    }
    Ok(set)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn gen_primitives(a: &GenArgs, cfg: &FileConfig) -> Result<Status> {
    let id: ModelId = a.model.parse()?;
    let model = ModelSpec::new(id);
    let g = &cfg.generator;
    let mut gc = GenConfig::for_model(id, a.count.unwrap_or(g.count), a.seed.unwrap_or(g.seed));
    if let Some(b) = a.budget.or(g.time_budget) {
        gc.time_budget = Some(Duration::from_secs_f64(b));
    }
    if let Some(w) = a.workers.or(g.workers) {
        gc.workers = w;
    }
    let set = generate_primitives(&model, &gc);
    save_set(&set, &a.out)?;
    if let Some(y) = &a.yaml {
        write(y, &export_yaml(&set)?)?;
    }
    println!(
        "{}",
        json!({"model": id.to_string(), "count": set.len(), "attempts": set.meta.attempts,
               "elapsed_s": set.meta.elapsed_s, "incomplete": set.meta.incomplete})
    );
    Ok(if set.is_empty() { Status::NoSolution } else { Status::Ok })
}

fn search(a: &SearchArgs, cfg: &FileConfig) -> Result<Status> {
    let p = load_problem(&a.problem)?;
    let mut lib = load_library(&a.primitives, &p.model)?;
    if let Some(n) = a.count {
        lib = lib.prefix(n);
    }
    let pc = &cfg.planner;
    let sc = SearchConfig {
        delta: a.delta.unwrap_or(pc.delta0),
        alpha: a.alpha.unwrap_or(pc.alpha),
        ..Default::default()
    };
    if !(sc.delta > 0.0) || !(sc.alpha > 0.0 && sc.alpha < 1.0) {
        bail!("delta must be positive and alpha must lie in (0, 1)");
    }
    let h = Heuristic::build(&p, &heuristic_spec(&a.heuristic, &pc.heuristic, pc.seed));
    let out = db_astar(&p, &lib, &sc, &h);
    let summary = json!({
        "problem": p.name, "delta": sc.delta, "alpha": sc.alpha, "primitives": lib.len(),
        "stats": out.stats, "cost": out.solution().map(|s| s.cost),
        "failure": out.result.as_ref().err().map(|k| k.to_string()),
    });
    println!("{summary}");
    let Ok(sol) = out.result else {
        return Ok(Status::NoSolution);
    };
    let violations = sol.validate(&p);
    if !violations.is_empty() {
        bail!("search returned an invalid solution: {violations:?}");
    }
    if let Some(path) = &a.out {
        write(path, &sol.to_yaml())?;
    }
    Ok(Status::Ok)
}

fn optimize_guess(a: &OptimizeArgs, cfg: &FileConfig) -> Result<Status> {
    let p = load_problem(&a.problem)?;
    let guess = Trajectory::load(&a.guess).with_context(|| format!("loading guess {}", a.guess.display()))?;
    guess.check(&p.model)?;
    let st = a.strategy.map_or(cfg.planner.strategy, strategy);
    let out = optimize(&p, &guess.states(), &guess.controls(), st, &cfg.planner.opt)?;
    println!(
        "{}",
        json!({"problem": p.name, "strategy": st.name(), "feasible": out.feasible, "cost": out.duration(),
               "solves": out.solves, "iterations": out.iterations, "certificate": out.certificate,
               "failure": out.failure})
    );
    if !out.feasible {
        return Ok(Status::NoSolution);
    }
    if let Some(path) = &a.out {
        let mut t = Trajectory::new(&out.xs, &out.us);
        t.dt = Some(out.dt_used);
        t.cost = Some(out.duration());
        write(path, &t.to_yaml())?;
    }
    Ok(Status::Ok)
}

fn planner_config(a: &PlanArgs, cfg: &FileConfig) -> PlannerConfig {
    let mut pc = cfg.planner.clone();
    pc.time_budget = a.budget.unwrap_or(pc.time_budget);
    pc.seed = a.seed.unwrap_or(pc.seed);
    pc.n0 = a.n0.unwrap_or(pc.n0);
    pc.delta0 = a.delta0.unwrap_or(pc.delta0);
    pc.alpha = a.alpha.unwrap_or(pc.alpha);
    pc.max_iterations = a.max_iterations.unwrap_or(pc.max_iterations);
    pc.strategy = a.strategy.map_or(pc.strategy, strategy);
    pc.heuristic = heuristic_spec(&a.heuristic, &pc.heuristic, pc.seed);
    pc
}

fn run_plan(a: &PlanArgs, cfg: &FileConfig) -> Result<Status> {
    let p = load_problem(&a.problem)?;
    let lib = load_library(&a.primitives, &p.model)?;
    let pc = planner_config(a, cfg);
    pc.validate()?;
    fs::create_dir_all(&a.out_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut io_err = None;
    let run = plan(&p, &lib, &pc, |r| {
        let mut t = Trajectory::new(&r.states(), &r.controls());
        t.dt = Some(p.model.dt_ref);
        t.cost = Some(r.cost);
        let path = a.out_dir.join(format!("solution_{:02}.yaml", written.len()));
        match write(&path, &t.to_yaml()) {
            Ok(()) => {
                info!("{:.3} s: cost {:.3} -> {}", r.wall_time, r.cost, path.display());
                written.push(path);
            }
            Err(e) => io_err = Some(e),
        }
    })?;
    if let Some(e) = io_err {
        return Err(e);
    }
    let mut log = Vec::new();
    run.write_log(&mut log)?;
    write(&a.out_dir.join("run_log.jsonl"), &String::from_utf8(log)?)?;
    if let Some(best) = run.best() {
        let mut t = Trajectory::new(&best.states(), &best.controls());
        t.dt = Some(p.model.dt_ref);
        t.cost = Some(best.cost);
        write(&a.out_dir.join("best.yaml"), &t.to_yaml())?;
    }
    let events: Vec<_> = run.reports.iter().map(|r| json!({"time": r.wall_time, "cost": r.cost, "iteration": r.iteration})).collect();
    println!("{}", json!({"problem": p.name, "seed": pc.seed, "solutions": events, "iterations": run.log.len()}));
    Ok(if run.reports.is_empty() { Status::NoSolution } else { Status::Ok })
}

fn bench(a: &BenchArgs, cfg: &FileConfig) -> Result<Status> {
    let b = &cfg.bench;
    let trials = a.trials.unwrap_or(b.trials);
    let budget = a.budget.unwrap_or(b.budget);
    let seed0 = a.seed.unwrap_or(b.seed);
    let mut cases = Vec::new();
    for path in &a.problem {
        let p = load_problem(path)?;
        let lib_path = a.primitives_dir.join(format!("{}.bin", p.model.id));
        let lib = load_library(&lib_path, &p.model)?;
        cases.push((p, lib));
    }
    cfg.planner.validate()?;
    let records = run_benchmark(&cases, &cfg.planner, trials, budget, seed0)?;
    let results = a.out_dir.join("results");
    for r in &records {
        write_trial(&results, r)?;
    }
    let report = compute_metrics(&records, budget);
    for f in ReportFormat::ALL {
        emit_report(&report, f, &a.out_dir)?;
    }
    write(&a.out_dir.join("convergence.csv"), &convergence_csv(&records, budget, seed0))?;
    print!("{}", idbastar::bench::render_report(&report, ReportFormat::Md));
    Ok(Status::Ok)
}

fn validate(a: &ValidateArgs) -> Result<Status> {
    let p = load_problem(&a.problem)?;
    let t = Trajectory::load(&a.trajectory).with_context(|| format!("loading {}", a.trajectory.display()))?;
    t.check(&p.model)?;
    let (xs, us) = (t.states(), t.controls());
    let ok = match a.delta {
        Some(delta) => {
            let v = dbastar::validate_delta_solution(&p, &xs, &us, delta);
            println!("{}", json!({"delta": delta, "violations": v.len(), "first": v.first().map(|c| format!("{c:?}"))}));
            v.is_empty()
        }
        None => {
            let dt = t.dt.unwrap_or(p.model.dt_ref);
            let c = check_feasibility(&p, &xs, &us, dt, &Default::default());
            println!("{}", serde_json::to_string(&c)?);
            c.pass
        }
    };
    Ok(if ok { Status::Ok } else { Status::NoSolution })
}
