//! Discontinuity-bounded A*: best-first search that chains motion primitives
//! while allowing small jumps between them.

mod heuristic;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Control, State};
use crate::metricspace::{Metric, NnIndex};
use crate::primitives::{canonical_state, instantiate_at, MotionPrimitive, PrimitiveSet};
use crate::workspace::Problem;

pub use heuristic::{heuristic_euclidean, Heuristic, HeuristicSpec, Roadmap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub delta: f64,
    pub alpha: f64,
    pub cmax: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    /// Record popped f-values and node states.
    pub trace: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            delta: 0.3,
            alpha: 0.5,
            cmax: f64::INFINITY,
            time_limit: None,
            trace: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainLink {
    pub primitive: usize,
    /// State the canonical primitive was moved onto.
    pub anchor: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaBoundedSolution {
    pub xs: Vec<State>,
    pub us: Vec<Control>,
    pub chain: Vec<ChainLink>,
    pub delta: f64,
    /// Search cost in seconds, jumps included.
    pub cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    /// Every reachable node was expanded.
    Exhausted,
    /// The open list ran dry after the cost bound cut some expansions.
    PrunedByCostBound,
    Timeout,
}

impl std::fmt::Display for FailureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailureKind::Exhausted => "search space exhausted",
            FailureKind::PrunedByCostBound => "every branch exceeded the cost bound",
            FailureKind::Timeout => "timeout",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub expansions: usize,
    pub nodes: usize,
    pub reopened: usize,
    pub pruned_by_cost: usize,
    /// Successors that landed within the merge radius of an existing node.
    pub duplicates: usize,
    pub collision_checks: usize,
    pub time_s: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SearchTrace {
    /// f of each expanded node and whether some node was re-opened since
    /// the previous expansion.
    pub popped: Vec<(f64, bool)>,
    /// Final state of every node, in creation order.
    pub nodes: Vec<State>,
    /// Smallest distance between a newly created node and any earlier one.
    /// Pairs farther apart than delta are not measured, so the value stays
    /// infinite when no node ever lands within delta of another.
    pub min_separation: f64,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub result: Result<DeltaBoundedSolution, FailureKind>,
    pub stats: SearchStats,
    pub trace: Option<SearchTrace>,
}

impl SearchOutcome {
    pub fn solution(&self) -> Option<&DeltaBoundedSolution> {
        self.result.as_ref().ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Open,
    Closed,
}

#[derive(Clone, Debug)]
pub struct SearchNode {
    pub x: State,
    /// Final state of the arriving primitive, which may differ from `x` by
    /// up to the duplicate radius.
    pub end: State,
    pub g: f64,
    pub h: f64,
    pub parent: Option<usize>,
    pub arrival: Option<usize>,
    pub status: Status,
}

impl SearchNode {
    pub fn f(&self) -> f64 {
        self.g + self.h
    }
}

struct Entry {
    f: f64,
    g: f64,
    seq: u64,
    node: usize,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl Ord for Entry {
    // max-heap: lower f, then higher g, then earlier insertion wins
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(self.g.total_cmp(&o.g))
            .then(o.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

fn in_free_space(problem: &Problem, m: &MotionPrimitive) -> bool {
    m.xs.iter().all(|x| {
        problem.model.state_in_bounds(x.as_slice(), 0.0) && !problem.state_in_collision(x.as_slice())
    })
}

fn trace_back(
    problem: &Problem,
    prims: &PrimitiveSet,
    nodes: &[SearchNode],
    goal_node: usize,
    delta: f64,
) -> DeltaBoundedSolution {
    let mut path = vec![goal_node];
    while let Some(p) = nodes[*path.last().unwrap()].parent {
        path.push(p);
    }
    path.reverse();
    let mut xs = Vec::new();
    let mut us = Vec::new();
    let mut chain = Vec::new();
    for w in path.windows(2) {
        let (from, to) = (&nodes[w[0]], &nodes[w[1]]);
        let id = to.arrival.expect("non-root nodes have an arrival primitive");
        let m = instantiate_at(&problem.model, prims.get(id), from.x.as_slice());
        xs.extend_from_slice(&m.xs[..m.xs.len() - 1]);
        us.extend_from_slice(&m.us);
        chain.push(ChainLink {
            primitive: id,
            anchor: from.x.iter().copied().collect(),
        });
    }
    xs.push(nodes[goal_node].end.clone());
    DeltaBoundedSolution {
        xs,
        us,
        chain,
        delta,
        cost: nodes[goal_node].g,
    }
}

/// Runs the search. Applicable primitives are those whose start, after
/// moving it onto the node state, lies within `alpha·delta`; a new state
/// within `(1 - alpha)·delta` of an existing node is merged into it.
pub fn db_astar(problem: &Problem, prims: &PrimitiveSet, cfg: &SearchConfig, heuristic: &Heuristic) -> SearchOutcome {
    assert!(cfg.alpha > 0.0 && cfg.alpha < 1.0, "alpha must lie in (0, 1)");
    assert!(cfg.delta > 0.0, "delta must be positive");
    assert!(cfg.cmax > 0.0, "cmax must be positive");
    let started = Instant::now();
    let deadline = cfg.time_limit.map(|t| started + std::time::Duration::from_secs_f64(t));
    let m = &problem.model;
    let metric = Metric::new(m);
    let goal = problem.goal.as_slice();
    let expand_r = cfg.alpha * cfg.delta;
    let merge_r = (1.0 - cfg.alpha) * cfg.delta;

    let mut stats = SearchStats::default();
    let mut trace = cfg.trace.then(|| SearchTrace {
        min_separation: f64::INFINITY,
        ..Default::default()
    });
    let mut nodes: Vec<SearchNode> = Vec::new();
    let mut index = NnIndex::new(metric.clone(), m.state_dim);
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;

    let root = SearchNode {
        x: problem.start.clone(),
        end: problem.start.clone(),
        g: 0.0,
        h: heuristic.eval(problem.start.as_slice()),
        parent: None,
        arrival: None,
        status: Status::Open,
    };
    open.push(Entry {
        f: root.f(),
        g: 0.0,
        seq,
        node: 0,
    });
    index.add(root.x.as_slice(), 0);
    if let Some(t) = trace.as_mut() {
        t.nodes.push(root.x.clone());
    }
    nodes.push(root);
    let mut reopened_since_pop = false;

    let finish = |result, mut stats: SearchStats, trace: Option<SearchTrace>, n: usize| {
        stats.nodes = n;
        stats.time_s = started.elapsed().as_secs_f64();
        SearchOutcome { result, stats, trace }
    };

    while let Some(e) = open.pop() {
        let ni = e.node;
        if nodes[ni].status == Status::Closed || e.g != nodes[ni].g {
            continue;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return finish(Err(FailureKind::Timeout), stats, trace, nodes.len());
        }
        if let Some(t) = trace.as_mut() {
            t.popped.push((nodes[ni].f(), reopened_since_pop));
        }
        reopened_since_pop = false;
        if metric.distance(nodes[ni].end.as_slice(), goal) <= cfg.delta {
            let sol = trace_back(problem, prims, &nodes, ni, cfg.delta);
            return finish(Ok(sol), stats, trace, nodes.len());
        }
        stats.expansions += 1;
        let nx = nodes[ni].x.clone();
        let ng = nodes[ni].g;
        // the jump onto a moved primitive equals the jump in canonical form
        let cx = canonical_state(m, nx.as_slice());
        for (id, _) in prims.applicable(nx.as_slice(), expand_r) {
            let prim = prims.get(id);
            let g1 = ng + prim.cost + metric.lower_bound(cx.as_slice(), prim.x_s().as_slice());
            if g1 > cfg.cmax {
                stats.pruned_by_cost += 1;
                continue;
            }
            let inst = instantiate_at(m, prim, nx.as_slice());
            let xn = inst.x_f().clone();
            let near = index.radius_with_distance(xn.as_slice(), merge_r);
            if near.is_empty() {
                stats.collision_checks += 1;
                if !in_free_space(problem, &inst) {
                    continue;
                }
                let node = SearchNode {
                    h: heuristic.eval(xn.as_slice()),
                    x: xn.clone(),
                    end: xn.clone(),
                    g: g1,
                    parent: Some(ni),
                    arrival: Some(id),
                    status: Status::Open,
                };
                let k = nodes.len();
                seq += 1;
                open.push(Entry {
                    f: node.f(),
                    g: node.g,
                    seq,
                    node: k,
                });
                if let Some(t) = trace.as_mut() {
                    for (_, d) in index.radius_with_distance(xn.as_slice(), cfg.delta) {
                        t.min_separation = t.min_separation.min(d);
                    }
                    t.nodes.push(xn.clone());
                }
                index.add(xn.as_slice(), k);
                nodes.push(node);
            } else {
                stats.duplicates += 1;
                let mut checked: Option<bool> = None;
                for (si, _) in near {
                    let g2 = g1 + metric.lower_bound(xn.as_slice(), nodes[si].x.as_slice());
                    if g2 >= nodes[si].g {
                        continue;
                    }
                    let free = *checked.get_or_insert_with(|| {
                        stats.collision_checks += 1;
                        in_free_space(problem, &inst)
                    });
                    if !free {
                        break;
                    }
                    let s = &mut nodes[si];
                    s.g = g2;
                    s.parent = Some(ni);
                    s.arrival = Some(id);
                    s.end = xn.clone();
                    if s.status == Status::Closed {
                        s.status = Status::Open;
                        stats.reopened += 1;
                        reopened_since_pop = true;
                    }
                    seq += 1;
                    open.push(Entry {
                        f: s.f(),
                        g: s.g,
                        seq,
                        node: si,
                    });
                }
            }
        }
        nodes[ni].status = Status::Closed;
    }
    let kind = if stats.pruned_by_cost > 0 {
        FailureKind::PrunedByCostBound
    } else {
        FailureKind::Exhausted
    };
    finish(Err(kind), stats, trace, nodes.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    /// Consecutive states are within delta of the dynamics.
    Dynamics,
    ControlBounds,
    /// States inside the state bounds and collision free.
    FreeSpace,
    Start,
    Goal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClauseViolation {
    pub clause: Clause,
    /// Step or state index, when the clause is indexed.
    pub index: Option<usize>,
    pub amount: f64,
}

/// Checks every condition of a delta-bounded solution and lists the
/// violations; an empty list means the solution is valid.
pub fn validate_delta_solution(problem: &Problem, xs: &[State], us: &[Control], delta: f64) -> Vec<ClauseViolation> {
    let m = &problem.model;
    let metric = Metric::new(m);
    let mut out = Vec::new();
    let tol = 1e-9;
    if xs.len() != us.len() + 1 {
        out.push(ClauseViolation {
            clause: Clause::Dynamics,
            index: None,
            amount: f64::INFINITY,
        });
        return out;
    }
    let mut next = State::zeros(m.state_dim);
    for k in 0..us.len() {
        m.step_into(xs[k].as_slice(), us[k].as_slice(), m.dt_ref, next.as_mut_slice());
        let d = metric.distance(xs[k + 1].as_slice(), next.as_slice());
        if !(d <= delta + tol) {
            out.push(ClauseViolation {
                clause: Clause::Dynamics,
                index: Some(k),
                amount: d - delta,
            });
        }
        if !m.control_in_bounds(us[k].as_slice(), tol) {
            let v = (0..m.control_dim)
                .map(|i| (m.u_lb[i] - us[k][i]).max(us[k][i] - m.u_ub[i]))
                .fold(f64::NAN, f64::max);
            out.push(ClauseViolation {
                clause: Clause::ControlBounds,
                index: Some(k),
                amount: v,
            });
        }
    }
    for (k, x) in xs.iter().enumerate() {
        let bounds_ok = m.state_in_bounds(x.as_slice(), tol);
        let clear = problem.clearance(x.as_slice());
        if !bounds_ok || !(clear > 0.0) {
            out.push(ClauseViolation {
                clause: Clause::FreeSpace,
                index: Some(k),
                amount: if bounds_ok { -clear } else { f64::INFINITY },
            });
        }
    }
    let d0 = metric.distance(xs[0].as_slice(), problem.start.as_slice());
    if !(d0 <= delta + tol) {
        out.push(ClauseViolation {
            clause: Clause::Start,
            index: None,
            amount: d0 - delta,
        });
    }
    let dg = metric.distance(xs[xs.len() - 1].as_slice(), problem.goal.as_slice());
    if !(dg <= delta + tol) {
        out.push(ClauseViolation {
            clause: Clause::Goal,
            index: None,
            amount: dg - delta,
        });
    }
    out
}

#[derive(Serialize)]
struct SolutionDoc<'a> {
    delta: f64,
    cost: f64,
    chain: &'a [ChainLink],
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
}

impl DeltaBoundedSolution {
    pub fn validate(&self, problem: &Problem) -> Vec<ClauseViolation> {
        validate_delta_solution(problem, &self.xs, &self.us, self.delta)
    }

    pub fn to_yaml(&self) -> String {
        let doc = SolutionDoc {
            delta: self.delta,
            cost: self.cost,
            chain: &self.chain,
            states: self.xs.iter().map(|x| x.iter().copied().collect()).collect(),
            actions: self.us.iter().map(|u| u.iter().copied().collect()).collect(),
        };
        serde_yaml::to_string(&doc).expect("solution serializes")
    }
}

#[cfg(test)]
mod tests;
