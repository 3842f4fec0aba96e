use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Group, ModelSpec, State};
use crate::metricspace::{DistanceSpec, Metric, NnIndex};
use crate::workspace::Problem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum HeuristicSpec {
    Euclidean,
    Roadmap {
        n_vertices: usize,
        radius: f64,
        seed: u64,
        /// Answer with the euclidean value where no vertex is in range,
        /// instead of infinity.
        #[serde(default = "yes")]
        fallback: bool,
    },
    Blind,
}

fn yes() -> bool {
    true
}

impl HeuristicSpec {
    pub fn roadmap(n_vertices: usize, radius: f64, seed: u64) -> Self {
        HeuristicSpec::Roadmap {
            n_vertices,
            radius,
            seed,
            fallback: true,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HeuristicSpec::Euclidean => "euclidean",
            HeuristicSpec::Roadmap { .. } => "roadmap",
            HeuristicSpec::Blind => "blind",
        }
    }
}

/// Time lower bound from `x` to `goal`.
pub fn heuristic_euclidean(model: &ModelSpec, x: &[f64], goal: &[f64]) -> f64 {
    Metric::new(model).lower_bound(x, goal)
}

/// Workspace roadmap annotated with cost-to-go.
#[derive(Clone, Debug)]
pub struct Roadmap {
    index: NnIndex,
    cost_to_go: Vec<f64>,
    radius: f64,
    rate: f64,
    pos: Vec<usize>,
    fallback: bool,
    pub edges: usize,
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

fn position_only(model: &ModelSpec) -> Metric {
    let mut w = [0.0; 4];
    w[Group::Position.index()] = 1.0;
    Metric::with_spec(model, DistanceSpec { weights: w })
}

impl Roadmap {
    /// Samples `n` collision-free positions (other components neutral),
    /// joins pairs within `radius` whose segment is free, and runs Dijkstra
    /// from the goal. Edge weights are travel times at the model's top speed.
    pub fn build(problem: &Problem, n: usize, radius: f64, seed: u64, fallback: bool) -> Option<Roadmap> {
        let m = &problem.model;
        let rate = m.max_rates[Group::Position.index()].filter(|r| *r > 0.0)?;
        if m.position_idx.is_empty() {
            return None;
        }
        let metric = position_only(m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut goal = m.zero_state();
        for &i in &m.position_idx {
            goal[i] = problem.goal[i];
        }
        let mut verts: Vec<State> = vec![goal];
        let mut tries = 0;
        while verts.len() < n + 1 && tries < 50 * (n + 1) {
            tries += 1;
            let mut x = m.zero_state();
            for (j, &i) in m.position_idx.iter().enumerate() {
                x[i] = rng.random_range(problem.bounds.lo[j]..problem.bounds.hi[j]);
            }
            if !problem.state_in_collision(x.as_slice()) {
                verts.push(x);
            }
        }
        let index = NnIndex::build(metric.clone(), m.state_dim, verts.iter().enumerate().map(|(i, v)| (v.as_slice(), i)));
        let step = 0.05;
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); verts.len()];
        let mut edges = 0;
        for (i, v) in verts.iter().enumerate() {
            for (j, d) in index.radius_with_distance(v.as_slice(), radius) {
                if j <= i {
                    continue;
                }
                let k = (d / step).ceil() as usize;
                let free = (1..k).all(|s| {
                    let t = s as f64 / k as f64;
                    let x = v + (&verts[j] - v) * t;
                    !problem.state_in_collision(x.as_slice())
                });
                if free {
                    adj[i].push((j, d / rate));
                    adj[j].push((i, d / rate));
                    edges += 1;
                }
            }
        }
        let mut cost = vec![f64::INFINITY; verts.len()];
        {
            cost[0] = 0.0;
            let mut heap = BinaryHeap::from([Item(0.0, 0)]);
            while let Some(Item(c, i)) = heap.pop() {
                if c > cost[i] {
                    continue;
                }
                for &(j, w) in &adj[i] {
                    if c + w < cost[j] {
                        cost[j] = c + w;
                        heap.push(Item(c + w, j));
                    }
                }
            }
        }
        if cost[1..].iter().all(|c| c.is_infinite()) {
            warn!("roadmap: goal is not connected to any vertex");
        }
        Some(Roadmap {
            index,
            cost_to_go: cost,
            radius,
            rate,
            pos: m.position_idx.clone(),
            fallback,
            edges,
        })
    }

    pub fn vertices(&self) -> usize {
        self.cost_to_go.len()
    }

    /// Smallest vertex cost plus travel time over vertices within the radius,
    /// or `None` when no vertex is in range.
    pub fn query(&self, x: &[f64]) -> Option<f64> {
        let mut q = vec![0.0; x.len()];
        for &i in &self.pos {
            q[i] = x[i];
        }
        self.index
            .radius_with_distance(&q, self.radius)
            .into_iter()
            .map(|(i, d)| self.cost_to_go[i] + d / self.rate)
            .min_by(f64::total_cmp)
    }
}

/// A heuristic ready for evaluation.
#[derive(Clone, Debug)]
pub enum Heuristic {
    Euclidean { metric: Metric, goal: State },
    Roadmap { metric: Metric, goal: State, roadmap: Box<Roadmap> },
    Blind,
}

impl Heuristic {
    pub fn build(problem: &Problem, spec: &HeuristicSpec) -> Heuristic {
        let metric = Metric::new(&problem.model);
        let goal = problem.goal.clone();
        match spec {
            HeuristicSpec::Blind => Heuristic::Blind,
            HeuristicSpec::Euclidean => Heuristic::Euclidean { metric, goal },
            HeuristicSpec::Roadmap {
                n_vertices,
                radius,
                seed,
                fallback,
            } => match Roadmap::build(problem, (*n_vertices).max(1), *radius, *seed, *fallback) {
                Some(r) => Heuristic::Roadmap {
                    metric,
                    goal,
                    roadmap: Box::new(r),
                },
                None => {
                    warn!("{} has no position components; using the euclidean heuristic", problem.model.id);
                    Heuristic::Euclidean { metric, goal }
                }
            },
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Heuristic::Blind => 0.0,
            Heuristic::Euclidean { metric, goal } => metric.lower_bound(x, goal.as_slice()),
            Heuristic::Roadmap { metric, goal, roadmap } => {
                let e = metric.lower_bound(x, goal.as_slice());
                match roadmap.query(x) {
                    Some(r) => r.max(e),
                    None if roadmap.fallback => e,
                    None => f64::INFINITY,
                }
            }
        }
    }
}
