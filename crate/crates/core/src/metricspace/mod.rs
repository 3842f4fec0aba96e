//! Weighted product metric over states, the time lower bound between states,
//! and exact radius-query indices.

pub mod kdtree;

use serde::{Deserialize, Serialize};

use crate::dynamics::{quat, quat_at, wrap_angle, Component, ComponentKind, Group, ModelSpec};
use kdtree::KdTree;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSpec {
    /// Position, orientation, linear velocity, angular velocity.
    pub weights: [f64; 4],
}

impl DistanceSpec {
    pub fn for_model(m: &ModelSpec) -> Self {
        DistanceSpec {
            weights: m.distance_weights,
        }
    }

    /// Only position and orientation count.
    pub fn geometric(m: &ModelSpec) -> Self {
        let mut w = m.distance_weights;
        w[Group::LinearVelocity.index()] = 0.0;
        w[Group::AngularVelocity.index()] = 0.0;
        DistanceSpec { weights: w }
    }
}

#[derive(Clone, Debug)]
pub struct Metric {
    layout: Vec<Component>,
    pub spec: DistanceSpec,
    rates: [Option<f64>; 4],
}

impl Metric {
    pub fn new(m: &ModelSpec) -> Self {
        Self::with_spec(m, DistanceSpec::for_model(m))
    }

    pub fn with_spec(m: &ModelSpec, spec: DistanceSpec) -> Self {
        Metric {
            layout: m.layout.clone(),
            spec,
            rates: m.max_rates,
        }
    }

    /// Unweighted distance of each component group.
    pub fn group_distances(&self, a: &[f64], b: &[f64]) -> [f64; 4] {
        let mut sq = [0.0; 4];
        for c in &self.layout {
            let o = c.offset;
            let d = match c.kind {
                ComponentKind::Euclidean => a[o] - b[o],
                ComponentKind::Angle => wrap_angle(a[o] - b[o]),
                ComponentKind::UnitQuaternion => quat::geodesic(&quat_at(a, o), &quat_at(b, o)),
            };
            sq[c.group.index()] += d * d;
        }
        sq.map(f64::sqrt)
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let g = self.group_distances(a, b);
        let w = &self.spec.weights;
        (0..4).map(|i| (w[i] * g[i]) * (w[i] * g[i])).sum::<f64>().sqrt()
    }

    /// Lower bound on the time needed to move from `a` to `b`: the slowest
    /// group to close its gap at its maximum rate.
    pub fn lower_bound(&self, a: &[f64], b: &[f64]) -> f64 {
        let g = self.group_distances(a, b);
        let mut l: f64 = 0.0;
        for i in 0..4 {
            if let Some(rate) = self.rates[i] {
                if rate > 0.0 {
                    l = l.max(g[i] / rate);
                }
            }
        }
        l
    }

    /// Dimension of the Euclidean embedding used for indexing.
    pub fn embed_dim(&self) -> usize {
        self.layout
            .iter()
            .map(|c| match c.kind {
                ComponentKind::Euclidean => 1,
                ComponentKind::Angle => 2,
                ComponentKind::UnitQuaternion => 4,
            })
            .sum()
    }

    pub fn has_quaternion(&self) -> bool {
        self.layout.iter().any(|c| c.kind == ComponentKind::UnitQuaternion)
    }

    /// Writes an embedding whose Euclidean distance never exceeds `distance`.
    /// Angles become chords `w·(cos, sin)`; a quaternion becomes `2w·q`,
    /// optionally negated.
    pub fn embed(&self, x: &[f64], flip_quaternion: bool, out: &mut Vec<f64>) {
        out.clear();
        for c in &self.layout {
            let w = self.spec.weights[c.group.index()];
            let o = c.offset;
            match c.kind {
                ComponentKind::Euclidean => out.push(w * x[o]),
                ComponentKind::Angle => {
                    let (s, co) = x[o].sin_cos();
                    out.push(w * co);
                    out.push(w * s);
                }
                ComponentKind::UnitQuaternion => {
                    let s = if flip_quaternion { -2.0 * w } else { 2.0 * w };
                    for k in 0..4 {
                        out.push(s * x[o + k]);
                    }
                }
            }
        }
    }
}

/// Exact radius-query index over states with integer payloads.
#[derive(Clone, Debug)]
pub struct NnIndex {
    metric: Metric,
    nx: usize,
    tree: KdTree,
    /// Payload of each tree point.
    owner: Vec<usize>,
    states: Vec<f64>,
    payload: Vec<usize>,
}

impl NnIndex {
    pub fn new(metric: Metric, nx: usize) -> Self {
        NnIndex {
            tree: KdTree::new(metric.embed_dim()),
            metric,
            nx,
            owner: Vec::new(),
            states: Vec::new(),
            payload: Vec::new(),
        }
    }

    pub fn build<'a>(metric: Metric, nx: usize, points: impl IntoIterator<Item = (&'a [f64], usize)>) -> Self {
        let mut idx = Self::new(metric, nx);
        for (p, id) in points {
            idx.add(p, id);
        }
        idx
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    pub fn add(&mut self, x: &[f64], id: usize) {
        let slot = self.payload.len();
        self.states.extend_from_slice(&x[..self.nx]);
        self.payload.push(id);
        let mut e = Vec::new();
        self.metric.embed(x, false, &mut e);
        self.tree.insert(&e);
        self.owner.push(slot);
        if self.metric.has_quaternion() {
            self.metric.embed(x, true, &mut e);
            self.tree.insert(&e);
            self.owner.push(slot);
        }
    }

    pub fn state(&self, slot: usize) -> &[f64] {
        &self.states[slot * self.nx..(slot + 1) * self.nx]
    }

    /// `(payload, distance)` for every stored state within `r` of `q`, in
    /// insertion order.
    pub fn radius_with_distance(&self, q: &[f64], r: f64) -> Vec<(usize, f64)> {
        if r < 0.0 || self.is_empty() {
            return Vec::new();
        }
        let mut e = Vec::new();
        self.metric.embed(q, false, &mut e);
        let mut hits = Vec::new();
        self.tree.radius(&e, r * (1.0 + 1e-9) + 1e-12, &mut hits);
        let mut slots: Vec<usize> = hits.into_iter().map(|h| self.owner[h]).collect();
        slots.sort_unstable();
        slots.dedup();
        slots
            .into_iter()
            .filter_map(|s| {
                let d = self.metric.distance(self.state(s), q);
                (d <= r).then_some((self.payload[s], d))
            })
            .collect()
    }

    pub fn radius(&self, q: &[f64], r: f64) -> Vec<usize> {
        self.radius_with_distance(q, r).into_iter().map(|(id, _)| id).collect()
    }
}
