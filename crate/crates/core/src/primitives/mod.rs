//! Motion primitives: short dynamically feasible trajectories stored in a
//! canonical form and moved onto query states through the model's
//! invariances.

mod generate;
mod store;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Control, InvarianceMode, ModelId, ModelSpec, State};
use crate::metricspace::{Metric, NnIndex};

pub use generate::{generate_primitives, sample_state, GenConfig, SampleBox};
pub use store::{export_yaml, load_set, meta_path, save_set, FORMAT_VERSION};

/// Largest defect tolerated between a stored state and the rollout of its
/// predecessor.
pub const DEFECT_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Offline,
    /// Cut from an optimized solution while planning.
    Online,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionPrimitive {
    pub xs: Vec<State>,
    pub us: Vec<Control>,
    /// Duration in seconds.
    pub cost: f64,
    pub origin: Origin,
}

impl MotionPrimitive {
    pub fn new(model: &ModelSpec, xs: Vec<State>, us: Vec<Control>, origin: Origin) -> Self {
        assert_eq!(xs.len(), us.len() + 1, "a primitive needs one more state than controls");
        let cost = us.len() as f64 * model.dt_ref;
        MotionPrimitive { xs, us, cost, origin }
    }

    pub fn x_s(&self) -> &State {
        &self.xs[0]
    }

    pub fn x_f(&self) -> &State {
        &self.xs[self.xs.len() - 1]
    }

    pub fn steps(&self) -> usize {
        self.us.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrimitiveCheck {
    pub defect_max: f64,
    pub bound_violation: f64,
    pub cost_error: f64,
}

impl PrimitiveCheck {
    pub fn ok(&self) -> bool {
        self.defect_max <= DEFECT_TOL && self.bound_violation <= 0.0 && self.cost_error <= 1e-9
    }
}

/// Measures how far `m` is from being a valid primitive.
pub fn check_primitive(model: &ModelSpec, m: &MotionPrimitive) -> PrimitiveCheck {
    let metric = Metric::new(model);
    let mut next = State::zeros(model.state_dim);
    let mut out = PrimitiveCheck {
        cost_error: (m.cost - m.us.len() as f64 * model.dt_ref).abs(),
        ..Default::default()
    };
    if m.xs.len() != m.us.len() + 1 {
        out.defect_max = f64::INFINITY;
        return out;
    }
    for k in 0..m.us.len() {
        model.step_into(m.xs[k].as_slice(), m.us[k].as_slice(), model.dt_ref, next.as_mut_slice());
        out.defect_max = out.defect_max.max(metric.distance(m.xs[k + 1].as_slice(), next.as_slice()));
    }
    for x in &m.xs {
        for i in 0..model.state_dim {
            out.bound_violation = out.bound_violation.max(model.x_lb[i] - x[i]).max(x[i] - model.x_ub[i]);
        }
    }
    for u in &m.us {
        for i in 0..model.control_dim {
            out.bound_violation = out.bound_violation.max(model.u_lb[i] - u[i]).max(u[i] - model.u_ub[i]);
        }
    }
    if m.xs.iter().chain(&m.us).any(|v| v.iter().any(|e| !e.is_finite())) {
        out.defect_max = f64::INFINITY;
    }
    out
}

/// Applies the invariance transform with position offset `tp` and velocity
/// offset `tv` in place.
fn shift(model: &ModelSpec, m: &mut MotionPrimitive, tp: &[f64], tv: &[f64]) {
    let dt = model.dt_ref;
    let with_vel = model.invariance == InvarianceMode::TranslationAndLinearVelocity;
    for (k, x) in m.xs.iter_mut().enumerate() {
        for (j, &i) in model.position_idx.iter().enumerate() {
            x[i] = if with_vel {
                x[i] + tp[j] + k as f64 * tv[j] * dt
            } else {
                x[i] + tp[j]
            };
        }
        if with_vel {
            for (j, &i) in model.velocity_idx.iter().enumerate() {
                x[i] += tv[j];
            }
        }
    }
}

/// The offsets that carry `from` onto `to` in the invariant components.
fn offsets(model: &ModelSpec, from: &[f64], to: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let tp = model.position_idx.iter().map(|&i| to[i] - from[i]).collect();
    let tv = match model.invariance {
        InvarianceMode::TranslationAndLinearVelocity => {
            model.velocity_idx.iter().map(|&i| to[i] - from[i]).collect()
        }
        _ => Vec::new(),
    };
    (tp, tv)
}

/// The state with its invariant components zeroed.
pub fn canonical_state(model: &ModelSpec, x: &[f64]) -> State {
    let mut c = State::from_column_slice(x);
    match model.invariance {
        InvarianceMode::None => {}
        InvarianceMode::Translation => {
            for &i in &model.position_idx {
                c[i] = 0.0;
            }
        }
        InvarianceMode::TranslationAndLinearVelocity => {
            for &i in model.position_idx.iter().chain(&model.velocity_idx) {
                c[i] = 0.0;
            }
        }
    }
    c
}

pub fn canonicalize(model: &ModelSpec, m: &MotionPrimitive) -> MotionPrimitive {
    let mut out = m.clone();
    if model.invariance != InvarianceMode::None {
        let target = canonical_state(model, m.x_s().as_slice());
        let (tp, tv) = offsets(model, m.x_s().as_slice(), target.as_slice());
        shift(model, &mut out, &tp, &tv);
    }
    out
}

/// Moves a canonical primitive so that its invariant components start at `x`.
pub fn instantiate_at(model: &ModelSpec, m: &MotionPrimitive, x: &[f64]) -> MotionPrimitive {
    let mut out = m.clone();
    if model.invariance != InvarianceMode::None {
        let (tp, tv) = offsets(model, m.x_s().as_slice(), x);
        shift(model, &mut out, &tp, &tv);
    }
    out
}

/// Splits a trajectory into consecutive primitives whose step counts are
/// drawn from `range`. Pieces overlap in exactly one state.
pub fn split_trajectory<R: Rng>(
    model: &ModelSpec,
    xs: &[State],
    us: &[Control],
    range: (usize, usize),
    origin: Origin,
    rng: &mut R,
) -> Vec<MotionPrimitive> {
    assert_eq!(xs.len(), us.len() + 1);
    let (lo, hi) = (range.0.max(1), range.1.max(range.0.max(1)));
    let n = us.len();
    if n == 0 {
        return Vec::new();
    }
    if n < lo {
        return vec![MotionPrimitive::new(model, xs.to_vec(), us.to_vec(), origin)];
    }
    let mut pieces = Vec::new();
    let mut at = 0;
    while at < n {
        let rem = n - at;
        let mut len = rng.random_range(lo..=hi).min(rem);
        if rem - len < lo && rem - len > 0 {
            len = if rem <= hi { rem } else { rem - lo };
        }
        pieces.push(MotionPrimitive::new(
            model,
            xs[at..=at + len].to_vec(),
            us[at..at + len].to_vec(),
            origin,
        ));
        at += len;
    }
    pieces
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetMeta {
    pub model: String,
    pub seed: u64,
    pub requested: usize,
    pub generator_version: u32,
    pub attempts: usize,
    pub elapsed_s: f64,
    /// Generation stopped on its time budget before reaching `requested`.
    pub incomplete: bool,
}

impl SetMeta {
    pub fn new(model: ModelId) -> Self {
        SetMeta {
            model: model.name().to_string(),
            seed: 0,
            requested: 0,
            generator_version: generate::GENERATOR_VERSION,
            attempts: 0,
            elapsed_s: 0.0,
            incomplete: false,
        }
    }
}

/// Canonical primitives with a radius index over their start states.
#[derive(Clone, Debug)]
pub struct PrimitiveSet {
    model: ModelSpec,
    prims: Vec<MotionPrimitive>,
    index: NnIndex,
    pub meta: SetMeta,
}

impl PrimitiveSet {
    /// Canonicalizes every primitive and indexes the starts.
    pub fn new(model: &ModelSpec, prims: Vec<MotionPrimitive>, meta: SetMeta) -> Self {
        let prims: Vec<MotionPrimitive> = prims.iter().map(|m| canonicalize(model, m)).collect();
        let index = NnIndex::build(
            Metric::new(model),
            model.state_dim,
            prims.iter().enumerate().map(|(i, m)| (m.x_s().as_slice(), i)),
        );
        PrimitiveSet {
            model: model.clone(),
            prims,
            index,
            meta,
        }
    }

    pub fn empty(model: &ModelSpec) -> Self {
        Self::new(model, Vec::new(), SetMeta::new(model.id))
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn model_id(&self) -> ModelId {
        self.model.id
    }

    pub fn len(&self) -> usize {
        self.prims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prims.is_empty()
    }

    pub fn get(&self, i: usize) -> &MotionPrimitive {
        &self.prims[i]
    }

    pub fn primitives(&self) -> &[MotionPrimitive] {
        &self.prims
    }

    pub fn iter(&self) -> impl Iterator<Item = &MotionPrimitive> {
        self.prims.iter()
    }

    /// Ids and start discontinuities of primitives applicable at `x`, after
    /// moving them onto `x`.
    pub fn applicable(&self, x: &[f64], radius: f64) -> Vec<(usize, f64)> {
        let q = canonical_state(&self.model, x);
        self.index.radius_with_distance(q.as_slice(), radius)
    }

    /// The first `n` primitives.
    pub fn prefix(&self, n: usize) -> PrimitiveSet {
        let mut meta = self.meta.clone();
        meta.requested = n.min(self.len());
        PrimitiveSet::new(&self.model, self.prims[..n.min(self.len())].to_vec(), meta)
    }

    /// A copy with `extra` appended.
    pub fn extended(&self, extra: &[MotionPrimitive]) -> PrimitiveSet {
        let mut prims = self.prims.clone();
        prims.extend_from_slice(extra);
        PrimitiveSet::new(&self.model, prims, self.meta.clone())
    }
}

#[cfg(test)]
mod tests;
