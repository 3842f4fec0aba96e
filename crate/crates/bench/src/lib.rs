//! Deterministic workloads shared by the benchmarks.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use idbastar::primitives::{sample_state, Origin, SampleBox, SetMeta};
use idbastar::workspace::Bounds;
use idbastar::{Control, ModelId, ModelSpec, MotionPrimitive, PrimitiveSet, Problem, State};

/// Random states and in-bound controls for `model`.
pub fn state_control_pairs(model: &ModelSpec, n: usize, seed: u64) -> Vec<(State, Control)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bx = SampleBox::for_model(model.id);
    (0..n)
        .map(|_| {
            let x = sample_state(model, &bx, &mut rng);
            let u = Control::from_fn(model.control_dim, |i, _| rng.random_range(model.u_lb[i]..=model.u_ub[i]));
            (x, u)
        })
        .collect()
}

/// Constant-control unicycle arcs: `headings` start orientations times
/// forward, left and right turns at two lengths.
pub fn arc_library(headings: usize) -> PrimitiveSet {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let mut prims = Vec::new();
    for h in 0..headings {
        let th = -std::f64::consts::PI + std::f64::consts::TAU * h as f64 / headings as f64;
        for w in [-0.5, 0.0, 0.5] {
            for steps in [5, 10] {
                let us = vec![DVector::from_vec(vec![0.5, w]); steps];
                let xs = m.rollout(&DVector::from_vec(vec![0.0, 0.0, th]), &us, m.dt_ref);
                prims.push(MotionPrimitive::new(&m, xs, us, Origin::Offline));
            }
        }
    }
    PrimitiveSet::new(&m, prims, SetMeta::new(m.id))
}

/// An empty 4 × 3 room crossed left to right.
pub fn open_room() -> Problem {
    Problem::new(
        "open_room",
        ModelSpec::new(ModelId::Unicycle1V0),
        DVector::from_vec(vec![0.5, 1.5, 0.0]),
        DVector::from_vec(vec![3.0, 1.5, 0.0]),
        Bounds {
            lo: vec![0.0, 0.0],
            hi: vec![4.0, 3.0],
        },
        Vec::new(),
    )
    .expect("valid problem")
}
