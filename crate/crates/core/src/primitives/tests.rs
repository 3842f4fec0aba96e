use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dynamics::{ComponentKind, ModelId};
use crate::error::Error;

fn random_controls(m: &ModelSpec, n: usize, rng: &mut ChaCha8Rng) -> Vec<Control> {
    (0..n)
        .map(|_| Control::from_fn(m.control_dim, |i, _| rng.random_range(m.u_lb[i]..=m.u_ub[i])))
        .collect()
}

/// A rollout of random controls from a random start: dynamically exact by
/// construction, though not necessarily inside the state bounds.
fn random_primitive(m: &ModelSpec, n: usize, rng: &mut ChaCha8Rng) -> MotionPrimitive {
    let bx = SampleBox {
        position: 3.0,
        linear_velocity: 1.0,
        angular_velocity: 1.0,
    };
    let x0 = sample_state(m, &bx, rng);
    let us = random_controls(m, n, rng);
    let xs = m.rollout(&x0, &us, m.dt_ref);
    MotionPrimitive::new(m, xs, us, Origin::Offline)
}

fn rollout_defect(m: &ModelSpec, p: &MotionPrimitive) -> f64 {
    let metric = Metric::new(m);
    let xs = m.rollout(p.x_s(), &p.us, m.dt_ref);
    xs.iter()
        .zip(&p.xs)
        .map(|(a, b)| metric.distance(a.as_slice(), b.as_slice()))
        .fold(0.0, f64::max)
}

fn invariant_idx(m: &ModelSpec) -> Vec<usize> {
    match m.invariance {
        InvarianceMode::None => vec![],
        InvarianceMode::Translation => m.position_idx.clone(),
        InvarianceMode::TranslationAndLinearVelocity => {
            m.position_idx.iter().chain(&m.velocity_idx).copied().collect()
        }
    }
}

#[test]
fn translation_keeps_headings() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let xs = m.rollout(
        &DVector::from_vec(vec![2.0, 3.0, 0.4]),
        &vec![DVector::from_vec(vec![0.5, 0.2]); 6],
        m.dt_ref,
    );
    let us = vec![DVector::from_vec(vec![0.5, 0.2]); 6];
    let p = MotionPrimitive::new(&m, xs.clone(), us, Origin::Offline);
    let c = canonicalize(&m, &p);
    assert_eq!(c.x_s().as_slice(), &[0.0, 0.0, 0.4]);
    for (a, b) in c.xs.iter().zip(&xs) {
        assert_eq!(a[2], b[2]);
        assert!((a[0] - (b[0] - 2.0)).abs() < 1e-12);
        assert!((a[1] - (b[1] - 3.0)).abs() < 1e-12);
    }
    assert_eq!(c.cost, p.cost);
}

#[test]
fn instantiation_places_the_start() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = canonicalize(&m, &random_primitive(&m, 8, &mut rng));
    let p = instantiate_at(&m, &c, &[5.0, 1.0, -2.0]);
    assert_eq!(&p.x_s().as_slice()[..2], &[5.0, 1.0]);
    assert_eq!(p.x_s()[2], c.x_s()[2]);
}

#[test]
fn acrobot_primitives_are_left_alone() {
    let m = ModelSpec::new(ModelId::Acrobot);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = random_primitive(&m, 10, &mut rng);
    assert_eq!(canonicalize(&m, &p), p);
    assert_eq!(instantiate_at(&m, &p, &[1.0, 2.0, 0.5, 0.5]), p);
}

#[test]
fn quadrotor_canonical_form_still_rolls_out() {
    let m = ModelSpec::new(ModelId::QuadrotorV0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let p = random_primitive(&m, 60, &mut rng);
        let c = canonicalize(&m, &p);
        for &i in m.position_idx.iter().chain(&m.velocity_idx) {
            assert_eq!(c.x_s()[i], 0.0);
        }
        assert!(rollout_defect(&m, &c) <= 1e-7, "defect {}", rollout_defect(&m, &c));
        let x = sample_state(&m, &SampleBox::for_model(m.id), &mut rng);
        let inst = instantiate_at(&m, &c, x.as_slice());
        assert!(rollout_defect(&m, &inst) <= 1e-7);
    }
}

#[test]
fn split_covers_the_trajectory() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = random_primitive(&m, 100, &mut rng);
    let pieces = split_trajectory(&m, &p.xs, &p.us, (5, 20), Origin::Offline, &mut rng);
    assert_eq!(pieces.iter().map(|q| q.steps()).sum::<usize>(), 100);
    assert!(pieces.iter().all(|q| (5..=20).contains(&q.steps())));
    let mut xs = vec![pieces[0].x_s().clone()];
    let mut us = Vec::new();
    for q in &pieces {
        assert_eq!(q.x_s(), xs.last().unwrap());
        xs.extend_from_slice(&q.xs[1..]);
        us.extend_from_slice(&q.us);
    }
    assert_eq!(xs, p.xs);
    assert_eq!(us, p.us);
}

#[test]
fn short_trajectory_stays_whole() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = random_primitive(&m, 3, &mut rng);
    let pieces = split_trajectory(&m, &p.xs, &p.us, (5, 20), Origin::Offline, &mut rng);
    assert_eq!(pieces.len(), 1);
    assert_eq!(pieces[0], p);
}

#[test]
fn zero_count_gives_an_empty_set() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let set = generate_primitives(&m, &GenConfig::for_model(m.id, 0, 1));
    assert!(set.is_empty());
    assert_eq!(set.meta.attempts, 0);
}

#[test]
fn generated_unicycle_primitives_are_valid() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let set = generate_primitives(&m, &GenConfig::for_model(m.id, 100, 11));
    assert_eq!(set.len(), 100);
    assert!(!set.meta.incomplete);
    let metric = Metric::new(&m);
    for p in set.iter() {
        let chk = check_primitive(&m, p);
        assert!(chk.ok(), "{chk:?}");
        assert_eq!(&p.x_s().as_slice()[..2], &[0.0, 0.0]);
        assert!(p.cost + 1e-9 >= metric.lower_bound(p.x_s().as_slice(), p.x_f().as_slice()));
        assert!((5..=30).contains(&p.steps()) || set.len() == 1);
    }
}

#[test]
fn generation_is_deterministic() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let mut cfg = GenConfig::for_model(m.id, 30, 5);
    cfg.workers = 1;
    let a = generate_primitives(&m, &cfg);
    cfg.workers = 3;
    let b = generate_primitives(&m, &cfg);
    assert_eq!(a.primitives(), b.primitives());
}

#[test]
fn tiny_budget_returns_a_flagged_partial_set() {
    let m = ModelSpec::new(ModelId::QuadrotorV0);
    let mut cfg = GenConfig::for_model(m.id, 10_000, 1);
    cfg.time_budget = Some(std::time::Duration::from_millis(200));
    let set = generate_primitives(&m, &cfg);
    assert!(set.len() < 10_000);
    assert!(set.meta.incomplete);
}

#[test]
fn sampled_quaternions_are_unit_and_spread() {
    let m = ModelSpec::new(ModelId::QuadrotorV0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let o = m.layout.iter().find(|c| c.kind == ComponentKind::UnitQuaternion).unwrap().offset;
    let mut mean_w2 = 0.0;
    let n = 4000;
    for _ in 0..n {
        let x = sample_state(&m, &SampleBox::for_model(m.id), &mut rng);
        let q = x.rows(o, 4);
        assert!((q.norm() - 1.0).abs() < 1e-12);
        mean_w2 += q[3] * q[3] / n as f64;
    }
    // each squared component of a uniform unit quaternion has mean 1/4
    assert!((mean_w2 - 0.25).abs() < 0.02, "{mean_w2}");
}

#[test]
fn applicable_matches_a_linear_scan() {
    let m = ModelSpec::new(ModelId::QuadrotorV0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let prims: Vec<_> = (0..200).map(|_| random_primitive(&m, 5, &mut rng)).collect();
    let set = PrimitiveSet::new(&m, prims, SetMeta::new(m.id));
    let metric = Metric::new(&m);
    for _ in 0..50 {
        let x = sample_state(&m, &SampleBox::for_model(m.id), &mut rng);
        let r = 1.5;
        let mut got: Vec<usize> = set.applicable(x.as_slice(), r).into_iter().map(|(i, _)| i).collect();
        got.sort_unstable();
        let want: Vec<usize> = (0..set.len())
            .filter(|&i| {
                let inst = instantiate_at(&m, set.get(i), x.as_slice());
                metric.distance(inst.x_s().as_slice(), x.as_slice()) <= r
            })
            .collect();
        assert_eq!(got, want);
    }
}

#[test]
fn store_round_trip_is_bit_exact() {
    let m = ModelSpec::new(ModelId::Unicycle2);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut prims: Vec<_> = (0..25).map(|_| random_primitive(&m, 12, &mut rng)).collect();
    prims[3].origin = Origin::Online;
    let mut meta = SetMeta::new(m.id);
    meta.seed = 42;
    let set = PrimitiveSet::new(&m, prims, meta);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u2.bin");
    save_set(&set, &path).unwrap();
    assert!(meta_path(&path).exists());
    let back = load_set(&path, &m).unwrap();
    assert_eq!(back.meta, set.meta);
    for (a, b) in back.iter().zip(set.iter()) {
        assert_eq!(a.cost.to_bits(), b.cost.to_bits());
        assert_eq!(a.origin, b.origin);
        for (x, y) in a.xs.iter().chain(&a.us).zip(b.xs.iter().chain(&b.us)) {
            assert!(x.iter().zip(y.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
    assert_eq!(back.len(), set.len());
    let yaml = export_yaml(&set).unwrap();
    assert!(yaml.contains("primitives:"));
}

#[test]
fn empty_set_round_trips() {
    let m = ModelSpec::new(ModelId::Acrobot);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.bin");
    save_set(&PrimitiveSet::empty(&m), &path).unwrap();
    assert!(load_set(&path, &m).unwrap().is_empty());
}

#[test]
fn loading_for_another_model_fails() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.bin");
    save_set(&PrimitiveSet::empty(&m), &path).unwrap();
    let err = load_set(&path, &ModelSpec::new(ModelId::Unicycle2)).unwrap_err();
    assert!(matches!(err, Error::ModelMismatch { .. }), "{err}");
}

#[test]
fn truncated_file_is_rejected() {
    let m = ModelSpec::new(ModelId::Unicycle1V0);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let set = PrimitiveSet::new(&m, vec![random_primitive(&m, 6, &mut rng)], SetMeta::new(m.id));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.bin");
    save_set(&set, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
    assert!(matches!(load_set(&path, &m), Err(Error::PrimitiveFile(_))));
    std::fs::write(&path, b"nope").unwrap();
    assert!(matches!(load_set(&path, &m), Err(Error::PrimitiveFile(_))));
}

fn model_strategy() -> impl Strategy<Value = ModelId> {
    prop::sample::select(ModelId::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonicalize_is_idempotent(id in model_strategy(), seed in any::<u64>(), n in 1usize..30) {
        let m = ModelSpec::new(id);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = canonicalize(&m, &random_primitive(&m, n, &mut rng));
        prop_assert_eq!(canonicalize(&m, &c), c);
    }

    #[test]
    fn instantiation_is_exact_and_never_farther(id in model_strategy(), seed in any::<u64>(), n in 1usize..30) {
        let m = ModelSpec::new(id);
        let metric = Metric::new(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = canonicalize(&m, &random_primitive(&m, n, &mut rng));
        let x = sample_state(&m, &SampleBox { position: 5.0, linear_velocity: 2.0, angular_velocity: 2.0 }, &mut rng);
        let inst = instantiate_at(&m, &c, x.as_slice());
        for i in invariant_idx(&m) {
            prop_assert_eq!(inst.x_s()[i], x[i]);
        }
        let before = metric.distance(c.x_s().as_slice(), x.as_slice());
        let after = metric.distance(inst.x_s().as_slice(), x.as_slice());
        prop_assert!(after <= before + 1e-12);
        prop_assert!(rollout_defect(&m, &inst) <= 1e-7);
        prop_assert_eq!(inst.us, c.us);
        prop_assert_eq!(inst.cost, c.cost);
    }

    #[test]
    fn split_is_a_partition(seed in any::<u64>(), n in 0usize..200, lo in 1usize..10, extra in 0usize..30) {
        let m = ModelSpec::new(ModelId::Unicycle1V0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hi = 2 * lo + extra;
        let p = random_primitive(&m, n, &mut rng);
        let pieces = split_trajectory(&m, &p.xs, &p.us, (lo, hi), Origin::Offline, &mut rng);
        prop_assert_eq!(pieces.iter().map(|q| q.steps()).sum::<usize>(), n);
        if n >= lo {
            prop_assert!(pieces.iter().all(|q| q.steps() >= lo && q.steps() <= hi));
        }
        let mut at = 0;
        for q in &pieces {
            prop_assert_eq!(&q.xs[..], &p.xs[at..=at + q.steps()]);
            at += q.steps();
        }
    }
}
