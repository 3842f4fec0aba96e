use crate::dynamics::{quat, quat_at, wrap_angle, ComponentKind, Control, ModelSpec, State};

/// Flips quaternion signs so that consecutive states agree with each other,
/// starting from `anchor`.
pub fn align_quaternions(model: &ModelSpec, anchor: &State, xs: &mut [State]) {
    let mut prev = anchor.clone();
    for x in xs.iter_mut() {
        for c in &model.layout {
            if c.kind == ComponentKind::UnitQuaternion {
                let o = c.offset;
                if quat::dot(&quat_at(prev.as_slice(), o), &quat_at(x.as_slice(), o)) < 0.0 {
                    for k in 0..4 {
                        x[o + k] = -x[o + k];
                    }
                }
            }
        }
        prev = x.clone();
    }
}

fn lerp_state(model: &ModelSpec, a: &State, b: &State, t: f64) -> State {
    let mut out = a.clone();
    for c in &model.layout {
        let o = c.offset;
        match c.kind {
            ComponentKind::Euclidean => out[o] = a[o] + t * (b[o] - a[o]),
            ComponentKind::Angle => out[o] = wrap_angle(a[o] + t * wrap_angle(b[o] - a[o])),
            ComponentKind::UnitQuaternion => {
                let (qa, qb) = (quat_at(a.as_slice(), o), quat_at(b.as_slice(), o));
                let s = if quat::dot(&qa, &qb) < 0.0 { -1.0 } else { 1.0 };
                let q: [f64; 4] = std::array::from_fn(|k| qa[k] + t * (s * qb[k] - qa[k]));
                out.rows_mut(o, 4).copy_from_slice(&quat::normalized(&q));
            }
        }
    }
    out
}

/// Value of a piecewise linear signal with knots at `times` (ascending).
fn locate(times: &[f64], t: f64) -> (usize, f64) {
    let n = times.len();
    if n < 2 || t <= times[0] {
        return (0, 0.0);
    }
    if t >= times[n - 1] {
        return (n - 2, 1.0);
    }
    let j = times.partition_point(|v| *v <= t) - 1;
    let h = times[j + 1] - times[j];
    (j, if h > 0.0 { (t - times[j]) / h } else { 0.0 })
}

/// Resamples a trajectory whose states sit at `times` onto `k` uniform steps
/// spanning the same interval. Controls are sampled at the left end of each
/// new step.
pub fn resample(model: &ModelSpec, xs: &[State], us: &[Control], times: &[f64], k: usize) -> (Vec<State>, Vec<Control>) {
    let k = k.max(1);
    let t0 = times[0];
    let t1 = times[times.len() - 1];
    let h = (t1 - t0) / k as f64;
    let mut nxs = Vec::with_capacity(k + 1);
    let mut nus = Vec::with_capacity(k);
    let utimes = &times[..us.len().max(1)];
    for j in 0..=k {
        let t = t0 + h * j as f64;
        let (i, a) = locate(times, t);
        let x = if xs.len() == 1 {
            xs[0].clone()
        } else {
            lerp_state(model, &xs[i], &xs[i + 1], a)
        };
        nxs.push(x);
        if j < k {
            let u = if us.is_empty() {
                model.nominal_control()
            } else if us.len() == 1 {
                us[0].clone()
            } else {
                let (i, a) = locate(utimes, t);
                &us[i] * (1.0 - a) + &us[i + 1] * a
            };
            nus.push(u);
        }
    }
    (nxs, nus)
}

/// Rescales a uniformly sampled trajectory to `k` steps.
pub fn stretch(model: &ModelSpec, xs: &[State], us: &[Control], k: usize) -> (Vec<State>, Vec<Control>) {
    let n = us.len().max(1) as f64;
    let times: Vec<f64> = (0..xs.len()).map(|i| i as f64 / n).collect();
    resample(model, xs, us, &times, k)
}
