//! Quaternion helpers on `[x, y, z, w]` arrays (scalar last).

pub type Quat = [f64; 4];

pub const IDENTITY: Quat = [0.0, 0.0, 0.0, 1.0];

pub fn mul(a: &Quat, b: &Quat) -> Quat {
    let [ax, ay, az, aw] = *a;
    let [bx, by, bz, bw] = *b;
    [
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    ]
}

pub fn conj(q: &Quat) -> Quat {
    [-q[0], -q[1], -q[2], q[3]]
}

pub fn dot(a: &Quat, b: &Quat) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

pub fn norm(q: &Quat) -> f64 {
    dot(q, q).sqrt()
}

pub fn normalized(q: &Quat) -> Quat {
    let n = norm(q);
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

/// Rotation angle between the attitudes `a` and `b`, in `[0, π]`.
pub fn geodesic(a: &Quat, b: &Quat) -> f64 {
    2.0 * dot(a, b).abs().min(1.0).acos()
}

/// Rotation vector of a unit quaternion, taking the short way round.
pub fn log(q: &Quat) -> [f64; 3] {
    let (v, w) = if q[3] < 0.0 {
        ([-q[0], -q[1], -q[2]], -q[3])
    } else {
        ([q[0], q[1], q[2]], q[3])
    };
    let s = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if s < 1e-12 {
        // first-order expansion near the identity
        return [2.0 * v[0], 2.0 * v[1], 2.0 * v[2]];
    }
    let k = 2.0 * s.atan2(w) / s;
    [k * v[0], k * v[1], k * v[2]]
}

pub fn exp(r: &[f64; 3]) -> Quat {
    let th = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let half = 0.5 * th;
    let k = if th < 1e-12 { 0.5 } else { half.sin() / th };
    [k * r[0], k * r[1], k * r[2], half.cos()]
}

/// Rotates `v` by the unit quaternion `q`.
pub fn rotate(q: &Quat, v: &[f64; 3]) -> [f64; 3] {
    let r = matrix(q);
    [
        r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2],
        r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2],
        r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2],
    ]
}

pub fn matrix(q: &Quat) -> [[f64; 3]; 3] {
    let [x, y, z, w] = *q;
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
        ],
        [
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
        ],
        [
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Rotation about the world axis `axis` by `angle`.
pub fn from_axis_angle(axis: &[f64; 3], angle: f64) -> Quat {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let s = (0.5 * angle).sin() / n;
    [axis[0] * s, axis[1] * s, axis[2] * s, (0.5 * angle).cos()]
}
