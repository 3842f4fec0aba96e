//! Signed distances between convex 2D polygons and disks, and between 3D
//! spheres and yawed boxes.
//!
//! Every query returns a [`Contact`]: the distance, the unit direction in
//! which moving the robot increases it, and the witness point on the robot.
//! Those three give the first-order change of the distance under any rigid
//! motion of the robot part.

pub type V2 = [f64; 2];
pub type V3 = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub d: f64,
    pub n: V3,
    pub w: V3,
}

impl Contact {
    fn planar(d: f64, n: V2, w: V2) -> Self {
        Contact {
            d,
            n: [n[0], n[1], 0.0],
            w: [w[0], w[1], 0.0],
        }
    }
}

fn sub(a: V2, b: V2) -> V2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: V2, b: V2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: V2) -> f64 {
    a[0].hypot(a[1])
}

fn unit_or_x(a: V2) -> V2 {
    let n = norm(a);
    if n > 0.0 {
        [a[0] / n, a[1] / n]
    } else {
        [1.0, 0.0]
    }
}

/// Corners of a rectangle, counter-clockwise. Face `i` runs from corner `i`
/// to corner `i + 1`.
pub fn rect_vertices(center: V2, half: V2, yaw: f64) -> [V2; 4] {
    let (s, c) = yaw.sin_cos();
    let local = [
        [half[0], -half[1]],
        [half[0], half[1]],
        [-half[0], half[1]],
        [-half[0], -half[1]],
    ];
    local.map(|l| [center[0] + c * l[0] - s * l[1], center[1] + s * l[0] + c * l[1]])
}

/// Outward normal of face `i` of a counter-clockwise polygon.
fn face_normal(v: &[V2; 4], i: usize) -> V2 {
    let e = sub(v[(i + 1) % 4], v[i]);
    unit_or_x([e[1], -e[0]])
}

fn closest_on_segment(p: V2, a: V2, b: V2) -> V2 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    [a[0] + t * ab[0], a[1] + t * ab[1]]
}

/// Signed distance from `p` to a convex polygon, the closest boundary point,
/// and the unit direction from the polygon towards `p`.
pub fn point_polygon(p: V2, v: &[V2; 4]) -> (f64, V2, V2) {
    let mut best = f64::NEG_INFINITY;
    let mut face = 0;
    for i in 0..4 {
        let s = dot(face_normal(v, i), sub(p, v[i]));
        if s > best {
            best = s;
            face = i;
        }
    }
    if best <= 0.0 {
        let n = face_normal(v, face);
        return (best, [p[0] - best * n[0], p[1] - best * n[1]], n);
    }
    let mut d = f64::INFINITY;
    let mut cp = p;
    for i in 0..4 {
        let c = closest_on_segment(p, v[i], v[(i + 1) % 4]);
        let di = norm(sub(p, c));
        if di < d {
            d = di;
            cp = c;
        }
    }
    (d, cp, unit_or_x(sub(p, cp)))
}

/// Robot rectangle against obstacle rectangle.
pub fn poly_poly(robot: &[V2; 4], obs: &[V2; 4]) -> Contact {
    // separating-axis pass: best = largest separation over all face normals
    let mut best = f64::NEG_INFINITY;
    let mut n_best = [1.0, 0.0];
    let mut w_best = robot[0];
    for k in 0..4 {
        let n = face_normal(obs, k);
        let (mut s, mut w) = (f64::INFINITY, robot[0]);
        for &v in robot {
            let sv = dot(n, sub(v, obs[k]));
            if sv < s {
                s = sv;
                w = v;
            }
        }
        if s > best {
            best = s;
            n_best = n;
            w_best = w;
        }
    }
    for j in 0..4 {
        let n = face_normal(robot, j);
        let (mut s, mut q) = (f64::INFINITY, obs[0]);
        for &v in obs {
            let sv = dot(n, sub(v, robot[j]));
            if sv < s {
                s = sv;
                q = v;
            }
        }
        if s > best {
            best = s;
            n_best = [-n[0], -n[1]];
            w_best = q;
        }
    }
    if best <= 0.0 {
        return Contact::planar(best, n_best, w_best);
    }

    let mut out = Contact::planar(f64::INFINITY, n_best, w_best);
    for &v in robot {
        for k in 0..4 {
            let c = closest_on_segment(v, obs[k], obs[(k + 1) % 4]);
            let d = norm(sub(v, c));
            if d < out.d {
                out = Contact::planar(d, unit_or_x(sub(v, c)), v);
            }
        }
    }
    for &q in obs {
        for j in 0..4 {
            let c = closest_on_segment(q, robot[j], robot[(j + 1) % 4]);
            let d = norm(sub(c, q));
            if d < out.d {
                out = Contact::planar(d, unit_or_x(sub(c, q)), c);
            }
        }
    }
    out
}

/// Robot disk against obstacle rectangle.
pub fn disk_poly(center: V2, r: f64, obs: &[V2; 4]) -> Contact {
    let (sd, _, n) = point_polygon(center, obs);
    Contact::planar(sd - r, n, center)
}

/// Robot rectangle against obstacle disk.
pub fn poly_disk(robot: &[V2; 4], center: V2, r: f64) -> Contact {
    let (sd, cp, m) = point_polygon(center, robot);
    Contact::planar(sd - r, [-m[0], -m[1]], cp)
}

pub fn disk_disk(robot: V2, r_robot: f64, obs: V2, r_obs: f64) -> Contact {
    let d = sub(robot, obs);
    Contact::planar(norm(d) - r_robot - r_obs, unit_or_x(d), robot)
}

/// Margin of a robot rectangle inside the workspace box; negative when it
/// pokes out.
pub fn poly_in_bounds(robot: &[V2; 4], lo: V2, hi: V2) -> Contact {
    let mut out = Contact::planar(f64::INFINITY, [1.0, 0.0], robot[0]);
    for a in 0..2 {
        for &v in robot {
            let mut e = [0.0; 2];
            let d_hi = hi[a] - v[a];
            if d_hi < out.d {
                e[a] = -1.0;
                out = Contact::planar(d_hi, e, v);
            }
            let d_lo = v[a] - lo[a];
            if d_lo < out.d {
                let mut e = [0.0; 2];
                e[a] = 1.0;
                out = Contact::planar(d_lo, e, v);
            }
        }
    }
    out
}

pub fn disk_in_bounds(center: V2, r: f64, lo: V2, hi: V2) -> Contact {
    let mut out = Contact::planar(f64::INFINITY, [1.0, 0.0], center);
    for a in 0..2 {
        let mut e = [0.0; 2];
        let d_hi = hi[a] - center[a] - r;
        if d_hi < out.d {
            e[a] = -1.0;
            out = Contact::planar(d_hi, e, center);
        }
        let mut e = [0.0; 2];
        let d_lo = center[a] - r - lo[a];
        if d_lo < out.d {
            e[a] = 1.0;
            out = Contact::planar(d_lo, e, center);
        }
    }
    out
}

/// Robot sphere against a box yawed about z.
pub fn sphere_box(p: V3, r: f64, center: V3, half: V3, yaw: f64) -> Contact {
    let (s, c) = yaw.sin_cos();
    let dx = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
    let pl = [c * dx[0] + s * dx[1], -s * dx[0] + c * dx[1], dx[2]];
    let q: V3 = std::array::from_fn(|i| pl[i].abs() - half[i]);
    let sign = |v: f64| if v < 0.0 { -1.0 } else { 1.0 };
    let (sd, gl) = if q.iter().any(|&v| v > 0.0) {
        let o: V3 = q.map(|v| v.max(0.0));
        let len = (o[0] * o[0] + o[1] * o[1] + o[2] * o[2]).sqrt();
        (len, std::array::from_fn(|i| sign(pl[i]) * o[i] / len))
    } else {
        let mut k = 0;
        for i in 1..3 {
            if q[i] > q[k] {
                k = i;
            }
        }
        let mut g = [0.0; 3];
        g[k] = sign(pl[k]);
        (q[k], g)
    };
    let n = [c * gl[0] - s * gl[1], s * gl[0] + c * gl[1], gl[2]];
    Contact { d: sd - r, n, w: p }
}

pub fn sphere_sphere(p: V3, r: f64, center: V3, r_obs: f64) -> Contact {
    let d = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let n = if len > 0.0 {
        d.map(|v| v / len)
    } else {
        [1.0, 0.0, 0.0]
    };
    Contact {
        d: len - r - r_obs,
        n,
        w: p,
    }
}

pub fn sphere_in_bounds(p: V3, r: f64, lo: V3, hi: V3) -> Contact {
    let mut out = Contact {
        d: f64::INFINITY,
        n: [1.0, 0.0, 0.0],
        w: p,
    };
    for a in 0..3 {
        let d_hi = hi[a] - p[a] - r;
        if d_hi < out.d {
            let mut e = [0.0; 3];
            e[a] = -1.0;
            out = Contact { d: d_hi, n: e, w: p };
        }
        let d_lo = p[a] - r - lo[a];
        if d_lo < out.d {
            let mut e = [0.0; 3];
            e[a] = 1.0;
            out = Contact { d: d_lo, n: e, w: p };
        }
    }
    out
}
