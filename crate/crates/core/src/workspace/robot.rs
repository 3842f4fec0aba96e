//! Collision geometry attached to each model's state.

use super::geometry::{V2, V3};
use crate::dynamics::{ModelId, ModelSpec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PartShape {
    Rect { half: V2 },
    Disk { r: f64 },
    Sphere { r: f64 },
}

/// A robot part placed in the world.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartPose {
    pub shape: PartShape,
    pub p: V3,
    pub psi: f64,
}

impl PartPose {
    pub fn bounding_radius(&self) -> f64 {
        match self.shape {
            PartShape::Rect { half } => half[0].hypot(half[1]),
            PartShape::Disk { r } | PartShape::Sphere { r } => r,
        }
    }
}

/// Sparse derivative of a part pose: `(state index, ∂p/∂x_i, ∂ψ/∂x_i)`.
pub type PartJacobian = Vec<(usize, V3, f64)>;

#[derive(Clone, Debug)]
pub enum RobotShape {
    /// One rectangle on the planar pose `(x[0], x[1], x[2])`.
    Body { half: V2 },
    CarTrailer {
        car_half: V2,
        trailer_half: V2,
        hitch: f64,
    },
    Acrobot {
        l1: f64,
        l2: f64,
        radius: f64,
        per_link: usize,
    },
    RotorPole {
        half: V2,
        pole: f64,
        radius: f64,
    },
    Sphere { r: f64 },
}

const E: [V3; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

impl RobotShape {
    pub fn for_model(m: &ModelSpec) -> Self {
        let p = &m.params;
        let body = || [p.get("body_length") / 2.0, p.get("body_width") / 2.0];
        match m.id {
            ModelId::Unicycle1V0
            | ModelId::Unicycle1V1
            | ModelId::Unicycle1V2
            | ModelId::Unicycle2
            | ModelId::PlanarRotor => RobotShape::Body { half: body() },
            ModelId::CarTrailer => RobotShape::CarTrailer {
                car_half: body(),
                trailer_half: [p.get("trailer_length") / 2.0, p.get("trailer_width") / 2.0],
                hitch: p.get("hitch_length"),
            },
            ModelId::Acrobot => RobotShape::Acrobot {
                l1: p.get("l1"),
                l2: p.get("l2"),
                radius: p.get("link_radius"),
                per_link: 5,
            },
            ModelId::RotorPole => RobotShape::RotorPole {
                half: body(),
                pole: p.get("pole_length"),
                radius: p.get("pole_radius"),
            },
            ModelId::QuadrotorV0 | ModelId::QuadrotorV1 => RobotShape::Sphere { r: p.get("radius") },
        }
    }

    pub fn part_count(&self) -> usize {
        match self {
            RobotShape::Body { .. } | RobotShape::Sphere { .. } => 1,
            RobotShape::CarTrailer { .. } => 2,
            RobotShape::Acrobot { per_link, .. } => 2 * per_link,
            RobotShape::RotorPole { .. } => 3,
        }
    }

    pub fn place(&self, x: &[f64], out: &mut Vec<PartPose>) {
        out.clear();
        match *self {
            RobotShape::Body { half } => out.push(PartPose {
                shape: PartShape::Rect { half },
                p: [x[0], x[1], 0.0],
                psi: x[2],
            }),
            RobotShape::CarTrailer {
                car_half,
                trailer_half,
                hitch,
            } => {
                out.push(PartPose {
                    shape: PartShape::Rect { half: car_half },
                    p: [x[0], x[1], 0.0],
                    psi: x[2],
                });
                let (s, c) = x[3].sin_cos();
                out.push(PartPose {
                    shape: PartShape::Rect { half: trailer_half },
                    p: [x[0] - hitch * c, x[1] - hitch * s, 0.0],
                    psi: x[3],
                });
            }
            RobotShape::Acrobot {
                l1,
                l2,
                radius,
                per_link,
            } => {
                let (s1, c1) = x[0].sin_cos();
                let (s12, c12) = (x[0] + x[1]).sin_cos();
                for k in 1..=per_link {
                    let t = l1 * k as f64 / per_link as f64;
                    out.push(disk([t * s1, -t * c1], radius));
                }
                for k in 1..=per_link {
                    let t = l2 * k as f64 / per_link as f64;
                    out.push(disk([l1 * s1 + t * s12, -l1 * c1 - t * c12], radius));
                }
            }
            RobotShape::RotorPole { half, pole, radius } => {
                out.push(PartPose {
                    shape: PartShape::Rect { half },
                    p: [x[0], x[1], 0.0],
                    psi: x[2],
                });
                let (s, c) = x[3].sin_cos();
                for t in [0.5 * pole, pole] {
                    out.push(disk([x[0] + t * s, x[1] - t * c], radius));
                }
            }
            RobotShape::Sphere { r } => out.push(PartPose {
                shape: PartShape::Sphere { r },
                p: [x[0], x[1], x[2]],
                psi: 0.0,
            }),
        }
    }

    pub fn part_jacobian(&self, x: &[f64], part: usize) -> PartJacobian {
        let planar = || vec![(0, E[0], 0.0), (1, E[1], 0.0), (2, [0.0; 3], 1.0)];
        match *self {
            RobotShape::Body { .. } => planar(),
            RobotShape::CarTrailer { hitch, .. } => {
                if part == 0 {
                    planar()
                } else {
                    let (s, c) = x[3].sin_cos();
                    vec![
                        (0, E[0], 0.0),
                        (1, E[1], 0.0),
                        (3, [hitch * s, -hitch * c, 0.0], 1.0),
                    ]
                }
            }
            RobotShape::Acrobot { l1, l2, per_link, .. } => {
                let (s1, c1) = x[0].sin_cos();
                let (s12, c12) = (x[0] + x[1]).sin_cos();
                if part < per_link {
                    let t = l1 * (part + 1) as f64 / per_link as f64;
                    vec![(0, [t * c1, t * s1, 0.0], 0.0)]
                } else {
                    let t = l2 * (part - per_link + 1) as f64 / per_link as f64;
                    vec![
                        (0, [l1 * c1 + t * c12, l1 * s1 + t * s12, 0.0], 0.0),
                        (1, [t * c12, t * s12, 0.0], 0.0),
                    ]
                }
            }
            RobotShape::RotorPole { pole, .. } => {
                if part == 0 {
                    planar()
                } else {
                    let t = if part == 1 { 0.5 * pole } else { pole };
                    let (s, c) = x[3].sin_cos();
                    vec![(0, E[0], 0.0), (1, E[1], 0.0), (3, [t * c, t * s, 0.0], 0.0)]
                }
            }
            RobotShape::Sphere { .. } => vec![(0, E[0], 0.0), (1, E[1], 0.0), (2, E[2], 0.0)],
        }
    }
}

fn disk(c: V2, r: f64) -> PartPose {
    PartPose {
        shape: PartShape::Disk { r },
        p: [c[0], c[1], 0.0],
        psi: 0.0,
    }
}
