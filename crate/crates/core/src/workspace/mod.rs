//! Planning problems: workspace bounds, obstacles, collision checks and
//! signed distance with gradient.

pub mod geometry;
pub mod robot;
mod trajectory;

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ModelId, ModelParams, ModelSpec, State};
use crate::error::{Error, Result};
use geometry::{Contact, V2, V3};
use robot::{PartPose, PartShape, RobotShape};

pub use trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Half extents; yaw rotates about the vertical axis.
    Box { center: V3, half: V3, yaw: f64 },
    Sphere { center: V3, radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Obstacle {
    pub shape: Shape,
    corners: [V2; 4],
}

impl Obstacle {
    pub fn new(shape: Shape) -> Self {
        let corners = match &shape {
            Shape::Box { center, half, yaw } => {
                geometry::rect_vertices([center[0], center[1]], [half[0], half[1]], *yaw)
            }
            Shape::Sphere { .. } => [[0.0; 2]; 4],
        };
        Obstacle { shape, corners }
    }

    pub fn boxed(center: &[f64], size: &[f64], yaw: f64) -> Self {
        let c = pad3(center);
        let h = pad3(size).map(|s| s / 2.0);
        Obstacle::new(Shape::Box {
            center: c,
            half: h,
            yaw,
        })
    }

    pub fn sphere(center: &[f64], radius: f64) -> Self {
        Obstacle::new(Shape::Sphere {
            center: pad3(center),
            radius,
        })
    }

    pub fn center(&self) -> V3 {
        match &self.shape {
            Shape::Box { center, .. } | Shape::Sphere { center, .. } => *center,
        }
    }

    fn bounding_radius(&self, dim: usize) -> f64 {
        match &self.shape {
            Shape::Box { half, .. } => {
                let z = if dim == 3 { half[2] * half[2] } else { 0.0 };
                (half[0] * half[0] + half[1] * half[1] + z).sqrt()
            }
            Shape::Sphere { radius, .. } => *radius,
        }
    }

    /// Same obstacle grown by `eps` in every extent.
    pub fn inflated(&self, eps: f64) -> Self {
        Obstacle::new(match &self.shape {
            Shape::Box { center, half, yaw } => Shape::Box {
                center: *center,
                half: half.map(|h| h + eps),
                yaw: *yaw,
            },
            Shape::Sphere { center, radius } => Shape::Sphere {
                center: *center,
                radius: radius + eps,
            },
        })
    }

    pub fn translated(&self, t: &[f64]) -> Self {
        let t = pad3(t);
        let mv = |c: &V3| [c[0] + t[0], c[1] + t[1], c[2] + t[2]];
        Obstacle::new(match &self.shape {
            Shape::Box { center, half, yaw } => Shape::Box {
                center: mv(center),
                half: *half,
                yaw: *yaw,
            },
            Shape::Sphere { center, radius } => Shape::Sphere {
                center: mv(center),
                radius: *radius,
            },
        })
    }
}

fn pad3(v: &[f64]) -> V3 {
    [
        v.first().copied().unwrap_or(0.0),
        v.get(1).copied().unwrap_or(0.0),
        v.get(2).copied().unwrap_or(0.0),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub name: String,
    pub model: ModelSpec,
    pub start: State,
    pub goal: State,
    pub bounds: Bounds,
    pub obstacles: Vec<Obstacle>,
    pub robot: RobotShape,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    #[serde(default)]
    name: String,
    model: String,
    start: Vec<f64>,
    goal: Vec<f64>,
    bounds: Bounds,
    #[serde(default)]
    obstacles: Vec<ObstacleDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    params: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum ObstacleDoc {
    Box {
        center: Vec<f64>,
        size: Vec<f64>,
        #[serde(default)]
        yaw: f64,
    },
    #[serde(alias = "circle")]
    Sphere { center: Vec<f64>, radius: f64 },
}

impl Problem {
    /// Builds and validates a problem.
    pub fn new(
        name: &str,
        model: ModelSpec,
        start: State,
        goal: State,
        bounds: Bounds,
        obstacles: Vec<Obstacle>,
    ) -> Result<Self> {
        let robot = RobotShape::for_model(&model);
        let mut p = Problem {
            name: name.to_string(),
            model,
            start,
            goal,
            bounds,
            obstacles,
            robot,
        };
        p.model.normalize(p.start.as_mut_slice());
        p.model.normalize(p.goal.as_mut_slice());
        p.validate()?;
        Ok(p)
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidProblem {
            name: self.name.clone(),
            reason: reason.into(),
        }
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if self.bounds.lo.len() != dim || self.bounds.hi.len() != dim {
            return Err(self.invalid(format!("bounds must have {dim} entries")));
        }
        if (0..dim).any(|i| !(self.bounds.lo[i] < self.bounds.hi[i])) {
            return Err(self.invalid("bounds.lo must be below bounds.hi"));
        }
        for o in &self.obstacles {
            let ok = match &o.shape {
                Shape::Box { half, .. } => half[..dim].iter().all(|h| *h > 0.0),
                Shape::Sphere { radius, .. } => *radius > 0.0,
            };
            if !ok {
                return Err(self.invalid("obstacle extents must be positive"));
            }
        }
        for (what, x) in [("start", &self.start), ("goal", &self.goal)] {
            if x.len() != self.model.state_dim {
                return Err(self.invalid(format!(
                    "{what} has {} entries, model needs {}",
                    x.len(),
                    self.model.state_dim
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(self.invalid(format!("{what} is not finite")));
            }
            if !self.model.state_in_bounds(x.as_slice(), 0.0) {
                return Err(self.invalid(format!("{what} violates the state bounds")));
            }
            if self.state_in_collision(x.as_slice()) {
                return Err(self.invalid(format!(
                    "{what} is in collision or outside the workspace bounds"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.model.id.workspace_dim()
    }

    pub fn from_yaml_str(text: &str, origin: &str) -> Result<Self> {
        let doc: ProblemDoc = serde_yaml::from_str(text).map_err(|e| Error::parse_yaml(origin, e))?;
        let id: ModelId = doc.model.parse()?;
        let mut params = ModelParams::defaults(id);
        for (k, v) in &doc.params {
            params.set(k, *v)?;
        }
        let model = ModelSpec::with_params(id, params)?;
        let obstacles = doc
            .obstacles
            .iter()
            .map(|o| match o {
                ObstacleDoc::Box { center, size, yaw } => Obstacle::boxed(center, size, *yaw),
                ObstacleDoc::Sphere { center, radius } => Obstacle::sphere(center, *radius),
            })
            .collect();
        let name = if doc.name.is_empty() {
            Path::new(origin)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        } else {
            doc.name
        };
        Problem::new(
            &name,
            model,
            State::from_vec(doc.start),
            State::from_vec(doc.goal),
            doc.bounds,
            obstacles,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_yaml_str(&text, &path.display().to_string())
    }

    pub fn to_yaml(&self) -> String {
        let dim = self.dim();
        let defaults = ModelParams::defaults(self.model.id);
        let params = self
            .model
            .params
            .iter()
            .filter(|(k, v)| defaults.get_opt(k) != Some(*v))
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let doc = ProblemDoc {
            name: self.name.clone(),
            model: self.model.id.name().to_string(),
            start: self.start.iter().copied().collect(),
            goal: self.goal.iter().copied().collect(),
            bounds: self.bounds.clone(),
            obstacles: self
                .obstacles
                .iter()
                .map(|o| match &o.shape {
                    Shape::Box { center, half, yaw } => ObstacleDoc::Box {
                        center: center[..dim].to_vec(),
                        size: half[..dim].iter().map(|h| 2.0 * h).collect(),
                        yaw: *yaw,
                    },
                    Shape::Sphere { center, radius } => ObstacleDoc::Sphere {
                        center: center[..dim].to_vec(),
                        radius: *radius,
                    },
                })
                .collect(),
            params,
        };
        serde_yaml::to_string(&doc).expect("problem serializes")
    }

    /// Smallest contact over all (robot part, obstacle) pairs and the
    /// workspace walls. With `early_exit`, returns as soon as a nonpositive
    /// distance is seen.
    fn min_contact(&self, parts: &[PartPose], early_exit: bool) -> (Contact, usize) {
        let dim = self.dim();
        let mut best = Contact {
            d: f64::INFINITY,
            n: [1.0, 0.0, 0.0],
            w: [0.0; 3],
        };
        let mut best_part = 0;
        let lo = pad3(&self.bounds.lo);
        let hi = pad3(&self.bounds.hi);
        for (k, part) in parts.iter().enumerate() {
            let verts = match part.shape {
                PartShape::Rect { half } => {
                    Some(geometry::rect_vertices([part.p[0], part.p[1]], half, part.psi))
                }
                _ => None,
            };
            let wall = match part.shape {
                PartShape::Rect { .. } => {
                    geometry::poly_in_bounds(verts.as_ref().unwrap(), [lo[0], lo[1]], [hi[0], hi[1]])
                }
                PartShape::Disk { r } => {
                    geometry::disk_in_bounds([part.p[0], part.p[1]], r, [lo[0], lo[1]], [hi[0], hi[1]])
                }
                PartShape::Sphere { r } => geometry::sphere_in_bounds(part.p, r, lo, hi),
            };
            if wall.d < best.d {
                best = wall;
                best_part = k;
                if early_exit && best.d <= 0.0 {
                    return (best, best_part);
                }
            }
            let rp = part.bounding_radius();
            for o in &self.obstacles {
                let c = o.center();
                let mut gap2 = 0.0;
                for i in 0..dim {
                    gap2 += (part.p[i] - c[i]) * (part.p[i] - c[i]);
                }
                if gap2.sqrt() - rp - o.bounding_radius(dim) >= best.d {
                    continue;
                }
                let contact = match (&part.shape, &o.shape) {
                    (PartShape::Rect { .. }, Shape::Box { .. }) => {
                        geometry::poly_poly(verts.as_ref().unwrap(), &o.corners)
                    }
                    (PartShape::Rect { .. }, Shape::Sphere { center, radius }) => {
                        geometry::poly_disk(verts.as_ref().unwrap(), [center[0], center[1]], *radius)
                    }
                    (PartShape::Disk { r }, Shape::Box { .. }) => {
                        geometry::disk_poly([part.p[0], part.p[1]], *r, &o.corners)
                    }
                    (PartShape::Disk { r }, Shape::Sphere { center, radius }) => {
                        geometry::disk_disk([part.p[0], part.p[1]], *r, [center[0], center[1]], *radius)
                    }
                    (PartShape::Sphere { r }, Shape::Box { center, half, yaw }) => {
                        geometry::sphere_box(part.p, *r, *center, *half, *yaw)
                    }
                    (PartShape::Sphere { r }, Shape::Sphere { center, radius }) => {
                        geometry::sphere_sphere(part.p, *r, *center, *radius)
                    }
                };
                if contact.d < best.d {
                    best = contact;
                    best_part = k;
                    if early_exit && best.d <= 0.0 {
                        return (best, best_part);
                    }
                }
            }
        }
        (best, best_part)
    }

    /// True iff the robot touches an obstacle or leaves the workspace.
    pub fn state_in_collision(&self, x: &[f64]) -> bool {
        let mut parts = Vec::with_capacity(self.robot.part_count());
        self.robot.place(x, &mut parts);
        self.min_contact(&parts, true).0.d <= 0.0
    }

    pub fn trajectory_in_collision(&self, xs: &[State]) -> bool {
        let mut parts = Vec::with_capacity(self.robot.part_count());
        xs.iter().any(|x| {
            self.robot.place(x.as_slice(), &mut parts);
            self.min_contact(&parts, true).0.d <= 0.0
        })
    }

    /// Signed clearance without the gradient.
    pub fn clearance(&self, x: &[f64]) -> f64 {
        let mut parts = Vec::with_capacity(self.robot.part_count());
        self.robot.place(x, &mut parts);
        self.min_contact(&parts, false).0.d
    }

    /// Signed clearance and its gradient with respect to the ambient state.
    pub fn signed_distance(&self, x: &[f64]) -> (f64, DVector<f64>) {
        let mut parts = Vec::with_capacity(self.robot.part_count());
        self.robot.place(x, &mut parts);
        let (c, k) = self.min_contact(&parts, false);
        let mut grad = DVector::zeros(x.len());
        let part = &parts[k];
        // rotating the part about its origin moves the witness along J(w - p)
        let r = [c.w[0] - part.p[0], c.w[1] - part.p[1]];
        let n_rot = -c.n[0] * r[1] + c.n[1] * r[0];
        for (i, dp, dpsi) in self.robot.part_jacobian(x, k) {
            grad[i] += c.n[0] * dp[0] + c.n[1] * dp[1] + c.n[2] * dp[2] + n_rot * dpsi;
        }
        (c.d, grad)
    }
}

#[cfg(test)]
mod tests;
