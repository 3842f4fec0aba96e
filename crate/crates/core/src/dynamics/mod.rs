//! The dynamical systems: Euler-discretized dynamics, analytic Jacobians,
//! box bounds and manifold-aware state arithmetic.
//!
//! States are stored in ambient coordinates. Angles live in (−π, π] and
//! quaternions are stored `[x, y, z, w]` with unit norm. Jacobians are taken
//! with respect to these ambient coordinates; `state_diff` maps into the
//! tangent space where quaternions take three coordinates.

mod models;
pub mod params;
pub mod quat;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use models::Dyn;
pub use params::ModelParams;

pub type State = DVector<f64>;
pub type Control = DVector<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "unicycle1_v0")]
    Unicycle1V0,
    #[serde(rename = "unicycle1_v1")]
    Unicycle1V1,
    #[serde(rename = "unicycle1_v2")]
    Unicycle1V2,
    #[serde(rename = "unicycle2")]
    Unicycle2,
    #[serde(rename = "car_trailer")]
    CarTrailer,
    #[serde(rename = "acrobot")]
    Acrobot,
    #[serde(rename = "planar_rotor")]
    PlanarRotor,
    #[serde(rename = "rotor_pole")]
    RotorPole,
    #[serde(rename = "quadrotor_v0")]
    QuadrotorV0,
    #[serde(rename = "quadrotor_v1")]
    QuadrotorV1,
}

impl ModelId {
    pub const ALL: [ModelId; 10] = [
        ModelId::Unicycle1V0,
        ModelId::Unicycle1V1,
        ModelId::Unicycle1V2,
        ModelId::Unicycle2,
        ModelId::CarTrailer,
        ModelId::Acrobot,
        ModelId::PlanarRotor,
        ModelId::RotorPole,
        ModelId::QuadrotorV0,
        ModelId::QuadrotorV1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Unicycle1V0 => "unicycle1_v0",
            ModelId::Unicycle1V1 => "unicycle1_v1",
            ModelId::Unicycle1V2 => "unicycle1_v2",
            ModelId::Unicycle2 => "unicycle2",
            ModelId::CarTrailer => "car_trailer",
            ModelId::Acrobot => "acrobot",
            ModelId::PlanarRotor => "planar_rotor",
            ModelId::RotorPole => "rotor_pole",
            ModelId::QuadrotorV0 => "quadrotor_v0",
            ModelId::QuadrotorV1 => "quadrotor_v1",
        }
    }

    /// Stable small integer used by the binary primitive format.
    pub fn code(self) -> u16 {
        ModelId::ALL.iter().position(|m| *m == self).unwrap() as u16
    }

    pub fn from_code(code: u16) -> Option<Self> {
        ModelId::ALL.get(code as usize).copied()
    }

    pub fn is_flying(self) -> bool {
        matches!(
            self,
            ModelId::PlanarRotor | ModelId::RotorPole | ModelId::QuadrotorV0 | ModelId::QuadrotorV1
        )
    }

    /// Workspace dimension the robot moves in.
    pub fn workspace_dim(self) -> usize {
        match self {
            ModelId::QuadrotorV0 | ModelId::QuadrotorV1 => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComponentKind {
    Euclidean,
    Angle,
    UnitQuaternion,
}

impl ComponentKind {
    pub fn ambient_len(self) -> usize {
        match self {
            ComponentKind::UnitQuaternion => 4,
            _ => 1,
        }
    }

    pub fn tangent_len(self) -> usize {
        match self {
            ComponentKind::UnitQuaternion => 3,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    Position,
    Orientation,
    LinearVelocity,
    AngularVelocity,
}

impl Group {
    pub const ALL: [Group; 4] = [
        Group::Position,
        Group::Orientation,
        Group::LinearVelocity,
        Group::AngularVelocity,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    fn weight_key(self) -> &'static str {
        match self {
            Group::Position => "weight_position",
            Group::Orientation => "weight_orientation",
            Group::LinearVelocity => "weight_linear_velocity",
            Group::AngularVelocity => "weight_angular_velocity",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Component {
    pub kind: ComponentKind,
    pub group: Group,
    /// Offset into the ambient state vector.
    pub offset: usize,
    /// Offset into the tangent vector.
    pub tangent_offset: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InvarianceMode {
    None,
    Translation,
    TranslationAndLinearVelocity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    State,
    Control,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: BoundKind,
    pub index: usize,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Violation {
    pub fn amount(&self) -> f64 {
        (self.lo - self.value).max(self.value - self.hi).max(0.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub in_bounds: bool,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub id: ModelId,
    pub dt_ref: f64,
    pub state_dim: usize,
    pub control_dim: usize,
    pub layout: Vec<Component>,
    pub u_lb: Control,
    pub u_ub: Control,
    pub x_lb: State,
    pub x_ub: State,
    /// Indexed by [`Group::index`].
    pub distance_weights: [f64; 4],
    /// Upper bounds on how fast each group's distance can change, used by the
    /// lower-bound cost. `None` means no cheap admissible rate is known.
    pub max_rates: [Option<f64>; 4],
    pub position_idx: Vec<usize>,
    pub velocity_idx: Vec<usize>,
    pub invariance: InvarianceMode,
    pub params: ModelParams,
    tangent_dim: usize,
    dynamics: Dyn,
}

impl ModelSpec {
    pub fn new(id: ModelId) -> Self {
        Self::with_params(id, ModelParams::defaults(id)).expect("default parameters are valid")
    }

    pub fn with_params(id: ModelId, params: ModelParams) -> Result<Self> {
        use ComponentKind::*;
        use Group::*;
        let inf = f64::INFINITY;
        let p = &params;
        let g = p.get("g");
        let dt_ref = p.get("dt");
        if dt_ref <= 0.0 {
            return Err(Error::Param {
                key: "dt".into(),
                reason: "must be positive".into(),
            });
        }

        let (slots, u_lb, u_ub, x_lb, x_ub): (Vec<(ComponentKind, Group)>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);
        let pos_idx: Vec<usize>;
        let vel_idx: Vec<usize>;
        let invariance;
        let mut rates = [None; 4];
        match id {
            ModelId::Unicycle1V0 | ModelId::Unicycle1V1 | ModelId::Unicycle1V2 => {
                slots = vec![(Euclidean, Position), (Euclidean, Position), (Angle, Orientation)];
                u_lb = vec![p.get("v_min"), p.get("w_min")];
                u_ub = vec![p.get("v_max"), p.get("w_max")];
                x_lb = vec![-inf; 3];
                x_ub = vec![inf; 3];
                pos_idx = vec![0, 1];
                vel_idx = vec![];
                invariance = InvarianceMode::Translation;
                rates[0] = Some(abs_max(u_lb[0], u_ub[0]));
                rates[1] = Some(abs_max(u_lb[1], u_ub[1]));
            }
            ModelId::Unicycle2 => {
                slots = vec![
                    (Euclidean, Position),
                    (Euclidean, Position),
                    (Angle, Orientation),
                    (Euclidean, LinearVelocity),
                    (Euclidean, AngularVelocity),
                ];
                u_lb = vec![p.get("a_min"), p.get("alpha_min")];
                u_ub = vec![p.get("a_max"), p.get("alpha_max")];
                x_lb = vec![-inf, -inf, -inf, p.get("v_min"), p.get("w_min")];
                x_ub = vec![inf, inf, inf, p.get("v_max"), p.get("w_max")];
                pos_idx = vec![0, 1];
                vel_idx = vec![];
                invariance = InvarianceMode::Translation;
                rates = [
                    Some(abs_max(x_lb[3], x_ub[3])),
                    Some(abs_max(x_lb[4], x_ub[4])),
                    Some(abs_max(u_lb[0], u_ub[0])),
                    Some(abs_max(u_lb[1], u_ub[1])),
                ];
            }
            ModelId::CarTrailer => {
                slots = vec![
                    (Euclidean, Position),
                    (Euclidean, Position),
                    (Angle, Orientation),
                    (Angle, Orientation),
                ];
                let phi = p.get("phi_max");
                u_lb = vec![p.get("v_min"), -phi];
                u_ub = vec![p.get("v_max"), phi];
                x_lb = vec![-inf; 4];
                x_ub = vec![inf; 4];
                pos_idx = vec![0, 1];
                vel_idx = vec![];
                invariance = InvarianceMode::Translation;
                let v = abs_max(u_lb[0], u_ub[0]);
                let w0 = v / p.get("wheelbase") * phi.tan();
                let w1 = v / p.get("hitch_length");
                rates[0] = Some(v);
                rates[1] = Some(w0.hypot(w1));
            }
            ModelId::Acrobot => {
                slots = vec![
                    (Angle, Orientation),
                    (Angle, Orientation),
                    (Euclidean, AngularVelocity),
                    (Euclidean, AngularVelocity),
                ];
                let um = p.get("u_max");
                let qd = p.get("qdot_max");
                u_lb = vec![-um];
                u_ub = vec![um];
                x_lb = vec![-inf, -inf, -qd, -qd];
                x_ub = vec![inf, inf, qd, qd];
                pos_idx = vec![];
                vel_idx = vec![];
                invariance = InvarianceMode::None;
                rates[1] = Some(qd * 2f64.sqrt());
            }
            ModelId::PlanarRotor => {
                slots = vec![
                    (Euclidean, Position),
                    (Euclidean, Position),
                    (Angle, Orientation),
                    (Euclidean, LinearVelocity),
                    (Euclidean, LinearVelocity),
                    (Euclidean, AngularVelocity),
                ];
                let m = p.get("mass");
                let fmax = p.get("thrust_to_weight") * m * g / 2.0;
                u_lb = vec![0.0; 2];
                u_ub = vec![fmax; 2];
                let (v, w) = (p.get("v_max"), p.get("w_max"));
                x_lb = vec![-inf, -inf, -inf, -v, -v, -w];
                x_ub = vec![inf, inf, inf, v, v, w];
                pos_idx = vec![0, 1];
                vel_idx = vec![3, 4];
                invariance = InvarianceMode::TranslationAndLinearVelocity;
                rates[0] = Some(v * 2f64.sqrt());
                rates[1] = Some(w);
                rates[2] = Some(2.0 * fmax / m + g);
                rates[3] = Some(2.0 * fmax * p.get("arm") / p.get("inertia"));
            }
            ModelId::RotorPole => {
                slots = vec![
                    (Euclidean, Position),
                    (Euclidean, Position),
                    (Angle, Orientation),
                    (Angle, Orientation),
                    (Euclidean, LinearVelocity),
                    (Euclidean, LinearVelocity),
                    (Euclidean, AngularVelocity),
                    (Euclidean, AngularVelocity),
                ];
                let mt = p.get("mass") + p.get("pole_mass");
                let fmax = p.get("thrust_to_weight") * mt * g / 2.0;
                u_lb = vec![0.0; 2];
                u_ub = vec![fmax; 2];
                let (v, w, qd) = (p.get("v_max"), p.get("w_max"), p.get("qdot_max"));
                x_lb = vec![-inf, -inf, -inf, -inf, -v, -v, -w, -qd];
                x_ub = vec![inf, inf, inf, inf, v, v, w, qd];
                pos_idx = vec![0, 1];
                vel_idx = vec![4, 5];
                invariance = InvarianceMode::TranslationAndLinearVelocity;
                rates[0] = Some(v * 2f64.sqrt());
                rates[1] = Some(w.hypot(qd));
            }
            ModelId::QuadrotorV0 | ModelId::QuadrotorV1 => {
                slots = vec![
                    (Euclidean, Position),
                    (Euclidean, Position),
                    (Euclidean, Position),
                    (Euclidean, LinearVelocity),
                    (Euclidean, LinearVelocity),
                    (Euclidean, LinearVelocity),
                    (UnitQuaternion, Orientation),
                    (Euclidean, AngularVelocity),
                    (Euclidean, AngularVelocity),
                    (Euclidean, AngularVelocity),
                ];
                let m = p.get("mass");
                let thrust_max;
                if id == ModelId::QuadrotorV0 {
                    let fmax = p.get("thrust_to_weight") * m * g / 4.0;
                    u_lb = vec![0.0; 4];
                    u_ub = vec![fmax; 4];
                    thrust_max = 4.0 * fmax;
                } else {
                    thrust_max = p.get("thrust_max_ratio") * m * g;
                    let t = p.get("torque_max");
                    u_lb = vec![0.0, -t, -t, -t];
                    u_ub = vec![thrust_max, t, t, t];
                }
                let (v, w) = (p.get("v_max"), p.get("w_max"));
                x_lb = [vec![-inf; 3], vec![-v; 3], vec![-inf; 4], vec![-w; 3]].concat();
                x_ub = [vec![inf; 3], vec![v; 3], vec![inf; 4], vec![w; 3]].concat();
                pos_idx = vec![0, 1, 2];
                vel_idx = vec![3, 4, 5];
                invariance = InvarianceMode::TranslationAndLinearVelocity;
                rates[0] = Some(v * 3f64.sqrt());
                rates[1] = Some(w * 3f64.sqrt());
                rates[2] = Some(thrust_max / m + g);
            }
        }

        let mut layout = Vec::with_capacity(slots.len());
        let (mut off, mut toff) = (0, 0);
        for (kind, group) in slots {
            layout.push(Component {
                kind,
                group,
                offset: off,
                tangent_offset: toff,
            });
            off += kind.ambient_len();
            toff += kind.tangent_len();
        }
        let mut weights = [0.0; 4];
        for grp in Group::ALL {
            weights[grp.index()] = p.get_opt(grp.weight_key()).unwrap_or(0.0);
        }
        if weights.iter().any(|w| *w < 0.0) || weights.iter().all(|w| *w == 0.0) {
            return Err(Error::Param {
                key: "weight_*".into(),
                reason: "distance weights must be nonnegative with at least one positive".into(),
            });
        }
        for i in 0..u_lb.len() {
            if u_lb[i] > u_ub[i] {
                return Err(Error::Param {
                    key: format!("control bound {i}"),
                    reason: format!("lower {} exceeds upper {}", u_lb[i], u_ub[i]),
                });
            }
        }
        for i in 0..x_lb.len() {
            if x_lb[i] > x_ub[i] {
                return Err(Error::Param {
                    key: format!("state bound {i}"),
                    reason: format!("lower {} exceeds upper {}", x_lb[i], x_ub[i]),
                });
            }
        }
        let dynamics = Dyn::new(id, &params);
        Ok(ModelSpec {
            id,
            dt_ref,
            state_dim: off,
            control_dim: u_lb.len(),
            layout,
            u_lb: DVector::from_vec(u_lb),
            u_ub: DVector::from_vec(u_ub),
            x_lb: DVector::from_vec(x_lb),
            x_ub: DVector::from_vec(x_ub),
            distance_weights: weights,
            max_rates: rates,
            position_idx: pos_idx,
            velocity_idx: vel_idx,
            invariance,
            params,
            tangent_dim: toff,
            dynamics,
        })
    }

    pub fn tangent_dim(&self) -> usize {
        self.tangent_dim
    }

    pub fn weight(&self, g: Group) -> f64 {
        self.distance_weights[g.index()]
    }

    /// A state with every component at its neutral value (zero, identity).
    pub fn zero_state(&self) -> State {
        let mut x = State::zeros(self.state_dim);
        for c in &self.layout {
            if c.kind == ComponentKind::UnitQuaternion {
                x[c.offset + 3] = 1.0;
            }
        }
        x
    }

    pub fn check_state(&self, x: &[f64]) -> Result<()> {
        check_len("state", x.len(), self.state_dim)
    }

    pub fn check_control(&self, u: &[f64]) -> Result<()> {
        check_len("control", u.len(), self.control_dim)
    }

    /// Continuous dynamics f(x, u).
    pub fn xdot(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.dynamics.eval(x, u, out);
    }

    /// ∂f/∂x and ∂f/∂u.
    pub fn xdot_jacobians(&self, x: &[f64], u: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut fx = DMatrix::zeros(self.state_dim, self.state_dim);
        let mut fu = DMatrix::zeros(self.state_dim, self.control_dim);
        self.dynamics.eval_jac(x, u, &mut fx, &mut fu);
        (fx, fu)
    }

    /// x + f(x, u)·dt with no wrapping or renormalization.
    pub fn euler_raw(&self, x: &State, u: &Control, dt: f64) -> Result<State> {
        self.check_state(x.as_slice())?;
        self.check_control(u.as_slice())?;
        let mut f = vec![0.0; self.state_dim];
        self.xdot(x.as_slice(), u.as_slice(), &mut f);
        Ok(State::from_iterator(
            self.state_dim,
            x.iter().zip(&f).map(|(a, b)| a + b * dt),
        ))
    }

    pub fn step(&self, x: &State, u: &Control, dt: f64) -> Result<State> {
        self.check_state(x.as_slice())?;
        self.check_control(u.as_slice())?;
        if !(dt > 0.0) {
            return Err(Error::Precondition(format!("dt must be positive, got {dt}")));
        }
        let mut out = State::zeros(self.state_dim);
        self.step_into(x.as_slice(), u.as_slice(), dt, out.as_mut_slice());
        Ok(out)
    }

    /// Unchecked step for hot loops; slices must have the model's lengths.
    pub fn step_into(&self, x: &[f64], u: &[f64], dt: f64, out: &mut [f64]) {
        self.xdot(x, u, out);
        for i in 0..self.state_dim {
            out[i] = x[i] + out[i] * dt;
        }
        self.normalize(out);
    }

    pub fn step_unchecked(&self, x: &State, u: &Control, dt: f64) -> State {
        let mut out = State::zeros(self.state_dim);
        self.step_into(x.as_slice(), u.as_slice(), dt, out.as_mut_slice());
        out
    }

    /// Wraps angles into (−π, π] and rescales quaternions to unit norm.
    pub fn normalize(&self, x: &mut [f64]) {
        for c in &self.layout {
            match c.kind {
                ComponentKind::Euclidean => {}
                ComponentKind::Angle => x[c.offset] = wrap_angle(x[c.offset]),
                ComponentKind::UnitQuaternion => {
                    let q = &mut x[c.offset..c.offset + 4];
                    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
                    for v in q.iter_mut() {
                        *v /= n;
                    }
                }
            }
        }
    }

    pub fn rollout(&self, x0: &State, us: &[Control], dt: f64) -> Vec<State> {
        let mut xs = Vec::with_capacity(us.len() + 1);
        xs.push(x0.clone());
        for u in us {
            let next = self.step_unchecked(xs.last().unwrap(), u, dt);
            xs.push(next);
        }
        xs
    }

    /// Jacobians of `step` with respect to the ambient state and control.
    pub fn jacobians(&self, x: &State, u: &Control, dt: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_state(x.as_slice())?;
        self.check_control(u.as_slice())?;
        Ok(self.jacobians_unchecked(x.as_slice(), u.as_slice(), dt))
    }

    pub fn jacobians_unchecked(&self, x: &[f64], u: &[f64], dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let (a, b, _) = self.jacobians_with_dt(x, u, dt);
        (a, b)
    }

    /// Jacobians of `step` with respect to state, control and the step
    /// length `dt`.
    pub fn jacobians_with_dt(
        &self,
        x: &[f64],
        u: &[f64],
        dt: f64,
    ) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let n = self.state_dim;
        let (mut a, mut b) = self.xdot_jacobians(x, u);
        let mut c = DVector::zeros(n);
        self.xdot(x, u, c.as_mut_slice());
        a *= dt;
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        b *= dt;
        for comp in &self.layout {
            if comp.kind != ComponentKind::UnitQuaternion {
                continue;
            }
            // derivative of y ↦ y/|y| on the quaternion rows
            let o = comp.offset;
            let y: Vec<f64> = (0..4).map(|k| x[o + k] + c[o + k] * dt).collect();
            let ny2 = y.iter().map(|v| v * v).sum::<f64>();
            let ny = ny2.sqrt();
            let mut proj = nalgebra::Matrix4::<f64>::identity();
            for r in 0..4 {
                for k in 0..4 {
                    proj[(r, k)] -= y[r] * y[k] / ny2;
                }
            }
            proj /= ny;
            let ra = proj * a.rows(o, 4);
            a.rows_mut(o, 4).copy_from(&ra);
            let rb = proj * b.rows(o, 4);
            b.rows_mut(o, 4).copy_from(&rb);
            let rc = proj * c.rows(o, 4);
            c.rows_mut(o, 4).copy_from(&rc);
        }
        (a, b, c)
    }

    /// a ⊖ b in the tangent space: wrapped angle differences and the rotation
    /// vector of b⁻¹a for quaternions.
    pub fn state_diff(&self, a: &State, b: &State) -> DVector<f64> {
        let mut d = DVector::zeros(self.tangent_dim);
        for c in &self.layout {
            match c.kind {
                ComponentKind::Euclidean => d[c.tangent_offset] = a[c.offset] - b[c.offset],
                ComponentKind::Angle => {
                    d[c.tangent_offset] = wrap_angle(a[c.offset] - b[c.offset])
                }
                ComponentKind::UnitQuaternion => {
                    let qa = quat_at(a.as_slice(), c.offset);
                    let qb = quat_at(b.as_slice(), c.offset);
                    let r = quat::log(&quat::mul(&quat::conj(&qb), &qa));
                    d.rows_mut(c.tangent_offset, 3).copy_from_slice(&r);
                }
            }
        }
        d
    }

    /// x ⊕ v, the inverse of `state_diff`.
    pub fn state_integrate(&self, x: &State, v: &DVector<f64>) -> State {
        let mut out = x.clone();
        for c in &self.layout {
            match c.kind {
                ComponentKind::Euclidean => out[c.offset] += v[c.tangent_offset],
                ComponentKind::Angle => {
                    out[c.offset] = wrap_angle(out[c.offset] + v[c.tangent_offset])
                }
                ComponentKind::UnitQuaternion => {
                    let q = quat_at(x.as_slice(), c.offset);
                    let r = [v[c.tangent_offset], v[c.tangent_offset + 1], v[c.tangent_offset + 2]];
                    let qn = quat::mul(&q, &quat::exp(&r));
                    out.rows_mut(c.offset, 4).copy_from_slice(&qn);
                }
            }
        }
        out
    }

    /// a − b in ambient coordinates with angle differences wrapped.
    /// Quaternion entries are subtracted plainly after aligning the sign of
    /// `b` with `a`.
    pub fn ambient_diff(&self, a: &[f64], b: &[f64]) -> DVector<f64> {
        let mut d = DVector::zeros(self.state_dim);
        for c in &self.layout {
            let o = c.offset;
            match c.kind {
                ComponentKind::Euclidean => d[o] = a[o] - b[o],
                ComponentKind::Angle => d[o] = wrap_angle(a[o] - b[o]),
                ComponentKind::UnitQuaternion => {
                    let s = if quat::dot(&quat_at(a, o), &quat_at(b, o)) < 0.0 {
                        -1.0
                    } else {
                        1.0
                    };
                    for k in 0..4 {
                        d[o + k] = a[o + k] - s * b[o + k];
                    }
                }
            }
        }
        d
    }

    pub fn clamp_report(&self, x: &State, u: &Control) -> BoundsReport {
        let mut violations = Vec::new();
        for (kind, v, lo, hi) in [
            (BoundKind::State, x, &self.x_lb, &self.x_ub),
            (BoundKind::Control, u, &self.u_lb, &self.u_ub),
        ] {
            for i in 0..v.len().min(lo.len()) {
                if !(v[i] >= lo[i] && v[i] <= hi[i]) {
                    violations.push(Violation {
                        kind,
                        index: i,
                        value: v[i],
                        lo: lo[i],
                        hi: hi[i],
                    });
                }
            }
        }
        BoundsReport {
            in_bounds: violations.is_empty(),
            violations,
        }
    }

    pub fn state_in_bounds(&self, x: &[f64], tol: f64) -> bool {
        (0..self.state_dim).all(|i| x[i] >= self.x_lb[i] - tol && x[i] <= self.x_ub[i] + tol)
    }

    pub fn control_in_bounds(&self, u: &[f64], tol: f64) -> bool {
        (0..self.control_dim).all(|i| u[i] >= self.u_lb[i] - tol && u[i] <= self.u_ub[i] + tol)
    }

    pub fn clamp_control(&self, u: &mut Control) {
        for i in 0..self.control_dim {
            u[i] = u[i].clamp(self.u_lb[i], self.u_ub[i]);
        }
    }

    /// Control that balances gravity (or zero for ground robots), used as a
    /// trivial initial guess.
    pub fn nominal_control(&self) -> Control {
        let g = self.params.get("g");
        match self.id {
            ModelId::PlanarRotor => Control::from_element(2, self.params.get("mass") * g / 2.0),
            ModelId::RotorPole => Control::from_element(
                2,
                (self.params.get("mass") + self.params.get("pole_mass")) * g / 2.0,
            ),
            ModelId::QuadrotorV0 => Control::from_element(4, self.params.get("mass") * g / 4.0),
            ModelId::QuadrotorV1 => {
                Control::from_vec(vec![self.params.get("mass") * g, 0.0, 0.0, 0.0])
            }
            ModelId::Unicycle1V1 | ModelId::Unicycle1V2 => {
                let mut u = Control::zeros(self.control_dim);
                self.clamp_control(&mut u);
                u
            }
            _ => Control::zeros(self.control_dim),
        }
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    a - 2.0 * PI * ((a - PI) / (2.0 * PI)).ceil()
}

pub(crate) fn quat_at(x: &[f64], o: usize) -> quat::Quat {
    [x[o], x[o + 1], x[o + 2], x[o + 3]]
}

fn abs_max(lo: f64, hi: f64) -> f64 {
    lo.abs().max(hi.abs())
}

fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            got,
            expected,
        })
    }
}
