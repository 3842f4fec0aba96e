//! Continuous-time dynamics f(x, u) and their analytic partial derivatives.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector2, Vector3};

use super::params::ModelParams;
use super::ModelId;

#[derive(Clone, Debug)]
pub(crate) enum Dyn {
    Unicycle1,
    Unicycle2,
    CarTrailer {
        wheelbase: f64,
        hitch: f64,
    },
    Acrobot(AcrobotConsts),
    PlanarRotor {
        mass: f64,
        inertia: f64,
        arm: f64,
        g: f64,
    },
    RotorPole {
        mass: f64,
        pole_mass: f64,
        pole_length: f64,
        inertia: f64,
        arm: f64,
        g: f64,
    },
    Quadrotor {
        mass: f64,
        j: [f64; 3],
        /// Maps controls to [thrust, τx, τy, τz].
        b0: [[f64; 4]; 4],
        g: f64,
    },
}

#[derive(Clone, Debug)]
pub(crate) struct AcrobotConsts {
    m1: f64,
    m2: f64,
    l1: f64,
    lc1: f64,
    lc2: f64,
    i1: f64,
    i2: f64,
    g: f64,
}

impl Dyn {
    pub(crate) fn new(id: ModelId, p: &ModelParams) -> Self {
        match id {
            ModelId::Unicycle1V0 | ModelId::Unicycle1V1 | ModelId::Unicycle1V2 => Dyn::Unicycle1,
            ModelId::Unicycle2 => Dyn::Unicycle2,
            ModelId::CarTrailer => Dyn::CarTrailer {
                wheelbase: p.get("wheelbase"),
                hitch: p.get("hitch_length"),
            },
            ModelId::Acrobot => Dyn::Acrobot(AcrobotConsts {
                m1: p.get("m1"),
                m2: p.get("m2"),
                l1: p.get("l1"),
                lc1: p.get("lc1"),
                lc2: p.get("lc2"),
                i1: p.get("i1"),
                i2: p.get("i2"),
                g: p.get("g"),
            }),
            ModelId::PlanarRotor => Dyn::PlanarRotor {
                mass: p.get("mass"),
                inertia: p.get("inertia"),
                arm: p.get("arm"),
                g: p.get("g"),
            },
            ModelId::RotorPole => Dyn::RotorPole {
                mass: p.get("mass"),
                pole_mass: p.get("pole_mass"),
                pole_length: p.get("pole_length"),
                inertia: p.get("inertia"),
                arm: p.get("arm"),
                g: p.get("g"),
            },
            ModelId::QuadrotorV0 => {
                let a = 0.707106781 * p.get("arm_length");
                let t = p.get("torque_to_thrust");
                Dyn::Quadrotor {
                    mass: p.get("mass"),
                    j: [p.get("jxx"), p.get("jyy"), p.get("jzz")],
                    b0: [
                        [1.0, 1.0, 1.0, 1.0],
                        [-a, -a, a, a],
                        [-a, a, a, -a],
                        [-t, t, -t, t],
                    ],
                    g: p.get("g"),
                }
            }
            ModelId::QuadrotorV1 => Dyn::Quadrotor {
                mass: p.get("mass"),
                j: [p.get("jxx"), p.get("jyy"), p.get("jzz")],
                b0: [
                    [1.0, 0.0, 0.0, 0.0],
                    [0.0, 1.0, 0.0, 0.0],
                    [0.0, 0.0, 1.0, 0.0],
                    [0.0, 0.0, 0.0, 1.0],
                ],
                g: p.get("g"),
            },
        }
    }

    pub(crate) fn eval(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        match self {
            Dyn::Unicycle1 => {
                let (s, c) = x[2].sin_cos();
                out[0] = u[0] * c;
                out[1] = u[0] * s;
                out[2] = u[1];
            }
            Dyn::Unicycle2 => {
                let (s, c) = x[2].sin_cos();
                out[0] = x[3] * c;
                out[1] = x[3] * s;
                out[2] = x[4];
                out[3] = u[0];
                out[4] = u[1];
            }
            Dyn::CarTrailer { wheelbase, hitch } => {
                let (s, c) = x[2].sin_cos();
                out[0] = u[0] * c;
                out[1] = u[0] * s;
                out[2] = u[0] / wheelbase * u[1].tan();
                out[3] = u[0] / hitch * (x[2] - x[3]).sin();
            }
            Dyn::Acrobot(k) => {
                let a = k.accel(x, u[0]);
                out[0] = x[2];
                out[1] = x[3];
                out[2] = a[0];
                out[3] = a[1];
            }
            Dyn::PlanarRotor {
                mass,
                inertia,
                arm,
                g,
            } => {
                let (s, c) = x[2].sin_cos();
                let thrust = u[0] + u[1];
                out[0] = x[3];
                out[1] = x[4];
                out[2] = x[5];
                out[3] = -thrust * s / mass;
                out[4] = thrust * c / mass - g;
                out[5] = arm * (u[0] - u[1]) / inertia;
            }
            Dyn::RotorPole {
                inertia, arm, ..
            } => {
                let (m, r) = self.rotor_pole_system(x, u);
                let acc = m.lu().solve(&r).expect("rotor-pole mass matrix is positive definite");
                out[0] = x[4];
                out[1] = x[5];
                out[2] = x[6];
                out[3] = x[7];
                out[4] = acc[0];
                out[5] = acc[1];
                out[6] = arm * (u[0] - u[1]) / inertia;
                out[7] = acc[2];
            }
            Dyn::Quadrotor { mass, j, b0, g } => {
                let w = [x[10], x[11], x[12]];
                let (qx, qy, qz, qs) = (x[6], x[7], x[8], x[9]);
                let f = wrench(b0, u);
                let col = [
                    2.0 * (qx * qz + qs * qy),
                    2.0 * (qy * qz - qs * qx),
                    qs * qs - qx * qx - qy * qy + qz * qz,
                ];
                out[0] = x[3];
                out[1] = x[4];
                out[2] = x[5];
                out[3] = col[0] * f[0] / mass;
                out[4] = col[1] * f[0] / mass;
                out[5] = col[2] * f[0] / mass - g;
                // q̇ = ½ q ⊗ (w, 0)
                out[6] = 0.5 * (qs * w[0] + qy * w[2] - qz * w[1]);
                out[7] = 0.5 * (qs * w[1] + qz * w[0] - qx * w[2]);
                out[8] = 0.5 * (qs * w[2] + qx * w[1] - qy * w[0]);
                out[9] = -0.5 * (qx * w[0] + qy * w[1] + qz * w[2]);
                let jw = [j[0] * w[0], j[1] * w[1], j[2] * w[2]];
                let gyro = cross(&w, &jw);
                for i in 0..3 {
                    out[10 + i] = (f[1 + i] - gyro[i]) / j[i];
                }
            }
        }
    }

    /// Writes ∂f/∂x into `fx` and ∂f/∂u into `fu`. Both must arrive zeroed.
    pub(crate) fn eval_jac(
        &self,
        x: &[f64],
        u: &[f64],
        fx: &mut DMatrix<f64>,
        fu: &mut DMatrix<f64>,
    ) {
        match self {
            Dyn::Unicycle1 => {
                let (s, c) = x[2].sin_cos();
                fx[(0, 2)] = -u[0] * s;
                fx[(1, 2)] = u[0] * c;
                fu[(0, 0)] = c;
                fu[(1, 0)] = s;
                fu[(2, 1)] = 1.0;
            }
            Dyn::Unicycle2 => {
                let (s, c) = x[2].sin_cos();
                fx[(0, 2)] = -x[3] * s;
                fx[(0, 3)] = c;
                fx[(1, 2)] = x[3] * c;
                fx[(1, 3)] = s;
                fx[(2, 4)] = 1.0;
                fu[(3, 0)] = 1.0;
                fu[(4, 1)] = 1.0;
            }
            Dyn::CarTrailer { wheelbase, hitch } => {
                let (s, c) = x[2].sin_cos();
                let (sd, cd) = (x[2] - x[3]).sin_cos();
                let t = u[1].tan();
                fx[(0, 2)] = -u[0] * s;
                fx[(1, 2)] = u[0] * c;
                fx[(3, 2)] = u[0] / hitch * cd;
                fx[(3, 3)] = -u[0] / hitch * cd;
                fu[(0, 0)] = c;
                fu[(1, 0)] = s;
                fu[(2, 0)] = t / wheelbase;
                fu[(2, 1)] = u[0] / wheelbase * (1.0 + t * t);
                fu[(3, 0)] = sd / hitch;
            }
            Dyn::Acrobot(k) => {
                fx[(0, 2)] = 1.0;
                fx[(1, 3)] = 1.0;
                k.accel_jac(x, u[0], fx, fu);
            }
            Dyn::PlanarRotor {
                mass, inertia, arm, ..
            } => {
                let (s, c) = x[2].sin_cos();
                let thrust = u[0] + u[1];
                fx[(0, 3)] = 1.0;
                fx[(1, 4)] = 1.0;
                fx[(2, 5)] = 1.0;
                fx[(3, 2)] = -thrust * c / mass;
                fx[(4, 2)] = -thrust * s / mass;
                for i in 0..2 {
                    fu[(3, i)] = -s / mass;
                    fu[(4, i)] = c / mass;
                }
                fu[(5, 0)] = arm / inertia;
                fu[(5, 1)] = -arm / inertia;
            }
            Dyn::RotorPole {
                pole_mass,
                pole_length,
                inertia,
                arm,
                g,
                ..
            } => {
                let (m, r) = self.rotor_pole_system(x, u);
                let lu = m.lu();
                let acc = lu.solve(&r).expect("rotor-pole mass matrix is positive definite");
                let (st, ct) = x[2].sin_cos();
                let (sq, cq) = x[3].sin_cos();
                let qd = x[7];
                let thrust = u[0] + u[1];
                let mr = pole_mass * pole_length;
                let dr_dth = Vector3::new(-thrust * ct, -thrust * st, 0.0);
                let dm_dq = Matrix3::new(
                    0.0,
                    0.0,
                    -mr * sq,
                    0.0,
                    0.0,
                    mr * cq,
                    -mr * sq,
                    mr * cq,
                    0.0,
                );
                let dr_dq = Vector3::new(mr * cq * qd * qd, mr * sq * qd * qd, -pole_mass * g * pole_length * cq)
                    - dm_dq * acc;
                let dr_dqd = Vector3::new(2.0 * mr * sq * qd, -2.0 * mr * cq * qd, 0.0);
                let dr_du = Vector3::new(-st, ct, 0.0);
                let rows = [4usize, 5, 7];
                for (col, rhs) in [(2usize, dr_dth), (3, dr_dq), (7, dr_dqd)] {
                    let d = lu.solve(&rhs).unwrap();
                    for (k, &row) in rows.iter().enumerate() {
                        fx[(row, col)] = d[k];
                    }
                }
                let d = lu.solve(&dr_du).unwrap();
                for (k, &row) in rows.iter().enumerate() {
                    fu[(row, 0)] = d[k];
                    fu[(row, 1)] = d[k];
                }
                fx[(0, 4)] = 1.0;
                fx[(1, 5)] = 1.0;
                fx[(2, 6)] = 1.0;
                fx[(3, 7)] = 1.0;
                fu[(6, 0)] = arm / inertia;
                fu[(6, 1)] = -arm / inertia;
            }
            Dyn::Quadrotor { mass, j, b0, .. } => {
                let w = [x[10], x[11], x[12]];
                let (qx, qy, qz, qs) = (x[6], x[7], x[8], x[9]);
                let f = wrench(b0, u);
                let col = [
                    2.0 * (qx * qz + qs * qy),
                    2.0 * (qy * qz - qs * qx),
                    qs * qs - qx * qx - qy * qy + qz * qz,
                ];
                // ∂col/∂(qx, qy, qz, qs)
                let dcol = [
                    [2.0 * qz, 2.0 * qs, 2.0 * qx, 2.0 * qy],
                    [-2.0 * qs, 2.0 * qz, 2.0 * qy, -2.0 * qx],
                    [-2.0 * qx, -2.0 * qy, 2.0 * qz, 2.0 * qs],
                ];
                for i in 0..3 {
                    fx[(i, 3 + i)] = 1.0;
                    for k in 0..4 {
                        fx[(3 + i, 6 + k)] = dcol[i][k] * f[0] / mass;
                        fu[(3 + i, k)] = col[i] * b0[0][k] / mass;
                    }
                }
                // quaternion rates w.r.t. q
                let dq = [
                    [0.0, 0.5 * w[2], -0.5 * w[1], 0.5 * w[0]],
                    [-0.5 * w[2], 0.0, 0.5 * w[0], 0.5 * w[1]],
                    [0.5 * w[1], -0.5 * w[0], 0.0, 0.5 * w[2]],
                    [-0.5 * w[0], -0.5 * w[1], -0.5 * w[2], 0.0],
                ];
                // quaternion rates w.r.t. w
                let dw = [
                    [0.5 * qs, -0.5 * qz, 0.5 * qy],
                    [0.5 * qz, 0.5 * qs, -0.5 * qx],
                    [-0.5 * qy, 0.5 * qx, 0.5 * qs],
                    [-0.5 * qx, -0.5 * qy, -0.5 * qz],
                ];
                for r in 0..4 {
                    for k in 0..4 {
                        fx[(6 + r, 6 + k)] = dq[r][k];
                    }
                    for k in 0..3 {
                        fx[(6 + r, 10 + k)] = dw[r][k];
                    }
                }
                // ∂ẇ/∂w = −J⁻¹([w]× J − [J w]×)
                let jm = Matrix3::from_diagonal(&Vector3::new(j[0], j[1], j[2]));
                let wv = Vector3::new(w[0], w[1], w[2]);
                let dw_dw = -(wv.cross_matrix() * jm - (jm * wv).cross_matrix());
                for r in 0..3 {
                    for k in 0..3 {
                        fx[(10 + r, 10 + k)] = dw_dw[(r, k)] / j[r];
                    }
                    for k in 0..4 {
                        fu[(10 + r, k)] = b0[1 + r][k] / j[r];
                    }
                }
            }
        }
    }

    /// Mass matrix and right-hand side over (x, z, q) for the rotor with
    /// a pendulum hanging from its centre.
    fn rotor_pole_system(&self, x: &[f64], u: &[f64]) -> (Matrix3<f64>, Vector3<f64>) {
        let Dyn::RotorPole {
            mass,
            pole_mass,
            pole_length,
            g,
            ..
        } = *self
        else {
            unreachable!()
        };
        let mt = mass + pole_mass;
        let mr = pole_mass * pole_length;
        let (st, ct) = x[2].sin_cos();
        let (sq, cq) = x[3].sin_cos();
        let qd = x[7];
        let thrust = u[0] + u[1];
        let m = Matrix3::new(
            mt,
            0.0,
            mr * cq,
            0.0,
            mt,
            mr * sq,
            mr * cq,
            mr * sq,
            mr * pole_length,
        );
        let r = Vector3::new(
            -thrust * st + mr * sq * qd * qd,
            thrust * ct - mt * g - mr * cq * qd * qd,
            -pole_mass * g * pole_length * sq,
        );
        (m, r)
    }
}

impl AcrobotConsts {
    fn mass_matrix(&self, q2: f64) -> Matrix2<f64> {
        let h = self.m2 * self.l1 * self.lc2;
        let c2 = q2.cos();
        let m12 = self.i2 + h * c2;
        Matrix2::new(
            self.i1 + self.i2 + self.m2 * self.l1 * self.l1 + 2.0 * h * c2,
            m12,
            m12,
            self.i2,
        )
    }

    fn rhs(&self, x: &[f64], tau: f64) -> Vector2<f64> {
        let k = self;
        let h = k.m2 * k.l1 * k.lc2;
        let (q1, q2, d1, d2) = (x[0], x[1], x[2], x[3]);
        let s1 = q1.sin();
        let s2 = q2.sin();
        let s12 = (q1 + q2).sin();
        Vector2::new(
            -k.m1 * k.g * k.lc1 * s1 - k.m2 * k.g * (k.l1 * s1 + k.lc2 * s12)
                + 2.0 * h * s2 * d1 * d2
                + h * s2 * d2 * d2,
            -k.m2 * k.g * k.lc2 * s12 - h * s2 * d1 * d1 + tau,
        )
    }

    fn accel(&self, x: &[f64], tau: f64) -> Vector2<f64> {
        self.mass_matrix(x[1])
            .try_inverse()
            .expect("acrobot mass matrix is positive definite")
            * self.rhs(x, tau)
    }

    fn accel_jac(&self, x: &[f64], _tau: f64, fx: &mut DMatrix<f64>, fu: &mut DMatrix<f64>) {
        let k = self;
        let h = k.m2 * k.l1 * k.lc2;
        let (q1, q2, d1, d2) = (x[0], x[1], x[2], x[3]);
        let minv = self.mass_matrix(q2).try_inverse().unwrap();
        let a = minv * self.rhs(x, _tau);
        let (s2, c2) = q2.sin_cos();
        let c1 = q1.cos();
        let c12 = (q1 + q2).cos();
        let dr_dq1 = Vector2::new(
            -k.m1 * k.g * k.lc1 * c1 - k.m2 * k.g * (k.l1 * c1 + k.lc2 * c12),
            -k.m2 * k.g * k.lc2 * c12,
        );
        let dm_a = Vector2::new(-2.0 * h * s2 * a[0] - h * s2 * a[1], -h * s2 * a[0]);
        let dr_dq2 = Vector2::new(
            -k.m2 * k.g * k.lc2 * c12 + 2.0 * h * c2 * d1 * d2 + h * c2 * d2 * d2,
            -k.m2 * k.g * k.lc2 * c12 - h * c2 * d1 * d1,
        ) - dm_a;
        let dr_dd1 = Vector2::new(2.0 * h * s2 * d2, -2.0 * h * s2 * d1);
        let dr_dd2 = Vector2::new(2.0 * h * s2 * (d1 + d2), 0.0);
        for (col, v) in [dr_dq1, dr_dq2, dr_dd1, dr_dd2].iter().enumerate() {
            let d = minv * v;
            fx[(2, col)] = d[0];
            fx[(3, col)] = d[1];
        }
        let d = minv * Vector2::new(0.0, 1.0);
        fu[(2, 0)] = d[0];
        fu[(3, 0)] = d[1];
    }
}

fn wrench(b0: &[[f64; 4]; 4], u: &[f64]) -> [f64; 4] {
    let mut f = [0.0; 4];
    for (i, row) in b0.iter().enumerate() {
        f[i] = row[0] * u[0] + row[1] * u[1] + row[2] * u[2] + row[3] * u[3];
    }
    f
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
