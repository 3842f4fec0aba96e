//! The penalized optimal control problem handed to the DDP solver.
//!
//! The augmented state is the model state optionally followed by a path
//! progress coordinate; the augmented control is the model control optionally
//! followed by a step-length scale and a progress rate.

use nalgebra::{DMatrix, DVector};

use super::ddp::{Ocp, StageDerivs};
use super::{OptConfig, Weights};
use crate::dynamics::{quat, quat_at, wrap_angle, ComponentKind, ModelSpec, State};
use crate::workspace::Problem;

/// Reference path parameterized by normalized arc length in [0, 1].
#[derive(Clone, Debug)]
pub struct ArcPath {
    s: Vec<f64>,
    pts: Vec<DVector<f64>>,
    tangents: Vec<DVector<f64>>,
}

impl ArcPath {
    /// Cubic Hermite interpolation through the waypoints with finite
    /// difference tangents. Angles are unwrapped and quaternion signs made
    /// continuous first.
    pub fn new(model: &ModelSpec, metric: &crate::metricspace::Metric, xs: &[State]) -> Self {
        let mut pts: Vec<DVector<f64>> = Vec::with_capacity(xs.len());
        let mut s = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        for x in xs {
            let mut p = x.clone();
            if let Some(prev) = pts.last() {
                let d = metric.distance(prev.as_slice(), x.as_slice());
                if d < 1e-9 {
                    continue;
                }
                for c in &model.layout {
                    let o = c.offset;
                    match c.kind {
                        ComponentKind::Euclidean => {}
                        ComponentKind::Angle => p[o] = prev[o] + wrap_angle(x[o] - prev[o]),
                        ComponentKind::UnitQuaternion => {
                            if quat::dot(&quat_at(prev.as_slice(), o), &quat_at(x.as_slice(), o)) < 0.0 {
                                for k in 0..4 {
                                    p[o + k] = -p[o + k];
                                }
                            }
                        }
                    }
                }
                acc += d;
            }
            s.push(acc);
            pts.push(p);
        }
        if acc > 0.0 {
            for v in &mut s {
                *v /= acc;
            }
        }
        let n = pts.len();
        let mut tangents = Vec::with_capacity(n);
        for i in 0..n {
            let t = if n < 2 {
                DVector::zeros(pts[0].len())
            } else {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                (&pts[b] - &pts[a]) / (s[b] - s[a])
            };
            tangents.push(t);
        }
        ArcPath { s, pts, tangents }
    }

    /// Point and derivative at progress `a`, clamped to [0, 1].
    pub fn eval(&self, a: f64) -> (DVector<f64>, DVector<f64>) {
        let n = self.pts.len();
        if n == 1 {
            return (self.pts[0].clone(), DVector::zeros(self.pts[0].len()));
        }
        let a = a.clamp(0.0, 1.0);
        let i = match self.s.partition_point(|v| *v <= a) {
            0 => 0,
            j => (j - 1).min(n - 2),
        };
        let h = self.s[i + 1] - self.s[i];
        let t = (a - self.s[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        let (p0, p1, m0, m1) = (&self.pts[i], &self.pts[i + 1], &self.tangents[i], &self.tangents[i + 1]);
        let p = p0 * h00 + m0 * (h10 * h) + p1 * h01 + m1 * (h11 * h);
        let dp = p0 * d00 + m0 * d10 + p1 * d01 + m1 * d11;
        (p, dp)
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.pts[0]
    }

    pub fn end(&self) -> &DVector<f64> {
        &self.pts[self.pts.len() - 1]
    }
}

#[derive(Clone, Debug)]
pub enum Terminal<'a> {
    /// Weighted squared residual to a target state.
    Goal { target: State, weight: f64 },
    /// Reward progress and penalize distance to the path point at that
    /// progress.
    Contour { path: &'a ArcPath, k1: f64, k2: f64 },
}

/// Penalized optimal control problem over a fixed horizon.
#[derive(Clone, Debug)]
pub struct OcpSpec<'a> {
    pub problem: &'a Problem,
    pub horizon: usize,
    pub dt: f64,
    pub free_dt: bool,
    pub progress: bool,
    pub terminal: Terminal<'a>,
    pub weights: Weights,
    pub cfg: &'a OptConfig,
    /// Apply obstacle and workspace clearance penalties.
    pub collisions: bool,
    x0: DVector<f64>,
    u_nom: DVector<f64>,
    u_ref: Option<Vec<DVector<f64>>>,
    u_range: Vec<f64>,
    goal_w: DVector<f64>,
}

impl<'a> OcpSpec<'a> {
    pub fn new(
        problem: &'a Problem,
        cfg: &'a OptConfig,
        x0: &State,
        horizon: usize,
        dt: f64,
        terminal: Terminal<'a>,
        weights: Weights,
    ) -> Self {
        let m = &problem.model;
        let u_range = (0..m.control_dim)
            .map(|i| {
                let r = m.u_ub[i] - m.u_lb[i];
                if r.is_finite() && r > 0.0 {
                    r
                } else {
                    1.0
                }
            })
            .collect();
        let mut goal_w = DVector::zeros(m.state_dim);
        for c in &m.layout {
            let w = m.distance_weights[c.group.index()];
            for k in 0..c.kind.ambient_len() {
                goal_w[c.offset + k] = w;
            }
        }
        OcpSpec {
            problem,
            horizon,
            dt,
            free_dt: false,
            progress: false,
            terminal,
            weights,
            cfg,
            collisions: true,
            x0: x0.clone(),
            u_nom: m.nominal_control(),
            u_ref: None,
            u_range,
            goal_w,
        }
    }

    /// Regularizes controls towards `us` instead of the nominal control.
    pub fn with_control_reference(mut self, us: &[DVector<f64>]) -> Self {
        assert_eq!(us.len(), self.horizon, "reference length");
        self.u_ref = Some(us.iter().map(|u| u.rows(0, self.num()).into_owned()).collect());
        self
    }

    /// Adds the per-step duration scale as an extra control.
    pub fn with_free_dt(mut self) -> Self {
        self.free_dt = true;
        self
    }

    /// Adds the path progress state and its rate control; `alpha0` is the
    /// initial progress.
    pub fn with_progress(mut self, alpha0: f64) -> Self {
        self.progress = true;
        let n = self.x0.len();
        self.x0 = self.x0.clone().insert_row(n, alpha0);
        self
    }

    fn model(&self) -> &ModelSpec {
        &self.problem.model
    }

    fn nxm(&self) -> usize {
        self.model().state_dim
    }

    fn num(&self) -> usize {
        self.model().control_dim
    }

    fn s_idx(&self) -> usize {
        self.num()
    }

    fn v_idx(&self) -> usize {
        self.num() + usize::from(self.free_dt)
    }

    fn step_len(&self, u: &DVector<f64>) -> f64 {
        if self.free_dt {
            u[self.s_idx()] * self.dt
        } else {
            self.dt
        }
    }

    /// Splits an augmented state into the model state.
    pub fn model_state(&self, x: &DVector<f64>) -> State {
        x.rows(0, self.nxm()).into_owned()
    }

    pub fn model_control(&self, u: &DVector<f64>) -> DVector<f64> {
        u.rows(0, self.num()).into_owned()
    }

    /// Augments a model control with a unit duration scale and zero progress
    /// rate.
    pub fn augment_control(&self, u: &DVector<f64>, scale: f64, rate: f64) -> DVector<f64> {
        let mut a = DVector::zeros(self.nu());
        a.rows_mut(0, self.num()).copy_from(&u.rows(0, self.num()));
        if self.free_dt {
            a[self.s_idx()] = scale;
        }
        if self.progress {
            a[self.v_idx()] = rate;
        }
        a
    }

    pub fn augment_state(&self, x: &DVector<f64>, alpha: f64) -> DVector<f64> {
        let mut a = DVector::zeros(self.nx());
        a.rows_mut(0, self.nxm()).copy_from(&x.rows(0, self.nxm()));
        if self.progress {
            a[self.nxm()] = alpha;
        }
        a
    }

    /// Adds ½w·r² with r the amount by which `v` leaves [lo, hi], measured in
    /// units of `scale`. Returns the cost and its first and second
    /// derivatives in `v`.
    fn box_penalty(v: f64, lo: f64, hi: f64, scale: f64, w: f64) -> (f64, f64, f64) {
        let r = if v > hi {
            (v - hi) / scale
        } else if v < lo {
            (v - lo) / scale
        } else {
            return (0.0, 0.0, 0.0);
        };
        (0.5 * w * r * r, w * r / scale, w / (scale * scale))
    }

    fn state_terms(&self, x: &DVector<f64>, mut d: Option<(&mut DVector<f64>, &mut DMatrix<f64>)>) -> f64 {
        let m = self.model();
        let w = &self.weights;
        let mut c = 0.0;
        for i in 0..m.state_dim {
            let sm = self.cfg.state_margin;
            let (v, g, h) = Self::box_penalty(x[i], m.x_lb[i] + sm, m.x_ub[i] - sm, 1.0, w.state_bounds);
            if v > 0.0 {
                c += v;
                if let Some((lx, lxx)) = d.as_mut() {
                    lx[i] += g;
                    lxx[(i, i)] += h;
                }
            }
        }
        if self.progress {
            let i = self.nxm();
            let (v, g, h) = Self::box_penalty(x[i], 0.0, 1.0, 1.0, w.progress_bounds);
            c += v;
            if let Some((lx, lxx)) = d.as_mut() {
                lx[i] += g;
                lxx[(i, i)] += h;
            }
        }
        if self.collisions && w.obstacles > 0.0 {
            let xs = &x.as_slice()[..self.nxm()];
            let margin = self.cfg.clearance_margin;
            match d {
                Some((lx, lxx)) => {
                    let (sd, grad) = self.problem.signed_distance(xs);
                    let r = margin - sd;
                    if r > 0.0 {
                        c += 0.5 * w.obstacles * r * r;
                        let n = self.nxm();
                        let mut top = lx.rows_mut(0, n);
                        top.axpy(-w.obstacles * r, &grad, 1.0);
                        let mut blk = lxx.view_mut((0, 0), (n, n));
                        blk.ger(w.obstacles, &grad, &grad, 1.0);
                    }
                }
                None => {
                    let r = margin - self.problem.clearance(xs);
                    if r > 0.0 {
                        c += 0.5 * w.obstacles * r * r;
                    }
                }
            }
        }
        c
    }

    fn stage(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>, mut d: Option<&mut StageDerivs>) -> f64 {
        let m = self.model();
        let w = &self.weights;
        let cfg = self.cfg;
        let u_ref = self.u_ref.as_ref().map_or(&self.u_nom, |r| &r[k]);
        let mut c = 0.0;
        for i in 0..m.control_dim {
            let range = self.u_range[i];
            let e = (u[i] - u_ref[i]) / range;
            c += 0.5 * cfg.control_reg * e * e;
            let margin = cfg.control_margin * range;
            let (v, g, h) = Self::box_penalty(u[i], m.u_lb[i] + margin, m.u_ub[i] - margin, range, w.control_bounds);
            c += v;
            if let Some(d) = d.as_deref_mut() {
                d.lu[i] += cfg.control_reg * e / range + g;
                d.luu[(i, i)] += cfg.control_reg / (range * range) + h;
            }
        }
        if self.free_dt {
            let i = self.s_idx();
            let s = u[i];
            let (lo, hi) = cfg.dt_factor;
            let (v, g, h) = Self::box_penalty(s, lo + cfg.control_margin, hi - cfg.control_margin, 1.0, w.dt_bounds);
            let e = s - 1.0;
            c += v + cfg.time_weight * s * self.dt + 0.5 * cfg.dt_reg * e * e;
            if let Some(d) = d.as_deref_mut() {
                d.lu[i] += g + cfg.time_weight * self.dt + cfg.dt_reg * e;
                d.luu[(i, i)] += h + cfg.dt_reg;
            }
        }
        if self.progress {
            let i = self.v_idx();
            let v = u[i];
            let (p, g, h) = Self::box_penalty(v, 0.0, f64::INFINITY, 1.0, w.progress_bounds);
            c += p + 0.5 * cfg.progress_reg * v * v;
            if let Some(d) = d.as_deref_mut() {
                d.lu[i] += g + cfg.progress_reg * v;
                d.luu[(i, i)] += h + cfg.progress_reg;
            }
        }
        c + match d {
            Some(d) => self.state_terms(x, Some((&mut d.lx, &mut d.lxx))),
            None => self.state_terms(x, None),
        }
    }

    fn terminal(&self, x: &DVector<f64>, d: Option<(&mut DVector<f64>, &mut DMatrix<f64>)>) -> f64 {
        let m = self.model();
        let n = self.nxm();
        let xm = &x.as_slice()[..n];
        let mut c;
        let mut d = d;
        match &self.terminal {
            Terminal::Goal { target, weight } => {
                let raw = m.ambient_diff(xm, target.as_slice());
                let w2 = self.goal_w.component_mul(&self.goal_w);
                c = 0.5 * weight * raw.dot(&raw.component_mul(&w2));
                if let Some((lx, lxx)) = d.as_mut() {
                    for i in 0..n {
                        lx[i] += weight * w2[i] * raw[i];
                        lxx[(i, i)] += weight * w2[i];
                    }
                }
            }
            Terminal::Contour { path, k1, k2 } => {
                let a = x[n];
                let (p, dp) = path.eval(a);
                let raw = m.ambient_diff(xm, p.as_slice());
                let w2 = self.goal_w.component_mul(&self.goal_w);
                let we = raw.component_mul(&w2);
                c = -k1 * a + 0.5 * k2 * raw.dot(&we);
                if let Some((lx, lxx)) = d.as_mut() {
                    // the sign used by ambient_diff on quaternion entries
                    let mut jp = dp.clone();
                    for comp in &m.layout {
                        if comp.kind == ComponentKind::UnitQuaternion {
                            let o = comp.offset;
                            if quat::dot(&quat_at(xm, o), &quat_at(p.as_slice(), o)) < 0.0 {
                                for k in 0..4 {
                                    jp[o + k] = -jp[o + k];
                                }
                            }
                        }
                    }
                    for i in 0..n {
                        lx[i] += k2 * we[i];
                        lxx[(i, i)] += k2 * w2[i];
                        lxx[(i, n)] -= k2 * w2[i] * jp[i];
                        lxx[(n, i)] -= k2 * w2[i] * jp[i];
                    }
                    lx[n] += -k1 - k2 * we.dot(&jp);
                    lxx[(n, n)] += k2 * jp.dot(&jp.component_mul(&w2));
                }
            }
        }
        c += self.state_terms(x, d);
        c
    }
}

impl Ocp for OcpSpec<'_> {
    fn nx(&self) -> usize {
        self.nxm() + usize::from(self.progress)
    }

    fn nu(&self) -> usize {
        self.num() + usize::from(self.free_dt) + usize::from(self.progress)
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let n = self.nxm();
        let mut out = DVector::zeros(self.nx());
        self.model().step_into(
            &x.as_slice()[..n],
            &u.as_slice()[..self.num()],
            self.step_len(u),
            &mut out.as_mut_slice()[..n],
        );
        if self.progress {
            out[n] = x[n] + u[self.v_idx()];
        }
        out
    }

    fn step_derivs(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let (n, nu) = (self.nxm(), self.num());
        let (am, bm, ft) =
            self.model()
                .jacobians_with_dt(&x.as_slice()[..n], &u.as_slice()[..nu], self.step_len(u));
        if !self.free_dt && !self.progress {
            return (am, bm);
        }
        let mut a = DMatrix::zeros(self.nx(), self.nx());
        let mut b = DMatrix::zeros(self.nx(), self.nu());
        a.view_mut((0, 0), (n, n)).copy_from(&am);
        b.view_mut((0, 0), (n, nu)).copy_from(&bm);
        if self.free_dt {
            b.view_mut((0, self.s_idx()), (n, 1)).copy_from(&(ft * self.dt));
        }
        if self.progress {
            a[(n, n)] = 1.0;
            b[(n, self.v_idx())] = 1.0;
        }
        (a, b)
    }

    fn diff(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let mut d = a - b;
        for c in &self.model().layout {
            if c.kind == ComponentKind::Angle {
                d[c.offset] = wrap_angle(d[c.offset]);
            }
        }
        d
    }

    fn integrate(&self, x: &DVector<f64>, dx: &DVector<f64>) -> DVector<f64> {
        let mut y = x + dx;
        self.model().normalize(&mut y.as_mut_slice()[..self.nxm()]);
        y
    }

    fn running_cost(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.stage(k, x, u, None)
    }

    fn running_derivs(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>, d: &mut StageDerivs) {
        self.stage(k, x, u, Some(d));
    }

    fn terminal_cost(&self, x: &DVector<f64>) -> f64 {
        self.terminal(x, None)
    }

    fn terminal_derivs(&self, x: &DVector<f64>, lx: &mut DVector<f64>, lxx: &mut DMatrix<f64>) {
        self.terminal(x, Some((lx, lxx)));
    }
}
