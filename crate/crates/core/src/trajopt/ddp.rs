//! Feasibility-driven DDP over a generic discrete-time optimal control
//! problem with Gauss-Newton cost Hessians.
//!
//! Gaps between the rollout and the state trajectory are allowed, so the
//! solver can be warm-started from a discontinuous guess. A forward pass with
//! step fraction `a` shrinks every gap by the factor `1 - a`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

pub trait Ocp {
    fn nx(&self) -> usize;
    fn nu(&self) -> usize;
    fn horizon(&self) -> usize;
    fn x0(&self) -> &DVector<f64>;
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
    fn step_derivs(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>);
    /// `a ⊖ b`.
    fn diff(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64>;
    /// `x ⊕ dx`.
    fn integrate(&self, x: &DVector<f64>, dx: &DVector<f64>) -> DVector<f64>;
    fn running_cost(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64;
    fn running_derivs(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>, d: &mut StageDerivs);
    fn terminal_cost(&self, x: &DVector<f64>) -> f64;
    fn terminal_derivs(&self, x: &DVector<f64>, lx: &mut DVector<f64>, lxx: &mut DMatrix<f64>);
}

#[derive(Clone, Debug)]
pub struct StageDerivs {
    pub lx: DVector<f64>,
    pub lu: DVector<f64>,
    pub lxx: DMatrix<f64>,
    pub luu: DMatrix<f64>,
    pub lux: DMatrix<f64>,
}

impl StageDerivs {
    pub fn zeros(nx: usize, nu: usize) -> Self {
        StageDerivs {
            lx: DVector::zeros(nx),
            lu: DVector::zeros(nu),
            lxx: DMatrix::zeros(nx, nx),
            luu: DMatrix::zeros(nu, nu),
            lux: DMatrix::zeros(nu, nx),
        }
    }

    pub fn clear(&mut self) {
        self.lx.fill(0.0);
        self.lu.fill(0.0);
        self.lxx.fill(0.0);
        self.luu.fill(0.0);
        self.lux.fill(0.0);
    }
}

#[derive(Clone, Debug)]
pub struct DdpOptions {
    pub max_iters: usize,
    pub mu_init: f64,
    pub mu_max: f64,
    /// Stop when the predicted first-order decrease falls below this.
    pub tol_grad: f64,
    /// Gap (∞-norm) under which the trajectory counts as dynamically feasible.
    pub tol_gap: f64,
    pub deadline: Option<Instant>,
}

impl Default for DdpOptions {
    fn default() -> Self {
        DdpOptions {
            max_iters: 150,
            mu_init: 1e-8,
            mu_max: 1e10,
            tol_grad: 1e-13,
            tol_gap: 1e-9,
            deadline: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DdpResult {
    pub xs: Vec<DVector<f64>>,
    pub us: Vec<DVector<f64>>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gap_max: f64,
    /// `(gap weight, merit)` after every accepted step, starting with the
    /// initial point. Merit never increases while the weight is unchanged.
    pub merit_trace: Vec<(f64, f64)>,
}

struct Gains {
    k: Vec<DVector<f64>>,
    kk: Vec<DMatrix<f64>>,
    /// Predicted first-order decrease Σ -Quᵀk.
    d1: f64,
    /// Largest costate ∞-norm.
    lambda_max: f64,
}

fn total_cost<O: Ocp>(ocp: &O, xs: &[DVector<f64>], us: &[DVector<f64>]) -> f64 {
    let mut c = 0.0;
    for (k, u) in us.iter().enumerate() {
        c += ocp.running_cost(k, &xs[k], u);
    }
    c + ocp.terminal_cost(&xs[us.len()])
}

fn gaps<O: Ocp>(ocp: &O, xs: &[DVector<f64>], us: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut fs = Vec::with_capacity(xs.len());
    fs.push(ocp.diff(ocp.x0(), &xs[0]));
    for k in 0..us.len() {
        fs.push(ocp.diff(&ocp.step(&xs[k], &us[k]), &xs[k + 1]));
    }
    fs
}

fn gap_l1(fs: &[DVector<f64>]) -> f64 {
    fs.iter().map(|f| f.lp_norm(1)).sum()
}

fn gap_inf(fs: &[DVector<f64>]) -> f64 {
    fs.iter().map(|f| f.amax()).fold(0.0, f64::max)
}

fn backward<O: Ocp>(
    ocp: &O,
    xs: &[DVector<f64>],
    us: &[DVector<f64>],
    fs: &[DVector<f64>],
    mu: f64,
) -> Option<Gains> {
    let n = ocp.horizon();
    let (nx, nu) = (ocp.nx(), ocp.nu());
    let mut vx = DVector::zeros(nx);
    let mut vxx = DMatrix::zeros(nx, nx);
    ocp.terminal_derivs(&xs[n], &mut vx, &mut vxx);
    let mut lambda_max = vx.amax();
    let mut ks = vec![DVector::zeros(nu); n];
    let mut kks = vec![DMatrix::zeros(nu, nx); n];
    let mut d1 = 0.0;
    let mut sd = StageDerivs::zeros(nx, nu);
    for k in (0..n).rev() {
        let vx_plus = &vx + &vxx * &fs[k + 1];
        let (a, b) = ocp.step_derivs(&xs[k], &us[k]);
        sd.clear();
        ocp.running_derivs(k, &xs[k], &us[k], &mut sd);
        let vxx_a = &vxx * &a;
        let vxx_b = &vxx * &b;
        let qx = &sd.lx + a.tr_mul(&vx_plus);
        let qu = &sd.lu + b.tr_mul(&vx_plus);
        let qxx = &sd.lxx + a.tr_mul(&vxx_a);
        let mut quu = &sd.luu + b.tr_mul(&vxx_b);
        let qux = &sd.lux + b.tr_mul(&vxx_a);
        for i in 0..nu {
            quu[(i, i)] += mu;
        }
        let chol = quu.clone().cholesky()?;
        let kff = -chol.solve(&qu);
        let kfb = -chol.solve(&qux);
        if !kff.iter().all(|v| v.is_finite()) || !kfb.iter().all(|v| v.is_finite()) {
            return None;
        }
        d1 -= qu.dot(&kff);
        vx = &qx + kfb.tr_mul(&qu);
        vxx = &qxx + qux.tr_mul(&kfb);
        vxx = 0.5 * (&vxx + vxx.transpose());
        lambda_max = lambda_max.max(vx.amax());
        ks[k] = kff;
        kks[k] = kfb;
    }
    Some(Gains {
        k: ks,
        kk: kks,
        d1,
        lambda_max,
    })
}

fn forward<O: Ocp>(
    ocp: &O,
    xs: &[DVector<f64>],
    us: &[DVector<f64>],
    fs: &[DVector<f64>],
    g: &Gains,
    alpha: f64,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let n = ocp.horizon();
    let mut xs_new = Vec::with_capacity(n + 1);
    let mut us_new = Vec::with_capacity(n);
    let mut fs_new = Vec::with_capacity(n + 1);
    let mut xnext = ocp.x0().clone();
    for k in 0..=n {
        let xk = if alpha >= 1.0 {
            xnext.clone()
        } else {
            ocp.integrate(&xnext, &(&fs[k] * (alpha - 1.0)))
        };
        fs_new.push(ocp.diff(&xnext, &xk));
        if k == n {
            xs_new.push(xk);
            break;
        }
        let dx = ocp.diff(&xk, &xs[k]);
        let u = &us[k] + &g.k[k] * alpha + &g.kk[k] * dx;
        xnext = ocp.step(&xk, &u);
        xs_new.push(xk);
        us_new.push(u);
    }
    (xs_new, us_new, fs_new)
}

pub fn solve<O: Ocp>(
    ocp: &O,
    xs_init: Vec<DVector<f64>>,
    us_init: Vec<DVector<f64>>,
    opts: &DdpOptions,
) -> DdpResult {
    let n = ocp.horizon();
    assert_eq!(xs_init.len(), n + 1, "state guess length");
    assert_eq!(us_init.len(), n, "control guess length");
    let mut xs = xs_init;
    let mut us = us_init;
    let mut fs = gaps(ocp, &xs, &us);
    let mut cost = total_cost(ocp, &xs, &us);
    let mut rho: f64 = 1.0;
    let mut merit = cost + rho * gap_l1(&fs);
    let mut trace = vec![(rho, merit)];
    let mut mu = opts.mu_init;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        if opts.deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        iterations += 1;
        let Some(gains) = backward(ocp, &xs, &us, &fs, mu) else {
            mu *= 10.0;
            if mu > opts.mu_max {
                break;
            }
            continue;
        };
        let feasible = gap_inf(&fs) <= opts.tol_gap;
        // a heavily damped pass predicts little decrease anywhere
        if feasible && mu < 1e-5 && gains.d1.abs() <= opts.tol_grad * (1.0 + cost.abs()) {
            converged = true;
            break;
        }
        // exact ℓ1 merit: the gap weight must dominate the costates
        if 2.0 * gains.lambda_max > rho {
            rho = 2.0 * gains.lambda_max;
            merit = cost + rho * gap_l1(&fs);
            trace.push((rho, merit));
        }
        let mut accepted = false;
        let mut alpha = 1.0;
        for _ in 0..=10 {
            let (xt, ut, ft) = forward(ocp, &xs, &us, &fs, &gains, alpha);
            let ct = total_cost(ocp, &xt, &ut);
            if ct.is_finite() {
                let mt = ct + rho * gap_l1(&ft);
                if mt < merit || (mt <= merit && gap_l1(&ft) < gap_l1(&fs)) {
                    let rel = (merit - mt) / (1.0 + merit.abs());
                    xs = xt;
                    us = ut;
                    fs = ft;
                    cost = ct;
                    merit = mt;
                    trace.push((rho, merit));
                    accepted = true;
                    if rel < 1e-12 && alpha == 1.0 && gap_inf(&fs) <= opts.tol_gap {
                        converged = true;
                    }
                    break;
                }
            }
            alpha *= 0.5;
        }
        if converged {
            break;
        }
        if accepted {
            mu = (mu / 10.0).max(opts.mu_init);
        } else {
            mu = (mu * 10.0).max(1e-6);
            if mu > opts.mu_max {
                break;
            }
        }
    }
    let gap_max = gap_inf(&fs);
    DdpResult {
        xs,
        us,
        cost,
        iterations,
        converged,
        gap_max,
        merit_trace: trace,
    }
}
