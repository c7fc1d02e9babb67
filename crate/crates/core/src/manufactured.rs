//! Closed-form benchmark solution and the true-error norms measured
//! against it.

use std::f64::consts::PI;

use crate::assembly::{Coefficients, Discretization};
use crate::elements::Mat2;
use crate::mesh::Point;
use crate::quadrature::LineRule;
use crate::stepper::DiscreteState;

/// Analytic fields of a Biot problem together with its source data.
pub trait ExactSolution {
    fn coefficients(&self) -> &Coefficients;
    fn u(&self, t: f64, x: Point) -> Point;
    /// `grad[r][c] = d u_r / d x_c`
    fn grad_u(&self, t: f64, x: Point) -> Mat2;
    fn du_dt(&self, t: f64, x: Point) -> Point;
    fn grad_du_dt(&self, t: f64, x: Point) -> Mat2;
    fn p(&self, t: f64, x: Point) -> f64;
    fn dp_dt(&self, t: f64, x: Point) -> f64;
    fn grad_p(&self, t: f64, x: Point) -> Point;
    fn w(&self, t: f64, x: Point) -> Point;
    fn div_w(&self, t: f64, x: Point) -> f64;
    fn f(&self, t: f64, x: Point) -> Point;
    fn df_dt(&self, t: f64, x: Point) -> Point;
    fn g(&self, t: f64, x: Point) -> f64;
}

/// `u = cos t (sin pi x sin pi y, sin pi x sin pi y)`,
/// `p = sin t cos pi x cos pi y`, `w = -K grad p` on the unit square.
#[derive(Debug, Clone)]
pub struct BenchmarkSolution {
    coeffs: Coefficients,
    k: Mat2,
}

impl Default for BenchmarkSolution {
    fn default() -> Self {
        Self::new(Coefficients::benchmark())
    }
}

struct Trig {
    sx: f64,
    cx: f64,
    sy: f64,
    cy: f64,
}

fn trig(x: Point) -> Trig {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    Trig { sx, cx, sy, cy }
}

impl BenchmarkSolution {
    /// The permeability must be spatially constant.
    pub fn new(coeffs: Coefficients) -> Self {
        let k = coeffs.k(0);
        Self { coeffs, k }
    }

    /// Displacement and pressure amplitudes `(cos t, sin t)`.
    fn amplitudes(t: f64) -> (f64, f64) {
        (t.cos(), t.sin())
    }

    fn d_amplitudes(t: f64) -> (f64, f64) {
        (-t.sin(), t.cos())
    }

    fn grad_u_with(au: f64, s: &Trig) -> Mat2 {
        let gx = au * PI * s.cx * s.sy;
        let gy = au * PI * s.sx * s.cy;
        [[gx, gy], [gx, gy]]
    }

    fn grad_p_with(ap: f64, s: &Trig) -> Point {
        [-ap * PI * s.sx * s.cy, -ap * PI * s.cx * s.sy]
    }

    fn div_w_with(&self, ap: f64, s: &Trig) -> f64 {
        let pxx = -PI * PI * ap * s.cx * s.cy;
        let pyy = pxx;
        let pxy = PI * PI * ap * s.sx * s.sy;
        let k = &self.k;
        -(k[0][0] * pxx + (k[0][1] + k[1][0]) * pxy + k[1][1] * pyy)
    }

    fn f_with(&self, au: f64, ap: f64, s: &Trig) -> Point {
        let c = &self.coeffs;
        let sxy = s.sx * s.sy;
        let laplace = -2.0 * PI * PI * au * sxy;
        let grad_div = au * PI * PI * (s.cx * s.cy - sxy);
        let gp = Self::grad_p_with(ap, s);
        let div_sigma = c.mu * laplace + (c.mu + c.lambda) * grad_div;
        [-div_sigma + c.alpha * gp[0], -div_sigma + c.alpha * gp[1]]
    }
}

impl ExactSolution for BenchmarkSolution {
    fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    fn u(&self, t: f64, x: Point) -> Point {
        let s = trig(x);
        let v = t.cos() * s.sx * s.sy;
        [v, v]
    }

    fn grad_u(&self, t: f64, x: Point) -> Mat2 {
        Self::grad_u_with(Self::amplitudes(t).0, &trig(x))
    }

    fn du_dt(&self, t: f64, x: Point) -> Point {
        let s = trig(x);
        let v = -t.sin() * s.sx * s.sy;
        [v, v]
    }

    fn grad_du_dt(&self, t: f64, x: Point) -> Mat2 {
        Self::grad_u_with(Self::d_amplitudes(t).0, &trig(x))
    }

    fn p(&self, t: f64, x: Point) -> f64 {
        let s = trig(x);
        t.sin() * s.cx * s.cy
    }

    fn dp_dt(&self, t: f64, x: Point) -> f64 {
        let s = trig(x);
        t.cos() * s.cx * s.cy
    }

    fn grad_p(&self, t: f64, x: Point) -> Point {
        Self::grad_p_with(Self::amplitudes(t).1, &trig(x))
    }

    fn w(&self, t: f64, x: Point) -> Point {
        let gp = self.grad_p(t, x);
        let k = &self.k;
        [-(k[0][0] * gp[0] + k[0][1] * gp[1]), -(k[1][0] * gp[0] + k[1][1] * gp[1])]
    }

    fn div_w(&self, t: f64, x: Point) -> f64 {
        self.div_w_with(Self::amplitudes(t).1, &trig(x))
    }

    fn f(&self, t: f64, x: Point) -> Point {
        let (au, ap) = Self::amplitudes(t);
        self.f_with(au, ap, &trig(x))
    }

    fn df_dt(&self, t: f64, x: Point) -> Point {
        let (au, ap) = Self::d_amplitudes(t);
        self.f_with(au, ap, &trig(x))
    }

    fn g(&self, t: f64, x: Point) -> f64 {
        let s = trig(x);
        let c = &self.coeffs;
        let (dau, dap) = Self::d_amplitudes(t);
        let d_div_u = dau * PI * (s.cx * s.sy + s.sx * s.cy);
        c.beta * dap * s.cx * s.cy + c.alpha * d_div_u + self.div_w_with(t.sin(), &s)
    }
}

/// Squared error contributions, one per term of the error norm.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorParts {
    pub u: f64,
    pub du: f64,
    pub p: f64,
    pub dp: f64,
    pub w_e: f64,
    /// `||div(w - w_h)||^2`
    pub w_div: f64,
}

impl ErrorParts {
    pub fn total_sq(&self, squared_div: bool) -> f64 {
        let div = if squared_div { self.w_div } else { self.w_div.sqrt() };
        self.u + self.du + self.p + self.dp + self.w_e + div
    }

    fn scaled_add(&mut self, s: f64, o: &ErrorParts) {
        self.u += s * o.u;
        self.du += s * o.du;
        self.p += s * o.p;
        self.dp += s * o.dp;
        self.w_e += s * o.w_e;
        self.w_div += s * o.w_div;
    }
}

/// Error of a discrete field set at time `t`: `(x_u, x_p, x_w)` against the
/// exact fields and `(dx_u, dx_p)` against their time derivatives.
#[allow(clippy::too_many_arguments)]
pub fn field_errors(
    disc: &Discretization,
    exact: &dyn ExactSolution,
    t: f64,
    x_u: &[f64],
    dx_u: &[f64],
    x_p: &[f64],
    dx_p: &[f64],
    x_w: &[f64],
) -> ErrorParts {
    let c = exact.coefficients();
    let mut out = ErrorParts::default();
    for (k, el) in disc.elements.iter().enumerate() {
        let lu = disc.local_u(k, x_u);
        let ldu = disc.local_u(k, dx_u);
        let lw = disc.local_w(k, x_w);
        let div_wh = el.w_divergence(&lw);
        let k_inv = c.k_inv(k);
        for (b, x, wq) in disc.quad_points(k) {
            let sg = el.v_shape_grad(&b);
            let mut gu = exact.grad_u(t, x);
            let mut gdu = exact.grad_du_dt(t, x);
            for i in 0..9 {
                for r in 0..2 {
                    for s in 0..2 {
                        gu[r][s] -= lu[i] * sg[i][r][s];
                        gdu[r][s] -= ldu[i] * sg[i][r][s];
                    }
                }
            }
            let ep = exact.p(t, x) - x_p[k];
            let edp = exact.dp_dt(t, x) - dx_p[k];
            let wh = el.w_value(&lw, x);
            let wx = exact.w(t, x);
            let ew = [wx[0] - wh[0], wx[1] - wh[1]];
            let kw = [k_inv[0][0] * ew[0] + k_inv[0][1] * ew[1], k_inv[1][0] * ew[0] + k_inv[1][1] * ew[1]];
            let ediv = exact.div_w(t, x) - div_wh;
            out.u += wq * c.energy_density(&gu, &gu);
            out.du += wq * c.energy_density(&gdu, &gdu);
            out.p += wq * c.beta * ep * ep;
            out.dp += wq * c.beta * edp * edp;
            out.w_e += wq * (kw[0] * ew[0] + kw[1] * ew[1]);
            out.w_div += wq * ediv * ediv;
        }
    }
    out
}

fn difference_quotient(cur: &[f64], prev: &[f64], tau: f64) -> Vec<f64> {
    cur.iter().zip(prev).map(|(a, b)| (a - b) / tau).collect()
}

fn lerp(cur: &[f64], prev: &[f64], s: f64) -> Vec<f64> {
    cur.iter().zip(prev).map(|(a, b)| s * a + (1.0 - s) * b).collect()
}

/// Instantaneous error at `t_n`, comparing time derivatives with the
/// backward differences of the discrete solution.
pub fn instant_error(
    disc: &Discretization,
    exact: &dyn ExactSolution,
    prev: &DiscreteState,
    cur: &DiscreteState,
    t_n: f64,
    tau: f64,
) -> ErrorParts {
    let du = difference_quotient(&cur.u, &prev.u, tau);
    let dp = difference_quotient(&cur.p, &prev.p, tau);
    field_errors(disc, exact, t_n, &cur.u, &du, &cur.p, &dp, &cur.w)
}

/// Integral over `[t_{n-1}, t_n]` of the space-time error density of the
/// linear interpolant.
pub fn interval_error(
    disc: &Discretization,
    exact: &dyn ExactSolution,
    prev: &DiscreteState,
    cur: &DiscreteState,
    t_prev: f64,
    tau: f64,
    time_rule: &LineRule,
) -> ErrorParts {
    let du = difference_quotient(&cur.u, &prev.u, tau);
    let dp = difference_quotient(&cur.p, &prev.p, tau);
    let mut out = ErrorParts::default();
    for (&s, &w) in time_rule.points.iter().zip(&time_rule.weights) {
        let t = t_prev + s * tau;
        let u = lerp(&cur.u, &prev.u, s);
        let p = lerp(&cur.p, &prev.p, s);
        let wv = lerp(&cur.w, &prev.w, s);
        let parts = field_errors(disc, exact, t, &u, &du, &p, &dp, &wv);
        out.scaled_add(w * tau, &parts);
    }
    out
}

/// Running sum of interval errors; `value()` is the space-time error.
#[derive(Debug, Clone, Default)]
pub struct SpaceTimeError {
    pub parts: ErrorParts,
    pub squared_div: bool,
}

impl SpaceTimeError {
    pub fn new(squared_div: bool) -> Self {
        Self {
            parts: ErrorParts::default(),
            squared_div,
        }
    }

    pub fn add(&mut self, interval: &ErrorParts) {
        self.parts.scaled_add(1.0, interval);
    }

    pub fn value(&self) -> f64 {
        self.parts.total_sq(self.squared_div).sqrt()
    }
}
