//! Mixed heat equation: exact solution, error norm and the level driver.

use crate::assembly::{Coefficients, Discretization};
use crate::error::{Error, Result};
use crate::estimators::{est_heat, HeatReport};
use crate::manufactured::{BenchmarkSolution, ExactSolution};
use crate::mesh::{structured_unit_square, BoundaryTag, Diagonal, Point};
use crate::quadrature::{time_rule_5, LineRule};
use crate::stepper::{HeatState, HeatStepper, TimeGrid};

/// `p = sin t cos pi x cos pi y`, `w = -K grad p`, `g = beta dp/dt + div w`.
#[derive(Debug, Clone, Default)]
pub struct HeatExact {
    inner: BenchmarkSolution,
}

impl HeatExact {
    pub fn new(coeffs: Coefficients) -> Self {
        Self {
            inner: BenchmarkSolution::new(coeffs),
        }
    }

    pub fn coefficients(&self) -> &Coefficients {
        self.inner.coefficients()
    }

    pub fn p(&self, t: f64, x: Point) -> f64 {
        self.inner.p(t, x)
    }

    pub fn dp_dt(&self, t: f64, x: Point) -> f64 {
        self.inner.dp_dt(t, x)
    }

    pub fn grad_p(&self, t: f64, x: Point) -> Point {
        self.inner.grad_p(t, x)
    }

    pub fn w(&self, t: f64, x: Point) -> Point {
        self.inner.w(t, x)
    }

    pub fn div_w(&self, t: f64, x: Point) -> f64 {
        self.inner.div_w(t, x)
    }

    pub fn g(&self, t: f64, x: Point) -> f64 {
        self.coefficients().beta * self.dp_dt(t, x) + self.div_w(t, x)
    }
}

/// Squared parts of the heat error norm `||q||_c^2 + ||dq||_c^2 + ||z||_W^2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeatErrorParts {
    pub p: f64,
    pub dp: f64,
    pub w_e: f64,
    pub w_div: f64,
}

impl HeatErrorParts {
    pub fn total_sq(&self, squared_div: bool) -> f64 {
        self.p + self.dp + self.w_e + if squared_div { self.w_div } else { self.w_div.sqrt() }
    }
}

fn heat_field_errors(disc: &Discretization, exact: &HeatExact, t: f64, p: &[f64], dp: &[f64], w: &[f64]) -> HeatErrorParts {
    let c = exact.coefficients();
    let mut out = HeatErrorParts::default();
    for (k, el) in disc.elements.iter().enumerate() {
        let lw = disc.local_w(k, w);
        let div_h = el.w_divergence(&lw);
        let kinv = c.k_inv(k);
        for (_, x, wq) in disc.quad_points(k) {
            let ep = exact.p(t, x) - p[k];
            let edp = exact.dp_dt(t, x) - dp[k];
            let wh = el.w_value(&lw, x);
            let wx = exact.w(t, x);
            let ew = [wx[0] - wh[0], wx[1] - wh[1]];
            let kw = [kinv[0][0] * ew[0] + kinv[0][1] * ew[1], kinv[1][0] * ew[0] + kinv[1][1] * ew[1]];
            let ediv = exact.div_w(t, x) - div_h;
            out.p += wq * c.beta * ep * ep;
            out.dp += wq * c.beta * edp * edp;
            out.w_e += wq * (kw[0] * ew[0] + kw[1] * ew[1]);
            out.w_div += wq * ediv * ediv;
        }
    }
    out
}

/// Integral over one interval of the error of the linear interpolant.
pub fn heat_interval_error(
    disc: &Discretization,
    exact: &HeatExact,
    prev: &HeatState,
    cur: &HeatState,
    t_prev: f64,
    tau: f64,
    time_rule: &LineRule,
) -> HeatErrorParts {
    let dp: Vec<f64> = cur.p.iter().zip(&prev.p).map(|(a, b)| (a - b) / tau).collect();
    let mut out = HeatErrorParts::default();
    for (&s, &wt) in time_rule.points.iter().zip(&time_rule.weights) {
        let lerp = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| s * a + (1.0 - s) * b).collect::<Vec<_>>();
        let part = heat_field_errors(disc, exact, t_prev + s * tau, &lerp(&cur.p, &prev.p), &dp, &lerp(&cur.w, &prev.w));
        out.p += wt * tau * part.p;
        out.dp += wt * tau * part.dp;
        out.w_e += wt * tau * part.w_e;
        out.w_div += wt * tau * part.w_div;
    }
    out
}

/// Error at `t_n` with `dp/dt` compared against the backward difference.
pub fn heat_instant_error(disc: &Discretization, exact: &HeatExact, prev: &HeatState, cur: &HeatState, t_n: f64, tau: f64) -> HeatErrorParts {
    let dp: Vec<f64> = cur.p.iter().zip(&prev.p).map(|(a, b)| (a - b) / tau).collect();
    heat_field_errors(disc, exact, t_n, &cur.p, &dp, &cur.w)
}

/// Outcome of one heat level.
#[derive(Debug, Clone)]
pub struct HeatLevel {
    pub k: u32,
    pub tau: f64,
    pub error: f64,
    pub estimator: f64,
    /// `(n, t_n, e_n, eps_n)`
    pub series: Vec<(usize, f64, f64, f64)>,
    pub reports: Vec<HeatReport>,
}

/// Runs the heat problem on level `k` over `grid`. `p_h^0` is the L2
/// projection of `p(0)` and `w_h^0 = 0`.
pub fn run_heat_level(
    k: u32,
    diagonal: Diagonal,
    coeffs: &Coefficients,
    grid: &TimeGrid,
    squared_div: bool,
    include_data: bool,
) -> Result<HeatLevel> {
    let disc = Discretization::new(structured_unit_square(i64::from(k), diagonal, |_, _| BoundaryTag::Gamma1)?);
    coeffs.validate(disc.n_triangles())?;
    let exact = HeatExact::new(coeffs.clone());
    let mut stepper = HeatStepper::new(&disc, coeffs.clone())?;
    let rule = time_rule_5();
    let mut prev = HeatState {
        n: 0,
        p: crate::assembly::project_q(&disc, |x| exact.p(0.0, x)),
        w: vec![0.0; disc.spaces.w.n_dofs],
    };
    let (mut err_sq, mut est_sq, mut data) = (0.0, 0.0, 0.0);
    let mut series = Vec::with_capacity(grid.n_steps());
    let mut reports = Vec::with_capacity(grid.n_steps());
    for n in 1..=grid.n_steps() {
        let (t0, t1, tau) = (grid.t(n - 1), grid.t(n), grid.tau(n));
        let cur = stepper
            .step_heat(&prev, n, tau, |x| exact.g(t1, x))
            .map_err(|e| Error::StepFailure {
                level: k,
                step: n,
                source: Box::new(e),
            })?;
        err_sq += heat_interval_error(&disc, &exact, &prev, &cur, t0, tau, &rule).total_sq(squared_div);
        let r = est_heat(&disc, coeffs, stepper.forms(), &prev, &cur, |t, x| exact.g(t, x), t0, t1, squared_div, &rule)?;
        est_sq += tau * (r.eta_time + r.eta_space());
        data += r.data;
        let e_n = heat_instant_error(&disc, &exact, &prev, &cur, t1, tau).total_sq(squared_div).sqrt();
        series.push((n, t1, e_n, r.eps()));
        reports.push(r);
        prev = cur;
    }
    if include_data {
        est_sq += data;
    }
    Ok(HeatLevel {
        k,
        tau: if grid.n_steps() > 0 { grid.tau(1) } else { 0.0 },
        error: err_sq.sqrt(),
        estimator: est_sq.sqrt(),
        series,
        reports,
    })
}
