//! Residual a posteriori indicators on a stationary mesh.
//!
//! Per-element arrays hold squared contributions; edge jump integrals are
//! computed once per edge and charged to each adjacent element with that
//! element's own `h_K`.

use crate::assembly::{project_q, Coefficients, Discretization, FormMatrices, Projector, VProjection};
use crate::error::{Error, Result};
use crate::manufactured::ExactSolution;
use crate::mesh::{BoundaryTag, Point};
use crate::quadrature::LineRule;
use crate::stepper::{DiscreteState, HeatState};

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}

fn diff_quotient(cur: &[f64], prev: &[f64], tau: f64) -> Vec<f64> {
    cur.iter().zip(prev).map(|(a, b)| (a - b) / tau).collect()
}

fn difference(cur: &[f64], prev: &[f64]) -> Vec<f64> {
    cur.iter().zip(prev).map(|(a, b)| a - b).collect()
}

/// Squared edge integral of a jump, evaluated with the edge rule. `trace`
/// receives the adjacent triangle and the physical point and returns the
/// one-sided trace; interior jumps are first-minus-second.
fn jump_integral<const N: usize>(disc: &Discretization, e: usize, trace: impl Fn(usize, Point) -> [f64; N]) -> f64 {
    let mesh = &disc.mesh;
    let [a, b] = mesh.edges()[e];
    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
    let len = disc.edges[e].length;
    let adj = mesh.edge_tris()[e];
    let tag = mesh.boundary_tag(e);
    if tag == BoundaryTag::Gamma1 {
        return 0.0;
    }
    let rule = &disc.edge_rule;
    let mut sum = 0.0;
    for (&s, &w) in rule.points.iter().zip(&rule.weights) {
        let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
        let mut j = trace(adj.first, x);
        if let Some(second) = adj.second {
            let other = trace(second, x);
            for (a, b) in j.iter_mut().zip(other) {
                *a -= b;
            }
        }
        sum += w * len * j.iter().map(|v| v * v).sum::<f64>();
    }
    sum
}

/// Adds `h_K * jump[e]` to every element for each of its edges.
fn charge_edges(disc: &Discretization, jumps: &[f64], out: &mut [f64]) {
    for (t, te) in disc.mesh.tri_edges().iter().enumerate() {
        let h = disc.elements[t].geo.size;
        for &(e, _) in te {
            out[t] += h * jumps[e];
        }
    }
}

/// `h_K^2 ||f_h + div sigma(u_h) - alpha grad p_h||_K^2` plus the
/// `h_K ||[sigma(u_h) - alpha p_h I] n_F||_F^2` terms.
pub fn est_e1(disc: &Discretization, coeffs: &Coefficients, u: &[f64], p: &[f64], f_h: &[f64]) -> Result<Vec<f64>> {
    let sp = &disc.spaces;
    check_len("displacement vector", sp.v.n_dofs, u.len())?;
    check_len("pressure vector", sp.q.n_dofs, p.len())?;
    check_len("projected body force", sp.v.n_dofs, f_h.len())?;

    let mut out = vec![0.0; disc.n_triangles()];
    for (t, el) in disc.elements.iter().enumerate() {
        let lu = disc.local_u(t, u);
        let lf = disc.local_u(t, f_h);
        let ds = el.v_shape_div_sigma(coeffs.mu, coeffs.lambda);
        let mut div_sigma = [0.0; 2];
        for (c, d) in lu.iter().zip(&ds) {
            div_sigma[0] += c * d[0];
            div_sigma[1] += c * d[1];
        }
        let mut interior = 0.0;
        for (b, _, wq) in disc.quad_points(t) {
            let f = el.u_value(&lf, &b);
            let r = [f[0] + div_sigma[0], f[1] + div_sigma[1]];
            interior += wq * (r[0] * r[0] + r[1] * r[1]);
        }
        out[t] = el.geo.area * interior;
    }

    let traction = |t: usize, x: Point, n: Point| -> [f64; 2] {
        let el = &disc.elements[t];
        let g = el.u_grad(&disc.local_u(t, u), &el.geo.barycentric(x));
        let mut s = coeffs.stress(&g);
        s[0][0] -= coeffs.alpha * p[t];
        s[1][1] -= coeffs.alpha * p[t];
        [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]]
    };
    let jumps: Vec<f64> = (0..disc.mesh.n_edges())
        .map(|e| {
            let n = disc.edges[e].normal;
            jump_integral(disc, e, |t, x| traction(t, x, n))
        })
        .collect();
    charge_edges(disc, &jumps, &mut out);
    Ok(out)
}

/// `||g_h - beta dp - alpha div du - div w||_K^2`; the `alpha` factor is
/// dropped when `with_alpha` is false.
pub fn est_e2(
    disc: &Discretization,
    coeffs: &Coefficients,
    du: &[f64],
    dp: &[f64],
    w: &[f64],
    g_h: &[f64],
    with_alpha: bool,
) -> Result<Vec<f64>> {
    let sp = &disc.spaces;
    check_len("displacement rate", sp.v.n_dofs, du.len())?;
    check_len("pressure rate", sp.q.n_dofs, dp.len())?;
    check_len("flux vector", sp.w.n_dofs, w.len())?;
    check_len("projected source", sp.q.n_dofs, g_h.len())?;
    let a = if with_alpha { coeffs.alpha } else { 1.0 };
    Ok(disc
        .elements
        .iter()
        .enumerate()
        .map(|(t, el)| {
            let ldu = disc.local_u(t, du);
            let base = g_h[t] - coeffs.beta * dp[t] - el.w_divergence(&disc.local_w(t, w));
            disc.quad_points(t)
                .map(|(b, _, wq)| {
                    let g = el.u_grad(&ldu, &b);
                    let r = base - a * (g[0][0] + g[1][1]);
                    wq * r * r
                })
                .sum()
        })
        .collect())
}

/// `h_K^2 ||K^-1 w_h + grad p_h||^2 + h_K^2 ||rot K^-1 w_h||^2` plus tangential
/// flux and pressure jumps.
pub fn est_e3(disc: &Discretization, coeffs: &Coefficients, p: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let sp = &disc.spaces;
    check_len("pressure vector", sp.q.n_dofs, p.len())?;
    check_len("flux vector", sp.w.n_dofs, w.len())?;
    let kw = |t: usize, x: Point| -> Point {
        let k = coeffs.k_inv(t);
        let v = disc.elements[t].w_value(&disc.local_w(t, w), x);
        [k[0][0] * v[0] + k[0][1] * v[1], k[1][0] * v[0] + k[1][1] * v[1]]
    };

    let mut out = vec![0.0; disc.n_triangles()];
    for (t, el) in disc.elements.iter().enumerate() {
        let lw = disc.local_w(t, w);
        // w_h = a + c x on the element, so rot(M w_h) = c (M10 - M01)
        let c: f64 = lw.iter().zip(&el.rt_signs).map(|(v, s)| v * s).sum::<f64>() * 0.5 / el.geo.area;
        let m = coeffs.k_inv(t);
        let rot = c * (m[1][0] - m[0][1]);
        let mut vol = 0.0;
        for (_, x, wq) in disc.quad_points(t) {
            let v = kw(t, x);
            vol += wq * (v[0] * v[0] + v[1] * v[1]);
        }
        out[t] = el.geo.area * (vol + rot * rot * el.geo.area);
    }

    let jumps: Vec<f64> = (0..disc.mesh.n_edges())
        .map(|e| {
            let tf = disc.edges[e].tangent;
            jump_integral(disc, e, |t, x| {
                let v = kw(t, x);
                [v[0] * tf[0] + v[1] * tf[1], p[t]]
            })
        })
        .collect();
    charge_edges(disc, &jumps, &mut out);
    Ok(out)
}

/// `(||du||_a^2 + ||dp||_c^2 + ||dw||_W^2, ||div dw||)` for consecutive states.
pub fn est_time(forms: &FormMatrices, prev: &DiscreteState, cur: &DiscreteState, squared_div: bool) -> Result<(f64, f64)> {
    if prev.n + 1 != cur.n {
        return Err(Error::StepIndex {
            prev: prev.n,
            requested: cur.n,
        });
    }
    let du = difference(&cur.u, &prev.u);
    let dp = difference(&cur.p, &prev.p);
    let dw = difference(&cur.w, &prev.w);
    let e = forms.a.quadratic_form(&du) + forms.c.quadratic_form(&dp) + forms.w_norm_sq(&dw, squared_div);
    let tilde = forms.div_gram.quadratic_form(&dw).max(0.0).sqrt();
    Ok((e.max(0.0), tilde))
}

/// Data-oscillation integrals over `[t_prev, t_prev + tau]`:
/// `int sum h_K^2 (||f - f_h||^2 + ||df - df_h||^2) + ||g - g_h||^2` and
/// `int ||g - g_h||`.
#[allow(clippy::too_many_arguments)]
pub fn est_data(
    disc: &Discretization,
    f: impl Fn(f64, Point) -> Point,
    df: impl Fn(f64, Point) -> Point,
    g: impl Fn(f64, Point) -> f64,
    f_h: &[f64],
    df_h: &[f64],
    g_h: &[f64],
    t_prev: f64,
    tau: f64,
    time_rule: &LineRule,
) -> (f64, f64) {
    let mut total = 0.0;
    let mut tilde = 0.0;
    for (&s, &wt) in time_rule.points.iter().zip(&time_rule.weights) {
        let t = t_prev + s * tau;
        let mut vec_part = 0.0;
        let mut g_part = 0.0;
        for (k, el) in disc.elements.iter().enumerate() {
            let lf = disc.local_u(k, f_h);
            let ldf = disc.local_u(k, df_h);
            let (mut fk, mut gk) = (0.0, 0.0);
            for (b, x, wq) in disc.quad_points(k) {
                let fe = f(t, x);
                let fv = el.u_value(&lf, &b);
                let de = df(t, x);
                let dv = el.u_value(&ldf, &b);
                let ge = g(t, x) - g_h[k];
                fk += wq * ((fe[0] - fv[0]).powi(2) + (fe[1] - fv[1]).powi(2) + (de[0] - dv[0]).powi(2) + (de[1] - dv[1]).powi(2));
                gk += wq * ge * ge;
            }
            vec_part += el.geo.area * fk;
            g_part += gk;
        }
        total += wt * tau * (vec_part + g_part);
        tilde += wt * tau * g_part.sqrt();
    }
    (total, tilde)
}

/// Toggles for the estimator definitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorOptions {
    /// Multiply `div du` by `alpha` in the mass residual.
    pub e2_alpha: bool,
    /// Square the divergence term of the flux norm.
    pub squared_div: bool,
    pub projection: VProjection,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            e2_alpha: true,
            squared_div: true,
            projection: VProjection::Unconstrained,
        }
    }
}

/// All indicators at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub n: usize,
    pub t: f64,
    pub tau: f64,
    pub e1: Vec<f64>,
    pub e1t: Vec<f64>,
    pub e2: Vec<f64>,
    pub e3: Vec<f64>,
    pub e3t: Vec<f64>,
    pub e_time: f64,
    pub e_tilde_time: f64,
    pub e_data: f64,
    pub e_tilde_data: f64,
}

pub const REPORT_CSV_HEADER: &str = "n,t_n,E_time,E_tilde_time,E1,E1t,E2,E3,E3t,E_space,eps_n,E_data,E_tilde_data";

fn sum(v: &[f64]) -> f64 {
    v.iter().sum()
}

impl EstimatorReport {
    pub fn e1_total(&self) -> f64 {
        sum(&self.e1)
    }

    pub fn e1t_total(&self) -> f64 {
        sum(&self.e1t)
    }

    pub fn e2_total(&self) -> f64 {
        sum(&self.e2)
    }

    pub fn e3_total(&self) -> f64 {
        sum(&self.e3)
    }

    pub fn e3t_total(&self) -> f64 {
        sum(&self.e3t)
    }

    pub fn e_space(&self) -> f64 {
        self.e1_total() + self.e1t_total() + self.e2_total() + self.e3_total() + self.e3t_total()
    }

    /// Instantaneous indicator `(E_time + E_space)^(1/2)`.
    pub fn eps(&self) -> f64 {
        (self.e_time + self.e_space()).sqrt()
    }

    /// Per-element total `E1 + E1t + E2 + E3 + E3t`.
    pub fn element_space(&self) -> Vec<f64> {
        (0..self.e1.len())
            .map(|k| self.e1[k] + self.e1t[k] + self.e2[k] + self.e3[k] + self.e3t[k])
            .collect()
    }

    /// One row matching [`REPORT_CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        let vals = [
            self.t,
            self.e_time,
            self.e_tilde_time,
            self.e1_total(),
            self.e1t_total(),
            self.e2_total(),
            self.e3_total(),
            self.e3t_total(),
            self.e_space(),
            self.eps(),
            self.e_data,
            self.e_tilde_data,
        ];
        let mut row = self.n.to_string();
        for v in vals {
            row.push(',');
            row.push_str(&format_g(v));
        }
        row
    }
}

/// `%.6g`-style formatting.
pub fn format_g(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mant, e) = sci.split_once('e').expect("exponent present");
    let exp: i32 = e.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

/// Evaluates every indicator of the coupled problem from consecutive states,
/// caching the previous projected body force.
pub struct CoupledEstimator<'a> {
    disc: &'a Discretization,
    coeffs: Coefficients,
    projector: Projector,
    options: EstimatorOptions,
    time_rule: LineRule,
    f_h_prev: Option<(f64, Vec<f64>)>,
}

impl std::fmt::Debug for CoupledEstimator<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoupledEstimator").field("options", &self.options).finish()
    }
}

impl<'a> CoupledEstimator<'a> {
    pub fn new(disc: &'a Discretization, coeffs: Coefficients, options: EstimatorOptions) -> Result<Self> {
        Ok(Self {
            disc,
            coeffs,
            projector: Projector::new(disc, options.projection)?,
            options,
            time_rule: crate::quadrature::time_rule_5(),
            f_h_prev: None,
        })
    }

    fn projected_f(&mut self, exact: &dyn ExactSolution, t: f64) -> Result<Vec<f64>> {
        if let Some((tp, f)) = &self.f_h_prev {
            if *tp == t {
                return Ok(f.clone());
            }
        }
        self.projector.project_v(self.disc, |x| exact.f(t, x))
    }

    pub fn report(
        &mut self,
        forms: &FormMatrices,
        exact: &dyn ExactSolution,
        prev: &DiscreteState,
        cur: &DiscreteState,
        t_prev: f64,
        t_n: f64,
    ) -> Result<EstimatorReport> {
        let tau = t_n - t_prev;
        if !(tau > 0.0) {
            return Err(Error::InvalidTimeStep(tau));
        }
        let disc = self.disc;
        let f_prev = self.projected_f(exact, t_prev)?;
        let f_h = self.projector.project_v(disc, |x| exact.f(t_n, x))?;
        let df_h = diff_quotient(&f_h, &f_prev, tau);
        let g_h = project_q(disc, |x| exact.g(t_n, x));
        let du = diff_quotient(&cur.u, &prev.u, tau);
        let dp = diff_quotient(&cur.p, &prev.p, tau);
        let dw = diff_quotient(&cur.w, &prev.w, tau);

        let c = &self.coeffs;
        let (e_time, e_tilde_time) = est_time(forms, prev, cur, self.options.squared_div)?;
        let (e_data, e_tilde_data) = est_data(
            disc,
            |t, x| exact.f(t, x),
            |t, x| exact.df_dt(t, x),
            |t, x| exact.g(t, x),
            &f_h,
            &df_h,
            &g_h,
            t_prev,
            tau,
            &self.time_rule,
        );
        let report = EstimatorReport {
            n: cur.n,
            t: t_n,
            tau,
            e1: est_e1(disc, c, &cur.u, &cur.p, &f_h)?,
            e1t: est_e1(disc, c, &du, &dp, &df_h)?,
            e2: est_e2(disc, c, &du, &dp, &cur.w, &g_h, self.options.e2_alpha)?,
            e3: est_e3(disc, c, &cur.p, &cur.w)?,
            e3t: est_e3(disc, c, &dp, &dw)?,
            e_time,
            e_tilde_time,
            e_data,
            e_tilde_data,
        };
        self.f_h_prev = Some((t_n, f_h));
        Ok(report)
    }
}

/// Running `sum tau (E_time + E_space)`, optionally with data oscillation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Aggregate {
    pub time: f64,
    pub space: f64,
    pub data: f64,
    pub steps: usize,
}

impl Aggregate {
    pub fn add(&mut self, r: &EstimatorReport) {
        self.time += r.tau * r.e_time;
        self.space += r.tau * r.e_space();
        self.data += r.e_data;
        self.steps += 1;
    }

    pub fn value(&self, include_data: bool) -> f64 {
        (self.time + self.space + if include_data { self.data } else { 0.0 }).sqrt()
    }
}

/// `E_k` and the series `eps^n` from a complete list of reports.
pub fn aggregate(reports: &[EstimatorReport], n_steps: usize) -> Result<(f64, Vec<f64>)> {
    if reports.len() != n_steps {
        return Err(Error::Config(format!("expected {n_steps} reports, got {}", reports.len())));
    }
    let mut agg = Aggregate::default();
    for r in reports {
        agg.add(r);
    }
    Ok((agg.value(false), reports.iter().map(EstimatorReport::eps).collect()))
}

/// Indicators of the mixed heat problem at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatReport {
    pub n: usize,
    pub t: f64,
    pub tau: f64,
    /// `||g_h - beta dp - div w||_K^2`
    pub eta_tilde: Vec<f64>,
    pub e3: Vec<f64>,
    pub e3t: Vec<f64>,
    pub eta_time: f64,
    pub e_tilde_time: f64,
    /// `int ||g - g_h||^2`
    pub data: f64,
}

impl HeatReport {
    pub fn eta_space(&self) -> f64 {
        sum(&self.eta_tilde) + sum(&self.e3) + sum(&self.e3t)
    }

    pub fn eps(&self) -> f64 {
        (self.eta_time + self.eta_space()).sqrt()
    }
}

/// Heat indicators from consecutive states and the source `g`.
#[allow(clippy::too_many_arguments)]
pub fn est_heat(
    disc: &Discretization,
    coeffs: &Coefficients,
    forms: &FormMatrices,
    prev: &HeatState,
    cur: &HeatState,
    g: impl Fn(f64, Point) -> f64,
    t_prev: f64,
    t_n: f64,
    squared_div: bool,
    time_rule: &LineRule,
) -> Result<HeatReport> {
    if prev.n + 1 != cur.n {
        return Err(Error::StepIndex {
            prev: prev.n,
            requested: cur.n,
        });
    }
    let tau = t_n - t_prev;
    if !(tau > 0.0) {
        return Err(Error::InvalidTimeStep(tau));
    }
    let g_h = project_q(disc, |x| g(t_n, x));
    let dp = diff_quotient(&cur.p, &prev.p, tau);
    let dw = diff_quotient(&cur.w, &prev.w, tau);
    let zero_u = vec![0.0; disc.spaces.v.n_dofs];
    let eta_tilde = est_e2(disc, coeffs, &zero_u, &dp, &cur.w, &g_h, true)?;
    let e3 = est_e3(disc, coeffs, &cur.p, &cur.w)?;
    let e3t = est_e3(disc, coeffs, &dp, &dw)?;
    let delta_p = difference(&cur.p, &prev.p);
    let delta_w = difference(&cur.w, &prev.w);
    let eta_time = forms.c.quadratic_form(&delta_p) + forms.w_norm_sq(&delta_w, squared_div);
    let e_tilde_time = forms.div_gram.quadratic_form(&delta_w).max(0.0).sqrt();
    let mut data = 0.0;
    for (&s, &wt) in time_rule.points.iter().zip(&time_rule.weights) {
        let t = t_prev + s * tau;
        for (k, gk) in g_h.iter().enumerate() {
            for (_, x, wq) in disc.quad_points(k) {
                data += wt * tau * wq * (g(t, x) - gk).powi(2);
            }
        }
    }
    Ok(HeatReport {
        n: cur.n,
        t: t_n,
        tau,
        eta_tilde,
        e3,
        e3t,
        eta_time: eta_time.max(0.0),
        e_tilde_time,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Permeability;
    use crate::manufactured::BenchmarkSolution;
    use crate::mesh::{uniform_unit_square, uniform_unit_square_with};
    use crate::stepper::BiotStepper;

    fn disc(k: i64) -> Discretization {
        Discretization::new(uniform_unit_square(k).unwrap())
    }

    #[test]
    fn zero_state_gives_zero_indicators() {
        let d = disc(2);
        let c = Coefficients::benchmark();
        let z = DiscreteState::zeros(0, &d);
        let f0 = vec![0.0; d.spaces.v.n_dofs];
        let g0 = vec![0.0; d.spaces.q.n_dofs];
        assert!(est_e1(&d, &c, &z.u, &z.p, &f0).unwrap().iter().all(|v| *v == 0.0));
        assert!(est_e2(&d, &c, &z.u, &z.p, &z.w, &g0, true).unwrap().iter().all(|v| *v == 0.0));
        assert!(est_e3(&d, &c, &z.p, &z.w).unwrap().iter().all(|v| *v == 0.0));
        let forms = FormMatrices::assemble(&d, &c).unwrap();
        let mut z1 = z.clone();
        z1.n = 1;
        assert_eq!(est_time(&forms, &z, &z1, true).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn constant_pressure_is_consistent() {
        let d = disc(2);
        let c = Coefficients::benchmark();
        let u = vec![0.0; d.spaces.v.n_dofs];
        let p = vec![1.0; d.spaces.q.n_dofs];
        let w = vec![0.0; d.spaces.w.n_dofs];
        let e1: f64 = est_e1(&d, &c, &u, &p, &u).unwrap().iter().sum();
        let e3: f64 = est_e3(&d, &c, &p, &w).unwrap().iter().sum();
        assert!(e1.abs() < 1e-24, "{e1}");
        assert!(e3.abs() < 1e-24, "{e3}");
    }

    #[test]
    fn gamma2_edges_see_full_trace() {
        // constant pressure with the right side traction-free: jump = alpha p n
        let m = uniform_unit_square_with(1, |a, b| {
            if a[0] == 1.0 && b[0] == 1.0 {
                BoundaryTag::Gamma2
            } else {
                BoundaryTag::Gamma1
            }
        })
        .unwrap();
        let d = Discretization::new(m);
        let c = Coefficients::benchmark();
        let u = vec![0.0; d.spaces.v.n_dofs];
        let p = vec![2.0; d.spaces.q.n_dofs];
        let total: f64 = est_e1(&d, &c, &u, &p, &u).unwrap().iter().sum();
        // two edges of length 1/2 on x = 1, each adjacent to one element with h = sqrt(1/8)
        let expected = 2.0 * (1.0f64 / 8.0).sqrt() * 0.5 * 4.0;
        assert!((total - expected).abs() < 1e-13, "{total} vs {expected}");
        // E3 sees the pressure trace too
        let w = vec![0.0; d.spaces.w.n_dofs];
        let e3: f64 = est_e3(&d, &c, &p, &w).unwrap().iter().sum();
        assert!((e3 - expected).abs() < 1e-13);
    }

    #[test]
    fn mass_residual_of_constant_source() {
        let d = disc(2);
        let c = Coefficients::benchmark();
        let g_h: Vec<f64> = (0..d.n_triangles()).map(|t| t as f64 * 0.1 - 0.7).collect();
        let zu = vec![0.0; d.spaces.v.n_dofs];
        let zp = vec![0.0; d.spaces.q.n_dofs];
        let zw = vec![0.0; d.spaces.w.n_dofs];
        let e2 = est_e2(&d, &c, &zu, &zp, &zw, &g_h, true).unwrap();
        for (t, v) in e2.iter().enumerate() {
            let expected = d.elements[t].geo.area * g_h[t] * g_h[t];
            assert!((v - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn pressure_step_time_indicator() {
        let d = disc(2);
        let mut c = Coefficients::benchmark();
        c.beta = 1.7;
        let forms = FormMatrices::assemble(&d, &c).unwrap();
        let prev = DiscreteState::zeros(0, &d);
        let mut cur = DiscreteState::zeros(1, &d);
        cur.p[5] = 0.3;
        let (e, tilde) = est_time(&forms, &prev, &cur, true).unwrap();
        assert!((e - 1.7 * 0.09 * d.elements[5].geo.area).abs() < 1e-15);
        assert_eq!(tilde, 0.0);
        assert!(est_time(&forms, &prev, &prev, true).is_err());
    }

    #[test]
    fn rot_term_sees_asymmetric_inverse_only() {
        // symmetric anisotropic K: rot term zero, so E3 equals the pure L2 part
        let d = disc(1);
        let mut c = Coefficients::benchmark();
        c.permeability = Permeability::Constant([[2.0, 0.5], [0.5, 1.0]]);
        let p = vec![0.0; d.spaces.q.n_dofs];
        let mut w = vec![0.0; d.spaces.w.n_dofs];
        let interior = (0..d.mesh.n_edges()).find(|&e| d.mesh.boundary_tag(e) == BoundaryTag::Interior).unwrap();
        w[interior] = 1.0;
        assert!(est_e3(&d, &c, &p, &w).unwrap().iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn report_sums_and_csv() {
        let d = disc(2);
        let ex = BenchmarkSolution::default();
        let c = ex.coefficients().clone();
        let mut s = BiotStepper::new(&d, c.clone()).unwrap();
        let init = s.initial_state(|x| ex.f(0.0, x)).unwrap();
        let tau = 0.1;
        let cur = s.step(&init, 1, tau, |x| ex.f(tau, x), |x| ex.g(tau, x)).unwrap();
        let mut est = CoupledEstimator::new(&d, c, EstimatorOptions::default()).unwrap();
        let r = est.report(s.forms(), &ex, &init, &cur, 0.0, tau).unwrap();
        for arr in [&r.e1, &r.e1t, &r.e2, &r.e3, &r.e3t] {
            assert!(arr.iter().all(|v| *v >= 0.0));
        }
        let parts: f64 = r.element_space().iter().sum();
        assert!((parts - r.e_space()).abs() <= 1e-12 * r.e_space());
        assert!(r.e_time > 0.0 && r.e_data > 0.0);
        let row = r.csv_row();
        assert_eq!(row.split(',').count(), REPORT_CSV_HEADER.split(',').count());
        let (agg, series) = aggregate(std::slice::from_ref(&r), 1).unwrap();
        assert!((agg - (tau * (r.e_time + r.e_space())).sqrt()).abs() < 1e-14);
        assert_eq!(series, vec![r.eps()]);
        assert!(aggregate(&[], 1).is_err());
    }

    #[test]
    fn heat_steady_state_is_silent() {
        let d = disc(2);
        let c = Coefficients::benchmark();
        let forms = FormMatrices::assemble(&d, &c).unwrap();
        let prev = HeatState {
            n: 0,
            p: vec![0.5; d.spaces.q.n_dofs],
            w: vec![0.0; d.spaces.w.n_dofs],
        };
        let mut cur = prev.clone();
        cur.n = 1;
        let r = est_heat(&d, &c, &forms, &prev, &cur, |_, _| 0.0, 0.0, 0.1, true, &crate::quadrature::time_rule_5()).unwrap();
        assert_eq!(r.eta_time, 0.0);
        assert!(r.eta_space().abs() < 1e-24);
        assert_eq!(r.data, 0.0);
    }

    #[test]
    fn format_g_matches_printf() {
        let cases = [
            (0.947, "0.947"),
            (2.375, "2.375"),
            (0.5, "0.5"),
            (1.0, "1"),
            (123456.7, "123457"),
            (1234567.0, "1.23457e+06"),
            (0.0001234567, "0.000123457"),
            (0.00001234567, "1.23457e-05"),
            (-2.5, "-2.5"),
            (0.0, "0"),
            (999999.6, "1e+06"),
            (1.0 / 3.0, "0.333333"),
        ];
        for (v, s) in cases {
            assert_eq!(format_g(v), s, "{v}");
        }
    }
}
