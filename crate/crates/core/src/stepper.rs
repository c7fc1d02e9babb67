//! Backward-Euler time stepping for the coupled system and for the mixed
//! heat subcase.

use crate::assembly::{
    build_step_system, elasticity_system, load_q, load_v, BlockSystem, Coefficients, Discretization, FormMatrices,
};
use crate::error::{Error, Result};
use crate::manufactured::ExactSolution;
use crate::mesh::Point;
use crate::sparse::{norm2, DirectSolver, TripletList};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time > 0.0) && steps > 0 {
            return Err(Error::Config(format!("final time must be positive, got {final_time}")));
        }
        let tau = if steps == 0 { 0.0 } else { final_time / steps as f64 };
        let mut times: Vec<f64> = (0..=steps).map(|n| n as f64 * tau).collect();
        if steps > 0 {
            times[steps] = final_time;
        }
        Ok(Self { times })
    }

    /// Uniform grid with step `tau` reaching `final_time`; the step count is
    /// `round(final_time / tau)`.
    pub fn with_step(final_time: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidTimeStep(tau));
        }
        let steps = (final_time / tau).round() as usize;
        if steps == 0 {
            return Err(Error::Config(format!("time step {tau} exceeds final time {final_time}")));
        }
        Self::uniform(final_time, steps)
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(Error::Config("time grid must start at 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("time grid must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn t(&self, n: usize) -> f64 {
        self.times[n]
    }

    /// `t_n - t_{n-1}`
    pub fn tau(&self, n: usize) -> f64 {
        self.times[n] - self.times[n - 1]
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("grid has at least one node")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub n: usize,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub w: Vec<f64>,
}

impl DiscreteState {
    pub fn zeros(n: usize, disc: &Discretization) -> Self {
        Self {
            n,
            u: vec![0.0; disc.spaces.v.n_dofs],
            p: vec![0.0; disc.spaces.q.n_dofs],
            w: vec![0.0; disc.spaces.w.n_dofs],
        }
    }

    /// `chi^tau(t)` for `t = t_{n-1} + s tau`, `s` in `[0, 1]`.
    pub fn interpolate(prev: &Self, cur: &Self, s: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let lerp = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| s * a + (1.0 - s) * b).collect::<Vec<_>>();
        (lerp(&cur.u, &prev.u), lerp(&cur.p, &prev.p), lerp(&cur.w, &prev.w))
    }

    fn check_layout(&self, disc: &Discretization) -> Result<()> {
        for (what, expected, got) in [
            ("displacement vector", disc.spaces.v.n_dofs, self.u.len()),
            ("pressure vector", disc.spaces.q.n_dofs, self.p.len()),
            ("flux vector", disc.spaces.w.n_dofs, self.w.len()),
        ] {
            if expected != got {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }
}

/// Body force and fluid source at a given time.
pub trait Sources {
    fn force(&self, t: f64, x: Point) -> Point;
    fn source(&self, t: f64, x: Point) -> f64;
}

impl<T: ExactSolution + ?Sized> Sources for T {
    fn force(&self, t: f64, x: Point) -> Point {
        self.f(t, x)
    }

    fn source(&self, t: f64, x: Point) -> f64 {
        self.g(t, x)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroSources;

impl Sources for ZeroSources {
    fn force(&self, _: f64, _: Point) -> Point {
        [0.0, 0.0]
    }

    fn source(&self, _: f64, _: Point) -> f64 {
        0.0
    }
}

/// Relative residuals of the three discrete equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResiduals {
    pub momentum: f64,
    pub mass: f64,
    pub darcy: f64,
}

impl StepResiduals {
    pub fn max(&self) -> f64 {
        self.momentum.max(self.mass).max(self.darcy)
    }
}

fn relative(r: &[f64], scale: f64) -> f64 {
    let n = norm2(r);
    if scale > 0.0 {
        n / scale
    } else {
        n
    }
}

pub struct BiotStepper<'a> {
    disc: &'a Discretization,
    forms: FormMatrices,
    coeffs: Coefficients,
    cached: CachedSystem,
}

impl std::fmt::Debug for BiotStepper<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BiotStepper").field("cached_tau", &self.cached.as_ref().map(|c| c.0)).finish()
    }
}

impl<'a> BiotStepper<'a> {
    pub fn new(disc: &'a Discretization, coeffs: Coefficients) -> Result<Self> {
        let forms = FormMatrices::assemble(disc, &coeffs)?;
        Ok(Self {
            disc,
            forms,
            coeffs,
            cached: None,
        })
    }

    pub fn forms(&self) -> &FormMatrices {
        &self.forms
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn discretization(&self) -> &Discretization {
        self.disc
    }

    /// `p = 0`, `w = 0` and `u` solving `a(u, v) = (f(0), v)`.
    pub fn initial_state(&self, f0: impl Fn(Point) -> Point) -> Result<DiscreteState> {
        let mut state = DiscreteState::zeros(0, self.disc);
        let mut load = load_v(self.disc, f0);
        for (l, &e) in load.iter_mut().zip(&self.disc.spaces.v.essential) {
            if e {
                *l = 0.0;
            }
        }
        state.u = DirectSolver::new(elasticity_system(self.disc, &self.forms))?.solve(&load)?;
        Ok(state)
    }

    /// Advances `prev` to time level `n` with step `tau` and sources `f^n`, `g^n`.
    pub fn step(
        &mut self,
        prev: &DiscreteState,
        n: usize,
        tau: f64,
        f: impl Fn(Point) -> Point,
        g: impl Fn(Point) -> f64,
    ) -> Result<DiscreteState> {
        if prev.n + 1 != n {
            return Err(Error::StepIndex {
                prev: prev.n,
                requested: n,
            });
        }
        prev.check_layout(self.disc)?;
        let f_load = load_v(self.disc, f);
        let g_load = load_q(self.disc, g);
        let (_, system, solver) = cached_system(&mut self.cached, self.disc, &self.forms, tau)?;
        let rhs = system.rhs(&self.forms, &f_load, &g_load, &prev.u, &prev.p);
        let x = solver.solve(&rhs)?;
        let (u, p, w) = system.layout.split(&x);
        Ok(DiscreteState {
            n,
            u: u.to_vec(),
            p: p.to_vec(),
            w: w.to_vec(),
        })
    }

    /// Residuals of the three equations tested against every free discrete
    /// test function, relative to the magnitude of the assembled terms.
    pub fn residuals(
        &self,
        prev: &DiscreteState,
        cur: &DiscreteState,
        tau: f64,
        f: impl Fn(Point) -> Point,
        g: impl Fn(Point) -> f64,
    ) -> StepResiduals {
        let fm = &self.forms;
        let sp = &self.disc.spaces;
        let f_load = load_v(self.disc, f);
        let g_load = load_q(self.disc, g);

        let au = fm.a.mul_vec(&cur.u);
        let btp = fm.b.mul_vec_transpose(&cur.p);
        let mut r1: Vec<f64> = (0..sp.v.n_dofs).map(|i| f_load[i] - au[i] + btp[i]).collect();
        let s1 = norm2(&f_load) + norm2(&au) + norm2(&btp);
        mask(&mut r1, &sp.v.essential);

        let dp: Vec<f64> = cur.p.iter().zip(&prev.p).map(|(a, b)| (a - b) / tau).collect();
        let du: Vec<f64> = cur.u.iter().zip(&prev.u).map(|(a, b)| (a - b) / tau).collect();
        let cdp = fm.c.mul_vec(&dp);
        let bdu = fm.b.mul_vec(&du);
        let dw = fm.d.mul_vec(&cur.w);
        let r2: Vec<f64> = (0..sp.q.n_dofs).map(|i| g_load[i] - cdp[i] - bdu[i] - dw[i]).collect();
        let s2 = norm2(&g_load) + norm2(&cdp) + norm2(&bdu) + norm2(&dw);

        let ew = fm.e.mul_vec(&cur.w);
        let dtp = fm.d.mul_vec_transpose(&cur.p);
        let mut r3: Vec<f64> = (0..sp.w.n_dofs).map(|i| -ew[i] + dtp[i]).collect();
        let s3 = norm2(&ew) + norm2(&dtp);
        mask(&mut r3, &sp.w.essential);

        StepResiduals {
            momentum: relative(&r1, s1),
            mass: relative(&r2, s2),
            darcy: relative(&r3, s3),
        }
    }

    /// Runs `grid.n_steps()` steps from `initial`, calling `observer` with
    /// `(prev, cur, grid)` after every step. Only two states are kept alive.
    pub fn run<S, O>(&mut self, grid: &TimeGrid, initial: DiscreteState, sources: &S, mut observer: O) -> Result<DiscreteState>
    where
        S: Sources + ?Sized,
        O: FnMut(&DiscreteState, &DiscreteState, &TimeGrid) -> Result<()>,
    {
        let mut prev = initial;
        for n in 1..=grid.n_steps() {
            let t = grid.t(n);
            let cur = self.step(&prev, n, grid.tau(n), |x| sources.force(t, x), |x| sources.source(t, x))?;
            observer(&prev, &cur, grid)?;
            prev = cur;
        }
        Ok(prev)
    }

    /// Like [`run`](Self::run) but keeps every state.
    pub fn run_stored<S: Sources + ?Sized>(&mut self, grid: &TimeGrid, initial: DiscreteState, sources: &S) -> Result<Vec<DiscreteState>> {
        let mut states = vec![initial.clone()];
        self.run(grid, initial, sources, |_, cur, _| {
            states.push(cur.clone());
            Ok(())
        })?;
        Ok(states)
    }

    /// `||u||_a^2 + ||p||_c^2`
    pub fn energy(&self, state: &DiscreteState) -> f64 {
        self.forms.a.quadratic_form(&state.u) + self.forms.c.quadratic_form(&state.p)
    }
}

type CachedSystem = Option<(f64, BlockSystem, DirectSolver)>;

fn cached_system<'c>(
    cache: &'c mut CachedSystem,
    disc: &Discretization,
    forms: &FormMatrices,
    tau: f64,
) -> Result<&'c (f64, BlockSystem, DirectSolver)> {
    if cache.as_ref().is_none_or(|(t, _, _)| *t != tau) {
        let system = build_step_system(disc, forms, tau)?;
        let solver = system.factorize()?;
        *cache = Some((tau, system, solver));
    }
    Ok(cache.as_ref().expect("cache filled above"))
}

fn mask(r: &mut [f64], essential: &[bool]) {
    for (v, &e) in r.iter_mut().zip(essential) {
        if e {
            *v = 0.0;
        }
    }
}

/// Pressure and flux of the mixed heat problem.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatState {
    pub n: usize,
    pub p: Vec<f64>,
    pub w: Vec<f64>,
}

impl HeatState {
    pub fn zeros(n: usize, disc: &Discretization) -> Self {
        Self {
            n,
            p: vec![0.0; disc.spaces.q.n_dofs],
            w: vec![0.0; disc.spaces.w.n_dofs],
        }
    }
}

/// Backward Euler for `[C/tau, D; -D^T, E]`.
pub struct HeatStepper<'a> {
    disc: &'a Discretization,
    forms: FormMatrices,
    cached: Option<(f64, DirectSolver)>,
}

impl std::fmt::Debug for HeatStepper<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeatStepper").field("cached_tau", &self.cached.as_ref().map(|c| c.0)).finish()
    }
}

impl<'a> HeatStepper<'a> {
    pub fn new(disc: &'a Discretization, coeffs: Coefficients) -> Result<Self> {
        let forms = FormMatrices::assemble(disc, &coeffs)?;
        Ok(Self { disc, forms, cached: None })
    }

    pub fn forms(&self) -> &FormMatrices {
        &self.forms
    }

    fn matrix(&self, tau: f64) -> Result<crate::sparse::SparseMatrix> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidTimeStep(tau));
        }
        let n_p = self.disc.spaces.q.n_dofs;
        let ess = &self.disc.spaces.w.essential;
        let n = n_p + ess.len();
        let mut t = TripletList::new(n, n);
        for (r, c, v) in self.forms.c.triplets() {
            t.push(r, c, v / tau);
        }
        for (r, c, v) in self.forms.d.triplets() {
            if !ess[c] {
                t.push(r, n_p + c, v);
                t.push(n_p + c, r, -v);
            }
        }
        for (r, c, v) in self.forms.e.triplets() {
            if !ess[r] && !ess[c] {
                t.push(n_p + r, n_p + c, v);
            }
        }
        for (i, &e) in ess.iter().enumerate() {
            if e {
                t.push(n_p + i, n_p + i, 1.0);
            }
        }
        Ok(t.build())
    }

    pub fn step_heat(&mut self, prev: &HeatState, n: usize, tau: f64, g: impl Fn(Point) -> f64) -> Result<HeatState> {
        if prev.n + 1 != n {
            return Err(Error::StepIndex {
                prev: prev.n,
                requested: n,
            });
        }
        let n_p = self.disc.spaces.q.n_dofs;
        if prev.p.len() != n_p {
            return Err(Error::DimensionMismatch {
                what: "pressure vector",
                expected: n_p,
                got: prev.p.len(),
            });
        }
        if self.cached.as_ref().is_none_or(|(t, _)| *t != tau) {
            self.cached = Some((tau, DirectSolver::new(self.matrix(tau)?)?));
        }
        let solver = &self.cached.as_ref().expect("cache filled above").1;
        let g_load = load_q(self.disc, g);
        let cp = self.forms.c.mul_vec(&prev.p);
        let mut rhs = vec![0.0; n_p + self.disc.spaces.w.n_dofs];
        for i in 0..n_p {
            rhs[i] = g_load[i] + cp[i] / tau;
        }
        let x = solver.solve(&rhs)?;
        Ok(HeatState {
            n,
            p: x[..n_p].to_vec(),
            w: x[n_p..].to_vec(),
        })
    }
}
