//! Assembly of the bilinear forms, load vectors, L2 projections and the
//! monolithic backward-Euler step system.
//!
//! Forms, with `sigma(u) = 2 mu eps(u) + lambda div(u) I`:
//!
//! * `a(u, v) = (sigma(u), eps(v))` on V x V
//! * `b(v, q) = (alpha div v, q)` on Q x V (rows Q)
//! * `c(p, q) = (beta p, q)` on Q x Q
//! * `d(z, q) = (div z, q)` on Q x W (rows Q)
//! * `e(w, z) = (K^{-1} w, z)` on W x W

use crate::elements::{LocalElement, Mat2, Spaces};
use crate::error::{Error, Result};
use crate::mesh::{EdgeGeometry, Point, TriMesh};
use crate::quadrature::{edge_rule_5, triangle_rule_25, LineRule, TriangleRule};
use crate::sparse::{DirectSolver, SparseMatrix, TripletList};

#[derive(Debug, Clone, PartialEq)]
pub enum Permeability {
    Constant(Mat2),
    PerElement(Vec<Mat2>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub permeability: Permeability,
}

fn inverse(m: &Mat2) -> Mat2 {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
fn sym_eigenvalues(m: &Mat2) -> (f64, f64) {
    let tr = m[0][0] + m[1][1];
    let diff = 0.5 * (m[0][0] - m[1][1]);
    let r = (diff * diff + m[0][1] * m[0][1]).sqrt();
    (0.5 * tr - r, 0.5 * tr + r)
}

impl Coefficients {
    /// `lambda = mu = 0.4`, `alpha = beta = 1`, `K = I`.
    pub fn benchmark() -> Self {
        Self {
            mu: 0.4,
            lambda: 0.4,
            alpha: 1.0,
            beta: 1.0,
            permeability: Permeability::Constant([[1.0, 0.0], [0.0, 1.0]]),
        }
    }

    pub fn validate(&self, n_triangles: usize) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::InvalidCoefficients(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidCoefficients(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidCoefficients(format!("beta must be positive, got {}", self.beta)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidCoefficients("alpha must be finite".into()));
        }
        let tensors: Vec<&Mat2> = match &self.permeability {
            Permeability::Constant(k) => vec![k],
            Permeability::PerElement(ks) => {
                if ks.len() != n_triangles {
                    return Err(Error::DimensionMismatch {
                        what: "permeability per element",
                        expected: n_triangles,
                        got: ks.len(),
                    });
                }
                ks.iter().collect()
            }
        };
        for k in tensors {
            if (k[0][1] - k[1][0]).abs() > 1e-14 * (k[0][1].abs() + 1.0) {
                return Err(Error::InvalidCoefficients("permeability must be symmetric".into()));
            }
            let (lo, _) = sym_eigenvalues(k);
            if !(lo > 0.0) {
                return Err(Error::InvalidCoefficients(format!("permeability not positive definite (min eigenvalue {lo})")));
            }
        }
        Ok(())
    }

    pub fn k_inv(&self, t: usize) -> Mat2 {
        match &self.permeability {
            Permeability::Constant(k) => inverse(k),
            Permeability::PerElement(ks) => inverse(&ks[t]),
        }
    }

    pub fn k(&self, t: usize) -> Mat2 {
        match &self.permeability {
            Permeability::Constant(k) => *k,
            Permeability::PerElement(ks) => ks[t],
        }
    }

    /// `sigma(grad)` for a displacement gradient `grad[r][c] = d u_r / d x_c`.
    pub fn stress(&self, g: &Mat2) -> Mat2 {
        let div = g[0][0] + g[1][1];
        let off = self.mu * (g[0][1] + g[1][0]);
        [
            [2.0 * self.mu * g[0][0] + self.lambda * div, off],
            [off, 2.0 * self.mu * g[1][1] + self.lambda * div],
        ]
    }

    /// `sigma(g1) : eps(g2)`
    pub fn energy_density(&self, g1: &Mat2, g2: &Mat2) -> f64 {
        let s = self.stress(g1);
        s[0][0] * g2[0][0] + s[1][1] * g2[1][1] + s[0][1] * (g2[0][1] + g2[1][0])
    }
}

/// Mesh, spaces and per-element data shared by every computation on one level.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: TriMesh,
    pub edges: Vec<EdgeGeometry>,
    pub spaces: Spaces,
    pub elements: Vec<LocalElement>,
    pub rule: TriangleRule,
    pub edge_rule: LineRule,
}

impl Discretization {
    pub fn new(mesh: TriMesh) -> Self {
        let edges = mesh.edge_geometries();
        let spaces = Spaces::new(&mesh);
        let elements = (0..mesh.n_triangles()).map(|t| LocalElement::new(&mesh, &edges, t)).collect();
        Self {
            mesh,
            edges,
            spaces,
            elements,
            rule: triangle_rule_25(),
            edge_rule: edge_rule_5(),
        }
    }

    pub fn n_triangles(&self) -> usize {
        self.mesh.n_triangles()
    }

    pub fn local_u(&self, t: usize, x_u: &[f64]) -> [f64; 9] {
        self.spaces.v_dofs(&self.mesh, t).map(|i| x_u[i])
    }

    pub fn local_w(&self, t: usize, x_w: &[f64]) -> [f64; 3] {
        self.spaces.w_dofs(&self.mesh, t).map(|i| x_w[i])
    }

    /// Integration weights `w_q * 2|K|` and physical points of element `t`.
    pub fn quad_points(&self, t: usize) -> impl Iterator<Item = ([f64; 3], Point, f64)> + '_ {
        let geo = &self.elements[t].geo;
        self.rule
            .points
            .iter()
            .zip(&self.rule.weights)
            .map(move |(b, w)| (*b, geo.point(b), w * 2.0 * geo.area))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    A,
    B,
    C,
    D,
    E,
}

pub fn assemble_form(form: Form, disc: &Discretization, coeffs: &Coefficients) -> Result<SparseMatrix> {
    coeffs.validate(disc.n_triangles())?;
    let sp = &disc.spaces;
    let mesh = &disc.mesh;
    let matrix = match form {
        Form::A => {
            let mut t = TripletList::new(sp.v.n_dofs, sp.v.n_dofs);
            for (k, el) in disc.elements.iter().enumerate() {
                let dofs = sp.v_dofs(mesh, k);
                let mut local = [[0.0; 9]; 9];
                for (b, _, w) in disc.quad_points(k) {
                    let g = el.v_shape_grad(&b);
                    for i in 0..9 {
                        let s = coeffs.stress(&g[i]);
                        for j in 0..9 {
                            let gj = &g[j];
                            local[i][j] += w * (s[0][0] * gj[0][0] + s[1][1] * gj[1][1] + s[0][1] * (gj[0][1] + gj[1][0]));
                        }
                    }
                }
                for i in 0..9 {
                    for j in 0..9 {
                        t.push(dofs[i], dofs[j], local[i][j]);
                    }
                }
            }
            t.build()
        }
        Form::B => {
            let mut t = TripletList::new(sp.q.n_dofs, sp.v.n_dofs);
            for (k, el) in disc.elements.iter().enumerate() {
                let dofs = sp.v_dofs(mesh, k);
                let mut local = [0.0; 9];
                for (b, _, w) in disc.quad_points(k) {
                    let g = el.v_shape_grad(&b);
                    for i in 0..9 {
                        local[i] += w * coeffs.alpha * (g[i][0][0] + g[i][1][1]);
                    }
                }
                for i in 0..9 {
                    t.push(k, dofs[i], local[i]);
                }
            }
            t.build()
        }
        Form::C => {
            let mut t = TripletList::new(sp.q.n_dofs, sp.q.n_dofs);
            for (k, el) in disc.elements.iter().enumerate() {
                t.push(k, k, coeffs.beta * el.geo.area);
            }
            t.build()
        }
        Form::D => {
            let mut t = TripletList::new(sp.q.n_dofs, sp.w.n_dofs);
            for (k, el) in disc.elements.iter().enumerate() {
                let dofs = sp.w_dofs(mesh, k);
                let div = el.w_div();
                for i in 0..3 {
                    t.push(k, dofs[i], div[i] * el.geo.area);
                }
            }
            t.build()
        }
        Form::E => weighted_w_mass(disc, |k| coeffs.k_inv(k)),
    };
    Ok(matrix)
}

fn weighted_w_mass(disc: &Discretization, weight: impl Fn(usize) -> Mat2) -> SparseMatrix {
    let sp = &disc.spaces;
    let mut t = TripletList::new(sp.w.n_dofs, sp.w.n_dofs);
    for (k, el) in disc.elements.iter().enumerate() {
        let dofs = sp.w_dofs(&disc.mesh, k);
        let m = weight(k);
        let mut local = [[0.0; 3]; 3];
        for (_, x, w) in disc.quad_points(k) {
            let psi = el.w_shape(x);
            for i in 0..3 {
                let mp = [m[0][0] * psi[i][0] + m[0][1] * psi[i][1], m[1][0] * psi[i][0] + m[1][1] * psi[i][1]];
                for j in 0..3 {
                    local[i][j] += w * (mp[0] * psi[j][0] + mp[1] * psi[j][1]);
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                t.push(dofs[i], dofs[j], local[i][j]);
            }
        }
    }
    t.build()
}

/// `(div z, div z')` on W x W.
pub fn assemble_div_gram(disc: &Discretization) -> SparseMatrix {
    let sp = &disc.spaces;
    let mut t = TripletList::new(sp.w.n_dofs, sp.w.n_dofs);
    for (k, el) in disc.elements.iter().enumerate() {
        let dofs = sp.w_dofs(&disc.mesh, k);
        let div = el.w_div();
        for i in 0..3 {
            for j in 0..3 {
                t.push(dofs[i], dofs[j], div[i] * div[j] * el.geo.area);
            }
        }
    }
    t.build()
}

pub fn assemble_v_mass(disc: &Discretization) -> SparseMatrix {
    let sp = &disc.spaces;
    let mut t = TripletList::new(sp.v.n_dofs, sp.v.n_dofs);
    for (k, el) in disc.elements.iter().enumerate() {
        let dofs = sp.v_dofs(&disc.mesh, k);
        let mut local = [[0.0; 9]; 9];
        for (b, _, w) in disc.quad_points(k) {
            let s = el.v_shape(&b);
            for i in 0..9 {
                for j in 0..9 {
                    local[i][j] += w * (s[i][0] * s[j][0] + s[i][1] * s[j][1]);
                }
            }
        }
        for i in 0..9 {
            for j in 0..9 {
                t.push(dofs[i], dofs[j], local[i][j]);
            }
        }
    }
    t.build()
}

pub fn assemble_w_mass(disc: &Discretization) -> SparseMatrix {
    weighted_w_mass(disc, |_| [[1.0, 0.0], [0.0, 1.0]])
}

/// `(f, phi_i)` for every V shape.
pub fn load_v(disc: &Discretization, f: impl Fn(Point) -> Point) -> Vec<f64> {
    let mut out = vec![0.0; disc.spaces.v.n_dofs];
    for (k, el) in disc.elements.iter().enumerate() {
        let dofs = disc.spaces.v_dofs(&disc.mesh, k);
        for (b, x, w) in disc.quad_points(k) {
            let fx = f(x);
            let s = el.v_shape(&b);
            for i in 0..9 {
                out[dofs[i]] += w * (fx[0] * s[i][0] + fx[1] * s[i][1]);
            }
        }
    }
    out
}

/// `(g, 1_K)` for every element.
pub fn load_q(disc: &Discretization, g: impl Fn(Point) -> f64) -> Vec<f64> {
    (0..disc.n_triangles())
        .map(|k| disc.quad_points(k).map(|(_, x, w)| w * g(x)).sum())
        .collect()
}

/// `(z, psi_i)` for every W shape.
pub fn load_w(disc: &Discretization, z: impl Fn(Point) -> Point) -> Vec<f64> {
    let mut out = vec![0.0; disc.spaces.w.n_dofs];
    for (k, el) in disc.elements.iter().enumerate() {
        let dofs = disc.spaces.w_dofs(&disc.mesh, k);
        for (_, x, w) in disc.quad_points(k) {
            let zx = z(x);
            let s = el.w_shape(x);
            for i in 0..3 {
                out[dofs[i]] += w * (zx[0] * s[i][0] + zx[1] * s[i][1]);
            }
        }
    }
    out
}

/// Keeps only the rows and columns flagged `true` in `keep`, returning the
/// reduced matrix and the map from reduced to full indices.
fn restrict(m: &SparseMatrix, keep: &[bool]) -> (SparseMatrix, Vec<usize>) {
    let map: Vec<usize> = (0..keep.len()).filter(|&i| keep[i]).collect();
    let mut inverse = vec![usize::MAX; keep.len()];
    for (r, &i) in map.iter().enumerate() {
        inverse[i] = r;
    }
    let mut t = TripletList::new(map.len(), map.len());
    for (r, c, v) in m.triplets() {
        if keep[r] && keep[c] {
            t.push(inverse[r], inverse[c], v);
        }
    }
    (t.build(), map)
}

/// Target space of the displacement-source projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VProjection {
    /// Full P1 + bubble space, boundary dofs included.
    #[default]
    Unconstrained,
    /// Subspace satisfying the homogeneous condition on `Gamma1`.
    Constrained,
}

/// L2 projections onto the three spaces, with cached mass factorizations.
pub struct Projector {
    v_solver: DirectSolver,
    v_map: Vec<usize>,
    w_solver: DirectSolver,
    n_v: usize,
}

impl std::fmt::Debug for Projector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Projector").field("n_v", &self.n_v).finish()
    }
}

impl Projector {
    pub fn new(disc: &Discretization, mode: VProjection) -> Result<Self> {
        let mass = assemble_v_mass(disc);
        let keep: Vec<bool> = match mode {
            VProjection::Unconstrained => vec![true; disc.spaces.v.n_dofs],
            VProjection::Constrained => disc.spaces.v.essential.iter().map(|e| !e).collect(),
        };
        let (reduced, v_map) = restrict(&mass, &keep);
        Ok(Self {
            v_solver: DirectSolver::new(reduced)?,
            v_map,
            w_solver: DirectSolver::new(assemble_w_mass(disc))?,
            n_v: disc.spaces.v.n_dofs,
        })
    }

    pub fn project_v(&self, disc: &Discretization, f: impl Fn(Point) -> Point) -> Result<Vec<f64>> {
        let load = load_v(disc, f);
        let b: Vec<f64> = self.v_map.iter().map(|&i| load[i]).collect();
        let x = self.v_solver.solve(&b)?;
        let mut out = vec![0.0; self.n_v];
        for (&i, v) in self.v_map.iter().zip(x) {
            out[i] = v;
        }
        Ok(out)
    }

    pub fn project_w(&self, disc: &Discretization, z: impl Fn(Point) -> Point) -> Result<Vec<f64>> {
        self.w_solver.solve(&load_w(disc, z))
    }
}

/// Element means, i.e. the L2 projection onto piecewise constants.
pub fn project_q(disc: &Discretization, g: impl Fn(Point) -> f64) -> Vec<f64> {
    load_q(disc, g)
        .into_iter()
        .zip(&disc.elements)
        .map(|(v, el)| v / el.geo.area)
        .collect()
}

/// Unconstrained matrices of every form plus the Gram matrices used for norms.
#[derive(Debug, Clone)]
pub struct FormMatrices {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub c: SparseMatrix,
    pub d: SparseMatrix,
    pub e: SparseMatrix,
    pub div_gram: SparseMatrix,
}

impl FormMatrices {
    pub fn assemble(disc: &Discretization, coeffs: &Coefficients) -> Result<Self> {
        Ok(Self {
            a: assemble_form(Form::A, disc, coeffs)?,
            b: assemble_form(Form::B, disc, coeffs)?,
            c: assemble_form(Form::C, disc, coeffs)?,
            d: assemble_form(Form::D, disc, coeffs)?,
            e: assemble_form(Form::E, disc, coeffs)?,
            div_gram: assemble_div_gram(disc),
        })
    }

    /// `||z||_W^2 = ||z||_e^2 + ||div z||^2`, or with the unsquared divergence
    /// term when `squared_div` is false.
    pub fn w_norm_sq(&self, z: &[f64], squared_div: bool) -> f64 {
        let div_sq = self.div_gram.quadratic_form(z).max(0.0);
        self.e.quadratic_form(z) + if squared_div { div_sq } else { div_sq.sqrt() }
    }
}

/// Offsets of the u, p, w blocks in the monolithic vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub n_u: usize,
    pub n_p: usize,
    pub n_w: usize,
}

impl BlockLayout {
    pub fn total(&self) -> usize {
        self.n_u + self.n_p + self.n_w
    }

    pub fn p_offset(&self) -> usize {
        self.n_u
    }

    pub fn w_offset(&self) -> usize {
        self.n_u + self.n_p
    }

    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let (u, rest) = x.split_at(self.n_u);
        let (p, w) = rest.split_at(self.n_p);
        (u, p, w)
    }
}

/// Monolithic matrix of one backward-Euler step in the unknowns (u, p, w):
///
/// ```text
/// [ A      -B^T   0 ] [u]   [ F                          ]
/// [ B/tau  C/tau  D ] [p] = [ G + (C p_prev + B u_prev)/tau ]
/// [ 0      -D^T   E ] [w]   [ 0                          ]
/// ```
///
/// Essential dofs are eliminated symmetrically (unit diagonal, zero row,
/// column and right-hand side).
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub matrix: SparseMatrix,
    pub tau: f64,
    pub layout: BlockLayout,
    pub essential: Vec<bool>,
}

pub fn build_step_system(disc: &Discretization, forms: &FormMatrices, tau: f64) -> Result<BlockSystem> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidTimeStep(tau));
    }
    let sp = &disc.spaces;
    let layout = BlockLayout {
        n_u: sp.v.n_dofs,
        n_p: sp.q.n_dofs,
        n_w: sp.w.n_dofs,
    };
    let (po, wo) = (layout.p_offset(), layout.w_offset());
    let mut essential = sp.v.essential.clone();
    essential.extend_from_slice(&sp.q.essential);
    essential.extend_from_slice(&sp.w.essential);

    let n = layout.total();
    let mut t = TripletList::new(n, n);
    let mut push = |r: usize, c: usize, v: f64| {
        if !essential[r] && !essential[c] {
            t.push(r, c, v);
        }
    };
    for (r, c, v) in forms.a.triplets() {
        push(r, c, v);
    }
    for (r, c, v) in forms.b.triplets() {
        push(c, po + r, -v);
        push(po + r, c, v / tau);
    }
    for (r, c, v) in forms.c.triplets() {
        push(po + r, po + c, v / tau);
    }
    for (r, c, v) in forms.d.triplets() {
        push(po + r, wo + c, v);
        push(wo + c, po + r, -v);
    }
    for (r, c, v) in forms.e.triplets() {
        push(wo + r, wo + c, v);
    }
    for (i, &ess) in essential.iter().enumerate() {
        if ess {
            t.push(i, i, 1.0);
        }
    }
    Ok(BlockSystem {
        matrix: t.build(),
        tau,
        layout,
        essential,
    })
}

impl BlockSystem {
    /// Right-hand side from the loads `(f^n, v)`, `(g^n, q)` and the previous
    /// displacement and pressure.
    pub fn rhs(&self, forms: &FormMatrices, f_load: &[f64], g_load: &[f64], u_prev: &[f64], p_prev: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let mut rhs = vec![0.0; l.total()];
        rhs[..l.n_u].copy_from_slice(f_load);
        let cp = forms.c.mul_vec(p_prev);
        let bu = forms.b.mul_vec(u_prev);
        for i in 0..l.n_p {
            rhs[l.p_offset() + i] = g_load[i] + (cp[i] + bu[i]) / self.tau;
        }
        for (r, &e) in rhs.iter_mut().zip(&self.essential) {
            if e {
                *r = 0.0;
            }
        }
        rhs
    }

    /// Matrix with the pressure rows scaled by `-tau` and the flux rows by
    /// `tau`, which is symmetric.
    pub fn symmetrized(&self) -> SparseMatrix {
        let l = &self.layout;
        let mut t = TripletList::new(l.total(), l.total());
        for (r, c, v) in self.matrix.triplets() {
            let s = if r < l.p_offset() || self.essential[r] {
                1.0
            } else if r < l.w_offset() {
                -self.tau
            } else {
                self.tau
            };
            t.push(r, c, s * v);
        }
        t.build()
    }

    pub fn factorize(&self) -> Result<DirectSolver> {
        DirectSolver::new(self.matrix.clone())
    }
}

/// Elasticity system `a(u, v) = (f, v)` with the essential dofs eliminated.
pub fn elasticity_system(disc: &Discretization, forms: &FormMatrices) -> SparseMatrix {
    let ess = &disc.spaces.v.essential;
    let mut t = TripletList::new(forms.a.nrows(), forms.a.ncols());
    for (r, c, v) in forms.a.triplets() {
        if !ess[r] && !ess[c] {
            t.push(r, c, v);
        }
    }
    for (i, &e) in ess.iter().enumerate() {
        if e {
            t.push(i, i, 1.0);
        }
    }
    t.build()
}
