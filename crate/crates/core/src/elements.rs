//! Degree-of-freedom layouts and shape functions for the displacement
//! space (vector P1 plus edge bubbles), the pressure space (P0) and the
//! flux space (lowest-order Raviart-Thomas).
//!
//! Local V shape ordering on a triangle: `2 * i + c` is the hat of vertex
//! `i` in direction `c`, `6 + i` is the bubble `lambda_a lambda_b n_F` of the
//! local edge `i` (opposite vertex `i`). Global V numbering is `2 * v + c`
//! for vertices followed by `2 * n_vertices + e` for edge bubbles.

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, EdgeGeometry, ElementGeometry, Point, TriMesh};
use crate::quadrature::TriangleRule;

pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    V,
    Q,
    W,
}

#[derive(Debug, Clone)]
pub struct DofLayout {
    pub kind: SpaceKind,
    pub n_dofs: usize,
    /// Dofs carrying a homogeneous essential condition.
    pub essential: Vec<bool>,
}

impl DofLayout {
    pub fn n_free(&self) -> usize {
        self.essential.iter().filter(|&&e| !e).count()
    }
}

/// The three discrete spaces on one mesh.
#[derive(Debug, Clone)]
pub struct Spaces {
    pub v: DofLayout,
    pub q: DofLayout,
    pub w: DofLayout,
    n_vertices: usize,
}

impl Spaces {
    pub fn new(mesh: &TriMesh) -> Self {
        let nv = mesh.n_vertices();
        let ne = mesh.n_edges();
        let mut v_ess = vec![false; 2 * nv + ne];
        let mut w_ess = vec![false; ne];
        for (e, [a, b]) in mesh.edges().iter().enumerate() {
            if mesh.boundary_tag(e) == BoundaryTag::Gamma1 {
                for vtx in [*a, *b] {
                    v_ess[2 * vtx] = true;
                    v_ess[2 * vtx + 1] = true;
                }
                v_ess[2 * nv + e] = true;
                w_ess[e] = true;
            }
        }
        Self {
            v: DofLayout {
                kind: SpaceKind::V,
                n_dofs: 2 * nv + ne,
                essential: v_ess,
            },
            q: DofLayout {
                kind: SpaceKind::Q,
                n_dofs: mesh.n_triangles(),
                essential: vec![false; mesh.n_triangles()],
            },
            w: DofLayout {
                kind: SpaceKind::W,
                n_dofs: ne,
                essential: w_ess,
            },
            n_vertices: nv,
        }
    }

    pub fn v_dofs(&self, mesh: &TriMesh, t: usize) -> [usize; 9] {
        let tri = mesh.triangles()[t];
        let te = mesh.tri_edges()[t];
        let nv = self.n_vertices;
        [
            2 * tri[0],
            2 * tri[0] + 1,
            2 * tri[1],
            2 * tri[1] + 1,
            2 * tri[2],
            2 * tri[2] + 1,
            2 * nv + te[0].0,
            2 * nv + te[1].0,
            2 * nv + te[2].0,
        ]
    }

    pub fn w_dofs(&self, mesh: &TriMesh, t: usize) -> [usize; 3] {
        mesh.tri_edges()[t].map(|(e, _)| e)
    }

    pub fn total(&self) -> usize {
        self.v.n_dofs + self.q.n_dofs + self.w.n_dofs
    }
}

/// Geometry and orientation data needed to evaluate shape functions on one
/// triangle.
#[derive(Debug, Clone, Copy)]
pub struct LocalElement {
    pub geo: ElementGeometry,
    /// Global normal `n_F` of each local edge.
    pub normals: [Point; 3],
    /// +1 where `n_F` is outward for this triangle.
    pub rt_signs: [f64; 3],
}

impl LocalElement {
    pub fn new(mesh: &TriMesh, edges: &[EdgeGeometry], t: usize) -> Self {
        let te = mesh.tri_edges()[t];
        Self {
            geo: mesh.element(t),
            normals: te.map(|(e, _)| edges[e].normal),
            rt_signs: te.map(|(e, _)| mesh.outward_sign(t, e)),
        }
    }

    /// Standalone element from raw data, rejecting degenerate triangles.
    pub fn from_parts(vertices: [Point; 3], normals: [Point; 3], rt_signs: [f64; 3]) -> Result<Self> {
        let geo = ElementGeometry::new(vertices).ok_or_else(|| {
            let [a, b, c] = vertices;
            Error::DegenerateTriangle(0, 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])))
        })?;
        Ok(Self { geo, normals, rt_signs })
    }

    /// Element with outward normals on every edge.
    pub fn with_outward_normals(vertices: [Point; 3]) -> Result<Self> {
        let mut normals = [[0.0; 2]; 3];
        for (i, n) in normals.iter_mut().enumerate() {
            let a = vertices[(i + 1) % 3];
            let b = vertices[(i + 2) % 3];
            let d = [b[0] - a[0], b[1] - a[1]];
            let l = d[0].hypot(d[1]);
            *n = [d[1] / l, -d[0] / l];
        }
        Self::from_parts(vertices, normals, [1.0; 3])
    }

    fn edge_vertices(i: usize) -> (usize, usize) {
        ((i + 1) % 3, (i + 2) % 3)
    }

    pub fn v_shape(&self, bary: &[f64; 3]) -> [Point; 9] {
        let mut out = [[0.0; 2]; 9];
        for i in 0..3 {
            out[2 * i] = [bary[i], 0.0];
            out[2 * i + 1] = [0.0, bary[i]];
            let (a, b) = Self::edge_vertices(i);
            let phi = bary[a] * bary[b];
            out[6 + i] = [phi * self.normals[i][0], phi * self.normals[i][1]];
        }
        out
    }

    /// `grad[r][c] = d v_r / d x_c` for each shape.
    pub fn v_shape_grad(&self, bary: &[f64; 3]) -> [Mat2; 9] {
        let g = &self.geo.grad_lambda;
        let mut out = [[[0.0; 2]; 2]; 9];
        for i in 0..3 {
            out[2 * i][0] = g[i];
            out[2 * i + 1][1] = g[i];
            let (a, b) = Self::edge_vertices(i);
            let dphi = [bary[a] * g[b][0] + bary[b] * g[a][0], bary[a] * g[b][1] + bary[b] * g[a][1]];
            let n = self.normals[i];
            out[6 + i] = [[n[0] * dphi[0], n[0] * dphi[1]], [n[1] * dphi[0], n[1] * dphi[1]]];
        }
        out
    }

    /// `div sigma(v)` for each shape; constant on the element and zero for the
    /// linear shapes.
    pub fn v_shape_div_sigma(&self, mu: f64, lambda: f64) -> [Point; 9] {
        let g = &self.geo.grad_lambda;
        let mut out = [[0.0; 2]; 9];
        for i in 0..3 {
            let (a, b) = Self::edge_vertices(i);
            let (ga, gb) = (g[a], g[b]);
            let laplace = 2.0 * (ga[0] * gb[0] + ga[1] * gb[1]);
            let hess = [
                [2.0 * ga[0] * gb[0], ga[0] * gb[1] + ga[1] * gb[0]],
                [ga[0] * gb[1] + ga[1] * gb[0], 2.0 * ga[1] * gb[1]],
            ];
            let n = self.normals[i];
            let hn = [hess[0][0] * n[0] + hess[0][1] * n[1], hess[1][0] * n[0] + hess[1][1] * n[1]];
            out[6 + i] = [
                mu * laplace * n[0] + (mu + lambda) * hn[0],
                mu * laplace * n[1] + (mu + lambda) * hn[1],
            ];
        }
        out
    }

    /// Raviart-Thomas shapes `s_i (x - z_i) / (2|K|)` with unit flux through
    /// local edge `i` along its global normal.
    pub fn w_shape(&self, x: Point) -> [Point; 3] {
        let scale = 0.5 / self.geo.area;
        let z = &self.geo.vertices;
        std::array::from_fn(|i| {
            let s = self.rt_signs[i] * scale;
            [s * (x[0] - z[i][0]), s * (x[1] - z[i][1])]
        })
    }

    pub fn w_div(&self) -> [f64; 3] {
        self.rt_signs.map(|s| s / self.geo.area)
    }

    pub fn u_value(&self, coeffs: &[f64; 9], bary: &[f64; 3]) -> Point {
        let shapes = self.v_shape(bary);
        let mut out = [0.0; 2];
        for (c, s) in coeffs.iter().zip(&shapes) {
            out[0] += c * s[0];
            out[1] += c * s[1];
        }
        out
    }

    pub fn u_grad(&self, coeffs: &[f64; 9], bary: &[f64; 3]) -> Mat2 {
        let grads = self.v_shape_grad(bary);
        let mut out = [[0.0; 2]; 2];
        for (c, g) in coeffs.iter().zip(&grads) {
            for r in 0..2 {
                for s in 0..2 {
                    out[r][s] += c * g[r][s];
                }
            }
        }
        out
    }

    pub fn w_value(&self, coeffs: &[f64; 3], x: Point) -> Point {
        let shapes = self.w_shape(x);
        let mut out = [0.0; 2];
        for (c, s) in coeffs.iter().zip(&shapes) {
            out[0] += c * s[0];
            out[1] += c * s[1];
        }
        out
    }

    pub fn w_divergence(&self, coeffs: &[f64; 3]) -> f64 {
        coeffs.iter().zip(self.w_div()).map(|(c, d)| c * d).sum()
    }
}

/// Shape function values (and gradients where defined) at every point of a
/// rule, plus physical points and integration weights `w_q * 2|K|`.
#[derive(Debug, Clone)]
pub struct BasisEval {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub values: Vec<Vec<Point>>,
    pub grads: Vec<Vec<Mat2>>,
    pub divs: Vec<f64>,
}

fn physical_points(geo: &ElementGeometry, rule: &TriangleRule) -> (Vec<Point>, Vec<f64>) {
    let points = rule.points.iter().map(|b| geo.point(b)).collect();
    let weights = rule.weights.iter().map(|w| w * 2.0 * geo.area).collect();
    (points, weights)
}

pub fn eval_v_basis(el: &LocalElement, rule: &TriangleRule) -> BasisEval {
    let (points, weights) = physical_points(&el.geo, rule);
    BasisEval {
        points,
        weights,
        values: rule.points.iter().map(|b| el.v_shape(b).to_vec()).collect(),
        grads: rule.points.iter().map(|b| el.v_shape_grad(b).to_vec()).collect(),
        divs: Vec::new(),
    }
}

pub fn eval_w_basis(el: &LocalElement, rule: &TriangleRule) -> BasisEval {
    let (points, weights) = physical_points(&el.geo, rule);
    let values = points.iter().map(|&x| el.w_shape(x).to_vec()).collect();
    BasisEval {
        points,
        weights,
        values,
        grads: Vec::new(),
        divs: el.w_div().to_vec(),
    }
}

pub fn eval_q_basis(geo: &ElementGeometry, rule: &TriangleRule) -> BasisEval {
    let (points, weights) = physical_points(geo, rule);
    let n = points.len();
    BasisEval {
        points,
        weights,
        values: vec![vec![[1.0, 0.0]]; n],
        grads: vec![vec![[[0.0; 2]; 2]]; n],
        divs: Vec::new(),
    }
}
