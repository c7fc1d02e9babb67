//! Independent dense-quadrature evaluation of the spatial indicators.
//!
//! Nothing here calls the library's quadrature, shape functions or edge
//! geometry. Only raw mesh data (vertex coordinates, triangle and edge
//! vertex lists, boundary tags) and coefficient values are read.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::HashMap;

use biot_apost::assembly::Coefficients;
use biot_apost::mesh::{BoundaryTag, TriMesh};

type P = [f64; 2];
type M = [[f64; 2]; 2];

/// Gauss-Legendre nodes and weights on `[0, 1]` by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=n {
                let m = m as f64;
                let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = 0.5 * (1.0 - x);
        ws[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

#[derive(Clone, Copy)]
struct Tri {
    z: [P; 3],
    area: f64,
    grad: [P; 3],
}

impl Tri {
    fn new(z: [P; 3]) -> Self {
        let det = (z[1][0] - z[0][0]) * (z[2][1] - z[0][1]) - (z[2][0] - z[0][0]) * (z[1][1] - z[0][1]);
        // grad lambda_i is the inward edge normal scaled by |e_i| / (2|K|)
        let grad = std::array::from_fn(|i| {
            let a = z[(i + 1) % 3];
            let b = z[(i + 2) % 3];
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det]
        });
        Self { z, area: 0.5 * det, grad }
    }

    fn lambda(&self, x: P) -> [f64; 3] {
        std::array::from_fn(|i| {
            let a = self.z[(i + 1) % 3];
            self.grad[i][0] * (x[0] - a[0]) + self.grad[i][1] * (x[1] - a[1])
        })
    }
}

/// Value, gradient and per-component Hessians of a displacement field.
struct UJet {
    grad: M,
    hess: [M; 2],
}

pub struct Oracle<'a> {
    mesh: &'a TriMesh,
    coeffs: Coefficients,
    tris: Vec<Tri>,
    /// Global edge id of the segment opposite each local vertex.
    local_edges: Vec<[usize; 3]>,
    normals: Vec<P>,
    sides: Vec<(usize, Option<usize>)>,
    line: (Vec<f64>, Vec<f64>),
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl<'a> Oracle<'a> {
    pub fn new(mesh: &'a TriMesh, coeffs: Coefficients) -> Self {
        let verts = mesh.vertices();
        let index: HashMap<(usize, usize), usize> = mesh.edges().iter().enumerate().map(|(e, &[a, b])| (key(a, b), e)).collect();
        let tris: Vec<Tri> = mesh.triangles().iter().map(|t| Tri::new(t.map(|v| verts[v]))).collect();
        let mut sides: Vec<(usize, Option<usize>)> = vec![(usize::MAX, None); mesh.n_edges()];
        let mut local_edges = Vec::with_capacity(tris.len());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let le: [usize; 3] = std::array::from_fn(|i| index[&key(tri[(i + 1) % 3], tri[(i + 2) % 3])]);
            for &e in &le {
                if sides[e].0 == usize::MAX {
                    sides[e].0 = t;
                } else {
                    sides[e].1 = Some(t);
                }
            }
            local_edges.push(le);
        }
        let normals = mesh
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &[a, b])| {
                let (pa, pb) = (verts[a], verts[b]);
                let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
                let n = [(pb[1] - pa[1]) / len, (pa[0] - pb[0]) / len];
                let c = centroid(&tris[sides[e].0]);
                let away = (pa[0] - c[0]) * n[0] + (pa[1] - c[1]) * n[1];
                if away > 0.0 {
                    n
                } else {
                    [-n[0], -n[1]]
                }
            })
            .collect();
        Self {
            mesh,
            coeffs,
            tris,
            local_edges,
            normals,
            sides,
            line: gauss_legendre(8),
        }
    }

    /// Integral of `f` over triangle `t` by a collapsed tensor Gauss rule.
    fn integrate(&self, t: usize, f: impl Fn(P) -> f64) -> f64 {
        let tri = &self.tris[t];
        let (xs, ws) = &self.line;
        let mut s = 0.0;
        for (&a, &wa) in xs.iter().zip(ws) {
            for (&b, &wb) in xs.iter().zip(ws) {
                let l1 = a;
                let l2 = (1.0 - a) * b;
                let l0 = 1.0 - l1 - l2;
                let x = [
                    l0 * tri.z[0][0] + l1 * tri.z[1][0] + l2 * tri.z[2][0],
                    l0 * tri.z[0][1] + l1 * tri.z[1][1] + l2 * tri.z[2][1],
                ];
                s += wa * wb * (1.0 - a) * f(x);
            }
        }
        2.0 * tri.area * s
    }

    fn edge_points(&self, e: usize) -> Vec<(P, f64)> {
        let [a, b] = self.mesh.edges()[e];
        let (pa, pb) = (self.mesh.vertices()[a], self.mesh.vertices()[b]);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let (xs, ws) = &self.line;
        xs.iter()
            .zip(ws)
            .map(|(&s, &w)| ([pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])], w * len))
            .collect()
    }

    /// Squared edge norm of the jump of a vector-valued trace.
    fn jump_sq(&self, e: usize, trace: impl Fn(usize, P) -> Vec<f64>) -> f64 {
        let (first, second) = self.sides[e];
        if second.is_none() && self.mesh.boundary_tag(e) == BoundaryTag::Gamma1 {
            return 0.0;
        }
        self.edge_points(e)
            .into_iter()
            .map(|(x, w)| {
                let mut j = trace(first, x);
                if let Some(s) = second {
                    for (a, b) in j.iter_mut().zip(trace(s, x)) {
                        *a -= b;
                    }
                }
                w * j.iter().map(|v| v * v).sum::<f64>()
            })
            .sum()
    }

    fn u_jet(&self, t: usize, u: &[f64], x: P) -> (P, UJet) {
        let tri = &self.tris[t];
        let lam = tri.lambda(x);
        let verts = self.mesh.triangles()[t];
        let nv = self.mesh.n_vertices();
        let mut val = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        let mut hess = [[[0.0; 2]; 2]; 2];
        for i in 0..3 {
            for c in 0..2 {
                let coef = u[2 * verts[i] + c];
                val[c] += coef * lam[i];
                grad[c][0] += coef * tri.grad[i][0];
                grad[c][1] += coef * tri.grad[i][1];
            }
            let e = self.local_edges[t][i];
            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
            let coef = u[2 * nv + e];
            let n = self.normals[e];
            let (ga, gb) = (tri.grad[a], tri.grad[b]);
            let phi = lam[a] * lam[b];
            let dphi = [lam[a] * gb[0] + lam[b] * ga[0], lam[a] * gb[1] + lam[b] * ga[1]];
            for c in 0..2 {
                val[c] += coef * phi * n[c];
                for r in 0..2 {
                    grad[c][r] += coef * n[c] * dphi[r];
                    for s in 0..2 {
                        hess[c][r][s] += coef * n[c] * (ga[r] * gb[s] + gb[r] * ga[s]);
                    }
                }
            }
        }
        (val, UJet { grad, hess })
    }

    fn stress(&self, g: &M) -> M {
        let (mu, la) = (self.coeffs.mu, self.coeffs.lambda);
        let tr = g[0][0] + g[1][1];
        std::array::from_fn(|i| std::array::from_fn(|j| mu * (g[i][j] + g[j][i]) + if i == j { la * tr } else { 0.0 }))
    }

    fn div_stress(&self, jet: &UJet) -> P {
        let (mu, la) = (self.coeffs.mu, self.coeffs.lambda);
        // d_j sigma_ij = mu (d_jj u_i + d_ij u_j) + lambda d_i d_j u_j
        std::array::from_fn(|i| {
            (0..2)
                .map(|j| mu * (jet.hess[i][j][j] + jet.hess[j][i][j]) + la * jet.hess[j][i][j])
                .sum()
        })
    }

    fn w_field(&self, t: usize, w: &[f64], x: P) -> (P, M) {
        let tri = &self.tris[t];
        let mut val = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        for i in 0..3 {
            let e = self.local_edges[t][i];
            let sign = if self.sides[e].0 == t { 1.0 } else { -1.0 };
            let s = sign * w[e] / (2.0 * tri.area);
            val[0] += s * (x[0] - tri.z[i][0]);
            val[1] += s * (x[1] - tri.z[i][1]);
            grad[0][0] += s;
            grad[1][1] += s;
        }
        (val, grad)
    }

    fn k_inv(&self, t: usize) -> M {
        let k = self.coeffs.k(t);
        let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
        [[k[1][1] / det, -k[0][1] / det], [-k[1][0] / det, k[0][0] / det]]
    }

    pub fn e1(&self, u: &[f64], p: &[f64], f_h: &[f64]) -> Vec<f64> {
        let alpha = self.coeffs.alpha;
        let traction = |t: usize, x: P, n: P| -> Vec<f64> {
            let (_, jet) = self.u_jet(t, u, x);
            let s = self.stress(&jet.grad);
            (0..2)
                .map(|i| s[i][0] * n[0] + s[i][1] * n[1] - alpha * p[t] * n[i])
                .collect()
        };
        let jumps: Vec<f64> = (0..self.mesh.n_edges())
            .map(|e| self.jump_sq(e, |t, x| traction(t, x, self.normals[e])))
            .collect();
        (0..self.tris.len())
            .map(|t| {
                let h2 = self.tris[t].area;
                let vol = self.integrate(t, |x| {
                    let (_, jet) = self.u_jet(t, u, x);
                    let (f, _) = self.u_jet(t, f_h, x);
                    let d = self.div_stress(&jet);
                    (f[0] + d[0]).powi(2) + (f[1] + d[1]).powi(2)
                });
                h2 * vol + h2.sqrt() * self.local_edges[t].iter().map(|&e| jumps[e]).sum::<f64>()
            })
            .collect()
    }

    pub fn e2(&self, du: &[f64], dp: &[f64], w: &[f64], g_h: &[f64], with_alpha: bool) -> Vec<f64> {
        let a = if with_alpha { self.coeffs.alpha } else { 1.0 };
        let beta = self.coeffs.beta;
        (0..self.tris.len())
            .map(|t| {
                self.integrate(t, |x| {
                    let (_, jet) = self.u_jet(t, du, x);
                    let (_, dw) = self.w_field(t, w, x);
                    let r = g_h[t] - beta * dp[t] - a * (jet.grad[0][0] + jet.grad[1][1]) - (dw[0][0] + dw[1][1]);
                    r * r
                })
            })
            .collect()
    }

    pub fn e3(&self, p: &[f64], w: &[f64]) -> Vec<f64> {
        let kw = |t: usize, x: P| -> P {
            let m = self.k_inv(t);
            let (v, _) = self.w_field(t, w, x);
            [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
        };
        let jumps: Vec<f64> = (0..self.mesh.n_edges())
            .map(|e| {
                let n = self.normals[e];
                self.jump_sq(e, |t, x| {
                    let v = kw(t, x);
                    vec![-v[0] * n[1] + v[1] * n[0], p[t]]
                })
            })
            .collect();
        (0..self.tris.len())
            .map(|t| {
                let h2 = self.tris[t].area;
                let m = self.k_inv(t);
                let (_, dw) = self.w_field(t, w, [0.0, 0.0]);
                // rot v = d_x v_1 - d_y v_0 for v = M w
                let d = |r: usize, c: usize| m[r][0] * dw[0][c] + m[r][1] * dw[1][c];
                let rot = d(1, 0) - d(0, 1);
                let vol = self.integrate(t, |x| {
                    let v = kw(t, x);
                    v[0] * v[0] + v[1] * v[1] + rot * rot
                });
                h2 * vol + h2.sqrt() * self.local_edges[t].iter().map(|&e| jumps[e]).sum::<f64>()
            })
            .collect()
    }

    /// `(||u||_a^2, ||p||_c^2, ||w||_e^2, ||div w||^2)` by quadrature.
    pub fn norms(&self, u: &[f64], p: &[f64], w: &[f64]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for t in 0..self.tris.len() {
            let m = self.k_inv(t);
            out[0] += self.integrate(t, |x| {
                let (_, jet) = self.u_jet(t, u, x);
                let s = self.stress(&jet.grad);
                let g = jet.grad;
                s[0][0] * g[0][0] + s[1][1] * g[1][1] + s[0][1] * (g[0][1] + g[1][0])
            });
            out[1] += self.coeffs.beta * p[t] * p[t] * self.tris[t].area;
            out[2] += self.integrate(t, |x| {
                let (v, _) = self.w_field(t, w, x);
                v[0] * (m[0][0] * v[0] + m[0][1] * v[1]) + v[1] * (m[1][0] * v[0] + m[1][1] * v[1])
            });
            let (_, dw) = self.w_field(t, w, [0.0, 0.0]);
            out[3] += (dw[0][0] + dw[1][1]).powi(2) * self.tris[t].area;
        }
        out
    }
}

fn centroid(t: &Tri) -> P {
    [(t.z[0][0] + t.z[1][0] + t.z[2][0]) / 3.0, (t.z[0][1] + t.z[1][1] + t.z[2][1]) / 3.0]
}

/// Worst elementwise relative gap, with entries below `1e-6` of the largest
/// measured against that floor.
pub fn max_rel_gap(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1e-6 * scale).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}
