//! Conforming triangulations of the unit square with edge topology.
//!
//! Local edge `i` of a triangle is the edge opposite local vertex `i`, i.e.
//! the segment `v[(i + 1) % 3] -> v[(i + 2) % 3]` when traversed
//! counterclockwise. Global edges are stored lower vertex index first.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Interior,
    /// Clamped displacement, no-flux Darcy velocity.
    Gamma1,
    /// Traction-free, zero pressure.
    Gamma2,
}

impl BoundaryTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryTag::Interior => "interior",
            BoundaryTag::Gamma1 => "gamma1",
            BoundaryTag::Gamma2 => "gamma2",
        }
    }
}

/// Adjacent triangles of an edge. For interior edges `first < second` and
/// the normal points from `first` into `second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeTris {
    pub first: usize,
    pub second: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGeometry {
    pub length: f64,
    pub normal: Point,
    pub tangent: Point,
    pub midpoint: Point,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub vertices: [Point; 3],
    pub area: f64,
    /// `sqrt(area)`.
    pub size: f64,
    /// Columns are `z1 - z0` and `z2 - z0`; maps the reference triangle
    /// `(0,0),(1,0),(0,1)` onto the element.
    pub jacobian: [[f64; 2]; 2],
    /// Constant gradients of the barycentric coordinates.
    pub grad_lambda: [Point; 3],
}

impl ElementGeometry {
    pub fn new(vertices: [Point; 3]) -> Option<Self> {
        let [z0, z1, z2] = vertices;
        let j = [[z1[0] - z0[0], z2[0] - z0[0]], [z1[1] - z0[1], z2[1] - z0[1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det <= 0.0 || !det.is_finite() {
            return None;
        }
        let area = 0.5 * det;
        // Rows of J^{-1} are the gradients of lambda_1, lambda_2.
        let g1 = [j[1][1] / det, -j[0][1] / det];
        let g2 = [-j[1][0] / det, j[0][0] / det];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        Some(Self {
            vertices,
            area,
            size: area.sqrt(),
            jacobian: j,
            grad_lambda: [g0, g1, g2],
        })
    }

    /// Physical point for barycentric coordinates.
    pub fn point(&self, bary: &[f64; 3]) -> Point {
        let [z0, z1, z2] = self.vertices;
        [
            bary[0] * z0[0] + bary[1] * z1[0] + bary[2] * z2[0],
            bary[0] * z0[1] + bary[1] * z1[1] + bary[2] * z2[1],
        ]
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, x: Point) -> [f64; 3] {
        let z0 = self.vertices[0];
        let d = [x[0] - z0[0], x[1] - z0[1]];
        let l1 = self.grad_lambda[1][0] * d[0] + self.grad_lambda[1][1] * d[1];
        let l2 = self.grad_lambda[2][0] * d[0] + self.grad_lambda[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    tri_edges: Vec<[(usize, i8); 3]>,
    edge_tris: Vec<EdgeTris>,
    boundary_tag: Vec<BoundaryTag>,
}

impl TriMesh {
    /// Builds the edge topology from vertices and counterclockwise triangles.
    /// `classify` assigns a tag to every boundary edge given its endpoints.
    pub fn from_triangles<F>(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, classify: F) -> Result<Self>
    where
        F: Fn(Point, Point) -> BoundaryTag,
    {
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "vertex",
                        index: v,
                        len: vertices.len(),
                    });
                }
            }
            let tri_vertices = tri.map(|v| vertices[v]);
            let [a, b, c] = tri_vertices;
            let signed = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
            if signed <= 0.0 {
                return Err(Error::DegenerateTriangle(t, signed));
            }
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut adjacency: Vec<Vec<usize>> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [(0usize, 0i8); 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    adjacency.push(Vec::new());
                    edges.len() - 1
                });
                adjacency[e].push(t);
                *slot = (e, if a < b { 1 } else { -1 });
            }
            tri_edges.push(local);
        }

        let mut edge_tris = Vec::with_capacity(edges.len());
        let mut boundary_tag = Vec::with_capacity(edges.len());
        for (e, adj) in adjacency.iter().enumerate() {
            match adj.as_slice() {
                [t] => {
                    edge_tris.push(EdgeTris { first: *t, second: None });
                    let [a, b] = edges[e];
                    let tag = classify(vertices[a], vertices[b]);
                    boundary_tag.push(if tag == BoundaryTag::Interior {
                        BoundaryTag::Gamma1
                    } else {
                        tag
                    });
                }
                [t0, t1] => {
                    edge_tris.push(EdgeTris {
                        first: (*t0).min(*t1),
                        second: Some((*t0).max(*t1)),
                    });
                    boundary_tag.push(BoundaryTag::Interior);
                }
                _ => {
                    return Err(Error::Config(format!(
                        "non-manifold edge {e} shared by {} triangles",
                        adj.len()
                    )))
                }
            }
        }

        Ok(Self {
            vertices,
            triangles,
            edges,
            tri_edges,
            edge_tris,
            boundary_tag,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn tri_edges(&self) -> &[[(usize, i8); 3]] {
        &self.tri_edges
    }

    pub fn edge_tris(&self) -> &[EdgeTris] {
        &self.edge_tris
    }

    pub fn boundary_tags(&self) -> &[BoundaryTag] {
        &self.boundary_tag
    }

    pub fn boundary_tag(&self, e: usize) -> BoundaryTag {
        self.boundary_tag[e]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn element(&self, t: usize) -> ElementGeometry {
        let tri = self.triangles[t];
        ElementGeometry::new(tri.map(|v| self.vertices[v])).expect("triangles are validated at construction")
    }

    /// +1 if the normal of edge `e` points out of triangle `t`, -1 if it points in.
    pub fn outward_sign(&self, t: usize, e: usize) -> f64 {
        if self.edge_tris[e].first == t {
            1.0
        } else {
            -1.0
        }
    }

    pub fn edge_geometry(&self, e: usize) -> Result<EdgeGeometry> {
        if e >= self.edges.len() {
            return Err(Error::IndexOutOfRange {
                what: "edge",
                index: e,
                len: self.edges.len(),
            });
        }
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let d = [pb[0] - pa[0], pb[1] - pa[1]];
        let length = d[0].hypot(d[1]);
        let tangent = [d[0] / length, d[1] / length];
        let first = self.edge_tris[e].first;
        let sign = self.tri_edges[first]
            .iter()
            .find(|(edge, _)| *edge == e)
            .map(|(_, s)| f64::from(*s))
            .expect("edge adjacency is consistent");
        // (t_y, -t_x) is outward for a triangle traversing the edge along t.
        let normal = [sign * tangent[1], -sign * tangent[0]];
        Ok(EdgeGeometry {
            length,
            normal,
            tangent,
            midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
        })
    }

    pub fn edge_geometries(&self) -> Vec<EdgeGeometry> {
        (0..self.n_edges())
            .map(|e| self.edge_geometry(e).expect("index in range"))
            .collect()
    }

    /// Jump of a one-sided trace on a boundary edge: zero on `Gamma1`, the
    /// trace itself on `Gamma2`.
    pub fn boundary_jump(&self, e: usize, trace: f64) -> Result<f64> {
        if e >= self.edges.len() {
            return Err(Error::IndexOutOfRange {
                what: "edge",
                index: e,
                len: self.edges.len(),
            });
        }
        match self.boundary_tag[e] {
            BoundaryTag::Interior => Err(Error::InteriorEdge(e)),
            BoundaryTag::Gamma1 => Ok(0.0),
            BoundaryTag::Gamma2 => Ok(trace),
        }
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.element(t).area).sum()
    }

    /// Plain-text export: `v x y`, `t i j k`, `e i j tag` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "t {} {} {}", t[0], t[1], t[2]);
        }
        for (e, [a, b]) in self.edges.iter().enumerate() {
            let _ = writeln!(out, "e {} {} {}", a, b, self.boundary_tag[e].as_str());
        }
        out
    }
}

/// Orientation of the diagonal that splits each grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    /// Lower-left to upper-right.
    Rising,
    /// Upper-left to lower-right.
    #[default]
    Falling,
}

impl Diagonal {
    pub fn as_str(&self) -> &'static str {
        match self {
            Diagonal::Rising => "rising",
            Diagonal::Falling => "falling",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rising" => Ok(Diagonal::Rising),
            "falling" => Ok(Diagonal::Falling),
            _ => Err(Error::Config(format!("unknown diagonal '{s}'"))),
        }
    }
}

/// Uniform `2^k x 2^k` grid of the unit square split along the default
/// diagonal, all boundary edges on `Gamma1`.
pub fn uniform_unit_square(k: i64) -> Result<TriMesh> {
    structured_unit_square(k, Diagonal::default(), |_, _| BoundaryTag::Gamma1)
}

pub fn uniform_unit_square_with<F>(k: i64, classify: F) -> Result<TriMesh>
where
    F: Fn(Point, Point) -> BoundaryTag,
{
    structured_unit_square(k, Diagonal::default(), classify)
}

pub fn structured_unit_square<F>(k: i64, diagonal: Diagonal, classify: F) -> Result<TriMesh>
where
    F: Fn(Point, Point) -> BoundaryTag,
{
    if !(1..=12).contains(&k) {
        return Err(Error::InvalidLevel(k));
    }
    let n = 1usize << k;
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| i + j * (n + 1);
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            match diagonal {
                Diagonal::Rising => {
                    triangles.push([v00, v10, v11]);
                    triangles.push([v00, v11, v01]);
                }
                Diagonal::Falling => {
                    triangles.push([v00, v10, v01]);
                    triangles.push([v10, v11, v01]);
                }
            }
        }
    }
    TriMesh::from_triangles(vertices, triangles, classify)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_euler() {
        for (k, v, t, e) in [(1, 9, 8, 16), (2, 25, 32, 56)] {
            let m = uniform_unit_square(k).unwrap();
            assert_eq!((m.n_vertices(), m.n_triangles(), m.n_edges()), (v, t, e));
            assert_eq!(v as i64 - e as i64 + t as i64, 1);
        }
        assert_eq!(uniform_unit_square(4).unwrap().n_triangles(), 512);
    }

    #[test]
    fn both_diagonals_are_valid() {
        for d in [Diagonal::Rising, Diagonal::Falling] {
            let m = structured_unit_square(2, d, |_, _| BoundaryTag::Gamma1).unwrap();
            assert_eq!((m.n_vertices(), m.n_triangles(), m.n_edges()), (25, 32, 56));
            assert!((m.total_area() - 1.0).abs() < 1e-14);
            for &[a, b] in m.edges() {
                let (p, q) = (m.vertices()[a], m.vertices()[b]);
                let slope = (q[0] - p[0]) * (q[1] - p[1]);
                if slope != 0.0 {
                    assert_eq!(slope > 0.0, d == Diagonal::Rising);
                }
            }
            assert_eq!(Diagonal::parse(d.as_str()).unwrap(), d);
        }
        assert!(Diagonal::parse("cross").is_err());
    }

    #[test]
    fn rejects_bad_level() {
        assert!(matches!(uniform_unit_square(0), Err(Error::InvalidLevel(0))));
        assert!(uniform_unit_square(-3).is_err());
    }

    #[test]
    fn adjacency_and_orientation() {
        for k in 1..=4 {
            let m = uniform_unit_square(k).unwrap();
            assert!((m.total_area() - 1.0).abs() < 1e-12);
            assert_eq!(4 * m.n_triangles(), uniform_unit_square(k + 1).unwrap().n_triangles());
            for (e, adj) in m.edge_tris().iter().enumerate() {
                let [a, b] = m.edges()[e];
                assert!(a < b);
                for t in std::iter::once(adj.first).chain(adj.second) {
                    let tri = m.triangles()[t];
                    assert!(tri.contains(&a) && tri.contains(&b));
                }
                assert_eq!(adj.second.is_none(), m.boundary_tag(e) != BoundaryTag::Interior);
            }
            for (t, tri) in m.triangles().iter().enumerate() {
                for (i, &(e, s)) in m.tri_edges()[t].iter().enumerate() {
                    let [a, b] = m.edges()[e];
                    let (from, to) = if s > 0 { (a, b) } else { (b, a) };
                    assert_eq!((from, to), (tri[(i + 1) % 3], tri[(i + 2) % 3]));
                }
            }
        }
    }

    #[test]
    fn boundary_edges_cover_the_square() {
        let m = uniform_unit_square(3).unwrap();
        let mut perimeter = 0.0;
        for e in 0..m.n_edges() {
            let g = m.edge_geometry(e).unwrap();
            if m.boundary_tag(e) != BoundaryTag::Interior {
                let [x, y] = g.midpoint;
                let on_boundary = x.abs() < 1e-14 || y.abs() < 1e-14 || (x - 1.0).abs() < 1e-14 || (y - 1.0).abs() < 1e-14;
                assert!(on_boundary);
                perimeter += g.length;
            }
        }
        assert!((perimeter - 4.0).abs() < 1e-12);
    }

    #[test]
    fn edge_normals() {
        let k = 2;
        let m = uniform_unit_square(k).unwrap();
        for e in 0..m.n_edges() {
            let g = m.edge_geometry(e).unwrap();
            assert!((g.normal[0].hypot(g.normal[1]) - 1.0).abs() < 1e-15);
            assert!((g.normal[0] * g.tangent[0] + g.normal[1] * g.tangent[1]).abs() < 1e-15);
            let [x, y] = g.midpoint;
            if y == 0.0 {
                assert_eq!(g.normal, [0.0, -1.0]);
            }
            if x == 1.0 {
                assert_eq!(g.normal, [1.0, 0.0]);
            }
            // Normal points away from the centroid of the first triangle.
            let c = m.element(m.edge_tris()[e].first).point(&[1.0 / 3.0; 3]);
            let d = [x - c[0], y - c[1]];
            assert!(d[0] * g.normal[0] + d[1] * g.normal[1] > 0.0);
            let [a, b] = m.edges()[e];
            let (pa, pb) = (m.vertices()[a], m.vertices()[b]);
            if (pb[0] - pa[0]).abs() > 0.0 && (pb[1] - pa[1]).abs() > 0.0 {
                assert!((g.length - 2f64.sqrt() * 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn jump_convention() {
        let m = uniform_unit_square_with(1, |a, b| {
            if a[0] == 0.0 && b[0] == 0.0 {
                BoundaryTag::Gamma2
            } else {
                BoundaryTag::Gamma1
            }
        })
        .unwrap();
        let mut seen = (false, false, false);
        for e in 0..m.n_edges() {
            match m.boundary_tag(e) {
                BoundaryTag::Gamma1 => {
                    assert_eq!(m.boundary_jump(e, 3.7).unwrap(), 0.0);
                    seen.0 = true;
                }
                BoundaryTag::Gamma2 => {
                    assert_eq!(m.boundary_jump(e, 3.7).unwrap(), 3.7);
                    seen.1 = true;
                }
                BoundaryTag::Interior => {
                    assert!(matches!(m.boundary_jump(e, 3.7), Err(Error::InteriorEdge(_))));
                    seen.2 = true;
                }
            }
        }
        assert_eq!(seen, (true, true, true));
    }

    #[test]
    fn barycentric_round_trip() {
        let g = ElementGeometry::new([[0.1, 0.2], [0.9, 0.3], [0.4, 0.8]]).unwrap();
        let b = [0.2, 0.5, 0.3];
        let back = g.barycentric(g.point(&b));
        for i in 0..3 {
            assert!((back[i] - b[i]).abs() < 1e-14);
        }
        assert!(ElementGeometry::new([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_none());
    }

    #[test]
    fn text_export() {
        let m = uniform_unit_square(1).unwrap();
        let s = m.to_text();
        assert_eq!(s.lines().filter(|l| l.starts_with("v ")).count(), 9);
        assert_eq!(s.lines().filter(|l| l.starts_with("t ")).count(), 8);
        assert_eq!(s.lines().filter(|l| l.starts_with("e ")).count(), 16);
        assert!(s.contains("e 0 1 gamma1"));
    }
}
