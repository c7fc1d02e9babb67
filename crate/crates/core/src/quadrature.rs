//! Gauss rules on the unit interval and the reference triangle.

/// Rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Rule on the reference triangle `(0,0),(1,0),(0,1)`, points stored as
/// barycentric coordinates `(1 - x - y, x, y)`. Weights sum to 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl LineRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&s, &w)| w * f(s)).sum()
    }
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integral over the reference triangle of `f(x, y)`.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(b, &w)| w * f(b[1], b[2])).sum()
    }
}

/// Jacobi polynomial `P_n^{(a,b)}(x)` and `P_{n-1}^{(a,b)}(x)`.
fn jacobi_pair(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    if n == 0 {
        return (p_prev, 0.0);
    }
    let mut p = 0.5 * ((a + b + 2.0) * x + (a - b));
    for m in 2..=n {
        let m = m as f64;
        let c = 2.0 * m + a + b;
        let lhs = 2.0 * m * (m + a + b) * (c - 2.0);
        let next = ((c - 1.0) * (c * (c - 2.0) * x + a * a - b * b) * p - 2.0 * (m + a - 1.0) * (m + b - 1.0) * c * p_prev) / lhs;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Gauss-Jacobi nodes and weights on `[-1, 1]` for the weight
/// `(1 - x)^a (1 + x)^b`, nodes in increasing order.
pub fn gauss_jacobi(n: usize, a: u32, b: u32) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one point");
    let (af, bf) = (f64::from(a), f64::from(b));
    let nf = n as f64;
    let derivative = |x: f64| {
        let (p, pm) = jacobi_pair(n, af, bf, x);
        let c = 2.0 * nf + af + bf;
        let dp = (nf * ((af - bf) - c * x) * p + 2.0 * (nf + af) * (nf + bf) * pm) / (c * (1.0 - x * x));
        (p, dp)
    };
    let mut nodes: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = derivative(x);
            let deflation: f64 = nodes.iter().map(|&r| 1.0 / (x - r)).sum();
            let dx = p / (dp - p * deflation);
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
    }
    nodes.sort_by(|p, q| p.partial_cmp(q).expect("finite nodes"));
    let n32 = n as u32;
    let scale = factorial(n32 + a) * factorial(n32 + b) / (factorial(n32 + a + b) * factorial(n32)) * 2f64.powi((a + b + 1) as i32);
    let weights = nodes
        .iter()
        .map(|&x| {
            let (_, dp) = derivative(x);
            scale / ((1.0 - x * x) * dp * dp)
        })
        .collect();
    (nodes, weights)
}

/// n-point Gauss-Legendre rule mapped to `[0, 1]`.
pub fn gauss_legendre(n: usize) -> LineRule {
    let (x, w) = gauss_jacobi(n, 0, 0);
    LineRule {
        points: x.iter().map(|&x| 0.5 * (x + 1.0)).collect(),
        weights: w.iter().map(|&w| 0.5 * w).collect(),
        degree: 2 * n - 1,
    }
}

/// Collapsed `n x n` tensor Gauss rule on the reference triangle: the Duffy
/// map `(s, r) -> (s (1 - r), r)` with Gauss-Legendre in `s` and
/// Gauss-Jacobi for the factor `(1 - r)` in `r`.
pub fn collapsed_triangle(n: usize) -> TriangleRule {
    let s_rule = gauss_legendre(n);
    let (rx, rw) = gauss_jacobi(n, 1, 0);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&x, &wr) in rx.iter().zip(&rw) {
        let r = 0.5 * (x + 1.0);
        // (1 - x)/2 = 1 - r and dx = 2 dr
        let wr = 0.25 * wr;
        for (&s, &ws) in s_rule.points.iter().zip(&s_rule.weights) {
            let px = s * (1.0 - r);
            let py = r;
            points.push([1.0 - px - py, px, py]);
            weights.push(ws * wr);
        }
    }
    TriangleRule {
        points,
        weights,
        degree: 2 * n - 1,
    }
}

/// 25-point element rule, exact for degree 9.
pub fn triangle_rule_25() -> TriangleRule {
    collapsed_triangle(5)
}

/// 5-point Gauss-Legendre on `[0, 1]` for edges.
pub fn edge_rule_5() -> LineRule {
    gauss_legendre(5)
}

/// 5-point Gauss-Legendre on `[0, 1]` for time intervals.
pub fn time_rule_5() -> LineRule {
    gauss_legendre(5)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial_u(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact integral of x^m y^n over the reference triangle.
    fn monomial(m: u32, n: u32) -> f64 {
        factorial_u(m) * factorial_u(n) / factorial_u(m + n + 2)
    }

    #[test]
    fn triangle_rule_basics() {
        let r = triangle_rule_25();
        assert_eq!(r.len(), 25);
        assert!(r.weights.iter().all(|&w| w > 0.0));
        assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
        for b in &r.points {
            assert!(b.iter().all(|&l| l > 0.0 && l < 1.0));
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        assert!((r.integrate(|x, y| x.powi(4) * y.powi(4)) - 1.0 / 6300.0).abs() < 1e-18);
        assert!((r.integrate(|x, _| x.powi(9)) - 1.0 / 110.0).abs() < 1e-16);
    }

    #[test]
    fn triangle_rule_exact_to_degree_nine() {
        let r = triangle_rule_25();
        for m in 0..=9 {
            for n in 0..=(9 - m) {
                let exact = monomial(m, n);
                let got = r.integrate(|x, y| x.powi(m as i32) * y.powi(n as i32));
                assert!(((got - exact) / exact).abs() < 1e-13, "x^{m} y^{n}: {got} vs {exact}");
            }
        }
        // degree 10 is not integrated exactly
        let got = r.integrate(|x, _| x.powi(10));
        assert!((got - monomial(10, 0)).abs() > 1e-12);
    }

    #[test]
    fn line_rules() {
        for r in [edge_rule_5(), time_rule_5()] {
            assert!((r.integrate(|_| 1.0) - 1.0).abs() < 1e-15);
            assert!((r.integrate(|s| s.powi(9)) - 0.1).abs() < 1e-15);
            assert!((r.integrate(|s| s * s * (1.0 - s) * (1.0 - s)) - 1.0 / 30.0).abs() < 1e-16);
            for d in 0..=9 {
                let exact = 1.0 / (d as f64 + 1.0);
                assert!(((r.integrate(|s| s.powi(d)) - exact) / exact).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn jacobi_weights_integrate_weight_function() {
        let (x, w) = gauss_jacobi(5, 1, 0);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // int (1-x) x^2 dx over [-1,1] = 2/3
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((got - 2.0 / 3.0).abs() < 1e-14);
    }
}
