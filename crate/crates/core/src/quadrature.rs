//! Quadrature rules on the reference edge `[0, 1]` and the reference
//! triangle `{(x, y) : x, y >= 0, x + y <= 1}`.
//!
//! Edge rules are Gauss-Legendre, computed by Newton iteration on the
//! Legendre recurrence. Triangle rules come from the Duffy (collapsed
//! square) transform `x = s (1 - t), y = t`, whose Jacobian `(1 - t)`
//! is absorbed into the weights: a tensor rule with `ns` x `nt` points
//! integrates every monomial of total degree `<= min(2 ns - 1, 2 nt - 2)`
//! exactly. Rules are deterministic: same request, bitwise-same rule.

use crate::error::{Error, Result};

/// Largest polynomial degree `triangle_rule` accepts.
pub const MAX_TRIANGLE_DEGREE: usize = 20;
/// Largest point count `edge_rule` accepts.
pub const MAX_EDGE_POINTS: usize = 10;

/// Gauss-Legendre rule on the reference edge `[0, 1]`.
///
/// `n` points integrate polynomials of degree `<= 2n - 1` exactly.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Quadrature rule on the reference triangle.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Every polynomial of total degree `<= degree` is integrated exactly.
    pub degree: usize,
}

impl EdgeRule {
    /// Integrate `f` over `[0, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

impl TriangleRule {
    /// Integrate `f` over the reference triangle.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&[x, y], &w)| w * f(x, y))
            .sum()
    }
}

/// Legendre polynomial `P_n` and its derivative at `x` (interior `x` only).
fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let nf = n as f64;
    let dp = nf * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending nodes.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess; enumerates roots from the right.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p, d) = legendre_with_deriv(n, x);
                dp = d;
                x -= p / d;
                break;
            }
        }
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Gauss-Legendre nodes and weights mapped to `[0, 1]`.
fn unit_gauss(npoints: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(npoints);
    (
        x.iter().map(|&xi| 0.5 * (xi + 1.0)).collect(),
        w.iter().map(|&wi| 0.5 * wi).collect(),
    )
}

/// Gauss-Legendre rule with `npoints` points on `[0, 1]`.
///
/// Exact for polynomials of degree `<= 2 * npoints - 1`.
pub fn edge_rule(npoints: usize) -> Result<EdgeRule> {
    if !(1..=MAX_EDGE_POINTS).contains(&npoints) {
        return Err(Error::UnsupportedDegree {
            what: "edge rule point count",
            requested: npoints,
            min: 1,
            max: MAX_EDGE_POINTS,
        });
    }
    let (points, weights) = unit_gauss(npoints);
    Ok(EdgeRule { points, weights })
}

/// Triangle rule exact for all polynomials of total degree `<= min_degree`.
///
/// `min_degree = 1` returns the one-point centroid rule; higher degrees use
/// the Duffy construction. Supported range: `1..=MAX_TRIANGLE_DEGREE`.
pub fn triangle_rule(min_degree: usize) -> Result<TriangleRule> {
    if !(1..=MAX_TRIANGLE_DEGREE).contains(&min_degree) {
        return Err(Error::UnsupportedDegree {
            what: "triangle rule degree",
            requested: min_degree,
            min: 1,
            max: MAX_TRIANGLE_DEGREE,
        });
    }
    if min_degree == 1 {
        return Ok(TriangleRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
            degree: 1,
        });
    }
    // x = s (1 - t), y = t maps the unit square to the triangle with
    // Jacobian (1 - t). A monomial x^a y^b pulls back to
    // s^a * t^b (1 - t)^(a + 1), so exactness for total degree d needs
    // 2 ns - 1 >= d in s and 2 nt - 1 >= d + 1 in t.
    let ns = (min_degree + 1).div_ceil(2);
    let nt = (min_degree + 2).div_ceil(2);
    let (s_points, s_weights) = unit_gauss(ns);
    let (t_points, t_weights) = unit_gauss(nt);
    let mut points = Vec::with_capacity(ns * nt);
    let mut weights = Vec::with_capacity(ns * nt);
    for (&t, &wt) in t_points.iter().zip(&t_weights) {
        for (&s, &ws) in s_points.iter().zip(&s_weights) {
            points.push([s * (1.0 - t), t]);
            weights.push(ws * wt * (1.0 - t));
        }
    }
    Ok(TriangleRule {
        points,
        weights,
        degree: min_degree,
    })
}

/// Shifted Legendre polynomial `L_q` on `[0, 1]`: `L_q(t) = P_q(2t - 1)`.
///
/// Satisfies `L_q(1 - t) = (-1)^q L_q(t)` and
/// `int_0^1 L_a L_b dt = delta_ab / (2a + 1)`.
pub fn shifted_legendre(q: usize, t: f64) -> f64 {
    let x = 2.0 * t - 1.0;
    if q == 0 {
        return 1.0;
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..q {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of `x^a y^b` over the reference triangle:
    /// `a! b! / (a + b + 2)!`, written via the binomial coefficient.
    fn monomial_moment(a: usize, b: usize) -> f64 {
        let mut binom = 1.0; // C(a + b, a)
        for k in 0..a {
            binom = binom * ((a + b - k) as f64) / ((a - k) as f64);
        }
        1.0 / (binom * ((a + b + 1) as f64) * ((a + b + 2) as f64))
    }

    #[test]
    fn centroid_rule_for_degree_one() {
        let rule = triangle_rule(1).unwrap();
        assert_eq!(rule.points.len(), 1);
        assert_eq!(rule.points[0], [1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(rule.weights[0], 0.5);
        // Degree-1 exactness: int x = 1/6.
        assert!((rule.integrate(|x, _| x) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn degree_four_rule_integrates_x2y2() {
        let rule = triangle_rule(4).unwrap();
        let exact = 1.0 / 180.0;
        assert!((rule.integrate(|x, y| x * x * y * y) - exact).abs() < 1e-13 * exact.max(1.0));
    }

    #[test]
    fn triangle_rules_exact_for_advertised_degrees() {
        for d in 1..=MAX_TRIANGLE_DEGREE {
            let rule = triangle_rule(d).unwrap();
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 0.5).abs() < 1e-14, "degree {d}: weight sum {wsum}");
            for (&[x, y], &w) in rule.points.iter().zip(&rule.weights) {
                assert!(w > 0.0);
                assert!(x >= 0.0 && y >= 0.0 && x + y <= 1.0 + 1e-14);
            }
            for a in 0..=d {
                for b in 0..=(d - a) {
                    let num = rule.integrate(|x, y| x.powi(a as i32) * y.powi(b as i32));
                    let exact = monomial_moment(a, b);
                    assert!(
                        (num - exact).abs() <= 1e-13 * exact,
                        "degree {d}, monomial x^{a} y^{b}: got {num}, want {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn edge_rule_one_point_is_midpoint() {
        let rule = edge_rule(1).unwrap();
        assert_eq!(rule.points, vec![0.5]);
        assert_eq!(rule.weights, vec![1.0]);
    }

    #[test]
    fn edge_rule_two_points_integrates_cubics() {
        let rule = edge_rule(2).unwrap();
        assert!((rule.integrate(|t| t * t * t) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn edge_rule_four_points_integrates_t6() {
        let rule = edge_rule(4).unwrap();
        assert!((rule.integrate(|t| t.powi(6)) - 1.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn edge_rules_exact_for_advertised_degrees() {
        for n in 1..=MAX_EDGE_POINTS {
            let rule = edge_rule(n).unwrap();
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for i in 1..n {
                assert!(rule.points[i] > rule.points[i - 1], "nodes must ascend");
            }
            assert!(rule.points[0] > 0.0 && rule.points[n - 1] < 1.0);
            for k in 0..=(2 * n - 1) {
                let num = rule.integrate(|t| t.powi(k as i32));
                let exact = 1.0 / ((k + 1) as f64);
                assert!(
                    (num - exact).abs() <= 1e-13 * exact,
                    "n={n}, t^{k}: got {num}, want {exact}"
                );
            }
        }
    }

    #[test]
    fn out_of_range_requests_are_rejected() {
        assert!(triangle_rule(0).is_err());
        assert!(triangle_rule(MAX_TRIANGLE_DEGREE + 1).is_err());
        assert!(edge_rule(0).is_err());
        assert!(edge_rule(MAX_EDGE_POINTS + 1).is_err());
    }

    #[test]
    fn shifted_legendre_low_orders() {
        assert_eq!(shifted_legendre(0, 0.3), 1.0);
        assert!((shifted_legendre(1, 0.3) - (-0.4)).abs() < 1e-15);
        // P_2(x) = (3 x^2 - 1) / 2 at x = -0.4.
        assert!((shifted_legendre(2, 0.3) - (-0.26)).abs() < 1e-15);
    }

    #[test]
    fn shifted_legendre_reflection_parity() {
        for q in 0..=6 {
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            for &t in &[0.0, 0.12, 0.37, 0.5, 0.81, 1.0] {
                let lhs = shifted_legendre(q, 1.0 - t);
                let rhs = sign * shifted_legendre(q, t);
                assert!((lhs - rhs).abs() < 1e-13, "q={q}, t={t}");
            }
        }
    }

    #[test]
    fn shifted_legendre_orthogonality() {
        let rule = edge_rule(8).unwrap();
        for a in 0..=5 {
            for b in 0..=5 {
                let num = rule.integrate(|t| shifted_legendre(a, t) * shifted_legendre(b, t));
                let exact = if a == b {
                    1.0 / (2.0 * a as f64 + 1.0)
                } else {
                    0.0
                };
                assert!(
                    (num - exact).abs() < 1e-14,
                    "a={a}, b={b}: {num} vs {exact}"
                );
            }
        }
    }
}
