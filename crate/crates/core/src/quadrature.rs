//! Gauss-Legendre rules on (−1, 1).

use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `order`-point rule, nodes ascending. Newton iteration on the
    /// three-term recurrence from the Chebyshev-like initial guesses.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let m = order;
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..m.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(m, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=m {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if m == 0 {
        return (1.0, 0.0);
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for m in [1, 2, 5, 20, 80, 160, 400] {
            let gl = GaussLegendre::new(m);
            let s: f64 = gl.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "m={m}: {s}");
            assert!(gl.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2m_minus_1() {
        let gl = GaussLegendre::new(6);
        for deg in 0..12 {
            let got = gl.integrate(|x| x.powi(deg));
            let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((got - want).abs() < 1e-14, "deg {deg}: {got} vs {want}");
        }
    }

    #[test]
    fn two_point_rule() {
        let gl = GaussLegendre::new(2);
        let x = 1.0 / 3f64.sqrt();
        assert!((gl.nodes[1] - x).abs() < 1e-15);
        assert!((gl.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_integrand_converges() {
        let gl = GaussLegendre::new(40);
        let got = gl.integrate(|x| (3.0 * x).cos());
        let want = 2.0 * 3f64.sin() / 3.0;
        assert!((got - want).abs() < 1e-14);
    }
}
