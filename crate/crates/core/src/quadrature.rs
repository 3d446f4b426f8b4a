//! Gauss-Legendre rules and the sine substitution used for gap integrals.
//!
//! On a gap `(z-, z+)` with midpoint `m` and half-width `r` we write
//! `z = m + r sin(theta)`, `theta in [-pi/2, pi/2]`. The Jacobian
//! `r cos(theta)` turns square-root endpoint zeros into smooth behaviour and
//! cancels inverse square-root endpoint singularities, so plain
//! Gauss-Legendre in `theta` converges geometrically for both kinds.

use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule on `[-1, 1]`; nodes ascending.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1e-3) {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
    }

    /// Angles `theta` and weights (including the `pi/2` scaling) on `[-pi/2, pi/2]`.
    pub fn theta_rule(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| (FRAC_PI_2 * x, FRAC_PI_2 * w))
    }
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `int_{z-}^{z+} f(z) dz` through the sine substitution.
pub fn sine_substitution(
    rule: &GaussLegendre,
    z_minus: f64,
    z_plus: f64,
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    let (mid, half) = (0.5 * (z_minus + z_plus), 0.5 * (z_plus - z_minus));
    rule.theta_rule()
        .map(|(theta, w)| {
            let (s, c) = theta.sin_cos();
            w * half * c * f(mid + half * s)
        })
        .sum()
}
