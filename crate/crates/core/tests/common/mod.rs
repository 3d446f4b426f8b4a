//! Reference computations sharing no numerical code with the library.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

/// `q(x) = sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x)`.
#[derive(Debug, Clone)]
pub struct Trig {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Trig {
    pub fn new(cos: &[f64], sin: &[f64]) -> Self {
        Trig {
            cos: cos.to_vec(),
            sin: sin.to_vec(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .map(|(k, (a, b))| {
                let w = 2.0 * PI * (k + 1) as f64 * x;
                a * w.cos() + b * w.sin()
            })
            .sum()
    }

    /// Fourier coefficient of `e^{2 pi i k x}`.
    pub fn fourier(&self, k: i64) -> Complex64 {
        let m = k.unsigned_abs() as usize;
        if m == 0 || m > self.cos.len() {
            return Complex64::new(0.0, 0.0);
        }
        let (a, b) = (self.cos[m - 1], self.sin[m - 1]);
        let s = if k > 0 { -1.0 } else { 1.0 };
        Complex64::new(0.5 * a, 0.5 * s * b)
    }

    pub fn modes(&self) -> usize {
        self.cos.len()
    }
}

/// Classical RK4 for the fundamental solutions of `-y'' + (q - lambda) y = 0`
/// on `[0, 1]`, Richardson-extrapolated over steps `h` and `h/2`.
/// Returns `(c(1), c'(1), s(1), s'(1))`.
pub fn rk4_monodromy(q: &Trig, lambda: f64, steps: usize) -> [f64; 4] {
    let coarse = rk4_fixed(q, lambda, steps);
    let fine = rk4_fixed(q, lambda, 2 * steps);
    std::array::from_fn(|i| (16.0 * fine[i] - coarse[i]) / 15.0)
}

fn rk4_fixed(q: &Trig, lambda: f64, steps: usize) -> [f64; 4] {
    let h = 1.0 / steps as f64;
    let f = |x: f64, y: [f64; 4]| {
        let p = q.eval(x) - lambda;
        [y[1], p * y[0], y[3], p * y[2]]
    };
    let mut y = [1.0, 0.0, 0.0, 1.0];
    for i in 0..steps {
        let x = i as f64 * h;
        let k1 = f(x, y);
        let k2 = f(x + 0.5 * h, std::array::from_fn(|j| y[j] + 0.5 * h * k1[j]));
        let k3 = f(x + 0.5 * h, std::array::from_fn(|j| y[j] + 0.5 * h * k2[j]));
        let k4 = f(x + h, std::array::from_fn(|j| y[j] + h * k3[j]));
        y = std::array::from_fn(|j| y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]));
    }
    y
}

/// Steps giving roughly 1e-11 accuracy for moderate `lambda`.
pub fn oracle_steps(lambda: f64) -> usize {
    (400.0 * (1.0 + lambda.abs().sqrt() / 4.0)) as usize
}

pub fn oracle_delta(q: &Trig, lambda: f64) -> f64 {
    let m = rk4_monodromy(q, lambda, oracle_steps(lambda));
    0.5 * (m[0] + m[3])
}

/// `Delta` of the zero potential: `cos sqrt(lambda)`, continued by `cosh`.
pub fn free_delta(lambda: f64) -> f64 {
    if lambda >= 0.0 {
        lambda.sqrt().cos()
    } else {
        (-lambda).sqrt().cosh()
    }
}

/// Eigenvalues of `-d^2/dx^2 + q` on `e^{i(2 pi k + theta) x}`, `|k| <= k_max`.
pub fn fourier_eigenvalues(q: &Trig, theta: f64, k_max: usize) -> Vec<f64> {
    let dim = 2 * k_max + 1;
    let freq = |j: usize| 2.0 * PI * (j as f64 - k_max as f64) + theta;
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            let mut v = q.fourier(r as i64 - c as i64);
            if r == c {
                v += freq(r) * freq(r);
            }
            h[(r, c)] = v;
        }
    }
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Band edges `(lambda0, [(lambda_n^-, lambda_n^+)])` from the periodic
/// (`theta = 0`) and antiperiodic (`theta = pi`) Fourier matrices.
pub fn fourier_edges(q: &Trig, n_gaps: usize, k_max: usize) -> (f64, Vec<(f64, f64)>) {
    let per = fourier_eigenvalues(q, 0.0, k_max);
    let anti = fourier_eigenvalues(q, PI, k_max);
    let mut edges = Vec::with_capacity(n_gaps);
    for n in 1..=n_gaps {
        let pair = if n % 2 == 0 {
            (per[n - 1], per[n])
        } else {
            (anti[n - 1], anti[n])
        };
        edges.push(pair);
    }
    (per[0], edges)
}

/// Golden-section maximizer of `f` on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    let mut kronrod = K15_WEIGHTS[7] * f(m);
    let mut gauss = G7_WEIGHTS[3] * f(m);
    for i in 0..7 {
        let (lo, hi) = (f(m - r * GK_NODES[i]), f(m + r * GK_NODES[i]));
        kronrod += K15_WEIGHTS[i] * (lo + hi);
        if i % 2 == 1 {
            gauss += G7_WEIGHTS[i / 2] * (lo + hi);
        }
    }
    (kronrod * r, ((kronrod - gauss) * r).abs())
}

/// Globally adaptive Gauss-Kronrod (7, 15) quadrature: bisects the panel
/// with the largest error estimate until the total estimate drops below
/// `rel_tol` times the integral or 400 panels are in use.
pub fn adaptive_gk(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let (val, err) = gk15(&f, a, b);
    let mut panels = vec![(a, b, val, err)];
    while panels.len() < 400 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= rel_tol * total.abs() {
            break;
        }
        let worst = (0..panels.len()).max_by(|&i, &j| panels[i].3.total_cmp(&panels[j].3)).unwrap();
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        for (x, y) in [(lo, mid), (mid, hi)] {
            let (v, e) = gk15(&f, x, y);
            panels.push((x, y, v, e));
        }
    }
    panels.sort_by(|p, q| p.0.total_cmp(&q.0));
    panels.iter().map(|p| p.2).sum()
}
