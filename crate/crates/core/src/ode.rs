//! Gragg-Bulirsch-Stoer extrapolation for fixed-size ODE systems.
//!
//! The adaptive driver records the accepted step mesh (step start, length
//! and extrapolation depth). Replaying that mesh for a nearby parameter
//! value gives a solution that depends smoothly on the parameter, and the
//! variational components integrated alongside are then exact derivatives
//! of the discrete solution.

use std::ops::{Add, Mul, Sub};

use crate::ddouble::Dd;

/// State arithmetic of the extrapolation scheme.
pub trait Scalar:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Mul<f64, Output = Self>
{
    /// Rounds a double-double to this type.
    fn from_dd(x: Dd) -> Self;
}

impl Scalar for f64 {
    fn from_dd(x: Dd) -> Self {
        x.to_f64()
    }
}

impl Scalar for Dd {
    fn from_dd(x: Dd) -> Self {
        x
    }
}

/// `y' = f(x, y)` with an `N`-component state.
pub trait OdeSystem<S: Scalar, const N: usize> {
    fn rhs(&self, x: f64, y: &[S; N], dy: &mut [S; N]);
}

/// Step-number sequence of the modified midpoint rule.
const SEQUENCE: [usize; 9] = [2, 4, 6, 8, 10, 12, 14, 16, 18];
const MIN_COLUMNS: usize = 3;
const MAX_COLUMNS: usize = SEQUENCE.len();

#[derive(Debug, Clone, Copy, PartialEq)]
struct Step {
    x: f64,
    h: f64,
    columns: usize,
}

/// Accepted steps of an adaptive run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepMesh {
    steps: Vec<Step>,
}

impl StepMesh {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Total right-hand-side evaluations a replay costs.
    pub fn cost(&self) -> usize {
        self.steps
            .iter()
            .map(|s| SEQUENCE[..s.columns].iter().map(|n| n + 1).sum::<usize>())
            .sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Extrapolator {
    /// Local error tolerance, mixed relative to the running magnitude of each component.
    pub tol: f64,
    pub max_steps: usize,
}

impl Extrapolator {
    pub fn new(tol: f64) -> Self {
        Extrapolator {
            tol,
            max_steps: 100_000,
        }
    }

    /// Integrates from `x0` to `x1` adaptively, returning the final state and the mesh used.
    pub fn integrate<S, const N: usize>(
        &self,
        sys: &S,
        x0: f64,
        y0: [f64; N],
        x1: f64,
    ) -> std::result::Result<([f64; N], StepMesh), f64>
    where
        S: OdeSystem<f64, N>,
    {
        let span = x1 - x0;
        let mut mesh = StepMesh::default();
        let mut x = x0;
        let mut y = y0;
        let mut h = span / 4.0;
        let mut scale = y0.map(f64::abs);
        let mut last = false;
        while !last {
            if mesh.steps.len() >= self.max_steps {
                return Err(x);
            }
            if x + h >= x1 || (x1 - (x + h)) < 1e-12 * span {
                h = x1 - x;
                last = true;
            }
            match self.try_step(sys, x, &y, h, &scale) {
                Ok((columns, y_new, err)) => {
                    mesh.steps.push(Step { x, h, columns });
                    for (s, v) in scale.iter_mut().zip(y_new.iter()) {
                        *s = s.max(v.abs());
                    }
                    y = y_new;
                    x += h;
                    let mut factor = if err == 0.0 {
                        4.0
                    } else {
                        (0.94 * (0.65 / err).powf(1.0 / (2 * columns - 1) as f64)).clamp(0.2, 4.0)
                    };
                    if columns >= MAX_COLUMNS - 1 {
                        factor = factor.min(1.0);
                    }
                    h *= factor;
                }
                Err(err) => {
                    last = false;
                    let factor = (0.94 * (0.65 / err).powf(1.0 / (2 * MAX_COLUMNS - 1) as f64))
                        .clamp(0.1, 0.7);
                    h *= factor;
                    if h.abs() < 1e-12 * span.abs() {
                        return Err(x);
                    }
                }
            }
        }
        Ok((y, mesh))
    }

    fn try_step<S, const N: usize>(
        &self,
        sys: &S,
        x: f64,
        y: &[f64; N],
        h: f64,
        scale: &[f64; N],
    ) -> std::result::Result<(usize, [f64; N], f64), f64>
    where
        S: OdeSystem<f64, N>,
    {
        let mut table: Vec<[f64; N]> = Vec::with_capacity(MAX_COLUMNS);
        let mut last_err = f64::INFINITY;
        for k in 0..MAX_COLUMNS {
            let previous = table.last().copied();
            extend_table(sys, x, y, h, k, &mut table);
            if let Some(prev_best) = previous {
                let best = table[k];
                let mut err: f64 = 0.0;
                for i in 0..N {
                    let sc = self.tol * scale[i].max(y[i].abs()).max(best[i].abs()).max(1e-300);
                    err = err.max((best[i] - prev_best[i]).abs() / sc);
                }
                last_err = err;
                if k + 1 >= MIN_COLUMNS && err <= 1.0 {
                    return Ok((k + 1, best, err));
                }
            }
        }
        Err(last_err)
    }
}

/// Adds column `k` to the extrapolation tableau, which holds the diagonal
/// row as `table[j]` = T(k, j) after the call.
fn extend_table<Sys, T, const N: usize>(
    sys: &Sys,
    x: f64,
    y: &[T; N],
    h: f64,
    k: usize,
    table: &mut Vec<[T; N]>,
) where
    Sys: OdeSystem<T, N>,
    T: Scalar,
{
    let mut current = modified_midpoint(sys, x, y, h, SEQUENCE[k]);
    // Neville recursion in h^2, updating the row in place.
    for j in 1..=k {
        let ratio = SEQUENCE[k] as f64 / SEQUENCE[k - j] as f64;
        let factor = 1.0 / (ratio * ratio - 1.0);
        let prev = table[j - 1];
        let mut next = current;
        for i in 0..N {
            next[i] = current[i] + (current[i] - prev[i]) * factor;
        }
        table[j - 1] = current;
        current = next;
    }
    table.push(current);
}

fn modified_midpoint<Sys, T, const N: usize>(sys: &Sys, x: f64, y: &[T; N], h: f64, n: usize) -> [T; N]
where
    Sys: OdeSystem<T, N>,
    T: Scalar,
{
    let hs = h / n as f64;
    let hs2 = 2.0 * hs;
    let mut f = [T::default(); N];
    sys.rhs(x, y, &mut f);
    let mut z0 = *y;
    let mut z1 = [T::default(); N];
    for i in 0..N {
        z1[i] = y[i] + f[i] * hs;
    }
    for m in 1..n {
        sys.rhs(x + m as f64 * hs, &z1, &mut f);
        let mut z2 = [T::default(); N];
        for i in 0..N {
            z2[i] = z0[i] + f[i] * hs2;
        }
        z0 = z1;
        z1 = z2;
    }
    sys.rhs(x + h, &z1, &mut f);
    let mut out = [T::default(); N];
    for i in 0..N {
        out[i] = (z0[i] + z1[i] + f[i] * hs) * 0.5;
    }
    out
}

/// Replays a recorded mesh. With `T = f64` the arithmetic is that of the
/// adaptive run that produced it.
pub fn integrate_on_mesh<Sys, T, const N: usize>(sys: &Sys, y0: [T; N], mesh: &StepMesh) -> [T; N]
where
    Sys: OdeSystem<T, N>,
    T: Scalar,
{
    let mut y = y0;
    let mut table: Vec<[T; N]> = Vec::with_capacity(MAX_COLUMNS);
    for step in &mesh.steps {
        table.clear();
        for k in 0..step.columns {
            extend_table(sys, step.x, &y, step.h, k, &mut table);
        }
        y = table[step.columns - 1];
    }
    y
}
