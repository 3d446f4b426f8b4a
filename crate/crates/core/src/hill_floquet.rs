//! Floquet discriminant of `-y'' + q y = lambda y` and the band/gap spectrum.
//!
//! The discriminant `Delta(lambda) = (theta(1) + phi'(1)) / 2` comes from the
//! fundamental solutions `theta(0) = phi'(0) = 1`, `theta'(0) = phi(0) = 0`,
//! integrated together with their `lambda`-derivatives. Band edges are
//! refined on the Wronskian form
//!
//! ```text
//! Delta^2 - 1 = (theta - phi')^2 / 4 + theta' phi
//! ```
//!
//! which has the same zeros as `Delta -+ 1` but no cancellation near
//! nearly-closed gaps. Seeds and an independent check come from the Fourier
//! truncation of the operator (the Hill matrix).
//!
//! After refinement every `lambda` is shifted by `q0 = -mu0`, `mu0` the
//! lowest periodic eigenvalue, so that the spectrum starts at `0` and
//! `z = sqrt(lambda)` is the momentum variable.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddouble::Dd;
use crate::error::{Result, SpectralError};
use crate::ode::{integrate_on_mesh, Extrapolator, OdeSystem, Scalar, StepMesh};
use crate::potential::Potential;
use crate::roots::brent;

const INITIAL: [f64; 8] = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];

/// `-y'' + q y = lambda y` for both fundamental solutions and their `lambda`-derivatives.
///
/// State: `[theta, theta', phi, phi', d_theta, d_theta', d_phi, d_phi']`.
struct HillSystem<'a> {
    q: &'a Potential,
    lambda: Dd,
}

impl<T: Scalar> OdeSystem<T, 8> for HillSystem<'_> {
    fn rhs(&self, x: f64, y: &[T; 8], dy: &mut [T; 8]) {
        let c = T::from_dd(Dd::difference(self.q.eval(x), self.lambda.hi) - Dd::new(self.lambda.lo));
        dy[0] = y[1];
        dy[1] = c * y[0];
        dy[2] = y[3];
        dy[3] = c * y[2];
        dy[4] = y[5];
        dy[5] = c * y[4] - y[0];
        dy[6] = y[7];
        dy[7] = c * y[6] - y[2];
    }
}

/// Fundamental matrix at `x = 1` and its `lambda`-derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monodromy {
    pub state: [f64; 8],
    /// `Delta^2 - 1` and its `lambda`-derivative, formed before rounding the state.
    disc: f64,
    ddisc: f64,
}

/// `(theta - phi')^2 / 4 + theta' phi` and its `lambda`-derivative.
fn wronskian_form<T: Scalar>(s: &[T; 8]) -> (T, T) {
    let half_diff = (s[0] - s[3]) * 0.5;
    let d_diff = s[4] - s[7];
    (
        half_diff * half_diff + s[1] * s[2],
        half_diff * d_diff + s[5] * s[2] + s[1] * s[6],
    )
}

impl Monodromy {
    pub fn from_state(state: [f64; 8]) -> Self {
        let (disc, ddisc) = wronskian_form(&state);
        Monodromy { state, disc, ddisc }
    }

    fn from_dd(state: [Dd; 8]) -> Self {
        let (disc, ddisc) = wronskian_form(&state);
        Monodromy {
            state: state.map(Dd::to_f64),
            disc: disc.to_f64(),
            ddisc: ddisc.to_f64(),
        }
    }

    pub fn delta(&self) -> f64 {
        0.5 * (self.state[0] + self.state[3])
    }

    pub fn ddelta(&self) -> f64 {
        0.5 * (self.state[4] + self.state[7])
    }

    /// `Delta^2 - 1` in Wronskian form; positive inside gaps, negative on bands.
    pub fn discriminant(&self) -> f64 {
        self.disc
    }

    pub fn ddiscriminant(&self) -> f64 {
        self.ddisc
    }

    /// `theta phi' - theta' phi`, identically 1 for the exact flow.
    pub fn wronskian(&self) -> f64 {
        let s = &self.state;
        s[0] * s[3] - s[1] * s[2]
    }
}

/// `Delta(lambda)` and `d Delta / d lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEval {
    pub delta: f64,
    pub ddelta_dlambda: f64,
}

pub fn monodromy(q: &Potential, lambda: f64, tol: f64) -> Result<(Monodromy, StepMesh)> {
    let sys = HillSystem {
        q,
        lambda: Dd::new(lambda),
    };
    let (state, mesh) = Extrapolator::new(tol)
        .integrate(&sys, 0.0, INITIAL, 1.0)
        .map_err(|_| SpectralError::IntegratorFailure { lambda })?;
    Ok((Monodromy::from_state(state), mesh))
}

/// Discriminant at an unshifted spectral parameter by adaptive integration at local error `tol`.
pub fn lyapunov(q: &Potential, lambda: f64, tol: f64) -> Result<LyapunovEval> {
    if !(1e-14..=1e-6).contains(&tol) {
        return Err(SpectralError::InvalidArgument(format!(
            "integrator tolerance {tol:e} outside [1e-14, 1e-6]"
        )));
    }
    if !lambda.is_finite() {
        return Err(SpectralError::InvalidArgument(format!("lambda = {lambda}")));
    }
    let (m, _) = monodromy(q, lambda, tol)?;
    Ok(LyapunovEval {
        delta: m.delta(),
        ddelta_dlambda: m.ddelta(),
    })
}

/// Discriminant evaluator with a step mesh frozen at a reference `lambda`.
///
/// The mesh is replayed in double-double arithmetic with `q(x) - lambda`
/// formed exactly, so the returned data are a smooth function of `lambda`
/// far below f64 rounding; this resolves `Delta^2 - 1` inside small gaps.
#[derive(Debug, Clone)]
pub struct FrozenDiscriminant<'a> {
    q: &'a Potential,
    mesh: Arc<StepMesh>,
}

impl<'a> FrozenDiscriminant<'a> {
    pub fn build(q: &'a Potential, lambda_ref: f64, tol: f64) -> Result<Self> {
        let (_, mesh) = monodromy(q, lambda_ref, tol)?;
        Ok(FrozenDiscriminant {
            q,
            mesh: Arc::new(mesh),
        })
    }

    pub fn with_mesh(q: &'a Potential, mesh: Arc<StepMesh>) -> Self {
        FrozenDiscriminant { q, mesh }
    }

    pub fn mesh(&self) -> &Arc<StepMesh> {
        &self.mesh
    }

    /// Monodromy data at the unshifted parameter `lambda`.
    pub fn at(&self, lambda: f64) -> Monodromy {
        self.at_dd(Dd::new(lambda))
    }

    /// Monodromy data at an unshifted parameter given beyond f64 resolution.
    pub fn at_dd(&self, lambda: Dd) -> Monodromy {
        let sys = HillSystem { q: self.q, lambda };
        Monodromy::from_dd(integrate_on_mesh(&sys, INITIAL.map(Dd::new), &self.mesh))
    }

    /// Newton steps on `Delta^2 - 1` from an f64 root, in double-double.
    fn polish_root(&self, root: f64) -> Dd {
        let mut x = Dd::new(root);
        let limit = 64.0 * f64::EPSILON * root.abs().max(1.0);
        for _ in 0..3 {
            let m = self.at_dd(x);
            let (d, dd) = (m.discriminant(), m.ddiscriminant());
            if d == 0.0 || dd == 0.0 {
                break;
            }
            let step = d / dd;
            if step.is_nan() || step.abs() > limit {
                break;
            }
            x = x - Dd::new(step);
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Periodicity {
    Periodic,
    Antiperiodic,
}

/// Eigenvalues (ascending) of the Fourier truncation of `-d^2/dx^2 + q`.
///
/// Periodic: modes `exp(2 pi i m x)`, `|m| <= K` (dimension `2K + 1`).
/// Antiperiodic: modes `exp(i pi (2m + 1) x)`, `-K-1 <= m <= K` (dimension `2K + 2`).
pub fn hill_matrix_eigenvalues(q: &Potential, periodicity: Periodicity, k: usize) -> Result<Vec<f64>> {
    if k < 4 * q.modes() {
        return Err(SpectralError::InvalidArgument(format!(
            "truncation K = {k} below 4M = {}",
            4 * q.modes()
        )));
    }
    // Frequencies in units of pi: 2m (periodic) or 2m + 1 (antiperiodic).
    let freqs: Vec<i64> = match periodicity {
        Periodicity::Periodic => (-(k as i64)..=k as i64).map(|m| 2 * m).collect(),
        Periodicity::Antiperiodic => (-(k as i64) - 1..=k as i64).map(|m| 2 * m + 1).collect(),
    };
    let dim = freqs.len();
    let h = DMatrix::<Complex64>::from_fn(dim, dim, |r, c| {
        let diff = (freqs[r] - freqs[c]) / 2;
        let mut entry = q.fourier(diff);
        if r == c {
            let w = PI * freqs[r] as f64;
            entry += Complex64::new(w * w, 0.0);
        }
        entry
    });
    let eig = nalgebra::SymmetricEigen::try_new(h, f64::EPSILON, 0)
        .ok_or_else(|| SpectralError::EigenFailure(format!("no convergence at dimension {dim}")))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::EigenFailure("non-finite eigenvalue".into()));
    }
    values.sort_by(|a, b| a.total_cmp(b));
    Ok(values)
}

/// Unshifted periodic/antiperiodic eigenvalues arranged as band edges.
#[derive(Debug, Clone, PartialEq)]
pub struct HillEdges {
    /// Lowest periodic eigenvalue.
    pub mu0: f64,
    /// `(lambda_n^-, lambda_n^+)` for `n = 1..`.
    pub gaps: Vec<(f64, f64)>,
}

/// Truncation size that resolves the first `n_gaps` gaps of `q`.
pub fn default_truncation(q: &Potential, n_gaps: usize) -> usize {
    (n_gaps / 2 + 4 * q.modes() + 16).max(4 * q.modes())
}

pub fn hill_edges(q: &Potential, n_gaps: usize, k: usize) -> Result<HillEdges> {
    let periodic = hill_matrix_eigenvalues(q, Periodicity::Periodic, k)?;
    let antiperiodic = hill_matrix_eigenvalues(q, Periodicity::Antiperiodic, k)?;
    let mut gaps = Vec::with_capacity(n_gaps);
    for n in 1..=n_gaps {
        let list = if n % 2 == 0 { &periodic } else { &antiperiodic };
        let (i, j) = (n - 1, n);
        if j >= list.len() {
            return Err(SpectralError::InvalidArgument(format!(
                "truncation K = {k} too small for gap {n}"
            )));
        }
        gaps.push((list[i], list[j]));
    }
    Ok(HillEdges {
        mu0: periodic[0],
        gaps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapCount {
    Fixed(usize),
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub gaps: GapCount,
    /// Upper limit on the gap count in `Auto` mode.
    pub max_gaps: usize,
    pub tail_rel_tol: f64,
    pub closure_tol: f64,
    pub ode_tol: f64,
    /// Largest accepted final bracket, relative to `max(1, |lambda|)`.
    pub root_tol: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            gaps: GapCount::Auto,
            max_gaps: 96,
            tail_rel_tol: 1e-8,
            closure_tol: 1e-12,
            ode_tol: 1e-12,
            root_tol: 1e-12,
        }
    }
}

impl SpectrumOptions {
    pub fn fixed(n: usize) -> Self {
        SpectrumOptions {
            gaps: GapCount::Fixed(n),
            ..Default::default()
        }
    }
}

/// One spectral gap in the shifted variable.
#[derive(Debug, Clone, Serialize)]
pub struct GapDescriptor {
    pub n: usize,
    pub closed: bool,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub z_minus: f64,
    pub z_plus: f64,
    pub gamma_len: f64,
    pub g_len: f64,
    pub z_crit: f64,
    pub h: f64,
    pub sigma_len: f64,
    pub rho: f64,
    /// Unshifted edges beyond f64 resolution.
    #[serde(skip)]
    edge_minus: Dd,
    #[serde(skip)]
    edge_plus: Dd,
    #[serde(skip)]
    mesh: Arc<StepMesh>,
}

impl GapDescriptor {
    /// Evaluator sharing the mesh on which the edges of this gap were refined.
    pub fn discriminant<'a>(&self, q: &'a Potential) -> FrozenDiscriminant<'a> {
        FrozenDiscriminant::with_mesh(q, self.mesh.clone())
    }

    /// `(z- + z+) / 2`.
    pub fn z_mid(&self) -> f64 {
        0.5 * (self.z_minus + self.z_plus)
    }

    /// Unshifted `lambda = z^2 - q0` at `z = z- + a = z+ - b`, formed as an
    /// offset from the nearer edge so that the edges map exactly.
    pub fn lambda_at(&self, a: f64, b: f64) -> Dd {
        if a <= b {
            self.edge_minus + Dd::new(a * (2.0 * self.z_minus + a))
        } else {
            self.edge_plus - Dd::new(b * (2.0 * self.z_plus - b))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BandGapSpectrum {
    pub q0: f64,
    pub lambda0_plus: f64,
    pub edges: Vec<(f64, f64)>,
    pub gaps: Vec<GapDescriptor>,
    pub n_gaps: usize,
    pub tail_estimate: f64,
    pub ode_tol: f64,
}

impl BandGapSpectrum {
    pub fn gap(&self, n: usize) -> Result<&GapDescriptor> {
        if n == 0 || n > self.n_gaps {
            return Err(SpectralError::GapOutOfRange { n, max: self.n_gaps });
        }
        Ok(&self.gaps[n - 1])
    }

    pub fn open_gaps(&self) -> impl Iterator<Item = &GapDescriptor> {
        self.gaps.iter().filter(|g| !g.closed)
    }
}

/// Relative contribution to `P_3` of the gaps `n+1..=n+block` under the
/// small-gap asymptotic `I_n ~ |gamma_n|^2 / (8 pi n)`, i.e. `(2 pi n)^3 I_n ~ pi^2 n^2 |gamma_n|^2`.
fn tail_contribution(gamma: &[f64], n: usize, block: usize) -> f64 {
    (n + 1..=n + block)
        .filter_map(|m| gamma.get(m - 1).map(|g| PI * PI * (m * m) as f64 * g * g))
        .sum()
}

fn choose_gap_count(q: &Potential, opts: &SpectrumOptions) -> Result<(usize, HillEdges)> {
    let block = q.modes().max(1);
    match opts.gaps {
        GapCount::Fixed(n) => {
            if n == 0 {
                return Err(SpectralError::InvalidArgument("gap count must be >= 1".into()));
            }
            let seeds = hill_edges(q, n + block + 1, default_truncation(q, n + block + 1))?;
            Ok((n, seeds))
        }
        GapCount::Auto => {
            let cap = opts.max_gaps.max(4);
            let seeds = hill_edges(q, cap + block + 1, default_truncation(q, cap + block + 1))?;
            let gamma: Vec<f64> = seeds.gaps.iter().map(|(a, b)| (b - a).abs()).collect();
            let mut p3 = 0.0;
            let mut chosen = cap;
            for n in 1..=cap {
                p3 += PI * PI * (n * n) as f64 * gamma[n - 1] * gamma[n - 1];
                if n >= 4.max(2 * block) && tail_contribution(&gamma, n, block) <= opts.tail_rel_tol * p3 {
                    chosen = n;
                    break;
                }
            }
            Ok((chosen, seeds))
        }
    }
}

struct RawGap {
    lambda_minus: Dd,
    lambda_plus: Dd,
    lambda_crit: f64,
    h: f64,
    closed: bool,
    mesh: Arc<StepMesh>,
}

/// Bracket around `seed` inside `[lo, hi]` on which `f` changes sign, grown
/// geometrically from half-width `w` at most six times.
fn seeded_bracket(
    f: &dyn Fn(f64) -> f64,
    seed: f64,
    w: f64,
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
) -> Result<(f64, f64, f64, f64)> {
    let mut width = w;
    for _ in 0..=6 {
        let (a, b) = ((seed - width).max(lo), (seed + width).min(hi));
        let fa = if a == lo { f_lo } else { f(a) };
        let fb = if b == hi { f_hi } else { f(b) };
        if fa.signum() != fb.signum() || fa == 0.0 || fb == 0.0 {
            return Ok((a, b, fa, fb));
        }
        width *= 4.0;
    }
    Err(SpectralError::RootNotBracketed {
        lo,
        hi,
        context: format!("seed {seed}, initial half-width {w:e}, 6 expansions"),
    })
}

fn refine_gap(
    q: &Potential,
    n: usize,
    band_lo: f64,
    band_hi: f64,
    seed: (f64, f64),
    opts: &SpectrumOptions,
) -> Result<RawGap> {
    let frozen = FrozenDiscriminant::build(q, band_hi, opts.ode_tol)?;
    let mesh = frozen.mesh().clone();
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };

    let dd = |l: f64| frozen.at(l).ddelta();
    let (d_lo, d_hi) = (dd(band_lo), dd(band_hi));
    let crit = brent(|l| Ok(dd(l)), band_lo, band_hi, d_lo, d_hi, 0.0, 0.0)
        .map_err(|e| match e {
            SpectralError::RootNotBracketed { .. } => SpectralError::MultipleCriticalPoints { n },
            other => other,
        })?;
    let lambda_crit = crit.x;
    let at_crit = frozen.at(lambda_crit);
    let excess = at_crit.discriminant();
    if excess <= 0.0 || at_crit.delta() * sign < 0.0 {
        return Ok(RawGap {
            lambda_minus: Dd::new(lambda_crit),
            lambda_plus: Dd::new(lambda_crit),
            lambda_crit,
            h: 0.0,
            closed: true,
            mesh,
        });
    }

    let disc = |l: f64| frozen.at(l).discriminant();
    let w = 1e-2 * (band_hi - band_lo);
    let (d_band_lo, d_band_hi) = (disc(band_lo), disc(band_hi));
    let root_at = |seed: f64, lo: f64, hi: f64, f_lo: f64, f_hi: f64| -> Result<Dd> {
        let seed = seed.clamp(lo, hi);
        let (a, b, fa, fb) = seeded_bracket(&disc, seed, w, lo, hi, f_lo, f_hi)?;
        let r = brent(|l| Ok(disc(l)), a, b, fa, fb, 0.0, 0.0)?;
        Ok(frozen.polish_root(r.x))
    };
    let lambda_minus = root_at(seed.0, band_lo, lambda_crit, d_band_lo, excess)?;
    let lambda_plus = root_at(seed.1, lambda_crit, band_hi, excess, d_band_hi)?;
    Ok(RawGap {
        lambda_minus,
        lambda_plus,
        lambda_crit,
        h: excess.sqrt().asinh(),
        closed: false,
        mesh,
    })
}

/// Lowest periodic eigenvalue refined on the discriminant.
fn refine_mu0(q: &Potential, seed: f64, band_hi: f64, opts: &SpectrumOptions) -> Result<f64> {
    let frozen = FrozenDiscriminant::build(q, band_hi, opts.ode_tol)?;
    let disc = |l: f64| frozen.at(l).discriminant();
    let f_hi = disc(band_hi);
    let mut w = 1e-2 * (band_hi - seed).abs().max(1.0);
    for _ in 0..=6 {
        let lo = seed - w;
        let f_lo = disc(lo);
        if f_lo > 0.0 {
            let upper = (seed + w).min(band_hi);
            let f_up = if upper == band_hi { f_hi } else { disc(upper) };
            let (b, fb) = if f_up < 0.0 { (upper, f_up) } else { (band_hi, f_hi) };
            let r = brent(|l| Ok(disc(l)), lo, b, f_lo, fb, 0.0, 0.0)?;
            let m = frozen.at(r.x);
            if m.ddelta() == 0.0 {
                return Err(SpectralError::RootNotBracketed {
                    lo,
                    hi: b,
                    context: "lowest periodic eigenvalue has vanishing dDelta".into(),
                });
            }
            return Ok(r.x);
        }
        w *= 4.0;
    }
    Err(SpectralError::RootNotBracketed {
        lo: seed - w,
        hi: band_hi,
        context: format!("lowest periodic eigenvalue, seed {seed}"),
    })
}

/// Band edges, gap descriptors and normalization `q0` for the first `N` gaps.
pub fn band_edges(q: &Potential, opts: &SpectrumOptions) -> Result<BandGapSpectrum> {
    let (n_gaps, seeds) = choose_gap_count(q, opts)?;
    let edge = |n: usize| -> (f64, f64) { seeds.gaps[n - 1] };
    let band1_mid = 0.5 * (seeds.mu0 + edge(1).0);
    let mu0 = refine_mu0(q, seeds.mu0, band1_mid, opts)?;

    let raw: Vec<Result<RawGap>> = (1..=n_gaps)
        .into_par_iter()
        .map(|n| {
            let prev_plus = if n == 1 { seeds.mu0 } else { edge(n - 1).1 };
            let (minus, plus) = edge(n);
            let next_minus = edge(n + 1).0;
            let band_lo = 0.5 * (prev_plus + minus);
            let band_hi = 0.5 * (plus + next_minus);
            refine_gap(q, n, band_lo, band_hi, (minus, plus), opts)
        })
        .collect();
    let raw: Vec<RawGap> = raw.into_iter().collect::<Result<_>>()?;

    let q0 = -mu0;
    let mut gaps = Vec::with_capacity(n_gaps);
    let mut edges = Vec::with_capacity(n_gaps);
    let mut prev_z_plus = 0.0;
    for (i, r) in raw.into_iter().enumerate() {
        let n = i + 1;
        let mut edge_minus = r.lambda_minus;
        let mut edge_plus = r.lambda_plus;
        let scale = (edge_minus.to_f64() + q0).abs().max(1.0);
        let closed = r.closed || (edge_plus - edge_minus).to_f64() < opts.closure_tol * scale;
        if closed {
            edge_minus = Dd::new(r.lambda_crit);
            edge_plus = edge_minus;
        }
        let gamma_len = (edge_plus - edge_minus).to_f64();
        let lm = edge_minus.to_f64() + q0;
        let lp = edge_plus.to_f64() + q0;
        let z_minus = lm.max(0.0).sqrt();
        // (z- + g)^2 - z-^2 = gamma without cancellation.
        let g_len = if gamma_len > 0.0 {
            gamma_len / (z_minus + (z_minus * z_minus + gamma_len).sqrt())
        } else {
            0.0
        };
        let z_plus = z_minus + g_len;
        let (z_crit, h) = if closed {
            (z_minus, 0.0)
        } else {
            ((r.lambda_crit + q0).sqrt(), r.h)
        };
        let sigma_len = z_minus - prev_z_plus;
        prev_z_plus = z_plus;
        edges.push((lm, lp));
        gaps.push(GapDescriptor {
            n,
            closed,
            lambda_minus: lm,
            lambda_plus: lp,
            z_minus,
            z_plus,
            gamma_len,
            g_len,
            z_crit,
            h,
            sigma_len,
            rho: PI - sigma_len,
            edge_minus,
            edge_plus,
            mesh: r.mesh,
        });
    }

    check_interlacing(&edges)?;

    let gamma: Vec<f64> = seeds.gaps.iter().map(|(a, b)| (b - a).abs()).collect();
    let p3: f64 = gaps
        .iter()
        .map(|g| PI * PI * (g.n * g.n) as f64 * g.gamma_len * g.gamma_len)
        .sum();
    let tail = tail_contribution(&gamma, n_gaps, q.modes().max(1));
    let tail_estimate = if p3 > 0.0 { tail / p3 } else { 0.0 };

    Ok(BandGapSpectrum {
        q0,
        lambda0_plus: 0.0,
        edges,
        gaps,
        n_gaps,
        tail_estimate,
        ode_tol: opts.ode_tol,
    })
}

/// `0 = lambda_0^+ < lambda_1^- <= lambda_1^+ < lambda_2^- <= ...`; edge index
/// `2n - 1` is `lambda_n^-` and `2n` is `lambda_n^+`.
fn check_interlacing(edges: &[(f64, f64)]) -> Result<()> {
    let mut prev = 0.0;
    for (i, &(m, p)) in edges.iter().enumerate() {
        let n = i + 1;
        if m <= prev {
            return Err(SpectralError::Interlacing {
                first: 2 * n - 2,
                second: 2 * n - 1,
            });
        }
        if p < m {
            return Err(SpectralError::Interlacing {
                first: 2 * n - 1,
                second: 2 * n,
            });
        }
        prev = p;
    }
    Ok(())
}

/// Unique maximizer of `(-1)^n Delta(z^2)` on an open gap and the height
/// `h_n = arccosh((-1)^n Delta(z_n^2))`.
pub fn gap_critical_point(q: &Potential, spec: &BandGapSpectrum, n: usize) -> Result<(f64, f64)> {
    let gap = spec.gap(n)?;
    if gap.closed {
        return Err(SpectralError::GapClosed { n });
    }
    let frozen = gap.discriminant(q);
    let q0 = spec.q0;
    let dd = |lambda_shifted: f64| frozen.at(lambda_shifted - q0).ddelta();
    // Sign pattern of dDelta/dlambda over the closed gap.
    let samples = 17;
    let values: Vec<f64> = (0..=samples)
        .map(|i| {
            let t = i as f64 / samples as f64;
            dd(gap.lambda_minus + t * gap.gamma_len)
        })
        .collect();
    let changes = values
        .windows(2)
        .filter(|w| w[0] != 0.0 && w[1] != 0.0 && w[0].signum() != w[1].signum())
        .count();
    if changes > 1 {
        return Err(SpectralError::MultipleCriticalPoints { n });
    }
    let r = brent(
        |l| Ok(dd(l)),
        gap.lambda_minus,
        gap.lambda_plus,
        values[0],
        values[samples],
        0.0,
        0.0,
    )
    .map_err(|e| match e {
        SpectralError::RootNotBracketed { .. } => SpectralError::MultipleCriticalPoints { n },
        other => other,
    })?;
    let disc = frozen.at(r.x - q0).discriminant().max(0.0);
    Ok((r.x.sqrt(), disc.sqrt().asinh()))
}

/// `arccosh(x)` for `x >= 1` without cancellation near 1.
pub fn stable_arccosh(x: f64) -> f64 {
    let delta = x - 1.0;
    if delta <= 0.0 {
        return 0.0;
    }
    if delta < 1e-4 {
        (2.0 * delta).sqrt() * (1.0 - delta / 12.0 + 3.0 * delta * delta / 160.0)
    } else {
        (x + ((x - 1.0) * (x + 1.0)).sqrt()).ln()
    }
}
