//! Quasimomentum height on the gaps and the gap integrals built from it:
//! actions `I_n`, nonlinear terms `V_n`, the moments `P_j`, `Q_j`, `S_j`, and
//! the quasimomentum off the real axis.
//!
//! On gap `n` the quasimomentum is `k = pi n + i v` with
//! `cosh v = (-1)^n Delta(z^2)`, so `sinh v = sqrt(Delta^2 - 1)` and `v` is
//! evaluated as `asinh` of the square root of the Wronskian-form discriminant
//! on the mesh frozen for that gap.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SpectralError};
use crate::hill_floquet::{BandGapSpectrum, FrozenDiscriminant, GapDescriptor};
use crate::potential::Potential;
use crate::quadrature::GaussLegendre;

/// Smallest and largest node counts of the doubling sequence.
pub const MIN_NODES: usize = 16;
pub const MAX_NODES: usize = 1024;

/// Interior negative excursion of `Delta^2 - 1`, relative to its value at the
/// critical point, tolerated as rounding before an edge is declared misplaced.
const MISLOCATION_TOL: f64 = 1e-6;

/// Sample of the quasimomentum height on a gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapNode {
    pub z: f64,
    /// `z - z-` and `z+ - z` without cancellation.
    pub from_minus: f64,
    pub to_plus: f64,
    /// `v(z + i0)`.
    pub v: f64,
    /// `dv/dz`.
    pub dv: f64,
}

/// Gauss-Legendre rule in `theta` for `z = m + r sin(theta)` on one gap,
/// with `v` sampled at the nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapQuadrature {
    pub n: usize,
    pub nodes: Vec<GapNode>,
    /// Gauss-Legendre weights in `theta` multiplied by the Jacobian `r cos(theta)`.
    pub weights: Vec<f64>,
    pub k: usize,
}

/// `Delta^2 - 1` and its `z`-derivative at `z = z- + a = z+ - b`.
fn discriminant_data(frozen: &FrozenDiscriminant<'_>, gap: &GapDescriptor, a: f64, b: f64) -> Result<(f64, f64)> {
    let z = gap.z_minus + a;
    let m = frozen.at_dd(gap.lambda_at(a, b));
    let disc = m.discriminant();
    let d_crit = gap.h.sinh().powi(2);
    if disc < -MISLOCATION_TOL * d_crit {
        return Err(SpectralError::EdgeMislocation {
            n: gap.n,
            z,
            excess: disc,
        });
    }
    Ok((disc.max(0.0), 2.0 * z * m.ddiscriminant()))
}

impl GapQuadrature {
    pub fn build(q: &Potential, spec: &BandGapSpectrum, n: usize, k: usize) -> Result<Self> {
        let gap = spec.gap(n)?;
        if gap.closed {
            return Err(SpectralError::GapClosed { n });
        }
        let rule = GaussLegendre::new(k);
        let frozen = gap.discriminant(q);
        let half = 0.5 * gap.g_len;
        let mut nodes = Vec::with_capacity(k);
        let mut weights = Vec::with_capacity(k);
        for (&x, &wx) in rule.nodes.iter().zip(&rule.weights) {
            let (w, c) = (FRAC_PI_2 * wx, (FRAC_PI_2 * x).cos());
            // 1 -+ sin(pi x / 2) = 2 sin^2(pi (1 -+ x) / 4), accurate at both ends.
            let a = half * 2.0 * (FRAC_PI_4 * (1.0 + x)).sin().powi(2);
            let b = half * 2.0 * (FRAC_PI_4 * (1.0 - x)).sin().powi(2);
            let z = if a <= b { gap.z_minus + a } else { gap.z_plus - b };
            let (disc, ddisc_dz) = discriminant_data(&frozen, gap, a, b)?;
            let sinh_v = disc.sqrt();
            if sinh_v == 0.0 {
                return Err(SpectralError::SinhUnderflow { n, z });
            }
            // sinh^2 v = Delta^2 - 1, so v' = (d/dz)(Delta^2 - 1) / (2 sinh v cosh v).
            nodes.push(GapNode {
                z,
                from_minus: a,
                to_plus: b,
                v: sinh_v.asinh(),
                dv: ddisc_dz / (2.0 * sinh_v * (1.0 + disc).sqrt()),
            });
            weights.push(w * half * c);
        }
        Ok(GapQuadrature { n, nodes, weights, k })
    }

    /// `int_{g_n} f(z, v, v') dz`.
    pub fn integrate(&self, mut f: impl FnMut(&GapNode) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(node, w)| w * f(node)).sum()
    }

    pub fn integrate_complex(&self, mut f: impl FnMut(&GapNode) -> Complex64) -> Complex64 {
        self.nodes.iter().zip(&self.weights).map(|(node, w)| f(node) * *w).sum()
    }
}

/// `v(z + i0)` on gap `n`, exactly 0 at the edges.
pub fn v_on_gap(q: &Potential, spec: &BandGapSpectrum, n: usize, z: f64) -> Result<f64> {
    let gap = spec.gap(n)?;
    if gap.closed {
        return Err(SpectralError::GapClosed { n });
    }
    if !(gap.z_minus..=gap.z_plus).contains(&z) {
        return Err(SpectralError::OutsideGap { n, z });
    }
    if z == gap.z_minus || z == gap.z_plus {
        return Ok(0.0);
    }
    let (disc, _) = discriminant_data(&gap.discriminant(q), gap, z - gap.z_minus, gap.z_plus - z)?;
    Ok(disc.sqrt().asinh())
}

/// Every integral over one gap needed downstream, from one set of samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapIntegrals {
    pub n: usize,
    /// `int z^p v dz` for `p = -1..=4` (index `p + 1`).
    pub zv: [f64; 6],
    /// `int z v^3 dz`.
    pub zv3: f64,
    /// `int z^2 v' dz`, evaluated as `int (z - m)(z + m) v' dz` with `m` the
    /// gap midpoint since `int v' dz = 0`.
    pub z2_dv: f64,
    pub nodes: usize,
    pub converged: bool,
    /// Largest relative change at the final doubling.
    pub error_estimate: f64,
}

impl GapIntegrals {
    fn closed(n: usize) -> Self {
        GapIntegrals {
            n,
            zv: [0.0; 6],
            zv3: 0.0,
            z2_dv: 0.0,
            nodes: 0,
            converged: true,
            error_estimate: 0.0,
        }
    }

    /// Integrals of `v` itself; the derivative-based Arnold integral is
    /// left out so that it stays an independent check.
    fn direct_values(&self) -> [f64; 7] {
        let mut out = [0.0; 7];
        out[..6].copy_from_slice(&self.zv);
        out[6] = self.zv3;
        out
    }

    fn from_quadrature(quad: &GapQuadrature) -> Self {
        let mut zv = [0.0; 6];
        for (i, slot) in zv.iter_mut().enumerate() {
            let p = i as i32 - 1;
            *slot = quad.integrate(|nd| nd.z.powi(p) * nd.v);
        }
        GapIntegrals {
            n: quad.n,
            zv,
            zv3: quad.integrate(|nd| nd.z * nd.v.powi(3)),
            z2_dv: quad.integrate(|nd| {
                let offset = 0.5 * (nd.from_minus - nd.to_plus);
                offset * (2.0 * nd.z - offset) * nd.dv
            }),
            nodes: quad.k,
            converged: false,
            error_estimate: f64::INFINITY,
        }
    }

    /// `I_n = (4/pi) int z v dz`.
    pub fn action(&self) -> f64 {
        4.0 / PI * self.zv[2]
    }

    /// `I_n = -(2/pi) int z^2 v' dz`.
    pub fn action_arnold(&self) -> f64 {
        -2.0 / PI * self.z2_dv
    }

    /// `V_n = (8/pi) int z v^3 dz`.
    pub fn v_term(&self) -> f64 {
        8.0 / PI * self.zv3
    }
}

/// Node doubling from `k_start` until every integral of `v` changes by less
/// than `quad_tol` relative. Returns the integrals and the final rule.
pub fn gap_integrals(
    q: &Potential,
    spec: &BandGapSpectrum,
    n: usize,
    k_start: usize,
    quad_tol: f64,
) -> Result<(GapIntegrals, Option<GapQuadrature>)> {
    let gap = spec.gap(n)?;
    if gap.closed {
        return Ok((GapIntegrals::closed(n), None));
    }
    if k_start < MIN_NODES {
        return Err(SpectralError::InvalidArgument(format!(
            "node count {k_start} below {MIN_NODES}"
        )));
    }
    let mut k = k_start;
    let mut quad = GapQuadrature::build(q, spec, n, k)?;
    let mut current = GapIntegrals::from_quadrature(&quad);
    while k < MAX_NODES {
        k = (2 * k).min(MAX_NODES);
        let next_quad = GapQuadrature::build(q, spec, n, k)?;
        let mut next = GapIntegrals::from_quadrature(&next_quad);
        let err = current
            .direct_values()
            .iter()
            .zip(next.direct_values().iter())
            .map(|(a, b)| {
                let scale = a.abs().max(b.abs());
                if scale == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / scale
                }
            })
            .fold(0.0, f64::max);
        next.error_estimate = err;
        quad = next_quad;
        current = next;
        if err < quad_tol {
            current.converged = true;
            break;
        }
    }
    Ok((current, Some(quad)))
}

/// Value of one gap integral with its convergence status.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapMoment {
    pub value: f64,
    pub nodes: usize,
    pub converged: bool,
    pub error_estimate: f64,
}

/// `int_{g_n} z^p v^m dz` for `p in -1..=4`, `m in {1, 3}`, starting from `k` nodes.
pub fn gap_moment(
    q: &Potential,
    spec: &BandGapSpectrum,
    n: usize,
    p: i32,
    m: u32,
    k: usize,
    quad_tol: f64,
) -> Result<GapMoment> {
    if !(-1..=4).contains(&p) || !(m == 1 || m == 3) {
        return Err(SpectralError::InvalidArgument(format!("moment (p, m) = ({p}, {m})")));
    }
    if k < MIN_NODES {
        return Err(SpectralError::InvalidArgument(format!("node count {k} below {MIN_NODES}")));
    }
    let gap = spec.gap(n)?;
    if gap.closed {
        return Ok(GapMoment {
            value: 0.0,
            nodes: 0,
            converged: true,
            error_estimate: 0.0,
        });
    }
    let eval = |k: usize| -> Result<f64> {
        let quad = GapQuadrature::build(q, spec, n, k)?;
        Ok(quad.integrate(|nd| nd.z.powi(p) * nd.v.powi(m as i32)))
    };
    let mut k = k;
    let mut value = eval(k)?;
    let mut error_estimate = f64::INFINITY;
    while k < MAX_NODES {
        k = (2 * k).min(MAX_NODES);
        let next = eval(k)?;
        let scale = next.abs().max(value.abs());
        error_estimate = if scale == 0.0 { 0.0 } else { (next - value).abs() / scale };
        value = next;
        if error_estimate < quad_tol {
            return Ok(GapMoment {
                value,
                nodes: k,
                converged: true,
                error_estimate,
            });
        }
    }
    Ok(GapMoment {
        value,
        nodes: k,
        converged: false,
        error_estimate,
    })
}

pub fn action(q: &Potential, spec: &BandGapSpectrum, n: usize, quad_tol: f64) -> Result<f64> {
    let (g, _) = gap_integrals(q, spec, n, MIN_NODES, quad_tol)?;
    Ok(g.action())
}

pub fn action_arnold(q: &Potential, spec: &BandGapSpectrum, n: usize, quad_tol: f64) -> Result<f64> {
    let (g, _) = gap_integrals(q, spec, n, MIN_NODES, quad_tol)?;
    Ok(g.action_arnold())
}

pub fn v_term(q: &Potential, spec: &BandGapSpectrum, n: usize, quad_tol: f64) -> Result<f64> {
    let (g, _) = gap_integrals(q, spec, n, MIN_NODES, quad_tol)?;
    Ok(g.v_term())
}

/// Actions, nonlinear terms and spectral moments of a computed spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionMomentSet {
    #[serde(rename = "I")]
    pub i: Vec<f64>,
    #[serde(rename = "I_arnold")]
    pub i_arnold: Vec<f64>,
    #[serde(rename = "V_terms")]
    pub v_terms: Vec<f64>,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "P_minus1")]
    pub p_minus1: f64,
    #[serde(rename = "P_1")]
    pub p_1: f64,
    #[serde(rename = "P_3")]
    pub p_3: f64,
    #[serde(rename = "Q0")]
    pub q0_moment: f64,
    #[serde(rename = "Q2")]
    pub q2: f64,
    #[serde(rename = "Q4")]
    pub q4: f64,
    #[serde(rename = "S_minus1")]
    pub s_minus1: f64,
    #[serde(rename = "S_0")]
    pub s_0: f64,
    #[serde(rename = "S_1")]
    pub s_1: f64,
    pub h_inf: f64,
    pub h_l2: f64,
    pub rho_l2: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C_I")]
    pub c_i: f64,
    #[serde(rename = "C_minus")]
    pub c_minus: f64,
    pub tail_rel: f64,
    /// Gaps whose quadrature hit the node cap before converging.
    pub unconverged: Vec<usize>,
}

/// Kahan-compensated sum in iteration order.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0, 0.0);
    for x in values {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Per-gap integrals for every gap of `spec`, ascending in `n`.
pub fn all_gap_integrals(q: &Potential, spec: &BandGapSpectrum, quad_tol: f64) -> Result<Vec<GapIntegrals>> {
    (1..=spec.n_gaps)
        .into_par_iter()
        .map(|n| gap_integrals(q, spec, n, MIN_NODES, quad_tol).map(|(g, _)| g))
        .collect()
}

pub fn moments(q: &Potential, spec: &BandGapSpectrum, quad_tol: f64) -> Result<ActionMomentSet> {
    let gaps = all_gap_integrals(q, spec, quad_tol)?;
    Ok(assemble_moments(spec, &gaps))
}

/// Deterministic reduction of per-gap integrals into the moment set.
pub fn assemble_moments(spec: &BandGapSpectrum, gaps: &[GapIntegrals]) -> ActionMomentSet {
    let i: Vec<f64> = gaps.iter().map(GapIntegrals::action).collect();
    let i_arnold: Vec<f64> = gaps.iter().map(GapIntegrals::action_arnold).collect();
    let v_terms: Vec<f64> = gaps.iter().map(GapIntegrals::v_term).collect();
    let freq = |n: usize| 2.0 * PI * n as f64;
    let p = |j: i32| kahan_sum(gaps.iter().zip(&i).map(|(g, a)| freq(g.n).powi(j) * a));
    let q_moment = |j: usize| 2.0 / PI * kahan_sum(gaps.iter().map(|g| g.zv[j + 1]));
    let s_moment = |j: i32| 4.0 * kahan_sum(gaps.iter().map(|g| g.n as f64 * g.zv[(2 * j + 2) as usize]));
    let p_minus1 = p(-1);
    let h_inf = spec.gaps.iter().map(|g| g.h).fold(0.0, f64::max);
    ActionMomentSet {
        w: kahan_sum(gaps.iter().zip(&v_terms).map(|(g, v)| 2.0 * freq(g.n) * v)),
        p_minus1,
        p_1: p(1),
        p_3: p(3),
        q0_moment: q_moment(0),
        q2: q_moment(2),
        q4: q_moment(4),
        s_minus1: s_moment(-1),
        s_0: s_moment(0),
        s_1: s_moment(1),
        h_inf,
        h_l2: kahan_sum(spec.gaps.iter().map(|g| g.h * g.h)).sqrt(),
        rho_l2: kahan_sum(spec.gaps.iter().map(|g| g.rho * g.rho)).sqrt(),
        c0: h_inf.cosh(),
        c_i: 1.0 + p_minus1.sqrt(),
        c_minus: p_minus1.sqrt().exp(),
        tail_rel: spec.tail_estimate,
        unconverged: gaps.iter().filter(|g| !g.converged).map(|g| g.n).collect(),
        i,
        i_arnold,
        v_terms,
    }
}

/// `k(z) = z + (1/pi) sum_n int_{g_n} v(t) [1/(t - z) - 1/(t + z)] dt` for `Im z >= 1`,
/// with the negative gaps folded onto the positive ones.
pub fn quasimomentum_offaxis(
    q: &Potential,
    spec: &BandGapSpectrum,
    z: Complex64,
    quad_tol: f64,
) -> Result<Complex64> {
    // Im z >= 1 keeps the kernel at distance >= 1 from every gap.
    if z.im.is_nan() || z.im < 1.0 || !z.re.is_finite() {
        return Err(SpectralError::InvalidArgument(format!(
            "evaluation point {z} needs Im z >= 1"
        )));
    }
    if spec.tail_estimate >= 1e-6 {
        return Err(SpectralError::InvalidArgument(format!(
            "spectrum tail estimate {:e} not below 1e-6",
            spec.tail_estimate
        )));
    }
    let terms: Vec<Complex64> = (1..=spec.n_gaps)
        .into_par_iter()
        .map(|n| -> Result<Complex64> {
            let (_, quad) = gap_integrals(q, spec, n, MIN_NODES, quad_tol)?;
            Ok(match quad {
                None => Complex64::new(0.0, 0.0),
                Some(quad) => quad.integrate_complex(|nd| {
                    let t = Complex64::new(nd.z, 0.0);
                    nd.v * (1.0 / (t - z) - 1.0 / (t + z))
                }),
            })
        })
        .collect::<Result<_>>()?;
    let re = kahan_sum(terms.iter().map(|c| c.re));
    let im = kahan_sum(terms.iter().map(|c| c.im));
    Ok(z + Complex64::new(re, im) / PI)
}
