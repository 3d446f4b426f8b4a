//! Identity residuals, the inequality battery and the quadratic-form
//! evidence for the nonlinear part `V` of the Hamiltonian (taken as `W`).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::action_integrals::{all_gap_integrals, assemble_moments, ActionMomentSet, GapIntegrals, GapQuadrature};
use crate::error::{Result, SpectralError};
use crate::hill_floquet::{band_edges, BandGapSpectrum, SpectrumOptions};
use crate::potential::{direct_functionals, shifted_h2, DirectFunctionals, Potential};

/// Denominator floor of relative residuals.
pub const RESIDUAL_FLOOR: f64 = 1e-14;
/// An inequality `lhs <= rhs` passes when `rhs - lhs >= -MARGIN_TOL * max(|lhs|, |rhs|)`.
pub const MARGIN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub spectrum: SpectrumOptions,
    pub quad_tol: f64,
    /// Identity entries are flagged unreliable above this spectral tail estimate.
    pub tail_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            spectrum: SpectrumOptions::default(),
            quad_tol: 1e-11,
            tail_tol: 1e-6,
        }
    }
}

/// Spectrum, gap integrals, moments and direct functionals of one potential.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub potential: Potential,
    pub spectrum: BandGapSpectrum,
    pub gaps: Vec<GapIntegrals>,
    pub moments: ActionMomentSet,
    pub direct: DirectFunctionals,
    pub tail_tol: f64,
}

pub fn analyze(q: &Potential, opts: &VerifyOptions) -> Result<Analysis> {
    let spectrum = band_edges(q, &opts.spectrum)?;
    let gaps = all_gap_integrals(q, &spectrum, opts.quad_tol)?;
    let moments = assemble_moments(&spectrum, &gaps);
    Ok(Analysis {
        potential: q.clone(),
        direct: direct_functionals(q),
        spectrum,
        gaps,
        moments,
        tail_tol: opts.tail_tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityEntry {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub tail_rel: f64,
    /// Set when the spectral tail exceeds the reliability threshold.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub entries: Vec<IdentityEntry>,
    pub unreliable: bool,
}

impl IdentityReport {
    pub fn get(&self, name: &str) -> Option<&IdentityEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Every entry not flagged unreliable passes.
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass || e.flagged)
    }
}

pub fn relative_residual(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(RESIDUAL_FLOOR)
}

pub fn identity_report(a: &Analysis) -> IdentityReport {
    let m = &a.moments;
    let d = &a.direct;
    let q0 = a.spectrum.q0;
    let tail_rel = m.tail_rel;
    let unreliable = tail_rel > a.tail_tol;
    let entry = |name: &str, lhs: f64, rhs: f64, tol: f64| {
        let rel_residual = relative_residual(lhs, rhs);
        IdentityEntry {
            name: name.to_string(),
            lhs,
            rhs,
            rel_residual,
            tol,
            pass: rel_residual < tol,
            tail_rel,
            flagged: unreliable,
        }
    };
    let norm_sq = d.h1;
    IdentityReport {
        entries: vec![
            entry("H2=P3-W", d.h2, m.p_3 - m.w, 1e-6),
            entry("P1=|q|^2/2", m.p_1, 0.5 * norm_sq, 1e-6),
            entry("q0=S_-1", q0, m.s_minus1, 1e-5),
            entry("q0=2Q0", q0, 2.0 * m.q0_moment, 1e-5),
            entry("|q|^2=8Q2-4Q0^2", norm_sq, 8.0 * m.q2 - 4.0 * m.q0_moment * m.q0_moment, 1e-5),
            entry("2P1=4S0", 2.0 * m.p_1, 4.0 * m.s_0, 1e-5),
            entry("H2=8(S1-S_-1*S0)", d.h2, 8.0 * (m.s_1 - m.s_minus1 * m.s_0), 1e-4),
            entry("8Q2=|q|^2+q0^2", 8.0 * m.q2, norm_sq + q0 * q0, 1e-5),
            entry("16Q4=H2(q+q0)", 16.0 * m.q4, shifted_h2(&a.potential, q0), 1e-4),
        ],
        unreliable,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityEntry {
    pub name: String,
    /// `(rhs - lhs) / max(|lhs|, |rhs|)`, minimized over gaps for per-gap entries.
    pub margin: f64,
    pub pass: bool,
    /// Whether the entry counts towards the overall verdict.
    pub asserted: bool,
    /// Gap attaining the minimum margin, for per-gap entries.
    pub worst_gap: Option<usize>,
    /// Sides of the comparison (global entries) or at the worst gap.
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub entries: Vec<InequalityEntry>,
    /// Per-gap margins `(n, margin)` for each per-gap entry.
    pub per_gap: BTreeMap<String, Vec<(usize, f64)>>,
}

impl InequalityReport {
    pub fn get(&self, name: &str) -> Option<&InequalityEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass || !e.asserted)
    }
}

/// Relative margin of `lhs <= rhs`.
pub fn relative_margin(lhs: f64, rhs: f64) -> f64 {
    floored_margin(lhs, rhs, 0.0)
}

/// Relative margin with the scale bounded below by `floor`, for sides that
/// are differences of larger quantities.
pub fn floored_margin(lhs: f64, rhs: f64, floor: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs()).max(floor);
    if scale == 0.0 {
        0.0
    } else {
        (rhs - lhs) / scale
    }
}

struct Battery {
    entries: Vec<InequalityEntry>,
    per_gap: BTreeMap<String, Vec<(usize, f64)>>,
}

impl Battery {
    fn global(&mut self, name: &str, lhs: f64, rhs: f64, asserted: bool) {
        self.global_floored(name, lhs, rhs, 0.0, asserted);
    }

    fn global_floored(&mut self, name: &str, lhs: f64, rhs: f64, floor: f64, asserted: bool) {
        let margin = floored_margin(lhs, rhs, floor);
        self.entries.push(InequalityEntry {
            name: name.to_string(),
            margin,
            pass: margin >= -MARGIN_TOL,
            asserted,
            worst_gap: None,
            lhs,
            rhs,
        });
    }

    fn per_gap(&mut self, name: &str, values: Vec<(usize, f64, f64)>) {
        self.per_gap_floored(name, values, 0.0);
    }

    fn per_gap_floored(&mut self, name: &str, values: Vec<(usize, f64, f64)>, floor: f64) {
        let margins: Vec<(usize, f64)> = values
            .iter()
            .map(|&(n, l, r)| (n, floored_margin(l, r, floor)))
            .collect();
        let worst = values
            .iter()
            .zip(&margins)
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(v, m)| (*v, m.1));
        let (worst_gap, lhs, rhs, margin) = match worst {
            Some(((n, l, r), m)) => (Some(n), l, r, m),
            None => (None, 0.0, 0.0, 0.0),
        };
        self.entries.push(InequalityEntry {
            name: name.to_string(),
            margin,
            pass: margin >= -MARGIN_TOL,
            asserted: true,
            worst_gap,
            lhs,
            rhs,
        });
        self.per_gap.insert(name.to_string(), margins);
    }
}

/// Node count used to sample `v` for the pointwise comparison with the
/// square-root profile.
const PROFILE_NODES: usize = 32;

pub fn inequality_report(a: &Analysis) -> Result<InequalityReport> {
    let m = &a.moments;
    let d = &a.direct;
    let spec = &a.spectrum;
    let mut b = Battery {
        entries: Vec::new(),
        per_gap: BTreeMap::new(),
    };

    let i_norm_sq: f64 = m.i.iter().map(|x| x * x).sum();
    let i_norm = i_norm_sq.sqrt();
    let root_pm1 = m.p_minus1.sqrt();
    let w = m.w;

    b.global("0<=W", 0.0, w, true);
    b.global("W<=8*P1*P_-1", w, 8.0 * m.p_1 * m.p_minus1, true);
    b.global("pi/10*|I|^2/(1+sqrt(P_-1))<=W", PI / 10.0 * i_norm_sq / (1.0 + root_pm1), w, true);
    let polynomial_part = 4f64.powf(5.5) * (1.0 + root_pm1).sqrt() * m.p_minus1 * m.p_minus1;
    b.global(
        "W<=(4^5.5*sqrt(1+sqrt(P_-1))*P_-1^2+6pi*exp(sqrt(P_-1))*|I|)*|I|",
        w,
        (polynomial_part + 6.0 * PI * root_pm1.exp() * i_norm) * i_norm,
        false,
    );
    b.global(
        "W<=(4^5.5*sqrt(1+sqrt(P_-1))*P_-1^2+6pi*exp(sqrt(2P_-1))*|I|)*|I|",
        w,
        (polynomial_part + 6.0 * PI * (2.0 * m.p_minus1).sqrt().exp() * i_norm) * i_norm,
        true,
    );

    let q0m = m.q0_moment;
    b.global("pi/4*Q0<=|h|^2", PI / 4.0 * q0m, m.h_l2 * m.h_l2, true);
    b.global(
        "|h|^2<=pi^2/2*(1+sqrt(2)/pi*sqrt(Q0))*Q0",
        m.h_l2 * m.h_l2,
        PI * PI / 2.0 * (1.0 + std::f64::consts::SQRT_2 / PI * q0m.sqrt()) * q0m,
        true,
    );
    // rho_n = pi - |sigma_n| carries absolute error on the scale of pi.
    let rho_floor: f64 = spec.gaps.iter().map(|g| 2.0 * PI * g.rho.abs()).sum();
    b.global_floored("|rho|^2<=256*Q0", m.rho_l2 * m.rho_l2, 256.0 * q0m, rho_floor, true);
    b.global("|h|_inf^2/2<=Q0", 0.5 * m.h_inf * m.h_inf, q0m, true);
    b.global("Q0<=P_-1", q0m, m.p_minus1, true);
    let gamma_sum: f64 = spec.gaps.iter().map(|g| g.gamma_len / (2.0 * PI * g.n as f64)).sum();
    b.global("|h|_inf<=4/pi*sum|gamma_j|/(2pi j)", m.h_inf, 4.0 / PI * gamma_sum, true);
    let qm1 = a.potential.h_minus1_norm();
    b.global("|h|_2<=3|q|_-1*(1+2|q|_-1)^2", m.h_l2, 3.0 * qm1 * (1.0 + 2.0 * qm1).powi(2), true);

    let weighted_h2i: f64 = spec
        .gaps
        .iter()
        .zip(&m.i)
        .map(|(g, i)| 4.0 * PI * g.n as f64 * g.h * g.h * i)
        .sum();
    b.global("sum(4pi n)h^2 I/5<=W", weighted_h2i / 5.0, w, true);
    b.global("W<=2*sum(4pi n)h^2 I", w, 2.0 * weighted_h2i, true);
    b.global("W<=4|h|_inf^2*P1", w, 4.0 * m.h_inf * m.h_inf * m.p_1, true);
    b.global("|q'|^2<=4(P3+2P1^2)", d.norm_qprime.powi(2), 4.0 * (m.p_3 + 2.0 * m.p_1 * m.p_1), true);
    b.global(
        "P3<=|q'|^2/2+|q'|/sqrt(2)*|q|^2+2pi|q|^3(1+|q|^(1/3))",
        m.p_3,
        0.5 * d.norm_qprime.powi(2)
            + d.norm_qprime / std::f64::consts::SQRT_2 * d.h1
            + 2.0 * PI * d.norm_q.powi(3) * (1.0 + d.norm_q.cbrt()),
        true,
    );

    per_gap_battery(a, &mut b)?;

    Ok(InequalityReport {
        entries: b.entries,
        per_gap: b.per_gap,
    })
}

fn per_gap_battery(a: &Analysis, b: &mut Battery) -> Result<()> {
    let m = &a.moments;
    let spec = &a.spectrum;
    let (c0, ci) = (m.c0, m.c_i);
    let rho_sq = m.rho_l2 * m.rho_l2;
    let all = &spec.gaps;
    let open: Vec<_> = spec.gaps.iter().filter(|g| !g.closed).collect();
    let idx = |n: usize| n - 1;

    let profile: Vec<(usize, f64, f64)> = open
        .par_iter()
        .map(|g| -> Result<(usize, f64, f64)> {
            let quad = GapQuadrature::build(&a.potential, spec, g.n, PROFILE_NODES)?;
            // Worst node of v >= sqrt((z - z-)(z+ - z)), both sides scaled by h.
            let worst = quad
                .nodes
                .iter()
                .map(|nd| {
                    let vn = (nd.from_minus * nd.to_plus).sqrt();
                    (vn, nd.v)
                })
                .min_by(|x, y| (x.1 - x.0).total_cmp(&(y.1 - y.0)))
                .unwrap_or((0.0, 0.0));
            Ok((g.n, worst.0, worst.1))
        })
        .collect::<Result<_>>()?;
    // Pointwise margins are reported relative to the gap height.
    let profile = profile
        .into_iter()
        .map(|(n, vn, v)| {
            let h = all[idx(n)].h;
            (n, vn / h, v / h)
        })
        .collect();
    b.per_gap("v>=sqrt((z-z-)(z+-z))", profile);
    b.per_gap("|g_n|<=2h_n", open.iter().map(|g| (g.n, g.g_len, 2.0 * g.h)).collect());
    b.per_gap_floored("0<=rho_n", all.iter().map(|g| (g.n, 0.0, g.rho)).collect(), PI);

    let i_of = |n: usize| m.i[idx(n)];
    let v_of = |n: usize| m.v_terms[idx(n)];
    let nf = |n: usize| n as f64;
    let collect = |f: &dyn Fn(&crate::hill_floquet::GapDescriptor) -> (f64, f64)| -> Vec<(usize, f64, f64)> {
        open.iter()
            .map(|g| {
                let (l, r) = f(g);
                (g.n, l, r)
            })
            .collect()
    };
    let collect_all = |f: &dyn Fn(&crate::hill_floquet::GapDescriptor) -> (f64, f64)| -> Vec<(usize, f64, f64)> {
        all.iter()
            .map(|g| {
                let (l, r) = f(g);
                (g.n, l, r)
            })
            .collect()
    };

    b.per_gap(
        "2/(3pi)h|gamma|<=2/(3pi)h|g|(z_n+z-+z+)",
        collect(&|g| {
            (
                2.0 / (3.0 * PI) * g.h * g.gamma_len,
                2.0 / (3.0 * PI) * g.h * g.g_len * (g.z_crit + g.z_minus + g.z_plus),
            )
        }),
    );
    b.per_gap(
        "2/(3pi)h|g|(z_n+z-+z+)<=I_n",
        collect(&|g| (2.0 / (3.0 * PI) * g.h * g.g_len * (g.z_crit + g.z_minus + g.z_plus), i_of(g.n))),
    );
    b.per_gap(
        "I_n<=2h|gamma|/pi",
        collect(&|g| (i_of(g.n), 2.0 * g.h * g.gamma_len / PI)),
    );

    let mut g_cumulative = Vec::with_capacity(all.len());
    let mut acc = 0.0;
    for g in all {
        acc += g.g_len;
        g_cumulative.push(acc);
    }
    b.per_gap(
        "z+<=pi n+sum|g_j|",
        collect_all(&|g| (g.z_plus, PI * nf(g.n) + g_cumulative[idx(g.n)])),
    );
    b.per_gap(
        "pi n<=2z-+|rho|^2/pi",
        collect_all(&|g| (PI * nf(g.n), 2.0 * g.z_minus + rho_sq / PI)),
    );
    b.per_gap("2n<=C0*z-", collect_all(&|g| (2.0 * nf(g.n), c0 * g.z_minus)));
    b.per_gap("h_n<=sqrt(C0)/2*|g_n|", collect(&|g| (g.h, c0.sqrt() / 2.0 * g.g_len)));
    b.per_gap(
        "2pi n h^2<=sqrt(C0)*3pi/2*I_n+2|rho|^2/pi*h^2",
        collect(&|g| {
            (
                2.0 * PI * nf(g.n) * g.h * g.h,
                c0.sqrt() * 1.5 * PI * i_of(g.n) + 2.0 * rho_sq / PI * g.h * g.h,
            )
        }),
    );
    b.per_gap(
        "|gamma|/(4pi n C_I)<=h_n",
        collect(&|g| (g.gamma_len / (4.0 * PI * nf(g.n) * ci), g.h)),
    );
    b.per_gap(
        "h_n<=pi*C0^(3/2)*|gamma|/(8pi n)",
        collect(&|g| (g.h, PI * c0.powf(1.5) * g.gamma_len / (8.0 * PI * nf(g.n)))),
    );
    b.per_gap(
        "|gamma|^2/(3pi C_I 2pi n)<=I_n",
        collect(&|g| (g.gamma_len.powi(2) / (3.0 * PI * ci * 2.0 * PI * nf(g.n)), i_of(g.n))),
    );
    b.per_gap(
        "I_n<=C0^(3/2)/2*|gamma|^2/(2pi n)",
        collect(&|g| (i_of(g.n), c0.powf(1.5) / 2.0 * g.gamma_len.powi(2) / (2.0 * PI * nf(g.n)))),
    );
    b.per_gap(
        "8C0^(-3/2)/(3pi^2)*2pi n*h^2<=I_n",
        collect(&|g| {
            (
                8.0 * c0.powf(-1.5) / (3.0 * PI * PI) * 2.0 * PI * nf(g.n) * g.h * g.h,
                i_of(g.n),
            )
        }),
    );
    b.per_gap("I_n<=8n*C_I*h^2", collect(&|g| (i_of(g.n), 8.0 * nf(g.n) * ci * g.h * g.h)));

    let third = |g: &crate::hill_floquet::GapDescriptor| {
        2.0 / (5.0 * PI) * g.h.powi(3) * g.g_len * (3.0 * g.z_crit + 2.0 * g.z_mid())
    };
    b.per_gap(
        "h^2 I_n/5<=2/(5pi)h^3|gamma|",
        collect(&|g| (g.h * g.h * i_of(g.n) / 5.0, 2.0 / (5.0 * PI) * g.h.powi(3) * g.gamma_len)),
    );
    b.per_gap(
        "2/(5pi)h^3|gamma|<=2/(5pi)h^3|g|(3z_n+2z0_n)",
        collect(&|g| (2.0 / (5.0 * PI) * g.h.powi(3) * g.gamma_len, third(g))),
    );
    b.per_gap("2/(5pi)h^3|g|(3z_n+2z0_n)<=V_n", collect(&|g| (third(g), v_of(g.n))));
    b.per_gap("V_n<=2h^2 I_n", collect(&|g| (v_of(g.n), 2.0 * g.h * g.h * i_of(g.n))));
    Ok(())
}

/// One amplitude of a quadratic scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub amplitude: f64,
    pub i_norm_sq: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityScan {
    pub rows: Vec<ScanRow>,
    pub hessian2: Option<[[f64; 2]; 2]>,
    pub hessian_pd: Option<bool>,
}

/// `W / (3 sum I_n^2)` along `a -> a * family`.
pub fn quadratic_scan(family: &Potential, amplitudes: &[f64], opts: &VerifyOptions) -> Result<Vec<ScanRow>> {
    if amplitudes.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(SpectralError::InvalidArgument("scan amplitudes must be positive".into()));
    }
    if amplitudes.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SpectralError::InvalidArgument("scan amplitudes must be strictly descending".into()));
    }
    amplitudes
        .iter()
        .map(|&amp| {
            let a = analyze(&family.scaled(amp), opts)?;
            let i_norm_sq: f64 = a.moments.i.iter().map(|x| x * x).sum();
            Ok(ScanRow {
                amplitude: amp,
                i_norm_sq,
                v: a.moments.w,
                ratio: if i_norm_sq > 0.0 { a.moments.w / (3.0 * i_norm_sq) } else { f64::NAN },
            })
        })
        .collect()
}

/// Finite-difference Hessian of `V` in the first two actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HessianEstimate {
    pub matrix: [[f64; 2]; 2],
    pub eigenvalues: [f64; 2],
    pub positive_definite: bool,
    /// Relative asymmetry `|H12 - H21| / max|H|` before symmetrization.
    pub asymmetry: f64,
    pub jacobian_condition: f64,
    /// `sum_{n > 2} I_n / sum I_n` at the stencil centre.
    pub tail_guard: f64,
}

/// Largest accepted condition number of `d(I1, I2)/d(a, b)`.
pub const MAX_JACOBIAN_CONDITION: f64 = 1e6;

pub fn hessian_check(
    family_a: &Potential,
    family_b: &Potential,
    a0: f64,
    b0: f64,
    step: f64,
    opts: &VerifyOptions,
) -> Result<HessianEstimate> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(SpectralError::InvalidArgument(format!("stencil step {step}")));
    }
    // (W, I1, I2, tail) on the 3x3 stencil, row-major in (a, b) offsets -1, 0, 1.
    let points: Vec<(f64, f64)> = (-1..=1)
        .flat_map(|i| (-1..=1).map(move |j| (a0 + i as f64 * step, b0 + j as f64 * step)))
        .collect();
    let samples: Vec<[f64; 4]> = points
        .iter()
        .map(|&(a, b)| {
            let q = family_a.scaled(a).sum(&family_b.scaled(b));
            let an = analyze(&q, opts)?;
            let i = &an.moments.i;
            let first = |k: usize| i.get(k).copied().unwrap_or(0.0);
            let total: f64 = i.iter().sum();
            let tail = if total > 0.0 { (total - first(0) - first(1)) / total } else { 0.0 };
            Ok([an.moments.w, first(0), first(1), tail])
        })
        .collect::<Result<_>>()?;
    let f = |k: usize, i: i32, j: i32| samples[((i + 1) * 3 + (j + 1)) as usize][k];
    let h = step;
    let grad = |k: usize| [(f(k, 1, 0) - f(k, -1, 0)) / (2.0 * h), (f(k, 0, 1) - f(k, 0, -1)) / (2.0 * h)];
    let hess = |k: usize| {
        let aa = (f(k, 1, 0) - 2.0 * f(k, 0, 0) + f(k, -1, 0)) / (h * h);
        let bb = (f(k, 0, 1) - 2.0 * f(k, 0, 0) + f(k, 0, -1)) / (h * h);
        let ab = (f(k, 1, 1) - f(k, 1, -1) - f(k, -1, 1) + f(k, -1, -1)) / (4.0 * h * h);
        [[aa, ab], [ab, bb]]
    };
    // J[i][j] = d I_{i+1} / d (a, b)_j.
    let (g1, g2) = (grad(1), grad(2));
    let jac = nalgebra::Matrix2::new(g1[0], g1[1], g2[0], g2[1]);
    let sv = jac.singular_values();
    let cond = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
    if cond.is_nan() || cond > MAX_JACOBIAN_CONDITION {
        return Err(SpectralError::IllConditioned { cond });
    }
    let jinv = jac.try_inverse().ok_or(SpectralError::IllConditioned { cond })?;
    let gw = grad(0);
    let grad_v = jinv.transpose() * nalgebra::Vector2::new(gw[0], gw[1]);
    let to_m = |m: [[f64; 2]; 2]| nalgebra::Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]);
    let corrected = to_m(hess(0)) - to_m(hess(1)) * grad_v[0] - to_m(hess(2)) * grad_v[1];
    let hv = jinv.transpose() * corrected * jinv;
    let scale = hv.amax();
    let asymmetry = if scale > 0.0 { (hv[(0, 1)] - hv[(1, 0)]).abs() / scale } else { 0.0 };
    let sym = (hv + hv.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let (e0, e1) = (eig[0].min(eig[1]), eig[0].max(eig[1]));
    Ok(HessianEstimate {
        matrix: [[sym[(0, 0)], sym[(0, 1)]], [sym[(1, 0)], sym[(1, 1)]]],
        eigenvalues: [e0, e1],
        positive_definite: e0 > 0.0,
        asymmetry,
        jacobian_condition: cond,
        tail_guard: samples[4][3],
    })
}

/// Heights at which the off-axis quasimomentum is sampled.
pub const EXPANSION_HEIGHTS: [f64; 3] = [50.0, 100.0, 200.0];

/// `(Q0, Q2, Q4)` from the large-height expansion
/// `-z (k(z) - z) = Q0 - Q2 / y^2 + Q4 / y^4 + O(y^-6)` at `z = i y`.
pub fn asymptotic_moments(q: &Potential, spec: &BandGapSpectrum, quad_tol: f64) -> Result<[f64; 3]> {
    let mut mat = nalgebra::Matrix3::zeros();
    let mut rhs = nalgebra::Vector3::zeros();
    for (row, &y) in EXPANSION_HEIGHTS.iter().enumerate() {
        let z = num_complex::Complex64::new(0.0, y);
        let k = crate::action_integrals::quasimomentum_offaxis(q, spec, z, quad_tol)?;
        rhs[row] = (-z * (k - z)).re;
        let s = 1.0 / (y * y);
        mat[(row, 0)] = 1.0;
        mat[(row, 1)] = -s;
        mat[(row, 2)] = s * s;
    }
    let sol = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SpectralError::InvalidArgument("singular expansion system".into()))?;
    Ok([sol[0], sol[1], sol[2]])
}
