use kdv_spectral::hill_floquet::SpectrumOptions;
use kdv_spectral::verify::{analyze, identity_report, inequality_report, Analysis, VerifyOptions};
use kdv_spectral::Potential;
use proptest::prelude::*;

fn small_potential() -> impl Strategy<Value = Potential> {
    (1usize..=2).prop_flat_map(|m| {
        (
            prop::collection::vec(-1.0f64..1.0, m),
            prop::collection::vec(-1.0f64..1.0, m),
        )
            .prop_map(|(c, s)| Potential::new(c, s).unwrap())
    })
}

fn fixed(n: usize) -> VerifyOptions {
    VerifyOptions {
        spectrum: SpectrumOptions::fixed(n),
        ..VerifyOptions::default()
    }
}

fn actions(a: &Analysis) -> Vec<f64> {
    a.moments.i.clone()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn spectrum_and_actions_are_translation_invariant(q in small_potential(), s in 0.0f64..1.0) {
        let a = analyze(&q, &fixed(6)).unwrap();
        let b = analyze(&q.translated(s), &fixed(6)).unwrap();
        prop_assert!((a.spectrum.q0 - b.spectrum.q0).abs() <= 1e-10 * a.spectrum.q0.abs().max(1.0));
        for (ga, gb) in a.spectrum.gaps.iter().zip(&b.spectrum.gaps) {
            prop_assert_eq!(ga.closed, gb.closed);
            prop_assert!((ga.lambda_minus - gb.lambda_minus).abs() <= 1e-10 * ga.lambda_minus.abs().max(1.0));
            prop_assert!((ga.lambda_plus - gb.lambda_plus).abs() <= 1e-10 * ga.lambda_plus.abs().max(1.0));
        }
        let total: f64 = actions(&a).iter().sum();
        for (x, y) in actions(&a).iter().zip(&actions(&b)) {
            prop_assert!((x - y).abs() <= 1e-8 * total);
        }
    }

    #[test]
    fn reflection_preserves_the_spectrum(q in small_potential()) {
        let reflected = Potential::new(
            q.cos_coeffs().to_vec(),
            q.sin_coeffs().iter().map(|b| -b).collect(),
        ).unwrap();
        let a = analyze(&q, &fixed(5)).unwrap();
        let b = analyze(&reflected, &fixed(5)).unwrap();
        prop_assert!((a.moments.w - b.moments.w).abs() <= 1e-10 * a.moments.w.max(1e-300));
        prop_assert!((a.moments.p_3 - b.moments.p_3).abs() <= 1e-10 * a.moments.p_3.max(1e-300));
    }

    #[test]
    fn nonlinear_term_is_nonnegative_and_checks_pass(q in small_potential()) {
        let a = analyze(&q, &VerifyOptions::default()).unwrap();
        prop_assert!(a.moments.w >= 0.0);
        let max_gamma = a.spectrum.gaps.iter().map(|g| g.gamma_len).fold(0.0, f64::max);
        if max_gamma > 1e-8 {
            prop_assert!(a.moments.w > 0.0);
        }
        prop_assert!(a.moments.i.iter().all(|&i| i >= 0.0));
        prop_assert!(a.moments.v_terms.iter().all(|&v| v >= 0.0));
        prop_assert!(identity_report(&a).all_pass());
        prop_assert!(inequality_report(&a).unwrap().all_pass());
    }
}

#[test]
fn nonlinear_term_vanishes_only_at_zero() {
    let a = analyze(&Potential::zero(), &VerifyOptions::default()).unwrap();
    assert_eq!(a.moments.w, 0.0);
    let b = analyze(&Potential::cosine(1, 1e-3).unwrap(), &VerifyOptions::default()).unwrap();
    assert!(b.moments.w > 0.0);
}

#[test]
fn nonlinear_term_is_continuous_along_a_ray() {
    let family = Potential::new(vec![1.0, 0.5], vec![0.3, -0.4]).unwrap();
    let opts = VerifyOptions::default();
    let step = 0.05;
    let w: Vec<f64> = (0..=40)
        .map(|i| analyze(&family.scaled(i as f64 * step), &opts).unwrap().moments.w)
        .collect();
    for i in 1..w.len() - 1 {
        // Local slope from the neighbours bounds each increment.
        let slope = (w[i + 1] - w[i - 1]).abs() / (2.0 * step);
        let jump = (w[i + 1] - w[i]).abs().max((w[i] - w[i - 1]).abs());
        assert!(jump <= 2.0 * slope * step + 1e-12, "at a = {}", i as f64 * step);
    }
    assert!(w.windows(2).all(|p| p[1] >= p[0]), "W grows along this ray");
}

#[test]
fn flagship_residual_shrinks_with_more_gaps() {
    let q = Potential::cosine(1, 2.0).unwrap();
    let residual = |n| {
        let a = analyze(&q, &fixed(n)).unwrap();
        let r = identity_report(&a);
        r.get("H2=P3-W").unwrap().rel_residual
    };
    let (small, large) = (residual(2), residual(6));
    assert!(large < small, "{small:e} -> {large:e}");
    assert!(large < 1e-12);
}
