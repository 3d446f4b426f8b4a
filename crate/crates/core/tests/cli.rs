use std::path::{Path, PathBuf};

use kdv_spectral::cli::{run, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK};
use kdv_spectral::hill_floquet::{band_edges, SpectrumOptions};
use kdv_spectral::Potential;
use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    out: String,
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn invoke(dir: &TempDir, command: &str, config: &Path, extra: &[&str]) -> Run {
    let out = dir.path().join(format!("{command}.out"));
    let mut argv: Vec<String> = vec![
        "kdv-spectral".into(),
        command.into(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    argv.extend(extra.iter().map(|s| s.to_string()));
    let code = run(argv);
    Run {
        code,
        out: std::fs::read_to_string(&out).unwrap_or_default(),
    }
}

const FLAGSHIP: &str = r#"{"potential": {"cos": [2.0], "sin": [0.0]}}"#;

#[test]
fn verify_zero_potential_passes_trivially() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "zero.json", r#"{"potential": {"cos": [], "sin": []}}"#);
    let r = invoke(&dir, "verify", &cfg, &[]);
    assert_eq!(r.code, EXIT_OK);
    let doc: Value = serde_json::from_str(&r.out).unwrap();
    for e in doc["identities"]["entries"].as_array().unwrap() {
        assert_eq!(e["lhs"], e["rhs"], "{e}");
        assert_eq!(e["pass"], true);
    }
    assert!(doc["inequalities"]["entries"].as_array().unwrap().iter().all(|e| e["pass"] == true));
}

#[test]
fn verify_flagship_reports_the_hamiltonian_identity() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "flag.json", FLAGSHIP);
    let r = invoke(&dir, "verify", &cfg, &[]);
    assert_eq!(r.code, EXIT_OK);
    let doc: Value = serde_json::from_str(&r.out).unwrap();
    let keys: Vec<&str> = doc.as_object().unwrap().keys().map(String::as_str).collect();
    for key in ["spectrum", "actions", "moments", "identities", "inequalities", "meta"] {
        assert!(keys.contains(&key), "missing {key}");
    }
    let entry = doc["identities"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["name"] == "H2=P3-W")
        .unwrap();
    assert!(entry["rel_residual"].as_f64().unwrap() < 1e-6);
    assert_eq!(doc["meta"]["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn gap_override_fixes_the_gap_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "flag.json", FLAGSHIP);
    let r = invoke(&dir, "verify", &cfg, &["--gaps", "3"]);
    assert_eq!(r.code, EXIT_OK);
    let doc: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(doc["meta"]["n_gaps"], 3);
    assert_eq!(doc["actions"].as_array().unwrap().len(), 3);
}

#[test]
fn truncated_spectrum_is_flagged_unreliable() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "big.json", r#"{"potential": {"cos": [6.0], "sin": [0.0]}}"#);
    let r = invoke(&dir, "verify", &cfg, &["--gaps", "1"]);
    let doc: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(doc["identities"]["unreliable"], true);
    let entries = doc["identities"]["entries"].as_array().unwrap();
    assert!(entries.iter().any(|e| e["pass"] == false));
    assert!(entries.iter().all(|e| e["flagged"] == true));
    assert_eq!(r.code, EXIT_OK);
}

#[test]
fn profile_vanishes_at_edges_and_peaks_at_critical_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "flag.json", FLAGSHIP);
    let r = invoke(&dir, "profile", &cfg, &[]);
    assert_eq!(r.code, EXIT_OK);
    let mut lines = r.out.lines();
    assert_eq!(lines.next(), Some("n,z,v"));
    let rows: Vec<(usize, f64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let spec = band_edges(&Potential::cosine(1, 2.0).unwrap(), &SpectrumOptions::default()).unwrap();
    for g in spec.open_gaps() {
        let gap: Vec<_> = rows.iter().filter(|r| r.0 == g.n).collect();
        assert!(gap.len() > 3);
        assert_eq!(gap.first().unwrap().2, 0.0);
        assert_eq!(gap.last().unwrap().2, 0.0);
        let peak = gap.iter().map(|r| r.2).fold(0.0, f64::max);
        let at_crit = gap.iter().find(|r| r.1 == g.z_crit).unwrap();
        assert!((at_crit.2 - g.h).abs() <= 1e-12 * g.h);
        assert!(peak - at_crit.2 <= 1e-12 * g.h);
    }
}

#[test]
fn scan_emits_csv_with_seventeen_digits() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "scan.json",
        r#"{"potential": {"cos": [2.0], "sin": [0.0]}, "scan": {"amplitudes": [0.5, 0.1, 0.01]}}"#,
    );
    let r = invoke(&dir, "scan", &cfg, &[]);
    assert_eq!(r.code, EXIT_OK);
    let lines: Vec<&str> = r.out.lines().collect();
    assert_eq!(lines[0], "amplitude,I_norm_sq,V,ratio");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("5.0000000000000000e-1,"));
    let ratios: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(ratios.windows(2).all(|w| (1.0 - w[1]).abs() < (1.0 - w[0]).abs()));
}

#[test]
fn hessian_command_reports_positive_definite_matrix() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "hess.json",
        r#"{"potential": {"cos": [2.0], "sin": [0.0]},
            "hessian": {"family_b": {"cos": [0.0, 2.0], "sin": [0.0, 0.0]}, "a0": 0.5, "b0": 0.5}}"#,
    );
    let r = invoke(&dir, "hessian", &cfg, &[]);
    assert_eq!(r.code, EXIT_OK);
    let doc: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(doc["positive_definite"], true);
    let m = &doc["matrix"];
    assert_eq!(m[0][1], m[1][0]);
}

#[test]
fn degenerate_hessian_directions_are_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "hess.json",
        r#"{"potential": {"cos": [2.0], "sin": [0.0]},
            "hessian": {"family_b": {"cos": [2.0], "sin": [0.0]}, "a0": 0.5, "b0": 0.5}}"#,
    );
    assert_eq!(invoke(&dir, "hessian", &cfg, &[]).code, EXIT_NUMERICAL);
}

#[test]
fn malformed_configs_exit_with_config_error() {
    let dir = TempDir::new().unwrap();
    for (i, body) in [
        "{not json",
        r#"{"potential": {"cos": [1.0], "sin": [0.0]}, "tolerances": {"ode": 0.5}}"#,
        r#"{"potential": {"cos": [1.0], "sin": [0.0]}, "extra": 1}"#,
        r#"{"potential": {"cos": [1.0], "sin": []}}"#,
        r#"{"gaps": {"max": 4}}"#,
    ]
    .iter()
    .enumerate()
    {
        let cfg = write_config(&dir, &format!("bad{i}.json"), body);
        assert_eq!(invoke(&dir, "spectrum", &cfg, &[]).code, EXIT_CONFIG, "{body}");
    }
    let missing = dir.path().join("absent.json");
    assert_eq!(invoke(&dir, "spectrum", &missing, &[]).code, EXIT_CONFIG);
    assert_eq!(run(["kdv-spectral", "spectrum"]), EXIT_CONFIG);
    assert_eq!(run(["kdv-spectral", "transmogrify"]), EXIT_CONFIG);
}

#[test]
fn spectrum_csv_lists_every_gap() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "flag.json", FLAGSHIP);
    let r = invoke(&dir, "spectrum", &cfg, &["--format", "csv", "--gaps", "5"]);
    assert_eq!(r.code, EXIT_OK);
    assert_eq!(r.out.lines().count(), 6);
}

#[test]
fn corpus_verify_honours_the_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "corpus.json", r#"{"corpus": {"size": 2}}"#);
    let a = invoke(&dir, "verify", &cfg, &["--seed", "11"]);
    let b = invoke(&dir, "verify", &cfg, &["--seed", "12"]);
    assert_eq!((a.code, b.code), (EXIT_OK, EXIT_OK));
    let doc: Value = serde_json::from_str(&a.out).unwrap();
    assert_eq!(doc.as_array().unwrap().len(), 2);
    assert_ne!(a.out, b.out);
}
