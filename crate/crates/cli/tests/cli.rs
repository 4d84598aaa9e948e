use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

fn fmto(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fmto"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Every file under `dir` by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    walkdir::WalkDir::new(dir)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(dir).unwrap().display().to_string();
            (rel, std::fs::read(e.path()).unwrap())
        })
        .collect()
}

const SMALL: &str = r#"
[[scenario]]
name = "coils"
command = "coils"

[[scenario]]
name = "bounds"
command = "bounds"
[scenario.bounds]
n_lambda = 20
numeric = true
[[scenario.bounds.thermal]]
label = "1nT"
bias_field = 1e-9
temperature = 0.05
q_factor = 1e7

[[scenario]]
name = "scan"
command = "sensitivity"

[[scenario]]
name = "sim"
command = "simulate"
seed = 7
[scenario.simulate]
duration = 20.0
render = true
drive = [{ amplitude = 1e-10, frequency = 1.0 }]

[[scenario]]
name = "sweep"
command = "sweep"
[scenario.sweep]
f_min = 4.7
f_max = 5.3
step = 0.05
measure_time = 10.0
"#;

#[test]
fn empty_config_is_a_no_op() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "empty.toml", "");
    let o = fmto(
        &["run", "--config", cfg.to_str().unwrap(), "--out", "out"],
        d.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_keys_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    for text in [
        "bogus = 1\n",
        "[[scenario]]\nname = \"a\"\ncommand = \"coils\"\ncolour = \"red\"\n",
        "[[scenario]]\nname = \"a\"\ncommand = \"simulate\"\n[scenario.simulate]\ndurashun = 3.0\n",
    ] {
        let cfg = write(d.path(), "bad.toml", text);
        let o = fmto(
            &["run", "--config", cfg.to_str().unwrap(), "--out", "out"],
            d.path(),
        );
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(
            String::from_utf8_lossy(&o.stderr).contains("unknown field"),
            "{text}"
        );
    }
}

#[test]
fn reruns_are_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "small.toml", SMALL);
    for out in ["a", "b"] {
        let o = fmto(
            &["run", "--config", cfg.to_str().unwrap(), "--out", out],
            d.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = snapshot(&d.path().join("a"));
    let b = snapshot(&d.path().join("b"));
    assert!(a.contains_key("sim/track.csv") && a.contains_key("bounds/bounds_thermal_1nT.csv"));
    assert!(a.contains_key("sweep/manifest.toml"));
    assert_eq!(a, b);
}

#[test]
fn seed_override_changes_stochastic_outputs_only() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "small.toml", SMALL);
    for (out, seed) in [("a", "1"), ("b", "2")] {
        let o = fmto(
            &[
                "run",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out,
                "--seed",
                seed,
            ],
            d.path(),
        );
        assert!(o.status.success());
    }
    let read = |p: &str| std::fs::read(d.path().join(p)).unwrap();
    assert_ne!(read("a/sim/angles.csv"), read("b/sim/angles.csv"));
    assert_eq!(read("a/coils/coils.csv"), read("b/coils/coils.csv"));
}

#[test]
fn manifest_hashes_match_files() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "small.toml", SMALL);
    assert!(fmto(
        &["coils", "--config", cfg.to_str().unwrap(), "--out", "o"],
        d.path()
    )
    .status
    .success());
    let text = std::fs::read_to_string(d.path().join("o/coils/manifest.toml")).unwrap();
    let m: toml::Table = toml::from_str(&text).unwrap();
    assert_eq!(m["command"].as_str(), Some("coils"));
    let outputs = m["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 3);
    for e in outputs {
        let file = e["file"].as_str().unwrap();
        let bytes = std::fs::read(d.path().join("o/coils").join(file)).unwrap();
        assert_eq!(
            e["sha256"].as_str().unwrap(),
            fmto_cli::manifest::sha256_hex(&bytes)
        );
    }
    // only the coils scenario ran
    assert!(!d.path().join("o/bounds").exists());
}

#[test]
fn simulate_then_analyze_recovers_the_resonance() {
    let d = tempfile::tempdir().unwrap();
    let sim = write(
        d.path(),
        "sim.toml",
        r#"
[[scenario]]
name = "free"
command = "simulate"
seed = 3
[scenario.simulate]
duration = 400.0
settle_time = 80.0
drive = [{ amplitude = 2e-10, frequency = 1.0 }]
"#,
    );
    let o = fmto(
        &["run", "--config", sim.to_str().unwrap(), "--out", "s"],
        d.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ana = write(
        d.path(),
        "ana.toml",
        r#"
[[scenario]]
name = "psd"
command = "analyze"
[scenario.analyze]
input = "s/free/angles.csv"
kind = "angles"
segment_length = 40.0
lock_in = [1.0]
"#,
    );
    let o = fmto(
        &["run", "--config", ana.to_str().unwrap(), "--out", "a"],
        d.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: toml::Table =
        toml::from_str(&std::fs::read_to_string(d.path().join("a/psd/manifest.toml")).unwrap())
            .unwrap();
    let results = m["results"].as_table().unwrap();
    let f_r = results["fit_f_r_hz"].as_float().unwrap();
    let q = results["fit_q"].as_float().unwrap();
    assert!((f_r - 4.99).abs() < 0.05, "f_r = {f_r}");
    assert!((q / 39.0 - 1.0).abs() < 0.3, "Q = {q}");

    let p = fmto_core::OscillatorParams::reference();
    let want = p.moment() * 2e-10 * fmto_core::dynamics::susceptibility_sq(1.0, &p).sqrt();
    let mut r = csv::Reader::from_path(d.path().join("a/psd/lockin.csv")).unwrap();
    let row = r.records().next().unwrap().unwrap();
    let amp: f64 = row[1].parse().unwrap();
    assert!((amp / want - 1.0).abs() < 0.05, "{amp} vs {want}");
}

#[test]
fn bundled_config_round_trips() {
    let d = tempfile::tempdir().unwrap();
    let o = fmto(&["show-config"], d.path());
    assert!(o.status.success());
    let cfg = fmto_cli::RunConfig::from_toml_str(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert!(cfg.scenario.iter().any(|s| s.name == "calibration"));
    let o = fmto(
        &["bounds", "--bundled", "paper-replica", "--out", "o"],
        d.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.path().join("o/bounds/bounds_numeric.csv").exists());
}

#[test]
fn missing_input_fails_with_run_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "a.toml",
        "[[scenario]]\nname = \"x\"\ncommand = \"analyze\"\n[scenario.analyze]\ninput = \"nope.csv\"\n",
    );
    let o = fmto(
        &["run", "--config", cfg.to_str().unwrap(), "--out", "o"],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bundled_calibration_ends_in_a_sensitivity_curve() {
    let d = tempfile::tempdir().unwrap();
    let o = fmto(
        &["calibrate", "--bundled", "paper-replica", "--out", "o"],
        d.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let curve = fmto_core::SensitivityCurve::read_csv(
        d.path().join("o/calibration/sensitivity_measured.csv"),
    )
    .unwrap();
    assert!(!curve.is_empty());
    // the white floor sits well above the 300 K thermal limit away from f_r
    let (_, eta) = curve.nearest(1.0).unwrap();
    assert!(eta > 1e-14 && eta < 1e-9, "eta(1 Hz) = {eta}");
    for f in [
        "transfer.toml",
        "resonance_fit.toml",
        "sweep.csv",
        "manifest.toml",
    ] {
        assert!(d.path().join("o/calibration").join(f).exists(), "{f}");
    }
}
