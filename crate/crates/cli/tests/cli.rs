use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hyperdof::circuit::ProtocolResult;
use hyperdof::hilbert::{PhotonInputSpec, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn hyperdof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperdof")).args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = hyperdof(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn c(v: &Value) -> C64 {
    C64::new(v["re"].as_f64().unwrap(), v["im"].as_f64().unwrap())
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

fn write_config(dir: &Path, value: &Value) -> String {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn coeffs_preset_without_leakage() {
    let v = ok_json(&["coeffs", "--preset", "realistic", "--ks-over-k", "0", "--json"]);
    let r = c(&v["coeffs"]["r"]);
    assert!((r.norm() - 0.9454).abs() < 5e-4, "{r}");
    assert!((f(&v["cooperativity"]) - 8.654).abs() < 1e-3);
}

#[test]
fn coeffs_cold_cavity() {
    let v = ok_json(&["coeffs", "--g", "0", "--ks-over-k", "0", "--resonant", "--json"]);
    assert!(c(&v["coeffs"]["r0"]).norm() < 1e-15);
    assert!((c(&v["coeffs"]["t0"]) - C64::new(-1.0, 0.0)).norm() < 1e-15);
}

#[test]
fn coeffs_strong_coupling_limit() {
    let v = ok_json(&["coeffs", "--cooperativity", "1e6", "--ks-over-k", "0", "--resonant", "--json"]);
    assert!((c(&v["coeffs"]["r"]) - C64::new(1.0, 0.0)).norm() < 1e-5);
}

#[test]
fn invalid_parameters_exit_2_naming_the_invariant() {
    for (args, needle) in [
        (vec!["coeffs", "--kappa", "-1"], "kappa must be > 0"),
        (vec!["coeffs", "--ks-over-k", "-0.1"], "kappa_s must be >= 0"),
        (vec!["block-metrics", "--method", "quadrature", "--nodes", "1"], "nodes"),
        (vec!["parity", "--force-outcome", "+-"], "three signs"),
        (vec!["sweep", "--grid", "ks=0:0.5:0"], "count"),
    ] {
        let out = hyperdof(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{args:?}: {err}");
    }
}

#[test]
fn truth_table_passes() {
    let v = ok_json(&["truth-table", "--json"]);
    assert_eq!(v["pass"], json!(true));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 64);
    let row = |a: &str, b: &str| rows.iter().find(|r| r["input_a"] == a && r["input_b"] == b).unwrap();
    assert_eq!(f(&row("w2,m2,s", "w2,m2,s")["expected"]), -1.0);
    assert!((c(&row("w2,m2,s", "w2,m2,s")["phase"]) + 1.0).norm() < 1e-10);
    assert!((c(&row("w1,m1,l", "w2,m2,s")["phase"]) - 1.0).norm() < 1e-10);
    for r in rows {
        assert_eq!(r["input_a"], r["output_a"]);
        assert_eq!(r["input_b"], r["output_b"]);
    }

    let out = hyperdof(&["truth-table"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().last().unwrap().starts_with("PASS"));
    assert_eq!(text.lines().count(), 66);
}

fn amp_pairs(spec: &PhotonInputSpec) -> [[C64; 2]; 3] {
    [spec.freq_amps, spec.spatial_amps, spec.time_amps]
}

/// Corrected parity state for an all-even or all-odd outcome, as a map from
/// photon bits `(x, y)` to amplitude, normalized.
fn uniform_parity_oracle(a: &PhotonInputSpec, b: &PhotonInputSpec, odd: bool) -> Vec<((usize, usize), C64)> {
    let (pa, pb) = (amp_pairs(a), amp_pairs(b));
    let mut out = Vec::new();
    for x in 0..8usize {
        let y = if odd { x ^ 7 } else { x };
        let amp: C64 = (0..3).map(|k| pa[k][(x >> k) & 1] * pb[k][(y >> k) & 1]).product();
        out.push(((x, y), amp));
    }
    let norm = out.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>().sqrt();
    out.into_iter().map(|(k, a)| (k, a / norm)).collect()
}

/// Photon bits `freq | spatial << 1 | timebin << 2` of both photons, from a
/// joint index with both photons `R`-polarized.
fn decode(index: usize) -> (usize, usize) {
    let (a, b) = (index % 16, (index / 16) % 16);
    assert_eq!(a & 1, 0);
    assert_eq!(b & 1, 0);
    (a >> 1, b >> 1)
}

#[test]
fn parity_forced_outcomes_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let dir = tempfile::tempdir().unwrap();
    for trial in 0..3 {
        let (a, b) = (PhotonInputSpec::random(&mut rng), PhotonInputSpec::random(&mut rng));
        let cfg = write_config(dir.path(), &json!({ "photon_a": a, "photon_b": b }));
        for (outcome, parity, odd) in [("+++", "even", false), ("---", "odd", true)] {
            let v = ok_json(&["parity", "--config", &cfg, "--force-outcome", outcome, "--json"]);
            assert_eq!(v["outcome"], outcome);
            assert_eq!(v["parity"], json!([parity, parity, parity]), "trial {trial}");
            let got: Vec<((usize, usize), C64)> = v["corrected_state"]["amplitudes"]
                .as_array()
                .unwrap()
                .iter()
                .map(|e| (decode(e["index"].as_u64().unwrap() as usize), c(e)))
                .collect();
            let want = uniform_parity_oracle(&a, &b, odd);
            let find = |list: &[((usize, usize), C64)], k| {
                list.iter().find(|(key, _)| *key == k).map_or(C64::new(0.0, 0.0), |(_, a)| *a)
            };
            let anchor = want.iter().max_by(|p, q| p.1.norm().total_cmp(&q.1.norm())).unwrap().0;
            let rot = find(&want, anchor) / find(&got, anchor);
            assert!((rot.norm() - 1.0).abs() < 1e-9);
            for (k, w) in &want {
                assert!((find(&got, *k) * rot - w).norm() < 1e-10, "{outcome} {k:?}");
            }
            for (k, g) in &got {
                assert!(g.norm() < 1e-12 || want.iter().any(|(key, _)| key == k), "stray {k:?}");
            }
        }
    }
}

#[test]
fn parity_shots_are_equiprobable_for_balanced_inputs() {
    let v = ok_json(&["parity", "--inputs", "uniform", "--shots", "100000", "--seed", "5", "--json"]);
    let shots = v["shots"].as_array().unwrap();
    assert_eq!(shots.len(), 8);
    for s in shots {
        assert!((f(&s["frequency"]) - 0.125).abs() < 0.005, "{s}");
        assert!((f(&s["probability"]) - 0.125).abs() < 1e-10);
    }
}

#[test]
fn block_metrics_headline_values() {
    let v = ok_json(&["block-metrics", "--preset", "realistic", "--json"]);
    assert!((f(&v["metrics"]["avg_fidelity"]) - 0.9999).abs() <= 5e-4);
    assert!((f(&v["metrics"]["avg_efficiency"]) - 0.6601).abs() <= 5e-4);
    assert!((f(&v["efficiency_closed_form"]) - 0.6601).abs() <= 5e-4);
}

#[test]
fn block_metrics_ideal_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let ideal = json!({ "coeffs": {
        "r": {"re": 1.0, "im": 0.0}, "t": {"re": 0.0, "im": 0.0},
        "r0": {"re": 0.0, "im": 0.0}, "t0": {"re": -1.0, "im": 0.0}
    }});
    let cfg = write_config(dir.path(), &ideal);
    let v = ok_json(&["block-metrics", "--config", &cfg, "--json"]);
    assert!((f(&v["metrics"]["avg_fidelity"]) - 1.0).abs() < 1e-12);
    assert!((f(&v["metrics"]["avg_efficiency"]) - 1.0).abs() < 1e-12);
}

#[test]
fn block_metrics_monte_carlo_within_three_sigma() {
    let quad = ok_json(&["block-metrics", "--json"]);
    let mc = ok_json(&["block-metrics", "--method", "monte-carlo", "--samples", "100000", "--seed", "7", "--json"]);
    for (mean, err) in [("avg_fidelity", "fidelity_std_error"), ("avg_efficiency", "efficiency_std_error")] {
        let diff = (f(&mc["metrics"][mean]) - f(&quad["metrics"][mean])).abs();
        assert!(diff < 3.0 * f(&mc["metrics"][err]), "{mean}: {diff}");
    }
}

#[test]
fn sweep_single_point_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    let p = path.to_str().unwrap();
    let v = ok_json(&["sweep", "--grid", "ks=0.1 coop=8.654", "--out", p, "--json"]);
    assert_eq!(v["rows"], 1);
    let first = fs::read(&path).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().next().unwrap(), "ks_over_k,cooperativity,avg_fidelity,avg_efficiency");
    ok_json(&["sweep", "--grid", "ks=0.1 coop=8.654", "--out", p, "--json"]);
    assert_eq!(fs::read(&path).unwrap(), first);
}

#[test]
fn sweep_default_grid_has_headline_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("default.csv");
    let v = ok_json(&["sweep", "--method", "quadrature", "--nodes", "32", "--out", path.to_str().unwrap(), "--json"]);
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count() - 1, v["rows"].as_u64().unwrap() as usize);
    let row: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect::<Vec<f64>>())
        .find(|r| (r[0] - 0.1).abs() < 1e-12 && (r[1] - 8.654).abs() < 1e-12)
        .expect("headline row");
    assert!((row[2] - 0.9999).abs() <= 5e-4);
    assert!((row[3] - 0.6601).abs() <= 5e-4);
}

#[test]
fn sweep_ranges_and_lists() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let v = ok_json(&[
        "sweep", "--grid", "ks=0:0.5:3 coop=1,8.654", "--nodes", "16", "--out", path.to_str().unwrap(), "--json",
    ]);
    assert_eq!(v["rows"], 6);
}

fn simulate(args: &[&str]) -> (Value, ProtocolResult) {
    let out = hyperdof(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    (serde_json::from_slice(&out.stdout).unwrap(), serde_json::from_slice(&out.stdout).unwrap())
}

#[test]
fn simulate_ideal_and_lossy() {
    let (_, ideal) = simulate(&["simulate", "--basis-a", "w2,m1,s", "--basis-b", "w2,m2,l"]);
    assert!((ideal.success_probability - 1.0).abs() < 1e-12);
    let (_, lossy) = simulate(&["simulate", "--basis-a", "w2,m1,s", "--basis-b", "w2,m2,l", "--physics", "lossy"]);
    assert!(lossy.success_probability < 1.0);
    assert!(!lossy.notes.is_empty());
}

#[test]
fn simulate_output_round_trips() {
    let (raw, res) = simulate(&["simulate", "--mode", "parity", "--seed", "9", "--record-intermediates"]);
    assert_eq!(serde_json::to_value(&res).unwrap(), raw);
}

#[test]
fn simulate_stage_labels_match_golden() {
    for (mode, golden) in [("cpf", "tests/golden/cpf_stages.txt"), ("parity", "tests/golden/parity_stages.txt")] {
        let (_, res) = simulate(&["simulate", "--mode", mode, "--record-intermediates", "--seed", "3"]);
        let labels: Vec<String> = res.intermediates.unwrap().into_iter().map(|r| r.label).collect();
        let want: Vec<String> =
            fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join(golden)).unwrap().lines().map(String::from).collect();
        assert_eq!(labels, want, "{mode}");
    }
}

#[test]
fn runs_are_deterministic_given_seed() {
    let a = hyperdof(&["simulate", "--mode", "parity", "--seed", "11"]).stdout;
    let b = hyperdof(&["simulate", "--mode", "parity", "--seed", "11"]).stdout;
    assert_eq!(a, b);
    let a = hyperdof(&["parity", "--seed", "11"]).stdout;
    assert_eq!(a, hyperdof(&["parity", "--seed", "11"]).stdout);
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &json!({ "seed": 1, "force_outcome": "---", "mode": "parity" }));
    let (_, res) = simulate(&["simulate", "--config", &cfg]);
    assert_eq!(res.outcome.to_string(), "---");
    let (_, res) = simulate(&["simulate", "--config", &cfg, "--force-outcome", "+-+", "--mode", "cpf"]);
    assert_eq!(res.outcome.to_string(), "+-+");
    assert_eq!(res.mode, hyperdof::circuit::ProtocolMode::HyperCpf);

    let cavity = json!({ "cavity": {
        "g": 1.0, "kappa": 1.0, "kappa_s": 0.5, "gamma": 1.0, "omega": 0.0, "omega_c": 0.0, "omega_x": 0.0
    }});
    let cfg = write_config(dir.path(), &cavity);
    let v = ok_json(&["coeffs", "--config", &cfg, "--json"]);
    assert!((f(&v["ks_over_k"]) - 0.5).abs() < 1e-15);
    let v = ok_json(&["coeffs", "--config", &cfg, "--ks-over-k", "0.1", "--json"]);
    assert!((f(&v["ks_over_k"]) - 0.1).abs() < 1e-15);
    assert!((f(&v["cooperativity"]) - 1.0).abs() < 1e-15);
}

#[test]
fn config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        json!({ "sed": 3 }),
        json!({ "cavity": { "g": 1.0, "kappa": 1.0, "kappa_s": 0.0, "gamma": 1.0, "omega": 0.0, "omega_c": 0.0, "omega_x": 0.0, "kapa": 1.0 } }),
        json!({ "coeffs": { "r": {"re": 1.0, "imag": 0.0}, "t": {"re": 0.0, "im": 0.0}, "r0": {"re": 0.0, "im": 0.0}, "t0": {"re": -1.0, "im": 0.0} } }),
    ] {
        let cfg = write_config(dir.path(), &bad);
        let out = hyperdof(&["coeffs", "--config", &cfg]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"), "{bad}");
    }
}

#[test]
fn config_revalidates_merged_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let half = json!({"re": 0.5, "im": 0.0});
    let bad_spec = json!({ "freq_amps": [half, half], "spatial_amps": [half, half], "time_amps": [half, half] });
    let cfg = write_config(dir.path(), &json!({ "photon_a": bad_spec }));
    let out = hyperdof(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not normalized"));

    let active = json!({ "coeffs": {
        "r": {"re": 1.0, "im": 0.0}, "t": {"re": 0.5, "im": 0.0},
        "r0": {"re": 0.0, "im": 0.0}, "t0": {"re": -1.0, "im": 0.0}
    }});
    let cfg = write_config(dir.path(), &active);
    assert_eq!(hyperdof(&["coeffs", "--config", &cfg]).status.code(), Some(2));
}
