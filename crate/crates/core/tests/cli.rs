use std::process::{Command, Output};

use heralded_hybrid::fock::{DelocalizedPhoton, SqueezeParam};
use heralded_hybrid::herald::{herald_hybrid_numeric, PipelineConfig};
use heralded_hybrid::interferometer::BeamSplitter;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heralded-hybrid")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

#[test]
fn herald_near_maximal_point() {
    let out = run(&["herald", "--r-sq", "0.0265654", "--t", "0.0220391", "--a1", "0.70710678", "--p", "0"]);
    let v = json(&out);
    assert!((v["negativity"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert!((v["probability"].as_f64().unwrap() - 0.999404).abs() < 1e-3);
    let text = String::from_utf8(out.stdout).unwrap();
    let keys = ["\"p\"", "\"probability\"", "\"negativity\"", "\"c_psi\"", "\"c_phi\"", "\"psi\"", "\"phi\""];
    let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn herald_distribution_sums_to_one() {
    let v = json(&run(&["herald", "--r-sq", "0.4", "--t", "0.6", "--a1", "0.5", "--p-max", "20"]));
    assert_eq!(v["records"].as_array().unwrap().len(), 21);
    assert!(v["deficit"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn usage_errors_exit_two() {
    let cases: [&[&str]; 6] = [
        &["herald", "--r-sq", "0.3", "--t", "0.5", "--a1", "1.0"],
        &["herald", "--r-sq", "0.3", "--t", "0.5", "--p", "-1"],
        &["herald", "--r-sq", "0.3", "--t", "1.0"],
        &["herald", "--r-sq", "-0.1", "--t", "0.5"],
        &["herald", "--r-sq", "0.3", "--t", "0.5", "--a1", "0.6", "--a0", "0.6"],
        &["herald", "--r-sq", "0.3", "--t", "0.5", "--format", "csv"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = run(&["herald", "--r-sq", "0.3", "--t", "0.5", "--a1", "1.0"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
}

#[test]
fn explicit_a0_and_phase() {
    let v = json(&run(&["herald", "--r-sq", "0.2", "--t", "0.5", "--a1", "0.8", "--a0", "0.6", "--a1-phase", "-1.2"]));
    let c_phi = v["c_phi"].as_array().unwrap();
    assert!(c_phi[1].as_f64().unwrap() != 0.0);
}

#[test]
fn scan_csv_shape_and_edge() {
    let out = run(&["scan", "--a1", "0.70710678"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r_sq,t_bs,a1_mag,p,negativity,probability"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2500);
    let max = rows.iter().map(|r| r[4]).fold(0.0, f64::max);
    for r in rows.iter().filter(|r| r[1] == 0.98) {
        assert!(r[4] < max);
    }
}

#[test]
fn scan_json_format() {
    let v = json(&run(&["scan", "--a1", "0.6", "--r-steps", "4", "--t-steps", "5", "--format", "json"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 20);
    assert_eq!(v["grid"]["t_bs"]["steps"], 5);
}

#[test]
fn scan_rejects_closed_transmittance_range() {
    assert_eq!(run(&["scan", "--t-min", "0.0"]).status.code(), Some(2));
}

#[test]
fn solve_balanced_locus_spans_near_maximal_points() {
    let v = json(&run(&["solve", "--a1", "0.70710678"]));
    let points = v.as_array().unwrap();
    let probs: Vec<f64> = points.iter().map(|p| p["probability"].as_f64().unwrap()).collect();
    assert!(probs.iter().any(|p| *p <= 0.8374));
    assert!(probs.iter().any(|p| *p >= 0.9994));
    let photon = DelocalizedPhoton::from_magnitude(0.70710678).unwrap();
    for pt in points {
        let r = SqueezeParam::new(pt["r_sq"].as_f64().unwrap()).unwrap();
        let bs = BeamSplitter::from_transmittance(pt["t_bs"].as_f64().unwrap()).unwrap();
        let rec = herald_hybrid_numeric(r, bs, photon, 0, &PipelineConfig::default()).unwrap();
        assert!((rec.negativity - 1.0).abs() < 1e-8);
        assert!((rec.negativity - pt["negativity"].as_f64().unwrap()).abs() < 1e-9);
    }
}

#[test]
fn solve_unbalanced_roots_reach_table_row() {
    let v = json(&run(&["solve", "--a1", "0.741004"]));
    let points = v.as_array().unwrap();
    assert!(points.iter().all(|p| p["kind"] == "root" && p["residual"].as_f64().unwrap().abs() < 1e-10));
    let near = points.iter().any(|p| {
        (p["r_sq"].as_f64().unwrap() - 0.107632).abs() < 0.02 && (p["t_bs"].as_f64().unwrap() - 0.423201).abs() < 2e-3
    });
    assert!(near);
}

#[test]
fn solve_without_root_exits_two() {
    let out = run(&["solve", "--a1", "0.3", "--near-max-tol", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cascade_vacuum_outcome() {
    let v = json(&run(&["cascade", "--r-sq", "0.4", "--t", "0.5", "--a1", "0.6", "--p", "0"]));
    assert_eq!(v["state"]["branch1"]["labels"]["mode1"], "psi");
    assert_eq!(v["state"]["branch2"]["labels"]["mode1"], "phi");
    assert!((v["b_prime"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let w1 = v["state"]["w1"][0].as_f64().unwrap();
    let w2 = v["state"]["w2"][0].as_f64().unwrap();
    assert!((w1 - 0.8).abs() < 1e-10 && (w2 - 0.6).abs() < 1e-10);
}

#[test]
fn verify_passes() {
    let v = json(&run(&["verify"]));
    assert_eq!(v["pass"], true);
    assert!(v["undocumented"].as_array().unwrap().is_empty());
    let flagged: Vec<i64> = v["table2"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["flagged"] == true)
        .map(|r| r["row"].as_i64().unwrap())
        .collect();
    assert_eq!(flagged, vec![4]);
}

#[test]
fn output_and_emit_config_files() {
    let dir = std::env::temp_dir().join(format!("heralded-hybrid-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out_path = dir.join("record.json");
    let cfg_path = dir.join("config.json");
    let out = run(&[
        "herald",
        "--r-sq",
        "0.3",
        "--t",
        "0.4",
        "--output",
        out_path.to_str().unwrap(),
        "--emit-config",
        cfg_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let record: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(record["p"], 0);
    let cfg: Value = serde_json::from_str(&std::fs::read_to_string(&cfg_path).unwrap()).unwrap();
    assert_eq!(cfg["command"]["herald"]["r_sq"], 0.3);
    assert_eq!(cfg["pipeline"]["tail_eps"], 1e-12);
    std::fs::remove_dir_all(&dir).unwrap();
}
