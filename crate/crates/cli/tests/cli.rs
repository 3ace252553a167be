use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

use combforge::comb::CombValue;
use combforge::random::random_comb;
use combforge::symmetry::paulis;
use combforge::tensor::{LabeledOperator, Wire};
use combforge::Matrix;
use combforge_cli::format::{self, CertificateFile, DecompositionFile, GroupFile, Kind, OperatorFile, WireSpec};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_combforge"));
    c.env_remove("COMBFORGE_TOL");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn random_comb_file(dir: &TempDir, seed: u64) -> (PathBuf, CombValue) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r, _) = random_comb(&mut rng, &[(2, 2), (2, 2)], 2, 2).unwrap();
    let p = path(dir, "comb.json");
    format::write(&p, &OperatorFile::from_comb(&r)).unwrap();
    (p, r)
}

#[test]
fn isotropic_cost_is_ceiling() {
    let dir = TempDir::new().unwrap();
    let iso = path(&dir, "iso.json");
    assert!(run(&["example", "isotropic", "--d", "2", "--alpha", "1.5", "-o", s(&iso)]).status.success());
    let out = run(&["cost-channel", s(&iso)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["dim"], 2);
    assert_eq!(v["log2_upper"], 1.0);
    assert_eq!(v["tol"], 1e-8);
}

#[test]
fn upb_state_is_a_valid_comb() {
    let dir = TempDir::new().unwrap();
    let upb = path(&dir, "upb.json");
    assert!(run(&["example", "upb", "-o", s(&upb)]).status.success());
    let out = run(&["validate", s(&upb)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["status"], "pass");
    assert_eq!(v["steps"], 3);
}

#[test]
fn certify_trivial_decomposition() {
    let dir = TempDir::new().unwrap();
    let (comb, r) = random_comb_file(&dir, 1);
    let rank = r.reduce(1).unwrap().op().rank().unwrap();
    let decomp = path(&dir, "decomp.json");
    format::write(&decomp, &DecompositionFile::new(r.signature(), &[(vec![0], r.op().clone())]).unwrap()).unwrap();
    let cert = path(&dir, "cert.json");
    let rank_s = rank.to_string();
    let out = run(&["certify", s(&comb), s(&decomp), "--step", "1", "--dim", &rank_s, "-o", s(&cert)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["bounds"][0]["upper"], rank);

    let text = fs::read_to_string(&cert).unwrap();
    let parsed: CertificateFile = format::from_json(&text).unwrap();
    assert_eq!(format::to_json(&parsed), text);
    assert!(parsed.to_certificate().unwrap().reverify(&r, 1e-8).unwrap());

    let low = (rank - 1).to_string();
    let out = run(&["certify", s(&comb), s(&decomp), "--step", "1", "--dim", &low]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["status"], "fail");
}

#[test]
fn certify_multi_on_product() {
    let dir = TempDir::new().unwrap();
    let sig = combforge::comb::CombSignature::standard(&[(2, 2), (2, 2), (2, 2)]).unwrap();
    let mut op = LabeledOperator::scalar(combforge::C64::new(1.0, 0.0));
    for k in 0..3usize {
        op = op.tensor(&LabeledOperator::max_entangled(Wire::quantum(2 * k, 2), Wire::quantum(2 * k + 1, 2)).unwrap()).unwrap();
    }
    let r = CombValue::new(sig, op).unwrap();
    let comb = path(&dir, "comb.json");
    format::write(&comb, &OperatorFile::from_comb(&r)).unwrap();
    let nested = path(&dir, "nested.json");
    format::write(&nested, &DecompositionFile::new(r.signature(), &[(vec![0, 0], r.op().clone())]).unwrap()).unwrap();
    let out = run(&["certify-multi", s(&comb), s(&nested), "--steps", "1,2", "--dims", "1,1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["bounds"][0]["upper"], 1);
    assert_eq!(v["bounds"][1]["upper"], 1);
}

#[test]
fn scaled_comb_fails_validation() {
    let dir = TempDir::new().unwrap();
    let (_, r) = random_comb_file(&dir, 2);
    let bad = path(&dir, "bad.json");
    format::write(&bad, &OperatorFile::from_comb(&r.scale(1.001))).unwrap();
    let out = run(&["validate", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["status"], "fail");
    assert_eq!(v["failing_steps"][0], 1);
}

#[test]
fn io_and_schema_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["validate", s(&path(&dir, "missing.json"))]).status.code(), Some(2));
    let junk = path(&dir, "junk.json");
    fs::write(&junk, "{\"version\": 1, \"wires\": []}").unwrap();
    assert_eq!(run(&["validate", s(&junk)]).status.code(), Some(2));
    let (comb, _) = random_comb_file(&dir, 3);
    let mut file: OperatorFile = format::read(&comb).unwrap();
    file.matrix.im.truncate(3);
    format::write(&junk, &file).unwrap();
    assert_eq!(run(&["validate", s(&junk)]).status.code(), Some(2));
    assert_eq!(run(&["validate"]).status.code(), Some(2));
}

#[test]
fn tolerance_from_environment() {
    let dir = TempDir::new().unwrap();
    let (comb, _) = random_comb_file(&dir, 4);
    let out = bin().args(["validate", s(&comb)]).env("COMBFORGE_TOL", "1e-3").output().unwrap();
    assert_eq!(json(&out)["tol"], 1e-3);
    let out = bin().args(["validate", s(&comb), "--tol", "1e-6"]).env("COMBFORGE_TOL", "1e-3").output().unwrap();
    assert_eq!(json(&out)["tol"], 1e-6);
    assert_eq!(json(&run(&["validate", s(&comb)]))["tol"], 1e-8);
}

#[test]
fn realize_then_link_reproduces() {
    let dir = TempDir::new().unwrap();
    let (comb, r) = random_comb_file(&dir, 5);
    let real = path(&dir, "real");
    let out = run(&["realize", s(&comb), "--out-dir", s(&real)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["trace_norm_defect"].as_f64().unwrap() <= 1e-7);
    assert!(v["ancillas"][0]["quantum"].as_u64().unwrap() <= v["reduced_ranks"][0].as_u64().unwrap());
    let linked = path(&dir, "linked.json");
    let out = run(&["link", s(&real.join("channel_1.json")), s(&real.join("channel_2.json")), "-o", s(&linked)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let back = format::read::<OperatorFile>(&linked).unwrap().to_choi().unwrap();
    assert!(back.op().max_diff(r.op()).unwrap() < 1e-10);
}

#[test]
fn files_round_trip_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let (comb, _) = random_comb_file(&dir, 6);
    let text = fs::read_to_string(&comb).unwrap();
    let out = run(&["reduce", s(&comb), "--k", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), text);
    for args in [vec!["example", "upb"], vec!["example", "werner", "--d", "3", "--gamma", "0.2"], vec!["example", "delay", "--d", "2"]] {
        let first = run(&args).stdout;
        let parsed: OperatorFile = format::from_json(std::str::from_utf8(&first).unwrap()).unwrap();
        assert_eq!(format::to_json(&parsed).as_bytes(), first.as_slice());
    }
}

#[test]
fn symmetry_bound_for_bell_diagonal() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sig = combforge::comb::CombSignature::standard(&[(2, 2), (2, 2)]).unwrap();
    let mut op = LabeledOperator::zeros(sig.wires()).unwrap();
    for (sigma, w) in paulis().iter().zip([0.1, 0.2, 0.3, 0.4]) {
        let v = combforge::Vector::from_fn(4, |i, _| sigma[(i / 2, i % 2)]);
        let proj = LabeledOperator::from_ket(vec![Wire::quantum(0usize, 2), Wire::quantum(1usize, 2)], &v).unwrap();
        let c = combforge::random::random_channel(&mut rng, vec![Wire::quantum(2usize, 2)], vec![Wire::quantum(3usize, 2)], 2)
            .unwrap();
        op = op.add(&proj.tensor(c.op()).unwrap().scale(w)).unwrap();
    }
    let r = CombValue::new(sig, op).unwrap();
    let comb = path(&dir, "bell.json");
    format::write(&comb, &OperatorFile::from_comb(&r)).unwrap();
    let generators: Vec<Matrix> = paulis()[1..].iter().map(|p| p.kronecker(&p.map(|z| z.conj()))).collect();
    let wire = |l: &str| WireSpec { label: l.into(), dim: 2, kind: Kind::Quantum, step: None, direction: None };
    let group = GroupFile { version: 1, wires: vec![wire("0"), wire("1")], generators: generators.iter().map(format::matrix_data).collect() };
    let gpath = path(&dir, "group.json");
    format::write(&gpath, &group).unwrap();
    let out = run(&["symmetry-bound", s(&comb), s(&gpath), "--step", "1", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["bounds"][0]["upper"], 1);
    assert_eq!(v["multiplicities"], serde_json::json!([1, 1, 1, 1]));
}

#[test]
fn discrimination_is_seeded_and_zero_on_identical() {
    let dir = TempDir::new().unwrap();
    let (comb, _) = random_comb_file(&dir, 8);
    let v = json(&run(&["discriminate", s(&comb), s(&comb), "--iters", "2"]));
    assert!(v["lower_bound"].as_f64().unwrap().abs() < 1e-9);
    let other = path(&dir, "other.json");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (r1, _) = random_comb(&mut rng, &[(2, 2), (2, 2)], 2, 2).unwrap();
    format::write(&other, &OperatorFile::from_comb(&r1)).unwrap();
    let args = ["discriminate", s(&comb), s(&other), "--method", "sampled", "--iters", "5", "--seed", "11"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert!(v["lower_bound"].as_f64().unwrap() > 0.0);
}
