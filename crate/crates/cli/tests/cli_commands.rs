use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn rcess(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_rcess")).args(args).output().expect("spawn rcess");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn json(r: &Run) -> Value {
    serde_json::from_str(&r.stdout).unwrap_or_else(|e| panic!("{e}: {}", r.stdout))
}

const INTRO: [&str; 12] = ["--n", "4", "--k", "3", "--zrw", "1", "--q", "5", "--v", "1", "--mode", "lk"];

fn share_intro(tmp: &Path, name: &str, seed: &str) -> PathBuf {
    let secret = tmp.join("secret.txt");
    fs::write(&secret, "1 2\n").unwrap();
    let out = tmp.join(name);
    let mut args = vec!["share"];
    args.extend(INTRO);
    args.extend(["--secret-format", "elements", "--seed", seed, "--secret-file"]);
    let s = secret.to_str().unwrap().to_owned();
    let o = out.to_str().unwrap().to_owned();
    args.push(&s);
    args.push("--out-dir");
    args.push(&o);
    let r = rcess(&args);
    assert_eq!(r.code, 0, "{}", r.stderr);
    out
}

fn payload(dir: &Path, i: usize) -> Vec<u64> {
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.join(format!("party_{i}.json"))).unwrap()).unwrap();
    v["payload"].as_array().unwrap().iter().map(|p| p[0].as_u64().unwrap()).collect()
}

fn reconstruct(dir: &Path, parties: &str, out: &Path) -> Run {
    rcess(&["reconstruct", "--dir", dir.to_str().unwrap(), "--parties", parties, "--out", out.to_str().unwrap()])
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn share_matches_the_four_party_table() {
    let tmp = TempDir::new().unwrap();
    let dir = share_intro(tmp.path(), "b", "7");
    let (s1, s2) = (1u64, 2u64);
    let p1 = payload(&dir, 1);
    let r1 = (p1[0] + 5 * 5 - s1 - s2) % 5;
    let r2 = (p1[1] + 5 - r1) % 5;
    for i in 1..=4u64 {
        let p = payload(&dir, i as usize);
        assert_eq!(p, vec![(s1 + i * s2 + i * i * r1) % 5, (r1 + i * r2) % 5], "party {i}");
    }
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["alpha"], 2);
    assert_eq!(m["hash_edges"].as_array().unwrap().len(), 6);
    assert_eq!(m["hash_order"], "column_major");
}

#[test]
fn sharing_is_deterministic_and_round_trips() {
    let tmp = TempDir::new().unwrap();
    let a = share_intro(tmp.path(), "a", "11");
    let b = share_intro(tmp.path(), "b", "11");
    assert_eq!(snapshot(&a), snapshot(&b));
    let c = share_intro(tmp.path(), "c", "12");
    assert_ne!(snapshot(&a), snapshot(&c));
    // read then write again through a no-op corruption-free path
    let bundle = rcess_cli::bundle::ShareBundle::read(&a).unwrap();
    let again = tmp.path().join("again");
    bundle.write(&again).unwrap();
    assert_eq!(snapshot(&a), snapshot(&again));
}

#[test]
fn costs_and_detection_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let dir = share_intro(tmp.path(), "b", "3");
    let out = tmp.path().join("s.txt");

    let r = reconstruct(&dir, "2,3,4", &out);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(json(&r)["payload_elements"], 6);
    assert_eq!(fs::read_to_string(&out).unwrap(), "1 2\n");

    let before = snapshot(&dir);
    let c = rcess(&["corrupt", "--dir", dir.to_str().unwrap(), "--parties", "1", "--strategy", "blind-additive", "--seed", "5"]);
    assert_eq!(c.code, 0, "{}", c.stderr);
    let after = snapshot(&dir);
    for ((name, x), (_, y)) in before.iter().zip(&after) {
        match name.as_str() {
            "party_1.json" | "manifest.json" => assert_ne!(x, y, "{name}"),
            _ => assert_eq!(x, y, "{name}"),
        }
    }

    let r = reconstruct(&dir, "1,2,3,4", &out);
    let rep = json(&r);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(rep["status"], "success");
    assert_eq!(rep["removed"], serde_json::json!([1]));
    assert_eq!(rep["payload_elements"], 4);
    assert_eq!(fs::read_to_string(&out).unwrap(), "1 2\n");
}

#[test]
fn reconstruction_ignores_the_corruption_log() {
    let tmp = TempDir::new().unwrap();
    let dir = share_intro(tmp.path(), "b", "4");
    let c = rcess(&["corrupt", "--dir", dir.to_str().unwrap(), "--parties", "2", "--strategy", "fake-secret", "--seed", "1"]);
    assert_eq!(c.code, 0, "{}", c.stderr);
    let out = tmp.path().join("s.txt");
    let first = reconstruct(&dir, "1,2,3,4", &out);

    let path = dir.join("manifest.json");
    let mut m: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    m["corruption_log"] = serde_json::json!([{ "parties": [4], "strategy": "hash_targeted", "seed": 99 }]);
    fs::write(&path, serde_json::to_string_pretty(&m).unwrap()).unwrap();
    let second = reconstruct(&dir, "1,2,3,4", &out);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(first.code, second.code);

    m.as_object_mut().unwrap().remove("corruption_log");
    fs::write(&path, serde_json::to_string_pretty(&m).unwrap()).unwrap();
    assert_eq!(reconstruct(&dir, "1,2,3,4", &out).stdout, first.stdout);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let dir = share_intro(tmp.path(), "b", "8");
    let out = tmp.path().join("s.txt");
    let d = dir.to_str().unwrap();

    let r = reconstruct(&dir, "1,2", &out);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("k <= d <= n"), "{}", r.stderr);

    let r = rcess(&["corrupt", "--dir", d, "--parties", "1,2", "--strategy", "blind-additive"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("z_w = 1"));

    // corrupted hash shares at d = 3 leave no unambiguous hash vector
    let r = rcess(&["corrupt", "--dir", d, "--parties", "3", "--strategy", "hash-targeted", "--seed", "2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = reconstruct(&dir, "1,2,3", &out);
    assert_eq!(r.code, 3, "{}", r.stdout);
    assert_eq!(json(&r)["status"], "detected_abort");

    let secret = tmp.path().join("x");
    fs::write(&secret, "1").unwrap();
    let mut args = vec!["share", "--n", "4", "--k", "2", "--zrw", "1", "--q", "5", "--secret-format", "elements"];
    let s = secret.to_str().unwrap().to_owned();
    let o = tmp.path().join("zero").to_str().unwrap().to_owned();
    args.extend(["--secret-file", &s, "--out-dir", &o]);
    let r = rcess(&args);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("k > 2z_rw + 2z_wo + z_ro"), "{}", r.stderr);
    assert!(!Path::new(&o).exists());

    let r = rcess(&["analyze", "capacity", "--n", "3", "--k", "4"]);
    assert_eq!(r.code, 2);
}

#[test]
fn byte_secrets_round_trip() {
    let tmp = TempDir::new().unwrap();
    for (i, secret) in [Vec::new(), b"hello".to_vec(), (0..=255u8).collect()].into_iter().enumerate() {
        let file = tmp.path().join(format!("in{i}"));
        fs::write(&file, &secret).unwrap();
        let dir = tmp.path().join(format!("b{i}"));
        let r = rcess(&[
            "share", "--n", "7", "--k", "5", "--zro", "1", "--zwo", "1", "--v", "40", "--secret-file",
            file.to_str().unwrap(), "--out-dir", dir.to_str().unwrap(), "--seed", "1",
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let out = tmp.path().join(format!("out{i}"));
        let r = reconstruct(&dir, "1,3,4,5,7", &out);
        assert_eq!(r.code, 0, "{}", r.stdout);
        assert_eq!(fs::read(&out).unwrap(), secret);
    }
    let file = tmp.path().join("big");
    fs::write(&file, vec![1u8; 10_000]).unwrap();
    let r = rcess(&[
        "share", "--n", "7", "--k", "5", "--zro", "1", "--zwo", "1", "--secret-file", file.to_str().unwrap(),
        "--out-dir", tmp.path().join("big_out").to_str().unwrap(),
    ]);
    assert_eq!(r.code, 2);
}

#[test]
fn analyze_outputs() {
    let mut args = vec!["analyze", "capacity"];
    args.extend(INTRO);
    assert_eq!(json(&rcess(&args))["capacity_elements"], 2);

    let mut args = vec!["analyze", "cost"];
    args.extend(INTRO);
    let costs = json(&rcess(&args))["costs"].clone();
    assert_eq!(costs, serde_json::json!([
        { "d": 3, "elements": 6, "per_party": 2 },
        { "d": 4, "elements": 4, "per_party": 1 }
    ]));

    let mut args = vec!["analyze", "mincut", "--figure", "fig1"];
    args.extend(INTRO);
    let fig = json(&rcess(&args));
    assert_eq!(fig["alpha_v"], 2);
    assert_eq!(fig["cut"], 4);

    let mut args = vec!["analyze", "mincut"];
    args.extend(INTRO);
    let conv = json(&rcess(&args));
    assert_eq!(conv["converse_bound"], 2);
    assert_eq!(conv["capacity_elements"], 2);

    let r = rcess(&["analyze", "overhead", "--n", "6", "--k", "4", "--zwo", "1", "--v", "8"]);
    let o = json(&r);
    assert_eq!(o["hash_edges"], 15);
    assert_eq!(o["overhead"], "15/8");
}

#[test]
fn simulate_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("sim.json");
    fs::write(&cfg, r#"{"n":4,"k":3,"z_rw":1,"mode":"lk","q":5,"v":1,"d":4,"strategy":"blind_additive"}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let a = rcess(&["simulate", "--config", c, "--trials", "2000", "--seed", "2024"]);
    let b = rcess(&["simulate", "--config", c, "--trials", "2000", "--seed", "2024"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["stats"]["trials"], 2000);
    assert!((v["bound"]["bound"].as_f64().unwrap() - 0.2).abs() < 1e-12);

    fs::write(&cfg, r#"{"n":5,"k":3,"mode":"lk","q":7,"v":2,"d":4,"strategy":"orthogonal_search"}"#).unwrap();
    let z = json(&rcess(&["simulate", "--config", c, "--trials", "500"]));
    assert_eq!(z["undetected_rate"], 0.0);
    assert_eq!(z["stats"]["success"], 500);
}
