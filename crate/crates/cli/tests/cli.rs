use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pairs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../pairs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasidiff")).args(args).output().expect("binary runs")
}

fn pair(name: &str) -> String {
    pairs().join(name).to_string_lossy().into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn exit_codes() {
    let so = pair("snapping_out.toml");
    assert_eq!(code(&run(&["--pair", &so, "classify"])), 0);
    assert_eq!(code(&run(&["--pair", &so, "kernel", "--alpha", ""])), 1);
    assert_eq!(code(&run(&["--pair", &so, "kernel", "--regime", "sideways"])), 1);
    assert_eq!(code(&run(&["--pair", &so, "frobnicate"])), 1);
    assert_eq!(code(&run(&["classify"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        "[interval]\nr = 1.0\n[scale]\nsegments = [{ x0 = 0.0, x1 = 1.0, kind = \"affine\", params = [0.0, -1.0] }]\n",
    )
    .unwrap();
    assert_eq!(code(&run(&["--pair", bad.to_str().unwrap(), "validate"])), 2);
    assert_eq!(code(&run(&["--pair", &pair("gap.toml"), "kernel", "--regime", "continuous"])), 2);

    let five = pair("five_atoms.toml");
    assert_eq!(code(&run(&["--pair", &five, "compare"])), 0);
    assert_eq!(code(&run(&["--pair", &five, "compare", "--threshold", "1e-300"])), 4);
}

#[test]
fn cached_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    let so = pair("snapping_out.toml");
    let args = ["--pair", &so, "--out", o, "kernel", "--alpha", "0.5,1", "--grid", "9"];
    assert_eq!(code(&run(&args)), 0);
    let fresh = fs::read(out.join("kernel_a0.5.csv")).unwrap();
    assert!(fs::read_dir(out.join(".cache")).unwrap().count() >= 2);
    fs::remove_file(out.join("kernel_a0.5.csv")).unwrap();
    assert_eq!(code(&run(&args)), 0);
    assert_eq!(fs::read(out.join("kernel_a0.5.csv")).unwrap(), fresh);

    let plain = dir.path().join("plain");
    let p = plain.to_str().unwrap();
    assert_eq!(code(&run(&["--pair", &so, "--out", p, "--no-cache", "kernel", "--alpha", "0.5,1", "--grid", "9"])), 0);
    assert_eq!(fs::read(plain.join("kernel_a0.5.csv")).unwrap(), fresh);
    let text = String::from_utf8(fresh).unwrap();
    assert!(text.starts_with("alpha,x,x_side,y,y_side,g\r\n"));
}

#[test]
fn snapping_out_is_natural_at_both_ends() {
    let o = run(&["--pair", &pair("snapping_out.toml"), "classify"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["left"]["kind"], "Natural");
    assert_eq!(v["right"]["kind"], "Natural");
}

#[test]
fn resolvent_of_one_on_the_line() {
    let o = run(&["--pair", &pair("snapping_out.toml"), "resolvent", "--alpha", "2", "--points", "-1,0-,0"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut n = 0;
    for rec in rdr.records() {
        let rf: f64 = rec.unwrap()[4].parse().unwrap();
        assert!((rf - 0.25).abs() < 1e-10);
        n += 1;
    }
    assert_eq!(n, 3);
}

#[test]
fn split_kernel_on_the_gap_pair() {
    let o = run(&["--pair", &pair("gap.toml"), "kernel", "--regime", "split", "--grid", "5", "--format", "json"]);
    assert_eq!(code(&o), 0);
    assert!(!o.stdout.is_empty());
}

#[test]
fn canonical_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["snapping_out.toml", "gap.toml", "five_atoms.toml", "flat.toml"] {
        let once = run(&["--pair", &pair(name), "validate", "--canonical"]);
        assert_eq!(code(&once), 0, "{name}");
        let path = dir.path().join(name);
        fs::write(&path, &once.stdout).unwrap();
        let twice = run(&["--pair", path.to_str().unwrap(), "validate", "--canonical"]);
        assert_eq!(once.stdout, twice.stdout, "{name}");
    }
}

#[test]
fn chain_simulation_matches_reference() {
    let o = run(&[
        "--pair",
        &pair("five_atoms.toml"),
        "--seed",
        "3",
        "simulate",
        "--x0",
        "2.0",
        "--paths",
        "4000",
        "--sampler",
        "chain",
    ]);
    assert_eq!(code(&o), 0);
    let line = String::from_utf8(o.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    let z = v["reference_z"][0].as_f64().unwrap();
    assert!(z.abs() < 4.0, "{v}");
    let o = run(&[
        "--pair",
        &pair("five_atoms.toml"),
        "simulate",
        "--x0",
        "1.2",
        "--f",
        "0..1.5=1;1.5..4=0.25,0.5",
        "--paths",
        "4000",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["reference_z"][0].as_f64().unwrap().abs() < 4.0, "{v}");
}
