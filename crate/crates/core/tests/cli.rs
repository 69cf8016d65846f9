use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use supcode::cli::run_with_args;

fn cli(args: &[&str]) -> (u8, String) {
    let mut out = Vec::new();
    let mut full = vec!["supcode"];
    full.extend_from_slice(args);
    let code = run_with_args(full, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn value<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(" = ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{report}"))
}

fn toy_records() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/toy_records.txt")
}

fn build_toy(dir: &Path) -> (PathBuf, PathBuf) {
    let cb = dir.join("toy.scb");
    let sig = dir.join("toy.sic");
    let args = [
        "gencode",
        "-n",
        "12",
        "-N",
        "8",
        "--seed",
        "5",
        "-w",
        "3",
        "--output",
        cb.to_str().unwrap(),
    ];
    assert_eq!(cli(&args).0, 0);
    let args = [
        "encode",
        "--codebook",
        cb.to_str().unwrap(),
        "--records",
        toy_records(),
        "--output",
        sig.to_str().unwrap(),
    ];
    assert_eq!(cli(&args).0, 0);
    (cb, sig)
}

fn screen(cb: &Path, sig: &Path, query: &str) -> (u8, Vec<usize>, String) {
    let (code, out) = cli(&[
        "screen",
        "--signatures",
        sig.to_str().unwrap(),
        "--codebook",
        cb.to_str().unwrap(),
        "--query",
        query,
    ]);
    let hits = out
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.parse().unwrap())
        .collect();
    (code, hits, out)
}

#[test]
fn predict_binomial_optimum() {
    let (code, out) = cli(&[
        "predict",
        "--scheme",
        "binomial",
        "-n",
        "32",
        "-r",
        "8",
        "-s",
        "2",
        "--optimal-q",
    ]);
    assert_eq!(code, 0);
    assert_eq!(value(&out, "q"), "0.894427");
    let theta: f64 = value(&out, "theta").parse().unwrap();
    assert!((theta - 0.0649).abs() < 5e-5);
    assert_eq!(value(&out, "approximate"), "false");
}

#[test]
fn predict_required_length() {
    let (code, out) = cli(&[
        "predict",
        "--required-n",
        "-r",
        "100",
        "--s-min",
        "3",
        "--theta-max",
        "0.01",
    ]);
    assert_eq!(code, 0);
    assert_eq!(value(&out, "required_n"), "418");
    let exact: usize = value(&out, "required_n_exact").parse().unwrap();
    assert!(exact >= 418);
}

#[test]
fn predict_fixed_weight() {
    let (code, out) = cli(&[
        "predict", "--scheme", "fixed", "-n", "512", "-r", "32", "-s", "4", "-w", "11",
    ]);
    assert_eq!(code, 0);
    assert_eq!(value(&out, "ln_theta"), "-29.451135");
    assert_eq!(value(&out, "approximate"), "true");
    let (_, opt) = cli(&[
        "predict",
        "--scheme",
        "fixed",
        "-n",
        "512",
        "-r",
        "32",
        "-s",
        "4",
        "--optimal-w",
    ]);
    assert_eq!(value(&opt, "w"), "11");
}

#[test]
fn predict_flag_errors() {
    assert_eq!(cli(&["predict", "-r", "8", "-s", "2", "--optimal-q"]).0, 2);
    assert_eq!(cli(&["predict", "-n", "32", "-r", "8", "-s", "2"]).0, 2);
    assert_eq!(
        cli(&[
            "predict",
            "-n",
            "32",
            "-r",
            "8",
            "-s",
            "2",
            "-q",
            "0.5",
            "--optimal-q"
        ])
        .0,
        2
    );
    assert_eq!(
        cli(&["predict", "--scheme", "fixed", "-n", "32", "-r", "8", "-s", "2", "-q", "0.5"]).0,
        2
    );
    assert_eq!(
        cli(&["predict", "-n", "32", "-r", "8", "-s", "2", "-q", "1.5"]).0,
        2
    );
    assert_eq!(
        cli(&["predict", "--required-n", "-r", "10", "--s-min", "2"]).0,
        2
    );
    assert_eq!(cli(&["no-such-command"]).0, 2);
}

#[test]
fn weights_command() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.txt");
    fs::write(&input, "0.01\n".repeat(1000)).unwrap();
    let (code, out) = cli(&["weights", "--input", input.to_str().unwrap(), "-n", "4096"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("n=4096\n"));
    let weights: Vec<&str> = out
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .collect();
    assert_eq!(weights.len(), 1000);
    assert!(weights.iter().all(|&w| w == "284"));

    fs::write(&input, "0.5\n").unwrap();
    let (code, out) = cli(&["weights", "--input", input.to_str().unwrap(), "-n", "64"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().last(), Some("64"));

    fs::write(&input, "0.1\n0.2\n1.0\n").unwrap();
    assert_eq!(
        cli(&["weights", "--input", input.to_str().unwrap(), "-n", "64"]).0,
        2
    );
}

#[test]
fn weights_plan_drives_gencode() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.txt");
    let plan = dir.path().join("plan.txt");
    let cb = dir.path().join("plan.scb");
    fs::write(
        &input,
        "0.1\n0.02\n0.3\n0.05\n0.0\n0.2\n0.1\n0.01\n".repeat(2),
    )
    .unwrap();
    let (code, out) = cli(&[
        "weights",
        "--input",
        input.to_str().unwrap(),
        "-n",
        "256",
        "--output",
        plan.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(value(&out, "bits"), "16");
    assert_eq!(value(&out, "warnings"), "2");
    let (code, _) = cli(&[
        "gencode",
        "--seed",
        "9",
        "--weights",
        plan.to_str().unwrap(),
        "--output",
        cb.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let sig = dir.path().join("plan.sic");
    let records = dir.path().join("r.txt");
    fs::write(&records, "N=16\n0 4\n4\n1 2 12\n\n3 5 9 15\n").unwrap();
    let (code, _) = cli(&[
        "encode",
        "--codebook",
        cb.to_str().unwrap(),
        "--records",
        records.to_str().unwrap(),
        "--output",
        sig.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    // Bits 4 and 12 have weight 0, so they never change a signature.
    let (_, with, _) = screen(&cb, &sig, "4 12");
    let (_, without, _) = screen(&cb, &sig, "");
    assert_eq!(with, without);
    assert_eq!(without.len(), 5);
}

#[test]
fn screen_self_matches_and_empty_query() {
    let dir = tempfile::tempdir().unwrap();
    let (cb, sig) = build_toy(dir.path());
    let (code, all, out) = screen(&cb, &sig, "");
    assert_eq!(code, 0);
    assert_eq!(all, (0..10).collect::<Vec<_>>());
    assert!(out.contains("# expected_candidates = "));
    let text = fs::read_to_string(toy_records()).unwrap();
    for (k, line) in text.lines().skip(1).enumerate() {
        let (code, hits, _) = screen(&cb, &sig, line);
        assert_eq!(code, 0);
        assert!(hits.contains(&k), "record {k} missing for query `{line}`");
    }
    assert_eq!(screen(&cb, &sig, "9").0, 2);
    assert_eq!(screen(&cb, &sig, "3 1").0, 2);
}

#[test]
fn format_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let (cb, sig) = build_toy(dir.path());

    let mut bytes = fs::read(&sig).unwrap();
    bytes[0] = b'Z';
    let bad_sig = dir.path().join("bad.sic");
    fs::write(&bad_sig, &bytes).unwrap();
    assert_eq!(screen(&cb, &bad_sig, "").0, 3);

    let mut words = fs::read(&cb).unwrap();
    let last = words.len() - 1;
    words[last] ^= 0x08;
    let bad_cb = dir.path().join("bad.scb");
    fs::write(&bad_cb, &words).unwrap();
    assert_eq!(screen(&bad_cb, &sig, "").0, 3);

    let truncated = dir.path().join("short.sic");
    fs::write(&truncated, &fs::read(&sig).unwrap()[..20]).unwrap();
    assert_eq!(screen(&cb, &truncated, "").0, 3);

    let records = dir.path().join("bad.txt");
    fs::write(&records, "N=8\n3 2\n").unwrap();
    let out = dir.path().join("x.sic");
    let args = [
        "encode",
        "--codebook",
        cb.to_str().unwrap(),
        "--records",
        records.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ];
    assert_eq!(cli(&args).0, 3);
}

#[test]
fn dimension_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (_, sig) = build_toy(dir.path());
    let other = dir.path().join("other.scb");
    let args = [
        "gencode",
        "-n",
        "16",
        "-N",
        "8",
        "--seed",
        "5",
        "-w",
        "3",
        "--output",
        other.to_str().unwrap(),
    ];
    assert_eq!(cli(&args).0, 0);
    assert_eq!(screen(&other, &sig, "").0, 2);

    let wide = dir.path().join("wide.scb");
    let args = [
        "gencode",
        "-n",
        "12",
        "-N",
        "9",
        "--seed",
        "5",
        "-w",
        "3",
        "--output",
        wide.to_str().unwrap(),
    ];
    assert_eq!(cli(&args).0, 0);
    let out = dir.path().join("y.sic");
    let args = [
        "encode",
        "--codebook",
        wide.to_str().unwrap(),
        "--records",
        toy_records(),
        "--output",
        out.to_str().unwrap(),
    ];
    assert_eq!(cli(&args).0, 2);
}

#[test]
fn gencode_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.scb");
    assert_eq!(
        cli(&[
            "gencode",
            "-n",
            "12",
            "-N",
            "8",
            "-w",
            "3",
            "--output",
            out.to_str().unwrap()
        ])
        .0,
        2
    );
    assert!(!out.exists());
}

#[test]
fn simulate_reports() {
    let args = [
        "simulate",
        "--trials",
        "50000",
        "--seed",
        "31",
        "-N",
        "64",
        "-r",
        "4",
        "-n",
        "16",
        "--scheme",
        "binomial",
        "-q",
        "0.9",
        "--masks",
        "15,12",
        "--compare",
    ];
    let (code, first) = cli(&args);
    assert_eq!(code, 0, "{first}");
    assert_eq!(value(&first, "status"), "pass");
    assert_eq!(cli(&args).1, first);
    assert_eq!(
        cli(&[
            "simulate", "--trials", "0", "--seed", "1", "-N", "8", "-r", "2", "-n", "8", "-w", "2"
        ])
        .0,
        2
    );

    let fd = [
        "simulate",
        "--trials",
        "20000",
        "--seed",
        "32",
        "-N",
        "50000",
        "-r",
        "8",
        "-s",
        "2",
        "-n",
        "32",
        "--scheme",
        "binomial",
        "-q",
        "0.894427191",
        "--compare",
    ];
    let (code, out) = cli(&fd);
    assert_eq!(code, 0, "{out}");
    let theta: f64 = value(&out, "theta").parse().unwrap();
    assert!((theta - 0.0649).abs() < 0.01);
}

#[test]
fn simulate_fails_on_wrong_prediction() {
    // A z limit of zero turns any sampling noise into a failure.
    let args = [
        "simulate",
        "--trials",
        "1000",
        "--seed",
        "33",
        "-N",
        "64",
        "-r",
        "4",
        "-n",
        "16",
        "-w",
        "2",
        "--compare",
        "--z-limit",
        "0",
    ];
    assert_eq!(cli(&args).0, 1);
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_supcode");
    let run = |args: &[&str]| Command::new(exe).args(args).output().unwrap();
    let ok = run(&["predict", "-n", "32", "-r", "8", "-s", "2", "--optimal-q"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("q = 0.894427"));
    let usage = run(&[
        "simulate", "--trials", "0", "--seed", "1", "-N", "8", "-r", "2", "-n", "8", "-w", "2",
    ]);
    assert_eq!(usage.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&usage.stderr).contains("--trials"));
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.sic");
    fs::write(&junk, b"nope").unwrap();
    let cb = dir.path().join("c.scb");
    assert_eq!(
        run(&[
            "gencode",
            "-n",
            "12",
            "-N",
            "8",
            "--seed",
            "1",
            "-w",
            "3",
            "--output",
            cb.to_str().unwrap()
        ])
        .status
        .code(),
        Some(0)
    );
    let fmt = run(&[
        "screen",
        "--signatures",
        junk.to_str().unwrap(),
        "--codebook",
        cb.to_str().unwrap(),
        "--query",
        "",
    ]);
    assert_eq!(fmt.status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
