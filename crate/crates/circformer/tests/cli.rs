//! End-to-end checks of the command-line interface: exit codes, output
//! shapes, byte-stable emissions, and the compile pipeline.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const MEAN4: &str = include_str!("../testdata/mean4.circ");

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_circformer"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn circformer")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

struct Workdir(PathBuf);

impl Workdir {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("circformer-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("mean4.circ"), MEAN4).unwrap();
        Workdir(dir)
    }

    fn path(&self) -> &Path {
        &self.0
    }
}

impl Drop for Workdir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

#[test]
fn eval_prints_one_rational_per_line() {
    let w = Workdir::new("eval");
    let out = run_in(w.path(), &["eval", "mean4.circ", "--input", "1,2,3,4"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "5/2\n");
}

#[test]
fn simulate_prints_both_sides_and_match_status() {
    let w = Workdir::new("simulate");
    let out = run_in(
        w.path(),
        &[
            "simulate",
            "--kind",
            "fac",
            "--depth",
            "3",
            "mean4.circ",
            "--input",
            "1,2,3,4",
        ],
    );
    assert!(out.status.success());
    assert_eq!(stdout(&out), "5/2\n5/2\nMATCH\n");
}

#[test]
fn simulate_rejects_inadmissible_depth() {
    let w = Workdir::new("inadmissible");
    let out = run_in(
        w.path(),
        &[
            "simulate",
            "--kind",
            "fac",
            "--depth",
            "2",
            "mean4.circ",
            "--input",
            "1,2,3,4",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("depth"));
}

#[test]
fn validate_reports_violations_and_exit_codes() {
    let w = Workdir::new("validate");
    let ok = run_in(w.path(), &["validate", "mean4.circ"]);
    assert!(ok.status.success());
    assert_eq!(stdout(&ok), "valid\n");
    std::fs::write(
        w.path().join("bad.circ"),
        "class bounded\ngate 1 input 1\ngate 2 input 2\ngate 3 input 3\n\
         gate 4 plus 1 2 3\ngate 5 output 4\n",
    )
    .unwrap();
    let bad = run_in(w.path(), &["validate", "bad.circ"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("violation"));
}

#[test]
fn argument_errors_exit_two() {
    let w = Workdir::new("argv");
    let out = run_in(w.path(), &["simulate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn emissions_are_byte_identical_across_runs() {
    let w = Workdir::new("bytes");
    for args in [
        vec!["encode", "mean4.circ", "--input", "1,2,3,4"],
        vec!["encode", "mean4.circ", "--input", "1,2,3,4", "--embed", "8"],
        vec!["build", "--kind", "sign", "--depth", "2"],
        vec!["build", "--kind", "ext:relu", "--depth", "1"],
    ] {
        let a = run_in(w.path(), &args);
        let b = run_in(w.path(), &args);
        assert!(a.status.success(), "{args:?}");
        assert_eq!(stdout(&a), stdout(&b), "{args:?}");
        assert!(!stdout(&a).is_empty());
    }
}

#[test]
fn attn_reproduces_the_published_table() {
    let w = Workdir::new("attn");
    let build = run_in(
        w.path(),
        &["build", "--kind", "fac", "--depth", "1", "-o", "fac.xf"],
    );
    assert!(build.status.success());
    let enc = run_in(
        w.path(),
        &[
            "encode",
            "mean4.circ",
            "--input",
            "1,2,3,4",
            "-o",
            "mean4.seq",
        ],
    );
    assert!(enc.status.success());
    let attn = run_in(
        w.path(),
        &["attn", "fac.xf", "mean4.seq", "--layer", "2", "--head", "1"],
    );
    assert!(attn.status.success());
    let table = stdout(&attn);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 12);
    assert_eq!(lines[0], "1\t3\t5\t7\t9\t11\t11\t11\t11\t13\t13\t15");
    assert_eq!(
        lines[11],
        "-48\t-32\t-16\t0\t16\t32\t32\t32\t32\t48\t48\t64"
    );
}

#[test]
fn run_executes_a_built_config_on_an_encoded_sequence() {
    let w = Workdir::new("run");
    assert!(run_in(
        w.path(),
        &["build", "--kind", "fac", "--depth", "3", "-o", "fac.xf"]
    )
    .status
    .success());
    assert!(run_in(
        w.path(),
        &[
            "encode",
            "mean4.circ",
            "--input",
            "1,2,3,4",
            "-o",
            "mean4.seq"
        ]
    )
    .status
    .success());
    let out = run_in(w.path(), &["run", "fac.xf", "mean4.seq"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("dim 7\n"));
    // the output edge vector (successor 8) carries the circuit output 5/2
    let last = text.lines().last().unwrap();
    assert_eq!(last.split(' ').nth(4), Some("5/2"));
    let traced = run_in(w.path(), &["run", "fac.xf", "mean4.seq", "--trace"]);
    assert!(stdout(&traced).contains("# trace layer 2 head 1 attention"));
}

#[test]
fn configs_can_reference_host_circuits_by_path() {
    let w = Workdir::new("host");
    // attention: co-edge indicator zero(x_s - y_s), written as a circuit on
    // ten inputs (x then y)
    std::fs::write(
        w.path().join("att.circ"),
        "class semi\n\
         gate 1 input 1\ngate 2 input 2\ngate 3 input 3\ngate 4 input 4\ngate 5 input 5\n\
         gate 6 input 6\ngate 7 input 7\ngate 8 input 8\ngate 9 input 9\ngate 10 input 10\n\
         gate 11 const -1\n\
         gate 12 times 11 6\n\
         gate 13 plus 1 12\n\
         gate 14 times 13 13\n\
         gate 15 sign 14\n\
         gate 16 times 11 15\n\
         gate 17 plus 16\n\
         gate 18 const 1\n\
         gate 19 plus 18 17\n\
         gate 20 output 19\n",
    )
    .unwrap();
    // activation: keep the position's own vector (first five of ten inputs)
    let mut act = String::from("class semi\n");
    for k in 1..=10 {
        act.push_str(&format!("gate {k} input {k}\n"));
    }
    for k in 1..=5 {
        act.push_str(&format!("gate {} output {k}\n", 10 + k));
    }
    std::fs::write(w.path().join("act.circ"), act).unwrap();
    std::fs::write(
        w.path().join("host.xf"),
        "dim 5\nembed identity\nlayer\nhead circuit att.circ WS/avg\nact circuit act.circ\n",
    )
    .unwrap();
    std::fs::write(w.path().join("in.seq"), "dim 5\n1 0 0 2 9\n2 1 1 3 0\n").unwrap();
    let out = run_in(w.path(), &["run", "host.xf", "in.seq"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), "dim 5\n1 0 0 2 9\n2 1 1 3 0\n");
    // host functions have no textual form, so compiling still works while
    // the attention indicator stays exact
    let compiled = run_in(w.path(), &["compile", "host.xf", "--length", "2", "-o", "h.circ"]);
    assert!(compiled.status.success(), "{}", String::from_utf8_lossy(&compiled.stderr));
    assert!(run_in(w.path(), &["validate", "h.circ"]).status.success());
}

#[test]
fn compile_then_eval_matches_run() {
    let w = Workdir::new("compile");
    assert!(run_in(
        w.path(),
        &["build", "--kind", "fsac", "--depth", "1", "-o", "fsac.xf"]
    )
    .status
    .success());
    std::fs::write(
        w.path().join("tiny.circ"),
        "class semi\ngate 1 input 1\ngate 2 output 1\n",
    )
    .unwrap();
    assert!(run_in(
        w.path(),
        &[
            "encode",
            "tiny.circ",
            "--input",
            "5/3",
            "--embed",
            "8",
            "-o",
            "tiny.seq"
        ]
    )
    .status
    .success());
    assert!(run_in(
        w.path(),
        &["compile", "fsac.xf", "--length", "2", "-o", "compiled.circ"]
    )
    .status
    .success());
    assert!(run_in(w.path(), &["validate", "compiled.circ"])
        .status
        .success());
    // flatten the embedded sequence into an input list
    let seq = std::fs::read_to_string(w.path().join("tiny.seq")).unwrap();
    let flat: Vec<String> = seq
        .lines()
        .skip(1)
        .flat_map(|l| l.split(' ').map(str::to_string))
        .collect();
    let eval = run_in(
        w.path(),
        &["eval", "compiled.circ", "--input", &flat.join(",")],
    );
    assert!(eval.status.success());
    let evaluated = stdout(&eval);
    let values: Vec<&str> = evaluated.lines().collect();
    assert_eq!(values.len(), 16);
    // position 2 is the output edge; its v component carries 5/3
    assert_eq!(values[12], "5/3");
}

#[test]
fn compile_emissions_are_byte_identical() {
    let w = Workdir::new("compile-bytes");
    assert!(run_in(w.path(), &["build", "--kind", "fnc", "--depth", "1", "-o", "fnc.xf"])
        .status
        .success());
    let a = run_in(w.path(), &["compile", "fnc.xf", "--length", "3"]);
    let b = run_in(w.path(), &["compile", "fnc.xf", "--length", "3"]);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("# gates"));
}

#[test]
fn extension_basis_pipeline_through_config_files() {
    let w = Workdir::new("ext");
    std::fs::write(
        w.path().join("relu1.circ"),
        "class semi\ngate 1 input 1\ngate 2 ext relu 1\ngate 3 output 2\n",
    )
    .unwrap();
    let sim = run_in(
        w.path(),
        &["simulate", "--kind", "ext:relu", "--depth", "2", "relu1.circ", "--input", "-7/2"],
    );
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    assert_eq!(stdout(&sim), "0\n0\nMATCH\n");
    // the built config round-trips through its file form, extension types
    // included
    assert!(run_in(w.path(), &["build", "--kind", "ext:relu", "--depth", "2", "-o", "ext.xf"])
        .status
        .success());
    let cfg = std::fs::read_to_string(w.path().join("ext.xf")).unwrap();
    assert!(cfg.contains("extensions relu"));
    assert!(cfg.contains("act_V_ext(relu)"));
    assert!(run_in(w.path(), &["encode", "relu1.circ", "--input", "5/4", "-o", "relu1.seq"])
        .status
        .success());
    let out = run_in(w.path(), &["run", "ext.xf", "relu1.seq"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // output edge (successor 3) carries relu(5/4) = 5/4
    let text = stdout(&out);
    let last = text.lines().last().unwrap();
    assert_eq!(last.split(' ').nth(4), Some("5/4"));
}

#[test]
fn fuzz_reports_success_deterministically() {
    let w = Workdir::new("fuzz");
    let out = run_in(
        w.path(),
        &[
            "fuzz", "--kind", "fnc", "--depth", "3", "--count", "25", "--seed", "11",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("25 trials"));
}
