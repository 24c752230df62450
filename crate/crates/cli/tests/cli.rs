use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    /// A scratch directory holding the exported robot model files.
    fn new() -> Self {
        let w = Workspace { dir: tempfile::tempdir().unwrap() };
        w.ok(&["models", "export", "robot", "--dir", "m"]);
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run_env(&self, args: &[&str], env: &[(&str, &str)]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_decsynth"));
        cmd.args(args).current_dir(self.dir.path()).env_remove("DECSYNTH_SEED");
        for (k, v) in env {
            cmd.env(k, v);
        }
        cmd.output().unwrap()
    }

    fn run(&self, args: &[&str]) -> Output {
        self.run_env(args, &[])
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.path(name)).unwrap()).unwrap()
    }

    fn one_verifier_model(&self) {
        self.ok(&["augment", "m/robot.pm", "--tensor", "m/robot.tensor.json", "--verifiers", "0", "-o", "aug.txt"]);
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn next_true_prints_one() {
    let w = Workspace::new();
    assert_eq!(w.ok(&["check", "m/robot.pm", "P=? [ X true ]", "--uniform"]).trim(), "1.0");
    w.ok(&["build", "m/robot.pm", "--const", "t_wait=3", "-o", "robot.txt"]);
    assert_eq!(w.ok(&["check", "robot.txt", "P=? [ X true ]", "--uniform"]).trim(), "1.0");
}

#[test]
fn check_evaluates_and_compares() {
    let w = Workspace::new();
    let go = ["--param", "x1_wait=0", "--param", "x1_go=1", "--param", "x2_wait=0", "--param", "x2_go=1"];
    let mut args = vec!["check", "m/robot.pm", r#"P=? [ !"collision" U "done" ]"#];
    args.extend(go);
    let value: f64 = w.ok(&args).trim().parse().unwrap();
    assert!((value - 0.75).abs() < 1e-12);
    args[2] = r#"P>0.75 [ !"collision" U "done" ]"#;
    assert_eq!(w.ok(&args).trim(), "false");
}

#[test]
fn grid_synthesis_records_its_run() {
    let w = Workspace::new();
    w.one_verifier_model();
    w.ok(&["synth", "aug.txt", "--requirements", "m/robot.req", "--method", "grid", "--step", "0.1", "-o", "f.json"]);
    let artifact = w.json("f.json");
    assert_eq!(artifact["data"]["evaluated"], 14641);
    let manifest = &artifact["manifest"];
    assert_eq!(manifest["subcommand"], "synth");
    assert_eq!(manifest["options"]["step"], 0.1);
    assert_eq!(manifest["options"]["method"], "grid");
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    assert!(inputs.iter().all(|i| i["sha256"].as_str().unwrap().len() == 64));
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn every_format_reads_back() {
    let w = Workspace::new();
    // Explicit models: writing what was read reproduces it.
    w.ok(&["build", "m/robot.pm", "-o", "a.txt"]);
    w.ok(&["build", "a.txt", "-o", "b.txt"]);
    assert_eq!(fs::read_to_string(w.path("a.txt")).unwrap(), fs::read_to_string(w.path("b.txt")).unwrap());
    assert!(w.path("a.txt.manifest.json").exists());

    // Emitted source builds to the same model as direct augmentation.
    w.one_verifier_model();
    w.ok(&[
        "augment",
        "m/robot.pm",
        "--tensor",
        "m/robot.tensor.json",
        "--verifiers",
        "0",
        "--emit-pm",
        "-o",
        "aug.pm",
    ]);
    w.ok(&["build", "aug.pm", "-o", "rebuilt.txt"]);
    let query = r#"R{"time"}=? [ F "done" ]"#;
    let a = w.ok(&["check", "aug.txt", query, "--uniform"]);
    let b = w.ok(&["check", "rebuilt.txt", query, "--uniform"]);
    assert!((a.trim().parse::<f64>().unwrap() - b.trim().parse::<f64>().unwrap()).abs() < 1e-9);

    // Fronts as JSON and CSV describe the same set.
    w.ok(&["synth", "aug.txt", "--requirements", "m/robot.req", "--step", "0.5", "-o", "f.json", "--csv", "f.csv"]);
    w.ok(&["pareto", "f.csv", "--reference", "f.json", "-o", "cmp.json"]);
    let cmp = w.json("cmp.json");
    assert_eq!(cmp["data"]["igd"], 0.0);
    assert_eq!(cmp["data"]["hv"], cmp["data"]["reference_hv"]);
    assert_eq!(
        w.ok(&["check", "aug.txt", query, "--front", "f.json", "--member", "0"]).trim().parse::<f64>().unwrap(),
        w.json("f.json")["data"]["front"]["members"][0]["objective_values"][1].as_f64().unwrap()
    );

    // Simulated readings feed `quantify`, whose tensor feeds `augment`.
    w.ok(&[
        "sim",
        "dataset",
        "--per-class",
        "100",
        "--tensor",
        "m/robot.tensor.json",
        "--encounters",
        "e.csv",
        "--samples",
        "s.csv",
    ]);
    assert_eq!(fs::read_to_string(w.path("e.csv")).unwrap().lines().count(), 201);
    w.ok(&["quantify", "s.csv", "-o", "t.json"]);
    let tensor = w.json("t.json");
    assert_eq!(tensor["data"]["classes"], 2);
    w.ok(&["augment", "m/robot.pm", "--tensor", "t.json", "--marginalize", "-o", "q.txt"]);
    let out = w.ok(&["check", "q.txt", r#"P=? [ !"collision" U "done" ]"#, "--uniform"]);
    assert!(out.trim().parse::<f64>().unwrap() > 0.0);

    // Validation reports are JSON artifacts.
    w.ok(&[
        "sim",
        "validate",
        "--front",
        "f.json",
        "--tensor",
        "m/robot.tensor.json",
        "--verifiers",
        "0",
        "--journeys",
        "20",
        "--waypoints",
        "10",
        "--bank-size",
        "50",
        "-o",
        "v.json",
    ]);
    let v = w.json("v.json");
    assert_eq!(v["data"]["report"]["journeys"].as_array().unwrap().len(), 20);
    assert!(v["data"]["prediction"]["success"].as_f64().unwrap() > 0.7);
}

#[test]
fn changed_inputs_need_force() {
    let w = Workspace::new();
    let synth = ["synth", "aug.txt", "--requirements", "m/robot.req", "--step", "0.5", "-o", "f.json"];
    w.one_verifier_model();
    w.ok(&synth);
    // Same inputs: re-running is fine.
    w.ok(&synth);
    w.ok(&["augment", "m/robot.pm", "--tensor", "m/robot.tensor.json", "--verifiers", "1", "-o", "aug.txt", "--force"]);
    let refused = w.run(&synth);
    assert_eq!(code(&refused), 1);
    assert!(stderr(&refused).contains("--force"));
    let mut forced = synth.to_vec();
    forced.push("--force");
    w.ok(&forced);
    // Files decsynth did not write are left alone.
    fs::write(w.path("mine.txt"), "keep").unwrap();
    assert_eq!(code(&w.run(&["build", "m/robot.pm", "-o", "mine.txt"])), 1);
    assert_eq!(fs::read_to_string(w.path("mine.txt")).unwrap(), "keep");
}

#[test]
fn exit_codes_separate_usage_from_domain_errors() {
    let w = Workspace::new();
    assert_eq!(code(&w.run(&["synth"])), 2);
    assert_eq!(code(&w.run(&["frobnicate"])), 2);
    assert_eq!(code(&w.run(&["check", "m/robot.pm", "P=? [ X true ]", "--param", "x1_go"])), 2);
    assert_eq!(code(&w.run(&["check", "m/robot.pm", "P=? [ X true ]"])), 2);
    assert_eq!(code(&w.run(&["--jobs", "0", "models", "list"])), 2);
    fs::write(w.path("bad.pm"), "dtmc\n\nmodule m\n  x : [0..1] init 0;\n  [] x=0 -> 0.5 : (x'=1);\nendmodule\n")
        .unwrap();
    let bad = w.run(&["build", "bad.pm"]);
    assert_eq!(code(&bad), 1);
    assert!(stderr(&bad).contains("bad.pm: line 5"), "{}", stderr(&bad));
    let missing = w.run(&["build", "nowhere.pm"]);
    assert_eq!(code(&missing), 1);
    assert!(stderr(&missing).contains("nowhere.pm"));
    let infeasible = "constraint: R{\"time\"}<=1 [ F \"done\" ]\nminimise: R{\"time\"}=? [ F \"done\" ]\n";
    fs::write(w.path("tight.req"), infeasible).unwrap();
    assert_eq!(code(&w.run(&["synth", "m/robot.pm", "--requirements", "tight.req"])), 1);
    assert_eq!(code(&w.run(&["--help"])), 0);
}

fn ga_front(w: &Workspace, extra: &[&str], env: &[(&str, &str)]) -> Value {
    let mut args = vec![
        "synth",
        "aug.txt",
        "--requirements",
        "m/robot.req",
        "--method",
        "ga",
        "--population",
        "8",
        "--max-evals",
        "40",
    ];
    args.extend(extra);
    let out = w.run_env(&args, env);
    assert!(out.status.success(), "{}", stderr(&out));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn seed_falls_back_to_the_environment() {
    let w = Workspace::new();
    w.one_verifier_model();
    let from_env = ga_front(&w, &[], &[("DECSYNTH_SEED", "11")]);
    let from_flag = ga_front(&w, &["--seed", "11"], &[]);
    assert_eq!(from_env["manifest"]["seed"], 11);
    assert_eq!(from_env["data"], from_flag["data"]);
    let flag_wins = ga_front(&w, &["--seed", "12"], &[("DECSYNTH_SEED", "11")]);
    assert_eq!(flag_wins["manifest"]["seed"], 12);
    assert_ne!(flag_wins["data"], from_flag["data"]);
}

#[test]
fn worker_count_does_not_change_results() {
    let w = Workspace::new();
    w.one_verifier_model();
    w.ok(&["synth", "aug.txt", "--requirements", "m/robot.req", "--step", "0.5", "-o", "f.json"]);
    let validate = |jobs: &str, out: &str| {
        w.ok(&[
            "--jobs",
            jobs,
            "sim",
            "validate",
            "--front",
            "f.json",
            "--member",
            "2",
            "--tensor",
            "m/robot.tensor.json",
            "--verifiers",
            "0",
            "--journeys",
            "40",
            "--waypoints",
            "20",
            "--bank-size",
            "40",
            "--seed",
            "3",
            "-o",
            out,
        ]);
        w.json(out)["data"].clone()
    };
    assert_eq!(validate("1", "one.json"), validate("3", "three.json"));
}

#[test]
fn safescad_fronts_compare_with_the_wider_nadir() {
    let w = Workspace::new();
    w.ok(&["models", "export", "safescad", "--dir", "m"]);
    w.ok(&["augment", "m/safescad.pm", "--tensor", "m/safescad.tensor.json", "-o", "s.txt"]);
    for (seed, out) in [("1", "a.json"), ("2", "b.json")] {
        w.ok(&[
            "synth",
            "s.txt",
            "--requirements",
            "m/safescad.req",
            "--method",
            "ga",
            "--deterministic",
            "--population",
            "8",
            "--max-evals",
            "24",
            "--seed",
            seed,
            "-o",
            out,
        ]);
    }
    let scaled = |scale: &str| -> f64 {
        let out = w.ok(&["pareto", "a.json", "--reference", "b.json", "--hv-scale", scale]);
        serde_json::from_str::<Value>(&out).unwrap()["data"]["hv"].as_f64().unwrap()
    };
    let (wide, narrow) = (scaled("1.75"), scaled("1.5"));
    assert!(wide.is_finite() && wide > narrow);
    assert_eq!(code(&w.run(&["pareto", "a.json", "--reference", "b.json", "--hv-scale", "0.5"])), 1);
}

#[test]
fn bundled_models_are_listed() {
    let w = Workspace::new();
    assert_eq!(w.ok(&["models", "list"]).lines().collect::<Vec<_>>(), ["robot", "safescad"]);
    assert!(Path::new(&w.path("m/robot.req")).exists());
    assert_eq!(code(&w.run(&["models", "export", "nope"])), 2);
}
