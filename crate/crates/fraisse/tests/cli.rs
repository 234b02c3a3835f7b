use std::fs;
use std::path::PathBuf;

use fraisse::cli::{run, DEFICIT, FAIL, PASS, USAGE};
use fraisse::independence::{FORKING_LABEL, KIM_LABEL};

struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("fraisse-cli-{}-{tag}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn file(&self, name: &str, body: &str) -> String {
        let p = self.0.join(name);
        fs::write(&p, body).unwrap();
        p.to_string_lossy().into_owned()
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

fn fraisse(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = run(std::iter::once("fraisse").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

#[test]
fn amalgamate_prints_the_amalgam_and_both_maps() {
    let dir = Scratch::new("amalgamate");
    let e = dir.file("e", "(structure (sig-ref graphs) (carrier V a))");
    let a = dir.file("a", "(structure (sig-ref graphs) (carrier V a b) (rel E (a b) (b a)))");
    let b = dir.file("b", "(structure (sig-ref graphs) (carrier V a c) (rel E (a c) (c a)))");
    let (code, out) = fraisse(&["amalgamate", "--class", "graphs", "--base", &e, "--left", &a, "--right", &b]);
    assert_eq!(code, PASS, "{out}");
    assert!(out.contains("(structure"));
    assert_eq!(out.matches("(morphism").count(), 2);
}

#[test]
fn parse_errors_name_the_file_position() {
    let dir = Scratch::new("parse");
    let e = dir.file("e", "(structure (sig-ref graphs) (carrier V a)");
    let (code, out) = fraisse(&["amalgamate", "--class", "graphs", "--base", &e, "--left", &e, "--right", &e]);
    assert_eq!(code, USAGE);
    assert!(out.contains(&format!("{e}:1:")), "{out}");
    let (code, _) = fraisse(&["check-class", "--class", "hypergraphs"]);
    assert_eq!(code, USAGE);
    let (code, _) = fraisse(&["no-such-verb"]);
    assert_eq!(code, USAGE);
}

#[test]
fn check_class_verdicts() {
    let (code, out) = fraisse(&["check-class", "--class", "graphs"]);
    assert_eq!(code, PASS, "{out}");
    assert!(out.contains("(quantifier-elimination (status unchecked))"));
    let (code, out) = fraisse(&["check-class", "--class", "genpred(vec(2), V)", "--budget", "5"]);
    assert_eq!(code, PASS, "{out}");
    let (code, _) = fraisse(&["check-class", "--class", "gensub(vec(2))"]);
    assert_eq!(code, FAIL);
}

#[test]
fn indep_reports_every_relation() {
    let dir = Scratch::new("indep");
    let q = dir.file(
        "q",
        "(structure (sig-ref graphs) (carrier V a b c) (rel E (a b) (b a)))\n\
         (query (A a) (B b) (C))\n\
         (query (A a) (B c) (C c))\n",
    );
    let (code, out) = fraisse(&["indep", "--class", "graphs", "--input", &q]);
    assert_eq!(code, PASS, "{out}");
    assert!(out.contains(FORKING_LABEL) && out.contains(KIM_LABEL));
}

#[test]
fn suite_counterexample_replays_through_indep() {
    let (code, out) = fraisse(&["suite", "--class", "eqrel-raw", "--budget", "4", "--cases", "50"]);
    assert_eq!(code, FAIL);
    let start = out.find("; first counterexample for independence-theorem").expect("a cube counterexample");
    let dir = Scratch::new("replay");
    let cube = dir.file("cube", &out[start..]);
    let (code, replay) = fraisse(&["indep", "--class", "eqrel-raw", "--input", &cube]);
    assert_eq!(code, FAIL, "{replay}");
    let (code, out) = fraisse(&["suite", "--class", "graphs", "--budget", "3", "--cases", "50"]);
    assert_eq!(code, PASS, "{out}");
}

#[test]
fn saturation_is_repeatable_and_caps_report_a_deficit() {
    let args = ["saturate", "--class", "graphs", "--gen-bound", "2", "--rounds", "2", "--seed", "3"];
    let (code, first) = fraisse(&args);
    assert_eq!(code, PASS, "{first}");
    assert_eq!(fraisse(&args).1, first);
    assert!(first.starts_with("; saturated class=graphs n=2 rounds=2 seed=3"));
    let (code, out) = fraisse(&["saturate", "--class", "graphs", "--gen-bound", "2", "--rounds", "4", "--cap", "4"]);
    assert_eq!(code, DEFICIT, "{out}");
    assert!(out.contains("; deficit:"));
}

#[test]
fn ip_witness_on_a_saturated_structure() {
    let dir = Scratch::new("ip");
    let start = dir.file("start", "(structure (sig-ref x) (carrier P p0 p1 p2) (carrier V o0))");
    let (code, sat) = fraisse(&["saturate", "--class", "param(graphs, sets)", "--input", &start, "--gen-bound", "4"]);
    assert_eq!(code, PASS, "{sat}");
    let m = dir.file("m", &sat);
    let psi = dir.file("psi", "(separating (parameter p) (object x) (fixed (b o0)) (rel E p x b))");
    let (code, out) = fraisse(&["witness", "ip", "--class", "param(graphs, sets)", "--input", &m, "--formula", &psi, "--depth", "2"]);
    assert_eq!(code, PASS, "{out}");
}

#[test]
fn acl_refuses_generated_points() {
    let dir = Scratch::new("acl");
    let plane = dir.file(
        "plane",
        "(structure (sig-ref v) (carrier V 0 g h g+h)\n\
         (fun zero (() 0))\n\
         (fun plus ((g g) 0) ((g h) g+h) ((g 0) g) ((g g+h) h) ((h g) g+h) ((h h) 0) ((h 0) h) ((h g+h) g) ((0 g) g) ((0 h) h) ((0 0) 0) ((0 g+h) g+h) ((g+h g) h) ((g+h h) g) ((g+h 0) g+h) ((g+h g+h) 0))\n\
         (fun neg ((g) g) ((h) h) ((0) 0) ((g+h) g+h))\n\
         (fun smul0 ((g) 0) ((h) 0) ((0) 0) ((g+h) 0))\n\
         (fun smul1 ((g) g) ((h) h) ((0) 0) ((g+h) g+h)))\n",
    );
    let acl = |point: &str| fraisse(&["witness", "acl", "--class", "vec(2)", "--input", &plane, "--base", "g", "--point", point, "--rounds", "2"]);
    let (code, out) = acl("h");
    assert_eq!(code, PASS, "{out}");
    let (code, _) = acl("0");
    assert_eq!(code, FAIL);
}

#[test]
fn flatten_splits_by_parameter() {
    let dir = Scratch::new("flatten");
    let f = dir.file("f", "(and (= (fun plus p x (fun plus q y z)) x) (not (= p q)))");
    let (code, out) = fraisse(&["flatten", "--class", "param(vec(2), sets)", "--input", &f]);
    assert_eq!(code, PASS, "{out}");
    assert!(out.contains("(flattened"));
    assert!(out.contains("(over p") && out.contains("(over q"), "{out}");
}
