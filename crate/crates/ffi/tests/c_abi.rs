use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use feedopt_ffi::*;

const SCALAR: &str = r#"
[plant]
C = [[1.0]]
[[plant.modes]]
A = [[-1.0]]
B = [[1.0]]
E = [[1.0]]

[cost]
kind = "quadratic"
R = [[0.5]]
Qy = [[0.5]]

[controller]
kind = "gradient"
epsilon_fraction = 0.5

[disturbance]
kind = "constant"
value = [1.0]

[integrator]
horizon = 10.0
"#;

fn parse(text: &str) -> (FeedoptStatus, *mut FeedoptScenario) {
    let c = CString::new(text).unwrap();
    let mut sc = ptr::null_mut();
    let st = unsafe { feedopt_scenario_parse(c.as_ptr(), &mut sc) };
    (st, sc)
}

fn last_error() -> String {
    let p = feedopt_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn parse_check_simulate_round_trip() {
    let (st, sc) = parse(SCALAR);
    assert_eq!(st, FeedoptStatus::Ok);
    assert!(feedopt_last_error().is_null());
    unsafe {
        let (mut n, mut m, mut modes) = (0, 0, 0);
        assert_eq!(feedopt_scenario_dims(sc, &mut n, &mut m, ptr::null_mut(), ptr::null_mut(), &mut modes), FeedoptStatus::Ok);
        assert_eq!((n, m, modes), (1, 1, 1));

        let mut pass = -1;
        let mut report = ptr::null_mut();
        assert_eq!(feedopt_scenario_check(sc, &mut pass, &mut report), FeedoptStatus::Ok);
        assert_eq!(pass, 1);
        let text = CStr::from_ptr(report).to_str().unwrap().to_owned();
        feedopt_string_free(report);
        assert!(text.contains("PASS mode 1 epsilon"), "{text}");

        let mut arc = ptr::null_mut();
        assert_eq!(feedopt_simulate(sc, &mut arc), FeedoptStatus::Ok);
        let len = feedopt_arc_len(arc);
        let dim = feedopt_arc_state_dim(arc);
        assert!(len > 10);
        assert_eq!(dim, 2);
        let mut state = vec![0.0; dim];
        let (mut t, mut j, mut sigma, mut err) = (0.0, 0, 0, 0.0);
        assert_eq!(
            feedopt_arc_sample(arc, len - 1, &mut t, &mut j, &mut sigma, &mut err, state.as_mut_ptr(), dim),
            FeedoptStatus::Ok
        );
        assert!((t - 10.0).abs() < 1e-9);
        assert_eq!((j, sigma), (0, 1));
        // u* = -w/2 for this cost.
        assert!((state[1] + 0.5).abs() < 1e-6, "{state:?}");
        assert!(err < 1e-6);

        let (mut fe, mut sw, mut rs, mut dv, mut at) = (0.0, 9, 9, 9, 0.0);
        assert_eq!(feedopt_arc_summary(arc, &mut fe, &mut sw, &mut rs, &mut dv, &mut at), FeedoptStatus::Ok);
        assert_eq!((sw, rs, dv), (0, 0, 0));
        assert!(at.is_nan());
        assert_eq!(fe, err);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("arc.csv");
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(feedopt_arc_write_csv(arc, cpath.as_ptr()), FeedoptStatus::Ok);
        let csv = std::fs::read_to_string(&path).unwrap();
        assert_eq!(csv.lines().count(), len + 1);
        assert!(csv.starts_with("t,j,sigma,tau,x_0,u_0,y_0,"));

        feedopt_arc_free(arc);
        feedopt_scenario_free(sc);
    }
}

#[test]
fn errors_map_to_codes() {
    let (st, sc) = parse("[plant\n");
    assert_eq!(st, FeedoptStatus::ParseError);
    assert!(sc.is_null());
    assert!(last_error().contains("line 1"), "{}", last_error());

    let bad_shape = SCALAR.replace("B = [[1.0]]", "B = [[1.0, 2.0]]");
    assert_eq!(parse(&bad_shape).0, FeedoptStatus::ParseError);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { feedopt_scenario_parse(ptr::null(), &mut out) }, FeedoptStatus::NullPointer);
    assert_eq!(unsafe { feedopt_simulate(ptr::null(), &mut ptr::null_mut()) }, FeedoptStatus::NullPointer);
    let missing = CString::new("/nonexistent/scenario.toml").unwrap();
    assert_eq!(unsafe { feedopt_scenario_load(missing.as_ptr(), &mut out) }, FeedoptStatus::IoError);

    let (_, sc) = parse(SCALAR);
    unsafe {
        let mut arc = ptr::null_mut();
        feedopt_simulate(sc, &mut arc);
        let len = feedopt_arc_len(arc);
        let st = feedopt_arc_sample(arc, len, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), 0);
        assert_eq!(st, FeedoptStatus::OutOfRange);
        let mut small = [0.0; 1];
        let st = feedopt_arc_sample(arc, 0, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), small.as_mut_ptr(), 1);
        assert_eq!(st, FeedoptStatus::BufferTooSmall);
        feedopt_arc_free(arc);
        feedopt_scenario_free(sc);
        assert_eq!(feedopt_arc_len(ptr::null()), 0);
        feedopt_arc_free(ptr::null_mut());
        feedopt_scenario_free(ptr::null_mut());
    }

    let name = CString::new("no-such-experiment").unwrap();
    let dir = CString::new("/tmp").unwrap();
    let mut pass = 0;
    assert_eq!(
        unsafe { feedopt_experiment_run(name.as_ptr(), 0, dir.as_ptr(), &mut pass) },
        FeedoptStatus::UnknownExperiment
    );
}

#[test]
fn experiment_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let name = CString::new("ctm").unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut pass = -1;
    assert_eq!(unsafe { feedopt_experiment_run(name.as_ptr(), 0, out.as_ptr(), &mut pass) }, FeedoptStatus::Ok);
    assert_eq!(pass, 1);
    for f in ["controlled.csv", "uncontrolled.csv", "summary.toml"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn header_is_current() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/feedopt.h")).unwrap();
    for sym in [
        "feedopt_last_error",
        "feedopt_scenario_load",
        "feedopt_scenario_parse",
        "feedopt_scenario_check",
        "feedopt_simulate",
        "feedopt_arc_sample",
        "feedopt_arc_summary",
        "feedopt_arc_write_csv",
        "feedopt_experiment_run",
        "typedef struct FeedoptArc FeedoptArc",
        "FEEDOPT_STATUS_PARSE_ERROR = 3",
    ] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "feedopt.h"
int main(int argc, char **argv) {
    FeedoptScenario *sc = NULL;
    if (feedopt_scenario_parse(argv[1], &sc) != FEEDOPT_STATUS_OK) return 10;
    FeedoptArc *arc = NULL;
    if (feedopt_simulate(sc, &arc) != FEEDOPT_STATUS_OK) return 11;
    double err = -1.0;
    int diverged = -1;
    if (feedopt_arc_summary(arc, &err, NULL, NULL, &diverged, NULL) != FEEDOPT_STATUS_OK) return 12;
    printf("%zu %.3e %d\n", feedopt_arc_len(arc), err, diverged);
    feedopt_arc_free(arc);
    feedopt_scenario_free(sc);
    FeedoptScenario *bad = NULL;
    if (feedopt_scenario_parse("[plant\n", &bad) != FEEDOPT_STATUS_PARSE_ERROR) return 13;
    printf("%s\n", feedopt_last_error());
    return 0;
}
"#;

/// Compiles a C client against the generated header and the static library.
#[test]
fn c_client_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libfeedopt_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = dir.path().join("client");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).arg(SCALAR).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    let fields: Vec<&str> = lines.next().unwrap().split(' ').collect();
    assert!(fields[0].parse::<usize>().unwrap() > 10);
    assert!(fields[1].parse::<f64>().unwrap() < 1e-6);
    assert_eq!(fields[2], "0");
    assert!(lines.next().unwrap().contains("line 1"));
}
