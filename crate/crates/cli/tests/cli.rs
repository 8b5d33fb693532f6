use std::io::Write;
use std::process::{Command, Output, Stdio};

use gfperiod_cli::parse_expression;

fn gfperiod(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_gfperiod"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    if let Some(s) = stdin {
        child.stdin.take().unwrap().write_all(s.as_bytes()).unwrap();
    }
    drop(child.stdin.take());
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim_end().to_string()
}

const WS4: &str = r#"{"vertices":["h","r1","r2","r3","r4"],"edges":[
    {"u":"h","v":"r1","w":1},{"u":"h","v":"r2","w":1},{"u":"h","v":"r3","w":1},{"u":"h","v":"r4","w":1},
    {"u":"r1","v":"r2","w":1},{"u":"r2","v":"r3","w":1},{"u":"r3","v":"r4","w":1},{"u":"r4","v":"r1","w":1}]}"#;

const K4: &str = r#"{"vertices":["a","b","c","x"],"edges":[
    {"u":"a","v":"b","w":1},{"u":"a","v":"c","w":1},{"u":"a","v":"x","w":1},
    {"u":"b","v":"c","w":1},{"u":"b","v":"x","w":1},{"u":"c","v":"x","w":1}],
    "labels":{"0":"a","1":"b","z":"c"}}"#;

#[test]
fn period_seq_22() {
    let o = gfperiod(&["period", "seq", "22"], None);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "6*z(3)");
}

#[test]
fn period_zigzag_5() {
    let o = gfperiod(&["period", "zigzag", "5"], None);
    assert_eq!(stdout(&o), "441/8*z(7)");
}

#[test]
fn divergent_word_exits_2() {
    let o = gfperiod(&["gf", "seq", "02"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error: divergent (word must begin with 2)"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(gfperiod(&["nonsense"], None).status.code(), Some(1));
    assert_eq!(gfperiod(&["period", "seq", "22", "--frobnicate"], None).status.code(), Some(1));
    let o = gfperiod(&["mzv", "reduce", "zeta[1"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
}

#[test]
fn json_schema() {
    let o = gfperiod(&["--json", "period", "seq", "212"], None);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["input"], "212");
    assert_eq!(v["reduced"], "20*z(5)");
    assert!(v["numeric"].as_str().unwrap().starts_with("20.738555102867"));
    assert!(v["provenance"].is_array());
}

#[test]
fn deterministic_output() {
    let a = gfperiod(&["--json", "period", "seq", "2012"], None);
    let b = gfperiod(&["--json", "period", "seq", "2012"], None);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn mzv_commands() {
    assert_eq!(stdout(&gfperiod(&["mzv", "reduce", "zeta[10]"], None)), "-z(2)");
    assert_eq!(stdout(&gfperiod(&["mzv", "reduce", "z(1,2)"], None)), "z(3)");
    let e = stdout(&gfperiod(&["--prec", "20", "mzv", "eval", "z(3)"], None));
    assert!(e.starts_with("1.2020569031595942854"), "{e}");
}

#[test]
fn svmp_commands() {
    assert_eq!(stdout(&gfperiod(&["svmp", "basis", "0"], None)), "L[0]+Lb[0]");
    assert_eq!(stdout(&gfperiod(&["svmp", "diff", "P[0]"], None)), "z^-1");
    let i = stdout(&gfperiod(&["svmp", "int", "z^-1*P[0]"], None));
    assert_eq!(i, "L[00]+Lb[0]*L[0]+Lb[00]");
    let e = stdout(&gfperiod(&["svmp", "eval", "P[0]", "--at", "2+1i"], None));
    assert!(e.starts_with("2+1i, 1.609437912434100374600"), "{e}");
}

#[test]
fn gf_and_plane_commands() {
    let f = stdout(&gfperiod(&["gf", "seq", "2"], None));
    assert!(f.ends_with("/(z-zb)"));
    let g = stdout(&gfperiod(&["gf", "graph", "-"], Some(K4)));
    let expect = parse_expression("(P[01]-P[10])/(z*zb*(z-1)*(zb-1))/(z-zb)").unwrap();
    assert_eq!(parse_expression(&g).unwrap(), expect);
    let p = stdout(&gfperiod(&["integrate-plane", "(P[01]-P[10])^2/16"], None));
    assert_eq!(p, "-1/2*z(3)\nconvergent: false");
    let x = stdout(&gfperiod(&["expand", "P[0]", "--at", "0", "--order", "1"], None));
    assert_eq!(x, "0, 1, 0, 0, 1");
}

#[test]
fn graph_commands() {
    let o = gfperiod(&["period", "graph", "-"], Some(WS4));
    assert_eq!(stdout(&o), "20*z(5)");
    let c = gfperiod(&["check", "graph", "-"], Some(K4));
    assert!(stdout(&c).starts_with("convergent"));
    let bad = r#"{"vertices":["0","1","z","x"],"edges":[{"u":"x","v":"0","w":1},{"u":"x","v":"z","w":1}],
        "labels":{"0":"0","1":"1","z":"z"}}"#;
    let d = gfperiod(&["check", "graph", "-"], Some(bad));
    assert_eq!(d.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&d.stderr).contains("infrared"));
}
