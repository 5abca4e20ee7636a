use std::path::{Path, PathBuf};
use std::process::Command;

use contraction_lab::report::{CheckEntry, Comparison, Status, VerificationReport};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contraction-lab"))
}

fn specs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("contraction-lab-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> i32 {
    let out = bin().args(args).output().unwrap();
    assert!(out.stdout.is_empty(), "stdout must stay clean");
    out.status.code().unwrap()
}

fn spec(name: &str) -> String {
    specs().join(name).to_string_lossy().into_owned()
}

fn read_report(p: &Path) -> VerificationReport {
    VerificationReport::from_json(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn verify_gaussian_pair_reports_half() {
    let dir = scratch("verify");
    let out = dir.join("r.json");
    let code = run(&[
        "verify",
        "--source",
        &spec("gaussian.spec"),
        "--target",
        &spec("gaussian_half.spec"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let r = read_report(&out);
    let e = r.get("lipschitz_sup_derivative").unwrap();
    assert!((e.computed - 0.5).abs() < 1e-10);
    assert_eq!(e.status, Status::Pass);
    assert!(dir.join("r.map.csv").exists());
}

#[test]
fn strong_poincare_equality_entry() {
    let dir = scratch("poincare");
    let out = dir.join("p.json");
    let code = run(&["inequalities", "--checks", "strong_poincare", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let r = read_report(&out);
    let e = r.get("strong_poincare[f=-1+1x^2]").unwrap();
    assert!((e.computed - 2.0).abs() < 1e-8 && (e.bound - 2.0).abs() < 1e-8);
}

#[test]
fn malformed_spec_exits_two_without_report() {
    let dir = scratch("malformed");
    let bad = dir.join("bad.spec");
    std::fs::write(&bad, "family = gaussian\nsigma = fast\n").unwrap();
    let out = dir.join("r.json");
    let code = run(&[
        "verify",
        "--source",
        bad.to_str().unwrap(),
        "--target",
        &spec("gaussian.spec"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(!out.exists());
    // unknown check and out-of-range knob are config errors too
    assert_eq!(run(&["inequalities", "--checks", "kls", "--out", out.to_str().unwrap()]), 2);
    assert_eq!(
        run(&["flow", "--target", &spec("quartic_flow.spec"), "--dt", "0", "--out", out.to_str().unwrap()]),
        2
    );
    assert!(!out.exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = scratch("rerun");
    let a = dir.join("a.json");
    let b = dir.join("b.json");
    let args = |p: &Path| {
        vec![
            "inequalities".to_string(),
            "--checks".into(),
            "correlation,b_inequality".into(),
            "--n-samples".into(),
            "100000".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            p.to_string_lossy().into_owned(),
        ]
    };
    assert_eq!(bin().args(args(&a)).output().unwrap().status.code(), Some(0));
    assert_eq!(bin().args(args(&b)).arg("--jobs").arg("1").output().unwrap().status.code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read(dir.join("a.b_curve.csv")).unwrap(),
        std::fs::read(dir.join("b.b_curve.csv")).unwrap()
    );
    // a different seed moves the estimates
    let c = dir.join("c.json");
    let mut other = args(&c);
    other[6] = "8".into();
    assert_eq!(bin().args(other).output().unwrap().status.code(), Some(0));
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn report_rerenders_and_propagates_failures() {
    let dir = scratch("report");
    let mut r = VerificationReport::new();
    r.push(CheckEntry::compare("ok", "audit", 1.0, 2.0, Comparison::AtMost, 0.0));
    let input = dir.join("in.json");
    std::fs::write(&input, r.to_json()).unwrap();
    let csv = dir.join("out.csv");
    let code = run(&[
        "report",
        "--input",
        input.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), r.to_csv());

    r.push(CheckEntry::compare("bad", "audit", 3.0, 2.0, Comparison::AtMost, 0.0));
    std::fs::write(&input, r.to_json()).unwrap();
    let json = dir.join("out.json");
    let code = run(&["report", "--input", input.to_str().unwrap(), "--out", json.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(std::fs::read_to_string(&json).unwrap(), r.to_json());
}

#[test]
fn non_convergence_exits_three_with_report() {
    let dir = scratch("nonconv");
    let out = dir.join("r.json");
    let code = run(&[
        "solve",
        "--source",
        &spec("gaussian2.spec"),
        "--target",
        &spec("quartic2.spec"),
        "--grid-n",
        "16",
        "--max-iter",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 3);
    let r = read_report(&out);
    assert!(r.metadata["error"].contains("did not converge"));
}

#[test]
fn model_measures_and_radial_targets() {
    let dir = scratch("model");
    let out = dir.join("nu.json");
    let code = run(&[
        "verify",
        "--source",
        &spec("nu1.spec"),
        "--target",
        &spec("nu2.spec"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let e = read_report(&out).get("lipschitz_sup_derivative").cloned().unwrap();
    assert_eq!(e.theorem, "nuA-image");
    assert!(e.computed <= 1.0 + 1e-6);

    let out = dir.join("radial.json");
    let code = run(&[
        "solve",
        "--source",
        &spec("lebesgue2.spec"),
        "--target",
        &spec("radial_exp.spec"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.join("radial.radial.csv")).unwrap();
    assert!(csv.lines().count() > 100);
    // a non-Lebesgue source is rejected before anything is written
    let out = dir.join("x.json");
    let code = run(&[
        "solve",
        "--source",
        &spec("gaussian2.spec"),
        "--target",
        &spec("radial_exp.spec"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(!out.exists());
}

#[test]
fn flow_cross_checks_the_monotone_map() {
    let dir = scratch("flow");
    let out = dir.join("f.json");
    let code = run(&[
        "flow",
        "--target",
        &spec("quartic_flow.spec"),
        "--seeds",
        "131",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let r = read_report(&out);
    assert!(r.get("flow_vs_monotone").unwrap().computed < 1e-4);
    let traj = std::fs::read_to_string(dir.join("f.trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,seed,axis,position,velocity\n"));
}

#[test]
fn library_entry_point_parses_like_the_binary() {
    use clap::Parser;
    use contraction_lab_cli::{run as run_lib, Cli, Command as Cmd, DEFAULT_SEED};
    let cli = Cli::try_parse_from(["contraction-lab", "inequalities", "--checks", "harge,nu_profile"]).unwrap();
    assert_eq!(cli.common.seed, DEFAULT_SEED);
    match &cli.command {
        Cmd::Inequalities(a) => assert_eq!(a.checks.as_deref().unwrap(), ["harge", "nu_profile"]),
        other => panic!("{other:?}"),
    }
    assert!(Cli::try_parse_from(["contraction-lab", "verify", "--grid-n", "x"]).is_err());
    let dir = scratch("lib");
    let out = dir.join("r.json");
    let cli = Cli::try_parse_from([
        "contraction-lab",
        "report",
        "--input",
        dir.join("missing.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
    .unwrap();
    let o = run_lib(&cli);
    assert_eq!(o.code, 2);
    assert!(o.written.is_empty() && !out.exists());
}

#[test]
fn shipped_specs_parse() {
    let mut n = 0;
    for entry in std::fs::read_dir(specs()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "spec") {
            contraction_lab::measures::load_spec(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 10);
}
