use contraction_lab_web::{map_table, model_profile, poincare};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn map_table_gaussian_scaling() {
    let r = parse(&map_table("family = gaussian", "family = gaussian\nsigma = 0.5", 101).unwrap());
    assert_eq!(r["x"].as_array().unwrap().len(), 101);
    assert!((r["sup"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(r["claim"]["theorem"], "contr1");
    assert!((r["claim"]["bound"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn map_table_reports_spec_errors() {
    let e = map_table("family = gaussian\nwidth = 2", "family = gaussian", 10).unwrap_err();
    assert!(e.starts_with("source:"), "{e}");
    assert!(map_table("family = gaussian\ndim = 2", "family = gaussian\ndim = 2", 10).is_err());
}

#[test]
fn model_profile_matches_closed_form() {
    let r = parse(&model_profile(1.0, 2.0, 4).unwrap());
    assert!(r["max_deviation"].as_f64().unwrap() < 1e-6);
    assert!(model_profile(-1.0, 2.0, 4).is_err());
}

#[test]
fn poincare_equality_case() {
    let r = parse(&poincare(&[-1.0, 0.0, 1.0]).unwrap());
    assert!((r["variance"].as_f64().unwrap() - 2.0).abs() < 1e-8);
    assert_eq!(r["status"], "pass");
    assert!(poincare(&[]).is_err());
}
