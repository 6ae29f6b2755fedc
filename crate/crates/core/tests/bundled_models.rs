use std::path::PathBuf;

use superflow::model::Model;
use superflow::verify::{self, Suite, VerifyOptions};

fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn load(name: &str) -> Model {
    Model::load(models_dir().join(name)).unwrap()
}

fn assert_all_pass(name: &str) {
    let m = load(name);
    let r = verify::run(&m, Suite::All, &VerifyOptions::for_model(&m));
    let failures: Vec<_> = r.failures().collect();
    assert!(failures.is_empty(), "{name}: {failures:#?}");
}

#[test]
fn flat_1_2_passes() {
    assert_all_pass("flat_1_2.json");
}

#[test]
fn c_metric_passes() {
    assert_all_pass("c_metric_1_2.json");
}

#[test]
fn diag_passes() {
    assert_all_pass("diag_2_0.json");
}

#[test]
fn flat_2_2_passes() {
    assert_all_pass("flat_2_2.json");
}

#[test]
fn warped_passes() {
    assert_all_pass("warped_2_2.json");
}

#[test]
fn broken_metric_fails_metric_suite() {
    let m = load("broken_metric.json");
    let r = verify::run(&m, Suite::Metric, &VerifyOptions::for_model(&m));
    assert!(!r.pass);
    let c = &r.checks[0];
    assert_eq!(c.name, "metric.valid");
    assert!(c.detail.as_deref().unwrap().contains("graded symmetry"));
}
