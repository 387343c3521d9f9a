//! Runs every example binary (cargo test builds them) and checks its key output.

use std::path::PathBuf;
use std::process::Command;

fn example(name: &str) -> String {
    let exe = std::env::current_exe().unwrap();
    let dir: PathBuf = exe.parent().and_then(|d| d.parent()).unwrap().join("examples");
    let path = dir.join(format!("{name}{}", std::env::consts::EXE_SUFFIX));
    assert!(path.exists(), "{} not built", path.display());
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(&path).current_dir(tmp.path()).output().unwrap();
    assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn assess_criterion() {
    let out = example("assess_criterion");
    for kind in [
        "independence",
        "conditional-statistical-parity",
        "separation",
        "tpr-parity",
        "fpr-parity",
        "sufficiency",
        "ppv-parity",
        "for-parity",
    ] {
        assert!(out.contains(&format!("-> {kind}")), "{out}");
    }
    assert!(out.contains("invalid assessment"));
}

#[test]
fn group_metrics() {
    let out = example("group_metrics");
    assert!(out.contains("\"positive_rate\""), "{out}");
}

#[test]
fn independence_thresholds() {
    let out = example("independence_thresholds");
    assert!(out.contains("gamma 1: utility 0.8000, P(D=1) a=0.3500 b=0.3500"), "{out}");
    assert!(out.contains("randomized true"));
}

#[test]
fn separation_mixture() {
    let out = example("separation_mixture");
    assert!(out.contains("rule kind: mixture"), "{out}");
    assert!(out.contains("a: TPR 0.4375 FPR 0.0625") && out.contains("b: TPR 0.4375 FPR 0.0625"));
}

#[test]
fn sufficiency_intervals() {
    let out = example("sufficiency_intervals");
    assert!(out.contains("sufficiency gamma 1:") && out.contains("ratio 1.0000"), "{out}");
}

#[test]
fn conditional_parity() {
    let out = example("conditional_parity");
    assert!(out.contains("ratio Some(1.0)"), "{out}");
    assert!(out.contains("left unconstrained"));
}

#[test]
fn oracle_check() {
    let out = example("oracle_check");
    assert!(out.lines().filter(|l| l.contains("pass")).count() == 14, "{out}");
    assert!(!out.contains("pass false"), "{out}");
}

#[test]
fn frontier_sweep() {
    let out = example("frontier_sweep");
    assert!(out.starts_with("gamma,achieved_ratio,utility_train,utility_test"), "{out}");
    assert!(out.lines().count() > 21);
}

#[test]
fn logistic_scorer() {
    let out = example("logistic_scorer");
    for line in out.lines().filter(|l| l.starts_with("dL/dw")) {
        let nums: Vec<f64> = line.split_whitespace().filter_map(|t| t.parse().ok()).collect();
        assert_eq!(nums.len(), 2, "{line}");
        assert!((nums[0] - nums[1]).abs() <= 1e-6, "{line}");
    }
    assert!(out.contains("test accuracy"));
}

#[test]
fn csv_pipeline() {
    let out = example("csv_pipeline");
    assert!(out.starts_with("id,group,label,score"), "{out}");
    assert!(out.contains("training_utility"));
}
