mod common;

use common::{compare, instance, Outcome, GAMMAS};
use fairgate::model::CriterionKind;
use fairgate::optimizer::OracleConfig;

fn sweep(kind: CriterionKind, count: u64) {
    let cfg = OracleConfig::default();
    let mut failures = Vec::new();
    for seed in 0..count {
        let gamma = GAMMAS[seed as usize % GAMMAS.len()];
        let p = instance(seed, kind, gamma);
        if let Outcome::Mismatch(m) = compare(&p, &cfg) {
            failures.push(format!("seed {seed} gamma {gamma}: {m}"));
        }
    }
    assert!(failures.is_empty(), "{kind}:\n{}", failures.join("\n"));
}

#[test]
fn independence() {
    sweep(CriterionKind::Independence, 24);
}

#[test]
fn tpr_parity() {
    sweep(CriterionKind::TprParity, 24);
}

#[test]
fn fpr_parity() {
    sweep(CriterionKind::FprParity, 24);
}

#[test]
fn separation() {
    sweep(CriterionKind::Separation, 24);
}

#[test]
fn ppv_parity() {
    sweep(CriterionKind::PpvParity, 24);
}

#[test]
fn for_parity() {
    sweep(CriterionKind::ForParity, 24);
}

#[test]
fn sufficiency() {
    sweep(CriterionKind::Sufficiency, 24);
}

#[test]
fn conditional_parity() {
    sweep(CriterionKind::ConditionalStatisticalParity, 24);
}
