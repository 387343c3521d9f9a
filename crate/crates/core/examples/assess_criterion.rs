//! Scripted assessment: the answers a user would type, mapped to a criterion.

use fairgate::assessment::{map_assessment, run_wizard, BenefitSource, Justifier, MoralAssessment};

fn main() -> fairgate::Result<()> {
    // jail-or-release: release (D=1) is the benefit, only the innocent (Y=0) deserve equal chances
    let script = "decision\n1\nrace\noutcome\n0\n";
    let a = run_wizard(script.as_bytes(), std::io::sink())?;
    let c = map_assessment(&a)?;
    println!("wizard -> {} : {}", c.kind, c.kind.representation());

    let rows = [
        (BenefitSource::Decision, Justifier::None, vec![]),
        (BenefitSource::Decision, Justifier::Legitimate(vec!["job".into()]), vec![]),
        (BenefitSource::Decision, Justifier::Outcome, vec![0, 1]),
        (BenefitSource::Decision, Justifier::Outcome, vec![1]),
        (BenefitSource::Decision, Justifier::Outcome, vec![0]),
        (BenefitSource::Outcome, Justifier::Decision, vec![0, 1]),
        (BenefitSource::Outcome, Justifier::Decision, vec![1]),
        (BenefitSource::Outcome, Justifier::Decision, vec![0]),
    ];
    for (source, justifier, values) in rows {
        let a = MoralAssessment::new(source, justifier.clone(), &values, "race");
        let c = map_assessment(&a)?;
        println!("{source:?} / {justifier:?} {values:?} -> {}", c.kind);
    }

    let bad = MoralAssessment::new(BenefitSource::Outcome, Justifier::None, &[], "race");
    println!("outcome without justifier -> {}", map_assessment(&bad).unwrap_err());
    Ok(())
}
