//! Rates, disparity ratio and the fair-equality-of-chances table for a fixed rule.

use fairgate::assessment::{BenefitSource, Justifier, MoralAssessment};
use fairgate::metrics::MetricReport;
use fairgate::model::{CriterionKind, Dataset, DecisionRule, FairnessCriterion, Record, UtilityMatrix};

fn main() -> fairgate::Result<()> {
    let rows = [
        (0.9, 1, "a"),
        (0.7, 0, "a"),
        (0.6, 1, "a"),
        (0.4, 0, "a"),
        (0.2, 0, "a"),
        (0.8, 1, "b"),
        (0.55, 1, "b"),
        (0.45, 0, "b"),
        (0.3, 1, "b"),
        (0.1, 0, "b"),
    ];
    let records = rows
        .iter()
        .enumerate()
        .map(|(i, &(s, y, g))| Record::scored(i, s, y, g))
        .collect::<fairgate::Result<Vec<_>>>()?;
    let ds = Dataset::from_records(records)?;
    let rule = DecisionRule::SingleThreshold { threshold: 0.5 };
    let criterion = FairnessCriterion::new(CriterionKind::FprParity, 1.0)?;
    let a = MoralAssessment::new(BenefitSource::Decision, Justifier::Outcome, &[0], "group");
    let report = MetricReport::build(&ds, &rule, &UtilityMatrix::accuracy(), Some(&criterion), Some(&a))?;
    println!("{}", report.to_json()?);
    Ok(())
}
