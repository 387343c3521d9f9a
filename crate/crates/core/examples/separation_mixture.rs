//! Equalized odds: both TPR and FPR matched, which may need a mixture of two
//! threshold rules per group.

use fairgate::metrics::compute_rates;
use fairgate::model::{CriterionKind, Dataset, FairnessCriterion, RateFamily, Record, UtilityMatrix};
use fairgate::optimizer::{optimize, OptimizationProblem};

fn main() -> fairgate::Result<()> {
    let a = [(0.5, 0), (0.95, 0), (0.2, 0), (0.55, 0), (0.9, 1), (0.45, 0), (0.15, 0), (0.55, 0)];
    let b = [(0.5, 1), (0.5, 1), (0.45, 0), (0.6, 0), (0.3, 0), (0.5, 0), (0.4, 0), (0.95, 1)];
    let mut records = Vec::new();
    for (i, &(s, y)) in a.iter().enumerate() {
        records.push(Record::scored(i, s, y, "a")?);
    }
    for (i, &(s, y)) in b.iter().enumerate() {
        records.push(Record::scored(50 + i, s, y, "b")?);
    }
    let ds = Dataset::from_records(records)?;
    let c = FairnessCriterion::new(CriterionKind::Separation, 1.0)?;
    let s = optimize(&OptimizationProblem::new(ds.clone(), UtilityMatrix::accuracy(), c)?)?;
    println!("rule kind: {}", s.rule.variant_name());
    println!("utility {:.4}", s.utility);
    let rates = compute_rates(&ds, &s.rule)?;
    for g in ["a", "b"] {
        println!(
            "{g}: TPR {:.4} FPR {:.4}",
            rates.rate(RateFamily::Tpr, g).unwrap(),
            rates.rate(RateFamily::Fpr, g).unwrap()
        );
    }
    Ok(())
}
