//! Statistical parity by group thresholds, exact and relaxed to four-fifths.

use fairgate::metrics::compute_rates;
use fairgate::model::{CriterionKind, Dataset, FairnessCriterion, RateFamily, Record, UtilityMatrix};
use fairgate::optimizer::{optimize, OptimizationProblem};

fn main() -> fairgate::Result<()> {
    let mut records = Vec::new();
    for i in 0..20 {
        let s = (i as f64 + 0.5) / 20.0;
        records.push(Record::scored(i, s, u8::from(i % 3 != 0 && i > 6), "a")?);
        records.push(Record::scored(100 + i, s * 0.7, u8::from(i > 14), "b")?);
    }
    let ds = Dataset::from_records(records)?;
    for gamma in [0.0, 0.8, 1.0] {
        let c = FairnessCriterion::new(CriterionKind::Independence, gamma)?;
        let p = OptimizationProblem::new(ds.clone(), UtilityMatrix::accuracy(), c)?;
        let s = optimize(&p)?;
        let rates = compute_rates(&ds, &s.rule)?;
        println!(
            "gamma {gamma}: utility {:.4}, P(D=1) a={:.4} b={:.4}, randomized {}",
            s.utility,
            rates.rate(RateFamily::PositiveRate, "a").unwrap(),
            rates.rate(RateFamily::PositiveRate, "b").unwrap(),
            s.rule.is_randomized()
        );
    }
    Ok(())
}
