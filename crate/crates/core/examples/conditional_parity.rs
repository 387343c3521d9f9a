//! Statistical parity within strata of a legitimate attribute. Strata too
//! small to constrain fall back to the fairness-blind threshold and are flagged.

use fairgate::model::{CriterionKind, Dataset, FairnessCriterion, Record, UtilityMatrix};
use fairgate::optimizer::{optimize, OptimizationProblem};

fn main() -> fairgate::Result<()> {
    let mut records = Vec::new();
    let mut id = 0;
    for (job, n) in [("manual", 40), ("office", 40), ("rare", 3)] {
        for i in 0..n {
            for g in ["a", "b"] {
                let base = if g == "a" { 0.6 } else { 0.4 };
                let s = (base + 0.35 * ((i * 7 % 11) as f64 / 10.0 - 0.5)).clamp(0.01, 0.99);
                let y = u8::from((i * 5 + g.len() * 3) % 10 < (s * 10.0) as usize);
                records.push(Record::scored(id, s, y, g)?.with_legit("job", job));
                id += 1;
            }
        }
    }
    let ds = Dataset::new(records, vec!["job".into()], vec![])?;
    let c = FairnessCriterion::with_legit(CriterionKind::ConditionalStatisticalParity, 1.0, vec!["job".into()])?;
    let p = OptimizationProblem::new(ds, UtilityMatrix::accuracy(), c)?.with_min_count(10);
    let s = optimize(&p)?;
    println!("utility {:.4}, ratio {:?}", s.utility, s.ratio);
    for f in &s.flags {
        println!("flag: {f}");
    }
    Ok(())
}
