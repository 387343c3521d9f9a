//! Predictive parity and sufficiency. When a level cannot be reached the error
//! reports the largest gamma that can.

use fairgate::model::{CriterionKind, Dataset, FairnessCriterion, Record, UtilityMatrix};
use fairgate::optimizer::{optimize, OptimizationProblem};
use fairgate::Error;

fn main() -> fairgate::Result<()> {
    let a = [(0.9, 1), (0.8, 1), (0.7, 0), (0.6, 1), (0.4, 0), (0.3, 1), (0.2, 0), (0.1, 0)];
    let b = [(0.9, 1), (0.7, 0), (0.65, 0), (0.5, 1), (0.45, 0), (0.3, 0), (0.2, 1), (0.1, 0)];
    let mut records = Vec::new();
    for (i, &(s, y)) in a.iter().enumerate() {
        records.push(Record::scored(i, s, y, "a")?);
    }
    for (i, &(s, y)) in b.iter().enumerate() {
        records.push(Record::scored(50 + i, s, y, "b")?);
    }
    let ds = Dataset::from_records(records)?;
    for kind in [CriterionKind::PpvParity, CriterionKind::ForParity, CriterionKind::Sufficiency] {
        for gamma in [0.8, 1.0] {
            let c = FairnessCriterion::new(kind, gamma)?;
            match optimize(&OptimizationProblem::new(ds.clone(), UtilityMatrix::accuracy(), c)?) {
                Ok(s) => println!(
                    "{kind} gamma {gamma}: utility {:.4} ratio {:.4} ({})",
                    s.utility,
                    s.ratio.unwrap_or(f64::NAN),
                    s.rule.variant_name()
                ),
                Err(Error::Infeasible { max_gamma, .. }) => {
                    println!("{kind} gamma {gamma}: infeasible, best reachable {max_gamma:.4}")
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(())
}
