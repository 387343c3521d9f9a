//! Cross-checks the fast optimizer against the exhaustive oracle on a small set.

use fairgate::model::{CriterionKind, Dataset, FairnessCriterion, Record, UtilityMatrix};
use fairgate::optimizer::{optimize, verify_solution, OptimizationProblem, OracleConfig};

fn main() -> fairgate::Result<()> {
    let rows = [
        (0.9, 1, "a"),
        (0.6, 1, "a"),
        (0.6, 0, "a"),
        (0.3, 0, "a"),
        (0.2, 1, "a"),
        (0.1, 0, "a"),
        (0.8, 1, "b"),
        (0.7, 0, "b"),
        (0.4, 1, "b"),
        (0.4, 0, "b"),
        (0.3, 0, "b"),
        (0.1, 0, "b"),
    ];
    let records = rows
        .iter()
        .enumerate()
        .map(|(i, &(s, y, g))| Record::scored(i, s, y, g))
        .collect::<fairgate::Result<Vec<_>>>()?;
    let ds = Dataset::from_records(records)?;
    let cfg = OracleConfig::default();
    for kind in CriterionKind::ALL {
        if kind == CriterionKind::ConditionalStatisticalParity {
            continue;
        }
        for gamma in [0.5, 1.0] {
            let p =
                OptimizationProblem::new(ds.clone(), UtilityMatrix::accuracy(), FairnessCriterion::new(kind, gamma)?)?;
            match optimize(&p) {
                Ok(s) => {
                    let v = verify_solution(&p, &s, &cfg)?;
                    println!(
                        "{kind:<24} {gamma}: optimizer {:.6} oracle {:?} pass {}",
                        v.optimizer, v.oracle, v.passed
                    );
                }
                Err(e) => println!("{kind:<24} {gamma}: {e}"),
            }
        }
    }
    Ok(())
}
