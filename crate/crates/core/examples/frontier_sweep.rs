//! Utility against fairness level: sweep gamma and print the frontier csv.
//! Pass a path to also write the svg chart there.

use fairgate::frontier::{default_gammas, emit_frontier, sweep, FrontierFormat};
use fairgate::model::{CriterionKind, Dataset, FairnessCriterion, Record, UtilityMatrix};
use fairgate::optimizer::OptimizationProblem;

fn main() -> fairgate::Result<()> {
    let mut records = Vec::new();
    for i in 0..30 {
        let s = (i as f64 + 0.5) / 30.0;
        records.push(Record::scored(i, s, u8::from((i * 7) % 10 < i / 3), "a")?);
        records.push(Record::scored(100 + i, s, u8::from((i * 3) % 10 < i / 4), "b")?);
    }
    let ds = Dataset::from_records(records)?;
    let c = FairnessCriterion::new(CriterionKind::FprParity, 1.0)?;
    let p = OptimizationProblem::new(ds, UtilityMatrix::accuracy(), c)?;
    let points = sweep(&p, &default_gammas(), None)?;
    print!("{}", emit_frontier(&points, FrontierFormat::Csv)?);
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(path, emit_frontier(&points, FrontierFormat::Svg)?)?;
    }
    Ok(())
}
