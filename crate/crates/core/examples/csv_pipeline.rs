//! The file-based flow without the binary: csv in, rule file and report out.

use fairgate::io::{read_csv, write_csv, ColumnRoles, RuleDocument};
use fairgate::metrics::MetricReport;
use fairgate::model::{CriterionKind, FairnessCriterion, UtilityMatrix};
use fairgate::optimizer::{optimize, OptimizationProblem};

const DATA: &str = "\
race,two_year_recid,p
a,1,0.81
a,0,0.64
a,1,0.55
a,0,0.42
a,0,0.18
c,1,0.71
c,0,0.47
c,0,0.33
c,1,0.29
c,0,0.12
";

fn main() -> fairgate::Result<()> {
    let roles = ColumnRoles {
        group: "race".into(),
        label: "two_year_recid".into(),
        score: "p".into(),
        ..ColumnRoles::default()
    };
    let ds = read_csv(DATA.as_bytes(), &roles)?;
    print!("{}", write_csv(&ds)?);
    let c = FairnessCriterion::new(CriterionKind::FprParity, 1.0)?;
    let p = OptimizationProblem::new(ds, UtilityMatrix::accuracy(), c)?;
    let s = optimize(&p)?;
    let doc = RuleDocument {
        criterion: Some(p.criterion.clone()),
        utility: Some(p.utility),
        training_utility: Some(s.utility),
        training_ratio: s.ratio,
        flags: s.flags.clone(),
        rule: s.rule.clone(),
    };
    println!("{}", doc.to_toml()?);
    let report = MetricReport::build(&p.dataset, &s.rule, &p.utility, Some(&p.criterion), None)?;
    println!("{}", report.to_json()?);
    Ok(())
}
