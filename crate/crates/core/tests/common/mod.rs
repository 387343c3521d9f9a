#![allow(dead_code)]

use fairgate::metrics::decision_maker_utility;
use fairgate::model::{CriterionKind, Dataset, FairnessCriterion, Record, UtilityMatrix};
use fairgate::optimizer::{brute_force_oracle_with, optimize, utility_lipschitz, OptimizationProblem, OracleConfig};
use fairgate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GAMMAS: [f64; 6] = [0.0, 0.3, 0.5, 0.8, 0.9, 1.0];

/// Synthetic instance: 2-3 groups, scores on a coarse grid, labels drawn from
/// a group-shifted calibration curve.
pub fn instance(seed: u64, kind: CriterionKind, gamma: f64) -> OptimizationProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = rng.gen_range(2..=3);
    let levels = rng.gen_range(3..=6);
    let mut records = Vec::new();
    for g in 0..groups {
        let n = rng.gen_range(6..=30);
        let shift: f64 = rng.gen_range(-0.2..0.2);
        for _ in 0..n {
            let score = rng.gen_range(0..levels) as f64 / (levels - 1) as f64;
            let p = (score + shift).clamp(0.05, 0.95);
            let label = u8::from(rng.gen_bool(p));
            let stratum = if rng.gen_bool(0.5) { "x" } else { "y" };
            records.push(
                Record::scored(records.len(), score, label, &format!("g{g}")).unwrap().with_legit("job", stratum),
            );
        }
    }
    let u = if rng.gen_bool(0.5) {
        UtilityMatrix::accuracy()
    } else {
        loop {
            let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..2.0f64)).collect();
            if let Ok(u) = UtilityMatrix::new(c[0], c[1], c[2], c[3]) {
                break u;
            }
        }
    };
    let legit = if kind == CriterionKind::ConditionalStatisticalParity { vec!["job".to_string()] } else { Vec::new() };
    let ds = Dataset::new(records, legit.clone(), Vec::new()).unwrap();
    let c = FairnessCriterion::with_legit(kind, gamma, legit).unwrap();
    OptimizationProblem::new(ds, u, c).unwrap().with_min_count(1)
}

#[derive(Debug)]
pub enum Outcome {
    Match { optimizer: f64, oracle: f64, ratio: f64 },
    BothInfeasible,
    BothUndefined,
    Mismatch(String),
}

pub fn compare(problem: &OptimizationProblem, cfg: &OracleConfig) -> Outcome {
    let fast = optimize(problem);
    let slow = brute_force_oracle_with(problem, cfg);
    match (fast, slow) {
        (Ok(s), Ok(rule)) => {
            let oracle = decision_maker_utility(&problem.dataset, &rule, &problem.utility).unwrap();
            let tol = 1e-9 + cfg.grid_step * utility_lipschitz(&problem.utility);
            let gamma = problem.criterion.gamma;
            let ratio = s.ratio.unwrap_or(1.0);
            if ratio < gamma - 1e-9 {
                return Outcome::Mismatch(format!("optimizer ratio {ratio} below gamma {gamma}"));
            }
            if (s.utility - oracle).abs() > tol {
                return Outcome::Mismatch(format!("utility {} vs oracle {oracle} (tol {tol})", s.utility));
            }
            Outcome::Match { optimizer: s.utility, oracle, ratio }
        }
        (Err(Error::Infeasible { .. }), Err(Error::Infeasible { .. })) => Outcome::BothInfeasible,
        (Err(Error::UndefinedMetric(_)), Err(Error::UndefinedMetric(_))) => Outcome::BothUndefined,
        (a, b) => Outcome::Mismatch(format!("optimizer {:?} / oracle {:?}", a.map(|s| s.utility), b.map(|_| ()))),
    }
}

pub fn check(problem: &OptimizationProblem) -> Result<Outcome> {
    Ok(compare(problem, &OracleConfig::default()))
}
