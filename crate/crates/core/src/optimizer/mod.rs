//! Utility-maximizing decision rules under a relaxed fairness criterion.
//!
//! Every solver maximizes the empirical decision maker utility on the
//! training records subject to `disparity_ratio >= gamma`.

mod path;
mod separation;

pub mod oracle;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{compute_rates_by, decision_maker_utility, disparity_ratio};
use crate::model::{
    BoundForm, CriterionKind, Cutoff, Dataset, DecisionRule, FairnessCriterion, IntervalCutoff, RateFamily,
    UtilityMatrix,
};
use path::{Choice, Config, Frac, GroupData, Piece, Prepared};

pub use oracle::{
    brute_force_oracle, brute_force_oracle_with, utility_lipschitz, verify_solution, OracleConfig, Verification,
    GRID_STEP_ENV,
};

pub const DEFAULT_MIN_COUNT: usize = 30;

#[derive(Clone, Debug)]
pub struct OptimizationProblem {
    pub dataset: Dataset,
    pub utility: UtilityMatrix,
    pub criterion: FairnessCriterion,
    /// Smallest per-group count for a stratum to be constrained (conditional parity).
    pub min_count: usize,
}

impl OptimizationProblem {
    pub fn new(dataset: Dataset, utility: UtilityMatrix, criterion: FairnessCriterion) -> Result<Self> {
        criterion.validate()?;
        dataset.require_groups()?;
        dataset.require_scores()?;
        for name in &criterion.legit_names {
            for r in dataset.records() {
                if !r.legit.contains_key(name) {
                    return Err(Error::InvalidDataset(format!(
                        "record `{}` lacks legitimate attribute `{name}`",
                        r.id
                    )));
                }
            }
        }
        Ok(Self { dataset, utility, criterion, min_count: DEFAULT_MIN_COUNT })
    }

    pub fn with_min_count(mut self, min_count: usize) -> Self {
        self.min_count = min_count;
        self
    }

    pub fn at_gamma(&self, gamma: f64) -> Result<Self> {
        Ok(Self { criterion: self.criterion.at_gamma(gamma)?, ..self.clone() })
    }

    /// Per group: the distinct scores, bracketed by sentinels.
    pub fn candidate_grid(&self) -> BTreeMap<String, Vec<f64>> {
        let mut grid: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in self.dataset.records() {
            grid.entry(r.group.clone()).or_default().push(r.score.unwrap_or(0.0));
        }
        for scores in grid.values_mut() {
            scores.sort_by(f64::total_cmp);
            scores.dedup();
            scores.insert(0, f64::NEG_INFINITY);
            scores.push(f64::INFINITY);
        }
        grid
    }

    fn group_data(&self, dataset: &Dataset) -> Result<Vec<GroupData>> {
        dataset.groups().iter().map(|g| GroupData::new(g, dataset.group_records(g))).collect()
    }
}

/// An optimized rule with its training diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub rule: DecisionRule,
    pub utility: f64,
    /// Training disparity ratio; `None` if every constrained cell is undefined.
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl Solution {
    fn evaluate(problem: &OptimizationProblem, rule: DecisionRule, mut flags: Vec<String>) -> Result<Self> {
        let ds = &problem.dataset;
        let rates = compute_rates_by(ds, &rule, &problem.criterion.legit_names)?;
        let ratio = match disparity_ratio(&rates, &problem.criterion) {
            Ok(d) => {
                for f in &d.families {
                    if !f.undefined.is_empty() {
                        flags.push(format!("{} undefined for {}", f.family, f.undefined.join(", ")));
                    }
                }
                Some(d.ratio)
            }
            Err(Error::UndefinedMetric(m)) => {
                flags.push(m);
                None
            }
            Err(e) => return Err(e),
        };
        Ok(Self { utility: decision_maker_utility(ds, &rule, &problem.utility)?, rule, ratio, flags })
    }
}

/// `tau* = (u00 - u10) / ((u00 - u10) + (u11 - u01))`, the score where accepting
/// and rejecting have equal expected payoff.
pub fn optimal_threshold(u: &UtilityMatrix) -> DecisionRule {
    let loss = u.get(0, 0) - u.get(1, 0);
    let gain = u.get(1, 1) - u.get(0, 1);
    if gain <= 0.0 && loss <= 0.0 {
        // accepting never hurts
        DecisionRule::accept_all()
    } else if gain <= 0.0 {
        DecisionRule::reject_all()
    } else if loss <= 0.0 {
        DecisionRule::accept_all()
    } else {
        DecisionRule::SingleThreshold { threshold: (loss / (loss + gain)).clamp(0.0, 1.0) }
    }
}

/// The fairness-blind rule: one threshold at `tau*`.
pub fn optimize_unconstrained(dataset: &Dataset, u: &UtilityMatrix) -> Result<DecisionRule> {
    dataset.require_scores()?;
    Ok(optimal_threshold(u))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeparationRelaxation {
    Both,
    TprOnly,
    FprOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SufficiencyRelaxation {
    Both,
    PpvOnly,
    ForOnly,
}

/// Solves the problem for whatever criterion it carries.
pub fn optimize(problem: &OptimizationProblem) -> Result<Solution> {
    use CriterionKind::*;
    match problem.criterion.kind {
        Independence => solve_threshold_family(problem, &problem.dataset, RateFamily::PositiveRate),
        TprParity => solve_separation(problem, SeparationRelaxation::TprOnly),
        FprParity => solve_separation(problem, SeparationRelaxation::FprOnly),
        Separation => solve_separation(problem, SeparationRelaxation::Both),
        Sufficiency => solve_sufficiency(problem, SufficiencyRelaxation::Both),
        PpvParity => solve_sufficiency(problem, SufficiencyRelaxation::PpvOnly),
        ForParity => solve_sufficiency(problem, SufficiencyRelaxation::ForOnly),
        ConditionalStatisticalParity => solve_conditional(problem),
    }
}

fn expect_kind(problem: &OptimizationProblem, kinds: &[CriterionKind]) -> Result<()> {
    if kinds.contains(&problem.criterion.kind) {
        Ok(())
    } else {
        Err(Error::InvalidCriterion(format!("{} cannot be solved by this optimizer", problem.criterion.kind)))
    }
}

pub fn optimize_independence(problem: &OptimizationProblem) -> Result<DecisionRule> {
    expect_kind(problem, &[CriterionKind::Independence])?;
    Ok(optimize(problem)?.rule)
}

pub fn optimize_separation(problem: &OptimizationProblem, relaxation: SeparationRelaxation) -> Result<DecisionRule> {
    use CriterionKind::*;
    expect_kind(problem, &[Separation, TprParity, FprParity])?;
    Ok(solve_separation(problem, relaxation)?.rule)
}

pub fn optimize_sufficiency(problem: &OptimizationProblem, relaxation: SufficiencyRelaxation) -> Result<DecisionRule> {
    use CriterionKind::*;
    expect_kind(problem, &[Sufficiency, PpvParity, ForParity])?;
    Ok(solve_sufficiency(problem, relaxation)?.rule)
}

pub fn optimize_conditional_parity(problem: &OptimizationProblem, legit_names: &[String]) -> Result<DecisionRule> {
    expect_kind(problem, &[CriterionKind::ConditionalStatisticalParity])?;
    let mut p = problem.clone();
    p.criterion.legit_names = legit_names.to_vec();
    p.criterion.validate()?;
    Ok(solve_conditional(&p)?.rule)
}

fn class_flags(groups: &[GroupData], family: RateFamily) -> Vec<String> {
    groups
        .iter()
        .filter(|g| Frac::of(family, g).is_none())
        .map(|g| format!("group `{}` has no records for {}; left unconstrained", g.name, family.name()))
        .collect()
}

fn fracs_for(groups: &[GroupData], families: &[RateFamily]) -> Vec<Vec<Option<Frac>>> {
    families.iter().map(|f| groups.iter().map(|g| Frac::of(*f, g)).collect()).collect()
}

/// Exact search over group thresholds for one affine rate family.
fn threshold_choices(groups: &[GroupData], family: RateFamily, gamma: f64, u: &UtilityMatrix) -> Option<Vec<Choice>> {
    let fracs = fracs_for(groups, &[family]);
    let prepared: Vec<Prepared> = groups
        .iter()
        .map(|g| Prepared { group: g, pieces: g.pieces(BoundForm::Lower), frac: Frac::of(family, g) })
        .collect();
    path::solve_family(&prepared, gamma, u, false, &fracs).map(|c| c.choices)
}

fn threshold_rule(groups: &[GroupData], choices: &[Choice]) -> DecisionRule {
    DecisionRule::GroupThreshold {
        groups: groups
            .iter()
            .zip(choices)
            .map(|(g, c)| (g.name.clone(), Cutoff::new(c.threshold, c.boundary)))
            .collect(),
    }
}

fn solve_threshold_family(problem: &OptimizationProblem, dataset: &Dataset, family: RateFamily) -> Result<Solution> {
    let groups = problem.group_data(dataset)?;
    let choices = threshold_choices(&groups, family, problem.criterion.gamma, &problem.utility)
        .ok_or_else(|| Error::Solver("threshold search found no candidate".into()))?;
    let flags = class_flags(&groups, family);
    Solution::evaluate(problem, threshold_rule(&groups, &choices), flags)
}

fn solve_separation(problem: &OptimizationProblem, relaxation: SeparationRelaxation) -> Result<Solution> {
    match relaxation {
        SeparationRelaxation::TprOnly => solve_threshold_family(problem, &problem.dataset, RateFamily::Tpr),
        SeparationRelaxation::FprOnly => solve_threshold_family(problem, &problem.dataset, RateFamily::Fpr),
        SeparationRelaxation::Both => {
            let groups = problem.group_data(&problem.dataset)?;
            let realized = separation::solve(&groups, problem.criterion.gamma, &problem.utility)?;
            let mut flags = class_flags(&groups, RateFamily::Tpr);
            flags.extend(class_flags(&groups, RateFamily::Fpr));
            Solution::evaluate(problem, separation::to_rule(&groups, &realized), flags)
        }
    }
}

fn sufficiency_families(relaxation: SufficiencyRelaxation) -> &'static [RateFamily] {
    match relaxation {
        SufficiencyRelaxation::Both => &[RateFamily::Ppv, RateFamily::For],
        SufficiencyRelaxation::PpvOnly => &[RateFamily::Ppv],
        SufficiencyRelaxation::ForOnly => &[RateFamily::For],
    }
}

/// Best interval rule at `gamma`, or `None` if no rule reaches it.
fn sufficiency_config(
    groups: &[GroupData],
    families: &[RateFamily],
    gamma: f64,
    u: &UtilityMatrix,
) -> Result<Option<Config>> {
    let fracs = fracs_for(groups, families);
    let all_pieces: Vec<Vec<Piece>> = groups
        .iter()
        .map(|g| {
            let mut ps = g.pieces(BoundForm::Lower);
            ps.extend(g.pieces(BoundForm::Upper));
            ps
        })
        .collect();
    if gamma <= 0.0 {
        let prepared: Vec<Prepared> = groups
            .iter()
            .zip(&all_pieces)
            .map(|(g, ps)| Prepared { group: g, pieces: ps.clone(), frac: None })
            .collect();
        return Ok(path::solve_family(&prepared, 0.0, u, false, &fracs));
    }
    let restricted: Vec<Vec<Piece>> = all_pieces.iter().map(|ps| path::restrict_defined(ps, families)).collect();
    if let Some((g, _)) = groups.iter().zip(&restricted).find(|(_, ps)| ps.is_empty()) {
        return Err(Error::UndefinedMetric(format!(
            "group `{}` has a single distinct score, so {} cannot be defined for it",
            g.name,
            families.iter().map(|f| f.name()).collect::<Vec<_>>().join(" and ")
        )));
    }
    Ok(match families {
        [f] => {
            let prepared: Vec<Prepared> = groups
                .iter()
                .zip(restricted)
                .map(|(g, ps)| Prepared { group: g, pieces: ps, frac: Frac::of(*f, g) })
                .collect();
            path::solve_family(&prepared, gamma, u, true, &fracs)
        }
        [a, b] if gamma >= 1.0 => path::solve_two_families_exact(groups, &restricted, [*a, *b], u, &fracs),
        [a, b] => path::solve_two_families(groups, &restricted, [*a, *b], gamma, u, &fracs),
        _ => unreachable!("one or two families"),
    })
}

/// Largest `gamma` in `[0, upper]` that `feasible` accepts, by bisection.
fn max_feasible_gamma(upper: f64, feasible: impl Fn(f64) -> Result<bool>) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn solve_sufficiency(problem: &OptimizationProblem, relaxation: SufficiencyRelaxation) -> Result<Solution> {
    let groups = problem.group_data(&problem.dataset)?;
    let families = sufficiency_families(relaxation);
    let gamma = problem.criterion.gamma;
    let u = &problem.utility;
    let Some(config) = sufficiency_config(&groups, families, gamma, u)? else {
        let max_gamma = max_feasible_gamma(gamma, |g| Ok(sufficiency_config(&groups, families, g, u)?.is_some()))?;
        return Err(Error::Infeasible { gamma, max_gamma });
    };
    let rule = DecisionRule::GroupInterval {
        groups: groups
            .iter()
            .zip(&config.choices)
            .map(|(g, c)| {
                (g.name.clone(), IntervalCutoff { form: c.form, threshold: c.threshold, boundary_accept: c.boundary })
            })
            .collect(),
    };
    Solution::evaluate(problem, rule, Vec::new())
}

/// Independence inside each stratum of the legitimate attributes.
fn solve_conditional(problem: &OptimizationProblem) -> Result<Solution> {
    let legit = &problem.criterion.legit_names;
    let ds = &problem.dataset;
    let strata = ds.strata(legit)?;
    let groups = ds.groups();
    let mut cells: BTreeMap<String, BTreeMap<String, Cutoff>> =
        groups.iter().map(|g| (g.clone(), BTreeMap::new())).collect();
    let mut flags = Vec::new();
    let mut constrained = 0usize;
    let mut small_strata: Vec<String> = Vec::new();
    let fallback = match optimal_threshold(&problem.utility) {
        DecisionRule::SingleThreshold { threshold } => Cutoff::new(threshold, 1.0),
        DecisionRule::Constant { accept: true } => Cutoff::new(0.0, 1.0),
        _ => Cutoff::new(1.0, 0.0),
    };
    for stratum in &strata {
        let sub = ds.filter(|r| r.stratum(legit).is_ok_and(|s| &s == stratum))?;
        let present: BTreeSet<&String> = sub.records().iter().map(|r| &r.group).collect();
        let counts: BTreeMap<&String, usize> = groups.iter().map(|g| (g, sub.group_records(g).count())).collect();
        let small = counts.values().any(|c| *c < problem.min_count);
        let gamma = if small {
            small_strata.push(stratum.clone());
            flags.push(format!(
                "stratum `{stratum}` has fewer than {} records for some group; left unconstrained",
                problem.min_count
            ));
            0.0
        } else {
            constrained += 1;
            problem.criterion.gamma
        };
        let gd: Vec<GroupData> =
            present.iter().map(|g| GroupData::new(g, sub.group_records(g))).collect::<Result<_>>()?;
        let choices = threshold_choices(&gd, RateFamily::PositiveRate, gamma, &problem.utility)
            .ok_or_else(|| Error::Solver(format!("no candidate in stratum `{stratum}`")))?;
        for (g, c) in gd.iter().zip(&choices) {
            cells
                .get_mut(&g.name)
                .expect("group declared")
                .insert(stratum.clone(), Cutoff::new(c.threshold, c.boundary));
        }
        for g in groups {
            if !present.contains(g) {
                cells.get_mut(g).expect("group declared").insert(stratum.clone(), fallback);
            }
        }
    }
    if constrained == 0 {
        return Err(Error::DegenerateStratification { min_count: problem.min_count });
    }
    let rule = DecisionRule::StratifiedGroupThreshold { legit_names: legit.clone(), cells };
    let mut s = Solution::evaluate(problem, rule, flags)?;
    if constrained < strata.len() {
        // the ratio only speaks for the strata that were constrained
        let skipped: BTreeSet<&String> = small_strata.iter().collect();
        let sub = ds.filter(|r| r.stratum(legit).is_ok_and(|k| !skipped.contains(&k)))?;
        let rates = compute_rates_by(&sub, &s.rule, legit)?;
        s.ratio = disparity_ratio(&rates, &problem.criterion).ok().map(|d| d.ratio);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Record;

    fn ds(rows: &[(f64, u8, &str)]) -> Dataset {
        Dataset::from_records(
            rows.iter().enumerate().map(|(i, (s, y, g))| Record::scored(i, *s, *y, g).unwrap()).collect(),
        )
        .unwrap()
    }

    fn problem(rows: &[(f64, u8, &str)], kind: CriterionKind, gamma: f64) -> OptimizationProblem {
        OptimizationProblem::new(ds(rows), UtilityMatrix::accuracy(), FairnessCriterion::new(kind, gamma).unwrap())
            .unwrap()
    }

    #[test]
    fn tau_star_cases() {
        assert_eq!(optimal_threshold(&UtilityMatrix::accuracy()), DecisionRule::SingleThreshold { threshold: 0.5 });
        let u = UtilityMatrix::new(3.0, 0.0, 1.0, 1.0).unwrap();
        match optimal_threshold(&u) {
            DecisionRule::SingleThreshold { threshold } => assert!((threshold - 2.0 / 3.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let never = UtilityMatrix::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(optimal_threshold(&never), DecisionRule::reject_all());
    }

    #[test]
    fn independence_hand_example() {
        let p =
            problem(&[(0.9, 1, "A"), (0.2, 0, "A"), (0.8, 1, "B"), (0.1, 0, "B")], CriterionKind::Independence, 1.0);
        let s = optimize(&p).unwrap();
        assert!((s.utility - 1.0).abs() < 1e-12);
        let rates = crate::metrics::compute_rates(&p.dataset, &s.rule).unwrap();
        assert_eq!(rates.rate(RateFamily::PositiveRate, "A"), Some(0.5));
        assert_eq!(rates.rate(RateFamily::PositiveRate, "B"), Some(0.5));
    }

    #[test]
    fn candidate_grid_has_sentinels() {
        let p =
            problem(&[(0.9, 1, "A"), (0.9, 0, "A"), (0.1, 0, "B"), (0.3, 1, "B")], CriterionKind::Independence, 1.0);
        let grid = p.candidate_grid();
        assert_eq!(grid["A"], vec![f64::NEG_INFINITY, 0.9, f64::INFINITY]);
        assert!(grid["B"].windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn randomization_reaches_exact_parity() {
        let p = problem(
            &[(0.9, 1, "A"), (0.7, 1, "A"), (0.3, 0, "A"), (0.8, 1, "B"), (0.2, 0, "B"), (0.1, 0, "B")],
            CriterionKind::Independence,
            1.0,
        );
        let s = optimize(&p).unwrap();
        assert!((s.ratio.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn separation_both_parity() {
        let p = problem(
            &[
                (0.9, 1, "A"),
                (0.6, 0, "A"),
                (0.5, 1, "A"),
                (0.2, 0, "A"),
                (0.8, 1, "B"),
                (0.7, 1, "B"),
                (0.4, 0, "B"),
                (0.3, 1, "B"),
                (0.1, 0, "B"),
            ],
            CriterionKind::Separation,
            1.0,
        );
        let s = optimize(&p).unwrap();
        assert!((s.ratio.unwrap() - 1.0).abs() < 1e-9, "{s:?}");
        let relaxed = optimize(&p.at_gamma(0.5).unwrap()).unwrap();
        assert!(relaxed.ratio.unwrap() >= 0.5 - 1e-9);
        assert!(relaxed.utility >= s.utility - 1e-12);
    }

    #[test]
    fn sufficiency_infeasible_reports_max_gamma() {
        // A's PPV is always 1, B's never exceeds 1/2.
        let p = problem(
            &[
                (0.9, 1, "A"),
                (0.8, 1, "A"),
                (0.7, 1, "A"),
                (0.6, 1, "A"),
                (0.5, 0, "B"),
                (0.4, 1, "B"),
                (0.3, 0, "B"),
                (0.2, 0, "B"),
            ],
            CriterionKind::PpvParity,
            1.0,
        );
        match optimize(&p) {
            Err(Error::Infeasible { max_gamma, .. }) => assert!((max_gamma - 0.5).abs() < 1e-9, "{max_gamma}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn conditional_all_small_is_degenerate() {
        let rows: Vec<Record> = (0..8)
            .map(|i| {
                Record::scored(i, 0.1 * i as f64, (i % 2) as u8, if i < 4 { "a" } else { "b" })
                    .unwrap()
                    .with_legit("job", if i % 4 < 2 { "x" } else { "y" })
            })
            .collect();
        let d = Dataset::new(rows, vec!["job".into()], vec![]).unwrap();
        let c = FairnessCriterion::with_legit(CriterionKind::ConditionalStatisticalParity, 1.0, vec!["job".into()])
            .unwrap();
        let p = OptimizationProblem::new(d, UtilityMatrix::accuracy(), c).unwrap();
        assert!(matches!(optimize(&p), Err(Error::DegenerateStratification { min_count: 30 })));
        let s = optimize(&p.with_min_count(2)).unwrap();
        assert!((s.ratio.unwrap() - 1.0).abs() < 1e-9);
    }
}
