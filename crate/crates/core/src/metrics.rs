//! Group fairness rates, ratio-based disparity, decision maker utility and
//! the direct expected-benefit (FEC) check.
//!
//! Every quantity is computed from analytic decision probabilities, so a
//! randomized rule contributes fractional mass instead of a sampled decision.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assessment::{Justifier, MoralAssessment};
use crate::error::{Error, Result};
use crate::model::{BenefitMatrix, CriterionKind, Dataset, DecisionRule, FairnessCriterion, RateFamily, UtilityMatrix};

/// Counts and accepted mass for one group (or one group within a stratum).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupCell {
    pub n: f64,
    pub n_pos: f64,
    pub n_neg: f64,
    pub accepted: f64,
    pub accepted_pos: f64,
    pub accepted_neg: f64,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| (num / den).clamp(0.0, 1.0))
}

impl GroupCell {
    fn add(&mut self, label: u8, p: f64) {
        self.n += 1.0;
        self.accepted += p;
        if label == 1 {
            self.n_pos += 1.0;
            self.accepted_pos += p;
        } else {
            self.n_neg += 1.0;
            self.accepted_neg += p;
        }
    }

    pub fn positive_rate(&self) -> Option<f64> {
        ratio(self.accepted, self.n)
    }

    pub fn tpr(&self) -> Option<f64> {
        ratio(self.accepted_pos, self.n_pos)
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.accepted_neg, self.n_neg)
    }

    pub fn ppv(&self) -> Option<f64> {
        ratio(self.accepted_pos, self.accepted)
    }

    pub fn false_omission_rate(&self) -> Option<f64> {
        ratio(self.n_pos - self.accepted_pos, self.n - self.accepted)
    }

    pub fn rate(&self, family: RateFamily) -> Option<f64> {
        match family {
            RateFamily::PositiveRate => self.positive_rate(),
            RateFamily::Tpr => self.tpr(),
            RateFamily::Fpr => self.fpr(),
            RateFamily::Ppv => self.ppv(),
            RateFamily::For => self.false_omission_rate(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub groups: BTreeMap<String, GroupCell>,
    /// stratum key -> group -> cell, over the dataset's legitimate attributes.
    pub strata: BTreeMap<String, BTreeMap<String, GroupCell>>,
}

impl GroupRates {
    pub fn rate(&self, family: RateFamily, group: &str) -> Option<f64> {
        self.groups.get(group).and_then(|c| c.rate(family))
    }

    /// `family -> group -> rate` with undefined cells as `None`.
    pub fn table(&self) -> BTreeMap<String, BTreeMap<String, Option<f64>>> {
        use RateFamily::*;
        [PositiveRate, Tpr, Fpr, Ppv, For]
            .into_iter()
            .map(|f| (f.name().to_string(), self.groups.iter().map(|(g, c)| (g.clone(), c.rate(f))).collect()))
            .collect()
    }
}

pub fn compute_rates(dataset: &Dataset, rule: &DecisionRule) -> Result<GroupRates> {
    compute_rates_by(dataset, rule, dataset.legit_names())
}

/// Like [`compute_rates`], stratifying by `legit` instead of the dataset's own names.
pub fn compute_rates_by(dataset: &Dataset, rule: &DecisionRule, legit: &[String]) -> Result<GroupRates> {
    let mut rates = GroupRates::default();
    for g in dataset.groups() {
        rates.groups.insert(g.clone(), GroupCell::default());
    }
    for r in dataset.records() {
        let p = rule.probability_for(r)?;
        rates.groups.entry(r.group.clone()).or_default().add(r.label, p);
        if !legit.is_empty() {
            rates.strata.entry(r.stratum(legit)?).or_default().entry(r.group.clone()).or_default().add(r.label, p);
        }
    }
    Ok(rates)
}

/// Worst cross-group ratio of one family; undefined cells are skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyRatio {
    pub family: String,
    pub ratio: Option<f64>,
    /// Groups whose cell was undefined (empty conditioning set).
    pub undefined: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disparity {
    pub ratio: f64,
    pub families: Vec<FamilyRatio>,
}

impl Disparity {
    pub fn has_undefined(&self) -> bool {
        self.families.iter().any(|f| !f.undefined.is_empty() || f.ratio.is_none())
    }
}

/// `min_{g,h} r_g / r_h` over the defined values: both-zero counts as 1, one zero as 0.
pub fn min_pair_ratio(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut lo, mut hi, mut any) = (f64::INFINITY, f64::NEG_INFINITY, false);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
        any = true;
    }
    if !any {
        None
    } else if hi <= 0.0 {
        Some(1.0)
    } else {
        Some(lo / hi)
    }
}

fn family_ratio(
    name: String,
    cells: &BTreeMap<String, GroupCell>,
    groups: &[&String],
    family: RateFamily,
) -> FamilyRatio {
    let mut undefined = Vec::new();
    let mut values = Vec::new();
    for g in groups {
        match cells.get(*g).and_then(|c| c.rate(family)) {
            Some(v) => values.push(v),
            None => undefined.push((*g).clone()),
        }
    }
    FamilyRatio { family: name, ratio: min_pair_ratio(values), undefined }
}

/// Relaxed parity level achieved by the rates under the criterion's families.
pub fn disparity_ratio(rates: &GroupRates, criterion: &FairnessCriterion) -> Result<Disparity> {
    let groups: Vec<&String> = rates.groups.keys().collect();
    let families: Vec<FamilyRatio> = if criterion.kind == CriterionKind::ConditionalStatisticalParity {
        if rates.strata.is_empty() {
            return Err(Error::UndefinedMetric(
                "conditional statistical parity needs rates computed with legitimate attributes".into(),
            ));
        }
        rates
            .strata
            .iter()
            .map(|(key, cells)| family_ratio(format!("positive_rate[{key}]"), cells, &groups, RateFamily::PositiveRate))
            .collect()
    } else {
        criterion
            .kind
            .families()
            .iter()
            .map(|f| family_ratio(f.name().to_string(), &rates.groups, &groups, *f))
            .collect()
    };
    let ratio = families
        .iter()
        .filter_map(|f| f.ratio)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
        .ok_or_else(|| Error::UndefinedMetric(format!("every {} cell is undefined", criterion.kind)))?;
    Ok(Disparity { ratio, families })
}

/// Mean decision maker payoff over the records.
pub fn decision_maker_utility(dataset: &Dataset, rule: &DecisionRule, u: &UtilityMatrix) -> Result<f64> {
    let mut total = 0.0;
    for r in dataset.records() {
        let p = rule.probability_for(r)?;
        total += (1.0 - p) * u.get(0, r.label) + p * u.get(1, r.label);
    }
    Ok(total / dataset.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FecEntry {
    pub group: String,
    pub justifier_value: String,
    /// `E(U_DS | G = group, J = value)`; `None` when the cell has no support.
    pub expected_benefit: Option<f64>,
    pub support: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FecTable {
    pub entries: Vec<FecEntry>,
    /// Largest cross-group gap in expected benefit over the relevant justifier values.
    pub max_disparity: f64,
}

impl FecTable {
    pub fn zero_support(&self) -> impl Iterator<Item = &FecEntry> {
        self.entries.iter().filter(|e| e.expected_benefit.is_none())
    }
}

/// Expected subject benefit per group and justifier value under `rule`.
pub fn fec_check(dataset: &Dataset, rule: &DecisionRule, a: &MoralAssessment, b: &BenefitMatrix) -> Result<FecTable> {
    a.validate()?;
    // (group, j) -> (weighted benefit, weight)
    let mut sums: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
    let mut keys: Vec<String> = Vec::new();
    match &a.justifier {
        Justifier::Outcome | Justifier::Decision => keys.extend(a.relevant_values.iter().map(u8::to_string)),
        Justifier::None => keys.push("*".into()),
        Justifier::Legitimate(names) => keys.extend(dataset.strata(names)?),
    }
    for g in dataset.groups() {
        for k in &keys {
            sums.insert((g.clone(), k.clone()), (0.0, 0.0));
        }
    }
    for r in dataset.records() {
        let p = rule.probability_for(r)?;
        let expected = |y: u8| (1.0 - p) * b.get(0, y) + p * b.get(1, y);
        let mut add = |key: String, weighted: f64, weight: f64| {
            if let Some(cell) = sums.get_mut(&(r.group.clone(), key)) {
                cell.0 += weighted;
                cell.1 += weight;
            }
        };
        match &a.justifier {
            Justifier::Outcome => add(r.label.to_string(), expected(r.label), 1.0),
            Justifier::Decision => {
                for (d, w) in [(0u8, 1.0 - p), (1u8, p)] {
                    if w > 0.0 {
                        add(d.to_string(), w * b.get(d, r.label), w);
                    }
                }
            }
            Justifier::None => add("*".into(), expected(r.label), 1.0),
            Justifier::Legitimate(names) => add(r.stratum(names)?, expected(r.label), 1.0),
        }
    }
    let entries: Vec<FecEntry> = sums
        .into_iter()
        .map(|((group, justifier_value), (s, w))| FecEntry {
            group,
            justifier_value,
            expected_benefit: (w > 0.0).then(|| s / w),
            support: w,
        })
        .collect();
    let mut max_disparity = 0.0f64;
    for k in &keys {
        let values: Vec<f64> =
            entries.iter().filter(|e| &e.justifier_value == k).filter_map(|e| e.expected_benefit).collect();
        if let (Some(lo), Some(hi)) = (values.iter().copied().reduce(f64::min), values.iter().copied().reduce(f64::max))
        {
            max_disparity = max_disparity.max(hi - lo);
        }
    }
    Ok(FecTable { entries, max_disparity })
}

/// Everything `evaluate` writes for one rule on one dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricReport {
    pub records: usize,
    pub rates: BTreeMap<String, BTreeMap<String, Option<f64>>>,
    pub cells: BTreeMap<String, GroupCell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<FairnessCriterion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disparity: Option<Disparity>,
    pub utility: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fec: Option<FecTable>,
}

impl MetricReport {
    pub fn build(
        dataset: &Dataset,
        rule: &DecisionRule,
        u: &UtilityMatrix,
        criterion: Option<&FairnessCriterion>,
        assessment: Option<&MoralAssessment>,
    ) -> Result<Self> {
        let rates = match criterion {
            Some(c) if !c.legit_names.is_empty() => compute_rates_by(dataset, rule, &c.legit_names)?,
            _ => compute_rates(dataset, rule)?,
        };
        let disparity = criterion.map(|c| disparity_ratio(&rates, c)).transpose()?;
        let fec = match assessment {
            Some(a) => Some(fec_check(dataset, rule, a, &a.benefit()?)?),
            None => None,
        };
        Ok(Self {
            records: dataset.len(),
            rates: rates.table(),
            cells: rates.groups.clone(),
            criterion: criterion.cloned(),
            disparity,
            utility: decision_maker_utility(dataset, rule, u)?,
            fec,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assessment::BenefitSource;
    use crate::model::{Cutoff, Record};

    fn toy() -> Dataset {
        // group a: (0.9,1) (0.4,0); group b: (0.6,1) (0.7,0)
        Dataset::from_records(vec![
            Record::scored(0, 0.9, 1, "a").unwrap(),
            Record::scored(1, 0.4, 0, "a").unwrap(),
            Record::scored(2, 0.6, 1, "b").unwrap(),
            Record::scored(3, 0.7, 0, "b").unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn toy_rates_match_hand_counts() {
        let rates = compute_rates(&toy(), &DecisionRule::SingleThreshold { threshold: 0.5 }).unwrap();
        // a accepts record 0 only; b accepts both.
        assert_eq!(rates.rate(RateFamily::PositiveRate, "a"), Some(0.5));
        assert_eq!(rates.rate(RateFamily::PositiveRate, "b"), Some(1.0));
        assert_eq!(rates.rate(RateFamily::Tpr, "a"), Some(1.0));
        assert_eq!(rates.rate(RateFamily::Fpr, "a"), Some(0.0));
        assert_eq!(rates.rate(RateFamily::Fpr, "b"), Some(1.0));
        assert_eq!(rates.rate(RateFamily::Ppv, "b"), Some(0.5));
        assert_eq!(rates.rate(RateFamily::For, "a"), Some(0.0));
        assert_eq!(rates.rate(RateFamily::For, "b"), None);
    }

    #[test]
    fn always_reject_rates() {
        let rates = compute_rates(&toy(), &DecisionRule::reject_all()).unwrap();
        for g in ["a", "b"] {
            assert_eq!(rates.rate(RateFamily::PositiveRate, g), Some(0.0));
            assert_eq!(rates.rate(RateFamily::Ppv, g), None);
            assert_eq!(rates.rate(RateFamily::For, g), Some(0.5));
        }
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(min_pair_ratio([0.3, 0.3]), Some(1.0));
        assert!((min_pair_ratio([0.35, 0.21]).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(min_pair_ratio([0.0, 0.0]), Some(1.0));
        assert_eq!(min_pair_ratio([0.0, 0.4]), Some(0.0));
        assert_eq!(min_pair_ratio([]), None);
    }

    #[test]
    fn all_undefined_is_an_error() {
        let rates = compute_rates(&toy(), &DecisionRule::reject_all()).unwrap();
        let c = FairnessCriterion::new(CriterionKind::PpvParity, 1.0).unwrap();
        assert!(matches!(disparity_ratio(&rates, &c), Err(Error::UndefinedMetric(_))));
        let d = FairnessCriterion::new(CriterionKind::Sufficiency, 1.0).unwrap();
        let disp = disparity_ratio(&rates, &d).unwrap();
        assert_eq!(disp.ratio, 1.0);
        assert!(disp.has_undefined());
    }

    #[test]
    fn utility_by_hand() {
        // u(0,0)=2, u(0,1)=-1, u(1,0)=0, u(1,1)=3
        let u = UtilityMatrix::new(2.0, -1.0, 0.0, 3.0).unwrap();
        let ds = Dataset::from_records(vec![
            Record::scored(0, 0.8, 1, "a").unwrap(),
            Record::scored(1, 0.2, 0, "a").unwrap(),
            Record::scored(2, 0.6, 0, "b").unwrap(),
        ])
        .unwrap();
        let rule = DecisionRule::SingleThreshold { threshold: 0.5 };
        // accepted positive 3, rejected negative 2, accepted negative 0
        let v = decision_maker_utility(&ds, &rule, &u).unwrap();
        assert!((v - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_scores_are_fully_accurate() {
        let ds = Dataset::from_records(vec![
            Record::scored(0, 1.0, 1, "a").unwrap(),
            Record::scored(1, 0.0, 0, "a").unwrap(),
            Record::scored(2, 1.0, 1, "b").unwrap(),
        ])
        .unwrap();
        let v =
            decision_maker_utility(&ds, &DecisionRule::SingleThreshold { threshold: 0.5 }, &UtilityMatrix::accuracy())
                .unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn fec_matches_rates_for_decision_benefit() {
        let ds = toy();
        let rule = DecisionRule::GroupThreshold {
            groups: [("a".into(), Cutoff::new(0.4, 0.5)), ("b".into(), Cutoff::new(0.7, 0.25))].into(),
        };
        let a = MoralAssessment::new(BenefitSource::Decision, Justifier::Outcome, &[0, 1], "g");
        let b = BenefitMatrix::from_decision(1);
        let table = fec_check(&ds, &rule, &a, &b).unwrap();
        let rates = compute_rates(&ds, &rule).unwrap();
        for e in &table.entries {
            let family = if e.justifier_value == "1" { RateFamily::Tpr } else { RateFamily::Fpr };
            assert_eq!(e.expected_benefit, rates.rate(family, &e.group));
        }
    }

    #[test]
    fn fec_extreme_rules() {
        let ds = toy();
        let rule = DecisionRule::GroupThreshold {
            groups: [("a".into(), Cutoff::new(0.0, 1.0)), ("b".into(), Cutoff::new(1.0, 0.0))].into(),
        };
        let a = MoralAssessment::new(BenefitSource::Decision, Justifier::Outcome, &[0, 1], "g");
        let table = fec_check(&ds, &rule, &a, &BenefitMatrix::from_decision(1)).unwrap();
        assert_eq!(table.max_disparity, 1.0);
    }

    #[test]
    fn rates_are_permutation_and_duplication_invariant() {
        let ds = toy();
        let mut recs = ds.records().to_vec();
        recs.reverse();
        let doubled: Vec<Record> = recs.iter().chain(ds.records()).cloned().collect();
        let rule = DecisionRule::GroupThreshold {
            groups: [("a".into(), Cutoff::new(0.4, 0.3)), ("b".into(), Cutoff::new(0.6, 0.7))].into(),
        };
        let base = compute_rates(&ds, &rule).unwrap().table();
        let rev = compute_rates(&Dataset::from_records(recs).unwrap(), &rule).unwrap().table();
        let dup = compute_rates(&Dataset::from_records(doubled).unwrap(), &rule).unwrap().table();
        for (f, per_group) in &base {
            for (g, v) in per_group {
                let close = |o: Option<f64>| match (v, o) {
                    (Some(x), Some(y)) => (x - y).abs() < 1e-12,
                    (None, None) => true,
                    _ => false,
                };
                assert!(close(rev[f][g]) && close(dup[f][g]), "{f} {g}");
            }
        }
    }
}
