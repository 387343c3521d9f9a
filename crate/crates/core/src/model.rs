//! Domain types shared by every stage of the pipeline: individuals,
//! datasets, payoff matrices, decision rules and fairness criteria.
//!
//! Decision rules are evaluated analytically: [`DecisionRule::decision_probability`]
//! returns the probability of a positive decision, and [`DecisionRule::decide`]
//! turns that into a 0/1 decision given an externally supplied uniform draw.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Attributes = BTreeMap<String, String>;

/// One decision subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    /// Estimated probability of `label == 1`.
    pub score: Option<f64>,
    pub label: u8,
    pub group: String,
    #[serde(default)]
    pub legit: Attributes,
    #[serde(default)]
    pub features: BTreeMap<String, f64>,
}

impl Record {
    pub fn new(id: impl Into<String>, score: Option<f64>, label: u8, group: impl Into<String>) -> Result<Self> {
        if label > 1 {
            return Err(Error::InvalidDataset(format!("label {label} is not binary")));
        }
        if let Some(p) = score {
            check_probability("score", p).map_err(Error::InvalidDataset)?;
        }
        Ok(Self {
            id: id.into(),
            score,
            label,
            group: group.into(),
            legit: Attributes::new(),
            features: BTreeMap::new(),
        })
    }

    /// Shorthand for tests and examples: a scored record with an index id.
    pub fn scored(id: usize, score: f64, label: u8, group: &str) -> Result<Self> {
        Self::new(id.to_string(), Some(score), label, group)
    }

    pub fn with_legit(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.legit.insert(name.into(), value.into());
        self
    }

    pub fn with_feature(mut self, name: impl Into<String>, value: f64) -> Self {
        self.features.insert(name.into(), value);
        self
    }

    pub fn score(&self) -> Result<f64> {
        self.score.ok_or_else(|| Error::InvalidDataset(format!("record `{}` has no score", self.id)))
    }

    pub fn stratum(&self, legit_names: &[String]) -> Result<String> {
        stratum_key(&self.legit, legit_names)
    }
}

/// Canonical key for the stratum an attribute map falls into, e.g. `job=a;region=n`.
pub fn stratum_key(legit: &Attributes, legit_names: &[String]) -> Result<String> {
    let mut parts = Vec::with_capacity(legit_names.len());
    for name in legit_names {
        let value =
            legit.get(name).ok_or_else(|| Error::InvalidDataset(format!("missing legitimate attribute `{name}`")))?;
        parts.push(format!("{name}={value}"));
    }
    Ok(parts.join(";"))
}

fn check_probability(what: &str, p: f64) -> std::result::Result<(), String> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(format!("{what} {p} outside [0,1]"))
    }
}

/// An ordered collection of records with its declared group set.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
    groups: BTreeSet<String>,
    legit_names: Vec<String>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset whose group set is the set of groups observed in `records`.
    pub fn new(records: Vec<Record>, legit_names: Vec<String>, feature_names: Vec<String>) -> Result<Self> {
        let groups = records.iter().map(|r| r.group.clone()).collect();
        Self::with_groups(records, groups, legit_names, feature_names)
    }

    /// Shorthand for a dataset with no legitimate attributes or features.
    pub fn from_records(records: Vec<Record>) -> Result<Self> {
        Self::new(records, Vec::new(), Vec::new())
    }

    pub fn with_groups(
        records: Vec<Record>,
        groups: BTreeSet<String>,
        legit_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidDataset("no records".into()));
        }
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for r in &records {
            if !groups.contains(&r.group) {
                return Err(Error::InvalidDataset(format!(
                    "record `{}` references undeclared group `{}`",
                    r.id, r.group
                )));
            }
            for name in &legit_names {
                if !r.legit.contains_key(name) {
                    return Err(Error::InvalidDataset(format!(
                        "record `{}` lacks legitimate attribute `{name}`",
                        r.id
                    )));
                }
            }
            seen.insert(&r.group);
        }
        if let Some(empty) = groups.iter().find(|g| !seen.contains(g.as_str())) {
            return Err(Error::InvalidDataset(format!("group `{empty}` has no records")));
        }
        Ok(Self { records, groups, legit_names, feature_names })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn groups(&self) -> &BTreeSet<String> {
        &self.groups
    }

    pub fn legit_names(&self) -> &[String] {
        &self.legit_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn group_records<'a>(&'a self, group: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records.iter().filter(move |r| r.group == group)
    }

    /// Fairness computations compare groups, so they need at least two.
    pub fn require_groups(&self) -> Result<()> {
        if self.groups.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "fairness computations need at least 2 groups, found {}",
                self.groups.len()
            )));
        }
        Ok(())
    }

    pub fn require_scores(&self) -> Result<()> {
        match self.records.iter().find(|r| r.score.is_none()) {
            Some(r) => Err(Error::InvalidDataset(format!("record `{}` has no score", r.id))),
            None => Ok(()),
        }
    }

    /// Keeps the records matching `keep`; the group set shrinks to the observed groups.
    pub fn filter(&self, keep: impl Fn(&Record) -> bool) -> Result<Self> {
        let records = self.records.iter().filter(|r| keep(r)).cloned().collect();
        Self::new(records, self.legit_names.clone(), self.feature_names.clone())
    }

    pub fn with_legit_names(mut self, legit_names: Vec<String>) -> Result<Self> {
        for r in &self.records {
            for name in &legit_names {
                if !r.legit.contains_key(name) {
                    return Err(Error::InvalidDataset(format!(
                        "record `{}` lacks legitimate attribute `{name}`",
                        r.id
                    )));
                }
            }
        }
        self.legit_names = legit_names;
        Ok(self)
    }

    /// Replaces every record's score, keeping everything else.
    pub fn with_scores(&self, scores: &[f64]) -> Result<Self> {
        if scores.len() != self.records.len() {
            return Err(Error::InvalidDataset("score count does not match record count".into()));
        }
        let mut records = self.records.clone();
        for (r, &p) in records.iter_mut().zip(scores) {
            check_probability("score", p).map_err(Error::InvalidDataset)?;
            r.score = Some(p);
        }
        Self::with_groups(records, self.groups.clone(), self.legit_names.clone(), self.feature_names.clone())
    }

    /// Distinct stratum keys over the given legitimate attributes.
    pub fn strata(&self, legit_names: &[String]) -> Result<BTreeSet<String>> {
        self.records.iter().map(|r| r.stratum(legit_names)).collect()
    }
}

/// Decision maker payoff `u(d, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityMatrix {
    u00: f64,
    u01: f64,
    u10: f64,
    u11: f64,
}

impl UtilityMatrix {
    /// Cells in the order u(0,0), u(0,1), u(1,0), u(1,1).
    pub fn new(u00: f64, u01: f64, u10: f64, u11: f64) -> Result<Self> {
        if ![u00, u01, u10, u11].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidUtility("cells must be finite".into()));
        }
        if !(u11 > u01 || u00 > u10) {
            return Err(Error::InvalidUtility("the decision must matter for at least one outcome".into()));
        }
        Ok(Self { u00, u01, u10, u11 })
    }

    /// `u(d, y) = 1` iff `d == y`; expected utility is then decision accuracy.
    pub fn accuracy() -> Self {
        Self { u00: 1.0, u01: 0.0, u10: 0.0, u11: 1.0 }
    }

    pub fn get(&self, decision: u8, label: u8) -> f64 {
        match (decision, label) {
            (0, 0) => self.u00,
            (0, _) => self.u01,
            (_, 0) => self.u10,
            _ => self.u11,
        }
    }

    /// Gain from accepting instead of rejecting a `Y = 1` individual.
    pub fn positive_gain(&self) -> f64 {
        self.u11 - self.u01
    }

    /// Gain from accepting instead of rejecting a `Y = 0` individual (usually negative).
    pub fn negative_gain(&self) -> f64 {
        self.u10 - self.u00
    }

    pub fn cells(&self) -> [f64; 4] {
        [self.u00, self.u01, self.u10, self.u11]
    }

    /// `a * u + c`, used to check affine invariance.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self> {
        Self::new(
            scale * self.u00 + shift,
            scale * self.u01 + shift,
            scale * self.u10 + shift,
            scale * self.u11 + shift,
        )
    }
}

impl FromStr for UtilityMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let cells = parse_cells(s).map_err(Error::InvalidUtility)?;
        Self::new(cells[0], cells[1], cells[2], cells[3])
    }
}

fn parse_cells(s: &str) -> std::result::Result<[f64; 4], String> {
    let values: Vec<f64> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    values.try_into().map_err(|v: Vec<f64>| format!("expected 4 cells, got {}", v.len()))
}

/// Decision subject benefit `b(d, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenefitMatrix {
    b00: f64,
    b01: f64,
    b10: f64,
    b11: f64,
}

impl BenefitMatrix {
    /// Cells in the order b(0,0), b(0,1), b(1,0), b(1,1).
    pub fn new(b00: f64, b01: f64, b10: f64, b11: f64) -> Result<Self> {
        if ![b00, b01, b10, b11].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBenefit("cells must be finite".into()));
        }
        if b00 == b01 && b00 == b10 && b00 == b11 {
            return Err(Error::InvalidBenefit("benefit is constant across all cells".into()));
        }
        Ok(Self { b00, b01, b10, b11 })
    }

    /// Benefit 1 for the advantageous decision, 0 otherwise.
    pub fn from_decision(advantage: u8) -> Self {
        let (a, b) = if advantage == 1 { (0.0, 1.0) } else { (1.0, 0.0) };
        Self { b00: a, b01: a, b10: b, b11: b }
    }

    /// Benefit 1 for the advantageous outcome, 0 otherwise.
    pub fn from_outcome(advantage: u8) -> Self {
        let (a, b) = if advantage == 1 { (0.0, 1.0) } else { (1.0, 0.0) };
        Self { b00: a, b01: b, b10: a, b11: b }
    }

    pub fn get(&self, decision: u8, label: u8) -> f64 {
        match (decision, label) {
            (0, 0) => self.b00,
            (0, _) => self.b01,
            (_, 0) => self.b10,
            _ => self.b11,
        }
    }

    pub fn depends_on_decision(&self) -> bool {
        self.b00 != self.b10 || self.b01 != self.b11
    }

    pub fn depends_on_outcome(&self) -> bool {
        self.b00 != self.b01 || self.b10 != self.b11
    }

    pub fn cells(&self) -> [f64; 4] {
        [self.b00, self.b01, self.b10, self.b11]
    }
}

impl FromStr for BenefitMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let cells = parse_cells(s).map_err(Error::InvalidBenefit)?;
        Self::new(cells[0], cells[1], cells[2], cells[3])
    }
}

/// A threshold for one group: scores above `threshold` are accepted,
/// scores exactly at it are accepted with probability `boundary_accept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub threshold: f64,
    pub boundary_accept: f64,
}

impl Cutoff {
    pub fn new(threshold: f64, boundary_accept: f64) -> Self {
        Self { threshold, boundary_accept }
    }

    pub fn probability(&self, score: f64) -> f64 {
        if score > self.threshold {
            1.0
        } else if score == self.threshold {
            self.boundary_accept
        } else {
            0.0
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        check_probability(&format!("{what} threshold"), self.threshold).map_err(Error::InvalidRule)?;
        check_probability(&format!("{what} boundary probability"), self.boundary_accept).map_err(Error::InvalidRule)
    }

    fn is_randomized(&self) -> bool {
        self.boundary_accept > 0.0 && self.boundary_accept < 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    /// Accept `[threshold, 1]`.
    Lower,
    /// Accept `[0, threshold]`.
    Upper,
}

/// A one-sided acceptance interval for one group, with randomization at its finite endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalCutoff {
    pub form: BoundForm,
    pub threshold: f64,
    pub boundary_accept: f64,
}

impl IntervalCutoff {
    pub fn lower(&self) -> f64 {
        match self.form {
            BoundForm::Lower => self.threshold,
            BoundForm::Upper => 0.0,
        }
    }

    pub fn upper(&self) -> f64 {
        match self.form {
            BoundForm::Lower => 1.0,
            BoundForm::Upper => self.threshold,
        }
    }

    pub fn probability(&self, score: f64) -> f64 {
        let inside = match self.form {
            BoundForm::Lower => score > self.threshold,
            BoundForm::Upper => score < self.threshold,
        };
        if inside {
            1.0
        } else if score == self.threshold {
            self.boundary_accept
        } else {
            0.0
        }
    }
}

/// Maps a score (plus group and stratum) to a decision probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DecisionRule {
    /// Same decision for everyone.
    Constant {
        accept: bool,
    },
    /// `score >= threshold`, shared by all groups.
    SingleThreshold {
        threshold: f64,
    },
    GroupThreshold {
        groups: BTreeMap<String, Cutoff>,
    },
    GroupInterval {
        groups: BTreeMap<String, IntervalCutoff>,
    },
    /// Thresholds per group within each stratum of the legitimate attributes.
    StratifiedGroupThreshold {
        legit_names: Vec<String>,
        /// group -> stratum key -> cutoff
        cells: BTreeMap<String, BTreeMap<String, Cutoff>>,
    },
    /// Applies `first` with probability `weights[group]`, otherwise `second`.
    Mixture {
        first: Box<DecisionRule>,
        second: Box<DecisionRule>,
        weights: BTreeMap<String, f64>,
    },
}

impl DecisionRule {
    pub fn accept_all() -> Self {
        Self::Constant { accept: true }
    }

    pub fn reject_all() -> Self {
        Self::Constant { accept: false }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { .. } => Ok(()),
            Self::SingleThreshold { threshold } => {
                check_probability("threshold", *threshold).map_err(Error::InvalidRule)
            }
            Self::GroupThreshold { groups } => groups.iter().try_for_each(|(g, c)| c.validate(g)),
            Self::GroupInterval { groups } => groups.iter().try_for_each(|(g, c)| {
                check_probability(&format!("{g} threshold"), c.threshold).map_err(Error::InvalidRule)?;
                check_probability(&format!("{g} boundary probability"), c.boundary_accept).map_err(Error::InvalidRule)
            }),
            Self::StratifiedGroupThreshold { cells, .. } => cells
                .iter()
                .try_for_each(|(g, strata)| strata.iter().try_for_each(|(s, c)| c.validate(&format!("{g}/{s}")))),
            Self::Mixture { first, second, weights } => {
                for (g, w) in weights {
                    check_probability(&format!("{g} mixture weight"), *w).map_err(Error::InvalidRule)?;
                }
                first.validate()?;
                second.validate()
            }
        }
    }

    /// Probability of a positive decision, i.e. `decide` averaged over the draw.
    pub fn decision_probability(&self, score: f64, group: &str, legit: &Attributes) -> Result<f64> {
        match self {
            Self::Constant { accept } => Ok(if *accept { 1.0 } else { 0.0 }),
            Self::SingleThreshold { threshold } => Ok(if score >= *threshold { 1.0 } else { 0.0 }),
            Self::GroupThreshold { groups } => Ok(lookup(groups, group)?.probability(score)),
            Self::GroupInterval { groups } => Ok(lookup(groups, group)?.probability(score)),
            Self::StratifiedGroupThreshold { legit_names, cells } => {
                Ok(stratified_cutoff(legit_names, cells, group, legit)?.probability(score))
            }
            Self::Mixture { first, second, weights } => {
                let w = *lookup(weights, group)?;
                let a = first.decision_probability(score, group, legit)?;
                let b = second.decision_probability(score, group, legit)?;
                Ok(w * a + (1.0 - w) * b)
            }
        }
    }

    /// Samples a decision; `draw` is a uniform sample from `[0, 1)`.
    pub fn decide(&self, score: f64, group: &str, legit: &Attributes, draw: f64) -> Result<u8> {
        let accept_boundary = |q: f64| u8::from(draw < q);
        match self {
            Self::Constant { accept } => Ok(u8::from(*accept)),
            Self::SingleThreshold { threshold } => Ok(u8::from(score >= *threshold)),
            Self::GroupThreshold { groups } => {
                let c = lookup(groups, group)?;
                Ok(match score.partial_cmp(&c.threshold) {
                    Some(std::cmp::Ordering::Greater) => 1,
                    Some(std::cmp::Ordering::Equal) => accept_boundary(c.boundary_accept),
                    _ => 0,
                })
            }
            Self::GroupInterval { groups } => {
                let c = lookup(groups, group)?;
                let p = c.probability(score);
                Ok(if p == 1.0 || p == 0.0 { p as u8 } else { accept_boundary(p) })
            }
            Self::StratifiedGroupThreshold { legit_names, cells } => {
                let c = stratified_cutoff(legit_names, cells, group, legit)?;
                let p = c.probability(score);
                Ok(if score == c.threshold { accept_boundary(p) } else { p as u8 })
            }
            Self::Mixture { first, second, weights } => {
                let w = *lookup(weights, group)?;
                if draw < w {
                    first.decide(score, group, legit, draw / w)
                } else {
                    second.decide(score, group, legit, (draw - w) / (1.0 - w))
                }
            }
        }
    }

    /// Decision probability for a record; the record must carry a score.
    pub fn probability_for(&self, record: &Record) -> Result<f64> {
        self.decision_probability(record.score()?, &record.group, &record.legit)
    }

    /// True when some region of some group is decided by a coin flip.
    pub fn is_randomized(&self) -> bool {
        match self {
            Self::Constant { .. } | Self::SingleThreshold { .. } => false,
            Self::GroupThreshold { groups } => groups.values().any(Cutoff::is_randomized),
            Self::GroupInterval { groups } => {
                groups.values().any(|c| c.boundary_accept > 0.0 && c.boundary_accept < 1.0)
            }
            Self::StratifiedGroupThreshold { cells, .. } => {
                cells.values().flat_map(|s| s.values()).any(Cutoff::is_randomized)
            }
            Self::Mixture { first, second, weights } => {
                weights.values().any(|w| *w > 0.0 && *w < 1.0) || first.is_randomized() || second.is_randomized()
            }
        }
    }

    /// Threshold per group, when the rule has one (group and single thresholds).
    pub fn group_thresholds(&self, groups: &BTreeSet<String>) -> BTreeMap<String, f64> {
        match self {
            Self::SingleThreshold { threshold } => groups.iter().map(|g| (g.clone(), *threshold)).collect(),
            Self::GroupThreshold { groups } => groups.iter().map(|(g, c)| (g.clone(), c.threshold)).collect(),
            Self::GroupInterval { groups } => groups.iter().map(|(g, c)| (g.clone(), c.threshold)).collect(),
            _ => BTreeMap::new(),
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::SingleThreshold { .. } => "single_threshold",
            Self::GroupThreshold { .. } => "group_threshold",
            Self::GroupInterval { .. } => "group_interval",
            Self::StratifiedGroupThreshold { .. } => "stratified_group_threshold",
            Self::Mixture { .. } => "mixture",
        }
    }
}

fn lookup<'a, T>(map: &'a BTreeMap<String, T>, group: &str) -> Result<&'a T> {
    map.get(group).ok_or_else(|| Error::Coverage { group: group.to_string(), stratum: None })
}

fn stratified_cutoff<'a>(
    legit_names: &[String],
    cells: &'a BTreeMap<String, BTreeMap<String, Cutoff>>,
    group: &str,
    legit: &Attributes,
) -> Result<&'a Cutoff> {
    let key = stratum_key(legit, legit_names)?;
    let strata = lookup(cells, group)?;
    strata.get(&key).ok_or_else(|| Error::Coverage { group: group.to_string(), stratum: Some(key) })
}

/// The eight group fairness criteria reachable from a moral assessment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    Independence,
    ConditionalStatisticalParity,
    Separation,
    TprParity,
    FprParity,
    Sufficiency,
    PpvParity,
    ForParity,
}

/// A conditional rate compared across groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateFamily {
    /// `P(D=1 | G=g)`
    PositiveRate,
    /// `P(D=1 | Y=1, G=g)`
    Tpr,
    /// `P(D=1 | Y=0, G=g)`
    Fpr,
    /// `P(Y=1 | D=1, G=g)`
    Ppv,
    /// `P(Y=1 | D=0, G=g)`
    For,
}

impl RateFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PositiveRate => "positive_rate",
            Self::Tpr => "tpr",
            Self::Fpr => "fpr",
            Self::Ppv => "ppv",
            Self::For => "for",
        }
    }
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 8] = [
        Self::Independence,
        Self::ConditionalStatisticalParity,
        Self::Separation,
        Self::TprParity,
        Self::FprParity,
        Self::Sufficiency,
        Self::PpvParity,
        Self::ForParity,
    ];

    /// Rate families whose cross-group ratio the criterion constrains.
    pub fn families(&self) -> &'static [RateFamily] {
        use RateFamily::*;
        match self {
            Self::Independence | Self::ConditionalStatisticalParity => &[PositiveRate],
            Self::Separation => &[Tpr, Fpr],
            Self::TprParity => &[Tpr],
            Self::FprParity => &[Fpr],
            Self::Sufficiency => &[Ppv, For],
            Self::PpvParity => &[Ppv],
            Self::ForParity => &[For],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Independence => "independence",
            Self::ConditionalStatisticalParity => "conditional-statistical-parity",
            Self::Separation => "separation",
            Self::TprParity => "tpr-parity",
            Self::FprParity => "fpr-parity",
            Self::Sufficiency => "sufficiency",
            Self::PpvParity => "ppv-parity",
            Self::ForParity => "for-parity",
        }
    }

    /// Parity equation for groups `m` and `f`.
    pub fn representation(&self) -> &'static str {
        match self {
            Self::Independence => "P(D=1|G=m) = P(D=1|G=f)",
            Self::ConditionalStatisticalParity => "P(D=1|L=l,G=m) = P(D=1|L=l,G=f)",
            Self::Separation => "P(D=1|Y=i,G=m) = P(D=1|Y=i,G=f), i in {0,1}",
            Self::TprParity => "P(D=1|Y=1,G=m) = P(D=1|Y=1,G=f)",
            Self::FprParity => "P(D=1|Y=0,G=m) = P(D=1|Y=0,G=f)",
            Self::Sufficiency => "P(Y=1|D=j,G=m) = P(Y=1|D=j,G=f), j in {0,1}",
            Self::PpvParity => "P(Y=1|D=1,G=m) = P(Y=1|D=1,G=f)",
            Self::ForParity => "P(Y=1|D=0,G=m) = P(Y=1|D=0,G=f)",
        }
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .or(match norm.as_str() {
                "statistical-parity" | "demographic-parity" => Some(Self::Independence),
                "equalized-odds" => Some(Self::Separation),
                "equal-opportunity" | "equality-of-opportunity" => Some(Self::TprParity),
                "predictive-equality" => Some(Self::FprParity),
                "predictive-parity" => Some(Self::PpvParity),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidCriterion(format!("unknown criterion `{s}`")))
    }
}

/// A criterion together with its relaxation level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessCriterion {
    pub kind: CriterionKind,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub legit_names: Vec<String>,
}

impl FairnessCriterion {
    pub fn new(kind: CriterionKind, gamma: f64) -> Result<Self> {
        Self::with_legit(kind, gamma, Vec::new())
    }

    pub fn with_legit(kind: CriterionKind, gamma: f64, legit_names: Vec<String>) -> Result<Self> {
        let c = Self { kind, gamma, legit_names };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && (0.0..=1.0).contains(&self.gamma)) {
            return Err(Error::InvalidCriterion(format!("gamma {} outside [0,1]", self.gamma)));
        }
        if self.kind == CriterionKind::ConditionalStatisticalParity && self.legit_names.is_empty() {
            return Err(Error::InvalidCriterion(
                "conditional statistical parity needs at least one legitimate attribute".into(),
            ));
        }
        Ok(())
    }

    pub fn at_gamma(&self, gamma: f64) -> Result<Self> {
        Self::with_legit(self.kind, gamma, self.legit_names.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_legit() -> Attributes {
        Attributes::new()
    }

    fn two_groups(a: Cutoff, c: Cutoff) -> DecisionRule {
        DecisionRule::GroupThreshold { groups: [("a".to_string(), a), ("c".to_string(), c)].into() }
    }

    #[test]
    fn single_threshold_accepts_above() {
        let rule = DecisionRule::SingleThreshold { threshold: 0.5 };
        assert_eq!(rule.decide(0.51, "a", &no_legit(), 0.9).unwrap(), 1);
        assert_eq!(rule.decide(0.49, "a", &no_legit(), 0.0).unwrap(), 0);
    }

    #[test]
    fn interval_rejects_outside() {
        let rule = DecisionRule::GroupInterval {
            groups: [(
                "f".to_string(),
                IntervalCutoff { form: BoundForm::Upper, threshold: 0.3, boundary_accept: 1.0 },
            )]
            .into(),
        };
        assert_eq!(rule.decide(0.4, "f", &no_legit(), 0.0).unwrap(), 0);
        assert_eq!(rule.decide(0.3, "f", &no_legit(), 0.99).unwrap(), 1);
        assert_eq!(rule.decide(0.1, "f", &no_legit(), 0.5).unwrap(), 1);
    }

    #[test]
    fn group_thresholds_differ_by_group() {
        let rule = two_groups(Cutoff::new(0.51, 1.0), Cutoff::new(0.44, 1.0));
        assert_eq!(rule.decide(0.47, "c", &no_legit(), 0.3).unwrap(), 1);
        assert_eq!(rule.decide(0.47, "a", &no_legit(), 0.3).unwrap(), 0);
    }

    #[test]
    fn boundary_randomization_probability() {
        let rule = two_groups(Cutoff::new(0.5, 0.25), Cutoff::new(0.5, 0.25));
        assert_eq!(rule.decision_probability(0.5, "a", &no_legit()).unwrap(), 0.25);
        assert_eq!(rule.decide(0.5, "a", &no_legit(), 0.2).unwrap(), 1);
        assert_eq!(rule.decide(0.5, "a", &no_legit(), 0.3).unwrap(), 0);
    }

    #[test]
    fn mixture_of_constants_is_half() {
        let rule = DecisionRule::Mixture {
            first: Box::new(DecisionRule::accept_all()),
            second: Box::new(DecisionRule::reject_all()),
            weights: [("a".to_string(), 0.5)].into(),
        };
        for s in [0.0, 0.3, 1.0] {
            assert_eq!(rule.decision_probability(s, "a", &no_legit()).unwrap(), 0.5);
        }
    }

    #[test]
    fn unknown_group_is_coverage_error() {
        let rule = two_groups(Cutoff::new(0.5, 1.0), Cutoff::new(0.5, 1.0));
        let err = rule.decide(0.7, "zz", &no_legit(), 0.1).unwrap_err();
        assert!(matches!(err, Error::Coverage { ref group, .. } if group == "zz"));
    }

    #[test]
    fn stratified_missing_stratum_names_group() {
        let rule = DecisionRule::StratifiedGroupThreshold {
            legit_names: vec!["job".into()],
            cells: [("m".to_string(), [("job=a".to_string(), Cutoff::new(0.5, 1.0))].into())].into(),
        };
        let legit: Attributes = [("job".to_string(), "b".to_string())].into();
        let err = rule.decision_probability(0.7, "m", &legit).unwrap_err();
        assert!(matches!(err, Error::Coverage { ref group, stratum: Some(ref s) } if group == "m" && s == "job=b"));
    }

    #[test]
    fn utility_matrix_rejects_irrelevant_decision() {
        assert!(UtilityMatrix::new(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(UtilityMatrix::new(1.0, 0.0, 0.0, 1.0).is_ok());
        let u: UtilityMatrix = "3,0,1,1".parse().unwrap();
        assert_eq!(u.get(0, 0), 3.0);
        assert_eq!(u.get(1, 0), 1.0);
    }

    #[test]
    fn constant_benefit_is_rejected() {
        assert!(BenefitMatrix::new(2.0, 2.0, 2.0, 2.0).is_err());
        let b = BenefitMatrix::from_decision(0);
        assert_eq!(b.get(0, 1), 1.0);
        assert_eq!(b.get(1, 0), 0.0);
        assert!(b.depends_on_decision() && !b.depends_on_outcome());
    }

    #[test]
    fn criterion_parses_aliases() {
        assert_eq!("fpr-parity".parse::<CriterionKind>().unwrap(), CriterionKind::FprParity);
        assert_eq!("equalized_odds".parse::<CriterionKind>().unwrap(), CriterionKind::Separation);
        assert!("fairness".parse::<CriterionKind>().is_err());
        assert!(FairnessCriterion::new(CriterionKind::ConditionalStatisticalParity, 1.0).is_err());
        assert!(FairnessCriterion::new(CriterionKind::Independence, 1.2).is_err());
    }

    #[test]
    fn dataset_rejects_empty_declared_group() {
        let r = Record::scored(0, 0.5, 1, "a").unwrap();
        let groups: BTreeSet<String> = ["a".to_string(), "b".to_string()].into();
        assert!(Dataset::with_groups(vec![r], groups, vec![], vec![]).is_err());
        assert!(Record::new("x", Some(1.5), 0, "a").is_err());
        assert!(Record::new("x", Some(0.5), 2, "a").is_err());
    }
}
