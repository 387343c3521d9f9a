//! CSV ingestion and the text documents the command line reads and writes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, DecisionRule, FairnessCriterion, Record, UtilityMatrix};

/// How csv columns map onto record fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnRoles {
    /// Used when the header has it; otherwise the 1-based data row number is the id.
    pub id: Option<String>,
    pub group: String,
    pub label: String,
    /// Read when the header has it; otherwise records are unscored.
    pub score: String,
    /// Columns starting with this are features, named without the prefix.
    pub feature_prefix: String,
    /// Columns starting with this are legitimate attributes, named without the prefix.
    pub legit_prefix: String,
    /// Extra feature columns taken by their full name.
    pub features: Vec<String>,
}

impl Default for ColumnRoles {
    fn default() -> Self {
        Self {
            id: Some("id".into()),
            group: "group".into(),
            label: "label".into(),
            score: "score".into(),
            feature_prefix: "x_".into(),
            legit_prefix: "l_".into(),
            features: Vec::new(),
        }
    }
}

enum Role {
    Id,
    Group,
    Label,
    Score,
    Feature(String),
    Legit(String),
    Ignored,
}

pub fn load_csv(path: impl AsRef<Path>, roles: &ColumnRoles) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, roles)
}

/// Parses a csv with a header row. Errors carry the line they come from.
pub fn read_csv(input: impl Read, roles: &ColumnRoles) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(|e| parse_err(1, e))?.clone();
    let mut cols = Vec::with_capacity(header.len());
    let mut features = Vec::new();
    let mut legit = Vec::new();
    for name in header.iter() {
        let role = if Some(name) == roles.id.as_deref() {
            Role::Id
        } else if name == roles.group {
            Role::Group
        } else if name == roles.label {
            Role::Label
        } else if name == roles.score {
            Role::Score
        } else if roles.features.iter().any(|f| f == name) {
            features.push(name.to_string());
            Role::Feature(name.to_string())
        } else if let Some(f) =
            name.strip_prefix(roles.feature_prefix.as_str()).filter(|_| !roles.feature_prefix.is_empty())
        {
            features.push(f.to_string());
            Role::Feature(f.to_string())
        } else if let Some(l) =
            name.strip_prefix(roles.legit_prefix.as_str()).filter(|_| !roles.legit_prefix.is_empty())
        {
            legit.push(l.to_string());
            Role::Legit(l.to_string())
        } else {
            Role::Ignored
        };
        cols.push(role);
    }
    for (what, name) in [("group", &roles.group), ("label", &roles.label)] {
        if !header.iter().any(|h| h == name) {
            return Err(Error::Parse { line: 1, message: format!("no {what} column `{name}`") });
        }
    }
    let unique: BTreeSet<&String> = features.iter().chain(&legit).collect();
    if unique.len() != features.len() + legit.len() {
        return Err(Error::Parse { line: 1, message: "duplicate feature or attribute name".into() });
    }

    let mut records = Vec::new();
    for (row_no, row) in reader.records().enumerate() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(row_no + 2, |p| p.line() as usize);
            parse_err(line, e)
        })?;
        let line = row.position().map_or(row_no + 2, |p| p.line() as usize);
        let bad = |message: String| Error::Parse { line, message };
        let mut id = (row_no + 1).to_string();
        let (mut group, mut label, mut score) = (None, None, None);
        let mut feats = BTreeMap::new();
        let mut attrs = BTreeMap::new();
        for (role, value) in cols.iter().zip(row.iter()) {
            match role {
                Role::Id => id = value.to_string(),
                Role::Group => {
                    if value.is_empty() {
                        return Err(bad("empty group".into()));
                    }
                    group = Some(value.to_string());
                }
                Role::Label => {
                    label = Some(match value {
                        "0" => 0,
                        "1" => 1,
                        _ => return Err(bad(format!("label `{value}` is not 0 or 1"))),
                    })
                }
                Role::Score => {
                    if !value.is_empty() {
                        let p: f64 = value.parse().map_err(|_| bad(format!("score `{value}` is not a number")))?;
                        if !(0.0..=1.0).contains(&p) {
                            return Err(bad(format!("score {p} outside [0,1]")));
                        }
                        score = Some(p);
                    }
                }
                Role::Feature(name) => {
                    let v: f64 =
                        value.parse().map_err(|_| bad(format!("feature `{name}` value `{value}` is not a number")))?;
                    if !v.is_finite() {
                        return Err(bad(format!("feature `{name}` is not finite")));
                    }
                    feats.insert(name.clone(), v);
                }
                Role::Legit(name) => {
                    attrs.insert(name.clone(), value.to_string());
                }
                Role::Ignored => {}
            }
        }
        let (Some(group), Some(label)) = (group, label) else {
            return Err(bad("missing group or label".into()));
        };
        let mut r = Record::new(id, score, label, group).map_err(|e| bad(e.to_string()))?;
        r.features = feats;
        r.legit = attrs;
        records.push(r);
    }
    Dataset::new(records, legit, features)
}

fn parse_err(line: usize, e: csv::Error) -> Error {
    Error::Parse { line, message: e.to_string() }
}

/// Writes a dataset in the canonical layout `id,group,label[,score],l_*,x_*`.
/// Scores are written when every record has one.
pub fn write_csv(ds: &Dataset) -> Result<String> {
    let scored = ds.records().iter().all(|r| r.score.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string(), "group".into(), "label".into()];
    if scored {
        header.push("score".into());
    }
    header.extend(ds.legit_names().iter().map(|l| format!("l_{l}")));
    header.extend(ds.feature_names().iter().map(|f| format!("x_{f}")));
    w.write_record(&header)?;
    for r in ds.records() {
        let mut row = vec![r.id.clone(), r.group.clone(), r.label.to_string()];
        if scored {
            row.push(format!("{}", r.score.expect("checked")));
        }
        for l in ds.legit_names() {
            row.push(r.legit[l].clone());
        }
        for f in ds.feature_names() {
            let v = r.features.get(f).ok_or_else(|| Error::MissingFeature(f.clone()))?;
            row.push(format!("{v}"));
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Solver(e.to_string()))
}

/// A rule file: the rule plus what it was optimized for and how it did in training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<FairnessCriterion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilityMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_utility: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    pub rule: DecisionRule,
}

impl RuleDocument {
    pub fn bare(rule: DecisionRule) -> Self {
        Self { criterion: None, utility: None, training_utility: None, training_ratio: None, flags: Vec::new(), rule }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: Self = toml::from_str(text)?;
        doc.rule.validate()?;
        if let Some(c) = &doc.criterion {
            c.validate()?;
        }
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundForm, Cutoff, IntervalCutoff};

    const SAMPLE: &str = "group,label,score,l_job,x_age\na,1,0.9,x,30\nb,0,0.25,y,41.5\na,0,0.1,x,22\n";

    #[test]
    fn three_rows() {
        let ds = read_csv(SAMPLE.as_bytes(), &ColumnRoles::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.legit_names(), ["job".to_string()]);
        assert_eq!(ds.feature_names(), ["age".to_string()]);
        let r = &ds.records()[1];
        assert_eq!((r.id.as_str(), r.group.as_str(), r.label, r.score), ("2", "b", 0, Some(0.25)));
        assert_eq!(r.features["age"], 41.5);
        assert_eq!(r.legit["job"], "y");
    }

    #[test]
    fn bad_label_names_its_line() {
        let text = "group,label\na,2\n";
        match read_csv(text.as_bytes(), &ColumnRoles::default()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("label"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_score_and_ragged_rows() {
        let e = read_csv("group,label,score\na,1,0.5\na,1,1.5\n".as_bytes(), &ColumnRoles::default()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = read_csv("group,label\na,1\nb,0,7\n".as_bytes(), &ColumnRoles::default()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = read_csv("grp,label\na,1\n".as_bytes(), &ColumnRoles::default()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
    }

    #[test]
    fn custom_roles() {
        let roles = ColumnRoles {
            id: Some("pid".into()),
            group: "race".into(),
            label: "two_year_recid".into(),
            score: "p".into(),
            features: vec!["priors".into()],
            ..ColumnRoles::default()
        };
        let text = "pid,race,two_year_recid,priors,other\n17,c,1,3,zzz\n";
        let ds = read_csv(text.as_bytes(), &roles).unwrap();
        let r = &ds.records()[0];
        assert_eq!(r.id, "17");
        assert_eq!(r.score, None);
        assert_eq!(r.features["priors"], 3.0);
    }

    #[test]
    fn canonical_round_trip() {
        let ds = read_csv(SAMPLE.as_bytes(), &ColumnRoles::default()).unwrap();
        let text = write_csv(&ds).unwrap();
        let back = read_csv(text.as_bytes(), &ColumnRoles::default()).unwrap();
        assert_eq!(ds, back);
        assert_eq!(write_csv(&back).unwrap(), text);
    }

    #[test]
    fn rule_document_round_trip() {
        let inner = DecisionRule::GroupThreshold {
            groups: [("a".to_string(), Cutoff::new(0.3, 0.25)), ("b".to_string(), Cutoff::new(0.1 + 0.2, 1.0))].into(),
        };
        let other = DecisionRule::GroupInterval {
            groups: [(
                "a".to_string(),
                IntervalCutoff { form: BoundForm::Upper, threshold: 0.7, boundary_accept: 1.0 / 3.0 },
            )]
            .into(),
        };
        let rule = DecisionRule::Mixture {
            first: Box::new(inner),
            second: Box::new(other),
            weights: [("a".to_string(), 0.123456789012345), ("b".to_string(), 1.0)].into(),
        };
        let mut doc = RuleDocument::bare(rule);
        doc.training_utility = Some(2.0 / 3.0);
        let back = RuleDocument::from_toml(&doc.to_toml().unwrap()).unwrap();
        assert_eq!(doc, back);
    }
}
