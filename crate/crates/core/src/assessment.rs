//! Moral assessment of a decision context and its translation into a
//! statistical group fairness criterion.
//!
//! An assessment names what produces the subject's benefit (the decision or
//! the outcome), which attribute justifies unequal benefits, and which values
//! of that justifier are morally relevant. [`map_assessment`] turns that
//! triple into one of the eight [`CriterionKind`]s.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BenefitMatrix, CriterionKind, FairnessCriterion};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenefitSource {
    Decision,
    Outcome,
    /// Neither the decision nor the outcome drives the benefit.
    Unrelated,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "names", rename_all = "snake_case")]
pub enum Justifier {
    None,
    Outcome,
    Decision,
    Legitimate(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoralAssessment {
    pub benefit_source: BenefitSource,
    /// Which value of the benefit source is the advantage (0 or 1); report wording only.
    #[serde(default = "default_advantage")]
    pub advantage: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benefit_matrix: Option<BenefitMatrix>,
    pub justifier: Justifier,
    /// Morally relevant justifier values; only meaningful for outcome/decision justifiers.
    #[serde(default)]
    pub relevant_values: BTreeSet<u8>,
    pub group_attribute: String,
}

fn default_advantage() -> u8 {
    1
}

impl MoralAssessment {
    pub fn new(
        benefit_source: BenefitSource,
        justifier: Justifier,
        relevant_values: &[u8],
        group_attribute: &str,
    ) -> Self {
        Self {
            benefit_source,
            advantage: 1,
            benefit_matrix: None,
            justifier,
            relevant_values: relevant_values.iter().copied().collect(),
            group_attribute: group_attribute.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let clash = matches!(
            (self.benefit_source, &self.justifier),
            (BenefitSource::Decision, Justifier::Decision) | (BenefitSource::Outcome, Justifier::Outcome)
        );
        if clash {
            return Err(Error::InvalidAssessment(
                "the justifier, the group and the benefit must be distinct attributes".into(),
            ));
        }
        match &self.justifier {
            Justifier::Outcome | Justifier::Decision => {
                if self.relevant_values.is_empty() {
                    return Err(Error::InvalidAssessment("no morally relevant justifier values".into()));
                }
                if self.relevant_values.iter().any(|v| *v > 1) {
                    return Err(Error::InvalidAssessment("justifier values must be 0 or 1".into()));
                }
            }
            Justifier::None | Justifier::Legitimate(_) => {
                if !self.relevant_values.is_empty() {
                    return Err(Error::InvalidAssessment(
                        "relevant values apply only to outcome or decision justifiers".into(),
                    ));
                }
            }
        }
        if let Justifier::Legitimate(names) = &self.justifier {
            if names.is_empty() {
                return Err(Error::InvalidAssessment("legitimate justifier needs attribute names".into()));
            }
            if names.contains(&self.group_attribute) {
                return Err(Error::InvalidAssessment("the group attribute cannot justify its own inequality".into()));
            }
        }
        if self.advantage > 1 {
            return Err(Error::InvalidAssessment("advantage must be 0 or 1".into()));
        }
        Ok(())
    }

    /// The benefit matrix to use when checking FEC directly.
    pub fn benefit(&self) -> Result<BenefitMatrix> {
        match (self.benefit_matrix, self.benefit_source) {
            (Some(b), _) => Ok(b),
            (None, BenefitSource::Decision) => Ok(BenefitMatrix::from_decision(self.advantage)),
            (None, BenefitSource::Outcome) => Ok(BenefitMatrix::from_outcome(self.advantage)),
            (None, BenefitSource::Unrelated) => Err(Error::NoAppropriateCriterion),
        }
    }
}

/// Selects the group fairness criterion matching an assessment (gamma 1).
pub fn map_assessment(a: &MoralAssessment) -> Result<FairnessCriterion> {
    if a.benefit_source == BenefitSource::Unrelated {
        return Err(Error::NoAppropriateCriterion);
    }
    a.validate()?;
    let relevant: Vec<u8> = a.relevant_values.iter().copied().collect();
    use CriterionKind::*;
    let kind = match (a.benefit_source, &a.justifier, relevant.as_slice()) {
        (BenefitSource::Decision, Justifier::None, _) => Independence,
        (BenefitSource::Decision, Justifier::Legitimate(names), _) => {
            return FairnessCriterion::with_legit(ConditionalStatisticalParity, 1.0, names.clone());
        }
        (BenefitSource::Decision, Justifier::Outcome, [0, 1]) => Separation,
        (BenefitSource::Decision, Justifier::Outcome, [1]) => TprParity,
        (BenefitSource::Decision, Justifier::Outcome, [0]) => FprParity,
        (BenefitSource::Outcome, Justifier::Decision, [0, 1]) => Sufficiency,
        (BenefitSource::Outcome, Justifier::Decision, [1]) => PpvParity,
        (BenefitSource::Outcome, Justifier::Decision, [0]) => ForParity,
        _ => {
            return Err(Error::InvalidAssessment(format!(
                "no group fairness criterion for benefit {:?} with justifier {:?}",
                a.benefit_source, a.justifier
            )))
        }
    };
    FairnessCriterion::new(kind, 1.0)
}

/// Drops justifier values for which the benefit does not depend on the quantity being distributed.
pub fn prune_justifier_values(a: &MoralAssessment, b: &BenefitMatrix) -> Result<MoralAssessment> {
    let indifferent = |j: u8| match a.justifier {
        Justifier::Outcome => b.get(0, j) == b.get(1, j),
        Justifier::Decision => b.get(j, 0) == b.get(j, 1),
        _ => false,
    };
    if !matches!(a.justifier, Justifier::Outcome | Justifier::Decision) {
        return Err(Error::InvalidAssessment("pruning applies only to outcome or decision justifiers".into()));
    }
    let kept: BTreeSet<u8> = a.relevant_values.iter().copied().filter(|j| !indifferent(*j)).collect();
    if kept.is_empty() {
        return Err(Error::VacuousFec);
    }
    Ok(MoralAssessment { relevant_values: kept, benefit_matrix: Some(*b), ..a.clone() })
}

/// On-disk form: the assessment plus the criterion it maps to.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssessmentDocument {
    pub assessment: MoralAssessment,
    pub criterion: FairnessCriterion,
}

impl AssessmentDocument {
    pub fn new(assessment: MoralAssessment) -> Result<Self> {
        let criterion = map_assessment(&assessment)?;
        Ok(Self { assessment, criterion })
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: Self = toml::from_str(text)?;
        let criterion = map_assessment(&doc.assessment)?;
        if criterion.kind != doc.criterion.kind {
            return Err(Error::InvalidAssessment(format!(
                "stored criterion {} does not match the assessment ({})",
                doc.criterion.kind, criterion.kind
            )));
        }
        Ok(doc)
    }
}

struct Prompter<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> Prompter<R, W> {
    fn ask(&mut self, question: &str) -> Result<String> {
        loop {
            write!(self.output, "{question}\n> ")?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Err(Error::Aborted("input ended before the assessment was complete".into()));
            }
            let answer = line.trim();
            if answer.is_empty() || answer.starts_with('#') {
                continue;
            }
            return Ok(answer.to_string());
        }
    }

    fn say(&mut self, text: &str) -> Result<()> {
        writeln!(self.output, "{text}")?;
        Ok(())
    }

    /// Repeats the question until `parse` accepts the answer.
    fn ask_parsed<T>(&mut self, question: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<T> {
        loop {
            let answer = self.ask(question)?;
            match parse(&answer) {
                Ok(v) => return Ok(v),
                Err(why) => self.say(&format!("! {why}"))?,
            }
        }
    }
}

fn parse_binary(s: &str) -> std::result::Result<u8, String> {
    match s {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err("answer 0 or 1".into()),
    }
}

enum BenefitAnswer {
    Decision,
    Outcome,
    Matrix,
}

/// Walks through the assessment questions on `input`/`output`.
///
/// Answers may come from a terminal or from a script file (one answer per
/// line, `#` comments ignored). Invalid or contradictory answers are
/// explained and asked again; running out of input aborts.
pub fn run_wizard<R: BufRead, W: Write>(input: R, output: W) -> Result<MoralAssessment> {
    let mut p = Prompter { input, output };
    p.say("Fair decision assessment")?;

    let answer =
        p.ask_parsed("What produces the benefit for the decision subject? [decision / outcome / matrix]", |s| match s
            .to_ascii_lowercase()
            .as_str()
        {
            "decision" | "d" => Ok(BenefitAnswer::Decision),
            "outcome" | "y" => Ok(BenefitAnswer::Outcome),
            "matrix" | "m" => Ok(BenefitAnswer::Matrix),
            _ => Err("answer decision, outcome or matrix".into()),
        })?;
    let (benefit_source, advantage, benefit_matrix) = match answer {
        BenefitAnswer::Decision => {
            let adv = p.ask_parsed("Which decision value benefits the subject? [0 / 1]", parse_binary)?;
            (BenefitSource::Decision, adv, None)
        }
        BenefitAnswer::Outcome => {
            let adv = p.ask_parsed("Which outcome value benefits the subject? [0 / 1]", parse_binary)?;
            (BenefitSource::Outcome, adv, None)
        }
        BenefitAnswer::Matrix => {
            let b = p.ask_parsed("Benefit cells b(0,0) b(0,1) b(1,0) b(1,1):", |s| {
                s.parse::<BenefitMatrix>().map_err(|e| e.to_string())
            })?;
            let source = match (b.depends_on_decision(), b.depends_on_outcome()) {
                (true, false) => BenefitSource::Decision,
                (false, true) => BenefitSource::Outcome,
                _ => p.ask_parsed(
                    "The benefit varies with both; is it distributed through the decision or the outcome? [decision / outcome]",
                    |s| match s.to_ascii_lowercase().as_str() {
                        "decision" | "d" => Ok(BenefitSource::Decision),
                        "outcome" | "y" => Ok(BenefitSource::Outcome),
                        _ => Err("answer decision or outcome".into()),
                    },
                )?,
            };
            let adv = match source {
                BenefitSource::Decision => u8::from(b.get(1, 0) + b.get(1, 1) >= b.get(0, 0) + b.get(0, 1)),
                _ => u8::from(b.get(0, 1) + b.get(1, 1) >= b.get(0, 0) + b.get(1, 0)),
            };
            (source, adv, Some(b))
        }
    };

    let group_attribute = p.ask("Which column holds the protected group?")?;

    let justifier = loop {
        let j = p.ask_parsed(
            "Which attribute justifies unequal benefits? [none / outcome / decision / legitimate]",
            |s| match s.to_ascii_lowercase().as_str() {
                "none" | "-" => Ok(Justifier::None),
                "outcome" | "y" => Ok(Justifier::Outcome),
                "decision" | "d" => Ok(Justifier::Decision),
                "legitimate" | "l" => Ok(Justifier::Legitimate(Vec::new())),
                _ => Err("answer none, outcome, decision or legitimate".into()),
            },
        )?;
        let clash = matches!(
            (benefit_source, &j),
            (BenefitSource::Decision, Justifier::Decision) | (BenefitSource::Outcome, Justifier::Outcome)
        );
        let unsupported = matches!(
            (benefit_source, &j),
            (BenefitSource::Outcome, Justifier::None | Justifier::Legitimate(_))
                | (BenefitSource::Decision, Justifier::Decision)
        );
        if clash {
            p.say("! the justifier must differ from what produces the benefit")?;
        } else if unsupported {
            p.say("! an outcome-based benefit can only be justified by the decision")?;
        } else {
            break j;
        }
    };

    let justifier = match justifier {
        Justifier::Legitimate(_) => {
            let group = group_attribute.clone();
            let names = p.ask_parsed("Legitimate attribute names (comma separated):", move |s| {
                let names: Vec<String> = s.split(',').map(|n| n.trim().to_string()).filter(|n| !n.is_empty()).collect();
                if names.is_empty() {
                    Err("name at least one attribute".into())
                } else if names.contains(&group) {
                    Err("the group attribute cannot be a justifier".into())
                } else {
                    Ok(names)
                }
            })?;
            Justifier::Legitimate(names)
        }
        other => other,
    };

    let relevant_values: BTreeSet<u8> = match justifier {
        Justifier::Outcome | Justifier::Decision => {
            p.ask_parsed("Which justifier values are morally relevant? [0 / 1 / both]", |s| {
                match s.to_ascii_lowercase().as_str() {
                    "0" => Ok([0].into()),
                    "1" => Ok([1].into()),
                    "both" | "0,1" | "0 1" | "1,0" => Ok([0, 1].into()),
                    _ => Err("answer 0, 1 or both".into()),
                }
            })?
        }
        _ => BTreeSet::new(),
    };

    let mut assessment =
        MoralAssessment { benefit_source, advantage, benefit_matrix, justifier, relevant_values, group_attribute };
    if let (Some(b), Justifier::Outcome | Justifier::Decision) = (benefit_matrix, &assessment.justifier) {
        let before = assessment.relevant_values.clone();
        assessment = prune_justifier_values(&assessment, &b)?;
        if assessment.relevant_values != before {
            p.say("Benefit is constant for some justifier values; they are dropped from the constraint.")?;
        }
    }
    let criterion = map_assessment(&assessment)?;
    p.say(&format!("Criterion: {}", criterion.kind))?;
    p.say(&format!("Constraint: {}", criterion.kind.representation()))?;
    Ok(assessment)
}
