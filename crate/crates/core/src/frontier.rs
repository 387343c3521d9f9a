//! Sweeping the relaxation level `gamma` to trace utility against fairness.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{compute_rates_by, decision_maker_utility, disparity_ratio};
use crate::model::{CriterionKind, Dataset, DecisionRule, RateFamily};
use crate::optimizer::{optimize, OptimizationProblem};

/// One point of the tradeoff curve. Fields are `None` when the level is infeasible
/// or a value is undefined; `error` then says why.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub gamma: f64,
    /// Disparity ratio on the test split, or on training data when there is none.
    pub achieved_ratio: Option<f64>,
    pub train_ratio: Option<f64>,
    pub utility_train: Option<f64>,
    pub utility_test: Option<f64>,
    /// Headline rates keyed `<family>_<group>`, measured where `achieved_ratio` is.
    pub rates: BTreeMap<String, Option<f64>>,
    pub rule: Option<DecisionRule>,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrontierFormat {
    Csv,
    Svg,
}

impl std::str::FromStr for FrontierFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "svg" => Ok(Self::Svg),
            other => Err(Error::Usage(format!("unknown frontier format `{other}` (expected csv or svg)"))),
        }
    }
}

/// 0, 0.05, ..., 1. The four-fifths level 0.8 is on it.
pub fn default_gammas() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// Families shown per group for a criterion.
pub fn headline_families(kind: CriterionKind) -> &'static [RateFamily] {
    match kind {
        CriterionKind::ConditionalStatisticalParity => &[RateFamily::PositiveRate],
        k => k.families(),
    }
}

/// rule, training utility, training ratio
type Solved = (DecisionRule, f64, Option<f64>);

/// Solves the problem at every level of `gammas` (ascending, within [0,1]);
/// 0 and 1 are added when missing. An infeasible level is recorded, not fatal.
///
/// A rule feasible at a higher level is also feasible at every lower one, so when
/// a higher level happens to score better its rule is carried down. This keeps
/// training utility non-increasing even where the solver is approximate.
pub fn sweep(problem: &OptimizationProblem, gammas: &[f64], test: Option<&Dataset>) -> Result<Vec<FrontierPoint>> {
    if gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(Error::Usage("gamma grid must lie in [0,1]".into()));
    }
    if gammas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Usage("gamma grid must be sorted ascending".into()));
    }
    let mut grid: Vec<f64> = gammas.to_vec();
    if grid.first() != Some(&0.0) {
        grid.insert(0, 0.0);
    }
    if grid.last() != Some(&1.0) {
        grid.push(1.0);
    }
    grid.dedup();

    let solved: Vec<Result<Solved>> =
        grid.par_iter().map(|&g| optimize(&problem.at_gamma(g)?).map(|s| (s.rule, s.utility, s.ratio))).collect();

    let mut raw: Vec<(f64, std::result::Result<Solved, String>)> = Vec::new();
    for (g, r) in grid.iter().zip(solved) {
        match r {
            Ok(x) => raw.push((*g, Ok(x))),
            Err(
                e @ (Error::Infeasible { .. } | Error::UndefinedMetric(_) | Error::DegenerateStratification { .. }),
            ) => raw.push((*g, Err(e.to_string()))),
            Err(e) => return Err(e),
        }
    }

    // carry better rules down from higher levels
    let mut carried: Option<Solved> = None;
    for (_, r) in raw.iter_mut().rev() {
        if let Ok(cur) = r {
            match &carried {
                Some(c) if c.1 > cur.1 => *cur = c.clone(),
                _ => carried = Some(cur.clone()),
            }
        }
    }

    let legit = &problem.criterion.legit_names;
    let families = headline_families(problem.criterion.kind);
    let measured = test.unwrap_or(&problem.dataset);
    raw.into_iter()
        .map(|(gamma, r)| {
            let (rule, utility_train, train_ratio) = match r {
                Ok(x) => x,
                Err(e) => {
                    return Ok(FrontierPoint {
                        gamma,
                        achieved_ratio: None,
                        train_ratio: None,
                        utility_train: None,
                        utility_test: None,
                        rates: headline_keys(families, measured).map(|k| (k, None)).collect(),
                        rule: None,
                        error: Some(e),
                    })
                }
            };
            let rates = compute_rates_by(measured, &rule, legit)?;
            let achieved_ratio = match test {
                Some(_) => disparity_ratio(&rates, &problem.criterion).ok().map(|d| d.ratio),
                None => train_ratio,
            };
            let utility_test = test.map(|t| decision_maker_utility(t, &rule, &problem.utility)).transpose()?;
            let mut table = BTreeMap::new();
            for f in families {
                for g in measured.groups() {
                    table.insert(format!("{}_{g}", f.name()), rates.rate(*f, g));
                }
            }
            Ok(FrontierPoint {
                gamma,
                achieved_ratio,
                train_ratio,
                utility_train: Some(utility_train),
                utility_test,
                rates: table,
                rule: Some(rule),
                error: None,
            })
        })
        .collect()
}

fn headline_keys<'a>(families: &'a [RateFamily], ds: &'a Dataset) -> impl Iterator<Item = String> + 'a {
    families.iter().flat_map(move |f| ds.groups().iter().map(move |g| format!("{}_{g}", f.name())))
}

pub fn emit_frontier(points: &[FrontierPoint], format: FrontierFormat) -> Result<String> {
    if points.is_empty() {
        return Err(Error::Usage("no frontier points to emit".into()));
    }
    Ok(match format {
        FrontierFormat::Csv => to_csv(points),
        FrontierFormat::Svg => to_svg(points),
    })
}

fn rate_columns(points: &[FrontierPoint]) -> Vec<String> {
    points[0].rates.keys().cloned().collect()
}

fn cell(v: Option<f64>) -> String {
    // `{}` on f64 prints the shortest string that parses back to the same value
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn to_csv(points: &[FrontierPoint]) -> String {
    let cols = rate_columns(points);
    let mut out = String::from("gamma,achieved_ratio,utility_train,utility_test");
    for c in &cols {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for p in points {
        let mut row = vec![cell(Some(p.gamma)), cell(p.achieved_ratio), cell(p.utility_train), cell(p.utility_test)];
        row.extend(cols.iter().map(|c| cell(p.rates.get(c).copied().flatten())));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Reads back what [`emit_frontier`] wrote as csv. Rules, training ratios and
/// error messages are not part of the csv and come back empty.
pub fn parse_frontier_csv(text: &str) -> Result<Vec<FrontierPoint>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let fixed = ["gamma", "achieved_ratio", "utility_train", "utility_test"];
    if header.len() < fixed.len() || header.iter().zip(fixed).any(|(a, b)| a != b) {
        return Err(Error::Parse { line: 1, message: format!("frontier header must start with {}", fixed.join(",")) });
    }
    let mut points = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| Error::Parse { line, message: format!("`{s}` is not a number") })
        };
        let gamma = num(&row[0])?.ok_or_else(|| Error::Parse { line, message: "missing gamma".into() })?;
        let mut rates = BTreeMap::new();
        for (name, v) in header.iter().zip(row.iter()).skip(fixed.len()) {
            rates.insert(name.to_string(), num(v)?);
        }
        points.push(FrontierPoint {
            gamma,
            achieved_ratio: num(&row[1])?,
            train_ratio: None,
            utility_train: num(&row[2])?,
            utility_test: num(&row[3])?,
            rates,
            rule: None,
            error: None,
        });
    }
    Ok(points)
}

const PALETTE: [&str; 8] = ["#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6a4c93", "#00798c", "#8c564b", "#555555"];
const W: f64 = 440.0;
const H: f64 = 300.0;
const PAD: f64 = 50.0;

struct Chart {
    x0: f64,
    ylo: f64,
    yhi: f64,
}

impl Chart {
    fn px(&self, gamma: f64) -> f64 {
        self.x0 + PAD + gamma * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        let t = if self.yhi > self.ylo { (y - self.ylo) / (self.yhi - self.ylo) } else { 0.5 };
        H - PAD - t * (H - 2.0 * PAD) + 30.0
    }

    fn frame(&self, out: &mut String, title: &str, ylabel: &str) {
        let (l, r) = (self.px(0.0), self.px(1.0));
        let (b, t) = (self.py(self.ylo), self.py(self.yhi));
        let _ = writeln!(out, r#"<text x="{:.1}" y="22" class="title">{title}</text>"#, self.x0 + PAD);
        let _ = writeln!(out, r#"<line x1="{l:.1}" y1="{b:.1}" x2="{r:.1}" y2="{b:.1}" class="axis"/>"#);
        let _ = writeln!(out, r#"<line x1="{l:.1}" y1="{b:.1}" x2="{l:.1}" y2="{t:.1}" class="axis"/>"#);
        for i in 0..=4 {
            let g = i as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" class="tick" text-anchor="middle">{g}</text>"#,
                self.px(g),
                b + 16.0
            );
            let y = self.ylo + (self.yhi - self.ylo) * g;
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" class="tick" text-anchor="end">{y:.3}</text>"#,
                l - 4.0,
                self.py(y) + 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" class="tick" text-anchor="middle">gamma</text>"#,
            (l + r) / 2.0,
            b + 34.0
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" class="tick">{ylabel}</text>"#, l, t - 8.0);
    }

    fn series(&self, out: &mut String, pts: &[(f64, f64)], color: &str) {
        if pts.is_empty() {
            return;
        }
        let path: Vec<String> = pts.iter().map(|&(g, y)| format!("{:.2},{:.2}", self.px(g), self.py(y))).collect();
        let _ =
            writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, path.join(" "));
        for &(g, y) in pts {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, self.px(g), self.py(y));
        }
    }

    fn legend(&self, out: &mut String, i: usize, label: &str, color: &str) {
        let x = self.px(1.0) + 8.0;
        let y = 50.0 + 16.0 * i as f64;
        let _ = writeln!(out, r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{color}"/>"#, y - 9.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{y:.1}" class="tick">{}</text>"#, x + 14.0, escape(label));
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.1).max(1e-3);
    (lo - pad, hi + pad)
}

fn to_svg(points: &[FrontierPoint]) -> String {
    let cols = rate_columns(points);
    let total_w = 2.0 * (W + 140.0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{}" viewBox="0 0 {total_w} {}">"#,
        H + 40.0,
        H + 40.0
    );
    out.push_str("<style>.title{font:bold 14px sans-serif}.tick{font:11px sans-serif;fill:#333}.axis{stroke:#333;stroke-width:1}.mark{font:11px sans-serif;fill:#000}</style>\n");
    out.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    out.push('\n');

    let rates = Chart { x0: 0.0, ylo: 0.0, yhi: 1.0 };
    rates.frame(&mut out, "Group rates by gamma", "rate");
    for (i, c) in cols.iter().enumerate() {
        let pts: Vec<(f64, f64)> =
            points.iter().filter_map(|p| Some((p.gamma, p.rates.get(c).copied().flatten()?))).collect();
        let color = PALETTE[i % PALETTE.len()];
        rates.series(&mut out, &pts, color);
        rates.legend(&mut out, i, c, color);
    }

    let values = points.iter().flat_map(|p| [p.utility_train, p.utility_test]).flatten();
    let (ylo, yhi) = span(values);
    let util = Chart { x0: W + 140.0, ylo, yhi };
    util.frame(&mut out, "Utility by gamma", "utility");
    type Pick = fn(&FrontierPoint) -> Option<f64>;
    let series: [(&str, Pick); 2] = [("train", |p| p.utility_train), ("test", |p| p.utility_test)];
    let mut shown = 0;
    for (name, get) in series {
        let pts: Vec<(f64, f64)> = points.iter().filter_map(|p| Some((p.gamma, get(p)?))).collect();
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[shown];
        util.series(&mut out, &pts, color);
        util.legend(&mut out, shown, name, color);
        shown += 1;
    }
    // mark the unconstrained and the fully fair rules
    let headline = |p: &FrontierPoint| p.utility_test.or(p.utility_train);
    for (gamma, label) in [(0.0, "unconstrained"), (1.0, "fair")] {
        if let Some(p) = points.iter().find(|p| p.gamma == gamma) {
            if let Some(y) = headline(p) {
                let (cx, cy) = (util.px(gamma), util.py(y));
                let _ = writeln!(
                    out,
                    r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="6" fill="none" stroke="black" stroke-width="1.5"/>"#
                );
                let anchor = if gamma == 0.0 { "start" } else { "end" };
                let _ = writeln!(
                    out,
                    r#"<text x="{cx:.2}" y="{:.2}" class="mark" text-anchor="{anchor}">{label} ({y:.3})</text>"#,
                    cy - 10.0
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
