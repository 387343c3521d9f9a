//! Exhaustive reference search used to check the optimizer.
//!
//! Candidates are built directly from the records: every distinct score is
//! tried as a threshold (both interval forms where applicable) with the
//! boundary probability on a fixed grid, plus boundary probabilities found
//! by bisection so that rates can meet each other exactly. The search then
//! enumerates combinations over that candidate set. It shares no code with
//! the fast solvers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{decision_maker_utility, min_pair_ratio, GroupCell};
use crate::model::{
    BoundForm, CriterionKind, Cutoff, Dataset, DecisionRule, IntervalCutoff, RateFamily, Record, UtilityMatrix,
};

use super::{OptimizationProblem, Solution};

pub const GRID_STEP_ENV: &str = "FAIRGATE_GRID_STEP";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    /// Resolution of boundary probabilities and mixture weights.
    pub grid_step: f64,
    pub max_records: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let grid_step = std::env::var(GRID_STEP_ENV)
            .ok()
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|s| *s > 0.0 && *s <= 0.5)
            .unwrap_or(1e-3);
        Self { grid_step, max_records: 500 }
    }
}

impl OracleConfig {
    fn q_grid(&self) -> Vec<f64> {
        let steps = (1.0 / self.grid_step).round() as usize;
        (0..=steps).map(|i| i as f64 / steps as f64).collect()
    }
}

/// Utility change bound per unit move of every group's rates; turns the oracle's
/// grid resolution into a utility tolerance.
pub fn utility_lipschitz(u: &UtilityMatrix) -> f64 {
    2.0 * (u.positive_gain().abs() + u.negative_gain().abs())
}

/// Outcome of checking an optimized rule against the oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub optimizer: f64,
    /// `None` when the oracle finds nothing feasible.
    pub oracle: Option<f64>,
    pub tolerance: f64,
    pub ratio_ok: bool,
    pub passed: bool,
}

/// Re-solves with the oracle and compares utilities within
/// `1e-9 + grid_step * utility_lipschitz(u)`; also checks the training ratio.
pub fn verify_solution(problem: &OptimizationProblem, solution: &Solution, cfg: &OracleConfig) -> Result<Verification> {
    let oracle = match brute_force_oracle_with(problem, cfg) {
        Ok(rule) => Some(decision_maker_utility(&problem.dataset, &rule, &problem.utility)?),
        Err(Error::Infeasible { .. }) => None,
        Err(e) => return Err(e),
    };
    let tolerance = 1e-9 + cfg.grid_step * utility_lipschitz(&problem.utility);
    let ratio_ok = solution.ratio.is_none_or(|r| r >= problem.criterion.gamma - 1e-9);
    let passed = ratio_ok && oracle.is_some_and(|o| (o - solution.utility).abs() <= tolerance);
    Ok(Verification { optimizer: solution.utility, oracle, tolerance, ratio_ok, passed })
}

pub fn brute_force_oracle(problem: &OptimizationProblem) -> Result<DecisionRule> {
    brute_force_oracle_with(problem, &OracleConfig::default())
}

pub fn brute_force_oracle_with(problem: &OptimizationProblem, cfg: &OracleConfig) -> Result<DecisionRule> {
    let ds = &problem.dataset;
    if ds.len() > cfg.max_records {
        return Err(Error::TooLarge { records: ds.len(), limit: cfg.max_records });
    }
    ds.require_scores()?;
    let gamma = problem.criterion.gamma;
    let u = &problem.utility;
    use CriterionKind::*;
    match problem.criterion.kind {
        Independence => single(ds, RateFamily::PositiveRate, false, gamma, u, cfg),
        TprParity => single(ds, RateFamily::Tpr, false, gamma, u, cfg),
        FprParity => single(ds, RateFamily::Fpr, false, gamma, u, cfg),
        PpvParity => single(ds, RateFamily::Ppv, true, gamma, u, cfg),
        ForParity => single(ds, RateFamily::For, true, gamma, u, cfg),
        Separation => separation(ds, gamma, u, cfg),
        Sufficiency => sufficiency(ds, gamma, u, cfg),
        ConditionalStatisticalParity => conditional(problem, cfg),
    }
}

/// One threshold (and form) with the boundary probability left free.
#[derive(Clone, Debug)]
struct Segment {
    form: BoundForm,
    threshold: f64,
    /// Cells at boundary probability 0 and 1; everything in between is linear.
    at0: GroupCell,
    at1: GroupCell,
    /// Records decided with certainty (accepted, rejected) at q=0, interior q, q=1.
    sure: [(usize, usize); 3],
}

fn prob(form: Option<BoundForm>, threshold: f64, q: f64, score: f64) -> f64 {
    match form {
        None => Cutoff::new(threshold, q).probability(score),
        Some(form) => IntervalCutoff { form, threshold, boundary_accept: q }.probability(score),
    }
}

fn cell_of(records: &[&Record], f: impl Fn(f64) -> f64) -> GroupCell {
    let mut c = GroupCell::default();
    for r in records {
        let p = f(r.score.expect("scores checked"));
        c.n += 1.0;
        c.accepted += p;
        if r.label == 1 {
            c.n_pos += 1.0;
            c.accepted_pos += p;
        } else {
            c.n_neg += 1.0;
            c.accepted_neg += p;
        }
    }
    c
}

impl Segment {
    fn new(records: &[&Record], form: Option<BoundForm>, threshold: f64) -> Self {
        let sure_at = |q: f64| {
            let ps = records.iter().map(|r| prob(form, threshold, q, r.score.expect("scores checked")));
            ps.fold((0, 0), |(a, z), p| (a + usize::from(p == 1.0), z + usize::from(p == 0.0)))
        };
        Self {
            form: form.unwrap_or(BoundForm::Lower),
            threshold,
            at0: cell_of(records, |s| prob(form, threshold, 0.0, s)),
            at1: cell_of(records, |s| prob(form, threshold, 1.0, s)),
            sure: [sure_at(0.0), sure_at(0.5), sure_at(1.0)],
        }
    }

    fn cell(&self, q: f64) -> GroupCell {
        let mix = |a: f64, b: f64| a + q * (b - a);
        GroupCell {
            n: self.at0.n,
            n_pos: self.at0.n_pos,
            n_neg: self.at0.n_neg,
            accepted: mix(self.at0.accepted, self.at1.accepted),
            accepted_pos: mix(self.at0.accepted_pos, self.at1.accepted_pos),
            accepted_neg: mix(self.at0.accepted_neg, self.at1.accepted_neg),
        }
    }

    fn sure(&self, q: f64) -> (usize, usize) {
        if q <= 0.0 {
            self.sure[0]
        } else if q >= 1.0 {
            self.sure[2]
        } else {
            self.sure[1]
        }
    }

    /// Rate at `q`; for a constrained PPV (FOR) some record must be surely accepted (rejected).
    fn rate(&self, family: RateFamily, q: f64, strict: bool) -> Option<f64> {
        if strict {
            let (acc, rej) = self.sure(q);
            match family {
                RateFamily::Ppv if acc == 0 => return None,
                RateFamily::For if rej == 0 => return None,
                _ => {}
            }
        }
        self.cell(q).rate(family)
    }

    fn utility(&self, q: f64, u: &UtilityMatrix) -> f64 {
        let c = self.cell(q);
        let rej_pos = c.n_pos - c.accepted_pos;
        let rej_neg = c.n_neg - c.accepted_neg;
        c.accepted_pos * u.get(1, 1) + c.accepted_neg * u.get(1, 0) + rej_pos * u.get(0, 1) + rej_neg * u.get(0, 0)
    }

    /// Sub-range of `range` where `family` stays in `[lo, hi]`, located by bisection.
    fn interval_where(
        &self,
        family: RateFamily,
        lo: f64,
        hi: f64,
        strict: bool,
        range: (f64, f64),
    ) -> Option<(f64, f64)> {
        let tol = 1e-10;
        let val = |q: f64| self.rate(family, q, strict);
        let inside = |q: f64| val(q).is_some_and(|v| v >= lo - tol && v <= hi + tol);
        let (a, b) = range;
        if a > b {
            return None;
        }
        if a == b || val(0.5 * (a + b)).is_none() {
            // Only the ends can be defined.
            return [b, a].into_iter().find(|q| inside(*q)).map(|q| (q, q));
        }
        // On the open range the rate is defined and monotone; step off undefined ends.
        let l = if val(a).is_some() { a } else { a + (b - a) * 1e-12 };
        let r = if val(b).is_some() { b } else { b - (b - a) * 1e-12 };
        let v = |q: f64| val(q).expect("defined inside the range");
        let (vl, vr) = (v(l), v(r));
        let first = |pred: &dyn Fn(f64) -> bool| {
            let (mut x, mut y) = (l, r);
            for _ in 0..100 {
                let m = 0.5 * (x + y);
                if pred(m) {
                    y = m;
                } else {
                    x = m;
                }
            }
            y
        };
        let last = |pred: &dyn Fn(f64) -> bool| {
            let (mut x, mut y) = (l, r);
            for _ in 0..100 {
                let m = 0.5 * (x + y);
                if pred(m) {
                    x = m;
                } else {
                    y = m;
                }
            }
            x
        };
        let (start, end) = if vr >= vl {
            if vr < lo - tol || vl > hi + tol {
                return None;
            }
            (
                if vl >= lo - tol { l } else { first(&|q| v(q) >= lo) },
                if vr <= hi + tol { r } else { last(&|q| v(q) <= hi) },
            )
        } else {
            if vl < lo - tol || vr > hi + tol {
                return None;
            }
            (
                if vl <= hi + tol { l } else { first(&|q| v(q) <= hi) },
                if vr >= lo - tol { r } else { last(&|q| v(q) >= lo) },
            )
        };
        if start <= end {
            Some((start, end))
        } else {
            [start, end].into_iter().find(|q| inside(*q)).map(|q| (q, q))
        }
    }

    /// `q` in `[0, 1]` where the rate equals `t`, if the segment reaches it.
    fn solve(&self, family: RateFamily, t: f64, strict: bool) -> Option<f64> {
        self.interval_where(family, t, t, strict, (0.0, 1.0)).map(|(a, _)| a)
    }
}

#[derive(Clone, Debug)]
struct GroupCands {
    name: String,
    segments: Vec<Segment>,
}

fn group_candidates(ds: &Dataset, forms: &[Option<BoundForm>]) -> Vec<GroupCands> {
    ds.groups()
        .iter()
        .map(|g| {
            let records: Vec<&Record> = ds.group_records(g).collect();
            let scores: BTreeSet<u64> = records.iter().map(|r| r.score.expect("scores checked").to_bits()).collect();
            let mut segments = Vec::new();
            for form in forms {
                for bits in &scores {
                    segments.push(Segment::new(&records, *form, f64::from_bits(*bits)));
                }
            }
            GroupCands { name: g.clone(), segments }
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
struct Point {
    seg: usize,
    q: f64,
    value: f64,
    utility: f64,
}

/// Maximum of `utility` over points sorted by value, answered by a sparse table.
struct RangeMax {
    values: Vec<f64>,
    table: Vec<Vec<usize>>,
    points: Vec<Point>,
}

impl RangeMax {
    fn new(mut points: Vec<Point>) -> Self {
        points.sort_by(|a, b| a.value.total_cmp(&b.value));
        let n = points.len();
        let mut table = vec![(0..n).collect::<Vec<_>>()];
        let mut width = 1;
        while 2 * width <= n {
            let prev = table.last().expect("nonempty");
            let next = (0..=n - 2 * width)
                .map(|i| {
                    let (a, b) = (prev[i], prev[i + width]);
                    if points[b].utility > points[a].utility {
                        b
                    } else {
                        a
                    }
                })
                .collect();
            table.push(next);
            width *= 2;
        }
        Self { values: points.iter().map(|p| p.value).collect(), table, points }
    }

    fn best(&self, lo: f64, hi: f64) -> Option<Point> {
        let tol = 1e-10;
        let i = self.values.partition_point(|v| *v < lo - tol);
        let j = self.values.partition_point(|v| *v <= hi + tol);
        if i >= j {
            return None;
        }
        let len = j - i;
        let k = usize::BITS as usize - 1 - len.leading_zeros() as usize;
        let (a, b) = (self.table[k][i], self.table[k][j - (1 << k)]);
        Some(if self.points[b].utility > self.points[a].utility { self.points[b] } else { self.points[a] })
    }
}

fn best_free(g: &GroupCands, qs: &[f64], u: &UtilityMatrix) -> Point {
    let mut best: Option<Point> = None;
    for (si, s) in g.segments.iter().enumerate() {
        for &q in [0.0, 1.0].iter().chain(qs) {
            let p = Point { seg: si, q, value: 0.0, utility: s.utility(q, u) };
            if best.is_none_or(|b| p.utility > b.utility + 1e-12) {
                best = Some(p);
            }
        }
    }
    best.expect("groups are nonempty")
}

fn threshold_rule(groups: &[GroupCands], picks: &[(usize, f64)], interval: bool) -> DecisionRule {
    if interval {
        DecisionRule::GroupInterval {
            groups: groups
                .iter()
                .zip(picks)
                .map(|(g, (si, q))| {
                    let s = &g.segments[*si];
                    (g.name.clone(), IntervalCutoff { form: s.form, threshold: s.threshold, boundary_accept: *q })
                })
                .collect(),
        }
    } else {
        DecisionRule::GroupThreshold {
            groups: groups
                .iter()
                .zip(picks)
                .map(|(g, (si, q))| (g.name.clone(), Cutoff::new(g.segments[*si].threshold, *q)))
                .collect(),
        }
    }
}

fn window_hi(m: f64, gamma: f64) -> f64 {
    if gamma >= 1.0 {
        m
    } else {
        m / gamma
    }
}

/// Best picks for one rate family, or `None` if no combination reaches `gamma`.
fn single_picks(
    groups: &[GroupCands],
    family: RateFamily,
    strict: bool,
    gamma: f64,
    u: &UtilityMatrix,
    cfg: &OracleConfig,
) -> Option<Vec<(usize, f64)>> {
    let qs = cfg.q_grid();
    let free: Vec<Point> = groups.iter().map(|g| best_free(g, &qs, u)).collect();
    let defined = |g: &GroupCands| {
        g.segments.iter().any(|s| s.cell(0.5).rate(family).is_some() || s.cell(1.0).rate(family).is_some())
    };
    let constrained: Vec<bool> = groups.iter().map(|g| gamma > 0.0 && defined(g)).collect();
    if !constrained.iter().any(|c| *c) {
        return Some(free.iter().map(|p| (p.seg, p.q)).collect());
    }
    let strict = strict && gamma > 0.0;
    // values reachable at segment ends, and their gamma images
    let mut targets: Vec<f64> = Vec::new();
    for g in groups {
        for s in &g.segments {
            for q in [0.0, 1.0] {
                if let Some(v) = s.rate(family, q, strict) {
                    targets.push(v);
                    targets.push(v * gamma);
                    if v / gamma <= 1.0 {
                        targets.push(v / gamma);
                    }
                }
            }
        }
    }
    targets.sort_by(f64::total_cmp);
    targets.dedup_by(|a, b| (*a - *b).abs() <= 1e-13);

    let tables: Vec<Option<RangeMax>> = groups
        .iter()
        .zip(&constrained)
        .map(|(g, c)| {
            c.then(|| {
                let mut pts = Vec::new();
                for (si, s) in g.segments.iter().enumerate() {
                    let mut qset: Vec<f64> = qs.clone();
                    qset.extend(targets.iter().filter_map(|t| s.solve(family, *t, strict)));
                    for q in qset {
                        if let Some(v) = s.rate(family, q, strict) {
                            pts.push(Point { seg: si, q, value: v, utility: s.utility(q, u) });
                        }
                    }
                }
                RangeMax::new(pts)
            })
        })
        .collect();
    let mut anchors: Vec<f64> = tables.iter().flatten().flat_map(|t| t.values.iter().copied()).collect();
    anchors.sort_by(f64::total_cmp);
    anchors.dedup();

    let mut best: Option<(f64, Vec<(usize, f64)>)> = None;
    for m in anchors {
        let hi = window_hi(m, gamma);
        let mut total = 0.0;
        let mut picks = Vec::with_capacity(groups.len());
        let mut ok = true;
        for (gi, t) in tables.iter().enumerate() {
            let p = match t {
                Some(t) => match t.best(m, hi) {
                    Some(p) => p,
                    None => {
                        ok = false;
                        break;
                    }
                },
                None => free[gi],
            };
            total += p.utility;
            picks.push((p.seg, p.q));
        }
        if ok && best.as_ref().is_none_or(|(b, _)| total > *b + 1e-12) {
            best = Some((total, picks));
        }
    }
    best.map(|(_, p)| p)
}

fn infeasible(gamma: f64, feasible: impl Fn(f64) -> bool) -> Error {
    let (mut lo, mut hi) = (0.0, gamma);
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Error::Infeasible { gamma, max_gamma: lo }
}

fn single(
    ds: &Dataset,
    family: RateFamily,
    interval: bool,
    gamma: f64,
    u: &UtilityMatrix,
    cfg: &OracleConfig,
) -> Result<DecisionRule> {
    let forms: &[Option<BoundForm>] =
        if interval { &[Some(BoundForm::Lower), Some(BoundForm::Upper)] } else { &[None] };
    let groups = group_candidates(ds, forms);
    if interval && gamma > 0.0 {
        check_single_scores(&groups)?;
    }
    match single_picks(&groups, family, interval, gamma, u, cfg) {
        Some(picks) => Ok(threshold_rule(&groups, &picks, interval)),
        None => Err(infeasible(gamma, |g| single_picks(&groups, family, interval, g, u, cfg).is_some())),
    }
}

fn check_single_scores(groups: &[GroupCands]) -> Result<()> {
    // Interval candidates come in pairs, one per form.
    match groups.iter().find(|g| g.segments.len() < 4) {
        Some(g) => Err(Error::UndefinedMetric(format!("group `{}` has a single distinct score", g.name))),
        None => Ok(()),
    }
}

// ---------- separation: both error rates ----------

type Pt = (f64, f64);

fn turn(o: Pt, a: Pt, b: Pt) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn monotone_chain(mut pts: Vec<Pt>) -> Vec<Pt> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut h: Vec<Pt> = Vec::new();
    for pass in 0..2 {
        let start = h.len();
        let iter: Box<dyn Iterator<Item = &Pt>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while h.len() >= start + 2 && turn(h[h.len() - 2], h[h.len() - 1], p) <= 0.0 {
                h.pop();
            }
            h.push(p);
        }
        h.pop();
    }
    h
}

fn in_polygon(poly: &[Pt], p: Pt) -> bool {
    let tol = 1e-10;
    match poly.len() {
        0 => false,
        1 => (poly[0].0 - p.0).abs() <= tol && (poly[0].1 - p.1).abs() <= tol,
        2 => {
            let (a, b) = (poly[0], poly[1]);
            let len = ((b.0 - a.0).hypot(b.1 - a.1)).max(1e-300);
            turn(a, b, p).abs() / len <= tol
                && p.0 >= a.0.min(b.0) - tol
                && p.0 <= a.0.max(b.0) + tol
                && p.1 >= a.1.min(b.1) - tol
                && p.1 <= a.1.max(b.1) + tol
        }
        n => (0..n).all(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let len = ((b.0 - a.0).hypot(b.1 - a.1)).max(1e-300);
            turn(a, b, p) / len >= -tol
        }),
    }
}

struct Roc {
    name: String,
    /// Staircase vertices as `(fpr, tpr)` with their threshold realizations.
    vertices: Vec<(Pt, Cutoff)>,
    hull: Vec<Pt>,
    n_pos: f64,
    n_neg: f64,
}

fn roc(ds: &Dataset, g: &str) -> Roc {
    let records: Vec<&Record> = ds.group_records(g).collect();
    let scores: BTreeSet<u64> = records.iter().map(|r| r.score.expect("scores checked").to_bits()).collect();
    let mut cutoffs = vec![Cutoff::new(f64::from_bits(*scores.last().expect("nonempty")), 0.0)];
    cutoffs.extend(scores.iter().rev().map(|b| Cutoff::new(f64::from_bits(*b), 1.0)));
    let mut vertices = Vec::new();
    let mut n_pos = 0.0;
    let mut n_neg = 0.0;
    for c in cutoffs {
        let cell = cell_of(&records, |s| c.probability(s));
        n_pos = cell.n_pos;
        n_neg = cell.n_neg;
        vertices.push(((cell.fpr().unwrap_or(0.0), cell.tpr().unwrap_or(0.0)), c));
    }
    let hull = monotone_chain(vertices.iter().map(|v| v.0).collect());
    Roc { name: g.to_string(), vertices, hull, n_pos, n_neg }
}

impl Roc {
    fn utility(&self, p: Pt, u: &UtilityMatrix) -> f64 {
        let (fpr, tpr) = p;
        self.n_pos * (tpr * u.get(1, 1) + (1.0 - tpr) * u.get(0, 1))
            + self.n_neg * (fpr * u.get(1, 0) + (1.0 - fpr) * u.get(0, 0))
    }

    /// Best point of hull ∩ box by enumerating the candidate vertices of the intersection.
    fn best_in_box(&self, lo: Pt, hi: Pt, u: &UtilityMatrix) -> Option<Pt> {
        let tol = 1e-10;
        let in_box = |p: Pt| p.0 >= lo.0 - tol && p.0 <= hi.0 + tol && p.1 >= lo.1 - tol && p.1 <= hi.1 + tol;
        let mut cands: Vec<Pt> = self.hull.iter().copied().filter(|p| in_box(*p)).collect();
        for c in [(lo.0, lo.1), (lo.0, hi.1), (hi.0, lo.1), (hi.0, hi.1)] {
            if in_polygon(&self.hull, c) {
                cands.push(c);
            }
        }
        let n = self.hull.len();
        let edges = if n >= 2 { n } else { 0 };
        for i in 0..edges {
            let (a, b) = (self.hull[i], self.hull[(i + 1) % n]);
            for x in [lo.0, hi.0] {
                if (b.0 - a.0).abs() > 1e-15 {
                    let t = (x - a.0) / (b.0 - a.0);
                    if (0.0..=1.0).contains(&t) {
                        let p = (x, a.1 + t * (b.1 - a.1));
                        if in_box(p) {
                            cands.push(p);
                        }
                    }
                }
            }
            for y in [lo.1, hi.1] {
                if (b.1 - a.1).abs() > 1e-15 {
                    let t = (y - a.1) / (b.1 - a.1);
                    if (0.0..=1.0).contains(&t) {
                        let p = (a.0 + t * (b.0 - a.0), y);
                        if in_box(p) {
                            cands.push(p);
                        }
                    }
                }
            }
        }
        cands
            .into_iter()
            .map(|p| (p.0.clamp(lo.0, hi.0), p.1.clamp(lo.1, hi.1)))
            .max_by(|a, b| self.utility(*a, u).total_cmp(&self.utility(*b, u)))
    }

    /// Mix of two staircase points hitting `p`, as (first, second, weight of first).
    fn realize(&self, p: Pt) -> Option<(Cutoff, Cutoff, f64)> {
        let vs = &self.vertices;
        let point_of = |i: usize, q: f64| -> Pt {
            // piece i runs from vertex i to vertex i+1
            let (a, b) = (vs[i].0, vs[i + 1].0);
            (a.0 + q * (b.0 - a.0), a.1 + q * (b.1 - a.1))
        };
        let cut_of = |i: usize, q: f64| -> Cutoff {
            let c = vs[i + 1].1;
            if q >= 1.0 {
                c
            } else if q <= 0.0 {
                vs[i].1
            } else {
                Cutoff::new(c.threshold, q)
            }
        };
        let close = |a: Pt, b: Pt| (a.0 - b.0).abs() <= 1e-11 && (a.1 - b.1).abs() <= 1e-11;
        let pieces = vs.len() - 1;
        for i in 0..pieces {
            for j in i..pieces {
                let ends = [(i, 0.0), (i, 1.0), (j, 0.0), (j, 1.0)];
                for tri in [[0, 1, 2], [0, 1, 3], [2, 3, 0], [2, 3, 1]] {
                    let [a, b, c] = tri.map(|k| point_of(ends[k].0, ends[k].1));
                    let area = turn(a, b, c);
                    if area.abs() < 1e-14 {
                        // collinear: try the segment a-b alone
                        let d = (b.0 - a.0, b.1 - a.1);
                        let len2 = d.0 * d.0 + d.1 * d.1;
                        if len2 > 0.0 {
                            let t = (((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / len2).clamp(0.0, 1.0);
                            if close(point_of(ends[tri[0]].0, t), p) {
                                let cut = cut_of(ends[tri[0]].0, t);
                                return Some((cut, cut, 1.0));
                            }
                        }
                        continue;
                    }
                    let la = turn(p, b, c) / area;
                    let lb = turn(a, p, c) / area;
                    let lc = 1.0 - la - lb;
                    if la < -1e-12 || lb < -1e-12 || lc < -1e-12 {
                        continue;
                    }
                    let (la, lb, lc) = (la.max(0.0), lb.max(0.0), lc.max(0.0));
                    let s = la + lb + lc;
                    let w = (la + lb) / s;
                    let q = if la + lb > 0.0 { lb / (la + lb) } else { 0.0 };
                    let first = cut_of(ends[tri[0]].0, q);
                    let second = cut_of(ends[tri[2]].0, ends[tri[2]].1);
                    return Some((first, second, w));
                }
            }
        }
        None
    }
}

fn separation(ds: &Dataset, gamma: f64, u: &UtilityMatrix, cfg: &OracleConfig) -> Result<DecisionRule> {
    let rocs: Vec<Roc> = ds.groups().iter().map(|g| roc(ds, g)).collect();
    let targets: Vec<Pt> = if gamma <= 0.0 {
        rocs.iter()
            .map(|r| {
                r.vertices
                    .iter()
                    .map(|v| v.0)
                    .max_by(|a, b| r.utility(*a, u).total_cmp(&r.utility(*b, u)))
                    .expect("nonempty")
            })
            .collect()
    } else if gamma >= 1.0 && rocs.iter().all(|r| r.n_pos > 0.0 && r.n_neg > 0.0) {
        common_target(&rocs, u, cfg)
    } else {
        box_targets(&rocs, gamma, u, cfg)
    };
    let mut first = BTreeMap::new();
    let mut second = BTreeMap::new();
    let mut weights = BTreeMap::new();
    for (r, t) in rocs.iter().zip(targets) {
        let (a, b, w) =
            r.realize(t).ok_or_else(|| Error::Solver(format!("oracle could not realize a point for `{}`", r.name)))?;
        first.insert(r.name.clone(), a);
        second.insert(r.name.clone(), b);
        weights.insert(r.name.clone(), w);
    }
    if weights.values().all(|w| *w >= 1.0) {
        return Ok(DecisionRule::GroupThreshold { groups: first });
    }
    Ok(DecisionRule::Mixture {
        first: Box::new(DecisionRule::GroupThreshold { groups: first }),
        second: Box::new(DecisionRule::GroupThreshold { groups: second }),
        weights,
    })
}

/// Exact parity: candidate common points are grid mixtures of vertex pairs and
/// crossings of chords from two groups, kept if inside every hull.
fn common_target(rocs: &[Roc], u: &UtilityMatrix, cfg: &OracleConfig) -> Vec<Pt> {
    let qs = cfg.q_grid();
    let mut cands: Vec<Pt> = Vec::new();
    for r in rocs {
        let vs: Vec<Pt> = r.vertices.iter().map(|v| v.0).collect();
        for i in 0..vs.len() {
            for j in i..vs.len() {
                for w in &qs {
                    cands.push((w * vs[i].0 + (1.0 - w) * vs[j].0, w * vs[i].1 + (1.0 - w) * vs[j].1));
                }
            }
        }
    }
    for (gi, g) in rocs.iter().enumerate() {
        for h in &rocs[gi + 1..] {
            let (vg, vh): (Vec<Pt>, Vec<Pt>) =
                (g.vertices.iter().map(|v| v.0).collect(), h.vertices.iter().map(|v| v.0).collect());
            for a in 0..vg.len() {
                for b in a + 1..vg.len() {
                    for c in 0..vh.len() {
                        for d in c + 1..vh.len() {
                            if let Some(p) = chord_crossing(vg[a], vg[b], vh[c], vh[d]) {
                                cands.push(p);
                            }
                        }
                    }
                }
            }
        }
    }
    let total = |p: Pt| rocs.iter().map(|r| r.utility(p, u)).sum::<f64>();
    let best = cands
        .into_iter()
        .filter(|p| rocs.iter().all(|r| in_polygon(&r.hull, *p)))
        .max_by(|a, b| total(*a).total_cmp(&total(*b)))
        .unwrap_or((0.0, 0.0));
    vec![best; rocs.len()]
}

fn chord_crossing(a: Pt, b: Pt, c: Pt, d: Pt) -> Option<Pt> {
    let r = (b.0 - a.0, b.1 - a.1);
    let s = (d.0 - c.0, d.1 - c.1);
    let den = r.0 * s.1 - r.1 * s.0;
    if den.abs() < 1e-15 {
        return None;
    }
    let t = ((c.0 - a.0) * s.1 - (c.1 - a.1) * s.0) / den;
    let v = ((c.0 - a.0) * r.1 - (c.1 - a.1) * r.0) / den;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&v)).then_some((a.0 + t * r.0, a.1 + t * r.1))
}

/// Relaxed separation: fix the smallest FPR and TPR at candidate levels and let
/// each group solve its own small LP over hull ∩ box.
fn box_targets(rocs: &[Roc], gamma: f64, u: &UtilityMatrix, cfg: &OracleConfig) -> Vec<Pt> {
    let coarse = cfg.grid_step.max(0.01);
    let steps = (1.0 / coarse).round() as usize;
    let mut xs: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    let mut ys = xs.clone();
    for r in rocs {
        for (p, _) in &r.vertices {
            xs.extend([p.0, p.0 * gamma]);
            ys.extend([p.1, p.1 * gamma]);
        }
    }
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let fpr_free = |r: &Roc| r.n_neg == 0.0;
    let tpr_free = |r: &Roc| r.n_pos == 0.0;
    let mut best: Option<(f64, Vec<Pt>)> = None;
    for &mx in &xs {
        for &my in &ys {
            let mut total = 0.0;
            let mut pts = Vec::with_capacity(rocs.len());
            for r in rocs {
                let lo = (if fpr_free(r) { 0.0 } else { mx }, if tpr_free(r) { 0.0 } else { my });
                let hi = (
                    if fpr_free(r) { 1.0 } else { window_hi(mx, gamma).min(1.0) },
                    if tpr_free(r) { 1.0 } else { window_hi(my, gamma).min(1.0) },
                );
                match r.best_in_box(lo, hi, u) {
                    Some(p) => {
                        total += r.utility(p, u);
                        pts.push(p);
                    }
                    None => break,
                }
            }
            if pts.len() == rocs.len() && best.as_ref().is_none_or(|(b, _)| total > *b + 1e-12) {
                best = Some((total, pts));
            }
        }
    }
    best.map(|(_, p)| p).unwrap_or_else(|| vec![(0.0, 0.0); rocs.len()])
}

// ---------- sufficiency: both predictive rates ----------

const SUFF: [RateFamily; 2] = [RateFamily::Ppv, RateFamily::For];

fn sufficiency(ds: &Dataset, gamma: f64, u: &UtilityMatrix, cfg: &OracleConfig) -> Result<DecisionRule> {
    let groups = group_candidates(ds, &[Some(BoundForm::Lower), Some(BoundForm::Upper)]);
    if gamma <= 0.0 {
        let qs = cfg.q_grid();
        let picks: Vec<(usize, f64)> = groups.iter().map(|g| best_free(g, &qs, u)).map(|p| (p.seg, p.q)).collect();
        return Ok(threshold_rule(&groups, &picks, true));
    }
    check_single_scores(&groups)?;
    let solve =
        |g: f64| if g >= 1.0 { sufficiency_exact(&groups, u, cfg) } else { sufficiency_boxes(&groups, g, u, cfg) };
    match solve(gamma) {
        Some(picks) => Ok(threshold_rule(&groups, &picks, true)),
        None => Err(infeasible(gamma, |g| solve(g).is_some())),
    }
}

fn pair_at(s: &Segment, q: f64) -> Option<Pt> {
    Some((s.rate(SUFF[0], q, true)?, s.rate(SUFF[1], q, true)?))
}

/// Points of `s` where both rates match `t`.
fn reach(s: &Segment, t: Pt) -> Vec<f64> {
    let mut out = Vec::new();
    for q in [s.solve(SUFF[0], t.0, true), s.solve(SUFF[1], t.1, true), Some(0.0), Some(1.0)].into_iter().flatten() {
        if let Some(v) = pair_at(s, q) {
            if (v.0 - t.0).abs() <= 1e-9 && (v.1 - t.1).abs() <= 1e-9 {
                out.push(q);
            }
        }
    }
    // a segment with constant PPV: scan for the FOR match
    if let Some((a, b)) = s.interval_where(SUFF[0], t.0, t.0, true, (0.0, 1.0)) {
        if b > a {
            if let Some((c, _)) = s.interval_where(SUFF[1], t.1, t.1, true, (a, b)) {
                out.push(c);
            }
        }
    }
    out
}

/// Points `q` of `sg` where some point of `sh` has PPV and FOR equal to those at
/// `q` divided by `k`, found by scanning and bisecting.
fn scaled_crossings(sg: &Segment, sh: &Segment, k: [f64; 2]) -> Vec<f64> {
    let gap = |q: f64| -> Option<f64> {
        let (p1, f1) = pair_at(sg, q)?;
        let r = sh.solve(SUFF[0], p1 / k[0], true)?;
        Some(k[1] * sh.rate(SUFF[1], r, true)? - f1)
    };
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=100 {
        let q = i as f64 / 100.0;
        let cur = gap(q).map(|d| (q, d));
        if let (Some((qa, da)), Some((qb, db))) = (prev, cur) {
            if da == 0.0 || da.signum() != db.signum() {
                let (mut l, mut r, mut dl) = (qa, qb, da);
                for _ in 0..60 {
                    let m = 0.5 * (l + r);
                    match gap(m) {
                        Some(dm) if dm.signum() == dl.signum() && dm != 0.0 => {
                            l = m;
                            dl = dm;
                        }
                        Some(_) => r = m,
                        None => break,
                    }
                }
                out.push(r);
            }
        }
        prev = cur;
    }
    out
}

fn sufficiency_exact(groups: &[GroupCands], u: &UtilityMatrix, cfg: &OracleConfig) -> Option<Vec<(usize, f64)>> {
    let qs = cfg.q_grid();
    let mut targets: Vec<Pt> = Vec::new();
    for g in groups {
        for s in &g.segments {
            for &q in &qs {
                targets.extend(pair_at(s, q));
            }
        }
    }
    for (gi, g) in groups.iter().enumerate() {
        for h in &groups[gi + 1..] {
            for sg in &g.segments {
                for sh in &h.segments {
                    for q in scaled_crossings(sg, sh, [1.0, 1.0]) {
                        targets.extend(pair_at(sg, q));
                    }
                }
            }
        }
    }
    let mut best: Option<(f64, Vec<(usize, f64)>)> = None;
    for t in targets {
        let mut total = 0.0;
        let mut picks = Vec::new();
        for g in groups {
            let mut pick: Option<(f64, usize, f64)> = None;
            for (si, s) in g.segments.iter().enumerate() {
                for q in reach(s, t) {
                    let v = s.utility(q, u);
                    if pick.is_none_or(|(b, _, _)| v > b) {
                        pick = Some((v, si, q));
                    }
                }
            }
            match pick {
                Some((v, si, q)) => {
                    total += v;
                    picks.push((si, q));
                }
                None => break,
            }
        }
        if picks.len() == groups.len() && best.as_ref().is_none_or(|(b, _)| total > *b + 1e-12) {
            best = Some((total, picks));
        }
    }
    best.map(|(_, p)| p)
}

fn sufficiency_boxes(
    groups: &[GroupCands],
    gamma: f64,
    u: &UtilityMatrix,
    cfg: &OracleConfig,
) -> Option<Vec<(usize, f64)>> {
    let coarse = cfg.grid_step.max(0.01);
    let steps = (1.0 / coarse).round() as usize;
    let mut levels: [Vec<f64>; 2] = [
        (0..=steps).map(|i| i as f64 / steps as f64).collect(),
        (0..=steps).map(|i| i as f64 / steps as f64).collect(),
    ];
    for g in groups {
        for s in &g.segments {
            for q in [0.0, 1.0] {
                for (k, f) in SUFF.iter().enumerate() {
                    if let Some(v) = s.rate(*f, q, true) {
                        levels[k].extend([v, v * gamma]);
                    }
                }
            }
        }
    }
    // two groups holding both ratios at exactly gamma
    for (gi, g) in groups.iter().enumerate() {
        for h in &groups[gi + 1..] {
            for sg in &g.segments {
                for sh in &h.segments {
                    for k in [[gamma, gamma], [gamma, 1.0 / gamma], [1.0 / gamma, gamma], [1.0 / gamma, 1.0 / gamma]] {
                        for q in scaled_crossings(sg, sh, k) {
                            if let Some((a, b)) = pair_at(sg, q) {
                                levels[0].push(a * k[0].recip().min(1.0));
                                levels[1].push(b * k[1].recip().min(1.0));
                            }
                        }
                    }
                }
            }
        }
    }
    for l in levels.iter_mut() {
        l.sort_by(f64::total_cmp);
        l.dedup();
    }
    let mut best: Option<(f64, Vec<(usize, f64)>)> = None;
    for &m1 in &levels[0] {
        // narrow every segment to the PPV window once per level
        let narrowed: Vec<Vec<(usize, (f64, f64))>> = groups
            .iter()
            .map(|g| {
                g.segments
                    .iter()
                    .enumerate()
                    .filter_map(|(si, s)| s.interval_where(SUFF[0], m1, m1 / gamma, true, (0.0, 1.0)).map(|r| (si, r)))
                    .collect()
            })
            .collect();
        if narrowed.iter().any(Vec::is_empty) {
            continue;
        }
        for &m2 in &levels[1] {
            let mut total = 0.0;
            let mut picks = Vec::new();
            for (g, segs) in groups.iter().zip(&narrowed) {
                let mut pick: Option<(f64, usize, f64)> = None;
                for &(si, range) in segs {
                    let s = &g.segments[si];
                    if let Some((a, b)) = s.interval_where(SUFF[1], m2, m2 / gamma, true, range) {
                        for q in [a, b] {
                            let v = s.utility(q, u);
                            if pick.is_none_or(|(bv, _, _)| v > bv) {
                                pick = Some((v, si, q));
                            }
                        }
                    }
                }
                match pick {
                    Some((v, si, q)) => {
                        total += v;
                        picks.push((si, q));
                    }
                    None => break,
                }
            }
            if picks.len() == groups.len() && best.as_ref().is_none_or(|(b, _)| total > *b + 1e-12) {
                best = Some((total, picks));
            }
        }
    }
    best.map(|(_, p)| p)
}

// ---------- conditional parity ----------

fn conditional(problem: &OptimizationProblem, cfg: &OracleConfig) -> Result<DecisionRule> {
    let ds = &problem.dataset;
    let legit = &problem.criterion.legit_names;
    let u = &problem.utility;
    let mut cells: BTreeMap<String, BTreeMap<String, Cutoff>> =
        ds.groups().iter().map(|g| (g.clone(), BTreeMap::new())).collect();
    let mut constrained = 0;
    let fallback = match super::optimal_threshold(u) {
        DecisionRule::SingleThreshold { threshold } => Cutoff::new(threshold, 1.0),
        DecisionRule::Constant { accept: true } => Cutoff::new(0.0, 1.0),
        _ => Cutoff::new(1.0, 0.0),
    };
    for stratum in ds.strata(legit)? {
        let sub = ds.filter(|r| r.stratum(legit).is_ok_and(|s| s == stratum))?;
        let small = ds.groups().iter().any(|g| sub.group_records(g).count() < problem.min_count);
        let gamma = if small { 0.0 } else { problem.criterion.gamma };
        constrained += usize::from(!small);
        let groups = group_candidates(&sub, &[None]);
        let picks = single_picks(&groups, RateFamily::PositiveRate, false, gamma, u, cfg)
            .ok_or_else(|| Error::Solver("independence is always feasible".into()))?;
        for (g, (si, q)) in groups.iter().zip(picks) {
            cells.get_mut(&g.name).expect("declared").insert(stratum.clone(), Cutoff::new(g.segments[si].threshold, q));
        }
        for (g, strata) in cells.iter_mut() {
            strata.entry(stratum.clone()).or_insert_with(|| {
                debug_assert!(sub.group_records(g).next().is_none());
                fallback
            });
        }
    }
    if constrained == 0 {
        return Err(Error::DegenerateStratification { min_count: problem.min_count });
    }
    Ok(DecisionRule::StratifiedGroupThreshold { legit_names: legit.clone(), cells })
}

/// Training ratio of a rule's per-group values for one family (for diagnostics).
pub fn family_ratio(ds: &Dataset, rule: &DecisionRule, family: RateFamily) -> Result<Option<f64>> {
    let rates = crate::metrics::compute_rates(ds, rule)?;
    Ok(min_pair_ratio(rates.groups.values().filter_map(|c| c.rate(family))))
}
