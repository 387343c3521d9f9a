//! Threshold paths. Sorting a group's distinct scores and accepting them one
//! atom at a time (from the top for lower-bound rules, from the bottom for
//! upper-bound rules) traces every rule of the threshold family; boundary
//! randomization moves continuously along each step ("piece").
//!
//! All rates used by the criteria are ratios of affine functions of the
//! accepted positive and negative mass, so along a piece they are monotone
//! and a window `[lo, hi]` on a rate cuts out a single interval of `q`.

use std::cmp::Ordering;

use crate::model::{BoundForm, RateFamily, Record, UtilityMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Atom {
    pub score: f64,
    pub pos: f64,
    pub neg: f64,
}

/// Score atoms of one group, highest score first.
#[derive(Clone, Debug)]
pub(crate) struct GroupData {
    pub name: String,
    pub atoms: Vec<Atom>,
    pub n_pos: f64,
    pub n_neg: f64,
}

impl GroupData {
    pub fn new<'a>(name: &str, records: impl IntoIterator<Item = &'a Record>) -> crate::Result<Self> {
        let mut scored: Vec<(f64, u8)> = Vec::new();
        for r in records {
            scored.push((r.score()?, r.label));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut atoms: Vec<Atom> = Vec::new();
        let (mut n_pos, mut n_neg) = (0.0, 0.0);
        for (s, y) in scored {
            if atoms.last().is_none_or(|a| a.score != s) {
                atoms.push(Atom { score: s, pos: 0.0, neg: 0.0 });
            }
            let a = atoms.last_mut().expect("pushed above");
            if y == 1 {
                a.pos += 1.0;
                n_pos += 1.0;
            } else {
                a.neg += 1.0;
                n_neg += 1.0;
            }
        }
        Ok(Self { name: name.to_string(), atoms, n_pos, n_neg })
    }

    pub fn n(&self) -> f64 {
        self.n_pos + self.n_neg
    }

    /// Utility sum of the group when accepting `pos` positives and `neg` negatives.
    pub fn utility(&self, u: &UtilityMatrix, pos: f64, neg: f64) -> f64 {
        self.n_pos * u.get(0, 1) + self.n_neg * u.get(0, 0) + pos * u.positive_gain() + neg * u.negative_gain()
    }

    /// Atoms in the order a rule of `form` accepts them.
    pub fn path_atoms(&self, form: BoundForm) -> Vec<Atom> {
        match form {
            BoundForm::Lower => self.atoms.clone(),
            BoundForm::Upper => self.atoms.iter().rev().copied().collect(),
        }
    }

    pub fn pieces(&self, form: BoundForm) -> Vec<Piece> {
        let atoms = self.path_atoms(form);
        let first = atoms[0].score;
        let last = atoms.len();
        let (mut pos, mut neg) = (0.0, 0.0);
        let mut out = Vec::with_capacity(atoms.len());
        for (i, a) in atoms.iter().enumerate() {
            out.push(Piece {
                form,
                index: i + 1,
                last,
                score: a.score,
                prev_score: (i > 0).then(|| atoms[i - 1].score),
                first_score: first,
                start: (pos, neg),
                delta: (a.pos, a.neg),
                qlo: 0.0,
                qhi: 1.0,
            });
            pos += a.pos;
            neg += a.neg;
        }
        out
    }
}

/// Partial acceptance of one atom: `q` runs from the previous vertex (0) to the next (1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Piece {
    pub form: BoundForm,
    /// 1-based position of the atom along the path.
    pub index: usize,
    pub last: usize,
    pub score: f64,
    pub prev_score: Option<f64>,
    pub first_score: f64,
    pub start: (f64, f64),
    pub delta: (f64, f64),
    pub qlo: f64,
    pub qhi: f64,
}

impl Piece {
    pub fn at(&self, q: f64) -> (f64, f64) {
        (self.start.0 + q * self.delta.0, self.start.1 + q * self.delta.1)
    }

    pub fn restricted(&self, qlo: f64, qhi: f64) -> Self {
        Self { qlo, qhi, ..*self }
    }

    /// Canonical cutoff for the point at `q`.
    pub fn choice(&self, q: f64, group: &GroupData, u: &UtilityMatrix) -> Choice {
        let (pos, neg) = self.at(q);
        let (threshold, boundary) = if q >= 1.0 {
            (self.score, 1.0)
        } else if q <= 0.0 {
            match self.prev_score {
                Some(s) => (s, 1.0),
                None => (self.first_score, 0.0),
            }
        } else {
            (self.score, q)
        };
        Choice { form: self.form, threshold, boundary, pos, neg, utility: group.utility(u, pos, neg) }
    }
}

/// A point on a group's path with its canonical cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Choice {
    pub form: BoundForm,
    pub threshold: f64,
    pub boundary: f64,
    pub pos: f64,
    pub neg: f64,
    pub utility: f64,
}

impl Choice {
    pub fn randomized(&self) -> bool {
        self.boundary > 0.0 && self.boundary < 1.0
    }

    /// Order used among equally useful points: deterministic, lower-bound form, lower threshold.
    fn tie_key(&self) -> (bool, BoundForm, f64) {
        (self.randomized(), self.form, self.threshold)
    }
}

pub(crate) fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// `a` strictly preferred to `b` for one group.
pub(crate) fn prefer(a: &Choice, b: &Choice) -> bool {
    if !close(a.utility, b.utility) {
        return a.utility > b.utility;
    }
    let (ka, kb) = (a.tie_key(), b.tie_key());
    ka.0.cmp(&kb.0).then(ka.1.cmp(&kb.1)).then(ka.2.total_cmp(&kb.2)) == Ordering::Less
}

/// `(a0 + a1 pos + a2 neg) / (b0 + b1 pos + b2 neg)`
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Frac {
    a: [f64; 3],
    b: [f64; 3],
}

impl Frac {
    /// `None` when the rate is undefined for every rule (an empty class).
    pub fn of(family: RateFamily, g: &GroupData) -> Option<Self> {
        let n = g.n();
        let f = match family {
            RateFamily::PositiveRate => Self { a: [0.0, 1.0, 1.0], b: [n, 0.0, 0.0] },
            RateFamily::Tpr => Self { a: [0.0, 1.0, 0.0], b: [g.n_pos, 0.0, 0.0] },
            RateFamily::Fpr => Self { a: [0.0, 0.0, 1.0], b: [g.n_neg, 0.0, 0.0] },
            RateFamily::Ppv => Self { a: [0.0, 1.0, 0.0], b: [0.0, 1.0, 1.0] },
            RateFamily::For => Self { a: [g.n_pos, -1.0, 0.0], b: [n, -1.0, -1.0] },
        };
        let constant_den = f.b[1] == 0.0 && f.b[2] == 0.0;
        (!constant_den || f.b[0] > 0.0).then_some(f)
    }

    pub fn value(&self, pos: f64, neg: f64) -> Option<f64> {
        let den = self.b[0] + self.b[1] * pos + self.b[2] * neg;
        (den > 1e-12).then(|| ((self.a[0] + self.a[1] * pos + self.a[2] * neg) / den).clamp(0.0, 1.0))
    }

    /// Numerator and denominator along a piece: `(N0, N1, D0, D1)`.
    fn along(&self, p: &Piece) -> (f64, f64, f64, f64) {
        let (s0, s1) = p.start;
        let (d0, d1) = p.delta;
        (
            self.a[0] + self.a[1] * s0 + self.a[2] * s1,
            self.a[1] * d0 + self.a[2] * d1,
            self.b[0] + self.b[1] * s0 + self.b[2] * s1,
            self.b[1] * d0 + self.b[2] * d1,
        )
    }

    pub fn at(&self, p: &Piece, q: f64) -> Option<f64> {
        let (x, y) = p.at(q);
        self.value(x, y)
    }

    /// Sub-interval of `[p.qlo, p.qhi]` where the rate lies in `[lo, hi]`.
    pub fn window(&self, p: &Piece, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let va = self.at(p, p.qlo)?;
        let vb = self.at(p, p.qhi)?;
        let tol = |t: f64| 1e-12 * (1.0 + t.abs().min(1.0));
        let (tlo, thi) = (lo - tol(lo), hi + tol(hi));
        if p.qlo == p.qhi {
            return (va >= tlo && va <= thi).then_some((p.qlo, p.qhi));
        }
        let (n0, n1, d0, d1) = self.along(p);
        let cross = |t: f64| {
            let den = n1 - t * d1;
            if den == 0.0 {
                None
            } else {
                Some(((t * d0 - n0) / den).clamp(p.qlo, p.qhi))
            }
        };
        let (q1, q2) = if vb >= va {
            if vb < tlo || va > thi {
                return None;
            }
            (if va >= tlo { p.qlo } else { cross(lo)? }, if vb <= thi { p.qhi } else { cross(hi)? })
        } else {
            if va < tlo || vb > thi {
                return None;
            }
            (if va <= thi { p.qlo } else { cross(hi)? }, if vb >= tlo { p.qhi } else { cross(lo)? })
        };
        if q1 <= q2 {
            Some((q1, q2))
        } else if q1 - q2 <= 1e-12 {
            Some((q2, q2))
        } else {
            None
        }
    }

    /// Rates at the piece's usable endpoints.
    pub fn endpoint_values(&self, p: &Piece) -> impl Iterator<Item = f64> {
        [self.at(p, p.qlo), self.at(p, p.qhi)].into_iter().flatten()
    }
}

/// Narrows pieces so that the rate stays defined for a constrained group:
/// PPV needs a whole atom accepted, FOR a whole atom rejected.
pub(crate) fn restrict_defined(pieces: &[Piece], families: &[RateFamily]) -> Vec<Piece> {
    pieces
        .iter()
        .filter_map(|p| {
            let (mut lo, mut hi) = (p.qlo, p.qhi);
            for f in families {
                match f {
                    RateFamily::Ppv if p.index == 1 => lo = lo.max(1.0),
                    RateFamily::For if p.index == p.last => hi = hi.min(0.0),
                    _ => {}
                }
            }
            (lo <= hi).then(|| p.restricted(lo, hi))
        })
        .collect()
}

/// One group as seen by a single-family search.
#[derive(Clone, Debug)]
pub(crate) struct Prepared<'a> {
    pub group: &'a GroupData,
    pub pieces: Vec<Piece>,
    /// `None` leaves the group unconstrained.
    pub frac: Option<Frac>,
}

impl Prepared<'_> {
    pub fn best_free(&self, u: &UtilityMatrix) -> Option<Choice> {
        let mut best: Option<Choice> = None;
        for p in &self.pieces {
            for q in [p.qlo, p.qhi] {
                let c = p.choice(q, self.group, u);
                if best.as_ref().is_none_or(|b| prefer(&c, b)) {
                    best = Some(c);
                }
            }
        }
        best
    }

    pub fn best_in(&self, lo: f64, hi: f64, u: &UtilityMatrix) -> Option<Choice> {
        let Some(frac) = self.frac else {
            return self.best_free(u);
        };
        let mut best: Option<Choice> = None;
        for p in &self.pieces {
            if let Some((q1, q2)) = frac.window(p, lo, hi) {
                for q in [q1, q2] {
                    let c = p.choice(q, self.group, u);
                    if best.as_ref().is_none_or(|b| prefer(&c, b)) {
                        best = Some(c);
                    }
                }
            }
        }
        best
    }
}

/// A full assignment, one choice per group, plus its score.
#[derive(Clone, Debug)]
pub(crate) struct Config {
    pub total: f64,
    pub ratio: f64,
    pub choices: Vec<Choice>,
}

impl Config {
    pub fn new(choices: Vec<Choice>, fracs: &[Vec<Option<Frac>>]) -> Self {
        let total = choices.iter().map(|c| c.utility).sum();
        let ratio = config_ratio(&choices, fracs);
        Self { total, ratio, choices }
    }

    /// Utility, then ratio, then fewer coin flips, then lower thresholds.
    pub fn better_than(&self, other: &Config) -> bool {
        if !close(self.total, other.total) {
            return self.total > other.total;
        }
        if (self.ratio - other.ratio).abs() > 1e-12 {
            return self.ratio > other.ratio;
        }
        let coins = |c: &Config| c.choices.iter().filter(|x| x.randomized()).count();
        match coins(self).cmp(&coins(other)) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
        for (a, b) in self.choices.iter().zip(&other.choices) {
            match a.form.cmp(&b.form).then(a.threshold.total_cmp(&b.threshold)) {
                Ordering::Less => return true,
                Ordering::Greater => return false,
                Ordering::Equal => {}
            }
        }
        false
    }
}

/// Worst family ratio of an assignment; `fracs[family][group]`.
pub(crate) fn config_ratio(choices: &[Choice], fracs: &[Vec<Option<Frac>>]) -> f64 {
    let mut worst = 1.0f64;
    for per_group in fracs {
        let values = choices.iter().zip(per_group).filter_map(|(c, f)| f.and_then(|f| f.value(c.pos, c.neg)));
        if let Some(r) = crate::metrics::min_pair_ratio(values) {
            worst = worst.min(r);
        }
    }
    worst
}

fn push_better(best: &mut Option<Config>, cand: Config) {
    if best.as_ref().is_none_or(|b| cand.better_than(b)) {
        *best = Some(cand);
    }
}

fn assign(groups: &[Prepared], m: f64, gamma: f64, u: &UtilityMatrix) -> Option<Vec<Choice>> {
    let hi = if gamma >= 1.0 { m } else { m / gamma };
    groups.iter().map(|g| g.best_in(m, hi, u)).collect()
}

fn total_at(groups: &[Prepared], m: f64, gamma: f64, u: &UtilityMatrix) -> f64 {
    assign(groups, m, gamma, u).map_or(f64::NEG_INFINITY, |c| c.iter().map(|x| x.utility).sum())
}

/// Maximizes total utility with every constrained group's rate in `[m, m / gamma]`
/// for some common `m`. Candidate `m` values are the rates at piece endpoints and
/// their `gamma` multiples; between them the optimum of an affine rate is at an
/// endpoint. With `refine`, the gaps are also searched numerically, which matters
/// for rates whose denominator moves (PPV, FOR).
pub(crate) fn solve_family(
    groups: &[Prepared],
    gamma: f64,
    u: &UtilityMatrix,
    refine: bool,
    fracs: &[Vec<Option<Frac>>],
) -> Option<Config> {
    if gamma <= 0.0 || groups.iter().all(|g| g.frac.is_none()) {
        let choices: Option<Vec<Choice>> = groups.iter().map(|g| g.best_free(u)).collect();
        return choices.map(|c| Config::new(c, fracs));
    }
    let mut anchors: Vec<f64> = Vec::new();
    for g in groups {
        if let Some(f) = g.frac {
            for p in &g.pieces {
                for v in f.endpoint_values(p) {
                    anchors.push(v);
                    if gamma < 1.0 {
                        anchors.push(v * gamma);
                    }
                }
            }
        }
    }
    anchors.sort_by(f64::total_cmp);
    anchors.dedup_by(|a, b| close(*a, *b));

    let mut best: Option<Config> = None;
    for &m in &anchors {
        if let Some(c) = assign(groups, m, gamma, u) {
            push_better(&mut best, Config::new(c, fracs));
        }
    }
    if refine {
        for w in anchors.windows(2) {
            if let Some(m) = refine_gap(w[0], w[1], |m| total_at(groups, m, gamma, u)) {
                if let Some(c) = assign(groups, m, gamma, u) {
                    push_better(&mut best, Config::new(c, fracs));
                }
            }
        }
    }
    best
}

/// Best interior point of `(a, b)` found by sampling and golden-section search.
fn refine_gap(a: f64, b: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
    const SAMPLES: usize = 8;
    if b - a <= 1e-12 {
        return None;
    }
    let step = (b - a) / (SAMPLES + 1) as f64;
    let points: Vec<f64> = (1..=SAMPLES).map(|i| a + step * i as f64).collect();
    let values: Vec<f64> = points.iter().map(|&m| f(m)).collect();
    let (i, &v) = values.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1))?;
    if !v.is_finite() {
        return None;
    }
    let (mut lo, mut hi) = (points[i] - step, points[i] + step);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    Some(if f1 >= f2 { x1 } else { x2 })
}

/// Sufficiency with both rates constrained and `gamma < 1`: fix the window of one
/// rate at each of its candidate levels, solve the other rate exactly inside it,
/// and repeat with the roles swapped.
pub(crate) fn solve_two_families(
    groups: &[GroupData],
    pieces: &[Vec<Piece>],
    families: [RateFamily; 2],
    gamma: f64,
    u: &UtilityMatrix,
    fracs: &[Vec<Option<Frac>>],
) -> Option<Config> {
    let mut best: Option<Config> = None;
    for (outer, inner) in [(families[0], families[1]), (families[1], families[0])] {
        let outer_fracs: Vec<Option<Frac>> = groups.iter().map(|g| Frac::of(outer, g)).collect();
        let inner_fracs: Vec<Option<Frac>> = groups.iter().map(|g| Frac::of(inner, g)).collect();
        let mut anchors: Vec<f64> = Vec::new();
        for (ps, f) in pieces.iter().zip(&outer_fracs) {
            if let Some(f) = f {
                for p in ps {
                    for v in f.endpoint_values(p) {
                        anchors.push(v);
                        anchors.push(v * gamma);
                    }
                }
            }
        }
        anchors.sort_by(f64::total_cmp);
        anchors.dedup_by(|a, b| close(*a, *b));
        for &m in &anchors {
            let hi = m / gamma;
            let mut prepared = Vec::with_capacity(groups.len());
            let mut ok = true;
            for ((g, ps), (of, inf)) in groups.iter().zip(pieces).zip(outer_fracs.iter().zip(&inner_fracs)) {
                let narrowed: Vec<Piece> = match of {
                    Some(f) => ps.iter().filter_map(|p| f.window(p, m, hi).map(|(a, b)| p.restricted(a, b))).collect(),
                    None => ps.clone(),
                };
                if narrowed.is_empty() {
                    ok = false;
                    break;
                }
                prepared.push(Prepared { group: g, pieces: narrowed, frac: *inf });
            }
            if !ok {
                continue;
            }
            if let Some(c) = solve_family(&prepared, gamma, u, false, fracs) {
                push_better(&mut best, c);
            }
        }
    }
    box_search(groups, pieces, families, gamma, u, fracs, &mut best);
    best
}

/// Best choice of one group with the first rate in `w1` and the second in `w2`.
fn best_in_box(
    group: &GroupData,
    pieces: &[Piece],
    f: [Option<Frac>; 2],
    w: [(f64, f64); 2],
    u: &UtilityMatrix,
) -> Option<Choice> {
    let mut best: Option<Choice> = None;
    for p in pieces {
        let mut p = *p;
        let mut ok = true;
        for (fi, (lo, hi)) in f.iter().zip(w) {
            if let Some(fi) = fi {
                match fi.window(&p, lo, hi) {
                    Some((a, b)) => p = p.restricted(a, b),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if !ok {
            continue;
        }
        for q in [p.qlo, p.qhi] {
            let c = p.choice(q, group, u);
            if best.as_ref().is_none_or(|b| prefer(&c, b)) {
                best = Some(c);
            }
        }
    }
    best
}

/// Searches pairs of window floors: every pair of anchor levels, then a few rounds
/// of coordinate refinement around the best pairs.
fn box_search(
    groups: &[GroupData],
    pieces: &[Vec<Piece>],
    families: [RateFamily; 2],
    gamma: f64,
    u: &UtilityMatrix,
    fracs: &[Vec<Option<Frac>>],
    best: &mut Option<Config>,
) {
    let f: Vec<[Option<Frac>; 2]> =
        groups.iter().map(|g| [Frac::of(families[0], g), Frac::of(families[1], g)]).collect();
    let mut anchors: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (k, list) in anchors.iter_mut().enumerate() {
        for (ps, fg) in pieces.iter().zip(&f) {
            if let Some(fr) = fg[k] {
                for p in ps {
                    for v in fr.endpoint_values(p) {
                        list.push(v);
                        list.push(v * gamma);
                    }
                }
            }
        }
        list.sort_by(f64::total_cmp);
        list.dedup_by(|a, b| close(*a, *b));
    }
    let eval = |m: [f64; 2]| -> Option<Vec<Choice>> {
        let w = [(m[0], m[0] / gamma), (m[1], m[1] / gamma)];
        groups.iter().zip(pieces).zip(&f).map(|((g, ps), fg)| best_in_box(g, ps, *fg, w, u)).collect()
    };
    let total = |m: [f64; 2]| eval(m).map_or(f64::NEG_INFINITY, |c| c.iter().map(|c| c.utility).sum());

    let mut seeds: Vec<(f64, [f64; 2])> = Vec::new();
    for &a in &anchors[0] {
        for &b in &anchors[1] {
            let t = total([a, b]);
            if t.is_finite() {
                seeds.push((t, [a, b]));
            }
        }
    }
    // Two groups pinning both ratios at once: one sits at gamma times the other in
    // each rate, which fixes both window floors.
    for gi in 0..groups.len() {
        for hj in gi + 1..groups.len() {
            for p in &pieces[gi] {
                for r in &pieces[hj] {
                    for k in [[gamma, gamma], [gamma, 1.0 / gamma], [1.0 / gamma, gamma], [1.0 / gamma, 1.0 / gamma]] {
                        for q in crossings(f[gi][0], f[gi][1], p, f[hj][0], f[hj][1], r, k) {
                            let (Some(a), Some(b)) =
                                (f[gi][0].and_then(|x| x.at(p, q)), f[gi][1].and_then(|x| x.at(p, q)))
                            else {
                                continue;
                            };
                            let m = [a * k[0].recip().min(1.0), b * k[1].recip().min(1.0)];
                            let t = total(m);
                            if t.is_finite() {
                                seeds.push((t, m));
                            }
                        }
                    }
                }
            }
        }
    }
    seeds.sort_by(|x, y| y.0.total_cmp(&x.0));
    for &(_, m) in &seeds {
        if let Some(c) = eval(m) {
            push_better(best, Config::new(c, fracs));
        }
    }
    seeds.truncate(4);
    for (_, mut m) in seeds {
        if let Some(c) = eval(m) {
            push_better(best, Config::new(c, fracs));
        }
        for _ in 0..3 {
            for k in 0..2 {
                let list = &anchors[k];
                let i = list.partition_point(|&v| v < m[k] - 1e-12);
                let lo = if i > 0 { list[i - 1] } else { 0.0 };
                let hi = list.get(i + 1).copied().unwrap_or(1.0).max(m[k]);
                let mut cur = total(m);
                for (a, b) in [(lo, m[k]), (m[k], hi)] {
                    let probe = |x: f64| {
                        let mut mm = m;
                        mm[k] = x;
                        total(mm)
                    };
                    if let Some(x) = refine_gap(a, b, probe) {
                        let v = probe(x);
                        if v > cur {
                            cur = v;
                            m[k] = x;
                        }
                    }
                }
            }
            if let Some(c) = eval(m) {
                push_better(best, Config::new(c, fracs));
            }
        }
    }
}

/// Sufficiency with both rates equal across groups: every group must reach the
/// same `(PPV, FOR)` pair. Candidates are pairs at path vertices and the crossing
/// points of two groups' paths.
pub(crate) fn solve_two_families_exact(
    groups: &[GroupData],
    pieces: &[Vec<Piece>],
    families: [RateFamily; 2],
    u: &UtilityMatrix,
    fracs: &[Vec<Option<Frac>>],
) -> Option<Config> {
    let f1: Vec<Option<Frac>> = groups.iter().map(|g| Frac::of(families[0], g)).collect();
    let f2: Vec<Option<Frac>> = groups.iter().map(|g| Frac::of(families[1], g)).collect();
    let pair = |gi: usize, p: &Piece, q: f64| -> Option<(f64, f64)> { Some((f1[gi]?.at(p, q)?, f2[gi]?.at(p, q)?)) };
    let mut targets: Vec<(f64, f64)> = Vec::new();
    for (gi, ps) in pieces.iter().enumerate() {
        for p in ps {
            for q in [p.qlo, p.qhi] {
                targets.extend(pair(gi, p, q));
            }
        }
    }
    for gi in 0..groups.len() {
        for hj in gi + 1..groups.len() {
            for p in &pieces[gi] {
                for r in &pieces[hj] {
                    for q in crossings(f1[gi], f2[gi], p, f1[hj], f2[hj], r, [1.0, 1.0]) {
                        targets.extend(pair(gi, p, q));
                    }
                }
            }
        }
    }
    targets.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    targets.dedup_by(|a, b| close(a.0, b.0) && close(a.1, b.1));

    let mut best: Option<Config> = None;
    'target: for &(t1, t2) in &targets {
        let mut choices = Vec::with_capacity(groups.len());
        for (gi, g) in groups.iter().enumerate() {
            let mut pick: Option<Choice> = None;
            for p in &pieces[gi] {
                for q in hit(f1[gi], f2[gi], p, t1, t2) {
                    let c = p.choice(q, g, u);
                    if pick.as_ref().is_none_or(|b| prefer(&c, b)) {
                        pick = Some(c);
                    }
                }
            }
            match pick {
                Some(c) => choices.push(c),
                None => continue 'target,
            }
        }
        push_better(&mut best, Config::new(choices, fracs));
    }
    best
}

fn matches(v: Option<f64>, t: f64) -> bool {
    v.is_some_and(|v| (v - t).abs() <= 1e-10)
}

/// Values of `q` on `p` where the two rates equal `(t1, t2)`.
fn hit(f1: Option<Frac>, f2: Option<Frac>, p: &Piece, t1: f64, t2: f64) -> Vec<f64> {
    let (Some(f1), Some(f2)) = (f1, f2) else {
        return Vec::new();
    };
    let mut qs = Vec::new();
    for (f, t) in [(f1, t1), (f2, t2)] {
        let (n0, n1, d0, d1) = f.along(p);
        let den = n1 - t * d1;
        if den.abs() > 1e-15 {
            qs.push((t * d0 - n0) / den);
        }
    }
    qs.push(p.qlo);
    qs.push(p.qhi);
    qs.into_iter()
        .filter(|q| *q >= p.qlo - 1e-12 && *q <= p.qhi + 1e-12)
        .map(|q| q.clamp(p.qlo, p.qhi))
        .filter(|&q| matches(f1.at(p, q), t1) && matches(f2.at(p, q), t2))
        .collect()
}

/// `q` values on `p` where group g's rate pair equals group h's pair somewhere on `r`.
/// Points `q` on `p` where some `s` on `r` gives `f1g(q) = k[0] f1h(s)` and
/// `f2g(q) = k[1] f2h(s)` at once.
#[allow(clippy::too_many_arguments)]
fn crossings(
    f1g: Option<Frac>,
    f2g: Option<Frac>,
    p: &Piece,
    f1h: Option<Frac>,
    f2h: Option<Frac>,
    r: &Piece,
    k: [f64; 2],
) -> Vec<f64> {
    let (Some(f1g), Some(f2g), Some(f1h), Some(f2h)) = (f1g, f2g, f1h, f2h) else {
        return Vec::new();
    };
    // (A + B q)(G + H s) = (E + F s)(C + D q) written as c0 + c1 q + c2 s + c3 q s = 0
    let bilinear = |fg: Frac, fh: Frac, k: f64| {
        let (a, b, c, d) = fg.along(p);
        let (e, f, g, h) = fh.along(r);
        let (e, f) = (k * e, k * f);
        [a * g - e * c, b * g - e * d, a * h - f * c, b * h - f * d]
    };
    let x = bilinear(f1g, f1h, k[0]);
    let y = bilinear(f2g, f2h, k[1]);
    // s = -(x0 + x1 q) / (x2 + x3 q); substitute into y.
    let c0 = y[0] * x[2] - y[2] * x[0];
    let c1 = y[0] * x[3] + y[1] * x[2] - y[2] * x[1] - y[3] * x[0];
    let c2 = y[1] * x[3] - y[3] * x[1];
    let mut roots = Vec::new();
    let scale = c0.abs().max(c1.abs()).max(c2.abs());
    if scale < 1e-300 {
        return roots;
    }
    if c2.abs() <= 1e-14 * scale {
        if c1.abs() > 1e-14 * scale {
            roots.push(-c0 / c1);
        }
    } else {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc >= -1e-14 * scale * scale {
            let sq = disc.max(0.0).sqrt();
            let q1 = (-c1 - c1.signum() * sq) / (2.0 * c2);
            roots.push(q1);
            if q1 != 0.0 {
                roots.push(c0 / (c2 * q1));
            } else {
                roots.push(-c1 / c2);
            }
        }
    }
    roots
        .into_iter()
        .filter(|q| q.is_finite() && *q >= p.qlo - 1e-12 && *q <= p.qhi + 1e-12)
        .map(|q| q.clamp(p.qlo, p.qhi))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(rows: &[(f64, u8)]) -> GroupData {
        let recs: Vec<Record> =
            rows.iter().enumerate().map(|(i, (s, y))| Record::scored(i, *s, *y, "g").unwrap()).collect();
        GroupData::new("g", &recs).unwrap()
    }

    #[test]
    fn atoms_merge_equal_scores() {
        let g = group(&[(0.5, 1), (0.9, 0), (0.5, 0), (0.5, 1)]);
        assert_eq!(g.atoms.len(), 2);
        assert_eq!(g.atoms[1], Atom { score: 0.5, pos: 2.0, neg: 1.0 });
        let up = g.pieces(BoundForm::Upper);
        assert_eq!(up[0].score, 0.5);
        assert_eq!(up[1].start, (2.0, 1.0));
    }

    #[test]
    fn canonical_cutoffs() {
        let g = group(&[(0.9, 1), (0.4, 0)]);
        let u = UtilityMatrix::accuracy();
        let ps = g.pieces(BoundForm::Lower);
        let reject = ps[0].choice(0.0, &g, &u);
        assert_eq!((reject.threshold, reject.boundary), (0.9, 0.0));
        let v1 = ps[1].choice(0.0, &g, &u);
        assert_eq!((v1.threshold, v1.boundary), (0.9, 1.0));
        let mid = ps[1].choice(0.25, &g, &u);
        assert_eq!((mid.threshold, mid.boundary, mid.neg), (0.4, 0.25, 0.25));
    }

    #[test]
    fn window_on_ppv_piece() {
        // atoms 0.9 (1 pos), 0.5 (0 pos, 2 neg): ppv falls from 1 to 1/3 on piece 2
        let g = group(&[(0.9, 1), (0.5, 0), (0.5, 0)]);
        let f = Frac::of(RateFamily::Ppv, &g).unwrap();
        let p = g.pieces(BoundForm::Lower)[1];
        let (q1, q2) = f.window(&p, 0.5, 0.5).unwrap();
        assert!((q1 - 0.5).abs() < 1e-12 && (q2 - 0.5).abs() < 1e-12);
        assert!((f.at(&p, q1).unwrap() - 0.5).abs() < 1e-12);
        assert!(f.window(&p, 0.1, 0.2).is_none());
    }

    #[test]
    fn undefined_families() {
        let g = group(&[(0.9, 1), (0.4, 1)]);
        assert!(Frac::of(RateFamily::Fpr, &g).is_none());
        assert!(Frac::of(RateFamily::Tpr, &g).is_some());
        let pieces = restrict_defined(&g.pieces(BoundForm::Lower), &[RateFamily::Ppv, RateFamily::For]);
        assert_eq!(pieces.len(), 2);
        assert_eq!((pieces[0].qlo, pieces[0].qhi), (1.0, 1.0));
        assert_eq!((pieces[1].qlo, pieces[1].qhi), (0.0, 0.0));
    }
}
