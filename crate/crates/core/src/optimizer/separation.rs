//! Separation with both error rates constrained. Each group's achievable
//! `(negatives accepted, positives accepted)` set is the convex hull of its
//! ROC staircase, and every hull point is a mix of two staircase points.

use std::collections::BTreeMap;

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::path::{prefer, Choice, GroupData, Piece};
use crate::error::{Error, Result};
use crate::model::{BoundForm, Cutoff, DecisionRule, UtilityMatrix};

/// Target point of one group, realized as `w * first + (1 - w) * second`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Realized {
    pub first: Choice,
    pub second: Choice,
    pub weight: f64,
}

impl Realized {
    fn single(c: Choice) -> Self {
        Self { first: c, second: c, weight: 1.0 }
    }

    #[cfg(test)]
    fn point(&self) -> (f64, f64) {
        let w = self.weight;
        (w * self.first.pos + (1.0 - w) * self.second.pos, w * self.first.neg + (1.0 - w) * self.second.neg)
    }
}

fn vertices(g: &GroupData) -> Vec<(f64, f64)> {
    let mut v = vec![(0.0, 0.0)];
    let (mut pos, mut neg) = (0.0, 0.0);
    for a in &g.atoms {
        pos += a.pos;
        neg += a.neg;
        v.push((pos, neg));
    }
    v
}

/// Rates `(fpr, tpr)` of a count point; an empty class maps to 0.
fn rates(g: &GroupData, p: (f64, f64)) -> (f64, f64) {
    let r = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    (r(p.1, g.n_neg), r(p.0, g.n_pos))
}

pub(crate) fn solve(groups: &[GroupData], gamma: f64, u: &UtilityMatrix) -> Result<Vec<Realized>> {
    if gamma <= 0.0 {
        return Ok(groups.iter().map(|g| Realized::single(best_vertex(g, u))).collect());
    }
    let complete = groups.iter().all(|g| g.n_pos > 0.0 && g.n_neg > 0.0);
    let targets = if gamma >= 1.0 && complete { common_point(groups, u) } else { lp_points(groups, gamma, u)? };
    groups
        .iter()
        .zip(targets)
        .map(|(g, p)| {
            realize(g, p, u).ok_or_else(|| Error::Solver(format!("could not realize target for group `{}`", g.name)))
        })
        .collect()
}

fn best_vertex(g: &GroupData, u: &UtilityMatrix) -> Choice {
    let pieces = g.pieces(BoundForm::Lower);
    let mut best = pieces[0].choice(0.0, g, u);
    for p in &pieces {
        let c = p.choice(1.0, g, u);
        if prefer(&c, &best) {
            best = c;
        }
    }
    best
}

type Pt = (f64, f64);

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise hull without collinear points.
fn hull(mut pts: Vec<Pt>) -> Vec<Pt> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Pt> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Pt> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Clips `subject` to the half-planes of a convex counter-clockwise `clip` polygon.
fn clip(subject: &[Pt], clip: &[Pt]) -> Vec<Pt> {
    let mut out = subject.to_vec();
    if clip.len() < 3 {
        // Degenerate clip region: keep the subject points lying on it.
        return out.into_iter().filter(|p| on_segment(clip[0], *clip.last().expect("nonempty"), *p)).collect();
    }
    for i in 0..clip.len() {
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let inside = |p: Pt| cross(a, b, p) >= -1e-12;
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (ci, pi) = (inside(cur), inside(prev));
            if ci != pi {
                let (d1, d2) = (cross(a, b, prev), cross(a, b, cur));
                let t = d1 / (d1 - d2);
                out.push((prev.0 + t * (cur.0 - prev.0), prev.1 + t * (cur.1 - prev.1)));
            }
            if ci {
                out.push(cur);
            }
        }
        if out.is_empty() {
            break;
        }
    }
    out
}

fn on_segment(a: Pt, b: Pt, p: Pt) -> bool {
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt().max(1e-300);
    cross(a, b, p).abs() / len <= 1e-12
        && p.0 >= a.0.min(b.0) - 1e-12
        && p.0 <= a.0.max(b.0) + 1e-12
        && p.1 >= a.1.min(b.1) - 1e-12
        && p.1 <= a.1.max(b.1) + 1e-12
}

/// Exact parity: best vertex of the intersection of all groups' ROC hulls.
fn common_point(groups: &[GroupData], u: &UtilityMatrix) -> Vec<Pt> {
    let hulls: Vec<Vec<Pt>> =
        groups.iter().map(|g| hull(vertices(g).into_iter().map(|p| rates(g, p)).collect())).collect();
    let mut region = hulls[0].clone();
    for h in &hulls[1..] {
        region = clip(&region, h);
    }
    // The diagonal from (0,0) to (1,1) lies in every hull.
    region.push((0.0, 0.0));
    region.push((1.0, 1.0));
    let value = |t: Pt| -> f64 { groups.iter().map(|g| g.utility(u, t.1 * g.n_pos, t.0 * g.n_neg)).sum() };
    let mut best = region[0];
    for &t in &region[1..] {
        let (vt, vb) = (value(t), value(best));
        if vt > vb + 1e-12 * (1.0 + vb.abs()) || ((vt - vb).abs() <= 1e-12 * (1.0 + vb.abs()) && t < best) {
            best = t;
        }
    }
    groups.iter().map(|g| (best.1 * g.n_pos, best.0 * g.n_neg)).collect()
}

/// Relaxed separation as a linear program over vertex weights.
fn lp_points(groups: &[GroupData], gamma: f64, u: &UtilityMatrix) -> Result<Vec<Pt>> {
    let n: f64 = groups.iter().map(GroupData::n).sum();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let verts: Vec<Vec<Pt>> = groups.iter().map(vertices).collect();
    let vars: Vec<Vec<microlp::Variable>> = groups
        .iter()
        .zip(&verts)
        .map(|(g, vs)| vs.iter().map(|v| lp.add_var(g.utility(u, v.0, v.1) / n, (0.0, 1.0))).collect())
        .collect();
    for vs in &vars {
        let terms: Vec<(microlp::Variable, f64)> = vs.iter().map(|v| (*v, 1.0)).collect();
        lp.add_constraint(&terms, ComparisonOp::Eq, 1.0);
    }
    // tpr uses the positive count, fpr the negative count
    type Count = fn(&GroupData) -> f64;
    type Coord = fn(Pt) -> f64;
    let families: [(Count, Coord); 2] = [(|g| g.n_pos, |p| p.0), (|g| g.n_neg, |p| p.1)];
    for (class, coord) in families {
        for (gi, g) in groups.iter().enumerate() {
            for (hi, h) in groups.iter().enumerate() {
                if gi == hi || class(g) <= 0.0 || class(h) <= 0.0 {
                    continue;
                }
                let mut terms: Vec<(microlp::Variable, f64)> = Vec::new();
                for (v, p) in vars[gi].iter().zip(&verts[gi]) {
                    terms.push((*v, coord(*p) / class(g)));
                }
                for (v, p) in vars[hi].iter().zip(&verts[hi]) {
                    terms.push((*v, -gamma * coord(*p) / class(h)));
                }
                lp.add_constraint(&terms, ComparisonOp::Ge, 0.0);
            }
        }
    }
    let solution = lp
        .solve()
        .map_err(|e| Error::Solver(e.to_string()))?
        .into_solution()
        .map_err(|_| Error::Solver("linear program interrupted".into()))?;
    Ok(vars
        .iter()
        .zip(&verts)
        .map(|(vs, ps)| {
            let weights: Vec<f64> = vs.iter().map(|v| solution[*v].max(0.0)).collect();
            let total: f64 = weights.iter().sum();
            let mut p = (0.0, 0.0);
            for (w, v) in weights.iter().zip(ps) {
                p.0 += w / total * v.0;
                p.1 += w / total * v.1;
            }
            p
        })
        .collect())
}

/// Writes a count point as a single (possibly randomized) threshold or a mix of two.
pub(crate) fn realize(g: &GroupData, p: Pt, u: &UtilityMatrix) -> Option<Realized> {
    let pieces = g.pieces(BoundForm::Lower);
    let scale = g.n().max(1.0);
    let eps = 1e-10 * scale;
    let vs = vertices(g);
    let vertex_choice = |k: usize| -> Choice {
        if k == 0 {
            pieces[0].choice(0.0, g, u)
        } else {
            pieces[k - 1].choice(1.0, g, u)
        }
    };
    let dist = |a: Pt, b: Pt| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();

    for (k, v) in vs.iter().enumerate() {
        if dist(*v, p) <= eps {
            return Some(Realized::single(vertex_choice(k)));
        }
    }
    for piece in &pieces {
        if let Some(q) = segment_param(piece.at(0.0), piece.at(1.0), p, eps) {
            return Some(Realized::single(piece.choice(q, g, u)));
        }
    }
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            if let Some(t) = segment_param(vs[i], vs[j], p, eps) {
                // p = (1 - t) v_i + t v_j
                return Some(Realized { first: vertex_choice(i), second: vertex_choice(j), weight: 1.0 - t });
            }
        }
    }
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            if let Some(r) = two_pieces(g, &pieces[i], &pieces[j], p, u) {
                return Some(r);
            }
        }
    }
    None
}

/// `t` with `p = a + t (b - a)`, if `p` is on the segment.
fn segment_param(a: Pt, b: Pt, p: Pt, eps: f64) -> Option<f64> {
    let d = (b.0 - a.0, b.1 - a.1);
    let len2 = d.0 * d.0 + d.1 * d.1;
    if len2 == 0.0 {
        return None;
    }
    let t = ((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / len2;
    if !(-1e-12..=1.0 + 1e-12).contains(&t) {
        return None;
    }
    let t = t.clamp(0.0, 1.0);
    let proj = (a.0 + t * d.0, a.1 + t * d.1);
    (((proj.0 - p.0).powi(2) + (proj.1 - p.1).powi(2)).sqrt() <= eps).then_some(t)
}

/// Decomposes `p` inside the hull of two pieces via a triangle of their endpoints.
fn two_pieces(g: &GroupData, pi: &Piece, pj: &Piece, p: Pt, u: &UtilityMatrix) -> Option<Realized> {
    let pts = [(pi, 0.0), (pi, 1.0), (pj, 0.0), (pj, 1.0)];
    let tris = [[0, 1, 2], [0, 1, 3], [2, 3, 0], [2, 3, 1]];
    for tri in tris {
        let [a, b, c] = tri.map(|k| pts[k].0.at(pts[k].1));
        let area = cross(a, b, c);
        if area.abs() <= 1e-12 {
            continue;
        }
        let la = cross(p, b, c) / area;
        let lb = cross(a, p, c) / area;
        let lc = 1.0 - la - lb;
        if la < -1e-12 || lb < -1e-12 || lc < -1e-12 {
            continue;
        }
        let (la, lb, lc) = (la.max(0.0), lb.max(0.0), lc.max(0.0));
        let s = la + lb + lc;
        let (la, lb) = (la / s, lb / s);
        // a and b share a piece; merge them into one point on it.
        let (shared, other) = (pts[tri[0]].0, pts[tri[2]]);
        let wab = la + lb;
        let first = shared.choice(if wab > 0.0 { lb / wab } else { 0.0 }, g, u);
        let second = other.0.choice(other.1, g, u);
        return Some(Realized { first, second, weight: wab }.tidy());
    }
    None
}

impl Realized {
    fn tidy(self) -> Self {
        if self.weight >= 1.0 {
            Self::single(self.first)
        } else if self.weight <= 0.0 {
            Self::single(self.second)
        } else {
            self
        }
    }
}

/// Builds a group threshold rule, or a per-group mixture of two of them.
pub(crate) fn to_rule(groups: &[GroupData], realized: &[Realized]) -> DecisionRule {
    let cut = |c: &Choice| Cutoff::new(c.threshold, c.boundary);
    let first: BTreeMap<String, Cutoff> =
        groups.iter().zip(realized).map(|(g, r)| (g.name.clone(), cut(&r.first))).collect();
    if realized.iter().all(|r| r.weight >= 1.0) {
        return DecisionRule::GroupThreshold { groups: first };
    }
    let second = groups.iter().zip(realized).map(|(g, r)| (g.name.clone(), cut(&r.second))).collect();
    let weights = groups.iter().zip(realized).map(|(g, r)| (g.name.clone(), r.weight)).collect();
    DecisionRule::Mixture {
        first: Box::new(DecisionRule::GroupThreshold { groups: first }),
        second: Box::new(DecisionRule::GroupThreshold { groups: second }),
        weights,
    }
}
