//! Pareto frontier and Nash bargaining solution in normalized-utility
//! space, efficiency distances, and a brute-force enumeration oracle.
//!
//! The feasible deal space is the categorical cross-product times the
//! joint continuous intervals. Both utilities are additive over terms, so
//! the achievable set is the Minkowski sum of the 810 discrete points and
//! the image of the continuous box (a zonotope). Only pure contracts are
//! allowed, hence the frontier is generally non-convex; it is computed
//! exactly as the non-dominated envelope of the translated zonotope chains.
//! Every frontier piece varies a single continuous term, so every frontier
//! point, including the NBS, maps back to a concrete contract.
//!
//! [`supported_vertices`] gives the convex-hull (weighted-sum) vertices by
//! an independent route and is used to cross-check the exact frontier.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{joint_bounds, normalize_value, Contract, DomainError, Interval, Role, Term};
use crate::exec::{map_range, map_slice, Parallelism};
use crate::utility::{normalized_utility, UtilityError, UtilityProfile};

const TIE_EPS: f64 = 1e-15;
const EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontierError {
    #[error("feasible deal space is empty: {0}")]
    EmptyFeasibleSpace(DomainError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityPoint {
    pub buyer: f64,
    pub seller: f64,
}

impl UtilityPoint {
    pub fn new(buyer: f64, seller: f64) -> Self {
        Self { buyer, seller }
    }

    pub fn product(&self) -> f64 {
        self.buyer * self.seller
    }

    pub fn distance(&self, other: &UtilityPoint) -> f64 {
        (self.buyer - other.buyer).hypot(self.seller - other.seller)
    }

    /// Weakly better in both coordinates and strictly better in one.
    pub fn dominates(&self, other: &UtilityPoint) -> bool {
        self.buyer >= other.buyer && self.seller >= other.seller && (self.buyer > other.buyer || self.seller > other.seller)
    }

    fn lerp(&self, other: &UtilityPoint, t: f64) -> UtilityPoint {
        UtilityPoint::new(self.buyer + t * (other.buyer - self.buyer), self.seller + t * (other.seller - self.seller))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierVertex {
    pub point: UtilityPoint,
    pub contract: Contract,
}

fn lerp_contract(a: &Contract, b: &Contract, t: f64) -> Contract {
    let mut c = *a;
    for i in 0..4 {
        c.continuous[i] = a.continuous[i] + t * (b.continuous[i] - a.continuous[i]);
    }
    c
}

impl FrontierVertex {
    fn lerp(&self, other: &FrontierVertex, t: f64) -> FrontierVertex {
        FrontierVertex { point: self.point.lerp(&other.point, t), contract: lerp_contract(&self.contract, &other.contract, t) }
    }
}

/// Non-dominated stretch of the frontier along which one continuous term
/// varies; `start == end` for an isolated frontier point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPiece {
    pub start: FrontierVertex,
    pub end: FrontierVertex,
}

impl FrontierPiece {
    fn distance(&self, p: &UtilityPoint) -> f64 {
        segment_distance(&self.start.point, &self.end.point, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NashSolution {
    pub point: UtilityPoint,
    pub product: f64,
    pub contract: Contract,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierCurve {
    /// Frontier corners generated by extreme contracts, buyer utility
    /// ascending and seller utility strictly descending.
    pub vertices: Vec<FrontierVertex>,
    /// Exact frontier geometry, buyer utility ascending.
    pub pieces: Vec<FrontierPiece>,
    pub nbs: NashSolution,
}

impl FrontierCurve {
    pub fn points(&self) -> Vec<UtilityPoint> {
        self.vertices.iter().map(|v| v.point).collect()
    }

    /// Euclidean distance from `p` to the nearest frontier point.
    pub fn distance_to(&self, p: &UtilityPoint) -> f64 {
        self.pieces.iter().map(|s| s.distance(p)).fold(f64::INFINITY, f64::min)
    }

    /// Frontier polyline through all piece endpoints, for plotting.
    pub fn polyline(&self) -> Vec<UtilityPoint> {
        let mut out: Vec<UtilityPoint> = Vec::with_capacity(self.pieces.len() * 2);
        for piece in &self.pieces {
            for p in [piece.start.point, piece.end.point] {
                if out.last().is_none_or(|q| q.distance(&p) > EPS) {
                    out.push(p);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub d_pareto: f64,
    pub d_nbs: f64,
    pub deal_point: UtilityPoint,
}

/// Per-term marginal contributions to each party's normalized utility.
struct Surface {
    joint: [Interval; 4],
    /// [term][endpoint lo/hi] -> (buyer, seller)
    continuous: [[(f64, f64); 2]; 4],
    /// [term][option] -> (buyer, seller)
    categorical: Vec<Vec<(f64, f64)>>,
    /// [false/true] -> (buyer, seller)
    accessories: [(f64, f64); 2],
}

impl Surface {
    fn new(buyer: &UtilityProfile, seller: &UtilityProfile) -> Result<Self, FrontierError> {
        let sb = buyer.scale();
        let ss = seller.scale();
        for s in [sb, ss] {
            if !(s >= 1e-12) {
                return Err(UtilityError::DegenerateScale(s).into());
            }
        }
        let mut joint = [Interval::new(0.0, 0.0); 4];
        let mut continuous = [[(0.0, 0.0); 2]; 4];
        for t in Term::CONTINUOUS {
            let j = joint_bounds(t).map_err(FrontierError::EmptyFeasibleSpace)?;
            joint[t.index()] = j;
            for (e, v) in [j.lo, j.hi].into_iter().enumerate() {
                let cb = buyer.weights[t.index()] * normalize_value(t, Role::Buyer, v) / sb;
                let cs = seller.weights[t.index()] * normalize_value(t, Role::Seller, v) / ss;
                continuous[t.index()][e] = (cb, cs);
            }
        }
        let categorical = Term::CATEGORICAL
            .iter()
            .map(|t| {
                let off = t.schema().offset;
                (0..t.width()).map(|o| (buyer.weights[off + o] / sb, seller.weights[off + o] / ss)).collect()
            })
            .collect();
        let ai = Term::Accessories.schema().offset;
        let accessories = [(0.0, 0.0), (buyer.weights[ai] / sb, seller.weights[ai] / ss)];
        Ok(Self { joint, continuous, categorical, accessories })
    }

    /// Coordinate-wise maximizer of λ·Ũ_b + (1−λ)·Ũ_s. Ties are broken by
    /// the unweighted sum so that λ ∈ {0, 1} still yields a Pareto optimal
    /// contract.
    fn maximize(&self, lambda: f64) -> Contract {
        let better = |a: (f64, f64), b: (f64, f64)| -> bool {
            let sa = lambda * a.0 + (1.0 - lambda) * a.1;
            let sb = lambda * b.0 + (1.0 - lambda) * b.1;
            if (sa - sb).abs() > TIE_EPS {
                sa > sb
            } else {
                a.0 + a.1 > b.0 + b.1 + TIE_EPS
            }
        };
        let mut c = Contract { continuous: [0.0; 4], choices: [0; 5], accessories: false };
        for i in 0..4 {
            let [lo, hi] = self.continuous[i];
            c.continuous[i] = if better(hi, lo) { self.joint[i].hi } else { self.joint[i].lo };
        }
        for (slot, opts) in self.categorical.iter().enumerate() {
            let mut pick = 0;
            for o in 1..opts.len() {
                if better(opts[o], opts[pick]) {
                    pick = o;
                }
            }
            c.choices[slot] = pick as u8;
        }
        c.accessories = better(self.accessories[1], self.accessories[0]);
        c
    }
}

fn evaluate(buyer: &UtilityProfile, seller: &UtilityProfile, c: &Contract) -> Result<UtilityPoint, FrontierError> {
    Ok(UtilityPoint::new(normalized_utility(buyer, c)?, normalized_utility(seller, c)?))
}

/// Options for the weighted-sum route.
#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    /// Number of λ intervals in the uniform sweep.
    pub sweep_steps: usize,
    /// Non-inferior-set refinement between adjacent vertices.
    pub refine: bool,
    pub parallelism: Parallelism,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { sweep_steps: 256, refine: true, parallelism: Parallelism::Sequential }
    }
}

/// Supported frontier vertices from a λ sweep of `λ·Ũ_b + (1−λ)·Ũ_s`,
/// each maximized coordinate-wise, with optional refinement between
/// adjacent vertices. These are the convex-hull corners of the achievable
/// set; all of them lie on the exact frontier.
pub fn supported_vertices(
    buyer: &UtilityProfile,
    seller: &UtilityProfile,
    opts: SweepOptions,
) -> Result<Vec<FrontierVertex>, FrontierError> {
    let surface = Surface::new(buyer, seller)?;
    let steps = opts.sweep_steps.max(1);
    let swept = map_range(opts.parallelism, steps + 1, |i| {
        let c = surface.maximize(i as f64 / steps as f64);
        evaluate(buyer, seller, &c).map(|point| FrontierVertex { point, contract: c })
    });
    let mut vertices = strict_frontier(swept.into_iter().collect::<Result<Vec<_>, _>>()?);
    if opts.refine && vertices.len() > 1 {
        let mut refined = Vec::with_capacity(vertices.len());
        for pair in vertices.windows(2) {
            refined.push(pair[0]);
            refine_between(&surface, buyer, seller, &pair[0], &pair[1], &mut refined, 0)?;
        }
        refined.push(*vertices.last().expect("non-empty"));
        vertices = strict_frontier(refined);
    }
    Ok(vertices)
}

fn refine_between(
    surface: &Surface,
    buyer: &UtilityProfile,
    seller: &UtilityProfile,
    a: &FrontierVertex,
    b: &FrontierVertex,
    out: &mut Vec<FrontierVertex>,
    depth: usize,
) -> Result<(), FrontierError> {
    // a has lower buyer utility and higher seller utility than b
    let db = b.point.buyer - a.point.buyer;
    let ds = a.point.seller - b.point.seller;
    if depth > 64 || db <= 0.0 || ds <= 0.0 {
        return Ok(());
    }
    let lambda = ds / (db + ds);
    let c = surface.maximize(lambda);
    let p = evaluate(buyer, seller, &c)?;
    let base = lambda * a.point.buyer + (1.0 - lambda) * a.point.seller;
    if lambda * p.buyer + (1.0 - lambda) * p.seller > base + EPS {
        let mid = FrontierVertex { point: p, contract: c };
        refine_between(surface, buyer, seller, a, &mid, out, depth + 1)?;
        out.push(mid);
        refine_between(surface, buyer, seller, &mid, b, out, depth + 1)?;
    }
    Ok(())
}

/// Sorts by buyer utility, merges duplicates and drops dominated vertices
/// so that seller utility is strictly decreasing.
fn strict_frontier(mut vs: Vec<FrontierVertex>) -> Vec<FrontierVertex> {
    vs.sort_by(|x, y| y.point.buyer.total_cmp(&x.point.buyer).then(y.point.seller.total_cmp(&x.point.seller)));
    let mut kept: Vec<FrontierVertex> = Vec::new();
    let mut best_seller = f64::NEG_INFINITY;
    for v in vs {
        if v.point.seller > best_seller + EPS {
            if let Some(last) = kept.last() {
                if (last.point.buyer - v.point.buyer).abs() <= EPS {
                    kept.pop();
                }
            }
            best_seller = v.point.seller;
            kept.push(v);
        }
    }
    kept.reverse();
    kept
}

/// Candidate segment: one continuous term moving between its joint
/// endpoints with everything else fixed. `a` has the lower buyer utility.
#[derive(Debug, Clone, Copy)]
struct Segment {
    a: FrontierVertex,
    b: FrontierVertex,
}

impl Segment {
    fn is_point(&self) -> bool {
        self.b.point.buyer - self.a.point.buyer <= EPS
    }

    fn covers(&self, x: f64) -> bool {
        x >= self.a.point.buyer - EPS && x <= self.b.point.buyer + EPS
    }

    fn param(&self, x: f64) -> f64 {
        if self.is_point() {
            0.0
        } else {
            ((x - self.a.point.buyer) / (self.b.point.buyer - self.a.point.buyer)).clamp(0.0, 1.0)
        }
    }

    fn value_at(&self, x: f64) -> f64 {
        if self.is_point() {
            self.a.point.seller.max(self.b.point.seller)
        } else {
            self.a.point.lerp(&self.b.point, self.param(x)).seller
        }
    }

    fn at(&self, x: f64) -> FrontierVertex {
        if self.is_point() {
            if self.a.point.seller >= self.b.point.seller {
                self.a
            } else {
                self.b
            }
        } else {
            self.a.lerp(&self.b, self.param(x))
        }
    }

    /// Buyer coordinate where the segment reaches seller value `s`.
    fn x_at_value(&self, s: f64) -> f64 {
        let (p, q) = (self.a.point, self.b.point);
        let t = ((p.seller - s) / (p.seller - q.seller)).clamp(0.0, 1.0);
        p.buyer + t * (q.buyer - p.buyer)
    }

    fn ideal(&self) -> UtilityPoint {
        UtilityPoint::new(self.b.point.buyer, self.a.point.seller)
    }
}

/// Pareto chain of the continuous box: the sequence of corner contracts
/// (continuous part only) from the seller-best to the buyer-best corner.
fn continuous_chain(surface: &Surface) -> Vec<[f64; 4]> {
    let mut start = [0.0; 4];
    let mut moves: Vec<(usize, f64, f64, f64)> = Vec::new();
    for i in 0..4 {
        let [lo, hi] = surface.continuous[i];
        let (db, ds) = (hi.0 - lo.0, hi.1 - lo.1);
        let j = surface.joint[i];
        let db0 = db.abs() <= TIE_EPS;
        let ds0 = ds.abs() <= TIE_EPS;
        if (db >= 0.0 || db0) && (ds >= 0.0 || ds0) {
            start[i] = if db0 && ds0 { j.lo } else { j.hi };
        } else if (db <= 0.0 || db0) && (ds <= 0.0 || ds0) {
            start[i] = j.lo;
        } else if db > 0.0 {
            // buyer wants hi, seller wants lo
            start[i] = j.lo;
            moves.push((i, j.hi, db, ds));
        } else {
            start[i] = j.hi;
            moves.push((i, j.lo, -db, -ds));
        }
    }
    // cheapest seller loss per unit of buyer gain first keeps the chain concave
    moves.sort_by(|x, y| (y.3 / y.2).total_cmp(&(x.3 / x.2)).then(x.0.cmp(&y.0)));
    let mut chain = vec![start];
    let mut cur = start;
    for (i, target, _, _) in moves {
        cur[i] = target;
        chain.push(cur);
    }
    chain
}

fn discrete_combos() -> Vec<([u8; 5], bool)> {
    let widths: Vec<usize> = Term::CATEGORICAL.iter().map(|t| t.width()).collect();
    let total: usize = widths.iter().product::<usize>() * 2;
    let mut out = Vec::with_capacity(total);
    for mut k in 0..total {
        let acc = k % 2 == 1;
        k /= 2;
        let mut choices = [0u8; 5];
        for (slot, w) in widths.iter().enumerate() {
            choices[slot] = (k % w) as u8;
            k /= w;
        }
        out.push((choices, acc));
    }
    out
}

/// Exact pure-contract Pareto frontier and its Nash bargaining solution
/// (disagreement point (0, 0)).
pub fn compute_frontier(buyer: &UtilityProfile, seller: &UtilityProfile) -> Result<FrontierCurve, FrontierError> {
    let surface = Surface::new(buyer, seller)?;
    let chain = continuous_chain(&surface);

    // non-dominated discrete combinations at the first chain corner
    let mut discrete = Vec::with_capacity(810);
    for (choices, accessories) in discrete_combos() {
        let c = Contract { continuous: chain[0], choices, accessories };
        discrete.push(FrontierVertex { point: evaluate(buyer, seller, &c)?, contract: c });
    }
    let discrete = strict_frontier(discrete);

    let mut corners = Vec::with_capacity(discrete.len() * chain.len());
    for d in &discrete {
        for cont in &chain {
            let c = Contract { continuous: *cont, ..d.contract };
            corners.push(FrontierVertex { point: evaluate(buyer, seller, &c)?, contract: c });
        }
    }
    let mut segments = Vec::new();
    for d in 0..discrete.len() {
        let row = &corners[d * chain.len()..(d + 1) * chain.len()];
        if row.len() == 1 {
            segments.push(Segment { a: row[0], b: row[0] });
        }
        for w in row.windows(2) {
            let (a, b) = if w[0].point.buyer <= w[1].point.buyer { (w[0], w[1]) } else { (w[1], w[0]) };
            segments.push(Segment { a, b });
        }
    }
    let nd_corners = strict_frontier(corners);
    // a segment whose ideal corner is dominated by an achievable corner
    // cannot contribute
    segments.retain(|s| {
        let ideal = s.ideal();
        !nd_corners.iter().any(|v| v.point.buyer > ideal.buyer + EPS && v.point.seller > ideal.seller + EPS)
    });

    let pieces = envelope(&segments);
    let vertices = strict_frontier(
        pieces
            .iter()
            .flat_map(|p| [p.start, p.end])
            .filter(|v| nd_corners.iter().any(|c| c.point.distance(&v.point) <= 1e-10))
            .collect(),
    );
    let nbs = nash_on_pieces(&pieces);
    Ok(FrontierCurve { vertices, pieces, nbs })
}

/// Non-dominated envelope of a set of decreasing segments.
fn envelope(segments: &[Segment]) -> Vec<FrontierPiece> {
    let mut xs: Vec<f64> = segments.iter().flat_map(|s| [s.a.point.buyer, s.b.point.buyer]).collect();
    for (i, s) in segments.iter().enumerate() {
        if s.is_point() {
            continue;
        }
        for t in &segments[i + 1..] {
            if t.is_point() {
                continue;
            }
            let lo = s.a.point.buyer.max(t.a.point.buyer);
            let hi = s.b.point.buyer.min(t.b.point.buyer);
            if hi - lo <= EPS {
                continue;
            }
            let (f0, f1) = (s.value_at(lo) - t.value_at(lo), s.value_at(hi) - t.value_at(hi));
            if f0 * f1 < 0.0 {
                xs.push(lo + (hi - lo) * f0 / (f0 - f1));
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= EPS);

    let top_at = |x: f64| -> Option<(f64, &Segment)> {
        segments
            .iter()
            .filter(|s| s.covers(x))
            .map(|s| (s.value_at(x), s))
            .fold(None, |acc: Option<(f64, &Segment)>, (v, s)| match acc {
                Some((bv, _)) if bv >= v => acc,
                _ => Some((v, s)),
            })
    };
    let top_inside = |lo: f64, hi: f64| -> Option<&Segment> {
        let mid = 0.5 * (lo + hi);
        segments
            .iter()
            .filter(|s| !s.is_point() && s.a.point.buyer < mid && s.b.point.buyer > mid)
            .fold(None, |acc: Option<&Segment>, s| match acc {
                Some(b) if b.value_at(mid) >= s.value_at(mid) => acc,
                _ => Some(s),
            })
    };

    let mut pieces = Vec::new();
    let mut ceiling = f64::NEG_INFINITY;
    for k in (0..xs.len()).rev() {
        if k + 1 < xs.len() {
            let (x0, x1) = (xs[k], xs[k + 1]);
            if let Some(seg) = top_inside(x0, x1) {
                let (e0, e1) = (seg.value_at(x0), seg.value_at(x1));
                if e0 > ceiling + EPS {
                    let x_end = if e1 > ceiling + EPS { x1 } else { seg.x_at_value(ceiling) };
                    pieces.push(FrontierPiece { start: seg.at(x0), end: seg.at(x_end) });
                }
                ceiling = ceiling.max(e0);
            }
        }
        if let Some((v, seg)) = top_at(xs[k]) {
            if v > ceiling + EPS {
                let p = seg.at(xs[k]);
                pieces.push(FrontierPiece { start: p, end: p });
            }
            ceiling = ceiling.max(v);
        }
    }
    pieces.reverse();
    merge_pieces(pieces)
}

/// Drops isolated points that coincide with a neighbouring piece and joins
/// collinear continuations.
fn merge_pieces(pieces: Vec<FrontierPiece>) -> Vec<FrontierPiece> {
    let touches = |p: &FrontierPiece, v: &FrontierVertex| {
        p.start.point.distance(&v.point) <= 1e-10 || p.end.point.distance(&v.point) <= 1e-10
    };
    let mut out: Vec<FrontierPiece> = Vec::with_capacity(pieces.len());
    for (i, p) in pieces.iter().enumerate() {
        let isolated = p.start.point.distance(&p.end.point) <= EPS;
        if isolated {
            let near = |q: Option<&FrontierPiece>| q.is_some_and(|q| q.start.point.distance(&q.end.point) > EPS && touches(q, &p.start));
            if near(out.last()) || near(pieces.get(i + 1)) {
                continue;
            }
        }
        if let Some(last) = out.last_mut() {
            let joined = last.end.point.distance(&p.start.point) <= 1e-10;
            let dl = (last.end.point.buyer - last.start.point.buyer, last.end.point.seller - last.start.point.seller);
            let dp = (p.end.point.buyer - p.start.point.buyer, p.end.point.seller - p.start.point.seller);
            let collinear = (dl.0 * dp.1 - dl.1 * dp.0).abs() <= 1e-14;
            let same_move = last
                .start
                .contract
                .choices
                == p.start.contract.choices
                && last.start.contract.accessories == p.start.contract.accessories;
            if joined && collinear && same_move && !isolated {
                last.end = p.end;
                continue;
            }
        }
        out.push(*p);
    }
    out
}

fn nash_on_pieces(pieces: &[FrontierPiece]) -> NashSolution {
    let mut best: Option<NashSolution> = None;
    let mut consider = |v: FrontierVertex| {
        let product = v.point.product();
        if best.is_none_or(|b| product > b.product) {
            best = Some(NashSolution { point: v.point, product, contract: v.contract });
        }
    };
    for piece in pieces {
        consider(piece.start);
        consider(piece.end);
        let (a1, a2) = (piece.start.point.buyer, piece.start.point.seller);
        let (d1, d2) = (piece.end.point.buyer - a1, piece.end.point.seller - a2);
        let quad = d1 * d2;
        if quad < 0.0 {
            let t = -(a1 * d2 + a2 * d1) / (2.0 * quad);
            if t > 0.0 && t < 1.0 {
                consider(piece.start.lerp(&piece.end, t));
            }
        }
    }
    best.expect("frontier has at least one piece")
}

fn segment_distance(a: &UtilityPoint, b: &UtilityPoint, p: &UtilityPoint) -> f64 {
    let (dx, dy) = (b.buyer - a.buyer, b.seller - a.seller);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a.distance(p);
    }
    let t = (((p.buyer - a.buyer) * dx + (p.seller - a.seller) * dy) / len2).clamp(0.0, 1.0);
    a.lerp(b, t).distance(p)
}

/// Distance from `p` to a polyline given by its vertices.
pub fn polyline_distance(vertices: &[UtilityPoint], p: &UtilityPoint) -> f64 {
    match vertices {
        [] => f64::INFINITY,
        [only] => only.distance(p),
        _ => vertices.windows(2).map(|w| segment_distance(&w[0], &w[1], p)).fold(f64::INFINITY, f64::min),
    }
}

/// Distances of an agreed contract to the frontier and to the NBS.
pub fn efficiency_distances(
    curve: &FrontierCurve,
    deal: &Contract,
    buyer: &UtilityProfile,
    seller: &UtilityProfile,
) -> Result<EfficiencyReport, FrontierError> {
    let deal_point = evaluate(buyer, seller, deal)?;
    Ok(EfficiencyReport {
        d_pareto: curve.distance_to(&deal_point),
        d_nbs: deal_point.distance(&curve.nbs.point),
        deal_point,
    })
}

/// Largest distance from any point of `from` to the curve.
pub fn hausdorff_one_sided(from: &[UtilityPoint], curve: &FrontierCurve, par: Parallelism) -> f64 {
    map_slice(par, from, |p| curve.distance_to(p)).into_iter().fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Non-dominated points, buyer utility ascending.
    pub frontier: Vec<UtilityPoint>,
    pub nbs: UtilityPoint,
    /// Number of contracts the enumeration covers.
    pub contracts_evaluated: u64,
}

/// Non-dominated subset (strict), sorted by buyer utility ascending.
pub fn pareto_filter(mut pts: Vec<UtilityPoint>) -> Vec<UtilityPoint> {
    pts.sort_by(|x, y| y.buyer.total_cmp(&x.buyer).then(y.seller.total_cmp(&x.seller)));
    let mut kept: Vec<UtilityPoint> = Vec::new();
    let mut best_seller = f64::NEG_INFINITY;
    for p in pts {
        if p.seller > best_seller {
            best_seller = p.seller;
            kept.push(p);
        }
    }
    kept.reverse();
    kept
}

fn grid_values(grid_steps: usize) -> Result<[Vec<f64>; 4], FrontierError> {
    let mut out: [Vec<f64>; 4] = Default::default();
    for t in Term::CONTINUOUS {
        let j = joint_bounds(t).map_err(FrontierError::EmptyFeasibleSpace)?;
        out[t.index()] = (0..grid_steps).map(|i| j.lo + j.width() * i as f64 / (grid_steps - 1) as f64).collect();
    }
    Ok(out)
}

fn grid_point(grid: &[Vec<f64>; 4], mut k: usize) -> [f64; 4] {
    let mut v = [0.0; 4];
    for (i, axis) in grid.iter().enumerate() {
        v[i] = axis[k % axis.len()];
        k /= axis.len();
    }
    v
}

/// Enumerates every discrete combination against a `grid_steps`-point grid
/// on each joint continuous interval.
///
/// Utilities are additive across terms, so the point of contract (d, g) is
/// `U(d, g₀) + U(d₀, g) − U(d₀, g₀)`; the non-dominated set of the full sum
/// is contained in the sum of the two non-dominated sets, which keeps fine
/// grids tractable. [`brute_force_naive`] skips the decomposition.
pub fn brute_force_oracle(
    buyer: &UtilityProfile,
    seller: &UtilityProfile,
    grid_steps: usize,
    par: Parallelism,
) -> Result<OracleResult, FrontierError> {
    assert!(grid_steps >= 2, "grid needs both interval endpoints");
    let grid = grid_values(grid_steps)?;
    let combos = discrete_combos();
    let base_cont = grid_point(&grid, 0);
    let base = Contract { continuous: base_cont, choices: [0; 5], accessories: false };
    let p0 = evaluate(buyer, seller, &base)?;

    let discrete_pts = map_slice(par, &combos, |(choices, acc)| {
        evaluate(buyer, seller, &Contract { continuous: base_cont, choices: *choices, accessories: *acc })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let n_grid = grid_steps.pow(4);
    let grid_pts = map_range(par, n_grid, |k| {
        evaluate(buyer, seller, &Contract { continuous: grid_point(&grid, k), choices: [0; 5], accessories: false })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let nd_discrete = pareto_filter(discrete_pts);
    let nd_grid = pareto_filter(grid_pts);
    let mut sums = Vec::with_capacity(nd_discrete.len() * nd_grid.len());
    for d in &nd_discrete {
        for g in &nd_grid {
            sums.push(UtilityPoint::new(d.buyer + g.buyer - p0.buyer, d.seller + g.seller - p0.seller));
        }
    }
    let frontier = pareto_filter(sums);
    let nbs = best_product(&frontier);
    Ok(OracleResult { frontier, nbs, contracts_evaluated: (combos.len() * n_grid) as u64 })
}

/// Full enumeration; every contract is evaluated on its own. Intended for
/// coarse grids.
pub fn brute_force_naive(
    buyer: &UtilityProfile,
    seller: &UtilityProfile,
    grid_steps: usize,
    par: Parallelism,
) -> Result<OracleResult, FrontierError> {
    assert!(grid_steps >= 2, "grid needs both interval endpoints");
    let grid = grid_values(grid_steps)?;
    let combos = discrete_combos();
    let n_grid = grid_steps.pow(4);
    let per_combo = map_slice(par, &combos, |(choices, acc)| {
        let mut pts = Vec::with_capacity(n_grid);
        for k in 0..n_grid {
            let c = Contract { continuous: grid_point(&grid, k), choices: *choices, accessories: *acc };
            pts.push(evaluate(buyer, seller, &c)?);
        }
        Ok::<_, FrontierError>((pts.len() as u64, pareto_filter(pts)))
    });
    let mut all = Vec::new();
    let mut evaluated = 0;
    for r in per_combo {
        let (n, pts) = r?;
        evaluated += n;
        all.extend(pts);
    }
    let frontier = pareto_filter(all);
    let nbs = best_product(&frontier);
    Ok(OracleResult { frontier, nbs, contracts_evaluated: evaluated })
}

fn best_product(pts: &[UtilityPoint]) -> UtilityPoint {
    pts.iter()
        .copied()
        .fold(None, |acc: Option<UtilityPoint>, p| match acc {
            Some(b) if b.product() >= p.product() => Some(b),
            _ => Some(p),
        })
        .unwrap_or(UtilityPoint::new(0.0, 0.0))
}
