//! Deception geometry: retinues, deception fields, Apollonius circles, and
//! the snare search.
//!
//! A faulty node can tune its TSS so that a chosen set of receivers measures
//! exactly the RSS a fictitious identity would have produced. The receiver
//! set of any broadcast is distance-downward-closed, which makes the
//! *retinue* (the nearest correct nodes of a leader, ties included) the unit
//! of analysis. The feasibility of a fictitious placement is decided by a
//! small constraint system; closed forms (annuli for one receiver, Apollonius
//! circles for two) exist but the constraint system is normative.

use crate::geometry::{
    expected_rss_from_claim, rss_at, GeometryError, LayoutSpec, Point, RadioParams, Role,
    RSS_REL_TOL,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeceptionError {
    #[error("leader {0} is not a faulty node of the layout")]
    NotFaulty(Point),
    #[error("retinue size {m} out of range (1..={max})")]
    RetinueSize { m: usize, max: usize },
    #[error("{0} is not the nearest correct node of the leader")]
    NotNearest(Point),
    #[error("degenerate point configuration: {0}")]
    Degenerate(String),
    #[error("focus {0} is not a correct node of the layout")]
    FocusNotCorrect(Point),
    #[error("resolution must be positive, got {0}")]
    BadResolution(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// The `m` nearest correct nodes of a faulty leader, expanded so that nodes
/// tied in distance are included together. A broadcast cannot reach one node
/// of a tie group without reaching them all.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Retinue {
    pub leader: Point,
    /// Members ordered by distance from the leader, then by coordinates.
    pub members: Vec<Point>,
    /// Distance from the leader to the farthest member.
    pub closure_radius: f64,
}

/// Correct nodes of `layout` sorted by squared distance from `from`, grouped
/// so that exact distance ties share a group.
fn distance_groups(layout: &LayoutSpec, from: Point) -> Vec<Vec<(Point, f64)>> {
    let mut all: Vec<(Point, f64)> = layout
        .nodes
        .iter()
        .filter(|n| n.role == Role::Correct)
        .map(|n| (n.position, n.position.distance_sq(from)))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let mut groups: Vec<Vec<(Point, f64)>> = Vec::new();
    for (p, d_sq) in all {
        match groups.last_mut() {
            Some(g) if g[0].1 == d_sq => g.push((p, d_sq)),
            _ => groups.push(vec![(p, d_sq)]),
        }
    }
    groups
}

/// The retinue of `leader` with at least `m` members.
pub fn retinue(layout: &LayoutSpec, leader: Point, m: usize) -> Result<Retinue, DeceptionError> {
    if layout.role_of(leader) != Some(Role::Faulty) {
        return Err(DeceptionError::NotFaulty(leader));
    }
    let groups = distance_groups(layout, leader);
    let total: usize = groups.iter().map(|g| g.len()).sum();
    if m < 1 || m > total {
        return Err(DeceptionError::RetinueSize { m, max: total });
    }
    let mut members = Vec::new();
    let mut closure_radius = 0.0;
    for g in &groups {
        if members.len() >= m {
            break;
        }
        for &(p, d_sq) in g {
            members.push(p);
            closure_radius = d_sq.sqrt();
        }
    }
    Ok(Retinue { leader, members, closure_radius })
}

/// TSS the leader can use so that every retinue member measures exactly the
/// RSS a node at `k` broadcasting at `T_r` would have produced, while the
/// nearest correct non-member stays below the receipt threshold and every
/// member both receives the signal and tracks `k` (`|kx| <= d_n`).
///
/// Returns `None` when no such TSS exists.
pub fn deception_tss(layout: &LayoutSpec, ret: &Retinue, k: Point) -> Option<f64> {
    let mut sorted: Vec<(Point, f64)> = layout
        .nodes
        .iter()
        .filter(|n| n.role == Role::Correct)
        .map(|n| (n.position, n.position.distance_sq(ret.leader)))
        .collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    deception_tss_sorted(layout, ret, k, &sorted)
}

/// Core of [`deception_tss`] with the leader's correct-node distance order
/// precomputed, for the sampling search.
fn deception_tss_sorted(
    layout: &LayoutSpec,
    ret: &Retinue,
    k: Point,
    sorted_correct: &[(Point, f64)],
) -> Option<f64> {
    let params = &layout.params;
    if ret.members.is_empty() || layout.is_node_position(k) {
        return None;
    }
    let mut tss: Option<f64> = None;
    for &x in &ret.members {
        // Required TSS for this member: T = T_r * |fx|^2 / |kx|^2.
        let expected = expected_rss_from_claim(params, k, x).ok()?;
        let d_leader_sq = ret.leader.distance_sq(x);
        if d_leader_sq < params.r_min_sep * params.r_min_sep {
            return None;
        }
        let t = expected * d_leader_sq / params.c;
        match tss {
            None => tss = Some(t),
            Some(t0) => {
                if (t - t0).abs() > RSS_REL_TOL * t0 {
                    return None;
                }
            }
        }
        // The member must actually receive, and must track the identity.
        if expected < params.r_min * (1.0 - RSS_REL_TOL) {
            return None;
        }
        if k.distance(x) > params.d_n {
            return None;
        }
    }
    let t = tss?;
    // Non-receipt at the nearest correct non-member; receipt is monotone in
    // distance, so the first non-member in distance order suffices.
    let nearest_non_member = sorted_correct
        .iter()
        .map(|&(p, _)| p)
        .find(|p| !ret.members.contains(p));
    if let Some(y) = nearest_non_member {
        let rss = rss_at(params, t, ret.leader, y).ok()?;
        if rss >= params.r_min * (1.0 - RSS_REL_TOL) {
            return None;
        }
    }
    Some(t)
}

/// Locus of points whose distance ratio to two receivers matches the
/// leader's: a circle for unequal leader distances, the perpendicular
/// bisector when they tie.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ApolloniusLocus {
    Circle { center: Point, radius: f64 },
    /// Degenerate ratio 1: the perpendicular bisector of `(x, y)`.
    Bisector,
}

/// The deception circle of a receiver pair `(x, y)` for leader `f`: every
/// point `p` on it satisfies `|px|/|py| = |fx|/|fy|`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DeceptionCircle {
    pub x: Point,
    pub y: Point,
    /// `|fy|/|fx|`, the constant RSS-ratio signature of the leader.
    pub ratio: f64,
    pub locus: ApolloniusLocus,
}

impl DeceptionCircle {
    /// A point of the locus; `t` is an angle for the circle case and a
    /// signed offset along the bisector otherwise.
    pub fn point_at(&self, t: f64) -> Point {
        match &self.locus {
            ApolloniusLocus::Circle { center, radius } => {
                Point::new(center.x + radius * t.cos(), center.y + radius * t.sin())
            }
            ApolloniusLocus::Bisector => {
                let mx = 0.5 * (self.x.x + self.y.x);
                let my = 0.5 * (self.x.y + self.y.y);
                let dx = self.y.x - self.x.x;
                let dy = self.y.y - self.x.y;
                let len = (dx * dx + dy * dy).sqrt();
                Point::new(mx - dy / len * t, my + dx / len * t)
            }
        }
    }
}

/// Apollonius locus for receivers `x`, `y` and leader `f`.
pub fn deception_circle(x: Point, y: Point, f: Point) -> Result<DeceptionCircle, DeceptionError> {
    if x == y || f == x || f == y {
        return Err(DeceptionError::Degenerate(
            "receivers and leader must be pairwise distinct".into(),
        ));
    }
    let dfx = f.distance(x);
    let dfy = f.distance(y);
    let ratio = dfy / dfx;
    if dfx == dfy {
        return Ok(DeceptionCircle { x, y, ratio, locus: ApolloniusLocus::Bisector });
    }
    // lambda = |px|/|py| on the locus. The points dividing (x, y) internally
    // and externally in this ratio span a diameter.
    let lambda = dfx / dfy;
    let ti = lambda / (1.0 + lambda);
    let te = lambda / (lambda - 1.0);
    let at = |t: f64| Point::new(x.x + t * (y.x - x.x), x.y + t * (y.y - x.y));
    let p_int = at(ti);
    let p_ext = at(te);
    let center = Point::new(0.5 * (p_int.x + p_ext.x), 0.5 * (p_int.y + p_ext.y));
    let radius = 0.5 * p_int.distance(p_ext);
    Ok(DeceptionCircle { x, y, ratio, locus: ApolloniusLocus::Circle { center, radius } })
}

/// Admissible fictitious placements when a single correct node receives.
///
/// The constraint system yields an annulus around the receiver `x`:
/// `r_t * |fx| / |fy| < |kx| <= min(r_t, d_n)` (inner bound absent without a
/// second correct node). The classical sketch instead quotes `|fy|` for the
/// inner radius; both are reported, the constraint bound being normative.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SingleReceiverRegion {
    pub leader: Point,
    pub receiver: Point,
    pub second_nearest: Option<Point>,
    /// Exclusive inner bound on `|kx|` from the constraint system.
    pub constraint_inner: f64,
    /// Inclusive outer bound `min(r_t, d_n)`.
    pub outer: f64,
    /// The classical `|fy|` inner radius, for comparison.
    pub nominal_inner: Option<f64>,
}

impl SingleReceiverRegion {
    pub fn constraint_region_nonempty(&self) -> bool {
        self.constraint_inner < self.outer
    }

    pub fn nominal_region_nonempty(&self) -> bool {
        match self.nominal_inner {
            Some(inner) => inner < self.outer,
            None => true,
        }
    }

    /// Membership per the closed-form annulus.
    pub fn contains(&self, k: Point) -> bool {
        let d = k.distance(self.receiver);
        d > self.constraint_inner && d <= self.outer
    }
}

/// Single-receiver deception region for leader `f` and its nearest correct
/// node `x`.
pub fn single_receiver_region(
    layout: &LayoutSpec,
    f: Point,
    x: Point,
) -> Result<SingleReceiverRegion, DeceptionError> {
    if layout.role_of(f) != Some(Role::Faulty) {
        return Err(DeceptionError::NotFaulty(f));
    }
    let groups = distance_groups(layout, f);
    let first = groups
        .first()
        .ok_or_else(|| DeceptionError::Degenerate("layout has no correct nodes".into()))?;
    if !first.iter().any(|&(p, _)| p == x) {
        return Err(DeceptionError::NotNearest(x));
    }
    let params = &layout.params;
    let r_t = params.range();
    let outer = r_t.min(params.d_n);
    // Second-nearest: the closest correct node other than x itself, which may
    // tie with x.
    let second = groups
        .iter()
        .flat_map(|g| g.iter())
        .map(|&(p, _)| p)
        .find(|&p| p != x);
    let (constraint_inner, nominal_inner) = match second {
        Some(y) => {
            let dfx = f.distance(x);
            let dfy = f.distance(y);
            (r_t * dfx / dfy, Some(dfy))
        }
        None => (0.0, None),
    };
    Ok(SingleReceiverRegion {
        leader: f,
        receiver: x,
        second_nearest: second,
        constraint_inner,
        outer,
        nominal_inner,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnareKind {
    Simple,
    Perfect,
}

/// A witnessed fictitious placement: the snare point, the retinue assignment
/// that realizes it, and the per-leader TSS witnesses.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SnareReport {
    pub focus: Point,
    pub snare_point: Point,
    pub kind: SnareKind,
    pub retinues: Vec<Retinue>,
    /// `(leader, tss)` per participating retinue, same order as `retinues`.
    pub tss_witness: Vec<(Point, f64)>,
    /// Correct nodes receiving the placement consistently (retinue union).
    pub conflict_free_set: Vec<Point>,
}

#[derive(Debug, Clone, Copy)]
pub struct SnareSearchConfig {
    /// At most this many faulty nodes participate in one assignment.
    pub max_participants: usize,
}

impl Default for SnareSearchConfig {
    fn default() -> Self {
        SnareSearchConfig { max_participants: 4 }
    }
}

/// Candidate retinues of one leader: one per distance group prefix.
fn retinue_prefixes(layout: &LayoutSpec, leader: Point) -> Vec<Retinue> {
    let groups = distance_groups(layout, leader);
    let mut out = Vec::new();
    let mut members = Vec::new();
    let mut radius = 0.0;
    for g in &groups {
        for &(p, d_sq) in g {
            members.push(p);
            radius = d_sq.sqrt();
        }
        out.push(Retinue { leader, members: members.clone(), closure_radius: radius });
    }
    out
}

/// Grid-sample the neighborhood disc of `focus` for snare points.
///
/// Sound but only resolution-complete: every returned snare carries a
/// replayable witness, while placements that miss the sample grid (or sit on
/// loci thinner than the grid) can go undetected.
pub fn find_snares(
    layout: &LayoutSpec,
    focus: Point,
    resolution: f64,
) -> Result<Vec<SnareReport>, DeceptionError> {
    find_snares_with(layout, focus, resolution, &SnareSearchConfig::default())
}

pub fn find_snares_with(
    layout: &LayoutSpec,
    focus: Point,
    resolution: f64,
    config: &SnareSearchConfig,
) -> Result<Vec<SnareReport>, DeceptionError> {
    if layout.role_of(focus) != Some(Role::Correct) {
        return Err(DeceptionError::FocusNotCorrect(focus));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(DeceptionError::BadResolution(resolution));
    }
    let params = &layout.params;
    let d_n = params.d_n;
    let leaders: Vec<Point> = layout.faulty_positions();
    let prefixes: Vec<Vec<Retinue>> =
        leaders.iter().map(|&f| retinue_prefixes(layout, f)).collect();
    let sorted: Vec<Vec<(Point, f64)>> = leaders
        .iter()
        .map(|&f| {
            distance_groups(layout, f)
                .into_iter()
                .flatten()
                .collect::<Vec<_>>()
        })
        .collect();

    let mut reports = Vec::new();
    let steps = (d_n / resolution).ceil() as i64;
    for iy in -steps..=steps {
        for ix in -steps..=steps {
            let k = Point::new(
                focus.x + ix as f64 * resolution,
                focus.y + iy as f64 * resolution,
            );
            if k.distance(focus) > d_n {
                continue;
            }
            if let Some(report) =
                evaluate_candidate(layout, focus, k, &prefixes, &sorted, config)
            {
                reports.push(report);
            }
        }
    }
    reports.sort_by_key(|r| r.snare_point);
    Ok(reports)
}

/// Check one candidate point against every admissible retinue assignment.
/// Returns the best witness: perfect beats simple, then fewest participants.
fn evaluate_candidate(
    layout: &LayoutSpec,
    focus: Point,
    k: Point,
    prefixes: &[Vec<Retinue>],
    sorted: &[Vec<(Point, f64)>],
    config: &SnareSearchConfig,
) -> Option<SnareReport> {
    if layout.nodes.iter().any(|n| n.position.distance(k) < layout.params.r_min_sep) {
        return None;
    }
    // Feasible (retinue, tss) options per leader.
    let mut options: Vec<Vec<(&Retinue, f64)>> = Vec::with_capacity(prefixes.len());
    for (pfx, dist_order) in prefixes.iter().zip(sorted) {
        let mut feas = Vec::new();
        for ret in pfx {
            if let Some(t) = deception_tss_sorted(layout, ret, k, dist_order) {
                feas.push((ret, t));
            }
        }
        options.push(feas);
    }
    if options.iter().all(|o| o.is_empty()) {
        return None;
    }

    let r_t = layout.params.range();
    // Correct nodes that would hold an implicit conflict unless covered:
    // within range of both the focus and the placement.
    let coverage: Vec<Point> = layout
        .nodes
        .iter()
        .filter(|n| n.role == Role::Correct)
        .map(|n| n.position)
        .filter(|&p| p.distance(focus) <= r_t && p.distance(k) <= r_t)
        .collect();

    let mut best: Option<SnareReport> = None;
    let mut assignment: Vec<Option<(&Retinue, f64)>> = vec![None; prefixes.len()];
    search_assignments(
        layout,
        focus,
        k,
        &options,
        &coverage,
        config,
        0,
        0,
        &mut assignment,
        &mut best,
    );
    best
}

#[allow(clippy::too_many_arguments)]
fn search_assignments<'a>(
    layout: &LayoutSpec,
    focus: Point,
    k: Point,
    options: &[Vec<(&'a Retinue, f64)>],
    coverage: &[Point],
    config: &SnareSearchConfig,
    idx: usize,
    participants: usize,
    assignment: &mut Vec<Option<(&'a Retinue, f64)>>,
    best: &mut Option<SnareReport>,
) {
    if idx == options.len() {
        let chosen: Vec<(&Retinue, f64)> = assignment.iter().flatten().copied().collect();
        if chosen.is_empty() {
            return;
        }
        let members: BTreeSet<Point> = chosen
            .iter()
            .flat_map(|(r, _)| r.members.iter().copied())
            .collect();
        if !members.contains(&focus) {
            return;
        }
        let kind = if coverage.iter().all(|p| members.contains(p)) {
            SnareKind::Perfect
        } else {
            SnareKind::Simple
        };
        let better = match best {
            None => true,
            Some(b) => {
                (kind == SnareKind::Perfect && b.kind == SnareKind::Simple)
                    || (kind == b.kind && chosen.len() < b.retinues.len())
            }
        };
        if better {
            *best = Some(SnareReport {
                focus,
                snare_point: k,
                kind,
                retinues: chosen.iter().map(|(r, _)| (*r).clone()).collect(),
                tss_witness: chosen.iter().map(|(r, t)| (r.leader, *t)).collect(),
                conflict_free_set: members.into_iter().collect(),
            });
        }
        let _ = layout;
        return;
    }
    // Abstain.
    assignment[idx] = None;
    search_assignments(layout, focus, k, options, coverage, config, idx + 1, participants, assignment, best);
    if participants < config.max_participants {
        for &(ret, t) in &options[idx] {
            assignment[idx] = Some((ret, t));
            search_assignments(
                layout, focus, k, options, coverage, config,
                idx + 1, participants + 1, assignment, best,
            );
        }
        assignment[idx] = None;
    }
}

/// Range condition for discredit-free operation: the correct-node range must
/// reach at least twice the neighborhood distance.
pub fn check_range_condition(params: &RadioParams) -> bool {
    params.range() >= 2.0 * params.d_n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout_gen::{grid_layout, mark_faulty, random_layout};
    use proptest::prelude::*;

    fn grid_with_faults(r_t: f64, faults: &[usize]) -> LayoutSpec {
        let mut layout = grid_layout(3, 3, 1.0, RadioParams::for_range(r_t, r_t)).unwrap();
        mark_faulty(&mut layout, faults).unwrap();
        layout
    }

    #[test]
    fn retinue_nearest_with_second_fault() {
        // Corner fault at index 0, adjacent edge fault at index 3: the
        // corner's nearest correct node is uniquely the other edge neighbor.
        let layout = grid_with_faults(1.5, &[0, 3]);
        let r = retinue(&layout, Point::new(0.0, 0.0), 1).unwrap();
        assert_eq!(r.members, vec![Point::new(1.0, 0.0)]);
        assert_eq!(r.closure_radius, 1.0);
    }

    #[test]
    fn retinue_all_correct() {
        let layout = grid_with_faults(1.5, &[0]);
        let r = retinue(&layout, Point::new(0.0, 0.0), 8).unwrap();
        assert_eq!(r.members.len(), 8);
    }

    #[test]
    fn retinue_tie_expansion() {
        // Single corner fault: its two edge neighbors tie at distance 1.
        let layout = grid_with_faults(1.5, &[0]);
        let r = retinue(&layout, Point::new(0.0, 0.0), 1).unwrap();
        assert_eq!(r.members.len(), 2);
        assert!(r.members.contains(&Point::new(1.0, 0.0)));
        assert!(r.members.contains(&Point::new(0.0, 1.0)));
    }

    #[test]
    fn retinue_rejects_bad_sizes() {
        let layout = grid_with_faults(1.5, &[0]);
        let f = Point::new(0.0, 0.0);
        assert!(retinue(&layout, f, 0).is_err());
        assert!(retinue(&layout, f, 9).is_err());
        assert!(retinue(&layout, Point::new(1.0, 0.0), 1).is_err());
    }

    #[test]
    fn deception_tss_single_member() {
        // Leader u1 with singleton retinue {u2} in the two-fault grid; a
        // placement on the far side of u2 inside the feasible annulus.
        let layout = grid_with_faults(1.5, &[0, 3]);
        let f = Point::new(0.0, 0.0);
        let ret = retinue(&layout, f, 1).unwrap();
        let k = Point::new(2.2, 0.0); // |k-u2| = 1.2 in (1.5/sqrt(2), 1.5]
        let t = deception_tss(&layout, &ret, k).unwrap();
        let x = Point::new(1.0, 0.0);
        let expect = expected_rss_from_claim(&layout.params, k, x).unwrap();
        let got = rss_at(&layout.params, t, f, x).unwrap();
        assert!((got - expect).abs() <= RSS_REL_TOL * expect);
        // Nearest non-member (center node) stays silent.
        let rss_y = rss_at(&layout.params, t, f, Point::new(1.0, 1.0)).unwrap();
        assert!(rss_y < layout.params.r_min);
    }

    #[test]
    fn deception_tss_off_circle_fails() {
        // Two-member retinue, placement off the Apollonius locus.
        let layout = grid_with_faults(1.5, &[0, 3]);
        let f = Point::new(0.0, 1.0);
        let ret = retinue(&layout, f, 1).unwrap(); // tie {u5, u7}
        assert_eq!(ret.members.len(), 2);
        let k = Point::new(0.5, 1.3); // not equidistant from (1,1) and (0,2)
        assert_eq!(deception_tss(&layout, &ret, k), None);
    }

    #[test]
    fn deception_tss_on_circle_succeeds() {
        // On the bisector of the tie pair {u5, u7} of leader u4, within all
        // bounds, the constraint system re-validates.
        let layout = grid_with_faults(1.5, &[0, 3]);
        let f = Point::new(0.0, 1.0);
        let ret = retinue(&layout, f, 1).unwrap();
        let k = Point::new(-0.2, 0.8); // on y = x + 1
        let t = deception_tss(&layout, &ret, k).expect("feasible placement");
        for &x in &ret.members {
            let expect = expected_rss_from_claim(&layout.params, k, x).unwrap();
            let got = rss_at(&layout.params, t, f, x).unwrap();
            assert!((got - expect).abs() <= RSS_REL_TOL * expect);
            assert!(got >= layout.params.r_min);
            assert!(k.distance(x) <= layout.params.d_n);
        }
        // Nearest non-members of u4 sit at sqrt(2): must not receive.
        for y in [Point::new(1.0, 0.0), Point::new(1.0, 2.0)] {
            assert!(rss_at(&layout.params, t, f, y).unwrap() < layout.params.r_min);
        }
    }

    #[test]
    fn circle_degenerate_bisector() {
        let x = Point::new(0.0, 0.0);
        let y = Point::new(2.0, 0.0);
        let f = Point::new(1.0, 5.0); // equidistant
        let c = deception_circle(x, y, f).unwrap();
        assert_eq!(c.locus, ApolloniusLocus::Bisector);
        for t in [-3.0, -1.0, 0.5, 2.0] {
            let p = c.point_at(t);
            assert!((p.distance(x) - p.distance(y)).abs() <= 1e-12 * p.distance(x));
        }
    }

    #[test]
    fn circle_radius_formula() {
        // |xy| = 3 split b/a = 2: radius = b*a/(b-a) = 2.
        let x = Point::new(0.0, 0.0);
        let y = Point::new(3.0, 0.0);
        let f = Point::new(1.0, 0.0); // |fx| = 1, |fy| = 2
        let c = deception_circle(x, y, f).unwrap();
        match c.locus {
            ApolloniusLocus::Circle { center, radius } => {
                assert!((radius - 2.0).abs() < 1e-12);
                assert!((center.x - (-1.0)).abs() < 1e-12);
                assert!(center.y.abs() < 1e-12);
            }
            ApolloniusLocus::Bisector => panic!("unexpected bisector"),
        }
    }

    #[test]
    fn single_receiver_region_no_second_node() {
        // One faulty, one correct node: outer-only disc.
        let params = RadioParams::for_range(2.0, 3.0);
        let layout = LayoutSpec::new(
            vec![
                crate::geometry::NodeSpec { position: Point::new(0.0, 0.0), role: Role::Faulty },
                crate::geometry::NodeSpec { position: Point::new(1.0, 0.0), role: Role::Correct },
            ],
            params,
        )
        .unwrap();
        let region =
            single_receiver_region(&layout, Point::new(0.0, 0.0), Point::new(1.0, 0.0)).unwrap();
        assert_eq!(region.constraint_inner, 0.0);
        assert_eq!(region.outer, 2.0);
        assert_eq!(region.nominal_inner, None);
        assert!(region.constraint_region_nonempty());
    }

    #[test]
    fn single_receiver_region_sparse_grid() {
        // Sparse grid, s <= d_n = r_t < s*sqrt(2), one fault. The nominal
        // ring around a nearest receiver is nonempty; the constraint bound
        // collapses it because the receiver ties with another node.
        let layout = grid_with_faults(1.2, &[0]);
        let region =
            single_receiver_region(&layout, Point::new(0.0, 0.0), Point::new(1.0, 0.0)).unwrap();
        assert!(region.nominal_region_nonempty());
        assert_eq!(region.nominal_inner, Some(1.0));
        assert_eq!(region.second_nearest, Some(Point::new(0.0, 1.0)));
        assert!(!region.constraint_region_nonempty());
    }

    #[test]
    fn single_receiver_region_matches_tss_sampling() {
        // Unique nearest receiver: annulus membership must agree with the
        // constraint system point by point.
        let layout = grid_with_faults(1.5, &[0, 3]);
        let f = Point::new(0.0, 0.0);
        let x = Point::new(1.0, 0.0);
        let region = single_receiver_region(&layout, f, x).unwrap();
        let ret = retinue(&layout, f, 1).unwrap();
        let mut checked = 0;
        for i in -40..=40 {
            for j in -40..=40 {
                let k = Point::new(x.x + i as f64 * 0.05, x.y + j as f64 * 0.05);
                if layout.is_node_position(k) {
                    continue;
                }
                let by_region = region.contains(k);
                let by_tss = deception_tss(&layout, &ret, k).is_some();
                assert_eq!(by_region, by_tss, "disagreement at {k}");
                checked += 1;
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn find_snares_empty_without_faults() {
        let layout = grid_layout(3, 3, 1.0, RadioParams::for_range(1.5, 1.5)).unwrap();
        let reports = find_snares(&layout, Point::new(1.0, 1.0), 0.05).unwrap();
        assert!(reports.is_empty());
    }

    #[test]
    fn find_snares_robust_grid_single_fault() {
        // s*sqrt(2) <= d_n = r_t < 2s: the center node's neighborhood holds
        // no snare under any single fault.
        for fault in [0usize, 1, 2, 3, 5, 6, 7, 8] {
            let layout = grid_with_faults(1.45, &[fault]);
            let reports = find_snares(&layout, Point::new(1.0, 1.0), 0.05).unwrap();
            assert!(reports.is_empty(), "fault {fault} produced {}", reports.len());
        }
    }

    #[test]
    fn find_snares_two_fault_grid() {
        let layout = grid_with_faults(1.5, &[0, 3]);
        let reports = find_snares(&layout, Point::new(1.0, 1.0), 0.01).unwrap();
        assert!(!reports.is_empty());
        assert!(reports.iter().any(|r| r.kind == SnareKind::Perfect));
        // Every witness replays: members see claim-consistent RSS, the
        // nearest non-member of each leader stays silent.
        for rep in &reports {
            for (ret, (leader, t)) in rep.retinues.iter().zip(&rep.tss_witness) {
                assert_eq!(ret.leader, *leader);
                for &x in &ret.members {
                    let expect =
                        expected_rss_from_claim(&layout.params, rep.snare_point, x).unwrap();
                    let got = rss_at(&layout.params, *t, *leader, x).unwrap();
                    assert!((got - expect).abs() <= RSS_REL_TOL * expect);
                }
            }
        }
    }

    #[test]
    fn range_condition_boundary() {
        assert!(check_range_condition(&RadioParams::for_range(2.0, 1.0)));
        assert!(check_range_condition(&RadioParams::for_range(3.0, 1.0)));
        assert!(!check_range_condition(&RadioParams::for_range(1.9, 1.0)));
    }

    #[test]
    fn three_noncollinear_receivers_infeasible() {
        // A three-member non-collinear retinue admits no placement other
        // than the sender itself, which is excluded.
        let params = RadioParams::for_range(10.0, 10.0);
        let layout = LayoutSpec::new(
            vec![
                crate::geometry::NodeSpec { position: Point::new(0.0, 1.0), role: Role::Faulty },
                crate::geometry::NodeSpec { position: Point::new(1.0, 0.0), role: Role::Correct },
                crate::geometry::NodeSpec { position: Point::new(-1.0, 0.5), role: Role::Correct },
                crate::geometry::NodeSpec { position: Point::new(0.5, 2.0), role: Role::Correct },
            ],
            params,
        )
        .unwrap();
        let ret = retinue(&layout, Point::new(0.0, 1.0), 3).unwrap();
        assert_eq!(ret.members.len(), 3);
        let mut feasible = 0;
        for i in -60..=60 {
            for j in -60..=60 {
                let k = Point::new(i as f64 * 0.05, j as f64 * 0.05);
                if layout.is_node_position(k) {
                    continue;
                }
                if deception_tss(&layout, &ret, k).is_some() {
                    feasible += 1;
                }
            }
        }
        assert_eq!(feasible, 0);
    }

    #[test]
    fn brute_force_equivalence_small_layout() {
        // Independent oracle: same candidate grid, retinues re-derived by a
        // full sort, constraints re-evaluated from the raw formulas.
        let params = RadioParams::for_range(1.5, 1.0);
        let layout = LayoutSpec::new(
            vec![
                crate::geometry::NodeSpec { position: Point::new(0.0, 0.0), role: Role::Faulty },
                crate::geometry::NodeSpec { position: Point::new(0.9, 0.1), role: Role::Correct },
                crate::geometry::NodeSpec { position: Point::new(1.7, -0.2), role: Role::Correct },
                crate::geometry::NodeSpec { position: Point::new(0.3, 1.9), role: Role::Correct },
                crate::geometry::NodeSpec { position: Point::new(-1.3, 0.6), role: Role::Faulty },
            ],
            params,
        )
        .unwrap();
        let focus = Point::new(0.9, 0.1);
        let res = params.d_n / 200.0;
        let got = find_snares(&layout, focus, res).unwrap();
        let expected = oracle_snare_points(&layout, focus, res);
        let got_points: Vec<Point> = got.iter().map(|r| r.snare_point).collect();
        assert_eq!(got_points, expected);
    }

    /// Exhaustive single-purpose re-derivation used as the search oracle.
    fn oracle_snare_points(layout: &LayoutSpec, focus: Point, res: f64) -> Vec<Point> {
        let p = &layout.params;
        let faulty = layout.faulty_positions();
        let correct = layout.correct_positions();
        let mut found = Vec::new();
        let steps = (p.d_n / res).ceil() as i64;
        for iy in -steps..=steps {
            for ix in -steps..=steps {
                let k = Point::new(focus.x + ix as f64 * res, focus.y + iy as f64 * res);
                if k.distance(focus) > p.d_n
                    || layout.nodes.iter().any(|n| n.position.distance(k) < p.r_min_sep)
                {
                    continue;
                }
                // Per-leader feasible member counts.
                let mut per_leader: Vec<Vec<Vec<Point>>> = Vec::new();
                for &f in &faulty {
                    let mut sorted: Vec<Point> = correct.clone();
                    sorted.sort_by(|a, b| {
                        a.distance_sq(f).total_cmp(&b.distance_sq(f)).then_with(|| a.cmp(b))
                    });
                    let mut feas = Vec::new();
                    for m in 1..=sorted.len() {
                        // expand ties
                        let mut m_eff = m;
                        while m_eff < sorted.len()
                            && sorted[m_eff].distance_sq(f) == sorted[m_eff - 1].distance_sq(f)
                        {
                            m_eff += 1;
                        }
                        if m_eff != m {
                            continue;
                        }
                        let members = &sorted[..m_eff];
                        let t0 = p.t_r * members[0].distance_sq(f) / k.distance_sq(members[0]);
                        let consistent = members.iter().all(|&x| {
                            let t = p.t_r * x.distance_sq(f) / k.distance_sq(x);
                            (t - t0).abs() <= RSS_REL_TOL * t0
                                && p.c * p.t_r / k.distance_sq(x)
                                    >= p.r_min * (1.0 - RSS_REL_TOL)
                                && k.distance(x) <= p.d_n
                        });
                        if !consistent {
                            continue;
                        }
                        let silent = sorted.get(m_eff).is_none_or(|&y| {
                            p.c * t0 / y.distance_sq(f) < p.r_min * (1.0 - RSS_REL_TOL)
                        });
                        if silent {
                            feas.push(members.to_vec());
                        }
                    }
                    per_leader.push(feas);
                }
                // Some combination must cover the focus.
                let mut ok = false;
                for mask in 1..(1usize << faulty.len()) {
                    if mask.count_ones() as usize > 4 {
                        continue;
                    }
                    let mut covered = false;
                    let mut valid_any = vec![false; faulty.len()];
                    for (i, feas) in per_leader.iter().enumerate() {
                        if mask & (1 << i) != 0 {
                            valid_any[i] = !feas.is_empty();
                            if feas.iter().any(|m| m.contains(&focus)) {
                                covered = true;
                            }
                        }
                    }
                    let all_valid = (0..faulty.len())
                        .filter(|i| mask & (1 << i) != 0)
                        .all(|i| valid_any[i]);
                    if covered && all_valid {
                        ok = true;
                        break;
                    }
                }
                if ok {
                    found.push(k);
                }
            }
        }
        found.sort();
        found
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // Downward closure against a plain sort-by-distance oracle.
        #[test]
        fn retinue_downward_closed(seed in 0u64..500, m in 1usize..6) {
            let params = RadioParams::for_range(2.0, 2.0);
            let mut layout = random_layout(8, 4.0, 4.0, 0.2, seed, params).unwrap();
            mark_faulty(&mut layout, &[0]).unwrap();
            let leader = layout.nodes[0].position;
            let ret = retinue(&layout, leader, m).unwrap();
            let radius_sq = ret.closure_radius * ret.closure_radius;
            for q in layout.correct_positions() {
                let inside = q.distance_sq(leader) <= radius_sq * (1.0 + 1e-12);
                prop_assert_eq!(inside, ret.members.contains(&q));
            }
            prop_assert!(ret.members.len() >= m);
        }

        // Sampled points of a deception circle keep the distance ratio.
        #[test]
        fn circle_ratio_invariant(fx in 0.3..3.0f64, fy_mult in 1.2..4.0f64, angle in 0.0..std::f64::consts::TAU) {
            let x = Point::new(0.0, 0.0);
            let y = Point::new(2.0, 0.0);
            let f = Point::new(fx * angle.cos(), fx * angle.sin());
            let target_ratio = f.distance(x) / f.distance(y);
            prop_assume!((target_ratio - 1.0).abs() > 0.1 && fy_mult > 0.0);
            let c = deception_circle(x, y, f).unwrap();
            if let ApolloniusLocus::Circle { .. } = c.locus {
                for i in 0..64 {
                    let p = c.point_at(i as f64 * std::f64::consts::TAU / 64.0);
                    let ratio = p.distance(x) / p.distance(y);
                    prop_assert!((ratio - target_ratio).abs() <= 1e-9 * target_ratio,
                        "ratio {} vs {}", ratio, target_ratio);
                }
            }
        }
    }
}
