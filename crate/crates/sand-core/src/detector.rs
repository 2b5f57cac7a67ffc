//! Universe detectors: the oracle a node consults to decide which universe
//! is real.
//!
//! Detectors are not implementable inside the asynchronous model itself;
//! each concrete detector here encodes a different source of out-of-band
//! power (simulation ground truth, rate bounds, trusted peers, topology
//! knowledge). Class contracts are audited over finished traces rather than
//! assumed: an "eventually" obligation must hold from quiescence onward.

use crate::geometry::Point;
use crate::protocol::{DepGraph, Universe, UniverseSet};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorClass {
    /// Points only at the real, complete universe.
    StronglyPerfect,
    /// May point at a real universe that is not yet complete.
    WeaklyPerfect,
    /// Both properties hold only in a suffix of the computation.
    EventuallyPerfect,
}

/// Everything a detector may look at when queried.
pub struct DetectorInput<'a> {
    pub owner: Point,
    pub epoch: u64,
    /// Epoch of the owner's last announce or conflict arrival.
    pub last_news_epoch: u64,
    pub universes: &'a UniverseSet,
    pub dep: &'a DepGraph,
}

pub trait UniverseDetector: Send {
    fn name(&self) -> &'static str;
    /// Advertised class; the trace auditor checks it per run.
    fn class(&self) -> DetectorClass;
    /// Extra idle epochs the detector needs after quiescence to commit.
    fn settle_hint(&self) -> u64 {
        0
    }
    fn point(&mut self, input: &DetectorInput<'_>) -> Option<Universe>;
}

/// Ground-truth detector: points at the universe equal to the owner's
/// correct neighborhood, as soon as the node's own evidence derives it.
/// Simulation ground truth stands in for the out-of-model power.
pub struct OracleDetector {
    pub truth: BTreeSet<Point>,
}

impl OracleDetector {
    pub fn new(truth: impl IntoIterator<Item = Point>) -> Self {
        OracleDetector { truth: truth.into_iter().collect() }
    }
}

/// Whether `set` is one of the universes derivable from `input`: for the
/// enumerated form, literal membership; past the cap, independence plus
/// conflict-aware maximality checked against the graph.
pub fn universe_derivable(input: &DetectorInput<'_>, set: &BTreeSet<Point>) -> bool {
    match input.universes {
        UniverseSet::Enumerated { universes, .. } => {
            universes.iter().any(|u| &u.identities == set)
        }
        UniverseSet::Overflow { graph } => {
            let idx_of = |p: &Point| graph.candidates.iter().position(|c| c == p);
            let mut indices = BTreeSet::new();
            for p in set {
                match idx_of(p) {
                    Some(i) => {
                        indices.insert(i);
                    }
                    None => return false,
                }
            }
            let independent = graph
                .edges
                .iter()
                .all(|(a, b)| !(indices.contains(a) && indices.contains(b)));
            if !independent {
                return false;
            }
            // Maximal: every outside candidate conflicts with a member.
            (0..graph.candidates.len()).all(|i| {
                indices.contains(&i)
                    || graph
                        .edges
                        .iter()
                        .any(|&(a, b)| (a == i && indices.contains(&b)) || (b == i && indices.contains(&a)))
            })
        }
    }
}

impl UniverseDetector for OracleDetector {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn class(&self) -> DetectorClass {
        DetectorClass::StronglyPerfect
    }

    fn point(&mut self, input: &DetectorInput<'_>) -> Option<Universe> {
        if universe_derivable(input, &self.truth) {
            Some(Universe::new(self.truth.iter().copied()))
        } else {
            None
        }
    }
}

/// Rate-bound detector: once no announce or conflict has arrived for a full
/// window, commit to the largest universe whose members have all confirmed
/// one another. Eventually perfect under the assumption that faulty traffic
/// ceases or is rate-bounded.
pub struct QuiescenceDetector {
    pub window: u64,
}

impl UniverseDetector for QuiescenceDetector {
    fn name(&self) -> &'static str {
        "quiescence"
    }

    fn class(&self) -> DetectorClass {
        DetectorClass::EventuallyPerfect
    }

    fn settle_hint(&self) -> u64 {
        self.window + 1
    }

    fn point(&mut self, input: &DetectorInput<'_>) -> Option<Universe> {
        if input.epoch.saturating_sub(input.last_news_epoch) < self.window {
            return None;
        }
        let universes = input.universes.enumerated()?;
        let qualified: Vec<&Universe> = universes
            .iter()
            .filter(|u| {
                u.identities.iter().all(|&a| {
                    u.identities
                        .iter()
                        .all(|&b| a == b || input.dep.confirmed_by(a, b))
                })
            })
            .collect();
        let best = qualified.iter().map(|u| u.len()).max()?;
        let mut winners = qualified.iter().filter(|u| u.len() == best);
        let first = winners.next()?;
        if winners.next().is_some() {
            return None; // tie
        }
        Some((*first).clone())
    }
}

/// Trusted-peer detector: points at the unique universe containing every
/// trusted identity.
pub struct TrustedSetDetector {
    pub trusted: BTreeSet<Point>,
}

impl UniverseDetector for TrustedSetDetector {
    fn name(&self) -> &'static str {
        "trusted_set"
    }

    fn class(&self) -> DetectorClass {
        DetectorClass::WeaklyPerfect
    }

    fn point(&mut self, input: &DetectorInput<'_>) -> Option<Universe> {
        let universes = input.universes.enumerated()?;
        let mut containing = universes
            .iter()
            .filter(|u| self.trusted.iter().all(|t| u.contains(*t)));
        let first = containing.next()?;
        if containing.next().is_some() {
            return None; // insufficient trust anchors
        }
        Some(first.clone())
    }
}

/// Topology knowledge a node may hold about admissible positions.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyFamily {
    /// Positions lie on a square lattice. An identity faked exactly onto an
    /// unoccupied lattice point cannot be excluded by this knowledge.
    Grid { spacing: f64, origin: Point },
    /// Exact surveyed site positions; the detector commits only when a
    /// universe matches the expected neighbor sites exactly.
    SiteMap { sites: Vec<Point>, d_n: f64 },
}

pub struct TopologyDetector {
    pub family: TopologyFamily,
}

impl TopologyDetector {
    fn on_grid(&self, p: Point) -> bool {
        match &self.family {
            TopologyFamily::Grid { spacing, origin } => {
                let fx = (p.x - origin.x) / spacing;
                let fy = (p.y - origin.y) / spacing;
                let tol = 1e-9;
                (fx - fx.round()).abs() <= tol && (fy - fy.round()).abs() <= tol
            }
            TopologyFamily::SiteMap { .. } => false,
        }
    }
}

impl UniverseDetector for TopologyDetector {
    fn name(&self) -> &'static str {
        "topology"
    }

    fn class(&self) -> DetectorClass {
        DetectorClass::EventuallyPerfect
    }

    fn point(&mut self, input: &DetectorInput<'_>) -> Option<Universe> {
        let universes = input.universes.enumerated()?;
        match &self.family {
            TopologyFamily::Grid { .. } => {
                let lattice: Vec<&Universe> = universes
                    .iter()
                    .filter(|u| u.identities.iter().all(|&p| self.on_grid(p)))
                    .collect();
                let best = lattice.iter().map(|u| u.len()).max()?;
                let mut winners = lattice.iter().filter(|u| u.len() == best);
                let first = winners.next()?;
                if winners.next().is_some() {
                    return None;
                }
                Some((*first).clone())
            }
            TopologyFamily::SiteMap { sites, d_n } => {
                let expected: BTreeSet<Point> = sites
                    .iter()
                    .copied()
                    .filter(|&s| s != input.owner && s.distance(input.owner) <= *d_n)
                    .collect();
                universes
                    .iter()
                    .find(|u| u.identities == expected)
                    .cloned()
            }
        }
    }
}

/// One detector consultation, as recorded in the trace.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DetectorDecision {
    pub epoch: u64,
    pub pointed: Option<Vec<Point>>,
    /// Whether the real complete universe was derivable at this point.
    pub truth_derivable: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct AuditViolation {
    pub epoch: u64,
    pub reason: String,
}

/// Check a node's decision log against the advertised class contract.
///
/// Accuracy: strongly perfect detectors may only ever point at the real
/// complete universe; weakly perfect ones only at sets of real nodes;
/// eventually perfect ones are held to the strong rule from the quiescence
/// epoch on. Completeness (all classes): once the real complete universe is
/// persistently derivable, the final decision must point at it.
pub fn audit_detector_class(
    class: DetectorClass,
    decisions: &[DetectorDecision],
    truth: &BTreeSet<Point>,
    real_positions: &BTreeSet<Point>,
    quiescence_epoch: Option<u64>,
) -> Vec<AuditViolation> {
    let mut violations = Vec::new();
    for d in decisions {
        if let Some(pointed) = &d.pointed {
            let as_set: BTreeSet<Point> = pointed.iter().copied().collect();
            match class {
                DetectorClass::StronglyPerfect => {
                    if &as_set != truth {
                        violations.push(AuditViolation {
                            epoch: d.epoch,
                            reason: format!("pointed at {pointed:?}, not the real complete universe"),
                        });
                    }
                }
                DetectorClass::WeaklyPerfect => {
                    if !as_set.is_subset(real_positions) {
                        violations.push(AuditViolation {
                            epoch: d.epoch,
                            reason: format!("pointed at {pointed:?}, which contains a fictitious identity"),
                        });
                    }
                }
                DetectorClass::EventuallyPerfect => {
                    if let Some(q) = quiescence_epoch {
                        if d.epoch >= q && &as_set != truth {
                            violations.push(AuditViolation {
                                epoch: d.epoch,
                                reason: format!(
                                    "pointed at {pointed:?} after quiescence, not the real complete universe"
                                ),
                            });
                        }
                    }
                }
            }
        }
    }
    // Completeness over the finite suffix.
    if let Some(first_persist) = decisions
        .iter()
        .position(|d| d.truth_derivable)
        .filter(|&i| decisions[i..].iter().all(|d| d.truth_derivable))
    {
        let last = decisions.last().unwrap();
        let points_at_truth = last
            .pointed
            .as_ref()
            .map(|p| p.iter().copied().collect::<BTreeSet<_>>() == *truth)
            .unwrap_or(false);
        if !points_at_truth {
            violations.push(AuditViolation {
                epoch: decisions[first_persist].epoch,
                reason: "real complete universe persistently derivable but never pointed at".into(),
            });
        }
    }
    violations
}
