//! Scripted faulty-node strategies.
//!
//! Faulty nodes never run the protocol; they inject transmissions with
//! arbitrary content and TSS. Every attack here is a deterministic schedule
//! (or a reactive rule) parameterized by the layout, validated against the
//! RSS arithmetic before injection.

use crate::deception::SnareReport;
use crate::geometry::{
    expected_rss_from_claim, rss_at, GeometryError, LayoutSpec, Point, RadioParams, Role,
    RSS_REL_TOL,
};
use crate::protocol::Message;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("{0} is not a faulty node of the layout")]
    NotFaulty(Point),
    #[error("fictitious point {0} coincides with a real node")]
    FictitiousCollision(Point),
    #[error("fictitious point {0} is outside the target's neighborhood")]
    OutOfNeighborhood(Point),
    #[error("snare report does not replay against this layout: {0}")]
    StaleReport(String),
    #[error("placement constraint violated: correct node {node} within clearance radius {radius}")]
    ClearanceViolated { node: Point, radius: f64 },
    #[error("construction infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One adversary broadcast: who transmits, when, how loud, and what.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedTransmission {
    pub at_epoch: u64,
    pub leader: Point,
    pub tss: f64,
    pub message: Message,
}

/// TSS with which `f` reproduces, at `target`, the RSS of a `T_r` broadcast
/// from `victim`: `T = T_r * |target f|^2 / |target victim|^2`.
pub fn impersonate_tss(
    params: &RadioParams,
    f: Point,
    target: Point,
    victim: Point,
) -> Result<f64, AdversaryError> {
    let min_sq = params.r_min_sep * params.r_min_sep;
    let d_tf = target.distance_sq(f);
    let d_tv = target.distance_sq(victim);
    if d_tf < min_sq || d_tv < min_sq || f.distance_sq(victim) < min_sq {
        return Err(GeometryError::DegenerateDistance {
            dist: d_tf.min(d_tv).sqrt(),
            min_sep: params.r_min_sep,
        }
        .into());
    }
    Ok(params.t_r * d_tf / d_tv)
}

/// A self-consistent fictitious clique: announces for every fictitious
/// identity plus all cross-confirms, each tuned so the target measures
/// exactly the RSS the claimed origin would have produced.
pub fn fabricate_universe(
    layout: &LayoutSpec,
    f: Point,
    fictitious: &[Point],
    target: Point,
    start_epoch: u64,
) -> Result<Vec<ScriptedTransmission>, AdversaryError> {
    if layout.role_of(f) != Some(Role::Faulty) {
        return Err(AdversaryError::NotFaulty(f));
    }
    for &nu in fictitious {
        if layout.is_node_position(nu) {
            return Err(AdversaryError::FictitiousCollision(nu));
        }
        if nu.distance(target) > layout.params.d_n {
            return Err(AdversaryError::OutOfNeighborhood(nu));
        }
    }
    let mut epoch = start_epoch;
    let mut out = Vec::new();
    let mut push = |epoch: &mut u64, message: Message| -> Result<(), AdversaryError> {
        let tss = impersonate_tss(&layout.params, f, target, message.claimed_sender)?;
        out.push(ScriptedTransmission { at_epoch: *epoch, leader: f, tss, message });
        *epoch += 1;
        Ok(())
    };
    for &nu in fictitious {
        push(&mut epoch, Message::announce(nu))?;
    }
    for &confirmer in fictitious {
        for &announcer in fictitious {
            if confirmer == announcer {
                continue;
            }
            let confirm = Message::confirm(confirmer, Message::announce(announcer))
                .expect("announce original");
            push(&mut epoch, confirm)?;
        }
    }
    Ok(out)
}

/// Replay a snare: each retinue leader broadcasts `message` re-labelled with
/// the snare point as origin, at its witnessed TSS. Validates the witness
/// against the layout first.
pub fn snare_broadcast(
    layout: &LayoutSpec,
    report: &SnareReport,
    message: &Message,
    at_epoch: u64,
) -> Result<Vec<ScriptedTransmission>, AdversaryError> {
    let params = &layout.params;
    let mut out = Vec::new();
    for (ret, (leader, tss)) in report.retinues.iter().zip(&report.tss_witness) {
        if layout.role_of(*leader) != Some(Role::Faulty) {
            return Err(AdversaryError::StaleReport(format!(
                "leader {leader} is not faulty in this layout"
            )));
        }
        for &x in &ret.members {
            if layout.role_of(x) != Some(Role::Correct) {
                return Err(AdversaryError::StaleReport(format!(
                    "member {x} is not a correct node"
                )));
            }
            let got = rss_at(params, *tss, *leader, x)?;
            let expect = expected_rss_from_claim(params, report.snare_point, x)?;
            if (got - expect).abs() > RSS_REL_TOL * expect {
                return Err(AdversaryError::StaleReport(format!(
                    "witness TSS for {leader} does not reproduce the claim at {x}"
                )));
            }
        }
        let mut relabelled = message.clone();
        relabelled.claimed_sender = report.snare_point;
        out.push(ScriptedTransmission {
            at_epoch,
            leader: *leader,
            tss: *tss,
            message: relabelled,
        });
    }
    Ok(out)
}

/// Reactive discredit rule: whenever the victim transmits, the shadowing
/// faulty node rebroadcasts the same content at a TSS that reproduces, at
/// one observer, the RSS of a reference transmitter. The observer then holds
/// an RSS mismatch against a perfectly correct node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreditRule {
    pub f2: Point,
    /// The correct node whose transmissions are replicated.
    pub victim: Point,
    pub observer: Point,
    pub reference: Point,
    pub tss: f64,
}

/// Build the rule, enforcing the clearance placement: no correct node other
/// than the observer may sit within the replica's range, or the shadow
/// would be unmasked.
pub fn discredit_schedule(
    layout: &LayoutSpec,
    f2: Point,
    victim_k: Point,
    observer_v: Point,
    reference_f1: Point,
) -> Result<DiscreditRule, AdversaryError> {
    let params = &layout.params;
    if layout.role_of(f2) != Some(Role::Faulty) {
        return Err(AdversaryError::NotFaulty(f2));
    }
    let d_vf2 = observer_v.distance(f2);
    let d_vf1 = observer_v.distance(reference_f1);
    let min_sep = params.r_min_sep;
    if d_vf2 < min_sep || d_vf1 < min_sep {
        return Err(GeometryError::DegenerateDistance { dist: d_vf2.min(d_vf1), min_sep }.into());
    }
    let tss = params.t_r * (d_vf2 * d_vf2) / (d_vf1 * d_vf1);
    // Clearance: the replica's range is r_t * |vf2| / |vf1|.
    let clearance = params.range() * d_vf2 / d_vf1;
    for n in &layout.nodes {
        if n.role == Role::Correct && n.position != observer_v {
            let d = n.position.distance(f2);
            if d <= clearance {
                return Err(AdversaryError::ClearanceViolated {
                    node: n.position,
                    radius: clearance,
                });
            }
        }
    }
    Ok(DiscreditRule { f2, victim: victim_k, observer: observer_v, reference: reference_f1, tss })
}

/// A conflict message with arbitrary grounds; its original may or may not
/// exist. Exercises unmatched-message pruning downstream.
pub fn spurious_conflict(
    params: &RadioParams,
    f: Point,
    about: Message,
    at_epoch: u64,
) -> ScriptedTransmission {
    ScriptedTransmission {
        at_epoch,
        leader: f,
        tss: params.t_r,
        message: Message::conflict(f, about),
    }
}

/// Configuration-level strategy descriptions; compiled against a layout
/// before a run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversaryStrategy {
    /// No transmissions at all; evades universes by staying silent.
    Silent,
    /// Explicit transmission schedule.
    Scripted { transmissions: Vec<ScriptedTransmission> },
    /// Fictitious clique tuned for one target node.
    Fabricate {
        leader: usize,
        target: usize,
        fictitious: Vec<Point>,
        #[serde(default)]
        start_epoch: u64,
    },
    /// Conflict message about a message that may never have been sent.
    SpuriousConflict {
        leader: usize,
        about: Message,
        #[serde(default)]
        start_epoch: u64,
    },
    /// Replay of a snare report.
    SnareBroadcast {
        report: SnareReport,
        message: Message,
        #[serde(default)]
        start_epoch: u64,
    },
    /// Reactive victim shadowing.
    Discredit { f2: usize, victim: usize, observer: usize, reference: usize },
}

/// A strategy bound to a layout: a queue of pending transmissions plus an
/// optional reactive rule.
#[derive(Debug, Clone)]
pub struct CompiledAdversary {
    pub queue: std::collections::VecDeque<ScriptedTransmission>,
    pub reactive: Option<DiscreditRule>,
}

impl AdversaryStrategy {
    pub fn compile(&self, layout: &LayoutSpec) -> Result<CompiledAdversary, AdversaryError> {
        let node_pos = |idx: usize| -> Result<Point, AdversaryError> {
            layout
                .nodes
                .get(idx)
                .map(|n| n.position)
                .ok_or_else(|| AdversaryError::Infeasible(format!("node index {idx} out of range")))
        };
        let mut queue = std::collections::VecDeque::new();
        let mut reactive = None;
        match self {
            AdversaryStrategy::Silent => {}
            AdversaryStrategy::Scripted { transmissions } => {
                for t in transmissions {
                    if layout.role_of(t.leader) != Some(Role::Faulty) {
                        return Err(AdversaryError::NotFaulty(t.leader));
                    }
                    queue.push_back(t.clone());
                }
            }
            AdversaryStrategy::Fabricate { leader, target, fictitious, start_epoch } => {
                let f = node_pos(*leader)?;
                let t = node_pos(*target)?;
                for tx in fabricate_universe(layout, f, fictitious, t, *start_epoch)? {
                    queue.push_back(tx);
                }
            }
            AdversaryStrategy::SpuriousConflict { leader, about, start_epoch } => {
                let f = node_pos(*leader)?;
                if layout.role_of(f) != Some(Role::Faulty) {
                    return Err(AdversaryError::NotFaulty(f));
                }
                queue.push_back(spurious_conflict(&layout.params, f, about.clone(), *start_epoch));
            }
            AdversaryStrategy::SnareBroadcast { report, message, start_epoch } => {
                for tx in snare_broadcast(layout, report, message, *start_epoch)? {
                    queue.push_back(tx);
                }
            }
            AdversaryStrategy::Discredit { f2, victim, observer, reference } => {
                reactive = Some(discredit_schedule(
                    layout,
                    node_pos(*f2)?,
                    node_pos(*victim)?,
                    node_pos(*observer)?,
                    node_pos(*reference)?,
                )?);
            }
        }
        Ok(CompiledAdversary { queue, reactive })
    }
}

/// Mimicry schedule for indistinguishability replays: `f` reproduces, at
/// `target`, the full transmission sequence of `victim` with the scaled TSS.
pub fn mimic_schedule(
    params: &RadioParams,
    f: Point,
    target: Point,
    victim_transmissions: &[(u64, Message)],
) -> Result<Vec<ScriptedTransmission>, AdversaryError> {
    let mut out = Vec::new();
    for (epoch, message) in victim_transmissions {
        let tss = impersonate_tss(params, f, target, message.claimed_sender)?;
        out.push(ScriptedTransmission { at_epoch: *epoch, leader: f, tss, message: message.clone() });
    }
    Ok(out)
}

/// The two-layout discredit scenario: a correct node `k`, out of the
/// observer's radio range yet inside its neighborhood, is shadowed by a
/// faulty node parked next to the observer. Requires `d_n` comfortably
/// above `r_t`; with `r_t >= 2 d_n` (or anywhere near it) the geometry
/// cannot exist and the builder refuses.
#[derive(Debug, Clone)]
pub struct DiscreditScenario {
    /// Fictitious variant: no node at `k`, the reference transmitter plays it.
    pub l1: LayoutSpec,
    pub l1_strategy: AdversaryStrategy,
    /// Real variant: `k` is a correct node, the shadow replicates it.
    pub l2: LayoutSpec,
    pub l2_strategy: AdversaryStrategy,
    pub u: Point,
    pub v: Point,
    pub k: Point,
    pub f1: Point,
    pub f2: Point,
}

/// Minimum `d_n / r_t` for the built-in construction's dyadic proportions.
pub const DISCREDIT_MIN_DN_OVER_RT: f64 = 1.125;

pub fn discredit_scenario(params: RadioParams) -> Result<DiscreditScenario, AdversaryError> {
    params.validate()?;
    let r_t = params.range();
    if params.d_n < DISCREDIT_MIN_DN_OVER_RT * r_t {
        return Err(AdversaryError::Infeasible(format!(
            "needs d_n >= {DISCREDIT_MIN_DN_OVER_RT} * r_t so a tracked identity can sit out of \
             the observer's range (d_n = {}, r_t = {r_t})",
            params.d_n
        )));
    }
    // Dyadic multiples of r_t keep the replay arithmetic exact.
    let u = Point::new(0.0, 0.0);
    let k = Point::new(0.75 * r_t, 0.0);
    let v = Point::new(-0.375 * r_t, 0.0);
    let f1 = Point::new(-0.75 * r_t, 0.0);
    let f2 = Point::new(-0.375 * r_t, -0.09375 * r_t);
    use crate::geometry::NodeSpec;
    let l1 = LayoutSpec::new(
        vec![
            NodeSpec { position: u, role: Role::Correct },
            NodeSpec { position: v, role: Role::Correct },
            NodeSpec { position: f1, role: Role::Faulty },
        ],
        params,
    )?;
    let l2 = LayoutSpec::new(
        vec![
            NodeSpec { position: u, role: Role::Correct },
            NodeSpec { position: v, role: Role::Correct },
            NodeSpec { position: k, role: Role::Correct },
            NodeSpec { position: f1, role: Role::Faulty },
            NodeSpec { position: f2, role: Role::Faulty },
        ],
        params,
    )?;
    // In the fictitious variant the reference transmitter performs k's whole
    // protocol role at T_r: announce, then confirm of u's announce. |u f1| =
    // |u k|, so u measures claim-consistent RSS.
    let k_script = vec![
        ScriptedTransmission {
            at_epoch: 0,
            leader: f1,
            tss: params.t_r,
            message: Message::announce(k),
        },
        ScriptedTransmission {
            at_epoch: 1,
            leader: f1,
            tss: params.t_r,
            message: Message::confirm(k, Message::announce(u)).expect("announce original"),
        },
    ];
    let l1_strategy = AdversaryStrategy::Scripted { transmissions: k_script };
    let l2_strategy = AdversaryStrategy::Discredit { f2: 4, victim: 2, observer: 1, reference: 3 };
    // Validate the clearance on the real layout now rather than at run time.
    discredit_schedule(&l2, f2, k, v, f1)?;
    Ok(DiscreditScenario { l1, l1_strategy, l2, l2_strategy, u, v, k, f1, f2 })
}
