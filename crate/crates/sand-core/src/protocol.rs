//! The node state machine: announce/confirm/conflict messages, explicit and
//! implicit conflict detection, the message dependency graph, and universe
//! derivation.
//!
//! Identities are coordinates; the receiver can never tell two senders
//! apart, so structurally identical messages are one message. Knowledge a
//! node cannot verify is organized into *universes*: maximal sets of
//! announced identities with no recorded conflict between any pair. Picking
//! the real universe is delegated to a detector.

use crate::geometry::{
    expected_rss_from_claim, LayoutSpec, Point, RadioParams, Role, RSS_REL_TOL,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Announce,
    Confirm,
    Conflict,
}

/// A broadcast message. Confirm and conflict attach the original message
/// they refer to; every message carries the sender's claimed coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub struct Message {
    pub kind: MessageKind,
    pub claimed_sender: Point,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub original: Option<Box<Message>>,
    /// Opaque content identity; distinct payloads are distinct messages.
    #[serde(default)]
    pub payload: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("confirm must reference an announce")]
    ConfirmOfNonAnnounce,
    #[error("detector pointed at a set with a recorded conflict between {0} and {1}")]
    PointerNotConflictFree(Point, Point),
    #[error("detector pointed at an identity with a direct conflict: {0}")]
    PointerContainsFlagged(Point),
}

impl Message {
    pub fn announce(sender: Point) -> Message {
        Message { kind: MessageKind::Announce, claimed_sender: sender, original: None, payload: 0 }
    }

    pub fn confirm(sender: Point, original: Message) -> Result<Message, ProtocolError> {
        if original.kind != MessageKind::Announce {
            return Err(ProtocolError::ConfirmOfNonAnnounce);
        }
        Ok(Message {
            kind: MessageKind::Confirm,
            claimed_sender: sender,
            original: Some(Box::new(original)),
            payload: 0,
        })
    }

    /// Conflicts may reference a message of any kind.
    pub fn conflict(sender: Point, original: Message) -> Message {
        Message {
            kind: MessageKind::Conflict,
            claimed_sender: sender,
            original: Some(Box::new(original)),
            payload: 0,
        }
    }

    /// Claimed coordinates of this message and its whole original chain.
    pub fn referenced_identities(&self) -> Vec<Point> {
        let mut out = vec![self.claimed_sender];
        let mut cur = self.original.as_deref();
        while let Some(m) = cur {
            out.push(m.claimed_sender);
            cur = m.original.as_deref();
        }
        out
    }
}

/// One inbox entry: physical receipt is instantaneous and the RSS is
/// measured exactly at insertion time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceivedRecord {
    pub message: Message,
    pub measured_rss: f64,
    pub arrival_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConflictKind {
    Explicit,
    Implicit,
}

/// A conflict this node observed itself (as opposed to one reported by a
/// peer, which lives in the dependency graph as a conflict message).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictRecord {
    pub subject: Message,
    pub kind: ConflictKind,
    pub observer: Point,
}

/// Message dependency graph: one vertex per distinct message, dependency
/// edges from confirms to their announces and from conflicts to their
/// originals. Vertices whose dependency is missing are kept as tombstones
/// and revived if the dependency arrives later, so insertion order never
/// changes the live set. Dependencies are structural sub-messages, which
/// rules out cycles, and live sinks are always announces.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DepGraph {
    vertices: Vec<Message>,
    live: Vec<bool>,
    #[serde(skip)]
    index: HashMap<Message, usize>,
    /// Vertices whose original is vertex `i`.
    #[serde(skip)]
    dependents: HashMap<usize, Vec<usize>>,
    /// Vertices waiting for an original that has not been recorded yet.
    #[serde(skip)]
    waiting: HashMap<Message, Vec<usize>>,
}

impl DepGraph {
    pub fn new() -> Self {
        DepGraph::default()
    }

    /// Insert a message, merging with an identical existing vertex, then
    /// re-evaluate pruning. Liveness is monotone under insertion (nothing is
    /// ever removed), so revival propagates forward only.
    pub fn record(&mut self, message: &Message) {
        if self.index.contains_key(message) {
            return;
        }
        let i = self.vertices.len();
        self.index.insert(message.clone(), i);
        self.vertices.push(message.clone());
        let alive = match message.kind {
            MessageKind::Announce => true,
            _ => {
                let orig = message.original.as_deref().expect("non-announce has an original");
                match self.index.get(orig) {
                    Some(&j) => {
                        self.dependents.entry(j).or_default().push(i);
                        self.live[j]
                    }
                    None => {
                        self.waiting.entry(orig.clone()).or_default().push(i);
                        false
                    }
                }
            }
        };
        self.live.push(alive);
        // Adopt any vertices that were waiting for exactly this message.
        if let Some(waiters) = self.waiting.remove(message) {
            self.dependents.entry(i).or_default().extend(waiters);
        }
        if alive {
            self.propagate_live(i);
        }
    }

    fn propagate_live(&mut self, from: usize) {
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if let Some(deps) = self.dependents.get(&v) {
                for &d in deps.clone().iter() {
                    if !self.live[d] {
                        self.live[d] = true;
                        stack.push(d);
                    }
                }
            }
        }
    }

    /// Rebuild from scratch; equivalent to recording the messages in any
    /// order.
    pub fn rebuild<'a>(messages: impl IntoIterator<Item = &'a Message>) -> DepGraph {
        let mut dep = DepGraph::new();
        for m in messages {
            dep.record(m);
        }
        dep
    }

    pub fn contains_live(&self, message: &Message) -> bool {
        self.index.get(message).map(|&i| self.live[i]).unwrap_or(false)
    }

    pub fn live_messages(&self) -> impl Iterator<Item = &Message> {
        self.vertices.iter().zip(&self.live).filter(|(_, l)| **l).map(|(m, _)| m)
    }

    /// Pruned vertices currently lacking a live dependency.
    pub fn tombstones(&self) -> impl Iterator<Item = &Message> {
        self.vertices.iter().zip(&self.live).filter(|(_, l)| !**l).map(|(m, _)| m)
    }

    /// Identities with a live announce.
    pub fn announced_identities(&self) -> BTreeSet<Point> {
        self.live_messages()
            .filter(|m| m.kind == MessageKind::Announce)
            .map(|m| m.claimed_sender)
            .collect()
    }

    /// `(reporter, subject)` pairs from live conflict messages.
    ///
    /// A reporter's own confirm of the very announce it conflicted
    /// supersedes the conflict: the reporter has since seen a consistent
    /// copy, so its net verdict on that identity is positive. Conflicts
    /// raised against an identity the reporter never vouched for stand.
    pub fn conflict_pairs(&self) -> BTreeSet<(Point, Point)> {
        self.live_messages()
            .filter(|m| m.kind == MessageKind::Conflict)
            .filter_map(|m| {
                let orig = m.original.as_deref()?;
                if orig.kind == MessageKind::Announce {
                    let vouch = Message::confirm(m.claimed_sender, orig.clone())
                        .expect("announce original");
                    if self.contains_live(&vouch) {
                        return None;
                    }
                }
                Some((m.claimed_sender, orig.claimed_sender))
            })
            .collect()
    }

    /// True when some live confirm by `confirmer` references a live announce
    /// of `announcer`.
    pub fn confirmed_by(&self, announcer: Point, confirmer: Point) -> bool {
        self.live_messages().any(|m| {
            m.kind == MessageKind::Confirm
                && m.claimed_sender == confirmer
                && m.original
                    .as_deref()
                    .map(|o| o.kind == MessageKind::Announce && o.claimed_sender == announcer)
                    .unwrap_or(false)
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// Spec-shaped helper: insert one received message and re-prune.
pub fn dep_update(mut dep: DepGraph, rec: &ReceivedRecord) -> DepGraph {
    dep.record(&rec.message);
    dep
}

/// A conflict-free set of claimed neighbor identities.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Universe {
    pub identities: BTreeSet<Point>,
}

impl Universe {
    pub fn new(identities: impl IntoIterator<Item = Point>) -> Self {
        Universe { identities: identities.into_iter().collect() }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.identities.contains(&p)
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }
}

/// Conflict structure over the announced identities a node tracks.
#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct ConflictGraph {
    /// Announced identities within the neighborhood, excluding those the
    /// node itself caught conflicting.
    pub candidates: Vec<Point>,
    /// Index pairs `(i, j)`, `i < j`, from peer conflict reports.
    pub edges: Vec<(usize, usize)>,
    /// Identities removed outright by a self-observed conflict.
    pub excluded: Vec<Point>,
}

impl ConflictGraph {
    pub fn has_edge_about(&self, p: Point) -> bool {
        self.candidates
            .iter()
            .position(|&c| c == p)
            .map(|i| self.edges.iter().any(|&(a, b)| a == i || b == i))
            .unwrap_or(false)
    }
}

/// Universe derivation output. Enumeration is withheld above the identity
/// cap: the number of universes can reach `2^(N/2)`, so past the cap the
/// conflict graph itself is handed to the detector.
#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum UniverseSet {
    Enumerated { universes: Vec<Universe>, graph: ConflictGraph },
    Overflow { graph: ConflictGraph },
}

impl UniverseSet {
    pub fn enumerated(&self) -> Option<&[Universe]> {
        match self {
            UniverseSet::Enumerated { universes, .. } => Some(universes),
            UniverseSet::Overflow { .. } => None,
        }
    }

    pub fn graph(&self) -> &ConflictGraph {
        match self {
            UniverseSet::Enumerated { graph, .. } | UniverseSet::Overflow { graph } => graph,
        }
    }
}

pub const DEFAULT_UNIVERSE_CAP: usize = 64;

/// Build the conflict graph and enumerate all maximal independent sets.
///
/// Candidates are announced identities within `d_n` of `self_pos`, minus the
/// node's own position and identities struck by self-observed conflicts.
/// Edges come from peer conflict messages between two candidates. Maximality
/// gives conflict-aware closure: a non-conflicting announced identity is
/// never left out.
pub fn universes_from(
    dep: &DepGraph,
    conflicts: &[ConflictRecord],
    self_pos: Point,
    params: &RadioParams,
    cap: usize,
) -> UniverseSet {
    let flagged: BTreeSet<Point> =
        conflicts.iter().map(|c| c.subject.claimed_sender).collect();
    let mut candidates: Vec<Point> = Vec::new();
    let mut excluded: Vec<Point> = Vec::new();
    for id in dep.announced_identities() {
        if id == self_pos || id.distance(self_pos) > params.d_n {
            continue;
        }
        if flagged.contains(&id) {
            excluded.push(id);
        } else {
            candidates.push(id);
        }
    }
    let index: HashMap<Point, usize> =
        candidates.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (reporter, subject) in dep.conflict_pairs() {
        if let (Some(&i), Some(&j)) = (index.get(&reporter), index.get(&subject)) {
            if i != j {
                edges.insert((i.min(j), i.max(j)));
            }
        }
    }
    let graph = ConflictGraph {
        candidates: candidates.clone(),
        edges: edges.iter().copied().collect(),
        excluded,
    };
    if candidates.len() > cap {
        return UniverseSet::Overflow { graph };
    }
    let universes = maximal_independent_sets(&candidates, &graph.edges);
    UniverseSet::Enumerated { universes, graph }
}

/// All maximal independent sets of a small graph (n <= 64), via
/// Bron-Kerbosch with pivoting on the complement.
fn maximal_independent_sets(vertices: &[Point], edges: &[(usize, usize)]) -> Vec<Universe> {
    let n = vertices.len();
    if n == 0 {
        return vec![Universe::new([])];
    }
    // Complement adjacency: vertices are "compatible" when not in conflict.
    let full: u64 = if n == 64 { u64::MAX } else { (1 << n) - 1 };
    let mut compat: Vec<u64> = (0..n).map(|i| full & !(1u64 << i)).collect();
    for &(i, j) in edges {
        compat[i] &= !(1 << j);
        compat[j] &= !(1 << i);
    }
    let mut out = Vec::new();
    bron_kerbosch(&compat, 0, full, 0, &mut out);
    let mut universes: Vec<Universe> = out
        .into_iter()
        .map(|mask| {
            Universe::new(
                (0..n).filter(|i| mask & (1 << i) != 0).map(|i| vertices[i]),
            )
        })
        .collect();
    universes.sort();
    universes
}

fn bron_kerbosch(adj: &[u64], r: u64, mut p: u64, mut x: u64, out: &mut Vec<u64>) {
    if p == 0 && x == 0 {
        out.push(r);
        return;
    }
    let pivot = (p | x).trailing_zeros() as usize;
    let mut candidates = p & !adj[pivot];
    while candidates != 0 {
        let v = candidates.trailing_zeros() as usize;
        let bit = 1u64 << v;
        bron_kerbosch(adj, r | bit, p & adj[v], x & adj[v], out);
        p &= !bit;
        x |= bit;
        candidates &= !bit;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Receipt {
    Ignore,
    Consistent,
    ExplicitConflict,
}

/// Per-node protocol state. Single-owner: only the scheduler mutates it.
#[derive(Debug, Clone, Serialize)]
pub struct NodeState {
    pub self_position: Point,
    params: RadioParams,
    announced: bool,
    pub inbox: Vec<ReceivedRecord>,
    processed: usize,
    outbox: VecDeque<Message>,
    pub dep: DepGraph,
    pub conflicts: Vec<ConflictRecord>,
    /// Messages this node received or sent itself.
    #[serde(skip)]
    known: HashSet<Message>,
    /// Messages with at least one claim-consistent receipt (or sent by this
    /// node itself).
    #[serde(skip)]
    vouched: HashSet<Message>,
    /// Announces already confirmed, conflicts already raised.
    #[serde(skip)]
    confirmed: HashSet<Message>,
    #[serde(skip)]
    conflicted: HashSet<Message>,
    universe_cap: usize,
    #[serde(skip)]
    universes: Option<UniverseSet>,
    pub output: Option<Universe>,
    /// Epoch of the last announce or conflict arrival.
    pub last_news_epoch: u64,
}

impl NodeState {
    pub fn new(self_position: Point, params: RadioParams) -> Self {
        NodeState {
            self_position,
            params,
            announced: false,
            inbox: Vec::new(),
            processed: 0,
            outbox: VecDeque::new(),
            dep: DepGraph::new(),
            conflicts: Vec::new(),
            known: HashSet::new(),
            vouched: HashSet::new(),
            confirmed: HashSet::new(),
            conflicted: HashSet::new(),
            universe_cap: DEFAULT_UNIVERSE_CAP,
            universes: None,
            output: None,
            last_news_epoch: 0,
        }
    }

    pub fn with_universe_cap(mut self, cap: usize) -> Self {
        self.universe_cap = cap;
        self
    }

    pub fn params(&self) -> &RadioParams {
        &self.params
    }

    /// Queue the initial announce. Idempotent; the transmission itself is a
    /// separate scheduler action that stays enabled until executed.
    pub fn on_init(&mut self) {
        if self.announced {
            return;
        }
        self.announced = true;
        let announce = Message::announce(self.self_position);
        self.known.insert(announce.clone());
        self.vouched.insert(announce.clone());
        self.dep.record(&announce);
        self.outbox.push_back(announce);
        self.universes = None;
    }

    pub fn has_pending_emission(&self) -> bool {
        !self.outbox.is_empty()
    }

    pub fn pop_emission(&mut self) -> Option<Message> {
        self.outbox.pop_front()
    }

    pub fn has_unprocessed(&self) -> bool {
        self.processed < self.inbox.len()
    }

    /// Physical receipt: instantaneous inbox insertion. Processing of the
    /// record is deferred to a later scheduler action.
    pub fn deliver(&mut self, message: Message, measured_rss: f64, epoch: u64) {
        let arrival_index = self.inbox.len();
        if matches!(message.kind, MessageKind::Announce | MessageKind::Conflict) {
            self.last_news_epoch = epoch;
        }
        self.inbox.push(ReceivedRecord { message, measured_rss, arrival_index });
    }

    /// Locality filter plus RSS verification.
    pub fn classify_receipt(&self, rec: &ReceivedRecord) -> Receipt {
        // Information from or about identities beyond the neighborhood
        // distance is ignored outright.
        for id in rec.message.referenced_identities() {
            if id.distance(self.self_position) > self.params.d_n {
                return Receipt::Ignore;
            }
        }
        let claim = rec.message.claimed_sender;
        match expected_rss_from_claim(&self.params, claim, self.self_position) {
            Ok(expected) => {
                if (rec.measured_rss - expected).abs() > RSS_REL_TOL * expected {
                    Receipt::ExplicitConflict
                } else {
                    Receipt::Consistent
                }
            }
            // A claim at (or nearly at) the node's own point: no second node
            // can occupy it, so the message is necessarily inconsistent.
            Err(_) => Receipt::ExplicitConflict,
        }
    }

    /// Process one received record: update the dependency graph, record
    /// conflicts, and queue protocol replies.
    pub fn on_receive(&mut self, rec: &ReceivedRecord) -> (Receipt, Vec<Message>) {
        let receipt = self.classify_receipt(rec);
        let mut emitted = Vec::new();
        match receipt {
            Receipt::Ignore => {}
            Receipt::ExplicitConflict => {
                self.known.insert(rec.message.clone());
                self.dep.record(&rec.message);
                self.record_conflict(rec.message.clone(), ConflictKind::Explicit);
                if self.conflicted.insert(rec.message.clone()) {
                    let reply = Message::conflict(self.self_position, rec.message.clone());
                    self.known.insert(reply.clone());
                    self.vouched.insert(reply.clone());
                    self.dep.record(&reply);
                    self.outbox.push_back(reply.clone());
                    emitted.push(reply);
                }
            }
            Receipt::Consistent => {
                self.known.insert(rec.message.clone());
                self.vouched.insert(rec.message.clone());
                self.dep.record(&rec.message);
                match rec.message.kind {
                    MessageKind::Announce => {
                        if self.confirmed.insert(rec.message.clone()) {
                            let reply = Message::confirm(self.self_position, rec.message.clone())
                                .expect("announce original");
                            self.known.insert(reply.clone());
                            self.vouched.insert(reply.clone());
                            self.dep.record(&reply);
                            self.outbox.push_back(reply.clone());
                            emitted.push(reply);
                        }
                    }
                    MessageKind::Confirm | MessageKind::Conflict => {
                        if let Some(reply) = self.implicit_conflict_check(&rec.message) {
                            emitted.push(reply);
                        }
                    }
                }
            }
        }
        if receipt != Receipt::Ignore {
            self.universes = None;
        }
        (receipt, emitted)
    }

    /// A consistent confirm or conflict references an original allegedly
    /// broadcast from within range; if that original never arrived, the
    /// referenced transmission cannot have happened.
    fn implicit_conflict_check(&mut self, carrier: &Message) -> Option<Message> {
        let original = carrier.original.as_deref()?;
        let origin = original.claimed_sender;
        let r_t = self.params.range();
        if origin.distance(self.self_position) > r_t {
            return None;
        }
        if self.known.contains(original) {
            return None;
        }
        self.record_conflict(original.clone(), ConflictKind::Implicit);
        if self.conflicted.insert(original.clone()) {
            let reply = Message::conflict(self.self_position, original.clone());
            self.known.insert(reply.clone());
            self.vouched.insert(reply.clone());
            self.dep.record(&reply);
            self.outbox.push_back(reply.clone());
            return Some(reply);
        }
        None
    }

    fn record_conflict(&mut self, subject: Message, kind: ConflictKind) {
        let rec = ConflictRecord { subject, kind, observer: self.self_position };
        if !self.conflicts.contains(&rec) {
            self.conflicts.push(rec);
        }
    }

    /// Process the next unprocessed inbox record, if any.
    pub fn process_next(&mut self) -> Option<(usize, Receipt, Vec<Message>)> {
        if self.processed >= self.inbox.len() {
            return None;
        }
        let rec = self.inbox[self.processed].clone();
        let idx = self.processed;
        self.processed += 1;
        let (receipt, emitted) = self.on_receive(&rec);
        Some((idx, receipt, emitted))
    }

    pub fn universe_set(&mut self) -> &UniverseSet {
        self.ensure_universes();
        self.universes.as_ref().unwrap()
    }

    /// Fill the universe cache so it can be read through a shared borrow.
    pub fn ensure_universes(&mut self) {
        if self.universes.is_none() {
            self.universes = Some(self.derive_universes());
        }
    }

    /// Conflict observations whose premise still stands. An implicit record
    /// rests on the absence of the referenced original and dissolves the
    /// moment that message arrives (a slow announcer is not a fictitious
    /// one); an explicit record rests on a mismatched copy and dissolves
    /// once a claim-consistent copy of the same message is received, which
    /// proves a transmitter at the claimed position plausible and leaves
    /// only the forger implicated.
    pub fn active_conflicts(&self) -> Vec<ConflictRecord> {
        self.conflicts
            .iter()
            .filter(|c| match c.kind {
                ConflictKind::Implicit => !self.known.contains(&c.subject),
                ConflictKind::Explicit => !self.vouched.contains(&c.subject),
            })
            .cloned()
            .collect()
    }

    /// Universe derivation from the node's current evidence, cache-free.
    pub fn derive_universes(&self) -> UniverseSet {
        universes_from(
            &self.dep,
            &self.active_conflicts(),
            self.self_position,
            &self.params,
            self.universe_cap,
        )
    }

    pub fn universes_cached(&self) -> Option<&UniverseSet> {
        self.universes.as_ref()
    }

    /// Install the detector's decision as the node's output, after checking
    /// the pointed set really is conflict-free in this node's view.
    pub fn adopt_detector_output(
        &mut self,
        pointed: Option<Universe>,
    ) -> Result<(), ProtocolError> {
        if let Some(u) = &pointed {
            let graph = self.universe_set().graph().clone();
            for p in &u.identities {
                if graph.excluded.contains(p) {
                    return Err(ProtocolError::PointerContainsFlagged(*p));
                }
            }
            for &(i, j) in &graph.edges {
                let a = graph.candidates[i];
                let b = graph.candidates[j];
                if u.contains(a) && u.contains(b) {
                    return Err(ProtocolError::PointerNotConflictFree(a, b));
                }
            }
        }
        self.output = pointed;
        Ok(())
    }

    /// Correct neighbors per the layout ground truth; test instrumentation.
    pub fn true_neighbors(&self, layout: &LayoutSpec) -> BTreeSet<Point> {
        layout
            .nodes
            .iter()
            .filter(|n| n.role == Role::Correct && n.position != self.self_position)
            .map(|n| n.position)
            .filter(|p| p.distance(self.self_position) <= self.params.d_n)
            .collect()
    }
}
