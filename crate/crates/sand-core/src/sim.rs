//! Deterministic discrete-event scheduler for protocol runs under
//! adversarial asynchrony.
//!
//! One atomic action executes per epoch: a correct node emits one pending
//! message, processes one inbox record, or an adversary injects one
//! transmission. A broadcast inserts a received record into the inbox of
//! every node in range in the same step (radio receipt is physical and
//! instantaneous); all asynchrony lives in when the records get processed.
//! Runs are replayable: layout, strategies, policy and seed determine the
//! trace byte for byte.

use crate::adversary::{AdversaryStrategy, CompiledAdversary, ScriptedTransmission};
use crate::detector::{DetectorDecision, DetectorInput, UniverseDetector};
use crate::geometry::{receives, rss_at, LayoutSpec, Point, Role};
use crate::protocol::{Message, NodeState, ProtocolError, Receipt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("adversary strategy failed to compile: {0}")]
    Adversary(#[from] crate::adversary::AdversaryError),
    #[error("detector contract violation at node {node}: {source}")]
    DetectorContract { node: usize, source: ProtocolError },
    #[error("invalid simulation setup: {0}")]
    Setup(String),
}

/// A schedulable action slot. Every slot stays enabled until executed, so
/// weak fairness reduces to bounding how long an enabled slot may wait.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum ActionKey {
    /// Broadcast the head of a correct node's outbox (layout index).
    Emit(usize),
    /// Process a correct node's next inbox record (layout index).
    Process(usize),
    /// Inject the head of an adversary's transmission queue.
    Inject(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchedulerPolicy {
    /// Cycle through slots in canonical order.
    RoundRobin,
    /// Uniform choice among enabled slots, from the run seed.
    SeededRandom,
    /// Follow an explicit script while it lasts, then favor the
    /// most-recently listed slots; fairness still bounds every delay.
    AdversarialDelay {
        #[serde(default)]
        script: Vec<ActionKey>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    Transmit {
        epoch: u64,
        node: usize,
        tss: f64,
        message: Message,
    },
    Deliver {
        epoch: u64,
        node: usize,
        from: usize,
        arrival_index: usize,
        rss: f64,
        message: Message,
    },
    Process {
        epoch: u64,
        node: usize,
        arrival_index: usize,
        receipt: Receipt,
        emitted: usize,
    },
    Detector {
        epoch: u64,
        node: usize,
        pointed: Option<Vec<Point>>,
        truth_derivable: bool,
    },
    Output {
        epoch: u64,
        node: usize,
        output: Option<Vec<Point>>,
    },
    Quiescent {
        epoch: u64,
    },
    FairnessAudit {
        epoch: u64,
        bound: u64,
        max_delay: u64,
    },
}

/// Per-node simulation bundle: protocol state plus the node's detector.
pub struct SimNode {
    pub layout_index: usize,
    pub state: NodeState,
    pub detector: Option<Box<dyn UniverseDetector>>,
    pub decisions: Vec<DetectorDecision>,
    /// Ground truth for the decision log: the node's correct neighbors.
    truth: BTreeSet<Point>,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Weak-fairness bound; defaults to 4x the node count.
    pub fairness_bound: Option<u64>,
    pub universe_cap: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { fairness_bound: None, universe_cap: crate::protocol::DEFAULT_UNIVERSE_CAP, seed: 0 }
    }
}

pub struct WorldState {
    pub layout: LayoutSpec,
    pub nodes: Vec<SimNode>,
    pub adversaries: Vec<CompiledAdversary>,
    pub epoch: u64,
    pub trace: Vec<TraceEvent>,
    pub quiescence_epoch: Option<u64>,
    policy: SchedulerPolicy,
    slots: Vec<ActionKey>,
    cursor: usize,
    script_pos: usize,
    rng: ChaCha8Rng,
    fairness_bound: u64,
    enabled_since: Vec<Option<u64>>,
    max_observed_delay: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Acted,
    Quiescent,
}

impl WorldState {
    pub fn new(
        layout: LayoutSpec,
        detectors: Vec<Option<Box<dyn UniverseDetector>>>,
        strategies: &[AdversaryStrategy],
        policy: SchedulerPolicy,
        config: SimConfig,
    ) -> Result<Self, SimError> {
        layout.validate().map_err(|e| SimError::Setup(e.to_string()))?;
        let correct_indices: Vec<usize> = layout
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.role == Role::Correct)
            .map(|(i, _)| i)
            .collect();
        if detectors.len() != correct_indices.len() {
            return Err(SimError::Setup(format!(
                "expected {} detectors, got {}",
                correct_indices.len(),
                detectors.len()
            )));
        }
        let mut nodes = Vec::with_capacity(correct_indices.len());
        for (idx, det) in correct_indices.iter().zip(detectors) {
            let pos = layout.nodes[*idx].position;
            let mut state =
                NodeState::new(pos, layout.params).with_universe_cap(config.universe_cap);
            state.on_init();
            let truth: BTreeSet<Point> = layout.correct_neighbors(pos).into_iter().collect();
            nodes.push(SimNode {
                layout_index: *idx,
                state,
                detector: det,
                decisions: Vec::new(),
                truth,
            });
        }
        let mut adversaries = Vec::with_capacity(strategies.len());
        for s in strategies {
            adversaries.push(s.compile(&layout)?);
        }
        let mut slots = Vec::new();
        for n in &nodes {
            slots.push(ActionKey::Emit(n.layout_index));
        }
        for n in &nodes {
            slots.push(ActionKey::Process(n.layout_index));
        }
        for i in 0..adversaries.len() {
            slots.push(ActionKey::Inject(i));
        }
        let fairness_bound = config
            .fairness_bound
            .unwrap_or_else(|| 4 * (layout.nodes.len().max(1) as u64));
        let enabled_since = vec![None; slots.len()];
        Ok(WorldState {
            layout,
            nodes,
            adversaries,
            epoch: 0,
            trace: Vec::new(),
            quiescence_epoch: None,
            policy,
            slots,
            cursor: 0,
            script_pos: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            fairness_bound,
            enabled_since,
            max_observed_delay: 0,
        })
    }

    pub fn fairness_bound(&self) -> u64 {
        self.fairness_bound
    }

    pub fn max_observed_delay(&self) -> u64 {
        self.max_observed_delay
    }

    fn node_slot(&self, layout_index: usize) -> usize {
        self.nodes
            .iter()
            .position(|n| n.layout_index == layout_index)
            .expect("layout index of a correct node")
    }

    pub fn node(&self, layout_index: usize) -> &SimNode {
        &self.nodes[self.node_slot(layout_index)]
    }

    fn slot_enabled(&self, key: ActionKey) -> bool {
        match key {
            ActionKey::Emit(i) => self.node(i).state.has_pending_emission(),
            ActionKey::Process(i) => self.node(i).state.has_unprocessed(),
            ActionKey::Inject(a) => self.adversaries[a]
                .queue
                .front()
                .map(|t| t.at_epoch <= self.epoch)
                .unwrap_or(false),
        }
    }

    /// Earliest scheduled epoch among not-yet-enabled injections.
    fn next_injection_epoch(&self) -> Option<u64> {
        self.adversaries
            .iter()
            .filter_map(|a| a.queue.front())
            .map(|t| t.at_epoch)
            .filter(|&e| e > self.epoch)
            .min()
    }

    /// Execute one atomic action. Returns `Quiescent` when nothing is
    /// enabled and nothing ever will be.
    pub fn step(&mut self) -> Result<StepOutcome, SimError> {
        let enabled: Vec<usize> = (0..self.slots.len())
            .filter(|&s| self.slot_enabled(self.slots[s]))
            .collect();
        if enabled.is_empty() {
            if let Some(next) = self.next_injection_epoch() {
                // Idle until the next scheduled injection matures.
                self.epoch = next;
                return self.step();
            }
            return Ok(StepOutcome::Quiescent);
        }
        for &s in &enabled {
            if self.enabled_since[s].is_none() {
                self.enabled_since[s] = Some(self.epoch);
            }
        }
        let ages: Vec<(usize, u64)> = enabled
            .iter()
            .map(|&s| (s, self.epoch - self.enabled_since[s].unwrap()))
            .collect();
        let oldest = ages.iter().map(|&(_, a)| a).max().unwrap();
        // Weak-fairness override: once the longest wait could no longer be
        // drained within the bound at one action per epoch, run oldest-first.
        let urgency = self.fairness_bound.saturating_sub(enabled.len() as u64);
        let chosen = if oldest >= urgency {
            ages.iter().filter(|&&(_, a)| a == oldest).map(|&(s, _)| s).min().unwrap()
        } else {
            match &self.policy {
                SchedulerPolicy::RoundRobin => {
                    let n = self.slots.len();
                    (0..n)
                        .map(|off| (self.cursor + off) % n)
                        .find(|s| enabled.contains(s))
                        .unwrap()
                }
                SchedulerPolicy::SeededRandom => {
                    enabled[self.rng.gen_range(0..enabled.len())]
                }
                SchedulerPolicy::AdversarialDelay { script } => {
                    let mut pick = None;
                    while self.script_pos < script.len() {
                        let key = script[self.script_pos];
                        let slot = self.slots.iter().position(|&k| k == key);
                        self.script_pos += 1;
                        if let Some(s) = slot {
                            if enabled.contains(&s) {
                                pick = Some(s);
                                break;
                            }
                        }
                    }
                    // Past the script: favor the most recently listed slot.
                    pick.unwrap_or_else(|| *enabled.last().unwrap())
                }
            }
        };
        let age = self.epoch - self.enabled_since[chosen].unwrap();
        self.max_observed_delay = self.max_observed_delay.max(age);
        self.cursor = (chosen + 1) % self.slots.len();
        self.enabled_since[chosen] = None;
        self.execute(self.slots[chosen])?;
        self.epoch += 1;
        Ok(StepOutcome::Acted)
    }

    fn execute(&mut self, key: ActionKey) -> Result<(), SimError> {
        match key {
            ActionKey::Emit(layout_index) => {
                let slot = self.node_slot(layout_index);
                let message = self.nodes[slot]
                    .state
                    .pop_emission()
                    .expect("emit slot enabled implies pending emission");
                let tss = self.layout.params.t_r;
                let pos = self.layout.nodes[layout_index].position;
                self.broadcast(layout_index, pos, tss, message);
            }
            ActionKey::Process(layout_index) => {
                let slot = self.node_slot(layout_index);
                let (arrival_index, receipt, emitted) = self.nodes[slot]
                    .state
                    .process_next()
                    .expect("process slot enabled implies unprocessed record");
                self.trace.push(TraceEvent::Process {
                    epoch: self.epoch,
                    node: layout_index,
                    arrival_index,
                    receipt,
                    emitted: emitted.len(),
                });
                self.consult_detector(slot)?;
            }
            ActionKey::Inject(a) => {
                let tx = self.adversaries[a]
                    .queue
                    .pop_front()
                    .expect("inject slot enabled implies queued transmission");
                let leader_index = self
                    .layout
                    .nodes
                    .iter()
                    .position(|n| n.position == tx.leader)
                    .expect("leader validated at compile time");
                self.broadcast(leader_index, tx.leader, tx.tss, tx.message);
            }
        }
        Ok(())
    }

    /// Physical broadcast: the record lands in every in-range inbox now.
    fn broadcast(&mut self, sender_index: usize, sender_pos: Point, tss: f64, message: Message) {
        self.trace.push(TraceEvent::Transmit {
            epoch: self.epoch,
            node: sender_index,
            tss,
            message: message.clone(),
        });
        let params = self.layout.params;
        for slot in 0..self.nodes.len() {
            let layout_index = self.nodes[slot].layout_index;
            if layout_index == sender_index {
                continue; // no self-receipt
            }
            let pos = self.layout.nodes[layout_index].position;
            if receives(&params, tss, sender_pos, pos).unwrap_or(false) {
                let rss = rss_at(&params, tss, sender_pos, pos)
                    .expect("receives implies measurable RSS");
                let arrival_index = self.nodes[slot].state.inbox.len();
                self.nodes[slot].state.deliver(message.clone(), rss, self.epoch);
                self.trace.push(TraceEvent::Deliver {
                    epoch: self.epoch,
                    node: layout_index,
                    from: sender_index,
                    arrival_index,
                    rss,
                    message: message.clone(),
                });
            }
        }
        // Arm reactive rules watching this transmitter.
        if self.layout.nodes[sender_index].role == Role::Correct {
            let epoch = self.epoch;
            for adv in &mut self.adversaries {
                if let Some(rule) = &adv.reactive {
                    if rule.victim == sender_pos {
                        adv.queue.push_back(ScriptedTransmission {
                            at_epoch: epoch,
                            leader: rule.f2,
                            tss: rule.tss,
                            message: message.clone(),
                        });
                    }
                }
            }
        }
    }

    /// Ask the node's detector for a pointer and install the answer.
    fn consult_detector(&mut self, slot: usize) -> Result<(), SimError> {
        self.consult_detector_at(slot, self.epoch)
    }

    fn consult_detector_at(&mut self, slot: usize, epoch: u64) -> Result<(), SimError> {
        let node = &mut self.nodes[slot];
        let layout_index = node.layout_index;
        let Some(detector) = node.detector.as_mut() else {
            return Ok(());
        };
        let truth = node.truth.clone();
        let state = &mut node.state;
        let last_news = state.last_news_epoch;
        let owner = state.self_position;
        let previous_output = state.output.clone();
        state.ensure_universes();
        let (pointed, truth_derivable) = {
            let universes = state.universes_cached().expect("just ensured");
            let dep = &state.dep;
            let input = DetectorInput {
                owner,
                epoch,
                last_news_epoch: last_news,
                universes,
                dep,
            };
            let pointed = detector.point(&input);
            let derivable = crate::detector::universe_derivable(&input, &truth);
            (pointed, derivable)
        };
        let decision = DetectorDecision {
            epoch,
            pointed: pointed
                .as_ref()
                .map(|u| u.identities.iter().copied().collect::<Vec<_>>()),
            truth_derivable,
        };
        node.decisions.push(decision.clone());
        self.trace.push(TraceEvent::Detector {
            epoch,
            node: layout_index,
            pointed: decision.pointed.clone(),
            truth_derivable,
        });
        node.state
            .adopt_detector_output(pointed)
            .map_err(|source| SimError::DetectorContract { node: layout_index, source })?;
        if node.state.output != previous_output {
            self.trace.push(TraceEvent::Output {
                epoch,
                node: layout_index,
                output: node
                    .state
                    .output
                    .as_ref()
                    .map(|u| u.identities.iter().copied().collect()),
            });
        }
        Ok(())
    }

    /// Run until no action is enabled or the epoch budget runs out. On
    /// quiescence a settling pass advances the clock past every detector's
    /// window and consults each detector once more, standing in for the
    /// infinite suffix of the computation.
    pub fn run_until_quiescent(&mut self, max_epochs: u64) -> Result<bool, SimError> {
        loop {
            if self.epoch >= max_epochs {
                return Ok(false);
            }
            match self.step()? {
                StepOutcome::Acted => continue,
                StepOutcome::Quiescent => break,
            }
        }
        let q = self.epoch;
        self.quiescence_epoch = Some(q);
        self.trace.push(TraceEvent::Quiescent { epoch: q });
        let settle = self
            .nodes
            .iter()
            .filter_map(|n| n.detector.as_ref().map(|d| d.settle_hint()))
            .max()
            .unwrap_or(0);
        let final_epoch = q + settle;
        self.epoch = final_epoch;
        for slot in 0..self.nodes.len() {
            self.consult_detector_at(slot, final_epoch)?;
        }
        self.trace.push(TraceEvent::FairnessAudit {
            epoch: self.epoch,
            bound: self.fairness_bound,
            max_delay: self.max_observed_delay,
        });
        Ok(true)
    }

    /// Trace export: one JSON object per line, deterministic field order.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.trace {
            out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }

    /// Inbox signature of one node: the `(message, rss)` sequence, as JSON.
    /// Two runs are observationally identical at this node exactly when the
    /// signatures are byte-identical.
    pub fn inbox_signature(&self, layout_index: usize) -> String {
        let node = self.node(layout_index);
        let seq: Vec<(&Message, f64)> = node
            .state
            .inbox
            .iter()
            .map(|r| (&r.message, r.measured_rss))
            .collect();
        serde_json::to_string(&seq).expect("inbox serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemVariant {
    Sndp,
    Wndp,
    Eventual,
}

impl ProblemVariant {
    pub fn all() -> [ProblemVariant; 3] {
        [ProblemVariant::Sndp, ProblemVariant::Wndp, ProblemVariant::Eventual]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail { detail: String },
    Inconclusive { detail: String },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeVerdict {
    pub node: usize,
    pub safety: Verdict,
    pub liveness: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemReport {
    pub variant: ProblemVariant,
    pub per_node: Vec<NodeVerdict>,
}

impl ProblemReport {
    pub fn all_pass(&self) -> bool {
        self.per_node.iter().all(|n| n.safety.is_pass() && n.liveness.is_pass())
    }
    pub fn any_fail(&self) -> bool {
        self.per_node.iter().any(|n| n.safety.is_fail() || n.liveness.is_fail())
    }
}

/// Evaluate one problem variant over a finished run.
///
/// Safety examines every output the node ever produced; the eventual
/// variant only holds outputs from the quiescence epoch onward to account.
/// Liveness asks for the exact correct neighborhood at quiescence and is
/// inconclusive when the run was truncated.
pub fn check_problem(world: &WorldState, variant: ProblemVariant) -> ProblemReport {
    let mut per_node = Vec::new();
    for node in &world.nodes {
        let truth = &node.truth;
        let mut output_events: Vec<(u64, Option<BTreeSet<Point>>)> = Vec::new();
        for e in &world.trace {
            if let TraceEvent::Output { epoch, node: n, output } = e {
                if *n == node.layout_index {
                    output_events.push((
                        *epoch,
                        output.as_ref().map(|v| v.iter().copied().collect()),
                    ));
                }
            }
        }
        let mut safety = Verdict::Pass;
        for (epoch, out) in &output_events {
            let Some(set) = out else { continue };
            let ok = match variant {
                ProblemVariant::Sndp => set == truth,
                ProblemVariant::Wndp => set.is_subset(truth),
                ProblemVariant::Eventual => match world.quiescence_epoch {
                    Some(q) if *epoch >= q => set == truth,
                    _ => true,
                },
            };
            if !ok {
                safety = Verdict::Fail {
                    detail: format!(
                        "output at epoch {epoch} was {:?}, correct neighborhood is {:?}",
                        set, truth
                    ),
                };
                break;
            }
        }
        let liveness = match world.quiescence_epoch {
            None => Verdict::Inconclusive { detail: "run truncated before quiescence".into() },
            Some(_) => {
                let final_output: Option<BTreeSet<Point>> = node
                    .state
                    .output
                    .as_ref()
                    .map(|u| u.identities.iter().copied().collect());
                match final_output {
                    Some(ref set) if set == truth => Verdict::Pass,
                    other => {
                        let missing = truth
                            .iter()
                            .filter(|p| other.as_ref().is_none_or(|s| !s.contains(p)))
                            .map(|p| p.to_string())
                            .collect::<Vec<_>>()
                            .join(", ");
                        let split = split_correct_pairs(world, node);
                        let shown = other
                            .as_ref()
                            .map(|s| {
                                s.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ")
                            })
                            .unwrap_or_else(|| "none".into());
                        let mut detail = format!(
                            "output at quiescence [{shown}] misses correct neighbors [{missing}]"
                        );
                        if !split.is_empty() {
                            let pairs = split
                                .iter()
                                .map(|(a, b)| format!("{a} vs {b}"))
                                .collect::<Vec<_>>()
                                .join("; ");
                            detail.push_str(&format!(
                                "; correct pairs separated by conflicts: {pairs}"
                            ));
                        }
                        Verdict::Fail { detail }
                    }
                }
            }
        };
        per_node.push(NodeVerdict { node: node.layout_index, safety, liveness });
    }
    ProblemReport { variant, per_node }
}

/// Correct-neighbor pairs this node saw conflict reports about; these are
/// the pairs a conflict-aware algorithm can never output together.
fn split_correct_pairs(_world: &WorldState, node: &SimNode) -> Vec<(Point, Point)> {
    let mut out = Vec::new();
    let graph = node.state.derive_universes();
    let g = graph.graph();
    for &(i, j) in &g.edges {
        let a = g.candidates[i];
        let b = g.candidates[j];
        if node.truth.contains(&a) && node.truth.contains(&b) {
            out.push((a, b));
        }
    }
    for p in &g.excluded {
        if node.truth.contains(p) {
            out.push((node.state.self_position, *p));
        }
    }
    out
}

/// Fairness audit over a finished run: no enabled action of a correct node
/// ever waited longer than the bound.
pub fn audit_fairness(world: &WorldState) -> Result<(), String> {
    if world.max_observed_delay > world.fairness_bound {
        return Err(format!(
            "an enabled action waited {} epochs, bound {}",
            world.max_observed_delay, world.fairness_bound
        ));
    }
    Ok(())
}
