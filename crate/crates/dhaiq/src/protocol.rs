//! The detection protocol: corner watchdogs, area-bound flooding
//! generations, rank-excess detection, and recursive quadtree drill-down.
//!
//! One *generation* floods a monitoring area for a fixed number of
//! synchronous rounds. The four nodes nearest the area corners act as
//! watchdogs; each injects one probe per corner it serves. Every member
//! relays one random recombination of its buffer per round, and packets
//! never leave the area: receivers outside it drop them. Honest traffic
//! stays inside the span of the four probes, so any (honest) watchdog whose
//! pool rank exceeds four has proof that a member modified a packet, and the
//! area is split into quadrants for the next sharper look. Areas whose
//! estimated population falls below the threshold are not probed at all:
//! everyone inside is marked suspect.
//!
//! A full pass over the deployment square is [`dhaiq_run`]. The two-pass
//! variant [`run_with_shift`] repeats it with the grid shifted by half the
//! least-area edge and keeps the nodes marked in both passes, which strips
//! away most innocent bystanders that merely shared a cell with an
//! adversary.

use crate::coding::{
    local_encode, GenerationId, PacketPool, ProbePacket, PROBES_PER_GENERATION,
};
use crate::gf::{FieldElement, GfField};
use crate::topology::{
    corner_assignments, nodes_in, Graph, MonitoringArea, NodeRecord, Rect,
};
use rand::Rng;
use std::collections::{BTreeSet, VecDeque};

/// Which block of a relayed packet an adversary tampers with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorruptionMode {
    Payload,
    Coefficients,
    Both,
}

/// Behavior of every adversarial node in a scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdversaryModel {
    pub mode: CorruptionMode,
    /// When true, an adversary elected watchdog plays honestly (no
    /// corruption, truthful reporting) for that whole generation.
    pub act_normal_as_watchdog: bool,
}

impl Default for AdversaryModel {
    fn default() -> Self {
        AdversaryModel { mode: CorruptionMode::Payload, act_normal_as_watchdog: false }
    }
}

/// Replaces one uniformly chosen symbol of the targeted block(s) with a
/// fresh symbol guaranteed to differ from the old one.
pub fn corrupt<R: Rng + ?Sized>(
    field: &GfField,
    packet: &mut ProbePacket,
    mode: CorruptionMode,
    rng: &mut R,
) {
    let k = packet.coefficients.len();
    let p = packet.payload.len();
    let (base, span) = match mode {
        CorruptionMode::Payload => (k, p),
        CorruptionMode::Coefficients => (0, k),
        CorruptionMode::Both => (0, k + p),
    };
    assert!(span > 0, "corruption target block is empty");
    let pos = base + rng.random_range(0..span);
    let slot = if pos < k { &mut packet.coefficients[pos] } else { &mut packet.payload[pos - k] };
    let old = *slot;
    let mut fresh = field.random_symbol(rng);
    while fresh == old {
        fresh = field.random_symbol(rng);
    }
    *slot = fresh;
}

/// Rounds a generation stays alive: enough for probes to cross an area
/// holding `estimated_count` nodes and echo back, never less than one.
pub fn timestamp_rounds(estimated_count: f64) -> u32 {
    debug_assert!(estimated_count >= 0.0);
    let rounds = (2.0 * estimated_count).sqrt().ceil();
    (rounds as u32).max(1)
}

/// Rank-excess test for one watchdog pool.
pub fn detect(pool: &PacketPool) -> bool {
    pool.rank() > PROBES_PER_GENERATION
}

/// One delivery observed by a tracing run.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub round: u32,
    pub sender: usize,
    pub receiver: usize,
    pub innovative: bool,
    pub pool_rank: usize,
    pub packet: Vec<u8>,
}

/// Per-generation delivery log, one event per (sender, receiver) delivery.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceLog {
    pub events: Vec<TraceEvent>,
}

impl TraceLog {
    pub fn new() -> TraceLog {
        TraceLog::default()
    }

    /// One `round sender receiver innovative rank` line per event.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                e.round, e.sender, e.receiver, e.innovative, e.pool_rank
            ));
        }
        out
    }

    /// Like [`TraceLog::render`] with the packet bytes appended in hex.
    pub fn render_verbose(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&format!(
                "{} {} {} {} {} ",
                e.round, e.sender, e.receiver, e.innovative, e.pool_rank
            ));
            for b in &e.packet {
                out.push_str(&format!("{:02x}", b));
            }
            out.push('\n');
        }
        out
    }
}

/// Mutable state of one flooding generation.
pub struct GenerationState {
    pub id: GenerationId,
    pub area: MonitoringArea,
    /// Corner slot -> member serving it; all `Some` when the area has
    /// members.
    pub corner_nodes: [Option<usize>; 4],
    /// Distinct watchdog ids, ascending.
    pub watchdogs: Vec<usize>,
    pub expiry_round: u32,
    members: Vec<usize>,
    buffers: Vec<PacketPool>,
    round: u32,
}

impl GenerationState {
    /// Prepares a generation over the nodes inside `area`; `None` when the
    /// area is empty.
    pub fn new(
        id: GenerationId,
        area: MonitoringArea,
        nodes: &[NodeRecord],
        side: f64,
        expiry_round: u32,
    ) -> Option<GenerationState> {
        let members = nodes_in(&area, nodes, side);
        if members.is_empty() {
            return None;
        }
        let corner_nodes = corner_assignments(&area, nodes, side);
        let mut watchdogs: Vec<usize> = corner_nodes.iter().filter_map(|&w| w).collect();
        watchdogs.sort_unstable();
        watchdogs.dedup();
        let buffers = vec![PacketPool::new(); members.len()];
        Some(GenerationState { id, area, corner_nodes, watchdogs, expiry_round, members, buffers, round: 0 })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn is_watchdog(&self, node: usize) -> bool {
        self.watchdogs.contains(&node)
    }

    fn member_index(&self, node: usize) -> Option<usize> {
        self.members.binary_search(&node).ok()
    }

    /// Buffer of a member node; `None` for nodes outside the area, which
    /// never hold packets of this generation.
    pub fn buffer(&self, node: usize) -> Option<&PacketPool> {
        self.member_index(node).map(|i| &self.buffers[i])
    }

    pub fn clear_buffers(&mut self) {
        for b in &mut self.buffers {
            b.clear();
        }
    }
}

/// What one generation produced.
#[derive(Clone, Debug)]
pub struct GenerationOutcome {
    /// True when some truthful watchdog saw rank above the probe count.
    pub detected: bool,
    pub transmissions: u64,
    pub rounds: u32,
    /// Final pool of every watchdog, truthful or not, keyed by node id.
    pub watchdog_pools: Vec<(usize, PacketPool)>,
}

/// Runs one generation to its expiry round.
///
/// Synchronous schedule, two phases per round. Round 0: each corner slot's
/// watchdog builds one probe (unit coefficient vector, random payload),
/// keeps it, and broadcasts it. Every later round: each member holding at
/// least one packet broadcasts one random recombination of its buffer.
/// Phase one computes every outgoing packet from the buffers as they stood
/// at the end of the previous round; phase two delivers them, and receivers
/// keep only innovative packets. Receivers outside the area drop the packet
/// (it still cost its one transmission). Adversaries corrupt every packet
/// they send unless excused by `act_normal_as_watchdog`; detection listens
/// only to watchdogs that would truthfully report.
pub fn run_generation<R: Rng + ?Sized>(
    field: &GfField,
    gen: &mut GenerationState,
    graph: &Graph,
    nodes: &[NodeRecord],
    model: &AdversaryModel,
    payload_len: usize,
    rng: &mut R,
    mut trace: Option<&mut TraceLog>,
) -> GenerationOutcome {
    let k = PROBES_PER_GENERATION;
    let mut transmissions = 0u64;

    let corrupts = |node: usize, serving_watchdog: bool| {
        nodes[node].is_adversary && !(model.act_normal_as_watchdog && serving_watchdog)
    };

    // Round 0: probes, in corner order.
    let mut outgoing: Vec<(usize, ProbePacket)> = Vec::with_capacity(k);
    for slot in 0..k {
        let Some(owner) = gen.corner_nodes[slot] else { continue };
        let payload: Vec<FieldElement> =
            (0..payload_len).map(|_| field.random_symbol(rng)).collect();
        let mut pkt = ProbePacket::probe(gen.id, slot, k, payload, gen.expiry_round);
        if corrupts(owner, true) {
            corrupt(field, &mut pkt, model.mode, rng);
        }
        outgoing.push((owner, pkt));
    }
    for (owner, pkt) in &outgoing {
        let idx = gen.member_index(*owner).expect("watchdogs are members");
        gen.buffers[idx].insert_if_innovative(field, pkt);
        transmissions += 1;
        deliver(field, gen, graph, *owner, pkt, 0, trace.as_deref_mut());
    }

    // Relay rounds.
    for round in 1..gen.expiry_round {
        gen.round = round;
        outgoing.clear();
        for (idx, &node) in gen.members.iter().enumerate() {
            if gen.buffers[idx].is_empty() {
                continue;
            }
            let mut pkt = local_encode(field, gen.buffers[idx].packets(), rng)
                .expect("buffers hold uniform packets of this generation");
            if corrupts(node, gen.is_watchdog(node)) {
                corrupt(field, &mut pkt, model.mode, rng);
            }
            outgoing.push((node, pkt));
        }
        for (sender, pkt) in &outgoing {
            transmissions += 1;
            deliver(field, gen, graph, *sender, pkt, round, trace.as_deref_mut());
        }
    }
    gen.round = gen.expiry_round;

    let watchdog_pools: Vec<(usize, PacketPool)> = gen
        .watchdogs
        .iter()
        .map(|&w| (w, gen.buffer(w).expect("watchdogs are members").clone()))
        .collect();
    let detected = watchdog_pools.iter().any(|(w, pool)| {
        let truthful = !nodes[*w].is_adversary || model.act_normal_as_watchdog;
        truthful && detect(pool)
    });
    gen.clear_buffers();

    GenerationOutcome { detected, transmissions, rounds: gen.expiry_round, watchdog_pools }
}

fn deliver(
    field: &GfField,
    gen: &mut GenerationState,
    graph: &Graph,
    sender: usize,
    pkt: &ProbePacket,
    round: u32,
    mut trace: Option<&mut TraceLog>,
) {
    for &nb in graph.neighbors(sender) {
        let Some(idx) = gen.member_index(nb) else {
            continue; // outside the area: dropped on arrival
        };
        let innovative = gen.buffers[idx].insert_if_innovative(field, pkt);
        if let Some(t) = trace.as_deref_mut() {
            t.events.push(TraceEvent {
                round,
                sender,
                receiver: nb,
                innovative,
                pool_rank: gen.buffers[idx].rank(),
                packet: pkt.log_bytes(field.width()),
            });
        }
    }
}

/// Per-node suspicion counters; a node's level is how many grid passes
/// marked it.
#[derive(Clone, Debug, PartialEq)]
pub struct SuspectTable {
    levels: Vec<u32>,
}

impl SuspectTable {
    pub fn new(n: usize) -> SuspectTable {
        SuspectTable { levels: vec![0; n] }
    }

    pub fn node_count(&self) -> usize {
        self.levels.len()
    }

    pub fn bump(&mut self, id: usize) {
        self.levels[id] += 1;
    }

    pub fn level(&self, id: usize) -> u32 {
        self.levels[id]
    }

    /// Ids at or above `threshold`, ascending.
    pub fn with_level_at_least(&self, threshold: u32) -> Vec<usize> {
        self.levels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l >= threshold)
            .map(|(id, _)| id)
            .collect()
    }
}

/// A below-threshold cell whose whole population was marked.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkedArea {
    pub rect: Rect,
    pub level: u32,
}

/// One generation as seen by a full pass, for reporting and drawing.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub rect: Rect,
    pub level: u32,
    pub detected: bool,
}

/// Everything one grid pass produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    /// Nodes marked by this pass, ascending.
    pub marked: Vec<usize>,
    /// Marked innocents over all nodes.
    pub innocent_ratio: f64,
    /// Marked adversaries over all adversaries; one when there are none.
    pub catch_ratio: f64,
    pub probe_transmissions: u64,
    pub rounds_elapsed: u64,
    /// Distinct quadtree levels that ran at least one generation.
    pub levels_triggered: u32,
    /// Areas that could not elect any watchdog (diagnostic; zero for any
    /// nonempty area under nearest-corner election).
    pub skipped_generations: u32,
    /// Largest pool rank any watchdog reached; stays at the probe count
    /// without tampering, and zero if no generation ran.
    pub max_watchdog_rank: usize,
    pub marked_areas: Vec<MarkedArea>,
    pub generations: Vec<GenerationRecord>,
}

/// Innocent and catch ratios for a marked set.
pub fn compute_metrics(marked: &[usize], adversaries: &[usize], n: usize) -> (f64, f64) {
    let adv: BTreeSet<usize> = adversaries.iter().copied().collect();
    let caught = marked.iter().filter(|id| adv.contains(id)).count();
    let innocent = marked.len() - caught;
    let innocent_ratio = if n == 0 { 0.0 } else { innocent as f64 / n as f64 };
    let catch_ratio =
        if adv.is_empty() { 1.0 } else { caught as f64 / adv.len() as f64 };
    (innocent_ratio, catch_ratio)
}

/// Protocol knobs for a full pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolParams {
    /// Population threshold: areas estimated below it are marked, not
    /// probed. Must be at least 1.
    pub mu: f64,
    /// Probe payload symbols.
    pub payload_len: usize,
    pub model: AdversaryModel,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams { mu: 5.0, payload_len: 16, model: AdversaryModel::default() }
    }
}

/// One full detection pass over the deployment square with the grid origin
/// at `origin`. Breadth-first over the quadtree: probe, and on detection
/// enqueue the four quadrants; mark below-threshold cells outright. Every
/// marked node gets one suspect-level bump in `suspects`.
pub fn dhaiq_run<R: Rng + ?Sized>(
    field: &GfField,
    nodes: &[NodeRecord],
    graph: &Graph,
    side: f64,
    params: &ProtocolParams,
    origin: (f64, f64),
    run_index: u32,
    suspects: &mut SuspectTable,
    rng: &mut R,
) -> RunMetrics {
    assert!(params.mu >= 1.0, "threshold below one would never terminate marking");
    assert_eq!(suspects.node_count(), nodes.len());

    let mut queue: VecDeque<MonitoringArea> =
        VecDeque::from([MonitoringArea::root(side, nodes.len(), origin)]);
    let mut marked: BTreeSet<usize> = BTreeSet::new();
    let mut marked_areas: Vec<MarkedArea> = Vec::new();
    let mut generations: Vec<GenerationRecord> = Vec::new();
    let mut levels: BTreeSet<u32> = BTreeSet::new();
    let mut transmissions = 0u64;
    let mut rounds = 0u64;
    let mut skipped = 0u32;
    let mut max_rank = 0usize;
    let mut area_counter = 0u32;

    while let Some(area) = queue.pop_front() {
        let members = nodes_in(&area, nodes, side);
        if members.is_empty() {
            continue;
        }
        let clipped = area.clipped(side).expect("an area with members has an interior");

        if area.estimated_count < params.mu {
            for &id in &members {
                suspects.bump(id);
                marked.insert(id);
            }
            marked_areas.push(MarkedArea { rect: clipped, level: area.level });
            continue;
        }

        let expiry = timestamp_rounds(area.estimated_count);
        let id = GenerationId { run: run_index, level: area.level, area: area_counter };
        area_counter += 1;
        let mut gen = GenerationState::new(id, area.clone(), nodes, side, expiry)
            .expect("members checked above");
        if gen.watchdogs.is_empty() {
            skipped += 1;
            continue;
        }
        let outcome =
            run_generation(field, &mut gen, graph, nodes, &params.model, params.payload_len, rng, None);
        transmissions += outcome.transmissions;
        rounds += u64::from(outcome.rounds);
        for (_, pool) in &outcome.watchdog_pools {
            max_rank = max_rank.max(pool.rank());
        }
        levels.insert(area.level);
        generations.push(GenerationRecord {
            rect: clipped,
            level: area.level,
            detected: outcome.detected,
        });
        if outcome.detected {
            for child in area.subdivide() {
                queue.push_back(child);
            }
        }
    }

    let adversaries: Vec<usize> =
        nodes.iter().filter(|n| n.is_adversary).map(|n| n.id).collect();
    let marked: Vec<usize> = marked.into_iter().collect();
    let (innocent_ratio, catch_ratio) = compute_metrics(&marked, &adversaries, nodes.len());
    RunMetrics {
        marked,
        innocent_ratio,
        catch_ratio,
        probe_transmissions: transmissions,
        rounds_elapsed: rounds,
        levels_triggered: levels.len() as u32,
        skipped_generations: skipped,
        max_watchdog_rank: max_rank,
        marked_areas,
        generations,
    }
}

/// Edge length of the cells that end up marked: the deployment side halved
/// once per subdivision until the estimate drops below the threshold.
pub fn least_area_edge(side: f64, n: usize, mu: f64) -> f64 {
    let mut est = n as f64;
    let mut halvings = 0i32;
    while est >= mu {
        est /= 4.0;
        halvings += 1;
    }
    side / 2f64.powi(halvings)
}

/// Result of the two-pass scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftOutcome {
    /// Nodes marked by at least `threshold` passes, ascending.
    pub final_suspects: Vec<usize>,
    pub runs: Vec<RunMetrics>,
    pub suspects: SuspectTable,
    pub innocent_ratio: f64,
    pub catch_ratio: f64,
}

/// Runs the pass twice: once on the plain grid, once shifted diagonally by
/// half the least-area edge, then keeps nodes marked at least `threshold`
/// times (2 demands agreement of both passes).
pub fn run_with_shift<R: Rng + ?Sized>(
    field: &GfField,
    nodes: &[NodeRecord],
    graph: &Graph,
    side: f64,
    params: &ProtocolParams,
    threshold: u32,
    rng: &mut R,
) -> ShiftOutcome {
    let mut suspects = SuspectTable::new(nodes.len());
    let half = least_area_edge(side, nodes.len(), params.mu) / 2.0;
    let runs = vec![
        dhaiq_run(field, nodes, graph, side, params, (0.0, 0.0), 0, &mut suspects, rng),
        dhaiq_run(field, nodes, graph, side, params, (half, half), 1, &mut suspects, rng),
    ];
    let final_suspects = suspects.with_level_at_least(threshold);
    let adversaries: Vec<usize> =
        nodes.iter().filter(|n| n.is_adversary).map(|n| n.id).collect();
    let (innocent_ratio, catch_ratio) =
        compute_metrics(&final_suspects, &adversaries, nodes.len());
    ShiftOutcome { final_suspects, runs, suspects, innocent_ratio, catch_ratio }
}
