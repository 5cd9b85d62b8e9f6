//! Deterministic discrete-event engine.
//!
//! Events are ordered by `(time, seq)`; `seq` increases with every scheduled
//! event, so simultaneous events run in scheduling order. Every processed
//! event appends one trace line, and the SHA-256 of the trace identifies a
//! run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::broker::{BrokerState, ProtocolConfig};
use crate::demand::{Decision, DemandSpec};
use crate::propagation::{InterDomainMessage, MessageBody, MessageKind, PropagationError};
use crate::sim::invariants::{check_broker, CheckDepth, Violation};
use crate::sim::metrics::{Metrics, MetricsRow};
use crate::sim::scenario::{Action, DemandStream, Scenario, ScenarioError};
use crate::topology::NetworkTopology;
use crate::types::{BrokerId, DemandId, DomainId, Kbps, ServiceClass, SimTime};
use crate::wire::encode_message;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Begin,
    Mid,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum EventKind {
    Deliver(InterDomainMessage),
    Phase(BrokerId, Phase),
    Refresh(BrokerId),
    Expiry(BrokerId),
    Join(BrokerId),
    Action(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Check invariants after every event instead of once per term end.
    pub checked: bool,
    /// No event at or after this time is processed.
    pub horizon: SimTime,
    pub max_events: Option<u64>,
    /// Keep trace lines in memory (the hash is always computed).
    pub record_trace: bool,
    /// Once quiescent with no scripted action pending, run one more term
    /// and stop.
    pub stop_at_quiescence: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            checked: false,
            horizon: SimTime::NEVER,
            max_events: None,
            record_trace: false,
            stop_at_quiescence: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invariant violated at event {event_index} (t={time}): {violations:?}")]
pub struct InvariantViolation {
    pub event_index: u64,
    pub time: SimTime,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub sent: BTreeMap<MessageKind, u64>,
    /// AIs carried per advertisement origin (transfers count each element).
    pub ais_by_origin: BTreeMap<BrokerId, u64>,
    pub delivered: u64,
    pub dropped_inactive: u64,
    pub handler_errors: u64,
    pub submit_errors: u64,
}

/// Why the run loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    QueueEmpty,
    Horizon,
    Quiescent,
    MaxEvents,
    Violation,
}

pub struct RunResult {
    pub trace_hash: String,
    pub trace: Vec<String>,
    pub metrics: Metrics,
    pub brokers: BTreeMap<BrokerId, BrokerState>,
    pub stats: RunStats,
    pub violation: Option<InvariantViolation>,
    pub events: u64,
    pub end_time: SimTime,
    pub stop: StopReason,
    pub quiescent: bool,
}

impl fmt::Debug for RunResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunResult")
            .field("trace_hash", &self.trace_hash)
            .field("events", &self.events)
            .field("end_time", &self.end_time)
            .field("stop", &self.stop)
            .field("violation", &self.violation)
            .finish()
    }
}

/// True iff no protocol message is in flight and, when the demand cycle
/// runs, every broker's last two end-of-term ledgers are identical.
pub fn check_quiescence<'a>(
    brokers: impl IntoIterator<Item = &'a BrokerState>,
    in_flight: usize,
    demand_cycle: bool,
) -> bool {
    in_flight == 0 && (!demand_cycle || brokers.into_iter().all(|b| b.demand_state().ledger_stable()))
}

pub struct Simulation {
    topology: Arc<NetworkTopology>,
    scenario: Scenario,
    opts: RunOptions,
    brokers: BTreeMap<BrokerId, BrokerState>,
    active: BTreeSet<BrokerId>,
    refreshing: BTreeSet<BrokerId>,
    phase: BTreeMap<BrokerId, u64>,
    streams: Vec<DemandStream>,
    queue: BTreeMap<(SimTime, u64), EventKind>,
    next_seq: u64,
    now: SimTime,
    in_flight: usize,
    events: u64,
    expiry_at: BTreeMap<BrokerId, SimTime>,
    pending_actions: usize,
    stop_after: Option<SimTime>,
    hasher: Sha256,
    trace: Vec<String>,
    metrics: Metrics,
    sent_this_term: BTreeMap<BrokerId, [u64; 5]>,
    stats: RunStats,
    violation: Option<InvariantViolation>,
}

impl Simulation {
    pub fn new(
        topology: Arc<NetworkTopology>,
        scenario: Scenario,
        seed: u64,
        opts: RunOptions,
    ) -> Result<Self, ScenarioError> {
        let problems = topology.validate();
        if !problems.is_empty() {
            let list: Vec<String> = problems.iter().map(|v| v.to_string()).collect();
            return Err(ScenarioError::Topology(list.join("; ")));
        }
        if let Some(e) = scenario.validate(&topology).into_iter().next() {
            return Err(e);
        }
        let config = ProtocolConfig {
            validity_window: scenario.effective_validity(),
            hold_terms: scenario.hold_terms,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut brokers = BTreeMap::new();
        let mut phase = BTreeMap::new();
        let mut ids: Vec<BrokerId> = topology.brokers().iter().map(|b| b.id.clone()).collect();
        ids.sort();
        for id in &ids {
            let mut st = BrokerState::new(topology.clone(), id, config.clone())
                .map_err(|e| ScenarioError::Topology(e.to_string()))?;
            st.set_checked(opts.checked);
            brokers.insert(id.clone(), st);
            // drawn for every broker so explicit offsets don't shift the others
            let drawn = rng.gen_range(0..scenario.term_length);
            phase.insert(id.clone(), scenario.phase_offsets.get(id).copied().unwrap_or(drawn));
        }
        let mut streams = scenario.demands.clone();
        if let Some(r) = scenario.random_demands {
            streams.extend(random_streams(&topology, &r, &mut rng));
        }
        let mut sim = Self {
            topology,
            opts,
            brokers,
            active: BTreeSet::new(),
            refreshing: BTreeSet::new(),
            phase,
            streams,
            queue: BTreeMap::new(),
            next_seq: 0,
            now: SimTime::ZERO,
            in_flight: 0,
            events: 0,
            expiry_at: BTreeMap::new(),
            pending_actions: 0,
            stop_after: None,
            hasher: Sha256::new(),
            trace: Vec::new(),
            metrics: Metrics::default(),
            sent_this_term: BTreeMap::new(),
            stats: RunStats::default(),
            violation: None,
            scenario,
        };
        let late = sim.scenario.late_joiners();
        for id in ids.iter().filter(|b| !late.contains(*b)) {
            sim.schedule(SimTime::ZERO, EventKind::Join(id.clone()));
        }
        let actions: Vec<SimTime> = sim.scenario.actions.iter().map(|a| a.at).collect();
        sim.pending_actions = actions.len();
        for (i, at) in actions.into_iter().enumerate() {
            sim.schedule(at, EventKind::Action(i));
        }
        Ok(sim)
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind) {
        self.queue.insert((at, self.next_seq), kind);
        self.next_seq += 1;
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn events_processed(&self) -> u64 {
        self.events
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    pub fn broker(&self, id: &BrokerId) -> Option<&BrokerState> {
        self.brokers.get(id)
    }

    pub fn brokers(&self) -> &BTreeMap<BrokerId, BrokerState> {
        &self.brokers
    }

    pub fn active_brokers(&self) -> &BTreeSet<BrokerId> {
        &self.active
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn violation(&self) -> Option<&InvariantViolation> {
        self.violation.as_ref()
    }

    pub fn phase_offset(&self, b: &BrokerId) -> Option<u64> {
        self.phase.get(b).copied()
    }

    pub fn streams(&self) -> &[DemandStream] {
        &self.streams
    }

    /// Time of the next queued event.
    pub fn next_event_time(&self) -> Option<SimTime> {
        self.queue.keys().next().map(|(t, _)| *t)
    }

    /// Quiescence of the brokers that have joined; false before any has.
    pub fn is_quiescent(&self) -> bool {
        !self.active.is_empty()
            && check_quiescence(
            self.active.iter().filter_map(|b| self.brokers.get(b)),
            self.in_flight,
            self.scenario.demand_cycle,
        )
    }

    /// Processes one event. Returns `false` when nothing was processed.
    pub fn step(&mut self) -> bool {
        if self.violation.is_some() {
            return false;
        }
        if self.opts.max_events.is_some_and(|m| self.events >= m) {
            return false;
        }
        let Some((&(t, seq), _)) = self.queue.iter().next() else {
            return false;
        };
        if t >= self.opts.horizon || self.stop_after.is_some_and(|s| t >= s) {
            return false;
        }
        let kind = self.queue.remove(&(t, seq)).expect("present");
        debug_assert!(t >= self.now, "event causality");
        self.now = t;
        let index = self.events;
        self.events += 1;
        let (line, touched, term_end) = self.dispatch(kind);
        self.record(format!("{t} {seq} {line}"));
        for b in &touched {
            self.schedule_expiry(b);
        }
        self.check(index, term_end);
        if self.opts.stop_at_quiescence
            && self.stop_after.is_none()
            && self.pending_actions == 0
            && self.is_quiescent()
        {
            self.stop_after = Some(t.plus(self.scenario.term_length));
        }
        true
    }

    /// Runs until the queue is empty, the horizon or event cap is reached,
    /// or an invariant fails.
    pub fn run_to_end(&mut self) -> StopReason {
        while self.step() {}
        self.stop_reason()
    }

    fn stop_reason(&self) -> StopReason {
        if self.violation.is_some() {
            StopReason::Violation
        } else if self.opts.max_events.is_some_and(|m| self.events >= m) {
            StopReason::MaxEvents
        } else if self.queue.is_empty() {
            StopReason::QueueEmpty
        } else if self.stop_after.is_some_and(|s| self.next_event_time().is_some_and(|n| n >= s)) {
            StopReason::Quiescent
        } else {
            StopReason::Horizon
        }
    }

    /// Processes every event strictly before `t`.
    pub fn run_until(&mut self, t: SimTime) {
        while self.next_event_time().is_some_and(|n| n < t) && self.step() {}
    }

    /// Steps until quiescent (checked after each event) or `limit` is
    /// reached. Returns the time quiescence was first observed.
    pub fn run_until_quiescent(&mut self, limit: SimTime) -> Option<SimTime> {
        loop {
            if self.is_quiescent() && !self.active.is_empty() {
                return Some(self.now);
            }
            if !self.next_event_time().is_some_and(|n| n < limit) || !self.step() {
                return self.is_quiescent().then_some(self.now);
            }
        }
    }

    pub fn finish(mut self) -> RunResult {
        let stop = self.run_to_end();
        self.into_result(stop)
    }

    pub fn into_result(self, stop: StopReason) -> RunResult {
        let quiescent = self.is_quiescent();
        let hash = self.hasher.finalize();
        RunResult {
            trace_hash: hash.iter().map(|b| format!("{b:02x}")).collect(),
            trace: self.trace,
            metrics: self.metrics,
            brokers: self.brokers,
            stats: self.stats,
            violation: self.violation,
            events: self.events,
            end_time: self.now,
            stop,
            quiescent,
        }
    }

    fn record(&mut self, line: String) {
        self.hasher.update(line.as_bytes());
        self.hasher.update(b"\n");
        if self.opts.record_trace {
            self.trace.push(line);
        }
    }

    fn check(&mut self, index: u64, term_end: Option<BrokerId>) {
        if !self.opts.checked && term_end.is_none() {
            return;
        }
        let mut v = Vec::new();
        for (id, b) in &self.brokers {
            let depth = if term_end.as_ref() == Some(id) {
                CheckDepth::TermBoundary
            } else {
                CheckDepth::Event
            };
            v.extend(check_broker(b, depth));
        }
        if !v.is_empty() {
            self.violation = Some(InvariantViolation {
                event_index: index,
                time: self.now,
                violations: v,
            });
        }
    }

    fn schedule_expiry(&mut self, b: &BrokerId) {
        let Some(next) = self.brokers.get(b).and_then(|s| s.next_expiry()) else {
            return;
        };
        let due = self.expiry_at.get(b).is_none_or(|&t| next < t || t < self.now);
        if due {
            self.expiry_at.insert(b.clone(), next);
            self.schedule(next, EventKind::Expiry(b.clone()));
        }
    }

    fn send_all(&mut self, msgs: Vec<InterDomainMessage>) -> usize {
        let n = msgs.len();
        for m in msgs {
            let kind = m.kind();
            *self.stats.sent.entry(kind).or_default() += 1;
            self.sent_this_term.entry(m.from.clone()).or_default()[kind as usize] += 1;
            match &m.body {
                MessageBody::Ai(ai) | MessageBody::NewAi(ai) => {
                    *self.stats.ais_by_origin.entry(ai.origin.clone()).or_default() += 1;
                }
                MessageBody::AiDatabaseTransfer(v) => {
                    for ai in v {
                        *self.stats.ais_by_origin.entry(ai.origin.clone()).or_default() += 1;
                    }
                }
                _ => {}
            }
            let at = self.now.plus(self.scenario.latency_between(&m.from, &m.to));
            self.in_flight += 1;
            self.schedule(at, EventKind::Deliver(m));
        }
        n
    }

    fn first_begin(&self, b: &BrokerId) -> SimTime {
        let l = self.scenario.term_length;
        let phi = self.phase[b];
        let t = self.now.0;
        if t <= phi {
            SimTime(phi)
        } else {
            SimTime(phi + (t - phi).div_ceil(l) * l)
        }
    }

    fn join(&mut self, b: &BrokerId) -> String {
        if !self.active.insert(b.clone()) {
            return format!("join {b} already-active");
        }
        let now = self.now;
        let st = self.brokers.get_mut(b).expect("known broker");
        st.install_local_ais(now);
        let msgs = match st.bootstrap(now) {
            Ok(m) => m,
            Err(PropagationError::NoLocalEdgeDomains(_)) => Vec::new(),
            Err(_) => {
                self.stats.handler_errors += 1;
                Vec::new()
            }
        };
        let n = self.send_all(msgs);
        self.refreshing.insert(b.clone());
        if let Some(r) = self.scenario.refresh_interval {
            self.schedule(now.plus(r), EventKind::Refresh(b.clone()));
        }
        if self.scenario.demand_cycle {
            let at = self.first_begin(b);
            self.schedule(at, EventKind::Phase(b.clone(), Phase::Begin));
        }
        format!("join {b} sent={n}")
    }

    fn dispatch(&mut self, kind: EventKind) -> (String, Vec<BrokerId>, Option<BrokerId>) {
        let now = self.now;
        match kind {
            EventKind::Join(b) => {
                let line = self.join(&b);
                (line, vec![b], None)
            }
            EventKind::Deliver(m) => {
                self.in_flight -= 1;
                let xml = encode_message(&m);
                if !self.active.contains(&m.to) {
                    self.stats.dropped_inactive += 1;
                    return (format!("drop {xml}"), vec![], None);
                }
                self.stats.delivered += 1;
                let to = m.to.clone();
                let st = self.brokers.get_mut(&to).expect("known broker");
                let result: Result<Vec<InterDomainMessage>, String> = match m.body {
                    MessageBody::Ai(ai) => st.handle_ai(&m.from, ai, now).map_err(|e| e.to_string()),
                    MessageBody::NewAi(ai) => st.handle_new_ai(&m.from, ai, now).map_err(|e| e.to_string()),
                    MessageBody::AiDatabaseTransfer(v) => {
                        st.handle_db_transfer(&m.from, v, now).map_err(|e| e.to_string())
                    }
                    MessageBody::AggregatedDs(ds) => {
                        st.receive_ds(&m.from, ds).map(|_| Vec::new()).map_err(|e| e.to_string())
                    }
                    MessageBody::Rejection(n) => st.handle_rejection(n).map_err(|e| e.to_string()),
                };
                let line = match result {
                    Ok(out) => {
                        let n = self.send_all(out);
                        format!("deliver {xml} sent={n}")
                    }
                    Err(e) => {
                        self.stats.handler_errors += 1;
                        format!("deliver {xml} error={e}")
                    }
                };
                (line, vec![to], None)
            }
            EventKind::Phase(b, Phase::Begin) => {
                let l = self.scenario.term_length;
                let st = self.brokers.get_mut(&b).expect("known broker");
                let term = st.begin_term(now);
                let mut submitted = 0;
                for s in &self.streams {
                    if !s.active_in(term) || s.bandwidth == Kbps::ZERO || st.attachment(&s.src).is_none() {
                        continue;
                    }
                    let spec = DemandSpec {
                        id: DemandId::new(format!("{}.{term}", s.name)),
                        src: s.src.clone(),
                        dest: s.dest.clone(),
                        class: s.class,
                        bandwidth: s.bandwidth,
                        issued_term: term,
                    };
                    match st.submit_ds(spec) {
                        Ok(()) => submitted += 1,
                        Err(_) => self.stats.submit_errors += 1,
                    }
                }
                self.schedule(now.plus(l / 2), EventKind::Phase(b.clone(), Phase::Mid));
                self.schedule(now.plus(l), EventKind::Phase(b.clone(), Phase::End));
                (format!("begin {b} term={term} submitted={submitted}"), vec![], None)
            }
            EventKind::Phase(b, Phase::Mid) => {
                let st = self.brokers.get_mut(&b).expect("known broker");
                let msgs = st.mid_cycle(now);
                let n = self.send_all(msgs);
                (format!("mid {b} sent={n}"), vec![], None)
            }
            EventKind::Phase(b, Phase::End) => {
                let st = self.brokers.get_mut(&b).expect("known broker");
                let report = st.end_of_cycle(now);
                let mut row = MetricsRow {
                    term: st.demand_state().term(),
                    broker: b.clone(),
                    time: now,
                    db_size: st.database().len(),
                    ledger_stable: st.demand_state().ledger_stable(),
                    ..Default::default()
                };
                for (_, target, d) in &report.decisions {
                    match d {
                        Decision::Admitted => {
                            row.admitted_kbps += target.0;
                            row.admitted_count += 1;
                        }
                        Decision::Rejected(_) => {
                            row.rejected_kbps += target.0;
                            row.rejected_count += 1;
                        }
                    }
                }
                let ledger = st.ledger();
                let topo = &self.topology;
                row.reserved_kbps = ledger.reservations().values().flat_map(|m| m.values()).map(|k| k.0).sum();
                row.max_utilization = ledger
                    .reservations()
                    .keys()
                    .filter_map(|l| {
                        let cap = topo.link(l)?.capacity.0;
                        (cap > 0).then(|| ledger.reserved_total(l).0 as f64 / cap as f64)
                    })
                    .fold(0.0, f64::max);
                let line = format!(
                    "end {b} term={} admitted={} rejected={} released={}",
                    row.term,
                    row.admitted_count,
                    row.rejected_count,
                    report.released.len()
                );
                let n = self.send_all(report.messages);
                row.sent = self.sent_this_term.remove(&b).unwrap_or_default();
                // messages sent at this instant belong to the closing term
                let _ = n;
                self.metrics.push(row);
                self.schedule(now, EventKind::Phase(b.clone(), Phase::Begin));
                (line, vec![], Some(b))
            }
            EventKind::Refresh(b) => {
                if !self.refreshing.contains(&b) {
                    return (format!("refresh {b} silent"), vec![], None);
                }
                let st = self.brokers.get_mut(&b).expect("known broker");
                let msgs = st.emit_refresh(now);
                let n = self.send_all(msgs);
                if let Some(r) = self.scenario.refresh_interval {
                    self.schedule(now.plus(r), EventKind::Refresh(b.clone()));
                }
                (format!("refresh {b} sent={n}"), vec![b], None)
            }
            EventKind::Expiry(b) => {
                if self.expiry_at.get(&b) == Some(&now) {
                    self.expiry_at.remove(&b);
                }
                let st = self.brokers.get_mut(&b).expect("known broker");
                let gone = st.expire_stale(now);
                let list: Vec<String> = gone.iter().map(|k| format!("{}/{}", k.edge, k.class)).collect();
                (format!("expire {b} removed=[{}]", list.join(",")), vec![b], None)
            }
            EventKind::Action(i) => {
                self.pending_actions -= 1;
                let action = self.scenario.actions[i].action.clone();
                let mut touched = Vec::new();
                let detail = match &action {
                    Action::Join(b) => {
                        touched.push(b.clone());
                        self.join(b)
                    }
                    Action::Blackout(b) => {
                        self.refreshing.remove(b);
                        format!("blackout {b}")
                    }
                    Action::SetDemand { stream, bandwidth } => {
                        for s in self.streams.iter_mut().filter(|s| &s.name == stream) {
                            s.bandwidth = *bandwidth;
                        }
                        format!("demand {stream} {bandwidth}")
                    }
                    Action::FaultOverReserve { broker, link, kbps } => {
                        let st = self.brokers.get_mut(broker).expect("validated broker");
                        st.ledger.inject_fault(link, *kbps);
                        format!("fault {broker} {link} {kbps}")
                    }
                };
                for st in self.brokers.values_mut() {
                    st.demand.clear_ledger_history();
                }
                (format!("action {detail}"), touched, None)
            }
        }
    }
}

/// Random demand streams between distinct edge domains sharing a class.
fn random_streams(
    topo: &NetworkTopology,
    r: &crate::sim::scenario::RandomDemands,
    rng: &mut ChaCha8Rng,
) -> Vec<DemandStream> {
    let edges: Vec<(DomainId, Vec<ServiceClass>)> = topo
        .edge_domains()
        .map(|d| (d.id.clone(), d.classes.clone()))
        .collect();
    let mut out = Vec::new();
    if edges.len() < 2 || r.max_kbps < r.min_kbps {
        return out;
    }
    let mut attempts = 0;
    while out.len() < r.count && attempts < r.count * 20 {
        attempts += 1;
        let i = rng.gen_range(0..edges.len());
        let j = rng.gen_range(0..edges.len());
        if i == j {
            continue;
        }
        let shared: Vec<ServiceClass> = edges[i]
            .1
            .iter()
            .filter(|c| edges[j].1.contains(c))
            .copied()
            .collect();
        if shared.is_empty() {
            continue;
        }
        let class = shared[rng.gen_range(0..shared.len())];
        let from = rng.gen_range(0..=r.within_terms);
        let len = rng.gen_range(1..=r.within_terms.max(1));
        out.push(DemandStream {
            name: format!("r{}", out.len()),
            src: edges[i].0.clone(),
            dest: edges[j].0.clone(),
            class,
            bandwidth: Kbps(rng.gen_range(r.min_kbps..=r.max_kbps)),
            from_term: from,
            until_term: Some(from + len),
        });
    }
    out
}

/// Builds and runs a scenario to completion.
pub fn run(
    topology: Arc<NetworkTopology>,
    scenario: Scenario,
    seed: u64,
    opts: RunOptions,
) -> Result<RunResult, ScenarioError> {
    Ok(Simulation::new(topology, scenario, seed, opts)?.finish())
}
