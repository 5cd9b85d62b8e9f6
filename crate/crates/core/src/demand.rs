//! Three-phase demand cycle: collect user demands at the beginning of a
//! term, aggregate and forward them in the middle, admit at the end.
//!
//! Phases run on each broker's own clock. Anything arriving after a broker's
//! mid-term point is forwarded one term later; admission takes whatever has
//! arrived by the end of the term, in arrival order.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::admission::{AdmitOutcome, AggregateKey, Reservations};
use crate::broker::BrokerState;
use crate::propagation::{InterDomainMessage, MessageBody};
use crate::types::{BrokerId, DemandId, DomainId, Kbps, LinkId, NextHop, RouterId, ServiceClass, SimTime, TermIndex};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandSpec {
    pub id: DemandId,
    pub src: DomainId,
    pub dest: DomainId,
    pub class: ServiceClass,
    pub bandwidth: Kbps,
    pub issued_term: TermIndex,
}

/// Destination-merged demand forwarded to the next broker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatedDs {
    pub dest: DomainId,
    pub class: ServiceClass,
    pub bandwidth: Kbps,
    /// Term of the sending broker.
    pub term: TermIndex,
    pub origin: BrokerId,
}

/// Sent back to the broker that forwarded a rejected aggregate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectionNotice {
    pub dest: DomainId,
    pub class: ServiceClass,
    pub bandwidth: Kbps,
    /// Term and origin of the aggregate being rejected.
    pub term: TermIndex,
    pub origin: BrokerId,
    pub rejected_by: BrokerId,
}

/// One input of an aggregate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Component {
    Local { id: DemandId, bandwidth: Kbps },
    Upstream { from: BrokerId, term: TermIndex, bandwidth: Kbps },
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::Local { id, bandwidth } => write!(f, "local:{id}:{bandwidth}"),
            Component::Upstream { from, term, bandwidth } => write!(f, "up:{from}@{term}:{bandwidth}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    Bottleneck(LinkId),
    NoRoute,
    NoPath,
    Downstream(BrokerId),
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::Bottleneck(l) => write!(f, "bottleneck:{l}"),
            RejectReason::NoRoute => f.write_str("no-route"),
            RejectReason::NoPath => f.write_str("no-path"),
            RejectReason::Downstream(b) => write!(f, "downstream:{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Admitted,
    Rejected(RejectReason),
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Admitted => f.write_str("admitted"),
            Decision::Rejected(r) => write!(f, "rejected {r}"),
        }
    }
}

/// A rejection surfaced to the user who issued the demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRejection {
    pub id: DemandId,
    pub term: TermIndex,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArchiveRecord {
    Submitted { term: TermIndex, spec: DemandSpec },
    Received { term: TermIndex, from: BrokerId, ds: AggregatedDs },
    Forwarded { term: TermIndex, to: BrokerId, ds: AggregatedDs, components: Vec<Component> },
    Decided {
        term: TermIndex,
        key: AggregateKey,
        target: Kbps,
        decision: Decision,
        components: Vec<Component>,
    },
    Released { term: TermIndex, key: AggregateKey },
    NoticeSent { term: TermIndex, to: BrokerId, notice: RejectionNotice },
    UserNotified { term: TermIndex, rejection: UserRejection },
}

fn join(parts: &[Component]) -> String {
    parts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

impl ArchiveRecord {
    /// One line per record for audit tooling.
    pub fn to_line(&self) -> String {
        match self {
            ArchiveRecord::Submitted { term, spec } => format!(
                "term={term} submit id={} src={} dest={} class={} bw={}",
                spec.id, spec.src, spec.dest, spec.class, spec.bandwidth
            ),
            ArchiveRecord::Received { term, from, ds } => format!(
                "term={term} recv from={from} dest={} class={} bw={} dsterm={}",
                ds.dest, ds.class, ds.bandwidth, ds.term
            ),
            ArchiveRecord::Forwarded { term, to, ds, components } => format!(
                "term={term} forward to={to} dest={} class={} bw={} parts={}",
                ds.dest,
                ds.class,
                ds.bandwidth,
                join(components)
            ),
            ArchiveRecord::Decided { term, key, target, decision, components } => format!(
                "term={term} decide key={key} target={target} {decision} parts={}",
                join(components)
            ),
            ArchiveRecord::Released { term, key } => format!("term={term} release key={key}"),
            ArchiveRecord::NoticeSent { term, to, notice } => format!(
                "term={term} notice to={to} dest={} class={} bw={} dsterm={} by={}",
                notice.dest, notice.class, notice.bandwidth, notice.term, notice.rejected_by
            ),
            ArchiveRecord::UserNotified { term, rejection } => format!(
                "term={term} user-reject id={} reason={}",
                rejection.id, rejection.reason
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DemandError {
    #[error("source {0} is not attached to this broker")]
    NotLocalSource(DomainId),
    #[error("duplicate demand id {0}")]
    DuplicateId(DemandId),
    #[error("demand {0} has identical source and destination")]
    SameEndpoints(DemandId),
    #[error("{0} is not an adjacent broker")]
    NotNeighbor(BrokerId),
    #[error("no forward record for {dest}/{class} in term {term}")]
    UnknownOrigin {
        dest: DomainId,
        class: ServiceClass,
        term: TermIndex,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    seq: u64,
    dest: DomainId,
    class: ServiceClass,
    ingress: RouterId,
    component: Component,
    forwarded: bool,
    admitted: bool,
}

impl Entry {
    fn done(&mut self) {
        self.forwarded = true;
        self.admitted = true;
    }
}

/// Bandwidth of a group of entries: local demands add up, an upstream
/// sender contributes only its most recent restatement.
fn aggregate_bandwidth<'a>(entries: impl IntoIterator<Item = &'a Entry>) -> Kbps {
    let mut local = Kbps::ZERO;
    let mut latest: BTreeMap<&BrokerId, (u64, Kbps)> = BTreeMap::new();
    for e in entries {
        match &e.component {
            Component::Local { bandwidth, .. } => local += *bandwidth,
            Component::Upstream { from, bandwidth, .. } => {
                let slot = latest.entry(from).or_insert((e.seq, *bandwidth));
                if e.seq >= slot.0 {
                    *slot = (e.seq, *bandwidth);
                }
            }
        }
    }
    local + latest.values().map(|(_, k)| *k).sum()
}

/// Result of the end-of-term step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EndReport {
    pub decisions: Vec<(AggregateKey, Kbps, Decision)>,
    pub messages: Vec<InterDomainMessage>,
    pub released: Vec<AggregateKey>,
}

/// How many terms of forward records are kept for routing rejections back.
const FORWARD_MEMORY_TERMS: u64 = 16;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DemandState {
    term: TermIndex,
    started: bool,
    next_seq: u64,
    entries: Vec<Entry>,
    seen_ids: BTreeSet<DemandId>,
    forwards: BTreeMap<(DomainId, ServiceClass, TermIndex), Vec<Component>>,
    archive: Vec<ArchiveRecord>,
    user_rejections: Vec<UserRejection>,
    ledger_history: VecDeque<Reservations>,
}

impl DemandState {
    pub fn term(&self) -> TermIndex {
        self.term
    }

    pub fn has_started(&self) -> bool {
        self.started
    }

    pub fn archive(&self) -> &[ArchiveRecord] {
        &self.archive
    }

    pub fn user_rejections(&self) -> &[UserRejection] {
        &self.user_rejections
    }

    /// Local demands submitted this term and not yet forwarded.
    pub fn pending_local(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e.component, Component::Local { .. }) && !e.forwarded)
            .count()
    }

    pub fn queued(&self) -> usize {
        self.entries.len()
    }

    /// True when the last two end-of-term ledgers are identical.
    pub fn ledger_stable(&self) -> bool {
        self.ledger_history.len() == 2 && self.ledger_history[0] == self.ledger_history[1]
    }

    pub fn clear_ledger_history(&mut self) {
        self.ledger_history.clear();
    }

    fn push(&mut self, dest: DomainId, class: ServiceClass, ingress: RouterId, component: Component) {
        self.entries.push(Entry {
            seq: self.next_seq,
            dest,
            class,
            ingress,
            component,
            forwarded: false,
            admitted: false,
        });
        self.next_seq += 1;
    }

    /// Entry indices grouped by `key`, groups ordered by first arrival.
    fn groups<K: Ord + Clone>(&self, pick: impl Fn(&Entry) -> bool, key: impl Fn(&Entry) -> K) -> Vec<Vec<usize>> {
        let mut order: Vec<K> = Vec::new();
        let mut by_key: BTreeMap<K, Vec<usize>> = BTreeMap::new();
        for (i, e) in self.entries.iter().enumerate().filter(|(_, e)| pick(e)) {
            let k = key(e);
            let slot = by_key.entry(k.clone()).or_default();
            if slot.is_empty() {
                order.push(k);
            }
            slot.push(i);
        }
        order.into_iter().map(|k| by_key.remove(&k).unwrap_or_default()).collect()
    }
}

impl BrokerState {
    /// Starts the next term; the first call starts term 0.
    pub fn begin_term(&mut self, _now: SimTime) -> TermIndex {
        if self.demand.started {
            self.demand.term += 1;
        } else {
            self.demand.started = true;
        }
        self.demand.term
    }

    pub fn submit_ds(&mut self, ds: DemandSpec) -> Result<(), DemandError> {
        let att = self
            .attachment(&ds.src)
            .ok_or_else(|| DemandError::NotLocalSource(ds.src.clone()))?
            .router
            .clone();
        if ds.src == ds.dest {
            return Err(DemandError::SameEndpoints(ds.id));
        }
        if !self.demand.seen_ids.insert(ds.id.clone()) {
            return Err(DemandError::DuplicateId(ds.id));
        }
        let term = self.demand.term;
        self.demand.push(
            ds.dest.clone(),
            ds.class,
            att,
            Component::Local {
                id: ds.id.clone(),
                bandwidth: ds.bandwidth,
            },
        );
        self.demand.archive.push(ArchiveRecord::Submitted { term, spec: ds });
        Ok(())
    }

    /// Queues an aggregate from an upstream broker.
    pub fn receive_ds(&mut self, from: &BrokerId, ds: AggregatedDs) -> Result<(), DemandError> {
        let ingress = self
            .neighbor(from)
            .ok_or_else(|| DemandError::NotNeighbor(from.clone()))?
            .adjacency
            .local_router
            .clone();
        let term = self.demand.term;
        self.demand.push(
            ds.dest.clone(),
            ds.class,
            ingress,
            Component::Upstream {
                from: from.clone(),
                term: ds.term,
                bandwidth: ds.bandwidth,
            },
        );
        self.demand.archive.push(ArchiveRecord::Received { term, from: from.clone(), ds });
        Ok(())
    }

    fn reject_components(
        &mut self,
        components: &[Component],
        dest: &DomainId,
        class: ServiceClass,
        reason: RejectReason,
        rejected_by: &BrokerId,
    ) -> Vec<InterDomainMessage> {
        let term = self.demand.term;
        let mut out = Vec::new();
        for c in components {
            match c {
                Component::Local { id, .. } => {
                    let rejection = UserRejection {
                        id: id.clone(),
                        term,
                        reason: reason.clone(),
                    };
                    self.demand.user_rejections.push(rejection.clone());
                    self.demand.archive.push(ArchiveRecord::UserNotified { term, rejection });
                }
                Component::Upstream { from, term: t, bandwidth } => {
                    let notice = RejectionNotice {
                        dest: dest.clone(),
                        class,
                        bandwidth: *bandwidth,
                        term: *t,
                        origin: from.clone(),
                        rejected_by: rejected_by.clone(),
                    };
                    self.demand.archive.push(ArchiveRecord::NoticeSent {
                        term,
                        to: from.clone(),
                        notice: notice.clone(),
                    });
                    out.push(InterDomainMessage {
                        from: self.id.clone(),
                        to: from.clone(),
                        body: MessageBody::Rejection(notice),
                    });
                }
            }
        }
        out
    }

    /// Aggregates everything not yet forwarded by destination and class and
    /// sends one aggregate per key to its next hop.
    pub fn mid_cycle(&mut self, _now: SimTime) -> Vec<InterDomainMessage> {
        let term = self.demand.term;
        let me = self.id.clone();
        let groups = self
            .demand
            .groups(|e| !e.forwarded, |e| (e.dest.clone(), e.class));
        let mut out = Vec::new();
        for idx in groups {
            let (dest, class) = {
                let e = &self.demand.entries[idx[0]];
                (e.dest.clone(), e.class)
            };
            match self.route_next_hop(&dest, class) {
                Ok(NextHop::Local) => {
                    for &i in &idx {
                        self.demand.entries[i].forwarded = true;
                    }
                }
                Ok(NextHop::Broker(n)) => {
                    // aggregates that came from the next hop itself are left
                    // for end-of-term admission, which rejects them
                    let fwd: Vec<usize> = idx
                        .iter()
                        .copied()
                        .filter(|&i| !matches!(&self.demand.entries[i].component, Component::Upstream { from, .. } if *from == n))
                        .collect();
                    for &i in &idx {
                        self.demand.entries[i].forwarded = true;
                    }
                    if fwd.is_empty() {
                        continue;
                    }
                    let components: Vec<Component> =
                        fwd.iter().map(|&i| self.demand.entries[i].component.clone()).collect();
                    let ds = AggregatedDs {
                        dest: dest.clone(),
                        class,
                        bandwidth: aggregate_bandwidth(fwd.iter().map(|&i| &self.demand.entries[i])),
                        term,
                        origin: me.clone(),
                    };
                    self.demand
                        .forwards
                        .insert((dest.clone(), class, term), components.clone());
                    self.demand.archive.push(ArchiveRecord::Forwarded {
                        term,
                        to: n.clone(),
                        ds: ds.clone(),
                        components,
                    });
                    out.push(InterDomainMessage {
                        from: me.clone(),
                        to: n,
                        body: MessageBody::AggregatedDs(ds),
                    });
                }
                Err(_) => {
                    let components: Vec<Component> =
                        idx.iter().map(|&i| self.demand.entries[i].component.clone()).collect();
                    for &i in &idx {
                        self.demand.entries[i].done();
                    }
                    out.extend(self.reject_components(&components, &dest, class, RejectReason::NoRoute, &me));
                }
            }
        }
        out
    }

    /// Egress router and outgoing link toward `dest`, and the next hop.
    fn egress_for(&self, dest: &DomainId, class: ServiceClass) -> Option<(NextHop, RouterId, LinkId)> {
        match self.route_next_hop(dest, class).ok()? {
            NextHop::Local => {
                let a = self.attachment(dest)?;
                Some((NextHop::Local, a.router.clone(), a.link.clone()))
            }
            NextHop::Broker(n) => {
                let a = &self.neighbor(&n)?.adjacency;
                Some((NextHop::Broker(n), a.local_router.clone(), a.link.clone()))
            }
        }
    }

    fn decide(&mut self, key: &AggregateKey, target: Kbps, from_next_hop: bool) -> Decision {
        let term = self.demand.term;
        let Some((_, egress, out_link)) = self.egress_for(&key.dest, key.class) else {
            return Decision::Rejected(RejectReason::NoRoute);
        };
        if from_next_hop {
            return Decision::Rejected(RejectReason::NoRoute);
        }
        let Some(mut path) = self.intra_path(&key.ingress, &egress) else {
            return Decision::Rejected(RejectReason::NoPath);
        };
        path.push(out_link);
        let before = self.checked.then(|| self.ledger.clone());
        match self.ledger.admit(&path, key, target, term) {
            Ok(AdmitOutcome::Admitted) => Decision::Admitted,
            Ok(AdmitOutcome::Rejected { bottleneck }) => {
                if let Some(b) = before {
                    if b != self.ledger {
                        self.check_failures
                            .push(format!("all-or-nothing: rejected admission of {key} changed the ledger"));
                    }
                }
                Decision::Rejected(RejectReason::Bottleneck(bottleneck))
            }
            Err(_) => Decision::Rejected(RejectReason::NoPath),
        }
    }

    /// Admits every queued aggregate in arrival order, releases stale
    /// reservations and refreshes the filter table.
    pub fn end_of_cycle(&mut self, _now: SimTime) -> EndReport {
        let term = self.demand.term;
        let me = self.id.clone();
        let mut report = EndReport::default();
        let groups = self.demand.groups(
            |e| !e.admitted,
            |e| AggregateKey {
                ingress: e.ingress.clone(),
                dest: e.dest.clone(),
                class: e.class,
            },
        );
        for idx in groups {
            let first = &self.demand.entries[idx[0]];
            let key = AggregateKey {
                ingress: first.ingress.clone(),
                dest: first.dest.clone(),
                class: first.class,
            };
            let target = aggregate_bandwidth(idx.iter().map(|&i| &self.demand.entries[i]));
            let next = self.route_next_hop(&key.dest, key.class).ok();
            let from_next_hop = idx.iter().any(|&i| {
                matches!((&self.demand.entries[i].component, &next),
                    (Component::Upstream { from, .. }, Some(NextHop::Broker(n))) if from == n)
            });
            let decision = self.decide(&key, target, from_next_hop);
            let components: Vec<Component> =
                idx.iter().map(|&i| self.demand.entries[i].component.clone()).collect();
            for &i in &idx {
                if decision == Decision::Admitted {
                    self.demand.entries[i].admitted = true;
                } else {
                    self.demand.entries[i].done();
                }
            }
            if let Decision::Rejected(reason) = &decision {
                report.messages.extend(self.reject_components(
                    &components,
                    &key.dest,
                    key.class,
                    reason.clone(),
                    &me,
                ));
            }
            self.demand.archive.push(ArchiveRecord::Decided {
                term,
                key: key.clone(),
                target,
                decision: decision.clone(),
                components,
            });
            report.decisions.push((key, target, decision));
        }
        report.released = self.ledger.release_stale(term, self.config.hold_terms);
        for key in &report.released {
            self.demand.archive.push(ArchiveRecord::Released { term, key: key.clone() });
        }
        self.rebuild_filters();
        let snap = self.ledger_snapshot();
        self.demand.ledger_history.push_back(snap);
        while self.demand.ledger_history.len() > 2 {
            self.demand.ledger_history.pop_front();
        }
        self.demand.entries.retain(|e| !(e.forwarded && e.admitted));
        let horizon = term.saturating_sub(FORWARD_MEMORY_TERMS);
        self.demand.forwards.retain(|(_, _, t), _| *t >= horizon);
        report
    }

    /// Routes a rejection back along the recorded forwarding chain.
    pub fn handle_rejection(&mut self, notice: RejectionNotice) -> Result<Vec<InterDomainMessage>, DemandError> {
        let key = (notice.dest.clone(), notice.class, notice.term);
        let components = self
            .demand
            .forwards
            .get(&key)
            .cloned()
            .filter(|_| notice.origin == self.id)
            .ok_or(DemandError::UnknownOrigin {
                dest: notice.dest.clone(),
                class: notice.class,
                term: notice.term,
            })?;
        Ok(self.reject_components(
            &components,
            &notice.dest,
            notice.class,
            RejectReason::Downstream(notice.rejected_by.clone()),
            &notice.rejected_by,
        ))
    }
}
