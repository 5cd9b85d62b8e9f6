//! Availability-information protocol: best-AI database, AI/NewAI handling,
//! database transfer, refresh and soft-state expiry.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::broker::BrokerState;
use crate::demand::{AggregatedDs, RejectionNotice};
use crate::qos::{compose, merge_costs, rank, AiKey, AvailabilityInfo, TransitCost};
use crate::types::{BrokerId, DomainId, NextHop, ServiceClass, SimTime};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredAi {
    pub ai: AvailabilityInfo,
    pub learned_from: NextHop,
    pub stored_at: SimTime,
}

/// At most one AI per (edge domain, class).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AiDatabase {
    entries: BTreeMap<AiKey, StoredAi>,
}

impl AiDatabase {
    pub fn get(&self, key: &AiKey) -> Option<&StoredAi> {
        self.entries.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AiKey, &StoredAi)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn next_hop(&self, edge: &DomainId, class: ServiceClass) -> Option<NextHop> {
        self.entries
            .get(&AiKey::new(edge.clone(), class))
            .map(|s| s.learned_from.clone())
    }

    fn insert(&mut self, s: StoredAi) {
        self.entries.insert(s.ai.key(), s);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageBody {
    Ai(AvailabilityInfo),
    NewAi(AvailabilityInfo),
    AiDatabaseTransfer(Vec<AvailabilityInfo>),
    AggregatedDs(AggregatedDs),
    Rejection(RejectionNotice),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    Ai,
    NewAi,
    AiDb,
    Ds,
    Reject,
}

impl MessageKind {
    pub const ALL: [MessageKind; 5] = [
        MessageKind::Ai,
        MessageKind::NewAi,
        MessageKind::AiDb,
        MessageKind::Ds,
        MessageKind::Reject,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Ai => "ai",
            MessageKind::NewAi => "newai",
            MessageKind::AiDb => "aidb",
            MessageKind::Ds => "ds",
            MessageKind::Reject => "reject",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterDomainMessage {
    pub from: BrokerId,
    pub to: BrokerId,
    pub body: MessageBody,
}

impl InterDomainMessage {
    pub fn kind(&self) -> MessageKind {
        match self.body {
            MessageBody::Ai(_) => MessageKind::Ai,
            MessageBody::NewAi(_) => MessageKind::NewAi,
            MessageBody::AiDatabaseTransfer(_) => MessageKind::AiDb,
            MessageBody::AggregatedDs(_) => MessageKind::Ds,
            MessageBody::Rejection(_) => MessageKind::Reject,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagationError {
    #[error("stale AI for {edge}/{class}: valid until {valid_until}, now {now}")]
    StaleMessage {
        edge: DomainId,
        class: ServiceClass,
        valid_until: SimTime,
        now: SimTime,
    },
    #[error("{0} is not an adjacent broker")]
    NotNeighbor(BrokerId),
    #[error("no route to {edge}/{class}")]
    UnknownDestination { edge: DomainId, class: ServiceClass },
    #[error("broker {0} has no attached edge domains")]
    NoLocalEdgeDomains(BrokerId),
}

impl BrokerState {
    /// Installs (or re-stamps) one AI per attached edge domain and class.
    /// The stored bandwidth is the raw edge-link capacity; what is still
    /// unreserved is applied when the AI is composed for a neighbor.
    pub fn install_local_ais(&mut self, now: SimTime) -> usize {
        let valid_until = now.plus(self.config.validity_window);
        let mut n = 0;
        for att in self.attachments.clone() {
            let Some(edge) = self.topology.domain(&att.edge).cloned() else {
                continue;
            };
            let Some(link) = self.topology.link(&att.link).cloned() else {
                continue;
            };
            let cost = TransitCost::from_link(&link);
            for class in edge.classes {
                let base = AvailabilityInfo {
                    edge: edge.id.clone(),
                    class,
                    bandwidth: link.capacity,
                    avg_delay: Default::default(),
                    max_delay: Default::default(),
                    jitter: Default::default(),
                    loss: Default::default(),
                    origin: self.id.clone(),
                    valid_until,
                };
                self.db.insert(StoredAi {
                    ai: compose(&cost, &base),
                    learned_from: NextHop::Local,
                    stored_at: now,
                });
                n += 1;
            }
        }
        n
    }

    fn local_entries(&self) -> Vec<StoredAi> {
        self.db
            .iter()
            .filter(|(_, s)| s.learned_from == NextHop::Local)
            .map(|(_, s)| s.clone())
            .collect()
    }

    /// `entry` as the neighbor `to` would see it from its side of the
    /// inter-domain link.
    pub fn compose_toward(&mut self, to: &BrokerId, entry: &StoredAi) -> Option<AvailabilityInfo> {
        let adj = self.neighbor(to)?.adjacency.clone();
        let (source, out_link) = match &entry.learned_from {
            NextHop::Local => {
                let att = self.attachment(&entry.ai.edge)?;
                (att.router.clone(), att.link.clone())
            }
            NextHop::Broker(m) => {
                let a = &self.neighbor(m)?.adjacency;
                (a.local_router.clone(), a.link.clone())
            }
        };
        let path = self.intra_path(&adj.local_router, &source)?;
        let mut transit = self.unreserved_cost(&path);
        // this broker owns the outgoing direction of the next link
        transit.bottleneck = transit.bottleneck.min(self.free_bottleneck(&out_link));
        let inter = TransitCost::from_link(self.topology.link(&adj.link)?);
        let t = merge_costs(&inter, &transit);
        Some(compose(&t, &entry.ai))
    }

    /// Whether `entry` is pointless to `to`: its own advertisement, which it
    /// ignores, or a route that runs back through it.
    fn useless_to(to: &BrokerId, entry: &StoredAi) -> bool {
        &entry.ai.origin == to || entry.learned_from == NextHop::Broker(to.clone())
    }

    fn all_neighbor_ids(&self) -> Vec<BrokerId> {
        self.neighbors.iter().map(|n| n.broker.clone()).collect()
    }

    fn send_ai(&mut self, to: &BrokerId, entry: &StoredAi, new: bool) -> Option<InterDomainMessage> {
        let ai = self.compose_toward(to, entry)?;
        Some(InterDomainMessage {
            from: self.id.clone(),
            to: to.clone(),
            body: if new { MessageBody::NewAi(ai) } else { MessageBody::Ai(ai) },
        })
    }

    /// First local AI (lowest key) as NewAi to every neighbor, the rest as
    /// plain Ai.
    pub fn bootstrap(&mut self, _now: SimTime) -> Result<Vec<InterDomainMessage>, PropagationError> {
        let locals = self.local_entries();
        if locals.is_empty() {
            self.awaiting_first_relay = true;
            return Err(PropagationError::NoLocalEdgeDomains(self.id.clone()));
        }
        let mut out = Vec::new();
        for n in self.all_neighbor_ids() {
            for (i, e) in locals.iter().enumerate() {
                out.extend(self.send_ai(&n, e, i == 0));
            }
        }
        Ok(out)
    }

    /// Store-only-best. Returns whether the database changed.
    fn absorb(&mut self, from: &BrokerId, ai: AvailabilityInfo, now: SimTime) -> Result<bool, PropagationError> {
        if self.neighbor(from).is_none() {
            return Err(PropagationError::NotNeighbor(from.clone()));
        }
        if ai.valid_until <= now {
            self.counters.stale_dropped += 1;
            return Err(PropagationError::StaleMessage {
                edge: ai.edge,
                class: ai.class,
                valid_until: ai.valid_until,
                now,
            });
        }
        if self.attachment(&ai.edge).is_some() {
            // our own edge domain: the local entry is authoritative
            return Ok(false);
        }
        let via = NextHop::Broker(from.clone());
        let accept = match self.db.get(&ai.key()) {
            None => true,
            Some(s) if rank(&ai, &s.ai) == Ordering::Less => true,
            Some(s) if s.learned_from == via => {
                // refresh, or a changed advertisement along the stored route
                !ai.same_parameters(&s.ai) || ai.valid_until > s.ai.valid_until
            }
            Some(_) => false,
        };
        if accept {
            self.db.insert(StoredAi {
                ai,
                learned_from: via,
                stored_at: now,
            });
        }
        Ok(accept)
    }

    fn forward_stored(&mut self, from: &BrokerId, key: &AiKey) -> Vec<InterDomainMessage> {
        let Some(entry) = self.db.get(key).cloned() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        if self.awaiting_first_relay {
            self.awaiting_first_relay = false;
            for n in self.all_neighbor_ids() {
                out.extend(self.send_ai(&n, &entry, true));
            }
        } else {
            for n in self
                .all_neighbor_ids()
                .iter()
                .filter(|n| *n != from && !Self::useless_to(n, &entry))
            {
                out.extend(self.send_ai(n, &entry, false));
            }
        }
        out
    }

    pub fn handle_ai(
        &mut self,
        from: &BrokerId,
        ai: AvailabilityInfo,
        now: SimTime,
    ) -> Result<Vec<InterDomainMessage>, PropagationError> {
        let key = ai.key();
        if self.absorb(from, ai, now)? {
            Ok(self.forward_stored(from, &key))
        } else {
            Ok(Vec::new())
        }
    }

    /// As [`Self::handle_ai`], then replies with the whole database composed
    /// toward the sender, minus what is useless to it.
    pub fn handle_new_ai(
        &mut self,
        from: &BrokerId,
        ai: AvailabilityInfo,
        now: SimTime,
    ) -> Result<Vec<InterDomainMessage>, PropagationError> {
        let mut out = self.handle_ai(from, ai, now)?;
        let entries: Vec<StoredAi> = self.db.iter().map(|(_, s)| s.clone()).collect();
        let ais = entries
            .iter()
            .filter(|e| !Self::useless_to(from, e))
            .filter_map(|e| self.compose_toward(from, e))
            .collect();
        out.push(InterDomainMessage {
            from: self.id.clone(),
            to: from.clone(),
            body: MessageBody::AiDatabaseTransfer(ais),
        });
        Ok(out)
    }

    /// Each element handled as a plain AI; stale elements are dropped.
    pub fn handle_db_transfer(
        &mut self,
        from: &BrokerId,
        ais: Vec<AvailabilityInfo>,
        now: SimTime,
    ) -> Result<Vec<InterDomainMessage>, PropagationError> {
        if self.neighbor(from).is_none() {
            return Err(PropagationError::NotNeighbor(from.clone()));
        }
        let mut out = Vec::new();
        for ai in ais {
            match self.handle_ai(from, ai, now) {
                Ok(m) => out.extend(m),
                Err(PropagationError::StaleMessage { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    /// Re-stamps local AIs and advertises them to every neighbor.
    pub fn emit_refresh(&mut self, now: SimTime) -> Vec<InterDomainMessage> {
        self.install_local_ais(now);
        let locals = self.local_entries();
        let mut out = Vec::new();
        for n in self.all_neighbor_ids() {
            for e in &locals {
                out.extend(self.send_ai(&n, e, false));
            }
        }
        out
    }

    /// Silently drops relayed entries whose validity has run out (inclusive).
    /// Local entries are direct knowledge and never expire.
    pub fn expire_stale(&mut self, now: SimTime) -> Vec<AiKey> {
        let gone: Vec<AiKey> = self
            .db
            .iter()
            .filter(|(_, s)| s.learned_from != NextHop::Local && s.ai.valid_until <= now)
            .map(|(k, _)| k.clone())
            .collect();
        for k in &gone {
            self.db.entries.remove(k);
        }
        gone
    }

    /// Earliest time a relayed entry will expire.
    pub fn next_expiry(&self) -> Option<SimTime> {
        self.db
            .iter()
            .filter(|(_, s)| s.learned_from != NextHop::Local && s.ai.valid_until != SimTime::NEVER)
            .map(|(_, s)| s.ai.valid_until)
            .min()
    }

    pub fn route_next_hop(&self, edge: &DomainId, class: ServiceClass) -> Result<NextHop, PropagationError> {
        self.db
            .next_hop(edge, class)
            .ok_or_else(|| PropagationError::UnknownDestination {
                edge: edge.clone(),
                class,
            })
    }

    pub fn is_awaiting_first_relay(&self) -> bool {
        self.awaiting_first_relay
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::broker::ProtocolConfig;
    use crate::fixtures;
    use crate::types::{Kbps, Micros};
    use std::sync::Arc;

    fn state(topo: &Arc<crate::topology::NetworkTopology>, b: &str) -> BrokerState {
        BrokerState::new(topo.clone(), &b.into(), ProtocolConfig::default()).unwrap()
    }

    fn remote_ai(edge: &str, avg: u64) -> AvailabilityInfo {
        AvailabilityInfo {
            edge: edge.into(),
            class: ServiceClass::new(0).unwrap(),
            bandwidth: Kbps(100_000),
            avg_delay: Micros(avg),
            max_delay: Micros(avg * 2),
            jitter: Micros(0),
            loss: Default::default(),
            origin: "bbC".into(),
            valid_until: SimTime::NEVER,
        }
    }

    #[test]
    fn empty_database_stores_and_forwards() {
        let topo = Arc::new(fixtures::line3());
        let mut b = state(&topo, "bbB");
        let out = b.handle_ai(&"bbC".into(), remote_ai("eC", 10_000), SimTime(5)).unwrap();
        assert_eq!(b.database().len(), 1);
        // forwarded to bbA only
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].to, BrokerId::from("bbA"));
        assert_eq!(out[0].kind(), MessageKind::Ai);
        assert_eq!(
            b.route_next_hop(&"eC".into(), ServiceClass::new(0).unwrap()).unwrap(),
            NextHop::Broker("bbC".into())
        );
    }

    #[test]
    fn worse_ai_from_other_neighbor_is_ignored() {
        let topo = Arc::new(fixtures::parallel_routes());
        let mut d = state(&topo, "bbA");
        d.handle_ai(&"bbB".into(), remote_ai("eD", 10_000), SimTime(0)).unwrap();
        let before = d.database().clone();
        let out = d.handle_ai(&"bbC".into(), remote_ai("eD", 20_000), SimTime(0)).unwrap();
        assert!(out.is_empty());
        assert_eq!(d.database(), &before);
    }

    #[test]
    fn stale_ai_is_an_error_and_counted() {
        let topo = Arc::new(fixtures::line3());
        let mut b = state(&topo, "bbB");
        let mut ai = remote_ai("eC", 1);
        ai.valid_until = SimTime(10);
        let e = b.handle_ai(&"bbC".into(), ai, SimTime(10)).unwrap_err();
        assert!(matches!(e, PropagationError::StaleMessage { .. }));
        assert_eq!(b.counters().stale_dropped, 1);
        assert!(b.database().is_empty());
    }

    #[test]
    fn non_neighbor_sender_rejected() {
        let topo = Arc::new(fixtures::line3());
        let mut a = state(&topo, "bbA");
        assert_eq!(
            a.handle_ai(&"bbC".into(), remote_ai("eC", 1), SimTime(0)),
            Err(PropagationError::NotNeighbor("bbC".into()))
        );
    }

    #[test]
    fn refresh_from_learned_from_passes_through() {
        let topo = Arc::new(fixtures::line3());
        let mut b = state(&topo, "bbB");
        let mut ai = remote_ai("eC", 1_000);
        ai.valid_until = SimTime(100);
        b.handle_ai(&"bbC".into(), ai.clone(), SimTime(0)).unwrap();
        // exact duplicate: nothing to do
        assert!(b.handle_ai(&"bbC".into(), ai.clone(), SimTime(1)).unwrap().is_empty());
        ai.valid_until = SimTime(200);
        let out = b.handle_ai(&"bbC".into(), ai, SimTime(2)).unwrap();
        assert_eq!(out.len(), 1);
        let key = AiKey::new("eC".into(), ServiceClass::new(0).unwrap());
        assert_eq!(b.database().get(&key).unwrap().ai.valid_until, SimTime(200));
    }

    #[test]
    fn new_ai_replies_with_whole_database() {
        let topo = Arc::new(fixtures::line3());
        let mut b = state(&topo, "bbB");
        // an AI for our own edge is not stored, so the database stays empty;
        // the transfer is still sent
        let out = b.handle_new_ai(&"bbA".into(), remote_ai("eB", 1_000), SimTime(0)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].to, BrokerId::from("bbA"));
        assert_eq!(out[0].body, MessageBody::AiDatabaseTransfer(vec![]));
        let mut fresh = state(&topo, "bbB");
        fresh.awaiting_first_relay = false;
        let mut old = remote_ai("eA", 1_000);
        old.valid_until = SimTime(0);
        assert!(fresh.handle_new_ai(&"bbA".into(), old, SimTime(0)).is_err());
    }

    #[test]
    fn new_ai_transfer_counts_stored_entries() {
        let topo = Arc::new(fixtures::line3());
        let mut b = state(&topo, "bbB");
        b.install_local_ais(SimTime(0));
        b.handle_ai(&"bbC".into(), remote_ai("eC", 1_000), SimTime(0)).unwrap();
        let out = b.handle_new_ai(&"bbA".into(), remote_ai("eA", 1_000), SimTime(0)).unwrap();
        // eA was just learned from bbA, so it is not sent back
        match &out.last().unwrap().body {
            MessageBody::AiDatabaseTransfer(v) => {
                let edges: Vec<&str> = v.iter().map(|a| a.edge.as_str()).collect();
                assert_eq!(edges, ["eB", "eC"]);
            }
            other => panic!("unexpected {other:?}"),
        }
        // the NewAi is forwarded as a plain Ai to bbC
        assert!(out[..out.len() - 1]
            .iter()
            .all(|m| m.kind() == MessageKind::Ai && m.to == BrokerId::from("bbC")));
    }

    #[test]
    fn nothing_goes_back_to_its_origin() {
        let topo = Arc::new(fixtures::line3());
        let mut b = state(&topo, "bbB");
        b.install_local_ais(SimTime(0));
        let mut from_a = remote_ai("eA", 1_000);
        from_a.origin = "bbA".into();
        // relayed toward bbC only; bbA is both sender and origin
        let out = b.handle_ai(&"bbA".into(), from_a, SimTime(0)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].to, BrokerId::from("bbC"));
        // bbC's own advertisement is left out of the transfer to bbC
        let mut from_c = remote_ai("eC", 1_000);
        from_c.origin = "bbC".into();
        b.handle_ai(&"bbC".into(), from_c, SimTime(0)).unwrap();
        let out = b.handle_new_ai(&"bbC".into(), remote_ai("eC", 900), SimTime(0)).unwrap();
        match &out.last().unwrap().body {
            MessageBody::AiDatabaseTransfer(v) => assert!(v.iter().all(|a| a.origin != BrokerId::from("bbC"))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bootstrap_message_counts() {
        let topo = Arc::new(fixtures::line3());
        let mut a = state(&topo, "bbA");
        a.install_local_ais(SimTime(0));
        let out = a.bootstrap(SimTime(0)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].kind(), MessageKind::NewAi);

        let mut b = state(&topo, "bbB");
        b.install_local_ais(SimTime(0));
        let out = b.bootstrap(SimTime(0)).unwrap();
        // one local AI, two neighbors
        assert_eq!(out.iter().filter(|m| m.kind() == MessageKind::NewAi).count(), 2);
    }

    #[test]
    fn bootstrap_without_edges_waits_for_relay() {
        let topo = Arc::new(fixtures::parallel_routes());
        let mut c = state(&topo, "bbC");
        assert_eq!(c.install_local_ais(SimTime(0)), 0);
        assert!(matches!(c.bootstrap(SimTime(0)), Err(PropagationError::NoLocalEdgeDomains(_))));
        let out = c.handle_ai(&"bbD".into(), remote_ai("eD", 1_000), SimTime(0)).unwrap();
        // first relayed AI goes out as NewAi to every neighbor, sender included
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|m| m.kind() == MessageKind::NewAi));
        let out = c.handle_ai(&"bbA".into(), remote_ai("eA", 1_000), SimTime(0)).unwrap();
        assert!(out.iter().all(|m| m.kind() == MessageKind::Ai));
    }

    #[test]
    fn expiry_is_inclusive_and_silent() {
        let topo = Arc::new(fixtures::line3());
        let mut b = state(&topo, "bbB");
        b.install_local_ais(SimTime(0));
        let mut ai = remote_ai("eC", 1_000);
        ai.valid_until = SimTime(50);
        b.handle_ai(&"bbC".into(), ai, SimTime(0)).unwrap();
        assert_eq!(b.next_expiry(), Some(SimTime(50)));
        assert!(b.expire_stale(SimTime(49)).is_empty());
        assert_eq!(b.expire_stale(SimTime(50)).len(), 1);
        // local entry survives
        assert_eq!(b.database().len(), 1);
        assert!(b.route_next_hop(&"eC".into(), ServiceClass::new(0).unwrap()).is_err());
        assert_eq!(
            b.route_next_hop(&"eB".into(), ServiceClass::new(0).unwrap()).unwrap(),
            NextHop::Local
        );
    }

    #[test]
    fn refresh_emits_k_times_m() {
        let topo = Arc::new(fixtures::line3());
        let mut b = state(&topo, "bbB");
        b.install_local_ais(SimTime(0));
        assert_eq!(b.emit_refresh(SimTime(10)).len(), 2);
        let mut a = BrokerState::new(
            topo.clone(),
            &"bbA".into(),
            ProtocolConfig { validity_window: 100, hold_terms: 2 },
        )
        .unwrap();
        let out = a.emit_refresh(SimTime(10));
        match &out[0].body {
            MessageBody::Ai(ai) => assert_eq!(ai.valid_until, SimTime(110)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn composition_adds_transit_and_inter_link() {
        let topo = Arc::new(fixtures::line3());
        let mut b = state(&topo, "bbB");
        b.handle_ai(&"bbC".into(), remote_ai("eC", 10_000), SimTime(0)).unwrap();
        let key = AiKey::new("eC".into(), ServiceClass::new(0).unwrap());
        let entry = b.database().get(&key).unwrap().clone();
        let seen = b.compose_toward(&"bbA".into(), &entry).unwrap();
        // inter link LAB + intra LB on top of the received AI
        let lab = topo.link(&"LAB".into()).unwrap();
        let lb = topo.link(&"LB".into()).unwrap();
        assert_eq!(seen.avg_delay.0, 10_000 + lab.avg_delay.0 + lb.avg_delay.0);
        assert_eq!(seen.max_delay.0, 20_000 + lab.max_delay.0 + lb.max_delay.0);
        assert_eq!(seen.valid_until, entry.ai.valid_until);
    }

    #[test]
    fn db_transfer_is_a_fold_of_handle_ai() {
        let topo = Arc::new(fixtures::line3());
        let ais = vec![remote_ai("eC", 5_000), remote_ai("eC", 3_000), remote_ai("eC", 4_000)];
        let mut folded = state(&topo, "bbB");
        let mut expect = Vec::new();
        for ai in ais.clone() {
            expect.extend(folded.handle_ai(&"bbC".into(), ai, SimTime(0)).unwrap());
        }
        let mut bulk = state(&topo, "bbB");
        let got = bulk.handle_db_transfer(&"bbC".into(), ais, SimTime(0)).unwrap();
        assert_eq!(got, expect);
        assert_eq!(bulk.database(), folded.database());
        assert!(bulk.handle_db_transfer(&"bbC".into(), vec![], SimTime(0)).unwrap().is_empty());
    }
}
