//! Per-broker protocol state shared by the propagation and demand handlers.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::admission::{build_filter_table, FilterTable, ReservationLedger, Reservations};
use crate::demand::DemandState;
use crate::propagation::AiDatabase;
use crate::qos::{merge_costs, TransitCost};
use crate::topology::{Adjacency, EdgeAttachment, NetworkTopology};
use crate::types::{Bottleneck, BrokerId, DomainId, Kbps, LinkId, RouterId};

/// Protocol timing knobs, in microseconds where applicable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolConfig {
    /// Lifetime stamped on locally originated AIs. `u64::MAX` disables expiry.
    pub validity_window: u64,
    /// Terms a reservation survives without being restated.
    pub hold_terms: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            validity_window: u64::MAX,
            hold_terms: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BrokerError {
    #[error("unknown broker {0}")]
    UnknownBroker(BrokerId),
    #[error("broker {0} has no attached edge domains")]
    NoLocalEdgeDomains(BrokerId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbor {
    pub broker: BrokerId,
    pub adjacency: Adjacency,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub stale_dropped: u64,
}

#[derive(Debug, Clone)]
pub struct BrokerState {
    pub(crate) id: BrokerId,
    pub(crate) domain: DomainId,
    pub(crate) topology: Arc<NetworkTopology>,
    pub(crate) config: ProtocolConfig,
    pub(crate) neighbors: Vec<Neighbor>,
    pub(crate) attachments: Vec<EdgeAttachment>,
    pub(crate) db: AiDatabase,
    pub(crate) ledger: ReservationLedger,
    pub(crate) filters: FilterTable,
    pub(crate) demand: DemandState,
    /// Set for brokers without local edge domains until their first relayed
    /// AI is stored.
    pub(crate) awaiting_first_relay: bool,
    pub(crate) counters: Counters,
    /// All-or-nothing breaches detected while checking admissions.
    pub(crate) checked: bool,
    pub(crate) check_failures: Vec<String>,
    path_cache: BTreeMap<(RouterId, RouterId), Option<Vec<LinkId>>>,
}

impl BrokerState {
    pub fn new(
        topology: Arc<NetworkTopology>,
        id: &BrokerId,
        config: ProtocolConfig,
    ) -> Result<Self, BrokerError> {
        let domain = topology
            .broker(id)
            .ok_or_else(|| BrokerError::UnknownBroker(id.clone()))?
            .domain
            .clone();
        let neighbors = topology
            .transit_adjacencies(&domain)
            .into_iter()
            .filter_map(|a| {
                let broker = topology.broker_of(&a.neighbor)?.clone();
                Some(Neighbor { broker, adjacency: a })
            })
            .collect::<Vec<_>>();
        let attachments = topology.attached_edges(&domain);
        let mut managed: Vec<(LinkId, Kbps)> = topology
            .links()
            .iter()
            .filter(|l| {
                [&l.endpoints.0, &l.endpoints.1]
                    .iter()
                    .any(|r| topology.domain_of_router(r) == Some(&domain))
            })
            .map(|l| (l.id.clone(), l.capacity))
            .collect();
        managed.dedup_by(|a, b| a.0 == b.0);
        Ok(Self {
            id: id.clone(),
            domain,
            config,
            neighbors,
            attachments,
            db: AiDatabase::default(),
            ledger: ReservationLedger::new(managed),
            filters: FilterTable::default(),
            demand: DemandState::default(),
            awaiting_first_relay: false,
            counters: Counters::default(),
            checked: false,
            check_failures: Vec::new(),
            path_cache: BTreeMap::new(),
            topology,
        })
    }

    pub fn id(&self) -> &BrokerId {
        &self.id
    }

    pub fn domain(&self) -> &DomainId {
        &self.domain
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn neighbors(&self) -> &[Neighbor] {
        &self.neighbors
    }

    pub fn attachments(&self) -> &[EdgeAttachment] {
        &self.attachments
    }

    pub fn database(&self) -> &AiDatabase {
        &self.db
    }

    pub fn ledger(&self) -> &ReservationLedger {
        &self.ledger
    }

    pub fn filter_table(&self) -> &FilterTable {
        &self.filters
    }

    pub fn demand_state(&self) -> &DemandState {
        &self.demand
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    /// Enables the all-or-nothing self-check around every admission.
    pub fn set_checked(&mut self, on: bool) {
        self.checked = on;
    }

    pub fn check_failures(&self) -> &[String] {
        &self.check_failures
    }

    pub fn neighbor(&self, b: &BrokerId) -> Option<&Neighbor> {
        self.neighbors.iter().find(|n| &n.broker == b)
    }

    pub fn attachment(&self, edge: &DomainId) -> Option<&EdgeAttachment> {
        self.attachments.iter().find(|a| &a.edge == edge)
    }

    /// Intra-domain path, memoized (the topology is immutable).
    pub(crate) fn intra_path(&mut self, from: &RouterId, to: &RouterId) -> Option<Vec<LinkId>> {
        let key = (from.clone(), to.clone());
        if let Some(p) = self.path_cache.get(&key) {
            return p.clone();
        }
        let p = self.topology.intra_path(&self.domain, from, to).ok();
        self.path_cache.insert(key, p.clone());
        p
    }

    /// Cost of `path` with each link's bandwidth reduced to what this
    /// broker's ledger has left.
    pub(crate) fn unreserved_cost(&self, path: &[LinkId]) -> TransitCost {
        path.iter()
            .filter_map(|l| self.topology.link(l))
            .fold(TransitCost::IDENTITY, |acc, l| {
                let free = self.ledger.free_capacity(&l.id).unwrap_or(l.capacity);
                merge_costs(&acc, &TransitCost::from_link_with_bandwidth(l, free))
            })
    }

    pub(crate) fn free_bottleneck(&self, link: &LinkId) -> Bottleneck {
        match self.ledger.free_capacity(link) {
            Ok(k) => Bottleneck::Limited(k),
            Err(_) => Bottleneck::Unbounded,
        }
    }

    pub(crate) fn rebuild_filters(&mut self) {
        let db = &self.db;
        self.filters = build_filter_table(&self.ledger, |d, c| db.next_hop(d, c));
    }

    /// Snapshot used for constant-state detection.
    pub fn ledger_snapshot(&self) -> Reservations {
        self.ledger.reservations().clone()
    }
}
