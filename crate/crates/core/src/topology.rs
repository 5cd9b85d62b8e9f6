//! Immutable multi-domain network model.
//!
//! A topology is a set of transit domains (each managed by exactly one
//! broker) and edge domains. Edge domains are leaves: one router and one
//! inter-domain link to a transit domain. Intra-domain routing is min-hop
//! with ties broken by the lexicographically smallest link-id sequence.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::qos::{merge_costs, TransitCost};
use crate::types::{BrokerId, DomainId, Kbps, LinkId, Micros, RouterId, ServiceClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DomainKind {
    Transit,
    Edge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub id: DomainId,
    pub kind: DomainKind,
    /// Service classes an edge domain is reachable in. Empty for transit.
    pub classes: Vec<ServiceClass>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Router {
    pub id: RouterId,
    pub domain: DomainId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Broker {
    pub id: BrokerId,
    pub domain: DomainId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LinkKind {
    Intra,
    Inter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub endpoints: (RouterId, RouterId),
    pub capacity: Kbps,
    pub avg_delay: Micros,
    pub max_delay: Micros,
    pub jitter: Micros,
    /// Raw value as configured; [`NetworkTopology::validate`] checks range.
    pub loss: f64,
    pub kind: LinkKind,
}

impl Link {
    /// The endpoint opposite `r`, if `r` is an endpoint.
    pub fn other_end(&self, r: &RouterId) -> Option<&RouterId> {
        if &self.endpoints.0 == r {
            Some(&self.endpoints.1)
        } else if &self.endpoints.1 == r {
            Some(&self.endpoints.0)
        } else {
            None
        }
    }
}

/// One inter-domain adjacency between two transit domains, seen from `domain`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    pub neighbor: DomainId,
    pub link: LinkId,
    pub local_router: RouterId,
    pub remote_router: RouterId,
}

/// An edge domain hanging off a transit domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeAttachment {
    pub edge: DomainId,
    pub transit: DomainId,
    pub link: LinkId,
    /// Transit-side router of the attachment link.
    pub router: RouterId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("router {router} is not in domain {domain}")]
    RouterNotInDomain { domain: DomainId, router: RouterId },
    #[error("no intra-domain path in {domain} from {from} to {to}")]
    NoPath {
        domain: DomainId,
        from: RouterId,
        to: RouterId,
    },
}

/// A single invariant violation found by [`NetworkTopology::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyId { kind: &'static str },
    DuplicateId { kind: &'static str, id: String },
    RouterInMultipleDomains { router: RouterId },
    UnknownDomain { referenced_by: String, domain: DomainId },
    UnknownRouter { link: LinkId, router: RouterId },
    LossOutOfRange { link: LinkId },
    DelayOrder { link: LinkId },
    SelfLoop { link: LinkId },
    LinkKindMismatch { link: LinkId },
    BrokerCount { domain: DomainId, count: usize },
    BrokerOnEdgeDomain { broker: BrokerId },
    EdgeShape { edge: DomainId, reason: &'static str },
    EdgeWithoutClasses { edge: DomainId },
    ParallelInterLinks { a: DomainId, b: DomainId, links: Vec<LinkId> },
    Partitioned { components: Vec<Vec<DomainId>> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyId { kind } => write!(f, "empty {kind} id"),
            Violation::DuplicateId { kind, id } => write!(f, "duplicate {kind} id {id}"),
            Violation::RouterInMultipleDomains { router } => {
                write!(f, "router in multiple domains: {router}")
            }
            Violation::UnknownDomain { referenced_by, domain } => {
                write!(f, "{referenced_by} references unknown domain {domain}")
            }
            Violation::UnknownRouter { link, router } => {
                write!(f, "link {link} references unknown router {router}")
            }
            Violation::LossOutOfRange { link } => write!(f, "link {link} loss outside [0, 1]"),
            Violation::DelayOrder { link } => write!(f, "link {link} avg delay exceeds max delay"),
            Violation::SelfLoop { link } => write!(f, "link {link} connects a router to itself"),
            Violation::LinkKindMismatch { link } => {
                write!(f, "link {link} kind does not match its endpoint domains")
            }
            Violation::BrokerCount { domain, count } => {
                write!(f, "transit domain {domain} has {count} brokers, expected 1")
            }
            Violation::BrokerOnEdgeDomain { broker } => {
                write!(f, "broker {broker} is assigned to an edge domain")
            }
            Violation::EdgeShape { edge, reason } => write!(f, "edge domain {edge}: {reason}"),
            Violation::EdgeWithoutClasses { edge } => {
                write!(f, "edge domain {edge} declares no service classes")
            }
            Violation::ParallelInterLinks { a, b, links } => {
                let ids: Vec<_> = links.iter().map(|l| l.as_str()).collect();
                write!(f, "domains {a} and {b} joined by several links: {}", ids.join(","))
            }
            Violation::Partitioned { components } => {
                let parts: Vec<String> = components
                    .iter()
                    .map(|c| c.iter().map(|d| d.as_str()).collect::<Vec<_>>().join(","))
                    .collect();
                write!(f, "transit graph is partitioned: {{{}}}", parts.join("} {"))
            }
        }
    }
}

/// The network. Possibly invalid until [`NetworkTopology::validate`] returns
/// no violations; lookups resolve to the first definition of an id.
#[derive(Debug, Clone, Default)]
pub struct NetworkTopology {
    domains: Vec<Domain>,
    routers: Vec<Router>,
    links: Vec<Link>,
    brokers: Vec<Broker>,
    allow_partition: bool,
    domain_idx: BTreeMap<DomainId, usize>,
    router_idx: BTreeMap<RouterId, usize>,
    link_idx: BTreeMap<LinkId, usize>,
    broker_idx: BTreeMap<BrokerId, usize>,
    broker_of_domain: BTreeMap<DomainId, BrokerId>,
    /// intra links per router, sorted by link id
    intra_adj: BTreeMap<RouterId, Vec<LinkId>>,
}

impl NetworkTopology {
    pub fn builder() -> TopologyBuilder {
        TopologyBuilder::default()
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn routers(&self) -> &[Router] {
        &self.routers
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn brokers(&self) -> &[Broker] {
        &self.brokers
    }

    pub fn allows_partition(&self) -> bool {
        self.allow_partition
    }

    pub fn domain(&self, id: &DomainId) -> Option<&Domain> {
        self.domain_idx.get(id).map(|&i| &self.domains[i])
    }

    pub fn router(&self, id: &RouterId) -> Option<&Router> {
        self.router_idx.get(id).map(|&i| &self.routers[i])
    }

    pub fn link(&self, id: &LinkId) -> Option<&Link> {
        self.link_idx.get(id).map(|&i| &self.links[i])
    }

    pub fn broker(&self, id: &BrokerId) -> Option<&Broker> {
        self.broker_idx.get(id).map(|&i| &self.brokers[i])
    }

    pub fn broker_of(&self, domain: &DomainId) -> Option<&BrokerId> {
        self.broker_of_domain.get(domain)
    }

    pub fn domain_of_router(&self, r: &RouterId) -> Option<&DomainId> {
        self.router(r).map(|r| &r.domain)
    }

    pub fn transit_domains(&self) -> impl Iterator<Item = &Domain> {
        self.domains.iter().filter(|d| d.kind == DomainKind::Transit)
    }

    pub fn edge_domains(&self) -> impl Iterator<Item = &Domain> {
        self.domains.iter().filter(|d| d.kind == DomainKind::Edge)
    }

    /// Inter-domain adjacencies from `domain` to other transit domains, ordered
    /// by neighbor id.
    pub fn transit_adjacencies(&self, domain: &DomainId) -> Vec<Adjacency> {
        let mut out = Vec::new();
        for link in self.links.iter().filter(|l| l.kind == LinkKind::Inter) {
            let (a, b) = &link.endpoints;
            let (Some(da), Some(db)) = (self.domain_of_router(a), self.domain_of_router(b)) else {
                continue;
            };
            let (local, remote, nd) = if da == domain {
                (a, b, db)
            } else if db == domain {
                (b, a, da)
            } else {
                continue;
            };
            if nd == domain || self.domain(nd).map(|d| d.kind) != Some(DomainKind::Transit) {
                continue;
            }
            out.push(Adjacency {
                neighbor: nd.clone(),
                link: link.id.clone(),
                local_router: local.clone(),
                remote_router: remote.clone(),
            });
        }
        out.sort_by(|x, y| (&x.neighbor, &x.link).cmp(&(&y.neighbor, &y.link)));
        out
    }

    /// The inter link between two transit domains, seen from `from`.
    pub fn adjacency(&self, from: &DomainId, to: &DomainId) -> Option<Adjacency> {
        self.transit_adjacencies(from)
            .into_iter()
            .find(|a| &a.neighbor == to)
    }

    /// Where an edge domain attaches; `None` for malformed or unknown edges.
    pub fn edge_attachment(&self, edge: &DomainId) -> Option<EdgeAttachment> {
        let d = self.domain(edge)?;
        if d.kind != DomainKind::Edge {
            return None;
        }
        self.links
            .iter()
            .filter(|l| l.kind == LinkKind::Inter)
            .find_map(|l| {
                let (a, b) = &l.endpoints;
                let (ea, eb) = (self.domain_of_router(a)?, self.domain_of_router(b)?);
                let (transit_router, transit) = if ea == edge {
                    (b, eb)
                } else if eb == edge {
                    (a, ea)
                } else {
                    return None;
                };
                (self.domain(transit)?.kind == DomainKind::Transit).then(|| EdgeAttachment {
                    edge: edge.clone(),
                    transit: transit.clone(),
                    link: l.id.clone(),
                    router: transit_router.clone(),
                })
            })
    }

    /// Edge domains attached to a transit domain, ordered by edge id.
    pub fn attached_edges(&self, transit: &DomainId) -> Vec<EdgeAttachment> {
        let mut out: Vec<_> = self
            .edge_domains()
            .filter_map(|d| self.edge_attachment(&d.id))
            .filter(|a| &a.transit == transit)
            .collect();
        out.sort_by(|a, b| a.edge.cmp(&b.edge));
        out
    }

    /// Connected components of the transit-domain graph, each sorted, ordered
    /// by smallest member.
    pub fn components(&self) -> Vec<Vec<DomainId>> {
        let mut seen = BTreeSet::new();
        let mut comps = Vec::new();
        let mut ids: Vec<_> = self.transit_domains().map(|d| d.id.clone()).collect();
        ids.sort();
        for start in ids {
            if !seen.insert(start.clone()) {
                continue;
            }
            let mut comp = vec![start.clone()];
            let mut queue = VecDeque::from([start]);
            while let Some(d) = queue.pop_front() {
                for adj in self.transit_adjacencies(&d) {
                    if seen.insert(adj.neighbor.clone()) {
                        comp.push(adj.neighbor.clone());
                        queue.push_back(adj.neighbor);
                    }
                }
            }
            comp.sort();
            comps.push(comp);
        }
        comps
    }

    /// Min-hop intra-domain path from `ingress` to `egress`. Among equal-hop
    /// paths the lexicographically smallest sequence of link ids is chosen.
    pub fn intra_path(
        &self,
        domain: &DomainId,
        ingress: &RouterId,
        egress: &RouterId,
    ) -> Result<Vec<LinkId>, TopologyError> {
        for r in [ingress, egress] {
            if self.domain_of_router(r) != Some(domain) {
                return Err(TopologyError::RouterNotInDomain {
                    domain: domain.clone(),
                    router: r.clone(),
                });
            }
        }
        if ingress == egress {
            return Ok(Vec::new());
        }
        // hop distance to egress
        let mut dist: BTreeMap<&RouterId, usize> = BTreeMap::new();
        dist.insert(egress, 0);
        let mut queue = VecDeque::from([egress]);
        while let Some(r) = queue.pop_front() {
            let d = dist[r];
            for (_, next) in self.intra_steps(domain, r) {
                if !dist.contains_key(next) {
                    dist.insert(next, d + 1);
                    queue.push_back(next);
                }
            }
        }
        let no_path = || TopologyError::NoPath {
            domain: domain.clone(),
            from: ingress.clone(),
            to: egress.clone(),
        };
        let mut remaining = *dist.get(ingress).ok_or_else(no_path)?;
        let mut path = Vec::with_capacity(remaining);
        let mut at = ingress;
        while remaining > 0 {
            // adjacency is sorted by link id, so the first hit is the smallest
            let (link, next) = self
                .intra_steps(domain, at)
                .find(|(_, next)| dist.get(next) == Some(&(remaining - 1)))
                .ok_or_else(no_path)?;
            path.push(link.clone());
            at = next;
            remaining -= 1;
        }
        Ok(path)
    }

    fn intra_steps<'a>(
        &'a self,
        domain: &'a DomainId,
        r: &'a RouterId,
    ) -> impl Iterator<Item = (&'a LinkId, &'a RouterId)> + 'a {
        self.intra_adj
            .get(r)
            .into_iter()
            .flatten()
            .filter_map(move |lid| {
                let link = self.link(lid)?;
                let next = link.other_end(r)?;
                (self.domain_of_router(next) == Some(domain)).then_some((lid, next))
            })
    }

    /// QoS cost of crossing `domain` from `ingress` to `egress` along
    /// [`Self::intra_path`], using raw link capacities.
    pub fn domain_transit_cost(
        &self,
        domain: &DomainId,
        ingress: &RouterId,
        egress: &RouterId,
    ) -> Result<TransitCost, TopologyError> {
        let path = self.intra_path(domain, ingress, egress)?;
        Ok(self.path_cost(&path))
    }

    /// Cost of a sequence of links; unknown ids are skipped.
    pub fn path_cost(&self, path: &[LinkId]) -> TransitCost {
        path.iter()
            .filter_map(|l| self.link(l))
            .fold(TransitCost::IDENTITY, |acc, l| {
                merge_costs(&acc, &TransitCost::from_link(l))
            })
    }

    /// Every invariant violation, in a deterministic order. Empty iff valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        self.check_ids(&mut v);
        self.check_links(&mut v);
        self.check_brokers(&mut v);
        self.check_edges(&mut v);
        self.check_inter_pairs(&mut v);
        if !self.allow_partition {
            let comps = self.components();
            if comps.len() > 1 {
                v.push(Violation::Partitioned { components: comps });
            }
        }
        v
    }

    fn check_ids(&self, v: &mut Vec<Violation>) {
        fn dups<'a>(
            kind: &'static str,
            ids: impl Iterator<Item = &'a str>,
            v: &mut Vec<Violation>,
        ) {
            let mut seen = BTreeSet::new();
            for id in ids {
                if id.is_empty() {
                    v.push(Violation::EmptyId { kind });
                } else if !seen.insert(id) {
                    v.push(Violation::DuplicateId { kind, id: id.to_owned() });
                }
            }
        }
        dups("domain", self.domains.iter().map(|d| d.id.as_str()), v);
        dups("link", self.links.iter().map(|l| l.id.as_str()), v);
        dups("broker", self.brokers.iter().map(|b| b.id.as_str()), v);

        // routers: same id in two domains is its own violation
        let mut homes: BTreeMap<&RouterId, BTreeSet<&DomainId>> = BTreeMap::new();
        let mut counts: BTreeMap<&RouterId, usize> = BTreeMap::new();
        for r in &self.routers {
            if r.id.as_str().is_empty() {
                v.push(Violation::EmptyId { kind: "router" });
                continue;
            }
            homes.entry(&r.id).or_default().insert(&r.domain);
            *counts.entry(&r.id).or_default() += 1;
            if self.domain(&r.domain).is_none() {
                v.push(Violation::UnknownDomain {
                    referenced_by: format!("router {}", r.id),
                    domain: r.domain.clone(),
                });
            }
        }
        for (r, ds) in homes {
            if ds.len() > 1 {
                v.push(Violation::RouterInMultipleDomains { router: r.clone() });
            } else if counts[r] > 1 {
                v.push(Violation::DuplicateId { kind: "router", id: r.to_string() });
            }
        }
    }

    fn check_links(&self, v: &mut Vec<Violation>) {
        for l in &self.links {
            if !(0.0..=1.0).contains(&l.loss) {
                v.push(Violation::LossOutOfRange { link: l.id.clone() });
            }
            if l.avg_delay > l.max_delay {
                v.push(Violation::DelayOrder { link: l.id.clone() });
            }
            if l.endpoints.0 == l.endpoints.1 {
                v.push(Violation::SelfLoop { link: l.id.clone() });
            }
            let mut known = true;
            for r in [&l.endpoints.0, &l.endpoints.1] {
                if self.router(r).is_none() {
                    known = false;
                    v.push(Violation::UnknownRouter { link: l.id.clone(), router: r.clone() });
                }
            }
            if known {
                let da = self.domain_of_router(&l.endpoints.0);
                let db = self.domain_of_router(&l.endpoints.1);
                let same = da == db;
                let ok = match l.kind {
                    LinkKind::Intra => same,
                    LinkKind::Inter => {
                        let both_edge = [da, db].iter().all(|d| {
                            d.and_then(|d| self.domain(d)).map(|d| d.kind) == Some(DomainKind::Edge)
                        });
                        !same && !both_edge
                    }
                };
                if !ok {
                    v.push(Violation::LinkKindMismatch { link: l.id.clone() });
                }
            }
        }
    }

    fn check_brokers(&self, v: &mut Vec<Violation>) {
        let mut per_domain: BTreeMap<&DomainId, usize> = BTreeMap::new();
        for b in &self.brokers {
            match self.domain(&b.domain) {
                None => v.push(Violation::UnknownDomain {
                    referenced_by: format!("broker {}", b.id),
                    domain: b.domain.clone(),
                }),
                Some(d) if d.kind == DomainKind::Edge => {
                    v.push(Violation::BrokerOnEdgeDomain { broker: b.id.clone() })
                }
                Some(_) => *per_domain.entry(&b.domain).or_default() += 1,
            }
        }
        for d in self.transit_domains() {
            let count = per_domain.get(&d.id).copied().unwrap_or(0);
            if count != 1 {
                v.push(Violation::BrokerCount { domain: d.id.clone(), count });
            }
        }
    }

    fn check_edges(&self, v: &mut Vec<Violation>) {
        for d in self.edge_domains() {
            let routers: Vec<_> = self.routers.iter().filter(|r| r.domain == d.id).collect();
            let touching: Vec<_> = self
                .links
                .iter()
                .filter(|l| {
                    routers
                        .iter()
                        .any(|r| l.endpoints.0 == r.id || l.endpoints.1 == r.id)
                })
                .collect();
            if d.classes.is_empty() {
                v.push(Violation::EdgeWithoutClasses { edge: d.id.clone() });
            }
            if routers.len() != 1 {
                v.push(Violation::EdgeShape { edge: d.id.clone(), reason: "needs exactly one router" });
            } else if touching.len() != 1 || touching[0].kind != LinkKind::Inter {
                v.push(Violation::EdgeShape {
                    edge: d.id.clone(),
                    reason: "needs exactly one inter-domain link",
                });
            } else if self.edge_attachment(&d.id).is_none() {
                v.push(Violation::EdgeShape {
                    edge: d.id.clone(),
                    reason: "must attach to a transit domain",
                });
            }
        }
    }

    fn check_inter_pairs(&self, v: &mut Vec<Violation>) {
        let mut pairs: BTreeMap<(DomainId, DomainId), Vec<LinkId>> = BTreeMap::new();
        for l in self.links.iter().filter(|l| l.kind == LinkKind::Inter) {
            let (Some(a), Some(b)) = (
                self.domain_of_router(&l.endpoints.0),
                self.domain_of_router(&l.endpoints.1),
            ) else {
                continue;
            };
            let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
            pairs.entry(key).or_default().push(l.id.clone());
        }
        for ((a, b), links) in pairs {
            if links.len() > 1 {
                v.push(Violation::ParallelInterLinks { a, b, links });
            }
        }
    }
}

/// Incremental construction; no validation happens here.
#[derive(Debug, Default)]
pub struct TopologyBuilder {
    domains: Vec<Domain>,
    routers: Vec<Router>,
    links: Vec<Link>,
    brokers: Vec<Broker>,
    allow_partition: bool,
}

impl TopologyBuilder {
    pub fn transit(mut self, id: &str, broker: &str) -> Self {
        self.domains.push(Domain {
            id: id.into(),
            kind: DomainKind::Transit,
            classes: Vec::new(),
        });
        self.brokers.push(Broker { id: broker.into(), domain: id.into() });
        self
    }

    pub fn domain(mut self, domain: Domain) -> Self {
        self.domains.push(domain);
        self
    }

    pub fn broker(mut self, id: &str, domain: &str) -> Self {
        self.brokers.push(Broker { id: id.into(), domain: domain.into() });
        self
    }

    pub fn edge(mut self, id: &str, classes: &[u32]) -> Self {
        self.domains.push(Domain {
            id: id.into(),
            kind: DomainKind::Edge,
            classes: classes
                .iter()
                .map(|&c| ServiceClass::new(c).expect("class in range"))
                .collect(),
        });
        self
    }

    pub fn router(mut self, id: &str, domain: &str) -> Self {
        self.routers.push(Router { id: id.into(), domain: domain.into() });
        self
    }

    pub fn link(mut self, link: Link) -> Self {
        self.links.push(link);
        self
    }

    /// Shorthand for a link with zero jitter.
    #[allow(clippy::too_many_arguments)]
    pub fn simple_link(
        self,
        id: &str,
        a: &str,
        b: &str,
        kind: LinkKind,
        capacity: u64,
        avg: u64,
        max: u64,
        loss: f64,
    ) -> Self {
        self.link(Link {
            id: id.into(),
            endpoints: (a.into(), b.into()),
            capacity: Kbps(capacity),
            avg_delay: Micros(avg),
            max_delay: Micros(max),
            jitter: Micros(0),
            loss,
            kind,
        })
    }

    pub fn allow_partition(mut self, yes: bool) -> Self {
        self.allow_partition = yes;
        self
    }

    pub fn build(self) -> NetworkTopology {
        let mut t = NetworkTopology {
            domains: self.domains,
            routers: self.routers,
            links: self.links,
            brokers: self.brokers,
            allow_partition: self.allow_partition,
            ..Default::default()
        };
        for (i, d) in t.domains.iter().enumerate() {
            t.domain_idx.entry(d.id.clone()).or_insert(i);
        }
        for (i, r) in t.routers.iter().enumerate() {
            t.router_idx.entry(r.id.clone()).or_insert(i);
        }
        for (i, l) in t.links.iter().enumerate() {
            t.link_idx.entry(l.id.clone()).or_insert(i);
        }
        for (i, b) in t.brokers.iter().enumerate() {
            t.broker_idx.entry(b.id.clone()).or_insert(i);
            t.broker_of_domain.entry(b.domain.clone()).or_insert_with(|| b.id.clone());
        }
        for (lid, &i) in &t.link_idx {
            let l = &t.links[i];
            if l.kind != LinkKind::Intra {
                continue;
            }
            for r in [&l.endpoints.0, &l.endpoints.1] {
                t.intra_adj.entry(r.clone()).or_default().push(lid.clone());
            }
        }
        // BTreeMap iteration already yields link ids in order
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Bottleneck, LossProb};
    use LinkKind::*;

    fn line3() -> NetworkTopology {
        NetworkTopology::builder()
            .transit("A", "bbA")
            .transit("B", "bbB")
            .transit("C", "bbC")
            .router("A1", "A")
            .router("B1", "B")
            .router("C1", "C")
            .simple_link("AB", "A1", "B1", Inter, 100_000, 1_000, 2_000, 0.0)
            .simple_link("BC", "B1", "C1", Inter, 100_000, 1_000, 2_000, 0.0)
            .build()
    }

    #[test]
    fn well_formed_line_has_no_violations() {
        assert_eq!(line3().validate(), vec![]);
    }

    #[test]
    fn loss_out_of_range_is_named() {
        let t = NetworkTopology::builder()
            .transit("A", "bbA")
            .router("A1", "A")
            .router("A2", "A")
            .simple_link("L9", "A1", "A2", Intra, 10, 1, 1, 1.5)
            .build();
        assert_eq!(t.validate(), vec![Violation::LossOutOfRange { link: "L9".into() }]);
    }

    #[test]
    fn router_in_two_domains() {
        let t = NetworkTopology::builder()
            .transit("A", "bbA")
            .transit("B", "bbB")
            .router("R", "A")
            .router("R", "B")
            .allow_partition(true)
            .build();
        let v = t.validate();
        assert_eq!(v, vec![Violation::RouterInMultipleDomains { router: "R".into() }]);
        assert!(v[0].to_string().contains("router in multiple domains"));
    }

    #[test]
    fn structural_violations() {
        let t = NetworkTopology::builder()
            .transit("A", "bbA")
            .broker("bbA2", "A")
            .transit("B", "bbB")
            .edge("e1", &[])
            .router("A1", "A")
            .router("A1b", "A")
            .router("B1", "B")
            .router("E1", "e1")
            .simple_link("X", "A1", "B1", Intra, 1, 5, 1, 0.0)
            .simple_link("P1", "A1", "B1", Inter, 1, 1, 1, 0.0)
            .simple_link("P2", "A1b", "B1", Inter, 1, 1, 1, 0.0)
            .simple_link("P2", "A1", "A1", Intra, 1, 1, 1, 0.0)
            .build();
        let v: Vec<String> = t.validate().iter().map(|v| v.to_string()).collect();
        let expect = [
            "duplicate link id P2",
            "link X avg delay exceeds max delay",
            "link X kind does not match",
            "link P2 connects a router to itself",
            "transit domain A has 2 brokers",
            "edge domain e1 declares no service classes",
            "edge domain e1: needs exactly one inter-domain link",
            "domains A and B joined by several links: P1,P2",
        ];
        for e in expect {
            assert!(v.iter().any(|s| s.contains(e)), "missing {e:?} in {v:#?}");
        }
    }

    #[test]
    fn partition_reported_unless_allowed() {
        let base = || {
            NetworkTopology::builder()
                .transit("A", "bbA")
                .transit("B", "bbB")
                .router("A1", "A")
                .router("B1", "B")
        };
        let v = base().build().validate();
        assert_eq!(
            v,
            vec![Violation::Partitioned { components: vec![vec!["A".into()], vec!["B".into()]] }]
        );
        assert!(base().allow_partition(true).build().validate().is_empty());
    }

    #[test]
    fn validate_is_idempotent() {
        let t = line3();
        assert_eq!(t.validate(), t.validate());
    }

    #[test]
    fn trivial_paths() {
        let t = NetworkTopology::builder()
            .transit("A", "bbA")
            .router("R1", "A")
            .router("R2", "A")
            .router("R3", "A")
            .simple_link("L1", "R1", "R2", Intra, 10, 1, 1, 0.0)
            .build();
        let a = DomainId::from("A");
        assert_eq!(t.intra_path(&a, &"R1".into(), &"R1".into()).unwrap(), Vec::<LinkId>::new());
        assert_eq!(t.intra_path(&a, &"R1".into(), &"R2".into()).unwrap(), vec![LinkId::from("L1")]);
        assert!(matches!(
            t.intra_path(&a, &"R1".into(), &"R3".into()),
            Err(TopologyError::NoPath { .. })
        ));
        assert!(matches!(
            t.intra_path(&a, &"R1".into(), &"X".into()),
            Err(TopologyError::RouterNotInDomain { .. })
        ));
    }

    #[test]
    fn ring_tie_break_picks_smallest_first_link() {
        // R1 -a- R2 -b- R3 -c- R4 -d- R1, from R1 to R3: [a, b] or [d, c]
        let t = NetworkTopology::builder()
            .transit("A", "bbA")
            .router("R1", "A")
            .router("R2", "A")
            .router("R3", "A")
            .router("R4", "A")
            .simple_link("Lb", "R2", "R3", Intra, 10, 1, 1, 0.0)
            .simple_link("Ld", "R4", "R1", Intra, 10, 1, 1, 0.0)
            .simple_link("Lc", "R3", "R4", Intra, 10, 1, 1, 0.0)
            .simple_link("La", "R1", "R2", Intra, 10, 1, 1, 0.0)
            .build();
        let a = DomainId::from("A");
        let p = t.intra_path(&a, &"R1".into(), &"R3".into()).unwrap();
        assert_eq!(p, vec![LinkId::from("La"), LinkId::from("Lb")]);
        let p = t.intra_path(&a, &"R3".into(), &"R1".into()).unwrap();
        assert_eq!(p, vec![LinkId::from("Lb"), LinkId::from("La")]);
    }

    #[test]
    fn transit_cost_sums_and_bottleneck() {
        let t = NetworkTopology::builder()
            .transit("A", "bbA")
            .router("R1", "A")
            .router("R2", "A")
            .router("R3", "A")
            .simple_link("L1", "R1", "R2", Intra, 100_000, 5, 8, 0.0)
            .simple_link("L2", "R2", "R3", Intra, 40_000, 10, 12, 0.0)
            .build();
        let a = DomainId::from("A");
        let c = t.domain_transit_cost(&a, &"R1".into(), &"R3".into()).unwrap();
        assert_eq!(c.avg_delay, Micros(15));
        assert_eq!(c.max_delay, Micros(20));
        assert_eq!(c.bottleneck, Bottleneck::Limited(Kbps(40_000)));
        let id = t.domain_transit_cost(&a, &"R2".into(), &"R2".into()).unwrap();
        assert!(id.is_identity());
    }

    #[test]
    fn transit_cost_loss_per_hop() {
        let t = NetworkTopology::builder()
            .transit("A", "bbA")
            .router("R1", "A")
            .router("R2", "A")
            .router("R3", "A")
            .router("R4", "A")
            .simple_link("L1", "R1", "R2", Intra, 1, 0, 0, 0.01)
            .simple_link("L2", "R2", "R3", Intra, 1, 0, 0, 0.02)
            .simple_link("L3", "R3", "R4", Intra, 1, 0, 0, 0.03)
            .build();
        let c = t
            .domain_transit_cost(&"A".into(), &"R1".into(), &"R4".into())
            .unwrap();
        let expect = 1.0 - 0.99 * 0.98 * 0.97;
        assert!((c.loss.value() - expect).abs() < 1e-15);
        assert_ne!(c.loss, LossProb::ZERO);
    }

    #[test]
    fn adjacencies_and_attachments() {
        let t = NetworkTopology::builder()
            .transit("A", "bbA")
            .transit("B", "bbB")
            .edge("eA", &[0])
            .router("A1", "A")
            .router("A2", "A")
            .router("B1", "B")
            .router("EA", "eA")
            .simple_link("AB", "A2", "B1", Inter, 1, 1, 1, 0.0)
            .simple_link("A12", "A1", "A2", Intra, 1, 1, 1, 0.0)
            .simple_link("EA-A1", "EA", "A1", Inter, 1, 1, 1, 0.0)
            .build();
        assert!(t.validate().is_empty());
        let adj = t.transit_adjacencies(&"A".into());
        assert_eq!(adj.len(), 1);
        assert_eq!(adj[0].neighbor, DomainId::from("B"));
        assert_eq!(adj[0].local_router, RouterId::from("A2"));
        let att = t.edge_attachment(&"eA".into()).unwrap();
        assert_eq!(att.transit, DomainId::from("A"));
        assert_eq!(att.router, RouterId::from("A1"));
        assert_eq!(t.attached_edges(&"A".into()).len(), 1);
        assert!(t.attached_edges(&"B".into()).is_empty());
    }
}

#[cfg(test)]
mod path_props {
    //! Exhaustive simple-path enumeration as an independent oracle.
    use super::*;
    use proptest::prelude::*;

    fn all_simple_paths(
        t: &NetworkTopology,
        from: &RouterId,
        to: &RouterId,
    ) -> Vec<Vec<LinkId>> {
        fn go(
            t: &NetworkTopology,
            at: &RouterId,
            to: &RouterId,
            seen: &mut Vec<RouterId>,
            path: &mut Vec<LinkId>,
            out: &mut Vec<Vec<LinkId>>,
        ) {
            if at == to {
                out.push(path.clone());
                return;
            }
            for l in t.links() {
                let Some(next) = l.other_end(at) else { continue };
                if seen.contains(next) {
                    continue;
                }
                seen.push(next.clone());
                path.push(l.id.clone());
                go(t, next, to, seen, path, out);
                path.pop();
                seen.pop();
            }
        }
        let mut out = Vec::new();
        go(t, from, to, &mut vec![from.clone()], &mut Vec::new(), &mut out);
        out
    }

    fn arb_domain() -> impl Strategy<Value = NetworkTopology> {
        (2usize..=8).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> =
                (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
            let m = pairs.len();
            (Just(n), Just(pairs), prop::collection::vec(prop::bool::weighted(0.4), m), 0u8..255)
        })
        .prop_map(|(n, pairs, keep, salt)| {
            let mut b = NetworkTopology::builder().transit("D", "bb");
            for i in 0..n {
                b = b.router(&format!("R{i}"), "D");
            }
            for (k, (x, y)) in pairs.iter().enumerate() {
                if keep[k] {
                    // ids deliberately not in endpoint order
                    let id = format!("L{:03}", (k * 37 + salt as usize) % 997);
                    b = b.simple_link(&id, &format!("R{x}"), &format!("R{y}"), LinkKind::Intra, 1, 1, 1, 0.0);
                }
            }
            b.build()
        })
    }

    proptest! {
        #[test]
        fn intra_path_is_min_hop_and_lexicographic(t in arb_domain()) {
            let d = DomainId::from("D");
            let routers: Vec<_> = t.routers().iter().map(|r| r.id.clone()).collect();
            for a in &routers {
                for b in &routers {
                    let paths = all_simple_paths(&t, a, b);
                    match t.intra_path(&d, a, b) {
                        Ok(p) => {
                            let best = paths.iter().min_by(|x, y| x.len().cmp(&y.len()).then(x.cmp(y))).unwrap();
                            prop_assert_eq!(&p, best);
                        }
                        Err(TopologyError::NoPath { .. }) => prop_assert!(paths.is_empty()),
                        Err(e) => prop_assert!(false, "{e}"),
                    }
                }
            }
        }

        #[test]
        fn transit_cost_is_associative_over_splits(t in arb_domain(), cut in 0usize..8) {
            let d = DomainId::from("D");
            let routers: Vec<_> = t.routers().iter().map(|r| r.id.clone()).collect();
            for a in &routers {
                for b in &routers {
                    let Ok(p) = t.intra_path(&d, a, b) else { continue };
                    let k = cut.min(p.len());
                    let whole = t.path_cost(&p);
                    let split = merge_costs(&t.path_cost(&p[..k]), &t.path_cost(&p[k..]));
                    prop_assert_eq!(whole, split);
                }
            }
        }
    }
}
