//! Centralized best routes, computed without any of the protocol code.
//!
//! The exhaustive oracle enumerates every simple transit-domain route to each
//! edge domain. The relaxation oracle iterates a per-domain best-route
//! relaxation to a fixpoint. On topologies where route cost does not depend
//! on the ingress border router the two agree.

use std::collections::{BTreeMap, BTreeSet};

use crate::broker::BrokerState;
use crate::qos::{compose, merge_all, merge_costs, rank, AiKey, AvailabilityInfo, TransitCost};
use crate::topology::NetworkTopology;
use crate::types::{BrokerId, DomainId, Kbps, NextHop, RouterId, SimTime};

/// Above this many transit domains the exhaustive enumeration is refused.
pub const MAX_EXHAUSTIVE_DOMAINS: usize = 8;

/// Loss is compared with this absolute tolerance; everything else exactly.
pub const LOSS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRoute {
    pub ai: AvailabilityInfo,
    /// Every next hop achieving the best parameters.
    pub next_hops: BTreeSet<NextHop>,
}

pub type RouteMap = BTreeMap<(BrokerId, AiKey), OracleRoute>;

/// Stored route as seen in a broker database or a dump of one.
pub type DbView = BTreeMap<(BrokerId, AiKey), (AvailabilityInfo, NextHop)>;

/// Equal up to `valid_until`, with loss compared within [`LOSS_TOLERANCE`].
pub fn same_route_parameters(a: &AvailabilityInfo, b: &AvailabilityInfo) -> bool {
    a.edge == b.edge
        && a.class == b.class
        && a.bandwidth == b.bandwidth
        && a.avg_delay == b.avg_delay
        && a.max_delay == b.max_delay
        && a.jitter == b.jitter
        && a.origin == b.origin
        && (a.loss.value() - b.loss.value()).abs() <= LOSS_TOLERANCE
}

struct Graph<'a> {
    topo: &'a NetworkTopology,
    /// transit domain -> (neighbor domain, inter link cost, local router, remote router)
    adj: BTreeMap<DomainId, Vec<(DomainId, TransitCost, RouterId, RouterId)>>,
}

impl<'a> Graph<'a> {
    fn new(topo: &'a NetworkTopology) -> Self {
        let mut adj = BTreeMap::new();
        for d in topo.transit_domains() {
            let v = topo
                .transit_adjacencies(&d.id)
                .into_iter()
                .filter_map(|a| {
                    let link = topo.link(&a.link)?;
                    Some((a.neighbor, TransitCost::from_link(link), a.local_router, a.remote_router))
                })
                .collect();
            adj.insert(d.id.clone(), v);
        }
        Self { topo, adj }
    }

    fn transit(&self, d: &DomainId, from: &RouterId, to: &RouterId) -> Option<TransitCost> {
        self.topo.domain_transit_cost(d, from, to).ok()
    }

    fn link_between(&self, a: &DomainId, b: &DomainId) -> Option<&(DomainId, TransitCost, RouterId, RouterId)> {
        self.adj.get(a)?.iter().find(|x| &x.0 == b)
    }
}

fn base_ai(edge: &DomainId, class: crate::types::ServiceClass, origin: &BrokerId) -> AvailabilityInfo {
    AvailabilityInfo {
        edge: edge.clone(),
        class,
        bandwidth: Kbps(u64::MAX),
        avg_delay: Default::default(),
        max_delay: Default::default(),
        jitter: Default::default(),
        loss: Default::default(),
        origin: origin.clone(),
        valid_until: SimTime::NEVER,
    }
}

fn offer(best: &mut BTreeMap<(BrokerId, AiKey), OracleRoute>, key: (BrokerId, AiKey), ai: AvailabilityInfo, hop: NextHop) {
    match best.get_mut(&key) {
        None => {
            best.insert(key, OracleRoute { ai, next_hops: BTreeSet::from([hop]) });
        }
        Some(cur) => {
            if same_route_parameters(&ai, &cur.ai) {
                cur.next_hops.insert(hop);
            } else if rank(&ai, &cur.ai).is_lt() {
                *cur = OracleRoute { ai, next_hops: BTreeSet::from([hop]) };
            }
        }
    }
}

/// Best route per (broker, edge domain, class) by exhaustive enumeration of
/// simple transit-domain routes. Unreachable pairs are absent.
///
/// # Panics
/// If the topology has more than [`MAX_EXHAUSTIVE_DOMAINS`] transit domains.
pub fn oracle_best_routes(topo: &NetworkTopology) -> RouteMap {
    let n = topo.transit_domains().count();
    assert!(
        n <= MAX_EXHAUSTIVE_DOMAINS,
        "exhaustive oracle limited to {MAX_EXHAUSTIVE_DOMAINS} transit domains, got {n}"
    );
    let g = Graph::new(topo);
    let mut best = RouteMap::new();
    for edge in topo.edge_domains() {
        let Some(att) = topo.edge_attachment(&edge.id) else { continue };
        let Some(origin) = topo.broker_of(&att.transit) else { continue };
        let Some(edge_link) = topo.link(&att.link) else { continue };
        let edge_cost = TransitCost::from_link(edge_link);
        for start in topo.transit_domains() {
            let Some(b) = topo.broker_of(&start.id) else { continue };
            let mut routes = Vec::new();
            let mut path = vec![start.id.clone()];
            enumerate(&g, &att.transit, &mut path, &mut routes);
            for route in routes {
                let Some(costs) = route_costs(&g, &route, &att.router) else { continue };
                let mut all = costs;
                all.push(edge_cost);
                let total = merge_all(all.iter());
                let hop = match route.get(1) {
                    None => NextHop::Local,
                    Some(d) => match topo.broker_of(d) {
                        Some(nb) => NextHop::Broker(nb.clone()),
                        None => continue,
                    },
                };
                for &class in &edge.classes {
                    let ai = compose(&total, &base_ai(&edge.id, class, origin));
                    offer(&mut best, (b.clone(), ai.key()), ai, hop.clone());
                }
            }
        }
    }
    best
}

fn enumerate(g: &Graph<'_>, target: &DomainId, path: &mut Vec<DomainId>, out: &mut Vec<Vec<DomainId>>) {
    let at = path.last().expect("non-empty").clone();
    if &at == target {
        out.push(path.clone());
        return;
    }
    for (nb, ..) in g.adj.get(&at).into_iter().flatten() {
        if path.contains(nb) {
            continue;
        }
        path.push(nb.clone());
        enumerate(g, target, path, out);
        path.pop();
    }
}

/// Segment costs of a domain route ending at the origin domain, excluding
/// the edge link. The first domain's own transit is not part of its view.
fn route_costs(g: &Graph<'_>, route: &[DomainId], attach: &RouterId) -> Option<Vec<TransitCost>> {
    let mut costs = Vec::new();
    for i in 1..route.len() {
        let (prev, cur) = (&route[i - 1], &route[i]);
        let (_, inter, _, ingress) = g.link_between(prev, cur)?;
        let exit = if i + 1 < route.len() {
            g.link_between(cur, &route[i + 1])?.2.clone()
        } else {
            attach.clone()
        };
        costs.push(*inter);
        costs.push(g.transit(cur, ingress, &exit)?);
    }
    Some(costs)
}

/// Best routes by relaxation: each domain repeatedly takes the best of its
/// neighbors' current routes extended across the link and the neighbor's
/// domain, until nothing improves.
pub fn relaxation_best_routes(topo: &NetworkTopology) -> RouteMap {
    let g = Graph::new(topo);
    let mut best = RouteMap::new();
    for edge in topo.edge_domains() {
        let Some(att) = topo.edge_attachment(&edge.id) else { continue };
        let Some(origin) = topo.broker_of(&att.transit) else { continue };
        let Some(edge_link) = topo.link(&att.link) else { continue };
        let edge_cost = TransitCost::from_link(edge_link);
        for &class in &edge.classes {
            // domain -> (route cost from that domain's view, next domain, exit router inside next domain)
            let mut dist: BTreeMap<DomainId, (AvailabilityInfo, Option<DomainId>)> = BTreeMap::new();
            dist.insert(att.transit.clone(), (compose(&edge_cost, &base_ai(&edge.id, class, origin)), None));
            let rounds = g.adj.len() + 1;
            for _ in 0..rounds {
                let mut changed = false;
                for (d, nbs) in &g.adj {
                    if d == &att.transit {
                        continue;
                    }
                    for (nb, inter, _, ingress) in nbs {
                        let Some((nb_ai, nb_next)) = dist.get(nb) else { continue };
                        // where the neighbor's route leaves its domain
                        let exit = match nb_next {
                            None => att.router.clone(),
                            Some(nn) => match g.link_between(nb, nn) {
                                Some(x) => x.2.clone(),
                                None => continue,
                            },
                        };
                        let Some(tr) = g.transit(nb, ingress, &exit) else { continue };
                        let cand = compose(&merge_costs(inter, &tr), nb_ai);
                        let better = match dist.get(d) {
                            None => true,
                            Some((cur, _)) => rank(&cand, cur).is_lt(),
                        };
                        if better {
                            dist.insert(d.clone(), (cand, Some(nb.clone())));
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            for (d, (ai, next)) in dist {
                let Some(b) = topo.broker_of(&d) else { continue };
                let hop = match next {
                    None => NextHop::Local,
                    Some(nd) => match topo.broker_of(&nd) {
                        Some(nb) => NextHop::Broker(nb.clone()),
                        None => continue,
                    },
                };
                offer(&mut best, (b.clone(), ai.key()), ai, hop);
            }
        }
    }
    best
}

/// Stored routes of a set of brokers.
pub fn database_view<'a>(brokers: impl IntoIterator<Item = &'a BrokerState>) -> DbView {
    let mut v = DbView::new();
    for b in brokers {
        for (k, s) in b.database().iter() {
            v.insert((b.id().clone(), k.clone()), (s.ai.clone(), s.learned_from.clone()));
        }
    }
    v
}

/// Differences between stored routes and oracle routes, one line each.
/// Empty iff every broker stores exactly the oracle's best for every
/// reachable key, via one of the oracle's best next hops.
pub fn diff_against_oracle(view: &DbView, oracle: &RouteMap) -> Vec<String> {
    let mut out = Vec::new();
    for ((b, k), r) in oracle {
        match view.get(&(b.clone(), k.clone())) {
            None => out.push(format!("{b} {}/{}: missing, oracle has {}", k.edge, k.class, describe(&r.ai))),
            Some((ai, hop)) => {
                if !same_route_parameters(ai, &r.ai) {
                    out.push(format!(
                        "{b} {}/{}: stored {} oracle {}",
                        k.edge,
                        k.class,
                        describe(ai),
                        describe(&r.ai)
                    ));
                } else if !r.next_hops.contains(hop) {
                    out.push(format!("{b} {}/{}: next hop {hop} not among oracle's best", k.edge, k.class));
                }
            }
        }
    }
    for (b, k) in view.keys() {
        if !oracle.contains_key(&(b.clone(), k.clone())) {
            out.push(format!("{b} {}/{}: stored but unreachable per oracle", k.edge, k.class));
        }
    }
    out
}

fn describe(ai: &AvailabilityInfo) -> String {
    format!(
        "avg={} max={} jitter={} loss={} bw={} origin={}",
        ai.avg_delay, ai.max_delay, ai.jitter, ai.loss, ai.bandwidth, ai.origin
    )
}

/// Keys whose next-hop chain does not end at the origin within as many
/// steps as there are brokers.
pub fn next_hop_loops(view: &DbView) -> Vec<String> {
    let brokers: BTreeSet<&BrokerId> = view.keys().map(|(b, _)| b).collect();
    let mut out = Vec::new();
    for (start, key) in view.keys() {
        let mut at = start.clone();
        let mut ok = false;
        for _ in 0..=brokers.len() {
            match view.get(&(at.clone(), key.clone())) {
                Some((_, NextHop::Local)) => {
                    ok = true;
                    break;
                }
                Some((_, NextHop::Broker(n))) => at = n.clone(),
                None => break,
            }
        }
        if !ok {
            out.push(format!("{start} {}/{}: next-hop chain does not reach the origin", key.edge, key.class));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::topology::LinkKind::*;
    use crate::types::{LossProb, Micros, ServiceClass};

    fn key(e: &str) -> AiKey {
        AiKey::new(e.into(), ServiceClass::new(0).unwrap())
    }

    #[test]
    fn single_domain_has_only_local_entries() {
        let t = NetworkTopology::builder()
            .transit("A", "bbA")
            .edge("e1", &[0, 3])
            .router("A1", "A")
            .router("x", "e1")
            .simple_link("L", "x", "A1", Inter, 10, 1, 2, 0.0)
            .build();
        let o = oracle_best_routes(&t);
        assert_eq!(o.len(), 2);
        assert!(o.values().all(|r| r.next_hops == BTreeSet::from([NextHop::Local])));
        assert_eq!(o, relaxation_best_routes(&t));
    }

    #[test]
    fn two_domains_hand_computed() {
        let t = NetworkTopology::builder()
            .transit("A", "bbA")
            .transit("B", "bbB")
            .edge("eB", &[0])
            .router("A1", "A")
            .router("B1", "B")
            .router("B2", "B")
            .router("x", "eB")
            .simple_link("LAB", "A1", "B1", Inter, 80_000, 4_000, 6_000, 0.01)
            .simple_link("LB", "B1", "B2", Intra, 60_000, 1_000, 1_500, 0.02)
            .simple_link("Le", "B2", "x", Inter, 90_000, 300, 400, 0.0)
            .build();
        let o = oracle_best_routes(&t);
        let r = &o[&("bbA".into(), key("eB"))];
        assert_eq!(r.ai.avg_delay, Micros(5_300));
        assert_eq!(r.ai.max_delay, Micros(7_900));
        assert_eq!(r.ai.bandwidth, Kbps(60_000));
        let loss = 1.0 - 0.99 * 0.98;
        assert!((r.ai.loss.value() - loss).abs() < 1e-15);
        assert_eq!(r.ai.origin, BrokerId::from("bbB"));
        assert_eq!(r.next_hops, BTreeSet::from([NextHop::Broker("bbB".into())]));
        let local = &o[&("bbB".into(), key("eB"))];
        assert_eq!(local.ai.avg_delay, Micros(300));
    }

    #[test]
    fn parallel_routes_prefers_fast_path() {
        let t = fixtures::parallel_routes();
        let o = oracle_best_routes(&t);
        let r = &o[&("bbA".into(), key("eD"))];
        assert_eq!(r.next_hops, BTreeSet::from([NextHop::Broker("bbB".into())]));
        assert_eq!(r.ai.bandwidth, Kbps(50_000));
        assert_eq!(
            diff_against_oracle(&BTreeMap::new(), &o).len(),
            o.len(),
            "every oracle entry reported missing"
        );
        for (k, v) in relaxation_best_routes(&t) {
            assert!(same_route_parameters(&v.ai, &o[&k].ai), "{k:?}");
        }
    }

    #[test]
    fn diff_reports_parameter_mismatch_and_extra() {
        let t = fixtures::line3();
        let o = oracle_best_routes(&t);
        let mut view: DbView = o
            .iter()
            .map(|(k, r)| (k.clone(), (r.ai.clone(), r.next_hops.iter().next().unwrap().clone())))
            .collect();
        assert!(diff_against_oracle(&view, &o).is_empty());
        assert!(next_hop_loops(&view).is_empty());
        let k = ("bbA".into(), key("eC"));
        view.get_mut(&k).unwrap().0.loss = LossProb::new(0.5).unwrap();
        assert_eq!(diff_against_oracle(&view, &o).len(), 1);
        view.get_mut(&k).unwrap().1 = NextHop::Broker("bbA".into());
        assert!(!next_hop_loops(&view).is_empty());
    }
}
