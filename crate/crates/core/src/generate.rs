//! Seeded topology and scenario generators for tests, benches and the CLI.
//!
//! Two router-level shapes are available. In [`Family::CoreBorder`] every
//! transit domain is a star: each adjacency and each attached edge domain
//! gets its own border router, joined to a core router by a spoke, and all
//! spokes of a domain share the same parameters. Crossing such a domain
//! costs the same whichever border routers are used. [`Family::Mesh`] puts
//! one to three routers in a domain with arbitrary intra links and attaches
//! adjacencies to random routers, so crossing cost depends on the ingress.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sim::scenario::{DemandStream, Scenario};
use crate::topology::{Link, LinkKind, NetworkTopology, TopologyBuilder};
use crate::types::{Kbps, Micros, ServiceClass};

/// Code points drawn for edge domains: best effort, AF11, AF21, EF.
pub const CLASS_POOL: [u32; 4] = [0, 10, 18, 46];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    CoreBorder,
    Mesh,
}

/// Domain-level shape, before routers and links are chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainGraph {
    pub transit: usize,
    /// Unordered transit pairs, each at most once.
    pub inter: Vec<(usize, usize)>,
    /// Attachment domain and classes of each edge domain.
    pub edges: Vec<(usize, Vec<u32>)>,
}

impl DomainGraph {
    pub fn ring(n: usize, classes: usize) -> Self {
        let inter = match n {
            0 | 1 => Vec::new(),
            2 => vec![(0, 1)],
            _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        };
        Self {
            transit: n,
            inter,
            edges: (0..n).map(|i| (i, CLASS_POOL[..classes.min(4)].to_vec())).collect(),
        }
    }

    pub fn complete(n: usize, classes: usize) -> Self {
        let mut inter = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                inter.push((i, j));
            }
        }
        Self {
            transit: n,
            inter,
            edges: (0..n).map(|i| (i, CLASS_POOL[..classes.min(4)].to_vec())).collect(),
        }
    }

    /// Random spanning tree plus extra pairs with probability `extra`.
    pub fn random(rng: &mut impl Rng, transit: usize, edges: usize, classes: usize, extra: f64) -> Self {
        let mut order: Vec<usize> = (0..transit).collect();
        order.shuffle(rng);
        let mut inter = Vec::new();
        for i in 1..transit {
            let j = rng.gen_range(0..i);
            inter.push(ordered(order[i], order[j]));
        }
        for a in 0..transit {
            for b in a + 1..transit {
                if !inter.contains(&(a, b)) && rng.gen_bool(extra) {
                    inter.push((a, b));
                }
            }
        }
        inter.sort();
        let pool = &CLASS_POOL[..classes.clamp(1, 4)];
        let edges = (0..edges)
            .map(|_| {
                let mut cs: Vec<u32> = pool.iter().copied().filter(|_| rng.gen_bool(0.6)).collect();
                if cs.is_empty() {
                    cs.push(*pool.choose(rng).expect("non-empty pool"));
                }
                (rng.gen_range(0..transit), cs)
            })
            .collect();
        Self { transit, inter, edges }
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, Copy)]
struct LinkParams {
    capacity: u64,
    avg: u64,
    max: u64,
    jitter: u64,
    loss: f64,
}

impl LinkParams {
    fn random(rng: &mut impl Rng, capacity: RangeInclusive<u64>) -> Self {
        let avg = rng.gen_range(100..=20_000);
        let max = avg + rng.gen_range(0..=avg);
        Self {
            capacity: rng.gen_range(capacity),
            avg,
            max,
            jitter: rng.gen_range(0..=(max - avg) / 2),
            loss: rng.gen_range(0.0..0.01),
        }
    }

    fn link(&self, id: String, a: &str, b: &str, kind: LinkKind) -> Link {
        Link {
            id: id.into(),
            endpoints: (a.into(), b.into()),
            capacity: Kbps(self.capacity),
            avg_delay: Micros(self.avg),
            max_delay: Micros(self.max),
            jitter: Micros(self.jitter),
            loss: self.loss,
            kind,
        }
    }
}

const INTER_CAPACITY: RangeInclusive<u64> = 20_000..=200_000;
const INTRA_CAPACITY: RangeInclusive<u64> = 50_000..=500_000;

/// Builds routers and links for `g`. Transit domains are `T0..`, their
/// brokers `bb0..`, edge domains `E0..`.
pub fn materialize(g: &DomainGraph, family: Family, rng: &mut impl Rng) -> NetworkTopology {
    let mut b = NetworkTopology::builder();
    for i in 0..g.transit {
        b = b.transit(&format!("T{i}"), &format!("bb{i}"));
    }
    for (j, (_, classes)) in g.edges.iter().enumerate() {
        b = b.edge(&format!("E{j}"), classes).router(&format!("E{j}.r"), &format!("E{j}"));
    }
    // per transit domain: router handed out for each attachment, in order
    let mut slots: Vec<Vec<String>> = vec![Vec::new(); g.transit];
    let attachments: Vec<usize> = (0..g.transit)
        .map(|t| {
            g.inter.iter().filter(|(a, c)| *a == t || *c == t).count() + g.edges.iter().filter(|(a, _)| *a == t).count()
        })
        .collect();
    for t in 0..g.transit {
        let name = format!("T{t}");
        match family {
            Family::CoreBorder => {
                let core = format!("{name}.c");
                b = b.router(&core, &name);
                let spoke = LinkParams::random(rng, INTRA_CAPACITY);
                for k in 0..attachments[t].max(1) {
                    let border = format!("{name}.b{k}");
                    b = b
                        .router(&border, &name)
                        .link(spoke.link(format!("{name}.s{k}"), &core, &border, LinkKind::Intra));
                    slots[t].push(border);
                }
                slots[t].reverse();
            }
            Family::Mesh => {
                let n = rng.gen_range(1..=3);
                let routers: Vec<String> = (0..n).map(|k| format!("{name}.r{k}")).collect();
                for r in &routers {
                    b = b.router(r, &name);
                }
                let mut links = 0;
                for k in 1..n {
                    let p = LinkParams::random(rng, INTRA_CAPACITY);
                    b = b.link(p.link(format!("{name}.i{links}"), &routers[k - 1], &routers[k], LinkKind::Intra));
                    links += 1;
                }
                if n == 3 && rng.gen_bool(0.5) {
                    let p = LinkParams::random(rng, INTRA_CAPACITY);
                    b = b.link(p.link(format!("{name}.i{links}"), &routers[0], &routers[2], LinkKind::Intra));
                }
                for _ in 0..attachments[t] {
                    slots[t].push(routers.choose(rng).expect("non-empty").clone());
                }
            }
        }
    }
    for (a, c) in &g.inter {
        let ra = slots[*a].pop().expect("slot per attachment");
        let rc = slots[*c].pop().expect("slot per attachment");
        let p = LinkParams::random(rng, INTER_CAPACITY);
        b = b.link(p.link(format!("L{a}-{c}"), &ra, &rc, LinkKind::Inter));
    }
    for (j, (t, _)) in g.edges.iter().enumerate() {
        let r = slots[*t].pop().expect("slot per attachment");
        let p = LinkParams::random(rng, INTER_CAPACITY);
        b = b.link(p.link(format!("LE{j}"), &format!("E{j}.r"), &r, LinkKind::Inter));
    }
    finish(b)
}

fn finish(b: TopologyBuilder) -> NetworkTopology {
    let t = b.build();
    debug_assert!(t.validate().is_empty(), "{:?}", t.validate());
    t
}

/// Size ranges for [`random_topology`].
#[derive(Debug, Clone)]
pub struct RandomParams {
    pub transit: RangeInclusive<usize>,
    pub edges: RangeInclusive<usize>,
    pub classes: RangeInclusive<usize>,
    /// Probability of each non-tree transit pair being linked.
    pub extra_links: f64,
    pub family: Family,
}

impl Default for RandomParams {
    fn default() -> Self {
        Self {
            transit: 3..=8,
            edges: 2..=6,
            classes: 1..=4,
            extra_links: 0.3,
            family: Family::CoreBorder,
        }
    }
}

/// A connected random topology, a pure function of `seed` and `p`.
pub fn random_topology(seed: u64, p: &RandomParams) -> NetworkTopology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transit = rng.gen_range(p.transit.clone());
    let edges = rng.gen_range(p.edges.clone());
    let classes = rng.gen_range(p.classes.clone());
    let g = DomainGraph::random(&mut rng, transit, edges, classes, p.extra_links);
    materialize(&g, p.family, &mut rng)
}

pub fn ring(n: usize, classes: usize, seed: u64) -> NetworkTopology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    materialize(&DomainGraph::ring(n, classes), Family::CoreBorder, &mut rng)
}

pub fn complete(n: usize, classes: usize, seed: u64) -> NetworkTopology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    materialize(&DomainGraph::complete(n, classes), Family::CoreBorder, &mut rng)
}

/// Demand streams between random edge pairs sharing a class, with random
/// start and stop terms inside `terms`, plus refresh and the demand cycle
/// on. Bandwidths are large enough relative to link capacities that many
/// requests are rejected.
pub fn fuzz_scenario(topo: &NetworkTopology, seed: u64, terms: u64, streams: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f022);
    let edges: Vec<_> = topo.edge_domains().collect();
    let mut s = Scenario::default();
    if edges.len() < 2 {
        return s;
    }
    let mut tries = 0;
    while s.demands.len() < streams && tries < streams * 20 {
        tries += 1;
        let a = edges.choose(&mut rng).expect("non-empty");
        let b = edges.choose(&mut rng).expect("non-empty");
        if a.id == b.id {
            continue;
        }
        let shared: Vec<ServiceClass> = a.classes.iter().filter(|c| b.classes.contains(c)).copied().collect();
        let Some(&class) = shared.choose(&mut rng) else { continue };
        let from = rng.gen_range(0..terms.max(1));
        let until = if rng.gen_bool(0.5) { Some(from + rng.gen_range(1..=terms.max(1))) } else { None };
        s.demands.push(DemandStream {
            name: format!("f{}", s.demands.len()),
            src: a.id.clone(),
            dest: b.id.clone(),
            class,
            bandwidth: Kbps(rng.gen_range(1_000..=80_000)),
            from_term: from,
            until_term: until,
        });
    }
    s
}
