//! `bbtopo 1`: the topology file.
//!
//! ```text
//! bbtopo 1
//! transit A broker=bbA
//! edge eA classes=0,46
//! router A1 domain=A
//! link LA A1 A2 intra cap=100000 avg=1000 max=2000 jitter=0 loss=0.001
//! allow_partition
//! ```
//!
//! Capacities are in kbit/s, delays in microseconds. `jitter` defaults to 0.

use std::collections::BTreeMap;

use crate::topology::{DomainKind, Link, LinkKind, NetworkTopology, Violation};
use crate::types::{Kbps, Micros, ServiceClass};
use crate::wire::text::{exact_f64, lines, FormatError, FormatErrors};

pub const MAGIC: &str = "bbtopo";
pub const VERSION: u32 = 1;

/// Parses and validates a topology file.
pub fn parse_topology(text: &str) -> Result<NetworkTopology, FormatErrors> {
    let ls = lines(text, MAGIC, VERSION)?;
    let mut b = NetworkTopology::builder();
    // (kind, id) -> defining lines
    let mut defs: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    let mut first_domain_line: BTreeMap<&str, usize> = BTreeMap::new();
    for l in &ls {
        match l.keyword() {
            "transit" => {
                l.expect_words(1)?;
                l.only(&["broker"])?;
                let id = l.word(0, "domain id")?;
                let broker = l.req("broker")?;
                b = b.transit(id, broker);
                defs.entry(("domain", id)).or_default().push(l.no);
                defs.entry(("broker", broker)).or_default().push(l.no);
                first_domain_line.entry(id).or_insert(l.no);
            }
            "edge" => {
                l.expect_words(1)?;
                l.only(&["classes"])?;
                let id = l.word(0, "domain id")?;
                let mut classes = Vec::new();
                for c in l.req("classes")?.split(',') {
                    let n: u32 = c.parse().map_err(|_| l.err(format!("edge: bad class '{c}'")))?;
                    ServiceClass::new(n).map_err(|e| l.err(format!("edge {id}: {e}")))?;
                    classes.push(n);
                }
                b = b.edge(id, &classes);
                defs.entry(("domain", id)).or_default().push(l.no);
                first_domain_line.entry(id).or_insert(l.no);
            }
            "router" => {
                l.expect_words(1)?;
                l.only(&["domain"])?;
                let id = l.word(0, "router id")?;
                b = b.router(id, l.req("domain")?);
                defs.entry(("router", id)).or_default().push(l.no);
            }
            "link" => {
                l.expect_words(4)?;
                l.only(&["cap", "avg", "max", "jitter", "loss"])?;
                let id = l.word(0, "link id")?;
                let kind = match l.word(3, "link kind")? {
                    "intra" => LinkKind::Intra,
                    "inter" => LinkKind::Inter,
                    other => return Err(l.err(format!("link {id}: kind must be intra or inter, not {other}")).into()),
                };
                let loss: f64 = l.num("loss")?;
                if !loss.is_finite() {
                    return Err(l.err(format!("link {id}: loss must be finite")).into());
                }
                b = b.link(Link {
                    id: id.into(),
                    endpoints: (l.word(1, "endpoint")?.into(), l.word(2, "endpoint")?.into()),
                    capacity: Kbps(l.num("cap")?),
                    avg_delay: Micros(l.num("avg")?),
                    max_delay: Micros(l.num("max")?),
                    jitter: Micros(l.opt_num("jitter")?.unwrap_or(0)),
                    loss,
                    kind,
                });
                defs.entry(("link", id)).or_default().push(l.no);
            }
            "allow_partition" => {
                l.expect_words(0)?;
                l.only(&[])?;
                b = b.allow_partition(true);
            }
            other => return Err(l.err(format!("unknown keyword '{other}'")).into()),
        }
    }
    let topo = b.build();
    let violations = topo.validate();
    if violations.is_empty() {
        return Ok(topo);
    }
    let last = |kind: &str, id: &str| defs.get(&(kind, id)).and_then(|v| v.last().copied());
    let mut errs: Vec<FormatError> = violations
        .iter()
        .map(|v| {
            let line = match v {
                Violation::DuplicateId { kind, id } => last(kind, id),
                Violation::RouterInMultipleDomains { router } => last("router", router.as_str()),
                Violation::UnknownRouter { link, .. }
                | Violation::LossOutOfRange { link }
                | Violation::DelayOrder { link }
                | Violation::SelfLoop { link }
                | Violation::LinkKindMismatch { link } => last("link", link.as_str()),
                Violation::BrokerCount { domain, .. }
                | Violation::EdgeShape { edge: domain, .. }
                | Violation::EdgeWithoutClasses { edge: domain } => first_domain_line.get(domain.as_str()).copied(),
                Violation::BrokerOnEdgeDomain { broker } => last("broker", broker.as_str()),
                Violation::ParallelInterLinks { links, .. } => {
                    links.iter().filter_map(|l| last("link", l.as_str())).max()
                }
                Violation::UnknownDomain { referenced_by, .. } => referenced_by
                    .split_once(' ')
                    .and_then(|(kind, id)| last(kind, id)),
                Violation::Partitioned { components } => components
                    .get(1)
                    .and_then(|c| c.first())
                    .and_then(|d| first_domain_line.get(d.as_str()).copied()),
                Violation::EmptyId { .. } => None,
            };
            FormatError::validation(line.unwrap_or(1), v.to_string())
        })
        .collect();
    errs.sort_by_key(|e| e.line);
    Err(FormatErrors(errs))
}

/// Canonical text of a topology: domains, then routers, then links, each
/// in definition order.
pub fn write_topology(t: &NetworkTopology) -> String {
    let mut out = format!("{MAGIC} {VERSION}\n");
    for d in t.domains() {
        match d.kind {
            DomainKind::Transit => {
                let broker = t.broker_of(&d.id).map(|b| b.to_string()).unwrap_or_default();
                out.push_str(&format!("transit {} broker={broker}\n", d.id));
            }
            DomainKind::Edge => {
                let cs: Vec<String> = d.classes.iter().map(|c| c.to_string()).collect();
                out.push_str(&format!("edge {} classes={}\n", d.id, cs.join(",")));
            }
        }
    }
    for r in t.routers() {
        out.push_str(&format!("router {} domain={}\n", r.id, r.domain));
    }
    for l in t.links() {
        let kind = match l.kind {
            LinkKind::Intra => "intra",
            LinkKind::Inter => "inter",
        };
        out.push_str(&format!(
            "link {} {} {} {kind} cap={} avg={} max={} jitter={} loss={}\n",
            l.id,
            l.endpoints.0,
            l.endpoints.1,
            l.capacity,
            l.avg_delay,
            l.max_delay,
            l.jitter,
            exact_f64(l.loss)
        ));
    }
    if t.allows_partition() {
        out.push_str("allow_partition\n");
    }
    out
}
