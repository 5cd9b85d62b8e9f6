//! Per-broker reservation ledger and path admission.
//!
//! Reservations use replacement semantics: each [`AggregateKey`] holds one
//! absolute target, restated every term. Admitting a key sets its reservation
//! on every link of the new path and clears it from links it no longer uses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::types::{DomainId, Kbps, LinkId, NextHop, RouterId, ServiceClass, TermIndex};

/// Traffic aggregate inside one domain: where it enters and where it goes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AggregateKey {
    pub ingress: RouterId,
    pub dest: DomainId,
    pub class: ServiceClass,
}

impl fmt::Display for AggregateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}/{}", self.ingress, self.dest, self.class)
    }
}

impl AggregateKey {
    /// Key under which injected faults are booked.
    pub fn fault() -> Self {
        AggregateKey {
            ingress: RouterId::from("!fault"),
            dest: DomainId::from("!fault"),
            class: ServiceClass::new(0).expect("0 is a valid class"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdmissionError {
    #[error("link {0} is not managed by this ledger")]
    UnknownLink(LinkId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdmitOutcome {
    Admitted,
    /// First link on the path without enough free capacity.
    Rejected { bottleneck: LinkId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyState {
    pub path: Vec<LinkId>,
    pub target: Kbps,
    pub last_refreshed_term: TermIndex,
}

/// Accepted ledger mutations, in order. Replaying them from an empty ledger
/// must reproduce the current reservations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LedgerOp {
    Admit {
        key: AggregateKey,
        path: Vec<LinkId>,
        target: Kbps,
        term: TermIndex,
    },
    Release { key: AggregateKey },
    InjectFault { link: LinkId, kbps: Kbps },
}

pub type Reservations = BTreeMap<LinkId, BTreeMap<AggregateKey, Kbps>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerViolation {
    pub link: LinkId,
    pub reserved: Kbps,
    pub capacity: Kbps,
}

impl fmt::Display for LedgerViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "admission safety: link {} reserved {} > capacity {}",
            self.link, self.reserved, self.capacity
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReservationLedger {
    capacity: BTreeMap<LinkId, Kbps>,
    reserved: Reservations,
    keys: BTreeMap<AggregateKey, KeyState>,
    log: Vec<LedgerOp>,
}

impl ReservationLedger {
    pub fn new(links: impl IntoIterator<Item = (LinkId, Kbps)>) -> Self {
        Self {
            capacity: links.into_iter().collect(),
            ..Default::default()
        }
    }

    pub fn capacity(&self, link: &LinkId) -> Result<Kbps, AdmissionError> {
        self.capacity
            .get(link)
            .copied()
            .ok_or_else(|| AdmissionError::UnknownLink(link.clone()))
    }

    pub fn manages(&self, link: &LinkId) -> bool {
        self.capacity.contains_key(link)
    }

    pub fn reserved_total(&self, link: &LinkId) -> Kbps {
        self.reserved
            .get(link)
            .map(|m| m.values().copied().sum())
            .unwrap_or_default()
    }

    /// `capacity - Σ reserved`, floored at zero.
    pub fn free_capacity(&self, link: &LinkId) -> Result<Kbps, AdmissionError> {
        Ok(self.capacity(link)?.saturating_sub(self.reserved_total(link)))
    }

    fn reserved_for(&self, link: &LinkId, key: &AggregateKey) -> Kbps {
        self.reserved
            .get(link)
            .and_then(|m| m.get(key))
            .copied()
            .unwrap_or_default()
    }

    /// All-or-nothing admission of `key` at absolute level `target` along
    /// `path`. A rejection leaves the ledger untouched.
    pub fn admit(
        &mut self,
        path: &[LinkId],
        key: &AggregateKey,
        target: Kbps,
        term: TermIndex,
    ) -> Result<AdmitOutcome, AdmissionError> {
        for l in path {
            self.capacity(l)?;
        }
        for l in path {
            let held = self.reserved_for(l, key);
            if target > held {
                let delta = target.0 - held.0;
                if delta > self.free_capacity(l)?.0 {
                    return Ok(AdmitOutcome::Rejected { bottleneck: l.clone() });
                }
            }
        }
        self.apply_admit(path, key, target, term);
        self.log.push(LedgerOp::Admit {
            key: key.clone(),
            path: path.to_vec(),
            target,
            term,
        });
        Ok(AdmitOutcome::Admitted)
    }

    fn apply_admit(&mut self, path: &[LinkId], key: &AggregateKey, target: Kbps, term: TermIndex) {
        let new_links: BTreeSet<&LinkId> = path.iter().collect();
        if let Some(old) = self.keys.get(key) {
            for l in old.path.iter().filter(|l| !new_links.contains(l)) {
                remove_entry(&mut self.reserved, l, key);
            }
        }
        for l in path {
            if target == Kbps::ZERO {
                remove_entry(&mut self.reserved, l, key);
            } else {
                self.reserved.entry(l.clone()).or_default().insert(key.clone(), target);
            }
        }
        if target == Kbps::ZERO {
            self.keys.remove(key);
        } else {
            self.keys.insert(
                key.clone(),
                KeyState {
                    path: path.to_vec(),
                    target,
                    last_refreshed_term: term,
                },
            );
        }
    }

    /// Drops every key not refreshed within the last `hold_terms` terms.
    pub fn release_stale(&mut self, current_term: TermIndex, hold_terms: u64) -> Vec<AggregateKey> {
        let stale: Vec<AggregateKey> = self
            .keys
            .iter()
            .filter(|(_, s)| s.last_refreshed_term.saturating_add(hold_terms) <= current_term)
            .map(|(k, _)| k.clone())
            .collect();
        for k in &stale {
            self.release(k);
        }
        stale
    }

    fn release(&mut self, key: &AggregateKey) {
        if let Some(state) = self.keys.remove(key) {
            for l in &state.path {
                remove_entry(&mut self.reserved, l, key);
            }
        }
        self.log.push(LedgerOp::Release { key: key.clone() });
    }

    /// Books `kbps` on `link` with no admission check. Test hook for
    /// exercising the safety checker.
    pub fn inject_fault(&mut self, link: &LinkId, kbps: Kbps) {
        *self
            .reserved
            .entry(link.clone())
            .or_default()
            .entry(AggregateKey::fault())
            .or_default() += kbps;
        self.log.push(LedgerOp::InjectFault { link: link.clone(), kbps });
    }

    pub fn reservations(&self) -> &Reservations {
        &self.reserved
    }

    pub fn keys(&self) -> &BTreeMap<AggregateKey, KeyState> {
        &self.keys
    }

    pub fn log(&self) -> &[LedgerOp] {
        &self.log
    }

    /// Links whose reservations exceed capacity.
    pub fn violations(&self) -> Vec<LedgerViolation> {
        self.capacity
            .iter()
            .filter_map(|(l, &cap)| {
                let r = self.reserved_total(l);
                (r > cap).then(|| LedgerViolation {
                    link: l.clone(),
                    reserved: r,
                    capacity: cap,
                })
            })
            .collect()
    }

    /// True when folding the decision log from scratch reproduces the ledger.
    pub fn matches_replay(&self) -> bool {
        replay(&self.log) == self.reserved
    }
}

fn remove_entry(reserved: &mut Reservations, link: &LinkId, key: &AggregateKey) {
    if let Some(m) = reserved.get_mut(link) {
        m.remove(key);
        if m.is_empty() {
            reserved.remove(link);
        }
    }
}

/// From-scratch fold over a decision log. Deliberately shares no code with
/// the incremental ledger.
pub fn replay(log: &[LedgerOp]) -> Reservations {
    let mut by_key: BTreeMap<AggregateKey, (Vec<LinkId>, Kbps)> = BTreeMap::new();
    let mut faults: BTreeMap<LinkId, Kbps> = BTreeMap::new();
    for op in log {
        match op {
            LedgerOp::Admit { key, path, target, .. } => {
                by_key.insert(key.clone(), (path.clone(), *target));
            }
            LedgerOp::Release { key } => {
                by_key.remove(key);
            }
            LedgerOp::InjectFault { link, kbps } => {
                *faults.entry(link.clone()).or_default() += *kbps;
            }
        }
    }
    let mut out = Reservations::new();
    for (key, (path, target)) in by_key {
        if target.0 == 0 {
            continue;
        }
        for l in path {
            out.entry(l).or_default().insert(key.clone(), target);
        }
    }
    for (l, k) in faults {
        out.entry(l).or_default().insert(AggregateKey::fault(), k);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterEntry {
    pub key: AggregateKey,
    pub admitted: Kbps,
    pub next_hop: Option<NextHop>,
}

/// Ingress-router configuration: admitted aggregates per border router.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterTable {
    pub routers: BTreeMap<RouterId, Vec<FilterEntry>>,
}

impl FilterTable {
    pub fn len(&self) -> usize {
        self.routers.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One line per entry: `router key kbps next_hop`.
    pub fn to_lines(&self) -> Vec<String> {
        self.routers
            .iter()
            .flat_map(|(r, es)| {
                es.iter().map(move |e| {
                    let nh = e.next_hop.as_ref().map_or("-".to_owned(), |n| n.to_string());
                    format!("{r} {} {} {nh}", e.key, e.admitted)
                })
            })
            .collect()
    }
}

/// Builds the filter table as a pure function of the ledger and current
/// routes.
pub fn build_filter_table(
    ledger: &ReservationLedger,
    routes: impl Fn(&DomainId, ServiceClass) -> Option<NextHop>,
) -> FilterTable {
    let mut t = FilterTable::default();
    for (key, state) in ledger.keys() {
        if state.target == Kbps::ZERO {
            continue;
        }
        t.routers.entry(key.ingress.clone()).or_default().push(FilterEntry {
            key: key.clone(),
            admitted: state.target,
            next_hop: routes(&key.dest, key.class),
        });
    }
    t
}
