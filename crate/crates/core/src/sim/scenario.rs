//! Run configuration: timing, demand program and scripted actions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::topology::{DomainKind, NetworkTopology};
use crate::types::{BrokerId, DomainId, Kbps, LinkId, ServiceClass, SimTime, TermIndex};

/// A user demand restated every term while active.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandStream {
    pub name: String,
    pub src: DomainId,
    pub dest: DomainId,
    pub class: ServiceClass,
    pub bandwidth: Kbps,
    /// Active for source-broker terms `from_term..until_term`.
    pub from_term: TermIndex,
    pub until_term: Option<TermIndex>,
}

impl DemandStream {
    pub fn active_in(&self, term: TermIndex) -> bool {
        term >= self.from_term && self.until_term.is_none_or(|u| term < u)
    }
}

/// Streams drawn from the run seed when the run starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomDemands {
    pub count: usize,
    pub min_kbps: u64,
    pub max_kbps: u64,
    /// Last term in which a random stream may start; each stream lasts a
    /// random number of terms up to this as well.
    pub within_terms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// Bring up a broker that was absent from the start of the run.
    Join(BrokerId),
    /// Stop the broker's periodic refresh of its own AIs.
    Blackout(BrokerId),
    /// Change a stream's bandwidth (0 silences it).
    SetDemand { stream: String, bandwidth: Kbps },
    /// Books capacity on a link with no admission check.
    FaultOverReserve { broker: BrokerId, link: LinkId, kbps: Kbps },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Join(b) => write!(f, "join {b}"),
            Action::Blackout(b) => write!(f, "blackout {b}"),
            Action::SetDemand { stream, bandwidth } => write!(f, "demand {stream} {bandwidth}"),
            Action::FaultOverReserve { broker, link, kbps } => {
                write!(f, "fault over-reserve {broker} {link} {kbps}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedAction {
    pub at: SimTime,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    /// Term length in microseconds.
    pub term_length: u64,
    /// Default one-way broker-to-broker latency; `None` means a tenth of a
    /// term.
    pub latency: Option<u64>,
    /// Per-pair latency overrides, keyed by the ordered pair.
    pub pair_latency: BTreeMap<(BrokerId, BrokerId), u64>,
    /// `None` disables periodic refresh.
    pub refresh_interval: Option<u64>,
    /// `None` means three refresh intervals, or no expiry without refresh.
    pub validity_window: Option<u64>,
    pub hold_terms: u64,
    /// Run the per-term demand cycle.
    pub demand_cycle: bool,
    /// Explicit term phase offsets; brokers not listed draw one from the seed.
    pub phase_offsets: BTreeMap<BrokerId, u64>,
    pub demands: Vec<DemandStream>,
    pub random_demands: Option<RandomDemands>,
    pub actions: Vec<TimedAction>,
}

pub const DEFAULT_TERM_LENGTH: u64 = 1_000_000;

impl Default for Scenario {
    fn default() -> Self {
        Self {
            term_length: DEFAULT_TERM_LENGTH,
            latency: None,
            pair_latency: BTreeMap::new(),
            refresh_interval: Some(DEFAULT_TERM_LENGTH),
            validity_window: None,
            hold_terms: 2,
            demand_cycle: true,
            phase_offsets: BTreeMap::new(),
            demands: Vec::new(),
            random_demands: None,
            actions: Vec::new(),
        }
    }
}

impl Scenario {
    /// AI propagation only: no demand cycle, no refresh, no expiry.
    pub fn propagation_only() -> Self {
        Self {
            refresh_interval: None,
            demand_cycle: false,
            ..Self::default()
        }
    }

    pub fn default_latency(&self) -> u64 {
        self.latency.unwrap_or(self.term_length / 10)
    }

    pub fn latency_between(&self, a: &BrokerId, b: &BrokerId) -> u64 {
        let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        self.pair_latency
            .get(&key)
            .copied()
            .unwrap_or_else(|| self.default_latency())
    }

    pub fn set_pair_latency(&mut self, a: &BrokerId, b: &BrokerId, us: u64) {
        let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        self.pair_latency.insert(key, us);
    }

    pub fn effective_validity(&self) -> u64 {
        match (self.validity_window, self.refresh_interval) {
            (Some(w), _) => w,
            (None, Some(r)) => r.saturating_mul(3),
            (None, None) => u64::MAX,
        }
    }

    /// Brokers brought up by a `Join` action instead of at time zero.
    pub fn late_joiners(&self) -> BTreeSet<BrokerId> {
        self.actions
            .iter()
            .filter_map(|a| match &a.action {
                Action::Join(b) => Some(b.clone()),
                _ => None,
            })
            .collect()
    }

    /// Every reference checked against the topology.
    pub fn validate(&self, topo: &NetworkTopology) -> Vec<ScenarioError> {
        let mut errs = Vec::new();
        if self.term_length < 2 {
            errs.push(ScenarioError::Config("term_length must be at least 2 us".into()));
        }
        if self.refresh_interval == Some(0) {
            errs.push(ScenarioError::Config("refresh_interval must be positive".into()));
        }
        for (b, off) in &self.phase_offsets {
            if topo.broker(b).is_none() {
                errs.push(ScenarioError::Config(format!("phase offset for unknown broker {b}")));
            }
            if *off >= self.term_length {
                errs.push(ScenarioError::Config(format!("phase offset {off} of {b} not below term length")));
            }
        }
        for (a, b) in self.pair_latency.keys() {
            for x in [a, b] {
                if topo.broker(x).is_none() {
                    errs.push(ScenarioError::Config(format!("latency for unknown broker {x}")));
                }
            }
        }
        let is_edge = |d: &DomainId| topo.domain(d).map(|d| d.kind) == Some(DomainKind::Edge);
        let mut names = BTreeSet::new();
        for s in &self.demands {
            if !names.insert(&s.name) {
                errs.push(ScenarioError::Demand {
                    stream: s.name.clone(),
                    message: "duplicate stream name".into(),
                });
            }
            for d in [&s.src, &s.dest] {
                if !is_edge(d) {
                    errs.push(ScenarioError::Demand {
                        stream: s.name.clone(),
                        message: format!("{d} is not an edge domain"),
                    });
                }
            }
            if s.src == s.dest {
                errs.push(ScenarioError::Demand {
                    stream: s.name.clone(),
                    message: "source equals destination".into(),
                });
            }
        }
        let mut joins = BTreeSet::new();
        for (i, a) in self.actions.iter().enumerate() {
            let bad = |message: String| ScenarioError::Action {
                index: i,
                action: a.action.to_string(),
                message,
            };
            match &a.action {
                Action::Join(b) | Action::Blackout(b) => {
                    if topo.broker(b).is_none() {
                        errs.push(bad(format!("unknown broker {b}")));
                    }
                    if matches!(a.action, Action::Join(_)) && !joins.insert(b.clone()) {
                        errs.push(bad(format!("{b} joins twice")));
                    }
                }
                Action::SetDemand { stream, .. } => {
                    if !self.demands.iter().any(|s| &s.name == stream) {
                        errs.push(bad(format!("unknown stream {stream}")));
                    }
                }
                Action::FaultOverReserve { broker, link, .. } => match topo.broker(broker) {
                    None => errs.push(bad(format!("unknown broker {broker}"))),
                    Some(br) => {
                        let touches = topo.link(link).is_some_and(|l| {
                            [&l.endpoints.0, &l.endpoints.1]
                                .iter()
                                .any(|r| topo.domain_of_router(r) == Some(&br.domain))
                        });
                        if !touches {
                            errs.push(bad(format!("link {link} is not managed by {broker}")));
                        }
                    }
                },
            }
        }
        errs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("{0}")]
    Config(String),
    #[error("stream {stream}: {message}")]
    Demand { stream: String, message: String },
    #[error("action #{index} ({action}): {message}")]
    Action {
        index: usize,
        action: String,
        message: String,
    },
}
