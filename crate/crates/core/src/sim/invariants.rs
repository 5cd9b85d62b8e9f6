//! Run-time invariant checks over all broker states.

use std::fmt;

use crate::admission::build_filter_table;
use crate::broker::BrokerState;
use crate::propagation::StoredAi;
use crate::types::{BrokerId, NextHop};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub broker: BrokerId,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.broker, self.message)
    }
}

/// How much to check. Ledger replay and filter-table regeneration are only
/// meaningful at term boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckDepth {
    Event,
    TermBoundary,
}

pub fn check_broker(b: &BrokerState, depth: CheckDepth) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |message: String| {
        out.push(Violation {
            broker: b.id().clone(),
            message,
        })
    };
    for (k, s) in b.database().iter() {
        let StoredAi { ai, learned_from, stored_at } = s;
        if &ai.key() != k {
            bad(format!("database entry {}/{} filed under {}/{}", ai.edge, ai.class, k.edge, k.class));
        }
        if learned_from != &NextHop::Local && ai.valid_until <= *stored_at {
            bad(format!("entry {}/{} stored already expired", k.edge, k.class));
        }
    }
    for v in b.ledger().violations() {
        bad(v.to_string());
    }
    for f in b.check_failures() {
        bad(f.clone());
    }
    if depth == CheckDepth::TermBoundary {
        if !b.ledger().matches_replay() {
            bad("ledger differs from replay of its decision log".into());
        }
        let db = b.database();
        let regenerated = build_filter_table(b.ledger(), |d, c| db.next_hop(d, c));
        if &regenerated != b.filter_table() {
            bad("filter table differs from one regenerated from the ledger".into());
        }
    }
    out
}

pub fn assert_invariants<'a>(brokers: impl IntoIterator<Item = &'a BrokerState>, depth: CheckDepth) -> Vec<Violation> {
    brokers.into_iter().flat_map(|b| check_broker(b, depth)).collect()
}
