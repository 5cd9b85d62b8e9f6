//! Availability records, transit costs, and the ranking/composition algebra
//! that AI propagation folds over.
//!
//! Ranking is lexicographic on
//! `(avg_delay asc, max_delay asc, loss asc, jitter asc, bandwidth desc, origin asc)`.
//! Every ranked field composes monotonically (addition, `min`, survival
//! product), so composition is isotone: it never turns a better record into a
//! strictly worse one. Distributed best-record propagation relies on that.

use std::cmp::Ordering;

use thiserror::Error;

use crate::topology::Link;
use crate::types::{Bottleneck, BrokerId, DomainId, Kbps, LossProb, Micros, ServiceClass, SimTime};

/// Database key of an availability record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AiKey {
    pub edge: DomainId,
    pub class: ServiceClass,
}

impl AiKey {
    pub fn new(edge: DomainId, class: ServiceClass) -> Self {
        Self { edge, class }
    }
}

/// Reachability and QoS of one edge domain in one service class, as seen
/// from the point where the holder received it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AvailabilityInfo {
    pub edge: DomainId,
    pub class: ServiceClass,
    pub bandwidth: Kbps,
    pub avg_delay: Micros,
    pub max_delay: Micros,
    pub jitter: Micros,
    pub loss: LossProb,
    pub origin: BrokerId,
    pub valid_until: SimTime,
}

impl AvailabilityInfo {
    pub fn key(&self) -> AiKey {
        AiKey::new(self.edge.clone(), self.class)
    }

    /// True when every ranked parameter matches; `valid_until` is ignored.
    pub fn same_parameters(&self, other: &AvailabilityInfo) -> bool {
        self.edge == other.edge
            && self.class == other.class
            && self.bandwidth == other.bandwidth
            && self.avg_delay == other.avg_delay
            && self.max_delay == other.max_delay
            && self.jitter == other.jitter
            && self.loss == other.loss
            && self.origin == other.origin
    }

    pub fn is_well_formed(&self) -> bool {
        self.avg_delay <= self.max_delay
    }
}

/// QoS cost of traversing a segment (a path of links, or a whole route).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransitCost {
    pub avg_delay: Micros,
    pub max_delay: Micros,
    pub jitter: Micros,
    pub bottleneck: Bottleneck,
    pub loss: LossProb,
}

impl TransitCost {
    pub const IDENTITY: TransitCost = TransitCost {
        avg_delay: Micros(0),
        max_delay: Micros(0),
        jitter: Micros(0),
        bottleneck: Bottleneck::Unbounded,
        loss: LossProb::ZERO,
    };

    pub fn from_link(link: &Link) -> TransitCost {
        Self::from_link_with_bandwidth(link, link.capacity)
    }

    /// Link cost with the bottleneck replaced by `available` (e.g. the
    /// unreserved share of the link).
    pub fn from_link_with_bandwidth(link: &Link, available: Kbps) -> TransitCost {
        TransitCost {
            avg_delay: link.avg_delay,
            max_delay: link.max_delay,
            jitter: link.jitter,
            bottleneck: Bottleneck::Limited(available),
            loss: LossProb::clamped(link.loss),
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

impl Default for TransitCost {
    fn default() -> Self {
        Self::IDENTITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preference {
    Better,
    Equal,
    Worse,
}

impl Preference {
    fn from_ordering(o: Ordering) -> Self {
        match o {
            Ordering::Less => Preference::Better,
            Ordering::Equal => Preference::Equal,
            Ordering::Greater => Preference::Worse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot rank {a_edge}/{a_class} against {b_edge}/{b_class}")]
pub struct MismatchedKey {
    pub a_edge: DomainId,
    pub a_class: ServiceClass,
    pub b_edge: DomainId,
    pub b_class: ServiceClass,
}

/// Ranks `a` against `b`: `Better` means `a` is preferred.
pub fn compare_ai(a: &AvailabilityInfo, b: &AvailabilityInfo) -> Result<Preference, MismatchedKey> {
    if a.edge != b.edge || a.class != b.class {
        return Err(MismatchedKey {
            a_edge: a.edge.clone(),
            a_class: a.class,
            b_edge: b.edge.clone(),
            b_class: b.class,
        });
    }
    Ok(Preference::from_ordering(rank(a, b)))
}

/// Ranking order without the key check. `Less` is better.
pub(crate) fn rank(a: &AvailabilityInfo, b: &AvailabilityInfo) -> Ordering {
    a.avg_delay
        .cmp(&b.avg_delay)
        .then(a.max_delay.cmp(&b.max_delay))
        .then(a.loss.cmp(&b.loss))
        .then(a.jitter.cmp(&b.jitter))
        .then(b.bandwidth.cmp(&a.bandwidth))
        .then(a.origin.cmp(&b.origin))
}

/// Prepends segment `t` to the route described by `ai`.
pub fn compose(t: &TransitCost, ai: &AvailabilityInfo) -> AvailabilityInfo {
    AvailabilityInfo {
        edge: ai.edge.clone(),
        class: ai.class,
        bandwidth: t.bottleneck.cap(ai.bandwidth),
        avg_delay: t.avg_delay + ai.avg_delay,
        max_delay: t.max_delay + ai.max_delay,
        jitter: t.jitter + ai.jitter,
        loss: t.loss.chain(ai.loss),
        origin: ai.origin.clone(),
        valid_until: ai.valid_until,
    }
}

/// Sequential concatenation of two segments (a monoid with
/// [`TransitCost::IDENTITY`]).
pub fn merge_costs(t1: &TransitCost, t2: &TransitCost) -> TransitCost {
    TransitCost {
        avg_delay: t1.avg_delay + t2.avg_delay,
        max_delay: t1.max_delay + t2.max_delay,
        jitter: t1.jitter + t2.jitter,
        bottleneck: t1.bottleneck.min(t2.bottleneck),
        loss: t1.loss.chain(t2.loss),
    }
}

pub fn merge_all<'a>(costs: impl IntoIterator<Item = &'a TransitCost>) -> TransitCost {
    costs
        .into_iter()
        .fold(TransitCost::IDENTITY, |acc, c| merge_costs(&acc, c))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub fn ai(avg: u64, max: u64, jitter: u64, bw: u64, loss: f64) -> AvailabilityInfo {
        AvailabilityInfo {
            edge: DomainId::from("e1"),
            class: ServiceClass::new(0).unwrap(),
            bandwidth: Kbps(bw),
            avg_delay: Micros(avg),
            max_delay: Micros(max),
            jitter: Micros(jitter),
            loss: LossProb::new(loss).unwrap(),
            origin: BrokerId::from("B0"),
            valid_until: SimTime(1_000),
        }
    }

    fn cost(avg: u64, max: u64, jitter: u64, bw: Option<u64>, loss: f64) -> TransitCost {
        TransitCost {
            avg_delay: Micros(avg),
            max_delay: Micros(max),
            jitter: Micros(jitter),
            bottleneck: bw.map_or(Bottleneck::Unbounded, |k| Bottleneck::Limited(Kbps(k))),
            loss: LossProb::new(loss).unwrap(),
        }
    }

    #[test]
    fn identical_records_are_equal() {
        let a = ai(10_000, 20_000, 0, 100_000, 0.01);
        assert_eq!(compare_ai(&a, &a.clone()).unwrap(), Preference::Equal);
    }

    #[test]
    fn lower_avg_delay_wins() {
        let a = ai(10_000, 30_000, 0, 100_000, 0.0);
        let b = ai(20_000, 30_000, 0, 100_000, 0.0);
        assert_eq!(compare_ai(&a, &b).unwrap(), Preference::Better);
        assert_eq!(compare_ai(&b, &a).unwrap(), Preference::Worse);
    }

    #[test]
    fn higher_bandwidth_breaks_ties() {
        let a = ai(10_000, 30_000, 5, 100_000, 0.01);
        let b = ai(10_000, 30_000, 5, 50_000, 0.01);
        assert_eq!(compare_ai(&a, &b).unwrap(), Preference::Better);
    }

    #[test]
    fn mismatched_keys_rejected() {
        let a = ai(1, 1, 0, 1, 0.0);
        let mut b = a.clone();
        b.edge = DomainId::from("e2");
        assert!(compare_ai(&a, &b).is_err());
        let mut c = a.clone();
        c.class = ServiceClass::new(5).unwrap();
        assert!(compare_ai(&a, &c).is_err());
    }

    #[test]
    fn identity_compose_is_noop() {
        let a = ai(10_000, 20_000, 2_000, 100_000, 0.01);
        assert_eq!(compose(&TransitCost::IDENTITY, &a), a);
    }

    #[test]
    fn compose_direct_evaluation() {
        let t = cost(5_000, 8_000, 1_000, Some(50_000), 0.02);
        let a = ai(10_000, 20_000, 2_000, 100_000, 0.01);
        let c = compose(&t, &a);
        assert_eq!(c.avg_delay, Micros(15_000));
        assert_eq!(c.max_delay, Micros(28_000));
        assert_eq!(c.jitter, Micros(3_000));
        assert_eq!(c.bandwidth, Kbps(50_000));
        assert!((c.loss.value() - 0.0298).abs() < 1e-15);
        assert_eq!(c.valid_until, a.valid_until);
        assert_eq!(c.edge, a.edge);
    }

    #[test]
    fn merge_identity_and_doubling() {
        let t = cost(5_000, 6_000, 100, Some(7), 0.01);
        assert_eq!(merge_costs(&TransitCost::IDENTITY, &t), t);
        assert_eq!(merge_costs(&t, &TransitCost::IDENTITY), t);
        let d = merge_costs(&t, &t);
        assert_eq!(d.avg_delay, Micros(10_000));
        assert_eq!(d.max_delay, Micros(12_000));
        assert!((d.loss.value() - 0.0199).abs() < 1e-15);
    }

    /// Independent per-hop evaluation of a route: delays summed, bandwidth
    /// minimised, survival probabilities multiplied, all in plain numbers.
    fn per_hop_oracle(costs: &[TransitCost], a: &AvailabilityInfo) -> (u64, u64, u64, u64, f64) {
        let mut avg = a.avg_delay.0;
        let mut max = a.max_delay.0;
        let mut jit = a.jitter.0;
        let mut bw = a.bandwidth.0;
        let mut survive = 1.0 - a.loss.value();
        for c in costs {
            avg += c.avg_delay.0;
            max += c.max_delay.0;
            jit += c.jitter.0;
            if let Bottleneck::Limited(k) = c.bottleneck {
                bw = bw.min(k.0);
            }
            survive *= 1.0 - c.loss.value();
        }
        (avg, max, jit, bw, 1.0 - survive)
    }

    fn arb_cost() -> impl Strategy<Value = TransitCost> {
        (0u64..50_000, 0u64..10_000, 0u64..5_000, prop::option::of(0u64..1_000_000), 0u32..2_000)
            .prop_map(|(avg, extra, jit, bw, loss)| {
                cost(avg, avg + extra, jit, bw, loss as f64 / 100_000.0)
            })
    }

    fn arb_ai() -> impl Strategy<Value = AvailabilityInfo> {
        (0u64..20, 0u64..20, 0u64..4, 0u64..4, 0u32..3, 0u32..3).prop_map(
            |(avg, extra, jit, bw, loss, origin)| {
                let mut a = ai(avg, avg + extra, jit, bw, loss as f64 / 100.0);
                a.origin = BrokerId::new(format!("B{origin}"));
                a
            },
        )
    }

    proptest! {
        #[test]
        fn chained_composition_matches_per_hop(costs in prop::collection::vec(arb_cost(), 0..6)) {
            let a = ai(1_000, 2_000, 10, 900_000, 0.001);
            let chained = costs.iter().rev().fold(a.clone(), |acc, c| compose(c, &acc));
            let merged = compose(&merge_all(costs.iter()), &a);
            let (avg, max, jit, bw, loss) = per_hop_oracle(&costs, &a);
            for r in [&chained, &merged] {
                prop_assert_eq!(r.avg_delay.0, avg);
                prop_assert_eq!(r.max_delay.0, max);
                prop_assert_eq!(r.jitter.0, jit);
                prop_assert_eq!(r.bandwidth.0, bw);
                prop_assert!((r.loss.value() - loss).abs() < 1e-12);
            }
        }

        #[test]
        fn merge_is_associative(a in arb_cost(), b in arb_cost(), c in arb_cost()) {
            let l = merge_costs(&merge_costs(&a, &b), &c);
            let r = merge_costs(&a, &merge_costs(&b, &c));
            prop_assert_eq!(l.avg_delay, r.avg_delay);
            prop_assert_eq!(l.max_delay, r.max_delay);
            prop_assert_eq!(l.jitter, r.jitter);
            prop_assert_eq!(l.bottleneck, r.bottleneck);
            prop_assert!((l.loss.value() - r.loss.value()).abs() < 1e-15);
        }

        #[test]
        fn total_order_laws(a in arb_ai(), b in arb_ai(), c in arb_ai()) {
            let ab = compare_ai(&a, &b).unwrap();
            let ba = compare_ai(&b, &a).unwrap();
            // antisymmetry
            match ab {
                Preference::Better => prop_assert_eq!(ba, Preference::Worse),
                Preference::Worse => prop_assert_eq!(ba, Preference::Better),
                Preference::Equal => {
                    prop_assert_eq!(ba, Preference::Equal);
                    prop_assert!(a.same_parameters(&b));
                }
            }
            // transitivity
            let bc = compare_ai(&b, &c).unwrap();
            if ab != Preference::Worse && bc != Preference::Worse {
                prop_assert_ne!(compare_ai(&a, &c).unwrap(), Preference::Worse);
            }
        }

        #[test]
        fn compose_is_isotone_and_monotone(a in arb_ai(), b in arb_ai(), t in arb_cost()) {
            let ca = compose(&t, &a);
            let cb = compose(&t, &b);
            if compare_ai(&a, &b).unwrap() == Preference::Better {
                prop_assert_ne!(compare_ai(&ca, &cb).unwrap(), Preference::Worse);
            }
            prop_assert!(ca.avg_delay >= a.avg_delay);
            prop_assert!(ca.max_delay >= a.max_delay);
            prop_assert!(ca.jitter >= a.jitter);
            prop_assert!(ca.loss >= a.loss);
            prop_assert!(ca.bandwidth <= a.bandwidth);
        }
    }

    #[test]
    fn fold_is_independent_of_parenthesization() {
        // every binary bracketing of a 5-element product, enumerated
        fn all_bracketings(xs: &[TransitCost]) -> Vec<TransitCost> {
            if xs.len() == 1 {
                return vec![xs[0]];
            }
            let mut out = Vec::new();
            for split in 1..xs.len() {
                for l in all_bracketings(&xs[..split]) {
                    for r in all_bracketings(&xs[split..]) {
                        out.push(merge_costs(&l, &r));
                    }
                }
            }
            out
        }
        let xs = [
            cost(100, 150, 3, Some(90_000), 0.001),
            cost(2_000, 2_500, 0, None, 0.0),
            cost(7, 9, 1, Some(40_000), 0.02),
            cost(0, 0, 0, Some(120_000), 0.005),
            cost(333, 400, 20, Some(60_000), 0.0003),
        ];
        let all = all_bracketings(&xs);
        assert_eq!(all.len(), 14); // Catalan(4)
        let first = all[0];
        for c in &all {
            assert_eq!(c.avg_delay, Micros(2_440));
            assert_eq!(c.max_delay, Micros(3_059));
            assert_eq!(c.jitter, Micros(24));
            assert_eq!(c.bottleneck, Bottleneck::Limited(Kbps(40_000)));
            assert!((c.loss.value() - first.loss.value()).abs() < 1e-15);
        }
    }
}
