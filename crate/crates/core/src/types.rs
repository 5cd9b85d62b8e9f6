//! Identifiers and unit newtypes shared by every module.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// A transit or edge domain.
    DomainId
);
string_id!(
    /// The bandwidth broker managing one transit domain.
    BrokerId
);
string_id!(RouterId);
string_id!(
    /// One user demand specification instance.
    DemandId
);
string_id!(LinkId);

/// Bandwidth in kbit/s.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Kbps(pub u64);

impl Kbps {
    pub const ZERO: Kbps = Kbps(0);

    pub fn saturating_sub(self, other: Kbps) -> Kbps {
        Kbps(self.0.saturating_sub(other.0))
    }
}

impl std::ops::Add for Kbps {
    type Output = Kbps;
    fn add(self, rhs: Kbps) -> Kbps {
        Kbps(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for Kbps {
    fn add_assign(&mut self, rhs: Kbps) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for Kbps {
    fn sum<I: Iterator<Item = Kbps>>(iter: I) -> Kbps {
        Kbps(iter.map(|k| k.0).sum())
    }
}

impl fmt::Display for Kbps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A delay in integer microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Micros(pub u64);

impl std::ops::Add for Micros {
    type Output = Micros;
    fn add(self, rhs: Micros) -> Micros {
        Micros(self.0.saturating_add(rhs.0))
    }
}

impl fmt::Display for Micros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Simulated time in microseconds since the start of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const NEVER: SimTime = SimTime(u64::MAX);

    pub fn plus(self, micros: u64) -> SimTime {
        SimTime(self.0.saturating_add(micros))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Per-broker term counter.
pub type TermIndex = u64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueError {
    #[error("service class {0} outside 0..=63")]
    ClassOutOfRange(u32),
    #[error("loss probability {0} outside [0, 1]")]
    LossOutOfRange(f64),
}

/// A DiffServ behavior aggregate: one of the 64 code points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ServiceClass(u8);

impl ServiceClass {
    pub const MAX: u8 = 63;

    pub fn new(id: u32) -> Result<Self, ValueError> {
        if id <= Self::MAX as u32 {
            Ok(Self(id as u8))
        } else {
            Err(ValueError::ClassOutOfRange(id))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }
}

impl fmt::Display for ServiceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Packet loss probability in `[0, 1]`.
///
/// Ordered with `f64::total_cmp`; NaN is rejected at construction so the
/// order coincides with numeric order.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossProb(f64);

impl LossProb {
    pub const ZERO: LossProb = LossProb(0.0);

    pub fn new(p: f64) -> Result<Self, ValueError> {
        if (0.0..=1.0).contains(&p) {
            // normalise -0.0 so equality and hashing agree
            Ok(Self(p + 0.0))
        } else {
            Err(ValueError::LossOutOfRange(p))
        }
    }

    /// Clamps into range; NaN maps to certain loss.
    pub fn clamped(p: f64) -> Self {
        if p.is_nan() {
            Self(1.0)
        } else {
            Self(p.clamp(0.0, 1.0) + 0.0)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Loss over two segments traversed in sequence: `1 - (1-a)(1-b)`.
    pub fn chain(self, other: LossProb) -> LossProb {
        // keep zero an exact identity; 1 - (1 - p) is not p in floating point
        if self.0 == 0.0 {
            return other;
        }
        if other.0 == 0.0 {
            return self;
        }
        let p = 1.0 - (1.0 - self.0) * (1.0 - other.0);
        LossProb(p.clamp(0.0, 1.0) + 0.0)
    }
}

impl PartialEq for LossProb {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}

impl Eq for LossProb {}

impl std::hash::Hash for LossProb {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl PartialOrd for LossProb {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LossProb {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for LossProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bottleneck bandwidth of a segment; an empty segment is `Unbounded`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bottleneck {
    Limited(Kbps),
    Unbounded,
}

impl Bottleneck {
    pub fn min(self, other: Bottleneck) -> Bottleneck {
        std::cmp::min(self, other)
    }

    /// Caps a concrete bandwidth by this bottleneck.
    pub fn cap(self, bw: Kbps) -> Kbps {
        match self {
            Bottleneck::Limited(k) => k.min(bw),
            Bottleneck::Unbounded => bw,
        }
    }
}

impl fmt::Display for Bottleneck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bottleneck::Limited(k) => write!(f, "{k}"),
            Bottleneck::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// Where a broker forwards traffic for a destination.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NextHop {
    /// The destination edge domain is attached to this broker's domain.
    Local,
    Broker(BrokerId),
}

impl fmt::Display for NextHop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NextHop::Local => f.write_str("local"),
            NextHop::Broker(b) => write!(f, "{b}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_bounds() {
        assert!(ServiceClass::new(0).is_ok());
        assert_eq!(ServiceClass::new(63).unwrap().id(), 63);
        assert_eq!(ServiceClass::new(64), Err(ValueError::ClassOutOfRange(64)));
    }

    #[test]
    fn loss_bounds_and_chain() {
        assert!(LossProb::new(-0.1).is_err());
        assert!(LossProb::new(1.5).is_err());
        assert!(LossProb::new(f64::NAN).is_err());
        let a = LossProb::new(0.01).unwrap();
        let b = LossProb::new(0.01).unwrap();
        assert!((a.chain(b).value() - 0.0199).abs() < 1e-15);
        assert_eq!(LossProb::new(-0.0).unwrap(), LossProb::ZERO);
    }

    #[test]
    fn bottleneck_order() {
        let l = Bottleneck::Limited(Kbps(5));
        assert_eq!(l.min(Bottleneck::Unbounded), l);
        assert_eq!(Bottleneck::Unbounded.cap(Kbps(7)), Kbps(7));
        assert_eq!(l.cap(Kbps(7)), Kbps(5));
    }
}
