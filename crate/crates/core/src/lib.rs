//! Bandwidth-broker simulator for inter-domain DiffServ reservations.

pub mod admission;
pub mod broker;
pub mod demand;
pub mod fixtures;
pub mod generate;
pub mod propagation;
pub mod qos;
pub mod sim;
pub mod topology;
pub mod types;
pub mod wire;

pub use admission::{AggregateKey, AdmitOutcome, FilterTable, ReservationLedger};
pub use broker::{BrokerState, ProtocolConfig};
pub use demand::{AggregatedDs, DemandSpec, RejectionNotice};
pub use propagation::{AiDatabase, InterDomainMessage, MessageBody, MessageKind};
pub use qos::{compare_ai, compose, merge_costs, AiKey, AvailabilityInfo, Preference, TransitCost};
pub use topology::{NetworkTopology, TopologyBuilder, Violation};
pub use types::*;
