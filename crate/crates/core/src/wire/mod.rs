//! External formats: the XML message encoding and the line-oriented
//! topology, scenario and database files.

pub mod dbdump;
pub mod scenario_format;
pub mod text;
pub mod topo_format;
pub mod xml;

pub use dbdump::{parse_db, write_db, write_routes};
pub use scenario_format::{parse_scenario, parse_scenario_for, write_scenario};
pub use text::{ErrorKind, FormatError, FormatErrors};
pub use topo_format::{parse_topology, write_topology};
pub use xml::{decode_message, encode_message, format_loss, WireError};
