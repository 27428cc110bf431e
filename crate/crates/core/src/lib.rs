//! Disaster messaging over partitioned networks.

pub mod dtnproto;
pub mod eventflow;
pub mod msgcore;
pub mod secstream;
pub mod simkit;

pub use dtnproto::{Action, IslandId, Role, TransferLog};
pub use msgcore::{Address, HardwareId, Message, MessageId, Position, Priority, Sensitivity, SimTime};
pub use simkit::{run, Metrics, RunOutput, Scenario, SimError};
