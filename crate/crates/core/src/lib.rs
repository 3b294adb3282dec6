//! Context-sensitive detection of surprising situations in process event logs.
//!
//! A log is cut into situations (case prefixes ending where the target feature
//! is observed), the situations are grouped into vicinities of similar
//! situations, per-vicinity outliers of the target are flagged, and the flagged
//! sets are ranked by surprisingness and effectiveness.

pub mod detection;
pub mod event_log;
pub mod features;
pub mod pipeline;
pub mod ranking;
pub mod synthetic;
pub mod vicinity;
