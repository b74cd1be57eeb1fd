//! System data: units, lines, loads, uncertainty bounds, bid curves and
//! DC shift factors.

mod bids;
mod case;
mod network;

pub use bids::{build_bid_curve, build_bids, PiecewiseBid, Segment, DEFAULT_SEGMENTS};
pub use case::{bus_loads, load_case, load_case_file, CaseError, Line, LoadModel, SystemCase, Unit};
pub use network::{compute_shift_factors, NetworkError, ShiftFactors};

/// Slack bus used throughout (0-based).
pub const SLACK_BUS: usize = 0;
