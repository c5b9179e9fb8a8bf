//! EDCA contention and the three uplink exchanges: RTS/CTS single user,
//! STA-initiated MU TXOP sharing, and AP trigger-based uplink.

mod edcaf;
mod nav;
mod sim;
mod traffic;

pub use edcaf::{edcaf_step, handle_retry, Edcaf, EdcafState, Packet, RetryOutcome, StepAction};
pub use nav::{nav_update, NavState};
pub use sim::{run_simulation, sub_seed, SimOutcome};
pub use traffic::generate_arrivals;
