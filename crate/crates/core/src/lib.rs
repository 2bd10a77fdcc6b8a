//! Reception policies for ARQ links whose receiver runs on harvested energy.
//!
//! The receiver decides each slot whether to sample (and decode) the packet
//! and whether to send an ACK. Three ARQ variants are modelled: no feedback,
//! mandatory (non-adaptive) feedback, and adaptive feedback where ACKs may be
//! delayed or dropped. The crate provides the Markov model ([`model`]),
//! policy evaluation ([`chain`]), optimal policy computation ([`opt`]), a
//! trajectory simulator ([`sim`]) and the acceptance checks ([`acceptance`]).

pub mod acceptance;
pub mod chain;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod opt;
pub mod policy;
pub mod sim;

pub use chain::{evaluate_policy, PerformancePoint};
pub use model::{Action, EnergyQuanta, LinkConfig, LinkParameters, Protocol, SystemState};
pub use opt::{SolveReport, SolveStatus};
pub use policy::Policy;
