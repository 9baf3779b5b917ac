//! Discrete belief networks with exact and bounded conditioning.
//!
//! Networks are built from a [`NetworkDescription`] and checked by
//! [`validate`]. Singly connected networks are solved directly by
//! [`polytree`] propagation. Multiply connected ones are split on a
//! [`Cutset`] and either solved exactly ([`Conditioning`]) or refined one
//! instance at a time with sound posterior intervals ([`bounded::Session`]).
//!
//! The crate is `no_std` with `alloc` when the default `std` feature is off.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod bounded;
pub mod concurrent;
pub mod conditioning;
pub mod convergence;
pub mod cutset;
pub mod fixtures;
pub mod generate;
mod math;
pub mod network;
pub mod oracle;
pub mod polytree;

pub use bounded::{begin_session, BoundSnapshot, BoundedError, Interval, Session, SessionOptions};
pub use conditioning::{Conditioning, ConditioningError};
pub use cutset::{find_loop_cutset, Cutset, CutsetError};
pub use math::NeumaierSum;
pub use network::{
    validate, BeliefNetwork, Evidence, EvidenceStream, Issue, NetworkDescription, TableDescription,
    ValidationReport, VarId, Variable,
};
