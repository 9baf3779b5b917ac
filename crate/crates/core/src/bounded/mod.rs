//! Bounded conditioning: anytime posterior intervals refined one cutset
//! instance at a time, including evidence that arrives before the previous
//! update has finished.

mod ledger;
mod session;

use thiserror::Error;

use crate::conditioning::ConditioningError;
use crate::cutset::CutsetError;
use crate::network::VarId;
use crate::polytree::PolytreeError;

pub use ledger::{
    posterior_bounds, weight_bounds, InstanceLedger, InstanceStatus, Interval, LedgerEntry,
    WeightInterval, WeightMode,
};
pub use session::{
    begin_session, BoundSnapshot, PendingOrder, Session, SessionOptions, StopCriteria, StopReason,
    TraceRecord,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundedError {
    #[error(transparent)]
    Cutset(#[from] CutsetError),
    #[error(transparent)]
    Polytree(#[from] PolytreeError),
    #[error(transparent)]
    Conditioning(#[from] ConditioningError),
    #[error("nothing pending: bounds are as tight as they can get")]
    NothingPending,
    #[error("evidence has probability zero")]
    ImpossibleEvidence,
    #[error("invalid evidence on variable {0}")]
    InvalidEvidence(VarId),
    #[error("known weights require a completely solved state")]
    NotComplete,
    #[error("expected {expected} weights, got {found}")]
    WeightCount { expected: usize, found: usize },
}
