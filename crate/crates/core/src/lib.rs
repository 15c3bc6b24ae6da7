//! Repair of free-choice workflow nets against an event log.
//!
//! A free-choice net cannot express certain long-distance dependencies: a
//! choice made early may constrain which branch is taken later, and the
//! free-choice structure silently over-approximates the recorded behavior.
//! This crate detects such spurious choices by comparing the net's clusters
//! against the minimal deterministic automaton of the log, then synthesizes
//! additional places — regions of the log automaton — that restore the
//! dependency while preserving every recorded trace.
//!
//! The pipeline is exposed end-to-end by [`repair::repair`]; the individual
//! stages (log parsing, automaton construction, region synthesis, place
//! insertion, conformance measurement, random playout) are public modules.

pub mod conformance;
pub mod error;
pub mod event_log;
pub mod petri_net;
pub mod pnml;
pub mod region;
pub mod repair;
pub mod simulate;
pub mod transition_system;

pub use conformance::{precision, replay_fitness, ConformanceSummary};
pub use error::{Error, Result};
pub use event_log::{EventLabel, EventLog, Trace, TAU};
pub use petri_net::{Marking, NetBuilder, NetSystem, PetriNet, DEFAULT_MAX_STATES};
pub use pnml::{parse_pnml, serialize_pnml};
pub use region::{Crossing, EsspProblem, Region};
pub use repair::{repair, RepairOptions, RepairReport};
pub use simulate::simulate;
pub use transition_system::{minimal_ts, StateId, TransitionSystem};
