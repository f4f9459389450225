//! Passive automata learning by red-blue state merging over IO frequency
//! automata.
//!
//! Data is parsed into a [`TraceSet`], turned into a prefix tree and
//! generalised by [`StateMerging`] under a pluggable [`MergeStrategy`].
//! The result is extracted into one of the typed automaton families.

pub mod automata;
pub mod engine;
pub mod error;
pub mod extraction;
pub mod ingestion;
pub mod presets;
pub mod sampling;
pub mod scoring;

pub use automata::{
    BehaviorConfig, Model, OutputBehavior, StateId, StateLookup, Symbol, TransitionBehavior, TransitionInfo, TreeState,
};
pub use engine::{
    apply_merge, check_futures, compute_blue, try_merge, EngineConfig, Evaluation, EventLog, Instrumentation,
    MergeStrategy, NodeOrder, Partition, RunStats, Score, StateMerging,
};
pub use error::{Error, Result};
pub use extraction::{to_automaton, to_dot, Family, FamilyOverride, LearnedModel, StyleOptions};
pub use ingestion::{build_pta, parse_traces, TraceKind, TraceSet};
pub use presets::{Algorithm, Flags, Learner, Parameters};
