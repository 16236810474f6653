//! Trace-based property checking for a small stack VM.
//!
//! A transaction runs on the [`vm`]; the [`tracer`] records its semantic
//! steps into a [`trace::Trace`] and, at every `HOOK` instruction, checks
//! the bound [`pltl`] properties against the trace so far. A violation
//! reverts the whole transaction.

pub mod detectors;
pub mod pltl;
pub mod scenario;
pub mod trace;
pub mod tracer;
pub mod vm;

pub use pltl::{parse_formula, parse_properties, pretty, Formula, PropertySet, Verdict};
pub use scenario::{load_scenario, Scenario, ScenarioError};
pub use trace::{Address, CallStackEntry, EventKind, Selector, StepKind, StepPayload, Trace, TraceStep, Word};
pub use tracer::{export_trace, import_trace, PropertyBinding, Registry, Tracer};
pub use vm::{execute_transaction, Receipt, Transaction, TxStatus, World};
