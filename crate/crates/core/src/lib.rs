//! Hierarchical behavior-based arbitration.
//!
//! Behavior blocks report an invocation condition (applicable now) and a
//! commitment condition (should be continued), and generate a command when
//! selected. Arbitrators pick among their options by priority, fixed
//! sequence, weighted randomness or lowest expected cost, and are themselves
//! options of higher arbitrators. [`ArbitrationGraph::step`] runs one tick
//! and returns the selected command together with a [`SelectionTrace`] of
//! every node.

mod behavior;
mod fn_behavior;
mod graph;
pub mod select;
mod signals;
mod trace;

pub use behavior::Behavior;
pub use fn_behavior::FnBehavior;
pub use graph::{
    ArbitrationGraph, ArbitratorSpec, BehaviorOption, EvalMode, GraphError, Node, NodeInfo,
    StepError,
};
pub use select::OptionView;
pub use signals::{Activation, BehaviorFault, BehaviorSignals};
pub use trace::{NodeKind, NodeRecord, Scheme, SelectionTrace};
