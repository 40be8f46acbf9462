use serde::{Deserialize, Serialize};

/// The two conditions every behavior option reports for one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BehaviorSignals {
    pub invocation: bool,
    pub commitment: bool,
}

impl BehaviorSignals {
    pub const NONE: BehaviorSignals = BehaviorSignals {
        invocation: false,
        commitment: false,
    };

    pub fn new(invocation: bool, commitment: bool) -> Self {
        Self {
            invocation,
            commitment,
        }
    }

    /// A behavior may only be selected (and commanded) while one of its
    /// conditions holds.
    pub fn selectable(&self) -> bool {
        self.invocation || self.commitment
    }

    /// Commitment is only meaningful for the active behavior.
    pub(crate) fn masked(self, active: bool) -> Self {
        Self {
            invocation: self.invocation,
            commitment: self.commitment && active,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Inactive,
    Active,
    /// Active in the previous tick and still reporting commitment.
    Committed,
}

impl Activation {
    pub fn is_active(self) -> bool {
        !matches!(self, Activation::Inactive)
    }
}

/// An internal failure inside a behavior block. Faults are contained at the
/// block: the engine records them and treats the block as inapplicable.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct BehaviorFault(pub String);

impl BehaviorFault {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}
