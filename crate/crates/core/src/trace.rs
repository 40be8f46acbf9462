use serde::{Deserialize, Serialize};

use crate::signals::{Activation, BehaviorSignals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Block,
    Arbitrator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Priority,
    Sequence,
    Random,
    Cost,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Priority => "priority",
            Scheme::Sequence => "sequence",
            Scheme::Random => "random",
            Scheme::Cost => "cost",
        }
    }
}

/// State of one node at selection time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    pub kind: NodeKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scheme: Option<Scheme>,
    pub signals: BehaviorSignals,
    pub activation: Activation,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fault: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub children: Vec<NodeRecord>,
}

impl NodeRecord {
    /// Pre-order walk over this node and all descendants.
    pub fn iter(&self) -> impl Iterator<Item = &NodeRecord> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }
}

/// Per-tick record of every node's signals, costs and the chosen branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub time: f64,
    pub root: NodeRecord,
    pub active_path: Vec<String>,
}

impl SelectionTrace {
    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.root.iter()
    }

    pub fn node(&self, id: &str) -> Option<&NodeRecord> {
        self.nodes().find(|n| n.id == id)
    }

    pub fn active_leaf(&self) -> Option<&str> {
        self.active_path.last().map(String::as_str)
    }

    pub fn faults(&self) -> impl Iterator<Item = (&str, &str)> {
        self.nodes()
            .filter_map(|n| n.fault.as_deref().map(|f| (n.id.as_str(), f)))
    }

    /// Same trace with fault annotations removed, for differential checks.
    pub fn without_faults(&self) -> SelectionTrace {
        fn strip(n: &NodeRecord) -> NodeRecord {
            NodeRecord {
                fault: None,
                children: n.children.iter().map(strip).collect(),
                ..n.clone()
            }
        }
        SelectionTrace {
            time: self.time,
            root: strip(&self.root),
            active_path: self.active_path.clone(),
        }
    }
}
