use std::collections::HashSet;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::behavior::Behavior;
use crate::select::{self, OptionView};
use crate::signals::{Activation, BehaviorFault, BehaviorSignals};
use crate::trace::{NodeKind, NodeRecord, Scheme, SelectionTrace};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("arbitrator `{0}` has no options")]
    NoOptions(String),
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("arbitrator `{0}`: weights must be non-negative, one per option, and sum to 1")]
    InvalidWeights(String),
    #[error("arbitrator `{0}`: hysteresis margin must be finite and >= 0")]
    InvalidMargin(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StepError {
    #[error("no applicable behavior at t = {:.3} s", .trace.time)]
    NoApplicableBehavior { trace: Box<SelectionTrace> },
}

/// How signals of sibling options are evaluated. Both modes produce the same
/// selection; `Parallel` only pays off when signal evaluation is expensive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    #[default]
    Sequential,
    /// Falls back to sequential evaluation without the `parallel` feature.
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArbitratorSpec {
    pub scheme: Scheme,
    pub interruptible: bool,
    /// Cost scheme only.
    pub hysteresis_margin: f64,
    /// Random scheme only.
    pub weights: Vec<f64>,
    /// Random scheme only.
    pub rng_seed: u64,
}

impl ArbitratorSpec {
    fn with_scheme(scheme: Scheme) -> Self {
        Self {
            scheme,
            interruptible: true,
            hysteresis_margin: 0.0,
            weights: Vec::new(),
            rng_seed: 0,
        }
    }

    pub fn priority() -> Self {
        Self::with_scheme(Scheme::Priority)
    }

    pub fn sequence() -> Self {
        Self::with_scheme(Scheme::Sequence)
    }

    pub fn random(weights: Vec<f64>, seed: u64) -> Self {
        Self {
            weights,
            rng_seed: seed,
            ..Self::with_scheme(Scheme::Random)
        }
    }

    pub fn cost(hysteresis_margin: f64) -> Self {
        Self {
            hysteresis_margin,
            ..Self::with_scheme(Scheme::Cost)
        }
    }

    pub fn interruptible(mut self, interruptible: bool) -> Self {
        self.interruptible = interruptible;
        self
    }
}

pub struct Node<E, C> {
    id: String,
    body: Body<E, C>,
    activation: Activation,
}

enum Body<E, C> {
    Block(Box<dyn Behavior<E, C>>),
    Arbitrator(Arbitrator<E, C>),
}

struct Arbitrator<E, C> {
    spec: ArbitratorSpec,
    options: Vec<BehaviorOption<E, C>>,
    active: Option<usize>,
    rng: ChaCha8Rng,
}

/// An entry in an arbitrator's option list.
pub struct BehaviorOption<E, C> {
    node: Node<E, C>,
    /// Overrides the arbitrator's interruption policy for this option.
    interruptible: Option<bool>,
}

impl<E, C> BehaviorOption<E, C> {
    pub fn new(node: Node<E, C>) -> Self {
        Self {
            node,
            interruptible: None,
        }
    }

    pub fn interruptible(mut self, interruptible: bool) -> Self {
        self.interruptible = Some(interruptible);
        self
    }
}

impl<E, C> From<Node<E, C>> for BehaviorOption<E, C> {
    fn from(node: Node<E, C>) -> Self {
        Self::new(node)
    }
}

impl<E, C> Node<E, C> {
    /// A leaf named after the behavior.
    pub fn block(behavior: impl Behavior<E, C> + 'static) -> Self {
        let id = behavior.name().to_string();
        Self::block_named(id, behavior)
    }

    pub fn block_named(id: impl Into<String>, behavior: impl Behavior<E, C> + 'static) -> Self {
        Self {
            id: id.into(),
            body: Body::Block(Box::new(behavior)),
            activation: Activation::Inactive,
        }
    }

    pub fn arbitrator(
        id: impl Into<String>,
        spec: ArbitratorSpec,
        options: impl IntoIterator<Item = BehaviorOption<E, C>>,
    ) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        Self {
            id: id.into(),
            body: Body::Arbitrator(Arbitrator {
                spec,
                options: options.into_iter().collect(),
                active: None,
                rng,
            }),
            activation: Activation::Inactive,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn kind(&self) -> NodeKind {
        match self.body {
            Body::Block(_) => NodeKind::Block,
            Body::Arbitrator(_) => NodeKind::Arbitrator,
        }
    }

    fn scheme(&self) -> Option<Scheme> {
        match &self.body {
            Body::Block(_) => None,
            Body::Arbitrator(a) => Some(a.spec.scheme),
        }
    }
}

/// Static description of a graph node, used for structure checks and the
/// text diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeInfo {
    pub id: String,
    pub kind: NodeKind,
    pub scheme: Option<Scheme>,
    pub interruptible: Option<bool>,
    pub hysteresis_margin: Option<f64>,
    pub children: Vec<NodeInfo>,
}

impl NodeInfo {
    pub fn child_ids(&self) -> Vec<&str> {
        self.children.iter().map(|c| c.id.as_str()).collect()
    }

    pub fn find(&self, id: &str) -> Option<&NodeInfo> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(id))
    }

    pub fn leaves(&self) -> Vec<&str> {
        if self.children.is_empty() {
            return vec![self.id.as_str()];
        }
        self.children.iter().flat_map(|c| c.leaves()).collect()
    }

    pub fn ids(&self) -> Vec<&str> {
        let mut out = vec![self.id.as_str()];
        for c in &self.children {
            out.extend(c.ids());
        }
        out
    }
}

/// Result of evaluating one node for the current snapshot.
#[derive(Debug, Clone)]
struct Eval {
    signals: BehaviorSignals,
    cost: Option<f64>,
    fault: Option<String>,
    children: Vec<Eval>,
}

impl Eval {
    fn faulted(fault: BehaviorFault) -> Self {
        Self {
            signals: BehaviorSignals::NONE,
            cost: None,
            fault: Some(fault.0),
            children: Vec::new(),
        }
    }

    fn at_mut(&mut self, path: &[usize]) -> &mut Eval {
        match path.split_first() {
            None => self,
            Some((&i, rest)) => self.children[i].at_mut(rest),
        }
    }
}

/// A tree of arbitrators with behavior blocks at the leaves.
pub struct ArbitrationGraph<E, C> {
    root: Node<E, C>,
    mode: EvalMode,
}

impl<E, C> std::fmt::Debug for ArbitrationGraph<E, C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ArbitrationGraph")
            .field("root", &self.root.id)
            .field("mode", &self.mode)
            .finish()
    }
}

impl<E: Sync, C> ArbitrationGraph<E, C> {
    pub fn new(root: Node<E, C>) -> Result<Self, GraphError> {
        let mut seen = HashSet::new();
        validate(&root, &mut seen)?;
        Ok(Self {
            root,
            mode: EvalMode::default(),
        })
    }

    pub fn with_mode(mut self, mode: EvalMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn set_mode(&mut self, mode: EvalMode) {
        self.mode = mode;
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn root_id(&self) -> &str {
        &self.root.id
    }

    pub fn structure(&self) -> NodeInfo {
        info(&self.root, None)
    }

    /// Text diagram of the graph, one node per line.
    pub fn render_tree(&self) -> String {
        let mut out = String::new();
        render(&self.structure(), "", None, &mut out);
        out
    }

    /// Signals of every node for `env` without changing any state.
    pub fn evaluate(&self, env: &E) -> SelectionTrace {
        let eval = evaluate(&self.root, env, false, self.mode);
        SelectionTrace {
            time: f64::NAN,
            root: record(&self.root, &eval),
            active_path: Vec::new(),
        }
    }

    /// One arbitration tick: evaluate, select a root-to-leaf branch, fire
    /// lifecycle transitions and call the selected leaf's command exactly
    /// once (plus once per faulting leaf that had to be skipped).
    pub fn step(&mut self, env: &E, time: f64) -> Result<(C, SelectionTrace), StepError> {
        let mut eval = evaluate(&self.root, env, false, self.mode);
        loop {
            let path = choose_root(&mut self.root, &eval);
            transition(&mut self.root, path.as_deref(), &eval, env);
            let Some(path) = path else {
                let trace = self.trace(&eval, time, None);
                return Err(StepError::NoApplicableBehavior {
                    trace: Box::new(trace),
                });
            };
            match leaf_mut(&mut self.root, &path).command(env) {
                Ok(cmd) => {
                    let trace = self.trace(&eval, time, Some(&path));
                    return Ok((cmd, trace));
                }
                Err(fault) => {
                    let leaf = eval.at_mut(&path);
                    leaf.signals = BehaviorSignals::NONE;
                    leaf.cost = None;
                    leaf.fault = Some(fault.0);
                }
            }
        }
    }

    fn trace(&self, eval: &Eval, time: f64, path: Option<&[usize]>) -> SelectionTrace {
        let mut active_path = Vec::new();
        if let Some(path) = path {
            let mut node = &self.root;
            active_path.push(node.id.clone());
            for &i in path {
                let Body::Arbitrator(a) = &node.body else { break };
                node = &a.options[i].node;
                active_path.push(node.id.clone());
            }
        }
        SelectionTrace {
            time,
            root: record(&self.root, eval),
            active_path,
        }
    }
}

fn validate<E, C>(node: &Node<E, C>, seen: &mut HashSet<String>) -> Result<(), GraphError> {
    if !seen.insert(node.id.clone()) {
        return Err(GraphError::DuplicateId(node.id.clone()));
    }
    if let Body::Arbitrator(a) = &node.body {
        if a.options.is_empty() {
            return Err(GraphError::NoOptions(node.id.clone()));
        }
        let margin = a.spec.hysteresis_margin;
        if !(margin.is_finite() && margin >= 0.0) {
            return Err(GraphError::InvalidMargin(node.id.clone()));
        }
        if a.spec.scheme == Scheme::Random {
            let w = &a.spec.weights;
            let sum: f64 = w.iter().sum();
            if w.len() != a.options.len() || w.iter().any(|x| !(*x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(GraphError::InvalidWeights(node.id.clone()));
            }
        }
        for o in &a.options {
            validate(&o.node, seen)?;
        }
    }
    Ok(())
}

fn info<E, C>(node: &Node<E, C>, interruptible: Option<bool>) -> NodeInfo {
    match &node.body {
        Body::Block(_) => NodeInfo {
            id: node.id.clone(),
            kind: NodeKind::Block,
            scheme: None,
            interruptible,
            hysteresis_margin: None,
            children: Vec::new(),
        },
        Body::Arbitrator(a) => NodeInfo {
            id: node.id.clone(),
            kind: NodeKind::Arbitrator,
            scheme: Some(a.spec.scheme),
            interruptible: interruptible.or(Some(a.spec.interruptible)),
            hysteresis_margin: (a.spec.scheme == Scheme::Cost).then_some(a.spec.hysteresis_margin),
            children: a
                .options
                .iter()
                .map(|o| info(&o.node, o.interruptible.or(Some(a.spec.interruptible))))
                .collect(),
        },
    }
}

fn render(node: &NodeInfo, prefix: &str, last: Option<bool>, out: &mut String) {
    let (branch, pad) = match last {
        None => ("", ""),
        Some(true) => ("└── ", "    "),
        Some(false) => ("├── ", "│   "),
    };
    let _ = write!(out, "{prefix}{branch}{}", node.id);
    if let Some(scheme) = node.scheme {
        let _ = write!(out, " [{}", scheme.as_str());
        if let Some(m) = node.hysteresis_margin {
            let _ = write!(out, ", margin {m:.4}");
        }
        if node.interruptible == Some(false) {
            let _ = write!(out, ", non-interruptible");
        }
        out.push(']');
    }
    out.push('\n');
    let child_prefix = format!("{prefix}{pad}");
    for (i, c) in node.children.iter().enumerate() {
        render(c, &child_prefix, Some(i + 1 == node.children.len()), out);
    }
}

fn evaluate<E: Sync, C>(node: &Node<E, C>, env: &E, need_cost: bool, mode: EvalMode) -> Eval {
    let active = node.activation.is_active();
    match &node.body {
        Body::Block(b) => {
            let signals = match b.signals(env) {
                Ok(s) => s.masked(active),
                Err(f) => return Eval::faulted(f),
            };
            let mut cost = None;
            if need_cost && signals.selectable() {
                match b.expected_cost(env) {
                    Ok(c) if c.is_finite() => cost = Some(c),
                    Ok(c) => return Eval::faulted(BehaviorFault(format!("non-finite cost {c}"))),
                    Err(f) => return Eval::faulted(f),
                }
            }
            Eval {
                signals,
                cost,
                fault: None,
                children: Vec::new(),
            }
        }
        Body::Arbitrator(a) => {
            let child_cost = need_cost || a.spec.scheme == Scheme::Cost;
            let children = evaluate_options(&a.options, env, child_cost, mode);
            let views = option_views(a, &children);
            let invocation = match a.spec.scheme {
                Scheme::Sequence => {
                    let pick = select::select_sequence(&views, a.active);
                    pick.is_some_and(|i| views[i].signals.invocation)
                }
                _ => views.iter().any(|v| v.signals.invocation),
            };
            let commitment = active
                && a.active.is_some_and(|i| children[i].signals.commitment);
            let cost = if need_cost {
                match a.spec.scheme {
                    Scheme::Priority => select::select_priority(&views, a.active),
                    Scheme::Sequence => select::select_sequence(&views, a.active),
                    Scheme::Cost => {
                        select::select_cost(&views, a.active, a.spec.hysteresis_margin)
                    }
                    Scheme::Random => None,
                }
                .and_then(|i| views[i].cost)
                .or_else(|| {
                    (a.spec.scheme == Scheme::Random)
                        .then(|| select::random_expected_cost(&views, &a.spec.weights, a.active))
                        .flatten()
                })
            } else {
                None
            };
            Eval {
                signals: BehaviorSignals::new(invocation, commitment),
                cost,
                fault: None,
                children,
            }
        }
    }
}

#[cfg(feature = "parallel")]
fn evaluate_options<E: Sync, C>(
    options: &[BehaviorOption<E, C>],
    env: &E,
    need_cost: bool,
    mode: EvalMode,
) -> Vec<Eval> {
    use rayon::prelude::*;
    match mode {
        EvalMode::Parallel => options
            .par_iter()
            .map(|o| evaluate(&o.node, env, need_cost, mode))
            .collect(),
        EvalMode::Sequential => options
            .iter()
            .map(|o| evaluate(&o.node, env, need_cost, mode))
            .collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn evaluate_options<E: Sync, C>(
    options: &[BehaviorOption<E, C>],
    env: &E,
    need_cost: bool,
    mode: EvalMode,
) -> Vec<Eval> {
    options
        .iter()
        .map(|o| evaluate(&o.node, env, need_cost, mode))
        .collect()
}

fn option_views<E, C>(a: &Arbitrator<E, C>, children: &[Eval]) -> Vec<OptionView> {
    a.options
        .iter()
        .zip(children)
        .map(|(o, e)| OptionView {
            signals: e.signals,
            interruptible: o.interruptible.unwrap_or(a.spec.interruptible),
            cost: e.cost,
        })
        .collect()
}

fn choose_root<E, C>(root: &mut Node<E, C>, eval: &Eval) -> Option<Vec<usize>> {
    match &root.body {
        Body::Block(_) => eval.signals.selectable().then(Vec::new),
        Body::Arbitrator(_) => {
            if eval.signals.selectable() {
                choose(root, eval)
            } else {
                None
            }
        }
    }
}

/// Picks a branch below an arbitrator. An option whose subtree cannot yield
/// a leaf is removed and the choice is repeated.
fn choose<E, C>(node: &mut Node<E, C>, eval: &Eval) -> Option<Vec<usize>> {
    let Body::Arbitrator(a) = &mut node.body else {
        return Some(Vec::new());
    };
    let mut views = option_views(a, &eval.children);
    loop {
        let pick = match a.spec.scheme {
            Scheme::Priority => select::select_priority(&views, a.active),
            Scheme::Sequence => select::select_sequence(&views, a.active),
            Scheme::Cost => select::select_cost(&views, a.active, a.spec.hysteresis_margin),
            Scheme::Random => select::select_random(&views, &a.spec.weights, a.active, &mut a.rng),
        }?;
        let child = &mut a.options[pick].node;
        let sub = match child.body {
            Body::Block(_) => Some(Vec::new()),
            Body::Arbitrator(_) => choose(child, &eval.children[pick]),
        };
        match sub {
            Some(mut rest) => {
                rest.insert(0, pick);
                return Some(rest);
            }
            None => {
                views[pick].signals = BehaviorSignals::NONE;
                views[pick].cost = None;
            }
        }
    }
}

/// Moves activation to `path` (or deactivates the subtree for `None`),
/// firing `lose_control` on nodes leaving the branch before `gain_control`
/// on nodes entering it.
fn transition<E, C>(node: &mut Node<E, C>, path: Option<&[usize]>, eval: &Eval, env: &E) {
    let was_active = node.activation.is_active();
    match &mut node.body {
        Body::Block(b) => match (was_active, path.is_some()) {
            (true, false) => b.lose_control(env),
            (false, true) => b.gain_control(env),
            _ => {}
        },
        Body::Arbitrator(a) => {
            let old = if was_active { a.active } else { None };
            let new = path.and_then(|p| p.first().copied());
            if let Some(o) = old.filter(|&o| Some(o) != new) {
                transition(&mut a.options[o].node, None, &eval.children[o], env);
            }
            if let (Some(n), Some(p)) = (new, path) {
                transition(&mut a.options[n].node, Some(&p[1..]), &eval.children[n], env);
            }
            a.active = new;
        }
    }
    node.activation = match path {
        None => Activation::Inactive,
        Some(_) if was_active && eval.signals.commitment => Activation::Committed,
        Some(_) => Activation::Active,
    };
}

fn leaf_mut<'a, E, C>(node: &'a mut Node<E, C>, path: &[usize]) -> &'a mut dyn Behavior<E, C> {
    match &mut node.body {
        Body::Block(b) => b.as_mut(),
        Body::Arbitrator(a) => leaf_mut(&mut a.options[path[0]].node, &path[1..]),
    }
}

fn record<E, C>(node: &Node<E, C>, eval: &Eval) -> NodeRecord {
    let children = match &node.body {
        Body::Block(_) => Vec::new(),
        Body::Arbitrator(a) => a
            .options
            .iter()
            .zip(&eval.children)
            .map(|(o, e)| record(&o.node, e))
            .collect(),
    };
    NodeRecord {
        id: node.id.clone(),
        kind: node.kind(),
        scheme: node.scheme(),
        signals: eval.signals,
        activation: node.activation,
        cost: eval.cost,
        fault: eval.fault.clone(),
        children,
    }
}
