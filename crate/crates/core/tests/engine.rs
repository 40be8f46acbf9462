use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use arbitration_core::select::{select_cost, select_priority, select_random};
use arbitration_core::{
    Activation, ArbitrationGraph, ArbitratorSpec, Behavior, BehaviorFault, BehaviorOption,
    BehaviorSignals, EvalMode, FnBehavior, Node, NodeKind, OptionView, StepError,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Snapshot for the stub behaviors: per-leaf invocation, commitment and cost.
#[derive(Debug, Clone, Default)]
struct Scene {
    invocation: Vec<bool>,
    commitment: Vec<bool>,
    cost: Vec<f64>,
}

impl Scene {
    fn inv(invocation: &[bool]) -> Self {
        Self {
            invocation: invocation.to_vec(),
            commitment: vec![false; invocation.len()],
            cost: vec![0.0; invocation.len()],
        }
    }
}

fn leaf(idx: usize) -> Node<Scene, usize> {
    Node::block(
        FnBehavior::new(
            format!("leaf{idx}"),
            move |s: &Scene, _| Ok(BehaviorSignals::new(s.invocation[idx], s.commitment[idx])),
            move |_| Ok(idx),
        )
        .with_cost(move |s: &Scene| Ok(s.cost[idx])),
    )
}

fn faulty(name: &str) -> Node<Scene, usize> {
    Node::block(FnBehavior::new(
        name,
        |_: &Scene, _| Err(BehaviorFault::new("sensor timeout")),
        |_| Err(BehaviorFault::new("unreachable")),
    ))
}

fn flat(spec: ArbitratorSpec, n: usize) -> ArbitrationGraph<Scene, usize> {
    let opts = (0..n).map(|i| BehaviorOption::new(leaf(i)));
    ArbitrationGraph::new(Node::arbitrator("root", spec, opts)).unwrap()
}

#[test]
fn arbitrator_signals_lift_children() {
    let g = flat(ArbitratorSpec::priority(), 2);
    let t = g.evaluate(&Scene::inv(&[false, true]));
    assert_eq!(t.root.signals, BehaviorSignals::new(true, false));
}

#[test]
fn arbitrator_commitment_passes_through_active_child() {
    let mut g = flat(ArbitratorSpec::priority(), 1);
    let mut s = Scene::inv(&[true]);
    g.step(&s, 0.0).unwrap();
    s.commitment[0] = true;
    let t = g.evaluate(&s);
    assert_eq!(t.root.signals, BehaviorSignals::new(true, true));
}

#[test]
fn inactive_children_never_report_commitment() {
    let g = flat(ArbitratorSpec::priority(), 2);
    let mut s = Scene::inv(&[false, false]);
    s.commitment = vec![true, true];
    let t = g.evaluate(&s);
    assert_eq!(t.root.signals, BehaviorSignals::NONE);
    assert!(t.nodes().all(|n| !n.signals.commitment));
}

#[test]
fn faulting_only_child_is_contained() {
    let g: ArbitrationGraph<Scene, usize> = ArbitrationGraph::new(Node::arbitrator(
        "root",
        ArbitratorSpec::priority(),
        [BehaviorOption::new(faulty("broken"))],
    ))
    .unwrap();
    let t = g.evaluate(&Scene::default());
    assert_eq!(t.root.signals, BehaviorSignals::NONE);
    let faults: Vec<_> = t.faults().collect();
    assert_eq!(faults, vec![("broken", "sensor timeout")]);
}

#[test]
fn single_leaf_graph_step() {
    let mut g = flat(ArbitratorSpec::priority(), 1);
    let (cmd, trace) = g.step(&Scene::inv(&[true]), 0.0).unwrap();
    assert_eq!(cmd, 0);
    assert_eq!(trace.active_path, vec!["root", "leaf0"]);
}

#[test]
fn no_applicable_behavior_is_surfaced() {
    let mut g = flat(ArbitratorSpec::priority(), 3);
    let err = g.step(&Scene::inv(&[false, false, false]), 1.5).unwrap_err();
    let StepError::NoApplicableBehavior { trace } = err;
    assert_eq!(trace.time, 1.5);
    assert!(trace.active_path.is_empty());
}

#[test]
fn graph_validation() {
    let dup = Node::arbitrator(
        "root",
        ArbitratorSpec::priority(),
        [BehaviorOption::new(leaf(0)), BehaviorOption::new(leaf(0))],
    );
    assert!(ArbitrationGraph::new(dup).is_err());
    let empty: Node<Scene, usize> = Node::arbitrator("root", ArbitratorSpec::priority(), []);
    assert!(ArbitrationGraph::new(empty).is_err());
    let bad_w = Node::arbitrator(
        "root",
        ArbitratorSpec::random(vec![0.5, 0.6], 1),
        [BehaviorOption::new(leaf(0)), BehaviorOption::new(leaf(1))],
    );
    assert!(ArbitrationGraph::new(bad_w).is_err());
    let bad_m = Node::arbitrator("root", ArbitratorSpec::cost(-1.0), [BehaviorOption::new(leaf(0))]);
    assert!(ArbitrationGraph::new(bad_m).is_err());
}

/// Records lifecycle calls into a shared log.
struct Logged {
    name: String,
    log: Arc<Mutex<Vec<String>>>,
    invocable: Arc<Mutex<bool>>,
}

impl Behavior<(), ()> for Logged {
    fn name(&self) -> &str {
        &self.name
    }
    fn signals(&self, _: &()) -> Result<BehaviorSignals, BehaviorFault> {
        Ok(BehaviorSignals::new(*self.invocable.lock().unwrap(), false))
    }
    fn command(&mut self, _: &()) -> Result<(), BehaviorFault> {
        self.log.lock().unwrap().push(format!("command {}", self.name));
        Ok(())
    }
    fn gain_control(&mut self, _: &()) {
        self.log.lock().unwrap().push(format!("gain {}", self.name));
    }
    fn lose_control(&mut self, _: &()) {
        self.log.lock().unwrap().push(format!("lose {}", self.name));
    }
}

#[test]
fn lifecycle_hooks_fire_on_branch_changes_only() {
    let log = Arc::new(Mutex::new(Vec::new()));
    let a_on = Arc::new(Mutex::new(true));
    let b_on = Arc::new(Mutex::new(true));
    let a = Logged {
        name: "a".into(),
        log: log.clone(),
        invocable: a_on.clone(),
    };
    let b = Logged {
        name: "b".into(),
        log: log.clone(),
        invocable: b_on.clone(),
    };
    let inner = Node::arbitrator("inner", ArbitratorSpec::priority(), [BehaviorOption::new(Node::block(a))]);
    let mut g = ArbitrationGraph::new(Node::arbitrator(
        "root",
        ArbitratorSpec::priority(),
        [BehaviorOption::new(inner), BehaviorOption::new(Node::block(b))],
    ))
    .unwrap();
    g.step(&(), 0.0).unwrap();
    g.step(&(), 0.1).unwrap();
    *a_on.lock().unwrap() = false;
    g.step(&(), 0.2).unwrap();
    let log = log.lock().unwrap().clone();
    assert_eq!(
        log,
        vec!["gain a", "command a", "command a", "lose a", "gain b", "command b"]
    );
}

#[test]
fn committed_activation_requires_previous_activity() {
    let mut g = flat(ArbitratorSpec::priority(), 2);
    let mut s = Scene::inv(&[false, true]);
    s.commitment = vec![true, true];
    let (_, t) = g.step(&s, 0.0).unwrap();
    assert_eq!(t.node("leaf1").unwrap().activation, Activation::Active);
    let (_, t) = g.step(&s, 0.1).unwrap();
    assert_eq!(t.node("leaf1").unwrap().activation, Activation::Committed);
    assert_eq!(t.node("leaf0").unwrap().activation, Activation::Inactive);
}

#[test]
fn non_interruptible_priority_keeps_committed_option() {
    let mut g = flat(ArbitratorSpec::priority().interruptible(false), 2);
    let mut s = Scene::inv(&[false, true]);
    g.step(&s, 0.0).unwrap();
    s.invocation = vec![true, false];
    s.commitment = vec![false, true];
    let (cmd, _) = g.step(&s, 0.1).unwrap();
    assert_eq!(cmd, 1);

    let mut g = flat(ArbitratorSpec::priority(), 2);
    g.step(&Scene::inv(&[false, true]), 0.0).unwrap();
    let (cmd, _) = g.step(&s, 0.1).unwrap();
    assert_eq!(cmd, 0);
}

#[test]
fn option_level_interruption_override() {
    let opts = [
        BehaviorOption::new(leaf(0)).interruptible(true),
        BehaviorOption::new(leaf(1)),
    ];
    let mut g = ArbitrationGraph::new(Node::arbitrator(
        "root",
        ArbitratorSpec::cost(0.0).interruptible(false),
        opts,
    ))
    .unwrap();
    let mut s = Scene::inv(&[true, false]);
    s.commitment = vec![true, true];
    s.cost = vec![0.0, -5.0];
    assert_eq!(g.step(&s, 0.0).unwrap().0, 0);
    s.invocation = vec![true, true];
    // leaf0 is committed but interruptible: cheaper leaf1 takes over
    assert_eq!(g.step(&s, 0.1).unwrap().0, 1);
    s.cost = vec![-50.0, -5.0];
    // leaf1 is committed and protected
    assert_eq!(g.step(&s, 0.2).unwrap().0, 1);
}

/// Three-phase stub: each phase runs for a fixed number of active ticks.
fn phase(name: &'static str, idx: usize, ticks: usize, counter: Arc<AtomicUsize>) -> Node<(), usize> {
    let remaining = Arc::new(AtomicUsize::new(0));
    struct Phase {
        name: &'static str,
        idx: usize,
        ticks: usize,
        remaining: Arc<AtomicUsize>,
        calls: Arc<AtomicUsize>,
    }
    impl Behavior<(), usize> for Phase {
        fn name(&self) -> &str {
            self.name
        }
        fn signals(&self, _: &()) -> Result<BehaviorSignals, BehaviorFault> {
            Ok(BehaviorSignals::new(true, self.remaining.load(Ordering::SeqCst) > 0))
        }
        fn command(&mut self, _: &()) -> Result<usize, BehaviorFault> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let r = self.remaining.load(Ordering::SeqCst);
            self.remaining.store(r.saturating_sub(1), Ordering::SeqCst);
            Ok(self.idx)
        }
        fn gain_control(&mut self, _: &()) {
            self.remaining.store(self.ticks, Ordering::SeqCst);
        }
    }
    Node::block(Phase {
        name,
        idx,
        ticks,
        remaining,
        calls: counter,
    })
}

#[test]
fn sequence_runs_phases_in_order_then_resets() {
    let calls = Arc::new(AtomicUsize::new(0));
    let seq = Node::arbitrator(
        "merge",
        ArbitratorSpec::sequence(),
        [
            BehaviorOption::new(phase("approach", 0, 3, calls.clone())),
            BehaviorOption::new(phase("indicate", 1, 2, calls.clone())),
            BehaviorOption::new(phase("merge_in", 2, 4, calls.clone())),
        ],
    );
    let fallback = Node::block(FnBehavior::new(
        "idle",
        |_: &(), _| Ok(BehaviorSignals::new(true, false)),
        |_| Ok(99),
    ));
    let mut g = ArbitrationGraph::new(Node::arbitrator(
        "root",
        ArbitratorSpec::priority(),
        [BehaviorOption::new(seq), BehaviorOption::new(fallback)],
    ))
    .unwrap();
    let picks: Vec<usize> = (0..13).map(|t| g.step(&(), t as f64).unwrap().0).collect();
    // phase k holds control for `ticks` commands plus the tick that observes
    // its commitment dropping hands over within the same step
    assert_eq!(picks, vec![0, 0, 0, 1, 1, 2, 2, 2, 2, 99, 0, 0, 0]);
    assert_eq!(calls.load(Ordering::SeqCst), 12);
}

#[test]
fn cost_arbitrator_point_e_numbers() {
    let mut g = flat(ArbitratorSpec::cost(1.0 / 3.6), 2);
    let mut s = Scene::inv(&[true, true]);
    s.cost = vec![-15.0 / 3.6, -28.4 / 3.6];
    let (cmd, t) = g.step(&s, 0.0).unwrap();
    assert_eq!(cmd, 1);
    assert_eq!(t.node("leaf1").unwrap().cost, Some(-28.4 / 3.6));
}

#[test]
fn non_finite_cost_is_a_contained_fault() {
    let mut g = flat(ArbitratorSpec::cost(0.0), 2);
    let mut s = Scene::inv(&[true, true]);
    s.cost = vec![f64::NAN, 4.0];
    let (cmd, t) = g.step(&s, 0.0).unwrap();
    assert_eq!(cmd, 1);
    assert!(t.node("leaf0").unwrap().fault.is_some());
}

#[test]
fn command_fault_falls_back_to_next_option() {
    let broken_cmd = Node::block(FnBehavior::new(
        "flaky",
        |_: &Scene, _| Ok(BehaviorSignals::new(true, false)),
        |_| Err(BehaviorFault::new("planner failed")),
    ));
    let mut g = ArbitrationGraph::new(Node::arbitrator(
        "root",
        ArbitratorSpec::priority(),
        [BehaviorOption::new(broken_cmd), BehaviorOption::new(leaf(0))],
    ))
    .unwrap();
    let (cmd, t) = g.step(&Scene::inv(&[true]), 0.0).unwrap();
    assert_eq!(cmd, 0);
    assert_eq!(t.active_path, vec!["root", "leaf0"]);
    assert_eq!(t.node("flaky").unwrap().activation, Activation::Inactive);
    assert!(t.node("flaky").unwrap().fault.is_some());
}

#[test]
fn nested_arbitrator_without_leaf_is_skipped() {
    // inner cost arbitrator whose only invocable child has a non-finite cost
    let inner = Node::arbitrator("inner", ArbitratorSpec::cost(0.0), [BehaviorOption::new(leaf(0))]);
    let mut g = ArbitrationGraph::new(Node::arbitrator(
        "root",
        ArbitratorSpec::priority(),
        [BehaviorOption::new(inner), BehaviorOption::new(leaf(1))],
    ))
    .unwrap();
    let mut s = Scene::inv(&[true, true]);
    s.cost = vec![f64::INFINITY, 0.0];
    let (cmd, _) = g.step(&s, 0.0).unwrap();
    assert_eq!(cmd, 1);
}

#[test]
fn random_frequencies_match_weights() {
    let opts = vec![OptionView::new(true, false), OptionView::new(true, false)];
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    let draws = 10_000;
    let ones = (0..draws)
        .filter(|_| select_random(&opts, &[0.2, 0.8], None, &mut rng) == Some(1))
        .count();
    let f1 = ones as f64 / draws as f64;
    assert!((f1 - 0.8).abs() <= 0.02, "frequency {f1}");
}

#[test]
fn random_graph_is_deterministic_for_a_seed() {
    let run = |seed| {
        let mut g = flat(ArbitratorSpec::random(vec![0.25, 0.25, 0.5], seed), 3);
        (0..200)
            .map(|t| g.step(&Scene::inv(&[true, true, true]), t as f64).unwrap().0)
            .collect::<Vec<_>>()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}

#[test]
fn render_tree_lists_schemes() {
    let inner = Node::arbitrator("inner", ArbitratorSpec::cost(0.5), [BehaviorOption::new(leaf(0))]);
    let g = ArbitrationGraph::new(Node::arbitrator(
        "root",
        ArbitratorSpec::priority(),
        [BehaviorOption::new(inner), BehaviorOption::new(leaf(1))],
    ))
    .unwrap();
    assert_eq!(
        g.render_tree(),
        "root [priority]\n├── inner [cost, margin 0.5000]\n│   └── leaf0\n└── leaf1\n"
    );
    assert_eq!(g.structure().find("inner").unwrap().kind, NodeKind::Arbitrator);
}

fn first_applicable(pattern: &[bool]) -> Option<usize> {
    pattern.iter().position(|&b| b)
}

#[test]
fn priority_matches_first_applicable_for_all_patterns() {
    for n in 1..=6usize {
        let mut g = flat(ArbitratorSpec::priority(), n);
        for mask in 0..(1u32 << n) {
            let pattern: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
            let views: Vec<_> = pattern.iter().map(|&b| OptionView::new(b, false)).collect();
            assert_eq!(select_priority(&views, None), first_applicable(&pattern));
            let got = g.step(&Scene::inv(&pattern), 0.0).ok().map(|(c, _)| c);
            assert_eq!(got, first_applicable(&pattern), "pattern {pattern:?}");
        }
    }
}

fn nested(with_fault: bool) -> ArbitrationGraph<Scene, usize> {
    let mut urban: Vec<BehaviorOption<Scene, usize>> = vec![leaf(0).into(), leaf(1).into()];
    if with_fault {
        urban.insert(1, faulty("broken").into());
    }
    urban.push(leaf(2).into());
    let urban = Node::arbitrator("urban", ArbitratorSpec::cost(0.3), urban);
    let root = Node::arbitrator(
        "root",
        ArbitratorSpec::priority(),
        [BehaviorOption::new(leaf(3)), urban.into(), leaf(4).into()],
    );
    ArbitrationGraph::new(root).unwrap()
}

fn strip_node(t: &arbitration_core::SelectionTrace, id: &str) -> arbitration_core::SelectionTrace {
    let mut t = t.without_faults();
    fn rm(n: &mut arbitration_core::NodeRecord, id: &str) {
        n.children.retain(|c| c.id != id);
        for c in &mut n.children {
            rm(c, id);
        }
    }
    rm(&mut t.root, id);
    t
}

proptest! {
    #[test]
    fn cost_zero_margin_is_argmin(costs in prop::collection::vec(-50.0f64..50.0, 1..8)) {
        let views: Vec<_> = costs.iter().map(|&c| OptionView::new(true, false).with_cost(c)).collect();
        let mut best = 0;
        for i in 1..costs.len() {
            if costs[i] < costs[best] {
                best = i;
            }
        }
        prop_assert_eq!(select_cost(&views, None, 0.0), Some(best));
    }

    #[test]
    fn faulting_block_does_not_change_selection(
        ticks in prop::collection::vec(
            (prop::collection::vec(any::<bool>(), 5), prop::collection::vec(any::<bool>(), 5),
             prop::collection::vec(-10.0f64..10.0, 5)),
            1..30)
    ) {
        let mut clean = nested(false);
        let mut faulty = nested(true);
        for (t, (inv, com, cost)) in ticks.into_iter().enumerate() {
            let mut inv = inv;
            inv[4] = true;
            let s = Scene { invocation: inv, commitment: com, cost };
            let a = clean.step(&s, t as f64).unwrap();
            let b = faulty.step(&s, t as f64).unwrap();
            prop_assert_eq!(a.0, b.0);
            prop_assert_eq!(a.1.without_faults(), strip_node(&b.1, "broken"));
        }
    }

    #[test]
    fn single_activation_and_determinism(
        ticks in prop::collection::vec(
            (prop::collection::vec(any::<bool>(), 5), prop::collection::vec(any::<bool>(), 5),
             prop::collection::vec(-10.0f64..10.0, 5)),
            1..30)
    ) {
        let mut g1 = nested(false);
        let mut g2 = nested(false).with_mode(EvalMode::Parallel);
        let mut prev_active: Vec<String> = Vec::new();
        for (t, (inv, com, cost)) in ticks.into_iter().enumerate() {
            let mut inv = inv;
            inv[4] = true;
            let s = Scene { invocation: inv, commitment: com, cost };
            let (c1, t1) = g1.step(&s, t as f64).unwrap();
            let (c2, t2) = g2.step(&s, t as f64).unwrap();
            prop_assert_eq!(c1, c2);
            prop_assert_eq!(&t1, &t2);

            let active: Vec<&str> = t1.nodes().filter(|n| n.activation.is_active()).map(|n| n.id.as_str()).collect();
            prop_assert_eq!(active.clone(), t1.active_path.iter().map(String::as_str).collect::<Vec<_>>());
            let leaves = t1.nodes().filter(|n| n.kind == NodeKind::Block && n.activation.is_active()).count();
            prop_assert_eq!(leaves, 1);
            for id in &t1.active_path {
                let n = t1.node(id).unwrap();
                prop_assert!(n.signals.invocation || n.signals.commitment);
                if n.activation == Activation::Committed {
                    prop_assert!(prev_active.contains(id));
                }
            }
            prev_active = t1.active_path.clone();
        }
    }
}
