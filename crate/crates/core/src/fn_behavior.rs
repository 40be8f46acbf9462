use crate::behavior::Behavior;
use crate::signals::{BehaviorFault, BehaviorSignals};

type SignalFn<E> = Box<dyn Fn(&E, bool) -> Result<BehaviorSignals, BehaviorFault> + Send + Sync>;
type CostFn<E> = Box<dyn Fn(&E) -> Result<f64, BehaviorFault> + Send + Sync>;
type CommandFn<E, C> = Box<dyn FnMut(&E) -> Result<C, BehaviorFault> + Send + Sync>;

/// A behavior assembled from closures. Handy for stubs and small graphs.
///
/// The signal closure receives the snapshot and whether the block currently
/// holds control.
pub struct FnBehavior<E, C> {
    name: String,
    active: bool,
    signals: SignalFn<E>,
    cost: Option<CostFn<E>>,
    command: CommandFn<E, C>,
}

impl<E, C> FnBehavior<E, C> {
    pub fn new(
        name: impl Into<String>,
        signals: impl Fn(&E, bool) -> Result<BehaviorSignals, BehaviorFault> + Send + Sync + 'static,
        command: impl FnMut(&E) -> Result<C, BehaviorFault> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            active: false,
            signals: Box::new(signals),
            cost: None,
            command: Box::new(command),
        }
    }

    pub fn with_cost(
        mut self,
        cost: impl Fn(&E) -> Result<f64, BehaviorFault> + Send + Sync + 'static,
    ) -> Self {
        self.cost = Some(Box::new(cost));
        self
    }
}

impl<E, C> Behavior<E, C> for FnBehavior<E, C> {
    fn name(&self) -> &str {
        &self.name
    }

    fn signals(&self, env: &E) -> Result<BehaviorSignals, BehaviorFault> {
        (self.signals)(env, self.active)
    }

    fn expected_cost(&self, env: &E) -> Result<f64, BehaviorFault> {
        match &self.cost {
            Some(f) => f(env),
            None => Ok(0.0),
        }
    }

    fn command(&mut self, env: &E) -> Result<C, BehaviorFault> {
        (self.command)(env)
    }

    fn gain_control(&mut self, _env: &E) {
        self.active = true;
    }

    fn lose_control(&mut self, _env: &E) {
        self.active = false;
    }
}
