use crate::signals::{BehaviorFault, BehaviorSignals};

/// An atomic behavior block.
///
/// `signals` and `expected_cost` must be pure over the snapshot and the
/// block's own state; the engine may call them from several worker threads
/// at once. Mutable per-behavior state is only touched in `gain_control`,
/// `lose_control` and `command`, which the engine serializes.
pub trait Behavior<E, C>: Send + Sync {
    fn name(&self) -> &str;

    fn signals(&self, env: &E) -> Result<BehaviorSignals, BehaviorFault>;

    /// Cost estimate used by cost arbitrators (lower is better). Only called
    /// while the block is selectable.
    fn expected_cost(&self, _env: &E) -> Result<f64, BehaviorFault> {
        Ok(0.0)
    }

    fn command(&mut self, env: &E) -> Result<C, BehaviorFault>;

    fn gain_control(&mut self, _env: &E) {}

    fn lose_control(&mut self, _env: &E) {}
}
