use super::{Flag, ObservationVector, RobotAction};
use crate::error::{config, Result};

/// Deterministic baseline that treats "needs help" as directly observable:
/// it takes over when the human has gone `timeout_ticks` without a subtask
/// completing, is not detected, or has just failed a subtask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactivePolicy {
    timeout_ticks: u32,
    elapsed: u32,
}

pub fn make_reactive_policy(timeout_ticks: u32) -> Result<ReactivePolicy> {
    if timeout_ticks == 0 {
        return Err(config("reactive timeout must be at least one tick"));
    }
    Ok(ReactivePolicy { timeout_ticks, elapsed: 0 })
}

impl ReactivePolicy {
    pub fn timeout_ticks(&self) -> u32 {
        self.timeout_ticks
    }

    pub fn elapsed(&self) -> u32 {
        self.elapsed
    }

    /// The decision rule as a pure function of the observation and the
    /// ticks elapsed since the last subtask event.
    pub fn action(&self, sigma: &ObservationVector, elapsed: u32) -> RobotAction {
        if elapsed >= self.timeout_ticks || !sigma.get(Flag::HumanDetected) || sigma.get(Flag::SubtaskFail) {
            RobotAction::TakeOver
        } else {
            RobotAction::Idle
        }
    }

    /// Advances the elapsed counter by `ticks` (or resets it when `sigma`
    /// carries a subtask event) and decides.
    pub fn step(&mut self, sigma: &ObservationVector, ticks: u32) -> RobotAction {
        if sigma.get(Flag::SubtaskSuccess) || sigma.get(Flag::SubtaskFail) {
            self.elapsed = 0;
        } else {
            self.elapsed = self.elapsed.saturating_add(ticks);
        }
        self.action(sigma, self.elapsed)
    }

    pub fn reset(&mut self) {
        self.elapsed = 0;
    }
}
