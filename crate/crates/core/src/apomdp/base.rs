use serde::{Deserialize, Serialize};

use super::{ApomdpModel, RobotAction, RobotState, NUM_ACTIONS, NUM_FLAGS, NUM_ROBOT_STATES};
use crate::error::{config, Result};

/// Score points for subtask outcomes, warnings and task termination.
///
/// The team score credits the assignee (the human) more than the helper; the
/// decision model's reward table uses the actor-independent helper value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RewardSpec {
    pub subtask_success_by_assignee: f64,
    pub subtask_success_by_other: f64,
    pub subtask_fail: f64,
    pub warning_penalty: f64,
    pub global_success: f64,
    pub global_fail: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            subtask_success_by_assignee: 2.0,
            subtask_success_by_other: 1.0,
            subtask_fail: -2.0,
            warning_penalty: -2.0,
            global_success: 10.0,
            global_fail: -10.0,
        }
    }
}

impl RewardSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.subtask_success_by_assignee,
            self.subtask_success_by_other,
            self.subtask_fail,
            self.warning_penalty,
            self.global_success,
            self.global_fail,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(config("reward spec has a non-finite value"));
        }
        if self.warning_penalty >= 0.0 {
            return Err(config("warning penalty must be negative"));
        }
        if self.subtask_fail >= 0.0 {
            return Err(config("subtask failure reward must be negative"));
        }
        if !(self.subtask_success_by_assignee > self.subtask_success_by_other
            && self.subtask_success_by_other > 0.0)
        {
            return Err(config("need subtaskSuccessByAssignee > subtaskSuccessByOther > 0"));
        }
        Ok(())
    }
}

use RobotAction::*;
use RobotState::*;

/// Chance that a takeover completes a subtask within one decision step.
const TAKEOVER_COMPLETION: f64 = 0.5;

fn row(entries: &[(RobotState, f64)]) -> Vec<f64> {
    let mut r = vec![0.0; NUM_ROBOT_STATES];
    for &(s, p) in entries {
        r[s.index()] += p;
    }
    let sum: f64 = r.iter().sum();
    r.iter_mut().for_each(|p| *p /= sum);
    r
}

/// T(· | s, a) of the hand-authored base model. Passive actions (idle,
/// planning, cancelling with nothing to cancel) share a row except in the
/// warning state, where cancelling is what resolves the complaint.
fn base_transition(s: RobotState, a: RobotAction) -> Vec<f64> {
    match s {
        TaskAssignedToHuman => match a {
            TakeOver => row(&[(WarningReceived, 0.5), (HumanNotStruggling, 0.3), (TaskAssignedToHuman, 0.2)]),
            PointToRemind => row(&[
                (HumanNotStruggling, 0.75),
                (TaskAssignedToHuman, 0.15),
                (MayHaveLostAttention, 0.02),
                (MayBeTired, 0.04),
                (MayNotBeCapable, 0.04),
            ]),
            _ => row(&[
                (HumanNotStruggling, 0.7),
                (TaskAssignedToHuman, 0.2),
                (MayHaveLostAttention, 0.04),
                (MayBeTired, 0.03),
                (MayNotBeCapable, 0.03),
            ]),
        },
        TaskAssignedToRobot => match a {
            TakeOver => row(&[(HumanNotStruggling, 0.7), (TaskAssignedToRobot, 0.3)]),
            _ => row(&[(TaskAssignedToRobot, 0.7), (NeedsAssistance, 0.2), (HumanNotStruggling, 0.1)]),
        },
        HumanNotStruggling => match a {
            TakeOver => row(&[
                (WarningReceived, 0.45),
                (HumanNotStruggling, 0.44),
                (NoAssistanceNeeded, 0.05),
                (GlobalSuccess, 0.01),
                (GlobalFail, 0.005),
                (NeedsAssistance, 0.045),
            ]),
            PointToRemind => row(&[
                (HumanNotStruggling, 0.7),
                (MayHaveLostAttention, 0.03),
                (MayBeTired, 0.05),
                (MayNotBeCapable, 0.05),
                (NoAssistanceNeeded, 0.08),
                (WarningReceived, 0.06),
                (NeedsAssistance, 0.015),
                (GlobalSuccess, 0.01),
                (GlobalFail, 0.005),
            ]),
            _ => row(&[
                (HumanNotStruggling, 0.7),
                (MayHaveLostAttention, 0.07),
                (MayBeTired, 0.06),
                (MayNotBeCapable, 0.06),
                (NoAssistanceNeeded, 0.08),
                (NeedsAssistance, 0.01),
                (WarningReceived, 0.005),
                (GlobalSuccess, 0.01),
                (GlobalFail, 0.005),
            ]),
        },
        MayHaveLostAttention => match a {
            TakeOver => row(&[
                (HumanNotStruggling, 0.5),
                (WarningReceived, 0.25),
                (MayHaveLostAttention, 0.2),
                (GlobalSuccess, 0.03),
                (GlobalFail, 0.02),
            ]),
            PointToRemind => row(&[
                (HumanNotStruggling, 0.6),
                (MayHaveLostAttention, 0.2),
                (NeedsAssistance, 0.1),
                (NoAssistanceNeeded, 0.06),
                (WarningReceived, 0.02),
                (GlobalSuccess, 0.01),
                (GlobalFail, 0.01),
            ]),
            _ => row(&[
                (MayHaveLostAttention, 0.7),
                (NeedsAssistance, 0.2),
                (HumanNotStruggling, 0.06),
                (NoAssistanceNeeded, 0.02),
                (GlobalSuccess, 0.01),
                (GlobalFail, 0.01),
            ]),
        },
        MayBeTired => match a {
            TakeOver => row(&[
                (HumanNotStruggling, 0.6),
                (MayBeTired, 0.25),
                (WarningReceived, 0.1),
                (GlobalSuccess, 0.03),
                (GlobalFail, 0.02),
            ]),
            PointToRemind => row(&[
                (MayBeTired, 0.6),
                (NeedsAssistance, 0.2),
                (WarningReceived, 0.1),
                (HumanNotStruggling, 0.08),
                (GlobalFail, 0.02),
            ]),
            _ => row(&[
                (MayBeTired, 0.7),
                (NeedsAssistance, 0.2),
                (HumanNotStruggling, 0.07),
                (GlobalSuccess, 0.01),
                (GlobalFail, 0.02),
            ]),
        },
        MayNotBeCapable => match a {
            TakeOver => row(&[
                (HumanNotStruggling, 0.65),
                (MayNotBeCapable, 0.2),
                (WarningReceived, 0.1),
                (GlobalSuccess, 0.03),
                (GlobalFail, 0.02),
            ]),
            PointToRemind => row(&[
                (MayNotBeCapable, 0.7),
                (NeedsAssistance, 0.15),
                (WarningReceived, 0.1),
                (HumanNotStruggling, 0.03),
                (GlobalFail, 0.02),
            ]),
            _ => row(&[
                (MayNotBeCapable, 0.7),
                (NeedsAssistance, 0.2),
                (HumanNotStruggling, 0.07),
                (GlobalFail, 0.03),
            ]),
        },
        NeedsAssistance => match a {
            TakeOver => row(&[
                (HumanNotStruggling, 0.7),
                (NoAssistanceNeeded, 0.1),
                (WarningReceived, 0.1),
                (NeedsAssistance, 0.05),
                (GlobalSuccess, 0.05),
            ]),
            PointToRemind => row(&[
                (NeedsAssistance, 0.6),
                (HumanNotStruggling, 0.25),
                (MayHaveLostAttention, 0.05),
                (MayBeTired, 0.05),
                (GlobalFail, 0.05),
            ]),
            _ => row(&[
                (NeedsAssistance, 0.7),
                (HumanNotStruggling, 0.1),
                (MayHaveLostAttention, 0.05),
                (MayBeTired, 0.05),
                (MayNotBeCapable, 0.05),
                (GlobalFail, 0.05),
            ]),
        },
        NoAssistanceNeeded => match a {
            TakeOver => row(&[
                (WarningReceived, 0.7),
                (HumanNotStruggling, 0.2),
                (NoAssistanceNeeded, 0.05),
                (GlobalSuccess, 0.05),
            ]),
            PointToRemind => row(&[
                (HumanNotStruggling, 0.6),
                (NoAssistanceNeeded, 0.15),
                (WarningReceived, 0.2),
                (GlobalSuccess, 0.05),
            ]),
            _ => row(&[
                (HumanNotStruggling, 0.7),
                (NoAssistanceNeeded, 0.2),
                (NeedsAssistance, 0.03),
                (WarningReceived, 0.02),
                (GlobalSuccess, 0.05),
            ]),
        },
        WarningReceived => match a {
            Cancel => row(&[(HumanNotStruggling, 0.7), (NoAssistanceNeeded, 0.2), (WarningReceived, 0.1)]),
            TakeOver => row(&[(WarningReceived, 0.8), (HumanNotStruggling, 0.2)]),
            PointToRemind => row(&[(WarningReceived, 0.7), (HumanNotStruggling, 0.2), (NoAssistanceNeeded, 0.1)]),
            Plan => row(&[(WarningReceived, 0.6), (HumanNotStruggling, 0.3), (NoAssistanceNeeded, 0.1)]),
            Idle => row(&[(WarningReceived, 0.4), (HumanNotStruggling, 0.5), (NoAssistanceNeeded, 0.1)]),
        },
        GlobalSuccess | GlobalFail => row(&[(s, 1.0)]),
    }
}

/// Per-flag Bernoulli rates, in flag order: detected, looking around,
/// grasping, warning, idle, task success, task fail, subtask success,
/// subtask fail. Task flags are exact: they fire only in the terminal states.
fn base_flag_rates(s: RobotState, a: RobotAction) -> [f64; NUM_FLAGS] {
    let mut rates: [f64; NUM_FLAGS] = match s {
        TaskAssignedToHuman => [0.95, 0.05, 0.3, 0.005, 0.6, 0.0, 0.0, 0.02, 0.02],
        TaskAssignedToRobot => [0.9, 0.1, 0.1, 0.005, 0.6, 0.0, 0.0, 0.05, 0.05],
        HumanNotStruggling => [0.98, 0.05, 0.4, 0.005, 0.55, 0.0, 0.0, 0.25, 0.04],
        MayBeTired => [0.97, 0.05, 0.1, 0.005, 0.85, 0.0, 0.0, 0.04, 0.04],
        MayHaveLostAttention => [0.97, 0.8, 0.05, 0.005, 0.15, 0.0, 0.0, 0.04, 0.04],
        MayNotBeCapable => [0.98, 0.05, 0.35, 0.005, 0.55, 0.0, 0.0, 0.02, 0.6],
        NeedsAssistance => [0.4, 0.1, 0.05, 0.005, 0.5, 0.0, 0.0, 0.02, 0.3],
        NoAssistanceNeeded => [0.98, 0.05, 0.7, 0.005, 0.25, 0.0, 0.0, 0.3, 0.05],
        WarningReceived => [0.98, 0.02, 0.02, 0.95, 0.02, 0.0, 0.0, 0.05, 0.05],
        GlobalSuccess => [0.9, 0.1, 0.1, 0.02, 0.5, 1.0, 0.0, 0.5, 0.1],
        GlobalFail => [0.9, 0.1, 0.1, 0.02, 0.5, 0.0, 1.0, 0.1, 0.5],
    };
    // The robot completing a subtask is visible right after a takeover.
    if a == TakeOver && !s.is_terminal() && s != WarningReceived {
        rates[7] = rates[7].max(0.45);
    }
    rates
}

/// Cost of aborting a motion when nobody objected to it.
const CANCEL_COST: f64 = 0.5;
/// Cost of a reminder gesture.
const REMIND_COST: f64 = 0.1;
/// Cost of preparing a motion that may not be used.
const PLAN_COST: f64 = 0.05;

/// Immediate reward R(s, a): expected subtask points from the human's work
/// at the assignee value, plus the warning and termination rewards. A
/// takeover adds the difference between the helper's points and what the
/// human would likely have scored on the same cube.
fn base_reward(spec: &RewardSpec, s: RobotState, a: RobotAction) -> f64 {
    match s {
        WarningReceived => spec.warning_penalty,
        GlobalSuccess => spec.global_success,
        GlobalFail => spec.global_fail,
        _ => {
            let rates = base_flag_rates(s, Idle);
            let human = rates[7] * spec.subtask_success_by_assignee + rates[8] * spec.subtask_fail;
            match a {
                TakeOver => {
                    let robot = 0.95 * spec.subtask_success_by_other + 0.05 * spec.subtask_fail;
                    let per_subtask = human / (rates[7] + rates[8]);
                    human + TAKEOVER_COMPLETION * (robot - per_subtask)
                }
                Cancel => human - CANCEL_COST,
                PointToRemind => human - REMIND_COST,
                Plan => human - PLAN_COST,
                Idle => human,
            }
        }
    }
}

/// Builds the 11-state, 5-action anticipation model with the hand-authored
/// base tables, starting from `TaskAssignedToHuman`.
pub fn build_base_model(spec: RewardSpec, gamma: f64) -> Result<ApomdpModel> {
    spec.validate()?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(config(format!("gamma {gamma} outside (0, 1)")));
    }
    let states = RobotState::ALL.iter().map(|s| s.name().to_string()).collect();
    let rewards = RobotState::ALL
        .iter()
        .map(|&s| {
            let mut r = [0.0; NUM_ACTIONS];
            for a in RobotAction::ALL {
                r[a.index()] = base_reward(&spec, s, a);
            }
            r
        })
        .collect();
    let transitions = RobotState::ALL
        .iter()
        .map(|&s| RobotAction::ALL.iter().map(|&a| base_transition(s, a)).collect())
        .collect();
    let observations = RobotState::ALL
        .iter()
        .map(|&s| RobotAction::ALL.iter().map(|&a| base_flag_rates(s, a)).collect())
        .collect();
    let model = ApomdpModel::from_tables(
        states,
        gamma,
        TaskAssignedToHuman.index(),
        &[GlobalSuccess.index(), GlobalFail.index()],
        rewards,
        transitions,
        observations,
    )?;
    Ok(model.with_reward_spec(spec))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ApomdpModel {
        build_base_model(RewardSpec::default(), 0.95).unwrap()
    }

    #[test]
    fn shape_and_row_sums() {
        let m = model();
        assert_eq!(m.num_states(), 11);
        for s in 0..11 {
            for a in RobotAction::ALL {
                let sum: f64 = m.transition_row(s, a).iter().sum();
                assert!((sum - 1.0).abs() < 1e-9, "T({s},{a}) = {sum}");
            }
        }
        assert_eq!(m.initial_state(), TaskAssignedToHuman.index());
    }

    #[test]
    fn terminal_rows_are_absorbing() {
        let m = model();
        for a in RobotAction::ALL {
            assert_eq!(m.transition(GlobalSuccess.index(), a, GlobalSuccess.index()), 1.0);
            assert_eq!(m.transition(GlobalFail.index(), a, GlobalFail.index()), 1.0);
        }
    }

    #[test]
    fn warning_state_is_penalised() {
        let m = model();
        for a in RobotAction::ALL {
            assert_eq!(m.reward(WarningReceived.index(), a), -2.0);
        }
    }

    #[test]
    fn bad_configuration_is_rejected() {
        assert!(build_base_model(RewardSpec::default(), 1.0).is_err());
        assert!(build_base_model(RewardSpec::default(), 0.0).is_err());
        let spec = RewardSpec { warning_penalty: 1.0, ..RewardSpec::default() };
        assert!(build_base_model(spec, 0.95).is_err());
        let spec = RewardSpec { subtask_success_by_other: 3.0, ..RewardSpec::default() };
        assert!(build_base_model(spec, 0.95).is_err());
    }

    #[test]
    fn terminal_flags_only_fire_in_terminal_states() {
        let m = model();
        for s in RobotState::ALL {
            for a in RobotAction::ALL {
                let rates = m.flag_rates(s.index(), a);
                assert_eq!(rates[5], if s == GlobalSuccess { 1.0 } else { 0.0 });
                assert_eq!(rates[6], if s == GlobalFail { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let m = model();
        let text = serde_json::to_string(&m).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["states", "actions", "gamma", "rewards", "T", "O"] {
            assert!(doc.get(key).is_some(), "missing {key}");
        }
        let back: ApomdpModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
