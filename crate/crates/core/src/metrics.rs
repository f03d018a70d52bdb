//! Per-task collaboration metrics computed from episode logs.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::apomdp::{Flag, DEFAULT_GAMMA};
use crate::env::{Actor, EpisodeLog, SubtaskOutcome};
use crate::error::{config, Error, Result};

pub const DEFAULT_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    #[serde(rename = "taskId")]
    pub task_id: usize,
    #[serde(rename = "S_task")]
    pub s_task: f64,
    #[serde(rename = "S_human")]
    pub s_human: f64,
    #[serde(rename = "C_human")]
    pub c_human: f64,
    pub eta_task: f64,
    pub warnings: u32,
    #[serde(rename = "discountedReturn")]
    pub discounted_return: f64,
    pub regret: f64,
    #[serde(rename = "policyChanged")]
    pub policy_changed: bool,
}

/// Placement tallies recovered from the tick records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub n_s: u32,
    pub n_f: u32,
    pub n_s_human: u32,
    pub n_f_human: u32,
}

impl Tally {
    pub fn total(&self) -> u32 {
        self.n_s + self.n_f
    }
}

pub fn tally(log: &EpisodeLog) -> Tally {
    let mut t = Tally::default();
    for p in log.records.iter().filter_map(|r| r.placement) {
        match (p.outcome, p.actor) {
            (SubtaskOutcome::Success, Actor::Human) => {
                t.n_s += 1;
                t.n_s_human += 1;
            }
            (SubtaskOutcome::Success, Actor::Robot) => t.n_s += 1,
            (SubtaskOutcome::Fail, Actor::Human) => {
                t.n_f += 1;
                t.n_f_human += 1;
            }
            (SubtaskOutcome::Fail, Actor::Robot) => t.n_f += 1,
        }
    }
    t
}

/// Metrics of one completed task. `regret` and `policyChanged` are left
/// at 0/false for the caller to fill in.
pub fn compute_metrics(log: &EpisodeLog, task_id: usize) -> Result<MetricsRow> {
    let last = log.records.last().ok_or_else(|| Error::IncompleteLog("no ticks recorded".into()))?;
    if !(last.sigma.get(Flag::TaskSuccess) || last.sigma.get(Flag::TaskFail)) {
        return Err(Error::IncompleteLog("the last tick does not end the task".into()));
    }
    let t = tally(log);
    if t.total() == 0 {
        return Err(Error::IncompleteLog("no subtask was resolved".into()));
    }
    if let Some(s) = &log.summary {
        if (s.n_s, s.n_f, s.n_s_human, s.n_f_human) != (t.n_s, t.n_f, t.n_s_human, t.n_f_human) {
            return Err(Error::IncompleteLog("summary counts disagree with the ticks".into()));
        }
    }
    let gamma = log.summary.as_ref().map_or(DEFAULT_GAMMA, |s| s.gamma);

    let mut warnings = 0;
    let mut warning = false;
    let mut discount = 1.0;
    let mut discounted_return = 0.0;
    for r in &log.records {
        let w = r.sigma.get(Flag::WarnsRobot);
        warnings += u32::from(w && !warning);
        warning = w;
        discounted_return += discount * r.score;
        if r.decision {
            discount *= gamma;
        }
    }

    let n = f64::from(t.total());
    let s_task = f64::from(t.n_s) / n;
    let attempts = t.n_s_human + t.n_f_human;
    let s_human = if attempts == 0 { 0.0 } else { f64::from(t.n_s_human) / f64::from(attempts) };
    let c_human = f64::from(t.n_s_human) / n;
    Ok(MetricsRow {
        task_id,
        s_task,
        s_human,
        c_human,
        eta_task: s_task * c_human,
        warnings,
        discounted_return,
        regret: 0.0,
        policy_changed: false,
    })
}

/// Trailing mean over the last `window` points (fewer at the start).
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(config("moving-average window must be at least 1"));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, &x) in series.iter().enumerate() {
        sum += x;
        if i >= window {
            sum -= series[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    Ok(out)
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apomdp::{ObservationVector, RobotAction};
    use crate::env::{Placement, TickRecord};
    use crate::human::HumanAction;

    fn tick(sigma: &[Flag], score: f64, placement: Option<(Actor, SubtaskOutcome)>, decision: bool) -> TickRecord {
        TickRecord {
            tick: 0,
            human_action: HumanAction::Idle,
            robot_action: RobotAction::Idle,
            robot_busy: false,
            sigma: ObservationVector::from_flags(sigma),
            events: vec![],
            score,
            placement: placement.map(|(actor, outcome)| Placement { actor, outcome }),
            decision,
            state: None,
            belief_snapshot: None,
        }
    }

    #[test]
    fn rates_follow_their_definitions() {
        use Actor::*;
        use SubtaskOutcome::*;
        let mut records = vec![tick(&[], 0.0, Some((Human, Success)), true); 5];
        records.extend(vec![tick(&[], 0.0, Some((Robot, Success)), false); 2]);
        records.extend(vec![tick(&[], 0.0, Some((Robot, Fail)), false); 3]);
        records.push(tick(&[Flag::TaskSuccess], 0.0, None, false));
        let m = compute_metrics(&EpisodeLog { records, summary: None }, 3).unwrap();
        assert_eq!(m.task_id, 3);
        assert_eq!(m.s_task, 0.7);
        assert_eq!(m.s_human, 1.0);
        assert_eq!(m.c_human, 0.5);
        assert_eq!(m.eta_task, 0.35);
    }

    #[test]
    fn no_human_attempts_gives_zero_human_success() {
        let records = vec![
            tick(&[], 0.0, Some((Actor::Robot, SubtaskOutcome::Success)), false),
            tick(&[Flag::TaskSuccess], 0.0, None, false),
        ];
        let m = compute_metrics(&EpisodeLog { records, summary: None }, 0).unwrap();
        assert_eq!((m.s_human, m.c_human, m.eta_task), (0.0, 0.0, 0.0));
    }

    #[test]
    fn warnings_count_onsets_and_returns_discount_per_decision() {
        let w = Flag::WarnsRobot;
        let records = vec![
            tick(&[w], -2.0, None, true),
            tick(&[w], 0.0, None, false),
            tick(&[], 1.0, None, true),
            tick(&[w], -2.0, Some((Actor::Human, SubtaskOutcome::Success)), false),
            tick(&[Flag::TaskSuccess], 10.0, None, false),
        ];
        let m = compute_metrics(&EpisodeLog { records, summary: None }, 0).unwrap();
        assert_eq!(m.warnings, 2);
        let g = DEFAULT_GAMMA;
        let expected = -2.0 + g * 1.0 + g * g * (-2.0 + 10.0);
        assert!((m.discounted_return - expected).abs() < 1e-12);
    }

    #[test]
    fn incomplete_logs_are_rejected() {
        assert!(matches!(compute_metrics(&EpisodeLog::default(), 0), Err(Error::IncompleteLog(_))));
        let open = EpisodeLog { records: vec![tick(&[], 0.0, Some((Actor::Human, SubtaskOutcome::Fail)), false)], summary: None };
        assert!(matches!(compute_metrics(&open, 0), Err(Error::IncompleteLog(_))));
    }

    #[test]
    fn moving_average_examples() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0], 2).unwrap(), vec![1.0, 1.5, 2.5]);
        assert_eq!(moving_average(&[4.0, 7.0], 1).unwrap(), vec![4.0, 7.0]);
        assert_eq!(moving_average(&[2.0; 5], 3).unwrap(), vec![2.0; 5]);
        assert!(moving_average(&[], 3).unwrap().is_empty());
        assert!(moving_average(&[1.0], 0).is_err());
    }

    #[test]
    fn csv_header_is_exact() {
        let row = MetricsRow {
            task_id: 1,
            s_task: 0.5,
            s_human: 1.0,
            c_human: 0.5,
            eta_task: 0.25,
            warnings: 2,
            discounted_return: 3.5,
            regret: -0.5,
            policy_changed: true,
        };
        let mut buf = Vec::new();
        write_metrics_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "taskId,S_task,S_human,C_human,eta_task,warnings,discountedReturn,regret,policyChanged\n\
             1,0.5,1.0,0.5,0.25,2,3.5,-0.5,true\n"
        );
    }
}
