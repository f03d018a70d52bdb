use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::long_term::{TaskTrace, LONG_TERM_TASKS_FILE};
use super::short_term::{ConditionSummary, SHORT_TERM_SUMMARY_FILE};
use super::validate::{ValidationOutput, VALIDATION_VERDICT_FILE};
use super::{read_json, TRAINING_SUMMARY_FILE};
use crate::error::{config, Result};
use crate::trainer::TrainingSummaryRow;

pub const REPORT_FILE: &str = "report.md";

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<Vec<T>>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut r = csv::Reader::from_path(path)?;
    Ok(Some(r.deserialize().collect::<Result<_, _>>()?))
}

/// Summarizes whichever experiment outputs exist in `dir` into
/// `report.md` and returns its text.
pub fn report(dir: &Path) -> Result<String> {
    let mut text = String::from("# Experiment report\n");
    let mut sections = 0;

    if let Some(rows) = read_rows::<TrainingSummaryRow>(&dir.join(TRAINING_SUMMARY_FILE))? {
        sections += 1;
        let episodes: usize = rows.iter().map(|r| r.episodes).sum();
        let mut policies: Vec<_> = rows.iter().map(|r| r.policy).collect();
        policies.sort_unstable();
        policies.dedup();
        writeln!(text, "\n## Training\n\n{} pairs, {} policies, {episodes} episodes.\n", rows.len(), policies.len()).unwrap();
        writeln!(text, "| policy | mean return over types |\n|---|---|").unwrap();
        for p in policies {
            let sel: Vec<_> = rows.iter().filter(|r| r.policy == p).collect();
            let mean = sel.iter().map(|r| r.mean_return).sum::<f64>() / sel.len() as f64;
            writeln!(text, "| {p} | {mean:.3} |").unwrap();
        }
    }

    if let Some(rows) = read_rows::<ConditionSummary>(&dir.join(SHORT_TERM_SUMMARY_FILE))? {
        sections += 1;
        writeln!(text, "\n## Proactive versus reactive\n").unwrap();
        writeln!(text, "| condition | tasks | mean reward | warnings | mean S_task | mean eta |\n|---|---|---|---|---|---|").unwrap();
        for r in rows {
            let name = serde_json::to_value(r.condition)?;
            writeln!(
                text,
                "| {} | {} | {:.3} | {} | {:.3} | {:.3} |",
                name.as_str().unwrap_or_default(),
                r.tasks,
                r.mean_reward,
                r.total_warnings,
                r.mean_s_task,
                r.mean_eta
            )
            .unwrap();
        }
    }

    if let Some(rows) = read_rows::<TaskTrace>(&dir.join(LONG_TERM_TASKS_FILE))? {
        sections += 1;
        let k = rows.iter().map(|r| r.task + 1).max().unwrap_or(0);
        let changes = rows.iter().filter(|r| r.policy_changed).count();
        writeln!(text, "\n## Long-term policy selection\n\n{} tasks, {changes} policy changes.\n", rows.len()).unwrap();
        writeln!(text, "| task | mean regret | mean belief in true type |\n|---|---|---|").unwrap();
        for task in 0..k {
            let sel: Vec<_> = rows.iter().filter(|r| r.task == task).collect();
            let n = sel.len() as f64;
            let regret = sel.iter().map(|r| r.regret).sum::<f64>() / n;
            let belief = sel.iter().map(|r| r.belief_true_type).sum::<f64>() / n;
            writeln!(text, "| {} | {regret:.3} | {belief:.3} |", task + 1).unwrap();
        }
    }

    let verdict = dir.join(VALIDATION_VERDICT_FILE);
    if verdict.exists() {
        sections += 1;
        let v: ValidationOutput = read_json(&verdict)?;
        let rows = v.row_dominant.iter().filter(|&&d| d).count();
        writeln!(
            text,
            "\n## Human model validation\n\n{rows} of {} rows have a strictly maximal diagonal; verdict: {}.",
            v.models.len(),
            if v.dominant { "dominant" } else { "not dominant" }
        )
        .unwrap();
    }

    if sections == 0 {
        return Err(config(format!("no experiment outputs found in {}", dir.display())));
    }
    fs::write(dir.join(REPORT_FILE), &text)?;
    Ok(text)
}
