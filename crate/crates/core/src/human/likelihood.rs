use rand::Rng;

use super::{HumanAction, HumanModel, HumanState, InteractionCounters, RobotContext, NUM_HUMAN_STATES};
use crate::error::{Error, Result};

const FLOOR: f64 = 1e-12;

/// Per-step geometric-mean likelihood of one task's action sequence under
/// `model`, running a forward filter over the hidden states of mind in the
/// passive context.
pub fn task_likelihood(model: &HumanModel, actions: &[HumanAction]) -> f64 {
    if actions.is_empty() {
        return 1.0;
    }
    let mut belief = [0.0; NUM_HUMAN_STATES];
    belief[model.initial.index()] = 1.0;
    let counters = InteractionCounters::default();
    let mut log_sum = 0.0;
    for &a in actions {
        let mut predicted = [0.0; NUM_HUMAN_STATES];
        for s in HumanState::ALL {
            let w = belief[s.index()];
            if w == 0.0 {
                continue;
            }
            let row = model.effective_row(s, RobotContext::Passive, counters);
            for (p, r) in predicted.iter_mut().zip(row) {
                *p += w * r;
            }
        }
        let mut step = 0.0;
        for s in HumanState::ALL {
            if s.action() != a {
                predicted[s.index()] = 0.0;
            }
            step += predicted[s.index()];
        }
        log_sum += step.max(FLOOR).ln();
        if step > 0.0 {
            predicted.iter_mut().for_each(|p| *p /= step);
            belief = predicted;
        } else {
            belief = [0.0; NUM_HUMAN_STATES];
            belief[model.initial.index()] = 1.0;
        }
    }
    (log_sum / actions.len() as f64).exp()
}

/// Mean over tasks of [`task_likelihood`].
pub fn trace_likelihood(model: &HumanModel, tasks: &[Vec<HumanAction>]) -> Result<f64> {
    if tasks.is_empty() {
        return Err(Error::EmptyTraces);
    }
    Ok(tasks.iter().map(|t| task_likelihood(model, t)).sum::<f64>() / tasks.len() as f64)
}

/// Samples an action sequence of length `len` in the passive context.
pub fn generate_trace<R: Rng>(model: &HumanModel, len: usize, rng: &mut R) -> Vec<HumanAction> {
    let mut s = model.initial;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let row = model.effective_row(s, RobotContext::Passive, InteractionCounters::default());
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &p) in row.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            s = HumanState::ALL[i];
            if u < acc {
                break;
            }
        }
        out.push(s.action());
    }
    out
}
