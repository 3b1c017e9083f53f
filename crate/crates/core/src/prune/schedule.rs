//! Structure-decay scheduling for gradual pruning.
//!
//! The scheduler lowers N stepwise from a loose initial budget to the
//! target pattern. Masks are nested: a weight pruned at one step never
//! comes back. While the decayed N exceeds 4 only the row-wise N:M budget
//! is enforced; the 4-column vector-wise constraint activates once N
//! reaches 4.

use crate::config::{validate_config, VnmConfig, SELECTED_COLUMNS};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::mask::SparsityMask;
use crate::prune::fisher::FisherInverse;
use crate::prune::second_order::{relaxed_row_prune, structured_prune, SaliencyMode};

/// A weakly decreasing sequence of per-step N values ending at the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecaySchedule {
    steps: Vec<usize>,
}

impl DecaySchedule {
    /// Builds a schedule from explicit steps. A single-entry schedule
    /// degenerates to one-shot pruning.
    pub fn from_steps(steps: Vec<usize>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidSchedule {
                context: "schedule must have at least one step".to_string(),
            });
        }
        if steps.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidSchedule {
                context: format!("steps {steps:?} are not weakly decreasing"),
            });
        }
        if *steps.last().unwrap() == 0 {
            return Err(Error::InvalidSchedule {
                context: "target N must be at least 1".to_string(),
            });
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn n_target(&self) -> usize {
        *self.steps.last().unwrap()
    }
}

/// Linear decay from `n0` to `n_target` over `beta` steps (inclusive
/// endpoints, `beta + 1` values): `steps[t] = round(n0 - t*(n0-n_target)/beta)`.
pub fn make_decay_schedule(n0: usize, n_target: usize, beta: usize) -> Result<DecaySchedule> {
    if n0 <= n_target {
        return Err(Error::InvalidSchedule {
            context: format!("n0={n0} must exceed n_target={n_target}"),
        });
    }
    if n_target < 2 || beta < 1 {
        return Err(Error::InvalidSchedule {
            context: format!("need n_target >= 2 and beta >= 1, got {n_target}/{beta}"),
        });
    }
    let span = (n0 - n_target) as f64;
    let steps = (0..=beta)
        .map(|t| (n0 as f64 - t as f64 * span / beta as f64).round() as usize)
        .collect();
    DecaySchedule::from_steps(steps)
}

/// Runs the decay schedule, producing one mask per step. Each step's mask
/// nests inside the previous one, and the final mask is a valid V:N:M mask
/// for the target pattern.
///
/// Fine-tuning between steps lives outside this crate: the caller supplies
/// a finalized Fisher estimate per step, typically refreshed from new
/// gradients after each pruning round.
pub fn gradual_prune<F>(
    d: &DenseMatrix,
    cfg: &VnmConfig,
    schedule: &DecaySchedule,
    mut fisher_provider: F,
    mode: SaliencyMode,
) -> Result<Vec<SparsityMask>>
where
    F: FnMut(usize) -> Result<FisherInverse>,
{
    validate_config(d.rows(), d.cols(), cfg)?;
    if schedule.n_target() != cfg.n {
        return Err(Error::InvalidSchedule {
            context: format!(
                "schedule targets N={}, pattern is {cfg}",
                schedule.n_target()
            ),
        });
    }
    let mut masks: Vec<SparsityMask> = Vec::with_capacity(schedule.steps().len());
    for (t, &n_t) in schedule.steps().iter().enumerate() {
        let fisher = fisher_provider(t)?;
        let prev = masks.last();
        let mask = if n_t > SELECTED_COLUMNS {
            relaxed_row_prune(d, &fisher, n_t, cfg.m, prev)?
        } else {
            structured_prune(d, &fisher, cfg.v, n_t, cfg.m, mode, prev)?
        };
        masks.push(mask);
    }
    Ok(masks)
}
