//! Selection rules of the four arbitrator schemes.
//!
//! Each rule sees the options only through [`OptionView`]: signals, the
//! interruption policy and (for the cost scheme) a cost estimate. `active` is
//! the option that held control in the previous tick, if any. Signals are
//! expected to be masked already: an inactive option never reports
//! commitment.

use rand::Rng;

use crate::signals::BehaviorSignals;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionView {
    pub signals: BehaviorSignals,
    pub interruptible: bool,
    pub cost: Option<f64>,
}

impl OptionView {
    pub fn new(invocation: bool, commitment: bool) -> Self {
        Self {
            signals: BehaviorSignals::new(invocation, commitment),
            interruptible: true,
            cost: None,
        }
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.cost = Some(cost);
        self
    }

    pub fn interruptible(mut self, interruptible: bool) -> Self {
        self.interruptible = interruptible;
        self
    }
}

fn applicable(options: &[OptionView], active: Option<usize>, i: usize) -> bool {
    let s = options[i].signals;
    s.invocation || (active == Some(i) && s.commitment)
}

/// The active option, if it is committed and may not be interrupted.
fn protected_incumbent(options: &[OptionView], active: Option<usize>) -> Option<usize> {
    active.filter(|&a| {
        a < options.len() && options[a].signals.commitment && !options[a].interruptible
    })
}

/// Highest priority first: the lowest applicable index wins, unless the
/// incumbent is committed and not interruptible.
pub fn select_priority(options: &[OptionView], active: Option<usize>) -> Option<usize> {
    if let Some(a) = protected_incumbent(options, active) {
        return Some(a);
    }
    (0..options.len()).find(|&i| applicable(options, active, i))
}

/// Fixed order. The option at the cursor (the active option, or option 0 for
/// a fresh sequence) runs while it is invocable or committed. A commitment
/// falling edge of the active option completes its phase and moves the
/// cursor on. Returns `None` when the sequence is exhausted or the cursor
/// option is not applicable; the caller then resets the cursor.
pub fn select_sequence(options: &[OptionView], active: Option<usize>) -> Option<usize> {
    let mut cursor = active.unwrap_or(0);
    if cursor >= options.len() {
        return None;
    }
    if active == Some(cursor) && !options[cursor].signals.commitment {
        cursor += 1;
        if cursor >= options.len() {
            return None;
        }
    }
    let s = options[cursor].signals;
    if s.invocation || (active == Some(cursor) && s.commitment) {
        Some(cursor)
    } else {
        None
    }
}

fn finite_cost(o: &OptionView) -> Option<f64> {
    o.cost.filter(|c| c.is_finite())
}

/// Lowest expected cost with hysteresis. A challenger only displaces an
/// incumbent if it is cheaper by more than `margin`. Options without a finite
/// cost are skipped.
pub fn select_cost(options: &[OptionView], active: Option<usize>, margin: f64) -> Option<usize> {
    let candidates = |skip: Option<usize>| {
        (0..options.len())
            .filter(move |&i| Some(i) != skip)
            .filter(|&i| applicable(options, active, i))
            .filter_map(|i| finite_cost(&options[i]).map(|c| (i, c)))
    };
    let argmin = |skip: Option<usize>| {
        candidates(skip).fold(None, |best: Option<(usize, f64)>, (i, c)| match best {
            Some((_, bc)) if bc <= c => best,
            _ => Some((i, c)),
        })
    };

    let incumbent = active.filter(|&a| {
        a < options.len() && applicable(options, active, a) && finite_cost(&options[a]).is_some()
    });
    match incumbent {
        Some(a) => {
            if protected_incumbent(options, active) == Some(a) {
                return Some(a);
            }
            let incumbent_cost = finite_cost(&options[a]).unwrap_or(f64::INFINITY);
            match argmin(Some(a)) {
                Some((c, cc)) if cc < incumbent_cost - margin => Some(c),
                _ => Some(a),
            }
        }
        None => argmin(None).map(|(i, _)| i),
    }
}

/// Weighted random choice among the applicable options, weights renormalized
/// over that subset. A committed incumbent is kept.
pub fn select_random<R: Rng + ?Sized>(
    options: &[OptionView],
    weights: &[f64],
    active: Option<usize>,
    rng: &mut R,
) -> Option<usize> {
    if let Some(a) = active.filter(|&a| a < options.len() && options[a].signals.commitment) {
        return Some(a);
    }
    let pool: Vec<usize> = (0..options.len())
        .filter(|&i| applicable(options, active, i))
        .collect();
    match pool.len() {
        0 => None,
        1 => Some(pool[0]),
        _ => {
            let weight = |i: usize| weights.get(i).copied().unwrap_or(0.0).max(0.0);
            let total: f64 = pool.iter().map(|&i| weight(i)).sum();
            if total <= 0.0 {
                return Some(pool[rng.gen_range(0..pool.len())]);
            }
            let mut draw = rng.gen::<f64>() * total;
            for &i in &pool {
                draw -= weight(i);
                if draw < 0.0 {
                    return Some(i);
                }
            }
            pool.iter().rev().copied().find(|&i| weight(i) > 0.0)
        }
    }
}

/// Expected cost of a random arbitrator: the weight-averaged cost over its
/// applicable options.
pub(crate) fn random_expected_cost(options: &[OptionView], weights: &[f64], active: Option<usize>) -> Option<f64> {
    let mut total = 0.0;
    let mut acc = 0.0;
    for i in (0..options.len()).filter(|&i| applicable(options, active, i)) {
        let w = weights.get(i).copied().unwrap_or(0.0).max(0.0);
        if let Some(c) = finite_cost(&options[i]) {
            total += w;
            acc += w * c;
        }
    }
    (total > 0.0).then(|| acc / total)
}
