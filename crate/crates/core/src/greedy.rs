//! Greedy baseline: capped best-channel association, uniform per-satellite
//! bandwidth split and closed-form per-link powers.

use serde::{Deserialize, Serialize};

use crate::assoc_solver::BinaryAssociation;
use crate::convex_solver::{min_power_for_rate, Allocation};
use crate::error::{Error, Result};
use crate::instance::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum GreedyMode {
    /// Per-satellite caps raised to `ceil(count / M)` when rounding would
    /// leave terminals without capacity; BS bandwidth weighted by each cell's
    /// own UE count.
    #[default]
    Repaired,
    /// Caps exactly `floor(count / M + 0.5)` and a single UE-count constant
    /// for every BS. Capacity shortfalls are reported as errors.
    Literal { mean_ues: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreedyResult {
    pub association: BinaryAssociation,
    pub allocation: Allocation,
    /// Whether each joint terminal (SUEs first) meets its demand within its cap.
    pub satisfied: Vec<bool>,
    pub satisfaction: f64,
    pub feasible: bool,
    pub total_power: f64,
}

/// Per-satellite connection cap for `count` terminals over `m` satellites.
pub fn satellite_cap(count: usize, m: usize, mode: &GreedyMode) -> usize {
    let literal = (count as f64 / m as f64 + 0.5).floor() as usize;
    match mode {
        GreedyMode::Repaired => literal.max(count.div_ceil(m)),
        GreedyMode::Literal { .. } => literal,
    }
}

/// Repeatedly takes the largest remaining gain; a satellite with spare capacity
/// takes that terminal, a full satellite is removed from consideration.
fn greedy_pass(gains: &[Vec<f64>], cap: usize) -> Result<Vec<Option<usize>>> {
    let m = gains.len();
    let cols = gains.first().map_or(0, Vec::len);
    let mut live: Vec<Vec<bool>> = vec![vec![true; cols]; m];
    let mut capacity = vec![cap; m];
    let mut out = vec![None; cols];
    let mut assigned = 0;
    while assigned < cols {
        let mut best: Option<(usize, usize)> = None;
        for s in 0..m {
            for t in 0..cols {
                if live[s][t] && best.is_none_or(|(bs, bt)| gains[s][t] > gains[bs][bt]) {
                    best = Some((s, t));
                }
            }
        }
        let Some((s, t)) = best else {
            return Err(Error::Infeasible(format!(
                "satellite capacity exhausted with {} of {cols} terminals unassigned",
                cols - assigned
            )));
        };
        if capacity[s] > 0 {
            out[t] = Some(s);
            capacity[s] -= 1;
            assigned += 1;
            for row in live.iter_mut() {
                row[t] = false;
            }
        } else {
            live[s].iter_mut().for_each(|v| *v = false);
        }
    }
    Ok(out)
}

/// BS pass over `g`, then SUE pass over `h`.
pub fn greedy_associate(inst: &ProblemInstance, mode: &GreedyMode) -> Result<BinaryAssociation> {
    let m = inst.num_satellites();
    let bs = greedy_pass(&inst.g, satellite_cap(inst.num_bs(), m, mode))?;
    let sue = greedy_pass(&inst.h, satellite_cap(inst.num_sue(), m, mode))?;
    Ok(BinaryAssociation {
        num_satellites: m,
        sue,
        bs,
    })
}

/// Uniform split of each satellite's bandwidth, a BS counting as many users as
/// its cell holds.
pub fn greedy_bandwidth(inst: &ProblemInstance, assoc: &BinaryAssociation, mode: &GreedyMode) -> (Vec<f64>, Vec<f64>) {
    let m = inst.num_satellites();
    let bs_weight = |n: usize| match mode {
        GreedyMode::Repaired => f64::from(inst.ue_counts[n]),
        GreedyMode::Literal { mean_ues } => *mean_ues,
    };
    let mut units = vec![0.0; m];
    for s in assoc.sue.iter().flatten() {
        units[*s] += 1.0;
    }
    for (n, s) in assoc.bs.iter().enumerate() {
        if let Some(s) = s {
            units[*s] += bs_weight(n);
        }
    }
    let per: Vec<f64> = (0..m)
        .map(|s| if units[s] > 0.0 { inst.w_leo[s] / units[s] } else { 0.0 })
        .collect();
    let w_sue = assoc.sue.iter().map(|s| s.map_or(0.0, |s| per[s])).collect();
    let w_bs = assoc
        .bs
        .iter()
        .enumerate()
        .map(|(n, s)| s.map_or(0.0, |s| bs_weight(n) * per[s]))
        .collect();
    (w_sue, w_bs)
}

/// Closed-form powers; terminals that cannot meet demand transmit at their cap.
pub fn greedy_power(inst: &ProblemInstance, assoc: &BinaryAssociation, w_sue: &[f64], w_bs: &[f64]) -> GreedyResult {
    let mut alloc = Allocation::for_instance(inst);
    alloc.w_sue = w_sue.to_vec();
    alloc.w_bs = w_bs.to_vec();
    let nt = inst.num_terminals();
    let mut satisfied = vec![false; nt];
    for (t, ok) in satisfied.iter_mut().enumerate() {
        let Some(m) = assoc.satellite_of(t) else { continue };
        let cap = inst.p_max(t);
        let w = alloc.bandwidth(t);
        let needed = if w > 0.0 {
            min_power_for_rate(inst.demand(t), w, inst.gain(m, t), inst.noise[m]).unwrap_or(f64::INFINITY)
        } else {
            f64::INFINITY
        };
        *ok = needed <= cap * (1.0 + 1e-9);
        alloc.set_power(m, t, needed.min(cap));
    }
    let count = satisfied.iter().filter(|&&s| s).count();
    let total_power = (0..nt)
        .filter_map(|t| assoc.satellite_of(t).map(|m| alloc.power(m, t)))
        .sum();
    GreedyResult {
        association: assoc.clone(),
        allocation: alloc,
        satisfaction: if nt == 0 { 1.0 } else { count as f64 / nt as f64 },
        feasible: count == nt,
        satisfied,
        total_power,
    }
}

/// Full greedy pipeline. In strict mode a capacity deadlock leaves the
/// remaining terminals unassigned at zero power and unsatisfied.
pub fn run_greedy(inst: &ProblemInstance, mode: &GreedyMode) -> Result<GreedyResult> {
    inst.validate()?;
    let assoc = match greedy_associate(inst, mode) {
        Ok(a) => a,
        Err(Error::Infeasible(_)) if matches!(mode, GreedyMode::Literal { .. }) => {
            let m = inst.num_satellites();
            let cap_bs = satellite_cap(inst.num_bs(), m, mode);
            let cap_sue = satellite_cap(inst.num_sue(), m, mode);
            BinaryAssociation {
                num_satellites: m,
                bs: partial_pass(&inst.g, cap_bs),
                sue: partial_pass(&inst.h, cap_sue),
            }
        }
        Err(e) => return Err(e),
    };
    let (w_sue, w_bs) = greedy_bandwidth(inst, &assoc, mode);
    Ok(greedy_power(inst, &assoc, &w_sue, &w_bs))
}

/// Like `greedy_pass` but stops at exhaustion instead of failing.
fn partial_pass(gains: &[Vec<f64>], cap: usize) -> Vec<Option<usize>> {
    let m = gains.len();
    let cols = gains.first().map_or(0, Vec::len);
    let mut live = vec![vec![true; cols]; m];
    let mut capacity = vec![cap; m];
    let mut out = vec![None; cols];
    loop {
        let mut best: Option<(usize, usize)> = None;
        for s in 0..m {
            for t in 0..cols {
                if live[s][t] && best.is_none_or(|(bs, bt)| gains[s][t] > gains[bs][bt]) {
                    best = Some((s, t));
                }
            }
        }
        let Some((s, t)) = best else { return out };
        if capacity[s] > 0 {
            out[t] = Some(s);
            capacity[s] -= 1;
            for row in live.iter_mut() {
                row[t] = false;
            }
        } else {
            live[s].iter_mut().for_each(|v| *v = false);
        }
    }
}
