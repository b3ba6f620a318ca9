//! Alternating optimisation of association and resource allocation.
//!
//! Each iteration solves the convex allocation problem for the current
//! (relaxed) association, then the association problem for that allocation,
//! and moves the relaxed association a step `rho` towards the new integral
//! one. The run ends with the cheapest integral association seen (initial,
//! rounded, or produced by an association step), optionally polished by
//! single-terminal moves.

use serde::{Deserialize, Serialize};

use crate::assoc_solver::{priced_moves, solve_association, AssocOptions, BinaryAssociation};
use crate::convex_solver::{
    solve_allocation, terminal_rate, Allocation, FractionalAssociation, SolveReport, SolverOptions,
};
use crate::error::{Error, Result};
use crate::greedy::{greedy_associate, GreedyMode};
use crate::instance::ProblemInstance;
use crate::units::watts_to_dbw;

/// How the association step treats the satellite bandwidth budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AssociationStep {
    /// Budgets enter the link cost through the allocation step's bandwidth
    /// prices; each terminal picks its cheapest admissible link.
    #[default]
    Priced,
    /// Budgets are hard constraints on the fixed bandwidths (exact
    /// generalized-assignment solve). Since the allocation step always uses
    /// the whole budget, this keeps the starting association.
    Budgeted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub rho: f64,
    pub eps: f64,
    pub max_iters: usize,
    pub association_step: AssociationStep,
    /// Finish Phase 2 with single-terminal moves until none lowers the power.
    pub polish: bool,
    pub solver: SolverOptions,
    pub assoc: AssocOptions,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            rho: 0.5,
            eps: 1e-4,
            max_iters: 100,
            association_step: AssociationStep::Priced,
            polish: true,
            solver: SolverOptions::default(),
            assoc: AssocOptions::default(),
        }
    }
}

impl AlgorithmConfig {
    /// `rho = 1` is accepted so the plain alternating scheme can be compared.
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::field("rho", format!("must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::field("eps", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::field("max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    MaxIter,
    /// A subproblem became infeasible after iteration 0; the result is built
    /// from the last feasible iterate.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total_power_w: f64,
    pub total_power_dbw: f64,
    /// Demand met within 1e-9 relative, per joint terminal (SUEs first).
    pub satisfied: Vec<bool>,
    pub satisfaction: f64,
    pub connections: Vec<usize>,
    pub bandwidth_used: Vec<f64>,
    pub utilization: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub allocation: Allocation,
    pub association: BinaryAssociation,
    pub fractional_trace: Vec<FractionalAssociation>,
    /// Relaxed-problem objective per iteration, W.
    pub objective_trace: Vec<f64>,
    pub status: RunStatus,
    /// Final integral objective, W.
    pub objective: f64,
    pub report: SolveReport,
    pub satisfaction: f64,
    pub per_leo_connections: Vec<usize>,
    pub metrics: Metrics,
}

impl Solution {
    pub fn iterations(&self) -> usize {
        self.objective_trace.len()
    }
}

/// Each terminal on the satellite with the largest gain.
pub fn best_gain_association(inst: &ProblemInstance) -> BinaryAssociation {
    let mut a = BinaryAssociation::for_instance(inst);
    for t in 0..inst.num_terminals() {
        let best = (0..inst.num_satellites()).fold(0, |b, m| if inst.gain(m, t) > inst.gain(b, t) { m } else { b });
        a.assign(t, Some(best));
    }
    a
}

/// Starting association: the capped greedy association, or best-gain
/// association when the caps leave terminals unassigned.
pub fn initialize_association(inst: &ProblemInstance) -> Result<BinaryAssociation> {
    inst.validate()?;
    if inst.num_satellites() == 0 {
        return Err(Error::Infeasible("no satellites".into()));
    }
    match greedy_associate(inst, &GreedyMode::Repaired) {
        Ok(a) => Ok(a),
        Err(e) if e.is_infeasible() => Ok(best_gain_association(inst)),
        Err(e) => Err(e),
    }
}

/// Spreads demand over bandwidth: terminals in decreasing demand order, each
/// on the satellite whose load per hertz stays lowest, ties to the larger gain.
pub fn load_balanced_association(inst: &ProblemInstance) -> BinaryAssociation {
    let m = inst.num_satellites();
    let mut order: Vec<usize> = (0..inst.num_terminals()).collect();
    order.sort_by(|&a, &b| inst.demand(b).total_cmp(&inst.demand(a)).then(a.cmp(&b)));
    let mut load = vec![0.0; m];
    let mut a = BinaryAssociation::for_instance(inst);
    for t in order {
        let key = |s: usize| (load[s] + inst.demand(t)) / inst.w_leo[s];
        let best = (0..m)
            .min_by(|&x, &y| key(x).total_cmp(&key(y)).then(inst.gain(y, t).total_cmp(&inst.gain(x, t))))
            .unwrap_or(0);
        load[best] += inst.demand(t);
        a.assign(t, Some(best));
    }
    a
}

/// Candidate starting points, tried in order until one admits a feasible
/// allocation: the initial association, the load-balanced association and
/// the best-gain association.
fn starting_point(inst: &ProblemInstance, config: &AlgorithmConfig) -> Result<(BinaryAssociation, (Allocation, SolveReport))> {
    let init = initialize_association(inst)?;
    let try_solve = |a: &BinaryAssociation| solve_allocation(inst, &FractionalAssociation::from(a), &config.solver);
    let mut last_err = match try_solve(&init) {
        Ok(r) => return Ok((init, r)),
        Err(e) if e.is_infeasible() => e,
        Err(e) => return Err(e),
    };
    for a in [load_balanced_association(inst), best_gain_association(inst)] {
        if a == init {
            continue;
        }
        match try_solve(&a) {
            Ok(r) => return Ok((a, r)),
            Err(e) if e.is_infeasible() => last_err = e,
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

/// Relaxation step `(1 - rho) prev + rho new`.
pub fn update_association(prev: &FractionalAssociation, new: &BinaryAssociation, rho: f64) -> FractionalAssociation {
    let target = FractionalAssociation::from(new);
    let mix = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        a.iter()
            .zip(b)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (1.0 - rho) * x + rho * y).collect())
            .collect()
    };
    FractionalAssociation {
        alpha: mix(&prev.alpha, &target.alpha),
        mu: mix(&prev.mu, &target.mu),
    }
}

/// Largest weight per terminal, ties to the lower satellite index; terminals
/// without weight go to their best-gain satellite.
fn round_argmax(frac: &FractionalAssociation, inst: &ProblemInstance) -> BinaryAssociation {
    let m = inst.num_satellites();
    let mut out = BinaryAssociation::for_instance(inst);
    for t in 0..inst.num_terminals() {
        let mut best = 0;
        for s in 1..m {
            if frac.weight(s, t) > frac.weight(best, t) {
                best = s;
            }
        }
        if frac.weight(best, t) <= 0.0 {
            best = (0..m).fold(0, |b, s| if inst.gain(s, t) > inst.gain(b, t) { s } else { b });
        }
        out.assign(t, Some(best));
    }
    out
}

/// Argmax rounding followed by a bandwidth repair that moves, one at a time,
/// the terminal whose move to a satellite with spare budget costs the least
/// gain (in dB) until every budget holds.
pub fn round_association(
    frac: &FractionalAssociation,
    inst: &ProblemInstance,
    alloc: &Allocation,
) -> Result<BinaryAssociation> {
    let m = inst.num_satellites();
    let nt = inst.num_terminals();
    let mut out = round_argmax(frac, inst);
    let mut used = vec![0.0; m];
    for t in 0..nt {
        used[out.satellite_of(t).unwrap_or(0)] += alloc.bandwidth(t);
    }
    let over = |used: &[f64], s: usize| used[s] > inst.w_leo[s] * (1.0 + 1e-9);
    while let Some(src) = (0..m).find(|&s| over(&used, s)) {
        let mut best: Option<(f64, usize, usize)> = None;
        for t in (0..nt).filter(|&t| out.satellite_of(t) == Some(src)) {
            let w = alloc.bandwidth(t);
            for dst in (0..m).filter(|&d| d != src) {
                if used[dst] + w > inst.w_leo[dst] * (1.0 + 1e-9) {
                    continue;
                }
                let penalty = (inst.gain(src, t) / inst.gain(dst, t)).log10();
                if best.is_none_or(|(p, _, _)| penalty < p) {
                    best = Some((penalty, t, dst));
                }
            }
        }
        let Some((_, t, dst)) = best else {
            return Err(Error::Infeasible(format!("bandwidth budget of satellite {src} cannot be repaired")));
        };
        let w = alloc.bandwidth(t);
        used[src] -= w;
        used[dst] += w;
        out.assign(t, Some(dst));
    }
    Ok(out)
}

pub fn evaluate_solution(inst: &ProblemInstance, assoc: &BinaryAssociation, alloc: &Allocation) -> Metrics {
    let m = inst.num_satellites();
    let nt = inst.num_terminals();
    let frac = FractionalAssociation::from(assoc);
    let mut total = 0.0;
    let mut used = vec![0.0; m];
    let mut satisfied = vec![false; nt];
    for (t, ok) in satisfied.iter_mut().enumerate() {
        if let Some(s) = assoc.satellite_of(t) {
            total += alloc.power(s, t);
            used[s] += alloc.bandwidth(t);
        }
        let demand = inst.demand(t);
        *ok = terminal_rate(alloc, &frac, inst, t) >= demand * (1.0 - 1e-9);
    }
    let count = satisfied.iter().filter(|&&s| s).count();
    Metrics {
        total_power_w: total,
        total_power_dbw: watts_to_dbw(total),
        satisfaction: if nt == 0 { 1.0 } else { count as f64 / nt as f64 },
        satisfied,
        connections: assoc.connections(),
        utilization: used.iter().zip(&inst.w_leo).map(|(u, b)| u / b).collect(),
        bandwidth_used: used,
    }
}

/// Runs the alternating scheme from the default starting point.
pub fn run_algorithm1(inst: &ProblemInstance, config: &AlgorithmConfig) -> Result<Solution> {
    config.validate()?;
    inst.validate()?;
    let (init, first) = starting_point(inst, config)?;
    run_from(inst, config, init, first)
}

/// Runs the alternating scheme from a given integral association.
pub fn run_algorithm1_from(inst: &ProblemInstance, config: &AlgorithmConfig, init: BinaryAssociation) -> Result<Solution> {
    config.validate()?;
    let first = solve_allocation(inst, &FractionalAssociation::from(&init), &config.solver)?;
    run_from(inst, config, init, first)
}

type Step = (BinaryAssociation, FractionalAssociation, (Allocation, SolveReport));
type Integral = (BinaryAssociation, Allocation, SolveReport);

/// Priced association step with a descent safeguard. The baseline relaxes
/// toward the rounded incumbent. The priced moves, best first, are tried for
/// halving prefixes; a prefix is taken when its relaxed iterate beats the
/// baseline or its integral target, possibly after one more priced step,
/// beats the best integral point so far.
fn priced_step(
    inst: &ProblemInstance,
    config: &AlgorithmConfig,
    frac: &FractionalAssociation,
    alloc: &Allocation,
    price: &[f64],
    best: &mut Integral,
) -> Result<Step> {
    let incumbent = round_argmax(frac, inst).selections();
    let moves = priced_moves(inst, alloc, price, &incumbent);
    let target = |k: usize| {
        let mut sel = incumbent.clone();
        for mv in &moves[..k] {
            sel[mv.terminal] = Some(mv.satellite);
        }
        BinaryAssociation::from_selections(inst.num_satellites(), inst.num_sue(), &sel)
    };
    let relax = |target: BinaryAssociation| -> Result<Step> {
        let next = update_association(frac, &target, config.rho);
        let r = solve_allocation(inst, &next, &config.solver)?;
        Ok((target, next, r))
    };
    let base = relax(target(0));
    let base_obj = match &base {
        Ok(b) => b.2 .1.objective,
        Err(e) if e.is_infeasible() => f64::INFINITY,
        Err(_) => return base,
    };
    let solve_integral = |a: &BinaryAssociation| match solve_allocation(inst, &FractionalAssociation::from(a), &config.solver) {
        Ok(x) => Ok(Some(x)),
        Err(e) if e.is_infeasible() => Ok(None),
        Err(e) => Err(e),
    };
    let mut k = moves.len();
    while k > 0 {
        let mut a = target(k);
        let mut improved = false;
        if let Some((al, r)) = solve_integral(&a)? {
            if r.objective < best.2.objective {
                *best = (a.clone(), al, r);
                improved = true;
            } else {
                // One step of lookahead from the target, never undoing a move.
                let moved: Vec<usize> = moves[..k].iter().map(|m| m.terminal).collect();
                let mut sel = a.selections();
                let mut changed = false;
                for mv in priced_moves(inst, &al, &r.bandwidth_price, &sel) {
                    if !moved.contains(&mv.terminal) {
                        sel[mv.terminal] = Some(mv.satellite);
                        changed = true;
                    }
                }
                if changed {
                    let a2 = BinaryAssociation::from_selections(inst.num_satellites(), inst.num_sue(), &sel);
                    if let Some((al2, r2)) = solve_integral(&a2)? {
                        if r2.objective < best.2.objective {
                            *best = (a2.clone(), al2, r2);
                            a = a2;
                            improved = true;
                        }
                    }
                }
            }
        }
        match relax(a) {
            Ok(c) if improved || c.2 .1.objective < base_obj => return Ok(c),
            Ok(_) => {}
            Err(e) if e.is_infeasible() => {}
            Err(e) => return Err(e),
        }
        k /= 2;
    }
    base
}

/// First-improvement local search over single-terminal moves.
fn polish(inst: &ProblemInstance, config: &AlgorithmConfig, mut best: Integral) -> Result<Integral> {
    let m = inst.num_satellites();
    loop {
        let mut improved = false;
        for t in 0..inst.num_terminals() {
            for s in 0..m {
                let mut sel = best.0.selections();
                if sel[t] == Some(s) {
                    continue;
                }
                sel[t] = Some(s);
                let a = BinaryAssociation::from_selections(m, inst.num_sue(), &sel);
                match solve_allocation(inst, &FractionalAssociation::from(&a), &config.solver) {
                    Ok((al, r)) if r.objective < best.2.objective * (1.0 - 1e-9) => {
                        best = (a, al, r);
                        improved = true;
                    }
                    Ok(_) => {}
                    Err(e) if e.is_infeasible() => {}
                    Err(e) => return Err(e),
                }
            }
        }
        if !improved {
            return Ok(best);
        }
    }
}

fn run_from(
    inst: &ProblemInstance,
    config: &AlgorithmConfig,
    init: BinaryAssociation,
    first: (Allocation, SolveReport),
) -> Result<Solution> {
    let mut frac = FractionalAssociation::from(&init);
    let mut fractional_trace = vec![frac.clone()];
    let mut objective_trace = vec![first.1.objective];
    // Integral solutions seen so far, best kept.
    let mut best = (init.clone(), first.0.clone(), first.1.clone());
    let mut alloc = first.0;
    let mut price = first.1.bandwidth_price;
    let mut last_ilp = init;
    let mut status = RunStatus::MaxIter;

    for _ in 1..=config.max_iters {
        let step = match config.association_step {
            AssociationStep::Priced => priced_step(inst, config, &frac, &alloc, &price, &mut best),
            AssociationStep::Budgeted => solve_association(inst, &alloc, &config.assoc).and_then(|s| {
                let next = update_association(&frac, &s.association, config.rho);
                let r = solve_allocation(inst, &next, &config.solver)?;
                Ok((s.association, next, r))
            }),
        };
        let (ilp, next_frac, (next, report)) = match step {
            Ok(s) => s,
            Err(e) if e.is_infeasible() => {
                status = RunStatus::Infeasible;
                break;
            }
            Err(e) => return Err(e),
        };
        frac = next_frac;
        last_ilp = ilp;
        let prev = *objective_trace.last().unwrap_or(&report.objective);
        objective_trace.push(report.objective);
        fractional_trace.push(frac.clone());
        alloc = next;
        price = report.bandwidth_price;
        if objective_trace.len() >= config.max_iters {
            break;
        }
        if (report.objective - prev).abs() <= config.eps * prev.abs() {
            status = RunStatus::Converged;
            break;
        }
    }
    if objective_trace.len() == 1 && status == RunStatus::MaxIter && config.max_iters > 1 {
        status = RunStatus::Converged;
    }

    // Phase 2: rounded association, then the last association-step output.
    let mut candidates = Vec::new();
    if let Ok(r) = round_association(&frac, inst, &alloc) {
        candidates.push(r);
    }
    candidates.push(last_ilp);
    for cand in candidates {
        if cand == best.0 {
            continue;
        }
        if let Ok((a, rep)) = solve_allocation(inst, &FractionalAssociation::from(&cand), &config.solver) {
            if rep.objective < best.2.objective {
                best = (cand, a, rep);
            }
        }
    }
    if config.polish {
        best = polish(inst, config, best)?;
    }
    let (association, allocation, report) = best;
    let metrics = evaluate_solution(inst, &association, &allocation);
    Ok(Solution {
        objective: report.objective,
        satisfaction: metrics.satisfaction,
        per_leo_connections: metrics.connections.clone(),
        allocation,
        association,
        fractional_trace,
        objective_trace,
        status,
        report,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_scenario, ScenarioConfig};

    #[test]
    fn update_rule() {
        let prev = FractionalAssociation {
            alpha: vec![vec![0.0], vec![1.0]],
            mu: vec![vec![], vec![]],
        };
        let new = BinaryAssociation {
            num_satellites: 2,
            sue: vec![Some(0)],
            bs: vec![],
        };
        let half = update_association(&prev, &new, 0.5);
        assert_eq!(half.alpha, vec![vec![0.5], vec![0.5]]);
        assert_eq!(update_association(&prev, &new, 1.0).alpha, vec![vec![1.0], vec![0.0]]);

        let rho = 0.7;
        let mut x = prev.clone();
        for i in 1..=20 {
            x = update_association(&x, &new, rho);
            let want = (1.0 - rho).powi(i);
            assert!((x.alpha[1][0] - want).abs() < 1e-14);
            assert!((x.column_sum(0) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rounding_argmax() {
        let inst = crate::convex_solver::tests::single_sat(&[1e-12], 1e8, 5e8);
        let mut inst2 = inst.clone();
        inst2.h = vec![vec![1e-12], vec![1e-12]];
        inst2.w_leo = vec![5e8; 2];
        inst2.noise = vec![inst.noise[0]; 2];
        let frac = FractionalAssociation {
            alpha: vec![vec![0.6], vec![0.4]],
            mu: vec![vec![], vec![]],
        };
        let mut alloc = Allocation::for_instance(&inst2);
        alloc.w_sue = vec![1e8];
        let r = round_association(&frac, &inst2, &alloc).unwrap();
        assert_eq!(r.sue, vec![Some(0)]);
        let bin = BinaryAssociation {
            num_satellites: 2,
            sue: vec![Some(1)],
            bs: vec![],
        };
        assert_eq!(round_association(&FractionalAssociation::from(&bin), &inst2, &alloc).unwrap(), bin);
    }

    #[test]
    fn evaluate_trivial() {
        let inst = crate::convex_solver::tests::single_sat(&[1e-12], 1e8, 5e8);
        let assoc = best_gain_association(&inst);
        let mut alloc = Allocation::for_instance(&inst);
        let m = evaluate_solution(&inst, &assoc, &alloc);
        assert_eq!(m.total_power_w, 0.0);
        assert_eq!(m.satisfaction, 0.0);
        alloc.p[0][0] = 3.5;
        alloc.w_sue[0] = 5e8;
        let m = evaluate_solution(&inst, &assoc, &alloc);
        assert_eq!(m.total_power_w, 3.5);
        assert_eq!(m.connections, vec![1]);
        assert_eq!(m.utilization, vec![1.0]);
    }

    #[test]
    fn default_scenario_converges() {
        let inst = generate_scenario(&ScenarioConfig::default()).unwrap().instance;
        let sol = run_algorithm1(&inst, &AlgorithmConfig::default()).unwrap();
        assert_eq!(sol.status, RunStatus::Converged);
        assert_eq!(sol.satisfaction, 1.0);
        assert_eq!(sol.objective_trace.len(), sol.fractional_trace.len());
        for f in &sol.fractional_trace {
            for t in 0..inst.num_terminals() {
                assert!(f.column_sum(t) <= 1.0 + 1e-12);
            }
        }
        let init = initialize_association(&inst).unwrap();
        let c = init.connections();
        assert!(c[1] >= c[0] && c[1] >= c[2]);
    }
}
