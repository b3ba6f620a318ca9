//! Satellite association for fixed powers and bandwidths.
//!
//! With powers and bandwidths frozen, every terminal's demand constraint only
//! admits satellites whose fixed link already meets the demand within the
//! power cap, so the problem is a generalized assignment problem: each
//! terminal picks one candidate satellite, satellites have bandwidth
//! capacities, and the cost is the fixed link power. It is solved exactly by
//! best-first branch and bound over LP relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::convex_solver::{link_rate, min_power_for_rate, Allocation};
use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::simplex::{LinearProgram, LpStatus};

/// Integral association stored as the serving satellite of each terminal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryAssociation {
    pub num_satellites: usize,
    pub sue: Vec<Option<usize>>,
    pub bs: Vec<Option<usize>>,
}

impl BinaryAssociation {
    pub fn unassigned(m: usize, k: usize, n: usize) -> Self {
        Self {
            num_satellites: m,
            sue: vec![None; k],
            bs: vec![None; n],
        }
    }

    pub fn for_instance(inst: &ProblemInstance) -> Self {
        Self::unassigned(inst.num_satellites(), inst.num_sue(), inst.num_bs())
    }

    pub fn num_satellites(&self) -> usize {
        self.num_satellites
    }

    pub fn num_terminals(&self) -> usize {
        self.sue.len() + self.bs.len()
    }

    pub fn satellite_of(&self, t: usize) -> Option<usize> {
        if t < self.sue.len() {
            self.sue[t]
        } else {
            self.bs[t - self.sue.len()]
        }
    }

    pub fn assign(&mut self, t: usize, m: Option<usize>) {
        if t < self.sue.len() {
            self.sue[t] = m;
        } else {
            let k = self.sue.len();
            self.bs[t - k] = m;
        }
    }

    /// Terminal-ordered serving satellites (SUEs first).
    pub fn selections(&self) -> Vec<Option<usize>> {
        self.sue.iter().chain(&self.bs).copied().collect()
    }

    pub fn from_selections(m: usize, k: usize, sel: &[Option<usize>]) -> Self {
        Self {
            num_satellites: m,
            sue: sel[..k].to_vec(),
            bs: sel[k..].to_vec(),
        }
    }

    /// M×K 0/1 matrix.
    pub fn alpha(&self) -> Vec<Vec<u8>> {
        indicator(self.num_satellites, &self.sue)
    }

    /// M×N 0/1 matrix.
    pub fn mu(&self) -> Vec<Vec<u8>> {
        indicator(self.num_satellites, &self.bs)
    }

    /// Number of terminals served by each satellite.
    pub fn connections(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_satellites];
        for m in self.sue.iter().chain(&self.bs).flatten() {
            c[*m] += 1;
        }
        c
    }

    pub fn is_complete(&self) -> bool {
        self.sue.iter().chain(&self.bs).all(Option::is_some)
    }
}

fn indicator(m: usize, sel: &[Option<usize>]) -> Vec<Vec<u8>> {
    let mut out = vec![vec![0u8; sel.len()]; m];
    for (t, s) in sel.iter().enumerate() {
        if let Some(s) = s {
            out[*s][t] = 1;
        }
    }
    out
}

/// Fixed link data defining one association problem.
#[derive(Debug, Clone)]
pub struct AssociationProblem {
    /// Fixed transmit power per (satellite, joint terminal).
    pub power: Vec<Vec<f64>>,
    /// Rate each link achieves at its fixed power and the terminal's bandwidth.
    pub rate: Vec<Vec<f64>>,
    /// Fixed bandwidth per terminal.
    pub bandwidth: Vec<f64>,
    pub demand: Vec<f64>,
    pub p_max: Vec<f64>,
    pub budget: Vec<f64>,
    pub num_sue: usize,
}

/// Relative slack for float comparisons in the association constraints.
pub const REL_TOL: f64 = 1e-9;

impl AssociationProblem {
    /// Freezes `alloc`. Links carrying no power are priced at the power that
    /// would exactly meet the terminal's demand on its current bandwidth,
    /// capped at the terminal's power limit.
    pub fn build(inst: &ProblemInstance, alloc: &Allocation) -> Self {
        let m = inst.num_satellites();
        let nt = inst.num_terminals();
        let mut power = vec![vec![0.0; nt]; m];
        let mut rate = vec![vec![0.0; nt]; m];
        for s in 0..m {
            for t in 0..nt {
                let w = alloc.bandwidth(t);
                let mut p = alloc.power(s, t);
                if p <= 0.0 && w > 0.0 {
                    p = min_power_for_rate(inst.demand(t), w, inst.gain(s, t), inst.noise[s])
                        .map_or(inst.p_max(t), |p| p.min(inst.p_max(t)));
                }
                power[s][t] = p;
                rate[s][t] = link_rate(p, w, inst.gain(s, t), inst.noise[s]);
            }
        }
        Self {
            power,
            rate,
            bandwidth: (0..nt).map(|t| alloc.bandwidth(t)).collect(),
            demand: (0..nt).map(|t| inst.demand(t)).collect(),
            p_max: (0..nt).map(|t| inst.p_max(t)).collect(),
            budget: inst.w_leo.clone(),
            num_sue: inst.num_sue(),
        }
    }

    pub fn num_satellites(&self) -> usize {
        self.budget.len()
    }

    pub fn num_terminals(&self) -> usize {
        self.demand.len()
    }

    /// Whether satellite `m` alone satisfies terminal `t`'s demand and power cap.
    pub fn link_admissible(&self, m: usize, t: usize) -> bool {
        self.rate[m][t] >= self.demand[t] * (1.0 - REL_TOL)
            && self.power[m][t] <= self.p_max[t] * (1.0 + REL_TOL)
            && self.bandwidth[t] <= self.budget[m] * (1.0 + REL_TOL)
    }

    pub fn candidates(&self, t: usize) -> Vec<usize> {
        (0..self.num_satellites()).filter(|&m| self.link_admissible(m, t)).collect()
    }

    pub fn objective(&self, sel: &[Option<usize>]) -> f64 {
        sel.iter()
            .enumerate()
            .filter_map(|(t, s)| s.map(|m| self.power[m][t]))
            .sum()
    }

    /// Checks every constraint of the association problem directly.
    pub fn is_feasible(&self, sel: &[Option<usize>]) -> bool {
        let mut used = vec![0.0; self.num_satellites()];
        for (t, s) in sel.iter().enumerate() {
            let (rate, power) = match s {
                Some(m) => {
                    used[*m] += self.bandwidth[t];
                    (self.rate[*m][t], self.power[*m][t])
                }
                None => (0.0, 0.0),
            };
            if rate < self.demand[t] * (1.0 - REL_TOL) || power > self.p_max[t] * (1.0 + REL_TOL) {
                return false;
            }
        }
        used.iter().zip(&self.budget).all(|(u, b)| *u <= b * (1.0 + REL_TOL))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssocStatus {
    Optimal,
    /// Node limit hit; the incumbent is returned unproven.
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct AssocSolution {
    pub association: BinaryAssociation,
    pub objective: f64,
    pub status: AssocStatus,
    pub nodes: usize,
    pub root_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssocOptions {
    /// Relative bound gap at which a node is pruned.
    pub tol: f64,
    pub node_limit: usize,
}

impl Default for AssocOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            node_limit: 1_000_000,
        }
    }
}

pub fn solve_association(inst: &ProblemInstance, alloc: &Allocation, opts: &AssocOptions) -> Result<AssocSolution> {
    let prob = AssociationProblem::build(inst, alloc);
    let mut sol = branch_and_bound(&prob, opts)?;
    sol.association = BinaryAssociation::from_selections(
        inst.num_satellites(),
        inst.num_sue(),
        &sol.association.selections(),
    );
    Ok(sol)
}

/// A terminal switch proposed by the priced association step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricedMove {
    pub terminal: usize,
    pub satellite: usize,
    /// Priced-cost reduction relative to the incumbent link, in (0, 1].
    pub gain: f64,
}

/// Association step with the bandwidth budgets priced instead of enforced.
///
/// Each terminal's priced cost on link `m` is `p̄ + price[m] · W̄`, where
/// `price` holds the allocation step's budget multipliers (W/Hz). Returns the
/// terminals whose cheapest admissible link differs from `incumbent[t]`,
/// sorted by decreasing relative gain. Ties go to the lower satellite index.
/// A terminal whose incumbent link is inadmissible always moves, with gain 1.
pub fn priced_moves(
    inst: &ProblemInstance,
    alloc: &Allocation,
    price: &[f64],
    incumbent: &[Option<usize>],
) -> Vec<PricedMove> {
    let prob = AssociationProblem::build(inst, alloc);
    let mut moves = Vec::new();
    for t in 0..prob.num_terminals() {
        let cands = prob.candidates(t);
        let cost = |m: usize| prob.power[m][t] + price[m] * prob.bandwidth[t];
        let Some(best) = cands.iter().copied().min_by(|&a, &b| cost(a).total_cmp(&cost(b)).then(a.cmp(&b))) else {
            continue;
        };
        let gain = match incumbent[t] {
            Some(k) if k == best => continue,
            Some(k) if cands.contains(&k) => {
                let ck = cost(k);
                if cost(best) >= ck {
                    continue;
                }
                (ck - cost(best)) / ck
            }
            _ => 1.0,
        };
        moves.push(PricedMove { terminal: t, satellite: best, gain });
    }
    moves.sort_by(|a, b| b.gain.total_cmp(&a.gain).then(a.terminal.cmp(&b.terminal)));
    moves
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fix {
    Free,
    Zero,
    One,
}

struct Node {
    bound: f64,
    id: usize,
    fixes: Vec<Fix>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Candidate variable (satellite, terminal) of the assignment problem.
#[derive(Debug, Clone, Copy)]
struct Var {
    sat: usize,
    terminal: usize,
    cost: f64,
}

enum Relaxation {
    Infeasible,
    Solved { bound: f64, x: Vec<f64> },
}

struct Gap<'a> {
    prob: &'a AssociationProblem,
    vars: Vec<Var>,
    cost_scale: f64,
}

impl Gap<'_> {
    fn relax(&self, fixes: &[Fix]) -> Relaxation {
        let prob = self.prob;
        let nt = prob.num_terminals();
        let mut assigned = vec![false; nt];
        let mut remaining = prob.budget.clone();
        let mut fixed_cost = 0.0;
        for (v, f) in self.vars.iter().zip(fixes) {
            if *f == Fix::One {
                if assigned[v.terminal] {
                    return Relaxation::Infeasible;
                }
                assigned[v.terminal] = true;
                remaining[v.sat] -= prob.bandwidth[v.terminal];
                fixed_cost += v.cost;
            }
        }
        if remaining
            .iter()
            .zip(&prob.budget)
            .any(|(r, b)| *r < -REL_TOL * b)
        {
            return Relaxation::Infeasible;
        }
        // Free columns of unassigned terminals.
        let free: Vec<usize> = (0..self.vars.len())
            .filter(|&i| fixes[i] == Fix::Free && !assigned[self.vars[i].terminal])
            .collect();
        let mut x = vec![0.0; self.vars.len()];
        for (i, f) in fixes.iter().enumerate() {
            if *f == Fix::One {
                x[i] = 1.0;
            }
        }
        let open: Vec<usize> = (0..nt).filter(|&t| !assigned[t]).collect();
        if open.is_empty() {
            return Relaxation::Solved { bound: fixed_cost, x };
        }
        let mut lp = LinearProgram {
            cost: free.iter().map(|&i| self.vars[i].cost / self.cost_scale).collect(),
            ..Default::default()
        };
        for &t in &open {
            let row: Vec<f64> = free
                .iter()
                .map(|&i| if self.vars[i].terminal == t { 1.0 } else { 0.0 })
                .collect();
            if row.iter().all(|&v| v == 0.0) {
                return Relaxation::Infeasible;
            }
            lp.eq_rows.push((row, 1.0));
        }
        for (m, &cap) in remaining.iter().enumerate() {
            let row: Vec<f64> = free
                .iter()
                .map(|&i| {
                    let v = self.vars[i];
                    if v.sat == m {
                        prob.bandwidth[v.terminal] / prob.budget[m]
                    } else {
                        0.0
                    }
                })
                .collect();
            if row.iter().any(|&v| v != 0.0) {
                lp.le_rows.push((row, (cap / prob.budget[m]).max(0.0) * (1.0 + REL_TOL)));
            }
        }
        let sol = lp.solve();
        match sol.status {
            LpStatus::Optimal => {
                for (j, &i) in free.iter().enumerate() {
                    x[i] = sol.x[j];
                }
                Relaxation::Solved {
                    bound: fixed_cost + sol.objective * self.cost_scale,
                    x,
                }
            }
            _ => Relaxation::Infeasible,
        }
    }

    fn selection(&self, x: &[f64]) -> Vec<Option<usize>> {
        let mut sel = vec![None; self.prob.num_terminals()];
        for (v, &xi) in self.vars.iter().zip(x) {
            if xi > 0.5 {
                sel[v.terminal] = Some(v.sat);
            }
        }
        sel
    }
}

fn lex_key(sel: &[Option<usize>]) -> Vec<usize> {
    sel.iter().map(|s| s.map_or(usize::MAX, |m| m)).collect()
}

fn branch_and_bound(prob: &AssociationProblem, opts: &AssocOptions) -> Result<AssocSolution> {
    let nt = prob.num_terminals();
    let m = prob.num_satellites();
    let mut vars = Vec::new();
    for t in 0..nt {
        let c = prob.candidates(t);
        if c.is_empty() {
            return Err(Error::Infeasible(format!("terminal {t} has no admissible satellite")));
        }
        for s in c {
            vars.push(Var {
                sat: s,
                terminal: t,
                cost: prob.power[s][t],
            });
        }
    }
    // (satellite, terminal) order fixes the branching tie-break.
    vars.sort_by_key(|v| (v.sat, v.terminal));
    let cost_scale = vars.iter().map(|v| v.cost).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let gap = Gap {
        prob,
        vars,
        cost_scale,
    };

    let root = vec![Fix::Free; gap.vars.len()];
    let (root_bound, root_x) = match gap.relax(&root) {
        Relaxation::Infeasible => {
            return Err(Error::Infeasible("bandwidth budgets admit no assignment".into()));
        }
        Relaxation::Solved { bound, x } => (bound, x),
    };

    let mut heap = BinaryHeap::new();
    let mut next_id = 0;
    let mut incumbent: Option<(f64, Vec<Option<usize>>)> = None;
    let mut nodes = 0;
    let mut pending = Some((root, root_bound, root_x));
    let mut hit_limit = false;

    loop {
        let (fixes, bound, x) = match pending.take() {
            Some(p) => p,
            None => {
                let Some(node) = heap.pop() else { break };
                let node: Node = node;
                if let Some((best, _)) = &incumbent {
                    if node.bound > best - opts.tol * best.abs() {
                        continue;
                    }
                }
                match gap.relax(&node.fixes) {
                    Relaxation::Infeasible => continue,
                    Relaxation::Solved { bound, x } => (node.fixes, bound, x),
                }
            }
        };
        nodes += 1;
        debug_assert!(bound >= root_bound - 1e-9 * root_bound.abs().max(1.0));
        if nodes > opts.node_limit {
            hit_limit = true;
            break;
        }
        if let Some((best, _)) = &incumbent {
            if bound > best - opts.tol * best.abs() {
                continue;
            }
        }
        // Most fractional variable, ties to the lowest (satellite, terminal).
        let branch = x
            .iter()
            .enumerate()
            .filter(|(i, &v)| fixes[*i] == Fix::Free && v > 1e-9 && v < 1.0 - 1e-9)
            .min_by(|(ia, a), (ib, b)| {
                (*a - 0.5).abs().total_cmp(&(*b - 0.5).abs()).then(ia.cmp(ib))
            })
            .map(|(i, _)| i);
        match branch {
            None => {
                let sel = gap.selection(&x);
                if sel.iter().all(Option::is_some) && prob.is_feasible(&sel) {
                    let obj = prob.objective(&sel);
                    let better = match &incumbent {
                        None => true,
                        Some((best, best_sel)) => {
                            obj < best - 1e-12 * best.abs()
                                || (obj <= best + 1e-12 * best.abs() && lex_key(&sel) < lex_key(best_sel))
                        }
                    };
                    if better {
                        incumbent = Some((obj, sel));
                    }
                }
            }
            Some(i) => {
                for f in [Fix::One, Fix::Zero] {
                    let mut child = fixes.clone();
                    child[i] = f;
                    if f == Fix::One {
                        // Other candidates of this terminal drop out.
                        let t = gap.vars[i].terminal;
                        for (j, v) in gap.vars.iter().enumerate() {
                            if j != i && v.terminal == t {
                                child[j] = Fix::Zero;
                            }
                        }
                    }
                    heap.push(Node {
                        bound,
                        id: next_id,
                        fixes: child,
                    });
                    next_id += 1;
                }
            }
        }
    }

    let Some((objective, sel)) = incumbent else {
        if hit_limit {
            return Err(Error::MaxIter("node limit reached without an integral assignment".into()));
        }
        return Err(Error::Infeasible("no integral assignment meets all demands".into()));
    };
    Ok(AssocSolution {
        association: BinaryAssociation::from_selections(m, prob.num_sue, &sel),
        objective,
        status: if hit_limit { AssocStatus::NodeLimit } else { AssocStatus::Optimal },
        nodes,
        root_bound,
    })
}

/// Exhaustive reference solver over all `(M+1)^(K+N)` assignments.
///
/// Only intended for small instances; refuses problems above 10⁷ combinations.
pub fn enumerate_association_oracle(inst: &ProblemInstance, alloc: &Allocation) -> Result<(BinaryAssociation, f64)> {
    let prob = AssociationProblem::build(inst, alloc);
    let m = prob.num_satellites();
    let nt = prob.num_terminals();
    let combos = (m as f64 + 1.0).powi(nt as i32);
    if combos > 1e7 {
        return Err(Error::InvalidInput(format!("{combos:.0} assignments exceed the enumeration limit")));
    }
    let mut digits = vec![0usize; nt];
    let mut best: Option<(f64, Vec<Option<usize>>)> = None;
    loop {
        // digit 0 means unassigned, d > 0 means satellite d - 1
        let sel: Vec<Option<usize>> = digits.iter().map(|&d| d.checked_sub(1)).collect();
        if prob.is_feasible(&sel) {
            let obj = prob.objective(&sel);
            let better = match &best {
                None => true,
                Some((b, bs)) => obj < b - 1e-12 * b.abs() || (obj <= b + 1e-12 * b.abs() && lex_key(&sel) < lex_key(bs)),
            };
            if better {
                best = Some((obj, sel));
            }
        }
        let mut i = 0;
        loop {
            if i == nt {
                let Some((obj, sel)) = best else {
                    return Err(Error::Infeasible("no assignment meets all constraints".into()));
                };
                return Ok((BinaryAssociation::from_selections(m, inst.num_sue(), &sel), obj));
            }
            digits[i] += 1;
            if digits[i] <= m {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_solver::FractionalAssociation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_micro(rng: &mut ChaCha8Rng) -> (ProblemInstance, Allocation) {
        let m = rng.random_range(1..=2);
        let k = rng.random_range(0..=3);
        let n = rng.random_range(if k == 0 { 1 } else { 0 }..=3);
        let inst = ProblemInstance {
            h: (0..m).map(|_| (0..k).map(|_| rng.random_range(0.2e-12..2e-12)).collect()).collect(),
            g: (0..m).map(|_| (0..n).map(|_| rng.random_range(0.2e-10..2e-10)).collect()).collect(),
            demand_sue: vec![1e8; k],
            demand_bs: (0..n).map(|_| 1e8 * rng.random_range(1..8) as f64).collect(),
            p_max_sue: vec![100.0; k],
            p_max_bs: vec![1e4; n],
            w_leo: (0..m).map(|_| rng.random_range(0.5e8..4e8)).collect(),
            noise: vec![3.981e-21; m],
            ue_counts: vec![1; n],
            ue_demand: None,
            seed: None,
        };
        let mut alloc = Allocation::for_instance(&inst);
        for t in 0..inst.num_terminals() {
            alloc.set_bandwidth(t, rng.random_range(2e7..1.5e8));
            for s in 0..m {
                // Some links keep a random power, others are backfilled.
                if rng.random_bool(0.6) {
                    let p = rng.random_range(0.0..1.5) * inst.p_max(t) * 1e-3;
                    alloc.set_power(s, t, p);
                }
            }
        }
        (inst, alloc)
    }

    #[test]
    fn forced_assignment() {
        // Each terminal reaches its demand on exactly one satellite.
        let inst = ProblemInstance {
            h: vec![vec![1e-12, 1e-12], vec![1e-12, 1e-12]],
            g: vec![vec![], vec![]],
            demand_sue: vec![1e8; 2],
            demand_bs: vec![],
            p_max_sue: vec![100.0; 2],
            p_max_bs: vec![],
            w_leo: vec![5e8; 2],
            noise: vec![3.981e-21; 2],
            ue_counts: vec![],
            ue_demand: None,
            seed: None,
        };
        let mut alloc = Allocation::for_instance(&inst);
        alloc.w_sue = vec![1e8, 1e8];
        let p = min_power_for_rate(1e8, 1e8, 1e-12, 3.981e-21).unwrap();
        alloc.p[1][0] = p;
        alloc.p[0][1] = p;
        // block backfill on the other links by giving them too little power
        alloc.p[0][0] = p * 0.5;
        alloc.p[1][1] = p * 0.5;
        let sol = solve_association(&inst, &alloc, &AssocOptions::default()).unwrap();
        assert_eq!(sol.association.sue, vec![Some(1), Some(0)]);
        assert!((sol.objective - 2.0 * p).abs() < 1e-12 * p);
    }

    #[test]
    fn bandwidth_budget_too_small_is_infeasible() {
        let inst = ProblemInstance {
            h: vec![vec![1e-12]],
            g: vec![vec![]],
            demand_sue: vec![1e8],
            demand_bs: vec![],
            p_max_sue: vec![100.0],
            p_max_bs: vec![],
            w_leo: vec![1e7],
            noise: vec![3.981e-21],
            ue_counts: vec![],
            ue_demand: None,
            seed: None,
        };
        let mut alloc = Allocation::for_instance(&inst);
        alloc.w_sue = vec![5e7];
        let err = solve_association(&inst, &alloc, &AssocOptions::default()).unwrap_err();
        assert!(err.is_infeasible());
        assert!(enumerate_association_oracle(&inst, &alloc).unwrap_err().is_infeasible());
    }

    #[test]
    fn single_terminal_single_satellite() {
        let inst = ProblemInstance {
            h: vec![vec![1e-12]],
            g: vec![vec![]],
            demand_sue: vec![1e8],
            demand_bs: vec![],
            p_max_sue: vec![100.0],
            p_max_bs: vec![],
            w_leo: vec![5e8],
            noise: vec![3.981e-21],
            ue_counts: vec![],
            ue_demand: None,
            seed: None,
        };
        let mut alloc = Allocation::for_instance(&inst);
        alloc.w_sue = vec![5e8];
        let (assoc, obj) = enumerate_association_oracle(&inst, &alloc).unwrap();
        assert_eq!(assoc.sue, vec![Some(0)]);
        let sol = solve_association(&inst, &alloc, &AssocOptions::default()).unwrap();
        assert_eq!(sol.association, assoc);
        assert_eq!(sol.objective, obj);
    }

    #[test]
    fn enumeration_guard() {
        let k = 20;
        let inst = ProblemInstance {
            h: vec![vec![1e-12; k]; 3],
            g: vec![vec![]; 3],
            demand_sue: vec![1e8; k],
            demand_bs: vec![],
            p_max_sue: vec![100.0; k],
            p_max_bs: vec![],
            w_leo: vec![5e8; 3],
            noise: vec![3.981e-21; 3],
            ue_counts: vec![],
            ue_demand: None,
            seed: None,
        };
        let alloc = Allocation::for_instance(&inst);
        assert!(matches!(enumerate_association_oracle(&inst, &alloc), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn matches_enumeration_on_random_micro_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut feasible = 0;
        for _ in 0..300 {
            let (inst, alloc) = random_micro(&mut rng);
            let bb = solve_association(&inst, &alloc, &AssocOptions::default());
            let ex = enumerate_association_oracle(&inst, &alloc);
            match (bb, ex) {
                (Ok(a), Ok((assoc, obj))) => {
                    feasible += 1;
                    assert!((a.objective - obj).abs() <= 1e-9 * obj.abs());
                    assert!(a.root_bound <= a.objective * (1.0 + 1e-9));
                    assert_eq!(a.association, assoc);
                    let prob = AssociationProblem::build(&inst, &alloc);
                    assert!(prob.is_feasible(&a.association.selections()));
                }
                (Err(e1), Err(e2)) => assert!(e1.is_infeasible() && e2.is_infeasible()),
                (a, b) => panic!("disagreement: {a:?} vs {b:?}"),
            }
        }
        assert!(feasible > 50, "only {feasible} feasible draws");
    }

    #[test]
    fn binary_matrices_and_conversion() {
        let b = BinaryAssociation {
            num_satellites: 2,
            sue: vec![Some(1), None],
            bs: vec![Some(0)],
        };
        assert_eq!(b.alpha(), vec![vec![0, 0], vec![1, 0]]);
        assert_eq!(b.mu(), vec![vec![1], vec![0]]);
        assert_eq!(b.connections(), vec![1, 1]);
        assert!(!b.is_complete());
        let f = FractionalAssociation::from(&b);
        assert_eq!(f.alpha[1][0], 1.0);
        assert_eq!(f.mu[0][0], 1.0);
        assert_eq!(f.column_sum(1), 0.0);
    }
}
