//! Power and bandwidth allocation for a fixed (possibly fractional) association.
//!
//! With the association weights fixed the problem is convex: the objective and
//! the power/bandwidth budgets are linear, and each rate constraint is a
//! weighted sum of perspective functions `W log2(1 + g p / (σ W))`, which are
//! jointly concave in `(p, W)`. It is solved with a two-phase log-barrier
//! method: phase I maximises the worst rate slack to find a strictly feasible
//! point, phase II follows the central path of the power objective.
//!
//! Variables are scaled before Newton steps: powers by each terminal's cap,
//! bandwidths by the mean satellite budget and rates by the terminal demand.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assoc_solver::BinaryAssociation;
use crate::error::{Error, Result};
use crate::instance::ProblemInstance;

/// Links whose association weight is below this are dropped from the solve.
pub const WEIGHT_EPS: f64 = 1e-9;
/// Bandwidth floor for every served terminal, Hz.
pub const MIN_BANDWIDTH_HZ: f64 = 1.0;
/// Largest spectral efficiency (bit/s/Hz) before a link is declared unreachable.
pub const MAX_SPECTRAL_EFFICIENCY: f64 = 60.0;

/// Relaxed association weights: `alpha` is M×K, `mu` is M×N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalAssociation {
    pub alpha: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
}

impl FractionalAssociation {
    pub fn zeros(m: usize, k: usize, n: usize) -> Self {
        Self {
            alpha: vec![vec![0.0; k]; m],
            mu: vec![vec![0.0; n]; m],
        }
    }

    pub fn num_satellites(&self) -> usize {
        self.alpha.len()
    }

    pub fn num_sue(&self) -> usize {
        self.alpha.first().map_or(0, Vec::len)
    }

    pub fn num_bs(&self) -> usize {
        self.mu.first().map_or(0, Vec::len)
    }

    /// Weight of satellite `m` for joint terminal index `t`.
    pub fn weight(&self, m: usize, t: usize) -> f64 {
        let k = self.num_sue();
        if t < k {
            self.alpha[m][t]
        } else {
            self.mu[m][t - k]
        }
    }

    pub fn set_weight(&mut self, m: usize, t: usize, v: f64) {
        let k = self.num_sue();
        if t < k {
            self.alpha[m][t] = v;
        } else {
            self.mu[m][t - k] = v;
        }
    }

    pub fn column_sum(&self, t: usize) -> f64 {
        (0..self.num_satellites()).map(|m| self.weight(m, t)).sum()
    }

    pub fn validate_for(&self, inst: &ProblemInstance) -> Result<()> {
        let (m, k, n) = (inst.num_satellites(), inst.num_sue(), inst.num_bs());
        let shape_ok = self.alpha.len() == m
            && self.mu.len() == m
            && self.alpha.iter().all(|r| r.len() == k)
            && self.mu.iter().all(|r| r.len() == n);
        if !shape_ok {
            return Err(Error::InvalidInput("association shape does not match instance".into()));
        }
        for t in 0..inst.num_terminals() {
            for s in 0..m {
                let w = self.weight(s, t);
                if !(0.0..=1.0 + 1e-12).contains(&w) {
                    return Err(Error::InvalidInput(format!("weight {w} outside [0, 1]")));
                }
            }
            if self.column_sum(t) > 1.0 + 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "terminal {t} has association weights summing above one"
                )));
            }
        }
        Ok(())
    }
}

impl From<&BinaryAssociation> for FractionalAssociation {
    fn from(b: &BinaryAssociation) -> Self {
        let mut f = Self::zeros(b.num_satellites(), b.sue.len(), b.bs.len());
        for t in 0..b.num_terminals() {
            if let Some(m) = b.satellite_of(t) {
                f.set_weight(m, t, 1.0);
            }
        }
        f
    }
}

/// Transmit powers (W) per link and bandwidths (Hz) per terminal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// M×K SUE powers.
    pub p: Vec<Vec<f64>>,
    /// M×N BS powers.
    pub p_bs: Vec<Vec<f64>>,
    pub w_sue: Vec<f64>,
    pub w_bs: Vec<f64>,
}

impl Allocation {
    pub fn zeros(m: usize, k: usize, n: usize) -> Self {
        Self {
            p: vec![vec![0.0; k]; m],
            p_bs: vec![vec![0.0; n]; m],
            w_sue: vec![0.0; k],
            w_bs: vec![0.0; n],
        }
    }

    pub fn for_instance(inst: &ProblemInstance) -> Self {
        Self::zeros(inst.num_satellites(), inst.num_sue(), inst.num_bs())
    }

    fn num_sue(&self) -> usize {
        self.w_sue.len()
    }

    pub fn power(&self, m: usize, t: usize) -> f64 {
        let k = self.num_sue();
        if t < k {
            self.p[m][t]
        } else {
            self.p_bs[m][t - k]
        }
    }

    pub fn set_power(&mut self, m: usize, t: usize, v: f64) {
        let k = self.num_sue();
        if t < k {
            self.p[m][t] = v;
        } else {
            self.p_bs[m][t - k] = v;
        }
    }

    pub fn bandwidth(&self, t: usize) -> f64 {
        let k = self.num_sue();
        if t < k {
            self.w_sue[t]
        } else {
            self.w_bs[t - k]
        }
    }

    pub fn set_bandwidth(&mut self, t: usize, v: f64) {
        let k = self.num_sue();
        if t < k {
            self.w_sue[t] = v;
        } else {
            self.w_bs[t - k] = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Weighted total transmit power, W.
    pub objective: f64,
    pub kkt_residual: f64,
    /// Marginal power saving per extra Hz of each satellite's budget, W/Hz
    /// (zero for satellites without associated terminals).
    pub bandwidth_price: Vec<f64>,
    /// Newton steps over both phases.
    pub iterations: usize,
    pub status: SolveStatus,
}

/// Rate of a single link, bit/s.
pub fn link_rate(power: f64, bandwidth: f64, gain: f64, noise: f64) -> f64 {
    if bandwidth <= 0.0 || power <= 0.0 {
        return 0.0;
    }
    bandwidth * (power * gain / (noise * bandwidth)).ln_1p() / std::f64::consts::LN_2
}

/// Association-weighted rate of joint terminal `t`.
pub fn terminal_rate(alloc: &Allocation, assoc: &FractionalAssociation, inst: &ProblemInstance, t: usize) -> f64 {
    let w = alloc.bandwidth(t);
    (0..inst.num_satellites())
        .map(|m| {
            let a = assoc.weight(m, t);
            if a == 0.0 {
                0.0
            } else {
                a * link_rate(alloc.power(m, t), w, inst.gain(m, t), inst.noise[m])
            }
        })
        .sum()
}

pub fn rate_sue(alloc: &Allocation, assoc: &FractionalAssociation, inst: &ProblemInstance, k: usize) -> f64 {
    terminal_rate(alloc, assoc, inst, k)
}

pub fn rate_bs(alloc: &Allocation, assoc: &FractionalAssociation, inst: &ProblemInstance, n: usize) -> f64 {
    terminal_rate(alloc, assoc, inst, inst.num_sue() + n)
}

/// The power that makes one link carry exactly `rate` bit/s.
pub fn min_power_for_rate(rate: f64, bandwidth: f64, gain: f64, noise: f64) -> Result<f64> {
    if !(bandwidth > 0.0 && gain > 0.0) {
        return Err(Error::InvalidInput("bandwidth and gain must be positive".into()));
    }
    if rate <= 0.0 {
        return Ok(0.0);
    }
    let se = rate / bandwidth;
    if se > MAX_SPECTRAL_EFFICIENCY {
        return Err(Error::Infeasible(format!(
            "spectral efficiency {se:.1} bit/s/Hz needs unbounded power"
        )));
    }
    Ok(noise * bandwidth * (se * std::f64::consts::LN_2).exp_m1() / gain)
}

/// Weighted total power Σ α p + Σ μ P, W.
pub fn weighted_power(alloc: &Allocation, assoc: &FractionalAssociation, inst: &ProblemInstance) -> f64 {
    let mut total = 0.0;
    for m in 0..inst.num_satellites() {
        for t in 0..inst.num_terminals() {
            total += assoc.weight(m, t) * alloc.power(m, t);
        }
    }
    total
}

/// Constraint functions of the allocation subproblem in `f <= 0` form,
/// normalised to be dimensionless: for each terminal `1 - rate/demand` and
/// `Σ α p / p_max - 1`, then `Σ α W / W_leo - 1` per satellite.
pub fn constraint_values(alloc: &Allocation, assoc: &FractionalAssociation, inst: &ProblemInstance) -> Vec<f64> {
    let nt = inst.num_terminals();
    let mut out = Vec::with_capacity(2 * nt + inst.num_satellites());
    for t in 0..nt {
        out.push(1.0 - terminal_rate(alloc, assoc, inst, t) / inst.demand(t));
    }
    for t in 0..nt {
        let p: f64 = (0..inst.num_satellites()).map(|m| assoc.weight(m, t) * alloc.power(m, t)).sum();
        out.push(p / inst.p_max(t) - 1.0);
    }
    for m in 0..inst.num_satellites() {
        let used: f64 = (0..nt).map(|t| assoc.weight(m, t) * alloc.bandwidth(t)).sum();
        out.push(used / inst.w_leo[m] - 1.0);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative duality-gap target and KKT tolerance.
    pub tol: f64,
    pub newton_tol: f64,
    pub initial_barrier: f64,
    pub barrier_factor: f64,
    pub max_newton_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            newton_tol: 1e-8,
            initial_barrier: 1.0,
            barrier_factor: 10.0,
            max_newton_steps: 5000,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
struct Link {
    sat: usize,
    terminal: usize,
    weight: f64,
    /// Scaled SNR coefficient: x * c / w is the link SNR.
    c: f64,
}

/// The scaled barrier problem. Variable layout: `[x (links), w (terminals), s?]`.
#[derive(Debug, Clone)]
pub(crate) struct ScaledProblem {
    links: Vec<Link>,
    /// Links of each joint terminal.
    by_terminal: Vec<Vec<usize>>,
    /// Terminals with weight on each satellite: (terminal, weight).
    by_sat: Vec<Vec<(usize, f64)>>,
    /// w_ref / demand for each terminal.
    rate_scale: Vec<f64>,
    /// p_max of each terminal.
    p_scale: Vec<f64>,
    budget: Vec<f64>,
    w_ref: f64,
    w_min: f64,
    obj_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Phase {
    /// Minimise the common rate slack `s`.
    One,
    Two,
}

pub(crate) struct BarrierEval {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl ScaledProblem {
    pub(crate) fn new(inst: &ProblemInstance, assoc: &FractionalAssociation) -> Result<Self> {
        let nt = inst.num_terminals();
        let m = inst.num_satellites();
        let w_ref = inst.w_leo.iter().sum::<f64>() / m as f64;
        let mut links = Vec::new();
        let mut by_terminal = vec![Vec::new(); nt];
        let mut by_sat = vec![Vec::new(); m];
        for t in 0..nt {
            for s in 0..m {
                let a = assoc.weight(s, t);
                if a >= WEIGHT_EPS {
                    by_terminal[t].push(links.len());
                    by_sat[s].push((t, a));
                    links.push(Link {
                        sat: s,
                        terminal: t,
                        weight: a,
                        c: inst.p_max(t) * inst.gain(s, t) / (inst.noise[s] * w_ref),
                    });
                }
            }
            if by_terminal[t].is_empty() {
                return Err(Error::InvalidInput(format!(
                    "terminal {t} has positive demand but no associated satellite"
                )));
            }
        }
        Ok(Self {
            links,
            by_terminal,
            by_sat,
            rate_scale: (0..nt).map(|t| w_ref / inst.demand(t)).collect(),
            p_scale: (0..nt).map(|t| inst.p_max(t)).collect(),
            budget: inst.w_leo.iter().map(|w| w / w_ref).collect(),
            w_ref,
            w_min: MIN_BANDWIDTH_HZ / w_ref,
            obj_scale: 1.0,
        })
    }

    fn num_links(&self) -> usize {
        self.links.len()
    }

    fn num_terminals(&self) -> usize {
        self.by_terminal.len()
    }

    pub(crate) fn num_vars(&self, phase: Phase) -> usize {
        self.num_links() + self.num_terminals() + usize::from(phase == Phase::One)
    }

    fn w_index(&self, t: usize) -> usize {
        self.num_links() + t
    }

    pub(crate) fn num_constraints(&self) -> usize {
        let active_sats = self.by_sat.iter().filter(|v| !v.is_empty()).count();
        // rate + power cap + x >= 0 + w >= w_min per terminal/link, budgets per satellite
        2 * self.num_terminals() + self.num_links() + self.num_terminals() + active_sats
    }

    /// Scaled rate (relative to demand) and its derivatives for terminal `t`.
    fn rate(&self, z: &[f64], t: usize) -> (f64, Vec<(usize, f64)>, Vec<(usize, usize, f64)>) {
        let wi = self.w_index(t);
        let w = z[wi];
        let rho = self.rate_scale[t];
        let mut value = 0.0;
        let mut grad = Vec::new();
        let mut hess = Vec::new();
        let mut dw = 0.0;
        let mut dww = 0.0;
        for &l in &self.by_terminal[t] {
            let link = &self.links[l];
            let x = z[l];
            let y = link.c * x / w;
            let k = link.weight * rho / std::f64::consts::LN_2;
            let ln1p = y.ln_1p();
            value += k * w * ln1p;
            let one_y = 1.0 + y;
            grad.push((l, k * link.c / one_y));
            dw += k * (ln1p - y / one_y);
            // Hessian of w ln(1 + c x / w): -(1 / (w (1+y)^2)) [c, -y]^T [c, -y]
            let f = k / (w * one_y * one_y);
            hess.push((l, l, -f * link.c * link.c));
            hess.push((l, wi, f * link.c * y));
            dww += -f * y * y;
        }
        grad.push((wi, dw));
        hess.push((wi, wi, dww));
        (value, grad, hess)
    }

    fn objective(&self, z: &[f64]) -> f64 {
        self.links
            .iter()
            .enumerate()
            .map(|(l, link)| link.weight * self.p_scale[link.terminal] * z[l])
            .sum::<f64>()
            / self.obj_scale
    }

    /// Barrier function `t·f0 + Σ -ln(-f_i)`; `None` outside the domain.
    pub(crate) fn barrier(&self, z: &[f64], t_bar: f64, phase: Phase, want_hess: bool) -> Option<BarrierEval> {
        let n = self.num_vars(phase);
        let mut value = 0.0;
        let mut grad = DVector::zeros(n);
        let mut hess = if want_hess { DMatrix::zeros(n, n) } else { DMatrix::zeros(0, 0) };
        let s_idx = self.num_links() + self.num_terminals();

        // objective
        match phase {
            Phase::One => {
                value += t_bar * z[s_idx];
                grad[s_idx] += t_bar;
            }
            Phase::Two => {
                value += t_bar * self.objective(z);
                for (l, link) in self.links.iter().enumerate() {
                    grad[l] += t_bar * link.weight * self.p_scale[link.terminal] / self.obj_scale;
                }
            }
        }

        // Generic -ln(-f) accumulation for an affine or convex f given sparse derivatives.
        let add = |f: f64,
                       g: &[(usize, f64)],
                       h: &[(usize, usize, f64)],
                       value: &mut f64,
                       grad: &mut DVector<f64>,
                       hess: &mut DMatrix<f64>|
         -> bool {
            if !(f < 0.0) || !f.is_finite() {
                return false;
            }
            let inv = -1.0 / f;
            *value -= (-f).ln();
            for &(i, gi) in g {
                grad[i] += gi * inv;
            }
            if want_hess {
                for &(i, gi) in g {
                    for &(j, gj) in g {
                        hess[(i, j)] += gi * gj * inv * inv;
                    }
                }
                for &(i, j, hij) in h {
                    hess[(i, j)] += hij * inv;
                    if i != j {
                        hess[(j, i)] += hij * inv;
                    }
                }
            }
            true
        };

        for t in 0..self.num_terminals() {
            // w >= w_min
            let wi = self.w_index(t);
            if !add(self.w_min - z[wi], &[(wi, -1.0)], &[], &mut value, &mut grad, &mut hess) {
                return None;
            }
        }
        for l in 0..self.num_links() {
            if !add(-z[l], &[(l, -1.0)], &[], &mut value, &mut grad, &mut hess) {
                return None;
            }
        }
        for t in 0..self.num_terminals() {
            // rate: 1 - r(z) [- s] <= 0
            let (r, rg, rh) = self.rate(z, t);
            let mut g: Vec<(usize, f64)> = rg.iter().map(|&(i, v)| (i, -v)).collect();
            let h: Vec<(usize, usize, f64)> = rh.iter().map(|&(i, j, v)| (i, j, -v)).collect();
            let mut f = 1.0 - r;
            if phase == Phase::One {
                f -= z[s_idx];
                g.push((s_idx, -1.0));
            }
            if !add(f, &g, &h, &mut value, &mut grad, &mut hess) {
                return None;
            }
            // power cap: Σ a x - 1 <= 0
            let g: Vec<(usize, f64)> = self.by_terminal[t].iter().map(|&l| (l, self.links[l].weight)).collect();
            let f = g.iter().map(|&(l, a)| a * z[l]).sum::<f64>() - 1.0;
            if !add(f, &g, &[], &mut value, &mut grad, &mut hess) {
                return None;
            }
        }
        for (s, terms) in self.by_sat.iter().enumerate() {
            if terms.is_empty() {
                continue;
            }
            let g: Vec<(usize, f64)> = terms.iter().map(|&(t, a)| (self.w_index(t), a)).collect();
            let f = g.iter().map(|&(i, a)| a * z[i]).sum::<f64>() - self.budget[s];
            if !add(f, &g, &[], &mut value, &mut grad, &mut hess) {
                return None;
            }
        }
        Some(BarrierEval { value, grad, hess })
    }

    /// Strictly interior start for phase I (rates may be violated).
    pub(crate) fn phase_one_start(&self) -> Result<Vec<f64>> {
        let mut z = vec![0.0; self.num_vars(Phase::One)];
        let load: Vec<f64> = self.by_sat.iter().map(|v| v.iter().map(|&(_, a)| a).sum()).collect();
        for t in 0..self.num_terminals() {
            let share = self.by_terminal[t]
                .iter()
                .map(|&l| {
                    let s = self.links[l].sat;
                    self.budget[s] / load[s]
                })
                .fold(f64::INFINITY, f64::min);
            let w = 0.9 * share;
            if !(w > self.w_min * 1.01) {
                return Err(Error::Infeasible(
                    "bandwidth budgets cannot give every terminal its minimum bandwidth".into(),
                ));
            }
            z[self.w_index(t)] = w;
            let total: f64 = self.by_terminal[t].iter().map(|&l| self.links[l].weight).sum();
            for &l in &self.by_terminal[t] {
                z[l] = 0.5 / total;
            }
        }
        let worst = (0..self.num_terminals())
            .map(|t| 1.0 - self.rate(&z, t).0)
            .fold(f64::NEG_INFINITY, f64::max);
        let s_idx = z.len() - 1;
        z[s_idx] = worst.max(0.0) + 1.0;
        Ok(z)
    }

    /// Budget multipliers `1 / (t · -f)` converted back to W/Hz.
    fn bandwidth_prices(&self, z: &[f64], t_bar: f64) -> Vec<f64> {
        self.by_sat
            .iter()
            .enumerate()
            .map(|(s, terms)| {
                if terms.is_empty() {
                    return 0.0;
                }
                let slack = self.budget[s] - terms.iter().map(|&(t, a)| a * z[self.w_index(t)]).sum::<f64>();
                if slack > 0.0 {
                    self.obj_scale / (t_bar * slack * self.w_ref)
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub(crate) fn to_allocation(&self, z: &[f64], inst: &ProblemInstance) -> Allocation {
        let mut alloc = Allocation::for_instance(inst);
        for (l, link) in self.links.iter().enumerate() {
            alloc.set_power(link.sat, link.terminal, z[l].max(0.0) * self.p_scale[link.terminal]);
        }
        for t in 0..self.num_terminals() {
            alloc.set_bandwidth(t, z[self.w_index(t)] * self.w_ref);
        }
        alloc
    }
}

enum Centering {
    Done { steps: usize },
    /// Phase-I early exit once the slack is comfortably negative.
    Feasible { steps: usize },
    Stalled { steps: usize },
}

fn newton_direction(eval: &BarrierEval) -> Option<DVector<f64>> {
    let n = eval.grad.len();
    let rhs = -&eval.grad;
    // Jacobi scaling keeps the factorisation well conditioned.
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let v = eval.hess[(i, i)];
            if v > 0.0 && v.is_finite() {
                1.0 / v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut h = eval.hess.clone();
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] *= d[i] * d[j];
        }
    }
    let b = DVector::from_iterator(n, (0..n).map(|i| rhs[i] * d[i]));
    let mut ridge = 0.0;
    for _ in 0..12 {
        let mut hr = h.clone();
        if ridge > 0.0 {
            for i in 0..n {
                hr[(i, i)] += ridge;
            }
        }
        if let Some(ch) = hr.cholesky() {
            let y = ch.solve(&b);
            if y.iter().all(|v| v.is_finite()) {
                return Some(DVector::from_iterator(n, (0..n).map(|i| y[i] * d[i])));
            }
        }
        ridge = if ridge == 0.0 { 1e-14 } else { ridge * 100.0 };
    }
    None
}

fn center(
    prob: &ScaledProblem,
    z: &mut Vec<f64>,
    t_bar: f64,
    phase: Phase,
    opts: &SolverOptions,
    budget: usize,
) -> Centering {
    let s_idx = z.len().saturating_sub(1);
    let mut steps = 0;
    while steps < budget {
        let Some(eval) = prob.barrier(z, t_bar, phase, true) else {
            return Centering::Stalled { steps };
        };
        let Some(dir) = newton_direction(&eval) else {
            return Centering::Stalled { steps };
        };
        let decrement = -eval.grad.dot(&dir);
        if decrement / 2.0 <= opts.newton_tol {
            return Centering::Done { steps };
        }
        steps += 1;
        let mut step = 1.0;
        let mut accepted = false;
        // Decreases below a few ulps of the barrier value cannot be measured;
        // there only an undamped step is taken.
        let resolvable = |step: f64| 0.25 * step * decrement > 1e-15 * eval.value.abs();
        for _ in 0..60 {
            let trial: Vec<f64> = z.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            if let Some(e) = prob.barrier(&trial, t_bar, phase, false) {
                if !resolvable(step) || e.value <= eval.value - 0.25 * step * decrement {
                    *z = trial;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
            if !resolvable(step) {
                break;
            }
        }
        if !accepted {
            // No further progress is representable; treat as centred.
            return Centering::Done { steps };
        }
        if phase == Phase::One && z[s_idx] < -0.1 {
            return Centering::Feasible { steps };
        }
    }
    Centering::Stalled { steps }
}

/// Solves the allocation subproblem for a fixed association.
///
/// Returns `Err(Error::Infeasible)` when no allocation meets every demand
/// within the power and bandwidth budgets.
pub fn solve_allocation(
    inst: &ProblemInstance,
    assoc: &FractionalAssociation,
    opts: &SolverOptions,
) -> Result<(Allocation, SolveReport)> {
    assoc.validate_for(inst)?;
    let mut prob = ScaledProblem::new(inst, assoc)?;
    let mut iterations = 0;

    // Phase I
    let mut z = prob.phase_one_start()?;
    let m_c = prob.num_constraints() as f64;
    let s_idx = z.len() - 1;
    let mut t_bar = opts.initial_barrier;
    loop {
        let remaining = opts.max_newton_steps.saturating_sub(iterations);
        match center(&prob, &mut z, t_bar, Phase::One, opts, remaining) {
            Centering::Feasible { steps } => {
                iterations += steps;
                break;
            }
            Centering::Done { steps } => {
                iterations += steps;
                if z[s_idx] < 0.0 {
                    break;
                }
                if z[s_idx] - m_c / t_bar > 0.0 || m_c / t_bar < 1e-12 {
                    return Err(Error::Infeasible(format!(
                        "demands cannot be met (worst relative rate shortfall {:.3e})",
                        z[s_idx]
                    )));
                }
            }
            Centering::Stalled { steps } => {
                iterations += steps;
                if z[s_idx] < 0.0 {
                    break;
                }
                if iterations >= opts.max_newton_steps {
                    return Err(Error::MaxIter("phase I did not reach a feasible point".into()));
                }
                return Err(Error::Infeasible(format!(
                    "phase I stalled with rate shortfall {:.3e}",
                    z[s_idx]
                )));
            }
        }
        t_bar *= opts.barrier_factor;
    }
    z.pop();

    // Phase II
    prob.obj_scale = prob.objective(&z).max(f64::MIN_POSITIVE);
    let mut t_bar = opts.initial_barrier;
    let mut status = SolveStatus::MaxIter;
    loop {
        let remaining = opts.max_newton_steps.saturating_sub(iterations);
        let done = match center(&prob, &mut z, t_bar, Phase::Two, opts, remaining) {
            Centering::Done { steps } | Centering::Feasible { steps } => {
                iterations += steps;
                true
            }
            Centering::Stalled { steps } => {
                iterations += steps;
                false
            }
        };
        if !done {
            break;
        }
        let f0 = prob.objective(&z);
        if m_c / t_bar <= opts.tol * f0 {
            status = SolveStatus::Optimal;
            break;
        }
        if t_bar > 1e15 {
            break;
        }
        t_bar *= opts.barrier_factor;
    }
    let kkt_residual = kkt_residual(&prob, &z, t_bar);
    if status == SolveStatus::Optimal && kkt_residual > opts.tol {
        status = SolveStatus::MaxIter;
    }

    let mut alloc = prob.to_allocation(&z, inst);
    tighten_rates(&mut alloc, assoc, inst);
    let objective = weighted_power(&alloc, assoc, inst);
    Ok((
        alloc,
        SolveReport {
            objective,
            kkt_residual,
            bandwidth_price: prob.bandwidth_prices(&z, t_bar),
            iterations,
            status,
        },
    ))
}

/// First-order optimality residual at a centred barrier point with the usual
/// dual estimates λ_i = 1 / (t · -f_i): the larger of the relative
/// stationarity error and the relative duality gap.
fn kkt_residual(prob: &ScaledProblem, z: &[f64], t_bar: f64) -> f64 {
    let Some(eval) = prob.barrier(z, t_bar, Phase::Two, false) else {
        return f64::INFINITY;
    };
    // grad of the barrier divided by t = ∇f0 + Σ λ_i ∇f_i
    let obj_grad_norm = prob
        .links
        .iter()
        .map(|l| l.weight * prob.p_scale[l.terminal] / prob.obj_scale)
        .fold(0.0, f64::max);
    let stationarity = eval.grad.amax() / t_bar / obj_grad_norm.max(f64::MIN_POSITIVE);
    let gap = prob.num_constraints() as f64 / t_bar / prob.objective(z).max(f64::MIN_POSITIVE);
    stationarity.max(gap)
}

/// Lowers each terminal's powers until its rate constraint is tight. Only ever
/// decreases powers, so budgets stay satisfied.
fn tighten_rates(alloc: &mut Allocation, assoc: &FractionalAssociation, inst: &ProblemInstance) {
    for t in 0..inst.num_terminals() {
        let demand = inst.demand(t);
        let sats: Vec<usize> = (0..inst.num_satellites())
            .filter(|&m| assoc.weight(m, t) >= WEIGHT_EPS && alloc.power(m, t) > 0.0)
            .collect();
        let w = alloc.bandwidth(t);
        if sats.len() == 1 {
            let m = sats[0];
            let a = assoc.weight(m, t);
            if let Ok(p) = min_power_for_rate(demand / a, w, inst.gain(m, t), inst.noise[m]) {
                if p <= alloc.power(m, t) {
                    alloc.set_power(m, t, p);
                }
            }
            continue;
        }
        let base: Vec<f64> = sats.iter().map(|&m| alloc.power(m, t)).collect();
        let rate_at = |scale: f64| -> f64 {
            sats.iter()
                .zip(&base)
                .map(|(&m, &p)| assoc.weight(m, t) * link_rate(p * scale, w, inst.gain(m, t), inst.noise[m]))
                .sum()
        };
        if rate_at(1.0) <= demand {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if rate_at(mid) >= demand {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        for (&m, &p) in sats.iter().zip(&base) {
            alloc.set_power(m, t, p * hi);
        }
    }
}
