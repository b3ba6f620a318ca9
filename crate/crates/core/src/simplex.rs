//! Dense two-phase tableau simplex for small linear programs.
//!
//! Solves `min cᵀx  s.t.  A_eq x = b_eq,  A_le x <= b_le,  x >= 0`.
//! Bland's rule is used for both entering and leaving choices, which rules
//! out cycling on the degenerate assignment polytopes this is used for.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub eq_rows: Vec<(Vec<f64>, f64)>,
    pub le_rows: Vec<(Vec<f64>, f64)>,
}

const EPS: f64 = 1e-10;

struct Tableau {
    /// rows × (cols + 1); the last column is the right-hand side.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Minimises `cost` over the current basis; columns in `allowed` may enter.
    fn optimise(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> bool {
        loop {
            // reduced costs d_j = c_j - c_B B^-1 a_j
            let entering = (0..self.cols).filter(|&j| allowed(j)).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let d = cost[j]
                    - self
                        .rows
                        .iter()
                        .zip(&self.basis)
                        .map(|(row, &b)| cost[b] * row[j])
                        .sum::<f64>();
                d < -EPS
            });
            let Some(c) = entering else { return true };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[c];
                if a > EPS {
                    let ratio = row[self.cols] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - EPS || (ratio <= br + EPS && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else { return false };
            self.pivot(r, c);
        }
    }
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn solve(&self) -> LpSolution {
        let n = self.num_vars();
        let n_le = self.le_rows.len();
        let n_rows = self.eq_rows.len() + n_le;
        // columns: x (n), slacks (n_le), artificials (n_rows)
        let slack0 = n;
        let art0 = n + n_le;
        let cols = art0 + n_rows;
        let mut rows = Vec::with_capacity(n_rows);
        let mut basis = Vec::with_capacity(n_rows);
        let all = self
            .le_rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r, Some(i)))
            .chain(self.eq_rows.iter().map(|r| (r, None)));
        for (i, ((a, b), slack)) in all.enumerate() {
            let mut row = vec![0.0; cols + 1];
            row[..n].copy_from_slice(a);
            if let Some(s) = slack {
                row[slack0 + s] = 1.0;
            }
            row[cols] = *b;
            if *b < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
            }
            // Nonnegative slack rows start with the slack basic.
            match slack {
                Some(s) if *b >= 0.0 => basis.push(slack0 + s),
                _ => {
                    row[art0 + i] = 1.0;
                    basis.push(art0 + i);
                }
            }
            rows.push(row);
        }
        let mut tab = Tableau { rows, basis, cols };

        // Phase 1
        let mut phase1 = vec![0.0; cols];
        for c in phase1.iter_mut().skip(art0) {
            *c = 1.0;
        }
        tab.optimise(&phase1, &|_| true);
        let infeas: f64 = tab
            .rows
            .iter()
            .zip(&tab.basis)
            .filter(|(_, &b)| b >= art0)
            .map(|(r, _)| r[cols])
            .sum();
        let scale = 1.0 + self.eq_rows.iter().chain(&self.le_rows).map(|(_, b)| b.abs()).fold(0.0, f64::max);
        if infeas > 1e-9 * scale {
            return LpSolution {
                status: LpStatus::Infeasible,
                x: vec![0.0; n],
                objective: f64::INFINITY,
            };
        }
        // Drive zero-level artificials out of the basis.
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= art0 {
                if let Some(c) = (0..art0).find(|&c| tab.rows[r][c].abs() > EPS) {
                    tab.pivot(r, c);
                    r += 1;
                } else {
                    // redundant row
                    tab.rows.remove(r);
                    tab.basis.remove(r);
                }
            } else {
                r += 1;
            }
        }

        // Phase 2
        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(&self.cost);
        if !tab.optimise(&cost, &|j| j < art0) {
            return LpSolution {
                status: LpStatus::Unbounded,
                x: vec![0.0; n],
                objective: f64::NEG_INFINITY,
            };
        }
        let mut x = vec![0.0; n];
        for (row, &b) in tab.rows.iter().zip(&tab.basis) {
            if b < n {
                x[b] = row[cols].max(0.0);
            }
        }
        let objective = x.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
        LpSolution {
            status: LpStatus::Optimal,
            x,
            objective,
        }
    }
}
