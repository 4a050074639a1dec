//! Bounded-variable primal simplex on a dense tableau.
//!
//! Solves `min cᵀx  s.t.  rows, 0 ≤ x ≤ u`. Rows are equilibrated by their
//! largest coefficient. An initial basis is built from slacks and column
//! singletons ("crash"); rows left uncovered get artificials and a phase 1.
//!
//! Pricing is Dantzig's rule with lowest-index ties. After
//! [`DEGENERATE_SWITCH`] consecutive degenerate pivots the solver falls back
//! to Bland's rule until the objective moves again, which rules out cycling.
//! The ratio test is Harris's two-pass variant, and basic values and reduced
//! costs are recomputed from the original rows every [`REFRESH_EVERY`]
//! pivots to keep round-off from piling up.

use crate::error::{Error, Result};

pub const PIVOT_TOL: f64 = 1e-9;
pub const COST_TOL: f64 = 1e-9;
pub const FEAS_TOL: f64 = 1e-9;
/// Entries below this magnitude are flushed to zero after each pivot.
const DROP_TOL: f64 = 1e-13;
const DEGENERATE_SWITCH: usize = 64;
/// Bound relaxation used by the first pass of the ratio test.
const HARRIS_TOL: f64 = 1e-9;
/// Under Bland's rule, pivots smaller than this fraction of the largest
/// eligible one are passed over.
const BLAND_PIVOT_FRACTION: f64 = 1e-3;
const REFRESH_EVERY: usize = 100;

type SparseRow = Vec<(usize, f64)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Upper bounds; lower bounds are all zero. `f64::INFINITY` allowed.
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    /// Largest violation of any row or bound by `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.rows {
            let lhs: f64 = row.coefs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(-v).max(v - self.upper[j]);
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

struct Tableau {
    m: usize,
    ncols: usize,
    a: Vec<f64>,
    cost: Vec<f64>,
    upper: Vec<f64>,
    /// Reduced costs for the current phase objective.
    d: Vec<f64>,
    basis: Vec<usize>,
    /// Value of the basic variable of each row.
    beta: Vec<f64>,
    status: Vec<Status>,
    /// Columns barred from entering (artificials after phase 1).
    frozen: Vec<bool>,
    /// Prepared rows (equilibrated, slack and artificial columns included).
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    /// Per row, a column whose prepared form is that row's unit vector, so
    /// the current tableau column is the matching column of B⁻¹.
    unit_col: Vec<usize>,
    phase_cost: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
    nz_buf: Vec<usize>,
    row_buf: Vec<f64>,
}

enum Step {
    Optimal,
    Moved { degenerate: bool },
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.ncols + j]
    }

    fn value(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::Lower => 0.0,
            Status::Upper => self.upper[j],
            Status::Basic => {
                let i = self.basis.iter().position(|&b| b == j).unwrap();
                self.beta[i]
            }
        }
    }

    /// Recomputes basic values and reduced costs from the prepared rows.
    fn refresh(&mut self) {
        let r: Vec<f64> = self
            .rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, &b)| {
                b - row
                    .iter()
                    .filter(|&&(j, _)| self.status[j] == Status::Upper)
                    .map(|&(j, a)| a * self.upper[j])
                    .sum::<f64>()
            })
            .collect();
        for k in 0..self.m {
            let row = &self.a[k * self.ncols..(k + 1) * self.ncols];
            self.beta[k] = self.unit_col.iter().zip(&r).map(|(&c, &ri)| row[c] * ri).sum();
        }
        let cost = std::mem::take(&mut self.phase_cost);
        self.reset_reduced_costs(&cost);
        self.phase_cost = cost;
    }

    fn reset_reduced_costs(&mut self, cost: &[f64]) {
        self.d.clear();
        self.d.extend_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.a[i * self.ncols..(i + 1) * self.ncols];
                for (dj, &aij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * aij;
                }
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = 0.0;
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncols {
            if self.frozen[j] {
                continue;
            }
            let dir = match self.status[j] {
                Status::Lower if self.d[j] < -COST_TOL && self.upper[j] > 0.0 => 1.0,
                Status::Upper if self.d[j] > COST_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = self.d[j].abs();
            if best.is_none_or(|(b, _)| score > self.d[b].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    fn step(&mut self, bland: bool) -> Result<Step> {
        let Some((j, dir)) = self.choose_entering(bland) else {
            return Ok(Step::Optimal);
        };
        self.iterations += 1;
        if self.iterations > self.max_iterations {
            return Err(Error::IterationCap(self.max_iterations));
        }

        // Ratio test: the entering variable moves by t ≥ 0 in direction `dir`,
        // basic variable i moves by -dir * t * a_ij. The first pass bounds the
        // step with every bound relaxed by HARRIS_TOL; the second picks, among
        // rows whose exact ratio fits under that bound, the largest pivot (or
        // the lowest variable index under Bland).
        let ratio_of = |i: usize, slack: f64| -> Option<(f64, f64, bool)> {
            let alpha = dir * self.at(i, j);
            if alpha.abs() <= PIVOT_TOL {
                return None;
            }
            let b = self.basis[i];
            if alpha > 0.0 {
                Some(((self.beta[i] + slack).max(0.0) / alpha, alpha.abs(), false))
            } else if self.upper[b].is_finite() {
                Some(((self.upper[b] - self.beta[i] + slack).max(0.0) / -alpha, alpha.abs(), true))
            } else {
                None
            }
        };
        let theta = (0..self.m)
            .filter_map(|i| ratio_of(i, HARRIS_TOL).map(|r| r.0))
            .fold(f64::INFINITY, f64::min);
        if self.upper[j] <= theta {
            if !self.upper[j].is_finite() {
                return Err(Error::Unbounded);
            }
            let t = self.upper[j];
            for i in 0..self.m {
                let aij = self.at(i, j);
                if aij != 0.0 {
                    self.beta[i] -= dir * t * aij;
                }
            }
            self.status[j] = if dir > 0.0 { Status::Upper } else { Status::Lower };
            return Ok(Step::Moved { degenerate: false });
        }
        let eligible: Vec<(usize, f64, f64, bool)> = (0..self.m)
            .filter_map(|i| ratio_of(i, 0.0).map(|(r, a, up)| (i, r, a, up)))
            .filter(|&(_, r, _, _)| r <= theta)
            .collect();
        let largest = eligible.iter().map(|e| e.2).fold(0.0, f64::max);
        let mut leave: Option<(usize, f64, f64, bool)> = None; // (row, ratio, |alpha|, to_upper)
        for &(i, ratio, alpha, to_upper) in &eligible {
            let better = match leave {
                None => !bland || alpha >= BLAND_PIVOT_FRACTION * largest,
                Some((r, _, best_alpha, _)) => {
                    if bland {
                        alpha >= BLAND_PIVOT_FRACTION * largest && self.basis[i] < self.basis[r]
                    } else {
                        alpha > best_alpha
                    }
                }
            };
            if better {
                leave = Some((i, ratio, alpha, to_upper));
            }
        }
        let (r, t_max, _, to_upper) = leave.expect("finite theta has a leaving row");

        let t = t_max;
        for i in 0..self.m {
            let aij = self.at(i, j);
            if aij != 0.0 {
                self.beta[i] -= dir * t * aij;
            }
        }
        let leaving = self.basis[r];
        let start = if dir > 0.0 { 0.0 } else { self.upper[j] };
        self.beta[r] = start + dir * t;
        self.status[leaving] = if to_upper { Status::Upper } else { Status::Lower };
        self.status[j] = Status::Basic;
        self.basis[r] = j;
        self.pivot(r, j);
        Ok(Step::Moved {
            degenerate: t <= FEAS_TOL,
        })
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.ncols;
        let piv = self.at(r, j);
        self.nz_buf.clear();
        self.row_buf.clear();
        {
            let row = &mut self.a[r * n..(r + 1) * n];
            for (k, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v /= piv;
                    if v.abs() < DROP_TOL {
                        *v = 0.0;
                    } else {
                        self.nz_buf.push(k);
                        self.row_buf.push(*v);
                    }
                }
            }
            row[j] = 1.0;
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * n + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.a[i * n..(i + 1) * n];
            for (&k, &v) in self.nz_buf.iter().zip(&self.row_buf) {
                let x = row[k] - f * v;
                row[k] = if x.abs() < DROP_TOL { 0.0 } else { x };
            }
            row[j] = 0.0;
        }
        let f = self.d[j];
        if f != 0.0 {
            for (&k, &v) in self.nz_buf.iter().zip(&self.row_buf) {
                self.d[k] -= f * v;
            }
            self.d[j] = 0.0;
        }
    }

    fn run(&mut self) -> Result<()> {
        let mut degenerate_run = 0usize;
        let mut since_refresh = 0usize;
        loop {
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            if since_refresh >= REFRESH_EVERY {
                self.refresh();
                since_refresh = 0;
            }
            match self.step(bland)? {
                Step::Optimal if since_refresh == 0 => return Ok(()),
                Step::Optimal => {
                    // Confirm optimality on fresh values.
                    since_refresh = REFRESH_EVERY;
                }
                Step::Moved { degenerate } => {
                    since_refresh += 1;
                    if degenerate {
                        degenerate_run += 1;
                    } else {
                        degenerate_run = 0;
                    }
                }
            }
        }
    }
}

/// Solves the program to optimality.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let nv = lp.n_vars();
    let m = lp.rows.len();
    if lp.upper.len() != nv {
        return Err(Error::DimensionMismatch {
            what: "upper bounds",
            expected: nv,
            found: lp.upper.len(),
        });
    }

    // Equilibrate rows and orient them so rhs ≥ 0.
    let mut rows: Vec<(SparseRow, Sense, f64)> = lp
        .rows
        .iter()
        .map(|row| {
            let scale = row.coefs.iter().fold(0.0f64, |s, &(_, a)| s.max(a.abs()));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            let mut coefs: Vec<(usize, f64)> =
                row.coefs.iter().map(|&(j, a)| (j, a / scale)).collect();
            let mut rhs = row.rhs / scale;
            let mut sense = row.sense;
            if rhs < 0.0 {
                rhs = -rhs;
                coefs.iter_mut().for_each(|c| c.1 = -c.1);
                sense = match sense {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
            }
            (coefs, sense, rhs)
        })
        .collect();

    // Column occurrence counts for the singleton crash.
    let mut occurrences = vec![0usize; nv];
    for (coefs, _, _) in &rows {
        for &(j, a) in coefs {
            if a != 0.0 {
                occurrences[j] += 1;
            }
        }
    }

    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let mut basis = vec![usize::MAX; m];
    let mut crash_used = vec![false; nv];
    for (i, (coefs, sense, rhs)) in rows.iter_mut().enumerate() {
        if *sense != Sense::Eq {
            continue;
        }
        let pick = coefs
            .iter()
            .filter(|&&(j, a)| {
                a > PIVOT_TOL && occurrences[j] == 1 && !crash_used[j] && *rhs / a <= lp.upper[j]
            })
            .map(|&(j, _)| j)
            .min();
        if let Some(j) = pick {
            crash_used[j] = true;
            basis[i] = j;
        }
    }
    let n_art = basis
        .iter()
        .zip(&rows)
        .filter(|(b, r)| **b == usize::MAX && r.1 != Sense::Le)
        .count();
    let ncols = nv + n_slack + n_art;

    let mut a = vec![0.0; m * ncols];
    let mut upper = lp.upper.clone();
    upper.resize(ncols, f64::INFINITY);
    let mut cost = lp.objective.clone();
    cost.resize(ncols, 0.0);
    let mut beta = vec![0.0; m];
    let mut frozen = vec![false; ncols];
    let mut slack = nv;
    let mut art = nv + n_slack;
    let mut artificials = Vec::new();
    let mut prepared = Vec::with_capacity(m);
    let mut prepared_rhs = Vec::with_capacity(m);
    for (i, (coefs, sense, rhs)) in rows.iter().enumerate() {
        let row = &mut a[i * ncols..(i + 1) * ncols];
        for &(j, c) in coefs {
            row[j] += c;
        }
        beta[i] = *rhs;
        match sense {
            Sense::Le => {
                row[slack] = 1.0;
                if basis[i] == usize::MAX {
                    basis[i] = slack;
                }
                slack += 1;
            }
            Sense::Ge => {
                row[slack] = -1.0;
                slack += 1;
            }
            Sense::Eq => {}
        }
        if basis[i] == usize::MAX {
            row[art] = 1.0;
            basis[i] = art;
            artificials.push(art);
            art += 1;
        } else if basis[i] < nv {
            // Crash column: scale so it is a unit column.
            let piv = row[basis[i]];
            row.iter_mut().for_each(|v| *v /= piv);
            beta[i] = *rhs / piv;
        }
        prepared.push(
            row.iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, &v)| (j, v))
                .collect::<Vec<_>>(),
        );
        prepared_rhs.push(beta[i]);
    }
    let unit_col = basis.clone();

    let mut status = vec![Status::Lower; ncols];
    for &b in &basis {
        status[b] = Status::Basic;
    }
    let max_iterations = 50 * (m + ncols) + 1000;
    let mut tab = Tableau {
        m,
        ncols,
        a,
        cost,
        upper,
        d: Vec::with_capacity(ncols),
        basis,
        beta,
        status,
        frozen: vec![false; ncols],
        rows: prepared,
        rhs: prepared_rhs,
        unit_col,
        phase_cost: Vec::new(),
        iterations: 0,
        max_iterations,
        nz_buf: Vec::with_capacity(ncols),
        row_buf: Vec::with_capacity(ncols),
    };

    if !artificials.is_empty() {
        let mut phase1 = vec![0.0; ncols];
        for &k in &artificials {
            phase1[k] = 1.0;
        }
        tab.reset_reduced_costs(&phase1);
        tab.phase_cost = phase1;
        tab.run()?;
        let infeasibility: f64 = artificials.iter().map(|&k| tab.value(k)).sum();
        if infeasibility > FEAS_TOL * (1.0 + m as f64) {
            return Err(Error::Infeasible);
        }
        for &k in &artificials {
            frozen[k] = true;
            tab.upper[k] = 0.0;
        }
        // Drive zero-valued artificials out of the basis where possible.
        for i in 0..m {
            if !frozen[tab.basis[i]] {
                continue;
            }
            let pick = (0..nv + n_slack)
                .filter(|&j| tab.status[j] != Status::Basic)
                .max_by(|&p, &q| {
                    tab.at(i, p)
                        .abs()
                        .partial_cmp(&tab.at(i, q).abs())
                        .unwrap()
                        .then(q.cmp(&p))
                });
            if let Some(j) = pick.filter(|&j| tab.at(i, j).abs() > PIVOT_TOL) {
                let old = tab.basis[i];
                let value = tab.value(j);
                tab.status[old] = Status::Lower;
                tab.status[j] = Status::Basic;
                tab.basis[i] = j;
                tab.beta[i] = value;
                tab.d.iter_mut().for_each(|v| *v = 0.0);
                tab.pivot(i, j);
            }
        }
        tab.frozen = frozen;
    }

    let cost = tab.cost.clone();
    tab.reset_reduced_costs(&cost);
    tab.phase_cost = cost;
    tab.run()?;

    let x: Vec<f64> = (0..nv).map(|j| tab.value(j)).collect();
    let objective = x.iter().zip(&lp.objective).map(|(v, c)| v * c).sum();
    Ok(LpSolution {
        x,
        objective,
        iterations: tab.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coefs: &[(usize, f64)], sense: Sense, rhs: f64) -> Row {
        Row {
            coefs: coefs.to_vec(),
            sense,
            rhs,
        }
    }

    #[test]
    fn textbook_max_problem() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  →  x = 2, y = 6, obj 36.
        let lp = LinearProgram {
            objective: vec![-3.0, -5.0],
            upper: vec![f64::INFINITY; 2],
            rows: vec![
                row(&[(0, 1.0)], Sense::Le, 4.0),
                row(&[(1, 2.0)], Sense::Le, 12.0),
                row(&[(0, 3.0), (1, 2.0)], Sense::Le, 18.0),
            ],
        };
        let sol = solve(&lp).unwrap();
        assert!((sol.objective + 36.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn upper_bounds_and_equalities() {
        // min -x - y s.t. x + y = 1.5, x,y ∈ [0,1].
        let lp = LinearProgram {
            objective: vec![-1.0, -2.0],
            upper: vec![1.0, 1.0],
            rows: vec![row(&[(0, 1.0), (1, 1.0)], Sense::Eq, 1.5)],
        };
        let sol = solve(&lp).unwrap();
        assert!((sol.x[1] - 1.0).abs() < 1e-9);
        assert!((sol.x[0] - 0.5).abs() < 1e-9);
        assert!(lp.max_residual(&sol.x) < 1e-9);
    }

    #[test]
    fn ge_rows_need_phase_one() {
        // min x + y s.t. x + 2y ≥ 4, 3x + y ≥ 6  →  x = 1.6, y = 1.2.
        let lp = LinearProgram {
            objective: vec![1.0, 1.0],
            upper: vec![f64::INFINITY; 2],
            rows: vec![
                row(&[(0, 1.0), (1, 2.0)], Sense::Ge, 4.0),
                row(&[(0, 3.0), (1, 1.0)], Sense::Ge, 6.0),
            ],
        };
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 2.8).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = LinearProgram {
            objective: vec![1.0],
            upper: vec![1.0],
            rows: vec![row(&[(0, 1.0)], Sense::Ge, 2.0)],
        };
        assert_eq!(solve(&lp), Err(Error::Infeasible));
        let lp = LinearProgram {
            objective: vec![-1.0],
            upper: vec![f64::INFINITY],
            rows: vec![row(&[(0, 1.0)], Sense::Ge, 0.0)],
        };
        assert_eq!(solve(&lp), Err(Error::Unbounded));
    }
}
