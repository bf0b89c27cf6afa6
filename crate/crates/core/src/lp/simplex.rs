//! Two-phase primal simplex on a dense tableau.
//!
//! Pricing is Dantzig (most negative reduced cost). After `3 × n_vars` consecutive degenerate
//! pivots the solver falls back to Bland's lowest-index rule until the objective moves again.

use alloc::vec;
use alloc::vec::Vec;

use super::standard::{to_standard_form, StandardForm};
use super::{LpError, LpProblem, LpSolution, LpStatus, FEAS_TOL, OPT_TOL, PIVOT_TOL};

/// Entries smaller than this after an update are flushed to zero.
const DROP_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, Default)]
pub struct SolverOptions {
    /// Pivot budget across both phases; defaults to `50 × (rows + cols)` of the standard form.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots before switching to Bland's rule; defaults to
    /// `3 × n_vars` of the original problem.
    pub bland_after: Option<usize>,
}

pub fn solve(p: &LpProblem) -> Result<LpSolution, LpError> {
    solve_with(p, SolverOptions::default())
}

pub fn solve_with(p: &LpProblem, opts: SolverOptions) -> Result<LpSolution, LpError> {
    p.validate()?;
    let sf = to_standard_form(p);
    let rows = sf.problem.constraints.len();
    let cols = sf.problem.n_vars();
    let limit = opts.max_iterations.unwrap_or(50 * (rows + cols));
    let bland_after = opts.bland_after.unwrap_or(3 * p.n_vars()).max(1);

    let mut tab = Tableau::phase_one(&sf);
    let mut iterations = 0;

    let phase_one = tab.run(limit, bland_after, &mut iterations);
    if phase_one == Outcome::IterationLimit {
        return Ok(finish(&sf, &tab, LpStatus::IterationLimit, iterations, None));
    }
    let infeasibility = -tab.d[tab.cols];
    let b_scale = sf.problem.constraints.iter().fold(1.0f64, |acc, c| acc.max(c.rhs.abs()));
    if infeasibility > FEAS_TOL.max(1e-9 * b_scale) {
        let worst = tab.worst_artificial_row();
        let infeasible_row = worst.filter(|&r| r < sf.n_original_rows);
        return Ok(finish(&sf, &tab, LpStatus::Infeasible, iterations, infeasible_row));
    }

    tab.drive_out_artificials();
    tab.install_phase_two(&sf.problem.objective);
    let status = match tab.run(limit, bland_after, &mut iterations) {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Unbounded => LpStatus::Unbounded,
        Outcome::IterationLimit => LpStatus::IterationLimit,
    };
    Ok(finish(&sf, &tab, status, iterations, None))
}

fn finish(
    sf: &StandardForm,
    tab: &Tableau,
    status: LpStatus,
    iterations: usize,
    infeasible_row: Option<usize>,
) -> LpSolution {
    let n = sf.problem.n_vars();
    let s = tab.point(n);
    let primal = sf.recover(&s);
    let standard_value = super::dot(&sf.problem.objective, &s);
    let objective_value = match status {
        LpStatus::Optimal | LpStatus::IterationLimit => sf.original_objective(standard_value),
        LpStatus::Infeasible => f64::NAN,
        LpStatus::Unbounded => sf.sign * f64::NEG_INFINITY,
    };
    let mut basis: Vec<usize> = tab.basis.iter().copied().filter(|&j| j < n).collect();
    basis.sort_unstable();
    LpSolution {
        status,
        objective_value,
        primal,
        basis,
        reduced_costs: tab.d[..n].to_vec(),
        iterations,
        infeasible_row,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Tableau {
    rows: usize,
    /// Columns including artificials; the right-hand side lives at index `cols`.
    cols: usize,
    /// First artificial column.
    n_real: usize,
    t: Vec<f64>,
    /// Reduced costs, with minus the current objective in the last slot.
    d: Vec<f64>,
    basis: Vec<usize>,
    blocked: Vec<bool>,
    /// Scratch buffer for the nonzero pattern of the pivot row.
    pivot_nz: Vec<(usize, f64)>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, j: usize) -> f64 {
        self.t[r * self.width() + j]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn phase_one(sf: &StandardForm) -> Self {
        let a = &sf.problem;
        let rows = a.constraints.len();
        let n = a.n_vars();

        // Rows with a ready-made unit column (after sign normalisation) start with it basic.
        let mut flip = vec![false; rows];
        for (r, c) in a.constraints.iter().enumerate() {
            flip[r] = c.rhs < 0.0;
        }
        let mut basis: Vec<Option<usize>> = vec![None; rows];
        for j in 0..n {
            let mut hit = None;
            let mut count = 0;
            for (r, c) in a.constraints.iter().enumerate() {
                let v = c.coeffs[j];
                if v != 0.0 {
                    count += 1;
                    hit = Some((r, if flip[r] { -v } else { v }));
                }
            }
            if let (1, Some((r, v))) = (count, hit) {
                if v == 1.0 && basis[r].is_none() {
                    basis[r] = Some(j);
                }
            }
        }
        let n_art = basis.iter().filter(|b| b.is_none()).count();
        let cols = n + n_art;
        let width = cols + 1;
        let mut t = vec![0.0; rows * width];
        let mut d = vec![0.0; width];
        let mut next_art = n;
        let mut final_basis = Vec::with_capacity(rows);
        for (r, c) in a.constraints.iter().enumerate() {
            let s = if flip[r] { -1.0 } else { 1.0 };
            let row = &mut t[r * width..(r + 1) * width];
            for (dst, &v) in row.iter_mut().zip(&c.coeffs) {
                *dst = s * v;
            }
            row[cols] = s * c.rhs;
            match basis[r] {
                Some(j) => final_basis.push(j),
                None => {
                    row[next_art] = 1.0;
                    final_basis.push(next_art);
                    next_art += 1;
                    for (dj, &v) in d.iter_mut().zip(row.iter()) {
                        *dj -= v;
                    }
                }
            }
        }
        for dj in &mut d[n..cols] {
            *dj = 0.0;
        }
        Self {
            rows,
            cols,
            n_real: n,
            t,
            d,
            basis: final_basis,
            blocked: vec![false; cols],
            pivot_nz: Vec::new(),
        }
    }

    fn worst_artificial_row(&self) -> Option<usize> {
        (0..self.rows)
            .filter(|&r| self.basis[r] >= self.n_real)
            .max_by(|&a, &b| self.rhs(a).total_cmp(&self.rhs(b)))
            .filter(|&r| self.rhs(r) > 0.0)
    }

    fn drive_out_artificials(&mut self) {
        for r in 0..self.rows {
            if self.basis[r] < self.n_real {
                continue;
            }
            let candidate = (0..self.n_real)
                .map(|j| (j, self.at(r, j).abs()))
                .filter(|&(_, v)| v > 1e-9)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((j, _)) = candidate {
                self.pivot(r, j);
                let w = self.width();
                let rhs = &mut self.t[r * w + self.cols];
                if rhs.abs() < FEAS_TOL {
                    *rhs = 0.0;
                }
            }
            // Otherwise the row is redundant: its artificial stays basic at zero and no real
            // column has an entry in it.
        }
        for j in self.n_real..self.cols {
            self.blocked[j] = true;
        }
    }

    fn install_phase_two(&mut self, cost: &[f64]) {
        let w = self.width();
        self.d.iter_mut().for_each(|v| *v = 0.0);
        self.d[..cost.len()].copy_from_slice(cost);
        for r in 0..self.rows {
            let j = self.basis[r];
            let cb = if j < cost.len() { cost[j] } else { 0.0 };
            if cb != 0.0 {
                let row = &self.t[r * w..(r + 1) * w];
                for (dj, &v) in self.d.iter_mut().zip(row) {
                    *dj -= cb * v;
                }
            }
        }
        for r in 0..self.rows {
            self.d[self.basis[r]] = 0.0;
        }
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let candidates = (0..self.cols).filter(|&j| !self.blocked[j] && self.d[j] < -OPT_TOL);
        if bland {
            candidates.min()
        } else {
            candidates.min_by(|&a, &b| self.d[a].total_cmp(&self.d[b]))
        }
    }

    fn leaving(&self, q: usize, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, q);
            if a > PIVOT_TOL {
                let ratio = self.rhs(r).max(0.0) / a;
                if best.is_none_or(|(_, m)| ratio < m) {
                    best = Some((r, ratio));
                }
            }
        }
        let (_, min_ratio) = best?;
        let slack = 1e-12 * (1.0 + min_ratio);
        let ties = (0..self.rows).filter(|&r| {
            let a = self.at(r, q);
            a > PIVOT_TOL && self.rhs(r).max(0.0) / a <= min_ratio + slack
        });
        let r = if bland {
            ties.min_by_key(|&r| self.basis[r])
        } else {
            ties.max_by(|&x, &y| self.at(x, q).total_cmp(&self.at(y, q)))
        }?;
        Some((r, min_ratio))
    }

    fn run(&mut self, limit: usize, bland_after: usize, iterations: &mut usize) -> Outcome {
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            let Some(q) = self.entering(bland) else {
                return Outcome::Optimal;
            };
            if *iterations >= limit {
                return Outcome::IterationLimit;
            }
            let Some((r, step)) = self.leaving(q, bland) else {
                return Outcome::Unbounded;
            };
            if step <= 1e-12 {
                degenerate += 1;
                if degenerate >= bland_after {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
            self.pivot(r, q);
            *iterations += 1;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width();
        let pv = self.t[r * w + q];
        self.pivot_nz.clear();
        for j in 0..w {
            let v = self.t[r * w + j];
            if v != 0.0 {
                let scaled = if j == q { 1.0 } else { v / pv };
                self.t[r * w + j] = scaled;
                self.pivot_nz.push((j, scaled));
            }
        }
        let nz = core::mem::take(&mut self.pivot_nz);
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * w + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * w..(i + 1) * w];
            eliminate(row, &nz, f);
            row[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            eliminate(&mut self.d, &nz, f);
            self.d[q] = 0.0;
        }
        self.pivot_nz = nz;
        self.basis[r] = q;
    }

    fn point(&self, n: usize) -> Vec<f64> {
        let mut s = vec![0.0; n];
        for r in 0..self.rows {
            let j = self.basis[r];
            if j < n {
                s[j] = self.rhs(r).max(0.0);
            }
        }
        s
    }
}

fn eliminate(row: &mut [f64], pivot_row: &[(usize, f64)], f: f64) {
    for &(j, v) in pivot_row {
        let x = row[j] - f * v;
        row[j] = if x.abs() < DROP_TOL { 0.0 } else { x };
    }
}
