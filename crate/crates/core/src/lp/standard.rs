use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{Constraint, LpProblem, Relation, Sense};

/// How an original variable is expressed in standard-form columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColumnMap {
    /// `x = offset + s`
    Shifted { col: usize, offset: f64 },
    /// `x = offset - s`, used when only the upper bound is finite.
    Mirrored { col: usize, offset: f64 },
    /// `x = pos - neg` for free variables.
    Split { pos: usize, neg: usize },
}

/// An equality-form, min-sense, nonnegative-variable copy of an [`LpProblem`] plus the mapping
/// back to the original variables.
///
/// Standard rows are the original rows in order, followed by one row per doubly-bounded
/// variable (`s <= upper - lower`).
#[derive(Debug, Clone)]
pub struct StandardForm {
    pub problem: LpProblem,
    pub columns: Vec<ColumnMap>,
    /// Slack (or surplus) column of each standard row, if any.
    pub row_slack: Vec<Option<usize>>,
    pub n_original_rows: usize,
    /// Number of columns that carry original variables (slacks follow them).
    pub n_structural: usize,
    /// +1 for min, -1 for max.
    pub sign: f64,
    /// Constant added to the standard objective before applying `sign`.
    pub objective_offset: f64,
}

impl StandardForm {
    /// Original variable values from a standard-form point.
    pub fn recover(&self, s: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|m| match *m {
                ColumnMap::Shifted { col, offset } => offset + s[col],
                ColumnMap::Mirrored { col, offset } => offset - s[col],
                ColumnMap::Split { pos, neg } => s[pos] - s[neg],
            })
            .collect()
    }

    /// Standard-form point (structural columns plus slacks) for an original point.
    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        let n = self.problem.n_vars();
        let mut s = vec![0.0; n];
        for (j, m) in self.columns.iter().enumerate() {
            match *m {
                ColumnMap::Shifted { col, offset } => s[col] = x[j] - offset,
                ColumnMap::Mirrored { col, offset } => s[col] = offset - x[j],
                ColumnMap::Split { pos, neg } => {
                    s[pos] = x[j].max(0.0);
                    s[neg] = (-x[j]).max(0.0);
                }
            }
        }
        for (row, slack) in self.row_slack.iter().enumerate() {
            if let Some(k) = *slack {
                let c = &self.problem.constraints[row];
                let partial: f64 = c
                    .coeffs
                    .iter()
                    .zip(&s)
                    .take(self.n_structural)
                    .map(|(a, v)| a * v)
                    .sum();
                s[k] = (c.rhs - partial) / c.coeffs[k];
            }
        }
        s
    }

    /// Objective in the original problem's sense for a standard-form objective value.
    pub fn original_objective(&self, standard_value: f64) -> f64 {
        self.sign * (standard_value + self.objective_offset)
    }
}

/// Rewrite `p` as `min c·s  s.t.  A s = b, s >= 0`.
///
/// Finite lower bounds are shifted out, upper-only variables mirrored, free variables split,
/// and finite upper bounds of bounded variables become extra rows. Inequalities receive one
/// slack (`<=`) or surplus (`>=`) column each.
pub fn to_standard_form(p: &LpProblem) -> StandardForm {
    let sign = match p.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let mut columns = Vec::with_capacity(p.n_vars());
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    let mut n_cols = 0;
    for j in 0..p.n_vars() {
        let (lo, hi) = (p.lower[j], p.upper[j]);
        let map = if lo.is_finite() {
            if hi.is_finite() {
                bound_rows.push((n_cols, hi - lo));
            }
            ColumnMap::Shifted { col: n_cols, offset: lo }
        } else if hi.is_finite() {
            ColumnMap::Mirrored { col: n_cols, offset: hi }
        } else {
            n_cols += 1;
            ColumnMap::Split { pos: n_cols - 1, neg: n_cols }
        };
        n_cols += 1;
        columns.push(map);
    }
    let n_structural = n_cols;

    let mut objective = vec![0.0; n_structural];
    let mut objective_offset = 0.0;
    for (j, m) in columns.iter().enumerate() {
        let c = sign * p.objective[j];
        match *m {
            ColumnMap::Shifted { col, offset } => {
                objective[col] += c;
                objective_offset += c * offset;
            }
            ColumnMap::Mirrored { col, offset } => {
                objective[col] -= c;
                objective_offset += c * offset;
            }
            ColumnMap::Split { pos, neg } => {
                objective[pos] += c;
                objective[neg] -= c;
            }
        }
    }

    // Rows over structural columns, with the relation still attached.
    let mut rows: Vec<Constraint> = Vec::with_capacity(p.constraints.len() + bound_rows.len());
    for c in &p.constraints {
        let mut coeffs = vec![0.0; n_structural];
        let mut rhs = c.rhs;
        for (j, m) in columns.iter().enumerate() {
            let a = c.coeffs[j];
            if a == 0.0 {
                continue;
            }
            match *m {
                ColumnMap::Shifted { col, offset } => {
                    coeffs[col] += a;
                    rhs -= a * offset;
                }
                ColumnMap::Mirrored { col, offset } => {
                    coeffs[col] -= a;
                    rhs -= a * offset;
                }
                ColumnMap::Split { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        rows.push(Constraint { coeffs, relation: c.relation, rhs, label: c.label.clone() });
    }
    for &(col, width) in &bound_rows {
        let mut coeffs = vec![0.0; n_structural];
        coeffs[col] = 1.0;
        rows.push(Constraint {
            coeffs,
            relation: Relation::Le,
            rhs: width,
            label: format!("bound:{col}"),
        });
    }

    let n_slack = rows.iter().filter(|r| r.relation != Relation::Eq).count();
    let total = n_structural + n_slack;
    objective.resize(total, 0.0);
    let mut row_slack = Vec::with_capacity(rows.len());
    let mut next = n_structural;
    for r in &mut rows {
        r.coeffs.resize(total, 0.0);
        match r.relation {
            Relation::Le => {
                r.coeffs[next] = 1.0;
                row_slack.push(Some(next));
                next += 1;
            }
            Relation::Ge => {
                r.coeffs[next] = -1.0;
                row_slack.push(Some(next));
                next += 1;
            }
            Relation::Eq => row_slack.push(None),
        }
        r.relation = Relation::Eq;
    }

    let mut problem = LpProblem::new(Sense::Min, objective);
    problem.constraints = rows;
    StandardForm {
        problem,
        columns,
        row_slack,
        n_original_rows: p.constraints.len(),
        n_structural,
        sign,
        objective_offset,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_problem_is_left_alone() {
        let mut p = LpProblem::new(Sense::Min, vec![1.0, 2.0]);
        p.add_constraint(vec![1.0, 1.0], Relation::Eq, 3.0);
        let sf = to_standard_form(&p);
        assert_eq!(sf.problem.objective, p.objective);
        assert_eq!(sf.problem.constraints[0].coeffs, p.constraints[0].coeffs);
        assert_eq!(sf.problem.constraints[0].rhs, 3.0);
        assert_eq!(sf.row_slack, vec![None]);
    }

    #[test]
    fn single_le_row_gets_one_slack() {
        let mut p = LpProblem::new(Sense::Max, vec![1.0, 1.0]);
        p.add_constraint(vec![1.0, 1.0], Relation::Le, 1.0);
        let sf = to_standard_form(&p);
        assert_eq!(sf.problem.n_vars(), 3);
        assert_eq!(sf.problem.constraints[0].coeffs, vec![1.0, 1.0, 1.0]);
        assert_eq!(sf.problem.objective, vec![-1.0, -1.0, 0.0]);
        assert_eq!(sf.original_objective(-1.0), 1.0);
    }

    #[test]
    fn ge_row_with_free_variable_splits_and_adds_surplus() {
        let mut p = LpProblem::new(Sense::Min, vec![1.0, 0.0]);
        p.add_constraint(vec![2.0, -1.0], Relation::Ge, -4.0);
        p.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        let sf = to_standard_form(&p);
        // x0 split into two columns, x1 shifted, one surplus.
        assert_eq!(sf.n_structural, 3);
        assert_eq!(sf.problem.n_vars(), 4);
        assert_eq!(sf.problem.constraints[0].coeffs, vec![2.0, -2.0, -1.0, -1.0]);
    }

    #[test]
    fn doubly_bounded_variable_gets_bound_row() {
        let mut p = LpProblem::new(Sense::Min, vec![1.0]);
        p.set_bounds(0, -2.0, 5.0);
        let sf = to_standard_form(&p);
        assert_eq!(sf.problem.constraints.len(), 1);
        assert_eq!(sf.problem.constraints[0].rhs, 7.0);
        assert_eq!(sf.recover(&[0.0, 7.0]), vec![-2.0]);
        assert_eq!(sf.objective_offset, -2.0);
    }
}
