//! Brute-force LP oracle: enumerate every basis of tight hyperplanes.

use nearopt_core::lp::{LpProblem, Relation, Sense};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Box used to detect unboundedness: if doubling it improves the optimum, the LP has an
/// improving ray.
pub const BOX: f64 = 1e6;

#[derive(Debug, PartialEq)]
pub enum Verdict {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for k in col..n {
                        a[r][k] -= f * a[col][k];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn feasible(p: &LpProblem, x: &[f64], bx: f64) -> bool {
    let scale = |v: f64| 1e-7 * (1.0 + v.abs());
    x.iter().all(|&v| v >= -1e-7 && v <= bx + 1e-3)
        && p.constraints.iter().all(|c| {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            c.relation.violation(lhs, c.rhs) <= scale(c.rhs)
        })
}

pub fn brute_force(p: &LpProblem) -> Verdict {
    match (boxed(p, BOX), boxed(p, 2.0 * BOX)) {
        (None, _) | (_, None) => Verdict::Infeasible,
        (Some(a), Some(b)) if (a - b).abs() > 1e-6 * (1.0 + a.abs()) => Verdict::Unbounded,
        (Some(a), Some(_)) => Verdict::Optimal(a),
    }
}

/// Enumerate every choice of `n` tight hyperplanes among rows, `x_j = 0` and `x_j = bx`.
fn boxed(p: &LpProblem, bx: f64) -> Option<f64> {
    let n = p.n_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = p.constraints.iter().map(|c| (c.coeffs.clone(), c.rhs)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), 0.0));
        planes.push((e, bx));
    }
    let sign = if p.sense == Sense::Min { 1.0 } else { -1.0 };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(p, &x, bx) {
                let v = sign * p.objective.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
                if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                    best = Some((v, x));
                }
            }
        }
        // next combination
        let k = planes.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best.map(|(v, _)| sign * v);
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for t in i + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Small integer LP: up to 6 variables and 8 rows, every relation and sense.
pub fn random_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let n = rng.random_range(1..=6);
    let rows = rng.random_range(1..=8);
    let sense = if rng.random_bool(0.5) { Sense::Min } else { Sense::Max };
    let objective = (0..n).map(|_| rng.random_range(-3..=3) as f64).collect();
    let mut p = LpProblem::new(sense, objective);
    for _ in 0..rows {
        let coeffs = (0..n).map(|_| rng.random_range(-3..=3) as f64).collect();
        let rel = match rng.random_range(0..10) {
            0..=5 => Relation::Le,
            6..=8 => Relation::Ge,
            _ => Relation::Eq,
        };
        let rhs = rng.random_range(-4..=10) as f64;
        p.add_constraint(coeffs, rel, rhs);
    }
    p
}
