use alloc::string::String;
use core::fmt::Write;

use super::{LpProblem, Sense};

/// Fixed plain-text rendering of a problem, one line per item, for diffing.
///
/// ```text
/// min 1 0 -2
/// c0 [label] 1 1 0 <= 4
/// bounds x0 0 inf
/// ```
pub fn dump(p: &LpProblem) -> String {
    let mut out = String::new();
    let sense = match p.sense {
        Sense::Min => "min",
        Sense::Max => "max",
    };
    out.push_str(sense);
    for c in &p.objective {
        let _ = write!(out, " {c:?}");
    }
    out.push('\n');
    for (i, c) in p.constraints.iter().enumerate() {
        let _ = write!(out, "c{i} [{}]", c.label);
        for a in &c.coeffs {
            let _ = write!(out, " {a:?}");
        }
        let _ = writeln!(out, " {} {:?}", c.relation.symbol(), c.rhs);
    }
    for j in 0..p.n_vars() {
        let _ = writeln!(out, "bounds x{j} {:?} {:?}", p.lower[j], p.upper[j]);
    }
    out
}
