//! Debug dump of an assembled program in CPLEX-LP text form, for
//! cross-checking against external solvers.

use super::LpProblem;
use std::fmt::Write;

/// Render the program. All variables are non-negative, which is the LP-format
/// default, so the Bounds section is empty.
pub fn lp_text(problem: &LpProblem) -> String {
    let names: Vec<String> = problem.catalog().iter().map(|v| v.to_string()).collect();
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    let mut first = true;
    for (j, &c) in problem.costs().iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        push_term(&mut out, &mut first, c, &names[j]);
    }
    if first {
        out.push_str(" 0 vp_0_0");
    }
    out.push_str("\nSubject To\n");

    // gather rows from the column-major storage
    let n_rows = problem.n_eq() + problem.n_ineq();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
    for (j, col) in problem.columns().iter().enumerate() {
        for &(r, v) in col {
            rows[r].push((j, v));
        }
    }
    let t_rows = problem.n_eq() / problem.grid().len();
    for (r, row) in rows.iter().enumerate() {
        let label = if r < problem.n_eq() {
            format!("fit_{}_{}", r % t_rows, r / t_rows)
        } else {
            format!("nc_{}", r - problem.n_eq() + 1)
        };
        let _ = write!(out, " {label}:");
        let mut first = true;
        for &(j, v) in row {
            push_term(&mut out, &mut first, v, &names[j]);
        }
        if r < problem.n_eq() {
            let _ = writeln!(out, " = {}", fmt_num(problem.eq_rhs_at(r)));
        } else {
            out.push_str(" >= 0\n");
        }
    }
    out.push_str("Bounds\nEnd\n");
    out
}

fn push_term(out: &mut String, first: &mut bool, coef: f64, name: &str) {
    if *first {
        if coef < 0.0 {
            let _ = write!(out, " - {} {name}", fmt_num(-coef));
        } else {
            let _ = write!(out, " {} {name}", fmt_num(coef));
        }
        *first = false;
    } else if coef < 0.0 {
        let _ = write!(out, " - {} {name}", fmt_num(-coef));
    } else {
        let _ = write!(out, " + {} {name}", fmt_num(coef));
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

impl LpProblem {
    fn eq_rhs_at(&self, r: usize) -> f64 {
        self.eq_rhs[r]
    }
}
