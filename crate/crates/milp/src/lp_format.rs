//! CPLEX LP text format writer.
//!
//! Grammar of the emitted file (a subset every major solver reads):
//!
//! ```text
//! \ <comment lines>
//! Minimize
//!  obj: <term> { (+|-) <term> }
//! Subject To
//!  c<i>: <term> { (+|-) <term> } (<=|=|>=) <number>
//! Bounds
//!  <lo> <= <name> <= <hi>      finite or "-inf"/"+inf" bounds
//!  <name> free                  both bounds infinite
//! Binaries
//!  <name> { <name> }
//! End
//! ```
//!
//! A term is `<coefficient> <name>`. Names keep only `[A-Za-z0-9_.]`, other
//! characters become `_`, and a leading digit or dot gets an `x` prefix.
//! Long expressions wrap onto continuation lines that start with a space.
//! A non-zero objective offset is written as a `\ objective offset:` comment.

use std::io::{self, Write};

use crate::problem::MilpProblem;

const TERMS_PER_LINE: usize = 8;

fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        out.insert(0, 'x');
    }
    out
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

fn write_expr<W: Write>(w: &mut W, terms: &[(usize, f64)], names: &[String]) -> io::Result<()> {
    if terms.is_empty() {
        return write!(w, " 0 {}", names.first().map(String::as_str).unwrap_or("x0"));
    }
    for (k, &(j, a)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            write!(w, "\n ")?;
        }
        let sign = if a < 0.0 { "-" } else { "+" };
        if k == 0 && a >= 0.0 {
            write!(w, " {} {}", fmt_num(a), names[j])?;
        } else {
            write!(w, " {sign} {} {}", fmt_num(a.abs()), names[j])?;
        }
    }
    Ok(())
}

/// Writes `p` in LP format. Variable names come from the problem's name table
/// (sanitized), defaulting to `x<j>`.
pub fn write_lp<W: Write>(p: &MilpProblem, mut w: W) -> io::Result<()> {
    let lp = &p.lp;
    let mut names: Vec<String> = (0..lp.n_vars()).map(|j| sanitize(&lp.var_name(j))).collect();
    // Disambiguate collisions introduced by sanitizing.
    let mut seen = std::collections::HashSet::new();
    for (j, name) in names.iter_mut().enumerate() {
        if !seen.insert(name.clone()) {
            *name = format!("{name}_{j}");
            seen.insert(name.clone());
        }
    }

    writeln!(w, "\\ {} variables, {} rows, {} binaries", lp.n_vars(), lp.n_constraints(), p.binaries.len())?;
    if lp.objective_offset != 0.0 {
        writeln!(w, "\\ objective offset: {}", fmt_num(lp.objective_offset))?;
    }
    writeln!(w, "Minimize")?;
    let obj_terms: Vec<(usize, f64)> =
        lp.objective.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (j, *c)).collect();
    write!(w, " obj:")?;
    write_expr(&mut w, &obj_terms, &names)?;
    writeln!(w)?;

    writeln!(w, "Subject To")?;
    for (i, row) in lp.constraints.iter().enumerate() {
        write!(w, " c{i}:")?;
        write_expr(&mut w, &row.coeffs, &names)?;
        writeln!(w, " {} {}", row.relation.symbol(), fmt_num(row.rhs))?;
    }

    writeln!(w, "Bounds")?;
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if p.binaries.contains(&j) && lo == 0.0 && hi == 1.0 {
            continue;
        }
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            writeln!(w, " {} free", names[j])?;
        } else {
            writeln!(w, " {} <= {} <= {}", fmt_num(lo), names[j], fmt_num(hi))?;
        }
    }
    if !p.binaries.is_empty() {
        writeln!(w, "Binaries")?;
        for chunk in p.binaries.iter().collect::<Vec<_>>().chunks(TERMS_PER_LINE) {
            let line: Vec<&str> = chunk.iter().map(|&&j| names[j].as_str()).collect();
            writeln!(w, " {}", line.join(" "))?;
        }
    }
    writeln!(w, "End")?;
    Ok(())
}
