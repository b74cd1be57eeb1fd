use std::fmt::Write;

use super::LinearModel;

fn name(s: &str, fallback: &str, k: usize) -> String {
    let cleaned: String = s
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.[]".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.is_empty() || cleaned.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        format!("{fallback}{k}_{cleaned}")
    } else {
        cleaned
    }
}

fn terms(out: &mut String, t: impl Iterator<Item = (f64, String)>) {
    let mut first = true;
    for (c, v) in t {
        if c == 0.0 {
            continue;
        }
        if first {
            let _ = write!(out, " {c} {v}");
        } else if c < 0.0 {
            let _ = write!(out, " - {} {v}", -c);
        } else {
            let _ = write!(out, " + {c} {v}");
        }
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
}

pub fn write(model: &LinearModel) -> String {
    let vnames: Vec<String> = model
        .vars()
        .iter()
        .enumerate()
        .map(|(k, v)| name(&v.name, "x", k))
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", model.name);
    out.push_str("Minimize\n obj:");
    terms(
        &mut out,
        model.objective().iter().zip(&vnames).map(|(&c, v)| (c, v.clone())),
    );
    if model.constant() != 0.0 {
        let _ = write!(out, " + {} __const", model.constant());
    }
    out.push_str("\nSubject To\n");
    for (k, r) in model.rows().iter().enumerate() {
        let rn = name(&r.name, "r", k);
        let lhs = |out: &mut String| terms(out, r.terms.iter().map(|&(v, c)| (c, vnames[v.0].clone())));
        match (r.lower.is_finite(), r.upper.is_finite()) {
            (true, true) if r.lower == r.upper => {
                let _ = write!(out, " {rn}:");
                lhs(&mut out);
                let _ = writeln!(out, " = {}", r.upper);
            }
            (true, true) => {
                let _ = write!(out, " {rn}_lo:");
                lhs(&mut out);
                let _ = writeln!(out, " >= {}", r.lower);
                let _ = write!(out, " {rn}_up:");
                lhs(&mut out);
                let _ = writeln!(out, " <= {}", r.upper);
            }
            (false, true) => {
                let _ = write!(out, " {rn}:");
                lhs(&mut out);
                let _ = writeln!(out, " <= {}", r.upper);
            }
            (true, false) => {
                let _ = write!(out, " {rn}:");
                lhs(&mut out);
                let _ = writeln!(out, " >= {}", r.lower);
            }
            (false, false) => {}
        }
    }
    out.push_str("Bounds\n");
    for (v, n) in model.vars().iter().zip(&vnames) {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {n} free");
            }
            (true, true) if v.lower == v.upper => {
                let _ = writeln!(out, " {n} = {}", v.lower);
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {n} <= {}", v.lower, v.upper);
            }
            (true, false) => {
                let _ = writeln!(out, " {n} >= {}", v.lower);
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {n} <= {}", v.upper);
            }
        }
    }
    if model.constant() != 0.0 {
        out.push_str(" __const = 1\n");
    }
    let ints: Vec<&String> = model
        .vars()
        .iter()
        .zip(&vnames)
        .filter(|(v, _)| v.integer)
        .map(|(_, n)| n)
        .collect();
    if !ints.is_empty() {
        out.push_str("General\n");
        for n in ints {
            let _ = writeln!(out, " {n}");
        }
    }
    out.push_str("End\n");
    out
}
