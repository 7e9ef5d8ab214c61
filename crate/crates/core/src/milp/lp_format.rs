use std::fmt::Write;

use super::{ModelSpec, ObjectiveSense, RowSense, VarId, VarKind};

fn lp_name(model: &ModelSpec, id: VarId) -> String {
    // LP format forbids some characters that appear in our names.
    model.variables[id.0]
        .name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_terms(out: &mut String, model: &ModelSpec, terms: &[(VarId, f64)]) {
    if terms.is_empty() {
        out.push_str(" 0");
    }
    for &(id, c) in terms {
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", c.abs(), lp_name(model, id));
    }
}

pub(super) fn write(model: &ModelSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", model.name);
    out.push_str(match model.objective.sense {
        ObjectiveSense::Minimize => "Minimize\n",
        ObjectiveSense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    write_terms(&mut out, model, &model.objective.terms);
    if model.objective.constant != 0.0 {
        let _ = write!(out, " + {}", model.objective.constant);
    }
    out.push_str("\nSubject To\n");
    for (i, c) in model.constraints.iter().enumerate() {
        let _ = write!(out, " r{i}:");
        write_terms(&mut out, model, &c.terms);
        let op = match c.sense {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        };
        let _ = writeln!(out, " {op} {}  \\ {}", c.rhs, c.name);
    }
    out.push_str("Bounds\n");
    for (i, v) in model.variables.iter().enumerate() {
        let name = lp_name(model, VarId(i));
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {name} <= {}", v.lower, v.upper);
            }
            (true, false) => {
                let _ = writeln!(out, " {name} >= {}", v.lower);
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {}", v.upper);
            }
        }
    }
    for (section, kind) in [("Binary", VarKind::Binary), ("General", VarKind::Integer)] {
        let names: Vec<String> = (0..model.variables.len())
            .filter(|&i| model.variables[i].kind == kind)
            .map(|i| lp_name(model, VarId(i)))
            .collect();
        if !names.is_empty() {
            let _ = writeln!(out, "{section}\n {}", names.join(" "));
        }
    }
    out.push_str("End\n");
    out
}
