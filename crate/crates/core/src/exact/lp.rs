use std::fmt::Write as _;
use std::io::{self, Write};

use super::model::{IlpModel, Sense, VarKind};

const TERMS_PER_LINE: usize = 6;

fn push_terms(out: &mut String, model: &IlpModel, terms: &[(usize, f64)]) {
    let terms: Vec<&(usize, f64)> = terms.iter().filter(|(_, c)| *c != 0.0).collect();
    if terms.is_empty() {
        // Keep the row syntactically valid.
        let _ = write!(out, " 0 {}", model.variables[0].name);
        return;
    }
    for (k, &&(v, c)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { "-" } else { "+" };
        let mag = c.abs();
        if k == 0 && sign == "+" {
            out.push(' ');
        } else {
            let _ = write!(out, " {sign} ");
        }
        if mag != 1.0 {
            let _ = write!(out, "{mag} ");
        }
        out.push_str(&model.variables[v].name);
    }
}

/// Renders `model` in LP format. The output depends only on the model.
pub fn export_lp(model: &IlpModel) -> String {
    let mut out = String::new();
    out.push_str("\\ VM migration cycle: brown energy cost plus migration cost\n");
    let _ = writeln!(out, "\\ variables {} rows {} f_max {}", model.variables.len(), model.rows.len(), model.f_max);
    out.push_str("Minimize\n\\ eq3\n obj:");
    push_terms(&mut out, model, &model.objective);
    out.push_str("\nSubject To\n");
    let mut last_tag = 0;
    for row in &model.rows {
        if row.tag != last_tag {
            let _ = writeln!(out, "\\ eq{}", row.tag);
            last_tag = row.tag;
        }
        let _ = write!(out, " {}:", row.name);
        push_terms(&mut out, model, &row.terms);
        let sense = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let rhs = if row.rhs == 0.0 { 0.0 } else { row.rhs };
        let _ = writeln!(out, " {sense} {rhs}");
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        match (v.kind, v.upper) {
            (VarKind::Binary, _) => {}
            (_, Some(u)) => {
                let _ = writeln!(out, " 0 <= {} <= {u}", v.name);
            }
            (_, None) => {
                let _ = writeln!(out, " {} >= 0", v.name);
            }
        }
    }
    for (header, kind) in [("Generals", VarKind::Integer), ("Binaries", VarKind::Binary)] {
        let names: Vec<&str> = model.variables.iter().filter(|v| v.kind == kind).map(|v| v.name.as_str()).collect();
        if names.is_empty() {
            continue;
        }
        let _ = writeln!(out, "{header}");
        for chunk in names.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

pub fn write_lp(model: &IlpModel, sink: &mut impl Write) -> io::Result<()> {
    sink.write_all(export_lp(model).as_bytes())?;
    sink.flush()
}
