use std::fmt::Write as _;

use crate::error::Result;
use crate::metrics::format_number;

use super::ols::RegressionFit;

fn format_p(p: Option<f64>) -> String {
    match p {
        None => "NA".into(),
        Some(p) if p < 0.001 => "<0.001".into(),
        Some(p) => format!("{p:.3}"),
    }
}

fn beta_se(estimate: f64, se: Option<f64>) -> String {
    match se {
        Some(se) => format!("{estimate:.3} ({se:.3})"),
        None => format!("{estimate:.3} (NA)"),
    }
}

/// Footer line with N, R² and F.
pub fn fit_footer(fit: &RegressionFit) -> String {
    let f = match (fit.f_statistic, fit.f_p_value) {
        (Some(f), Some(p)) if p < 0.001 => format!("{f:.1} (p<0.001)"),
        (Some(f), p) => format!("{f:.1} (p={})", format_p(p)),
        _ => "NA".into(),
    };
    format!("N={}, R²={:.3}, F={f}", fit.n, fit.r_squared)
}

/// Plain-text regression table: coefficients grouped under their factor
/// headings with indented level rows, a "β (S.E.)" column, star codes and
/// raw p-values, and a footer with N, R² and F.
pub fn render_table(fit: &RegressionFit, title: &str) -> String {
    let mut rows: Vec<(String, String, String, String)> = Vec::new();
    let mut current: Option<&str> = None;
    for c in &fit.coefficients {
        match c.column.group.as_deref() {
            None => rows.push((
                c.column.label.clone(),
                beta_se(c.estimate, c.std_error),
                c.stars.clone(),
                format_p(c.p_value),
            )),
            Some(group) => {
                if current != Some(group) {
                    rows.push((group.to_string(), String::new(), String::new(), String::new()));
                    current = Some(group);
                }
                rows.push((
                    format!("    {}", c.column.label),
                    beta_se(c.estimate, c.std_error),
                    c.stars.clone(),
                    format_p(c.p_value),
                ));
            }
        }
    }
    let header = ("".to_string(), "β (S.E.)".to_string(), "".to_string(), "p".to_string());
    let width = |f: fn(&(String, String, String, String)) -> &String| {
        rows.iter()
            .chain(std::iter::once(&header))
            .map(|r| f(r).chars().count())
            .max()
            .unwrap_or(0)
    };
    let w0 = width(|r| &r.0);
    let w1 = width(|r| &r.1);
    let w2 = width(|r| &r.2).max(3);
    let w3 = width(|r| &r.3);
    let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w - s.chars().count()));
    let lpad = |s: &str, w: usize| format!("{}{s}", " ".repeat(w - s.chars().count()));
    let total = w0 + w1 + w2 + w3 + 6;
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", "=".repeat(total));
    let line = |r: &(String, String, String, String)| {
        format!(
            "{}  {}  {}  {}",
            pad(&r.0, w0),
            lpad(&r.1, w1),
            pad(&r.2, w2),
            lpad(&r.3, w3)
        )
        .trim_end()
        .to_string()
    };
    let _ = writeln!(out, "{}", line(&header));
    let _ = writeln!(out, "{}", "-".repeat(total));
    for r in &rows {
        let _ = writeln!(out, "{}", line(r));
    }
    let _ = writeln!(out, "{}", "-".repeat(total));
    let _ = writeln!(out, "{}", fit_footer(fit));
    let _ = writeln!(out, "*** p<0.001");
    for w in &fit.warnings {
        let _ = writeln!(out, "note: {w}");
    }
    out
}

/// The same table as CSV: one row per coefficient, then footer rows.
pub fn render_csv(fit: &RegressionFit) -> Result<String> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["group", "term", "beta", "se", "t", "p_value", "stars"])?;
    let num = |v: Option<f64>| v.map(format_number).unwrap_or_default();
    for c in &fit.coefficients {
        out.write_record([
            c.column.group.clone().unwrap_or_default(),
            c.column.label.clone(),
            format_number(c.estimate),
            num(c.std_error),
            num(c.t),
            num(c.p_value),
            c.stars.clone(),
        ])?;
    }
    let footer = [
        ("R2", Some(fit.r_squared)),
        ("F", fit.f_statistic),
        ("F_p_value", fit.f_p_value),
    ];
    out.write_record(["model", "N", &fit.n.to_string(), "", "", "", ""])?;
    for (name, value) in footer {
        out.write_record(["model", name, &num(value), "", "", "", ""])?;
    }
    crate::metrics::finish(out)
}
