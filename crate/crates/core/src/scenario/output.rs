//! Trace files and the JSON report.
//!
//! Floats are always written with 17 significant digits, so a rerun with the
//! same config and seed reproduces every file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::run::{RunOutput, RunReport};
use super::ScenarioError;

/// gnuplot script written next to the CSVs by `--emit-plots`.
pub const PLOT_SCRIPT: &str = r#"# gnuplot -p plots.gp
set datafile separator ','
set key outside
set multiplot layout 2,2

set title 'coupled residual norms'
set xlabel 'k'
plot for [i=1:32] 'residuals.csv' skip 1 using 1:($2==i ? $5 : 1/0) with lines title sprintf('filter %d', i)

set title 'decoupled residual norms'
set logscale y
plot for [i=1:32] 'residuals.csv' skip 1 using 1:($2==i ? $6 : 1/0) with lines title sprintf('filter %d', i)
unset logscale y

set title 'centroid'
plot 'centroid.csv' skip 1 using 1:2 with lines title 'x', \
     '' skip 1 using 1:3 with lines title 'y', \
     '' skip 1 using 1:4 with lines dt 2 title 'x est', \
     '' skip 1 using 1:5 with lines dt 2 title 'y est'

set title 'leader input'
plot 'control.csv' skip 1 using 1:2 with lines title 'ux', \
     '' skip 1 using 1:3 with lines title 'uy'

unset multiplot
"#;

/// 17 significant digits, scientific notation.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NaN".into()
    }
}

fn json_value(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent + 1);
    let close = "  ".repeat(indent);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(num) => {
            if num.is_u64() || num.is_i64() {
                out.push_str(&num.to_string());
            } else {
                match num.as_f64() {
                    Some(f) if f.is_finite() => out.push_str(&format_float(f)),
                    _ => out.push_str("null"),
                }
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad);
                json_value(item, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&close);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (key, item)) in map.iter().enumerate() {
                let _ = write!(out, "{pad}{}: ", Value::String(key.clone()));
                json_value(item, indent + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&close);
            out.push('}');
        }
    }
}

/// Pretty JSON with every non-integer number at 17 significant digits.
pub fn report_json(report: &RunReport) -> String {
    let value = serde_json::to_value(report).expect("report serializes");
    let mut out = String::new();
    json_value(&value, 0, &mut out);
    out.push('\n');
    out
}

fn positions_csv(out: &RunOutput) -> String {
    let mut s = String::from("k,agent,x,y\n");
    for &(k, a, x, y) in &out.traces.positions {
        let _ = writeln!(s, "{k},{a},{},{}", format_float(x), format_float(y));
    }
    s
}

fn residuals_csv(out: &RunOutput) -> String {
    let mut s = String::from("k,filter,alpha_x,alpha_y,alpha_norm,gamma_norm\n");
    for &(k, f, ax, ay, an, gn) in &out.traces.residuals {
        let _ = writeln!(
            s,
            "{k},{f},{},{},{},{}",
            format_float(ax),
            format_float(ay),
            format_float(an),
            format_float(gn)
        );
    }
    s
}

fn centroid_csv(out: &RunOutput) -> String {
    let mut s = String::from("k,cx,cy,cx_hat,cy_hat\n");
    for &(k, cx, cy, hx, hy) in &out.traces.centroid {
        let _ = writeln!(
            s,
            "{k},{},{},{},{}",
            format_float(cx),
            format_float(cy),
            format_float(hx),
            format_float(hy)
        );
    }
    s
}

fn control_csv(out: &RunOutput) -> String {
    let mut s = String::from("k,ux,uy\n");
    for &(k, ux, uy) in &out.traces.control {
        let _ = writeln!(s, "{k},{},{}", format_float(ux), format_float(uy));
    }
    s
}

/// Writes `positions.csv`, `residuals.csv`, `centroid.csv`, `control.csv`,
/// `report.json`, `config.resolved.toml` and optionally `plots.gp` into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path, emit_plots: bool) -> Result<Vec<PathBuf>, ScenarioError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ScenarioError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;

    let mut files = vec![
        ("positions.csv", positions_csv(out)),
        ("residuals.csv", residuals_csv(out)),
        ("centroid.csv", centroid_csv(out)),
        ("control.csv", control_csv(out)),
        ("report.json", report_json(&out.report)),
        ("config.resolved.toml", out.config.to_toml()),
    ];
    if emit_plots {
        files.push(("plots.gp", PLOT_SCRIPT.to_string()));
    }

    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
