//! CSV emitters and the surface reader.
//!
//! All files are UTF-8, comma-separated, one header row, LF line endings.
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every f64 bit pattern exactly.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::envelopes::{self};
use crate::model::{ModelSpec, SupNorms};
use crate::odebench::OdeTable;
use crate::pdesolver::{Grid, PdeError, ValueSurface};
use crate::simulator::{CostEstimate, PathSample};
use crate::verify::VerifyReport;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error(transparent)]
    Surface(#[from] PdeError),
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<(), CsvError> {
    std::fs::write(path, contents).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// `t,y,v,w` row-major by time then space.
pub fn write_surface_csv(path: &Path, surface: &ValueSurface) -> Result<(), CsvError> {
    let grid = surface.grid();
    let horizon = surface.model().horizon;
    let mut out = String::with_capacity(grid.t_nodes.len() * grid.y_nodes.len() * 64);
    out.push_str("t,y,v,w\n");
    for (k, &t) in grid.t_nodes.iter().enumerate() {
        for (i, &y) in grid.y_nodes.iter().enumerate() {
            let v = surface.values()[k][i];
            let _ = writeln!(out, "{},{},{},{}", fmt_f(t), fmt_f(y), fmt_f(v), fmt_f((horizon - t) * v));
        }
    }
    write_file(path, &out)
}

/// Rebuild a surface from its CSV emission; exact because of the 17-digit format.
pub fn read_surface_csv(path: &Path, model: &ModelSpec) -> Result<ValueSurface, CsvError> {
    let text = std::fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let p = path.display().to_string();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == "t,y,v,w" => {}
        other => {
            return Err(CsvError::Parse {
                path: p,
                line: 1,
                message: format!("expected header `t,y,v,w`, got {other:?}"),
            })
        }
    }

    let mut t_nodes: Vec<f64> = Vec::new();
    let mut y_nodes: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut first_block = true;
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut field = |name: &str| -> Result<f64, CsvError> {
            parts
                .next()
                .ok_or_else(|| CsvError::Parse {
                    path: p.clone(),
                    line: idx + 1,
                    message: format!("missing column {name}"),
                })?
                .parse::<f64>()
                .map_err(|e| CsvError::Parse {
                    path: p.clone(),
                    line: idx + 1,
                    message: format!("bad {name}: {e}"),
                })
        };
        let t = field("t")?;
        let y = field("y")?;
        let v = field("v")?;
        let _w = field("w")?;

        if t_nodes.last() != Some(&t) {
            t_nodes.push(t);
            rows.push(Vec::new());
            first_block = t_nodes.len() == 1;
        }
        if first_block {
            y_nodes.push(y);
        }
        rows.last_mut().unwrap().push(v);
    }
    if t_nodes.len() < 2 || y_nodes.len() < 2 {
        return Err(CsvError::Parse {
            path: p,
            line: 0,
            message: "surface needs at least 2 time and 2 space nodes".into(),
        });
    }
    let grid = Grid {
        eps: model.horizon - *t_nodes.last().unwrap(),
        grading_ratio: 1.0,
        t_nodes,
        y_nodes,
    };
    Ok(ValueSurface::from_parts(grid, rows, model.clone())?)
}

/// `t,y,v,check_v,hat_v,in_sandwich` over the envelope window.
pub fn write_envelope_csv(
    path: &Path,
    surface: &ValueSurface,
    norms: &SupNorms,
    slack: f64,
) -> Result<(), CsvError> {
    let model = surface.model();
    let grid = surface.grid();
    let window_start = model.horizon - norms.delta;
    let tol = 1e-12 * model.horizon.max(1.0);
    let mut out = String::new();
    out.push_str("t,y,v,check_v,hat_v,in_sandwich\n");
    for (k, &t) in grid.t_nodes.iter().enumerate() {
        if t < window_start - tol {
            continue;
        }
        for (i, &y) in grid.y_nodes.iter().enumerate() {
            let v = surface.values()[k][i];
            let lo = envelopes::lower_envelope(model, norms, t, y).expect("inside window");
            let hi = envelopes::upper_envelope(model, norms, t, y).expect("inside window");
            let total = 1e-8 + slack;
            let inside = (lo - v) / lo.max(1e-300) <= total && (v - hi) / hi <= total;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f(t),
                fmt_f(y),
                fmt_f(v),
                fmt_f(lo),
                fmt_f(hi),
                u8::from(inside)
            );
        }
    }
    write_file(path, &out)
}

/// `t,a` table of the separable benchmark.
pub fn write_ode_csv(path: &Path, table: &OdeTable) -> Result<(), CsvError> {
    let mut out = String::new();
    out.push_str("t,a\n");
    for (t, a) in table.t_nodes.iter().zip(&table.a_values) {
        let _ = writeln!(out, "{},{}", fmt_f(*t), fmt_f(*a));
    }
    write_file(path, &out)
}

/// `path_id,s,y,x,xi,mu,jump,cost_cum` for a set of labelled paths.
pub fn write_paths_csv(path: &Path, paths: &[(usize, &PathSample)]) -> Result<(), CsvError> {
    let mut out = String::new();
    out.push_str("path_id,s,y,x,xi,mu,jump,cost_cum\n");
    for (id, p) in paths {
        for i in 0..p.times.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                id,
                fmt_f(p.times[i]),
                fmt_f(p.y_path[i]),
                fmt_f(p.x_path[i]),
                fmt_f(p.xi_path[i]),
                fmt_f(p.mu_applied[i]),
                u8::from(p.jump_flags[i]),
                fmt_f(p.cost_cum[i]),
            );
        }
    }
    write_file(path, &out)
}

/// `label,mean,stderr,n_paths,seed`.
pub fn write_estimates_csv(path: &Path, rows: &[(String, CostEstimate)]) -> Result<(), CsvError> {
    let mut out = String::new();
    out.push_str("label,mean,stderr,n_paths,seed\n");
    for (label, est) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            label,
            fmt_f(est.mean),
            fmt_f(est.stderr),
            est.n_paths,
            est.base_seed
        );
    }
    write_file(path, &out)
}

/// `check,measured,threshold,pass,seed,runtime_ms`.
pub fn write_report_csv(path: &Path, report: &VerifyReport) -> Result<(), CsvError> {
    write_file(path, &report_csv_string(report))
}

pub fn report_csv_string(report: &VerifyReport) -> String {
    let mut out = String::new();
    out.push_str("check,measured,threshold,pass,seed,runtime_ms\n");
    for c in &report.checks {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.name,
            fmt_f(c.measured),
            fmt_f(c.threshold),
            u8::from(c.pass),
            c.seed,
            c.runtime_ms
        );
    }
    out
}
