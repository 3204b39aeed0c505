//! CSV serialization for trajectories, convergence reports and kick tables.
//!
//! Separator `,`, decimal `.`, LF line endings, floats with 17 significant
//! digits.

use std::io::{self, Write};

use crate::analysis::{ConvergenceReport, ErrorSeries, LogLogFit};
use crate::integrate::CoupledRun;
use crate::kickmap::KickLimitRow;

/// 17 significant digits; enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn numbered(prefix: &str, d: usize, suffix: &str) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}{suffix}")).collect()
}

/// Header of the trajectory CSV for state dimension `d`.
pub fn trajectory_header(d: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for p in ["x", "X", "Z", "A", "Y"] {
        cols.extend(numbered(p, d, ""));
    }
    cols.push("event".into());
    cols.join(",")
}

/// Writes `t, x, X, Z, A = x + εZ, Y = (X - x)/ε, event` rows. Impulse nodes
/// produce a `pre` row (left limits) followed by a `post` row; all other nodes
/// are `flow`. `Y` is left empty when `ε = 0`.
pub fn write_trajectory_csv<W: Write>(mut w: W, run: &CoupledRun) -> io::Result<()> {
    let det = &run.deterministic;
    let grid = det.grid();
    let d = det.dim();
    let eps = run.epsilon;
    writeln!(w, "{}", trajectory_header(d))?;

    let row = |w: &mut W, t: f64, x: &[f64], xe: &[f64], z: &[f64], event: &str| {
        let mut line = fmt_f64(t);
        let mut push = |v: Option<f64>| {
            line.push(',');
            if let Some(v) = v {
                line.push_str(&fmt_f64(v));
            }
        };
        x.iter().for_each(|&v| push(Some(v)));
        xe.iter().for_each(|&v| push(Some(v)));
        z.iter().for_each(|&v| push(Some(v)));
        (0..d).for_each(|i| push(Some(x[i] + eps * z[i])));
        (0..d).for_each(|i| push((eps != 0.0).then(|| (xe[i] - x[i]) / eps)));
        line.push(',');
        line.push_str(event);
        writeln!(w, "{line}")
    };

    let mut events = 0;
    for n in 0..grid.n_nodes() {
        let t = grid.time(n);
        let pre = det.pre_reset().get(events).filter(|e| e.index == n);
        if pre.is_some() {
            let i = events;
            events += 1;
            row(
                &mut w,
                t,
                &det.pre_reset()[i].left,
                &run.noisy.pre_reset()[i].left,
                &run.fluctuation.pre_reset()[i].left,
                "pre",
            )?;
            row(&mut w, t, det.value(n), run.noisy.value(n), run.fluctuation.value(n), "post")?;
        } else {
            row(&mut w, t, det.value(n), run.noisy.value(n), run.fluctuation.value(n), "flow")?;
        }
    }
    Ok(())
}

/// Header of the report CSV: means, then standard errors, for each
/// functional; coordinates first, then the Euclidean norm.
pub fn report_header(d: usize) -> String {
    let mut cols = vec!["i".to_string(), "eps".to_string()];
    for tag in ["_lln", "_clt"] {
        cols.extend(numbered("e", d, tag));
        cols.push(format!("norm{tag}"));
    }
    for tag in ["_lln", "_clt"] {
        cols.extend(numbered("se", d, tag));
        cols.push(format!("senorm{tag}"));
    }
    cols.join(",")
}

/// Footer label for the log2–log2 slope row.
pub const SLOPE_ROW: &str = "slope_log2";
/// Footer label for the coefficient-of-determination row.
pub const R2_ROW: &str = "r2_log2";

pub fn write_report_csv<W: Write>(mut w: W, report: &ConvergenceReport) -> io::Result<()> {
    let d = report.dim;
    let width = d + 1;
    writeln!(w, "{}", report_header(d))?;

    let cells = |series: &Option<ErrorSeries>, f: &dyn Fn(&ErrorSeries) -> Vec<Option<f64>>| {
        match series {
            Some(s) => f(s),
            None => vec![None; width],
        }
    };
    let join = |fields: Vec<Option<f64>>| {
        fields
            .into_iter()
            .map(|v| v.map(fmt_f64).unwrap_or_default())
            .collect::<Vec<_>>()
            .join(",")
    };

    for (row, (&i, &eps)) in report.eps_exponents.iter().zip(&report.eps).enumerate() {
        let mean = |s: &ErrorSeries| s.mean[row].iter().map(|&v| Some(v)).collect();
        let se = |s: &ErrorSeries| s.std_err[row].iter().map(|&v| Some(v)).collect();
        let mut fields = cells(&report.lln, &mean);
        fields.extend(cells(&report.clt, &mean));
        fields.extend(cells(&report.lln, &se));
        fields.extend(cells(&report.clt, &se));
        writeln!(w, "{i},{},{}", fmt_f64(eps), join(fields))?;
    }

    let slope: fn(&LogLogFit) -> f64 = |f| f.slope;
    let r2: fn(&LogLogFit) -> f64 = |f| f.r_squared;
    for (label, pick) in [(SLOPE_ROW, slope), (R2_ROW, r2)] {
        let fit = |s: &ErrorSeries| s.fits.iter().map(|f| f.as_ref().map(pick)).collect();
        let mut fields = cells(&report.lln, &fit);
        fields.extend(cells(&report.clt, &fit));
        fields.extend(vec![None; 2 * width]);
        writeln!(w, "{label},,{}", join(fields))?;
    }
    Ok(())
}

pub fn write_kick_table<W: Write>(mut w: W, rows: &[KickLimitRow]) -> io::Result<()> {
    writeln!(w, "delta,substeps,error")?;
    for r in rows {
        writeln!(w, "{},{},{}", fmt_f64(r.delta), r.substeps, fmt_f64(r.error))?;
    }
    Ok(())
}
