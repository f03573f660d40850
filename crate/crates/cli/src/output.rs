//! Text artifacts of a finished study.

use std::fmt::Write as _;

use nitsche::analysis::{least_squares_slope, ConvergenceReport};

pub const RATES_HEADER: &str = "level,h,dofs,err_l2,err_h1,slope_l2_running,slope_h1_running,newton_iters";

fn running_slope(pairs: &[(f64, f64)]) -> String {
    match least_squares_slope(pairs) {
        Some((slope, _)) if slope.is_finite() => format!("{slope:e}"),
        _ => String::new(),
    }
}

/// One row per level. Running slopes fit all levels up to and including
/// the current one and are empty on the first row.
pub fn rates_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from(RATES_HEADER);
    out.push('\n');
    for (i, l) in report.levels.iter().enumerate() {
        let upto = &report.levels[..=i];
        let l2: Vec<(f64, f64)> = upto.iter().map(|l| (l.h, l.err_l2)).collect();
        let h1: Vec<(f64, f64)> = upto.iter().map(|l| (l.h, l.err_h1)).collect();
        writeln!(
            out,
            "{},{:e},{},{:e},{:e},{},{},{}",
            l.level,
            l.h,
            l.dofs,
            l.err_l2,
            l.err_h1,
            running_slope(&l2),
            running_slope(&h1),
            l.newton_iters
        )
        .expect("writing to a String");
    }
    out
}

pub fn diagnostics_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("level,name,value\n");
    for d in &report.diagnostics {
        writeln!(out, "{},{},{:e}", d.level, d.name, d.value).expect("writing to a String");
    }
    out
}

pub fn report_text(report: &ConvergenceReport) -> String {
    let m = report.order;
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "problem: {} (d = {}, m = {m}, {})", report.problem, report.dim, report.classification);
    let _ = writeln!(w, "newton_tol: {:e}", report.newton_tol);
    let _ = writeln!(w, "linear_tol: {:e}", report.linear_tol);
    let _ = writeln!(w);
    let _ = writeln!(w, "{:>5} {:>12} {:>8} {:>14} {:>14} {:>6} {:>14}", "level", "h", "dofs", "err_l2", "err_h1", "newton", "lambda_min");
    for l in &report.levels {
        let _ = writeln!(
            w,
            "{:>5} {:>12.6e} {:>8} {:>14.6e} {:>14.6e} {:>6} {:>14.6e}",
            l.level, l.h, l.dofs, l.err_l2, l.err_h1, l.newton_iters, l.lambda_min
        );
    }
    let _ = writeln!(w);
    let _ = writeln!(
        w,
        "slope_l2 = {:.4} (expected {}, r^2 {:.6})",
        report.rate_l2.slope,
        m + 1,
        report.rate_l2.r_squared
    );
    let _ = writeln!(w, "slope_h1 = {:.4} (expected {m}, r^2 {:.6})", report.rate_h1.slope, report.rate_h1.r_squared);
    let _ = writeln!(w);
    for c in &report.checks {
        let _ = writeln!(w, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let _ = writeln!(w);
    let _ = writeln!(w, "overall: {}", if report.passed() { "PASS" } else { "FAIL" });
    out
}
