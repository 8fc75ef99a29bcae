//! Report rows and their CSV / JSON / plot-data serializations.
//!
//! The CSV column order is fixed:
//! `theta_deg,p_hat,n_p,q_th,q_exp,f_th,f_exp,n_f,mean_quoins_per_f`.
//! The JSON mirror carries the additional per-step breakdown and diagnostic
//! fields. All formatting is deterministic, so identical runs are
//! byte-identical.

use serde::Serialize;
use std::fmt::Write as _;

/// Per-angle statistics of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub theta_deg: f64,
    /// Z-basis bias estimate.
    pub p_hat: f64,
    /// Quoins prepared for the p/q estimates.
    pub n_p: u64,
    pub q_th: f64,
    pub q_exp: f64,
    pub f_th: f64,
    pub f_exp: f64,
    /// f(p)-coins obtained.
    pub n_f: u64,
    pub mean_quoins_per_f: f64,
    // diagnostics (JSON only)
    pub p_std_err: f64,
    pub q_std_err: f64,
    pub f_std_err: f64,
    pub mean_z_quoins_per_f: f64,
    pub mean_x_quoins_per_f: f64,
    pub purify_rejections: u64,
    pub cutoffs: u64,
}

pub const RUN_CSV_HEADER: &str =
    "theta_deg,p_hat,n_p,q_th,q_exp,f_th,f_exp,n_f,mean_quoins_per_f";

fn push_f64(out: &mut String, value: f64) {
    // Fixed six decimals: deterministic and diff-friendly.
    let _ = write!(out, "{value:.6}");
}

pub fn run_reports_to_csv(rows: &[RunReport]) -> String {
    let mut out = String::from(RUN_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{}", r.theta_deg);
        out.push(',');
        push_f64(&mut out, r.p_hat);
        let _ = write!(out, ",{}", r.n_p);
        out.push(',');
        push_f64(&mut out, r.q_th);
        out.push(',');
        push_f64(&mut out, r.q_exp);
        out.push(',');
        push_f64(&mut out, r.f_th);
        out.push(',');
        push_f64(&mut out, r.f_exp);
        let _ = write!(out, ",{}", r.n_f);
        let _ = write!(out, ",{:.4}", r.mean_quoins_per_f);
        out.push('\n');
    }
    out
}

/// Plot-ready two-column text, one `x y` pair per line.
pub fn curve_to_text(points: &[(f64, f64)]) -> String {
    let mut out = String::new();
    for (x, y) in points {
        let mut line = String::new();
        push_f64(&mut line, *x);
        line.push(' ');
        push_f64(&mut line, *y);
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Per-bias statistics of the classical constructions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalRow {
    pub p: f64,
    pub n_outputs: u64,
    pub ft_target: f64,
    pub ft_hat: f64,
    pub ft_std_err: f64,
    pub ft_mean_coins: f64,
    pub ft_q50: u64,
    pub ft_q90: u64,
    pub ft_q99: u64,
    pub ft_cutoffs: u64,
    pub qt_target: f64,
    pub qt_hat: f64,
    pub qt_std_err: f64,
    pub qt_mean_coins: f64,
    pub qt_q50: u64,
    pub qt_q90: u64,
    pub qt_q99: u64,
    pub qt_cutoffs: u64,
}

pub const CLASSICAL_CSV_HEADER: &str = "p,n_outputs,\
ft_target,ft_hat,ft_std_err,ft_mean_coins,ft_q50,ft_q90,ft_q99,ft_cutoffs,\
qt_target,qt_hat,qt_std_err,qt_mean_coins,qt_q50,qt_q90,qt_q99,qt_cutoffs";

pub fn classical_rows_to_csv(rows: &[ClassicalRow]) -> String {
    let mut out = String::from(CLASSICAL_CSV_HEADER);
    out.push('\n');
    for r in rows {
        push_f64(&mut out, r.p);
        let _ = write!(out, ",{}", r.n_outputs);
        for (target, hat, se, mean, q50, q90, q99, cutoffs) in [
            (
                r.ft_target,
                r.ft_hat,
                r.ft_std_err,
                r.ft_mean_coins,
                r.ft_q50,
                r.ft_q90,
                r.ft_q99,
                r.ft_cutoffs,
            ),
            (
                r.qt_target,
                r.qt_hat,
                r.qt_std_err,
                r.qt_mean_coins,
                r.qt_q50,
                r.qt_q90,
                r.qt_q99,
                r.qt_cutoffs,
            ),
        ] {
            out.push(',');
            push_f64(&mut out, target);
            out.push(',');
            push_f64(&mut out, hat);
            out.push(',');
            push_f64(&mut out, se);
            let _ = write!(out, ",{mean:.2},{q50},{q90},{q99},{cutoffs}");
        }
        out.push('\n');
    }
    out
}

/// One evaluation of the consumption tail bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub eps1p: f64,
    pub n: u64,
    pub bound: f64,
}

/// Bound table plus the minimum-budget summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub rows: Vec<BoundRow>,
    pub eps1p: f64,
    pub approx_n: f64,
    pub exact_min_n: u64,
    /// Classical f_t cost: two base coins per doubled coin.
    pub two_n_cost: f64,
}

pub const BOUNDS_CSV_HEADER: &str = "eps1p,n,bound";

pub fn bounds_to_csv(report: &BoundsReport) -> String {
    let mut out = String::from(BOUNDS_CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let mut line = String::new();
        push_f64(&mut line, r.eps1p);
        let _ = write!(line, ",{},{:.6e}", r.n, r.bound);
        out.push_str(&line);
        out.push('\n');
    }
    let _ = write!(
        out,
        "# approx_n = {:.1}, exact_min_n = {}, two_n_cost = {:.1}\n",
        report.approx_n, report.exact_min_n, report.two_n_cost
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row() -> RunReport {
        RunReport {
            theta_deg: 90.0,
            p_hat: 0.526503,
            n_p: 1_000_000,
            q_th: 0.998591,
            q_exp: 0.991055,
            f_th: 0.997189,
            f_exp: 0.965521,
            n_f: 100_000,
            mean_quoins_per_f: 17.7812,
            p_std_err: 0.000706,
            q_std_err: 0.000133,
            f_std_err: 0.000581,
            mean_z_quoins_per_f: 12.0,
            mean_x_quoins_per_f: 5.78,
            purify_rejections: 9000,
            cutoffs: 0,
        }
    }

    #[test]
    fn csv_has_fixed_header_and_one_row_per_report() {
        let csv = run_reports_to_csv(&[sample_row()]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), RUN_CSV_HEADER);
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), 9);
        assert!(row.starts_with("90,0.526503,1000000,"));
        assert!(lines.next().is_none());
    }

    #[test]
    fn csv_is_deterministic() {
        let a = run_reports_to_csv(&[sample_row()]);
        let b = run_reports_to_csv(&[sample_row()]);
        assert_eq!(a, b);
    }

    #[test]
    fn curve_text_is_two_column() {
        let text = curve_to_text(&[(0.5, 1.0), (0.25, 0.75)]);
        for line in text.lines() {
            assert_eq!(line.split(' ').count(), 2);
        }
    }

    #[test]
    fn json_mirror_contains_breakdown_fields() {
        let json = serde_json::to_string(&sample_row()).unwrap();
        assert!(json.contains("\"mean_z_quoins_per_f\""));
        assert!(json.contains("\"purify_rejections\""));
    }
}
