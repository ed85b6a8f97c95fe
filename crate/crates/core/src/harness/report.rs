use std::fmt::Write as _;

use serde::Serialize;

/// How a row's value is judged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Check {
    /// Recorded only; never fails.
    Report,
    Rel { target: f64, tol: f64 },
    Abs { target: f64, tol: f64 },
    AtMost(f64),
    AtLeast(f64),
    Within(f64, f64),
    /// The computation did not produce a value.
    Failed,
}

impl Check {
    pub fn holds(&self, v: f64) -> Option<bool> {
        match *self {
            Check::Report => None,
            Check::Failed => Some(false),
            _ if !v.is_finite() => Some(false),
            Check::Rel { target, tol } => Some((v - target).abs() <= tol * target.abs()),
            Check::Abs { target, tol } => Some((v - target).abs() <= tol),
            Check::AtMost(b) => Some(v <= b),
            Check::AtLeast(b) => Some(v >= b),
            Check::Within(lo, hi) => Some(v >= lo && v <= hi),
        }
    }

    /// `(target, tol)` columns.
    fn columns(&self) -> (String, String) {
        match *self {
            Check::Report | Check::Failed => ("-".into(), "-".into()),
            Check::Rel { target, tol } => (fmt_float(target), format!("rel:{}", fmt_float(tol))),
            Check::Abs { target, tol } => (fmt_float(target), format!("abs:{}", fmt_float(tol))),
            Check::AtMost(b) => (format!("<={}", fmt_float(b)), "-".into()),
            Check::AtLeast(b) => (format!(">={}", fmt_float(b)), "-".into()),
            Check::Within(lo, hi) => (format!("[{};{}]", fmt_float(lo), fmt_float(hi)), "-".into()),
        }
    }
}

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    ClosedForm,
    ManufacturedSolution,
    SolverConsistency,
    Report,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub params: String,
    pub metric: String,
    pub value: f64,
    pub check: Check,
    /// The statement the metric measures.
    pub anchor: &'static str,
    pub basis: Basis,
}

impl ReportRow {
    pub fn pass(&self) -> Option<bool> {
        self.check.holds(self.value)
    }

    pub fn failure(experiment: &str, params: &str, metric: &str, diagnostic: &str) -> Self {
        ReportRow {
            experiment: experiment.into(),
            params: params.into(),
            metric: format!("{metric}:error:{}", sanitize(diagnostic)),
            value: f64::NAN,
            check: Check::Failed,
            anchor: "the computation completes",
            basis: Basis::Report,
        }
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c == ',' || c == '\n' || c == '\r' { ';' } else { c }).collect()
}

/// Twelve significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.11e}")
    }
}

pub const CSV_HEADER: &str = "experiment,params,metric,value,target,tol,pass";

pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let (target, tol) = r.check.columns();
        let pass = match r.pass() {
            Some(true) => "true",
            Some(false) => "false",
            None => "-",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            sanitize(&r.experiment),
            sanitize(&r.params),
            sanitize(&r.metric),
            fmt_float(r.value),
            target,
            tol,
            pass
        );
    }
    out
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    name: &'a str,
    anchor: &'a str,
    basis: Basis,
    target: String,
    tol: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    params: &'a str,
    metric: Vec<ManifestEntry<'a>>,
}

/// TOML mapping each metric to its anchor statement and the basis of its
/// target.
pub fn manifest(experiment: &str, params: &str, rows: &[ReportRow]) -> String {
    let metric = rows
        .iter()
        .map(|r| {
            let (target, tol) = r.check.columns();
            ManifestEntry { name: &r.metric, anchor: r.anchor, basis: r.basis, target, tol }
        })
        .collect();
    toml::to_string(&Manifest { experiment, params, metric }).unwrap_or_default()
}

/// Summary of a CSV written by [`to_csv`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CsvSummary {
    pub rows: usize,
    pub asserted: usize,
    pub failed: Vec<String>,
}

pub fn summarize_csv(text: &str) -> Option<CsvSummary> {
    let mut lines = text.lines();
    if lines.next()? != CSV_HEADER {
        return None;
    }
    let mut s = CsvSummary::default();
    for line in lines.filter(|l| !l.is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return None;
        }
        s.rows += 1;
        match cols[6] {
            "true" => s.asserted += 1,
            "false" => {
                s.asserted += 1;
                s.failed.push(format!("{} {} {}", cols[0], cols[1], cols[2]));
            }
            _ => {}
        }
    }
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: f64, check: Check) -> ReportRow {
        ReportRow {
            experiment: "exp1d".into(),
            params: "alpha=2;beta=0".into(),
            metric: "gamma_fit".into(),
            value,
            check,
            anchor: "a",
            basis: Basis::ClosedForm,
        }
    }

    #[test]
    fn checks() {
        assert_eq!(Check::Rel { target: 3.0, tol: 0.02 }.holds(3.05), Some(true));
        assert_eq!(Check::Rel { target: 3.0, tol: 0.02 }.holds(3.1), Some(false));
        assert_eq!(Check::AtMost(1.0).holds(f64::NAN), Some(false));
        assert_eq!(Check::Within(1.7, 2.3).holds(2.0), Some(true));
        assert_eq!(Check::Report.holds(f64::NAN), None);
    }

    #[test]
    fn csv_twelve_digits_and_summary() {
        let rows = vec![row(3.0001234567891, Check::Rel { target: 3.0, tol: 0.02 }), row(7.0, Check::AtMost(1.0))];
        let csv = to_csv(&rows);
        assert!(csv.contains("3.00012345679e0"), "{csv}");
        let s = summarize_csv(&csv).unwrap();
        assert_eq!((s.rows, s.asserted, s.failed.len()), (2, 2, 1));
        let m = manifest("exp1d", "alpha=2;beta=0", &rows);
        assert!(m.contains("closed-form") && m.contains("gamma_fit"), "{m}");
    }

    #[test]
    fn failure_rows_fail() {
        let r = ReportRow::failure("flat2d", "p", "lp", "cap exceeded, 2090 atoms");
        assert_eq!(r.pass(), Some(false));
        assert!(to_csv(&[r]).lines().nth(1).unwrap().split(',').count() == 7);
    }
}
