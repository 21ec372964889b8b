//! File writers. CSV uses LF endings and 17 significant digits; JSON encodes
//! non-finite numbers as the strings `"inf"`, `"-inf"` and `"nan"`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use jointpred::bandit::{BanditSummary, RegretTrace};
use serde_json::Value;

use crate::CliError;

pub const TRACE_HEADER: &str = "replication,t,action,reward,step_regret,cum_regret";
pub const CURVE_HEADER: &str = "t,mean_cum_regret,std_error";

/// Round-trippable scientific notation, 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else {
        Value::from(fmt_float(x))
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

/// Trace rows of every replication; actions are 1-indexed.
pub fn trace_csv(traces: &[RegretTrace]) -> String {
    let rows: usize = traces.iter().map(|t| t.rows.len()).sum();
    let mut s = String::with_capacity(64 * (rows + 1));
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for tr in traces {
        for r in &tr.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                tr.replication,
                r.t,
                r.action + 1,
                r.reward,
                fmt_float(r.step_regret),
                fmt_float(r.cum_regret)
            );
        }
    }
    s
}

/// Long-format mean regret curve.
pub fn regret_curve_csv(summary: &BanditSummary) -> String {
    let mut s = String::with_capacity(48 * (summary.horizon + 1));
    s.push_str(CURVE_HEADER);
    s.push('\n');
    for (i, (m, se)) in summary.mean_cum_regret.iter().zip(&summary.std_error).enumerate() {
        let _ = writeln!(s, "{},{},{}", i + 1, fmt_float(*m), fmt_float(*se));
    }
    s
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_text(dir, name, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.0, 1.0 / 3.0, 2.5e-300, -7.123456789012345e12, f64::MIN_POSITIVE] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_float(1.0 / 6.0), "1.6666666666666666e-1");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
    }

    #[test]
    fn non_finite_json() {
        assert_eq!(num(f64::INFINITY), Value::from("inf"));
        assert_eq!(num(0.5), Value::from(0.5));
    }
}
