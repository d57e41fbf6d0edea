//! Human-readable and CSV renderings.

use std::fmt::Write as _;

use copula_bounds::{BoundReport, DiscreteCopula, SweepEntry};

use crate::Check;

/// `x` with six significant digits, `%g` style.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding may carry into the next decade
    let sci = format!("{x:.5e}");
    let (mantissa, e) = sci.split_once('e').expect("exponent present");
    let exp_rounded: i32 = e.parse().expect("integer exponent");
    let exp = exp.max(exp_rounded);
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn interval(lo: f64, hi: f64) -> String {
    format!("[{}, {}] (gap {})", sig6(lo), sig6(hi), sig6(hi - lo))
}

pub fn report_human(r: &BoundReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "d={} n={} sense={}: {}",
        r.d,
        r.n,
        r.sense.short(),
        interval(r.lower_value, r.upper_value)
    );
    if let (Some(lo), Some(hi)) = (r.rho_lower, r.rho_upper) {
        let _ = writeln!(out, "spearman rho: {}", interval(lo, hi));
    }
    if let Some(l) = r.l_d {
        let lower_ok = r.rho_lower.is_some_and(|lo| lo > l);
        let _ = writeln!(
            out,
            "l_d = {}; rho_lower > l_d: {}",
            sig6(l),
            if lower_ok { "yes" } else { "no" }
        );
    }
    let _ = writeln!(out, "support size {}, {:.3} s", r.support_size, r.wall_time);
    out
}

pub fn sweep_human(entries: &[SweepEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        match &e.result {
            Ok(r) => {
                let _ = write!(
                    out,
                    "n={:<5} {}",
                    e.n,
                    interval(r.lower_value, r.upper_value)
                );
                if let (Some(lo), Some(hi)) = (r.rho_lower, r.rho_upper) {
                    let _ = write!(out, "  rho {}", interval(lo, hi));
                }
                out.push('\n');
            }
            Err(err) => {
                let _ = writeln!(out, "n={:<5} error: {err}", e.n);
            }
        }
    }
    out
}

pub fn support_csv(c: &DiscreteCopula) -> String {
    let d = c.spec().d();
    let mut out = String::new();
    for k in 1..=d {
        let _ = write!(out, "i{k},");
    }
    out.push_str("mass\n");
    for entry in c.support() {
        for i in &entry.index.0 {
            let _ = write!(out, "{i},");
        }
        let _ = writeln!(out, "{:?}", entry.mass);
    }
    out
}

pub fn copula_human(c: &DiscreteCopula, value: f64) -> String {
    let spec = c.spec();
    let mut out = format!(
        "grid copula d={} n={}: {} support cells, optimal value {}\n",
        spec.d(),
        spec.n(),
        c.support_len(),
        sig6(value)
    );
    for entry in c.support() {
        let idx: Vec<String> = entry.index.0.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "  ({}) {}", idx.join(","), sig6(entry.mass));
    }
    out
}

pub fn checks_csv(checks: &[Check]) -> String {
    let mut out = String::from("side,check,passed\n");
    for c in checks {
        let side = serde_json::to_value(c.side).expect("serializable");
        let _ = writeln!(
            out,
            "{},{},{}",
            side.as_str().unwrap_or_default(),
            c.name,
            c.passed
        );
    }
    out
}

pub fn checks_human(r: &BoundReport, checks: &[Check], passed: bool) -> String {
    let mut out = report_human(r);
    for c in checks {
        let side = serde_json::to_value(c.side).expect("serializable");
        let _ = writeln!(
            out,
            "{} {} {}",
            if c.passed { "PASS" } else { "FAIL" },
            side.as_str().unwrap_or_default(),
            c.name
        );
    }
    let _ = writeln!(
        out,
        "{}",
        if passed {
            "all checks passed"
        } else {
            "verification FAILED"
        }
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(7.0), "7");
        assert_eq!(sig6(-0.62475), "-0.62475");
        assert_eq!(sig6(1.0 / 6.0), "0.166667");
        assert_eq!(sig6(-2.0 / 3.0), "-0.666667");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(999999.7), "1e6");
        assert_eq!(sig6(0.0000123456789), "1.23457e-5");
        assert_eq!(sig6(0.02), "0.02");
        assert_eq!(sig6(0.99999999), "1");
    }
}
