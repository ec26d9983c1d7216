use super::result::{ExperimentResult, Series, SeriesPoint, Verdict};
use crate::chains::{asep_rightmost_cdf, asep_stationary, ASEP_ENUM_CAP};
use crate::error::{Error, Result};
use crate::perm::epsilon_for_q;

/// `min(ε, 1)` for the bias `q`.
pub fn asep_epsilon_prime(q: f64) -> f64 {
    epsilon_for_q(q).min(1.0)
}

/// Smallest `r` at which the rightmost-particle bound applies,
/// `⌈(4/ε′) ln(2/ε′)⌉`.
pub fn asep_tail_threshold(q: f64) -> usize {
    let e = asep_epsilon_prime(q);
    ((4.0 / e) * (2.0 / e).ln()).ceil().max(0.0) as usize
}

/// Stationary tail of the rightmost particle, `ν(rightmost >= k + r)`, for
/// each `r`, against `e^{−ε′r/4}`. With `exact` the tail is also summed over
/// the enumerated stationary table.
pub fn asep_tail_check(n: usize, k: usize, q: f64, rs: &[usize], exact: bool) -> Result<ExperimentResult> {
    if !(0.5 < q && q <= 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must lie in (1/2, 1]")));
    }
    let cdf = asep_rightmost_cdf(n, k, q)?;
    let tail = |r: usize| -> f64 {
        match k + r {
            0 => 1.0,
            m if m > n => 0.0,
            m => (1.0 - cdf[m - 1]).max(0.0),
        }
    };
    let table = if exact { Some(asep_stationary(n, k, q, ASEP_ENUM_CAP)?) } else { None };
    let eps1 = asep_epsilon_prime(q);
    let threshold = asep_tail_threshold(q);

    let mut res = ExperimentResult::new("asep-tail", format!("asep-n{n}-k{k}-q{q}"));
    res.param("n", n)
        .param("k", k)
        .param("q", q)
        .param("epsilon_prime", eps1)
        .param("bound_threshold_r", threshold)
        .param("exact", exact);
    let mut s = Series::new("rightmost-tail", "r");
    let mut b = Series::new("tail-bound", "r");
    let mut bad = Vec::new();
    let mut mismatch = 0.0f64;
    for &r in rs {
        let v = tail(r);
        s.points.push(SeriesPoint::exact(r as f64, v));
        let bound = (-eps1 * r as f64 / 4.0).exp();
        b.points.push(SeriesPoint::exact(r as f64, bound));
        if r >= threshold && v > bound * (1.0 + 1e-12) {
            bad.push(format!("r={r}: {v:.6e} > {bound:.6e}"));
        }
        if let Some(t) = &table {
            let e = t.mass(|y| y.rightmost() >= k + r);
            mismatch = mismatch.max((e - v).abs());
        }
    }
    res.series.push(s);
    res.series.push(b);
    let checked = rs.iter().filter(|&&r| r >= threshold).count();
    res.verdicts.push(Verdict::new(
        "asep-rightmost-tail",
        "ν(rightmost >= k + r) <= exp(−ε′r/4) for r >= (4/ε′) ln(2/ε′)",
        bad.is_empty(),
        if bad.is_empty() { format!("{checked} values of r in range") } else { bad.join("; ") },
    ));
    if table.is_some() {
        res.verdicts.push(Verdict::new(
            "sequential-matches-enumeration",
            "|sequential − enumerated| <= 1e-10",
            mismatch <= 1e-10,
            format!("max difference {mismatch:.3e}"),
        ));
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_particle_on_three_sites() {
        let r = asep_tail_check(3, 1, 0.75, &[0, 1, 2, 3], true).unwrap();
        let t = &r.series[0].points;
        assert!((t[0].estimate - 1.0).abs() < 1e-12);
        assert!((t[1].estimate - 4.0 / 13.0).abs() < 1e-12);
        assert!((t[2].estimate - 1.0 / 13.0).abs() < 1e-12);
        assert_eq!(t[3].estimate, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn threshold_value() {
        // ε = 2 → ε′ = 1, (4/1) ln 2 = 2.77
        assert_eq!(asep_tail_threshold(0.75), 3);
    }
}
