use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{BiasMatrix, LocalizationVector};

/// Version of the serialized result layout.
pub const RESULT_SCHEMA: u32 = 1;

/// One point of a measured series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub x: f64,
    pub estimate: f64,
    /// Standard error; 0 for exact values.
    pub stderr: f64,
    /// Number of replicas behind the estimate; 0 for exact values.
    pub replicas: usize,
}

impl SeriesPoint {
    pub fn exact(x: f64, estimate: f64) -> Self {
        Self {
            x,
            estimate,
            stderr: 0.0,
            replicas: 0,
        }
    }
}

/// A named series, e.g. `tv` against `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub points: Vec<SeriesPoint>,
}

impl Series {
    pub fn new(name: impl Into<String>, x_label: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            x_label: x_label.into(),
            points: Vec::new(),
        }
    }
}

/// Pass/fail outcome against a stated bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    /// The bound tested, in words.
    pub bound: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, bound: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            bound: bound.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Everything an experiment reports. Contains no timestamps, so reruns with
/// the same seeds serialize identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema: u32,
    pub experiment: String,
    /// SHA-256 of the instance (bias matrix and localization).
    pub fingerprint: String,
    pub parameters: BTreeMap<String, Value>,
    pub series: Vec<Series>,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
}

impl ExperimentResult {
    pub fn new(experiment: impl Into<String>, fingerprint: impl Into<String>) -> Self {
        Self {
            schema: RESULT_SCHEMA,
            experiment: experiment.into(),
            fingerprint: fingerprint.into(),
            parameters: BTreeMap::new(),
            series: Vec::new(),
            verdicts: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.parameters.insert(key.to_string(), v);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn failures(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| !v.passed).collect()
    }

    pub fn series_named(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    /// Folds another result's series, verdicts and notes into this one.
    pub fn absorb(&mut self, other: ExperimentResult) {
        self.series.extend(other.series);
        self.verdicts.extend(other.verdicts);
        self.notes.extend(other.notes);
    }

    /// CSV with columns `series,x,estimate,stderr,replicas`.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("series,x,estimate,stderr,replicas\n");
        for s in &self.series {
            for p in &s.points {
                out.push_str(&format!("{},{},{},{},{}\n", s.name, p.x, p.estimate, p.stderr, p.replicas));
            }
        }
        out
    }
}

/// Hex SHA-256 of `n`, the bias entries and the localization windows.
pub fn fingerprint(p: &BiasMatrix, ell: Option<&LocalizationVector>) -> String {
    let mut h = Sha256::new();
    h.update((p.n() as u64).to_le_bytes());
    for v in p.upper() {
        h.update(v.to_le_bytes());
    }
    match ell {
        None => h.update(b"unrestricted"),
        Some(ell) => {
            for k in 1..=ell.n() {
                h.update((ell.lo(k) as u64).to_le_bytes());
                h.update((ell.hi(k) as u64).to_le_bytes());
            }
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Empirical proportion and its binomial standard error.
pub fn proportion(hits: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = hits as f64 / total as f64;
    (p, (p * (1.0 - p) / total as f64).sqrt())
}

/// Empirical quantile (type 7, linear interpolation).
pub fn quantile(xs: &[f64], level: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * level.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Least-squares line `y = a + b x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        intercept: my - slope * mx,
        slope,
        r_squared,
    })
}

/// Fit of `log y` against `log x`.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_and_stats() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let g = log_log_fit(&[10.0, 20.0, 40.0], &[100.0, 400.0, 1600.0]).unwrap();
        assert!((g.slope - 2.0).abs() < 1e-12);
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.25), 1.25);
        let (m, se) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fingerprint_tracks_instance() {
        let p = BiasMatrix::constant(4, 0.6).unwrap();
        let ell = LocalizationVector::constant(4, 1);
        let a = fingerprint(&p, None);
        assert_eq!(a.len(), 64);
        assert_ne!(a, fingerprint(&p, Some(&ell)));
        assert_ne!(a, fingerprint(&BiasMatrix::constant(4, 0.61).unwrap(), None));
    }
}
