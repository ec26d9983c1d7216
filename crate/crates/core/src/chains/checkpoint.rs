//! Line-delimited JSON trajectory checkpoints and coupling audit records.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::asep::eta_projection;
use crate::error::Result;
use crate::Permutation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub step: u64,
    pub perm: Vec<usize>,
    pub max_displacement: usize,
    /// `(k, η_k(σ))` for each tracked `k`, as 0/1 strings.
    pub projections: Vec<(usize, String)>,
}

impl CheckpointRecord {
    pub fn capture(step: u64, sigma: &Permutation, ks: &[usize]) -> Self {
        Self {
            step,
            perm: sigma.one_line().to_vec(),
            max_displacement: sigma.max_displacement(),
            projections: ks.iter().map(|&k| (k, eta_projection(sigma, k).to_string())).collect(),
        }
    }
}

/// A broken coupling invariant with the draw that broke it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub step: u64,
    pub edge: usize,
    pub u: f64,
    pub states: Vec<String>,
    pub message: String,
}

pub fn write_record<W: Write, T: Serialize>(out: &mut W, rec: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, rec)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_records<R: BufRead, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
