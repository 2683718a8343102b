//! Per-iteration records, CSV output and epoch accounting.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Component-oracle query counter. One epoch is `n` queries of either kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochLedger {
    n: usize,
    gradient_queries: u64,
    hessian_queries: u64,
    hvps: u64,
}

impl EpochLedger {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "ledger needs n >= 1");
        Self {
            n,
            gradient_queries: 0,
            hessian_queries: 0,
            hvps: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gradient_queries(&self) -> u64 {
        self.gradient_queries
    }

    pub fn hessian_queries(&self) -> u64 {
        self.hessian_queries
    }

    /// Operator applications inside the subproblem solver. Tracked for
    /// diagnostics only; they do not count toward epochs.
    pub fn hvps(&self) -> u64 {
        self.hvps
    }

    pub fn charge_full_gradient(&mut self) {
        self.gradient_queries += self.n as u64;
    }

    pub fn charge_gradients(&mut self, count: usize) {
        self.gradient_queries += count as u64;
    }

    pub fn charge_hessian(&mut self, sample_size: usize) {
        self.hessian_queries += sample_size as u64;
    }

    pub fn record_hvps(&mut self, count: usize) {
        self.hvps += count as u64;
    }

    pub fn epochs(&self) -> f64 {
        (self.gradient_queries + self.hessian_queries) as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Sarc,
    Phase1,
    Phase2,
    FirstOrder,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Sarc => "sarc",
            Phase::Phase1 => "phase1",
            Phase::Phase2 => "phase2",
            Phase::FirstOrder => "first_order",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sarc" => Ok(Phase::Sarc),
            "phase1" => Ok(Phase::Phase1),
            "phase2" => Ok(Phase::Phase2),
            "first_order" => Ok(Phase::FirstOrder),
            other => Err(Error::InvalidConfig(format!("unknown phase `{other}`"))),
        }
    }
}

/// One CSV row. Row 0 describes the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub epochs: f64,
    pub f: f64,
    pub grad_norm: f64,
    pub sigma: f64,
    pub eps_i: f64,
    pub sample_size: usize,
    pub success: bool,
    pub phase: Phase,
}

/// Diagnostics kept next to each record but not written to CSV
/// (wall time would break byte-identical output).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationDetail {
    pub wall_time_secs: f64,
    pub krylov_dim: usize,
    pub hvps: usize,
    /// θ (SARC, Phase I) or ρ (Phase II).
    pub ratio: f64,
    /// Successful Phase II iteration count `l` after this iteration.
    pub l: usize,
    pub varsigma: f64,
    pub t3: usize,
    /// `ψ_l(z_l)` and its lower target after the ς-loop on a success.
    pub psi_at_min: Option<f64>,
    pub psi_target: Option<f64>,
    /// `‖∇ψ_l(z_l)‖ / ‖∇ℓ_l‖`.
    pub psi_stationarity: Option<f64>,
    /// Probes violating `ψ(z) − ψ(z_l) ≥ (ς/12)‖z − z_l‖³`.
    pub psi_growth_violations: usize,
    pub psd_violation: bool,
    pub noise_guard: bool,
    pub subproblem_unsatisfied: bool,
    pub varsigma_cap_hit: bool,
    /// Scheme actually used for the Hessian of this iteration.
    pub scheme: Option<crate::sampling::SamplingScheme>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub details: Vec<IterationDetail>,
}

pub const CSV_HEADER: &str = "iter,epochs,f,grad_norm,sigma,eps_i,sample_size,success,phase";

impl Trace {
    pub fn push(&mut self, record: TraceRecord, detail: IterationDetail) {
        self.records.push(record);
        self.details.push(detail);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_records(&self.records, out)
    }
}

pub fn write_records<W: Write>(records: &[TraceRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::InvalidConfig(format!("unexpected trace header `{header}`")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(iter: usize, f: f64) -> TraceRecord {
        TraceRecord {
            iter,
            epochs: iter as f64 * 0.3,
            f,
            grad_norm: 1e-3 / (iter as f64 + 1.0),
            sigma: 0.1,
            eps_i: 1.0 / 3.0,
            sample_size: 17,
            success: iter % 2 == 0,
            phase: Phase::Phase2,
        }
    }

    #[test]
    fn ledger_arithmetic() {
        let mut l = EpochLedger::new(1000);
        l.charge_full_gradient();
        l.charge_hessian(250);
        l.charge_gradients(50);
        l.record_hvps(99);
        assert_eq!(l.epochs(), 1.3);
        assert_eq!(l.hvps(), 99);
    }

    #[test]
    fn header_and_round_trip() {
        let recs: Vec<_> = (0..5).map(|i| record(i, 0.1 * i as f64 + 1e-17)).collect();
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(read_records(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn empty_trace_still_has_header() {
        let mut buf = Vec::new();
        write_records(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), CSV_HEADER);
    }

    #[test]
    fn phase_names_round_trip() {
        for p in [Phase::Sarc, Phase::Phase1, Phase::Phase2, Phase::FirstOrder] {
            assert_eq!(p.name().parse::<Phase>().unwrap(), p);
        }
    }
}
