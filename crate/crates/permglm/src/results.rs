//! Serialisation of finished test runs: a JSON summary per run and CSV
//! exports of the envelopes. Numeric text is written in shortest
//! round-trip form, so a load of anything saved here reproduces the exact
//! values.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::fmt_f64;
use crate::envelope::GlobalEnvelope;
use crate::error::{Error, Result};
use crate::permutation::Scheme;
use crate::pipeline::{RunOutput, RunSettings};
use crate::rank::MeasureKind;

/// One method's slice of a run, self-contained enough to be read without
/// the surrounding document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: MeasureKind,
    pub p_value: f64,
    pub alpha: f64,
    /// Measure value separating envelope hull from rejected tail; absent
    /// when the run skipped envelopes.
    pub critical_measure: Option<f64>,
    pub n_permutations: usize,
    pub seed: u64,
    /// Locations where the observed statistic escapes the envelope.
    pub rejection_count: Option<usize>,
    /// Relative path of the envelope export, when one was written.
    pub envelope_csv: Option<String>,
    /// Relative path of the rejected-locations export, when one was written.
    pub rejection_csv: Option<String>,
}

/// Complete summary of one test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub n_permutations: usize,
    pub seed: u64,
    pub alpha: f64,
    pub scheme: Scheme,
    /// Method name to Monte Carlo p-value, duplicated from `methods` for
    /// direct lookup.
    pub p_values: BTreeMap<String, f64>,
    pub methods: Vec<MethodReport>,
    /// Degenerate-fit statistics capped during the run.
    pub capped: usize,
}

impl TestResult {
    /// Summarises a finished run. Envelope export paths start empty; the
    /// writer that produces the CSV files fills them in.
    pub fn from_run(output: &RunOutput, settings: &RunSettings) -> Self {
        let methods = output
            .measures
            .iter()
            .zip(&output.p_values)
            .map(|(measure, &p)| {
                let envelope = output.envelope(measure.kind);
                MethodReport {
                    method: measure.kind,
                    p_value: p,
                    alpha: settings.alpha,
                    critical_measure: envelope.map(|e| e.critical_measure),
                    n_permutations: settings.permutations,
                    seed: settings.seed,
                    rejection_count: envelope.map(GlobalEnvelope::rejection_count),
                    envelope_csv: None,
                    rejection_csv: None,
                }
            })
            .collect();
        let p_values = output
            .measures
            .iter()
            .zip(&output.p_values)
            .map(|(m, &p)| (m.kind.name().to_string(), p))
            .collect();
        TestResult {
            n_permutations: settings.permutations,
            seed: settings.seed,
            alpha: settings.alpha,
            scheme: settings.scheme,
            p_values,
            methods,
            capped: output.capped,
        }
    }

    pub fn method(&self, kind: MeasureKind) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == kind)
    }

    pub fn method_mut(&mut self, kind: MeasureKind) -> Option<&mut MethodReport> {
        self.methods.iter_mut().find(|m| m.method == kind)
    }

    /// True when any method's p-value is at or under the run's alpha.
    pub fn any_rejection(&self) -> bool {
        self.methods.iter().any(|m| m.p_value <= m.alpha)
    }
}

pub fn save_results(result: &TestResult, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(result)
        .map_err(|e| Error::Config(format!("cannot encode results: {e}")))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_results(path: &Path) -> Result<TestResult> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

fn check_envelope_ids(envelope: &GlobalEnvelope, location_ids: &[String]) -> Result<()> {
    if envelope.observed.len() != location_ids.len() {
        return Err(Error::Config(format!(
            "envelope covers {} locations, dataset names {}",
            envelope.observed.len(),
            location_ids.len()
        )));
    }
    Ok(())
}

/// Writes one envelope as CSV with columns `location_id,T0,T_up,rejected`,
/// one row per location in dataset order.
pub fn write_envelope_csv(
    envelope: &GlobalEnvelope,
    location_ids: &[String],
    path: &Path,
) -> Result<()> {
    check_envelope_ids(envelope, location_ids)?;
    let mut out = Vec::with_capacity(32 * (location_ids.len() + 1));
    out.extend_from_slice(b"location_id,T0,T_up,rejected\n");
    for (r, id) in location_ids.iter().enumerate() {
        writeln!(
            out,
            "{id},{},{},{}",
            fmt_f64(envelope.observed[r]),
            fmt_f64(envelope.upper[r]),
            u8::from(envelope.rejected[r]),
        )
        .expect("writing to a Vec cannot fail");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes only the rejected locations, same columns as the full export.
/// A run with no rejections still produces the header line.
pub fn write_rejection_csv(
    envelope: &GlobalEnvelope,
    location_ids: &[String],
    path: &Path,
) -> Result<()> {
    check_envelope_ids(envelope, location_ids)?;
    let mut out = Vec::new();
    out.extend_from_slice(b"location_id,T0,T_up,rejected\n");
    for (r, id) in location_ids.iter().enumerate() {
        if !envelope.rejected[r] {
            continue;
        }
        writeln!(
            out,
            "{id},{},{},1",
            fmt_f64(envelope.observed[r]),
            fmt_f64(envelope.upper[r]),
        )
        .expect("writing to a Vec cannot fail");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads back an envelope CSV as `(location_id, T0, T_up, rejected)` rows.
pub fn read_envelope_csv(path: &Path) -> Result<Vec<(String, f64, f64, bool)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == "location_id,T0,T_up,rejected" => {}
        Some((_, other)) => {
            return Err(Error::parse(path, 1, format!("unexpected header '{other}'")))
        }
        None => return Err(Error::parse(path, 1, "empty envelope file")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |what: &str| {
            fields
                .next()
                .ok_or_else(|| Error::parse(path, i + 1, format!("missing {what}")))
        };
        let id = next("location_id")?.to_string();
        let t0: f64 = next("T0")?
            .parse()
            .map_err(|_| Error::parse(path, i + 1, "unreadable T0"))?;
        let up: f64 = next("T_up")?
            .parse()
            .map_err(|_| Error::parse(path, i + 1, "unreadable T_up"))?;
        let rejected = match next("rejected")? {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("rejected flag '{other}' is not 0 or 1"),
                ))
            }
        };
        rows.push((id, t0, up, rejected));
    }
    Ok(rows)
}
