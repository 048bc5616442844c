//! Critical values, global upper envelopes, and the consistency audit that
//! ties the graphical output to the Monte Carlo p-value.
//!
//! Given a measure vector, the critical value splits the `J+1` functions
//! into an envelope hull `I_alpha` (the least extreme ones) and the
//! rejected tail. The upper envelope at a location is the pointwise maximum
//! of the hull functions; the observed function rejects wherever it rises
//! strictly above that curve. An escape anywhere always implies the
//! measure's Monte Carlo p-value is at most alpha, and for measures whose
//! order never contradicts pointwise extremeness (fmax, pmin, erl, all
//! without ties) the converse holds too, making curve and p-value two views
//! of one verdict. The continuous-rank measures are not pointwise monotone
//! at the very top: when the two largest functions at the deciding location
//! finish within a hair of each other, the top function's continuous rank
//! falls into the runner-up's band, the hull can retain the runner-up, and
//! a p-value at or under alpha coexists with a curve that never escapes.
//! The audit therefore re-checks the equivalence instance by instance and
//! reports exactly where it breaks instead of taking it on faith.

use crate::dataset::{DesignSpec, FunctionalDataset};
use crate::error::{Error, Result};
use crate::glm::{ColumnEvaluator, DesignContext, StatField};
use crate::parallel;
use crate::permutation::PermutationPlan;
use crate::rank::{monte_carlo_pvalue, MeasureKind, MeasureVector};

/// Slack for `count <= alpha * (J+1)` so that decimal alphas whose products
/// land a few ulps under an integer stay on the intended side.
const COUNT_EPS: f64 = 1e-9;

/// One method's envelope at one level.
#[derive(Debug, Clone)]
pub struct GlobalEnvelope {
    pub method: MeasureKind,
    pub alpha: f64,
    /// The measure value separating hull from rejected tail.
    pub critical_measure: f64,
    /// Size of the hull `I_alpha`.
    pub members: usize,
    /// Observed statistic per location.
    pub observed: Vec<f64>,
    /// Pointwise maximum over the hull.
    pub upper: Vec<f64>,
    /// `observed > upper`, strictly, per location.
    pub rejected: Vec<bool>,
    /// Locations where observed and upper agree exactly; there the strict
    /// inequality is the conservative side of an undefined order.
    pub boundary_ties: usize,
    /// Monte Carlo p-value of the measure that built this envelope.
    pub p_value: f64,
}

impl GlobalEnvelope {
    pub fn any_rejected(&self) -> bool {
        self.rejected.iter().any(|&r| r)
    }

    pub fn rejection_count(&self) -> usize {
        self.rejected.iter().filter(|&&r| r).count()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Extremeness-oriented copy: negates fmax so that smaller always means
/// more extreme, which lets one scan serve every measure.
fn oriented(measure: &MeasureVector) -> Vec<f64> {
    if measure.kind.smaller_is_extreme() {
        measure.values.clone()
    } else {
        measure.values.iter().map(|v| -v).collect()
    }
}

fn unorient(kind: MeasureKind, value: f64) -> f64 {
    if kind.smaller_is_extreme() { value } else { -value }
}

/// The largest measure value whose strictly-more-extreme count stays within
/// `alpha * (J+1)`. Warns when `alpha * (J+1) < 1`, where no rejection is
/// possible.
pub fn critical_value(measure: &MeasureVector, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if measure.is_empty() {
        return Err(Error::Config("empty measure vector".into()));
    }
    let m = measure.len() as f64;
    if alpha * m < 1.0 {
        log::warn!(
            "alpha {alpha} with {} functions allows no rejection (alpha * (J+1) < 1)",
            measure.len()
        );
    }
    let mut sorted = oriented(measure);
    sorted.sort_unstable_by(f64::total_cmp);
    let budget = alpha * m + COUNT_EPS;
    // Strictly-smaller counts only move at distinct values; the largest
    // admissible value is found by scanning distinct values upward.
    let mut best = sorted[0];
    let mut i = 0;
    while i < sorted.len() {
        // `i` = #{values < sorted[i]} because duplicates were skipped.
        if i as f64 <= budget {
            best = sorted[i];
        } else {
            break;
        }
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        i = j + 1;
    }
    Ok(unorient(measure.kind, best))
}

/// Hull membership: the functions at least as lax as the critical value
/// (`M_j >= M_(alpha)`, inequality flipped for fmax).
pub fn hull_members(measure: &MeasureVector, critical: f64) -> Vec<bool> {
    if measure.kind.smaller_is_extreme() {
        measure.values.iter().map(|&v| v >= critical).collect()
    } else {
        measure.values.iter().map(|&v| v <= critical).collect()
    }
}

struct EnvelopeColumns {
    observed: Vec<f64>,
    upper: Vec<f64>,
}

fn assemble(
    method: MeasureKind,
    alpha: f64,
    critical: f64,
    members: usize,
    columns: EnvelopeColumns,
    p_value: f64,
) -> GlobalEnvelope {
    let EnvelopeColumns { observed, upper } = columns;
    let rejected: Vec<bool> =
        observed.iter().zip(&upper).map(|(&t0, &up)| t0 > up).collect();
    let boundary_ties = observed.iter().zip(&upper).filter(|(t0, up)| t0 == up).count();
    GlobalEnvelope {
        method,
        alpha,
        critical_measure: critical,
        members,
        observed,
        upper,
        rejected,
        boundary_ties,
        p_value,
    }
}

fn column_max(column: &[f64], members: &[bool]) -> f64 {
    column
        .iter()
        .zip(members)
        .filter(|(_, &keep)| keep)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Envelope from a materialised statistic field.
pub fn envelope_from_field(
    field: &StatField,
    measure: &MeasureVector,
    alpha: f64,
) -> Result<GlobalEnvelope> {
    if measure.len() != field.values.rows() {
        return Err(Error::Config(format!(
            "measure over {} functions, field has {}",
            measure.len(),
            field.values.rows()
        )));
    }
    let critical = critical_value(measure, alpha)?;
    let members = hull_members(measure, critical);
    let n = field.values.cols();
    let m = field.values.rows();
    let pairs: Vec<(f64, f64)> = parallel::map_indexed(n, |r| {
        let mut column = vec![0.0; m];
        field.values.col_into(r, &mut column);
        (column[0], column_max(&column, &members))
    });
    let (observed, upper) = pairs.into_iter().unzip();
    Ok(assemble(
        measure.kind,
        alpha,
        critical,
        members.iter().filter(|&&b| b).count(),
        EnvelopeColumns { observed, upper },
        monte_carlo_pvalue(measure),
    ))
}

/// Locations per worker unit in the second pass.
const ENVELOPE_BLOCK: usize = 1024;

/// Envelopes for several measures by one shared second pass over the data.
/// Each measure must carry the fingerprint of the plan that produced it;
/// recomputing the statistics under any other plan would pair the hulls
/// with the wrong curves, so a missing or mismatched fingerprint is
/// refused. The statistic columns are recomputed once and every hull reads
/// them, so the cost is one scan regardless of how many measures come in.
pub fn upper_envelopes(
    dataset: &FunctionalDataset,
    design: &DesignSpec,
    plan: &PermutationPlan,
    measures: &[MeasureVector],
    alpha: f64,
) -> Result<Vec<GlobalEnvelope>> {
    if measures.is_empty() {
        return Err(Error::Config("no measures to build envelopes for".into()));
    }
    let m = plan.count() + 1;
    for measure in measures {
        match &measure.fingerprint {
            None => {
                return Err(Error::PlanMismatch(
                    "measure carries no plan fingerprint; cannot prove the second pass uses the same permutations".into(),
                ))
            }
            Some(fp) if *fp != plan.fingerprint() => {
                return Err(Error::PlanMismatch(
                    "measure was computed under a different permutation plan".into(),
                ))
            }
            Some(_) => {}
        }
        if measure.len() != m {
            return Err(Error::Config(format!(
                "measure over {} functions, plan yields {m}",
                measure.len()
            )));
        }
    }
    let mut criticals = Vec::with_capacity(measures.len());
    let mut hulls = Vec::with_capacity(measures.len());
    for measure in measures {
        let critical = critical_value(measure, alpha)?;
        hulls.push(hull_members(measure, critical));
        criticals.push(critical);
    }
    let n = dataset.locations();
    let ctx = DesignContext::new(design)?;
    let blocks = n.div_ceil(ENVELOPE_BLOCK);
    let results: Vec<Result<Vec<(f64, Vec<f64>)>>> = parallel::map_indexed(blocks, |b| {
        let lo = b * ENVELOPE_BLOCK;
        let hi = (lo + ENVELOPE_BLOCK).min(n);
        let mut eval = ColumnEvaluator::new(&ctx, plan, dataset)?;
        let mut column = vec![0.0; m];
        let mut out = Vec::with_capacity(hi - lo);
        for r in lo..hi {
            eval.column(r, &mut column)?;
            let ups = hulls.iter().map(|h| column_max(&column, h)).collect();
            out.push((column[0], ups));
        }
        Ok(out)
    });
    let mut observed = Vec::with_capacity(n);
    let mut uppers = vec![Vec::with_capacity(n); measures.len()];
    for block in results {
        for (t0, ups) in block? {
            observed.push(t0);
            for (dst, up) in uppers.iter_mut().zip(ups) {
                dst.push(up);
            }
        }
    }
    Ok(measures
        .iter()
        .zip(criticals)
        .zip(hulls)
        .zip(uppers)
        .map(|(((measure, critical), hull), upper)| {
            assemble(
                measure.kind,
                alpha,
                critical,
                hull.iter().filter(|&&b| b).count(),
                EnvelopeColumns { observed: observed.clone(), upper },
                monte_carlo_pvalue(measure),
            )
        })
        .collect())
}

/// Single-measure form of [`upper_envelopes`].
pub fn upper_envelope(
    dataset: &FunctionalDataset,
    design: &DesignSpec,
    plan: &PermutationPlan,
    measure: &MeasureVector,
    alpha: f64,
) -> Result<GlobalEnvelope> {
    let mut envelopes =
        upper_envelopes(dataset, design, plan, std::slice::from_ref(measure), alpha)?;
    Ok(envelopes.pop().expect("one measure in, one envelope out"))
}

/// One inconsistency found by the audit.
#[derive(Debug, Clone)]
pub struct AuditViolation {
    /// Offending location, when the check is location-bound.
    pub location: Option<usize>,
    pub message: String,
}

/// Outcome of [`consistency_audit`].
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub violations: Vec<AuditViolation>,
    /// Exact observed-equals-upper ties; these make the equivalence hold
    /// only up to the conservative side.
    pub boundary_ties: usize,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-derives every claim the envelope makes and reports disagreements:
/// the stored p-value, the per-location rejection mask, the p-vs-rejection
/// equivalence, and the measure-side form of the same equivalence
/// (observed measure strictly more extreme than the critical value).
pub fn consistency_audit(envelope: &GlobalEnvelope, measure: &MeasureVector) -> AuditReport {
    let mut violations = Vec::new();
    if measure.kind != envelope.method {
        violations.push(AuditViolation {
            location: None,
            message: format!(
                "envelope built from {}, audited against {}",
                envelope.method, measure.kind
            ),
        });
    }
    let p = monte_carlo_pvalue(measure);
    if (p - envelope.p_value).abs() > 1e-12 {
        violations.push(AuditViolation {
            location: None,
            message: format!("stored p-value {} differs from recomputed {p}", envelope.p_value),
        });
    }
    for (r, (&t0, &up)) in envelope.observed.iter().zip(&envelope.upper).enumerate() {
        let want = t0 > up;
        if envelope.rejected[r] != want {
            violations.push(AuditViolation {
                location: Some(r),
                message: format!(
                    "rejection mask says {}, observed {t0} vs upper {up} says {want}",
                    envelope.rejected[r]
                ),
            });
        }
    }
    let any = envelope.any_rejected();
    let claim = p <= envelope.alpha + COUNT_EPS;
    if any != claim {
        violations.push(AuditViolation {
            location: envelope.rejected.iter().position(|&r| r),
            message: format!(
                "p-value {p} at alpha {} implies rejection={claim}, envelope shows {any}",
                envelope.alpha
            ),
        });
    }
    let obs_extreme = if measure.kind.smaller_is_extreme() {
        measure.observed() < envelope.critical_measure
    } else {
        measure.observed() > envelope.critical_measure
    };
    if obs_extreme != claim {
        violations.push(AuditViolation {
            location: None,
            message: format!(
                "observed measure {} vs critical {} disagrees with p-value {p}",
                measure.observed(),
                envelope.critical_measure
            ),
        });
    }
    AuditReport { violations, boundary_ties: envelope.boundary_ties }
}
