//! One-call orchestration of a permutation test: plan generation, the
//! statistic pass (streaming or materialised), measure vectors, Monte Carlo
//! p-values, and optional global envelopes, all under a single settings
//! struct. Both routes produce identical numbers; they differ only in how
//! much of the statistic field exists at once.

use crate::dataset::{validate, DesignSpec, FunctionalDataset};
use crate::envelope::{envelope_from_field, upper_envelopes, GlobalEnvelope};
use crate::error::{Error, Result};
use crate::glm::stat_field;
use crate::permutation::{generate_plan, PermutationPlan, Scheme};
use crate::rank::{
    area_measure, cont_measure, erl_measure, fmax_measure, monte_carlo_pvalue, pmin_measure,
    MeasureKind, MeasureVector, PointwiseRanks, TiePolicy,
};
use crate::streaming::{streaming_run, StreamingConfig, DEFAULT_ERL_SLOTS};

/// Everything a single test run needs beyond the data and the design.
#[derive(Debug, Clone)]
pub struct RunSettings {
    /// Measures to compute, in output order.
    pub methods: Vec<MeasureKind>,
    /// Number of permutations `J`; the run evaluates `J + 1` functions.
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Streaming keeps memory near `O(locations x subjects)`; the
    /// materialised route holds the full `(J+1) x locations` field.
    pub streaming: bool,
    /// Whether to build a global envelope per measure at `alpha`.
    pub envelopes: bool,
    pub tie_policy: TiePolicy,
    /// Rank slots per function for the streaming erl order.
    pub erl_slots: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            methods: MeasureKind::ALL.to_vec(),
            permutations: 999,
            alpha: 0.05,
            seed: 0,
            scheme: Scheme::Raw,
            streaming: true,
            envelopes: true,
            tie_policy: TiePolicy::MidRank,
            erl_slots: DEFAULT_ERL_SLOTS,
        }
    }
}

impl RunSettings {
    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        for (i, kind) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(kind) {
                return Err(Error::Config(format!("method '{kind}' listed twice")));
            }
        }
        if self.permutations == 0 {
            return Err(Error::Config("permutation count must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        Ok(())
    }

    fn streaming_config(&self) -> StreamingConfig {
        StreamingConfig {
            measures: self.methods.clone(),
            tie_policy: self.tie_policy,
            erl_slots: self.erl_slots,
            ..StreamingConfig::default()
        }
    }
}

/// Result of one test run. Vectors are aligned with the requested method
/// order.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub measures: Vec<MeasureVector>,
    pub p_values: Vec<f64>,
    /// One envelope per method, present when requested.
    pub envelopes: Option<Vec<GlobalEnvelope>>,
    /// Degenerate-fit statistics capped across all locations and functions.
    pub capped: usize,
    /// Functions whose erl order against the observed one was not decided
    /// by the stored rank slots; always zero on the materialised route.
    pub erl_unresolved: usize,
    pub locations: usize,
}

impl RunOutput {
    pub fn p_values(&self) -> &[f64] {
        &self.p_values
    }

    pub fn measure(&self, kind: MeasureKind) -> Option<&MeasureVector> {
        self.measures.iter().find(|m| m.kind == kind)
    }

    pub fn p_value(&self, kind: MeasureKind) -> Option<f64> {
        self.measures
            .iter()
            .position(|m| m.kind == kind)
            .map(|i| self.p_values[i])
    }

    pub fn envelope(&self, kind: MeasureKind) -> Option<&GlobalEnvelope> {
        self.envelopes.as_ref()?.iter().find(|e| e.method == kind)
    }

    /// Smallest p-value at or under which any requested method rejects.
    pub fn any_rejection(&self, alpha: f64) -> bool {
        self.p_values.iter().any(|&p| p <= alpha)
    }
}

/// Runs the test with a freshly generated plan.
pub fn run_test(
    dataset: &FunctionalDataset,
    design: &DesignSpec,
    settings: &RunSettings,
) -> Result<RunOutput> {
    settings.validate()?;
    let plan = generate_plan(
        settings.seed,
        design.subjects(),
        settings.permutations,
        settings.scheme,
    )?;
    run_test_with_plan(dataset, design, &plan, settings)
}

/// Runs the test under a caller-supplied plan; `settings.permutations`,
/// `seed`, and `scheme` are ignored in favour of the plan's own.
pub fn run_test_with_plan(
    dataset: &FunctionalDataset,
    design: &DesignSpec,
    plan: &PermutationPlan,
    settings: &RunSettings,
) -> Result<RunOutput> {
    settings.validate()?;
    validate(dataset, design)?;
    if settings.streaming {
        run_streaming(dataset, design, plan, settings)
    } else {
        run_materialised(dataset, design, plan, settings)
    }
}

fn run_streaming(
    dataset: &FunctionalDataset,
    design: &DesignSpec,
    plan: &PermutationPlan,
    settings: &RunSettings,
) -> Result<RunOutput> {
    let out = streaming_run(dataset, design, plan, &settings.streaming_config())?;
    let p_values = out.measures.iter().map(monte_carlo_pvalue).collect();
    let envelopes = if settings.envelopes {
        Some(upper_envelopes(dataset, design, plan, &out.measures, settings.alpha)?)
    } else {
        None
    };
    Ok(RunOutput {
        measures: out.measures,
        p_values,
        envelopes,
        capped: out.capped,
        erl_unresolved: out.erl_unresolved,
        locations: out.locations,
    })
}

fn run_materialised(
    dataset: &FunctionalDataset,
    design: &DesignSpec,
    plan: &PermutationPlan,
    settings: &RunSettings,
) -> Result<RunOutput> {
    let field = stat_field(dataset, design, plan)?;
    let needs_ranks = settings.methods.iter().any(|k| *k != MeasureKind::Fmax);
    let ranks = if needs_ranks {
        Some(PointwiseRanks::compute(&field, settings.tie_policy))
    } else {
        None
    };
    let rank = |f: &dyn Fn(&PointwiseRanks) -> MeasureVector| {
        f(ranks.as_ref().expect("ranks computed for rank-based measures"))
    };
    let mut measures = Vec::with_capacity(settings.methods.len());
    for &kind in &settings.methods {
        let mut measure = match kind {
            MeasureKind::Fmax => fmax_measure(&field),
            MeasureKind::Pmin => rank(&|r| pmin_measure(&r.ordinary)),
            MeasureKind::Erl => rank(&|r| erl_measure(&r.ordinary)),
            MeasureKind::Cont => rank(&|r| cont_measure(&r.continuous)),
            MeasureKind::Area => rank(&|r| area_measure(&r.continuous)),
        };
        measure.fingerprint = Some(plan.fingerprint());
        measures.push(measure);
    }
    let p_values = measures.iter().map(monte_carlo_pvalue).collect();
    let envelopes = if settings.envelopes {
        let built: Result<Vec<GlobalEnvelope>> = measures
            .iter()
            .map(|m| envelope_from_field(&field, m, settings.alpha))
            .collect();
        Some(built?)
    } else {
        None
    };
    Ok(RunOutput {
        measures,
        p_values,
        envelopes,
        capped: field.capped,
        erl_unresolved: 0,
        locations: field.values.cols(),
    })
}
