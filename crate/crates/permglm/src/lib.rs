//! Permutation inference for general linear models observed over image and
//! functional domains.
//!
//! The crate tests a pointwise linear hypothesis `C b(r) = 0` across all
//! locations `r` of a domain at once. A permutation scheme produces `J`
//! resampled versions of the observed data, an F-statistic is evaluated at
//! every location for every resample, and the resulting `(J+1) x n` field of
//! statistics is reduced to one scalar measure per resample. Comparing the
//! observed measure against the permutation measures yields a Monte Carlo
//! p-value with familywise error control, and a global envelope marks the
//! locations responsible for a rejection.
//!
//! Five measures are available, selected by [`MeasureKind`]:
//!
//! * `fmax`: the maximum statistic over the domain,
//! * `pmin`: the minimum pointwise rank p-value,
//! * `erl`: lexicographic ordering of the whole sorted rank vector,
//! * `cont`: minimum continuous pointwise rank,
//! * `area`: extreme rank refined by the area between it and the continuous
//!   rank curve where the latter dips below it.
//!
//! Two evaluation routes produce the measures. [`rank`] materialises the full
//! statistic field and rank matrices; it is the readable reference
//! implementation and the correctness oracle. [`streaming`] keeps only `O(J)`
//! running state per measure plus the `O(J s)` permutation plan, visiting one
//! location at a time, and is the route for domains with many locations.
//! Both routes share the per-location statistic evaluation, so they agree to
//! floating-point summation order.
//!
//! [`envelope`] turns a measure vector into a global envelope via a second
//! pass over the locations, [`synthetic`] generates Gaussian-random-field
//! test beds and runs the rejection-rate experiments, and [`pipeline`] wires
//! everything together behind one call used by the command-line front end.
//!
//! With the default `parallel` feature, location blocks and experiment
//! replicates are distributed over a rayon pool; partial results are merged
//! in a fixed order so output does not depend on the schedule. Without the
//! feature the same block structure runs on one thread.

pub mod dataset;
pub mod envelope;
pub mod error;
pub mod glm;
mod linalg;
pub mod mat;
mod parallel;
pub mod permutation;
pub mod pipeline;
pub mod rank;
pub mod results;
pub mod rng;
pub mod streaming;
pub mod synthetic;

pub use dataset::{DesignSpec, Domain, FunctionalDataset};
pub use envelope::{
    consistency_audit, envelope_from_field, upper_envelope, upper_envelopes, AuditReport,
    GlobalEnvelope,
};
pub use error::{Error, Result};
pub use glm::{f_statistic, fit_ols, stat_field, DesignContext, FStat, StatField};
pub use mat::Mat;
pub use parallel::configure_threads;
pub use permutation::{generate_plan, PermutationPlan, Scheme};
pub use pipeline::{run_test, run_test_with_plan, RunOutput, RunSettings};
pub use rank::{monte_carlo_pvalue, MeasureKind, MeasureVector};
pub use results::{load_results, save_results, TestResult};
pub use streaming::{streaming_run, StreamingConfig, StreamingOutput};
