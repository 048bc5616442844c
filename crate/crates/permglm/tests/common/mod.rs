//! Instance builders shared by the acceptance suites.
#![allow(dead_code)]

use permglm::dataset::{DesignSpec, Domain, FunctionalDataset};
use permglm::mat::Mat;
use permglm::permutation::{generate_plan, PermutationPlan, Scheme};
use permglm::rng::stream_rng;
use rand::Rng;

/// Subject-by-location data matrix with independent uniform entries.
pub fn uniform_matrix(seed: u64, subjects: usize, locations: usize) -> Mat {
    let mut rng = stream_rng(seed, 0);
    let mut values = Mat::zeros(subjects, locations);
    for i in 0..subjects {
        for r in 0..locations {
            values[(i, r)] = rng.gen_range(-1.0..1.0);
        }
    }
    values
}

pub fn dataset_from(values: Mat) -> FunctionalDataset {
    let locations = values.cols();
    FunctionalDataset::new(values, Domain::Grid { width: locations, height: 1 })
        .expect("valid synthetic dataset")
}

/// Two-group instance with a shared intercept as the only nuisance term.
pub fn glm_instance(
    seed: u64,
    groups: (usize, usize),
    locations: usize,
    permutations: usize,
    scheme: Scheme,
) -> (FunctionalDataset, DesignSpec, PermutationPlan) {
    let subjects = groups.0 + groups.1;
    let dataset = dataset_from(uniform_matrix(seed, subjects, locations));
    let design = DesignSpec::two_group(groups).expect("two-group design");
    let plan =
        generate_plan(seed ^ 0x9e37_79b9, subjects, permutations, scheme).expect("plan generates");
    (dataset, design, plan)
}

/// Relative deviation against `want`, treating exact matches of any size as
/// zero.
pub fn rel_dev(got: f64, want: f64) -> f64 {
    if got == want {
        return 0.0;
    }
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}
