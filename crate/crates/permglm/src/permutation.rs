//! Permutation plans and resampling schemes.
//!
//! A plan is the full set of `J` subject permutations used by one run,
//! generated up front so that every downstream pass (measure computation,
//! envelope construction) replays exactly the same resamples. Permutation
//! `j` is drawn from its own random stream keyed by `(seed, j)`, so a single
//! permutation can be regenerated without the others and workers can share
//! the plan read-only.
//!
//! Sampling is uniform over the symmetric group, with replacement; the
//! identity is not planted anywhere, the observed arrangement simply
//! occupies slot 0 of every statistic field. A permutation maps output row
//! `i` to source row `perm[i]`.
//!
//! Two schemes interpret a permutation:
//!
//! * [`Scheme::Raw`] reorders the response rows directly. Exact under the
//!   null when the full model is exchangeable, i.e. nothing but an intercept
//!   needs to be held fixed.
//! * [`Scheme::FreedmanLane`] fits the nuisance-only model per location,
//!   keeps its fitted values in place, and permutes only the residuals:
//!   `y* = Z g_hat + P e`. With an intercept-only nuisance block this
//!   reduces to the raw scheme.

use std::fmt;

use crate::dataset::{DesignSpec, FunctionalDataset};
use crate::error::{Error, Result};
use crate::glm::DesignContext;
use crate::mat::Mat;
use crate::rng::{random_permutation, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Scheme {
    #[serde(rename = "raw")]
    Raw,
    #[serde(rename = "freedman-lane")]
    FreedmanLane,
}

impl Scheme {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "raw" => Ok(Scheme::Raw),
            "freedman-lane" => Ok(Scheme::FreedmanLane),
            other => Err(Error::Config(format!(
                "unknown scheme '{other}' (expected 'raw' or 'freedman-lane')"
            ))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Raw => "raw",
            Scheme::FreedmanLane => "freedman-lane",
        })
    }
}

/// Identity of a plan: enough to decide whether two passes used the same
/// resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanFingerprint {
    pub seed: u64,
    pub subjects: usize,
    pub count: usize,
    pub scheme: Scheme,
    pub digest: u64,
}

/// `J` stored subject permutations plus the scheme that interprets them.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationPlan {
    seed: u64,
    subjects: usize,
    count: usize,
    scheme: Scheme,
    /// Flat row-major storage, `count * subjects` indices.
    perms: Vec<usize>,
}

impl PermutationPlan {
    /// Wraps explicit permutations, validating that each is a bijection of
    /// `0..subjects`. The seed is only recorded for fingerprinting.
    pub fn from_permutations(
        seed: u64,
        subjects: usize,
        scheme: Scheme,
        perms: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let mut flat = Vec::with_capacity(perms.len() * subjects);
        let mut seen = vec![false; subjects];
        for (j, perm) in perms.iter().enumerate() {
            if perm.len() != subjects {
                return Err(Error::Validation(format!(
                    "permutation {} has {} entries, expected {subjects}",
                    j + 1,
                    perm.len()
                )));
            }
            seen.fill(false);
            for &v in perm {
                if v >= subjects || seen[v] {
                    return Err(Error::Validation(format!(
                        "permutation {} is not a bijection of 0..{subjects}",
                        j + 1
                    )));
                }
                seen[v] = true;
            }
            flat.extend_from_slice(perm);
        }
        let count = perms.len();
        Ok(PermutationPlan {
            seed,
            subjects,
            count,
            scheme,
            perms: flat,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn subjects(&self) -> usize {
        self.subjects
    }

    /// Number of stored permutations `J` (the observed slot is not stored).
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn perm(&self, j: usize) -> &[usize] {
        &self.perms[j * self.subjects..(j + 1) * self.subjects]
    }

    pub fn fingerprint(&self) -> PlanFingerprint {
        // FNV-1a over the permutation indices pins the exact resamples.
        let mut digest: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: u64| {
            for byte in v.to_le_bytes() {
                digest ^= byte as u64;
                digest = digest.wrapping_mul(0x100_0000_01b3);
            }
        };
        eat(self.subjects as u64);
        eat(self.count as u64);
        eat(match self.scheme {
            Scheme::Raw => 0,
            Scheme::FreedmanLane => 1,
        });
        for &p in &self.perms {
            eat(p as u64);
        }
        PlanFingerprint {
            seed: self.seed,
            subjects: self.subjects,
            count: self.count,
            scheme: self.scheme,
            digest,
        }
    }
}

/// Draws `count` uniform permutations of `0..subjects`. Permutation `j`
/// depends only on `(seed, j)`, never on the other permutations.
pub fn generate_plan(
    seed: u64,
    subjects: usize,
    count: usize,
    scheme: Scheme,
) -> Result<PermutationPlan> {
    if subjects < 2 {
        return Err(Error::Config(format!(
            "cannot permute {subjects} subject(s)"
        )));
    }
    if count == 0 {
        return Err(Error::Config("permutation count must be at least 1".into()));
    }
    let mut perms = Vec::with_capacity(count * subjects);
    for j in 0..count {
        let mut rng = stream_rng(seed, j as u64);
        perms.extend(random_permutation(&mut rng, subjects));
    }
    Ok(PermutationPlan {
        seed,
        subjects,
        count,
        scheme,
        perms,
    })
}

/// Applies permutation `j` of the plan to the rows of a response matrix.
pub fn permute_raw(values: &Mat, plan: &PermutationPlan, j: usize) -> Mat {
    let perm = plan.perm(j);
    assert_eq!(values.rows(), plan.subjects(), "row count differs from plan");
    let mut out = Mat::zeros(values.rows(), values.cols());
    for (i, &src) in perm.iter().enumerate() {
        out.row_mut(i).copy_from_slice(values.row(src));
    }
    out
}

/// Residual-permutation resample `j`: per location, nuisance fit plus
/// permuted nuisance residuals. Requires a nonempty nuisance block.
pub fn permute_freedman_lane(
    dataset: &FunctionalDataset,
    design: &DesignSpec,
    plan: &PermutationPlan,
    j: usize,
) -> Result<Mat> {
    if design.l() == 0 {
        return Err(Error::Config(
            "freedman-lane resampling requires a nonempty nuisance block".into(),
        ));
    }
    let ctx = DesignContext::new(design)?;
    let s = dataset.subjects();
    let n = dataset.locations();
    let perm = plan.perm(j);
    let mut out = Mat::zeros(s, n);
    let mut y = vec![0.0; s];
    let mut fitted = vec![0.0; s];
    for r in 0..n {
        dataset.values().col_into(r, &mut y);
        ctx.nuisance_fit(&y, &mut fitted);
        for i in 0..s {
            let src = perm[i];
            out[(i, r)] = fitted[i] + (y[src] - fitted[src]);
        }
    }
    Ok(out)
}
