//! Scratch calibration probe; not part of the shipped suite.
#![allow(dead_code)]

use std::collections::HashMap;
use std::time::Instant;

use permglm::glm::stat_field;
use permglm::permutation::{generate_plan, Scheme};
use permglm::rank::{MeasureKind, PointwiseRanks, TiePolicy};
use permglm::synthetic::{
    run_experiment, CorrelationForm, ErrorKind, FieldSpec, GridSpec, Model, ModelSampler,
};

struct CaseCfg {
    model: Model,
    sigma: f64,
    width: usize,
    rho: f64,
    form: CorrelationForm,
    subjects: usize,
    permutations: usize,
}

fn spec_for(cfg: &CaseCfg, seed: u64) -> FieldSpec {
    FieldSpec {
        grid: GridSpec::square(cfg.width).unwrap(),
        rho: cfg.rho,
        correlation: cfg.form,
        sigma: cfg.sigma,
        error_kind: ErrorKind::C,
        model: cfg.model,
        subjects_per_group: cfg.subjects,
        seed,
    }
}

/// Badge census on one replicate: who holds pointwise rank 1 where.
fn census(cfg: &CaseCfg, seed: u64) {
    let spec = spec_for(cfg, seed);
    let sampler = ModelSampler::new(spec).unwrap();
    let (dataset, design) = sampler.dataset(seed).unwrap();
    let plan = generate_plan(
        seed ^ 0xabcd,
        2 * cfg.subjects,
        cfg.permutations,
        Scheme::Raw,
    )
    .unwrap();
    let stats = stat_field(&dataset, &design, &plan).unwrap();
    let ranks = PointwiseRanks::compute(stats.matrix(), TiePolicy::MidRank).unwrap();
    let m = (cfg.permutations + 1) as f64;
    let n = ranks.ordinary().cols();
    let mut badge_count: HashMap<usize, usize> = HashMap::new();
    for r in 0..n {
        let mut best = 0usize;
        let mut best_rank = f64::INFINITY;
        for j in 0..ranks.ordinary().rows() {
            let rk = ranks.ordinary()[(j, r)];
            if rk < best_rank {
                best_rank = rk;
                best = j;
            }
        }
        *badge_count.entry(best).or_insert(0) += 1;
    }
    let obs_badges = badge_count.get(&0).copied().unwrap_or(0);
    let holders = badge_count.len();
    let mut sizes: Vec<usize> = badge_count.values().copied().collect();
    sizes.sort_unstable();
    let med = sizes[sizes.len() / 2];
    println!(
        "census w={} rho={} form={:?} s={} J={} seed={}: holders {} (median badges {}), obs badges {}, m={}",
        cfg.width, cfg.rho, cfg.form, cfg.subjects, cfg.permutations, seed, holders, med, obs_badges, m
    );
}

fn power(cfg: &CaseCfg, replicates: usize, seed: u64) {
    let spec = spec_for(cfg, seed);
    let start = Instant::now();
    let report = run_experiment(
        &spec,
        replicates,
        cfg.permutations,
        0.05,
        &MeasureKind::ALL,
    )
    .unwrap();
    let get = |k| report.rate(k).unwrap();
    println!(
        "power {:?} sigma={} w={} rho={} form={:?} s={} J={} reps={} seed={}: fmax {:.3} pmin {:.3} erl {:.3} cont {:.3} area {:.3}  [{:.1}s]",
        cfg.model,
        cfg.sigma,
        cfg.width,
        cfg.rho,
        cfg.form,
        cfg.subjects,
        cfg.permutations,
        replicates,
        seed,
        get(MeasureKind::Fmax),
        get(MeasureKind::Pmin),
        get(MeasureKind::Erl),
        get(MeasureKind::Cont),
        get(MeasureKind::Area),
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn probe_main() {
    for &rho in &[0.25, 0.4] {
        for &subjects in &[5usize, 10] {
            let base = CaseCfg {
                model: Model::M1prime,
                sigma: 1.25,
                width: 21,
                rho,
                form: CorrelationForm::Smooth,
                subjects,
                permutations: 499,
            };
            census(&base, 101);
        }
    }
    for &(model, sigma) in &[(Model::M1, 0.5), (Model::M1prime, 1.25)] {
        for &rho in &[0.25, 0.4] {
            for &subjects in &[5usize, 10] {
                let cfg = CaseCfg {
                    model,
                    sigma,
                    width: 21,
                    rho,
                    form: CorrelationForm::Smooth,
                    subjects,
                    permutations: 499,
                };
                power(&cfg, 100, 4242);
            }
        }
    }
}
