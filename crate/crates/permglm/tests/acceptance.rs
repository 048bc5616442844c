//! Exactness criteria: route agreement, envelope/p-value consistency, the
//! tie phenomenon that motivates the refined measures, scheme equivalence,
//! and hand-computed rank values. Each test prints one summary line so a
//! full run reads as a checklist.

mod common;

use std::cmp::Ordering;
use std::time::Instant;

use common::{dataset_from, glm_instance, rel_dev, uniform_matrix};
use permglm::envelope::{consistency_audit, envelope_from_field};
use permglm::glm::stat_field;
use permglm::permutation::{generate_plan, Scheme};
use permglm::rank::{
    area_measure, cont_measure, continuous_ranks, erl_measure, fmax_measure, monte_carlo_pvalue,
    ordinary_ranks, pmin_measure, MeasureVector, PointwiseRanks, TiePolicy,
};
use permglm::rng::stream_rng;
use permglm::streaming::{erl_compare_resolved, streaming_run, ErlOrder, StreamingConfig};
use rand::Rng;

const VALUE_TOL: f64 = 1e-12;

#[test]
fn acceptance_1_streaming_matches_naive() {
    let start = Instant::now();
    let instances = 50;
    let (groups, locations, permutations) = ((5, 5), 100, 99);
    let m = permutations + 1;

    let mut max_rel: f64 = 0.0;
    let mut unresolved = 0usize;
    let mut resolved_pairs = 0usize;
    for i in 0..instances {
        let (dataset, design, plan) =
            glm_instance(9_100 + i, groups, locations, permutations, Scheme::Raw);
        let field = stat_field(&dataset, &design, &plan).unwrap();
        let ranks = PointwiseRanks::compute(&field, TiePolicy::MidRank);
        let naive = [
            fmax_measure(&field),
            pmin_measure(&ranks.ordinary),
            cont_measure(&ranks.continuous),
            area_measure(&ranks.continuous),
        ];
        let out = streaming_run(&dataset, &design, &plan, &StreamingConfig::default()).unwrap();
        for want in &naive {
            let got = out.measure(want.kind).unwrap();
            for (g, w) in got.values.iter().zip(&want.values) {
                let rel = rel_dev(*g, *w);
                assert!(
                    rel <= VALUE_TOL,
                    "instance {i} {}: streamed {g} vs naive {w} (rel {rel:.3e})",
                    want.kind
                );
                max_rel = max_rel.max(rel);
            }
        }

        // The slot states define a partial order; wherever they decide a
        // pair, the decision must equal the full lexicographic order.
        let naive_erl = erl_measure(&ranks.ordinary);
        let states = out.erl_states.as_ref().unwrap();
        for a in 0..m {
            for b in (a + 1)..m {
                let (order, resolved) = erl_compare_resolved(&states[a], &states[b], locations);
                if !resolved {
                    continue;
                }
                resolved_pairs += 1;
                let got = match order {
                    ErlOrder::AMoreExtreme => Ordering::Less,
                    ErlOrder::BMoreExtreme => Ordering::Greater,
                    ErlOrder::Tie => Ordering::Equal,
                };
                let want = naive_erl.values[a].total_cmp(&naive_erl.values[b]);
                assert_eq!(got, want, "instance {i}: slot order wrong for pair ({a}, {b})");
            }
        }
        unresolved += out.erl_unresolved;
    }

    let unresolved_share = unresolved as f64 / (instances as usize * m) as f64;
    assert!(
        unresolved_share <= 0.01,
        "unresolved share {unresolved_share:.4} above 1%"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}, budget 2 min");
    println!(
        "ACCEPTANCE 1 streaming_matches_naive: PASS ({instances} instances, max rel dev {max_rel:.2e}, \
         {resolved_pairs} ordered pairs checked, unresolved {:.3}%, {:.1}s)",
        100.0 * unresolved_share,
        elapsed.as_secs_f64()
    );
}

/// Rank measures of one F-field: the three whose envelope consistency is
/// under test.
fn refined_measures(field: &permglm::glm::StatField) -> [MeasureVector; 3] {
    let ranks = PointwiseRanks::compute(field, TiePolicy::MidRank);
    [
        erl_measure(&ranks.ordinary),
        cont_measure(&ranks.continuous),
        area_measure(&ranks.continuous),
    ]
}

#[test]
fn acceptance_2_envelope_crossing_matches_pvalue() {
    // Decided instances only: the null half is screened so every measure's
    // p-value clears both levels with margin, the signal half carries a
    // planted effect strong enough to pin every p-value at its floor. On
    // such instances a p-value at or under alpha must coincide exactly with
    // the observed curve escaping the envelope somewhere, for every measure
    // and both levels. Photo finishes between the top two functions sit on
    // neither side cleanly; the library's own audit covers them and its
    // unit tests pin one such instance down to the digit.
    let start = Instant::now();
    let (groups, locations, permutations) = ((6, 6), 60, 79);
    let m = (permutations + 1) as f64;
    let floor = 1.0 / m;
    let per_half = 250;
    let alphas = [0.05, 0.1];

    let mut checks = 0usize;
    let mut audits = 0usize;

    let mut kept = 0;
    let mut attempt = 0u64;
    while kept < per_half {
        attempt += 1;
        assert!(attempt < 5_000, "null screening exhausted its seed budget");
        let (dataset, design, plan) =
            glm_instance(20_000 + attempt, groups, locations, permutations, Scheme::Raw);
        let field = stat_field(&dataset, &design, &plan).unwrap();
        let measures = refined_measures(&field);
        if measures.iter().any(|mv| monte_carlo_pvalue(mv) <= 0.12) {
            continue;
        }
        kept += 1;
        for mv in &measures {
            let p = monte_carlo_pvalue(mv);
            for alpha in alphas {
                let env = envelope_from_field(&field, mv, alpha).unwrap();
                let crossed = env.any_rejected();
                assert_eq!(
                    p <= alpha,
                    crossed,
                    "null attempt {attempt} {}: p {p} vs crossing {crossed} at alpha {alpha}",
                    mv.kind
                );
                assert!(!crossed);
                let report = consistency_audit(&env, mv);
                assert!(report.is_clean(), "{:?}", report.violations);
                checks += 1;
                audits += 1;
            }
        }
    }

    let mut kept = 0;
    let mut attempt = 0u64;
    while kept < per_half {
        attempt += 1;
        assert!(attempt < 5_000, "signal screening exhausted its seed budget");
        let subjects = groups.0 + groups.1;
        let mut values = uniform_matrix(40_000 + attempt, subjects, locations);
        // Planted group contrast on the first eight locations, far above
        // the noise scale.
        for i in groups.0..subjects {
            for r in 0..8 {
                values[(i, r)] += 3.0;
            }
        }
        let dataset = dataset_from(values);
        let design = permglm::dataset::DesignSpec::two_group(groups).unwrap();
        let plan = generate_plan(40_000 + attempt, subjects, permutations, Scheme::Raw).unwrap();
        let field = stat_field(&dataset, &design, &plan).unwrap();
        let measures = refined_measures(&field);
        if measures
            .iter()
            .any(|mv| monte_carlo_pvalue(mv) > floor + 1e-12)
        {
            continue;
        }
        kept += 1;
        for mv in &measures {
            let p = monte_carlo_pvalue(mv);
            for alpha in alphas {
                let env = envelope_from_field(&field, mv, alpha).unwrap();
                let crossed = env.any_rejected();
                assert_eq!(
                    p <= alpha,
                    crossed,
                    "signal attempt {attempt} {}: p {p} vs crossing {crossed} at alpha {alpha}",
                    mv.kind
                );
                assert!(crossed);
                let report = consistency_audit(&env, mv);
                assert!(report.is_clean(), "{:?}", report.violations);
                checks += 1;
                audits += 1;
            }
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}, budget 5 min");
    println!(
        "ACCEPTANCE 2 envelope_crossing_matches_pvalue: PASS (500 instances, {checks} equivalence \
         checks, {audits} clean audits, 0 violations, {:.1}s)",
        elapsed.as_secs_f64()
    );
}

#[test]
fn acceptance_5_pmin_rank_one_ties() {
    // 51x51 null data: almost every permutation is the pointwise winner
    // somewhere, so the minimum p-value ties at its floor across most of
    // them, and the tie share only falls as permutations outnumber
    // locations.
    let locations = 51 * 51;
    let runs = 20;
    let mut averages = Vec::new();
    for (ji, permutations) in [100usize, 500, 2_000].into_iter().enumerate() {
        let m = permutations + 1;
        let mut total_share = 0.0;
        for run in 0..runs {
            let mut rng = stream_rng(60_000 + (ji as u64) * 1_000 + run, 0);
            let mut column = vec![0.0; m];
            let mut min_p = vec![f64::INFINITY; m];
            for _ in 0..locations {
                for v in column.iter_mut() {
                    *v = rng.gen();
                }
                let ranks = ordinary_ranks(&column, TiePolicy::MidRank);
                for (p, rank) in min_p.iter_mut().zip(&ranks) {
                    let pointwise = (m as f64 + 1.0 - rank) / m as f64;
                    if pointwise < *p {
                        *p = pointwise;
                    }
                }
            }
            let floor = 1.0 / m as f64;
            let tied = min_p.iter().filter(|&&p| p == floor).count();
            total_share += tied as f64 / m as f64;
        }
        averages.push(total_share / runs as f64);
    }

    assert!(
        averages[0] >= 0.9,
        "tie share {:.3} below 0.9 at 100 permutations",
        averages[0]
    );
    assert!(
        averages[0] > averages[1] && averages[1] > averages[2],
        "tie shares not decreasing: {averages:?}"
    );
    println!(
        "ACCEPTANCE 5 pmin_rank_one_ties: PASS (51x51, tie share {:.3} -> {:.3} -> {:.3} \
         for 100 -> 500 -> 2000 permutations, {runs} runs each)",
        averages[0], averages[1], averages[2]
    );
}

#[test]
fn acceptance_6_schemes_agree_with_intercept_nuisance() {
    // With only an intercept in the nuisance block, permuting residuals
    // around the grand mean relabels the same statistics the raw scheme
    // produces, so the two schemes must agree statistic by statistic.
    let (groups, locations, permutations) = ((5, 5), 50, 99);
    let mut max_rel: f64 = 0.0;
    for i in 0..20 {
        let (dataset, design, raw_plan) =
            glm_instance(70_000 + i, groups, locations, permutations, Scheme::Raw);
        let fl_plan = generate_plan(
            (70_000 + i) ^ 0x9e37_79b9,
            groups.0 + groups.1,
            permutations,
            Scheme::FreedmanLane,
        )
        .unwrap();

        let raw_field = stat_field(&dataset, &design, &raw_plan).unwrap();
        let fl_field = stat_field(&dataset, &design, &fl_plan).unwrap();
        for j in 0..=permutations {
            for r in 0..locations {
                let rel = rel_dev(fl_field.values[(j, r)], raw_field.values[(j, r)]);
                assert!(
                    rel <= 1e-9,
                    "instance {i}: schemes differ at ({j}, {r}), rel {rel:.3e}"
                );
                max_rel = max_rel.max(rel);
            }
        }

        let raw_ranks = PointwiseRanks::compute(&raw_field, TiePolicy::MidRank);
        let fl_ranks = PointwiseRanks::compute(&fl_field, TiePolicy::MidRank);
        let pairs = [
            (fmax_measure(&raw_field), fmax_measure(&fl_field)),
            (pmin_measure(&raw_ranks.ordinary), pmin_measure(&fl_ranks.ordinary)),
            (erl_measure(&raw_ranks.ordinary), erl_measure(&fl_ranks.ordinary)),
            (cont_measure(&raw_ranks.continuous), cont_measure(&fl_ranks.continuous)),
            (area_measure(&raw_ranks.continuous), area_measure(&fl_ranks.continuous)),
        ];
        for (raw_mv, fl_mv) in pairs {
            assert_eq!(
                monte_carlo_pvalue(&raw_mv),
                monte_carlo_pvalue(&fl_mv),
                "instance {i} {}: p-values differ between schemes",
                raw_mv.kind
            );
        }
    }
    println!(
        "ACCEPTANCE 6 schemes_agree_with_intercept_nuisance: PASS (20 instances, \
         max statistic rel dev {max_rel:.2e}, all p-values identical)"
    );
}

#[test]
fn acceptance_7_hand_computed_rank_values() {
    // Continuous ranks of the column (1, 2, 4).
    let cranks = continuous_ranks(&[1.0, 2.0, 4.0]);
    let want = [(-0.5f64).exp(), 4.0 / 3.0, 2.0 - (-2.0f64).exp()];
    for (got, want) in cranks.iter().zip(want) {
        assert!(
            (got - want).abs() <= 1e-9,
            "continuous rank {got} vs hand value {want}"
        );
    }

    // Area measure of a function with continuous extremeness (0.4, 2.6):
    // rank floor 1, deficit 0.6 at one of two locations, (1 - 0.3) / 3.
    let m = 3.0;
    let continuous = permglm::mat::Mat::from_rows(&[
        vec![m - 0.4, m - 2.6],
        vec![1.0, 1.2],
        vec![0.3, 2.0],
    ]);
    let area = area_measure(&continuous);
    let want = 0.7 / 3.0;
    assert!(
        (area.values[0] - want).abs() <= 1e-12,
        "area value {} vs hand value {want}",
        area.values[0]
    );
    println!(
        "ACCEPTANCE 7 hand_computed_rank_values: PASS (continuous ranks to 1e-9, \
         area value to 1e-12)"
    );
}
