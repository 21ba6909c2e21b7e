use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stance_core::metrics::{aggregate_targets, f1_for_class, mean_of_runs, ConfusionMatrix, TargetScore};
use stance_core::{StanceLabel, Target};

/// F1 straight from the label lists, no confusion matrix involved.
fn brute_f1(pairs: &[(StanceLabel, Option<StanceLabel>)], label: StanceLabel) -> f64 {
    let tp = pairs.iter().filter(|(g, p)| *g == label && *p == Some(label)).count() as f64;
    let predicted = pairs.iter().filter(|(_, p)| *p == Some(label)).count() as f64;
    let actual = pairs.iter().filter(|(g, _)| *g == label).count() as f64;
    if predicted == 0.0 || actual == 0.0 || tp == 0.0 {
        return 0.0;
    }
    2.0 * tp / (predicted + actual)
}

fn random_pairs(rng: &mut ChaCha8Rng) -> Vec<(StanceLabel, Option<StanceLabel>)> {
    let n = rng.random_range(1..=500);
    (0..n)
        .map(|_| {
            let g = StanceLabel::ALL[rng.random_range(0..3)];
            let p = if rng.random_bool(0.1) { None } else { Some(StanceLabel::ALL[rng.random_range(0..3)]) };
            (g, p)
        })
        .collect()
}

#[test]
fn f1_matches_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let pairs = random_pairs(&mut rng);
        let cm = ConfusionMatrix::from_pairs(pairs.iter().copied());
        for label in StanceLabel::ALL {
            let got = f1_for_class(&cm, label);
            let want = brute_f1(&pairs, label);
            assert!((got - want).abs() < 1e-12, "{label:?}: {got} vs {want} on {pairs:?}");
        }
        let s = TargetScore::from_confusion(Target::ClimateChange, cm);
        let want = 50.0 * (brute_f1(&pairs, StanceLabel::Favor) + brute_f1(&pairs, StanceLabel::Against));
        assert!((s.f_avg - want).abs() < 1e-9);
    }
}

fn label() -> impl Strategy<Value = StanceLabel> {
    (0usize..3).prop_map(|i| StanceLabel::ALL[i])
}

fn pairs() -> impl Strategy<Value = Vec<(StanceLabel, Option<StanceLabel>)>> {
    prop::collection::vec((label(), prop::option::weighted(0.9, label())), 0..60)
}

proptest! {
    #[test]
    fn f1_in_unit_interval(p in pairs()) {
        let cm = ConfusionMatrix::from_pairs(p);
        for l in StanceLabel::ALL {
            let f = f1_for_class(&cm, l);
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }

    /// With every cell that touches FAVOR or AGAINST held fixed, the
    /// NONE-only counts are free and F_avg must not move.
    #[test]
    fn f_avg_ignores_none_only_counts(p in pairs(), none_none in 0u64..1000, none_lost in 0u64..1000) {
        let cm = ConfusionMatrix::from_pairs(p);
        let mut perturbed = cm;
        perturbed.counts[2][2] = none_none;
        perturbed.unscoreable[2] = none_lost;
        let a = TargetScore::from_confusion(Target::Atheism, cm);
        let b = TargetScore::from_confusion(Target::Atheism, perturbed);
        prop_assert_eq!(a.f_avg, b.f_avg);
    }

    #[test]
    fn f_avg_swapping_none_errors_keeps_score(p in pairs()) {
        // A gold-FAVOR example predicted NONE and one left unscoreable
        // contribute identically to F_avg.
        let a: Vec<_> = p.iter().map(|(g, pr)| (*g, if *pr == Some(StanceLabel::None) && *g != StanceLabel::None { None } else { *pr })).collect();
        let sa = TargetScore::from_confusion(Target::Atheism, ConfusionMatrix::from_pairs(a));
        let sp = TargetScore::from_confusion(Target::Atheism, ConfusionMatrix::from_pairs(p));
        prop_assert!((sa.f_avg - sp.f_avg).abs() < 1e-12);
    }

    #[test]
    fn aggregate_is_permutation_invariant_and_bounded(v in prop::array::uniform5(0.0f64..=100.0), rot in 0usize..5) {
        let a: BTreeMap<Target, f64> = Target::ALL.into_iter().zip(v).collect();
        let mut w = v;
        w.rotate_left(rot);
        let b: BTreeMap<Target, f64> = Target::ALL.into_iter().zip(w).collect();
        let ma = aggregate_targets(&a).unwrap();
        let mb = aggregate_targets(&b).unwrap();
        prop_assert!((ma - mb).abs() < 1e-9);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(ma >= lo - 1e-9 && ma <= hi + 1e-9);
    }

    #[test]
    fn mean_of_identical_runs_is_the_run(v in prop::array::uniform5(0.0f64..=100.0), n in 1usize..5) {
        let run: BTreeMap<Target, f64> = Target::ALL.into_iter().zip(v).collect();
        let m = mean_of_runs(&vec![run.clone(); n]).unwrap();
        for t in Target::ALL {
            prop_assert!((m.per_target[&t] - run[&t]).abs() < 1e-9);
        }
    }
}
