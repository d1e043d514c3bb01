mod common;

use miracle::baselines::impute_mean;
use miracle::eval::{run_cell, CellConfig};
use miracle::losses::LossWeights;
use miracle::synth::{ampute_with_plan, generate_scm, missing_rates, sample_scm};
use miracle::trainer::train;
use miracle::{AmputeSpec, Dataset, Mechanism, TrainConfig};
use proptest::prelude::*;

fn amputed(d: usize, n: usize, mechanism: Mechanism, seed: u64) -> Dataset {
    let scm = generate_scm(d, seed).unwrap();
    let data = sample_scm(&scm, n, seed).unwrap();
    let spec = AmputeSpec::new(mechanism, 0.3).with_protected(scm.roots());
    ampute_with_plan(&data, &spec, seed).unwrap().0
}

#[test]
fn acyclicity_value_falls_during_training() {
    for seed in 0..5 {
        let data = amputed(6, 300, Mechanism::Mar, seed);
        let cfg = TrainConfig {
            seed,
            max_epochs: 100,
            ..TrainConfig::default()
        };
        let out = train(&data, &impute_mean(&data).unwrap(), &cfg).unwrap();
        let first = out.log.first().unwrap().loss.h_value;
        let last = out.log.last().unwrap().loss.h_value;
        assert!(last < first, "seed {seed}: h went from {first} to {last}");
    }
}

#[test]
fn plain_regression_reduction_lowers_reconstruction() {
    let data = amputed(6, 300, Mechanism::Mar, 3);
    let cfg = TrainConfig {
        beta1: 0.0,
        beta2: 0.0,
        refresh_interval: 0,
        max_epochs: 100,
        ..TrainConfig::default()
    };
    let out = train(&data, &impute_mean(&data).unwrap(), &cfg).unwrap();
    let first = out.log.first().unwrap().loss.l1_recon;
    let last = out.log.last().unwrap().loss.l1_recon;
    assert!(last < first, "reconstruction went from {first} to {last}");
    assert!(out.log.iter().all(|e| e.delta_x0.is_none()));
}

#[test]
fn most_amputed_cells_improve_under_mar() {
    let out = run_cell(&CellConfig::new(1000, 10, Mechanism::Mar, 0.3, 0)).unwrap();
    let frac = out.report.improved_fraction.unwrap();
    assert!(frac >= 0.6, "only {frac} of amputed cells improved");
}

#[test]
fn training_is_deterministic() {
    let data = amputed(5, 200, Mechanism::Mcar, 1);
    let seed = impute_mean(&data).unwrap();
    let cfg = TrainConfig {
        max_epochs: 40,
        ..TrainConfig::default()
    };
    let a = train(&data, &seed, &cfg).unwrap();
    let b = train(&data, &seed, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.imputed.values, b.imputed.values);
}

#[test]
fn mini_batches_keep_observed_cells() {
    let data = amputed(5, 200, Mechanism::Mar, 2);
    let cfg = TrainConfig {
        max_epochs: 20,
        batch_size: Some(32),
        ..TrainConfig::default()
    };
    let out = train(&data, &impute_mean(&data).unwrap(), &cfg).unwrap();
    for ((i, j), m) in data.mask().indexed_iter() {
        if *m {
            assert_eq!(out.imputed.values[[i, j]], data.values()[[i, j]]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gradients_match_finite_differences(seed in 0u64..10_000, d in 2usize..5, hidden in 1usize..5) {
        let (params, input, data) = common::instance(d, hidden, 12, seed);
        for w in [common::only_l1(), common::only_r1(), common::only_r2(), LossWeights::default()] {
            let err = common::gradient_error(&params, &input, &data, &w, 1e-5);
            prop_assert!(err < 1e-4, "relative error {err}");
        }
    }

    #[test]
    fn masked_inputs_never_matter(seed in 0u64..10_000) {
        let (params, input, _) = common::instance(4, 3, 12, seed);
        for row in input.outer_iter() {
            prop_assert_eq!(common::masked_sensitivity(&params, &row.to_owned(), 1e-3), 0.0);
        }
    }

    #[test]
    fn amputation_hits_requested_rate(seed in 0u64..1000, rate in 0.1f64..0.5, mech in 0usize..3) {
        let mechanism = [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar][mech];
        let scm = generate_scm(6, seed).unwrap();
        let data = sample_scm(&scm, 4000, seed).unwrap();
        let (amputed, plan) = ampute_with_plan(&data, &AmputeSpec::new(mechanism, rate), seed).unwrap();
        let rates = missing_rates(&amputed);
        for &t in &plan.targets {
            prop_assert!((rates[t] - rate).abs() < 0.04, "feature {} rate {} vs {}", t, rates[t], rate);
        }
        for j in (0..6).filter(|j| !plan.targets.contains(j)) {
            prop_assert_eq!(rates[j], 0.0);
        }
    }
}
