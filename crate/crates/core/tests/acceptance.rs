//! Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use miracle::acyclicity::h_of;
use miracle::baselines::impute_mean;
use miracle::eval::{edge_recovery_by_size, location_run, location_scm, run_cells, CellConfig, LocationConfig};
use miracle::losses::LossWeights;
use miracle::synth::{ampute_with_plan, generate_scm, sample_scm};
use miracle::trainer::{train, LossTerms};
use miracle::{AmputeSpec, Mechanism, TrainConfig};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, u64, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let took = start.elapsed();
    out.detail = format!(
        "{} [{:.1}s, limit {}s]",
        out.detail,
        took.as_secs_f64(),
        limit.as_secs()
    );
    out.pass &= took <= limit;
    out
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn gradient_oracle() -> Outcome {
    let eps = 1e-5;
    let terms: [(&str, LossWeights); 4] = [
        ("L1", common::only_l1()),
        ("R1", common::only_r1()),
        ("R2", common::only_r2()),
        ("total", LossWeights::default()),
    ];
    let mut worst = [0.0f64; 4];
    for seed in 0..10 {
        let (params, input, data) = common::instance(4, 4, 20, seed);
        for (k, (_, w)) in terms.iter().enumerate() {
            worst[k] = worst[k].max(common::gradient_error(&params, &input, &data, w, eps));
        }
    }
    let detail = terms
        .iter()
        .zip(worst)
        .map(|((name, _), e)| format!("{name} {e:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome {
        pass: worst.iter().all(|e| *e < 1e-4),
        detail: format!("max relative error: {detail}"),
    }
}

fn acyclicity_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_dag = 0.0f64;
    let mut least_cyclic = f64::INFINITY;
    for _ in 0..100 {
        let m = rng.random_range(2..=10);
        let upper = rng.random_bool(0.5);
        let dag = Array2::from_shape_fn((m, m), |(i, j)| {
            let keep = if upper { i < j } else { i > j };
            if keep {
                rng.random_range(-2.0..2.0)
            } else {
                0.0
            }
        });
        worst_dag = worst_dag.max(h_of(&dag).unwrap().abs());
        let cyclic = Array2::from_shape_fn((m, m), |_| rng.random_range(0.05..1.5));
        least_cyclic = least_cyclic.min(h_of(&cyclic).unwrap());
    }
    let two = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
    let err2 = (h_of(&two).unwrap() - (2.0 * 1f64.cosh() - 2.0)).abs();
    Outcome {
        pass: worst_dag < 1e-10 && err2 < 1e-6 && least_cyclic > 1e-6,
        detail: format!(
            "max |h| on DAGs {worst_dag:.1e}, 2-cycle error {err2:.1e}, min h on cyclic {least_cyclic:.3e}"
        ),
    }
}

fn seed_grid(mechanism: Mechanism) -> Vec<CellConfig> {
    (0..5).map(|s| CellConfig::new(1000, 10, mechanism, 0.3, s)).collect()
}

fn improvement_mar() -> Outcome {
    let results = run_cells(&seed_grid(Mechanism::Mar), 0).unwrap();
    let gains: Vec<f64> = results
        .iter()
        .map(|r| {
            let rep = r.report.as_ref().expect("cell ran");
            (rep.seed_rmse - rep.imputation_rmse) / rep.seed_rmse
        })
        .collect();
    let improved = gains.iter().filter(|g| **g > 0.0).count();
    let avg = mean(&gains);
    Outcome {
        pass: improved >= 4 && avg >= 0.10,
        detail: format!(
            "improved {improved}/5, mean relative improvement {:.1}% (per seed {:?})",
            100.0 * avg,
            gains.iter().map(|g| format!("{:.1}%", 100.0 * g)).collect::<Vec<_>>()
        ),
    }
}

fn mcar_no_harm() -> Outcome {
    let results = run_cells(&seed_grid(Mechanism::Mcar), 0).unwrap();
    let ratios: Vec<f64> = results
        .iter()
        .map(|r| {
            let rep = r.report.as_ref().expect("cell ran");
            rep.imputation_rmse / rep.seed_rmse
        })
        .collect();
    let ok = ratios.iter().filter(|r| **r <= 1.05).count();
    Outcome {
        pass: ok == 5,
        detail: format!(
            "refined/seed within 1.05 in {ok}/5 (ratios {:?})",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    }
}

fn edge_separation() -> Outcome {
    let scm = location_scm();
    let target = 4;
    let cause = scm.parents(target)[0];
    let cfg = LocationConfig::default();
    let rows: Vec<_> = (0..3)
        .map(|s| location_run(&scm, target, cause, &cfg, s).unwrap())
        .collect();
    let parent = mean(&rows.iter().map(|r| r.parent_weight).collect::<Vec<_>>());
    let other = mean(&rows.iter().map(|r| r.nonparent_weight).collect::<Vec<_>>());
    Outcome {
        pass: parent >= 3.0 * other,
        detail: format!(
            "parent weight {parent:.3}, non-parent weight {other:.3}, ratio {:.2} (need >= 3)",
            parent / other
        ),
    }
}

fn convergence_trend() -> Outcome {
    let scores = edge_recovery_by_size(
        &[100, 1000, 5000],
        10,
        Mechanism::Mar,
        &TrainConfig::default(),
        &[0, 1, 2],
        0,
    )
    .unwrap();
    let increasing = scores.windows(2).all(|w| w[1].1 > w[0].1);
    Outcome {
        pass: increasing,
        detail: format!(
            "edge recovery {}",
            scores
                .iter()
                .map(|(n, s)| format!("n={n}: {s:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn ablation_ordering() -> Outcome {
    let variants = [
        LossTerms {
            l1: false,
            r1: true,
            r2: true,
        },
        LossTerms {
            l1: true,
            r1: false,
            r2: true,
        },
        LossTerms {
            l1: true,
            r1: true,
            r2: false,
        },
        LossTerms::default(),
    ];
    let cells: Vec<CellConfig> = variants
        .iter()
        .flat_map(|&terms| {
            (0..5).map(move |s| {
                let mut cell = CellConfig::new(1000, 10, Mechanism::Mar, 0.3, s);
                cell.refine = Some(TrainConfig {
                    seed: s,
                    terms,
                    ..TrainConfig::default()
                });
                cell
            })
        })
        .collect();
    let results = run_cells(&cells, 0).unwrap();
    let means: Vec<f64> = results
        .chunks(5)
        .map(|c| {
            mean(
                &c.iter()
                    .map(|r| r.report.as_ref().expect("cell ran").imputation_rmse)
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let full = means[3];
    Outcome {
        pass: means[..3].iter().all(|m| full < *m),
        detail: variants
            .iter()
            .zip(&means)
            .map(|(t, m)| format!("{} {m:.4}", t.label()))
            .collect::<Vec<_>>()
            .join(", "),
    }
}

fn amputation_calibration() -> Outcome {
    let scm = generate_scm(10, 8).unwrap();
    let data = sample_scm(&scm, 10_000, 8).unwrap();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for mechanism in [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar] {
        let (amputed, plan) = ampute_with_plan(&data, &AmputeSpec::new(mechanism, 0.3), 8).unwrap();
        let rates = miracle::synth::missing_rates(&amputed);
        let dev = plan.targets.iter().map(|&t| (rates[t] - 0.3).abs()).fold(0.0, f64::max);
        worst = worst.max(dev);
        parts.push(format!("{mechanism} {dev:.4} over {} features", plan.targets.len()));
    }
    Outcome {
        pass: worst <= 0.02,
        detail: format!("max |rate - 0.30|: {}", parts.join(", ")),
    }
}

fn structural_masks() -> Outcome {
    let scm = generate_scm(6, 4).unwrap();
    let data = sample_scm(&scm, 300, 4).unwrap();
    let spec = AmputeSpec::new(Mechanism::Mar, 0.3).with_protected(scm.roots());
    let (amputed, _) = ampute_with_plan(&data, &spec, 4).unwrap();
    let seed = impute_mean(&amputed).unwrap();
    let cfg = TrainConfig {
        max_epochs: 60,
        ..TrainConfig::default()
    };
    let out = train(&amputed, &seed, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = Array1::from_shape_fn(6, |_| rng.random_range(-3.0..3.0));
        worst = worst.max(common::masked_sensitivity(&out.params, &x, 1e-5));
    }
    let observed_exact = amputed
        .mask()
        .indexed_iter()
        .filter(|(_, m)| **m)
        .all(|((i, j), _)| out.imputed.values[[i, j]].to_bits() == amputed.values()[[i, j]].to_bits());
    Outcome {
        pass: worst <= 1e-10 && observed_exact,
        detail: format!("max masked derivative {worst:.1e}, observed entries exact: {observed_exact}"),
    }
}

fn desk_scale() -> Outcome {
    let scm = generate_scm(20, 10).unwrap();
    let data = sample_scm(&scm, 1000, 10).unwrap();
    let spec = AmputeSpec::new(Mechanism::Mar, 0.3).with_protected(scm.roots());
    let (amputed, _) = ampute_with_plan(&data, &spec, 10).unwrap();
    let seed = impute_mean(&amputed).unwrap();
    // zero tolerance forces all 300 epochs
    let cfg = TrainConfig {
        tolerance: 0.0,
        ..TrainConfig::default()
    };
    let out = train(&amputed, &seed, &cfg).unwrap();
    Outcome {
        pass: out.log.len() == 300,
        detail: format!("{} epochs at d=20, n=1000", out.log.len()),
    }
}

fn main() {
    // `cargo test` passes harness flags such as `--list`; listing reports nothing
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 10] = [
        ("gradient oracle", 10, gradient_oracle),
        ("acyclicity oracle", 5, acyclicity_oracle),
        ("MAR improvement", 600, improvement_mar),
        ("MCAR no-harm", 600, mcar_no_harm),
        ("edge-weight separation", 300, edge_separation),
        ("edge recovery grows with n", 900, convergence_trend),
        ("ablation ordering", 1800, ablation_ordering),
        ("amputation calibration", 60, amputation_calibration),
        ("structural masks", 60, structural_masks),
        ("desk-scale runtime", 120, desk_scale),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let out = timed(Duration::from_secs(*limit), run);
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name}: {}", i + 1, out.detail);
        failed += usize::from(!out.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
