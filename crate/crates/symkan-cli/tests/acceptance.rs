//! Acceptance gate for the workspace. Each test checks one numbered
//! criterion and prints a single `criterion N: PASS` or
//! `criterion N: FAIL (...)` line before asserting, so a plain
//! `cargo test --test acceptance -- --nocapture` reads as a checklist.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use symkan::analysis::{energy_error, kendall_tau, morris, rmse, train_mlp, Mlp, MlpTrainConfig, MorrisConfig};
use symkan::data::{generate_dab, DabParams, Denormalizer, Normalizer};
use symkan::network::RegWeights;
use symkan::symbolic::{best_fit, refine, snap_network, BasisId, BasisLibrary, RefineConfig, SnapConfig};
use symkan::training::{prune, train, TrainConfig};
use symkan::unsupervised::{train_unsupervised, UnsupervisedConfig};
use symkan::{EdgeActivation, KanLayer, KanNetwork, SplineGrid};

fn verdict(n: usize, ok: bool, detail: &str) {
    if ok {
        println!("criterion {n}: PASS");
    } else {
        println!("criterion {n}: FAIL ({detail})");
        panic!("criterion {n} failed: {detail}");
    }
}

fn run_ok(args: &[&str]) -> String {
    let out: Output = Command::new(env!("CARGO_BIN_EXE_symkan"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

/// Parse `metrics.csv` and return (rmse, energy_error) for one row.
fn metrics_row(metrics: &Path, model: &str, split: &str, noise: f64) -> (f64, f64) {
    let text = std::fs::read_to_string(metrics).expect("metrics.csv readable");
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() == 5
            && cols[0] == model
            && cols[1] == split
            && cols[2].parse::<f64>().map(|v| v == noise).unwrap_or(false)
        {
            return (cols[3].parse().unwrap(), cols[4].parse().unwrap());
        }
    }
    panic!("row {model}/{split}/{noise} missing from {}", metrics.display());
}

fn shape_of(net: &KanNetwork) -> Vec<usize> {
    net.shape()
}

// ---------------------------------------------------------------------------
// criterion 1: full pipeline on the simulated converter at scale

#[test]
fn criterion_1_dab_end_to_end() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("dab.csv");
    let out = dir.path().join("run");
    run_ok(&[
        "simulate-dab",
        "--out",
        &path_str(&csv),
        "--rows",
        "50000",
        "--seed",
        "0",
    ]);
    run_ok(&[
        "train",
        "--data",
        &path_str(&csv),
        "--shape",
        "1,3,1",
        "--lambda",
        "0.01",
        "--max-steps",
        "2500",
        "--batch-size",
        "4096",
        "--train-fraction",
        "0.8",
        "--out-dir",
        &path_str(&out),
        "--seed",
        "0",
    ]);
    run_ok(&[
        "prune",
        "--data",
        &path_str(&csv),
        "--threshold",
        "0.01",
        "--out-dir",
        &path_str(&out),
        "--seed",
        "0",
    ]);
    run_ok(&[
        "symbolify",
        "--data",
        &path_str(&csv),
        "--out-dir",
        &path_str(&out),
        "--seed",
        "0",
    ]);
    run_ok(&[
        "refine",
        "--data",
        &path_str(&csv),
        "--out-dir",
        &path_str(&out),
        "--seed",
        "0",
    ]);
    run_ok(&[
        "eval",
        "--data",
        &path_str(&csv),
        "--out-dir",
        &path_str(&out),
        "--seed",
        "0",
    ]);
    let elapsed = started.elapsed();

    let net = KanNetwork::load(&out.join("model.json")).unwrap();
    let shape = shape_of(&net);
    let (test_rmse, test_ee) = metrics_row(&out.join("metrics.csv"), "KAN", "test", 0.0);
    let ok = shape == [1, 1, 1]
        && test_rmse <= 0.05
        && test_ee <= 0.05
        && elapsed.as_secs_f64() < 600.0;
    verdict(
        1,
        ok,
        &format!(
            "shape {shape:?}, test rmse {test_rmse:.4}, test ee {test_ee:.4}, {:.0} s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// criteria 2 and 4 share five seeded pipeline runs

struct SeedRun {
    seed: u64,
    inner: Option<BasisId>,
    outer: Option<BasisId>,
    inner_top: String,
    outer_top: String,
    symmetry: f64,
    kan_extrap: f64,
    mlp_extrap: f64,
}

fn seed_runs() -> &'static [SeedRun] {
    static RUNS: OnceLock<Vec<SeedRun>> = OnceLock::new();
    RUNS.get_or_init(|| (1..=5).map(run_seed).collect())
}

fn run_seed(seed: u64) -> SeedRun {
    let params = DabParams::default();
    let data = generate_dab(&params, (0.3, 0.7), 50_000, seed).unwrap();
    let (train_set, _) = data.split(0.8, seed).unwrap();

    let (norm, _) = Normalizer::fit(&train_set.xs, &train_set.feature_names).unwrap();
    let denorm = Denormalizer::fit(&train_set.ys).unwrap();
    let grid = SplineGrid::default_edge_grid();
    let mut net = KanNetwork::init(&[1, 3, 1], &grid, seed).unwrap();
    net.set_scaling(norm, denorm).unwrap();
    net.set_names(
        train_set.feature_names.clone(),
        train_set.target_name.clone(),
    )
    .unwrap();
    let zs = net.input_normalizer().apply_all(&train_set.xs);
    let yn: Vec<f64> = train_set
        .ys
        .iter()
        .map(|&y| net.output_denormalizer().normalize(y))
        .collect();
    let config = TrainConfig {
        lambda: 0.01,
        max_steps: 2500,
        batch_size: Some(4096),
        seed,
        ..TrainConfig::default()
    };
    train(&mut net, &zs, &yn, &config).unwrap();
    let (mut net, _) = prune(&net, &zs, 1e-2).unwrap();
    let report = snap_network(&mut net, &zs, &SnapConfig::default()).unwrap();

    let shape = shape_of(&net);
    let (mut inner, mut outer) = (None, None);
    let (mut inner_top, mut outer_top) = (String::new(), String::new());
    if shape == [1, 1, 1] {
        for d in &report.decisions {
            let basis = d.chosen.as_ref().map(|f| f.basis);
            let top: Vec<String> = d
                .candidates
                .iter()
                .take(3)
                .map(|f| format!("{:?} res {:.1e}", f.basis, 1.0 - f.r2))
                .collect();
            if d.layer == 0 {
                inner = basis;
                inner_top = top.join(", ");
            } else {
                outer = basis;
                outer_top = top.join(", ");
            }
        }
    }
    if report.fully_snapped() {
        refine(&mut net, &zs, &yn, &RefineConfig::default()).unwrap();
    }

    // symmetry of the learned map around the duty-ratio midpoint
    let mut symmetry: f64 = 0.0;
    for i in 0..=400 {
        let d = 0.3 + 0.4 * (i as f64) / 400.0;
        let gap = (net.predict(&[d]).unwrap() - net.predict(&[1.0 - d]).unwrap()).abs();
        symmetry = symmetry.max(gap);
    }

    // out-of-range evaluation on both flanks of the training interval
    let lo = generate_dab(&params, (0.2, 0.3), 2_500, seed + 100).unwrap();
    let hi = generate_dab(&params, (0.7, 0.8), 2_500, seed + 200).unwrap();
    let mut ex_xs = lo.xs.clone();
    ex_xs.extend(hi.xs.iter().cloned());
    let mut ex_ys = lo.ys.clone();
    ex_ys.extend(hi.ys.iter().cloned());
    let kan_pred = net.predict_batch(&ex_xs).unwrap();
    let kan_extrap = rmse(&kan_pred, &ex_ys).unwrap();

    let mut mlp = Mlp::init(&[1, 32, 32, 1], seed).unwrap();
    let mlp_config = MlpTrainConfig {
        max_steps: 2000,
        batch_size: Some(1024),
        seed,
        ..MlpTrainConfig::default()
    };
    train_mlp(&mut mlp, &zs, &yn, &mlp_config).unwrap();
    let ex_zs = net.input_normalizer().apply_all(&ex_xs);
    let mlp_pred: Vec<f64> = mlp
        .predict_batch(&ex_zs)
        .unwrap()
        .iter()
        .map(|&y| net.output_denormalizer().denormalize(y))
        .collect();
    let mlp_extrap = rmse(&mlp_pred, &ex_ys).unwrap();

    SeedRun {
        seed,
        inner,
        outer,
        inner_top,
        outer_top,
        symmetry,
        kan_extrap,
        mlp_extrap,
    }
}

#[test]
fn criterion_2_formula_shape_recovery() {
    let sigmoid_family = [BasisId::Arctan, BasisId::Tanh, BasisId::Sigmoid];
    let mut matches = 0;
    let mut lines = Vec::new();
    for run in seed_runs() {
        let bases_ok = run.inner == Some(BasisId::Square)
            && run.outer.map(|b| sigmoid_family.contains(&b)).unwrap_or(false);
        let sym_ok = run.symmetry <= 0.1;
        if bases_ok && sym_ok {
            matches += 1;
        }
        lines.push(format!(
            "seed {}: inner {:?} [{}], outer {:?} [{}], asymmetry {:.3} V",
            run.seed, run.inner, run.inner_top, run.outer, run.outer_top, run.symmetry
        ));
    }
    verdict(
        2,
        matches >= 3,
        &format!("{matches} of 5 seeds recovered the shape; {}", lines.join("; ")),
    );
}

#[test]
fn criterion_3_pointwise_cross_check() {
    // the distilled two-stage formula for the C=2 converter, evaluated
    // as a fixed symbolic network with no input or output rescaling
    let inner = KanLayer::new(
        1,
        1,
        vec![EdgeActivation::Symbolic {
            basis: BasisId::Square,
            a: 1.0,
            b: -0.5,
            c: 8.7,
            d: -1.21,
        }],
    )
    .unwrap();
    let outer = KanLayer::new(
        1,
        1,
        vec![EdgeActivation::Symbolic {
            basis: BasisId::Arctan,
            a: 1.0,
            b: 0.0,
            c: 9.04,
            d: 15.96,
        }],
    )
    .unwrap();
    let net = KanNetwork::new(
        vec![inner, outer],
        Normalizer::identity(1),
        Denormalizer::identity(),
        vec!["D".into()],
        "V_out".into(),
    )
    .unwrap();

    let params = DabParams::default();
    let at_half = net.predict(&[0.5]).unwrap();
    let at_third = net.predict(&[0.3]).unwrap();
    let oracle_half = params.output_voltage(0.5);
    let oracle_third = params.output_voltage(0.3);
    let ok = (at_half - 8.01).abs() <= 0.01
        && (at_third - 9.53).abs() <= 0.02
        && (at_half - oracle_half).abs() <= 0.05
        && (at_third - oracle_third).abs() <= 0.05;
    verdict(
        3,
        ok,
        &format!(
            "f(0.5) = {at_half:.4} vs oracle {oracle_half:.4}, f(0.3) = {at_third:.4} vs oracle {oracle_third:.4}"
        ),
    );
}

#[test]
fn criterion_4_kan_extrapolates_better_than_mlp() {
    let mut wins = 0;
    let mut lines = Vec::new();
    for run in seed_runs() {
        if run.kan_extrap < run.mlp_extrap {
            wins += 1;
        }
        lines.push(format!(
            "seed {}: kan {:.3} V vs mlp {:.3} V",
            run.seed, run.kan_extrap, run.mlp_extrap
        ));
    }
    verdict(
        4,
        wins >= 4,
        &format!("{wins} of 5 seeds; {}", lines.join("; ")),
    );
}

// ---------------------------------------------------------------------------
// criterion 5: noise robustness comparison table

#[test]
fn criterion_5_noise_robustness_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("dab.csv");
    let out = dir.path().join("run");
    run_ok(&[
        "simulate-dab",
        "--out",
        &path_str(&csv),
        "--rows",
        "8000",
        "--seed",
        "11",
    ]);
    run_ok(&[
        "train",
        "--data",
        &path_str(&csv),
        "--shape",
        "1,3,1",
        "--max-steps",
        "1200",
        "--batch-size",
        "2048",
        "--out-dir",
        &path_str(&out),
        "--seed",
        "11",
    ]);
    let stdout = run_ok(&[
        "eval",
        "--data",
        &path_str(&csv),
        "--noise",
        "0.1",
        "--with-mlp",
        "--max-steps",
        "1200",
        "--out-dir",
        &path_str(&out),
        "--seed",
        "11",
    ]);

    // the table must list both models, clean before noisy
    let rows: Vec<&str> = stdout
        .lines()
        .filter(|l| l.starts_with("KAN") || l.starts_with("MLP"))
        .collect();
    let layout_ok = rows.len() == 4
        && rows[0].starts_with("KAN") && rows[0].contains("clean")
        && rows[1].starts_with("KAN") && rows[1].contains("noisy")
        && rows[2].starts_with("MLP") && rows[2].contains("clean")
        && rows[3].starts_with("MLP") && rows[3].contains("noisy");

    let metrics = out.join("metrics.csv");
    let (kan_clean, _) = metrics_row(&metrics, "KAN", "test", 0.0);
    let (kan_noisy, _) = metrics_row(&metrics, "KAN", "test", 0.1);
    let (mlp_noisy, _) = metrics_row(&metrics, "MLP", "test", 0.1);
    let ok = layout_ok && kan_noisy >= 10.0 * kan_clean && mlp_noisy >= 10.0 * kan_clean;
    verdict(
        5,
        ok,
        &format!(
            "table rows {}, kan clean {kan_clean:.4}, kan noisy {kan_noisy:.4}, mlp noisy {mlp_noisy:.4}",
            rows.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 6: unsupervised dependency discovery

#[test]
fn criterion_6_unsupervised_selection() {
    let mut hits = 0;
    let mut lines = Vec::new();
    for seed in 1..=5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut xs = Vec::with_capacity(800);
        for _ in 0..800 {
            let x0: f64 = rng.gen_range(-1.0..1.0);
            let mut row = vec![x0, (3.0 * x0).sin(), x0 * x0];
            for _ in 0..4 {
                row.push(rng.gen_range(-1.0..1.0));
            }
            xs.push(row);
        }
        let names: Vec<String> = (0..7).map(|i| format!("x{i}")).collect();
        let config = UnsupervisedConfig {
            mid_width: 1,
            train: TrainConfig {
                lambda: 0.001,
                learning_rate: 0.05,
                max_steps: 600,
                seed,
                ..TrainConfig::default()
            },
            seed,
            ..UnsupervisedConfig::default()
        };
        let (_, _, report) = train_unsupervised(&xs, &names, &config).unwrap();
        let mut top: Vec<usize> = report.ranking[..3].to_vec();
        top.sort_unstable();
        if top == [0, 1, 2] {
            hits += 1;
        }
        lines.push(format!("seed {seed}: top {:?}", &report.ranking[..3]));
    }
    verdict(
        6,
        hits >= 4,
        &format!("{hits} of 5 seeds ranked the three drivers first; {}", lines.join("; ")),
    );
}

// ---------------------------------------------------------------------------
// criterion 7: snapping recovers every recoverable basis

#[test]
fn criterion_7_snapping_oracle_suite() {
    // Constant is skipped because (a, b) is unidentifiable for it, and
    // Reciprocal, Sqrt, Log and Tan are skipped because their singular
    // or one-sided domains reject the shared sampling interval.
    let cases: [(BasisId, f64, f64, f64, f64); 11] = [
        (BasisId::Identity, 1.3, 0.2, 2.0, -0.5),
        (BasisId::Square, 1.5, -0.3, 1.2, 0.4),
        (BasisId::Cube, 1.1, 0.1, 0.8, -0.2),
        (BasisId::Exp, 1.0, 0.0, 0.7, 0.3),
        (BasisId::Sin, 2.2, 0.4, 1.5, 0.1),
        (BasisId::Cos, 2.0, -0.2, 1.3, -0.4),
        (BasisId::Arctan, 2.5, 0.0, 1.8, 0.2),
        (BasisId::Tanh, 2.0, 0.3, 1.4, -0.1),
        (BasisId::Sigmoid, 3.0, -0.4, 2.2, 0.5),
        (BasisId::Gaussian, 1.8, 0.2, 1.6, -0.3),
        (BasisId::Abs, 1.4, -0.1, 1.1, 0.6),
    ];
    // sin and cos are exact phase shifts of each other and tanh is an
    // exact affine image of sigmoid, so either member may win those fits
    let equivalent = |want: BasisId, got: BasisId| {
        want == got
            || matches!(
                (want, got),
                (BasisId::Sin, BasisId::Cos)
                    | (BasisId::Cos, BasisId::Sin)
                    | (BasisId::Tanh, BasisId::Sigmoid)
                    | (BasisId::Sigmoid, BasisId::Tanh)
            )
    };

    let library = BasisLibrary::full();
    let noise = Normal::new(0.0, 1e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    for (basis, a, b, c, d) in cases {
        let mut xs = Vec::with_capacity(400);
        let mut ys = Vec::with_capacity(400);
        for i in 0..400 {
            let x = -1.0 + 2.0 * (i as f64) / 399.0;
            xs.push(x);
            ys.push(c * basis.eval(a * x + b) + d + noise.sample(&mut rng));
        }
        match best_fit(&library, &xs, &ys).unwrap() {
            Some(fit) if equivalent(basis, fit.basis) && fit.r2 > 0.99 => {}
            Some(fit) => failures.push(format!(
                "{basis:?} snapped to {:?} with r2 {:.4}",
                fit.basis, fit.r2
            )),
            None => failures.push(format!("{basis:?} produced no fit")),
        }
    }
    verdict(
        7,
        failures.is_empty(),
        &format!("{} of 11 bases failed: {}", failures.len(), failures.join("; ")),
    );
}

// ---------------------------------------------------------------------------
// criterion 8: numerical invariants

#[test]
fn criterion_8_numerical_invariants() {
    let mut problems = Vec::new();

    // B-spline partition of unity across grid shapes and sample points
    for (intervals, order) in [(5usize, 3usize), (8, 3), (10, 2), (4, 1)] {
        let grid = SplineGrid::new(-1.0, 1.0, intervals, order).unwrap();
        for i in 0..=200 {
            let x = -1.0 + 2.0 * (i as f64) / 200.0;
            let total: f64 = grid.basis_values(x).iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                problems.push(format!(
                    "partition of unity off by {:.2e} at x {x:.3} on grid {intervals}/{order}",
                    (total - 1.0).abs()
                ));
            }
        }
    }

    // analytic gradients against central finite differences
    let reg = RegWeights {
        lambda: 0.01,
        mu1: 1.0,
        mu2: 1.0,
    };
    let grid = SplineGrid::new(-1.0, 1.0, 5, 3).unwrap();
    for (shape, seed) in [
        (vec![1usize, 3, 1], 31u64),
        (vec![2, 5, 1], 32),
        (vec![3, 7, 1], 33),
    ] {
        let net = KanNetwork::init(&shape, &grid, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let xs: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..shape[0]).map(|_| rng.gen_range(-0.9..0.9)).collect())
            .collect();
        let ys: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grad) = net.loss_and_grad(&xs, &ys, Some(&reg)).unwrap();
        let params = net.params();
        let h = 1e-5;
        let mut probe = net.clone();
        for p in 0..params.len() {
            let mut plus = params.clone();
            plus[p] += h;
            probe.set_params(&plus).unwrap();
            let (lp, _) = probe.loss_and_grad(&xs, &ys, Some(&reg)).unwrap();
            let mut minus = params.clone();
            minus[p] -= h;
            probe.set_params(&minus).unwrap();
            let (lm, _) = probe.loss_and_grad(&xs, &ys, Some(&reg)).unwrap();
            let fd = (lp.total - lm.total) / (2.0 * h);
            let tol = 1e-4 * grad[p].abs().max(fd.abs()) + 1e-8;
            if (grad[p] - fd).abs() >= tol {
                problems.push(format!(
                    "gradient mismatch for shape {shape:?} param {p}: {} vs fd {}",
                    grad[p], fd
                ));
            }
        }
    }

    // entropy bounds per layer on a randomly initialized network
    let net = KanNetwork::init(&[3, 5, 2], &grid, 40).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let xs: Vec<Vec<f64>> = (0..64)
        .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let stats = net.activation_stats(&xs).unwrap();
    for (l, layer) in net.layers().iter().enumerate() {
        let bound = ((layer.n_in() * layer.n_out()) as f64).ln();
        let s = stats.layer_entropy[l];
        if !(0.0..=bound + 1e-12).contains(&s) {
            problems.push(format!("layer {l} entropy {s} outside [0, {bound}]"));
        }
    }

    // RMSE dominates the mean absolute error on random vector pairs
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..1000 {
        let len = rng.gen_range(2..50);
        let a: Vec<f64> = (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let r = rmse(&a, &b).unwrap();
        let e = energy_error(&a, &b).unwrap();
        if r < e - 1e-12 {
            problems.push(format!("rmse {r} below energy error {e}"));
            break;
        }
    }

    // Kendall tau against the quadratic-time definition, ties included
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for trial in 0..25 {
        let x: Vec<f64> = (0..50).map(|_| (rng.gen_range(-5.0..5.0f64) * 2.0).round() / 2.0).collect();
        let y: Vec<f64> = (0..50).map(|_| (rng.gen_range(-5.0..5.0f64) * 2.0).round() / 2.0).collect();
        let fast = kendall_tau(&x, &y).unwrap();
        let naive = kendall_naive(&x, &y);
        if (fast - naive).abs() > 1e-12 {
            problems.push(format!(
                "kendall mismatch on trial {trial}: {fast} vs {naive}"
            ));
            break;
        }
    }

    // Morris screening recovers the coefficients of a linear map exactly
    let bounds = [(0.0, 1.0), (0.0, 1.0)];
    let result = morris(
        |x| Ok(3.0 * x[0] + x[1]),
        &bounds,
        &MorrisConfig::default(),
    )
    .unwrap();
    if (result.mu_star[0] - 3.0).abs() > 1e-9 || (result.mu_star[1] - 1.0).abs() > 1e-9 {
        problems.push(format!("morris effects {:?} instead of [3, 1]", result.mu_star));
    }
    if result.sigma.iter().any(|&s| s.abs() > 1e-9) {
        problems.push(format!("morris sigma {:?} nonzero on a linear map", result.sigma));
    }

    verdict(8, problems.is_empty(), &problems.join("; "));
}

fn kendall_naive(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut concordant, mut discordant) = (0f64, 0f64);
    let (mut ties_x, mut ties_y) = (0f64, 0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                ties_x += 1.0;
            } else if dy == 0.0 {
                ties_y += 1.0;
            } else if dx * dy > 0.0 {
                concordant += 1.0;
            } else {
                discordant += 1.0;
            }
        }
    }
    let denom =
        ((concordant + discordant + ties_x) * (concordant + discordant + ties_y)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (concordant - discordant) / denom
    }
}

// ---------------------------------------------------------------------------
// criterion 9: byte-identical stage outputs under a fixed seed

#[test]
fn criterion_9_stage_reproducibility() {
    let base = tempfile::tempdir().unwrap();

    // a small deterministic table for the label-free stage
    let unsup_csv = base.path().join("usage.csv");
    {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut text = String::from("u0,u1,u2\n");
        for _ in 0..240 {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b = a * a;
            let c: f64 = rng.gen_range(-1.0..1.0);
            text.push_str(&format!("{a:?},{b:?},{c:?}\n"));
        }
        std::fs::write(&unsup_csv, text).unwrap();
    }

    let run_stages = |tag: &str| -> PathBuf {
        let dir = base.path().join(tag);
        std::fs::create_dir_all(&dir).unwrap();
        let csv = dir.join("dab.csv");
        let out = dir.join("run");
        run_ok(&[
            "simulate-dab",
            "--out",
            &path_str(&csv),
            "--rows",
            "3000",
            "--seed",
            "17",
        ]);
        run_ok(&[
            "train", "--data", &path_str(&csv), "--shape", "1,3,1", "--max-steps", "600",
            "--batch-size", "512", "--out-dir", &path_str(&out), "--seed", "17",
        ]);
        std::fs::copy(out.join("model.json"), out.join("model_train.json")).unwrap();
        run_ok(&[
            "prune", "--data", &path_str(&csv), "--out-dir", &path_str(&out), "--seed", "17",
        ]);
        std::fs::copy(out.join("model.json"), out.join("model_prune.json")).unwrap();
        run_ok(&[
            "symbolify", "--data", &path_str(&csv), "--out-dir", &path_str(&out), "--seed", "17",
        ]);
        std::fs::copy(out.join("model.json"), out.join("model_symbolify.json")).unwrap();
        run_ok(&[
            "refine", "--data", &path_str(&csv), "--out-dir", &path_str(&out), "--seed", "17",
        ]);
        std::fs::copy(out.join("model.json"), out.join("model_refine.json")).unwrap();
        run_ok(&[
            "eval", "--data", &path_str(&csv), "--noise", "0.05", "--with-mlp",
            "--max-steps", "200", "--out-dir", &path_str(&out), "--seed", "17",
        ]);
        run_ok(&[
            "sensitivity", "--data", &path_str(&csv), "--out-dir", &path_str(&out),
            "--trajectories", "8", "--seed", "17",
        ]);
        run_ok(&[
            "correlate", "--data", &path_str(&csv), "--out-dir", &path_str(&out), "--seed", "17",
        ]);
        run_ok(&[
            "unsup-select", "--data", &path_str(&unsup_csv), "--max-steps", "150",
            "--out-dir", &path_str(&dir.join("unsup")), "--seed", "17",
        ]);
        dir
    };

    let first = run_stages("a");
    let second = run_stages("b");

    let artifacts = [
        "dab.csv",
        "run/model_train.json",
        "run/model_prune.json",
        "run/model_symbolify.json",
        "run/model_refine.json",
        "run/train_trace.csv",
        "run/prune_report.json",
        "run/snap_report.json",
        "run/formula.txt",
        "run/metrics.csv",
        "run/sensitivity.csv",
        "run/correlations.csv",
        "unsup/importance_report.json",
        "unsup/model.json",
    ];
    let mut diffs = Vec::new();
    for name in artifacts {
        let a = std::fs::read(first.join(name)).unwrap_or_default();
        let b = std::fs::read(second.join(name)).unwrap_or_default();
        if a.is_empty() || a != b {
            diffs.push(name.to_string());
        }
    }
    verdict(
        9,
        diffs.is_empty(),
        &format!("differing artifacts: {}", diffs.join(", ")),
    );
}
