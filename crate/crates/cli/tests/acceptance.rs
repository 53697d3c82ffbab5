//! End-to-end acceptance checks, one line per criterion.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windcast::arma::{check_stationarity, estimate_arma, simulate_arma, ArmaModel, StationarityMethod};
use windcast::evaluation::{coefficient_of_efficiency, correlation_r, mse, persistence_baseline};
use windcast::neuralnet::{
    init_network, train_lm, train_scg, Activation, Layer, MlpNetwork, NetworkConfig, Samples, TrainParams, Trainer,
};
use windcast::polyfit::{eval_polynomial, fit_polynomial, PolynomialModel};
use windcast::SupervisedSet;
use windcast_cli::commands::{cmd_compare, cmd_simulate};
use windcast_cli::{GeneratorSpec, RunConfig};

type Outcome = Result<String, String>;
type Check<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, pass: String, fail: String) -> Outcome {
    if cond {
        Ok(pass)
    } else {
        Err(fail)
    }
}

fn within(elapsed: Duration, limit_secs: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_secs {
        Ok(())
    } else {
        Err(format!("took {:.2} s, limit {limit_secs} s", elapsed.as_secs_f64()))
    }
}

fn horner(coefficients: &[f64], y: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &a| acc * y + a)
}

fn polynomial_recovery() -> Outcome {
    let truth = [1.8542, 0.3815, 0.0555, -0.0018];
    let start = Instant::now();
    let x: Vec<f64> = (0..60).map(|i| 0.3 * i as f64).collect();
    let pairs = SupervisedSet {
        num_lags: 1,
        horizon_steps: 2,
        inputs: x.iter().map(|&v| vec![v]).collect(),
        targets: x.iter().map(|&v| horner(&truth, v)).collect(),
    };
    let model = fit_polynomial(&pairs, 3).map_err(|e| e.to_string())?;
    within(start.elapsed(), 1.0)?;
    let worst = model
        .coefficients
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    check(
        worst < 1e-6,
        format!("max coefficient error {worst:.2e} in {:.3} s", start.elapsed().as_secs_f64()),
        format!("max coefficient error {worst:.2e}"),
    )
}

fn polynomial_fixture() -> Outcome {
    let model = PolynomialModel {
        degree: 2,
        coefficients: vec![0.7173, 0.8930, 0.0045],
        horizon_steps: 1,
        train_mse: 0.0,
        train_r: None,
    };
    let got = eval_polynomial(&model, 10.0);
    let oracle = 0.7173 + 0.8930 * 10.0 + 0.0045 * 100.0;
    check(
        (got - 10.0973).abs() <= 1e-10 && (got - oracle).abs() <= 1e-12,
        format!("eval(10) = {got}"),
        format!("eval(10) = {got}, expected 10.0973"),
    )
}

fn arma_recovery() -> Outcome {
    let truth = ArmaModel::new(vec![0.9876], vec![0.2108], 0.0, 1.0).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let x = simulate_arma(&truth, 20_000, 2024).map_err(|e| e.to_string())?;
    let fit = estimate_arma(&x, 1, 1).map_err(|e| e.to_string())?;
    within(start.elapsed(), 10.0)?;
    let (psi, phi) = (fit.model.ar_coeffs[0], fit.model.ma_coeffs[0]);
    check(
        (psi - 0.9876).abs() <= 0.05 && (phi - 0.2108).abs() <= 0.05,
        format!("ψ₁ = {psi:.4}, φ₁ = {phi:.4} in {:.2} s", start.elapsed().as_secs_f64()),
        format!("ψ₁ = {psi:.4}, φ₁ = {phi:.4}"),
    )
}

fn arma_forecast_fixture() -> Outcome {
    let model = ArmaModel::new(vec![0.9876], vec![0.2108], 0.0, 1.0).map_err(|e| e.to_string())?;
    let f = model.forecast_from_state(&[1.0], &[0.5], 2);
    let one = 0.9876 * 1.0 - 0.2108 * 0.5;
    let two = 0.9876 * one;
    check(
        (f[0] - 0.8822).abs() < 1e-4 && (f[1] - 0.8713).abs() < 1e-4 && (f[0] - one).abs() < 1e-12 && (f[1] - two).abs() < 1e-12,
        format!("1-step {:.4}, 2-step {:.4}", f[0], f[1]),
        format!("1-step {}, 2-step {}", f[0], f[1]),
    )
}

fn stationarity() -> Outcome {
    let model = ArmaModel::new(vec![1.552, -0.5526], vec![0.788, 0.06111], 0.0, 1.0).map_err(|e| e.to_string())?;
    let magnitude = check_stationarity(&model, StationarityMethod::CoefficientMagnitude);
    let unit = check_stationarity(&model, StationarityMethod::UnitRoot);
    // Roots of 1 - 1.552 z + 0.5526 z².
    let (a, b, c) = (0.5526f64, -1.552f64, 1.0f64);
    let disc = (b * b - 4.0 * a * c).sqrt();
    let (small, large) = ((-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a));
    let roots = &unit.ar_root_moduli;
    let roots_ok = roots.len() == 2
        && (roots[0] - 1.0014).abs() < 1e-3
        && (roots[1] - 1.807).abs() < 1e-3
        && (roots[0] - small).abs() < 1e-9
        && (roots[1] - large).abs() < 1e-9;
    check(
        !magnitude.stationary && unit.stationary && roots_ok,
        format!("magnitude fails, unit root passes, roots {:.4} and {:.4}", roots[0], roots[1]),
        format!("magnitude {} unit {} roots {roots:?}", magnitude.stationary, unit.stationary),
    )
}

fn random_network(rng: &mut ChaCha8Rng, seed: u64) -> MlpNetwork {
    let kinds = [Activation::Logistic, Activation::Tanh, Activation::Identity];
    loop {
        let input_size = rng.gen_range(1..=3);
        let hidden: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(1..=4)).collect();
        let output_size = rng.gen_range(1..=2);
        let activations = (0..=hidden.len()).map(|_| kinds[rng.gen_range(0..3)]).collect();
        let config = NetworkConfig {
            input_size,
            hidden_layer_sizes: hidden,
            output_size,
            activations,
            seed,
        };
        let mut net = init_network(&config).expect("valid random config");
        if net.param_count() > 30 {
            continue;
        }
        let params: Vec<f64> = (0..net.param_count()).map(|_| rng.gen_range(-1.5..1.5)).collect();
        net.set_params(&params).expect("matching length");
        return net;
    }
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for k in 0..20 {
        let net = random_network(&mut rng, k);
        let n_in = net.input_size();
        let n_out = net.output_size();
        let inputs: Vec<Vec<f64>> = (0..5).map(|_| (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let targets: Vec<Vec<f64>> = (0..5).map(|_| (0..n_out).map(|_| rng.gen_range(0.1..0.9)).collect()).collect();
        let data = Samples::new(inputs, targets).map_err(|e| e.to_string())?;
        let grad = net.gradient(&data).map_err(|e| e.to_string())?;
        let w = net.params();
        // Half sum of squared errors, by direct forward passes.
        let half_sse = |params: &[f64]| -> f64 {
            let mut probe = net.clone();
            probe.set_params(params).expect("same layout");
            let mut total = 0.0;
            for (x, t) in data.inputs.iter().zip(&data.targets) {
                let y = probe.forward(x).expect("shapes match");
                total += y.iter().zip(t).map(|(a, b)| (b - a) * (b - a)).sum::<f64>();
            }
            0.5 * total
        };
        for i in 0..w.len() {
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (half_sse(&plus) - half_sse(&minus)) / (2.0 * h);
            let scale = grad[i].abs().max(fd.abs());
            let rel = if scale == 0.0 { 0.0 } else { (grad[i] - fd).abs() / scale };
            worst = worst.max(rel);
        }
    }
    within(start.elapsed(), 5.0)?;
    check(
        worst < 1e-5,
        format!("worst relative error {worst:.2e} over 20 networks"),
        format!("worst relative error {worst:.2e}"),
    )
}

fn identity_neuron() -> MlpNetwork {
    MlpNetwork {
        layers: vec![Layer {
            inputs: 1,
            outputs: 1,
            weights: vec![-0.3],
            biases: vec![0.0],
            activation: Activation::Identity,
        }],
    }
}

fn trainer_convergence() -> Outcome {
    let start = Instant::now();
    let inputs: Vec<Vec<f64>> = (0..=10).map(|i| vec![i as f64 / 10.0]).collect();
    let targets = inputs.iter().map(|x| vec![0.5 * x[0] + 0.2]).collect();
    let affine = Samples::new(inputs, targets).map_err(|e| e.to_string())?;
    let params = |algorithm, max_epochs| TrainParams {
        algorithm,
        max_epochs,
        validation_fraction: 0.0,
        ..TrainParams::default()
    };

    let (_, lm) = train_lm(&identity_neuron(), &affine, &params(Trainer::LevenbergMarquardt, 100)).map_err(|e| e.to_string())?;
    let (_, scg) = train_scg(&identity_neuron(), &affine, &params(Trainer::ScaledConjugateGradient, 200)).map_err(|e| e.to_string())?;

    let xor = Samples::new(
        vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
        vec![vec![0.1], vec![0.9], vec![0.9], vec![0.1]],
    )
    .map_err(|e| e.to_string())?;
    let mut solved = 0;
    for seed in 0..10 {
        let net = init_network(&NetworkConfig {
            input_size: 2,
            hidden_layer_sizes: vec![2],
            output_size: 1,
            activations: vec![Activation::Logistic, Activation::Logistic],
            seed,
        })
        .map_err(|e| e.to_string())?;
        if let Ok((_, report)) = train_lm(&net, &xor, &params(Trainer::LevenbergMarquardt, 1000)) {
            if report.final_train_mse < 0.01 {
                solved += 1;
            }
        }
    }
    within(start.elapsed(), 30.0)?;
    let detail = format!(
        "LM {:.1e} in {} epochs, SCG {:.1e} in {} epochs, XOR solved by {solved}/10 seeds",
        lm.final_train_mse, lm.epochs_run, scg.final_train_mse, scg.epochs_run
    );
    check(
        lm.final_train_mse < 1e-10 && lm.epochs_run <= 100 && scg.final_train_mse < 1e-8 && scg.epochs_run <= 200 && solved >= 1,
        detail.clone(),
        detail,
    )
}

fn metric_identities() -> Outcome {
    let obs = [3.1, 4.7, 2.2, 8.9, 5.5, 6.0];
    let affine: Vec<f64> = obs.iter().map(|o| 2.0 * o + 3.0).collect();
    let r = correlation_r(&obs, &affine).map_err(|e| e.to_string())?;
    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
    let ce = coefficient_of_efficiency(&obs, &vec![mean; obs.len()]).map_err(|e| e.to_string())?;
    let hand = mse(&[1.0, 2.0, 3.0], &[1.0, 3.0, 5.0]).map_err(|e| e.to_string())?;
    let pairs = persistence_baseline(&[1.0, 2.0, 3.0, 4.0], 1).map_err(|e| e.to_string())?;
    let persistence = mse(&pairs.observed, &pairs.predicted).map_err(|e| e.to_string())?;
    let detail = format!("r {r}, CE {ce:e}, mse {hand}, persistence {persistence}");
    check(
        (r - 1.0).abs() <= 1e-12 && ce.abs() <= 1e-12 && (hand - 5.0 / 3.0).abs() <= 1e-12 && (persistence - 1.0).abs() <= 1e-12,
        detail.clone(),
        detail,
    )
}

const BENCHMARK_SEED: u64 = 42;

fn run_benchmark(dir: &Path) -> Result<(windcast_cli::commands::CompareOutcome, Duration), String> {
    let data = dir.join("wind.csv");
    let spec = GeneratorSpec {
        seed: BENCHMARK_SEED,
        ..GeneratorSpec::wind_like()
    };
    cmd_simulate(&spec, &data).map_err(|e| e.to_string())?;
    let config = RunConfig {
        data_path: Some(data),
        horizons_hours: vec![3, 6, 12],
        seed: BENCHMARK_SEED,
        output_dir: dir.join("out"),
        ..RunConfig::default()
    };
    let start = Instant::now();
    let outcome = cmd_compare(&config).map_err(|e| e.to_string())?;
    Ok((outcome, start.elapsed()))
}

fn end_to_end_ordering(dir: &Path) -> Outcome {
    let (outcome, elapsed) = run_benchmark(dir)?;
    within(elapsed, 60.0)?;
    let m = &outcome.metrics;
    let get = |hours, family| m.mse(hours, family).ok_or(format!("no {family} score at {hours} h"));
    let baseline = get(3, "persistence")?;
    let mut lines = Vec::new();
    let mut beaten = true;
    for family in ["polynomial", "arma", "arima", "mlp"] {
        let v = get(3, family)?;
        beaten &= v < baseline;
        lines.push(format!("{family} {v:.4}"));
    }
    let (mlp4, poly4) = (get(12, "mlp")?, get(12, "polynomial")?);
    let detail = format!(
        "1-step persistence {baseline:.4} vs {}; 4-step mlp {mlp4:.4} vs polynomial {poly4:.4}; {:.2} s",
        lines.join(", "),
        elapsed.as_secs_f64()
    );
    check(beaten && mlp4 <= poly4, detail.clone(), detail)
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    run_benchmark(second)?;
    let a = std::fs::read(first.join("out/metrics.json")).map_err(|e| e.to_string())?;
    let b = std::fs::read(second.join("out/metrics.json")).map_err(|e| e.to_string())?;
    check(
        a == b,
        format!("metrics.json identical ({} bytes)", a.len()),
        "metrics.json differs between runs".into(),
    )
}

fn main() -> ExitCode {
    let first = tempfile::tempdir().expect("temp dir");
    let second = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Check> = vec![
        ("polynomial recovery", Box::new(polynomial_recovery)),
        ("polynomial fixture", Box::new(polynomial_fixture)),
        ("ARMA recovery", Box::new(arma_recovery)),
        ("ARMA forecast fixture", Box::new(arma_forecast_fixture)),
        ("stationarity diagnostics", Box::new(stationarity)),
        ("gradient check", Box::new(gradient_check)),
        ("trainer convergence", Box::new(trainer_convergence)),
        ("metric identities", Box::new(metric_identities)),
        ("end-to-end ordering", Box::new(|| end_to_end_ordering(first.path()))),
        ("determinism", Box::new(|| determinism(first.path(), second.path()))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
