use approx::assert_abs_diff_eq;
use windcast::arma::{estimate_arma, fit_arima, forecast_arima, select_order, simulate_arma, ArmaModel, Criterion};
use windcast::evaluation::{compare_report, evaluate, persistence_baseline};
use windcast::neuralnet::{fit_predict_pipeline, predict_indices, recipe_for_horizon};
use windcast::polyfit::select_degree;
use windcast::series::{self, make_supervised, read_series, split_train_test, THREE_HOURS};
use windcast::TimeSeries;

fn ar1_csv(n: usize, seed: u64) -> String {
    let model = ArmaModel::new(vec![0.85], vec![], 7.0, 0.5).unwrap();
    let x = simulate_arma(&model, n, seed).unwrap();
    let mut text = String::from("timestamp,wind_speed_mps\n");
    for (i, v) in x.iter().enumerate() {
        let ts = series::format_timestamp(1_000_000_000 + THREE_HOURS * i as i64);
        text.push_str(&format!("{ts},{}\n", v.max(0.0)));
    }
    text
}

#[test]
fn csv_to_ranked_polynomial_forecast() {
    let series = read_series(ar1_csv(800, 1).as_bytes()).unwrap();
    assert_eq!(series.step_seconds, THREE_HOURS);
    let (train, test) = split_train_test(&series, 0.7).unwrap();
    assert_eq!((train.len(), test.len()), (560, 240));

    let set = make_supervised(&train.values, 1, 1).unwrap();
    let (head, tail) = set.split_tail(0.2);
    let (model, scores) = select_degree(&head, &[1, 2, 3], &tail).unwrap();
    assert_eq!(scores.len(), 3);

    let all: Vec<f64> = series.values.clone();
    let predicted: Vec<f64> = (train.len()..all.len()).map(|i| model.eval(all[i - 1])).collect();
    let poly = evaluate(&test.values, &predicted).unwrap();
    let pairs = persistence_baseline(&all, 1).unwrap();
    let skip = pairs.predicted.len() - test.len();
    let naive = evaluate(&test.values, &pairs.predicted[skip..]).unwrap();
    assert!(poly.mse < naive.mse, "{} vs {}", poly.mse, naive.mse);

    let ranked = compare_report(vec![("persistence".into(), naive), ("polynomial".into(), poly)]);
    assert_eq!(ranked[0].label, "polynomial");
}

#[test]
fn gaps_are_repaired_before_fitting() {
    let text = "timestamp,wind_speed_mps\n\
                2001-01-01T00:00:00Z,4.0\n\
                2001-01-01T03:00:00Z,\n\
                2001-01-01T06:00:00Z,6.0\n\
                2001-01-01T15:00:00Z,3.0\n\
                2001-01-01T18:00:00Z,3.5\n";
    let series = read_series(text.as_bytes()).unwrap();
    assert_eq!(series.values, vec![4.0, 5.0, 6.0, 5.0, 4.0, 3.0, 3.5]);
}

#[test]
fn order_selection_finds_a_strong_ar2() {
    let truth = ArmaModel::new(vec![0.6, 0.3], vec![], 0.0, 1.0).unwrap();
    let x = simulate_arma(&truth, 3000, 11).unwrap();
    let (fit, scores) = select_order(&x, 3, 2, Criterion::Mdl).unwrap();
    assert_eq!((fit.model.p, fit.model.q), (2, 0));
    assert_eq!(scores.len(), 12);
    assert_abs_diff_eq!(fit.model.ar_coeffs[0], 0.6, epsilon = 0.05);
    assert_abs_diff_eq!(fit.model.ar_coeffs[1], 0.3, epsilon = 0.05);
}

#[test]
fn arima_keeps_the_drift() {
    let truth = ArmaModel::new(vec![0.4], vec![], 0.0, 0.01).unwrap();
    let shocks = simulate_arma(&truth, 400, 3).unwrap();
    let mut level = 10.0;
    let walk: Vec<f64> = shocks
        .iter()
        .map(|e| {
            level += 0.25 + e;
            level
        })
        .collect();
    let fit = fit_arima(&walk, 1, 1, 0).unwrap();
    assert_abs_diff_eq!(fit.model.inner.mean, 0.25, epsilon = 0.02);
    let f = forecast_arima(&fit.model, &walk, 20).unwrap();
    let slope = (f[19] - f[9]) / 10.0;
    assert_abs_diff_eq!(slope, 0.25, epsilon = 0.02);
}

#[test]
fn arma_fit_beats_persistence_out_of_sample() {
    let truth = ArmaModel::new(vec![0.7], vec![0.3], 5.0, 1.0).unwrap();
    let x = simulate_arma(&truth, 2000, 8).unwrap();
    let fit = estimate_arma(&x[..1500], 1, 1).unwrap();
    let predicted = fit.model.ahead_forecasts(&x, 1, 1500..2000).unwrap();
    let model_mse = windcast::evaluation::mse(&x[1500..], &predicted).unwrap();
    let naive_mse = windcast::evaluation::mse(&x[1500..], &x[1499..1999]).unwrap();
    assert!(model_mse < naive_mse);
    assert_abs_diff_eq!(model_mse, 1.0, epsilon = 0.15);
}

#[test]
fn pipeline_predictions_are_reproducible_from_the_network() {
    let values: Vec<f64> = (0..300).map(|t| 6.0 + 2.0 * (t as f64 * 0.2).sin() + 0.3 * (t as f64 * 0.7).cos()).collect();
    let train = TimeSeries::new(0, THREE_HOURS, values[..210].to_vec()).unwrap();
    let test = TimeSeries::new(0, THREE_HOURS, values[210..].to_vec()).unwrap();
    let mut recipe = recipe_for_horizon(3).unwrap();
    recipe.train.max_epochs = 60;
    let out = fit_predict_pipeline(&train, &test, &recipe.config(5), &recipe.train, 1, 2, (0.1, 0.9)).unwrap();
    let again = predict_indices(&out.network, &out.scaling, &values, 1, 210..300).unwrap();
    assert_eq!(out.predictions, again);
    // Scaling is fitted on the training split only.
    let lo = train.values.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(out.scaling.source_min, lo);
    assert_eq!(out.scaling.apply(lo), 0.1);
}
