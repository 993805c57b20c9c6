use sparsefit_core::sim::{self, Example, MethodSpec, ScenarioSpec};

fn spec(example: Example, n: usize, beta: Option<Vec<f64>>) -> ScenarioSpec {
    let mut s = ScenarioSpec::standard(example, n, vec![MethodSpec::Full]);
    if let Some(b) = beta {
        s.beta_true = b;
    }
    s
}

#[test]
fn linear_covariates_follow_ar_covariance() {
    let s = spec(Example::Linear, 1_000_000, None);
    let d = sim::gen_linear(&s, 0).unwrap();
    let x = d.design();
    let sigma = sim::ar_covariance(12, 0.5);
    let n = d.n() as f64;
    for i in 0..12 {
        for j in i..12 {
            let c: f64 = x.col(i).iter().zip(x.col(j)).map(|(a, b)| a * b).sum::<f64>() / n;
            assert!((c - sigma.get(i, j)).abs() < 0.01, "cov({i},{j}) = {c}");
        }
    }
}

#[test]
fn null_linear_response_is_standard_normal() {
    let s = spec(Example::Linear, 200_000, Some(vec![0.0; 12]));
    let d = sim::gen_linear(&s, 5).unwrap();
    let y = d.response();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    assert!(mean.abs() < 0.01 && (var - 1.0).abs() < 0.02);
}

#[test]
fn logistic_binary_columns_and_null_response() {
    let s = spec(Example::Logistic, 100_000, Some(vec![0.0; 12]));
    let d = sim::gen_logistic(&s, 2).unwrap();
    let n = d.n() as f64;
    for j in (1..12).step_by(2) {
        let col = d.design().col(j);
        assert!(col.iter().all(|&v| v == 0.0 || v == 1.0));
        let m = col.iter().sum::<f64>() / n;
        assert!((m - 0.5).abs() < 0.01, "column {j} mean {m}");
    }
    let ybar = d.response().iter().sum::<f64>() / n;
    assert!((ybar - 0.5).abs() < 0.01);
}

#[test]
fn poisson_conditional_mean_tracks_exp() {
    let s = spec(Example::Poisson, 100_000, Some(vec![0.0; 12]));
    let d = sim::gen_poisson(&s, 0).unwrap();
    let ybar = d.response().iter().sum::<f64>() / d.n() as f64;
    assert!((ybar - 1.0).abs() < 0.02);

    let s = spec(Example::Poisson, 100_000, None);
    let d = sim::gen_poisson(&s, 1).unwrap();
    let eta = d.design().mul_vec(&s.beta_true);
    // bins of width 0.5 on the linear predictor
    let mut bins = vec![(0.0, 0.0, 0usize); 8];
    for (e, y) in eta.iter().zip(d.response()) {
        let k = ((e + 2.0) / 0.5).floor();
        if (0.0..8.0).contains(&k) {
            let b = &mut bins[k as usize];
            b.0 += e.exp();
            b.1 += y;
            b.2 += 1;
        }
    }
    for (mu, y, c) in bins {
        assert!(c > 500);
        let (mu, y) = (mu / c as f64, y / c as f64);
        // five standard errors of a Poisson mean
        assert!((y - mu).abs() < 5.0 * (mu / c as f64).sqrt(), "{y} vs {mu} over {c}");
    }
}

#[test]
fn replications_are_reproducible() {
    let s = spec(Example::Poisson, 60, None);
    assert_eq!(sim::gen_poisson(&s, 9).unwrap(), sim::gen_poisson(&s, 9).unwrap());
    let mut t = s.clone();
    t.methods = vec!["one_step:log".parse().unwrap(), "bic".parse().unwrap()];
    t.replications = 3;
    assert_eq!(sim::run_scenario(&t).unwrap(), sim::run_scenario(&t).unwrap());
}

#[test]
fn logistic_model_error_uses_shared_test_points() {
    let s = spec(Example::Logistic, 200, None);
    let t1 = sim::test_design(&s, 4).unwrap();
    assert_eq!(t1, sim::test_design(&s, 4).unwrap());
    assert_eq!(t1.nrows(), 10_000);
    let b = s.beta_true.clone();
    let mut bh = b.clone();
    bh[0] += 0.5;
    let me = sim::model_error(Example::Logistic, &bh, &b, &sim::ar_covariance(12, 0.5), &t1).unwrap();
    assert!(me > 0.0 && me < 0.25);
    assert_eq!(sim::model_error(Example::Logistic, &b, &b, &sim::ar_covariance(12, 0.5), &t1).unwrap(), 0.0);
}
