use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use sparsefit_core::lla::{self, LlaOptions};
use sparsefit_core::lqa::{self, LqaOptions};
use sparsefit_core::rng::{stream, Purpose};
use sparsefit_core::subset::{self, Criterion, SubsetScorer};
use sparsefit_core::wlasso::{self, WlassoOptions, WlassoProblem};
use sparsefit_core::{glm, Dataset, Family, Matrix, Penalty};

fn normal_matrix(n: usize, p: usize, seed: u64) -> Matrix {
    let mut r = stream(seed, 0, Purpose::Data);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| r.sample(StandardNormal)).collect())
        .collect();
    Matrix::from_rows(&rows)
}

fn random_dataset(n: usize, beta: &[f64], family: Family, intercept: bool, seed: u64) -> Dataset {
    let x = normal_matrix(n, beta.len(), seed);
    let eta = x.mul_vec(beta);
    let mut r = stream(seed, 1, Purpose::Data);
    let y = eta
        .iter()
        .map(|&e| match family {
            Family::Gaussian => e + r.sample::<f64, _>(StandardNormal),
            Family::Logistic => f64::from(u8::from(r.random::<f64>() < 1.0 / (1.0 + (-e).exp()))),
            Family::Poisson => {
                // inversion sampling keeps the test free of extra distributions
                let mu = e.exp();
                let u: f64 = r.random();
                let (mut k, mut pk) = (0.0, (-mu).exp());
                let mut cdf = pk;
                while u > cdf && k < 1000.0 {
                    k += 1.0;
                    pk *= mu / k;
                    cdf += pk;
                }
                k
            }
        })
        .collect();
    Dataset::new(x, y, family, intercept).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coordinate_descent_objective_never_increases(seed in any::<u64>(), lam in 0.01f64..5.0) {
        let x = normal_matrix(30, 6, seed);
        let y: Vec<f64> = normal_matrix(30, 1, seed ^ 1).col(0).to_vec();
        let prob = WlassoProblem::new(x, y, vec![lam; 6]).unwrap();
        let opts = WlassoOptions { record_objective: true, ..WlassoOptions::default() };
        let sol = wlasso::solve_with(&prob, &opts, None).unwrap();
        for w in sol.sweep_objectives.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10 * (1.0 + w[0].abs()));
        }
        prop_assert!(sol.kkt_residual <= 1e-6);
    }

    #[test]
    fn one_step_matches_direct_weighted_lasso(
        seed in any::<u64>(),
        fam in 0usize..3,
        pen in 0usize..3,
        lam in 0.02f64..0.6,
    ) {
        let family = [Family::Gaussian, Family::Logistic, Family::Poisson][fam];
        let beta = [1.0, 0.5, 0.0, 0.0, -0.6];
        let n = if family == Family::Logistic { 200 } else { 80 };
        let d = random_dataset(n, &beta, family, true, seed);
        let p = match pen {
            0 => Penalty::scad(lam, 3.7).unwrap(),
            1 => Penalty::lq(lam, 0.5).unwrap(),
            _ => Penalty::log(lam * 0.2).unwrap(),
        };
        let Ok(b0) = glm::fit_mle(&d) else { return Ok(()) };
        let fit = lla::one_step(&d, &p, Some(&b0)).unwrap();
        let naive = lla::naive_problem(&d, &p, &b0).unwrap();
        let direct = wlasso::solve(&naive, 1e-11).unwrap();
        for (a, b) in fit.beta.iter().zip(&direct.beta) {
            prop_assert!((a - b).abs() <= 1e-6, "{:?} vs {:?}", fit.beta, direct.beta);
        }
        prop_assert!(lla::one_step_kkt(&d, &p, &b0, &fit.beta).unwrap() <= 1e-6);
    }

    #[test]
    fn full_lla_ascends(seed in any::<u64>(), logistic in any::<bool>(), lam in 0.02f64..0.5) {
        let family = if logistic { Family::Logistic } else { Family::Gaussian };
        let d = random_dataset(100, &[1.5, 0.0, -1.0, 0.0, 0.5, 0.0], family, false, seed);
        let p = Penalty::scad(lam, 3.7).unwrap();
        if let Ok(fit) = lla::full_lla(&d, &p, None, &LlaOptions::default()) {
            for w in fit.objective_trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-8);
            }
        }
    }

    #[test]
    fn tangent_line_majorizes(t0 in 0.001f64..12.0, t in 0.0f64..12.0, q in 0.05f64..0.95) {
        for p in [Penalty::scad(2.0, 3.7).unwrap(), Penalty::lq(2.0, q).unwrap(), Penalty::l1(1.0).unwrap()] {
            let line = p.lla_line(t0, t);
            prop_assert!(line >= p.value(t) - 1e-10);
            prop_assert!(p.lqa_quadratic(t0, t) >= line - 1e-10);
        }
    }

    #[test]
    fn perturbed_lqa_ascends(seed in any::<u64>(), lam in 0.05f64..0.8, scad in any::<bool>()) {
        let d = random_dataset(60, &[2.0, 0.0, 1.0, 0.0], Family::Gaussian, false, seed);
        let p = if scad { Penalty::scad(lam, 3.7).unwrap() } else { Penalty::l1(lam).unwrap() };
        let opts = LqaOptions { max_iter: 200, ..LqaOptions::default() };
        let fit = match lqa::perturbed_lqa_fit(&d, &p, None, Some(1e-3), &opts) {
            Ok(f) => f,
            Err(sparsefit_core::Error::NonConvergence { partial: Some(f), .. }) => *f,
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        for w in fit.objective_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-8 * (1.0 + w[0].abs()));
        }
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences(seed in any::<u64>(), fam in 0usize..3) {
        let family = [Family::Gaussian, Family::Logistic, Family::Poisson][fam];
        let d = random_dataset(40, &[0.5, -0.3, 0.2], family, true, seed);
        let b = [0.1, 0.3, -0.2, 0.05];
        let g = glm::gradient(&d, &b).unwrap();
        let h = glm::neg_hessian(&d, &b).unwrap();
        let eps = 1e-5;
        for j in 0..4 {
            let mut up = b;
            let mut dn = b;
            up[j] += eps;
            dn[j] -= eps;
            let fd = (glm::loglik(&d, &up).unwrap() - glm::loglik(&d, &dn).unwrap()) / (2.0 * eps);
            prop_assert!((fd - g[j]).abs() <= 1e-5 * (1.0 + g[j].abs()));
            let gu = glm::gradient(&d, &up).unwrap();
            let gd = glm::gradient(&d, &dn).unwrap();
            for i in 0..4 {
                let fd = -(gu[i] - gd[i]) / (2.0 * eps);
                prop_assert!((fd - h.get(i, j)).abs() <= 1e-5 * (1.0 + h.get(i, j).abs()));
            }
        }
    }

    #[test]
    fn best_subset_beats_every_enumerated_subset(seed in any::<u64>(), p in 1usize..7, bic in any::<bool>()) {
        let beta: Vec<f64> = (0..p).map(|j| if j % 2 == 0 { 0.8 } else { 0.0 }).collect();
        let d = random_dataset(40, &beta, Family::Gaussian, true, seed);
        let criterion = if bic { Criterion::Bic } else { Criterion::Aic };
        let fit = subset::best_subset(&d, criterion, 20).unwrap();
        let n = d.n() as f64;
        let cost = criterion.cost(d.n());
        // independent re-enumeration through least squares on explicit columns
        let score = |mask: usize| {
            let cols: Vec<usize> = std::iter::once(0).chain((0..p).filter(|j| mask >> j & 1 == 1).map(|j| j + 1)).collect();
            let x = d.design().select_columns(&cols);
            let (b, _) = sparsefit_core::linalg::least_squares(&x, d.response());
            let fitted = x.mul_vec(&b);
            let rss: f64 = fitted.iter().zip(d.response()).map(|(f, y)| (y - f) * (y - f)).sum();
            -n * (rss / n).ln() - cost * f64::from(mask.count_ones())
        };
        let chosen: usize = fit.support.iter().map(|j| 1 << j).sum();
        let best = score(chosen);
        for m in 0..1usize << p {
            prop_assert!(best >= score(m) - 1e-8);
        }
        let scorer = SubsetScorer::new(&d, criterion, 20).unwrap();
        prop_assert!((scorer.score(chosen as u64).unwrap() - best).abs() < 1e-8);
    }
}

#[test]
fn lqa_and_perturbed_lqa_agree_when_well_separated() {
    // orthonormal columns with every coefficient far from its threshold
    let x = Matrix::from_rows(&[
        vec![1.0, 1.0, 1.0],
        vec![1.0, -1.0, -1.0],
        vec![-1.0, 1.0, -1.0],
        vec![-1.0, -1.0, 1.0],
    ]);
    let y = x.mul_vec(&[6.0, -3.0, 0.2]);
    let d = Dataset::new(x, y, Family::Gaussian, false).unwrap();
    let p = Penalty::scad(1.0, 3.7).unwrap();
    let opts = LqaOptions { tol: 1e-12, max_iter: 5000, ..LqaOptions::default() };
    let a = lqa::lqa_fit(&d, &p, None, Some(1e-12), &opts).unwrap();
    let b = lqa::perturbed_lqa_fit(&d, &p, None, Some(1e-10), &opts).unwrap();
    assert_eq!(a.support, b.support);
    for (u, v) in a.beta.iter().zip(&b.beta) {
        assert!((u - v).abs() < 1e-4, "{:?} vs {:?}", a.beta, b.beta);
    }
}

#[test]
fn lqa_never_reintroduces_deleted_coordinates() {
    let d = random_dataset(50, &[2.0, 0.0, 0.0, 1.0, 0.0], Family::Gaussian, false, 4);
    let p = Penalty::scad(0.3, 3.7).unwrap();
    let b0 = glm::fit_mle(&d).unwrap();
    let opts = LqaOptions::default();
    let full = lqa::lqa_fit(&d, &p, Some(&b0), None, &opts).unwrap();
    let dropped: Vec<usize> = (0..5).filter(|j| !full.support.contains(j)).collect();
    assert!(!dropped.is_empty());
    // starting with a dropped coordinate already below eps0 keeps it out
    let mut start = b0.clone();
    start[full.support[0]] = 1e-12;
    let refit = lqa::lqa_fit(&d, &p, Some(&start), Some(1e-9), &opts).unwrap();
    assert!(!refit.support.contains(&full.support[0]));
}
