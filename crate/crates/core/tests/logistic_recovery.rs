//! Make-probability training against planted coefficients, an independent
//! Newton solver, the score equations and finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use shotarc::makeprob::{
    design_row_for, penalized_log_likelihood, score, train, MakeProbModel, Standardizer, TrainConfig, N_FEATURES,
};
use shotarc::ShotFactors;

const PLANTED: [f64; N_FEATURES] = [-0.6, 0.35, 0.05, 0.4, -0.7, -0.5, -0.15, 0.1, 0.2, -0.05];

struct Fixture {
    factors: Vec<ShotFactors>,
    made: Vec<bool>,
    x: Vec<[f64; N_FEATURES]>,
    y: Vec<f64>,
}

fn fixture(n: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, l, a) = (Normal::new(0.72, 0.21).unwrap(), Normal::new(0.0, 0.2).unwrap(), Normal::new(45.0, 3.5).unwrap());
    let factors: Vec<ShotFactors> = (0..n)
        .map(|_| ShotFactors { depth: d.sample(&mut rng), left_right: l.sample(&mut rng), entry_angle: a.sample(&mut rng) })
        .collect();
    let s = Standardizer::fit(&factors).unwrap();
    let x: Vec<[f64; N_FEATURES]> = factors.iter().map(|f| design_row_for(f, &s)).collect();
    let made: Vec<bool> = x
        .iter()
        .map(|row| {
            let eta: f64 = row.iter().zip(&PLANTED).map(|(a, b)| a * b).sum();
            rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())
        })
        .collect();
    let y = made.iter().map(|&m| f64::from(u8::from(m))).collect();
    Fixture { factors, made, x, y }
}

fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// Solve a small dense system by partial-pivot Gaussian elimination.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    x
}

fn information(x: &[[f64; N_FEATURES]], beta: &[f64]) -> Vec<Vec<f64>> {
    let mut h = vec![vec![0.0; N_FEATURES]; N_FEATURES];
    for row in x {
        let p = sigmoid(row.iter().zip(beta).map(|(a, b)| a * b).sum());
        for i in 0..N_FEATURES {
            for j in 0..N_FEATURES {
                h[i][j] += p * (1.0 - p) * row[i] * row[j];
            }
        }
    }
    h
}

/// Plain Newton–Raphson with the same ridge on non-intercept terms.
fn oracle_newton(x: &[[f64; N_FEATURES]], y: &[f64], lambda: f64) -> Vec<f64> {
    let mut beta = vec![0.0; N_FEATURES];
    for _ in 0..50 {
        let mut g = vec![0.0; N_FEATURES];
        for (row, yi) in x.iter().zip(y) {
            let r = yi - sigmoid(row.iter().zip(&beta).map(|(a, b)| a * b).sum());
            for j in 0..N_FEATURES {
                g[j] += r * row[j];
            }
        }
        let mut h = information(x, &beta);
        for j in 1..N_FEATURES {
            g[j] -= lambda * beta[j];
            h[j][j] += lambda;
        }
        let step = gauss_solve(h, g);
        for j in 0..N_FEATURES {
            beta[j] += step[j];
        }
        if step.iter().all(|s| s.abs() < 1e-13) {
            break;
        }
    }
    beta
}

/// Standard errors from the inverse information at `beta`.
fn standard_errors(x: &[[f64; N_FEATURES]], beta: &[f64]) -> Vec<f64> {
    let h = information(x, beta);
    (0..N_FEATURES)
        .map(|j| {
            let mut e = vec![0.0; N_FEATURES];
            e[j] = 1.0;
            gauss_solve(h.clone(), e)[j].sqrt()
        })
        .collect()
}

#[test]
fn planted_coefficients_recovered_within_three_standard_errors() {
    let f = fixture(30_000, 21);
    let model = train(&f.factors, &f.made, &TrainConfig::default()).unwrap();
    assert!(model.converged);
    let se = standard_errors(&f.x, &PLANTED);
    for j in 0..N_FEATURES {
        let z = (model.coeffs[j] - PLANTED[j]) / se[j];
        assert!(z.abs() < 3.0, "coefficient {j}: estimate {} truth {} z {z}", model.coeffs[j], PLANTED[j]);
    }
}

#[test]
fn matches_independent_newton_and_satisfies_score_equations() {
    let f = fixture(20_000, 22);
    let cfg = TrainConfig::default();
    let model = train(&f.factors, &f.made, &cfg).unwrap();
    let oracle = oracle_newton(&f.x, &f.y, cfg.lambda);
    for j in 0..N_FEATURES {
        assert!((model.coeffs[j] - oracle[j]).abs() < 1e-8, "{j}: {} vs {}", model.coeffs[j], oracle[j]);
    }
    let g = score(&f.x, &f.y, &model.coeffs, cfg.lambda);
    assert!(g.iter().all(|v| v.abs() < 1e-6), "score {g:?}");
}

#[test]
fn analytic_gradient_matches_central_differences() {
    // Relative error: max |fd − g| over max(max |g|, 1).
    let f = fixture(5_000, 23);
    let lambda = 0.3;
    for beta in [[0.0; N_FEATURES], PLANTED, [0.2, -0.4, 0.3, 0.1, -0.2, 0.5, -0.3, 0.2, 0.0, 0.1]] {
        let g = score(&f.x, &f.y, &beta, lambda);
        let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for j in 0..N_FEATURES {
            let h = 1e-5;
            let (mut up, mut dn) = (beta, beta);
            up[j] += h;
            dn[j] -= h;
            let fd = (penalized_log_likelihood(&f.x, &f.y, &up, lambda) - penalized_log_likelihood(&f.x, &f.y, &dn, lambda)) / (2.0 * h);
            assert!((fd - g[j]).abs() / scale < 1e-5, "coordinate {j}: fd {fd} analytic {}", g[j]);
        }
    }
}

#[test]
fn training_is_deterministic_and_survives_json() {
    let f = fixture(3_000, 24);
    let a = train(&f.factors, &f.made, &TrainConfig::default()).unwrap();
    let b = train(&f.factors, &f.made, &TrainConfig::default()).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    a.save(&path).unwrap();
    let c = MakeProbModel::load(&path).unwrap();
    for sf in f.factors.iter().take(50) {
        assert_eq!(a.predict(sf), c.predict(sf));
    }
}
