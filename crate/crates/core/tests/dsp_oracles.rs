use std::f64::consts::PI;
use std::time::Instant;

use rhythmaug::dsp::{
    allpole_filter, autocorrelation, differentiate, inverse_filter, leaky_integrate, levinson_durbin,
    LpcModel,
};
use rhythmaug::rpm::Rng;
use rhythmaug::synthetic::white_noise;

/// `A(z)` coefficients (without the leading 1) of a product of conjugate pole pairs.
fn polynomial_from_poles(poles: &[(f64, f64)]) -> Vec<f64> {
    let mut poly = vec![1.0];
    for &(r, theta) in poles {
        let section = [1.0, -2.0 * r * theta.cos(), r * r];
        let mut next = vec![0.0; poly.len() + 2];
        for (i, p) in poly.iter().enumerate() {
            for (j, s) in section.iter().enumerate() {
                next[i + j] += p * s;
            }
        }
        poly = next;
    }
    poly[1..].to_vec()
}

/// Step-up recursion from reflection coefficients.
fn coeffs_from_reflection(k: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::new();
    for &km in k {
        let prev = a.clone();
        a.push(km);
        for i in 0..prev.len() {
            a[i] = prev[i] + km * prev[prev.len() - 1 - i];
        }
    }
    a
}

fn max_rel_err(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    got.iter().zip(want).fold(0.0f64, |m, (g, w)| m.max((g - w).abs())) / scale
}

#[test]
fn ar8_coefficients_are_recovered() {
    let truth = polynomial_from_poles(&[(0.9, 0.1 * PI), (0.85, 0.3 * PI), (0.8, 0.55 * PI), (0.75, 0.8 * PI)]);
    assert_eq!(truth.len(), 8);
    let excitation = white_noise(16000, 16000, 8);
    // direct recursion y[n] = e[n] - sum a[k] y[n-1-k]
    let mut y = vec![0.0; excitation.len()];
    for n in 0..y.len() {
        let mut acc = excitation.samples()[n];
        for (k, a) in truth.iter().enumerate() {
            if n > k {
                acc -= a * y[n - 1 - k];
            }
        }
        y[n] = acc;
    }

    let start = Instant::now();
    let r = autocorrelation(&y, 8).unwrap();
    let model = levinson_durbin(&r, 8).unwrap();
    let elapsed = start.elapsed();

    let err = model
        .coeffs
        .iter()
        .zip(&truth)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err <= 0.05, "L-inf error {err}");
    assert!(model.is_minimum_phase());
    assert!(elapsed.as_secs_f64() < 1.0);
}

#[test]
fn filter_pairs_invert_each_other() {
    let mut rng = Rng::new(2024);
    for case in 0..100 {
        let order = rng.uniform_int(1, 20);
        let reflection: Vec<f64> = (0..order).map(|_| rng.uniform(-0.95, 0.95)).collect();
        let model = LpcModel::from_coeffs(coeffs_from_reflection(&reflection)).unwrap();
        let len = rng.uniform_int(200, 2000);
        let x = white_noise(len, 16000, case).into_samples();

        let err = max_rel_err(&inverse_filter(&allpole_filter(&x, &model), &model), &x);
        assert!(err < 1e-9, "case {case}: allpole then inverse, error {err}");
        let err = max_rel_err(&allpole_filter(&inverse_filter(&x, &model), &model), &x);
        assert!(err < 1e-9, "case {case}: inverse then allpole, error {err}");

        let d = rng.uniform(0.5, 0.999);
        let err = max_rel_err(&differentiate(&leaky_integrate(&x, d), d), &x);
        assert!(err < 1e-9, "case {case}: leaky integrator, error {err}");
        let err = max_rel_err(&leaky_integrate(&differentiate(&x, d), d), &x);
        assert!(err < 1e-9, "case {case}: differentiator, error {err}");
    }
}

#[test]
fn step_up_matches_step_down() {
    let k = [0.5, -0.3, 0.2];
    let model = LpcModel::from_coeffs(coeffs_from_reflection(&k)).unwrap();
    for (a, b) in model.reflection.iter().zip(&k) {
        assert!((a - b).abs() < 1e-12);
    }
}
