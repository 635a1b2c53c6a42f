use std::f64::consts::PI;

use super::lpc::LpcModel;

/// `y[0] = x[0]`, `y[n] = x[n] - a x[n-1]`.
pub fn pre_emphasis(x: &[f64], a: f64) -> Vec<f64> {
    let mut prev = 0.0;
    x.iter()
        .map(|&s| {
            let y = s - a * prev;
            prev = s;
            y
        })
        .collect()
}

/// Lip-radiation filter `1 - d z^-1` with zero initial state.
pub fn differentiate(x: &[f64], d: f64) -> Vec<f64> {
    pre_emphasis(x, d)
}

/// Leaky integrator `1 / (1 - d z^-1)`: `y[n] = x[n] + d y[n-1]`, `y[-1] = 0`.
pub fn leaky_integrate(x: &[f64], d: f64) -> Vec<f64> {
    let mut acc = 0.0;
    x.iter()
        .map(|&s| {
            acc = s + d * acc;
            acc
        })
        .collect()
}

/// FIR prediction-error filter `A(z)`: `e[n] = x[n] + sum_k a[k] x[n-k]`.
pub fn inverse_filter(x: &[f64], model: &LpcModel) -> Vec<f64> {
    let a = &model.coeffs;
    (0..x.len())
        .map(|n| {
            let taps = a.len().min(n);
            x[n] + (0..taps).map(|k| a[k] * x[n - 1 - k]).sum::<f64>()
        })
        .collect()
}

/// IIR synthesis filter `1 / A(z)`: `y[n] = e[n] - sum_k a[k] y[n-k]`.
pub fn allpole_filter(e: &[f64], model: &LpcModel) -> Vec<f64> {
    let a = &model.coeffs;
    let mut y = Vec::with_capacity(e.len());
    for n in 0..e.len() {
        let taps = a.len().min(n);
        let feedback: f64 = (0..taps).map(|k| a[k] * y[n - 1 - k]).sum();
        y.push(e[n] - feedback);
    }
    y
}

/// Direct-form-I second order section, normalized so `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// RBJ-cookbook high-pass section (bilinear transform with prewarping).
    pub fn highpass(cutoff_hz: f64, sample_rate: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b: [
                (1.0 + cos) / 2.0 / a0,
                -(1.0 + cos) / a0,
                (1.0 + cos) / 2.0 / a0,
            ],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&s| {
                let y = self.b[0] * s + self.b[1] * x1 + self.b[2] * x2
                    - self.a[0] * y1
                    - self.a[1] * y2;
                x2 = x1;
                x1 = s;
                y2 = y1;
                y1 = y;
                y
            })
            .collect()
    }
}

/// 4th-order Butterworth high-pass as two cascaded biquads.
///
/// Section Qs are `1 / (2 cos(pi/8))` and `1 / (2 cos(3 pi/8))`, the pole-pair
/// angles of the analog 4th-order Butterworth prototype.
pub fn butterworth_highpass(x: &[f64], cutoff_hz: f64, sample_rate: f64) -> Vec<f64> {
    [PI / 8.0, 3.0 * PI / 8.0]
        .iter()
        .map(|angle| Biquad::highpass(cutoff_hz, sample_rate, 1.0 / (2.0 * angle.cos())))
        .fold(x.to_vec(), |signal, section| section.process(&signal))
}
