use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative white-noise floor added to `r[0]` by [`lpc_analysis`].
pub const AUTOCORR_REGULARIZATION: f64 = 1e-6;

/// All-pole model `1 / A(z)` with `A(z) = 1 + sum_k coeffs[k-1] z^-k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpcModel {
    pub coeffs: Vec<f64>,
    /// Square root of the final prediction error.
    pub gain: f64,
    /// Reflection coefficients from the Levinson recursion; each `|k| < 1`.
    pub reflection: Vec<f64>,
}

impl LpcModel {
    /// `A(z) = 1`, the identity filter.
    pub fn identity() -> Self {
        Self {
            coeffs: Vec::new(),
            gain: 1.0,
            reflection: Vec::new(),
        }
    }

    /// Model with every coefficient zero (output of a silent frame).
    pub fn zero(order: usize) -> Self {
        Self {
            coeffs: vec![0.0; order],
            gain: 0.0,
            reflection: vec![0.0; order],
        }
    }

    /// Builds a model from direct-form coefficients without running the
    /// recursion; the reflection coefficients are recovered by step-down.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        let reflection = step_down(&coeffs)?;
        Ok(Self {
            coeffs,
            gain: 1.0,
            reflection,
        })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_minimum_phase(&self) -> bool {
        self.reflection.iter().all(|k| k.abs() < 1.0)
    }
}

/// Biased autocorrelation `r[k] = sum_n x[n] x[n+k]` for `k = 0..=max_lag`.
pub fn autocorrelation(frame: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag >= frame.len() {
        return Err(Error::LagTooLarge {
            max_lag,
            len: frame.len(),
        });
    }
    Ok((0..=max_lag)
        .map(|k| frame.iter().zip(&frame[k..]).map(|(a, b)| a * b).sum())
        .collect())
}

/// Levinson-Durbin recursion on `r[0..=order]`.
///
/// A silent frame (`r[0] == 0`) yields a zero model. Any reflection
/// coefficient with `|k| >= 1` is reported as [`Error::UnstableFrame`].
pub fn levinson_durbin(r: &[f64], order: usize) -> Result<LpcModel> {
    if r.len() < order + 1 {
        return Err(Error::LagTooLarge {
            max_lag: order,
            len: r.len(),
        });
    }
    if r[0] == 0.0 {
        return Ok(LpcModel::zero(order));
    }
    if !(r[0] > 0.0) || r.iter().any(|v| !v.is_finite()) {
        return Err(Error::UnstableFrame {
            stage: 0,
            k: r[0],
        });
    }

    let mut a = vec![0.0; order];
    let mut prev = vec![0.0; order];
    let mut reflection = Vec::with_capacity(order);
    let mut err = r[0];
    for i in 0..order {
        let acc = r[i + 1] + (0..i).map(|j| a[j] * r[i - j]).sum::<f64>();
        let k = -acc / err;
        if !(k.abs() < 1.0) {
            return Err(Error::UnstableFrame { stage: i + 1, k });
        }
        prev[..i].copy_from_slice(&a[..i]);
        for j in 0..i {
            a[j] = prev[j] + k * prev[i - 1 - j];
        }
        a[i] = k;
        reflection.push(k);
        err *= 1.0 - k * k;
    }
    Ok(LpcModel {
        coeffs: a,
        gain: err.max(0.0).sqrt(),
        reflection,
    })
}

/// Autocorrelation LPC of one (already windowed) frame, with the white-noise
/// floor `r[0] *= 1 + AUTOCORR_REGULARIZATION`.
pub fn lpc_analysis(frame: &[f64], order: usize) -> Result<LpcModel> {
    let mut r = autocorrelation(frame, order)?;
    r[0] *= 1.0 + AUTOCORR_REGULARIZATION;
    levinson_durbin(&r, order)
}

/// Step-down recursion: direct-form coefficients to reflection coefficients.
fn step_down(coeffs: &[f64]) -> Result<Vec<f64>> {
    let mut a = coeffs.to_vec();
    let mut ks = vec![0.0; a.len()];
    for i in (0..a.len()).rev() {
        let k = a[i];
        if !(k.abs() < 1.0) {
            return Err(Error::UnstableFrame { stage: i + 1, k });
        }
        ks[i] = k;
        let denom = 1.0 - k * k;
        let prev: Vec<f64> = (0..i).map(|j| (a[j] - k * a[i - 1 - j]) / denom).collect();
        a.truncate(i);
        a.copy_from_slice(&prev);
    }
    Ok(ks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_autocorrelation() {
        let mut x = vec![0.0; 16];
        x[0] = 1.0;
        let r = autocorrelation(&x, 5).unwrap();
        assert_eq!(r, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(autocorrelation(&[0.0; 8], 3).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn lag_must_be_below_frame_length() {
        assert!(matches!(
            autocorrelation(&[1.0; 4], 4),
            Err(Error::LagTooLarge { max_lag: 4, len: 4 })
        ));
    }

    #[test]
    fn sine_autocorrelation_peaks_at_one_period() {
        let x: Vec<f64> = (0..320)
            .map(|n| (2.0 * std::f64::consts::PI * 100.0 * n as f64 / 16000.0).sin())
            .collect();
        let r = autocorrelation(&x, 240).unwrap();
        let best = (80..=240).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap();
        assert_eq!(best, 160);
    }

    #[test]
    fn white_process_gives_zero_coefficients() {
        let m = levinson_durbin(&[1.0, 0.0, 0.0, 0.0, 0.0], 4).unwrap();
        assert_eq!(m.coeffs, vec![0.0; 4]);
        assert_eq!(m.gain, 1.0);
    }

    #[test]
    fn ar1_closed_form() {
        let rho: f64 = 0.9;
        let r: Vec<f64> = (0..3).map(|k| rho.powi(k)).collect();
        let m = levinson_durbin(&r, 1).unwrap();
        assert!((m.coeffs[0] + 0.9).abs() < 1e-15);
        assert!((m.gain * m.gain - 0.19).abs() < 1e-12);
        assert_eq!(m.reflection, vec![-0.9]);
    }

    #[test]
    fn silent_frame_gives_zero_model() {
        let m = lpc_analysis(&[0.0; 64], 6).unwrap();
        assert_eq!(m, LpcModel::zero(6));
    }

    #[test]
    fn singular_autocorrelation_is_unstable() {
        // r of a pure DC signal without regularization: k_1 = -1.
        assert!(matches!(
            levinson_durbin(&[1.0, 1.0, 1.0], 2),
            Err(Error::UnstableFrame { stage: 1, .. })
        ));
    }

    #[test]
    fn regularization_keeps_dc_frame_stable() {
        let m = lpc_analysis(&[0.5; 64], 4).unwrap();
        assert!(m.is_minimum_phase());
    }

    #[test]
    fn step_down_inverts_recursion() {
        let r = [2.0, 1.2, 0.5, 0.1, -0.2];
        let m = levinson_durbin(&r, 4).unwrap();
        let back = LpcModel::from_coeffs(m.coeffs.clone()).unwrap();
        for (a, b) in back.reflection.iter().zip(&m.reflection) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
