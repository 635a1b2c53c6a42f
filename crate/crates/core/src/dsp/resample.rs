/// Output length of a linear resample: `max(1, round(len * factor))`, with
/// halves rounded away from zero.
pub fn resampled_len(len: usize, factor: f64) -> usize {
    ((len as f64 * factor).round() as usize).max(1)
}

/// Position of output sample `i` on the input time axis, plus the pair of
/// input indices and interpolation weight it falls between.
#[inline]
fn grid_point(i: usize, in_len: usize, out_len: usize) -> (usize, f64) {
    if out_len == 1 || in_len == 1 {
        return (0, 0.0);
    }
    let pos = i as f64 * (in_len - 1) as f64 / (out_len - 1) as f64;
    let lo = (pos.floor() as usize).min(in_len - 1);
    (lo, pos - lo as f64)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        return a;
    }
    let v = a + t * (b - a);
    // keep rounding from stepping outside the bracketing samples
    v.clamp(a.min(b), a.max(b))
}

/// Endpoint-anchored linear interpolation of `seq` to
/// [`resampled_len`]`(seq.len(), factor)` samples. A factor of exactly 1 is
/// a bit-exact copy.
pub fn linear_resample(seq: &[f64], factor: f64) -> Vec<f64> {
    assert!(!seq.is_empty(), "linear_resample needs at least one sample");
    let out_len = resampled_len(seq.len(), factor);
    if out_len == seq.len() {
        return seq.to_vec();
    }
    (0..out_len)
        .map(|i| {
            let (lo, t) = grid_point(i, seq.len(), out_len);
            let hi = (lo + 1).min(seq.len() - 1);
            lerp(seq[lo], seq[hi], t)
        })
        .collect()
}

/// Resamples a frame-major matrix (`n_cols` values per frame) along the frame
/// axis, each column independently.
pub fn linear_resample_rows(data: &[f64], n_cols: usize, factor: f64) -> Vec<f64> {
    assert!(n_cols > 0 && data.len().is_multiple_of(n_cols), "ragged frame-major matrix");
    let in_len = data.len() / n_cols;
    assert!(in_len > 0, "linear_resample_rows needs at least one frame");
    let out_len = resampled_len(in_len, factor);
    if out_len == in_len {
        return data.to_vec();
    }
    let mut out = Vec::with_capacity(out_len * n_cols);
    for i in 0..out_len {
        let (lo, t) = grid_point(i, in_len, out_len);
        let hi = (lo + 1).min(in_len - 1);
        let (row_lo, row_hi) = (&data[lo * n_cols..][..n_cols], &data[hi * n_cols..][..n_cols]);
        out.extend(row_lo.iter().zip(row_hi).map(|(&a, &b)| lerp(a, b, t)));
    }
    out
}
