/// Linear-prediction order used by the spectral distance metrics.
pub const LPC_ORDER: usize = 10;

/// Autocorrelation lags `0..=order` of `x`.
pub(crate) fn autocorrelation(x: &[f64], order: usize) -> Vec<f64> {
    (0..=order).map(|k| x.iter().zip(&x[k.min(x.len())..]).map(|(a, b)| a * b).sum()).collect()
}

/// Levinson-Durbin recursion. Returns the predictor polynomial
/// `[1, a1, .., ap]` of `A(z) = 1 + sum a_k z^-k` and the final prediction
/// error, or `None` when the autocorrelation is not positive definite.
pub fn levinson(r: &[f64]) -> Option<(Vec<f64>, f64)> {
    let p = r.len() - 1;
    if !(r[0] > 0.0) {
        return None;
    }
    let mut a = vec![0.0; p + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=p {
        let acc: f64 = (0..i).map(|j| a[j] * r[i - j]).sum();
        let k = -acc / err;
        if !k.is_finite() || k.abs() >= 1.0 {
            return None;
        }
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if !(err > r[0] * 1e-14) {
            return None;
        }
    }
    Some((a, err))
}

/// Cepstral coefficients `c1..=cp` of the all-pole model `1 / A(z)`.
pub fn lpc_cepstrum(a: &[f64]) -> Vec<f64> {
    let p = a.len() - 1;
    let mut c = vec![0.0; p + 1];
    for n in 1..=p {
        let acc: f64 = (1..n).map(|k| k as f64 * c[k] * a[n - k]).sum();
        c[n] = -a[n] - acc / n as f64;
    }
    c[1..].to_vec()
}
