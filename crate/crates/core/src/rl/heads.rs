//! Row-wise helpers shared by the discrete learners and policies.

/// `log(sum(exp(x)))`, shifted by the maximum so large values do not overflow.
pub fn logsumexp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let lse = logsumexp(x);
    x.iter().map(|v| (v - lse).exp()).collect()
}

/// First index of the maximum among entries where `allowed` holds.
pub(crate) fn masked_argmax(values: &[f64], allowed: impl Fn(usize) -> bool) -> usize {
    let mut best = None;
    for (k, &v) in values.iter().enumerate() {
        if allowed(k) && best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.map_or(0, |(k, _)| k)
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    masked_argmax(values, |_| true)
}

/// Bins whose behaviour likelihood relative to the most likely bin is at
/// least `threshold`; computed on logits so `p_k / p_max = exp(l_k - l_max)`.
pub(crate) fn likely_bins(logits: &[f64], threshold: f64) -> Vec<bool> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    logits.iter().map(|&l| (l - m).exp() >= threshold).collect()
}
