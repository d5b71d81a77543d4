use crate::{Error, Result};

/// Magni clinical risk `10 (3.5506 (ln(g)^0.8353 - 3.7932))^2`, natural log.
pub fn magni_risk(g: f64) -> Result<f64> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::invalid("glucose", format!("risk needs a positive finite value, got {g}")));
    }
    Ok(magni_risk_unchecked(g))
}

#[inline]
pub(crate) fn magni_risk_unchecked(g: f64) -> f64 {
    let f = 3.5506 * (g.ln().powf(0.8353) - 3.7932);
    10.0 * f * f
}

/// Glucose at which the risk vanishes, `exp(3.7932^(1 / 0.8353))`.
pub fn magni_risk_minimizer() -> f64 {
    3.7932f64.powf(1.0 / 0.8353).exp()
}
