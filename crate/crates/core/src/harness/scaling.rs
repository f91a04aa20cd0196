//! Log-log exponent fits over ε.

use crate::error::{Result, WaveError};

/// Measured values against ε with the fitted exponent `p` in `value ≈ C εᵖ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub label: String,
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub exponent: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of the fit in log space.
    pub fit_residual: f64,
    /// Accepted exponent window, inclusive.
    pub window: (f64, f64),
    pub pass: bool,
}

impl SweepReport {
    pub const HEADER: &'static str = "epsilon\tvalue";

    pub fn lines(&self) -> Vec<String> {
        self.epsilons.iter().zip(&self.values).map(|(e, v)| format!("{e:.6e}\t{v:.16e}")).collect()
    }
}

/// Least-squares slope of `log value` against `log ε`.
pub fn fit_scaling(label: &str, epsilons: &[f64], values: &[f64], window: (f64, f64)) -> Result<SweepReport> {
    if epsilons.len() != values.len() {
        return Err(WaveError::InvalidParameter("epsilon and value lists differ in length".into()));
    }
    if epsilons.len() < 3 {
        return Err(WaveError::TooFewPoints(epsilons.len()));
    }
    if epsilons.iter().chain(values).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(WaveError::InvalidParameter(format!("{label}: scaling fit needs positive finite data")));
    }
    let x: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(WaveError::InvalidParameter(format!("{label}: all ε values coincide")));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let fit_residual = (x.iter().zip(&y).map(|(a, b)| (b - intercept - exponent * a).powi(2)).sum::<f64>() / n).sqrt();
    Ok(SweepReport {
        label: label.to_string(),
        epsilons: epsilons.to_vec(),
        values: values.to_vec(),
        exponent,
        prefactor: intercept.exp(),
        fit_residual,
        window,
        pass: exponent >= window.0 && exponent <= window.1,
    })
}
