use super::{check_len, NnError, Result};

/// Central-difference step used throughout the verification harness.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Index of the component with the largest relative error.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Numeric gradient of `f` at `params` by central differences.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(mut f: F, params: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut probe = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let plus = f(&probe);
        probe[i] = orig - step;
        let minus = f(&probe);
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(NnError::NonFinite {
                context: "grad_check objective",
                index: i,
            });
        }
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

/// Compares an analytic gradient against central differences component-wise.
pub fn grad_check<F: FnMut(&[f64]) -> f64>(
    f: F,
    params: &[f64],
    analytic: &[f64],
    tolerance: f64,
) -> Result<GradCheckReport> {
    check_len("grad_check", params.len(), analytic.len())?;
    if let Some(index) = analytic.iter().position(|v| !v.is_finite()) {
        return Err(NnError::NonFinite {
            context: "analytic gradient",
            index,
        });
    }
    let numeric = central_difference(f, params, FD_STEP)?;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        tolerance,
        passed: true,
    };
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let e = relative_error(a, n);
        if e > report.max_rel_error || i == 0 {
            report.max_rel_error = e;
            report.worst_index = i;
            report.analytic = a;
            report.numeric = n;
        }
    }
    report.passed = report.max_rel_error <= tolerance;
    Ok(report)
}
