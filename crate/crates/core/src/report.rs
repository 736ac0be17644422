//! Report records and small fitting utilities shared by the verification
//! harnesses.

use serde::Serialize;

use crate::dyadic::BesovNorm;

/// The common JSON record shape `{op, params, value, per_block[]}`.
#[derive(Clone, Debug, Serialize)]
pub struct NormRecord {
    pub op: String,
    pub params: serde_json::Value,
    pub value: f64,
    pub per_block: Vec<(i32, f64)>,
}

impl NormRecord {
    pub fn from_besov(op: &str, extra: serde_json::Value, norm: &BesovNorm) -> Self {
        let mut params = serde_json::json!({
            "s": norm.s,
            "p": norm.p,
            "r": norm.r,
            "homogeneous": norm.homogeneous,
        });
        if let (Some(obj), Some(extra_obj)) = (params.as_object_mut(), extra.as_object()) {
            for (k, v) in extra_obj {
                obj.insert(k.clone(), v.clone());
            }
        }
        Self {
            op: op.to_string(),
            params,
            value: norm.value,
            per_block: norm.per_block.clone(),
        }
    }
}

/// Ordinary least squares of `y` on `x` with slope uncertainty.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// 95% interval `slope +- 2 stderr`
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let xm = x.iter().sum::<f64>() / n as f64;
    let ym = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - (intercept + slope * a)).powi(2))
        .sum();
    let stderr = if n > 2 {
        (ss_res / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_stderr: stderr,
        ci_low: slope - 2.0 * stderr,
        ci_high: slope + 2.0 * stderr,
        n,
    })
}

/// Fit `log y = a log x + b`; the slope is the convergence order.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.iter().any(|&v| v <= 0.0) || y.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_line_is_recovered() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let fit = linear_fit(&x, &y).unwrap();
        assert_relative_eq!(fit.slope, 2.5, max_relative = 1e-12);
        assert_relative_eq!(fit.intercept, -1.0, max_relative = 1e-12);
        assert!(fit.slope_stderr < 1e-12);
    }

    #[test]
    fn loglog_recovers_power() {
        let x = [1.0_f64, 0.5, 0.25, 0.125];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(1.7)).collect();
        let fit = fit_loglog(&x, &y).unwrap();
        assert_relative_eq!(fit.slope, 1.7, max_relative = 1e-10);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(linear_fit(&[1.0], &[2.0]).is_none());
        assert!(fit_loglog(&[1.0, -1.0], &[1.0, 1.0]).is_none());
    }
}
