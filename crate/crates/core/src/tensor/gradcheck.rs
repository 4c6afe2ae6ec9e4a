//! Central finite-difference gradient checking.

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is essentially zero are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    /// `max_i |analytic_i - numeric_i| / max(|numeric_i|, RELATIVE_FLOOR)`.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Numeric derivative of `f` along coordinate `i` of `point`; the point is
/// restored before returning.
pub fn central_difference<F>(f: &mut F, point: &mut [f64], i: usize, eps: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let orig = point[i];
    point[i] = orig + eps;
    let plus = f(point);
    point[i] = orig - eps;
    let minus = f(point);
    point[i] = orig;
    (plus - minus) / (2.0 * eps)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(RELATIVE_FLOOR)
}

/// Compare `analytic` (the claimed gradient of `f` at `point`) against
/// `(f(p + eps e_i) - f(p - eps e_i)) / (2 eps)` for every coordinate.
pub fn gradient_check<F>(mut f: F, point: &mut [f64], analytic: &[f64], eps: f64) -> GradCheck
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(point.len(), analytic.len(), "gradient length");
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (i, &a) in analytic.iter().enumerate() {
        let numeric = central_difference(&mut f, point, i, eps);
        report.observe(i, a, numeric);
    }
    report
}

impl GradCheck {
    pub fn empty() -> GradCheck {
        GradCheck {
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
            checked: 0,
        }
    }

    pub fn observe(&mut self, index: usize, analytic: f64, numeric: f64) {
        let err = relative_error(analytic, numeric);
        self.checked += 1;
        if err > self.max_rel_error || err.is_nan() {
            self.max_rel_error = err;
            self.worst_index = index;
            self.analytic = analytic;
            self.numeric = numeric;
        }
    }
}
