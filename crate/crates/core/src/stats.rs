//! Small summary statistics.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor `len - 1`); `NaN` below two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// `sample_std / √len`.
pub fn standard_error(xs: &[f64]) -> f64 {
    sample_std(xs) / (xs.len() as f64).sqrt()
}

/// Pearson correlation; `NaN` when either side is constant or too short.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "pearson needs equal lengths");
    if xs.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_values() {
        let xs = [1.0, 2.0, 6.0];
        assert_eq!(mean(&xs), 3.0);
        assert!((sample_std(&xs) - 7.0f64.sqrt()).abs() < 1e-15);
        assert!((standard_error(&xs) - (7.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((pearson(&xs, &[2.0, 4.0, 12.0]) - 1.0).abs() < 1e-15);
        assert!((pearson(&xs, &[-1.0, -2.0, -6.0]) + 1.0).abs() < 1e-15);
        assert!(pearson(&xs, &[1.0, 1.0, 1.0]).is_nan());
        assert!(sample_std(&[1.0]).is_nan());
    }
}
