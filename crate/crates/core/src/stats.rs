//! Small fitting helpers for convergence studies.

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    fit_line(xs, ys).0
}

/// Least-squares line `y = slope·x + intercept`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `ln(err)` against `ln(eps)`.
pub fn loglog_slope(eps: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.max(1e-300).ln()).collect();
    fit_slope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    #[test]
    fn exact_line() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [2.0, 4.5, 7.0];
        let (s, b) = super::fit_line(&xs, &ys);
        assert!((s - 2.5).abs() < 1e-14 && (b + 0.5).abs() < 1e-14);
    }
}
