// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{Error, Result};
use crate::stats::two_sided_p;

/// Sample correlation and its two-sided p-value from
/// `t = r sqrt((n - 2) / (1 - r^2))` on `n - 2` degrees of freedom.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::Precondition(format!("pearson_r: lengths {} and {} differ", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Precondition(format!("pearson_r needs at least 3 pairs, got {n}")));
    }
    let nf = n as f64;
    let (mx, my) = (x.iter().sum::<f64>() / nf, y.iter().sum::<f64>() / nf);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Precondition("pearson_r: zero variance".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let p = if r.abs() == 1.0 { 0.0 } else { two_sided_p(r * ((nf - 2.0) / (1.0 - r * r)).sqrt(), nf - 2.0) };
    Ok((r, p))
}

/// Pulls accuracies into the open interval: `(y (n - 1) + 0.5) / n`.
pub fn smooth_response(y: &[f64], n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Precondition(format!("smoothing needs n >= 2, got {n}")));
    }
    if let Some(v) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Precondition(format!("accuracy {v} outside [0, 1]")));
    }
    let nf = n as f64;
    Ok(y.iter().map(|v| (v * (nf - 1.0) + 0.5) / nf).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(pearson_r(&x, &x).unwrap(), (1.0, 0.0));
        let y: Vec<f64> = x.iter().map(|v| -2.0 * v + 3.0).collect();
        assert_eq!(pearson_r(&x, &y).unwrap().0, -1.0);
        let (r, p) = pearson_r(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-15);
        // t = 0.8 sqrt(2 / 0.36) on 2 df
        assert!((p - two_sided_p(0.8 * (2.0f64 / 0.36).sqrt(), 2.0)).abs() < 1e-15);
    }

    #[test]
    fn affine_invariance() {
        let x = [0.3, 1.7, 2.2, 0.9, 4.1];
        let y = [1.0, 0.4, 2.5, 1.1, 3.0];
        let (r, p) = pearson_r(&x, &y).unwrap();
        let x2: Vec<f64> = x.iter().map(|v| 3.5 * v - 7.0).collect();
        let (r2, p2) = pearson_r(&x2, &y).unwrap();
        assert!((r - r2).abs() < 1e-12 && (p - p2).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(pearson_r(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn smoothing() {
        let s = smooth_response(&[0.0, 1.0, 0.5], 10).unwrap();
        assert_eq!(s, vec![0.05, 0.95, 0.5]);
        assert!(smooth_response(&[0.2], 1).is_err());
        assert!(smooth_response(&[1.2], 5).is_err());
    }
}
