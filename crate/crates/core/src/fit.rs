//! Ordinary least-squares line fits used for exponent estimation.

use crate::error::{Error, Result};
use num_traits::Float;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 for two points).
    pub slope_stderr: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Fit(alloc::format!("need at least two paired points, got {}", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if xs.len() > 2 {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        }).sum();
        Float::sqrt(rss / (n - 2.0) / sxx)
    } else {
        0.0
    };
    Ok(LineFit { slope, intercept, slope_stderr })
}

/// Fit `log y = slope·log x + c`.
pub fn log_log(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let lx: alloc::vec::Vec<f64> = xs.iter().map(|&x| Float::ln(x)).collect();
    let ly: alloc::vec::Vec<f64> = ys.iter().map(|&y| Float::ln(y)).collect();
    least_squares(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let f = least_squares(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-12);
    }

    #[test]
    fn power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: alloc::vec::Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((log_log(&xs, &ys).unwrap().slope + 0.5).abs() < 1e-13);
    }

    #[test]
    fn too_few_points() {
        assert!(least_squares(&[1.0], &[1.0]).is_err());
    }
}
