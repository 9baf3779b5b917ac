//! Analytical width models and the exponential decay fit.

use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvergenceError {
    #[error("cutset size must be at least 1")]
    EmptyCutset,
    #[error("time per instance must be positive")]
    NonPositiveStepTime,
    #[error("{solved} solves exceed the {total} instances")]
    TooManySolves { solved: f64, total: f64 },
    #[error("probability {0} outside [0,1]")]
    BadProbability(f64),
    #[error("weight class {m} beyond cutset size {n}")]
    ClassOutOfRange { m: u32, n: u32 },
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("no point has positive width")]
    NoPositiveWidths,
}

/// Width after `t` time units when all `2^n` instances weigh the same and
/// each takes `k_time` to solve: `1 - 2^-n * t / k_time`.
pub fn worst_case_width(n: u32, t: f64, k_time: f64) -> Result<f64, ConvergenceError> {
    if n == 0 {
        return Err(ConvergenceError::EmptyCutset);
    }
    if k_time <= 0.0 {
        return Err(ConvergenceError::NonPositiveStepTime);
    }
    let total = libm::exp2(f64::from(n));
    let solved = t / k_time;
    if solved > total {
        return Err(ConvergenceError::TooManySolves { solved, total });
    }
    Ok((1.0 - solved / total).clamp(0.0, 1.0))
}

/// `n choose j` as a float.
pub fn binomial(n: u32, j: u32) -> f64 {
    if j > n {
        return 0.0;
    }
    let j = j.min(n - j);
    (0..j).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Width once the weight classes `0..=m` have been solved, for `n`
/// independent binary cutset nodes each true with probability `p`. Class
/// `j` holds the `C(n, j)` instances with `j` false nodes, each weighing
/// `p^(n-j) (1-p)^j`.
pub fn binomial_width(n: u32, p: f64, m: u32) -> Result<f64, ConvergenceError> {
    if n == 0 {
        return Err(ConvergenceError::EmptyCutset);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(ConvergenceError::BadProbability(p));
    }
    if m > n {
        return Err(ConvergenceError::ClassOutOfRange { m, n });
    }
    if m == n {
        return Ok(0.0);
    }
    let solved: f64 = (0..=m)
        .map(|j| binomial(n, j) * libm::pow(p, f64::from(n - j)) * libm::pow(1.0 - p, f64::from(j)))
        .sum();
    Ok((1.0 - solved).clamp(0.0, 1.0))
}

/// Number of instances solved once classes `0..=m` are done, for each `m`.
pub fn class_boundaries(n: u32) -> Vec<usize> {
    let mut total = 0usize;
    (0..=n)
        .map(|j| {
            total += binomial(n, j) as usize;
            total
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Decay constant per work step.
    pub k: f64,
    /// Root-mean-square of `width - exp(-k (t + 1))` over the fitted points.
    pub residual: f64,
    pub used: usize,
    /// Points dropped for having non-positive width.
    pub excluded: usize,
}

/// Least-squares fit of `ln(width) = -k (t + 1)`.
pub fn fit_decay(points: &[(f64, f64)]) -> Result<DecayFit, ConvergenceError> {
    if points.len() < 2 {
        return Err(ConvergenceError::TooFewPoints(points.len()));
    }
    let kept: Vec<(f64, f64)> = points.iter().copied().filter(|&(_, w)| w > 0.0).collect();
    if kept.is_empty() {
        return Err(ConvergenceError::NoPositiveWidths);
    }
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, w) in &kept {
        let x = t + 1.0;
        sxy += x * libm::log(w);
        sxx += x * x;
    }
    let k = -sxy / sxx;
    let sq: f64 = kept
        .iter()
        .map(|&(t, w)| {
            let e = w - libm::exp(-k * (t + 1.0));
            e * e
        })
        .sum();
    Ok(DecayFit {
        k,
        residual: libm::sqrt(sq / kept.len() as f64),
        used: kept.len(),
        excluded: points.len() - kept.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_case_endpoints() {
        assert_eq!(worst_case_width(15, 0.0, 5.0).unwrap(), 1.0);
        assert_eq!(worst_case_width(15, 5.0 * 32768.0, 5.0).unwrap(), 0.0);
        assert_eq!(worst_case_width(15, 16384.0, 1.0).unwrap(), 0.5);
        assert!(worst_case_width(3, 9.0, 1.0).is_err());
        assert!(worst_case_width(3, 1.0, 0.0).is_err());
        assert!(worst_case_width(0, 1.0, 1.0).is_err());
    }

    /// Brute force: list all 2^n instance weights, sort, and sum the heaviest.
    fn enumerated_width(n: u32, p: f64, solved: usize) -> f64 {
        let mut w: Vec<f64> = (0..1u32 << n)
            .map(|bits| {
                (0..n)
                    .map(|b| if bits >> b & 1 == 0 { p } else { 1.0 - p })
                    .product()
            })
            .collect();
        w.sort_by(|a, b| b.total_cmp(a));
        1.0 - w[..solved].iter().sum::<f64>()
    }

    #[test]
    fn binomial_small_case_by_enumeration() {
        let expected = enumerated_width(3, 0.75, 4);
        assert!((expected - 0.15625).abs() < 1e-15);
        assert!((binomial_width(3, 0.75, 1).unwrap() - 0.15625).abs() < 1e-15);
    }

    #[test]
    fn binomial_matches_enumeration_at_boundaries() {
        for n in 1..=10 {
            for (m, &t) in class_boundaries(n).iter().enumerate() {
                let model = binomial_width(n, 0.75, m as u32).unwrap();
                assert!((model - enumerated_width(n, 0.75, t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn binomial_full_and_symmetric() {
        assert_eq!(binomial_width(7, 0.3, 7).unwrap(), 0.0);
        for n in 1..=8u32 {
            for (m, &t) in class_boundaries(n).iter().enumerate() {
                let a = binomial_width(n, 0.5, m as u32).unwrap();
                let b = worst_case_width(n, t as f64, 1.0).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(binomial_width(3, 1.5, 1).is_err());
        assert!(binomial_width(3, 0.5, 4).is_err());
    }

    #[test]
    fn fit_recovers_synthetic_decay() {
        let pts: Vec<(f64, f64)> = (0..=20)
            .map(|t| (f64::from(t), libm::exp(-0.2 * f64::from(t + 1))))
            .collect();
        let fit = fit_decay(&pts).unwrap();
        assert!((fit.k - 0.2).abs() < 1e-6);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn fit_constant_width() {
        let pts = [(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)];
        assert_eq!(fit_decay(&pts).unwrap().k, 0.0);
    }

    #[test]
    fn fit_excludes_zero_widths() {
        let pts = [(0.0, 0.5), (1.0, 0.0)];
        let fit = fit_decay(&pts).unwrap();
        assert_eq!((fit.used, fit.excluded), (1, 1));
        assert!(fit_decay(&[(0.0, 0.0), (1.0, 0.0)]).is_err());
        assert!(fit_decay(&[(0.0, 0.5)]).is_err());
    }
}
