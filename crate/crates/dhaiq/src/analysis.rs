//! How should k adversaries spread over four quadrants?
//!
//! Model: a cell that receives at least one adversary is swept, and cell `i`
//! carries a fraction `a_i` of the population at stake — the same fraction
//! that governs where adversaries land. The expected swept mass is then
//! `mu * (1 - f(a))` with `f(a) = sum_i a_i (1 - a_i)^k`, so `f` is the
//! fraction of mass whose cell stays untouched. Spreading the adversaries
//! evenly maximizes `f` — it leaves the smallest footprint — as long as
//! k < 7: the first-order conditions hold at (1/4, 1/4, 1/4, 1/4) for every
//! k, and the curvature term changes sign at k = 7, after which the even
//! spread stops being a maximum.
//!
//! [`optimal_division`] finds the maximizing division numerically (simplex
//! grid scan plus pairwise mass-transfer refinement), deliberately without
//! using the closed-form stationarity analysis, so the two can be checked
//! against each other.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("division fraction {0} is negative")]
    NegativeFraction(f64),
    #[error("division fractions sum to {0}, not 1")]
    BadSum(f64),
}

/// A probability division of adversaries over the four quadrants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Division([f64; 4]);

impl Division {
    /// Validates that the fractions are nonnegative and sum to one within
    /// 1e-12.
    pub fn new(fractions: [f64; 4]) -> Result<Division, AnalysisError> {
        for &a in &fractions {
            if a < 0.0 || !a.is_finite() {
                return Err(AnalysisError::NegativeFraction(a));
            }
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(AnalysisError::BadSum(sum));
        }
        Ok(Division(fractions))
    }

    /// The even spread.
    pub fn equal() -> Division {
        Division([0.25; 4])
    }

    pub fn fractions(&self) -> [f64; 4] {
        self.0
    }
}

/// `f(a) = sum_i a_i (1 - a_i)^k`: expected fraction of the mass whose cell
/// no adversary hits.
pub fn untouched_fraction(div: &Division, k: u32) -> f64 {
    div.0.iter().map(|&a| a * (1.0 - a).powi(k as i32)).sum()
}

/// Expected mass swept by marking every hit cell, out of a population of
/// `mu`.
pub fn expected_innocents(div: &Division, k: u32, mu: f64) -> f64 {
    mu * (1.0 - untouched_fraction(div, k))
}

/// Multiplier of the stationarity conditions at the even spread:
/// `(k/4 - 3/4) * (3/4)^(k-1)`. Zero exactly at k = 3.
pub fn lagrange_multiplier(k: u32) -> f64 {
    (k as f64 / 4.0 - 0.75) * 0.75f64.powi(k as i32 - 1)
}

/// Common diagonal scale of the constrained curvature at the even spread:
/// `(3/4)^(k-2) * (k - 7) / 4`. Negative for k < 7 (even spread is a
/// maximum), zero at k = 7, positive beyond.
pub fn hessian_diagonal(k: u32) -> f64 {
    0.75f64.powi(k as i32 - 2) * (k as f64 - 7.0) / 4.0
}

/// Closed-form gradient coordinate of [`untouched_fraction`] at an
/// unconstrained point.
pub fn untouched_gradient(a: f64, k: u32) -> f64 {
    (1.0 - a).powi(k as i32) - k as f64 * a * (1.0 - a).powi(k as i32 - 1)
}

/// Upper bound on the single-pass innocent ratio: at most `mu - 1` innocents
/// share each adversary's least area.
pub fn innocent_bound(mu: f64, z0: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (mu - 1.0) * z0 as f64 / n as f64
}

/// The division maximizing [`untouched_fraction`], found numerically.
///
/// Scans the simplex on a grid of pitch `resolution`, then refines the best
/// point by repeated mass transfers between coordinate pairs with a step
/// that halves twenty times, for a final placement precision far below
/// 1e-6. `resolution` must lie in (0, 0.5].
pub fn optimal_division(k: u32, resolution: f64) -> Division {
    assert!(k >= 1, "at least one adversary");
    assert!(resolution > 0.0 && resolution <= 0.5, "resolution out of range");

    let objective =
        |a: &[f64; 4]| a.iter().map(|&x| x * (1.0 - x).powi(k as i32)).sum::<f64>();

    let m = (1.0 / resolution).round().max(2.0) as usize;
    let mut best = [1.0, 0.0, 0.0, 0.0];
    let mut best_f = objective(&best);
    for i in 0..=m {
        for j in 0..=(m - i) {
            for l in 0..=(m - i - j) {
                let a = [
                    i as f64 / m as f64,
                    j as f64 / m as f64,
                    l as f64 / m as f64,
                    (m - i - j - l) as f64 / m as f64,
                ];
                let f = objective(&a);
                if f > best_f {
                    best_f = f;
                    best = a;
                }
            }
        }
    }

    let mut step = 1.0 / m as f64;
    for _ in 0..20 {
        loop {
            let mut improved = false;
            for from in 0..4 {
                if best[from] + 1e-15 < step {
                    continue;
                }
                for to in 0..4 {
                    if to == from {
                        continue;
                    }
                    let mut cand = best;
                    cand[from] = (cand[from] - step).max(0.0);
                    cand[to] += step;
                    let f = objective(&cand);
                    if f > best_f {
                        best_f = f;
                        best = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        step /= 2.0;
    }

    let sum: f64 = best.iter().sum();
    Division::new(best.map(|a| a / sum)).expect("refinement preserves the simplex")
}
