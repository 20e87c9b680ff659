//! Maximum-likelihood range estimation from a single RSS sample with known
//! height, and a seeded Monte Carlo harness comparing it with the bound.

use std::f64::consts::PI;

use serde::Serialize;

use crate::bounds::{self, ser_f64_or_inf};
use crate::channel::{self, Geometry};
use crate::error::{Error, Result};
use crate::noise;
use crate::optimize;
use crate::rng;
use crate::sysparams::SystemParameters;

/// Coarse grid used by [`estimate_range`] before refinement.
pub const COARSE_GRID: usize = 256;

/// A received power sample. `true_geometry` is known only in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub x: f64,
    pub true_geometry: Option<Geometry>,
}

/// Closed search interval for the distance, m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SearchInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// [h, 10h].
    pub fn default_for_height(h: f64) -> Self {
        Self { lo: h, hi: 10.0 * h }
    }

    fn check(&self, h: f64) -> Result<()> {
        let bad = |reason: &str| Error::InvalidInterval {
            lo: self.lo,
            hi: self.hi,
            reason: reason.into(),
        };
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(bad("ends must be finite"));
        }
        if self.lo < h {
            return Err(bad("lower end is below the known height"));
        }
        if self.lo >= self.hi {
            return Err(bad("lower end must be below the upper end"));
        }
        Ok(())
    }
}

fn check_candidate(p: &SystemParameters, h: f64, d: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain(format!("height must be positive, got {h}")));
    }
    if !(d >= h && d.is_finite()) {
        return Err(Error::Domain(format!("candidate distance {d} is below the height {h}")));
    }
    if (h / d).min(1.0).acos() > p.fov {
        return Err(Error::Domain(format!("candidate distance {d} puts the LED outside the field of view")));
    }
    Ok(())
}

/// Mean and variance of x at distance `d`.
fn moments(p: &SystemParameters, h: f64, d: f64) -> (f64, f64) {
    let mean = channel::los_power_hd(p, h, d) + p.diffuse_power;
    (mean, noise::var_total_hd(p, h, d))
}

/// ln p(x; d) = −ln(σ₀√(2π)) − (x − P₀ − P_diff)²/(2σ₀²).
pub fn log_likelihood(p: &SystemParameters, h: f64, d: f64, x: f64) -> Result<f64> {
    check_candidate(p, h, d)?;
    Ok(log_likelihood_unchecked(p, h, d, x))
}

fn log_likelihood_unchecked(p: &SystemParameters, h: f64, d: f64, x: f64) -> f64 {
    let (mean, var) = moments(p, h, d);
    let r = x - mean;
    -0.5 * (2.0 * PI * var).ln() - r * r / (2.0 * var)
}

/// ∂ ln p(x; d)/∂d with ∂σ₀/∂d eliminated through the shot-noise term.
pub fn score(p: &SystemParameters, h: f64, d: f64, x: f64) -> Result<f64> {
    check_candidate(p, h, d)?;
    let (mean, var) = moments(p, h, d);
    if var <= 0.0 {
        return Err(Error::DegenerateModel);
    }
    let qb = p.q * p.bandwidth;
    let slope = channel::dp0_dd_hd(p, h, d);
    let r = x - mean;
    Ok(-qb / var * slope + qb / (var * var) * r * r * slope + r / var * slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangeEstimate {
    pub distance: f64,
    pub log_likelihood: f64,
    /// The maximizer sits at an end of the search interval.
    pub at_boundary: bool,
}

/// ML distance for sample `x`: 256-point grid over the interval, then
/// golden-section refinement to `tol`.
pub fn estimate_range(
    p: &SystemParameters,
    h: f64,
    x: f64,
    search: SearchInterval,
    tol: f64,
) -> Result<RangeEstimate> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("observation must be finite, got {x}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    search.check(h)?;
    check_candidate(p, h, search.lo)?;
    check_candidate(p, h, search.hi)?;
    if noise::var_total_hd(p, h, search.hi) <= 0.0 {
        return Err(Error::DegenerateModel);
    }
    let best = optimize::grid_golden_max(
        |d| log_likelihood_unchecked(p, h, d, x),
        search.lo,
        search.hi,
        COARSE_GRID,
        tol,
    );
    Ok(RangeEstimate {
        distance: best.x,
        log_likelihood: best.value,
        at_boundary: best.at_boundary,
    })
}

/// Draw a noisy sample at the given geometry, stream `trial` of `seed`.
pub fn simulate_observation(p: &SystemParameters, g: &Geometry, seed: u64, trial: u64) -> Result<Observation> {
    let mean = channel::received_power_total(p, g);
    let sigma = noise::total_noise(p, g)?.var_total.sqrt();
    Ok(Observation {
        x: mean + sigma * rng::trial_normal(seed, trial),
        true_geometry: Some(*g),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McReport {
    pub trials: usize,
    pub seed: u64,
    pub true_d: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    #[serde(serialize_with = "ser_f64_or_inf")]
    pub crlb_sqrt_ref: f64,
    /// crlb_sqrt_ref / rmse.
    pub efficiency: f64,
    /// Trials whose estimate ended on the search boundary.
    pub failures: usize,
}

pub const MIN_MLE_TRIALS: usize = 100;

pub fn run_monte_carlo(
    p: &SystemParameters,
    g_true: &Geometry,
    trials: usize,
    seed: u64,
    search: SearchInterval,
    tol: f64,
) -> Result<McReport> {
    if trials < MIN_MLE_TRIALS {
        return Err(Error::Precondition(format!(
            "Monte Carlo needs at least {MIN_MLE_TRIALS} trials, got {trials}"
        )));
    }
    let crlb_sqrt_ref = bounds::crlb_sqrt(p, g_true)?;
    let mean = channel::received_power_total(p, g_true);
    let sigma = noise::total_noise(p, g_true)?.var_total.sqrt();
    // surfaces interval/tolerance errors before the parallel section
    estimate_range(p, g_true.h, mean, search, tol)?;

    let estimates = rng::map_trials(trials, |i| {
        let x = mean + sigma * rng::trial_normal(seed, i);
        estimate_range(p, g_true.h, x, search, tol).expect("inputs validated")
    });

    let n = trials as f64;
    let true_d = g_true.d;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut failures = 0;
    for e in &estimates {
        let err = e.distance - true_d;
        sum += e.distance;
        sum_sq += err * err;
        failures += usize::from(e.at_boundary);
    }
    let mean_estimate = sum / n;
    let rmse = (sum_sq / n).sqrt();
    Ok(McReport {
        trials,
        seed,
        true_d,
        mean_estimate,
        bias: mean_estimate - true_d,
        rmse,
        crlb_sqrt_ref,
        efficiency: crlb_sqrt_ref / rmse,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysparams::default_parameters;
    use approx::assert_relative_eq;

    #[test]
    fn zero_residual_leaves_normalizer() {
        let p = default_parameters();
        let (h, d) = (2.0, 2.3);
        let (mean, var) = moments(&p, h, d);
        let ll = log_likelihood(&p, h, d, mean).unwrap();
        assert_relative_eq!(ll, -(var.sqrt() * (2.0 * PI).sqrt()).ln(), max_relative = 1e-14);
    }

    #[test]
    fn likelihood_integrates_to_one() {
        for (pt, m, d) in [(1.0, 1.0, 2.2), (1e4, 5.0, 1.1), (100.0, 50.0, 3.0)] {
            let p = default_parameters().with_tx_power(pt).with_order(m);
            let h = 1.0;
            let (mean, var) = moments(&p, h, d);
            let s = var.sqrt();
            // composite Simpson over ±8σ
            let n = 4000;
            let (a, b) = (mean - 8.0 * s, mean + 8.0 * s);
            let step = (b - a) / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let x = a + step * i as f64;
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * log_likelihood(&p, h, d, x).unwrap().exp();
            }
            assert_relative_eq!(acc * step / 3.0, 1.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn score_matches_finite_difference_of_likelihood() {
        let p = default_parameters().with_tx_power(1e3).with_order(4.0);
        let h = 1.5;
        for (d, k) in [(1.6, 0.0), (2.0, 1.5), (2.4, -2.0), (1.5, 0.7)] {
            let (mean, var) = moments(&p, h, d);
            let x = mean + k * var.sqrt();
            // the score is small next to the curvature at zero residual, so
            // truncation error dominates unless the step is tiny
            let step = 1e-8 * d;
            let fd = (log_likelihood_unchecked(&p, h, d + step, x) - log_likelihood_unchecked(&p, h, d - step, x)) / (2.0 * step);
            assert_relative_eq!(score(&p, h, d, x).unwrap(), fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn score_at_the_mean() {
        let p = default_parameters();
        let (h, d) = (2.0, 2.5);
        let (mean, var) = moments(&p, h, d);
        let s = score(&p, h, d, mean).unwrap();
        let expected = -p.q * p.bandwidth * channel::dp0_dd_hd(&p, h, d) / var;
        assert_relative_eq!(s, expected, max_relative = 1e-12);
        assert!(s > 0.0);
    }

    #[test]
    fn candidate_below_height_is_rejected() {
        let p = default_parameters();
        assert!(matches!(log_likelihood(&p, 2.0, 1.9, 1e-7), Err(Error::Domain(_))));
        assert!(matches!(score(&p, 2.0, 1.9, 1e-7), Err(Error::Domain(_))));
    }

    #[test]
    fn noise_free_sample_recovers_distance() {
        let p = default_parameters();
        let h = 2.0;
        for d0 in [2.2, 2.6, 3.0] {
            let x = moments(&p, h, d0).0;
            let est = estimate_range(&p, h, x, SearchInterval::default_for_height(h), 1e-9).unwrap();
            // The ln σ₀ term moves the peak past d0 by about
            // score/Fisher = qB/|∂P₀/∂d|.
            let shift = p.q * p.bandwidth / channel::dp0_dd_hd(&p, h, d0).abs();
            assert!(shift < 1e-3);
            assert!((est.distance - (d0 + shift)).abs() < 0.05 * shift, "{d0}: {est:?} shift {shift}");
            assert!(!est.at_boundary);
        }
    }

    #[test]
    fn bright_sample_clamps_to_lower_end() {
        let p = default_parameters();
        let h = 2.0;
        let x = 10.0 * moments(&p, h, h).0;
        let est = estimate_range(&p, h, x, SearchInterval::default_for_height(h), 1e-6).unwrap();
        assert_eq!(est.distance, h);
        assert!(est.at_boundary);
    }

    #[test]
    fn negative_samples_are_fine() {
        let p = default_parameters();
        let est = estimate_range(&p, 2.0, -1e-6, SearchInterval::default_for_height(2.0), 1e-6).unwrap();
        assert!(est.distance.is_finite());
    }

    #[test]
    fn interval_and_input_errors() {
        let p = default_parameters();
        let e = |lo, hi, x, tol| estimate_range(&p, 2.0, x, SearchInterval::new(lo, hi), tol);
        assert!(matches!(e(1.5, 5.0, 1e-7, 1e-6), Err(Error::InvalidInterval { .. })));
        assert!(matches!(e(5.0, 5.0, 1e-7, 1e-6), Err(Error::InvalidInterval { .. })));
        assert!(matches!(e(2.0, f64::INFINITY, 1e-7, 1e-6), Err(Error::InvalidInterval { .. })));
        assert!(matches!(e(2.0, 5.0, f64::NAN, 1e-6), Err(Error::Domain(_))));
        assert!(matches!(e(2.0, 5.0, 1e-7, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn estimator_matches_brute_force_argmax() {
        let tol = 1e-5;
        let h = 2.0;
        let search = SearchInterval::default_for_height(h);
        for case in 0..20u64 {
            let p = default_parameters().with_tx_power(1.0 + 20.0 * case as f64);
            let g = Geometry::new(h, 0.5 + 0.1 * case as f64).unwrap();
            let x = simulate_observation(&p, &g, 99, case).unwrap().x;
            let est = estimate_range(&p, h, x, search, tol).unwrap();
            let n = 1_000_000;
            let step = (search.hi - search.lo) / (n - 1) as f64;
            let (mut best_d, mut best) = (search.lo, f64::NEG_INFINITY);
            for i in 0..n {
                let d = search.lo + step * i as f64;
                let v = log_likelihood_unchecked(&p, h, d, x);
                if v > best {
                    best = v;
                    best_d = d;
                }
            }
            assert!((est.distance - best_d).abs() <= 2.0 * tol, "case {case}: {} vs {best_d}", est.distance);
        }
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let p = default_parameters().with_order(50.0);
        let g = Geometry::new(2.0, 1.0).unwrap();
        let run = || run_monte_carlo(&p, &g, 500, 7, SearchInterval::default_for_height(2.0), 1e-7).unwrap();
        let a = run();
        let b = run();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.rmse >= a.bias.abs());
        assert!(a.failures <= a.trials);
    }

    #[test]
    fn monte_carlo_precondition() {
        let p = default_parameters();
        let g = Geometry::new(2.0, 0.0).unwrap();
        assert!(matches!(
            run_monte_carlo(&p, &g, 99, 1, SearchInterval::default_for_height(2.0), 1e-6),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn more_power_shrinks_rmse() {
        let g = Geometry::new(2.0, 1.0).unwrap();
        let search = SearchInterval::default_for_height(2.0);
        let base = default_parameters().with_order(50.0);
        let low = run_monte_carlo(&base, &g, 2000, 5, search, 1e-8).unwrap();
        let high = run_monte_carlo(&base.with_tx_power(100.0), &g, 2000, 5, search, 1e-8).unwrap();
        assert!(high.rmse < low.rmse, "{low:?} {high:?}");
        assert!((0.8..=1.05).contains(&high.efficiency), "{high:?}");
    }
}
