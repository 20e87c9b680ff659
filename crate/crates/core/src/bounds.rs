//! Fisher information and Cramér–Rao bounds for range estimation.
//!
//! The observation is x ~ N(P₀(d) + P_diff, σ₀²(d)) where both the mean and
//! the variance depend on d through P₀. For a Gaussian whose mean μ and
//! variance v depend on a scalar parameter,
//!
//! ```text
//! I(d) = μ'² / v + v'² / (2 v²)
//! ```
//!
//! and with v' = 2qB·P₀' this becomes P₀'²·(2(qB)²/σ₀⁴ + 1/σ₀²).
//!
//! Alongside the closed form this module carries two numerical oracles: one
//! that differentiates μ and v by central differences, and a Monte Carlo
//! estimate of E[score²].

use serde::{Serialize, Serializer};

use crate::channel::{self, Geometry};
use crate::error::{Error, Result};
use crate::mle;
use crate::noise::{self, NoiseBreakdown};
use crate::rng;
use crate::sysparams::SystemParameters;

/// Serialize non-finite values as the string `"inf"` (JSON has no infinity).
pub(crate) fn ser_f64_or_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v == f64::INFINITY {
        s.serialize_str("inf")
    } else {
        s.serialize_str(&format!("{v}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundResult {
    /// Fisher information for d, 1/m².
    pub fisher: f64,
    /// √CRLB with the signal-dependent noise model, m.
    #[serde(serialize_with = "ser_f64_or_inf")]
    pub crlb_sqrt: f64,
    /// √CRLB treating the noise as distance independent, m.
    #[serde(serialize_with = "ser_f64_or_inf")]
    pub crlb_sqrt_legacy: f64,
    /// crlb_sqrt / crlb_sqrt_legacy.
    pub ratio: f64,
    pub noise: NoiseBreakdown,
}

fn positive_total(n: &NoiseBreakdown) -> Result<f64> {
    if n.var_total > 0.0 {
        Ok(n.var_total)
    } else {
        Err(Error::DegenerateModel)
    }
}

fn qb(p: &SystemParameters) -> f64 {
    p.q * p.bandwidth
}

pub fn fisher_information(p: &SystemParameters, g: &Geometry) -> Result<f64> {
    let var = positive_total(&noise::total_noise(p, g)?)?;
    let slope = channel::dp0_dd(p, g);
    let qb = qb(p);
    Ok(slope * slope * (2.0 * qb * qb / (var * var) + 1.0 / var))
}

fn crlb_from(var: f64, slope: f64, qb: f64) -> f64 {
    if slope == 0.0 {
        return f64::INFINITY;
    }
    var / (slope.abs() * (var + 2.0 * qb * qb).sqrt())
}

/// √CRLB = σ₀² / (|∂P₀/∂d| · √(σ₀² + 2(qB)²)), m. Infinite when the
/// observation carries no information about d.
pub fn crlb_sqrt(p: &SystemParameters, g: &Geometry) -> Result<f64> {
    let var = positive_total(&noise::total_noise(p, g)?)?;
    Ok(crlb_from(var, channel::dp0_dd(p, g), qb(p)))
}

/// Constant-noise bound σ_T / |∂P₀/∂d|: no shot-noise variance and no
/// information carried by the variance.
pub fn crlb_sqrt_legacy(p: &SystemParameters, g: &Geometry) -> Result<f64> {
    let floor = noise::floor_variance(p);
    if floor <= 0.0 {
        return Err(Error::DegenerateModel);
    }
    let slope = channel::dp0_dd(p, g);
    if slope == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(floor.sqrt() / slope.abs())
}

pub fn bound_at(p: &SystemParameters, g: &Geometry) -> Result<BoundResult> {
    let noise = noise::total_noise(p, g)?;
    let var = positive_total(&noise)?;
    if noise.var_floor <= 0.0 {
        return Err(Error::DegenerateModel);
    }
    let slope = channel::dp0_dd(p, g);
    let qb = qb(p);
    let fisher = slope * slope * (2.0 * qb * qb / (var * var) + 1.0 / var);
    let crlb_sqrt = crlb_from(var, slope, qb);
    let crlb_sqrt_legacy = if slope == 0.0 {
        f64::INFINITY
    } else {
        noise.var_floor.sqrt() / slope.abs()
    };
    // The slope cancels in the ratio, which keeps it finite at P_t = 0.
    let ratio = var / ((var + 2.0 * qb * qb).sqrt() * noise.var_floor.sqrt());
    Ok(BoundResult {
        fisher,
        crlb_sqrt,
        crlb_sqrt_legacy,
        ratio,
        noise,
    })
}

/// Fisher information from the general Gaussian formula with μ' and v'
/// taken by central differences of step `step` along d (h fixed).
pub fn fisher_numeric_fd(p: &SystemParameters, g: &Geometry, step: f64) -> Result<f64> {
    if !(step > 0.0 && step < 0.1 * g.d) {
        return Err(Error::StepSize { step, distance: g.d });
    }
    let mean = |d: f64| channel::los_power_hd(p, g.h, d) + p.diffuse_power;
    let var = |d: f64| noise::var_total_hd(p, g.h, d);
    let v = var(g.d);
    if v <= 0.0 {
        return Err(Error::DegenerateModel);
    }
    let dmean = (mean(g.d + step) - mean(g.d - step)) / (2.0 * step);
    let dvar = (var(g.d + step) - var(g.d - step)) / (2.0 * step);
    Ok(dmean * dmean / v + dvar * dvar / (2.0 * v * v))
}

/// Default finite-difference step, 1e-5·d.
pub fn default_fd_step(g: &Geometry) -> f64 {
    1e-5 * g.d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherEstimate {
    pub trials: usize,
    pub seed: u64,
    /// Sample mean of score².
    pub fisher: f64,
    pub std_error: f64,
    /// Sample mean of the score itself (zero in expectation).
    pub score_mean: f64,
    pub score_std_error: f64,
}

pub const MIN_MC_TRIALS: usize = 10_000;

/// Monte Carlo estimate of E[score²] at the true distance. Trial `i` draws
/// x from stream `i` of `seed`.
pub fn fisher_numeric_mc(
    p: &SystemParameters,
    g: &Geometry,
    trials: usize,
    seed: u64,
) -> Result<FisherEstimate> {
    if trials < MIN_MC_TRIALS {
        return Err(Error::Precondition(format!(
            "Monte Carlo Fisher estimate needs at least {MIN_MC_TRIALS} trials, got {trials}"
        )));
    }
    let mean = channel::received_power_total(p, g);
    let sigma = positive_total(&noise::total_noise(p, g)?)?.sqrt();
    // validates the geometry once so the per-trial calls cannot fail
    mle::score(p, g.h, g.d, mean)?;
    let scores = rng::map_trials(trials, |i| {
        let x = mean + sigma * rng::trial_normal(seed, i);
        mle::score(p, g.h, g.d, x).expect("geometry validated")
    });

    let n = trials as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for s in &scores {
        s1 += s;
        s2 += s * s;
    }
    let score_mean = s1 / n;
    let fisher = s2 / n;
    let (mut v1, mut v2) = (0.0, 0.0);
    for s in &scores {
        v1 += (s - score_mean).powi(2);
        v2 += (s * s - fisher).powi(2);
    }
    Ok(FisherEstimate {
        trials,
        seed,
        fisher,
        std_error: (v2 / (n - 1.0) / n).sqrt(),
        score_mean,
        score_std_error: (v1 / (n - 1.0) / n).sqrt(),
    })
}
