//! Receiver noise: thermal, background shot, dark-current shot and the
//! signal-dependent received shot noise, all Gaussian and summed in variance.
//!
//! Variances are expressed in the domain of the observation x = P₀ + P_diff + w
//! (the formulas are applied as written, with no current/power conversion).

use std::f64::consts::PI;

use serde::Serialize;

use crate::channel::{self, Geometry};
use crate::error::{Error, Result};
use crate::sysparams::SystemParameters;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseBreakdown {
    pub var_thermal: f64,
    pub var_background: f64,
    pub var_dark: f64,
    pub var_shot: f64,
    /// Signal-independent part, thermal + background + dark.
    pub var_floor: f64,
    /// var_floor + var_shot.
    pub var_total: f64,
}

/// σ²_TH = (8πκT/G)·η·S·I₂·B² + (16π²κTΓ/g_m)·η²S²·I₃·B³.
pub fn thermal_variance(p: &SystemParameters) -> f64 {
    let kt = p.kappa * p.temperature;
    let b = p.bandwidth;
    let feedback = 8.0 * PI * kt / p.open_loop_gain * p.capacitance * p.area * p.i2 * b * b;
    let channel = 16.0 * PI * PI * kt * p.channel_noise_factor / p.transconductance
        * p.capacitance.powi(2)
        * p.area.powi(2)
        * p.i3
        * b.powi(3);
    feedback + channel
}

/// σ²_BG = 2q·R_p·p_BS·S·λ̆·B.
pub fn background_variance(p: &SystemParameters) -> f64 {
    2.0 * p.q * p.responsivity * p.background_irradiance * p.area * p.filter_bandwidth_nm * p.bandwidth
}

/// σ²_DC = 2q·I_DC·B.
pub fn dark_current_variance(p: &SystemParameters) -> f64 {
    2.0 * p.q * p.dark_current * p.bandwidth
}

/// σ²_SS = 2q·P·B for total received power P.
pub fn shot_variance(p: &SystemParameters, received_power: f64) -> Result<f64> {
    if received_power.is_nan() || received_power < 0.0 {
        return Err(Error::Domain(format!(
            "received power must be non-negative, got {received_power}"
        )));
    }
    Ok(2.0 * p.q * received_power * p.bandwidth)
}

/// Signal-independent variance σ²_T.
pub fn floor_variance(p: &SystemParameters) -> f64 {
    thermal_variance(p) + background_variance(p) + dark_current_variance(p)
}

/// Breakdown at an arbitrary total received power.
pub fn noise_at_power(p: &SystemParameters, received_power: f64) -> Result<NoiseBreakdown> {
    let var_thermal = thermal_variance(p);
    let var_background = background_variance(p);
    let var_dark = dark_current_variance(p);
    let var_shot = shot_variance(p, received_power)?;
    let var_floor = var_thermal + var_background + var_dark;
    Ok(NoiseBreakdown {
        var_thermal,
        var_background,
        var_dark,
        var_shot,
        var_floor,
        var_total: var_floor + var_shot,
    })
}

pub fn total_noise(p: &SystemParameters, g: &Geometry) -> Result<NoiseBreakdown> {
    noise_at_power(p, channel::received_power_total(p, g))
}

/// σ₀² as a function of distance at fixed height.
pub(crate) fn var_total_hd(p: &SystemParameters, h: f64, d: f64) -> f64 {
    floor_variance(p) + 2.0 * p.q * (channel::los_power_hd(p, h, d) + p.diffuse_power) * p.bandwidth
}

/// ∂σ₀/∂d = (qB/σ₀)·∂P₀/∂d.
pub fn dsigma0_dd(p: &SystemParameters, g: &Geometry) -> Result<f64> {
    let var = total_noise(p, g)?.var_total;
    if var <= 0.0 {
        return Err(Error::DegenerateModel);
    }
    Ok(p.q * p.bandwidth / var.sqrt() * channel::dp0_dd(p, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysparams::default_parameters;
    use approx::assert_relative_eq;

    fn geom(h: f64, ell: f64) -> Geometry {
        Geometry::new(h, ell).unwrap()
    }

    #[test]
    fn noise_floor_components_at_defaults() {
        let p = default_parameters();
        assert_relative_eq!(thermal_variance(&p), 1.120718894165235e-13, max_relative = 1e-13);
        assert_relative_eq!(background_variance(&p), 2.37568e-14, max_relative = 1e-13);
        assert_relative_eq!(dark_current_variance(&p), 6.4e-22, max_relative = 1e-13);
        // published rounding
        assert_relative_eq!(thermal_variance(&p), 1.12e-13, max_relative = 0.01);
        assert_relative_eq!(background_variance(&p), 2.38e-14, max_relative = 0.01);
        assert_relative_eq!(floor_variance(&p), 1.36e-13, max_relative = 0.01);
    }

    #[test]
    fn zero_bandwidth_kills_every_term() {
        let mut p = default_parameters();
        p.bandwidth = 0.0;
        assert_eq!(thermal_variance(&p), 0.0);
        assert_eq!(background_variance(&p), 0.0);
        assert_eq!(dark_current_variance(&p), 0.0);
    }

    #[test]
    fn thermal_is_signal_independent() {
        let p = default_parameters();
        assert_eq!(thermal_variance(&p), thermal_variance(&p.with_tx_power(17.0)));
        let a = total_noise(&p, &geom(1.0, 0.0)).unwrap();
        let b = total_noise(&p, &geom(3.0, 2.0)).unwrap();
        assert_eq!(a.var_thermal, b.var_thermal);
        assert_eq!(a.var_floor, b.var_floor);
    }

    #[test]
    fn background_is_linear_in_area() {
        let mut p = default_parameters();
        let base = background_variance(&p);
        p.background_irradiance = 0.0;
        assert_eq!(background_variance(&p), 0.0);
        let mut p = default_parameters();
        p.area *= 2.0;
        assert_eq!(background_variance(&p), 2.0 * base);
        p.dark_current = 0.0;
        assert_eq!(dark_current_variance(&p), 0.0);
    }

    #[test]
    fn shot_noise_substitution() {
        let p = default_parameters();
        assert_eq!(shot_variance(&p, 0.0).unwrap(), 0.0);
        assert_relative_eq!(shot_variance(&p, 6.3662e-7).unwrap(), 8.148736e-17, max_relative = 1e-14);
        let mut wide = p;
        wide.bandwidth *= 3.0;
        assert_relative_eq!(shot_variance(&wide, 1e-6).unwrap(), 3.0 * shot_variance(&p, 1e-6).unwrap(), max_relative = 1e-15);
        assert_relative_eq!(shot_variance(&p, 2e-6).unwrap(), 2.0 * shot_variance(&p, 1e-6).unwrap(), max_relative = 1e-15);
        assert!(shot_variance(&p, -1e-9).is_err());
    }

    #[test]
    fn dark_total_with_transmitter_off() {
        let p = default_parameters().with_tx_power(0.0);
        let n = total_noise(&p, &geom(2.0, 1.0)).unwrap();
        assert_eq!(n.var_shot, 0.0);
        assert_eq!(n.var_total, n.var_floor);
        assert_relative_eq!(n.var_total, 1.36e-13, max_relative = 0.01);
    }

    #[test]
    fn breakdown_is_consistent() {
        let p = default_parameters().with_order(20.0);
        let n = total_noise(&p, &geom(1.5, 0.4)).unwrap();
        assert_eq!(n.var_total, n.var_floor + n.var_shot);
        assert_eq!(n.var_floor, n.var_thermal + n.var_background + n.var_dark);
        assert!(n.var_total >= n.var_floor);
    }

    #[test]
    fn shot_and_total_decrease_with_horizontal_distance() {
        let p = default_parameters().with_order(5.0);
        for h in [1.0, 2.0, 3.0] {
            let n: Vec<NoiseBreakdown> = (0..=20).map(|i| total_noise(&p, &geom(h, 0.1 * i as f64)).unwrap()).collect();
            assert!(n.windows(2).all(|w| w[1].var_shot < w[0].var_shot));
            assert!(n.windows(2).all(|w| w[1].var_total <= w[0].var_total));
        }
    }

    #[test]
    fn dsigma_matches_finite_difference() {
        for m in [1.0, 5.0, 50.0] {
            // large P_t so the shot term is visible in σ₀ at double precision
            let p = default_parameters().with_order(m).with_tx_power(1e3);
            for (h, ell) in [(1.0, 0.3), (2.0, 1.0), (3.0, 2.0), (1.5, 0.0)] {
                let g = geom(h, ell);
                let step = 1e-5 * g.d;
                let sigma = |d: f64| var_total_hd(&p, h, d).sqrt();
                let fd = (sigma(g.d + step) - sigma(g.d - step)) / (2.0 * step);
                let analytic = dsigma0_dd(&p, &g).unwrap();
                assert_relative_eq!(analytic, fd, max_relative = 1e-5);
                assert!(analytic < 0.0);
                // chain rule through the variance
                let var_fd = (var_total_hd(&p, h, g.d + step) - var_total_hd(&p, h, g.d - step)) / (2.0 * step);
                let s0 = total_noise(&p, &g).unwrap().var_total.sqrt();
                assert_relative_eq!(2.0 * s0 * analytic, var_fd, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn dsigma_without_signal_is_zero() {
        let p = default_parameters().with_tx_power(0.0);
        assert_eq!(dsigma0_dd(&p, &geom(2.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn dsigma_degenerate_model() {
        let mut p = default_parameters().with_tx_power(0.0);
        p.bandwidth = 0.0;
        assert_eq!(dsigma0_dd(&p, &geom(2.0, 1.0)), Err(Error::DegenerateModel));
    }
}
