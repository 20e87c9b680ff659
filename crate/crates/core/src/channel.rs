//! Lambertian line-of-sight channel with the LED pointing straight down and
//! the photodiode pointing straight up, so the irradiance and incidence
//! angles coincide and cos φ = h/d.
//!
//! Distance derivatives are partials along d with the height h held fixed.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sysparams::SystemParameters;

/// Transmitter/receiver placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Geometry {
    /// Vertical distance, m.
    pub h: f64,
    /// Horizontal distance, m.
    pub ell: f64,
    /// Euclidean distance, m.
    pub d: f64,
}

impl Geometry {
    pub fn new(h: f64, ell: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::validation("h", "vertical distance must be finite and > 0"));
        }
        if !(ell.is_finite() && ell >= 0.0) {
            return Err(Error::validation("ell", "horizontal distance must be finite and >= 0"));
        }
        Ok(Self { h, ell, d: h.hypot(ell) })
    }

    /// Placement at Euclidean distance `d` for a known height `h`.
    pub fn from_distance(h: f64, d: f64) -> Result<Self> {
        if !(d.is_finite() && d >= h) {
            return Err(Error::Domain(format!("distance {d} is below the height {h}")));
        }
        let ell = ((d - h) * (d + h)).sqrt();
        Geometry::new(h, ell).map(|g| Self { d, ..g })
    }

    /// cos φ = h/d, shared by the irradiance and incidence angles.
    pub fn cos_angle(&self) -> f64 {
        self.h / self.d
    }

    /// Incidence angle, rad.
    pub fn incidence_angle(&self) -> f64 {
        self.cos_angle().min(1.0).acos()
    }
}

fn within_fov(p: &SystemParameters, h: f64, d: f64) -> bool {
    (h / d).min(1.0).acos() <= p.fov
}

/// R_p · P_t · (m+1) S T_s g / (2π): the factor common to P₀ and its
/// derivatives.
fn power_prefactor(p: &SystemParameters) -> f64 {
    p.responsivity * p.tx_power * (p.lambertian_order + 1.0) * p.area * p.filter_gain
        * p.concentrator_gain
        / (2.0 * PI)
}

/// (h/d)^(m+1) / d², i.e. h^(m+1)/d^(m+3) without overflowing for large m.
fn decay(m: f64, h: f64, d: f64) -> f64 {
    (h / d).powf(m + 1.0) / (d * d)
}

/// LOS DC gain: (m+1)S/(2πd²)·cos^m φ·T_s·g·cos φ inside the field of view,
/// zero outside. The boundary angle counts as inside.
pub fn los_gain(p: &SystemParameters, g: &Geometry) -> f64 {
    if !within_fov(p, g.h, g.d) {
        return 0.0;
    }
    let m = p.lambertian_order;
    let cos = g.cos_angle();
    (m + 1.0) * p.area / (2.0 * PI * g.d * g.d)
        * cos.powf(m)
        * p.filter_gain
        * p.concentrator_gain
        * cos
}

pub(crate) fn los_power_hd(p: &SystemParameters, h: f64, d: f64) -> f64 {
    if !within_fov(p, h, d) {
        return 0.0;
    }
    power_prefactor(p) * decay(p.lambertian_order, h, d)
}

pub(crate) fn dp0_dd_hd(p: &SystemParameters, h: f64, d: f64) -> f64 {
    if !within_fov(p, h, d) {
        return 0.0;
    }
    -power_prefactor(p) * (p.lambertian_order + 3.0) * decay(p.lambertian_order, h, d) / d
}

pub(crate) fn d2p0_dd2_hd(p: &SystemParameters, h: f64, d: f64) -> f64 {
    if !within_fov(p, h, d) {
        return 0.0;
    }
    let m = p.lambertian_order;
    power_prefactor(p) * (m + 3.0) * (m + 4.0) * decay(m, h, d) / (d * d)
}

/// LOS received power P₀ = R_p P_t (m+1) S/(2π) · h^(m+1)/d^(m+3), W.
pub fn received_los_power(p: &SystemParameters, g: &Geometry) -> f64 {
    los_power_hd(p, g.h, g.d)
}

/// Noise-free mean of the observation, P₀ + P_diff.
pub fn received_power_total(p: &SystemParameters, g: &Geometry) -> f64 {
    received_los_power(p, g) + p.diffuse_power
}

/// ∂P₀/∂d at fixed height, W/m. Negative whenever P₀ > 0.
pub fn dp0_dd(p: &SystemParameters, g: &Geometry) -> f64 {
    dp0_dd_hd(p, g.h, g.d)
}

/// ∂²P₀/∂d² at fixed height, W/m².
pub fn d2p0_dd2(p: &SystemParameters, g: &Geometry) -> f64 {
    d2p0_dd2_hd(p, g.h, g.d)
}

/// Lambertian order from the LED half-power semi-angle: m = −ln 2 / ln cos θ½.
pub fn lambertian_order_from_half_angle(theta_half: f64) -> Result<f64> {
    if !(theta_half > 0.0 && theta_half < PI / 2.0) {
        return Err(Error::Domain(format!(
            "half-power angle {theta_half} rad is outside (0, π/2)"
        )));
    }
    Ok(-std::f64::consts::LN_2 / theta_half.cos().ln())
}
