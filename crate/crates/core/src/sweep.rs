//! Dense grid evaluation of the noise and bound quantities, and the search
//! for the Lambertian order that minimizes the bound.
//!
//! Grids are ordered (m, P_t, h, ell), row major: ell varies fastest.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize, Serializer};

use crate::bounds::{self, ser_f64_or_inf};
use crate::channel::Geometry;
use crate::error::{Error, Result};
use crate::optimize::{self, linspace};
use crate::sysparams::SystemParameters;

/// `[min, max]` sampled at `steps` evenly spaced points (`steps = 1` gives
/// just `min`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl AxisRange {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps }
    }

    pub fn point(v: f64) -> Self {
        Self::new(v, v, 1)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            vec![self.min]
        } else {
            linspace(self.min, self.max, self.steps).collect()
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::validation(name, "range ends must be finite"));
        }
        if self.min > self.max {
            return Err(Error::validation(name, "min must not exceed max"));
        }
        if self.steps == 0 {
            return Err(Error::validation(name, "steps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    NoiseTotal,
    CrlbSqrt,
    CrlbSqrtLegacy,
    Ratio,
    Fisher,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::NoiseTotal => "noise_total",
            Quantity::CrlbSqrt => "crlb_sqrt",
            Quantity::CrlbSqrtLegacy => "crlb_sqrt_legacy",
            Quantity::Ratio => "ratio",
            Quantity::Fisher => "fisher",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub ell_range: AxisRange,
    pub h_range: AxisRange,
    pub p_t_list: Vec<f64>,
    pub m_list: Vec<f64>,
    pub quantity: Quantity,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.ell_range.check("ell_range")?;
        self.h_range.check("h_range")?;
        if self.ell_range.min < 0.0 {
            return Err(Error::validation("ell_range", "horizontal distance must be >= 0"));
        }
        if self.h_range.min <= 0.0 {
            return Err(Error::validation("h_range", "height must be > 0"));
        }
        for (name, list) in [("p_t_list", &self.p_t_list), ("m_list", &self.m_list)] {
            if list.is_empty() {
                return Err(Error::validation(name, "list must not be empty"));
            }
            if list.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::validation(name, "entries must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Spec evaluating a single point.
    pub fn single(p_t: f64, m: f64, h: f64, ell: f64, quantity: Quantity) -> Self {
        Self {
            ell_range: AxisRange::point(ell),
            h_range: AxisRange::point(h),
            p_t_list: vec![p_t],
            m_list: vec![m],
            quantity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAxes {
    pub m: Vec<f64>,
    pub p_t: Vec<f64>,
    pub h: Vec<f64>,
    pub ell: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMeta {
    pub parameters: SystemParameters,
    pub spec: SweepSpec,
    pub order: [&'static str; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub quantity: Quantity,
    pub axes: SweepAxes,
    #[serde(serialize_with = "ser_values")]
    pub values: Vec<f64>,
    pub meta: SweepMeta,
}

fn ser_values<S: Serializer>(values: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(values.len()))?;
    for v in values {
        #[derive(Serialize)]
        struct Cell(#[serde(serialize_with = "ser_f64_or_inf")] f64);
        seq.serialize_element(&Cell(*v))?;
    }
    seq.end()
}

fn evaluate(p: &SystemParameters, g: &Geometry, quantity: Quantity) -> Result<f64> {
    let b = bounds::bound_at(p, g)?;
    Ok(match quantity {
        Quantity::NoiseTotal => b.noise.var_total,
        Quantity::CrlbSqrt => b.crlb_sqrt,
        Quantity::CrlbSqrtLegacy => b.crlb_sqrt_legacy,
        Quantity::Ratio => b.ratio,
        Quantity::Fisher => b.fisher,
    })
}

pub fn run_sweep(p: &SystemParameters, spec: &SweepSpec) -> Result<SweepResult> {
    use rayon::prelude::*;

    spec.validate()?;
    let axes = SweepAxes {
        m: spec.m_list.clone(),
        p_t: spec.p_t_list.clone(),
        h: spec.h_range.values(),
        ell: spec.ell_range.values(),
    };
    let mut variants = Vec::with_capacity(axes.m.len() * axes.p_t.len());
    for &m in &axes.m {
        for &pt in &axes.p_t {
            let v = p.with_order(m).with_tx_power(pt);
            v.validate()?;
            variants.push(v);
        }
    }
    let (nh, nl) = (axes.h.len(), axes.ell.len());
    let plane = nh * nl;
    let values = (0..variants.len() * plane)
        .into_par_iter()
        .map(|i| {
            let params = &variants[i / plane];
            let g = Geometry::new(axes.h[(i % plane) / nl], axes.ell[i % nl])?;
            evaluate(params, &g, spec.quantity)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SweepResult {
        quantity: spec.quantity,
        axes,
        values,
        meta: SweepMeta {
            parameters: *p,
            spec: spec.clone(),
            order: ["m", "P_t", "h", "ell"],
        },
    })
}

impl SweepResult {
    pub fn shape(&self) -> [usize; 4] {
        [self.axes.m.len(), self.axes.p_t.len(), self.axes.h.len(), self.axes.ell.len()]
    }

    pub fn index(&self, i_m: usize, i_pt: usize, i_h: usize, i_ell: usize) -> usize {
        let [_, np, nh, nl] = self.shape();
        ((i_m * np + i_pt) * nh + i_h) * nl + i_ell
    }

    pub fn value(&self, i_m: usize, i_pt: usize, i_h: usize, i_ell: usize) -> f64 {
        self.values[self.index(i_m, i_pt, i_h, i_ell)]
    }

    /// Unweighted arithmetic mean over the ell axis, shaped (m, P_t, h).
    pub fn mean_over_ell(&self) -> Vec<f64> {
        let nl = self.axes.ell.len();
        self.values
            .chunks(nl)
            .map(|row| row.iter().sum::<f64>() / nl as f64)
            .collect()
    }

    /// One row per grid point: `m,P_t_W,h_m,ell_m,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,P_t_W,h_m,ell_m,value\n");
        let mut i = 0;
        for m in &self.axes.m {
            for pt in &self.axes.p_t {
                for h in &self.axes.h {
                    for ell in &self.axes.ell {
                        let _ = writeln!(out, "{m},{pt},{h},{ell},{}", self.values[i]);
                        i += 1;
                    }
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep result serializes")
    }
}

/// Coarse grid used by [`find_m_opt`].
pub const M_OPT_GRID: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MOpt {
    pub m_opt: f64,
    pub crlb_sqrt: f64,
    /// The minimizer sits at an end of the searched range.
    pub at_boundary: bool,
}

/// Lambertian order minimizing √CRLB at a fixed placement.
pub fn find_m_opt(p: &SystemParameters, g: &Geometry, m_range: (f64, f64), tol: f64) -> Result<MOpt> {
    find_m_opt_with_grid(p, g, m_range, tol, M_OPT_GRID)
}

pub fn find_m_opt_with_grid(
    p: &SystemParameters,
    g: &Geometry,
    (m_lo, m_hi): (f64, f64),
    tol: f64,
    grid: usize,
) -> Result<MOpt> {
    if g.ell <= 0.0 {
        return Err(Error::Precondition(
            "directly below the LED (ell = 0) the bound decreases monotonically in m, so no optimal order exists"
                .into(),
        ));
    }
    if !(1.0 <= m_lo && m_lo < m_hi && m_hi <= 200.0) {
        return Err(Error::Precondition(format!(
            "m range must satisfy 1 <= m_lo < m_hi <= 200, got [{m_lo}, {m_hi}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    // validate once; the closure below cannot fail afterwards
    bounds::crlb_sqrt(&p.with_order(m_lo), g)?;
    let best = optimize::grid_golden_max(
        |m| -bounds::crlb_sqrt(&p.with_order(m), g).unwrap_or(f64::INFINITY),
        m_lo,
        m_hi,
        grid,
        tol,
    );
    Ok(MOpt {
        m_opt: best.x,
        crlb_sqrt: -best.value,
        at_boundary: best.at_boundary,
    })
}

/// Closed-form approximation m_opt ≈ −(2 + 1/ln cos φ) + √(1 + (1/ln cos φ)²).
pub fn m_opt_approximation(phi: f64) -> Result<f64> {
    if !(phi > 0.0 && phi < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!("angle {phi} rad is outside (0, π/2)")));
    }
    let inv = 1.0 / phi.cos().ln();
    Ok(-(2.0 + inv) + (1.0 + inv * inv).sqrt())
}
