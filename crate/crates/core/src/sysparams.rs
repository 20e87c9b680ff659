//! Physical and device parameters of the link.
//!
//! Values are held in SI units. The external JSON form uses unit-suffixed
//! keys (`S_cm2`, `B_MHz`, ...) in the units a datasheet would quote them.
//! Power-of-ten unit changes are done by shifting the decimal exponent of the
//! number's text rather than by floating-point multiplication, so a value
//! read as `0.2` cm² becomes the correctly rounded `2e-5` m² and serialized
//! values parse back to the same bits.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::value::RawValue;

use crate::error::{Error, Result};

/// Receiver, transmitter and physical constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemParameters {
    /// Electron charge, C.
    pub q: f64,
    /// Boltzmann constant, J/K.
    pub kappa: f64,
    /// Absolute temperature, K.
    pub temperature: f64,
    /// Open-loop voltage gain of the preamplifier.
    pub open_loop_gain: f64,
    /// Fixed photodetector capacitance per unit area, F/m².
    pub capacitance: f64,
    /// FET channel noise factor.
    pub channel_noise_factor: f64,
    /// Equivalent noise bandwidth, Hz.
    pub bandwidth: f64,
    /// FET transconductance, S.
    pub transconductance: f64,
    /// Noise bandwidth factor I₂.
    pub i2: f64,
    /// Noise bandwidth factor I₃.
    pub i3: f64,
    /// Photodiode responsivity, A/W.
    pub responsivity: f64,
    /// Background spectral irradiance, W/(m²·nm).
    pub background_irradiance: f64,
    /// Optical filter bandwidth, nm.
    pub filter_bandwidth_nm: f64,
    /// Photodiode dark current, A.
    pub dark_current: f64,
    /// Detector active area, m².
    pub area: f64,
    /// Transmitted optical power, W.
    pub tx_power: f64,
    /// Diffuse (non-LOS) received power term, W.
    pub diffuse_power: f64,
    /// Lambertian emission order of the LED.
    pub lambertian_order: f64,
    /// Optical filter gain.
    pub filter_gain: f64,
    /// Optical concentrator gain.
    pub concentrator_gain: f64,
    /// Receiver field of view, rad.
    pub fov: f64,
}

impl Default for SystemParameters {
    fn default() -> Self {
        default_parameters()
    }
}

/// Typical indoor link values: a silicon PIN photodiode behind a FET
/// preamplifier, 1 W Lambertian (m = 1) LED, no diffuse term.
pub fn default_parameters() -> SystemParameters {
    SystemParameters {
        q: 1.6e-19,
        kappa: 1.38e-23,
        temperature: 300.0,
        open_loop_gain: 10.0,
        capacitance: 1.12e-6,
        channel_noise_factor: 1.5,
        bandwidth: 4.0e8,
        transconductance: 0.03,
        i2: 0.562,
        i3: 0.0868,
        responsivity: 0.4,
        background_irradiance: 5.8e-2,
        filter_bandwidth_nm: 400.0,
        dark_current: 5e-12,
        area: 2.0e-5,
        tx_power: 1.0,
        diffuse_power: 0.0,
        lambertian_order: 1.0,
        filter_gain: 1.0,
        concentrator_gain: 1.0,
        fov: FRAC_PI_2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scale {
    /// SI value = external value × 10^k.
    Pow10(i32),
    Degrees,
}

/// One entry of the external JSON schema.
#[derive(Clone, Copy)]
pub struct ParamKey {
    pub key: &'static str,
    /// Unit of the external value.
    pub unit: &'static str,
    /// Unit of the internal SI value.
    pub si_unit: &'static str,
    scale: Scale,
    get: fn(&SystemParameters) -> f64,
    set: fn(&mut SystemParameters, f64),
}

impl std::fmt::Debug for ParamKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParamKey").field("key", &self.key).finish()
    }
}

macro_rules! key {
    ($key:literal, $unit:literal, $si:literal, $scale:expr, $field:ident) => {
        ParamKey {
            key: $key,
            unit: $unit,
            si_unit: $si,
            scale: $scale,
            get: |p| p.$field,
            set: |p, v| p.$field = v,
        }
    };
}

/// The external schema, in serialization order.
pub const PARAM_KEYS: [ParamKey; 21] = [
    key!("q_C", "C", "C", Scale::Pow10(0), q),
    key!("kappa_JK", "J/K", "J/K", Scale::Pow10(0), kappa),
    key!("T_e_K", "K", "K", Scale::Pow10(0), temperature),
    key!("G_ol", "1", "1", Scale::Pow10(0), open_loop_gain),
    key!("eta_pF_cm2", "pF/cm^2", "F/m^2", Scale::Pow10(-8), capacitance),
    key!("Gamma", "1", "1", Scale::Pow10(0), channel_noise_factor),
    key!("B_MHz", "MHz", "Hz", Scale::Pow10(6), bandwidth),
    key!("g_m_mS", "mS", "S", Scale::Pow10(-3), transconductance),
    key!("I2", "1", "1", Scale::Pow10(0), i2),
    key!("I3", "1", "1", Scale::Pow10(0), i3),
    key!("R_p_A_W", "A/W", "A/W", Scale::Pow10(0), responsivity),
    key!("p_BS_W_cm2_nm", "W/(cm^2 nm)", "W/(m^2 nm)", Scale::Pow10(4), background_irradiance),
    key!("lambda_nm", "nm", "nm", Scale::Pow10(0), filter_bandwidth_nm),
    key!("I_DC_pA", "pA", "A", Scale::Pow10(-12), dark_current),
    key!("S_cm2", "cm^2", "m^2", Scale::Pow10(-4), area),
    key!("P_t_W", "W", "W", Scale::Pow10(0), tx_power),
    key!("P_diff_W", "W", "W", Scale::Pow10(0), diffuse_power),
    key!("m", "1", "1", Scale::Pow10(0), lambertian_order),
    key!("T_s", "1", "1", Scale::Pow10(0), filter_gain),
    key!("g_conc", "1", "1", Scale::Pow10(0), concentrator_gain),
    key!("phi_con_deg", "deg", "rad", Scale::Degrees, fov),
];

pub fn lookup_key(key: &str) -> Result<&'static ParamKey> {
    PARAM_KEYS
        .iter()
        .find(|k| k.key == key)
        .ok_or_else(|| Error::UnknownKey(key.to_string()))
}

impl ParamKey {
    /// SI value held by `p` for this key.
    pub fn si_value(&self, p: &SystemParameters) -> f64 {
        (self.get)(p)
    }

    /// Value of this key in external units, as it would be serialized.
    pub fn external_value(&self, p: &SystemParameters) -> f64 {
        self.external_text(p)
            .parse()
            .expect("external text is a valid number")
    }

    /// Parse `text` (a JSON number in external units) and store it in `p`.
    pub fn apply(&self, p: &mut SystemParameters, text: &str) -> Result<()> {
        let text = text.trim();
        // serde_json checks the JSON number grammar; the value itself comes
        // from the correctly rounded std parser
        serde_json::from_str::<f64>(text)
            .map_err(|_| Error::Parse(format!("`{}`: expected a number, got `{text}`", self.key)))?;
        let external: f64 = text
            .parse()
            .map_err(|_| Error::Parse(format!("`{}`: malformed number `{text}`", self.key)))?;
        let si = match self.scale {
            Scale::Pow10(k) => shift_decimal(text, k)
                .ok_or_else(|| Error::Parse(format!("`{}`: malformed number `{text}`", self.key)))?,
            Scale::Degrees => external.to_radians(),
        };
        (self.set)(p, si);
        Ok(())
    }

    fn external_text(&self, p: &SystemParameters) -> String {
        let si = (self.get)(p);
        match self.scale {
            Scale::Pow10(0) => format!("{si}"),
            Scale::Pow10(k) => {
                // Shift the shortest representation of the SI value; prefer the
                // shortest form of the result when it survives the trip back.
                let raw = shifted_text(&format!("{si:e}"), -k);
                let pretty = raw.parse::<f64>().map(|v| format!("{v}"));
                match pretty {
                    Ok(s) if shift_decimal(&s, k) == Some(si) => s,
                    _ => raw,
                }
            }
            Scale::Degrees => format!("{}", degrees_for(si)),
        }
    }
}

/// Degree value whose conversion back to radians reproduces `rad`, when one
/// exists within a few ulps of the naive conversion.
fn degrees_for(rad: f64) -> f64 {
    let naive = rad.to_degrees();
    if !naive.is_finite() {
        return naive;
    }
    let mut best = naive;
    let mut best_err = f64::INFINITY;
    let mut down = naive;
    let mut up = naive;
    for _ in 0..=16 {
        for c in [down, up] {
            let err = (c.to_radians() - rad).abs();
            if err < best_err {
                best = c;
                best_err = err;
            }
            if err == 0.0 {
                return c;
            }
        }
        down = down.next_down();
        up = up.next_up();
    }
    best
}

/// Rewrite a decimal number text with its exponent increased by `k`.
fn shifted_text(text: &str, k: i32) -> String {
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i64>().unwrap_or(0)),
        None => (text, 0),
    };
    format!("{mantissa}e{}", exp.saturating_add(i64::from(k)))
}

/// Exact decimal scaling by 10^k: the result is the correctly rounded value
/// of the number written in `text` times 10^k.
fn shift_decimal(text: &str, k: i32) -> Option<f64> {
    if k == 0 {
        return text.parse().ok();
    }
    if let Some(i) = text.find(['e', 'E']) {
        text[i + 1..].parse::<i64>().ok()?;
    }
    shifted_text(text, k).parse().ok()
}

fn check(cond: bool, key: &str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::validation(key, reason))
    }
}

impl SystemParameters {
    /// Check every field invariant; the error names the first violated key.
    pub fn validate(&self) -> Result<()> {
        for k in &PARAM_KEYS {
            check(k.si_value(self).is_finite(), k.key, "must be finite")?;
        }
        let positive = [
            ("q_C", self.q),
            ("kappa_JK", self.kappa),
            ("T_e_K", self.temperature),
            ("G_ol", self.open_loop_gain),
            ("B_MHz", self.bandwidth),
            ("g_m_mS", self.transconductance),
            ("R_p_A_W", self.responsivity),
            ("S_cm2", self.area),
        ];
        for (key, v) in positive {
            check(v > 0.0, key, "must be strictly positive")?;
        }
        let non_negative = [
            ("eta_pF_cm2", self.capacitance),
            ("Gamma", self.channel_noise_factor),
            ("I2", self.i2),
            ("I3", self.i3),
            ("p_BS_W_cm2_nm", self.background_irradiance),
            ("lambda_nm", self.filter_bandwidth_nm),
            ("I_DC_pA", self.dark_current),
            ("P_t_W", self.tx_power),
            ("P_diff_W", self.diffuse_power),
            ("m", self.lambertian_order),
            ("T_s", self.filter_gain),
            ("g_conc", self.concentrator_gain),
        ];
        for (key, v) in non_negative {
            check(v >= 0.0, key, "must be non-negative")?;
        }
        check(
            self.fov > 0.0 && self.fov <= FRAC_PI_2,
            "phi_con_deg",
            "must lie in (0, 90] degrees",
        )
    }

    /// Copy with a different Lambertian order.
    pub fn with_order(mut self, m: f64) -> Self {
        self.lambertian_order = m;
        self
    }

    /// Copy with a different transmitted power.
    pub fn with_tx_power(mut self, p_t: f64) -> Self {
        self.tx_power = p_t;
        self
    }
}

/// Parse a JSON parameter document. Omitted keys take their defaults.
pub fn parse_parameters(document: &str) -> Result<SystemParameters> {
    let mut p = default_parameters();
    apply_document(&mut p, document, |_| {})?;
    p.validate()?;
    Ok(p)
}

/// Apply the keys of a JSON document on top of `p` without validating.
/// `seen` is called with every applied key, in schema order.
pub fn apply_document(
    p: &mut SystemParameters,
    document: &str,
    mut seen: impl FnMut(&'static str),
) -> Result<()> {
    let entries: HashMap<String, Box<RawValue>> =
        serde_json::from_str(document).map_err(|e| Error::Parse(e.to_string()))?;
    let mut unknown: Vec<&String> = entries
        .keys()
        .filter(|k| lookup_key(k).is_err())
        .collect();
    unknown.sort();
    if let Some(k) = unknown.first() {
        return Err(Error::UnknownKey((*k).clone()));
    }
    for k in &PARAM_KEYS {
        if let Some(raw) = entries.get(k.key) {
            k.apply(p, raw.get())?;
            seen(k.key);
        }
    }
    Ok(())
}

/// Serialize to the external JSON schema, one key per line in schema order.
pub fn serialize_parameters(p: &SystemParameters) -> String {
    let mut out = String::from("{\n");
    for (i, k) in PARAM_KEYS.iter().enumerate() {
        let sep = if i + 1 < PARAM_KEYS.len() { "," } else { "" };
        let _ = writeln!(out, "  \"{}\": {}{}", k.key, k.external_text(p), sep);
    }
    out.push('}');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_match_datasheet_values_in_si() {
        let p = default_parameters();
        assert_eq!(p.dark_current, 5e-12);
        assert_eq!(p.i2, 0.562);
        assert_eq!(p.i3, 0.0868);
        assert_eq!(p.area, 2.0e-5);
        assert_eq!(p.background_irradiance, 5.8e-2);
        assert_eq!(p.capacitance, 1.12e-6);
        assert_eq!(p.transconductance, 0.03);
        assert_eq!(p.bandwidth, 4.0e8);
        assert_eq!(p.fov, FRAC_PI_2);
        p.validate().unwrap();
    }

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(parse_parameters("{}").unwrap(), default_parameters());
    }

    #[test]
    fn single_override() {
        let p = parse_parameters(r#"{"P_t_W": 5.0}"#).unwrap();
        assert_eq!(p, default_parameters().with_tx_power(5.0));
    }

    #[test]
    fn unit_suffixed_keys_are_converted() {
        let p = parse_parameters(
            r#"{"S_cm2": 0.2, "B_MHz": 400, "eta_pF_cm2": 112, "g_m_mS": 30,
                "I_DC_pA": 5, "p_BS_W_cm2_nm": 5.8e-6, "phi_con_deg": 90}"#,
        )
        .unwrap();
        assert_eq!(p, default_parameters());
    }

    #[test]
    fn negative_area_is_rejected() {
        let err = parse_parameters(r#"{"S_cm2": -1}"#).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "S_cm2"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = parse_parameters(r#"{"S_m2": 1e-5}"#).unwrap_err();
        assert_eq!(err, Error::UnknownKey("S_m2".into()));
    }

    #[test]
    fn non_numbers_are_rejected() {
        assert!(matches!(parse_parameters(r#"{"m": "1"}"#), Err(Error::Parse(_))));
        assert!(matches!(parse_parameters(r#"{"m": null}"#), Err(Error::Parse(_))));
        assert!(matches!(parse_parameters("[1, 2]"), Err(Error::Parse(_))));
        assert!(matches!(parse_parameters("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn fov_bounds() {
        assert!(parse_parameters(r#"{"phi_con_deg": 0}"#).is_err());
        assert!(parse_parameters(r#"{"phi_con_deg": 91}"#).is_err());
        assert!(parse_parameters(r#"{"phi_con_deg": 30}"#).is_ok());
    }

    #[test]
    fn zero_power_is_accepted() {
        let p = parse_parameters(r#"{"P_t_W": 0}"#).unwrap();
        assert_eq!(p.tx_power, 0.0);
    }

    #[test]
    fn default_serialization_reads_like_a_datasheet() {
        let text = serialize_parameters(&default_parameters());
        assert!(text.contains("\"S_cm2\": 0.2,"), "{text}");
        assert!(text.contains("\"B_MHz\": 400,"), "{text}");
        assert!(text.contains("\"eta_pF_cm2\": 112,"), "{text}");
        assert!(text.contains("\"phi_con_deg\": 90\n"), "{text}");
    }

    #[test]
    fn shift_decimal_is_exact_scaling() {
        assert_eq!(shift_decimal("0.2", -4), Some(2e-5));
        assert_eq!(shift_decimal("5.8E-6", 4), Some(5.8e-2));
        assert_eq!(shift_decimal("-1", 3), Some(-1000.0));
        assert_eq!(shift_decimal("1e+2", 1), Some(1000.0));
        assert_eq!(shift_decimal("abc", 1), None);
    }

    fn arb_params() -> impl Strategy<Value = SystemParameters> {
        let pos = || (1e-30f64..1e30).prop_map(|v| v);
        (
            (pos(), pos(), pos(), pos(), pos(), pos(), pos()),
            (pos(), pos(), pos(), pos(), pos(), pos(), pos()),
            (pos(), pos(), pos(), 0.0f64..200.0, pos(), pos(), 1e-6f64..FRAC_PI_2),
        )
            .prop_map(|(a, b, c)| SystemParameters {
                q: a.0,
                kappa: a.1,
                temperature: a.2,
                open_loop_gain: a.3,
                capacitance: a.4,
                channel_noise_factor: a.5,
                bandwidth: a.6,
                transconductance: b.0,
                i2: b.1,
                i3: b.2,
                responsivity: b.3,
                background_irradiance: b.4,
                filter_bandwidth_nm: b.5,
                dark_current: b.6,
                area: c.0,
                tx_power: c.1,
                diffuse_power: c.2,
                lambertian_order: c.3,
                filter_gain: c.4,
                concentrator_gain: c.5,
                fov: c.6,
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(p in arb_params()) {
            let back = parse_parameters(&serialize_parameters(&p)).unwrap();
            for k in &PARAM_KEYS {
                let (a, b) = (k.si_value(&p), k.si_value(&back));
                if k.scale == Scale::Degrees {
                    // degree text can only reach radian values to within an ulp
                    prop_assert!(a == b || a.next_up() == b || a.next_down() == b, "{}: {a} vs {b}", k.key);
                } else {
                    prop_assert_eq!(a.to_bits(), b.to_bits(), "{}", k.key);
                }
            }
        }

        #[test]
        fn normalization_is_idempotent(p in arb_params()) {
            let once = parse_parameters(&serialize_parameters(&p)).unwrap();
            let twice = parse_parameters(&serialize_parameters(&once)).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
