//! System parameters and the derived scalar constants every objective
//! depends on.
//!
//! All fields are SI linear units. Decibel-scale values are accepted only
//! through [`SystemParams::from_config`], which takes a flat key/value map
//! with `_db`/`_dbm` suffixed keys (see the README for the full key list).

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units;

/// Physical and protocol constants of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Transmit power during the data phase, watts.
    pub tx_power: f64,
    /// Transmit power used to report the configuration to the surface, watts.
    pub feedback_power: f64,
    /// Power of each pilot tone during channel estimation, watts.
    pub pilot_power: f64,
    /// Communication bandwidth, Hz.
    pub bandwidth: f64,
    /// Feedback-link bandwidth, Hz.
    pub feedback_bandwidth: f64,
    /// Noise power spectral density, watts/Hz.
    pub noise_psd: f64,
    /// End-to-end path-loss attenuation, linear scale in (0, 1].
    pub path_loss: f64,
    /// Feedback-link path-loss attenuation, linear scale in (0, 1].
    pub feedback_path_loss: f64,
    /// Inverse efficiency of the data-phase transmit amplifier, >= 1.
    pub mu: f64,
    /// Inverse efficiency of the feedback transmit amplifier, >= 1.
    pub mu_f: f64,
    /// Static hardware power excluding the surface elements, watts.
    pub static_power: f64,
    /// Hardware power per active surface element, watts.
    pub element_power: f64,
    /// Bits fed back to the controller per active element.
    pub feedback_bits: f64,
    /// Duration of one pilot tone, seconds.
    pub pilot_duration: f64,
    /// Total frame duration, seconds.
    pub frame_duration: f64,
    /// Number of elements physically present on the surface.
    pub n_elements: usize,
    /// Ratio of line-of-sight power to total scattered power.
    pub rice_los_ratio: f64,
}

impl SystemParams {
    /// Receive SNR scale: `tx_power * path_loss / (bandwidth * noise_psd)`.
    pub fn beta(&self) -> f64 {
        self.tx_power * self.path_loss / (self.bandwidth * self.noise_psd)
    }

    /// Same parameters with a different transmit power; used by power sweeps.
    pub fn with_tx_power(mut self, watts: f64) -> Self {
        self.tx_power = watts;
        self
    }

    /// Same parameters with a different per-element hardware power.
    pub fn with_element_power(mut self, watts: f64) -> Self {
        self.element_power = watts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tx_power", self.tx_power),
            ("feedback_power", self.feedback_power),
            ("pilot_power", self.pilot_power),
            ("bandwidth", self.bandwidth),
            ("feedback_bandwidth", self.feedback_bandwidth),
            ("noise_psd", self.noise_psd),
            ("static_power", self.static_power),
            ("element_power", self.element_power),
            ("pilot_duration", self.pilot_duration),
            ("frame_duration", self.frame_duration),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!(
                    "`{name}` must be strictly positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("path_loss", self.path_loss),
            ("feedback_path_loss", self.feedback_path_loss),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Validation(format!(
                    "`{name}` must be in (0, 1] on the linear scale, got {v}"
                )));
            }
        }
        for (name, v) in [("mu", self.mu), ("mu_f", self.mu_f)] {
            if !(v >= 1.0) || !v.is_finite() {
                return Err(Error::Validation(format!("`{name}` must be >= 1, got {v}")));
            }
        }
        if !(self.feedback_bits >= 0.0) || !self.feedback_bits.is_finite() {
            return Err(Error::Validation(format!(
                "`feedback_bits` must be non-negative, got {}",
                self.feedback_bits
            )));
        }
        if !(self.rice_los_ratio >= 0.0) || !self.rice_los_ratio.is_finite() {
            return Err(Error::Validation(format!(
                "`rice_los_ratio` must be non-negative, got {}",
                self.rice_los_ratio
            )));
        }
        if self.n_elements < 1 {
            return Err(Error::Validation("`n_elements` must be >= 1".into()));
        }
        // Estimating even a single element takes two pilot tones.
        if self.frame_duration <= 2.0 * self.pilot_duration {
            return Err(Error::Validation(format!(
                "`frame_duration` ({}) must exceed twice `pilot_duration` ({})",
                self.frame_duration, self.pilot_duration
            )));
        }
        Ok(())
    }

    /// Build parameters from a flat key/value map.
    ///
    /// Power-valued settings accept either a `<key>_dbm` or a `<key>_w`
    /// entry (exactly one); path losses accept `<key>_db` (positive
    /// attenuation) or a bare linear value. Unknown keys are rejected.
    pub fn from_config(raw: &BTreeMap<String, f64>) -> Result<SystemParams> {
        for (k, v) in raw {
            if !v.is_finite() {
                return Err(Error::Config(format!("value for `{k}` is not finite")));
            }
        }
        let mut map = raw.clone();

        let params = SystemParams {
            tx_power: take_power(&mut map, "tx_power")?,
            feedback_power: take_power(&mut map, "feedback_power")?,
            pilot_power: take_power(&mut map, "pilot_power")?,
            bandwidth: take_required(&mut map, "bandwidth_hz")?,
            feedback_bandwidth: take_required(&mut map, "feedback_bandwidth_hz")?,
            noise_psd: take_either(&mut map, "noise_psd_dbm_hz", "noise_psd_w_hz", true)?
                .ok_or_else(|| missing("noise_psd_dbm_hz", "noise_psd_w_hz"))?,
            path_loss: take_loss(&mut map, "path_loss")?
                .ok_or_else(|| missing("path_loss_db", "path_loss"))?,
            feedback_path_loss: f64::NAN, // filled below, defaults to path_loss
            mu: take_optional(&mut map, "mu", 1.0)?,
            mu_f: take_optional(&mut map, "mu_f", 1.0)?,
            static_power: take_power(&mut map, "static_power")?,
            element_power: take_power(&mut map, "element_power")?,
            feedback_bits: take_optional(&mut map, "feedback_bits", 16.0)?,
            pilot_duration: take_required(&mut map, "pilot_duration_s")?,
            frame_duration: take_optional(&mut map, "frame_duration_s", 1.0)?,
            n_elements: take_required(&mut map, "n_elements")? as usize,
            rice_los_ratio: take_optional(&mut map, "rice_los_ratio", 4.0)?,
        };
        let feedback_path_loss = take_loss(&mut map, "feedback_path_loss")?;
        let params = SystemParams {
            feedback_path_loss: feedback_path_loss.unwrap_or(params.path_loss),
            ..params
        };

        if let Some(key) = map.keys().next() {
            return Err(Error::Config(format!("unknown configuration key `{key}`")));
        }
        params.validate()?;
        Ok(params)
    }

    /// Parse a TOML config file into parameters.
    pub fn from_config_file(path: &Path) -> Result<SystemParams> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config(&parse_flat_toml(&text)?)
    }
}

/// Parse a flat TOML document of numeric values into a key/value map.
pub fn parse_flat_toml(text: &str) -> Result<BTreeMap<String, f64>> {
    let table: toml::Table = text
        .parse()
        .map_err(|e| Error::Config(format!("cannot parse config: {e}")))?;
    let mut map = BTreeMap::new();
    for (key, value) in table {
        let num = match value {
            toml::Value::Float(f) => f,
            toml::Value::Integer(i) => i as f64,
            other => {
                return Err(Error::Config(format!(
                    "value for `{key}` must be numeric, got {other}"
                )))
            }
        };
        map.insert(key, num);
    }
    Ok(map)
}

fn missing(a: &str, b: &str) -> Error {
    Error::Config(format!("missing configuration key `{a}` (or `{b}`)"))
}

fn take_required(map: &mut BTreeMap<String, f64>, key: &str) -> Result<f64> {
    map.remove(key)
        .ok_or_else(|| Error::Config(format!("missing configuration key `{key}`")))
}

fn take_optional(map: &mut BTreeMap<String, f64>, key: &str, default: f64) -> Result<f64> {
    Ok(map.remove(key).unwrap_or(default))
}

/// Take one of two alternative keys; `first_is_dbm` converts the first form.
fn take_either(
    map: &mut BTreeMap<String, f64>,
    dbm_key: &str,
    linear_key: &str,
    first_is_dbm: bool,
) -> Result<Option<f64>> {
    match (map.remove(dbm_key), map.remove(linear_key)) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "both `{dbm_key}` and `{linear_key}` are set; pick one"
        ))),
        (Some(dbm), None) => Ok(Some(if first_is_dbm {
            units::dbm_to_watt(dbm)
        } else {
            dbm
        })),
        (None, Some(lin)) => Ok(Some(lin)),
        (None, None) => Ok(None),
    }
}

fn take_power(map: &mut BTreeMap<String, f64>, base: &str) -> Result<f64> {
    take_either(map, &format!("{base}_dbm"), &format!("{base}_w"), true)?
        .ok_or_else(|| missing(&format!("{base}_dbm"), &format!("{base}_w")))
}

fn take_loss(map: &mut BTreeMap<String, f64>, base: &str) -> Result<Option<f64>> {
    match (
        map.remove(&format!("{base}_db")),
        map.remove(&format!("{base}")),
    ) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "both `{base}_db` and `{base}` are set; pick one"
        ))),
        (Some(db), None) => Ok(Some(units::loss_db_to_linear(db))),
        (None, Some(lin)) => Ok(Some(lin)),
        (None, None) => Ok(None),
    }
}

/// Time spent reporting the configuration of a single element back to the
/// surface controller, seconds. Multiplying by the active element count
/// gives the total feedback time.
pub fn feedback_slot_time(params: &SystemParams, feedback_gain: Complex64) -> Result<f64> {
    let gain = feedback_gain.norm_sqr() * params.feedback_path_loss;
    if !(gain > 0.0) || !gain.is_finite() {
        return Err(Error::DegenerateChannel(format!(
            "feedback gain {gain} makes the feedback time diverge"
        )));
    }
    let snr = params.feedback_power * gain / (params.noise_psd * params.feedback_bandwidth);
    Ok(params.feedback_bits / (params.feedback_bandwidth * (1.0 + snr).log2()))
}

/// How the per-element power slope is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerSlopeConvention {
    /// Term-by-term expansion of the frame power budget. Guarantees that
    /// `gamma + psi * n` reproduces the budget for every element count.
    #[default]
    Expanded,
    /// Compact form that folds the feedback slot into the frame-fraction
    /// slope; it matches `Expanded` only when
    /// `mu_f * feedback_power - mu * tx_power == 1`.
    Compact,
}

/// Scalars derived from the parameters and one feedback-channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedConstants {
    /// Receive SNR scale.
    pub beta: f64,
    /// Usable frame fraction before any element is activated.
    pub c: f64,
    /// Frame fraction consumed per active element (estimation + feedback).
    pub d: f64,
    /// Element-count-independent power draw, watts.
    pub gamma: f64,
    /// Power draw per active element, watts.
    pub psi: f64,
    /// Cap keeping the received power below the transmitted power.
    pub n_phys: usize,
    /// Cap keeping the overhead inside the frame: floor(c / d).
    pub n_frame: usize,
    /// min(hardware cap, n_phys, n_frame).
    pub n_upper: usize,
}

/// Derive the objective constants for one feedback-channel draw, using the
/// expanded power slope.
pub fn derive_constants(
    params: &SystemParams,
    feedback_gain: Complex64,
    alpha_max: f64,
) -> Result<DerivedConstants> {
    derive_constants_with(
        params,
        feedback_gain,
        alpha_max,
        PowerSlopeConvention::Expanded,
    )
}

pub fn derive_constants_with(
    params: &SystemParams,
    feedback_gain: Complex64,
    alpha_max: f64,
    slope: PowerSlopeConvention,
) -> Result<DerivedConstants> {
    params.validate()?;
    if !(alpha_max > 0.0) || !alpha_max.is_finite() {
        return Err(Error::Domain(format!(
            "alpha_max must be strictly positive, got {alpha_max}"
        )));
    }

    let pilot_frac = params.pilot_duration / params.frame_duration;
    let slot = feedback_slot_time(params, feedback_gain)?;
    let slot_frac = slot / params.frame_duration;

    let beta = params.beta();
    let c = 1.0 - pilot_frac;
    let d = pilot_frac + slot_frac;

    let gamma = params.static_power
        + params.pilot_power * pilot_frac
        + params.mu * params.tx_power * c;
    let data_amp = params.mu * params.tx_power;
    let psi = match slope {
        PowerSlopeConvention::Expanded => {
            (params.pilot_power - data_amp) * pilot_frac
                + slot_frac * (params.mu_f * params.feedback_power - data_amp)
                + params.element_power
        }
        PowerSlopeConvention::Compact => {
            (params.pilot_power - data_amp - 1.0) * pilot_frac + d + params.element_power
        }
    };

    let n_phys_f = (1.0 / (alpha_max * params.path_loss.sqrt()))
        .min((beta / params.path_loss).sqrt())
        .floor();
    let n_frame_f = (c / d).floor();
    let n_phys = clamp_to_usize(n_phys_f);
    let n_frame = clamp_to_usize(n_frame_f);
    let n_upper = params.n_elements.min(n_phys).min(n_frame);
    if n_upper < 1 {
        return Err(Error::Infeasible(format!(
            "no feasible element count (hardware {}, physical {n_phys}, frame {n_frame})",
            params.n_elements
        )));
    }

    Ok(DerivedConstants {
        beta,
        c,
        d,
        gamma,
        psi,
        n_phys,
        n_frame,
        n_upper,
    })
}

fn clamp_to_usize(x: f64) -> usize {
    if x >= usize::MAX as f64 {
        usize::MAX
    } else if x > 0.0 {
        x as usize
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    pub(crate) fn reference_params() -> SystemParams {
        SystemParams {
            tx_power: 1.0,
            feedback_power: 1.0,
            pilot_power: 0.01,
            bandwidth: 5e6,
            feedback_bandwidth: 1e6,
            noise_psd: units::dbm_to_watt(-174.0),
            path_loss: 1e-11,
            feedback_path_loss: 1e-11,
            mu: 1.0,
            mu_f: 1.0,
            static_power: units::dbm_to_watt(45.0),
            element_power: 0.01,
            feedback_bits: 16.0,
            pilot_duration: 5e-4,
            frame_duration: 1.0,
            n_elements: 200,
            rice_los_ratio: 4.0,
        }
    }

    fn reference_config() -> BTreeMap<String, f64> {
        [
            ("tx_power_dbm", 30.0),
            ("feedback_power_dbm", 30.0),
            ("pilot_power_dbm", 10.0),
            ("bandwidth_hz", 5e6),
            ("feedback_bandwidth_hz", 1e6),
            ("noise_psd_dbm_hz", -174.0),
            ("path_loss_db", 110.0),
            ("mu", 1.0),
            ("mu_f", 1.0),
            ("static_power_dbm", 45.0),
            ("element_power_dbm", 10.0),
            ("feedback_bits", 16.0),
            ("pilot_duration_s", 5e-4),
            ("frame_duration_s", 1.0),
            ("n_elements", 200.0),
            ("rice_los_ratio", 4.0),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    #[test]
    fn config_converts_db_scales() {
        let p = SystemParams::from_config(&reference_config()).unwrap();
        assert!(rel_err(p.noise_psd, 3.981071705534986e-21) < 1e-12);
        assert!(rel_err(p.path_loss, 1e-11) < 1e-12);
        assert!(rel_err(p.tx_power, 1.0) < 1e-12);
        // Feedback path loss defaults to the forward one.
        assert_eq!(p.feedback_path_loss, p.path_loss);
    }

    #[test]
    fn config_zero_dbm_is_one_milliwatt() {
        let mut cfg = reference_config();
        cfg.insert("tx_power_dbm".into(), 0.0);
        let p = SystemParams::from_config(&cfg).unwrap();
        assert!(rel_err(p.tx_power, 1e-3) < 1e-15);
    }

    #[test]
    fn config_missing_key_names_it() {
        let mut cfg = reference_config();
        cfg.remove("pilot_power_dbm");
        let err = SystemParams::from_config(&cfg).unwrap_err();
        assert!(err.to_string().contains("pilot_power_dbm"), "{err}");
    }

    #[test]
    fn config_rejects_unknown_and_conflicting_keys() {
        let mut cfg = reference_config();
        cfg.insert("tx_powr_dbm".into(), 10.0);
        assert!(SystemParams::from_config(&cfg)
            .unwrap_err()
            .to_string()
            .contains("tx_powr_dbm"));

        let mut cfg = reference_config();
        cfg.insert("tx_power_w".into(), 1.0);
        assert!(matches!(
            SystemParams::from_config(&cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn config_rejects_non_positive_linear_value() {
        let mut cfg = reference_config();
        cfg.insert("bandwidth_hz".into(), 0.0);
        assert!(matches!(
            SystemParams::from_config(&cfg),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn beta_reference_value() {
        let p = reference_params();
        assert!(rel_err(p.beta(), 502.3772863019143) < 1e-12);
    }

    #[test]
    fn beta_linear_in_tx_power() {
        let p = reference_params();
        let doubled = p.clone().with_tx_power(2.0 * p.tx_power);
        assert!(rel_err(doubled.beta(), 2.0 * p.beta()) < 1e-15);
    }

    #[test]
    fn beta_identity_case() {
        let mut p = reference_params();
        p.path_loss = 1.0;
        p.bandwidth = 2.0;
        p.noise_psd = 0.5;
        p.tx_power = 1.0;
        assert_eq!(p.beta(), 1.0);
    }

    #[test]
    fn feedback_slot_reference_value() {
        let p = reference_params();
        let t = feedback_slot_time(&p, Complex64::new(1.0, 0.0)).unwrap();
        assert!(rel_err(t, 1.4165397251962464e-6) < 1e-12);
    }

    #[test]
    fn feedback_slot_collapses_to_symbol_time() {
        // log2(1 + snr) = 16 with 16 bits per element leaves 1/bandwidth.
        let mut p = reference_params();
        p.feedback_path_loss = 1.0;
        p.noise_psd = 1.0;
        p.feedback_bandwidth = 1e6;
        p.feedback_power = (2f64.powi(16) - 1.0) * 1e6;
        let t = feedback_slot_time(&p, Complex64::new(1.0, 0.0)).unwrap();
        assert!(rel_err(t, 1e-6) < 1e-12);
    }

    #[test]
    fn feedback_slot_no_bits_no_time() {
        let mut p = reference_params();
        p.feedback_bits = 0.0;
        let t = feedback_slot_time(&p, Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn feedback_slot_zero_gain_is_degenerate() {
        let p = reference_params();
        assert!(matches!(
            feedback_slot_time(&p, Complex64::new(0.0, 0.0)),
            Err(Error::DegenerateChannel(_))
        ));
    }

    #[test]
    fn derived_frame_fraction() {
        let p = reference_params();
        let dc = derive_constants(&p, Complex64::new(1.0, 0.0), 4.0).unwrap();
        assert!(rel_err(dc.c, 0.9995) < 1e-15);
        assert!(dc.d > 0.0 && dc.c < 1.0);
    }

    #[test]
    fn derived_long_frame_limit() {
        let mut p = reference_params();
        p.frame_duration = 1e12;
        let dc = derive_constants(&p, Complex64::new(1.0, 0.0), 4.0).unwrap();
        assert!(dc.c > 1.0 - 1e-12);
        assert!(dc.d < 1e-12);
        assert_eq!(dc.n_upper, p.n_elements, "hardware cap binds");
    }

    #[test]
    fn derived_hardware_cap_binds() {
        let p = reference_params();
        let dc = derive_constants(&p, Complex64::new(1.0, 0.0), 4.0).unwrap();
        // sqrt(beta / path_loss) ~ 7.09e6, far above the 200 elements present.
        assert!(rel_err((dc.beta / p.path_loss).sqrt(), 7.087857830839402e6) < 1e-12);
        assert_eq!(dc.n_upper, 200);
    }

    #[test]
    fn derived_infeasible_when_overhead_eats_frame() {
        let mut p = reference_params();
        // A feedback link this bad takes more than a frame per element.
        p.feedback_power = 1e-12;
        p.feedback_bandwidth = 1e-3;
        assert!(matches!(
            derive_constants(&p, Complex64::new(1.0, 0.0), 4.0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn power_slope_conventions_match_only_at_unit_gap() {
        let mut p = reference_params();
        let hf = Complex64::new(1.0, 0.0);
        // mu_f * feedback_power - mu * tx_power = 1 here.
        p.tx_power = 0.5;
        p.feedback_power = 1.5;
        let a = derive_constants_with(&p, hf, 4.0, PowerSlopeConvention::Expanded).unwrap();
        let b = derive_constants_with(&p, hf, 4.0, PowerSlopeConvention::Compact).unwrap();
        assert!(rel_err(a.psi, b.psi) < 1e-12);

        p.feedback_power = 3.0;
        let a = derive_constants_with(&p, hf, 4.0, PowerSlopeConvention::Expanded).unwrap();
        let b = derive_constants_with(&p, hf, 4.0, PowerSlopeConvention::Compact).unwrap();
        assert!((a.psi - b.psi).abs() > 1e-9);
    }

    #[test]
    fn timing_identity_matches_direct_accounting() {
        let p = reference_params();
        let hf = Complex64::new(0.7, -1.3);
        let slot = feedback_slot_time(&p, hf).unwrap();
        let dc = derive_constants(&p, hf, 4.0).unwrap();
        for n in 0..=400u32 {
            let n = f64::from(n);
            let direct = 1.0
                - (p.pilot_duration * (n + 1.0) + n * slot) / p.frame_duration;
            let affine = dc.c - dc.d * n;
            assert!(
                (direct - affine).abs() <= 1e-12 * direct.abs().max(1.0),
                "n={n}: {direct} vs {affine}"
            );
        }
    }
}
