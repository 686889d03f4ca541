//! Shared domain types and physical constants.
//!
//! Unit conventions used throughout the crate:
//!
//! * energies are joules per sample step,
//! * temperatures are degrees Celsius,
//! * volumes are cubic metres (flows are cubic metres per step).
//!
//! Fitted coefficients carry whatever units make the energy balance
//! dimensionally consistent under that convention.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Volumetric heat capacity of air near 25 °C, J/(m³·K).
pub const AIR_HEAT_CAPACITY: f64 = 1210.0;

/// Default passenger body temperature, °C.
pub const BODY_TEMPERATURE: f64 = 37.0;

/// Default sample period, seconds.
pub const DEFAULT_STEP_SECS: u32 = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstantsError {
    #[error("air heat capacity must be positive, got {0}")]
    HeatCapacity(f64),
    #[error("station air volume must be positive, got {0}")]
    AirVolume(f64),
    #[error("ventilator coefficient must be non-negative, got {0}")]
    VentilatorCoefficient(f64),
    #[error("sample step must be positive")]
    Step,
    #[error("body temperature {0} °C outside [30, 40]")]
    BodyTemperature(f64),
}

/// Known physics of a station. Everything here is measured or taken from
/// datasheets; none of it is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationConstants {
    /// Volumetric heat capacity of air, J/(m³·K).
    #[serde(default = "default_c")]
    pub c: f64,
    /// Passenger body temperature, °C.
    #[serde(default = "default_t_p")]
    pub t_p: f64,
    /// Air volume of the station, m³.
    pub m_z: f64,
    /// Ventilator airflow coefficient: m³ per step per (J/step)^(1/3).
    #[serde(default)]
    pub beta_v: f64,
    /// Sample period in seconds.
    #[serde(default = "default_step")]
    pub step: u32,
}

fn default_c() -> f64 {
    AIR_HEAT_CAPACITY
}

fn default_t_p() -> f64 {
    BODY_TEMPERATURE
}

fn default_step() -> u32 {
    DEFAULT_STEP_SECS
}

impl StationConstants {
    pub fn new(m_z: f64, beta_v: f64) -> Self {
        Self {
            c: AIR_HEAT_CAPACITY,
            t_p: BODY_TEMPERATURE,
            m_z,
            beta_v,
            step: DEFAULT_STEP_SECS,
        }
    }

    pub fn validate(&self) -> Result<(), ConstantsError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ConstantsError::HeatCapacity(self.c));
        }
        if !(self.m_z > 0.0 && self.m_z.is_finite()) {
            return Err(ConstantsError::AirVolume(self.m_z));
        }
        if !(self.beta_v >= 0.0 && self.beta_v.is_finite()) {
            return Err(ConstantsError::VentilatorCoefficient(self.beta_v));
        }
        if self.step == 0 {
            return Err(ConstantsError::Step);
        }
        if !(30.0..=40.0).contains(&self.t_p) {
            return Err(ConstantsError::BodyTemperature(self.t_p));
        }
        Ok(())
    }

    /// Heat capacity of the whole station air volume, J/K.
    pub fn zone_capacity(&self) -> f64 {
        self.c * self.m_z
    }
}

/// HVAC operating regime of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HvacMode {
    /// Outdoor air is the only cooling source; the refrigerator is off.
    NewAir,
    /// New-air intake closed, refrigerator running.
    Refrigerator,
    /// Ventilator and refrigerator both running.
    Mixed,
    Off,
}

impl HvacMode {
    pub const ALL: [HvacMode; 4] = [
        HvacMode::NewAir,
        HvacMode::Refrigerator,
        HvacMode::Mixed,
        HvacMode::Off,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HvacMode::NewAir => "new_air",
            HvacMode::Refrigerator => "refrigerator",
            HvacMode::Mixed => "mixed",
            HvacMode::Off => "off",
        }
    }

    pub fn uses_ventilator(self) -> bool {
        matches!(self, HvacMode::NewAir | HvacMode::Mixed)
    }

    pub fn uses_refrigerator(self) -> bool {
        matches!(self, HvacMode::Refrigerator | HvacMode::Mixed)
    }
}

impl fmt::Display for HvacMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for HvacMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "new_air" => Ok(HvacMode::NewAir),
            "refrigerator" => Ok(HvacMode::Refrigerator),
            "mixed" => Ok(HvacMode::Mixed),
            "off" => Ok(HvacMode::Off),
            other => Err(format!("unknown HVAC mode `{other}`")),
        }
    }
}

/// One minute-aligned sample after ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Mean indoor temperature, °C.
    pub t_in: f64,
    /// Mean outdoor temperature, °C.
    pub t_out: f64,
    /// Passengers during the step.
    pub n: f64,
    /// Refrigerator water inlet (warm return), °C.
    pub t_water_in: f64,
    /// Refrigerator water outlet (chilled), °C.
    pub t_water_out: f64,
    /// Cooling-water volume over the step, m³.
    pub v_cool_w: f64,
    /// Ventilator energy over the step, J.
    pub e_v: f64,
    pub mode: HvacMode,
    /// `t_in` of the next frame minus this one; `None` on the last frame.
    pub delta: Option<f64>,
}

/// Fitted coefficient vector.
///
/// `beta_ac` is stored as a non-negative magnitude. Formulas that need the
/// regression sign apply the minus explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    /// Passenger load coefficient.
    pub c_p: f64,
    /// Envelope plus infiltration coefficient.
    pub alpha: f64,
    /// Refrigerator transport coefficient.
    pub beta_ac: f64,
}

impl Theta {
    pub fn new(c_p: f64, alpha: f64, beta_ac: f64) -> Self {
        Self {
            c_p,
            alpha,
            beta_ac,
        }
    }

    pub fn is_feasible(&self) -> bool {
        theta_is_feasible(self)
    }

    /// Component-wise `|self - truth| / |truth|`.
    pub fn relative_errors(&self, truth: &Theta) -> [f64; 3] {
        let rel = |x: f64, t: f64| (x - t).abs() / t.abs();
        [
            rel(self.c_p, truth.c_p),
            rel(self.alpha, truth.alpha),
            rel(self.beta_ac, truth.beta_ac),
        ]
    }

    pub fn scaled(&self, k: f64) -> Theta {
        Theta::new(self.c_p * k, self.alpha * k, self.beta_ac * k)
    }
}

pub fn theta_is_feasible(theta: &Theta) -> bool {
    theta.c_p > 0.0 && theta.alpha > 0.0 && theta.beta_ac >= 0.0
}

/// Per-frame load decomposition and supply for a fitted (or true) theta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSignature {
    pub l_total: Vec<f64>,
    /// Passenger-introduced load.
    pub l_passenger: Vec<f64>,
    /// Environment-introduced load.
    pub l_environment: Vec<f64>,
    pub supply: Vec<f64>,
    /// `l_total - supply - c·M_z·Δ`; absent on the last frame.
    pub residual: Vec<Option<f64>>,
    /// Σ|L - S - c·M_z·Δ| / Σ L over frames with a successor.
    pub relative_error: Option<f64>,
    /// Same ratio computed on running sums.
    pub integrated_relative_error: Option<f64>,
    /// New-air frames whose supply came out negative (outdoor warmer than indoor).
    pub negative_new_air_frames: usize,
}

impl LoadSignature {
    pub fn len(&self) -> usize {
        self.l_total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l_total.is_empty()
    }

    pub fn total_load(&self) -> f64 {
        self.l_total.iter().sum()
    }

    pub fn total_passenger(&self) -> f64 {
        self.l_passenger.iter().sum()
    }

    pub fn total_environment(&self) -> f64 {
        self.l_environment.iter().sum()
    }

    pub fn total_supply(&self) -> f64 {
        self.supply.iter().sum()
    }

    /// Shares of passenger and environment load in the summed load, or
    /// `None` when the two totals cancel.
    pub fn shares(&self) -> Option<(f64, f64)> {
        let p = self.total_passenger();
        let e = self.total_environment();
        let total = p + e;
        if total == 0.0 || !total.is_finite() {
            return None;
        }
        Some((p / total, e / total))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasibility_examples() {
        assert!(theta_is_feasible(&Theta::new(83.0, 53703.0, 1290071.0)));
        assert!(!theta_is_feasible(&Theta::new(0.0, 1.0, 1.0)));
        assert!(theta_is_feasible(&Theta::new(1.0, 1.0, 0.0)));
        assert!(!theta_is_feasible(&Theta::new(1.0, 0.0, 1.0)));
        assert!(!theta_is_feasible(&Theta::new(1.0, 1.0, -1e-12)));
        assert!(!theta_is_feasible(&Theta::new(f64::NAN, 1.0, 1.0)));
    }

    #[test]
    fn constants_validation() {
        let ok = StationConstants::new(1000.0, 0.5);
        assert_eq!(ok.validate(), Ok(()));
        assert_eq!(ok.c, 1210.0);
        assert_eq!(ok.t_p, 37.0);

        let mut bad = ok;
        bad.m_z = 0.0;
        assert!(matches!(bad.validate(), Err(ConstantsError::AirVolume(_))));
        let mut bad = ok;
        bad.t_p = 41.0;
        assert!(matches!(
            bad.validate(),
            Err(ConstantsError::BodyTemperature(_))
        ));
        let mut bad = ok;
        bad.beta_v = -1.0;
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.step = 0;
        assert_eq!(bad.validate(), Err(ConstantsError::Step));
    }

    #[test]
    fn constants_json_defaults() {
        let k: StationConstants = serde_json::from_str(r#"{"m_z": 5000}"#).unwrap();
        assert_eq!(k, StationConstants::new(5000.0, 0.0));
    }

    #[test]
    fn mode_round_trips_through_str() {
        for mode in HvacMode::ALL {
            assert_eq!(mode.as_str().parse::<HvacMode>().unwrap(), mode);
        }
        assert!("heating".parse::<HvacMode>().is_err());
    }
}
