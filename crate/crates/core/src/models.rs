//! Load, supply and energy-balance evaluation.
//!
//! For indoor temperature `T`, outdoor `T_o` and `n` passengers in a step:
//!
//! ```text
//! load     L  = c_p·n·(T_p - T) + α·(T_o - T)
//! supply   S  = c·β_v·E_v^(1/3)·(T - T_o)          (ventilator branch)
//!             + (T_w_in - T_w_out)·V_w·β_ac        (refrigerator branch)
//! balance  L - S = c·M_z·(T(t+1) - T(t))
//! ```
//!
//! The supply branches are gated by the frame's [`HvacMode`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::FrameSeries;
use crate::types::{Frame, HvacMode, LoadSignature, StationConstants, Theta};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("frame has no successor, so its temperature change is unknown")]
    MissingDelta,
}

/// Air volume moved by a ventilator over one step, from the energy it drew
/// (fan affinity: flow grows with the cube root of power).
pub fn fan_airflow(e_v: f64, beta_v: f64) -> f64 {
    beta_v * e_v.cbrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadParts {
    pub total: f64,
    /// Passenger-introduced load.
    pub passenger: f64,
    /// Environment-introduced load.
    pub environment: f64,
}

pub fn load(frame: &Frame, theta: &Theta, constants: &StationConstants) -> LoadParts {
    let passenger = theta.c_p * passenger_regressor(frame, constants);
    let environment = theta.alpha * (frame.t_out - frame.t_in);
    LoadParts {
        total: passenger + environment,
        passenger,
        environment,
    }
}

/// `n·(T_p - T)`, the passenger column of the regression.
pub fn passenger_regressor(frame: &Frame, constants: &StationConstants) -> f64 {
    frame.n * (constants.t_p - frame.t_in)
}

/// `V_w·(T_w_in - T_w_out)`, the refrigerator column of the regression.
pub fn refrigerator_regressor(frame: &Frame) -> f64 {
    frame.v_cool_w * (frame.t_water_in - frame.t_water_out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SupplyBreakdown {
    pub new_air_part: f64,
    pub refrigerator_part: f64,
    pub total: f64,
}

/// Ventilator cooling for the frame's readings, regardless of mode.
pub fn new_air_supply(frame: &Frame, constants: &StationConstants) -> f64 {
    constants.c * fan_airflow(frame.e_v, constants.beta_v) * (frame.t_in - frame.t_out)
}

pub fn supply(frame: &Frame, theta: &Theta, constants: &StationConstants) -> SupplyBreakdown {
    let new_air_part = if frame.mode.uses_ventilator() {
        new_air_supply(frame, constants)
    } else {
        0.0
    };
    let refrigerator_part = if frame.mode.uses_refrigerator() {
        refrigerator_regressor(frame) * theta.beta_ac
    } else {
        0.0
    };
    SupplyBreakdown {
        new_air_part,
        refrigerator_part,
        total: new_air_part + refrigerator_part,
    }
}

/// `c·M_z·Δ`, the heat stored in the station air over the step.
pub fn balance_target(frame: &Frame, constants: &StationConstants) -> Result<f64, ModelError> {
    frame
        .delta
        .map(|d| constants.zone_capacity() * d)
        .ok_or(ModelError::MissingDelta)
}

/// Evaluates load, supply and balance residual on every frame.
pub fn load_signature(
    series: &FrameSeries,
    theta: &Theta,
    constants: &StationConstants,
) -> LoadSignature {
    let n = series.len();
    let mut sig = LoadSignature {
        l_total: Vec::with_capacity(n),
        l_passenger: Vec::with_capacity(n),
        l_environment: Vec::with_capacity(n),
        supply: Vec::with_capacity(n),
        residual: Vec::with_capacity(n),
        relative_error: None,
        integrated_relative_error: None,
        negative_new_air_frames: 0,
    };

    let (mut abs_sum, mut load_sum) = (0.0, 0.0);
    let (mut run_resid, mut run_load) = (0.0, 0.0);
    let (mut int_abs_sum, mut int_load_sum) = (0.0, 0.0);
    for frame in &series.frames {
        let l = load(frame, theta, constants);
        let s = supply(frame, theta, constants);
        if frame.mode == HvacMode::NewAir && s.new_air_part < 0.0 {
            sig.negative_new_air_frames += 1;
        }
        let residual = balance_target(frame, constants)
            .ok()
            .map(|b| l.total - s.total - b);
        if let Some(r) = residual {
            abs_sum += r.abs();
            load_sum += l.total;
            run_resid += r;
            run_load += l.total;
            int_abs_sum += run_resid.abs();
            int_load_sum += run_load;
        }
        sig.l_total.push(l.total);
        sig.l_passenger.push(l.passenger);
        sig.l_environment.push(l.environment);
        sig.supply.push(s.total);
        sig.residual.push(residual);
    }
    if sig.negative_new_air_frames > 0 {
        log::warn!(
            "{} new-air frames have negative supply (outdoor warmer than indoor)",
            sig.negative_new_air_frames
        );
    }
    let ratio = |num: f64, den: f64| (den != 0.0).then(|| num / den);
    sig.relative_error = ratio(abs_sum, load_sum);
    sig.integrated_relative_error = ratio(int_abs_sum, int_load_sum);
    sig
}
