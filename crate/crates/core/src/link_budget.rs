//! Free-space radar link budget.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thermal noise density at room temperature, dBm/Hz.
pub const THERMAL_FLOOR_DBM_HZ: f64 = -174.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkBudgetConfig {
    /// dBi.
    pub tx_gain: f64,
    /// dBi.
    pub rx_gain: f64,
    /// dBm.
    pub tx_power: f64,
    /// Metres.
    pub wavelength: f64,
    /// Radar cross-section, dBsm.
    pub rcs: f64,
    /// Receiver bandwidth, Hz.
    pub bandwidth: f64,
    /// dB.
    pub noise_figure: f64,
    /// dB.
    pub desired_snr: f64,
    /// Radar-to-target distance, metres.
    pub range: f64,
}

impl Default for LinkBudgetConfig {
    /// 77 GHz FMCW front end looking at a chest 0.45 m away.
    fn default() -> Self {
        LinkBudgetConfig {
            tx_gain: 10.0,
            rx_gain: 30.0,
            tx_power: 12.0,
            wavelength: 3.9e-3,
            rcs: -20.0,
            bandwidth: 3.8e9,
            noise_figure: 15.0,
            desired_snr: 10.0,
            range: 0.45,
        }
    }
}

impl LinkBudgetConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.tx_gain,
            self.rx_gain,
            self.tx_power,
            self.wavelength,
            self.rcs,
            self.bandwidth,
            self.noise_figure,
            self.desired_snr,
            self.range,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("link budget parameters must be finite"));
        }
        if self.bandwidth <= 0.0 {
            return Err(Error::invalid(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if self.wavelength <= 0.0 {
            return Err(Error::invalid(format!("wavelength must be positive, got {}", self.wavelength)));
        }
        if self.range <= 0.0 {
            return Err(Error::invalid(format!("range must be positive, got {}", self.range)));
        }
        Ok(())
    }

    /// Everything in the radar equation except `1 / R^4`, in dBm·m⁴.
    fn reflected_dbm(&self) -> f64 {
        let lin = db_to_linear(self.tx_gain)
            * db_to_linear(self.rx_gain)
            * self.wavelength
            * self.wavelength
            * db_to_linear(self.rcs)
            * db_to_linear(self.tx_power)
            / (4.0 * PI).powi(3);
        linear_to_db(lin)
    }
}

/// Power reaching the receiver at `cfg.range`, dBm.
pub fn received_power(cfg: &LinkBudgetConfig) -> f64 {
    cfg.reflected_dbm() - 40.0 * cfg.range.log10()
}

/// Weakest signal the receiver can use, dBm.
pub fn min_detectable_power(cfg: &LinkBudgetConfig) -> f64 {
    THERMAL_FLOOR_DBM_HZ + linear_to_db(cfg.bandwidth) + cfg.noise_figure + cfg.desired_snr
}

/// Range at which the received power falls to the detection floor, metres.
pub fn max_range(cfg: &LinkBudgetConfig) -> f64 {
    10f64.powf((cfg.reflected_dbm() - min_detectable_power(cfg)) / 40.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgetReport {
    pub range_m: f64,
    pub received_power_dbm: f64,
    pub min_detectable_power_dbm: f64,
    pub max_range_m: f64,
}

impl LinkBudgetReport {
    pub fn new(cfg: &LinkBudgetConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(LinkBudgetReport {
            range_m: cfg.range,
            received_power_dbm: received_power(cfg),
            min_detectable_power_dbm: min_detectable_power(cfg),
            max_range_m: max_range(cfg),
        })
    }

    pub fn table(&self) -> String {
        format!(
            "{:<28}{:>12.3} m\n{:<28}{:>12.3} dBm\n{:<28}{:>12.3} dBm\n{:<28}{:>12.3} m\n",
            "range",
            self.range_m,
            "received power",
            self.received_power_dbm,
            "min detectable power",
            self.min_detectable_power_dbm,
            "max detectable range",
            self.max_range_m
        )
    }
}
